"""Class balancing and user-disjoint train/dev/test splitting.

Balancing keeps every positive, prioritizes keyword-bearing negatives, and
fills the rest of the 1:N quota by seeded sampling. Splitting assigns whole
users (per class) greedily to the most deficient split so that no user's
same-class posts straddle splits and each split's post mass stays within
one user of its target ratio.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

from .corpus import Corpus
from .errors import SplitError

logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class SplitConfig:
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    neg_per_pos: int = 10
    priority_keyword: str = "ivory"
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != len(SPLITS):
            raise ValueError("need one ratio per split")
        if any(r <= 0 for r in self.ratios):
            raise ValueError("ratios must be positive")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("ratios must sum to 1")
        if self.neg_per_pos < 1:
            raise ValueError("neg_per_pos must be >= 1")
        if self.priority_keyword != self.priority_keyword.lower():
            raise ValueError("priority_keyword must be lowercase")


@dataclass
class BalanceResult:
    post_ids: set[str]
    n_positive: int
    n_keyword_negative: int
    n_sampled_negative: int
    warnings: list[str] = field(default_factory=list)


def balance_classes(corpus: Corpus, labels: dict[str, int], config: SplitConfig) -> BalanceResult:
    """Downsample negatives to neg_per_pos per positive.

    All positives are kept. Negatives containing the priority keyword
    (substring of lowercased text) are kept first; the remaining quota is
    filled by seeded uniform sampling without replacement. Quota overflow
    or shortfall keeps what exists and records a warning.
    """
    positives = sorted(pid for pid, y in labels.items() if y == 1)
    if not positives:
        raise SplitError("balance_classes requires at least one positive post")
    keyword_negs = []
    other_negs = []
    for pid in sorted(pid for pid, y in labels.items() if y == 0):
        if config.priority_keyword in corpus[pid].text.lower():
            keyword_negs.append(pid)
        else:
            other_negs.append(pid)

    quota = config.neg_per_pos * len(positives)
    warnings = []
    if len(keyword_negs) > quota:
        kept_negs = list(keyword_negs)
        sampled: list[str] = []
        warnings.append(
            "keyword negatives (%d) exceed the 1:%d quota (%d); ratio overflow"
            % (len(keyword_negs), config.neg_per_pos, quota)
        )
    else:
        need = quota - len(keyword_negs)
        if need > len(other_negs):
            sampled = list(other_negs)
            warnings.append(
                "only %d negatives available for a quota of %d"
                % (len(keyword_negs) + len(other_negs), quota)
            )
        else:
            rng = random.Random(config.rng_seed)
            sampled = sorted(rng.sample(other_negs, need))
        kept_negs = keyword_negs + sampled

    for msg in warnings:
        logger.warning("balance_classes: %s", msg)
    return BalanceResult(
        post_ids=set(positives) | set(kept_negs),
        n_positive=len(positives),
        n_keyword_negative=len(keyword_negs),
        n_sampled_negative=len(sampled),
        warnings=warnings,
    )


@dataclass
class SplitAudit:
    seed: int
    ratios: tuple[float, ...]
    user_split: dict[int, dict[str, str]]          # class -> user -> split
    split_mass: dict[int, dict[str, int]]           # class -> split -> posts
    max_user_mass: dict[int, int]                   # class -> largest user


@dataclass
class SplitAssignment:
    assignment: dict[str, str]                      # post_id -> split
    audit: SplitAudit


def greedy_user_assignment(
    user_masses: dict[str, int], ratios: tuple[float, ...], rng: random.Random
) -> dict[str, int]:
    """Assign users to ratio buckets, heaviest user first, largest deficit wins.

    The seeded shuffle only breaks ties between equal-mass users, so the
    result is invariant to input ordering.
    """
    users = list(user_masses)
    rng.shuffle(users)
    users.sort(key=lambda u: -user_masses[u])
    total = sum(user_masses.values())
    masses = [0.0] * len(ratios)
    out: dict[str, int] = {}
    for user in users:
        deficits = [ratios[i] * total - masses[i] for i in range(len(ratios))]
        best = max(range(len(ratios)), key=lambda i: (deficits[i], -i))
        out[user] = best
        masses[best] += user_masses[user]
    return out


def user_disjoint_split(
    corpus: Corpus,
    post_ids: set[str],
    labels: dict[str, int],
    config: SplitConfig,
) -> SplitAssignment:
    """Split posts 70/20/10 per class without user leakage within a class.

    Each class is split independently, so a user posting in both classes
    may legally land in different splits for each.
    """
    by_class_user: dict[int, dict[str, list[str]]] = {0: {}, 1: {}}
    for pid in sorted(post_ids):
        label = labels[pid]
        user = corpus[pid].user_id
        by_class_user[label].setdefault(user, []).append(pid)

    assignment: dict[str, str] = {}
    user_split: dict[int, dict[str, str]] = {}
    split_mass: dict[int, dict[str, int]] = {}
    max_user_mass: dict[int, int] = {}
    for cls, per_user in by_class_user.items():
        if not per_user:
            continue
        if len(per_user) < len(SPLITS):
            raise SplitError(
                "class %d has %d users; need at least %d to populate all splits"
                % (cls, len(per_user), len(SPLITS))
            )
        masses = {u: len(pids) for u, pids in per_user.items()}
        rng = random.Random("%d:%d" % (config.rng_seed, cls))
        placement = greedy_user_assignment(masses, config.ratios, rng)
        user_split[cls] = {u: SPLITS[i] for u, i in placement.items()}
        split_mass[cls] = {s: 0 for s in SPLITS}
        max_user_mass[cls] = max(masses.values())
        for user, pids in per_user.items():
            split = user_split[cls][user]
            split_mass[cls][split] += len(pids)
            for pid in pids:
                assignment[pid] = split

    audit = SplitAudit(
        seed=config.rng_seed,
        ratios=config.ratios,
        user_split=user_split,
        split_mass=split_mass,
        max_user_mass=max_user_mass,
    )
    return SplitAssignment(assignment=assignment, audit=audit)


def verify_split(
    assignment: SplitAssignment, corpus: Corpus, labels: dict[str, int]
) -> list[str]:
    """Recompute both split invariants from raw data; empty means valid.

    Checks that no user's same-class posts straddle splits and that each
    class's total ratio deviation stays within its largest user's mass.
    """
    violations: list[str] = []
    per_class_user_splits: dict[int, dict[str, set[str]]] = {}
    per_class_mass: dict[int, dict[str, int]] = {}
    per_class_user_mass: dict[int, dict[str, int]] = {}
    for pid, split in assignment.assignment.items():
        cls = labels[pid]
        user = corpus[pid].user_id
        per_class_user_splits.setdefault(cls, {}).setdefault(user, set()).add(split)
        per_class_mass.setdefault(cls, {s: 0 for s in SPLITS})[split] += 1
        per_class_user_mass.setdefault(cls, {}).setdefault(user, 0)
        per_class_user_mass[cls][user] += 1

    for cls, users in sorted(per_class_user_splits.items()):
        for user, splits in sorted(users.items()):
            if len(splits) > 1:
                violations.append(
                    "class %d user %s appears in splits %s"
                    % (cls, user, ",".join(sorted(splits)))
                )

    ratios = assignment.audit.ratios
    for cls, mass in sorted(per_class_mass.items()):
        total = sum(mass.values())
        allowed = max(per_class_user_mass[cls].values())
        for split, ratio in zip(SPLITS, ratios):
            deviation = abs(mass[split] - ratio * total)
            if deviation > allowed + 1e-9:
                violations.append(
                    "class %d split %s off target by %.2f posts, more than "
                    "one user's mass (%d)" % (cls, split, deviation, allowed)
                )
    return violations


def write_assignment_csv(assignment: SplitAssignment, path) -> None:
    """CSV of (post_id, split) with the seed echoed in the header."""
    import csv
    from pathlib import Path

    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("# seed=%d ratios=%s\n" % (assignment.audit.seed, ",".join(
            "%g" % r for r in assignment.audit.ratios)))
        writer = csv.writer(fh)
        writer.writerow(["post_id", "split"])
        for pid in sorted(assignment.assignment):
            writer.writerow([pid, assignment.assignment[pid]])
