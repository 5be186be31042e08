"""Network-propagation candidate collection from seed users.

Expansion walks follower and following edges breadth-first from the seeds,
hop by hop, under an optional discovery budget. Timelines of collected
users are fetched (newest first, capped) into one corpus. A deterministic
synthetic source substitutes for live platform access at desk scale, and a
file-backed source replays recorded crawls.
"""

from __future__ import annotations

import logging
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional, Protocol

from .corpus import Corpus, Post, ingest
from .errors import CrawlError

logger = logging.getLogger(__name__)

DEFAULT_TIMELINE_CAP = 3200


@dataclass
class SocialGraph:
    """Directed follow edges: (a, b) means a follows b."""

    nodes: set[str] = field(default_factory=set)
    follow_edges: set[tuple[str, str]] = field(default_factory=set)

    def add_edge(self, follower: str, followee: str) -> None:
        if follower == followee:
            raise ValueError("self-loop %r" % follower)
        self.nodes.add(follower)
        self.nodes.add(followee)
        self.follow_edges.add((follower, followee))

    def in_degree(self, user: str) -> int:
        return sum(1 for _, b in self.follow_edges if b == user)

    def out_degree(self, user: str) -> int:
        return sum(1 for a, _ in self.follow_edges if a == user)


class SocialSource(Protocol):
    """Anything that can enumerate relationships and timelines."""

    def get_followers(self, user: str) -> set[str]: ...

    def get_following(self, user: str) -> set[str]: ...

    def get_timeline(self, user: str, cap: int) -> list[Post]: ...


@dataclass
class CrawlResult:
    users_by_hop: dict[int, set[str]]
    graph: SocialGraph
    posts: Corpus
    unreachable: set[str] = field(default_factory=set)

    def all_users(self) -> set[str]:
        out: set[str] = set()
        for users in self.users_by_hop.values():
            out |= users
        return out


def expand_hops(
    source: SocialSource,
    seeds: set[str],
    hops: int,
    budget: Optional[int] = None,
) -> CrawlResult:
    """Breadth-first hop expansion over both edge directions.

    Frontier users are visited in sorted order and so are each user's
    neighbors, making the crawl reproducible. The budget caps the number
    of users discovered beyond the seeds. Unreachable users are recorded
    and skipped; the crawl is fatal only if every seed is unreachable.
    """
    if not seeds:
        raise CrawlError("expand_hops requires at least one seed user")
    if hops < 0:
        raise ValueError("hops must be >= 0")

    users_by_hop: dict[int, set[str]] = {0: set(seeds)}
    visited = set(seeds)
    unreachable: set[str] = set()
    edges: set[tuple[str, str]] = set()
    discovered = 0
    frontier = sorted(seeds)
    budget_hit = False

    for hop in range(1, hops + 1):
        if budget_hit or not frontier:
            break
        next_frontier: list[str] = []
        for user in frontier:
            try:
                followers = source.get_followers(user)
                following = source.get_following(user)
            except Exception as exc:
                logger.warning("user %s unreachable: %s", user, exc)
                unreachable.add(user)
                continue
            for f in followers:
                if f != user:
                    edges.add((f, user))
            for g in following:
                if g != user:
                    edges.add((user, g))
            # candidates accepted in sorted order until the budget trips
            for cand in sorted(followers | following):
                if cand in visited or cand == user:
                    continue
                if budget is not None and discovered >= budget:
                    budget_hit = True
                    break
                visited.add(cand)
                next_frontier.append(cand)
                discovered += 1
            if budget_hit:
                break
        if next_frontier:
            users_by_hop[hop] = set(next_frontier)
        frontier = sorted(next_frontier)

    if hops >= 1 and seeds and seeds <= unreachable:
        raise CrawlError("all seed users unreachable")

    graph = SocialGraph(nodes=set(visited))
    graph.follow_edges = {(a, b) for a, b in edges if a in visited and b in visited}
    return CrawlResult(
        users_by_hop=users_by_hop,
        graph=graph,
        posts=Corpus([]),
        unreachable=unreachable,
    )


class TokenBucket:
    """Simple token-bucket rate limiter shared across fetch workers."""

    def __init__(self, rate: float, capacity: float):
        self.rate = rate
        self.capacity = capacity
        self._tokens = capacity
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


def collect_timelines(
    source: SocialSource,
    users: Iterable[str],
    cap: int = DEFAULT_TIMELINE_CAP,
    parallelism: int = 1,
    rate_limiter: Optional[TokenBucket] = None,
) -> Corpus:
    """Fetch each user's newest posts (up to cap) into one corpus.

    Per-user failures are logged and skipped. The result is sorted by
    (user_id, created_at, post_id), so it does not depend on fetch order
    or parallelism.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")

    def fetch(user: str) -> list[Post]:
        if rate_limiter is not None:
            rate_limiter.acquire()
        try:
            timeline = source.get_timeline(user, cap)
        except Exception as exc:
            logger.warning("timeline fetch failed for %s: %s", user, exc)
            return []
        return timeline[:cap]

    ordered_users = sorted(set(users))
    posts: list[Post] = []
    if parallelism <= 1:
        for user in ordered_users:
            posts.extend(fetch(user))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for timeline in pool.map(fetch, ordered_users):
                posts.extend(timeline)

    posts.sort(key=lambda p: (p.user_id, p.created_at, p.post_id))
    return Corpus(posts)


@dataclass
class DegreeStats:
    """Per-class users ranked by degree, descending (ties by user id)."""

    in_rank: dict[int, list[tuple[str, int]]]
    out_rank: dict[int, list[tuple[str, int]]]
    downsampled: dict[int, int] = field(default_factory=dict)


def degree_stats(
    graph: SocialGraph,
    class_of: dict[str, int],
    downsample: Optional[dict[int, int]] = None,
    seed: int = 0,
) -> DegreeStats:
    """Rank users by in- and out-degree within each class.

    A class listed in downsample is reduced to the target size by seeded
    sampling before ranking (the appendix-style normal-user downsample).
    """
    in_deg: dict[str, int] = {u: 0 for u in graph.nodes}
    out_deg: dict[str, int] = {u: 0 for u in graph.nodes}
    for a, b in graph.follow_edges:
        out_deg[a] += 1
        in_deg[b] += 1

    by_class: dict[int, list[str]] = {}
    for user in sorted(graph.nodes):
        if user not in class_of:
            raise KeyError("class_of does not cover user %r" % user)
        by_class.setdefault(class_of[user], []).append(user)

    downsampled: dict[int, int] = {}
    if downsample:
        rng = random.Random(seed)
        for cls, target in sorted(downsample.items()):
            members = by_class.get(cls, [])
            if len(members) > target:
                by_class[cls] = sorted(rng.sample(members, target))
                downsampled[cls] = target

    def rank(degrees: dict[str, int]) -> dict[int, list[tuple[str, int]]]:
        return {
            cls: sorted(((u, degrees[u]) for u in members), key=lambda t: (-t[1], t[0]))
            for cls, members in sorted(by_class.items())
        }

    return DegreeStats(in_rank=rank(in_deg), out_rank=rank(out_deg), downsampled=downsampled)


POSITIVE_TEMPLATES = (
    "superb carved ivory {item} for sale lot {n} estimate high {url}",
    "antique ivory {item} available now message to buy {url}",
    "rare mammoth ivory {item} precisely sculpted for sale {url}",
    "genuine ivory {item} private sale collectors only {url}",
)
NEGATIVE_TEMPLATES = (
    "lovely morning walk in the park today {n}",
    "new blog post about gardening tips {url}",
    "watching the game tonight with friends {n}",
    "just finished reading a great novel {n}",
    "estate auction of fine furniture this weekend {url}",
    "handmade wooden {item} now in the shop {url}",
)
HARD_NEGATIVE_TEMPLATES = (
    "this candelabra has a beautiful patina of grey gold and ivory {url}",
    "sumptuous ivory silk quilt bedspread in stock {url}",
    "thank you to our followers from ivory coast {url}",
)
ITEMS = ("figurine", "dish", "carving", "netsuke", "brooch", "chess set")


@dataclass
class SyntheticParams:
    users: int = 250
    edge_density: float = 0.02
    posts_per_user: int = 20
    planted_positive_rate: float = 0.01
    pos_user_concentration: float = 4.0
    pos_edge_boost: float = 5.0
    hard_negative_rate: float = 0.03

    def __post_init__(self):
        if self.users <= 0 or self.posts_per_user <= 0:
            raise ValueError("users and posts_per_user must be positive")
        if not (0.0 <= self.planted_positive_rate <= 1.0):
            raise ValueError("planted_positive_rate must be in [0,1]")


class SyntheticSource:
    """Deterministic in-memory social source with planted positives.

    Positive-posting users emit several planted posts each, and positive
    users interconnect more densely than the background graph. Planted
    post ids are exposed as ground truth for evaluation only; the posts
    themselves carry no flag.
    """

    def __init__(self, seed: int, params: Optional[SyntheticParams] = None):
        self.params = params or SyntheticParams()
        self.seed = seed
        rng = random.Random("synthetic:%d" % seed)
        p = self.params

        self.user_ids = ["u%05d" % i for i in range(p.users)]
        if p.planted_positive_rate > 0:
            n_pos = max(1, round(p.users * p.planted_positive_rate * p.pos_user_concentration))
            n_pos = min(n_pos, p.users)
            self.positive_users = sorted(rng.sample(self.user_ids, n_pos))
            per_post_rate = min(
                1.0, p.planted_positive_rate * p.users / n_pos
            )
        else:
            self.positive_users = []
            per_post_rate = 0.0

        pos_set = set(self.positive_users)
        self._followers: dict[str, set[str]] = {u: set() for u in self.user_ids}
        self._following: dict[str, set[str]] = {u: set() for u in self.user_ids}
        self.graph = SocialGraph(nodes=set(self.user_ids))
        for a in self.user_ids:
            for b in self.user_ids:
                if a == b:
                    continue
                density = p.edge_density
                if a in pos_set and b in pos_set:
                    density = min(1.0, p.edge_density * p.pos_edge_boost)
                if rng.random() < density:
                    self.graph.add_edge(a, b)
                    self._following[a].add(b)
                    self._followers[b].add(a)

        base = datetime(2023, 6, 1, tzinfo=timezone.utc)
        self._timelines: dict[str, list[Post]] = {}
        planted: set[str] = set()
        for user in self.user_ids:
            timeline = []
            for k in range(p.posts_per_user):
                post_id = "%s_t%03d" % (user, k)
                is_planted = user in pos_set and rng.random() < per_post_rate
                if is_planted:
                    template = rng.choice(POSITIVE_TEMPLATES)
                    planted.add(post_id)
                elif rng.random() < p.hard_negative_rate:
                    template = rng.choice(HARD_NEGATIVE_TEMPLATES)
                else:
                    template = rng.choice(NEGATIVE_TEMPLATES)
                text = template.format(
                    item=rng.choice(ITEMS),
                    n=rng.randint(1, 999),
                    url="https://t.co/%04x" % rng.randint(0, 0xFFFF),
                )
                timeline.append(
                    Post(
                        post_id=post_id,
                        user_id=user,
                        created_at=base - timedelta(hours=k),
                        text=text,
                    )
                )
            self._timelines[user] = timeline  # already newest-first
        self.planted = frozenset(planted)

    def get_followers(self, user: str) -> set[str]:
        return set(self._followers[user])

    def get_following(self, user: str) -> set[str]:
        return set(self._following[user])

    def get_timeline(self, user: str, cap: int) -> list[Post]:
        return list(self._timelines[user][:cap])

    def is_planted(self, post_id: str) -> bool:
        return post_id in self.planted

    def all_posts(self) -> Corpus:
        posts = [p for u in self.user_ids for p in self._timelines[u]]
        return Corpus(posts)


def synthesize_source(seed: int, params: Optional[SyntheticParams] = None) -> SyntheticSource:
    return SyntheticSource(seed, params)


class FileSource:
    """Replays a recorded crawl: an edge file plus a corpus file.

    The edge file has one "follower_id follows followee_id" line per edge.
    """

    def __init__(self, graph_path: str | Path, corpus_path: str | Path):
        self._followers: dict[str, set[str]] = {}
        self._following: dict[str, set[str]] = {}
        self.graph = SocialGraph()
        for line_no, line in enumerate(
            Path(graph_path).read_text(encoding="utf-8").splitlines(), 1
        ):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[1] != "follows":
                raise CrawlError(
                    "%s:%d: expected 'follower follows followee'" % (graph_path, line_no)
                )
            a, _, b = parts
            self.graph.add_edge(a, b)
            self._following.setdefault(a, set()).add(b)
            self._followers.setdefault(b, set()).add(a)
        result = ingest(corpus_path)
        self._timelines: dict[str, list[Post]] = {}
        for post in result.corpus:
            self._timelines.setdefault(post.user_id, []).append(post)
        for timeline in self._timelines.values():
            timeline.sort(key=lambda p: (p.created_at, p.post_id), reverse=True)

    def get_followers(self, user: str) -> set[str]:
        return set(self._followers.get(user, set()))

    def get_following(self, user: str) -> set[str]:
        return set(self._following.get(user, set()))

    def get_timeline(self, user: str, cap: int) -> list[Post]:
        return list(self._timelines.get(user, [])[:cap])
