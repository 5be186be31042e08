"""Per-post and per-class text statistics.

Length statistics with and without special tokens and stopwords, Flesch
reading ease, a rule-based valence-lexicon sentiment score, per-class word
frequencies, and the CSV report bundle that aggregates all of them.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import Corpus, Post, extract_special_tokens, is_special_token, tokenize

# Embedded default English stopword list; override via config/file.
DEFAULT_STOPWORDS = frozenset("""
a about above after again against all am an and any are aren't as at be
because been before being below between both but by can cannot can't could
couldn't did didn't do does doesn't doing don't down during each few for from
further had hadn't has hasn't have haven't having he he'd he'll he's her here
here's hers herself him himself his how how's i i'd i'll i'm i've if in into
is isn't it it's its itself let's me more most mustn't my myself no nor not
of off on once only or other ought our ours ourselves out over own same
shan't she she'd she'll she's should shouldn't so some such than that that's
the their theirs them themselves then there there's these they they'd they'll
they're they've this those through to too under until up very was wasn't we
we'd we'll we're we've were weren't what what's when when's where where's
which while who who's whom why why's with won't would wouldn't you you'd
you'll you're you've your yours yourself yourselves
""".split())

_SENTENCE_END_RE = re.compile(r"[.!?]+")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_WORDLIKE_RE = re.compile(r"[A-Za-z]")


@dataclass(frozen=True)
class LengthStats:
    """Token/character counts for one post, with and without ST/SW removal.

    Ratio fields are None when the corresponding token set is empty.
    """

    words: int
    words_wo_st: int
    chars: int
    chars_wo_st: int
    char_per_word: Optional[float]
    char_per_non_st: Optional[float]
    char_per_non_sw: Optional[float]
    char_per_non_sw_st: Optional[float]


@dataclass(frozen=True)
class SentimentScore:
    pos: float
    neu: float
    neg: float


@dataclass(frozen=True)
class Lexicon:
    """Case-insensitive token valences plus negator tokens that flip sign."""

    valences: dict[str, float]
    negators: frozenset[str] = frozenset()

    def valence(self, token: str) -> Optional[float]:
        return self.valences.get(token.lower())

    def is_negator(self, token: str) -> bool:
        return token.lower() in self.negators


DEFAULT_NEGATORS = frozenset(
    """no not never none nothing neither nor cannot can't don't won't isn't
    wasn't aren't weren't doesn't didn't hasn't haven't shouldn't wouldn't
    couldn't ain't without""".split()
)

# Small built-in valence table for desk-scale runs; production runs should
# load a full lexicon file (see load_lexicon).
DEFAULT_LEXICON = Lexicon(
    valences={
        "amazing": 2.8, "awesome": 3.1, "beautiful": 2.9, "best": 3.2,
        "brilliant": 2.8, "charming": 2.4, "delightful": 2.9, "elegant": 2.1,
        "excellent": 3.1, "exquisite": 2.7, "fantastic": 2.6, "fine": 0.8,
        "good": 1.9, "gorgeous": 3.0, "great": 3.1, "happy": 2.7,
        "lovely": 2.8, "love": 3.2, "magnificent": 2.9, "nice": 1.8,
        "perfect": 2.7, "pleased": 1.9, "rare": 0.9, "special": 1.7,
        "stunning": 2.6, "superb": 3.0, "thank": 1.9, "thanks": 1.9,
        "wonderful": 2.7, "wonderfully": 2.6, "sumptuous": 2.2, "win": 2.8,
        "abuse": -3.2, "angry": -2.3, "awful": -2.0, "bad": -2.5,
        "ban": -2.6, "banned": -2.6, "crime": -2.5, "cruel": -2.8,
        "damage": -2.2, "danger": -2.4, "dead": -3.3, "death": -2.9,
        "evil": -3.4, "fake": -2.1, "fear": -2.2, "hate": -2.7,
        "horrible": -2.5, "illegal": -2.6, "kill": -3.7, "killed": -3.6,
        "loss": -1.3, "poaching": -3.0, "poor": -2.1, "sad": -2.1,
        "scam": -2.7, "terrible": -2.1, "threat": -2.4, "ugly": -2.3,
        "war": -2.9, "worst": -3.1, "wrong": -2.1,
    },
    negators=DEFAULT_NEGATORS,
)


def load_lexicon(path: str | Path, negators: frozenset[str] = DEFAULT_NEGATORS) -> Lexicon:
    """Read a lexicon file: one "token<TAB>valence" per line, '#' comments."""
    valences: dict[str, float] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError("lexicon line %d is not token<TAB>valence" % line_no)
        value = float(parts[1])
        if not math.isfinite(value):
            raise ValueError("lexicon line %d has non-finite valence" % line_no)
        valences[parts[0].lower()] = value
    return Lexicon(valences=valences, negators=negators)


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One stopword per line, '#' comments."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def _mean(values: Sequence[float]) -> Optional[float]:
    if not values:
        return None
    return sum(values) / len(values)


def length_stats(post: Post, stopwords: frozenset[str] = DEFAULT_STOPWORDS) -> LengthStats:
    """Token and character counts for one post.

    Special-token removal drops hashtags, mentions, URLs and repost
    markers; characters are counted excluding whitespace; ratios are the
    per-post mean of per-token character counts.
    """
    tokens = tokenize(post.text)
    non_st = [t for t in tokens if not is_special_token(t)]
    non_sw = [t for t in tokens if t.lower() not in stopwords]
    non_sw_st = [t for t in non_st if t.lower() not in stopwords]
    return LengthStats(
        words=len(tokens),
        words_wo_st=len(non_st),
        chars=sum(1 for c in post.text if not c.isspace()),
        chars_wo_st=sum(len(t) for t in non_st),
        char_per_word=_mean([len(t) for t in tokens]),
        char_per_non_st=_mean([len(t) for t in non_st]),
        char_per_non_sw=_mean([len(t) for t in non_sw]),
        char_per_non_sw_st=_mean([len(t) for t in non_sw_st]),
    )


def count_syllables(word: str) -> int:
    """Vowel-group heuristic with silent trailing 'e', minimum one."""
    low = word.lower()
    groups = _VOWEL_GROUP_RE.findall(low)
    count = len(groups)
    if count > 1 and low.endswith("e") and len(low) >= 2 and low[-2] not in "aeiouy":
        count -= 1
    return max(count, 1)


def flesch_reading_ease(text: str) -> Optional[float]:
    """Reading-ease score; higher is easier. None when the text has no words.

    Sentences are '.', '!' or '?' terminated segments (minimum one);
    syllables use the vowel-group heuristic.
    """
    words = [t for t in tokenize(text) if _WORDLIKE_RE.search(t)]
    if not words:
        return None
    sentences = max(len(_SENTENCE_END_RE.findall(text)), 1)
    syllables = sum(count_syllables(w) for w in words)
    return 206.835 - 1.015 * (len(words) / sentences) - 84.6 * (syllables / len(words))


def sentiment(tokens: Sequence[str], lexicon: Lexicon = DEFAULT_LEXICON) -> SentimentScore:
    """Valence-mass sentiment with single-token negation flips.

    pos/neg are the shares of absolute valence mass carried by positive
    and negative tokens; out-of-lexicon tokens contribute neutral mass.
    Empty input is fully neutral.
    """
    p_mass = n_mass = 0.0
    unknown = 0
    negate_next = False
    for token in tokens:
        if lexicon.is_negator(token):
            negate_next = True
            continue
        valence = lexicon.valence(token)
        if valence is None:
            unknown += 1
        else:
            if negate_next:
                valence = -valence
            if valence > 0:
                p_mass += valence
            elif valence < 0:
                n_mass += -valence
            else:
                unknown += 1
        negate_next = False
    total = p_mass + n_mass + unknown
    if total == 0:
        return SentimentScore(pos=0.0, neu=1.0, neg=0.0)
    return SentimentScore(pos=p_mass / total, neu=unknown / total, neg=n_mass / total)


def content_tokens(text: str, stopwords: frozenset[str]) -> list[str]:
    """Lowercased tokens with special tokens, stopwords and bare punctuation removed."""
    out = []
    for token in tokenize(text):
        if is_special_token(token):
            continue
        low = token.lower()
        if low in stopwords or not any(c.isalnum() for c in low):
            continue
        out.append(low)
    return out


def word_frequencies(
    corpus: Corpus,
    labels: dict[str, int],
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> dict[int, list[tuple[str, int]]]:
    """Per-class token counts, sorted by count desc then token asc."""
    counters: dict[int, Counter] = {0: Counter(), 1: Counter()}
    for post_id, label in labels.items():
        if post_id not in corpus:
            raise KeyError("label references unknown post %r" % post_id)
        counters[label].update(content_tokens(corpus[post_id].text, stopwords))
    return {
        cls: sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
        for cls, counter in counters.items()
    }


@dataclass
class HistogramConfig:
    """Knobs for the report histograms; cutoffs are inclusive upper bounds."""

    post_length_cutoff: Optional[int] = None
    st_count_cutoff: Optional[int] = None
    token_length_bin_width: float = 0.5


CLASS_NAMES = {0: "normal", 1: "wlt"}

TEXT_STAT_ROWS = (
    "words", "words_wo_st", "chars", "chars_wo_st",
    "char_per_word", "char_per_non_st", "char_per_non_sw", "char_per_non_sw_st",
)
SPECIAL_TOKEN_ROWS = ("urls", "mentions", "hashtags")


def _agg(values: list[float]) -> tuple[Optional[float], Optional[float], Optional[float]]:
    if not values:
        return None, None, None
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var), max(values)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else "%.6g" % value


def _int_histogram(values: Iterable[int], cutoff: Optional[int]) -> list[tuple[int, int]]:
    counter = Counter()
    for v in values:
        if cutoff is not None and v > cutoff:
            v = cutoff
        counter[v] += 1
    return sorted(counter.items())


def _binned_histogram(values: Iterable[float], width: float) -> list[tuple[float, int]]:
    counter = Counter()
    for v in values:
        counter[math.floor(v / width) * width] += 1
    return sorted(counter.items())


@dataclass
class ReportBundle:
    """In-memory result of class_report plus the files it wrote."""

    text_stats: dict[str, dict[str, tuple]]
    special_tokens: dict[str, dict[str, tuple]]
    sentiments: dict[str, SentimentScore]
    files: list[Path] = field(default_factory=list)


def class_report(
    corpus: Corpus,
    labels: dict[str, int],
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
    lexicon: Lexicon = DEFAULT_LEXICON,
    out_dir: Optional[str | Path] = None,
    hist: Optional[HistogramConfig] = None,
) -> ReportBundle:
    """Aggregate per-class text statistics and write the CSV report bundle.

    Writes text_stats.csv, special_tokens.csv, sentiment.csv and per-class
    (bin,count) histogram CSVs into out_dir when given. Standard deviations
    are population, as noted in each file header.
    """
    hist = hist or HistogramConfig()
    per_class_lengths: dict[int, list[LengthStats]] = {0: [], 1: []}
    per_class_st: dict[int, list] = {0: [], 1: []}
    sentiments: dict[str, SentimentScore] = {}

    for post_id in sorted(labels):
        label = labels[post_id]
        post = corpus[post_id]
        per_class_lengths[label].append(length_stats(post, stopwords))
        per_class_st[label].append(extract_special_tokens(post.text))
        sentiments[post_id] = sentiment(tokenize(post.text), lexicon)

    text_stats: dict[str, dict[str, tuple]] = {}
    for row in TEXT_STAT_ROWS:
        text_stats[row] = {}
        for cls, stats in per_class_lengths.items():
            values = [getattr(s, row) for s in stats]
            values = [float(v) for v in values if v is not None]
            text_stats[row][CLASS_NAMES[cls]] = _agg(values)

    special_tokens: dict[str, dict[str, tuple]] = {}
    for row in SPECIAL_TOKEN_ROWS:
        special_tokens[row] = {}
        for cls, sts in per_class_st.items():
            values = [float(len(getattr(s, row))) for s in sts]
            special_tokens[row][CLASS_NAMES[cls]] = _agg(values)

    bundle = ReportBundle(
        text_stats=text_stats, special_tokens=special_tokens, sentiments=sentiments
    )
    if out_dir is None:
        return bundle

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def write_stat_csv(name: str, rows: Sequence[str], table: dict) -> None:
        path = out_dir / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("# std=population\n")
            writer = csv.writer(fh)
            header = ["category"]
            for cls in ("wlt", "normal"):
                header += ["%s_avg" % cls, "%s_std" % cls, "%s_max" % cls]
            writer.writerow(header)
            for row in rows:
                out_row = [row]
                for cls in ("wlt", "normal"):
                    out_row += [_fmt(v) for v in table[row][cls]]
                writer.writerow(out_row)
        bundle.files.append(path)

    write_stat_csv("text_stats.csv", TEXT_STAT_ROWS, text_stats)
    write_stat_csv("special_tokens.csv", SPECIAL_TOKEN_ROWS, special_tokens)

    sent_path = out_dir / "sentiment.csv"
    with sent_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "pos", "neu", "neg"])
        for post_id in sorted(sentiments):
            s = sentiments[post_id]
            writer.writerow([post_id, "%.6f" % s.pos, "%.6f" % s.neu, "%.6f" % s.neg])
    bundle.files.append(sent_path)

    def write_hist(name: str, pairs: list[tuple]) -> None:
        path = out_dir / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin", "count"])
            for bin_value, count in pairs:
                writer.writerow([bin_value, count])
        bundle.files.append(path)

    for cls, stats in per_class_lengths.items():
        cls_name = CLASS_NAMES[cls]
        write_hist(
            "hist_words_%s.csv" % cls_name,
            _int_histogram([s.words for s in stats], hist.post_length_cutoff),
        )
        write_hist(
            "hist_token_chars_%s.csv" % cls_name,
            _binned_histogram(
                [s.char_per_word for s in stats if s.char_per_word is not None],
                hist.token_length_bin_width,
            ),
        )
    for row in SPECIAL_TOKEN_ROWS:
        for cls, sts in per_class_st.items():
            write_hist(
                "hist_%s_%s.csv" % (row, CLASS_NAMES[cls]),
                _int_histogram(
                    [len(getattr(s, row)) for s in sts], hist.st_count_cutoff
                ),
            )
    return bundle
