"""Canonical post data model, JSONL ingestion, tokenization and masking.

A post is text plus up to four image references plus optional OCR text and
user attributes. The corpus is immutable once built; everything downstream
(stats, features, splits, the labeling loop) reads from it concurrently.
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import CorpusError

logger = logging.getLogger(__name__)

MAX_IMAGES = 4

# Binary label values.
NORMAL = 0
WLT = 1

# Fatal threshold for malformed input lines.
MAX_MALFORMED_FRACTION = 0.10

URL_PREFIXES = ("http://", "https://", "www.")
# Common link shorteners that appear without a scheme.
SHORTENER_PREFIXES = ("t.co/", "bit.ly/", "tinyurl.com/", "goo.gl/", "ow.ly/", "buff.ly/")

# Platform username/hashtag charset after the sigil.
_TAG_BODY = r"[A-Za-z0-9_]+"
_TAG_RE = re.compile(r"^([#@])(%s)(.*)$" % _TAG_BODY, re.DOTALL)
_FULL_TAG_RE = re.compile(r"^[#@]%s$" % _TAG_BODY)

# ASCII punctuation split off word edges. '#' and '@' stay attached so that
# tag chunks are recognized first; apostrophes stay inside words.
_EDGE_PUNCT = r"""!"$%&()*+,\-./:;<=>?\[\\\]^`{|}~"""
_WORD_RE = re.compile(r"^([%s]*)(.*?)([%s]*)$" % (_EDGE_PUNCT, _EDGE_PUNCT), re.DOTALL)

_MENTION_MASK_RE = re.compile(r"(?<![A-Za-z0-9_@])@%s" % _TAG_BODY)
_URL_MASK_RE = re.compile(
    r"(?:https?://\S*|(?<![\w.])www\.\S*|(?<![\w.])(?:t\.co|bit\.ly|tinyurl\.com|goo\.gl|ow\.ly|buff\.ly)/\S*)",
    re.IGNORECASE,
)

MENTION_MASK = "{{MENTION}}"
URL_MASK = "{{URL}}"


@dataclass(frozen=True)
class Post:
    """One social post: text, 0-4 image references, and user attributes."""

    post_id: str
    user_id: str
    created_at: datetime
    text: str
    image_refs: tuple[str, ...] = ()
    ocr_text: Optional[str] = None
    user_description: Optional[str] = None
    is_repost: bool = False

    def __post_init__(self):
        if not self.post_id:
            raise ValueError("post_id must be non-empty")
        if len(self.image_refs) > MAX_IMAGES:
            raise ValueError(
                "post %s has %d image refs (max %d)"
                % (self.post_id, len(self.image_refs), MAX_IMAGES)
            )
        if not self.text and not self.image_refs:
            raise ValueError("post %s has empty text and no images" % self.post_id)


@dataclass(frozen=True)
class SpecialTokens:
    """Per-post platform tokens: hashtags, mentions, URLs, repost markers."""

    hashtags: tuple[str, ...] = ()
    mentions: tuple[str, ...] = ()
    urls: tuple[str, ...] = ()
    repost_markers: int = 0


class Corpus:
    """Immutable map of post_id -> Post plus known user profiles."""

    def __init__(self, posts: Iterable[Post], users: Optional[dict[str, dict]] = None):
        self._posts: dict[str, Post] = {}
        for post in posts:
            if post.post_id in self._posts:
                raise ValueError("duplicate post_id %r" % post.post_id)
            self._posts[post.post_id] = post
        if users is None:
            users = {p.user_id: {} for p in self._posts.values()}
        self._users = dict(users)

    def __len__(self) -> int:
        return len(self._posts)

    def __contains__(self, post_id: str) -> bool:
        return post_id in self._posts

    def __iter__(self) -> Iterator[Post]:
        return iter(self._posts.values())

    def __getitem__(self, post_id: str) -> Post:
        return self._posts[post_id]

    @property
    def posts(self) -> dict[str, Post]:
        return dict(self._posts)

    @property
    def users(self) -> dict[str, dict]:
        return dict(self._users)

    def post_ids(self) -> list[str]:
        return list(self._posts.keys())

    def orphan_users(self) -> set[str]:
        """User ids referenced by posts but absent from the user table."""
        return {p.user_id for p in self._posts.values()} - set(self._users)


@dataclass
class IngestResult:
    corpus: Corpus
    skipped: list[tuple[int, str]] = field(default_factory=list)
    total_lines: int = 0

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)


def _norm(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    return unicodedata.normalize("NFC", value)


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime."""
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_record(record: dict) -> Post:
    """Build a Post from one decoded corpus record.

    Unknown fields are ignored; text fields are NFC-normalized.
    Raises ValueError for schema or invariant violations.
    """
    if not isinstance(record, dict):
        raise ValueError("record is not an object")
    for key in ("post_id", "user_id", "created_at", "text"):
        if key not in record:
            raise ValueError("missing field %r" % key)
        if not isinstance(record[key], str):
            raise ValueError("field %r is not a string" % key)
    image_refs = record.get("image_refs", [])
    if not isinstance(image_refs, list) or not all(isinstance(r, str) for r in image_refs):
        raise ValueError("image_refs is not a list of strings")
    ocr_text = record.get("ocr_text")
    if ocr_text is not None and not isinstance(ocr_text, str):
        raise ValueError("ocr_text is not a string or null")
    user_description = record.get("user_description")
    if user_description is not None and not isinstance(user_description, str):
        raise ValueError("user_description is not a string or null")
    is_repost = record.get("is_repost", False)
    if not isinstance(is_repost, bool):
        raise ValueError("is_repost is not a boolean")
    try:
        created_at = parse_timestamp(record["created_at"])
    except ValueError:
        raise ValueError("created_at is not ISO-8601: %r" % record["created_at"])
    return Post(
        post_id=record["post_id"],
        user_id=record["user_id"],
        created_at=created_at,
        text=_norm(record["text"]),
        image_refs=tuple(image_refs),
        ocr_text=_norm(ocr_text),
        user_description=_norm(user_description),
        is_repost=is_repost,
    )


def post_to_record(post: Post) -> dict:
    """Inverse of parse_record, emitting the documented JSONL schema."""
    return {
        "post_id": post.post_id,
        "user_id": post.user_id,
        "created_at": format_timestamp(post.created_at),
        "text": post.text,
        "image_refs": list(post.image_refs),
        "ocr_text": post.ocr_text,
        "user_description": post.user_description,
        "is_repost": post.is_repost,
    }


def ingest(path: str | Path) -> IngestResult:
    """Read a JSONL corpus file, one post record per line.

    Malformed lines (bad JSON, schema violations, duplicate post_id) are
    skipped and counted. More than 10% malformed lines is fatal.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError("cannot read corpus file %s: %s" % (path, exc))

    posts: dict[str, Post] = {}
    skipped: list[tuple[int, str]] = []
    total = 0
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        total += 1
        try:
            record = json.loads(line)
            post = parse_record(record)
            if post.post_id in posts:
                raise ValueError("duplicate post_id %r" % post.post_id)
        except ValueError as exc:
            skipped.append((line_no, str(exc)))
            continue
        posts[post.post_id] = post

    if total and len(skipped) / total > MAX_MALFORMED_FRACTION:
        lines = ", ".join(str(n) for n, _ in skipped)
        raise CorpusError(
            "%d of %d lines malformed (>%.0f%%) in %s; offending lines: %s"
            % (len(skipped), total, MAX_MALFORMED_FRACTION * 100, path, lines)
        )
    if skipped:
        logger.warning("ingest %s: skipped %d malformed lines", path, len(skipped))
    return IngestResult(corpus=Corpus(posts.values()), skipped=skipped, total_lines=total)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to JSONL, sorted by post_id for reproducibility."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for post_id in sorted(corpus.posts):
            fh.write(json.dumps(post_to_record(corpus[post_id]), ensure_ascii=False))
            fh.write("\n")


def _is_url_token(chunk: str) -> bool:
    low = chunk.lower()
    return low.startswith(URL_PREFIXES) or low.startswith(SHORTENER_PREFIXES)


def _split_chunk(chunk: str) -> list[str]:
    tokens: list[str] = []
    while chunk:
        if _is_url_token(chunk):
            tokens.append(chunk)
            break
        tag = _TAG_RE.match(chunk)
        if tag:
            tokens.append(tag.group(1) + tag.group(2))
            chunk = tag.group(3)
            continue
        lead, core, trail = _WORD_RE.match(chunk).groups()
        for part in (lead, core, trail):
            if part:
                tokens.append(part)
        break
    return tokens


def tokenize(text: str) -> list[str]:
    """Split text into tokens, keeping #tags, @mentions, URLs and emoji whole.

    Edge punctuation is split off words as separate tokens; runs of
    punctuation stay together ("mat..." -> ["mat", "..."]).
    """
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_split_chunk(chunk))
    return tokens


def extract_special_tokens(text: str) -> SpecialTokens:
    """Pull hashtags, mentions, URLs and leading repost markers out of text."""
    tokens = tokenize(text)
    hashtags = []
    mentions = []
    urls = []
    repost_markers = 0
    for i, token in enumerate(tokens):
        if token.lower() == "rt" and i == repost_markers:
            repost_markers += 1
    for token in tokens:
        if _FULL_TAG_RE.match(token):
            if token[0] == "#":
                hashtags.append(token[1:])
            else:
                mentions.append(token[1:])
        elif _is_url_token(token):
            urls.append(token)
    return SpecialTokens(
        hashtags=tuple(hashtags),
        mentions=tuple(mentions),
        urls=tuple(urls),
        repost_markers=repost_markers,
    )


def is_special_token(token: str) -> bool:
    """True for hashtags, mentions, URLs and repost markers."""
    if token.lower() == "rt":
        return True
    if _FULL_TAG_RE.match(token):
        return True
    return _is_url_token(token)


def mask_text(text: str) -> str:
    """Replace mention and URL spans; all other content is untouched."""
    masked = _URL_MASK_RE.sub(URL_MASK, text)
    return _MENTION_MASK_RE.sub(MENTION_MASK, masked)


def looks_english(text: str) -> bool:
    """Cheap English-content heuristic: letters are predominantly ASCII."""
    letters = [ch for ch in text if ch.isalpha()]
    if not letters:
        return True
    ascii_letters = sum(1 for ch in letters if ord(ch) < 128)
    return ascii_letters / len(letters) >= 0.8
