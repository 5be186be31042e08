"""Scorers: keyword filter, trainable weighted logistic model, external plug-ins.

Every scorer maps a post to a probability in [0, 1]. The keyword filter is
the deterministic lower-bound baseline; the logistic model trains on TF-IDF
plus handcrafted features with inverse class weights; external scorers stand
in for deep encoders behind a line or HTTP protocol. Hard predictions use a
threshold calibrated to maximize MCC on validation scores.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
import subprocess
import threading
import queue as queue_mod
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .corpus import Post, extract_special_tokens, is_special_token, tokenize
from .errors import ScorerError, TrainingError
from .metrics import confusion, metrics
from .textstats import DEFAULT_LEXICON, Lexicon, flesch_reading_ease, sentiment

logger = logging.getLogger(__name__)

DEFAULT_KEYWORDS = frozenset({"ivory"})

# FeatureVector: sparse feature_id -> value
FeatureVector = dict[str, float]

HANDCRAFTED = (
    "hc:words", "hc:chars", "hc:hashtags", "hc:mentions", "hc:urls",
    "hc:images", "hc:flesch", "hc:pos", "hc:neu", "hc:neg",
)

PROBA_EPS = 1e-12


def word_filter_predict(post: Post, keywords: frozenset[str] = DEFAULT_KEYWORDS) -> int:
    """1 iff the lowercased text contains any keyword as a substring."""
    if not keywords:
        raise ValueError("keyword set must be non-empty")
    low = post.text.lower()
    return 1 if any(kw in low for kw in keywords) else 0


def _content_ngrams(text: str) -> list[str]:
    """Lowercased unigrams and bigrams over special-token-stripped tokens."""
    tokens = [t.lower() for t in tokenize(text) if not is_special_token(t)]
    grams = list(tokens)
    grams.extend("%s %s" % pair for pair in zip(tokens, tokens[1:]))
    return grams


@dataclass(frozen=True)
class Vocabulary:
    """Document frequencies fitted on the training split only."""

    doc_freq: dict[str, int]
    n_docs: int

    @classmethod
    def fit(cls, posts: Iterable[Post]) -> "Vocabulary":
        df: dict[str, int] = {}
        n = 0
        for post in posts:
            n += 1
            for gram in set(_content_ngrams(post.text)):
                df[gram] = df.get(gram, 0) + 1
        return cls(doc_freq=df, n_docs=n)

    def idf(self, gram: str) -> Optional[float]:
        df = self.doc_freq.get(gram)
        if df is None:
            return None
        return math.log((1 + self.n_docs) / (1 + df))


def featurize(
    post: Post,
    vocab: Vocabulary,
    lexicon: Lexicon = DEFAULT_LEXICON,
) -> FeatureVector:
    """TF-IDF n-gram features plus the fixed handcrafted block.

    Out-of-vocabulary n-grams are dropped. The handcrafted block is always
    present; an undefined readability score contributes 0.
    """
    features: FeatureVector = {}
    counts: dict[str, int] = {}
    for gram in _content_ngrams(post.text):
        counts[gram] = counts.get(gram, 0) + 1
    for gram, count in counts.items():
        idf = vocab.idf(gram)
        if idf is not None:
            features["ng:" + gram] = count * idf

    tokens = tokenize(post.text)
    stx = extract_special_tokens(post.text)
    senti = sentiment(tokens, lexicon)
    flesch = flesch_reading_ease(post.text)
    features["hc:words"] = float(len(tokens))
    features["hc:chars"] = float(sum(1 for c in post.text if not c.isspace()))
    features["hc:hashtags"] = float(len(stx.hashtags))
    features["hc:mentions"] = float(len(stx.mentions))
    features["hc:urls"] = float(len(stx.urls))
    features["hc:images"] = float(len(post.image_refs))
    features["hc:flesch"] = 0.0 if flesch is None else flesch
    features["hc:pos"] = senti.pos
    features["hc:neu"] = senti.neu
    features["hc:neg"] = senti.neg
    return features


@dataclass
class TrainConfig:
    lr: float = 0.5
    l2: float = 1e-4
    epochs: int = 300
    patience: int = 20
    seed: int = 0


@dataclass
class LinearModel:
    """Weighted logistic model over sparse features."""

    weights: dict[str, float]
    bias: float
    class_weights: tuple[float, float]
    l2: float
    trained_on: str = ""
    loss_history: list[float] = field(default_factory=list)

    def decision(self, features: FeatureVector) -> float:
        return sum(self.weights.get(f, 0.0) * v for f, v in features.items()) + self.bias

    def to_json(self) -> dict:
        return {
            "weights": self.weights,
            "bias": self.bias,
            "class_weights": list(self.class_weights),
            "l2": self.l2,
            "trained_on": self.trained_on,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LinearModel":
        return cls(
            weights=dict(data["weights"]),
            bias=float(data["bias"]),
            class_weights=tuple(data["class_weights"]),
            l2=float(data["l2"]),
            trained_on=data.get("trained_on", ""),
        )


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def predict_proba(model: LinearModel, features: FeatureVector) -> float:
    """sigmoid(w.x + b), clamped away from exact 0 and 1."""
    p = sigmoid(model.decision(features))
    return min(max(p, PROBA_EPS), 1.0 - PROBA_EPS)


def weighted_loss_and_grad(
    x: np.ndarray,
    y: np.ndarray,
    sample_w: np.ndarray,
    weights: np.ndarray,
    bias: float,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Class-weighted logistic loss with L2 on weights (bias excluded)."""
    z = x @ weights + bias
    # log(1+e^z), stable on both tails
    log1pexp = np.logaddexp(0.0, z)
    nll = sample_w * (log1pexp - y * z)
    loss = float(np.sum(nll) + l2 * np.dot(weights, weights))
    p = np.empty_like(z)
    pos = z >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    p[~pos] = np.exp(z[~pos]) / (1.0 + np.exp(z[~pos]))
    err = sample_w * (p - y)
    grad_w = x.T @ err + 2.0 * l2 * weights
    grad_b = float(np.sum(err))
    return loss, grad_w, grad_b


def inverse_class_weights(labels: Sequence[int]) -> tuple[float, float]:
    """w_c = n / (2 * n_c): the balanced form of inverse class weighting."""
    n = len(labels)
    n_pos = sum(labels)
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("training data contains a single class")
    return (n / (2.0 * n_neg), n / (2.0 * n_pos))


def train_linear(
    train: Sequence[tuple[FeatureVector, int]],
    dev: Sequence[tuple[FeatureVector, int]],
    hyper: Optional[TrainConfig] = None,
    trained_on: str = "",
) -> LinearModel:
    """Full-batch gradient descent from zero init with monotone step acceptance.

    Steps that would increase the loss are retried at half the learning
    rate, so accepted epochs are non-increasing. Early stopping tracks the
    calibrated-threshold MCC on the dev set with the configured patience;
    the best dev snapshot wins.
    """
    hyper = hyper or TrainConfig()
    if not train:
        raise TrainingError("empty training set")
    class_w = inverse_class_weights([y for _, y in train])

    feature_ids = sorted({f for fv, _ in train for f in fv})
    index = {f: i for i, f in enumerate(feature_ids)}
    x = np.zeros((len(train), len(feature_ids)))
    y = np.array([float(label) for _, label in train])
    for row, (fv, _) in enumerate(train):
        for f, v in fv.items():
            x[row, index[f]] = v
    sample_w = np.where(y == 1.0, class_w[1], class_w[0])

    weights = np.zeros(len(feature_ids))
    bias = 0.0
    lr = hyper.lr
    loss, grad_w, grad_b = weighted_loss_and_grad(x, y, sample_w, weights, bias, hyper.l2)
    history = [loss]

    def dev_mcc(w: np.ndarray, b: float) -> float:
        scores = []
        for fv, label in dev:
            z = sum(w[index[f]] * v for f, v in fv.items() if f in index) + b
            scores.append((sigmoid(z), label))
        if not scores or len({lab for _, lab in scores}) < 2:
            return 0.0
        cal = calibrate_threshold(scores)
        return cal.mcc

    best_dev = dev_mcc(weights, bias) if dev else None
    best_state = (weights.copy(), bias)
    stale = 0

    for _ in range(hyper.epochs):
        stepped = False
        while lr > 1e-12:
            cand_w = weights - lr * grad_w
            cand_b = bias - lr * grad_b
            cand_loss, cand_gw, cand_gb = weighted_loss_and_grad(
                x, y, sample_w, cand_w, cand_b, hyper.l2
            )
            if math.isnan(cand_loss) or math.isinf(cand_loss):
                raise TrainingError(
                    "loss diverged (lr=%g l2=%g epochs=%d seed=%d)"
                    % (hyper.lr, hyper.l2, hyper.epochs, hyper.seed)
                )
            if cand_loss <= loss:
                weights, bias = cand_w, cand_b
                loss, grad_w, grad_b = cand_loss, cand_gw, cand_gb
                history.append(loss)
                stepped = True
                break
            lr *= 0.5
        if not stepped:
            break
        if dev:
            current = dev_mcc(weights, bias)
            if best_dev is None or current > best_dev + 1e-12:
                best_dev = current
                best_state = (weights.copy(), bias)
                stale = 0
            else:
                stale += 1
                if stale >= hyper.patience:
                    break

    if dev:
        weights, bias = best_state

    return LinearModel(
        weights={f: float(weights[i]) for f, i in index.items() if weights[i] != 0.0},
        bias=float(bias),
        class_weights=class_w,
        l2=hyper.l2,
        trained_on=trained_on,
        loss_history=history,
    )


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    mcc: float
    degenerate: bool = False


def calibrate_threshold(scores: Sequence[tuple[float, int]]) -> CalibrationResult:
    """MCC-maximizing probability cutoff on validation scores.

    Candidates are the midpoints between adjacent distinct scores plus 0
    and 1; a positive prediction is score >= threshold. Ties go to the
    lowest threshold. All-identical scores calibrate degenerately to 0.5.
    """
    if not scores:
        raise ValueError("cannot calibrate on empty scores")
    distinct = sorted({s for s, _ in scores})
    if len(distinct) == 1:
        logger.warning("calibrate_threshold: single distinct score, returning 0.5")
        return CalibrationResult(threshold=0.5, mcc=0.0, degenerate=True)
    candidates = [0.0]
    candidates += [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    candidates.append(1.0)

    labels = [y for _, y in scores]
    best_t, best_mcc = None, None
    for t in sorted(candidates):
        preds = [1 if s >= t else 0 for s, _ in scores]
        mcc = metrics(confusion(labels, preds)).mcc
        if best_mcc is None or mcc > best_mcc:
            best_t, best_mcc = t, mcc
    return CalibrationResult(threshold=best_t, mcc=best_mcc)


@dataclass
class ScorerHandle:
    """A scorer of any kind plus its calibrated decision threshold."""

    kind: str                      # word_filter | linear | external
    score_fn: Callable[[Post], Optional[float]]
    threshold: float = 0.5

    def score(self, post: Post) -> Optional[float]:
        return self.score_fn(post)

    def predict(self, post: Post) -> Optional[int]:
        s = self.score(post)
        if s is None:
            return None
        return 1 if s >= self.threshold else 0


def word_filter_handle(keywords: frozenset[str] = DEFAULT_KEYWORDS) -> ScorerHandle:
    return ScorerHandle(
        kind="word_filter",
        score_fn=lambda post: float(word_filter_predict(post, keywords)),
    )


def linear_handle(
    model: LinearModel,
    vocab: Vocabulary,
    lexicon: Lexicon = DEFAULT_LEXICON,
    threshold: float = 0.5,
) -> ScorerHandle:
    return ScorerHandle(
        kind="linear",
        score_fn=lambda post: predict_proba(model, featurize(post, vocab, lexicon)),
        threshold=threshold,
    )


def split_fingerprint(post_ids: Iterable[str]) -> str:
    digest = hashlib.sha256("\n".join(sorted(post_ids)).encode("utf-8")).hexdigest()
    return digest[:16]


INPUT_VARIANTS = ("text", "text+images", "text+images+ocr", "text+images+ocr+desc")
IMAGE_LAYOUTS = ("stitch", "concat")


@dataclass(frozen=True)
class ExternalScorerSpec:
    """How to reach an external scorer and what inputs it receives."""

    transport: str                           # subprocess | http
    target: str                              # command line or URL
    input_variant: str = "text"
    image_layout: str = "stitch"
    timeout: float = 30.0
    media_root: Optional[str] = None

    def __post_init__(self):
        if self.transport not in ("subprocess", "http"):
            raise ValueError("unknown transport %r" % self.transport)
        if self.input_variant not in INPUT_VARIANTS:
            raise ValueError("unknown input variant %r" % self.input_variant)
        if self.image_layout not in IMAGE_LAYOUTS:
            raise ValueError("unknown image layout %r" % self.image_layout)


def _request_body(post: Post, spec: ExternalScorerSpec) -> dict:
    from .imageprep import concat_layout, encode_png, load_bundle, stitch

    with_images = "images" in spec.input_variant
    with_ocr = "ocr" in spec.input_variant
    with_desc = "desc" in spec.input_variant
    images: list[str] = []
    if with_images and post.image_refs:
        bundle = load_bundle(post, media_root=spec.media_root)
        if spec.image_layout == "stitch":
            rasters = [stitch(bundle)]
        else:
            rasters = list(concat_layout(bundle))
        images = [base64.b64encode(encode_png(r)).decode("ascii") for r in rasters]
    return {
        "post_id": post.post_id,
        "text": post.text,
        "ocr_text": post.ocr_text if with_ocr else None,
        "user_description": post.user_description if with_desc else None,
        "images": images,
    }


def _parse_response(line: str) -> tuple[str, float]:
    data = json.loads(line)
    post_id = data["post_id"]
    score = float(data["score"])
    if not (0.0 <= score <= 1.0):
        raise ValueError("score %r out of [0,1]" % score)
    return post_id, score


def score_external(
    posts: Sequence[Post], spec: ExternalScorerSpec
) -> dict[str, Optional[float]]:
    """Score posts through the external protocol.

    Timeouts and protocol violations score as None; callers must exclude
    those posts from the round with a warning.
    """
    if spec.transport == "subprocess":
        return _score_subprocess(posts, spec)
    return _score_http(posts, spec)


def _score_subprocess(
    posts: Sequence[Post], spec: ExternalScorerSpec
) -> dict[str, Optional[float]]:
    results: dict[str, Optional[float]] = {p.post_id: None for p in posts}
    if not posts:
        return results
    try:
        proc = subprocess.Popen(
            spec.target,
            shell=True,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )
    except OSError as exc:
        raise ScorerError("cannot start external scorer: %s" % exc)

    lines: queue_mod.Queue = queue_mod.Queue()

    def reader():
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    thread = threading.Thread(target=reader, daemon=True)
    thread.start()
    try:
        for post in posts:
            proc.stdin.write(json.dumps(_request_body(post, spec)) + "\n")
        proc.stdin.flush()
        proc.stdin.close()

        pending = {p.post_id for p in posts}
        while pending:
            try:
                line = lines.get(timeout=spec.timeout)
            except queue_mod.Empty:
                logger.warning("external scorer timed out; %d posts unscored", len(pending))
                break
            if line is None:
                if pending:
                    logger.warning(
                        "external scorer exited with %d posts unscored", len(pending)
                    )
                break
            try:
                post_id, score = _parse_response(line)
            except (ValueError, KeyError) as exc:
                logger.warning("external scorer protocol violation: %s", exc)
                continue
            if post_id in pending:
                results[post_id] = score
                pending.discard(post_id)
    finally:
        proc.terminate()
        proc.wait(timeout=5)
    return results


def _score_http(
    posts: Sequence[Post], spec: ExternalScorerSpec, parallelism: int = 4
) -> dict[str, Optional[float]]:
    import urllib.request
    from concurrent.futures import ThreadPoolExecutor

    def one(post: Post) -> tuple[str, Optional[float]]:
        body = json.dumps(_request_body(post, spec)).encode("utf-8")
        req = urllib.request.Request(
            spec.target, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=spec.timeout) as resp:
                post_id, score = _parse_response(resp.read().decode("utf-8"))
                if post_id != post.post_id:
                    raise ValueError("response for wrong post %r" % post_id)
                return post.post_id, score
        except Exception as exc:
            logger.warning("external scorer failed on %s: %s", post.post_id, exc)
            return post.post_id, None

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return dict(pool.map(one, posts))


def external_handle(spec: ExternalScorerSpec, threshold: float = 0.5) -> ScorerHandle:
    def score_one(post: Post) -> Optional[float]:
        return score_external([post], spec)[post.post_id]

    return ScorerHandle(kind="external", score_fn=score_one, threshold=threshold)
