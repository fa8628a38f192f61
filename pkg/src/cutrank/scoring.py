"""Cut scoring: a small feed-forward scorer plus classic heuristics.

The learned scorer is a 14 -> 30 -> 15 -> 2 network with tanh hidden
activations and a softmax head; the probability of the positive class is
the score.  Selection always takes the top K% of the pool (ceiling, so a
nonempty pool never yields an empty selection), ties broken toward lower
pool index.

Five reference policies accompany the learned one: random (seeded),
violation, normalized violation, distance to the LP point, and
parallelism to the objective.  Heuristic scores use raw geometric
quantities, not normalized features.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from cutrank.errors import ParseError, ShapeError
from cutrank.features import compute_cut_features, zscore_apply, zscore_fit

ARCH = (14, 30, 15, 2)
MODEL_MAGIC = "CRNK1"

RANDOM = "random"
VIOLATION = "violation"
NORM_VIOLATION = "norm_violation"
DISTANCE = "distance"
PARALLELISM = "parallelism"
LEARNED = "learned"
HEURISTICS = (VIOLATION, NORM_VIOLATION, DISTANCE, PARALLELISM)
POLICY_KINDS = (RANDOM,) + HEURISTICS + (LEARNED,)


@dataclass
class MlpParams:
    """Weights/biases of the scorer; shapes are checked on construction."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        expect = {
            "w1": (ARCH[1], ARCH[0]), "b1": (ARCH[1],),
            "w2": (ARCH[2], ARCH[1]), "b2": (ARCH[2],),
            "w3": (ARCH[3], ARCH[2]), "b3": (ARCH[3],),
        }
        for name, shape in expect.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} contains non-finite entries")
            setattr(self, name, arr)

    def arrays(self):
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)

    @property
    def n_params(self):
        return sum(a.size for a in self.arrays())

    def to_vector(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=np.float64)
        shapes = [(ARCH[1], ARCH[0]), (ARCH[1],), (ARCH[2], ARCH[1]),
                  (ARCH[2],), (ARCH[3], ARCH[2]), (ARCH[3],)]
        parts = []
        at = 0
        for shape in shapes:
            size = int(np.prod(shape))
            parts.append(vec[at:at + size].reshape(shape))
            at += size
        if at != vec.size:
            raise ShapeError(f"parameter vector has {vec.size} entries, expected {at}")
        return cls(*parts)

    def copy(self):
        return MlpParams(*(a.copy() for a in self.arrays()))


def init_params(seed=0) -> MlpParams:
    """Symmetric uniform init (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(np.random.SeedSequence([ord("w"), seed]))
    arrays = []
    for fan_out, fan_in in ((ARCH[1], ARCH[0]), (ARCH[2], ARCH[1]), (ARCH[3], ARCH[2])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        arrays.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        arrays.append(np.zeros(fan_out))
    return MlpParams(arrays[0], arrays[1], arrays[2], arrays[3], arrays[4], arrays[5])


def _softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward_batch(params: MlpParams, X):
    """Class probabilities for a batch; column 0 is P(y=1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != ARCH[0]:
        raise ShapeError(f"input must be (batch, {ARCH[0]}), got {X.shape}")
    a1 = np.tanh(X @ params.w1.T + params.b1)
    a2 = np.tanh(a1 @ params.w2.T + params.b2)
    return _softmax_rows(a2 @ params.w3.T + params.b3)


def forward(params: MlpParams, x):
    """Probabilities (p1, p0) for one feature vector; p1 + p0 = 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ARCH[0],):
        raise ShapeError(f"input must have {ARCH[0]} entries, got {x.shape}")
    p = forward_batch(params, x[None, :])[0]
    return float(p[0]), float(p[1])


def score_cuts(params: MlpParams, feature_matrix):
    """P(y=1) per row of an (l, 14) feature matrix."""
    return forward_batch(params, feature_matrix)[:, 0]


def heuristic_score(cut, prop, kind) -> float:
    """Raw heuristic score; larger is better for every kind."""
    f = compute_cut_features(cut, prop)
    if kind == VIOLATION:
        return cut.violation(prop.x_lp_star)
    if kind == NORM_VIOLATION:
        return f.norm_violation
    if kind == DISTANCE:
        return f.distance
    if kind == PARALLELISM:
        return f.parallelism
    raise ValueError(f"unknown heuristic {kind!r}")


def top_k_count(pool_size, k_percent) -> int:
    """ceil(k% of the pool), robust to float noise at exact multiples."""
    if pool_size <= 0:
        return 0
    return int(np.ceil(k_percent * pool_size / 100.0 - 1e-9))


def select_top_k(scores, k_percent):
    """Indices of the top-K% scores, ties to lower index, ascending output."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0.0 < k_percent <= 100.0:
        raise ValueError("k_percent must lie in (0, 100]")
    count = top_k_count(scores.size, k_percent)
    if count == 0:
        return np.empty(0, dtype=np.intp)
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    return np.array(sorted(order[:count]), dtype=np.intp)


@dataclass(frozen=True)
class SelectionPolicy:
    """One of: random(seed), a fixed heuristic, or the learned scorer."""

    kind: str
    seed: int = 0
    params: MlpParams | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == LEARNED and self.params is None:
            raise ValueError("learned policy requires model parameters")

    @property
    def name(self):
        return self.kind


def policy_scores(policy: SelectionPolicy, pool, prop):
    """Score every pool cut under a policy (deterministic per instance)."""
    n = len(pool)
    if n == 0:
        return np.empty(0)
    if policy.kind == RANDOM:
        salt = zlib.crc32(prop.instance.family.encode())
        rng = np.random.default_rng(
            np.random.SeedSequence([policy.seed, salt, prop.instance.seed])
        )
        return rng.random(n)
    if policy.kind == LEARNED:
        feats = [compute_cut_features(c, prop) for c in pool]
        stats = zscore_fit(feats)
        X = np.stack([zscore_apply(f, stats).as_array() for f in feats])
        return score_cuts(policy.params, X)
    return np.array([heuristic_score(c, prop, policy.kind) for c in pool])


# ---------------------------------------------------------------------------
# model persistence


def save_model(params: MlpParams, path):
    lines = [MODEL_MAGIC, "arch " + " ".join(str(d) for d in ARCH)]
    for name, arr in zip(("w1", "b1", "w2", "b2", "w3", "b3"), params.arrays()):
        mat = np.atleast_2d(arr)
        lines.append(f"{name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> MlpParams:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise ParseError(f"missing {MODEL_MAGIC} magic line", 1)
    if len(lines) < 2 or lines[1].split() != ["arch"] + [str(d) for d in ARCH]:
        raise ParseError(f"architecture line must declare {ARCH}", 2)
    arrays = {}
    ln = 3
    for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
        if ln > len(lines):
            raise ParseError("file truncated", ln)
        parts = lines[ln - 1].split()
        if len(parts) != 3 or parts[0] != name:
            raise ParseError(f"expected '{name} <rows> <cols>'", ln)
        r, c = int(parts[1]), int(parts[2])
        block = np.empty((r, c))
        for i in range(r):
            row = lines[ln + i].split()
            if len(row) != c:
                raise ParseError(f"{name} row has {len(row)} entries, expected {c}",
                                 ln + i + 1)
            block[i] = [float(t) for t in row]
        arrays[name] = block if name.startswith("w") else block[0]
        ln += r + 1
    try:
        return MlpParams(**arrays)
    except ShapeError as exc:
        raise ParseError(str(exc)) from exc
