"""Instance-specific cut features, normalization, and bag aggregation.

Fourteen features per cut, in a frozen order that is a public contract
(serialization columns are named after the fields):

  0..3   coef_mean/max/min/std     stats over the nonzero cut coefficients
  4..7   obj_mean/max/min/std      stats over objective coefficients of the
                                   cut's support variables
  8      support                   nnz(alpha) / n
  9      integral_support          integer-variable share of the support
  10     norm_violation            max(0, (alpha.x* - beta) / |beta|)
  11     distance                  |alpha.x* - beta| / ||alpha||_2
  12     parallelism               cos(objective, alpha)
  13     expected_improvement      ||z||_2 |alpha.x* - beta| / ||alpha||_2

Standard deviations are population (1/N) estimators.  When |beta| falls
under 1e-9 the violation denominator becomes 1 to keep the feature finite;
a zero objective makes parallelism 0.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from cutrank.cuts import Cut
from cutrank.errors import EmptyBagError
from cutrank.instances import ProblemProperty

FEATURE_NAMES = (
    "coef_mean", "coef_max", "coef_min", "coef_std",
    "obj_mean", "obj_max", "obj_min", "obj_std",
    "support", "integral_support", "norm_violation", "distance",
    "parallelism", "expected_improvement",
)
N_FEATURES = len(FEATURE_NAMES)

STD_FLOOR = 1e-12  # constant dimensions normalize with divisor 1


@dataclass
class CutFeatures:
    coef_mean: float
    coef_max: float
    coef_min: float
    coef_std: float
    obj_mean: float
    obj_max: float
    obj_min: float
    obj_std: float
    support: float
    integral_support: float
    norm_violation: float
    distance: float
    parallelism: float
    expected_improvement: float

    def as_array(self):
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got {arr.shape}")
        return cls(*(float(v) for v in arr))


class BagFeatures(CutFeatures):
    """Component-wise average of member cut features."""


assert tuple(f.name for f in fields(CutFeatures)) == FEATURE_NAMES


@dataclass
class FeatureStats:
    """Per-dimension mean and population std over a fitting population."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (N_FEATURES,) or self.std.shape != (N_FEATURES,):
            raise ValueError("stats must be 14-dimensional")


def compute_cut_features(cut: Cut, prop: ProblemProperty) -> CutFeatures:
    inst = prop.instance
    x = prop.x_lp_star
    z = inst.objective
    vals = cut.values
    idx = cut.indices
    nnz = idx.size

    coef_mean = float(np.mean(vals))
    coef_max = float(np.max(vals))
    coef_min = float(np.min(vals))
    coef_std = float(np.std(vals))

    zsub = z[idx]
    obj_mean = float(np.mean(zsub))
    obj_max = float(np.max(zsub))
    obj_min = float(np.min(zsub))
    obj_std = float(np.std(zsub))

    support = nnz / inst.n_vars
    integral_support = float(np.count_nonzero(inst.integrality[idx])) / nnz

    act = float(np.sum(vals * x[idx]))
    viol = act - cut.beta
    denom = abs(cut.beta) if abs(cut.beta) >= 1e-9 else 1.0
    norm_violation = max(0.0, viol / denom)

    alpha_norm = math.sqrt(float(np.sum(vals * vals)))
    z_norm = math.sqrt(float(np.sum(z * z)))
    distance = abs(viol) / alpha_norm
    if z_norm > 0.0:
        parallelism = float(np.sum(zsub * vals)) / (z_norm * alpha_norm)
        parallelism = min(1.0, max(-1.0, parallelism))
    else:
        parallelism = 0.0
    expected_improvement = z_norm * abs(viol) / alpha_norm

    return CutFeatures(
        coef_mean, coef_max, coef_min, coef_std,
        obj_mean, obj_max, obj_min, obj_std,
        support, integral_support, norm_violation, distance,
        parallelism, expected_improvement,
    )


def zscore_fit(vectors) -> FeatureStats:
    """Mean/std over a nonempty population of feature vectors."""
    if not vectors:
        raise ValueError("cannot fit statistics on an empty population")
    stack = np.stack([v.as_array() for v in vectors])
    return FeatureStats(mean=stack.mean(axis=0), std=stack.std(axis=0))


def zscore_apply(v: CutFeatures, stats: FeatureStats) -> CutFeatures:
    divisor = np.where(stats.std < STD_FLOOR, 1.0, stats.std)
    return type(v).from_array((v.as_array() - stats.mean) / divisor)


def bag_features(members) -> BagFeatures:
    """phi: the component-wise arithmetic mean of member features."""
    members = list(members)
    if not members:
        raise EmptyBagError("bag has no member cuts")
    stack = np.stack([m.as_array() for m in members])
    return BagFeatures.from_array(stack.mean(axis=0))


def write_features_csv(path, rows):
    """CSV with one column per feature, named exactly as the fields."""
    with open(path, "w") as fh:
        fh.write(",".join(FEATURE_NAMES) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) for v in row.as_array()) + "\n")


def read_features_csv(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != ",".join(FEATURE_NAMES):
            raise ValueError("unexpected feature CSV header")
        return [CutFeatures.from_array(np.array([float(t) for t in line.split(",")]))
                for line in fh.read().splitlines() if line]
