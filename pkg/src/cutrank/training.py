"""Training data collection and supervised training of the scorer.

Collection treats each solver run as one bag: a subset of the candidate
pool is added at the root, the instance is solved, and the feedback is the
effort-reduction ratio r = (T_base - T_bag) / T_base where T comes from
the configured feedback mode (deterministic work units by default).  Bags
come from uniform random subsets or, given a model, from an
epsilon-greedy mix of the model's top-K selection and random subsets.

Per instance, the bags whose feedback ranks in the top lambda% receive
label 1 (ties resolved toward earlier collection), the rest 0; the scorer
is then fit by mini-batch SGD on cross-entropy plus an L2 penalty.

Feature normalization statistics are fit per instance on the full
candidate pool, and bag features are averages of the normalized member
features, matching what the scorer sees at selection time.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from cutrank.cuts import Cut, CutPool, candidate_cuts
from cutrank.errors import ParseError, ValidationError
from cutrank.features import (
    N_FEATURES, FeatureStats, bag_features, compute_cut_features, zscore_apply,
    zscore_fit,
)
from cutrank.instances import MipInstance
from cutrank.scoring import (
    MlpParams, init_params, score_cuts, select_top_k, top_k_count,
)
from cutrank.solver import (
    BncConfig, MipStatus, root_relaxation, solve_mip, work_counter,
)

log = logging.getLogger(__name__)

DATASET_MAGIC = "CRDS1"


@dataclass
class TrainConfig:
    k_percent: float = 30.0
    lambda_percent: float = 50.0
    gamma: float = 0.1
    learning_rate: float = 1e-2
    epsilon: float = 0.1
    epochs: int = 300
    batch_size: int = 32
    bags_per_instance: int = 100
    feedback_mode: str = "work"
    seed: int = 0
    relabel_each_round: bool = True

    def validate(self):
        if not 0.0 < self.k_percent <= 100.0:
            raise ValidationError("k_percent must lie in (0, 100]")
        if not 0.0 < self.lambda_percent < 100.0:
            raise ValidationError("lambda_percent must lie in (0, 100)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError("epsilon must lie in [0, 1]")
        if self.gamma < 0 or self.learning_rate <= 0:
            raise ValidationError("gamma must be >= 0 and learning_rate > 0")
        if self.epochs < 1 or self.batch_size < 1 or self.bags_per_instance < 1:
            raise ValidationError("epochs, batch size, bags must be >= 1")


@dataclass
class TrainingSample:
    """One bag: selected pool indices, its features, feedback, and label."""

    instance_id: str
    bag: np.ndarray
    bag_features: np.ndarray  # post-normalization, 14 entries
    feedback: float
    label: int | None = None
    greedy: bool | None = None  # epsilon-greedy coin (None for random sampling)

    def __post_init__(self):
        self.bag = np.asarray(self.bag, dtype=np.intp)
        self.bag_features = np.asarray(self.bag_features, dtype=np.float64)
        if self.bag.size == 0:
            raise ValueError("bag must be nonempty")
        if np.unique(self.bag).size != self.bag.size:
            raise ValueError("bag indices must be distinct")
        if not math.isfinite(self.feedback):
            raise ValueError("feedback must be finite")


@dataclass
class InstanceData:
    """Everything collected from one instance; retrainable without solving."""

    instance_id: str
    pool: CutPool
    stats: FeatureStats
    samples: list = field(default_factory=list)


@dataclass
class Dataset:
    instances: list = field(default_factory=list)

    @property
    def n_instances(self):
        return len(self.instances)

    def all_samples(self):
        return [s for data in self.instances for s in data.samples]


def _solver_config(cfg: TrainConfig) -> BncConfig:
    return BncConfig(policy=None, k_percent=cfg.k_percent,
                     feedback_mode=cfg.feedback_mode, seed=cfg.seed)


def _streams(cfg: TrainConfig, inst: MipInstance):
    """Independent per-instance RNG streams for bag subsets and coins.

    Keeping them separate makes epsilon=1 active sampling reproduce the
    random-sampling bag stream exactly (coins consume nothing from it).
    """
    base = [cfg.seed, zlib.crc32(inst.family.encode()), inst.seed]
    subsets = np.random.default_rng(np.random.SeedSequence(base + [1]))
    coins = np.random.default_rng(np.random.SeedSequence(base + [2]))
    return subsets, coins


def _random_bag(rng, pool_size, bag_size):
    return np.sort(rng.choice(pool_size, size=bag_size, replace=False))


def _pool_context(inst: MipInstance, cfg: TrainConfig):
    """Root solve + pool + per-instance stats + normalized cut features."""
    prop, sol, tableau = root_relaxation(inst)
    if prop is None:
        raise ValidationError(
            f"instance {inst.name}: relaxation is {sol.status.value}")
    pool = candidate_cuts(inst, prop, tableau)
    if len(pool) == 0:
        return pool, None, None
    feats = [compute_cut_features(c, prop) for c in pool]
    stats = zscore_fit(feats)
    normalized = [zscore_apply(f, stats) for f in feats]
    return pool, stats, normalized


def _collect(inst, cfg, bag_maker, solver_cfg):
    cfg.validate()
    pool, stats, normalized = _pool_context(inst, cfg)
    if len(pool) == 0:
        log.info("instance %s produced no candidate cuts; nothing to collect",
                 inst.name)
        trivial = FeatureStats(np.zeros(N_FEATURES), np.zeros(N_FEATURES))
        return InstanceData(inst.name, pool, trivial, [])
    scfg = solver_cfg or _solver_config(cfg)
    base = solve_mip(inst, scfg)
    if base.status != MipStatus.OPTIMAL:
        raise ValidationError(
            f"baseline solve of {inst.name} ended {base.status}; "
            "size the instance below the solver limits")
    t_base = work_counter(base, cfg.feedback_mode)
    bag_size = top_k_count(len(pool), cfg.k_percent)
    subsets, coins = _streams(cfg, inst)

    samples = []
    for _ in range(cfg.bags_per_instance):
        bag, greedy = bag_maker(subsets, coins, normalized, bag_size)
        rep = solve_mip(inst, scfg, fixed_bag=bag, pool=pool)
        if rep.status != MipStatus.OPTIMAL:
            log.warning("dropping bag on %s: solve ended %s (limit=%s)",
                        inst.name, rep.status, rep.limit_hit)
            continue
        r = ((t_base - work_counter(rep, cfg.feedback_mode)) / t_base
             if t_base > 0 else 0.0)
        feats = bag_features([normalized[i] for i in bag])
        samples.append(TrainingSample(inst.name, bag, feats.as_array(), r,
                                      greedy=greedy))
    return InstanceData(inst.name, pool, stats, samples)


def collect_random(inst: MipInstance, cfg: TrainConfig,
                   solver_cfg: BncConfig | None = None) -> InstanceData:
    """Uniform random bags of size ceil(K% of the pool), one solve each."""

    def bag_maker(subsets, coins, normalized, bag_size):
        return _random_bag(subsets, len(normalized), bag_size), None

    return _collect(inst, cfg, bag_maker, solver_cfg)


def collect_active(inst: MipInstance, model: MlpParams, cfg: TrainConfig,
                   solver_cfg: BncConfig | None = None) -> InstanceData:
    """Epsilon-greedy bags: the model's top-K selection with probability
    1 - epsilon, a uniform random subset otherwise."""
    cache = {}

    def bag_maker(subsets, coins, normalized, bag_size):
        if coins.random() < cfg.epsilon:
            return _random_bag(subsets, len(normalized), bag_size), False
        if "greedy" not in cache:
            X = np.stack([f.as_array() for f in normalized])
            cache["greedy"] = select_top_k(score_cuts(model, X), cfg.k_percent)
        return cache["greedy"], True

    return _collect(inst, cfg, bag_maker, solver_cfg)


def assign_labels(samples, lambda_percent):
    """Label the top-lambda% feedbacks 1, the rest 0, within one instance.

    Exactly ceil(lambda% of the sample count) positives; ties at the
    cutoff go to earlier-collected samples.  Labels are set in place and
    the list is returned.
    """
    if not samples:
        return samples
    ids = {s.instance_id for s in samples}
    if len(ids) != 1:
        raise ValidationError("label assignment is per-instance; got " + str(ids))
    r = np.array([s.feedback for s in samples])
    n_pos = top_k_count(len(samples), lambda_percent)
    order = np.argsort(-r, kind="stable")
    positive = set(int(i) for i in order[:n_pos])
    for i, s in enumerate(samples):
        s.label = 1 if i in positive else 0
    return samples


def label_dataset(data: Dataset, lambda_percent):
    for inst_data in data.instances:
        assign_labels(inst_data.samples, lambda_percent)
    return data


# ---------------------------------------------------------------------------
# scorer training


def regularizer(params: MlpParams) -> float:
    """L2 penalty ||theta||^2 over all weights and biases."""
    return float(sum(np.sum(a * a) for a in params.arrays()))


def loss_and_grads(params: MlpParams, X, y, gamma):
    """Mean cross-entropy over the batch plus gamma * ||theta||^2.

    Returns (loss, grads) with grads shaped like the parameters; gradients
    are exact (verified against central finite differences in the tests).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    B = X.shape[0]
    a1 = np.tanh(X @ params.w1.T + params.b1)
    a2 = np.tanh(a1 @ params.w2.T + params.b2)
    logits = a2 @ params.w3.T + params.b3
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    cls = np.where(y == 1, 0, 1)  # output column 0 carries P(y=1)
    picked = np.maximum(p[np.arange(B), cls], 1e-300)
    ce = float(-np.mean(np.log(picked)))
    loss = ce + gamma * regularizer(params)

    onehot = np.zeros_like(p)
    onehot[np.arange(B), cls] = 1.0
    g3 = (p - onehot) / B
    dw3 = g3.T @ a2 + 2.0 * gamma * params.w3
    db3 = g3.sum(axis=0) + 2.0 * gamma * params.b3
    g2 = (g3 @ params.w3) * (1.0 - a2 * a2)
    dw2 = g2.T @ a1 + 2.0 * gamma * params.w2
    db2 = g2.sum(axis=0) + 2.0 * gamma * params.b2
    g1 = (g2 @ params.w2) * (1.0 - a1 * a1)
    dw1 = g1.T @ X + 2.0 * gamma * params.w1
    db1 = g1.sum(axis=0) + 2.0 * gamma * params.b1
    return loss, MlpParams(dw1, db1, dw2, db2, dw3, db3)


@dataclass
class EpochLoss:
    epoch: int
    cross_entropy: float
    penalty: float
    total: float


def train(data: Dataset, cfg: TrainConfig, init: MlpParams | None = None):
    """Mini-batch SGD; returns (params, per-epoch loss trace).

    All samples must be labeled.  Epoch order is shuffled from the
    configured seed, so the result is a pure function of (data, cfg).
    """
    cfg.validate()
    samples = data.all_samples()
    if not samples:
        raise ValidationError("dataset has no samples")
    if any(s.label is None for s in samples):
        raise ValidationError("all samples must be labeled before training")
    X = np.stack([s.bag_features for s in samples])
    y = np.array([s.label for s in samples])

    params = init.copy() if init is not None else init_params(cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA11]))
    trace = []
    n = len(samples)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for at in range(0, n, cfg.batch_size):
            batch = perm[at:at + cfg.batch_size]
            loss, grads = loss_and_grads(params, X[batch], y[batch], cfg.gamma)
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}; lower learning_rate "
                    f"(currently {cfg.learning_rate}) or gamma")
            for arr, g in zip(params.arrays(), grads.arrays()):
                arr -= cfg.learning_rate * g
        full, _ = loss_and_grads(params, X, y, 0.0)
        pen = regularizer(params)
        trace.append(EpochLoss(epoch, full, pen, full + cfg.gamma * pen))
    return params, trace


# ---------------------------------------------------------------------------
# dataset persistence


def _fmt(v):
    return repr(float(v))


def write_instance_data(data: InstanceData, path):
    lines = [DATASET_MAGIC, f"instance {data.instance_id}",
             f"pool {len(data.pool)}"]
    for cut in data.pool:
        src = "-" if cut.source_row is None else str(cut.source_row)
        terms = " ".join(f"{i}:{_fmt(v)}" for i, v in zip(cut.indices, cut.values))
        lines.append(f"cut {cut.kind} {src} {_fmt(cut.beta)} {cut.indices.size} {terms}")
    lines.append("stats_mean " + " ".join(_fmt(v) for v in data.stats.mean))
    lines.append("stats_std " + " ".join(_fmt(v) for v in data.stats.std))
    lines.append(f"samples {len(data.samples)}")
    for s in data.samples:
        label = "-" if s.label is None else str(s.label)
        greedy = "-" if s.greedy is None else ("1" if s.greedy else "0")
        bag = ",".join(str(int(i)) for i in s.bag)
        feats = ",".join(_fmt(v) for v in s.bag_features)
        lines.append(f"sample {_fmt(s.feedback)} {label} {greedy} {bag} {feats}")
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_instance_data(path) -> InstanceData:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != DATASET_MAGIC:
        raise ParseError(f"missing {DATASET_MAGIC} magic line", 1)
    try:
        instance_id = lines[1].split(" ", 1)[1]
        n_cuts = int(lines[2].split()[1])
        ln = 3
        pool = CutPool()
        for _ in range(n_cuts):
            parts = lines[ln].split()
            kind, src_s, beta_s, nnz_s = parts[1], parts[2], parts[3], parts[4]
            idx = np.empty(int(nnz_s), dtype=np.intp)
            val = np.empty(int(nnz_s))
            for k, term in enumerate(parts[5:]):
                i_s, v_s = term.split(":", 1)
                idx[k] = int(i_s)
                val[k] = float(v_s)
            pool.cuts.append(Cut(idx, val, float(beta_s), kind,
                                 None if src_s == "-" else int(src_s)))
            ln += 1
        mean = np.array([float(t) for t in lines[ln].split()[1:]])
        std = np.array([float(t) for t in lines[ln + 1].split()[1:]])
        stats = FeatureStats(mean, std)
        n_samples = int(lines[ln + 2].split()[1])
        ln += 3
        samples = []
        for _ in range(n_samples):
            parts = lines[ln].split()
            feedback = float(parts[1])
            label = None if parts[2] == "-" else int(parts[2])
            greedy = None if parts[3] == "-" else parts[3] == "1"
            bag = np.array([int(t) for t in parts[4].split(",")], dtype=np.intp)
            feats = np.array([float(t) for t in parts[5].split(",")])
            samples.append(TrainingSample(instance_id, bag, feats, feedback,
                                          label=label, greedy=greedy))
            ln += 1
        if lines[ln] != "end":
            raise ParseError("missing 'end' terminator", ln + 1)
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed dataset file: {exc}") from exc
    return InstanceData(instance_id, pool, stats, samples)


def write_loss_log(trace, path):
    with open(path, "w") as fh:
        fh.write("epoch,cross_entropy,penalty,total\n")
        for row in trace:
            fh.write(f"{row.epoch},{_fmt(row.cross_entropy)},"
                     f"{_fmt(row.penalty)},{_fmt(row.total)}\n")
