"""End-to-end guided selection over feature matrices.

Targeted jobs build only the kernel blocks the measure needs, run a
greedy maximizer, and optionally split large pools into contiguous
chunks with proportionally apportioned budgets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptySet, InvalidConfig
from .kernels import KernelSystem, clip_nonnegative, compute_kernel
from .measures import MeasureSpec, required_blocks
from .optimize import BudgetConfig, Selection, lazy_greedy, naive_greedy, stochastic_greedy

_ALGOS = ("naive", "lazy", "stochastic")


@dataclass
class TargetedJob:
    unlabeled_features: np.ndarray
    spec: MeasureSpec
    budget: int
    target_features: np.ndarray | None = None
    private_features: np.ndarray | None = None
    partitions: int = 1
    seed: int = 0
    metric: str = "cosine"
    algo: str = "lazy"
    epsilon: float = 0.01
    shuffle: bool = False
    dtype: type = np.float64
    stop_on_nonpositive_gain: bool | None = None

    def __post_init__(self):
        self.unlabeled_features = np.atleast_2d(np.asarray(self.unlabeled_features))
        if self.budget < 0 or self.budget > self.unlabeled_features.shape[0]:
            raise InvalidConfig("budget must be within the unlabeled pool size")
        if self.partitions < 1:
            raise InvalidConfig("partitions must be >= 1")
        if self.algo not in _ALGOS:
            raise InvalidConfig(f"algo must be one of {_ALGOS}")


@dataclass
class SummarizationJob:
    mode: str  # generic | query | privacy | joint
    features: np.ndarray
    spec: MeasureSpec
    budget: int
    query_features: np.ndarray | None = None
    private_features: np.ndarray | None = None
    metric: str = "cosine"
    algo: str = "lazy"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("generic", "query", "privacy", "joint"):
            raise InvalidConfig(f"unknown summarization mode {self.mode!r}")
        if self.mode in ("query", "joint") and self.query_features is None:
            raise InvalidConfig(f"mode {self.mode!r} requires query features")
        if self.mode in ("privacy", "joint") and self.private_features is None:
            raise InvalidConfig(f"mode {self.mode!r} requires private features")


def _degrade_spec(spec: MeasureSpec, has_q: bool, has_p: bool) -> MeasureSpec:
    """CMI without a private set is the MI form; CG without one is the
    base function.  MI without a query set is not meaningful."""
    if not has_p and spec.variant == "CMI":
        spec = replace(spec, variant="MI")
    if not has_p and spec.variant == "CG":
        spec = replace(spec, variant="BASE")
    if not has_q and spec.variant == "MI":
        raise EmptySet("MI measures require target (query) features")
    return spec


def _build_kernel(job: TargetedJob, spec: MeasureSpec, features: np.ndarray) -> KernelSystem:
    needed = required_blocks(spec)
    k = compute_kernel(
        features,
        features_q=job.target_features,
        features_p=job.private_features,
        metric=job.metric,
        needed_blocks=needed,
        dtype=job.dtype,
    )
    if job.metric in ("dot", "cosine") and spec.family != "LOGDET":
        k = clip_nonnegative(k)
    return k


def _select(job: TargetedJob, spec: MeasureSpec, kernel: KernelSystem, budget: int) -> Selection:
    cfg = BudgetConfig(budget=budget, stop_on_nonpositive_gain=job.stop_on_nonpositive_gain)
    if job.algo == "naive":
        return naive_greedy(spec, kernel, cfg)
    if job.algo == "stochastic":
        return stochastic_greedy(spec, kernel, cfg, seed=job.seed, epsilon=job.epsilon)
    return lazy_greedy(spec, kernel, cfg)


def run_targeted(job: TargetedJob) -> Selection:
    """Kernel construction plus greedy maximization on the full pool."""
    spec = _degrade_spec(
        job.spec, job.target_features is not None, job.private_features is not None
    )
    kernel = _build_kernel(job, spec, job.unlabeled_features)
    sel = _select(job, spec, kernel, job.budget)
    sel.meta["memory_plan"] = kernel.memory_plan()
    return sel


def apportion_budget(chunk_sizes, k: int) -> list:
    """Largest-remainder split of budget k proportional to chunk sizes."""
    total = sum(chunk_sizes)
    if total == 0:
        raise InvalidConfig("empty pool")
    quotas = [k * s / total for s in chunk_sizes]
    floors = [int(q) for q in quotas]
    short = k - sum(floors)
    # distribute leftovers to the largest fractional remainders; ties go
    # to earlier chunks for determinism
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return floors


def run_partitioned(job: TargetedJob) -> Selection:
    """Split the pool into contiguous equal chunks and select per chunk.

    Chunk budgets are proportional to chunk sizes (largest remainder).
    The returned order concatenates per-chunk selections; per-chunk
    objectives live in the meta field.
    """
    n = job.unlabeled_features.shape[0]
    p = job.partitions
    if p > n:
        raise InvalidConfig("more partitions than pool items")
    idx = np.arange(n)
    if job.shuffle:
        np.random.default_rng(job.seed).shuffle(idx)
    base, rem = divmod(n, p)
    sizes = [base + (1 if i < rem else 0) for i in range(p)]
    budgets = apportion_budget(sizes, job.budget)
    bounds = np.cumsum([0] + sizes)

    order, gains = [], []
    objective = 0.0
    evals = 0
    chunk_objectives = []
    plans = []
    for i in range(p):
        members = idx[bounds[i] : bounds[i + 1]]
        sub = replace(job, unlabeled_features=job.unlabeled_features[members],
                      budget=budgets[i], partitions=1)
        sel = run_targeted(sub)
        order += [int(members[j]) for j in sel.order]
        gains += sel.gains
        objective += sel.objective
        evals += sel.evaluations
        chunk_objectives.append(sel.objective)
        plans.append(sel.meta["memory_plan"])
    out = Selection("partitioned", order, gains, objective, evals, seed=job.seed)
    out.meta["chunk_sizes"] = sizes
    out.meta["chunk_budgets"] = budgets
    out.meta["chunk_objectives"] = chunk_objectives
    out.meta["memory_plans"] = plans
    return out


def run_summarization(job: SummarizationJob) -> Selection:
    """Bind Q/P per mode and maximize: generic summarization sets the
    query set to the ground set itself."""
    q = {
        "generic": job.features,
        "query": job.query_features,
        "privacy": None,
        "joint": job.query_features,
    }[job.mode]
    p = job.private_features if job.mode in ("privacy", "joint") else None
    spec = job.spec
    if job.mode == "privacy" and spec.variant in ("MI", "CMI"):
        spec = replace(spec, variant="CG")
    tj = TargetedJob(
        unlabeled_features=job.features,
        spec=spec,
        budget=job.budget,
        target_features=q,
        private_features=p,
        metric=job.metric,
        algo=job.algo,
        seed=job.seed,
    )
    return run_targeted(tj)
