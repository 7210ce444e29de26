"""Greedy maximizers over memoized measure states.

All variants share tie-breaking (highest gain, then lowest index) so the
lazy and naive paths produce identical orders on submodular measures.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceTooLarge, InvalidConfig
from .kernels import KernelSystem
from .measures import MeasureSpec, evaluate, make_state


@dataclass
class BudgetConfig:
    budget: int
    # None resolves per measure: stop early on non-positive gains for the
    # information forms, run to budget for base functions.
    stop_on_nonpositive_gain: bool | None = None

    def resolve_stop(self, spec: MeasureSpec) -> bool:
        if self.stop_on_nonpositive_gain is None:
            return spec.variant != "BASE"
        return self.stop_on_nonpositive_gain


@dataclass
class Selection:
    algorithm: str
    order: list
    gains: list
    objective: float
    evaluations: int
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "order": [int(i) for i in self.order],
            "gains": [float(g) for g in self.gains],
            "objective": float(self.objective),
            "evaluations": int(self.evaluations),
        }
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Selection":
        return cls(
            algorithm=obj["algorithm"],
            order=list(obj["order"]),
            gains=list(obj["gains"]),
            objective=obj["objective"],
            evaluations=obj["evaluations"],
            seed=obj.get("seed"),
            meta=obj.get("meta", {}),
        )


def _normalize(kernel: KernelSystem, budget, candidates):
    if isinstance(budget, int):
        budget = BudgetConfig(budget=budget)
    if budget.budget < 0:
        raise InvalidConfig("budget must be nonnegative")
    if candidates is None:
        cands = np.arange(kernel.n_v, dtype=np.intp)
    else:
        cands = np.asarray(sorted(set(int(c) for c in candidates)), dtype=np.intp)
        if len(cands) and (cands.min() < 0 or cands.max() >= kernel.n_v):
            raise InvalidConfig("candidate indices out of range")
    return budget, cands


def naive_greedy(spec: MeasureSpec, kernel: KernelSystem, budget, candidates=None) -> Selection:
    """Recompute every remaining gain each round; the reference order."""
    budget, cands = _normalize(kernel, budget, candidates)
    stop_early = budget.resolve_stop(spec)
    state = make_state(spec, kernel)
    remaining = list(cands)
    order, gains = [], []
    evals = 0
    k = min(budget.budget, len(remaining))
    for _ in range(k):
        g = state.gains_many(np.asarray(remaining, dtype=np.intp))
        evals += len(remaining)
        best = int(np.argmax(g))  # first max wins: lowest index on ties
        if stop_early and g[best] <= 0.0:
            break
        chosen = remaining.pop(best)
        state.commit(chosen)
        order.append(chosen)
        gains.append(float(g[best]))
    return Selection("naive", order, gains, state.objective, evals)


def lazy_greedy(spec: MeasureSpec, kernel: KernelSystem, budget, candidates=None) -> Selection:
    """Priority-queue greedy with stale-bound reverification.

    On measures whose gains can grow along the selection the cached
    bounds are invalid, so every remaining gain is refreshed each round
    and the order degenerates to the naive one by construction.
    """
    budget, cands = _normalize(kernel, budget, candidates)
    stop_early = budget.resolve_stop(spec)
    state = make_state(spec, kernel)
    order, gains = [], []
    evals = 0
    k = min(budget.budget, len(cands))

    if not state.supports_lazy:
        remaining = list(cands)
        for _ in range(k):
            g = state.gains_many(np.asarray(remaining, dtype=np.intp))
            evals += len(remaining)
            best = int(np.argmax(g))
            if stop_early and g[best] <= 0.0:
                break
            chosen = remaining.pop(best)
            state.commit(chosen)
            order.append(chosen)
            gains.append(float(g[best]))
        return Selection("lazy", order, gains, state.objective, evals)

    g0 = state.gains_many(cands)
    evals += len(cands)
    # heap entries: (-gain, index, round the gain was computed in)
    heap = [(-float(g), int(c), 1) for g, c in zip(g0, cands)]
    heapq.heapify(heap)
    rnd = 1
    while heap and len(order) < k:
        neg_g, c, stamp = heapq.heappop(heap)
        if stamp != rnd:
            fresh = state.gain(c)
            evals += 1
            heapq.heappush(heap, (-fresh, c, rnd))
            continue
        g = -neg_g
        if stop_early and g <= 0.0:
            break
        state.commit(c)
        order.append(c)
        gains.append(g)
        rnd += 1
    return Selection("lazy", order, gains, state.objective, evals)


def stochastic_greedy(
    spec: MeasureSpec,
    kernel: KernelSystem,
    budget,
    seed: int,
    epsilon: float = 0.01,
    candidates=None,
) -> Selection:
    """Sample-based greedy: each round evaluates a random subsample of
    size ceil((n/k) ln(1/epsilon)) of the remaining candidates."""
    if not (0 < epsilon < 1):
        raise InvalidConfig("epsilon must be in (0, 1)")
    budget, cands = _normalize(kernel, budget, candidates)
    stop_early = budget.resolve_stop(spec)
    state = make_state(spec, kernel)
    rng = np.random.default_rng(seed)
    n = len(cands)
    k = min(budget.budget, n)
    sample_size = math.ceil((n / max(k, 1)) * math.log(1.0 / epsilon)) if k else 0
    remaining = list(cands)
    order, gains = [], []
    evals = 0
    for _ in range(k):
        s = min(sample_size, len(remaining))
        pick = rng.choice(len(remaining), size=s, replace=False)
        pick.sort()  # ascending candidate order keeps tie-breaks stable
        sample = np.asarray([remaining[i] for i in pick], dtype=np.intp)
        g = state.gains_many(sample)
        evals += s
        best = int(np.argmax(g))
        if stop_early and g[best] <= 0.0:
            break
        chosen = int(sample[best])
        remaining.remove(chosen)
        state.commit(chosen)
        order.append(chosen)
        gains.append(float(g[best]))
    return Selection("stochastic", order, gains, state.objective, evals, seed=seed)


_EXHAUSTIVE_CAP = 1_000_000


def exhaustive_search(spec: MeasureSpec, kernel: KernelSystem, budget, candidates=None) -> Selection:
    """Optimal subset of exactly ``budget`` items by enumeration."""
    budget, cands = _normalize(kernel, budget, candidates)
    k = budget.budget
    if k > len(cands):
        raise InvalidConfig("budget exceeds candidate pool")
    if math.comb(len(cands), k) > _EXHAUSTIVE_CAP:
        raise InstanceTooLarge(
            f"C({len(cands)}, {k}) exceeds the exhaustive cap of {_EXHAUSTIVE_CAP}"
        )
    best_val = -math.inf
    best_set: tuple = ()
    evals = 0
    for combo in itertools.combinations(cands.tolist(), k):
        val = evaluate(spec, kernel, combo)
        evals += 1
        if val > best_val:
            best_val = val
            best_set = combo
    return Selection("exhaustive", list(best_set), [], best_val, evals)
