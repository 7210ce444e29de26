"""Synthetic 2D collections and the guided-selection trend study.

Collections are clustered point clouds with designated query and private
points; selections are scored by four cluster-membership metrics
(query coverage, query relevance, diversity, privacy irrelevance).  The
trend study sweeps eta/nu grids over several collections and budgets and
emits a plot-ready CSV.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .kernels import KernelSystem, compute_kernel
from .measures import MeasureSpec
from .optimize import BudgetConfig, lazy_greedy

DEFAULT_STD_GRID = (0.01, 0.02, 0.03, 0.04, 0.05)
DEFAULT_ETA_GRID = (0.0, 0.5, 1.0, 2.0)
DEFAULT_NU_GRID = (0.0, 0.5, 1.0, 2.0)
DEFAULT_BUDGETS = tuple(range(5, 45, 5))

TREND_COLUMNS = (
    "family",
    "variant",
    "eta",
    "nu",
    "budget",
    "coverage",
    "relevance",
    "diversity",
    "privacy_irrelevance",
)


@dataclass
class SyntheticCollection:
    points: np.ndarray
    cluster_of: np.ndarray
    image_indices: np.ndarray
    query_indices: np.ndarray
    private_indices: np.ndarray
    seed: int
    std_dev: float
    n_clusters: int

    def to_json(self) -> dict:
        return {
            "points": self.points.tolist(),
            "cluster_of": self.cluster_of.tolist(),
            "image_indices": self.image_indices.tolist(),
            "query_indices": self.query_indices.tolist(),
            "private_indices": self.private_indices.tolist(),
            "seed": self.seed,
            "std_dev": self.std_dev,
            "n_clusters": self.n_clusters,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticCollection":
        return cls(
            points=np.asarray(obj["points"], dtype=np.float64),
            cluster_of=np.asarray(obj["cluster_of"], dtype=np.intp),
            image_indices=np.asarray(obj["image_indices"], dtype=np.intp),
            query_indices=np.asarray(obj["query_indices"], dtype=np.intp),
            private_indices=np.asarray(obj["private_indices"], dtype=np.intp),
            seed=int(obj["seed"]),
            std_dev=float(obj["std_dev"]),
            n_clusters=int(obj["n_clusters"]),
        )


@dataclass(frozen=True)
class EvalReport:
    query_coverage: float
    query_relevance: float
    diversity: float
    privacy_irrelevance: float

    def to_json(self) -> dict:
        return {
            "query_coverage": self.query_coverage,
            "query_relevance": self.query_relevance,
            "diversity": self.diversity,
            "privacy_irrelevance": self.privacy_irrelevance,
        }


def generate_collection(
    seed: int,
    n_clusters: int = 18,
    n_images: int = 100,
    n_queries: int = 8,
    n_private: int = 2,
    std_dev: float = 0.03,
) -> SyntheticCollection:
    """Clustered 2D collection: cluster centers uniform in the unit
    square, per-cluster image counts multinomial, query and private
    points drawn from distinct randomly chosen clusters."""
    if n_queries + n_private > n_clusters:
        raise InvalidConfig("need n_queries + n_private <= n_clusters")
    if std_dev < 0:
        raise InvalidConfig("std_dev must be nonnegative")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, size=(n_clusters, 2))
    counts = rng.multinomial(n_images, np.full(n_clusters, 1.0 / n_clusters))
    image_clusters = np.repeat(np.arange(n_clusters), counts)
    image_points = centers[image_clusters] + rng.normal(0.0, std_dev, size=(n_images, 2))

    # query/private clusters: distinct, preferring clusters that actually
    # contain image points so the metrics have signal
    nonempty = np.flatnonzero(counts > 0)
    pool = nonempty if len(nonempty) >= n_queries + n_private else np.arange(n_clusters)
    special = rng.choice(pool, size=n_queries + n_private, replace=False)
    q_clusters, p_clusters = special[:n_queries], special[n_queries:]
    q_points = centers[q_clusters] + rng.normal(0.0, std_dev, size=(n_queries, 2))
    p_points = centers[p_clusters] + rng.normal(0.0, std_dev, size=(n_private, 2))

    points = np.vstack([image_points, q_points, p_points])
    cluster_of = np.concatenate([image_clusters, q_clusters, p_clusters])
    return SyntheticCollection(
        points=points,
        cluster_of=cluster_of.astype(np.intp),
        image_indices=np.arange(n_images, dtype=np.intp),
        query_indices=np.arange(n_images, n_images + n_queries, dtype=np.intp),
        private_indices=np.arange(
            n_images + n_queries, n_images + n_queries + n_private, dtype=np.intp
        ),
        seed=seed,
        std_dev=std_dev,
        n_clusters=n_clusters,
    )


def mean_intra_cluster_distance(c: SyntheticCollection) -> float:
    """Mean pairwise distance inside clusters (image points only)."""
    dists = []
    img_clusters = c.cluster_of[c.image_indices]
    for cl in np.unique(img_clusters):
        pts = c.points[c.image_indices[img_clusters == cl]]
        if len(pts) < 2:
            continue
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=2))
        dists.append(d[np.triu_indices(len(pts), k=1)])
    if not dists:
        return 1e-3
    sigma = float(np.mean(np.concatenate(dists)))
    return max(sigma, 1e-3)


def collection_kernel(c: SyntheticCollection, needed_blocks=None) -> KernelSystem:
    """RBF kernel over the 2D points, sigma = mean intra-cluster distance."""
    sigma = mean_intra_cluster_distance(c)
    return compute_kernel(
        c.points[c.image_indices],
        c.points[c.query_indices],
        c.points[c.private_indices],
        metric="euclidean_rbf",
        needed_blocks=needed_blocks,
        sigma=sigma,
    )


def score(selection, c: SyntheticCollection) -> EvalReport:
    """Cluster-membership metrics for a selection of image indices."""
    sel = np.asarray(sorted(set(int(i) for i in selection)), dtype=np.intp)
    img_set = set(c.image_indices.tolist())
    if not set(sel.tolist()) <= img_set:
        raise InvalidConfig("selection must be a subset of the image indices")
    q_clusters = set(c.cluster_of[c.query_indices].tolist())
    p_clusters = set(c.cluster_of[c.private_indices].tolist())
    if len(sel) == 0:
        return EvalReport(0.0, 0.0, 0.0, 1.0)
    sel_clusters = c.cluster_of[sel]
    covered = set(sel_clusters.tolist())
    coverage = sum(1 for qc in c.cluster_of[c.query_indices] if qc in covered) / len(
        c.query_indices
    )
    relevance = float(np.mean([cl in q_clusters for cl in sel_clusters]))
    diversity = len(covered) / c.n_clusters
    privacy = float(np.mean([cl not in p_clusters for cl in sel_clusters]))
    return EvalReport(coverage, relevance, diversity, privacy)


def _param_points(spec: MeasureSpec, eta_grid, nu_grid):
    """Which (eta, nu) settings a spec is swept over in the study."""
    varies_eta = spec.variant in ("MI", "CMI") and spec.family != "GC"
    varies_nu = spec.variant in ("CG", "CMI")
    etas = tuple(eta_grid) if varies_eta else (spec.eta,)
    nus = tuple(nu_grid) if varies_nu else (spec.nu,)
    return [(e, n) for e in etas for n in nus]


def trend_study(
    specs,
    eta_grid=DEFAULT_ETA_GRID,
    nu_grid=DEFAULT_NU_GRID,
    budgets=DEFAULT_BUDGETS,
    n_collections: int = 10,
    seed: int = 0,
    std_grid=DEFAULT_STD_GRID,
) -> list:
    """Sweep specs over parameter grids, collections and budgets.

    Returns one row dict per (spec, eta, nu, budget) with metrics averaged
    over the collections.  A single greedy run at the largest budget is
    scored at every budget prefix.
    """
    budgets = sorted(set(int(b) for b in budgets))
    if not budgets or budgets[0] < 1:
        raise InvalidConfig("budgets must be positive")
    collections = [
        generate_collection(seed + i, std_dev=std_grid[i % len(std_grid)])
        for i in range(n_collections)
    ]
    kernels = [collection_kernel(c) for c in collections]
    rows = []
    for spec in specs:
        from dataclasses import replace as _replace

        for eta, nu in _param_points(spec, eta_grid, nu_grid):
            s = _replace(spec, eta=float(eta), nu=float(nu))
            # per-budget metric accumulators over collections
            acc = {b: np.zeros(4) for b in budgets}
            for c, k in zip(collections, kernels):
                sel = lazy_greedy(
                    s, k, BudgetConfig(budget=budgets[-1], stop_on_nonpositive_gain=False)
                )
                for b in budgets:
                    r = score(sel.order[:b], c)
                    acc[b] += np.array(
                        [r.query_coverage, r.query_relevance, r.diversity, r.privacy_irrelevance]
                    )
            for b in budgets:
                cov, rel, div, priv = acc[b] / len(collections)
                rows.append(
                    {
                        "family": s.family,
                        "variant": s.variant,
                        "eta": s.eta,
                        "nu": s.nu,
                        "budget": b,
                        "coverage": cov,
                        "relevance": rel,
                        "diversity": div,
                        "privacy_irrelevance": priv,
                    }
                )
    return rows


def write_trend_csv(rows, path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TREND_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in TREND_COLUMNS})


def save_collection(path, c: SyntheticCollection) -> None:
    Path(path).write_text(json.dumps(c.to_json()))


def load_collection(path) -> SyntheticCollection:
    return SyntheticCollection.from_json(json.loads(Path(path).read_text()))
