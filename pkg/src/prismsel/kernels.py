"""Block similarity systems over a ground set V, query set Q and private set P.

Only the blocks a measure actually needs are materialized; the cheap MI
measures never touch an n x n structure.  Blocks are plain numpy arrays,
float64 by default (float32 supported for large partitioned kernels).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptySet, MissingBlock, NegativeParameter, ParseError

ALL_BLOCKS = ("vv", "qq", "pp", "vq", "vp", "qp")
METRICS = ("dot", "cosine", "euclidean_rbf")

_MAGIC = b"PRFK"


@dataclass
class KernelSystem:
    n_v: int
    n_q: int
    n_p: int
    blocks: dict = field(default_factory=dict)
    metric_tag: str = "cosine"
    eta: float = 1.0
    nu: float = 1.0
    clipped: bool = False

    def has_block(self, name: str) -> bool:
        return name in self.blocks

    def block(self, name: str) -> np.ndarray:
        try:
            return self.blocks[name]
        except KeyError:
            raise MissingBlock(f"kernel block '{name}' was not materialized") from None

    def memory_plan(self) -> dict:
        """Shapes/bytes of every materialized block; lets callers assert
        that no oversized structure was built."""
        return {
            name: {"shape": tuple(b.shape), "dtype": str(b.dtype), "nbytes": int(b.nbytes)}
            for name, b in self.blocks.items()
        }


def _pairwise(metric: str, x: np.ndarray, y: np.ndarray, sigma: float | None) -> np.ndarray:
    if metric == "dot":
        return x @ y.T
    if metric == "cosine":
        xn = np.linalg.norm(x, axis=1)
        yn = np.linalg.norm(y, axis=1)
        denom = np.outer(xn, yn)
        out = x @ y.T
        np.divide(out, denom, out=out, where=denom > 0)
        out[denom == 0] = 0.0  # zero vectors are similar to nothing
        return out
    if metric == "euclidean_rbf":
        sq = (
            np.sum(x * x, axis=1)[:, None]
            + np.sum(y * y, axis=1)[None, :]
            - 2.0 * (x @ y.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * sigma * sigma))
    raise ValueError(f"unknown metric '{metric}'")


def median_heuristic_sigma(features: np.ndarray, sample_rows: int = 1024) -> float:
    """Median pairwise distance of an evenly-spaced row sample."""
    n = features.shape[0]
    if n > sample_rows:
        idx = np.linspace(0, n - 1, sample_rows).astype(np.intp)
        sample = features[idx]
    else:
        sample = features
    sq = (
        np.sum(sample * sample, axis=1)[:, None]
        + np.sum(sample * sample, axis=1)[None, :]
        - 2.0 * (sample @ sample.T)
    )
    np.maximum(sq, 0.0, out=sq)
    d = np.sqrt(sq[np.triu_indices(sample.shape[0], k=1)])
    med = float(np.median(d)) if d.size else 0.0
    return med if med > 0 else 1.0


def compute_kernel(
    features_v: np.ndarray,
    features_q: np.ndarray | None = None,
    features_p: np.ndarray | None = None,
    metric: str = "cosine",
    needed_blocks=None,
    sigma: float | None = None,
    dtype=np.float64,
) -> KernelSystem:
    """Materialize the requested similarity blocks from feature rows.

    ``needed_blocks`` defaults to every block constructible from the
    provided feature sets.  Requesting a block whose set is absent raises
    EmptySet; mismatched feature dimensions raise DimensionMismatch.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    feats = {"v": np.asarray(features_v, dtype=np.float64)}
    if features_q is not None:
        feats["q"] = np.asarray(features_q, dtype=np.float64)
    if features_p is not None:
        feats["p"] = np.asarray(features_p, dtype=np.float64)
    dims = {k: f.shape[1] for k, f in feats.items()}
    if len(set(dims.values())) > 1:
        raise DimensionMismatch(f"feature dimensions disagree: {dims}")

    if needed_blocks is None:
        needed_blocks = [b for b in ALL_BLOCKS if b[0] in feats and b[1] in feats]
    for b in needed_blocks:
        if b not in ALL_BLOCKS:
            raise ValueError(f"unknown block '{b}'")
        if b[0] not in feats or b[1] not in feats:
            raise EmptySet(f"block '{b}' references a feature set that was not provided")

    if metric == "euclidean_rbf" and sigma is None:
        sigma = median_heuristic_sigma(np.vstack(list(feats.values())))

    blocks = {}
    for b in needed_blocks:
        blocks[b] = np.ascontiguousarray(
            _pairwise(metric, feats[b[0]], feats[b[1]], sigma), dtype=dtype
        )
    return KernelSystem(
        n_v=feats["v"].shape[0],
        n_q=feats["q"].shape[0] if "q" in feats else 0,
        n_p=feats["p"].shape[0] if "p" in feats else 0,
        blocks=blocks,
        metric_tag=metric,
    )


def kernel_from_blocks(blocks: dict, metric_tag: str = "precomputed", **kw) -> KernelSystem:
    """Wrap precomputed similarity blocks (e.g. from a synthetic study)."""
    n_v = blocks["vv"].shape[0] if "vv" in blocks else blocks["vq"].shape[0]
    n_q = blocks["vq"].shape[1] if "vq" in blocks else (blocks["qq"].shape[0] if "qq" in blocks else 0)
    n_p = blocks["vp"].shape[1] if "vp" in blocks else (blocks["pp"].shape[0] if "pp" in blocks else 0)
    return KernelSystem(n_v=n_v, n_q=n_q, n_p=n_p, blocks=dict(blocks), metric_tag=metric_tag, **kw)


def apply_scaling(k: KernelSystem, eta: float, nu: float) -> KernelSystem:
    """Multiply V-Q entries by eta and V-P entries by nu.

    Within-set blocks are untouched; scaling composes multiplicatively.
    """
    if eta < 0 or nu < 0:
        raise NegativeParameter(f"eta={eta}, nu={nu} must be nonnegative")
    blocks = dict(k.blocks)
    if "vq" in blocks:
        blocks["vq"] = blocks["vq"] * eta
    if "vp" in blocks:
        blocks["vp"] = blocks["vp"] * nu
    return replace(k, blocks=blocks, eta=k.eta * eta, nu=k.nu * nu)


def clip_nonnegative(k: KernelSystem) -> KernelSystem:
    blocks = {name: np.maximum(b, 0.0) for name, b in k.blocks.items()}
    return replace(k, blocks=blocks, clipped=True)


# ---------------------------------------------------------------------------
# feature / kernel file formats


def save_features(path, features: np.ndarray, format: str = "binary_f32") -> None:
    path = Path(path)
    features = np.atleast_2d(np.asarray(features))
    if format == "csv":
        np.savetxt(path, features, delimiter=",", fmt="%.8g")
    elif format == "binary_f32":
        rows, dim = features.shape
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", rows, dim))
            fh.write(np.ascontiguousarray(features, dtype="<f4").tobytes())
    else:
        raise ValueError(f"unknown format '{format}'")


def load_features(path, format: str = "binary_f32") -> np.ndarray:
    path = Path(path)
    if format == "csv":
        rows = []
        width = None
        with open(path) as fh:
            for r, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                cells = line.split(",")
                if width is None:
                    width = len(cells)
                elif len(cells) != width:
                    raise ParseError(
                        f"row {r} has {len(cells)} columns, expected {width}", row=r
                    )
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    for c, cell in enumerate(cells):
                        try:
                            float(cell)
                        except ValueError:
                            raise ParseError(
                                f"bad value {cell!r} at row {r}, column {c}", row=r, col=c
                            ) from None
        if not rows:
            raise ParseError("empty feature file", row=0)
        return np.asarray(rows, dtype=np.float64)
    if format == "binary_f32":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise ParseError(f"bad magic {magic!r}, expected {_MAGIC!r}", row=0)
            rows, dim = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(), dtype="<f4")
        if data.size != rows * dim:
            raise ParseError(f"expected {rows * dim} values, found {data.size}", row=0)
        return data.reshape(rows, dim).copy()
    raise ValueError(f"unknown format '{format}'")


def save_kernel(dirpath, k: KernelSystem) -> None:
    """Kernel archive: manifest.json plus one PRFK blob per block."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    manifest = {
        "metric": k.metric_tag,
        "eta": k.eta,
        "nu": k.nu,
        "clip": k.clipped,
        "n_v": k.n_v,
        "n_q": k.n_q,
        "n_p": k.n_p,
        "blocks": sorted(k.blocks),
    }
    (dirpath / "manifest.json").write_text(json.dumps(manifest, indent=2))
    for name, b in k.blocks.items():
        save_features(dirpath / f"{name}.prfk", b, format="binary_f32")


def load_kernel(dirpath) -> KernelSystem:
    dirpath = Path(dirpath)
    manifest = json.loads((dirpath / "manifest.json").read_text())
    blocks = {
        name: load_features(dirpath / f"{name}.prfk", format="binary_f32").astype(np.float64)
        for name in manifest["blocks"]
    }
    return KernelSystem(
        n_v=manifest["n_v"],
        n_q=manifest["n_q"],
        n_p=manifest["n_p"],
        blocks=blocks,
        metric_tag=manifest["metric"],
        eta=manifest["eta"],
        nu=manifest["nu"],
        clipped=manifest["clip"],
    )
