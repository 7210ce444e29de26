import numpy as np
import pytest

from prismsel.kernels import clip_nonnegative, compute_kernel

ALL_MEASURES = [
    "fl",
    "flvmi",
    "flcg",
    "flcmi",
    "flqmi",
    "gc",
    "gcmi",
    "gccg",
    "logdet",
    "logdetmi",
    "logdetcg",
    "logdetcmi",
    "com",
    "disparity_sum",
]


def random_kernel(rng, n=10, q=3, p=2, pd=False):
    """Random block kernel; cosine-clipped by default, RBF (positive
    definite) when the caller needs log-det measures."""
    d = 6
    fv = rng.normal(size=(n, d))
    fq = rng.normal(size=(q, d))
    fp = rng.normal(size=(p, d))
    if pd:
        return compute_kernel(fv, fq, fp, metric="euclidean_rbf")
    return clip_nonnegative(compute_kernel(fv, fq, fp, metric="cosine"))


def kernel_for(name, rng, n=10, q=3, p=2):
    return random_kernel(rng, n=n, q=q, p=p, pd=name.startswith("logdet"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
