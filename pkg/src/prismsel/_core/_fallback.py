"""Pure-numpy mirror of the compiled facility-location kernels."""

import numpy as np

# Cap on temporary size inside fl_gains_many (candidates x ground items).
_CHUNK_CELLS = 4_000_000


def _phi(x, kind, qcap, pcap):
    if kind == 0:
        return x
    if kind == 1:
        return np.minimum(x, qcap)
    if kind == 2:
        return np.maximum(x - pcap, 0.0)
    if kind == 3:
        return np.maximum(np.minimum(x, qcap) - pcap, 0.0)
    raise ValueError(f"unknown phi kind {kind}")


def fl_gain(cur, col, kind, qcap, pcap):
    new = np.maximum(cur, col)
    return float(np.sum(_phi(new, kind, qcap, pcap) - _phi(cur, kind, qcap, pcap)))


def fl_gains_many(cols, cur, kind, qcap, pcap):
    m, n = cols.shape
    out = np.empty(m, dtype=np.float64)
    phi_cur_sum = float(np.sum(_phi(cur, kind, qcap, pcap)))
    step = max(1, _CHUNK_CELLS // max(n, 1))
    for lo in range(0, m, step):
        hi = min(lo + step, m)
        new = np.maximum(cur[None, :], cols[lo:hi])
        out[lo:hi] = _phi(new, kind, qcap[None, :], pcap[None, :]).sum(axis=1) - phi_cur_sum
    return out


def fl_commit(cur, col):
    np.maximum(cur, col, out=cur)
