"""Parameterized submodular information measures over kernel block systems.

Each measure comes in up to four flavors: the base set function, its
mutual-information form against a query set Q, its conditional-gain form
against a private set P, and the conditional mutual information combining
both.  ``evaluate`` computes the closed form from scratch;
``make_state``/``marginal_gain``/``commit`` provide the memoized
incremental path the greedy optimizers run on; ``definitional_oracle``
recomputes the same quantities from the set-theoretic definitions on a
joint ground set and exists for testing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _core, linalg
from .errors import (
    AlreadySelected,
    InstanceTooLarge,
    InvalidConfig,
    MissingBlock,
)
from .kernels import KernelSystem

FAMILIES = ("FL", "FLQ", "GC", "LOGDET", "COM", "DISPARITY_SUM")
VARIANTS = ("BASE", "MI", "CG", "CMI")
PSI_CHOICES = ("sqrt", "log1p", "identity")

# Which variants each family supports.  GC's CMI degenerates to its MI
# (it never sees the private set), the query-variant FL and COM only have
# a usable MI form, and disparity-sum is a pure diversity base function.
_VALID = {
    "FL": ("BASE", "MI", "CG", "CMI"),
    "FLQ": ("MI",),
    "GC": ("BASE", "MI", "CG"),
    "LOGDET": ("BASE", "MI", "CG", "CMI"),
    "COM": ("MI",),
    "DISPARITY_SUM": ("BASE",),
}

_NAME_TABLE = {
    "fl": ("FL", "BASE"),
    "flvmi": ("FL", "MI"),
    "flcg": ("FL", "CG"),
    "flcmi": ("FL", "CMI"),
    "flqmi": ("FLQ", "MI"),
    "gc": ("GC", "BASE"),
    "gcmi": ("GC", "MI"),
    "gccg": ("GC", "CG"),
    "logdet": ("LOGDET", "BASE"),
    "logdetmi": ("LOGDET", "MI"),
    "logdetcg": ("LOGDET", "CG"),
    "logdetcmi": ("LOGDET", "CMI"),
    "com": ("COM", "MI"),
    "disparity_sum": ("DISPARITY_SUM", "BASE"),
}


def _psi(name):
    if name == "sqrt":
        return lambda x: np.sqrt(np.maximum(x, 0.0))
    if name == "log1p":
        return lambda x: np.log1p(np.maximum(x, 0.0))
    if name == "identity":
        return lambda x: np.asarray(x, dtype=np.float64)
    raise InvalidConfig(f"psi must be one of {PSI_CHOICES}, got {name!r}")


@dataclass(frozen=True)
class MeasureSpec:
    family: str
    variant: str
    lam: float = 1.0
    eta: float = 1.0
    nu: float = 1.0
    psi: str = "sqrt"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidConfig(f"unknown family {self.family!r}")
        if self.variant not in _VALID[self.family]:
            raise InvalidConfig(
                f"variant {self.variant!r} is not defined for family {self.family!r}"
            )
        if min(self.lam, self.eta, self.nu) < 0:
            raise InvalidConfig("lambda, eta, nu must be nonnegative")
        if self.psi not in PSI_CHOICES:
            raise InvalidConfig(f"psi must be one of {PSI_CHOICES}")

    @classmethod
    def from_name(cls, name: str, **params) -> "MeasureSpec":
        """Build a spec from a short measure name like 'flqmi' or 'gccg'."""
        key = name.strip().lower()
        if key not in _NAME_TABLE:
            raise InvalidConfig(f"unknown measure name {name!r}")
        family, variant = _NAME_TABLE[key]
        return cls(family=family, variant=variant, **params)

    @property
    def name(self) -> str:
        for short, fv in _NAME_TABLE.items():
            if fv == (self.family, self.variant):
                return short
        return f"{self.family.lower()}_{self.variant.lower()}"

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "variant": self.variant,
            "lambda": self.lam,
            "eta": self.eta,
            "nu": self.nu,
            "psi": self.psi,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MeasureSpec":
        return cls(
            family=obj["family"],
            variant=obj["variant"],
            lam=obj.get("lambda", 1.0),
            eta=obj.get("eta", 1.0),
            nu=obj.get("nu", 1.0),
            psi=obj.get("psi", "sqrt"),
        )


@dataclass(frozen=True)
class GainReport:
    item: int
    gain: float
    objective_after: float


def required_blocks(spec: MeasureSpec) -> tuple:
    """Kernel blocks a measure touches; used for lazy materialization."""
    fam, var = spec.family, spec.variant
    if fam == "FLQ":
        return ("vq",)
    if fam == "COM":
        return ("vq",)
    if fam == "GC":
        if var == "MI":
            return ("vq",)
        if var == "CG":
            return ("vv", "vp")
        return ("vv",)
    if fam == "FL":
        need = ["vv"]
        if var in ("MI", "CMI"):
            need.append("vq")
        if var in ("CG", "CMI"):
            need.append("vp")
        return tuple(need)
    if fam == "LOGDET":
        need = ["vv"]
        if var in ("MI", "CMI"):
            need += ["vq", "qq"]
        if var in ("CG", "CMI"):
            need += ["vp", "pp"]
        if var == "CMI":
            need.append("qp")
        return tuple(need)
    return ("vv",)  # DISPARITY_SUM


def preset(name: str) -> MeasureSpec:
    """Named parameter presets matching known selection strategies.

    targeted_craig  -- query-variant FL MI with eta=0: pure coverage of
                       the target, no per-item relevance bonus.
    grad_match_like -- graph-cut MI with lambda=0.5 so the objective is
                       the raw sum of cross similarities; meant to be
                       paired with a dot-product gradient kernel and a
                       diversity component in a mixture.
    glister_com     -- concave-over-modular MI with eta=0 (sqrt psi).
    """
    if name == "targeted_craig":
        return MeasureSpec(family="FLQ", variant="MI", eta=0.0)
    if name == "grad_match_like":
        return MeasureSpec(family="GC", variant="MI", lam=0.5)
    if name == "glister_com":
        return MeasureSpec(family="COM", variant="MI", eta=0.0, psi="sqrt")
    raise InvalidConfig(f"unknown preset {name!r}")


# ---------------------------------------------------------------------------
# closed-form evaluation


def _idx(a) -> np.ndarray:
    return np.asarray(sorted(set(int(i) for i in a)), dtype=np.intp)


def _max_over(block: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Row-wise max over columns ``a``; 0 for an empty index set."""
    if len(a) == 0:
        return np.zeros(block.shape[0])
    return block[:, a].max(axis=1)


def evaluate(spec: MeasureSpec, kernel: KernelSystem, a) -> float:
    """Closed-form value of the measure on subset ``a`` of V."""
    a = _idx(a)
    if len(a) and (a.min() < 0 or a.max() >= kernel.n_v):
        raise InvalidConfig("subset indices out of range of the ground set")
    fam, var = spec.family, spec.variant

    if fam == "FL":
        vv = kernel.block("vv")
        max_a = _max_over(vv, a)
        if var == "BASE":
            return float(max_a.sum())
        if var == "MI":
            qcap = spec.eta * kernel.block("vq").max(axis=1)
            return float(np.minimum(max_a, qcap).sum())
        if var == "CG":
            pcap = spec.nu * kernel.block("vp").max(axis=1)
            return float(np.maximum(max_a - pcap, 0.0).sum())
        qcap = spec.eta * kernel.block("vq").max(axis=1)
        pcap = spec.nu * kernel.block("vp").max(axis=1)
        return float(np.maximum(np.minimum(max_a, qcap) - pcap, 0.0).sum())

    if fam == "FLQ":
        vq = kernel.block("vq")
        if len(a) == 0:
            return 0.0
        coverage = vq[a, :].max(axis=0).sum()
        relevance = vq[a, :].max(axis=1).sum()
        return float(coverage + spec.eta * relevance)

    if fam == "GC":
        if var == "MI":
            vq = kernel.block("vq")
            return float(2.0 * spec.lam * vq[a, :].sum()) if len(a) else 0.0
        vv = kernel.block("vv")
        if len(a) == 0:
            return 0.0
        base = float(vv[a, :].sum() - spec.lam * vv[np.ix_(a, a)].sum())
        if var == "BASE":
            return base
        vp = kernel.block("vp")
        return base - 2.0 * spec.lam * spec.nu * float(vp[a, :].sum())

    if fam == "COM":
        vq = kernel.block("vq")
        if len(a) == 0:
            return 0.0
        psi = _psi(spec.psi)
        per_item = psi(vq[a, :].sum(axis=1)).sum()
        per_query = psi(vq[a, :].sum(axis=0)).sum()
        return float(spec.eta * per_item + per_query)

    if fam == "DISPARITY_SUM":
        vv = kernel.block("vv")
        if len(a) < 2:
            return 0.0
        sub = vv[np.ix_(a, a)]
        iu = np.triu_indices(len(a), k=1)
        return float(np.sum(1.0 - sub[iu]))

    # LOGDET family
    return _evaluate_logdet(spec, kernel, a)


def _q_factor(kernel: KernelSystem) -> linalg.CholFactor:
    return linalg.cholesky(kernel.block("qq"))


def _p_factor(kernel: KernelSystem) -> linalg.CholFactor:
    return linalg.cholesky(kernel.block("pp"))


def _evaluate_logdet(spec: MeasureSpec, kernel: KernelSystem, a: np.ndarray) -> float:
    var = spec.variant
    vv = kernel.block("vv")
    if var == "BASE":
        if len(a) == 0:
            return 0.0
        return linalg.cholesky(vv[np.ix_(a, a)]).log_det()
    if var == "MI":
        if len(a) == 0:
            return 0.0
        s_a = vv[np.ix_(a, a)]
        s_aq = spec.eta * kernel.block("vq")[a, :]
        cond = linalg.conditioned_matrix(s_a, s_aq, _q_factor(kernel))
        return linalg.cholesky(s_a).log_det() - linalg.cholesky(cond).log_det()
    if var == "CG":
        if len(a) == 0:
            return 0.0
        s_a = vv[np.ix_(a, a)]
        s_ap = spec.nu * kernel.block("vp")[a, :]
        cond = linalg.conditioned_matrix(s_a, s_ap, _p_factor(kernel))
        return linalg.cholesky(cond).log_det()
    # CMI: log det ratio over the [A, P] joint with eta/nu-scaled crosses.
    m_joint = _logdet_cmi_joint(spec, kernel, a)
    b_cross = _logdet_cmi_cross(spec, kernel, a)
    cond = linalg.conditioned_matrix(m_joint, b_cross, _q_factor(kernel))
    val = linalg.cholesky(m_joint).log_det() - linalg.cholesky(cond).log_det()
    m0 = _logdet_cmi_joint(spec, kernel, np.empty(0, dtype=np.intp))
    b0 = _logdet_cmi_cross(spec, kernel, np.empty(0, dtype=np.intp))
    cond0 = linalg.conditioned_matrix(m0, b0, _q_factor(kernel))
    val0 = linalg.cholesky(m0).log_det() - linalg.cholesky(cond0).log_det()
    return val - val0


def _logdet_cmi_joint(spec: MeasureSpec, kernel: KernelSystem, a: np.ndarray) -> np.ndarray:
    """Similarity over [A, P] with the A-P cross scaled by nu."""
    vv, pp, vp = kernel.block("vv"), kernel.block("pp"), kernel.block("vp")
    na, npp = len(a), pp.shape[0]
    out = np.empty((na + npp, na + npp))
    out[:na, :na] = vv[np.ix_(a, a)]
    out[:na, na:] = spec.nu * vp[a, :]
    out[na:, :na] = out[:na, na:].T
    out[na:, na:] = pp
    return out


def _logdet_cmi_cross(spec: MeasureSpec, kernel: KernelSystem, a: np.ndarray) -> np.ndarray:
    """Cross block [A, P] x Q with the A-Q cross scaled by eta."""
    vq = kernel.block("vq")
    qp = kernel.block("qp")
    return np.vstack([spec.eta * vq[a, :], qp.T])


# ---------------------------------------------------------------------------
# definitional oracle (test-only path)

_ORACLE_CAP = 64


def definitional_oracle(spec: MeasureSpec, kernel: KernelSystem, a, q=None, p=None) -> float:
    """Set-theoretic value of the measure via its base function on the
    joint ground set V u Q u P with the eta/nu-scaled kernel.

    This is deliberately independent of the closed forms above: it builds
    the full joint similarity matrix and applies the raw definitions
    f(A)+f(Q)-f(AuQ) (MI), f(AuP)-f(P) (CG), or the four-term CMI.
    Instances above 64 total items are rejected.
    """
    a = _idx(a)
    q_idx = np.arange(kernel.n_q, dtype=np.intp) if q is None else _idx(q)
    p_idx = np.arange(kernel.n_p, dtype=np.intp) if p is None else _idx(p)
    n, nq, npr = kernel.n_v, len(q_idx), len(p_idx)
    if n + nq + npr > _ORACLE_CAP:
        raise InstanceTooLarge(f"oracle capped at {_ORACLE_CAP} joint items")

    base = _oracle_base(spec, kernel, q_idx, p_idx)
    set_a = set(a.tolist())
    set_q = set((n + i for i in range(nq)))
    set_p = set((n + nq + i for i in range(npr)))
    var = spec.variant
    if var == "BASE":
        return base(set_a)
    if var == "MI":
        return base(set_a) + base(set_q) - base(set_a | set_q)
    if var == "CG":
        return base(set_a | set_p) - base(set_p)
    return (
        base(set_a | set_p)
        + base(set_q | set_p)
        - base(set_a | set_q | set_p)
        - base(set_p)
    )


def _joint_kernel(spec: MeasureSpec, kernel: KernelSystem, q_idx, p_idx, identity_within: bool):
    """Joint similarity over [V, Q, P] with eta on V-Q and nu on V-P.

    ``identity_within`` replaces the within-V and within-V' blocks by
    identity matrices (the construction under which the query-variant FL
    and concave-over-modular derivations hold).
    """
    n, nq, npr = kernel.n_v, len(q_idx), len(p_idx)
    m = n + nq + npr
    joint = np.zeros((m, m))
    if identity_within:
        joint[:n, :n] = np.eye(n)
        joint[n:, n:] = np.eye(nq + npr)
    else:
        joint[:n, :n] = kernel.block("vv")
        if nq:
            joint[n : n + nq, n : n + nq] = kernel.block("qq")[np.ix_(q_idx, q_idx)]
        if npr:
            joint[n + nq :, n + nq :] = kernel.block("pp")[np.ix_(p_idx, p_idx)]
        if nq and npr:
            qp = kernel.block("qp")[np.ix_(q_idx, p_idx)]
            joint[n : n + nq, n + nq :] = qp
            joint[n + nq :, n : n + nq] = qp.T
    if nq:
        vq = spec.eta * kernel.block("vq")[:, q_idx]
        joint[:n, n : n + nq] = vq
        joint[n : n + nq, :n] = vq.T
    if npr:
        vp = spec.nu * kernel.block("vp")[:, p_idx]
        joint[:n, n + nq :] = vp
        joint[n + nq :, :n] = vp.T
    return joint


def _oracle_base(spec: MeasureSpec, kernel: KernelSystem, q_idx, p_idx):
    n = kernel.n_v
    nq, npr = len(q_idx), len(p_idx)
    fam = spec.family

    if fam == "FL":
        joint = _joint_kernel(spec, kernel, q_idx, p_idx, identity_within=False)

        def base(x):
            xi = np.asarray(sorted(x), dtype=np.intp)
            return float(_max_over(joint[:n, :], xi).sum())

        return base

    if fam == "FLQ":
        joint = _joint_kernel(spec, kernel, q_idx, p_idx, identity_within=True)

        def base(x):
            xi = np.asarray(sorted(x), dtype=np.intp)
            return float(_max_over(joint, xi).sum())

        return base

    if fam == "GC":
        joint = _joint_kernel(spec, kernel, q_idx, p_idx, identity_within=False)
        lam = spec.lam

        def base(x):
            xi = np.asarray(sorted(x), dtype=np.intp)
            if len(xi) == 0:
                return 0.0
            rep = joint[np.ix_(xi, np.arange(n))].sum()
            red = joint[np.ix_(xi, xi)].sum()
            return float(rep - lam * red)

        return base

    if fam == "LOGDET":
        joint = _joint_kernel(spec, kernel, q_idx, p_idx, identity_within=False)

        def base(x):
            xi = np.asarray(sorted(x), dtype=np.intp)
            if len(xi) == 0:
                return 0.0
            return linalg.cholesky(joint[np.ix_(xi, xi)]).log_det()

        return base

    if fam == "COM":
        joint = _joint_kernel(spec, kernel, q_idx, p_idx, identity_within=True)
        psi = _psi(spec.psi)
        # Saturation constant: psi(big * anything selected in the home set)
        # must dominate every cross-modular sum, so the max() picks the
        # home-set term exactly when the set intersects it.
        big = float(n + nq + npr)
        ground_v = np.arange(n)
        ground_aux = np.arange(n, n + nq + npr)
        eta = spec.eta

        def base(x):
            xi = np.asarray(sorted(x), dtype=np.intp)
            in_v = xi[xi < n]
            in_aux = xi[xi >= n]
            aux_term = np.maximum(
                psi(joint[np.ix_(ground_aux, in_v)].sum(axis=1)) if len(in_v) else 0.0,
                psi(big * joint[np.ix_(ground_aux, in_aux)].sum(axis=1)) if len(in_aux) else 0.0,
            )
            v_term = np.maximum(
                psi(joint[np.ix_(ground_v, in_aux)].sum(axis=1)) if len(in_aux) else 0.0,
                psi(big * joint[np.ix_(ground_v, in_v)].sum(axis=1)) if len(in_v) else 0.0,
            )
            return float(np.sum(aux_term) + np.sum(v_term))

        return base

    if fam == "DISPARITY_SUM":
        joint = _joint_kernel(spec, kernel, q_idx, p_idx, identity_within=False)

        def base(x):
            xi = np.asarray(sorted(x), dtype=np.intp)
            if len(xi) < 2:
                return 0.0
            sub = joint[np.ix_(xi, xi)]
            iu = np.triu_indices(len(xi), k=1)
            return float(np.sum(1.0 - sub[iu]))

        return base

    raise InvalidConfig(f"no oracle for family {fam!r}")


# ---------------------------------------------------------------------------
# memoized incremental states


class MeasureState:
    """Base class for memoized marginal-gain evaluation.

    Subclasses maintain family-specific caches so that ``gain`` is cheap
    and ``commit`` keeps the cache consistent with the growing selection.
    """

    #: gains are nonincreasing along commits (submodular), so lazy greedy
    #: may trust stale upper bounds
    supports_lazy = True

    def __init__(self, spec: MeasureSpec, kernel: KernelSystem):
        self.spec = spec
        self.kernel = kernel
        self.selected: list[int] = []
        self.objective = 0.0

    def gain(self, candidate: int) -> float:
        raise NotImplementedError

    def gains_many(self, candidates: np.ndarray) -> np.ndarray:
        return np.array([self.gain(int(c)) for c in candidates])

    def _apply(self, candidate: int) -> None:
        raise NotImplementedError

    def commit(self, candidate: int) -> "MeasureState":
        candidate = int(candidate)
        if candidate in self.selected:
            raise AlreadySelected(f"index {candidate} already selected")
        g = self.gain(candidate)
        self._apply(candidate)
        self.selected.append(candidate)
        self.objective += g
        return self

    def gain_report(self, candidate: int) -> GainReport:
        g = self.gain(int(candidate))
        return GainReport(item=int(candidate), gain=g, objective_after=self.objective + g)


class _FLVState(MeasureState):
    """Facility-location family over V: plain, query-capped, private-
    conditioned and joint forms share one running-max cache."""

    def __init__(self, spec, kernel):
        super().__init__(spec, kernel)
        self.vv = kernel.block("vv")
        n = self.vv.shape[0]
        self.cur = np.zeros(n)
        var = spec.variant
        zeros = np.zeros(n)
        if var == "BASE":
            self.kind, self.qcap, self.pcap = _core.PHI_PLAIN, zeros, zeros
        elif var == "MI":
            self.kind = _core.PHI_QCAP
            self.qcap = np.ascontiguousarray(spec.eta * kernel.block("vq").max(axis=1), dtype=np.float64)
            self.pcap = zeros
        elif var == "CG":
            self.kind = _core.PHI_PCG
            self.qcap = zeros
            self.pcap = np.ascontiguousarray(spec.nu * kernel.block("vp").max(axis=1), dtype=np.float64)
        else:
            self.kind = _core.PHI_CMI
            self.qcap = np.ascontiguousarray(spec.eta * kernel.block("vq").max(axis=1), dtype=np.float64)
            self.pcap = np.ascontiguousarray(spec.nu * kernel.block("vp").max(axis=1), dtype=np.float64)
        # phi(0) is nonzero only for unclipped negative caps; keep the
        # objective aligned with evaluate() on the empty set.
        if self.kind == _core.PHI_QCAP:
            self.objective = float(np.minimum(0.0, self.qcap).sum())
        elif self.kind == _core.PHI_PCG:
            self.objective = float(np.maximum(-self.pcap, 0.0).sum())
        elif self.kind == _core.PHI_CMI:
            self.objective = float(
                np.maximum(np.minimum(0.0, self.qcap) - self.pcap, 0.0).sum()
            )

    def gain(self, candidate):
        return float(_core.fl_gain(self.cur, self.vv[candidate], self.kind, self.qcap, self.pcap))

    def gains_many(self, candidates):
        candidates = np.asarray(candidates, dtype=np.intp)
        n = self.vv.shape[0]
        if len(candidates) > n // 2:
            allg = _core.fl_gains_many(self.vv, self.cur, self.kind, self.qcap, self.pcap)
            return allg[candidates]
        rows = np.ascontiguousarray(self.vv[candidates])
        return _core.fl_gains_many(rows, self.cur, self.kind, self.qcap, self.pcap)

    def _apply(self, candidate):
        _core.fl_commit(self.cur, self.vv[candidate])


class _FLQState(MeasureState):
    """Query-variant FL MI: running max per query plus a modular bonus."""

    def __init__(self, spec, kernel):
        super().__init__(spec, kernel)
        self.vq = np.ascontiguousarray(kernel.block("vq"))
        nq = self.vq.shape[1]
        self.cur = np.zeros(nq)
        self._zeros = np.zeros(nq)
        self.bonus = spec.eta * self.vq.max(axis=1)

    def gain(self, candidate):
        g = _core.fl_gain(self.cur, self.vq[candidate], _core.PHI_PLAIN, self._zeros, self._zeros)
        return float(g + self.bonus[candidate])

    def gains_many(self, candidates):
        candidates = np.asarray(candidates, dtype=np.intp)
        rows = np.ascontiguousarray(self.vq[candidates])
        g = _core.fl_gains_many(rows, self.cur, _core.PHI_PLAIN, self._zeros, self._zeros)
        return g + self.bonus[candidates]

    def _apply(self, candidate):
        _core.fl_commit(self.cur, self.vq[candidate])


class _GCState(MeasureState):
    def __init__(self, spec, kernel):
        super().__init__(spec, kernel)
        var = spec.variant
        if var == "MI":
            self.modular = 2.0 * spec.lam * kernel.block("vq").sum(axis=1)
            self.vv = None
        else:
            self.vv = kernel.block("vv")
            self.modular = self.vv.sum(axis=1).astype(np.float64)
            if var == "CG":
                self.modular = self.modular - 2.0 * spec.lam * spec.nu * kernel.block("vp").sum(axis=1)
            self.cross = np.zeros(self.vv.shape[0])

    def gain(self, candidate):
        if self.vv is None:
            return float(self.modular[candidate])
        lam = self.spec.lam
        return float(
            self.modular[candidate]
            - lam * (2.0 * self.cross[candidate] + self.vv[candidate, candidate])
        )

    def gains_many(self, candidates):
        candidates = np.asarray(candidates, dtype=np.intp)
        if self.vv is None:
            return self.modular[candidates].astype(np.float64)
        lam = self.spec.lam
        diag = self.vv[candidates, candidates]
        return self.modular[candidates] - lam * (2.0 * self.cross[candidates] + diag)

    def _apply(self, candidate):
        if self.vv is not None:
            self.cross += self.vv[candidate]


class _COMState(MeasureState):
    def __init__(self, spec, kernel):
        super().__init__(spec, kernel)
        self.vq = kernel.block("vq")
        self.psi = _psi(spec.psi)
        self.bonus = spec.eta * self.psi(self.vq.sum(axis=1))
        self.colsum = np.zeros(self.vq.shape[1])

    def gain(self, candidate):
        delta = self.psi(self.colsum + self.vq[candidate]) - self.psi(self.colsum)
        return float(self.bonus[candidate] + delta.sum())

    def gains_many(self, candidates):
        candidates = np.asarray(candidates, dtype=np.intp)
        new = self.colsum[None, :] + self.vq[candidates]
        delta = self.psi(new) - self.psi(self.colsum)[None, :]
        return self.bonus[candidates] + delta.sum(axis=1)

    def _apply(self, candidate):
        self.colsum += self.vq[candidate]


class _DisparityState(MeasureState):
    # gains grow with the selection: not submodular, no lazy bounds
    supports_lazy = False

    def __init__(self, spec, kernel):
        super().__init__(spec, kernel)
        self.vv = kernel.block("vv")
        self.cross = np.zeros(self.vv.shape[0])

    def gain(self, candidate):
        return float(len(self.selected) - self.cross[candidate])

    def gains_many(self, candidates):
        candidates = np.asarray(candidates, dtype=np.intp)
        return len(self.selected) - self.cross[candidates]

    def _apply(self, candidate):
        self.cross += self.vv[candidate]


class _LogDetState(MeasureState):
    """Incremental log-det forms via rank-one Cholesky extensions.

    Keeps factors of the selected principal submatrix and, for the
    information forms, of the query/private-conditioned counterpart; a
    candidate's gain is one or two extension pivots, O(|A|^2) each.
    """

    def __init__(self, spec, kernel):
        super().__init__(spec, kernel)
        self.vv = kernel.block("vv")
        var = spec.variant
        # the difference-of-log-dets forms are not submodular in general,
        # so stale lazy bounds cannot be trusted for them
        self.supports_lazy = var in ("BASE", "CG")
        empty = np.zeros((0, 0))
        if var == "BASE":
            self.factor_main = linalg.cholesky(empty)
            self.factor_cond = None
            self.w_main = None
        elif var == "MI":
            qf = _q_factor(kernel)
            # conditioning rows: columns are items of V, q solves per item
            self.w_cond = linalg.solve_lower(qf, (spec.eta * kernel.block("vq")).T)
            self.factor_main = linalg.cholesky(empty)
            self.factor_cond = linalg.cholesky(empty)
        elif var == "CG":
            pf = _p_factor(kernel)
            self.w_cond = linalg.solve_lower(pf, (spec.nu * kernel.block("vp")).T)
            self.factor_main = None
            self.factor_cond = linalg.cholesky(empty)
        else:  # CMI: factors over [P, A...] ordering
            qf = _q_factor(kernel)
            self.w_cond = linalg.solve_lower(qf, (spec.eta * kernel.block("vq")).T)
            self.w_p = linalg.solve_lower(qf, kernel.block("qp"))
            pp = kernel.block("pp")
            self.factor_main = linalg.cholesky(pp)
            self.factor_cond = linalg.cholesky(pp - self.w_p.T @ self.w_p)
            self.vp = kernel.block("vp")
        self._var = var

    def _rows(self, candidate):
        """(main_row, cond_row, diag pair) for appending ``candidate``."""
        spec = self.spec
        sel = np.asarray(self.selected, dtype=np.intp)
        diag = float(self.vv[candidate, candidate])
        if self._var == "BASE":
            return self.vv[sel, candidate], None, diag, None
        if self._var in ("MI", "CG"):
            corr_row = self.w_cond[:, sel].T @ self.w_cond[:, candidate] if len(sel) else np.zeros(0)
            cond_row = self.vv[sel, candidate] - corr_row
            cond_diag = diag - float(self.w_cond[:, candidate] @ self.w_cond[:, candidate])
            if self._var == "CG":
                return None, cond_row, None, cond_diag
            return self.vv[sel, candidate], cond_row, diag, cond_diag
        # CMI: rows against [P..., A...]
        p_part = spec.nu * self.vp[candidate]
        a_part = self.vv[sel, candidate]
        main_row = np.concatenate([p_part, a_part])
        u_c = self.w_cond[:, candidate]
        corr_p = self.w_p.T @ u_c
        corr_a = self.w_cond[:, sel].T @ u_c if len(sel) else np.zeros(0)
        cond_row = main_row - np.concatenate([corr_p, corr_a])
        cond_diag = diag - float(u_c @ u_c)
        return main_row, cond_row, diag, cond_diag

    def gain(self, candidate):
        main_row, cond_row, diag, cond_diag = self._rows(candidate)
        g = 0.0
        if self.factor_main is not None:
            _, piv = linalg.extension_pivot(self.factor_main, main_row, diag)
            if piv <= 0:
                piv = 1e-300
            g += math.log(piv)
        if self.factor_cond is not None:
            _, piv = linalg.extension_pivot(self.factor_cond, cond_row, cond_diag)
            if piv <= 0:
                piv = 1e-300
            sign = -1.0 if self._var in ("MI", "CMI") else 1.0
            g += sign * math.log(piv)
        return g

    def _apply(self, candidate):
        main_row, cond_row, diag, cond_diag = self._rows(candidate)
        if self.factor_main is not None:
            self.factor_main = linalg.extend_factor(self.factor_main, main_row, diag)
        if self.factor_cond is not None:
            self.factor_cond = linalg.extend_factor(self.factor_cond, cond_row, cond_diag)


def make_state(spec: MeasureSpec, kernel: KernelSystem) -> MeasureState:
    for blk in required_blocks(spec):
        kernel.block(blk)  # fail fast with MissingBlock
    if spec.family == "FL":
        return _FLVState(spec, kernel)
    if spec.family == "FLQ":
        return _FLQState(spec, kernel)
    if spec.family == "GC":
        return _GCState(spec, kernel)
    if spec.family == "COM":
        return _COMState(spec, kernel)
    if spec.family == "DISPARITY_SUM":
        return _DisparityState(spec, kernel)
    return _LogDetState(spec, kernel)


def marginal_gain(state: MeasureState, candidate: int) -> float:
    candidate = int(candidate)
    if candidate in state.selected:
        raise AlreadySelected(f"index {candidate} already selected")
    return state.gain(candidate)


def commit(state: MeasureState, candidate: int) -> MeasureState:
    return state.commit(candidate)
