"""Max-margin learning of measure mixtures.

A mixture F(A) = sum_i w_i f_i(A) is fit to example summaries with a
generalized hinge loss: greedy loss-augmented inference proposes the
most-violating set, and closed-form (sub)gradients update the weights
and the internal measure parameters (lambda, eta, nu) under Nesterov
momentum with projection onto the nonnegative orthant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import linalg
from .errors import DivergedLoss, InvalidConfig
from .kernels import KernelSystem, load_kernel
from .measures import MeasureSpec, evaluate, make_state


@dataclass
class MixtureModel:
    components: list
    weights: np.ndarray
    reg: float = 0.0

    def __post_init__(self):
        if not self.components:
            raise InvalidConfig("mixture needs at least one component")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.components),):
            raise InvalidConfig("one weight per component required")
        if self.weights.min() < 0 or self.reg < 0:
            raise InvalidConfig("weights and regularization must be nonnegative")

    def value(self, kernel: KernelSystem, a) -> float:
        return float(
            sum(w * evaluate(c, kernel, a) for w, c in zip(self.weights, self.components))
        )

    def to_json(self) -> dict:
        return {
            "components": [c.to_json() for c in self.components],
            "weights": self.weights.tolist(),
            "reg": self.reg,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MixtureModel":
        return cls(
            components=[MeasureSpec.from_json(c) for c in obj["components"]],
            weights=np.asarray(obj["weights"], dtype=np.float64),
            reg=obj.get("reg", 0.0),
        )


@dataclass
class TrainingExample:
    kernel: KernelSystem
    summary: list
    budget: int
    ground: list | None = None
    # optional per-item group labels for the recall loss; identity groups
    # (each item its own group) when absent
    item_groups: np.ndarray | None = None

    def __post_init__(self):
        self.summary = sorted(set(int(i) for i in self.summary))
        if not self.summary:
            raise InvalidConfig("example summary must be nonempty")
        if len(self.summary) > self.budget:
            raise InvalidConfig("summary larger than budget")
        if self.ground is None:
            self.ground = list(range(self.kernel.n_v))
        if not set(self.summary) <= set(self.ground):
            raise InvalidConfig("summary must lie inside the ground set")


@dataclass
class TrainReport:
    losses: list
    trajectories: dict
    model: MixtureModel
    epochs: int
    lr: float
    momentum: float
    seed: int

    def to_json(self) -> dict:
        return {
            "losses": [float(x) for x in self.losses],
            "trajectories": {k: [float(x) for x in v] for k, v in self.trajectories.items()},
            "model": self.model.to_json(),
            "epochs": self.epochs,
            "lr": self.lr,
            "momentum": self.momentum,
            "seed": self.seed,
        }


def recall_loss_vector(ex: TrainingExample) -> np.ndarray:
    """Modular surrogate loss: each item outside the summary's groups
    costs 1/|summary|; summary-group items cost 0, so l(summary)=0."""
    n = ex.kernel.n_v
    if ex.item_groups is None:
        groups = np.arange(n)
    else:
        groups = np.asarray(ex.item_groups)
        if groups.shape != (n,):
            raise InvalidConfig("item_groups must label every ground item")
    good = set(groups[ex.summary].tolist())
    cost = np.array([0.0 if groups[i] in good else 1.0 for i in range(n)])
    return cost / len(ex.summary)


def loss_augmented_inference(m: MixtureModel, ex: TrainingExample, loss: np.ndarray | None = None):
    """Greedy maximization of F + modular loss over the example's ground
    set; returns the selected order."""
    if loss is None:
        loss = np.zeros(ex.kernel.n_v)
    loss = np.asarray(loss, dtype=np.float64)
    states = [make_state(c, ex.kernel) for c in m.components]
    remaining = list(ex.ground)
    order = []
    for _ in range(min(ex.budget, len(remaining))):
        cands = np.asarray(remaining, dtype=np.intp)
        g = loss[cands].copy()
        for w, st in zip(m.weights, states):
            if w != 0.0:
                g += w * st.gains_many(cands)
        best = int(np.argmax(g))
        chosen = remaining.pop(best)
        for st in states:
            st.commit(chosen)
        order.append(chosen)
    return order


def hinge_loss(m: MixtureModel, ex: TrainingExample, y_hat, loss: np.ndarray | None = None) -> float:
    """Raw hinge value F(y_hat) + l(y_hat) - F(summary); clamp only when
    reporting, the raw value feeds the gradients."""
    if loss is None:
        loss = recall_loss_vector(ex)
    l_hat = float(np.sum(loss[np.asarray(y_hat, dtype=np.intp)])) if len(y_hat) else 0.0
    return m.value(ex.kernel, y_hat) + l_hat - m.value(ex.kernel, ex.summary)


# ---------------------------------------------------------------------------
# closed-form parameter gradients


def trainable_params(spec: MeasureSpec) -> tuple:
    """Internal parameters of a spec that have closed-form gradients."""
    fam, var = spec.family, spec.variant
    if fam == "FL":
        return {"BASE": (), "MI": ("eta",), "CG": ("nu",), "CMI": ("eta", "nu")}[var]
    if fam == "FLQ":
        return ("eta",)
    if fam == "GC":
        return {"BASE": ("lam",), "MI": ("lam",), "CG": ("lam", "nu")}[var]
    if fam == "COM":
        return ("eta",)
    if fam == "LOGDET":
        # no closed-form gradient is implemented for the CMI form
        return {"BASE": (), "MI": ("eta",), "CG": ("nu",), "CMI": ()}[var]
    return ()


def measure_param_grads(spec: MeasureSpec, kernel: KernelSystem, a) -> dict:
    """d f(a) / d theta for each trainable parameter of the spec.

    Indicator terms (max/min switches) are evaluated at the current
    parameters; away from those kinks the values are exact derivatives.
    """
    a = np.asarray(sorted(set(int(i) for i in a)), dtype=np.intp)
    fam, var = spec.family, spec.variant
    out = {}
    if len(a) == 0:
        return {p: 0.0 for p in trainable_params(spec)}

    if fam == "FL":
        vv = kernel.block("vv")
        max_a = vv[:, a].max(axis=1)
        if var in ("MI", "CMI"):
            maxq = kernel.block("vq").max(axis=1)
        if var in ("CG", "CMI"):
            maxp = kernel.block("vp").max(axis=1)
        if var == "MI":
            active = spec.eta * maxq <= max_a
            out["eta"] = float(np.sum(maxq[active]))
        elif var == "CG":
            active = max_a - spec.nu * maxp > 0
            out["nu"] = float(np.sum(-maxp[active]))
        elif var == "CMI":
            inner = np.minimum(max_a, spec.eta * maxq)
            pos = inner - spec.nu * maxp > 0
            out["eta"] = float(np.sum(maxq[pos & (spec.eta * maxq <= max_a)]))
            out["nu"] = float(np.sum(-maxp[pos]))
        return out

    if fam == "FLQ":
        vq = kernel.block("vq")
        out["eta"] = float(vq[a, :].max(axis=1).sum())
        return out

    if fam == "GC":
        if var == "MI":
            out["lam"] = float(2.0 * kernel.block("vq")[a, :].sum())
            return out
        vv = kernel.block("vv")
        out["lam"] = float(-vv[np.ix_(a, a)].sum())
        if var == "CG":
            cross = float(kernel.block("vp")[a, :].sum())
            out["lam"] -= 2.0 * spec.nu * cross
            out["nu"] = float(-2.0 * spec.lam * cross)
        return out

    if fam == "COM":
        from .measures import _psi

        psi = _psi(spec.psi)
        out["eta"] = float(psi(kernel.block("vq")[a, :].sum(axis=1)).sum())
        return out

    if fam == "LOGDET":
        vv = kernel.block("vv")
        s_a = vv[np.ix_(a, a)]
        if var == "MI":
            qf = linalg.cholesky(kernel.block("qq"))
            half = linalg.solve_lower(qf, kernel.block("vq")[a, :].T)
            c = half.T @ half  # S_AQ S_Q^{-1} S_QA
            cond = s_a - spec.eta**2 * c
            out["eta"] = float(2.0 * spec.eta * np.trace(np.linalg.solve(cond, c)))
        elif var == "CG":
            pf = linalg.cholesky(kernel.block("pp"))
            half = linalg.solve_lower(pf, kernel.block("vp")[a, :].T)
            c = half.T @ half
            cond = s_a - spec.nu**2 * c
            out["nu"] = float(-2.0 * spec.nu * np.trace(np.linalg.solve(cond, c)))
        return out

    return out


def gradients(m: MixtureModel, ex: TrainingExample, y_hat, loss: np.ndarray | None = None) -> dict:
    """Hinge-loss gradients: d L / d w_i = f_i(y_hat) - f_i(summary);
    internal parameters chain through the component weight."""
    dw = np.array(
        [
            evaluate(c, ex.kernel, y_hat) - evaluate(c, ex.kernel, ex.summary)
            for c in m.components
        ]
    )
    dtheta = []
    for w, c in zip(m.weights, m.components):
        g_hat = measure_param_grads(c, ex.kernel, y_hat)
        g_ref = measure_param_grads(c, ex.kernel, ex.summary)
        dtheta.append({p: w * (g_hat[p] - g_ref[p]) for p in g_hat})
    return {"dw": dw, "dtheta": dtheta}


_DIVERGENCE_FACTOR = 1e3


def train(
    m: MixtureModel,
    examples,
    epochs: int = 20,
    lr: float = 0.01,
    momentum: float = 0.9,
    seed: int = 0,
) -> TrainReport:
    """Nesterov-accelerated subgradient descent on the mean hinge loss
    plus (reg/2)||theta||^2, projecting every parameter to >= 0."""
    if not examples:
        raise InvalidConfig("need at least one training example")
    model = MixtureModel(
        components=list(m.components), weights=m.weights.copy(), reg=m.reg
    )
    # flat parameter vector: weights first, then per-component internals
    names = [("w", i, None) for i in range(len(model.components))]
    for i, c in enumerate(model.components):
        names += [("p", i, p) for p in trainable_params(c)]

    def get_theta(mod):
        vals = list(mod.weights)
        for kind, i, p in names[len(mod.weights):]:
            vals.append(getattr(mod.components[i], p))
        return np.asarray(vals, dtype=np.float64)

    def set_theta(mod, theta):
        nw = len(mod.components)
        comps = list(mod.components)
        for (kind, i, p), v in zip(names[nw:], theta[nw:]):
            comps[i] = replace(comps[i], **{p: float(max(v, 0.0))})
        return MixtureModel(
            components=comps, weights=np.maximum(theta[:nw], 0.0), reg=mod.reg
        )

    def mean_grad_and_loss(mod):
        g = np.zeros(len(names))
        total = 0.0
        for ex in examples:
            loss_vec = recall_loss_vector(ex)
            y_hat = loss_augmented_inference(mod, ex, loss_vec)
            raw = hinge_loss(mod, ex, y_hat, loss_vec)
            total += max(raw, 0.0)
            gr = gradients(mod, ex, y_hat, loss_vec)
            g[: len(mod.weights)] += gr["dw"]
            pos = len(mod.weights)
            for i, c in enumerate(mod.components):
                for p in trainable_params(c):
                    g[pos] += gr["dtheta"][i][p]
                    pos += 1
        g /= len(examples)
        theta = get_theta(mod)
        g += mod.reg * theta
        return g, total / len(examples)

    theta = get_theta(model)
    velocity = np.zeros_like(theta)
    losses = []
    trajectories = {f"{k}{i}" if p is None else f"{k}{i}.{p}": [] for k, i, p in names}
    initial = None
    for epoch in range(epochs):
        # record loss at the current parameters
        _, cur_loss = mean_grad_and_loss(model)
        losses.append(cur_loss)
        if initial is None:
            initial = cur_loss
        elif initial > 0 and cur_loss > _DIVERGENCE_FACTOR * initial:
            raise DivergedLoss(f"epoch {epoch} loss {cur_loss:.3g} diverged from {initial:.3g}")
        for (k, i, p), v in zip(names, theta):
            key = f"{k}{i}" if p is None else f"{k}{i}.{p}"
            trajectories[key].append(float(v))
        # Nesterov: gradient at the projected lookahead point
        lookahead = set_theta(model, np.maximum(theta + momentum * velocity, 0.0))
        g, _ = mean_grad_and_loss(lookahead)
        velocity = momentum * velocity - lr * g
        theta = np.maximum(theta + velocity, 0.0)
        model = set_theta(model, theta)
    _, final_loss = mean_grad_and_loss(model)
    losses.append(final_loss)
    return TrainReport(
        losses=losses,
        trajectories=trajectories,
        model=model,
        epochs=epochs,
        lr=lr,
        momentum=momentum,
        seed=seed,
    )


def load_training_manifest(path) -> list:
    """JSON manifest: list of {kernel: dir, summary: file or list, budget}."""
    path = Path(path)
    entries = json.loads(path.read_text())
    if not isinstance(entries, list):
        raise InvalidConfig("training manifest must be a JSON list")
    examples = []
    for e in entries:
        kernel = load_kernel(path.parent / e["kernel"])
        summary = e["summary"]
        if isinstance(summary, str):
            summary = json.loads((path.parent / summary).read_text())
        examples.append(TrainingExample(kernel=kernel, summary=summary, budget=int(e["budget"])))
    return examples
