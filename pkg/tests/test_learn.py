import json

import numpy as np
import pytest

from prismsel.errors import InvalidConfig
from prismsel.kernels import compute_kernel, save_kernel
from prismsel.learn import (
    MixtureModel,
    TrainingExample,
    gradients,
    hinge_loss,
    load_training_manifest,
    loss_augmented_inference,
    measure_param_grads,
    recall_loss_vector,
    train,
    trainable_params,
)
from prismsel.measures import MeasureSpec, evaluate
from prismsel.optimize import naive_greedy

from conftest import kernel_for, random_kernel


def two_component_model(w=(1.0, 1.0)):
    return MixtureModel(
        components=[
            MeasureSpec.from_name("flvmi"),
            MeasureSpec.from_name("gcmi", lam=0.5),
        ],
        weights=np.asarray(w, dtype=np.float64),
    )


class TestMixture:
    def test_value_is_linear(self, rng):
        k = random_kernel(rng, n=10, q=3)
        a = [0, 4, 7]
        m = two_component_model(w=(2.0, 0.0))
        assert m.value(k, a) == pytest.approx(
            2.0 * evaluate(MeasureSpec.from_name("flvmi"), k, a)
        )

    def test_validation(self):
        with pytest.raises(InvalidConfig):
            MixtureModel(components=[], weights=np.array([]))
        with pytest.raises(InvalidConfig):
            MixtureModel(components=[MeasureSpec.from_name("fl")], weights=np.array([-1.0]))
        with pytest.raises(InvalidConfig):
            MixtureModel(components=[MeasureSpec.from_name("fl")], weights=np.array([1.0, 2.0]))

    def test_json_round_trip(self):
        m = two_component_model(w=(0.3, 1.7))
        back = MixtureModel.from_json(m.to_json())
        assert [c.name for c in back.components] == [c.name for c in m.components]
        assert np.allclose(back.weights, m.weights)


class TestLoss:
    def test_recall_vector_zero_on_summary(self, rng):
        k = random_kernel(rng, n=8, q=2)
        ex = TrainingExample(kernel=k, summary=[1, 4], budget=3)
        loss = recall_loss_vector(ex)
        assert loss[1] == 0.0 and loss[4] == 0.0
        assert loss[0] == pytest.approx(0.5)

    def test_groups_extend_zero_region(self, rng):
        k = random_kernel(rng, n=6, q=2)
        groups = np.array([0, 0, 1, 1, 2, 2])
        ex = TrainingExample(kernel=k, summary=[0], budget=2, item_groups=groups)
        loss = recall_loss_vector(ex)
        assert loss[1] == 0.0  # same group as the summary item
        assert loss[2] == pytest.approx(1.0)

    def test_hinge_nonnegative_at_argmax(self, rng):
        # inference maximizes F + l, so the hinge at y_hat is >= 0 when
        # |y_hat| >= |summary|
        for _ in range(5):
            k = random_kernel(rng, n=10, q=3)
            ex = TrainingExample(kernel=k, summary=[2, 5], budget=4)
            m = two_component_model()
            loss = recall_loss_vector(ex)
            y_hat = loss_augmented_inference(m, ex, loss)
            assert hinge_loss(m, ex, y_hat, loss) >= -1e-9

    def test_zero_loss_inference_matches_greedy(self, rng):
        k = random_kernel(rng, n=12, q=3)
        ex = TrainingExample(kernel=k, summary=[0], budget=5)
        m = MixtureModel(
            components=[MeasureSpec.from_name("flvmi")], weights=np.array([1.0])
        )
        y_hat = loss_augmented_inference(m, ex)
        ref = naive_greedy(
            MeasureSpec.from_name("flvmi"),
            k,
            5,
        )
        assert y_hat[: len(ref.order)] == ref.order

    def test_large_loss_dominates(self, rng):
        k = random_kernel(rng, n=6, q=2)
        ex = TrainingExample(kernel=k, summary=[3], budget=2)
        m = MixtureModel(
            components=[MeasureSpec.from_name("flvmi")], weights=np.array([1e-6])
        )
        loss = np.array([0.0, 100.0, 0.0, 0.0, 50.0, 0.0])
        y_hat = loss_augmented_inference(m, ex, loss)
        assert set(y_hat) == {1, 4}

    def test_summary_validation(self, rng):
        k = random_kernel(rng, n=5, q=2)
        with pytest.raises(InvalidConfig):
            TrainingExample(kernel=k, summary=[], budget=2)
        with pytest.raises(InvalidConfig):
            TrainingExample(kernel=k, summary=[0, 1, 2], budget=2)


class TestGradients:
    def finite_diff(self, spec, kernel, a, param, h=1e-6):
        from dataclasses import replace

        lo = replace(spec, **{param: getattr(spec, param) - h})
        hi = replace(spec, **{param: getattr(spec, param) + h})
        return (evaluate(hi, kernel, a) - evaluate(lo, kernel, a)) / (2 * h)

    @pytest.mark.parametrize(
        "name,params",
        [
            ("flvmi", ("eta",)),
            ("flcg", ("nu",)),
            ("flcmi", ("eta", "nu")),
            ("flqmi", ("eta",)),
            ("gc", ("lam",)),
            ("gcmi", ("lam",)),
            ("gccg", ("lam", "nu")),
            ("com", ("eta",)),
            ("logdetmi", ("eta",)),
            ("logdetcg", ("nu",)),
        ],
    )
    def test_matches_finite_difference(self, name, params, rng):
        spec = MeasureSpec.from_name(name, lam=0.3, eta=0.7, nu=0.6)
        assert trainable_params(spec) == params
        for _ in range(3):
            k = kernel_for(name, rng, n=8, q=3, p=2)
            a = sorted(rng.choice(8, size=4, replace=False).tolist())
            grads = measure_param_grads(spec, k, a)
            for p in params:
                fd = self.finite_diff(spec, k, a, p)
                assert grads[p] == pytest.approx(fd, rel=1e-4, abs=1e-6), (name, p)

    def test_flqmi_eta_grad_pinned(self):
        from prismsel.kernels import kernel_from_blocks

        k = kernel_from_blocks(
            {"vq": np.array([[0.9, 0.1], [0.2, 0.6]]), "qq": np.eye(2)}
        )
        g = measure_param_grads(MeasureSpec.from_name("flqmi", eta=2.0), k, [0, 1])
        assert g["eta"] == pytest.approx(0.9 + 0.6)

    def test_gc_lam_grad_identity_kernel(self):
        from prismsel.kernels import kernel_from_blocks

        k = kernel_from_blocks({"vv": np.eye(5)})
        g = measure_param_grads(MeasureSpec.from_name("gc", lam=0.2), k, [0, 2, 4])
        assert g["lam"] == pytest.approx(-3.0)

    def test_logdetcmi_has_no_trainable_params(self):
        assert trainable_params(MeasureSpec.from_name("logdetcmi")) == ()

    def test_weight_gradient(self, rng):
        k = random_kernel(rng, n=8, q=2)
        ex = TrainingExample(kernel=k, summary=[1, 3], budget=3)
        m = two_component_model()
        y_hat = loss_augmented_inference(m, ex, recall_loss_vector(ex))
        gr = gradients(m, ex, y_hat)
        for i, c in enumerate(m.components):
            ref = evaluate(c, k, y_hat) - evaluate(c, k, ex.summary)
            assert gr["dw"][i] == pytest.approx(ref)


class TestTrain:
    def make_examples(self, rng, count=3):
        out = []
        for _ in range(count):
            k = random_kernel(rng, n=15, q=3)
            ideal = naive_greedy(MeasureSpec.from_name("flvmi"), k, 4)
            out.append(TrainingExample(kernel=k, summary=ideal.order, budget=4))
        return out

    def test_loss_decreases(self, rng):
        m = two_component_model(w=(0.1, 2.0))
        rep = train(m, self.make_examples(rng), epochs=15, lr=0.05, seed=0)
        assert rep.losses[-1] <= rep.losses[0] + 1e-9
        assert len(rep.losses) == 16

    def test_projection_keeps_params_nonnegative(self, rng):
        m = two_component_model(w=(0.01, 3.0))
        rep = train(m, self.make_examples(rng, 2), epochs=10, lr=0.5, seed=1)
        assert rep.model.weights.min() >= 0.0
        for c in rep.model.components:
            assert min(c.lam, c.eta, c.nu) >= 0.0
        for traj in rep.trajectories.values():
            assert min(traj) >= 0.0

    def test_trajectory_keys(self, rng):
        m = two_component_model()
        rep = train(m, self.make_examples(rng, 1), epochs=2, lr=0.01)
        assert set(rep.trajectories) == {"w0", "w1", "p0.eta", "p1.lam"}
        assert all(len(v) == 2 for v in rep.trajectories.values())

    def test_losses_reported_clamped(self, rng):
        m = two_component_model()
        rep = train(m, self.make_examples(rng, 2), epochs=5, lr=0.02)
        assert min(rep.losses) >= 0.0

    def test_report_json(self, rng):
        m = two_component_model()
        rep = train(m, self.make_examples(rng, 1), epochs=2, lr=0.01)
        obj = rep.to_json()
        assert json.dumps(obj)  # serializable
        assert obj["epochs"] == 2


def test_load_training_manifest(rng, tmp_path):
    f = rng.normal(size=(9, 3))
    q = rng.normal(size=(2, 3))
    k = compute_kernel(f, q, metric="euclidean_rbf", sigma=1.0)
    save_kernel(tmp_path / "kern", k)
    (tmp_path / "summary.json").write_text("[0, 2]")
    manifest = [
        {"kernel": "kern", "summary": "summary.json", "budget": 3},
        {"kernel": "kern", "summary": [1, 5], "budget": 4},
    ]
    (tmp_path / "train.json").write_text(json.dumps(manifest))
    examples = load_training_manifest(tmp_path / "train.json")
    assert len(examples) == 2
    assert examples[0].summary == [0, 2]
    assert examples[1].budget == 4
    assert examples[1].kernel.n_v == 9

    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(InvalidConfig):
        load_training_manifest(tmp_path / "bad.json")
