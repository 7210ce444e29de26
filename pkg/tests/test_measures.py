import numpy as np
import pytest

from prismsel.errors import AlreadySelected, InstanceTooLarge, InvalidConfig
from prismsel.kernels import kernel_from_blocks
from prismsel.measures import (
    MeasureSpec,
    definitional_oracle,
    evaluate,
    make_state,
    marginal_gain,
    preset,
    required_blocks,
)

from conftest import ALL_MEASURES, kernel_for, random_kernel


def tiny_kernel():
    """Two ground items, one query: hand-checkable values."""
    return kernel_from_blocks(
        {
            "vv": np.array([[1.0, 0.8], [0.8, 1.0]]),
            "vq": np.array([[0.9], [0.4]]),
            "qq": np.array([[1.0]]),
        }
    )


class TestSpec:
    def test_json_round_trip(self):
        s = MeasureSpec.from_name("flcmi", lam=0.3, eta=0.7, nu=1.2, psi="log1p")
        assert MeasureSpec.from_json(s.to_json()) == s

    def test_unknown_family(self):
        with pytest.raises(InvalidConfig):
            MeasureSpec(family="NOPE", variant="MI")

    def test_invalid_variant_combinations(self):
        for family, variant in [
            ("GC", "CMI"),
            ("COM", "CG"),
            ("DISPARITY_SUM", "MI"),
            ("FLQ", "BASE"),
        ]:
            with pytest.raises(InvalidConfig):
                MeasureSpec(family=family, variant=variant)

    def test_negative_param(self):
        with pytest.raises(InvalidConfig):
            MeasureSpec.from_name("gcmi", lam=-0.1)

    def test_name_round_trip(self):
        for name in ALL_MEASURES:
            assert MeasureSpec.from_name(name).name == name


class TestPinnedValues:
    def test_gcmi_single(self):
        assert evaluate(MeasureSpec.from_name("gcmi"), tiny_kernel(), [0]) == pytest.approx(1.8)

    def test_flqmi_single(self):
        assert evaluate(MeasureSpec.from_name("flqmi"), tiny_kernel(), [0]) == pytest.approx(1.8)

    def test_flvmi_single(self):
        # min(1.0, 0.9) + min(0.8, 0.4)
        assert evaluate(MeasureSpec.from_name("flvmi"), tiny_kernel(), [0]) == pytest.approx(1.3)

    def test_logdetmi_1x1(self):
        k = kernel_from_blocks(
            {"vv": np.array([[1.0]]), "vq": np.array([[0.8]]), "qq": np.array([[1.0]])}
        )
        val = evaluate(MeasureSpec.from_name("logdetmi"), k, [0])
        assert val == pytest.approx(-np.log(1 - 0.64), abs=1e-9)

    def test_fl_base(self):
        assert evaluate(MeasureSpec.from_name("fl"), tiny_kernel(), [0]) == pytest.approx(1.8)

    def test_disparity_sum_pair(self):
        assert evaluate(
            MeasureSpec.from_name("disparity_sum"), tiny_kernel(), [0, 1]
        ) == pytest.approx(0.2)

    def test_empty_set_is_zero(self, rng):
        for name in ALL_MEASURES:
            k = kernel_for(name, rng)
            assert evaluate(MeasureSpec.from_name(name), k, []) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_range_rejected(self, rng):
        k = random_kernel(rng, n=5)
        with pytest.raises(InvalidConfig):
            evaluate(MeasureSpec.from_name("fl"), k, [7])


class TestOracle:
    def test_equivalence_all_measures(self, rng):
        for name in ALL_MEASURES:
            spec = MeasureSpec.from_name(name, lam=0.4)
            tol = 1e-6 if name.startswith("logdet") else 1e-8
            for _ in range(5):
                k = kernel_for(name, rng, n=9, q=3, p=2)
                a = rng.choice(9, size=4, replace=False)
                assert evaluate(spec, k, a) == pytest.approx(
                    definitional_oracle(spec, k, a), abs=tol
                ), name

    def test_cap_enforced(self, rng):
        k = random_kernel(rng, n=70, q=3, p=2)
        with pytest.raises(InstanceTooLarge):
            definitional_oracle(MeasureSpec.from_name("flvmi"), k, [0, 1])

    def test_gc_cmi_degeneracy(self, rng):
        # the four-term CMI of the graph-cut base never sees P
        for _ in range(10):
            k = random_kernel(rng, n=8, q=3, p=3)
            spec = MeasureSpec.from_name("gcmi", lam=rng.uniform(0.1, 1.0))
            a = rng.choice(8, size=3, replace=False)
            base = definitional_oracle(spec, k, a)

            def cmi(q_idx, p_idx):
                from prismsel.measures import _oracle_base

                b = _oracle_base(spec, k, q_idx, p_idx)
                n, nq = 8, len(q_idx)
                sa = set(int(x) for x in a)
                sq = set(range(n, n + nq))
                sp = set(range(n + nq, n + nq + len(p_idx)))
                return b(sa | sp) + b(sq | sp) - b(sa | sq | sp) - b(sp)

            full = cmi(np.arange(3), np.arange(3))
            assert full == pytest.approx(base, abs=1e-9)


class TestMIProperties:
    @pytest.mark.parametrize("name", ["flvmi", "flqmi", "gcmi", "com", "logdetmi"])
    def test_nonnegative_and_monotone(self, name, rng):
        spec = MeasureSpec.from_name(name)
        for _ in range(20):
            k = kernel_for(name, rng, n=8, q=3, p=2)
            size = rng.integers(0, 5)
            a = list(rng.choice(8, size=size, replace=False))
            rest = [j for j in range(8) if j not in a]
            j = int(rng.choice(rest))
            v_a = evaluate(spec, k, a)
            v_aj = evaluate(spec, k, a + [j])
            assert v_a >= -1e-9
            assert v_aj >= v_a - 1e-9


class TestStates:
    @pytest.mark.parametrize("name", ALL_MEASURES)
    def test_gain_matches_evaluate_difference(self, name, rng):
        tol = 1e-6 if name.startswith("logdet") else 1e-9
        spec = MeasureSpec.from_name(name, lam=0.3)
        k = kernel_for(name, rng, n=12)
        state = make_state(spec, k)
        sel = []
        for _ in range(6):
            c = int(rng.choice([i for i in range(12) if i not in sel]))
            g = state.gain(c)
            ref = evaluate(spec, k, sel + [c]) - evaluate(spec, k, sel)
            assert g == pytest.approx(ref, abs=tol)
            state.commit(c)
            sel.append(c)
            assert state.objective == pytest.approx(evaluate(spec, k, sel), abs=tol)

    def test_gains_many_matches_gain(self, rng):
        for name in ["flvmi", "flqmi", "gcmi", "com", "logdetmi"]:
            spec = MeasureSpec.from_name(name)
            k = kernel_for(name, rng, n=10)
            state = make_state(spec, k)
            state.commit(3)
            cands = np.array([0, 1, 5, 9])
            many = state.gains_many(cands)
            each = [state.gain(int(c)) for c in cands]
            assert np.allclose(many, each, atol=1e-12)

    def test_already_selected(self, rng):
        k = random_kernel(rng)
        state = make_state(MeasureSpec.from_name("fl"), k)
        state.commit(2)
        with pytest.raises(AlreadySelected):
            state.commit(2)
        with pytest.raises(AlreadySelected):
            marginal_gain(state, 2)

    def test_gain_report(self, rng):
        k = random_kernel(rng)
        state = make_state(MeasureSpec.from_name("fl"), k)
        rep = state.gain_report(4)
        assert rep.item == 4
        assert rep.objective_after == pytest.approx(rep.gain + state.objective)


class TestPresets:
    def test_targeted_craig(self):
        s = preset("targeted_craig")
        assert (s.family, s.variant, s.eta) == ("FLQ", "MI", 0.0)

    def test_glister_com(self):
        s = preset("glister_com")
        assert (s.family, s.variant, s.eta) == ("COM", "MI", 0.0)

    def test_grad_match_like(self, rng):
        # with lambda = 1/2 the objective is the plain cross-similarity sum
        s = preset("grad_match_like")
        k = random_kernel(rng, n=6, q=3)
        a = [1, 4]
        assert evaluate(s, k, a) == pytest.approx(k.block("vq")[a, :].sum())

    def test_unknown(self):
        with pytest.raises(InvalidConfig):
            preset("nope")


def test_required_blocks():
    assert required_blocks(MeasureSpec.from_name("flqmi")) == ("vq",)
    assert required_blocks(MeasureSpec.from_name("gcmi")) == ("vq",)
    assert set(required_blocks(MeasureSpec.from_name("flcmi"))) == {"vv", "vq", "vp"}
    assert set(required_blocks(MeasureSpec.from_name("logdetcmi"))) == {
        "vv",
        "vq",
        "qq",
        "vp",
        "pp",
        "qp",
    }


def test_eta_monotone_mi(rng):
    # the MI measures grow with the query-relevance weight
    k = random_kernel(rng, n=8, q=3)
    a = [0, 3, 5]
    for name in ["flvmi", "flqmi", "com"]:
        vals = [
            evaluate(MeasureSpec.from_name(name, eta=e), k, a) for e in (0.0, 0.5, 1.0, 2.0)
        ]
        assert all(b >= a_ - 1e-12 for a_, b in zip(vals, vals[1:])), name
