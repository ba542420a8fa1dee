import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from triadred.model import (CoefficientSet, ModelParams, StructureError,
                            SystemState, XyyTriad, YyyTriad,
                            builtin_paper_model, fast_drift, fast_energy,
                            full_drift, project_to_conservative,
                            projected_builtin_model, validate_conservation)

coeff = hst.floats(min_value=-10.0, max_value=10.0, allow_nan=False,
                   width=64)


def conservative_xyy(j=1, k=2):
    return hst.tuples(coeff, coeff).map(
        lambda ab: XyyTriad(j, k, ab[0], ab[1], -(ab[0] + ab[1])))


def conservative_yyy(i=1, j=2, k=3):
    return hst.tuples(coeff, coeff).map(
        lambda ab: YyyTriad(i, j, k, ab[0], ab[1], -(ab[0] + ab[1])))


class TestBuiltinTables:
    def test_counts(self):
        cs = builtin_paper_model()
        assert len(cs.xyy) == 10
        assert len(cs.yyy) == 19

    def test_constants(self):
        cs = builtin_paper_model()
        assert cs.gamma == 1.0
        assert cs.sigma == 2.236
        assert cs.n == 10

    def test_first_xyy_row(self):
        cs = builtin_paper_model()
        t = next(t for t in cs.xyy if (t.j, t.k) == (1, 2))
        assert (t.a_xyy, t.a_j, t.a_k) == (1.2, -0.55, -0.65)

    def test_first_yyy_row(self):
        cs = builtin_paper_model()
        t = next(t for t in cs.yyy if (t.i, t.j, t.k) == (1, 2, 3))
        assert (t.b_ijk, t.b_jki, t.b_kij) == (2.0, 2.5, -4.5)

    def test_validates_at_rounding_tolerance(self):
        cs = builtin_paper_model()
        assert validate_conservation(cs.xyy, cs.yyy, cs.n, 5e-4).passed

    def test_printed_rows_sum_to_zero_in_decimal(self):
        # The printed tables are decimal-exact: float residuals are at the
        # rounding-noise scale, far below the 4-decimal tolerance.
        cs = builtin_paper_model()
        report = validate_conservation(cs.xyy, cs.yyy, cs.n, 1e-12)
        assert report.max_abs_residual < 1e-14
        assert report.passed

    def test_projected_is_machine_exact(self):
        cs = projected_builtin_model()
        assert validate_conservation(cs.xyy, cs.yyy, cs.n, 1e-12).passed


class TestValidation:
    def test_single_row_pass(self):
        t = XyyTriad(1, 2, 1.2, -0.55, -0.65)
        report = validate_conservation([t], [], 10, 1e-12)
        assert report.passed
        assert report.max_abs_residual < 1e-15

    def test_rounded_row_passes_loose_tolerance(self):
        t = YyyTriad(1, 2, 4, 4.2426, 2.8284, -7.071)
        assert validate_conservation([], [t], 10, 5e-4).passed

    def test_violating_row_fails(self):
        t = YyyTriad(1, 2, 4, 4.2426, 2.8284, -7.075)
        report = validate_conservation([], [t], 10, 1e-3)
        assert not report.passed
        assert report.max_abs_residual == pytest.approx(4e-3, rel=1e-6)

    def test_index_out_of_range_names_triad(self):
        t = XyyTriad(1, 11, 1.0, -0.5, -0.5)
        with pytest.raises(StructureError, match=r"xyy\(1,11\)"):
            validate_conservation([t], [], 10, 1e-3)

    def test_repeated_index_rejected(self):
        with pytest.raises(StructureError):
            validate_conservation([XyyTriad(2, 2, 1.0, -0.5, -0.5)], [],
                                  10, 1.0)
        with pytest.raises(StructureError):
            validate_conservation([], [YyyTriad(1, 2, 2, 1.0, 1.0, -2.0)],
                                  10, 1.0)

    def test_negative_tol_rejected(self):
        with pytest.raises(ValueError):
            validate_conservation([], [], 10, -1.0)


class TestProjection:
    def test_exact_row_unchanged(self):
        t = XyyTriad(1, 2, 1.2, -0.55, -0.65)
        proj = project_to_conservative([t], [])
        assert proj.max_change < 1e-15

    def test_rounded_row_repaired_within_print_precision(self):
        t = YyyTriad(1, 2, 4, 4.2426, 2.8284, -7.071)
        proj = project_to_conservative([], [t])
        assert proj.max_change <= 2e-4
        assert abs(proj.yyy[0].residual()) < 1e-15

    def test_empty_lists(self):
        proj = project_to_conservative([], [])
        assert proj.xyy == () and proj.yyy == ()
        assert proj.max_change == 0.0

    @given(a=coeff, b=coeff, c=coeff)
    def test_projection_zeroes_residual_and_is_idempotent(self, a, b, c):
        t = YyyTriad(1, 2, 3, a, b, c)
        once = project_to_conservative([], [t])
        scale = max(1.0, abs(a), abs(b), abs(c))
        assert abs(once.yyy[0].residual()) < 1e-13 * scale
        twice = project_to_conservative([], once.yyy)
        assert twice.max_change < 1e-13 * scale


class TestDrift:
    def test_zero_state(self):
        cs = builtin_paper_model()
        state = SystemState(x=0.0, y=np.zeros(10))
        dx, dy = full_drift(state, cs.params(1.0), cs.xyy, cs.yyy)
        assert dx == 0.0
        assert np.all(dy == 0.0)

    def test_single_triad_hand_value(self):
        xyy = [XyyTriad(1, 2, 1.2, -0.55, -0.65)]
        params = ModelParams(gamma=1.0, sigma=2.236, epsilon=1.0, n=2)
        state = SystemState(x=1.0, y=np.array([1.0, 1.0]))
        dx, dy = full_drift(state, params, xyy, [])
        assert dx == pytest.approx(0.2)
        assert dy[0] == pytest.approx(-0.55)
        assert dy[1] == pytest.approx(-0.65)

    def test_epsilon_scaling(self):
        xyy = [XyyTriad(1, 2, 1.2, -0.55, -0.65)]
        params = ModelParams(gamma=1.0, sigma=2.236, epsilon=0.5, n=2)
        state = SystemState(x=1.0, y=np.array([1.0, 1.0]))
        dx, dy = full_drift(state, params, xyy, [])
        assert dx == pytest.approx(1.2 / 0.5 - 1.0)
        assert dy[0] == pytest.approx(-0.55 / 0.5)

    @given(x=coeff, data=hst.data())
    @settings(max_examples=50)
    def test_interactions_conserve_total_energy(self, x, data):
        xyy = [data.draw(conservative_xyy(1, 2)),
               data.draw(conservative_xyy(3, 4))]
        yyy = [data.draw(conservative_yyy(1, 2, 3)),
               data.draw(conservative_yyy(2, 3, 4))]
        params = ModelParams(gamma=1.0, sigma=1.0, epsilon=0.7, n=4)
        y = np.asarray(data.draw(
            hst.lists(coeff, min_size=4, max_size=4)))
        state = SystemState(x=x, y=y)
        dx, dy = full_drift(state, params, xyy, yyy)
        # interaction part of the drift: strip the -gamma*x damping
        total = 2 * x * (dx + params.gamma * x) + 2 * np.dot(y, dy)
        scale = max(1.0, abs(x), float(np.abs(y).max())) ** 3 * 20
        assert abs(total) < 1e-12 * scale

    @given(data=hst.data())
    @settings(max_examples=50)
    def test_bath_terms_conserve_bath_energy(self, data):
        yyy = [data.draw(conservative_yyy(1, 2, 3)),
               data.draw(conservative_yyy(2, 3, 4)),
               data.draw(conservative_yyy(1, 3, 4))]
        y = np.asarray(data.draw(
            hst.lists(coeff, min_size=4, max_size=4)))
        dy = fast_drift(y, yyy)
        scale = max(1.0, float(np.abs(y).max())) ** 3 * 30
        assert abs(2 * np.dot(y, dy)) < 1e-12 * scale

    def test_energy_rate_matches_coupling_sum(self):
        # dE/dt from the y equations equals -2 x/eps * sum a_xyy y_j y_k
        # when the constraints hold exactly.
        cs = projected_builtin_model()
        params = cs.params(0.5)
        rng = np.random.default_rng(3)
        state = SystemState(x=0.7, y=rng.standard_normal(10))
        _, dy = full_drift(state, params, cs.xyy, cs.yyy)
        lhs = 2 * np.dot(state.y, dy)
        rhs = -2 * state.x / params.epsilon * sum(
            t.a_xyy * state.y[t.j - 1] * state.y[t.k - 1] for t in cs.xyy)
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestFastEnergy:
    def test_zero(self):
        assert fast_energy(np.zeros(10)) == 0.0

    def test_ones(self):
        assert fast_energy(np.ones(10)) == pytest.approx(10.0)

    def test_three_four(self):
        assert fast_energy(np.array([3.0, 4.0])) == pytest.approx(25.0)


class TestSerialization:
    def test_round_trip(self):
        cs = builtin_paper_model()
        again = CoefficientSet.from_json(cs.to_json())
        assert again == cs

    def test_document_shape(self):
        doc = json.loads(builtin_paper_model().to_json())
        assert set(doc) == {"gamma", "sigma", "n", "xyy", "yyy"}
        assert set(doc["xyy"][0]) == {"j", "k", "a_xyy", "a_j", "a_k"}
        assert set(doc["yyy"][0]) == {"i", "j", "k", "b_ijk", "b_jki",
                                      "b_kij"}

    def test_malformed_document(self):
        with pytest.raises(StructureError):
            CoefficientSet.from_json('{"gamma": 1, "sigma": 1, "n": 4, '
                                     '"xyy": [{"j": 1}], "yyy": []}')

    def test_save_load(self, tmp_path):
        cs = projected_builtin_model()
        path = tmp_path / "coeffs.json"
        cs.save(path)
        assert CoefficientSet.load(path) == cs


class TestParams:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ModelParams(gamma=0.0, sigma=1.0, epsilon=1.0, n=10)
        with pytest.raises(ValueError):
            ModelParams(gamma=1.0, sigma=1.0, epsilon=1.0, n=1)

    def test_state_energy(self):
        s = SystemState(x=1.0, y=np.array([1.0, 2.0]))
        assert s.energy() == pytest.approx(5.0)
