import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ermrer import (InfeasibleError, InvalidArgumentError, ReferenceMeasure, analyze,
                    concentration_profile, counting_measure, cumulants, expected_sublevel_set,
                    is_separable, level_set, probability_measure, quadrature_lebesgue,
                    solve_delta_epsilon)

HALF = probability_measure([0.5, 0.5])
L01 = [0.0, 1.0]


@st.composite
def instances(draw, max_atoms=6):
    m = draw(st.integers(2, max_atoms))
    w = draw(st.lists(st.floats(0.01, 3.0), min_size=m, max_size=m))
    L = draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m))
    return ReferenceMeasure(w), np.asarray(L)


def lstar_prob(lam):
    return 1.0 / (1.0 + math.exp(-1.0 / lam))


class TestLevelSet:
    def test_examples(self):
        assert level_set(L01, 0.5).tolist() == [0]
        assert level_set(L01, math.inf).tolist() == [0, 1]
        assert level_set([0.3, 0.4], 0.1).tolist() == []


class TestAnalyze:
    def test_coherent(self):
        rep = analyze(HALF, L01)
        assert (rep.rho_star, rep.delta_star) == (0.0, 0.0)
        assert rep.lstar_atoms.tolist() == [0]
        assert rep.coherent and rep.consistent

    def test_not_coherent(self):
        rep = analyze(ReferenceMeasure([0.0, 1.0]), L01)
        assert (rep.rho_star, rep.delta_star) == (0.0, 1.0)
        assert rep.lstar_atoms.tolist() == [1]
        assert rep.consistent and not rep.coherent

    def test_constant_risk(self):
        rep = analyze(ReferenceMeasure([0.3, 0.0, 2.0]), [0.4, 0.4, 0.4])
        assert rep.delta_star == rep.rho_star == 0.4
        assert rep.lstar_atoms.tolist() == [0, 2]

    def test_tie_tolerance(self):
        rep = analyze(counting_measure(3), [0.1, 0.1 + 1e-13, 0.2])
        assert rep.lstar_atoms.tolist() == [0, 1]

    def test_quadrature_caveat(self):
        rep = analyze(quadrature_lebesgue([0.0, 1.0], 0.5), L01)
        assert rep.coherence_caveat
        assert not analyze(HALF, L01).coherence_caveat

    def test_serialization(self):
        doc = analyze(HALF, L01).to_dict()
        assert doc["lstar_atoms"] == [0] and doc["coherent"] is True

    @given(instances(), st.integers(0, 5))
    def test_invariants(self, inst, zero):
        Q, L = inst
        w = Q.weights.copy()
        if zero < w.size - 1:
            w[zero] = 0.0
        rep = analyze(ReferenceMeasure(w), L)
        assert rep.delta_star >= rep.rho_star
        assert rep.consistent
        assert rep.coherent == (rep.delta_star - rep.rho_star <= 1e-12)
        if rep.coherent:
            assert set(rep.lstar_atoms.tolist()) <= set(rep.erm_solutions.tolist())
        # on finite atoms the minimizers match L* exactly when Q is coherent
        full_level = set(np.flatnonzero(L <= rep.delta_star + 1e-12).tolist())
        assert set(rep.erm_solutions.tolist()) <= full_level


class TestExpectedSublevelSet:
    def test_example(self):
        assert expected_sublevel_set(HALF, L01, 1.0).tolist() == [0]

    def test_constant_risk_gives_all(self):
        assert expected_sublevel_set(HALF, [0.2, 0.2], 3.0).tolist() == [0, 1]

    @given(instances(), st.floats(0.01, 100))
    def test_contains_lstar(self, inst, lam):
        Q, L = inst
        lstar = set(analyze(Q, L).lstar_atoms.tolist())
        assert lstar <= set(expected_sublevel_set(Q, L, lam).tolist())


class TestConcentrationProfile:
    GRID = (2.0, 1.0, 0.5, 0.1, 0.001)

    def test_example(self):
        prof = concentration_profile(HALF, L01, self.GRID)
        col = [r.p_lstar for r in prof.rows]
        assert all(b > a for a, b in zip(col, col[1:]))
        assert col[-1] >= 1 - 1e-12
        for r in prof.rows:
            assert r.p_lstar == pytest.approx(lstar_prob(r.lam), abs=1e-15)
        assert prof.ok
        assert all(g > 0 for g in prof.gaps)

    def test_constant_risk(self):
        prof = concentration_profile(HALF, [0.3, 0.3], self.GRID)
        assert all(r.p_lstar == pytest.approx(1.0, abs=1e-15) for r in prof.rows)
        assert prof.ok

    def test_csv(self):
        text = concentration_profile(HALF, L01, (1.0, 0.5)).to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "lambda,k1,k2,k3,n_size,p_n,p_lstar"
        assert len(lines) == 3

    def test_grid_validation(self):
        with pytest.raises(InvalidArgumentError):
            concentration_profile(HALF, L01, (0.5, 1.0))
        with pytest.raises(InvalidArgumentError):
            concentration_profile(HALF, L01, (1.0, -1.0))

    @given(instances())
    def test_nested_and_dominated(self, inst):
        Q, L = inst
        L = np.round(L, 1)
        prof = concentration_profile(Q, L, np.logspace(1, -1, 12))
        assert prof.ok
        if is_separable(L, Q):
            assert all(g > 0 for g in prof.gaps)
            col = [r.p_lstar for r in prof.rows]
            assert all(b >= a for a, b in zip(col, col[1:]))

    def test_limits_at_small_factor(self):
        Q = probability_measure([0.3, 0.3, 0.4])
        L = [0.5, 0.9, 0.6]
        prof = concentration_profile(Q, L, np.logspace(0, -3, 10))
        last = prof.rows[-1]
        assert last.p_lstar >= 1 - 1e-6
        assert abs(last.k1 - 0.5) <= 1e-6


class TestExpectedRisk:
    @given(instances(), st.floats(0.05, 100))
    def test_bounded_below_by_delta_star(self, inst, lam):
        # risks on a 0.1 grid keep the strict gap above rounding
        Q, L = inst
        L = np.round(L, 1)
        d = analyze(Q, L).delta_star
        k1 = cumulants(Q, L, lam).k1
        assert k1 >= d - 1e-15
        if is_separable(L, Q):
            assert k1 > d


class TestDeltaEpsilon:
    def test_example(self):
        res = solve_delta_epsilon(HALF, L01, 0.5, 0.1)
        assert res.lam < 1.0 / math.log(9.0)
        assert res.probability == pytest.approx(lstar_prob(res.lam), abs=1e-15)
        assert res.probability > 0.9
        assert res.k1 <= 0.5

    def test_below_delta_star(self):
        Q = probability_measure([0.5, 0.5])
        with pytest.raises(InfeasibleError):
            solve_delta_epsilon(Q, [0.2, 1.0], 0.1, 0.1)

    def test_noncoherent_band_refused(self):
        with pytest.raises(InfeasibleError):
            solve_delta_epsilon(ReferenceMeasure([0.0, 1.0, 1.0]), [0.0, 0.5, 1.0], 0.3, 0.1)

    def test_epsilon_near_one(self):
        # the starting factor already has k1 <= delta and is accepted as is
        res = solve_delta_epsilon(HALF, L01, 0.5, 1 - 1e-12)
        assert res.lam == 1.0 and res.k1 <= 0.5
        res = solve_delta_epsilon(HALF, L01, 0.1, 1 - 1e-12, lam0=10.0)
        assert res.k1 <= 0.1
        assert cumulants(HALF, L01, 1.01 * res.lam).k1 > 0.1

    def test_epsilon_validation(self):
        with pytest.raises(InvalidArgumentError):
            solve_delta_epsilon(HALF, L01, 0.5, 0.0)

    @given(instances(), st.floats(0.01, 0.5), st.floats(0.001, 0.9))
    def test_certificate(self, inst, gap, eps):
        Q, L = inst
        d = analyze(Q, L).delta_star + gap
        res = solve_delta_epsilon(Q, L, d, eps)
        assert res.probability > 1 - eps
        assert res.k1 <= d
