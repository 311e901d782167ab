import numpy as np
import pytest

import helpers
import oracles
from choquard import ConvergenceError, DomainError, InsufficientDecayError, SolverConfig
from choquard.functionals import energy, mass, scale_minimize
from choquard.grid import make_grid
from choquard.solver import (
    START_SHAPES,
    GroundState,
    decay_fit,
    euler_lagrange_gradient,
    fixpoint_residual,
    initial_guess,
    multiplier,
    pohozaev_report,
    relative_residual,
    rescale_mass,
    resample,
    solve,
    solve_fixpoint,
    solve_flow,
)


class TestInvariants:
    @pytest.mark.parametrize("p", [2.0, 2.1, 2.2])
    def test_state(self, p):
        gs = helpers.state(p)
        q = gs.q.values
        assert np.sqrt(mass(gs.q)) == pytest.approx(1.0, rel=1e-8)
        assert np.all(q[:-1] > 0)
        assert np.all(np.diff(q) <= 0)
        assert gs.lam > 0
        assert gs.eq_residual <= SolverConfig().flow_tol
        assert gs.energy.total < 0

    def test_multiplier_formula(self):
        gs = helpers.state(2.1)
        K, D = gs.energy.kinetic, gs.energy.coulomb
        assert gs.lam == pytest.approx(2 * 2.1 * D - 2 * K, rel=1e-10)

    def test_zero_residual_example(self):
        g = make_grid(100, 10.0)
        u = g.profile(np.zeros(g.n))
        assert np.all(euler_lagrange_gradient(u, 2.0).values == 0)

    def test_energy_monotone_along_flow(self):
        seen = []
        gs = solve_flow(2.1, callback=lambda it, u, lam, rel, dE: seen.append(dE))
        assert len(seen) > 5
        # renormalization leaves roundoff of order 1e-16·|E| in each step
        assert max(seen) <= 1e-14 * abs(gs.energy.total)


class TestMethods:
    @pytest.mark.parametrize("p", [2.0, 2.1])
    def test_flow_vs_fixpoint(self, p):
        a = helpers.state(p)
        b = helpers.state(p, method="fixpoint")
        assert helpers.sup_rel(a.q, b.q) <= 1e-5
        assert b.lam == pytest.approx(a.lam, rel=1e-6)

    def test_fixpoint_residual(self):
        assert fixpoint_residual(helpers.state(2.0)) < 1e-6

    def test_plateau_start(self):
        a = helpers.state(2.0)
        b = helpers.state(2.0, initial="plateau")
        assert helpers.sup_rel(a.q, b.q) <= 1e-5

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            solve(2.0, method="newton")

    def test_unknown_shape(self):
        with pytest.raises(DomainError):
            solve(2.0, initial="square")

    @pytest.mark.parametrize("p", [1.9, 7 / 3, 2.5])
    def test_range(self, p):
        with pytest.raises(DomainError, match="p out of range"):
            solve_flow(p)

    def test_mass_positive(self):
        with pytest.raises(DomainError):
            solve_flow(2.0, N=0.0)

    def test_iteration_cap(self):
        with pytest.raises(ConvergenceError) as info:
            solve_flow(2.0, cfg=SolverConfig(n=2000, max_iter=3))
        assert info.value.iterations == 3
        with pytest.raises(ConvergenceError):
            solve_fixpoint(2.0, cfg=SolverConfig(n=2000, max_iter=3))

    def test_start_shapes_normalized(self):
        g = make_grid(2000, 40.0)
        for name in START_SHAPES:
            assert mass(initial_guess(g, 2.0, 1.3, name)) == pytest.approx(1.69, rel=1e-12)


class TestIdentities:
    @pytest.mark.parametrize("p", [2.0, 2.2])
    def test_pohozaev_coefficients(self, p):
        rep = pohozaev_report(helpers.state(p))
        kc, dc = oracles.pohozaev_coefficients(p)
        gs = helpers.state(p)
        assert rep.k_actual / gs.lam == pytest.approx(kc, rel=1e-5)
        assert rep.d_actual / gs.lam == pytest.approx(dc, rel=1e-5)
        assert all(np.isfinite(e) and e >= 0 for e in rep.rel_errors)

    def test_p2_fractions(self):
        gs = helpers.state(2.0)
        assert gs.energy.kinetic / gs.lam == pytest.approx(1 / 6, rel=1e-5)
        assert gs.energy.coulomb / gs.lam == pytest.approx(1 / 3, rel=1e-5)

    def test_pohozaev_at_other_mass(self):
        rep = pohozaev_report(helpers.state(2.1, 1.3))
        assert max(rep.rel_errors) < 1e-5 and rep.lambda_rel_error < 1e-5

    def test_mass_rescale_maps_solutions(self):
        p = 2.1
        a = helpers.state(p, 1.0)
        b = helpers.state(p, 1.3)
        mapped = rescale_mass(a.q, p, 1.0, 1.3, b.grid)
        assert helpers.sup_rel(mapped, b.q) < 1e-5

    def test_scaling_minimum_is_attained(self):
        gs = helpers.state(2.2)
        t, value = scale_minimize(gs.q, gs.p)
        assert t == pytest.approx(1.0, abs=1e-5)
        assert value == pytest.approx(gs.energy.total, rel=1e-5)


class TestDecay:
    def test_rate_near_sqrt_lambda(self):
        fit = decay_fit(helpers.state(2.0))
        assert fit.gamma > 0
        assert fit.gamma_ratio == pytest.approx(1.0, rel=0.05)
        assert 0 < fit.window[0] < fit.window[1] <= helpers.state(2.0).grid.r_max
        assert fit.r2 >= 0.999

    def test_envelopes(self):
        fit = decay_fit(helpers.state(2.1))
        assert fit.power_bound_ok and fit.c0_v_bound_ok

    def test_short_grid_rejected(self):
        gs = solve_flow(2.0, cfg=SolverConfig(n=1000, r_max=6.0))
        with pytest.raises(InsufficientDecayError):
            decay_fit(gs)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        gs = helpers.state(2.0)
        path = tmp_path / "gs.json"
        gs.save(path)
        back = GroundState.load(path)
        assert back.lam == gs.lam and back.p == gs.p
        np.testing.assert_array_equal(back.q.values, gs.q.values)
        assert back.to_json() == gs.to_json()

    def test_malformed(self):
        with pytest.raises(DomainError):
            GroundState.from_dict({"p": 2.0})

    def test_resample(self):
        gs = helpers.state(2.0)
        g = make_grid(3000, gs.grid.r_max)
        q = resample(gs, g)
        assert mass(q) == pytest.approx(1.0, rel=1e-5)
        e = energy(q, 2.0)
        assert e.total == pytest.approx(gs.energy.total, rel=1e-3)

    def test_residual_of_start_is_large(self):
        g = make_grid(2000, 40.0)
        u = initial_guess(g, 2.0, 1.0, "plateau")
        grad = euler_lagrange_gradient(u, 2.0)
        lam = multiplier(u, grad, 1.0)
        assert relative_residual(u, grad, lam) > 1e-2


def test_deterministic():
    a = solve_flow(2.05)
    b = solve_flow(2.05)
    assert a.to_json() == b.to_json()
