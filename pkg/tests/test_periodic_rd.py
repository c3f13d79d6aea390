import numpy as np
import pytest

from fdelab.errors import DomainError, UsageError
from fdelab.mild_solver import FdeProblem, SolverConfig, solution_map, solve
from fdelab.periodic_rd import (RdModel, boundedness_probe, build_delayed_logistic, distinct_orbits,
                                find_periodic, find_periodic_many, perturbed_starts, period_map, periodic_residual, verify_periodicity)
from fdelab.semigroups import MatrixSemigroup
from fdelab.state_space import HistorySegment, renorm_distance

from oracles import scalar_delay_logistic


def scalar_logistic(model, u0, k=64):
    phi = HistorySegment.constant(model.tau, k, u0, [0.0])

    def F(t, seg):
        return seg.values[-1] * (model.growth_rate(t) - model.b * seg.values[0])
    return FdeProblem(MatrixSemigroup([[0.0]]), F, model.tau, phi, period_omega=model.omega)


class TestModel:
    def test_validation(self):
        with pytest.raises(DomainError):
            RdModel(diffusivities=(-0.1,))
        with pytest.raises(DomainError):
            RdModel(tau=0.0)
        with pytest.raises(DomainError):
            build_delayed_logistic(RdModel(b=0.0))
        with pytest.raises(DomainError):
            build_delayed_logistic(RdModel(forcing=-0.1))
        build_delayed_logistic(RdModel(b=-1.0), validate=False)

    def test_equilibrium(self):
        assert RdModel(a0=2.0, b=4.0).equilibrium == 0.5

    def test_default_initial(self):
        p = build_delayed_logistic(RdModel(a0=2.0, b=1.0))
        assert np.all(p.initial.values == 1.0)


class TestReduction:
    def test_constant_data_matches_scalar_problem(self, cfg128):
        model = RdModel(forcing=0.2)
        p = build_delayed_logistic(model)
        pde = solve(p, cfg128, 3.0)
        ode = solve(scalar_logistic(model, 0.5), cfg128, 3.0)
        # constants are invariant under Neumann diffusion: every node follows the scalar solution
        np.testing.assert_allclose(pde.values, np.broadcast_to(ode.values, pde.values.shape), atol=1e-12)

    def test_scalar_against_rk(self):
        # the RK oracle is unforced
        oracle = scalar_delay_logistic(1.0, 1.0, 0.5, 3.0, 0.5)
        errs = []
        for k in (32, 64):
            traj = solve(scalar_logistic(RdModel(), 0.5, k), SolverConfig(h=0.5 / k), 3.0)
            t = traj.t_nodes[k:]
            errs.append(np.max(np.abs(traj.values[k:, 0, 0] - oracle(t))))
        assert errs[1] < 2e-5
        assert errs[0] / errs[1] > 3.5


class TestPeriodMap:
    def test_two_periods(self, logistic_forced, cfg128):
        phi = logistic_forced.initial
        twice = period_map(logistic_forced, cfg128, period_map(logistic_forced, cfg128, phi))
        direct = solution_map(logistic_forced, cfg128, 2.0, phi)
        np.testing.assert_allclose(twice.values, direct.values, atol=1e-12)

    def test_needs_period(self, scalar_problem):
        with pytest.raises(UsageError):
            period_map(scalar_problem, SolverConfig(h=1 / 64), scalar_problem.initial)


class TestOrbits:
    def test_forced_orbit(self, logistic_forced, cfg128):
        res = find_periodic(logistic_forced, cfg128, logistic_forced.initial, tol=1e-7)
        assert res.converged and res.residual <= 1e-7
        assert periodic_residual(logistic_forced, cfg128, res.phi) == pytest.approx(res.residual)
        check = verify_periodicity(logistic_forced, cfg128, res.phi, 1e-5)
        assert check.passed
        assert res.history[0] > res.history[-1]

    def test_unforced_constant_orbit(self, logistic_unforced, cfg128):
        res = find_periodic(logistic_unforced, cfg128, logistic_unforced.initial, tol=1e-10)
        assert res.converged
        assert np.max(np.abs(res.phi.values - 1.0)) <= 1e-8

    def test_perturbed_orbit_fails(self, logistic_forced, cfg128):
        res = find_periodic(logistic_forced, cfg128, logistic_forced.initial, tol=1e-7)
        bumped = res.phi.with_values(res.phi.values + 0.05)
        assert not verify_periodicity(logistic_forced, cfg128, bumped, 1e-5).passed

    def test_defect_shrinks_with_tighter_orbit(self, logistic_forced, cfg128):
        loose = find_periodic(logistic_forced, cfg128, logistic_forced.initial, tol=1e-3)
        tight = find_periodic(logistic_forced, cfg128, logistic_forced.initial, tol=1e-8)
        d_loose = verify_periodicity(logistic_forced, cfg128, loose.phi, 1e-5).defect
        d_tight = verify_periodicity(logistic_forced, cfg128, tight.phi, 1e-5).defect
        assert d_tight < 0.01 * d_loose

    def test_budget_exhaustion_is_reported(self, logistic_forced, cfg128):
        res = find_periodic(logistic_forced, cfg128, logistic_forced.initial, max_iters=1, tol=1e-12,
                            newton=False)
        assert not res.converged and res.iterations == 1

    def test_distinct_orbits(self, logistic_forced, cfg128):
        a = find_periodic(logistic_forced, cfg128, logistic_forced.initial, tol=1e-8)
        start = logistic_forced.initial.with_values(logistic_forced.initial.values + 0.3)
        b = find_periodic(logistic_forced, cfg128, start, tol=1e-8)
        assert renorm_distance(a.phi, b.phi, a.r) < 1e-6
        assert len(distinct_orbits([a, b], tol=1e-6)) == 1

    def test_concurrent_searches_match_sequential(self, logistic_forced, cfg128):
        starts = perturbed_starts(logistic_forced.initial, 3, np.random.default_rng(0))
        par = find_periodic_many(logistic_forced, cfg128, starts, workers=3, tol=1e-8)
        seq = find_periodic_many(logistic_forced, cfg128, starts, workers=1, tol=1e-8)
        for a, b in zip(par, seq):
            np.testing.assert_array_equal(a.phi.values, b.phi.values)
            assert a.residual == b.residual
        assert len(distinct_orbits(par, tol=1e-6)) == 1
        with pytest.raises(UsageError):
            find_periodic_many(logistic_forced, cfg128, [])

    def test_bad_tolerance(self, logistic_forced, cfg128):
        with pytest.raises(UsageError):
            find_periodic(logistic_forced, cfg128, logistic_forced.initial, tol=0.0)


class TestBoundedness:
    def test_confining_model_is_bounded(self, logistic_forced, cfg128):
        rep = boundedness_probe(logistic_forced, cfg128, [logistic_forced.initial], 4.0)
        assert not rep.hypothesis_violated
        assert rep.bound < 2.0

    def test_negative_b_is_flagged(self):
        p = build_delayed_logistic(RdModel(b=-1.0, forcing=0.2), validate=False)
        rep = boundedness_probe(p, SolverConfig(h=1 / 128), [p.initial], 10.0)
        assert rep.hypothesis_violated
        assert rep.detail

    def test_horizon_too_short(self, logistic_forced, cfg128):
        with pytest.raises(UsageError):
            boundedness_probe(logistic_forced, cfg128, [logistic_forced.initial], 0.5)
