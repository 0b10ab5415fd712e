import numpy as np
import pytest
from pydantic import ValidationError

from ness_dmrg.core.dmrg import (
    SweepSchedule,
    dmrg_sweep,
    local_eigensolve,
    local_null_solve,
    refine_sweep,
    relative_change,
    warm_up,
)
from ness_dmrg.core.exact import oracle_for
from ness_dmrg.core.liouvillian import (
    ModelParams,
    build_liouvillian,
    build_superoperators,
    build_target,
    equilibrium_state,
)
from ness_dmrg.core.mps import MatrixProductState, mpo_dagger, mpo_product, rayleigh_quotient
from ness_dmrg.core.ness_solver import liouvillian_residual, measure_observables
from ness_dmrg.core.superspace import make_ivec

from conftest import BOTH_ORDERINGS, maximal_drive, random_mpo, random_mps, scheme


def random_psd(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return a.conj().T @ a


class TestSweepSchedule:
    def test_defaults(self):
        schedule = SweepSchedule()
        assert schedule.warmup_bond == 2
        assert schedule.warmup_threshold == 1e-3
        assert schedule.bond_increment == 2
        assert schedule.ramp_threshold == 0.1
        assert schedule.energy_floor == 1e-10
        assert schedule.initial_state == "ivec"
        assert schedule.local_max_restarts == 5
        assert schedule.refine_sweeps == 6
        assert schedule.residual_tolerance == 1e-6

    def test_warmup_bond_cannot_exceed_max(self):
        with pytest.raises(ValidationError, match="exceeds max_bond"):
            SweepSchedule(warmup_bond=8, max_bond=4)

    def test_ramp_threshold_range(self):
        with pytest.raises(ValidationError):
            SweepSchedule(ramp_threshold=1.0)

    def test_initial_state_choice(self):
        with pytest.raises(ValidationError):
            SweepSchedule(initial_state="zeros")


def test_relative_change_uses_floor():
    assert relative_change(2.0, 1.0, 1e-10) == 0.5
    assert relative_change(0.0, 1e-12, 1e-10) == pytest.approx(1e-2)


class TestLocalEigensolve:
    def test_identity_map(self, rng):
        guess = rng.standard_normal(5) + 0j
        value, vector = local_eigensolve(lambda v: v, guess, iters=4)
        assert value == pytest.approx(1.0)
        np.testing.assert_allclose(vector, guess / np.linalg.norm(guess))

    def test_diagonal_map(self):
        d = np.diag([0.0, 1.0, 2.0, 3.0])
        value, vector = local_eigensolve(lambda v: d @ v, np.ones(4), iters=4)
        assert value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(vector), [1.0, 0.0, 0.0, 0.0], atol=1e-10)

    def test_full_krylov_space_is_exact(self, rng):
        a = random_psd(rng, 16)
        value, vector = local_eigensolve(lambda v: a @ v, rng.standard_normal(16), iters=16)
        lowest = np.linalg.eigvalsh(a)[0]
        assert value == pytest.approx(lowest, rel=1e-8, abs=1e-10)
        np.testing.assert_allclose(np.linalg.norm(a @ vector - value * vector), 0.0, atol=1e-6)

    def test_never_above_guess_quotient(self, rng):
        a = random_psd(rng, 30)
        guess = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        quotient = np.vdot(guess, a @ guess).real / np.vdot(guess, guess).real
        value, _ = local_eigensolve(lambda v: a @ v, guess, iters=3)
        assert value <= quotient + 1e-10

    def test_keeps_shape(self, rng):
        a = random_psd(rng, 16)
        guess = rng.standard_normal((2, 2, 2, 2))
        _, vector = local_eigensolve(lambda v: (a @ v.reshape(-1)).reshape(v.shape), guess)
        assert vector.shape == (2, 2, 2, 2)

    def test_rejects_bad_guess(self):
        with pytest.raises(ValueError, match="zero guess"):
            local_eigensolve(lambda v: v, np.zeros(3))
        with pytest.raises(ValueError, match="non-finite"):
            local_eigensolve(lambda v: v, np.array([1.0, np.nan]))

    def test_rejects_non_finite_output(self):
        with pytest.raises(ValueError, match="non-finite"):
            local_eigensolve(lambda v: v * np.inf, np.ones(3))

    def test_restarts_reach_the_lowest_eigenvalue(self):
        d = np.diag(np.arange(50.0))
        single, _ = local_eigensolve(lambda v: d @ v, np.ones(50), iters=6)
        value, vector = local_eigensolve(lambda v: d @ v, np.ones(50), iters=6, tol=1e-12, max_restarts=100)
        assert single > 1e-3
        assert value == pytest.approx(0.0, abs=1e-10)
        assert abs(vector[0]) == pytest.approx(1.0, abs=1e-6)

    def test_restarts_stop_at_tolerance(self):
        d = np.diag(np.arange(50.0))
        calls = []

        def apply(v):
            calls.append(1)
            return d @ v

        local_eigensolve(apply, np.ones(50), iters=6, tol=1e9, max_restarts=5)
        assert len(calls) == 6
        calls.clear()
        local_eigensolve(apply, np.ones(50), iters=6, tol=0.0, max_restarts=5)
        assert len(calls) == 30

    def test_restarted_value_never_above_guess_quotient(self, rng):
        a = random_psd(rng, 40)
        guess = rng.standard_normal(40) + 1j * rng.standard_normal(40)
        quotient = np.vdot(guess, a @ guess).real / np.vdot(guess, guess).real
        value, _ = local_eigensolve(lambda v: a @ v, guess, iters=4, tol=1e-10, max_restarts=5)
        assert value <= quotient + 1e-10


class TestLocalNullSolve:
    def test_recovers_null_vector(self, rng):
        u = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        b = rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30))
        a = b @ (np.eye(30) - np.outer(u, u.conj()) / np.vdot(u, u))
        border = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        residual, x = local_null_solve(lambda v: a @ v, border, rng.standard_normal(30))
        assert np.linalg.norm(x) == pytest.approx(1.0)
        assert abs(np.vdot(x, u)) / np.linalg.norm(u) == pytest.approx(1.0, abs=1e-8)
        assert residual <= 1e-8

    def test_keeps_shape(self, rng):
        a = np.diag(np.arange(16.0))
        _, x = local_null_solve(
            lambda v: (a @ v.reshape(-1)).reshape(v.shape), np.ones((2, 2, 2, 2)), np.ones((2, 2, 2, 2))
        )
        assert x.shape == (2, 2, 2, 2)
        assert abs(x.reshape(-1)[0]) == pytest.approx(1.0, abs=1e-8)

    def test_rejects_zero_border(self):
        with pytest.raises(ValueError, match="Border vector"):
            local_null_solve(lambda v: v, np.zeros(3), np.ones(3))


class TestDmrgSweep:
    def test_full_bond_finds_lowest_eigenvalue(self, rng):
        op = random_mpo(rng, 4, 2)
        target = mpo_product(mpo_dagger(op), op)
        psi = random_mps(rng, 4, 4)
        schedule = SweepSchedule(local_solver_iters=20, max_bond=4, warmup_bond=2, svd_cutoff=0.0)
        energy, result = dmrg_sweep(psi, target, schedule)
        lowest = np.linalg.eigvalsh(target.to_dense())[0]
        assert rayleigh_quotient(target, result) == pytest.approx(lowest, rel=1e-8, abs=1e-10)
        assert energy == pytest.approx(lowest, rel=1e-8, abs=1e-10)

    def test_state_is_normalized_and_canonical(self, rng):
        op = random_mpo(rng, 5, 2)
        target = mpo_product(mpo_dagger(op), op)
        _, result = dmrg_sweep(random_mps(rng, 5, 2), target, SweepSchedule(max_bond=3, warmup_bond=2))
        assert result.ortho_center == 1
        assert result.is_canonical(1)
        assert result.max_bond <= 3
        assert result.norm() == pytest.approx(1.0)

    def test_energy_does_not_increase(self, rng):
        op = random_mpo(rng, 6, 2)
        target = mpo_product(mpo_dagger(op), op)
        schedule = SweepSchedule(max_bond=4, warmup_bond=2)
        psi = random_mps(rng, 6, 2)
        energies = []
        for _ in range(3):
            _, psi = dmrg_sweep(psi, target, schedule)
            energies.append(rayleigh_quotient(target, psi))
        assert energies[2] <= energies[0] * (1 + 1e-6) + 1e-12

    def test_needs_two_sites(self, rng):
        op = random_mpo(rng, 1, 1)
        with pytest.raises(ValueError, match="two sites"):
            dmrg_sweep(random_mps(rng, 1, 1), op, SweepSchedule())

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError, match="differs"):
            dmrg_sweep(random_mps(rng, 3, 2), random_mpo(rng, 4, 2), SweepSchedule())


    @pytest.mark.slow
    def test_four_site_drive_reaches_floor_at_full_bond(self):
        s = scheme("RLN", 4)
        target = build_target(build_liouvillian(maximal_drive(4, Delta=1.0), s))
        schedule = SweepSchedule(max_bond=16, local_solver_iters=16, local_max_restarts=20)
        psi = make_ivec(s)
        energies = []
        for _ in range(10):
            _, psi = dmrg_sweep(psi, target, schedule)
            energies.append(rayleigh_quotient(target, psi))
        assert psi.max_bond <= 16
        assert min(energies) <= 1e-10


class TestRefineSweep:
    @pytest.mark.parametrize("kind", BOTH_ORDERINGS)
    def test_reaches_steady_state_at_full_bond(self, kind):
        params = maximal_drive(3, Delta=0.5)
        s = scheme(kind, 3)
        operators = build_superoperators(params, s)
        ivec = make_ivec(s)
        psi = ivec
        for _ in range(8):
            _, psi = refine_sweep(psi, operators.liouvillian, ivec, SweepSchedule(max_bond=8))
        assert psi.norm() == pytest.approx(1.0)
        assert liouvillian_residual(operators.liouvillian, ivec, psi) <= 1e-9
        measured = measure_observables(operators, ivec, psi)
        oracle = oracle_for(params)
        np.testing.assert_allclose(measured.currents, oracle["current_profile"], atol=1e-9)
        np.testing.assert_allclose(measured.magnetization, oracle["magnetization_profile"], atol=1e-9)

    def test_keeps_an_exact_steady_state(self):
        params = ModelParams.homogeneous(3, f1=0.3, fN=0.3)
        s = scheme("RLN", 3)
        rho = equilibrium_state(params, s)
        liouvillian = build_liouvillian(params, s)
        _, psi = refine_sweep(rho, liouvillian, make_ivec(s), SweepSchedule(max_bond=4))
        assert psi.max_bond <= 4
        assert liouvillian_residual(liouvillian, make_ivec(s), psi) <= 1e-12

    def test_length_mismatch(self):
        s = scheme("RLN", 2)
        liouvillian = build_liouvillian(maximal_drive(2), s)
        with pytest.raises(ValueError, match="Ivec length"):
            refine_sweep(make_ivec(s), liouvillian, make_ivec(scheme("RLN", 3)), SweepSchedule())


class TestWarmUp:
    def test_exact_state_stops_immediately(self):
        params = ModelParams.homogeneous(3, f1=0.4, fN=0.4)
        s = scheme("RLN", 3)
        target = build_target(build_liouvillian(params, s))
        calls = []
        psi, sweeps = warm_up(
            equilibrium_state(params, s),
            target,
            SweepSchedule(),
            on_sweep=lambda sweep, energy, state, elapsed: calls.append((sweep, energy)),
        )
        assert sweeps == 1
        assert len(calls) == 1
        assert calls[0][1] <= 1e-10
        assert psi.max_bond <= 2

    def test_bond_is_capped_at_warmup_bond(self, rng):
        op = random_mpo(rng, 6, 2)
        target = mpo_product(mpo_dagger(op), op)
        schedule = SweepSchedule(warmup_bond=2, warmup_max_sweeps=3)
        psi, sweeps = warm_up(random_mps(rng, 6, 4), target, schedule)
        assert 1 <= sweeps <= 3
        assert psi.max_bond <= 2

    def test_start_state_is_not_modified(self, rng):
        op = random_mpo(rng, 4, 2)
        target = mpo_product(mpo_dagger(op), op)
        start = random_mps(rng, 4, 2)
        before = start.to_dense().copy()
        warm_up(start, target, SweepSchedule(warmup_max_sweeps=1))
        np.testing.assert_array_equal(start.to_dense(), before)
        assert isinstance(start, MatrixProductState)
