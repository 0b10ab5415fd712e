"""
NESS Solver Module

This module provides the main functionality for finding non-equilibrium
steady states: it builds the superoperators, starts from vec(I), runs the
warm-up and the ramped main phase followed by Liouvillian refinement, and
measures the observables.
"""

import logging
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ness_dmrg.core.dmrg import SweepSchedule, dmrg_sweep, refine_sweep, relative_change, warm_up
from ness_dmrg.core.liouvillian import ModelParams, SuperOperatorSet, build_superoperators
from ness_dmrg.core.mps import (
    MatrixProductOperator,
    MatrixProductState,
    apply_mpo,
    canonicalize,
    inner,
    overlap3,
    rayleigh_quotient,
    truncate,
)
from ness_dmrg.core.run_result import RunResult, SweepRecord
from ness_dmrg.core.superspace import OrderingKind, OrderingScheme, make_ivec

logger = logging.getLogger("ness_dmrg.solver")

IMAG_WARNING = 1e-8
TRACE_FLOOR = 1e-12
UNIFORMITY_TOLERANCE = 1e-3
NONZERO_CURRENT = 1e-8
NEGATIVE_ENERGY_TOLERANCE = 1e-10
ENERGY_NOISE = 1e-14
RESOLVED_CURRENT_FACTOR = 10.0


class Measurement:
    """Observables of one state, normalized by <Ivec|rho>."""

    def __init__(self, currents: np.ndarray, magnetization: np.ndarray, max_imag: float, trace: complex):
        self.currents = currents
        self.magnetization = magnetization
        self.max_imag = max_imag
        self.trace = trace

    @property
    def mean_current(self) -> float:
        return float(np.mean(self.currents)) if self.currents.size else 0.0

    def current_nonuniformity(self) -> float:
        """max_i |J_i - mean| / |mean| (0 for a chain without bonds)."""
        if self.currents.size == 0:
            return 0.0
        mean = self.mean_current
        return float(np.max(np.abs(self.currents - mean)) / abs(mean))

    def current_resolved(self, error: float = 0.0) -> bool:
        """Whether the mean current stands clear of zero and of its error bar."""
        return abs(self.mean_current) > max(NONZERO_CURRENT, RESOLVED_CURRENT_FACTOR * error)

    def max_change(self, other: "Measurement") -> float:
        """Largest absolute difference of any observable (inf if either is undefined)."""
        ours = np.concatenate([self.currents, self.magnetization])
        theirs = np.concatenate([other.currents, other.magnetization])
        if not (np.all(np.isfinite(ours)) and np.all(np.isfinite(theirs))):
            return float("inf")
        return float(np.max(np.abs(ours - theirs))) if ours.size else 0.0


def _expectations(
    ivec: MatrixProductState, ops: Sequence[MatrixProductOperator], psi: MatrixProductState, trace: complex
) -> np.ndarray:
    return np.array([overlap3(ivec, op, psi) / trace for op in ops], dtype=complex)


def measure_observables(
    operators: SuperOperatorSet, ivec: MatrixProductState, psi: MatrixProductState
) -> Measurement:
    """
    Currents and magnetizations as <Ivec|O|rho> / <Ivec|rho>.

    Args:
        operators: Observable MPOs
        ivec: Exact vec(I) in the same ordering
        psi: State (any normalization)

    Returns:
        Real parts of the observables plus the largest imaginary part
    """
    trace = inner(ivec, psi)
    if abs(trace) < TRACE_FLOOR * max(psi.norm(), 1.0):
        logger.warning("Trace <Ivec|rho> = %.3e is vanishing; observables undefined", abs(trace))
        n_bonds, n_sites = len(operators.current_ops), len(operators.magnetization_ops)
        return Measurement(np.full(n_bonds, np.nan), np.full(n_sites, np.nan), float("nan"), trace)

    currents = _expectations(ivec, operators.current_ops, psi, trace)
    magnetization = _expectations(ivec, operators.magnetization_ops, psi, trace)
    values = np.concatenate([currents, magnetization])
    max_imag = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if max_imag > IMAG_WARNING:
        logger.warning("Observables carry imaginary parts up to %.3e", max_imag)
    return Measurement(currents.real.copy(), magnetization.real.copy(), max_imag, trace)


def liouvillian_residual(
    liouvillian: MatrixProductOperator, ivec: MatrixProductState, psi: MatrixProductState
) -> float:
    """
    ||L psi|| / |<Ivec|psi>|: the steady-state defect of the unit-trace state.

    L psi is contracted exactly; <psi|M|psi> is not used here.
    """
    trace = inner(ivec, psi)
    if abs(trace) < TRACE_FLOOR * max(psi.norm(), 1.0):
        return float("inf")
    image = apply_mpo(liouvillian, psi)
    return float(np.sqrt(abs(inner(image, image))) / abs(trace))


class NessSolver:
    """
    Main class for NESS-DMRG runs.

    This class owns the superoperators of one model and ordering and
    drives its sweeps.
    """

    def __init__(
        self,
        params: ModelParams,
        scheme: Optional[OrderingScheme] = None,
        schedule: Optional[SweepSchedule] = None,
        seed: Optional[int] = None,
    ):
        """
        Initialize the solver.

        Args:
            params: Model parameters
            scheme: Superspace ordering (RLN by default)
            schedule: Sweep schedule (defaults if omitted)
            seed: Seed for the random start state
        """
        self.params = params
        self.scheme = scheme or OrderingScheme(kind=OrderingKind.RLN, n_phys=params.n_sites)
        self.schedule = schedule or SweepSchedule()
        self.seed = seed
        self.operators = build_superoperators(params, self.scheme)
        self.ivec = make_ivec(self.scheme)
        self.records: List[SweepRecord] = []
        logger.info(
            "Built %s superoperators for N=%d: L bond %d, M bond %d",
            self.scheme.kind.value, params.n_sites,
            self.operators.liouvillian.max_bond, self.operators.target.max_bond,
        )

    def initial_state(self) -> MatrixProductState:
        """vec(I) truncated to the warm-up bond, or a seeded random MPS."""
        bond = self.schedule.warmup_bond
        if self.schedule.initial_state == "random":
            rng = np.random.default_rng(self.seed)
            psi = MatrixProductState.random(self.scheme.phys_dims, bond, rng)
        elif self.ivec.max_bond > bond:
            psi, _ = truncate(self.ivec, bond)
        else:
            psi = self.ivec
        return canonicalize(psi, 1).normalized()

    def measure(self, psi: MatrixProductState) -> Measurement:
        return measure_observables(self.operators, self.ivec, psi)

    def _record(
        self,
        phase: str,
        energy: float,
        psi: MatrixProductState,
        elapsed: float,
        measurement: Optional[Measurement] = None,
    ) -> None:
        mean_current, max_imag = None, None
        if measurement is None and self.schedule.measure_every_sweep:
            measurement = self.measure(psi)
        if measurement is not None:
            mean_current, max_imag = measurement.mean_current, measurement.max_imag
        if energy < -NEGATIVE_ENERGY_TOLERANCE:
            logger.warning("Energy %.3e is negative beyond round-off", energy)
        record = SweepRecord(
            sweep=len(self.records) + 1,
            phase=phase,
            max_bond=psi.max_bond,
            energy=energy,
            walltime_s=elapsed,
            mean_current=mean_current,
            max_imag=max_imag,
        )
        self.records.append(record)
        if phase != "warmup":
            logger.info(
                "%s sweep %d: bond %d energy %.6e mean current %s (%.2fs)",
                phase, record.sweep, record.max_bond, energy,
                "n/a" if mean_current is None else f"{mean_current:.6e}", elapsed,
            )

    def _main_phase(self, psi: MatrixProductState, energy: float) -> Tuple[MatrixProductState, bool, str]:
        schedule = self.schedule
        if energy <= schedule.energy_floor:
            return psi, True, f"energy {energy:.3e} at or below floor {schedule.energy_floor:.1e} after warm-up"

        bond = schedule.warmup_bond
        previous = energy
        for _ in range(schedule.max_sweeps):
            start = time.perf_counter()
            _, psi = dmrg_sweep(psi, self.operators.target, schedule, max_bond=bond)
            energy = rayleigh_quotient(self.operators.target, psi)
            self._record("main", energy, psi, time.perf_counter() - start)

            if energy <= schedule.energy_floor:
                return psi, True, f"energy {energy:.3e} at or below floor {schedule.energy_floor:.1e}"
            change = relative_change(previous, energy, schedule.energy_floor)
            if change < schedule.ramp_threshold:
                if bond < schedule.max_bond:
                    bond = min(bond + schedule.bond_increment, schedule.max_bond)
                    logger.info("Relative change %.3e: bond cap raised to %d", change, bond)
                elif change < schedule.stability_threshold:
                    if energy <= schedule.energy_tolerance:
                        return psi, True, f"stable at max bond {bond} with energy {energy:.3e}"
                    return psi, False, (
                        f"stalled at max bond {bond} with energy {energy:.3e} "
                        f"above tolerance {schedule.energy_tolerance:.1e}"
                    )
            previous = energy

        if energy <= schedule.energy_tolerance:
            return psi, True, f"max_sweeps {schedule.max_sweeps} reached with energy {energy:.3e} within tolerance"
        return psi, False, f"max_sweeps {schedule.max_sweeps} reached with energy {energy:.3e}"

    def _refine_phase(self, psi: MatrixProductState, energy: float) -> Tuple[MatrixProductState, float, float]:
        """
        Liouvillian refinement sweeps at the full bond cap.

        Returns:
            (state, energy, observable change over the last accepted sweep);
            a sweep that raises the energy is discarded and ends the phase
        """
        schedule = self.schedule
        before = self.measure(psi) if schedule.refine_sweeps else None
        change = 0.0
        for _ in range(schedule.refine_sweeps):
            start = time.perf_counter()
            try:
                _, candidate = refine_sweep(psi, self.operators.liouvillian, self.ivec, schedule)
            except ValueError as exc:
                logger.warning("Refinement stopped: %s", exc)
                break
            candidate_energy = rayleigh_quotient(self.operators.target, candidate)
            if not np.isfinite(candidate_energy) or candidate_energy > energy + ENERGY_NOISE:
                logger.info("Refinement sweep gave energy %.3e above %.3e; keeping the previous state",
                            candidate_energy, energy)
                break
            after = self.measure(candidate)
            change = after.max_change(before)
            psi, energy, before = candidate, candidate_energy, after
            elapsed = time.perf_counter() - start
            self._record("refine", energy, psi, elapsed, after if schedule.measure_every_sweep else None)
            if change <= schedule.refine_tolerance:
                break
        return psi, energy, change

    def solve(self) -> RunResult:
        """
        Run warm-up, main phase and Liouvillian refinement.

        Returns:
            The run result; converged is False with a reason when the
            energy or the Liouvillian residual misses its tolerance
        """
        self.records = []
        schedule = self.schedule
        psi, warmup_sweeps = warm_up(
            self.initial_state(),
            self.operators.target,
            schedule,
            on_sweep=lambda sweep, energy, state, elapsed: self._record("warmup", energy, state, elapsed),
        )
        psi, converged, reason = self._main_phase(psi, self.records[-1].energy)
        psi, energy, current_error = self._refine_phase(psi, self.records[-1].energy)
        refined = sum(record.phase == "refine" for record in self.records)
        if refined:
            reason = f"{reason}; {refined} refinement sweeps to energy {energy:.3e}"
            converged = converged or energy <= schedule.energy_tolerance

        psi = psi.normalized()
        final = self.measure(psi)
        residual = liouvillian_residual(self.operators.liouvillian, self.ivec, psi)
        if residual > schedule.residual_tolerance:
            converged = False
            reason = f"{reason}; Liouvillian residual {residual:.2e} above {schedule.residual_tolerance:.1e}"

        if converged and final.currents.size and final.current_resolved(current_error):
            spread = final.current_nonuniformity()
            if spread > UNIFORMITY_TOLERANCE:
                converged = False
                reason = f"{reason}; current not uniform (relative spread {spread:.2e})"
        if not np.all(np.isfinite(final.currents)) or not np.all(np.isfinite(final.magnetization)):
            converged = False
            reason = f"{reason}; observables not finite"

        if converged:
            logger.info("Converged after %d sweeps: %s", len(self.records), reason)
        else:
            logger.warning("Not converged after %d sweeps: %s", len(self.records), reason)

        return RunResult(
            records=self.records,
            final_state=psi,
            current_profile=final.currents,
            magnetization_profile=final.magnetization,
            imag_residual=final.max_imag,
            converged=converged,
            reason=reason,
            warmup_sweeps=warmup_sweeps,
            metadata=self.metadata(),
            liouvillian_residual=residual,
        )

    def metadata(self) -> Dict[str, Any]:
        return {
            "model": self.params.model_dump(),
            "ordering": self.scheme.kind.value,
            "schedule": self.schedule.model_dump(),
            "seed": self.seed,
        }


def solve_ness(
    params: ModelParams,
    scheme: Optional[OrderingScheme] = None,
    schedule: Optional[SweepSchedule] = None,
    seed: Optional[int] = None,
) -> RunResult:
    """
    Find the steady state of a model with NESS-DMRG.

    Args:
        params: Model parameters
        scheme: Superspace ordering (RLN by default)
        schedule: Sweep schedule
        seed: Seed for the random start state

    Returns:
        The run result
    """
    return NessSolver(params, scheme, schedule, seed).solve()
