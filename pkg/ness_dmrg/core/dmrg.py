"""
DMRG Module

This module provides the variational machinery that minimizes a Hermitian,
positive semidefinite MPO: a restarted Lanczos local eigensolver, two-site
sweeps with SVD truncation, a fixed-bond warm-up phase and refinement
sweeps that solve the trace-bordered Liouvillian equation site by site.
"""

import logging
import time
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator, lgmres

from ness_dmrg.core.mps import (
    IN,
    LEFT,
    OUT,
    PHYS,
    RIGHT,
    MatrixProductOperator,
    MatrixProductState,
    boundary_environment,
    canonicalize,
    left_environment_step,
    rayleigh_quotient,
    right_environment_step,
    truncate,
)
from ness_dmrg.core.tensor import LabeledTensor, contract, svd_truncate

logger = logging.getLogger("ness_dmrg.dmrg")

THETA_LABELS = ("left", "p1", "p2", "right")
LANCZOS_BREAKDOWN = 1e-13
LGMRES_INNER = 30


class SweepSchedule(BaseModel):
    """Bond-dimension ramp and stopping rules of a NESS-DMRG run."""

    model_config = ConfigDict(frozen=True)

    warmup_bond: int = Field(2, ge=1, description="Bond dimension during warm-up")
    warmup_threshold: float = Field(1e-3, gt=0, description="Relative energy change ending the warm-up")
    warmup_max_sweeps: int = Field(50, ge=1, description="Warm-up sweep cap")
    bond_increment: int = Field(2, ge=1, description="Bond added at each ramp")
    ramp_threshold: float = Field(0.1, gt=0, lt=1, description="Relative change that triggers a ramp")
    max_bond: int = Field(40, ge=1, description="Largest bond dimension")
    max_sweeps: int = Field(100, ge=1, description="Main-phase sweep cap")
    energy_floor: float = Field(1e-10, gt=0, description="Energy at which the main phase stops")
    energy_tolerance: float = Field(1e-6, gt=0, description="Energy accepted once the bond is saturated")
    stability_threshold: float = Field(1e-3, gt=0, description="Relative change ending a saturated run")
    local_solver_iters: int = Field(6, ge=1, description="Krylov block size of the local eigensolver")
    local_max_restarts: int = Field(5, ge=1, description="Lanczos blocks per local eigenproblem")
    local_tolerance: float = Field(1e-10, ge=0, description="Ritz residual ending a local eigenproblem")
    svd_cutoff: float = Field(1e-12, ge=0, description="Relative discarded-weight cutoff per bond")
    refine_sweeps: int = Field(6, ge=0, description="Cap on Liouvillian refinement sweeps after the main phase")
    refine_tolerance: float = Field(1e-11, gt=0, description="Observable change ending the refinement")
    refine_solver_tolerance: float = Field(1e-12, gt=0, description="Relative residual of each local linear solve")
    refine_solver_cycles: int = Field(4, ge=1, description="Outer lgmres cycles per local linear solve")
    residual_tolerance: float = Field(1e-6, gt=0, description="Largest accepted ||L psi|| / |<Ivec|psi>|")
    initial_state: Literal["ivec", "random"] = Field("ivec", description="Start from vec(I) or a seeded random MPS")
    measure_every_sweep: bool = Field(True, description="Measure observables after every sweep")

    @model_validator(mode="after")
    def _bond_order(self) -> "SweepSchedule":
        if self.warmup_bond > self.max_bond:
            raise ValueError(f"warmup_bond {self.warmup_bond} exceeds max_bond {self.max_bond}")
        return self


def relative_change(previous: float, current: float, floor: float) -> float:
    """|previous - current| / max(|previous|, floor)."""
    return abs(previous - current) / max(abs(previous), floor)


def _lanczos_block(
    apply: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    shape: Tuple[int, ...],
    iters: int,
) -> Tuple[float, np.ndarray, float, float]:
    """One Lanczos pass from a normalized start: (value, vector, residual, scale)."""
    basis = [start]
    alphas, betas = [], []
    tail = 0.0
    for k in range(iters):
        w = np.asarray(apply(basis[k].reshape(shape)), dtype=complex).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("Effective operator produced non-finite values")
        alpha = float(np.vdot(basis[k], w).real)
        alphas.append(alpha)
        if len(basis) == start.size:
            break
        for _ in range(2):
            for b in basis:
                w = w - np.vdot(b, w) * b
        beta = float(np.linalg.norm(w))
        if beta < LANCZOS_BREAKDOWN * max(1.0, abs(alpha)):
            logger.debug("Lanczos breakdown after %d vectors", k + 1)
            break
        if k == iters - 1:
            tail = beta
            break
        betas.append(beta)
        basis.append(w / beta)

    scale = max(1.0, max(abs(a) for a in alphas))
    if len(alphas) == 1:
        return alphas[0], basis[0], tail, scale

    values, vectors = eigh_tridiagonal(np.array(alphas), np.array(betas), select="i", select_range=(0, 0))
    coefficients = vectors[:, 0]
    ritz = sum(c * b for c, b in zip(coefficients, basis))
    ritz = ritz / np.linalg.norm(ritz)
    return float(values[0]), ritz, tail * abs(coefficients[-1]), scale


def local_eigensolve(
    apply: Callable[[np.ndarray], np.ndarray],
    guess: np.ndarray,
    iters: int = 6,
    tol: float = 0.0,
    max_restarts: int = 1,
) -> Tuple[float, np.ndarray]:
    """
    Lowest eigenpair of a Hermitian map by restarted Lanczos.

    Each block builds a Krylov space of dimension iters from the current
    Ritz vector; blocks repeat until the Ritz residual drops below
    tol times the largest diagonal element seen, or max_restarts blocks
    have run.

    Args:
        apply: Hermitian linear map on arrays shaped like guess
        guess: Start vector (any shape, nonzero)
        iters: Krylov block size
        tol: Relative Ritz residual that ends the restarts
        max_restarts: Number of Lanczos blocks at most

    Returns:
        (Ritz value, normalized Ritz vector shaped like guess); the value
        never exceeds the Rayleigh quotient of the guess
    """
    shape = np.shape(guess)
    v = np.asarray(guess, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("Local eigensolver received a non-finite guess")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("Local eigensolver received a zero guess")

    vector = v / norm
    value, residual = 0.0, 0.0
    for _ in range(max(1, max_restarts)):
        value, vector, residual, scale = _lanczos_block(apply, vector, shape, iters)
        if residual <= tol * scale:
            break
    else:
        if max_restarts > 1:
            logger.debug("Lanczos stopped after %d blocks with residual %.3e", max_restarts, residual)
    return float(value), vector.reshape(shape)


def local_null_solve(
    apply: Callable[[np.ndarray], np.ndarray],
    border: np.ndarray,
    guess: np.ndarray,
    tol: float = 1e-12,
    cycles: int = 10,
) -> Tuple[float, np.ndarray]:
    """
    Null vector of a local map, fixed by its overlap with a border vector.

    Solves (A + b b^dagger) x = b with b the normalized border; any x with
    A x = 0 and b^dagger x = 1 is the solution.

    Args:
        apply: Linear map on arrays shaped like guess
        border: Local projection of the normalization functional
        guess: Start vector
        tol: Relative residual of the linear solve
        cycles: Outer lgmres iterations

    Returns:
        (||A x|| for the normalized solution, normalized solution)
    """
    shape = np.shape(guess)
    b = np.asarray(border, dtype=complex).reshape(-1)
    b_norm = np.linalg.norm(b)
    if b_norm == 0 or not np.isfinite(b_norm):
        raise ValueError("Border vector of the local linear problem vanishes")
    b = b / b_norm
    n = b.size

    def matvec(x):
        x = np.asarray(x, dtype=complex).reshape(-1)
        image = np.asarray(apply(x.reshape(shape)), dtype=complex).reshape(-1)
        return image + b * np.vdot(b, x)

    op = LinearOperator((n, n), matvec=matvec, dtype=complex)
    x0 = np.asarray(guess, dtype=complex).reshape(-1)
    overlap = np.vdot(b, x0)
    x0 = x0 / overlap if abs(overlap) > LANCZOS_BREAKDOWN * np.linalg.norm(x0) else b

    x, info = lgmres(op, b, x0=x0, rtol=tol, atol=0.0, maxiter=cycles, inner_m=min(LGMRES_INNER, n))
    if info < 0:
        raise ValueError(f"Local linear solver failed with code {info}")
    if not np.all(np.isfinite(x)):
        raise ValueError("Local linear solver produced non-finite values")
    if info > 0:
        logger.debug("lgmres stopped after %d cycles", info)

    x = x / np.linalg.norm(x)
    residual = float(np.linalg.norm(np.asarray(apply(x.reshape(shape)), dtype=complex)))
    return residual, x.reshape(shape)


class TwoSiteOperator:
    """Effective operator of an MPO on two neighbouring sites."""

    def __init__(
        self,
        left_env: LabeledTensor,
        w1: LabeledTensor,
        w2: LabeledTensor,
        right_env: LabeledTensor,
    ):
        self.left_env = left_env
        self.w1 = w1.relabel({OUT: "o1", IN: "i1", RIGHT: "w"})
        self.w2 = w2.relabel({OUT: "o2", IN: "i2", LEFT: "w", RIGHT: "wr"})
        self.right_env = right_env.relabel({"bra": "rbra", "op": "rop", "ket": "rket"})

    def apply(self, theta: np.ndarray) -> np.ndarray:
        t = LabeledTensor(theta, THETA_LABELS)
        t = contract(self.left_env, t, [("ket", "left")])
        t = contract(t, self.w1, [("op", LEFT), ("p1", "i1")])
        t = contract(t, self.w2, [("w", "w"), ("p2", "i2")])
        t = contract(t, self.right_env, [("right", "rket"), ("wr", "rop")])
        return t.transpose(("bra", "o1", "o2", "rbra")).data


class Environments:
    """
    Left and right environments of <bra|op|ket> around a two-site window.

    The bra tensors are the ones being optimized and are passed in on every
    update; ket tensors default to the same list.
    """

    def __init__(
        self,
        bras: Sequence[LabeledTensor],
        ops: Sequence[LabeledTensor],
        kets: Optional[Sequence[LabeledTensor]] = None,
    ):
        length = len(bras)
        self.ops = ops
        self.kets = kets
        self.left: List[Optional[LabeledTensor]] = [None] * (length + 1)
        self.right: List[Optional[LabeledTensor]] = [None] * (length + 1)
        self.left[0] = boundary_environment()
        self.right[length] = boundary_environment()
        for i in range(length - 1, 1, -1):
            self.grow_right(i, bras)

    def _ket(self, i: int, bras: Sequence[LabeledTensor]) -> LabeledTensor:
        return bras[i] if self.kets is None else self.kets[i]

    def grow_left(self, i: int, bras: Sequence[LabeledTensor]) -> None:
        self.left[i + 1] = left_environment_step(self.left[i], bras[i], self.ops[i], self._ket(i, bras))

    def grow_right(self, i: int, bras: Sequence[LabeledTensor]) -> None:
        self.right[i] = right_environment_step(self.right[i + 1], bras[i], self.ops[i], self._ket(i, bras))

    def operator(self, i: int) -> TwoSiteOperator:
        return TwoSiteOperator(self.left[i], self.ops[i], self.ops[i + 1], self.right[i + 2])


def _two_site_theta(a: LabeledTensor, b: LabeledTensor) -> LabeledTensor:
    t = contract(a.relabel({PHYS: "p1", RIGHT: "mid"}), b.relabel({PHYS: "p2", LEFT: "mid"}), [("mid", "mid")])
    return t.transpose(THETA_LABELS)


def _scale_columns(t: LabeledTensor, s: np.ndarray, label: str) -> LabeledTensor:
    axis = t.labels.index(label)
    shape = [1] * t.rank
    shape[axis] = s.size
    return LabeledTensor(t.data * s.reshape(shape), t.labels)


LocalUpdate = Callable[[int, LabeledTensor], Tuple[float, np.ndarray]]


def _prepare(state: MatrixProductState, op: MatrixProductOperator) -> List[LabeledTensor]:
    if state.length != op.length:
        raise ValueError(f"State length {state.length} differs from operator length {op.length}")
    if state.length < 2:
        raise ValueError("Two-site sweeps need at least two sites")
    psi = canonicalize(state, 1) if state.ortho_center != 1 else state
    tensors = list(psi.site_tensors)
    tensors[0] = tensors[0] * (1.0 / tensors[0].norm())
    return tensors


def _sweep(
    tensors: List[LabeledTensor],
    envs: Sequence[Environments],
    update: LocalUpdate,
    cap: int,
    cutoff: float,
) -> Tuple[float, float]:
    """Left-to-right then right-to-left two-site pass; returns (last local value, max discarded)."""
    value = 0.0
    discarded = 0.0
    for i in range(len(tensors) - 1):
        value, vec = update(i, _two_site_theta(tensors[i], tensors[i + 1]))
        result = svd_truncate(LabeledTensor(vec, THETA_LABELS), ("left", "p1"), cap, cutoff)
        discarded = max(discarded, result.discarded_weight)
        s = result.s / np.linalg.norm(result.s)
        tensors[i] = result.u.relabel({"p1": PHYS, "bond": RIGHT})
        tensors[i + 1] = _scale_columns(result.v, s, "bond").relabel({"bond": LEFT, "p2": PHYS})
        for env in envs:
            env.grow_left(i, tensors)

    for i in range(len(tensors) - 2, -1, -1):
        value, vec = update(i, _two_site_theta(tensors[i], tensors[i + 1]))
        result = svd_truncate(LabeledTensor(vec, THETA_LABELS), ("left", "p1"), cap, cutoff)
        discarded = max(discarded, result.discarded_weight)
        s = result.s / np.linalg.norm(result.s)
        tensors[i + 1] = result.v.relabel({"bond": LEFT, "p2": PHYS})
        tensors[i] = _scale_columns(result.u, s, "bond").relabel({"p1": PHYS, "bond": RIGHT})
        for env in envs:
            env.grow_right(i + 1, tensors)
    return value, discarded


def dmrg_sweep(
    state: MatrixProductState,
    target: MatrixProductOperator,
    schedule: SweepSchedule,
    max_bond: Optional[int] = None,
) -> Tuple[float, MatrixProductState]:
    """
    One left-to-right then right-to-left two-site sweep.

    Args:
        state: Start state (any gauge, nonzero)
        target: Hermitian PSD operator to minimize
        schedule: Solver settings (local iterations, SVD cutoff)
        max_bond: Bond cap for this sweep; defaults to schedule.max_bond

    Returns:
        (last local eigenvalue, normalized state with ortho_center 1)
    """
    tensors = _prepare(state, target)
    cap = max_bond if max_bond is not None else schedule.max_bond
    envs = Environments(tensors, target.site_tensors)

    def update(i: int, theta: LabeledTensor) -> Tuple[float, np.ndarray]:
        return local_eigensolve(
            envs.operator(i).apply,
            theta.data,
            schedule.local_solver_iters,
            schedule.local_tolerance,
            schedule.local_max_restarts,
        )

    energy, discarded = _sweep(tensors, [envs], update, cap, schedule.svd_cutoff)
    logger.debug("Sweep at bond cap %d: local energy %.3e, max discarded %.3e", cap, energy, discarded)
    return energy, MatrixProductState(tensors, ortho_center=1)


def refine_sweep(
    state: MatrixProductState,
    liouvillian: MatrixProductOperator,
    ivec: MatrixProductState,
    schedule: SweepSchedule,
    max_bond: Optional[int] = None,
) -> Tuple[float, MatrixProductState]:
    """
    Two-site sweep that solves L psi = 0 at fixed trace.

    Each window solves the projected Liouvillian bordered by the local
    projection of Ivec, so the update targets the null vector of L itself
    rather than the minimum of L^dagger L.

    Args:
        state: Start state (nonzero trace)
        liouvillian: Liouvillian MPO
        ivec: vec(I) in the same ordering
        schedule: Solver settings (lgmres tolerance and cycles, SVD cutoff)
        max_bond: Bond cap; defaults to schedule.max_bond

    Returns:
        (largest local residual over the sweep, normalized state with ortho_center 1)
    """
    if ivec.length != liouvillian.length:
        raise ValueError(f"Ivec length {ivec.length} differs from operator length {liouvillian.length}")
    tensors = _prepare(state, liouvillian)
    cap = max_bond if max_bond is not None else schedule.max_bond
    ivec_tensors = ivec.site_tensors
    identity = MatrixProductOperator.identity(ivec.phys_dims).site_tensors
    dynamics = Environments(tensors, liouvillian.site_tensors)
    traces = Environments(tensors, identity, kets=ivec_tensors)
    worst = 0.0

    def update(i: int, theta: LabeledTensor) -> Tuple[float, np.ndarray]:
        nonlocal worst
        border = traces.operator(i).apply(_two_site_theta(ivec_tensors[i], ivec_tensors[i + 1]).data)
        residual, vec = local_null_solve(
            dynamics.operator(i).apply,
            border,
            theta.data,
            schedule.refine_solver_tolerance,
            schedule.refine_solver_cycles,
        )
        worst = max(worst, residual)
        return residual, vec

    _, discarded = _sweep(tensors, [dynamics, traces], update, cap, schedule.svd_cutoff)
    logger.debug("Refinement at bond cap %d: local residual %.3e, max discarded %.3e", cap, worst, discarded)
    return worst, MatrixProductState(tensors, ortho_center=1)


SweepCallback = Callable[[int, float, MatrixProductState, float], None]


def warm_up(
    state: MatrixProductState,
    target: MatrixProductOperator,
    schedule: SweepSchedule,
    on_sweep: Optional[SweepCallback] = None,
) -> Tuple[MatrixProductState, int]:
    """
    Sweep at the fixed warm-up bond until the energy settles.

    Args:
        state: Start state; truncated to warmup_bond if larger
        target: Hermitian PSD operator
        schedule: Warm-up settings
        on_sweep: Called as (sweep, energy, state, walltime_s) after each sweep

    Returns:
        (state, sweeps used)
    """
    psi = state
    if psi.max_bond > schedule.warmup_bond:
        psi, _ = truncate(psi, schedule.warmup_bond)
    previous = rayleigh_quotient(target, psi)

    for sweep in range(1, schedule.warmup_max_sweeps + 1):
        start = time.perf_counter()
        _, psi = dmrg_sweep(psi, target, schedule, max_bond=schedule.warmup_bond)
        energy = rayleigh_quotient(target, psi)
        elapsed = time.perf_counter() - start
        if on_sweep is not None:
            on_sweep(sweep, energy, psi, elapsed)
        change = relative_change(previous, energy, schedule.energy_floor)
        logger.info(
            "warmup sweep %d: bond %d energy %.6e change %.3e (%.2fs)",
            sweep, psi.max_bond, energy, change, elapsed,
        )
        if energy <= schedule.energy_floor or change < schedule.warmup_threshold:
            return psi, sweep
        previous = energy
    return psi, schedule.warmup_max_sweeps
