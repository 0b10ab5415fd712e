"""
Run Result Module

This module holds the outcome of a NESS-DMRG run: per-sweep records, final
observables and the convergence verdict.
"""

import json
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from ness_dmrg.core.mps import MatrixProductState

HISTORY_COLUMNS = ["sweep", "max_bond", "energy", "walltime_s", "mean_current", "max_imag", "phase"]


class SweepRecord(BaseModel):
    """One completed sweep."""

    sweep: int = Field(..., ge=1, description="Global sweep index (warm-up included)")
    phase: Literal["warmup", "main", "refine"] = Field(..., description="Solver phase")
    max_bond: int = Field(..., ge=1, description="Largest bond of the state after the sweep")
    energy: float = Field(..., description="Rayleigh quotient <psi|M|psi>")
    walltime_s: float = Field(..., ge=0, description="Wall time of the sweep in seconds")
    mean_current: Optional[float] = Field(None, description="Mean spin current, if measured")
    max_imag: Optional[float] = Field(None, description="Largest |Im| of the measured observables")


class RunResult:
    """
    Outcome of solve_ness.

    A run that is not converged still carries its profiles; the reason
    says why it stopped.
    """

    def __init__(
        self,
        records: List[SweepRecord],
        final_state: Optional[MatrixProductState],
        current_profile: np.ndarray,
        magnetization_profile: np.ndarray,
        imag_residual: float,
        converged: bool,
        reason: str,
        warmup_sweeps: int = 0,
        metadata: Optional[Dict[str, Any]] = None,
        liouvillian_residual: float = float("nan"),
    ):
        """
        Initialize a run result.

        Args:
            records: Sweep records in order
            final_state: Normalized final MPS (None when reloaded from disk)
            current_profile: N-1 bond currents
            magnetization_profile: N site magnetizations
            imag_residual: Largest |Im| of the final observables
            converged: Whether the stopping rule accepted the state
            reason: Human-readable stopping reason
            warmup_sweeps: Number of warm-up sweeps
            metadata: Model, ordering and schedule used
            liouvillian_residual: ||L psi|| / |<Ivec|psi>| of the final state
        """
        self.records = list(records)
        self.final_state = final_state
        self.current_profile = np.asarray(current_profile, dtype=float)
        self.magnetization_profile = np.asarray(magnetization_profile, dtype=float)
        self.imag_residual = float(imag_residual)
        self.converged = bool(converged)
        self.reason = reason
        self.warmup_sweeps = warmup_sweeps
        self.metadata = metadata or {}
        self.liouvillian_residual = float(liouvillian_residual)

    @property
    def energy_history(self) -> List[float]:
        return [record.energy for record in self.records]

    @property
    def bond_history(self) -> List[int]:
        return [record.max_bond for record in self.records]

    @property
    def walltime_history(self) -> List[float]:
        return [record.walltime_s for record in self.records]

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy if self.records else float("nan")

    @property
    def mean_current(self) -> float:
        return float(np.mean(self.current_profile)) if self.current_profile.size else 0.0

    def history_rows(self) -> List[Dict[str, Any]]:
        """Rows for the sweep history table."""
        return [record.model_dump() for record in self.records]

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the result to a dictionary (the state is not included).

        Returns:
            The result as a dictionary
        """
        return {
            "converged": self.converged,
            "reason": self.reason,
            "final_energy": self.final_energy,
            "sweeps": len(self.records),
            "warmup_sweeps": self.warmup_sweeps,
            "final_bond": self.records[-1].max_bond if self.records else None,
            "mean_current": self.mean_current,
            "current_profile": self.current_profile.tolist(),
            "magnetization_profile": self.magnetization_profile.tolist(),
            "imag_residual": self.imag_residual,
            "liouvillian_residual": self.liouvillian_residual,
            "metadata": self.metadata,
            "history": self.history_rows(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunResult":
        """
        Rebuild a result from to_dict output.

        Args:
            data: Dictionary produced by to_dict

        Returns:
            A RunResult without final state
        """
        return cls(
            records=[SweepRecord(**row) for row in data.get("history", [])],
            final_state=None,
            current_profile=data.get("current_profile", []),
            magnetization_profile=data.get("magnetization_profile", []),
            imag_residual=data.get("imag_residual", 0.0),
            converged=data.get("converged", False),
            reason=data.get("reason", ""),
            warmup_sweeps=data.get("warmup_sweeps", 0),
            metadata=data.get("metadata", {}),
            liouvillian_residual=data.get("liouvillian_residual", float("nan")),
        )

    @classmethod
    def from_json(cls, json_str: str) -> "RunResult":
        return cls.from_dict(json.loads(json_str))
