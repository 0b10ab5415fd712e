"""
Run Manager Module

This module tracks the lifecycle of the individual solver runs that make up
an experiment (a single run, or the points of a scan).
"""

import logging
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

logger = logging.getLogger("ness_dmrg.runs")

VALID_STATUSES = ["submitted", "working", "completed", "unconverged", "failed"]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManager:
    """
    Class for managing solver runs.

    Run ids are sequential ("run-000", "run-001", ...) so that repeated
    experiments name their outputs identically.
    """

    def __init__(self):
        """Initialize the Run Manager."""
        self.runs: Dict[str, Dict[str, Any]] = {}

    def create_run(self, label: str, params: Dict[str, Any]) -> str:
        """
        Create a new run.

        Args:
            label: Short description (e.g. "N=8" or "gamma=0.5")
            params: Parameters of the run

        Returns:
            The ID of the created run
        """
        run_id = f"run-{len(self.runs):03d}"
        now = _now()
        self.runs[run_id] = {
            "id": run_id,
            "label": label,
            "status": "submitted",
            "reason": "",
            "created_at": now,
            "updated_at": now,
            "params": params,
        }
        return run_id

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        return self.runs.get(run_id)

    def update_run_status(self, run_id: str, status: str, reason: str = "") -> bool:
        """
        Update the status of a run.

        Args:
            run_id: The ID of the run
            status: The new status (submitted, working, completed, unconverged, failed)
            reason: Why the run reached this status

        Returns:
            True if successful, False otherwise
        """
        if run_id not in self.runs or status not in VALID_STATUSES:
            return False
        run = self.runs[run_id]
        run["status"] = status
        run["reason"] = reason
        run["updated_at"] = _now()
        if status in ("unconverged", "failed"):
            logger.warning("Run %s (%s) %s: %s", run_id, run["label"], status, reason)
        return True

    def list_runs(self, status: Optional[str] = None) -> List[Dict[str, Any]]:
        """
        List runs, optionally filtered by status.

        Args:
            status: Filter by this status if provided

        Returns:
            A list of runs
        """
        if status:
            return [run for run in self.runs.values() if run["status"] == status]
        return list(self.runs.values())

    def all_succeeded(self) -> bool:
        return all(run["status"] == "completed" for run in self.runs.values())

    def summary(self) -> List[Dict[str, str]]:
        """Status table without timestamps, for reproducible output files."""
        return [
            {"id": run["id"], "label": run["label"], "status": run["status"], "reason": run["reason"]}
            for run in self.runs.values()
        ]
