"""
Experiments Module

This module drives the experiments of an ExperimentConfig (single solve,
gamma scan, size scan with transport fit, ordering comparison) and writes
their tables and summaries.
"""

import json
import logging
import multiprocessing
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from ness_dmrg import __version__
from ness_dmrg.config import ExperimentConfig
from ness_dmrg.core.dmrg import SweepSchedule
from ness_dmrg.core.liouvillian import ModelParams
from ness_dmrg.core.ness_solver import solve_ness
from ness_dmrg.core.run_manager import RunManager
from ness_dmrg.core.run_result import HISTORY_COLUMNS, RunResult
from ness_dmrg.core.superspace import OrderingKind, OrderingScheme

logger = logging.getLogger("ness_dmrg.experiments")

EXIT_OK = 0
EXIT_UNCONVERGED = 2
EXIT_CONFIG_ERROR = 3

COMPARE_THRESHOLD = 1e-4


class TransportFit(BaseModel):
    """Power-law fit |J| ~ N^(-alpha)."""

    points: List[Tuple[int, float]] = Field(..., description="(N, mean current) pairs")
    alpha: float = Field(..., description="Transport exponent")
    fit_residual: float = Field(..., ge=0, description="RMS residual of the log-log fit")

    @field_validator("points")
    @classmethod
    def _enough_points(cls, value: List[Tuple[int, float]]) -> List[Tuple[int, float]]:
        if len(value) < 3:
            raise ValueError(f"A transport fit needs at least 3 points, got {len(value)}")
        return value


def fit_transport_exponent(points: Sequence[Tuple[int, float]]) -> TransportFit:
    """
    Least-squares slope of log J against log N.

    Args:
        points: (N, J) pairs with J > 0

    Returns:
        The fit with alpha = -slope
    """
    points = [(int(n), float(j)) for n, j in points]
    if len(points) < 3:
        raise ValueError(f"A transport fit needs at least 3 points, got {len(points)}")
    for n, j in points:
        if n < 1 or not j > 0:
            raise ValueError(f"Transport fit needs N >= 1 and positive current, got ({n}, {j})")
    x = np.log([n for n, _ in points])
    y = np.log([j for _, j in points])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return TransportFit(points=points, alpha=float(-slope), fit_residual=residual)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_table(frame: pd.DataFrame, path: Path) -> None:
    _atomic_write(path, frame.to_csv(index=False, float_format="%.12e"))
    logger.info("Wrote %s", path)


def write_json(record: Dict[str, Any], path: Path) -> None:
    _atomic_write(path, json.dumps(record, indent=2, sort_keys=True, default=str))
    logger.info("Wrote %s", path)


def history_frame(result: RunResult) -> pd.DataFrame:
    return pd.DataFrame(result.history_rows(), columns=HISTORY_COLUMNS)


def write_run(result: RunResult, directory: Path) -> None:
    """History, profiles and summary of one run."""
    write_table(history_frame(result), directory / "history.csv")
    n_bonds = result.current_profile.size
    write_table(
        pd.DataFrame({"bond": np.arange(1, n_bonds + 1), "current": result.current_profile}),
        directory / "current_profile.csv",
    )
    n_sites = result.magnetization_profile.size
    write_table(
        pd.DataFrame({"site": np.arange(1, n_sites + 1), "magnetization": result.magnetization_profile}),
        directory / "magnetization_profile.csv",
    )
    summary = result.to_dict()
    summary.pop("history")
    write_json(summary, directory / "summary.json")


def _solve_point(task: Tuple[Dict[str, Any], str, Dict[str, Any], int]) -> RunResult:
    params_data, kind, schedule_data, seed = task
    params = ModelParams.model_validate(params_data)
    scheme = OrderingScheme(kind=kind, n_phys=params.n_sites)
    return solve_ness(params, scheme, SweepSchedule.model_validate(schedule_data), seed=seed)


class ExperimentRunner:
    """
    Runs the experiment described by a configuration.

    Each solver run is tracked by a RunManager; a failing point is
    recorded as failed instead of aborting the rest of a scan.
    """

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the runner.

        Args:
            config: Validated experiment configuration
        """
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.run_manager = RunManager()

    def run(self) -> int:
        """
        Run the experiment and write its outputs.

        Returns:
            Exit status (0 success, 2 non-convergence)
        """
        handlers = {
            "single": self.run_single,
            "gamma_scan": self.run_gamma_scan,
            "size_scan": self.run_size_scan,
            "ordering_compare": self.run_ordering_compare,
        }
        summary = handlers[self.config.experiment]()
        summary.update(
            {
                "experiment": self.config.experiment,
                "version": __version__,
                "runs": self.run_manager.summary(),
            }
        )
        write_json(summary, self.output_dir / "summary.json")

        if self.run_manager.all_succeeded():
            return EXIT_OK
        if self.config.allow_unconverged:
            logger.warning("Some runs did not converge; exiting 0 as requested")
            return EXIT_OK
        return EXIT_UNCONVERGED

    def _solve_all(
        self, points: List[Tuple[str, ModelParams, OrderingKind]]
    ) -> List[Optional[RunResult]]:
        schedule = self.config.schedule.model_dump()
        tasks, run_ids = [], []
        for label, params, kind in points:
            run_ids.append(self.run_manager.create_run(label, params.model_dump()))
            tasks.append((params.model_dump(), kind.value, schedule, self.config.seed))

        for run_id in run_ids:
            self.run_manager.update_run_status(run_id, "working")

        if self.config.workers > 1 and len(tasks) > 1:
            with multiprocessing.Pool(min(self.config.workers, len(tasks))) as pool:
                async_results = [pool.apply_async(_solve_point, (task,)) for task in tasks]
                outcomes = [self._collect(lambda r=r: r.get()) for r in async_results]
        else:
            outcomes = [self._collect(lambda t=task: _solve_point(t)) for task in tasks]

        results = []
        for run_id, (result, error) in zip(run_ids, outcomes):
            if error is not None:
                self.run_manager.update_run_status(run_id, "failed", error)
            elif result.converged:
                self.run_manager.update_run_status(run_id, "completed", result.reason)
            else:
                self.run_manager.update_run_status(run_id, "unconverged", result.reason)
            results.append(result)
        return results

    @staticmethod
    def _collect(call) -> Tuple[Optional[RunResult], Optional[str]]:
        try:
            return call(), None
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            logger.error("Run failed: %s", e)
            return None, f"{type(e).__name__}: {e}"

    def run_single(self) -> Dict[str, Any]:
        params = self.config.model_params()
        (result,) = self._solve_all([(f"N={params.n_sites}", params, self.config.scheme)])
        (run,) = self.run_manager.list_runs()
        if result is not None:
            write_run(result, self.output_dir / run["id"])
        return {"run": run["id"], "result": None if result is None else _brief(result)}

    def run_gamma_scan(self) -> Dict[str, Any]:
        base = self.config.model_params()
        drives = self.config.scan.drives or [(base.f_1, base.f_n)]
        points = []
        for f_1, f_n in drives:
            for gamma in self.config.scan.gamma_values:
                params = self.config.model_params(gamma=gamma, f_1=f_1, f_n=f_n)
                points.append((f"gamma={gamma:g},f1={f_1:g},fN={f_n:g}", params, self.config.scheme))

        results = self._solve_all(points)
        rows = []
        for (label, params, _), result, run in zip(points, results, self.run_manager.list_runs()):
            if result is not None:
                write_run(result, self.output_dir / run["id"])
            rows.append(
                {
                    "run": run["id"],
                    "gamma": params.gamma_1,
                    "f1": params.f_1,
                    "fN": params.f_n,
                    "mean_current": np.nan if result is None else result.mean_current,
                    "final_energy": np.nan if result is None else result.final_energy,
                    "converged": False if result is None else result.converged,
                }
            )
        write_table(pd.DataFrame(rows), self.output_dir / "gamma_scan.csv")
        return {"points": rows}

    def run_size_scan(self) -> Dict[str, Any]:
        points = []
        for n in self.config.scan.sizes:
            points.append((f"N={n}", self.config.model_params(n_sites=n), self.config.scheme))
        results = self._solve_all(points)

        rows = []
        for (_, params, _), result, run in zip(points, results, self.run_manager.list_runs()):
            if result is not None:
                write_run(result, self.output_dir / run["id"])
            rows.append(
                {
                    "run": run["id"],
                    "n_sites": params.n_sites,
                    "mean_current": np.nan if result is None else result.mean_current,
                    "final_energy": np.nan if result is None else result.final_energy,
                    "converged": False if result is None else result.converged,
                }
            )
        write_table(pd.DataFrame(rows), self.output_dir / "size_scan.csv")

        fit_points = [
            (row["n_sites"], abs(row["mean_current"]))
            for row in rows
            if np.isfinite(row["mean_current"]) and abs(row["mean_current"]) > 0
        ]
        alpha, fit = None, None
        if len(fit_points) >= 3:
            fit = fit_transport_exponent(fit_points)
            alpha = fit.alpha
            logger.info("Transport exponent alpha = %.4f (residual %.2e)", fit.alpha, fit.fit_residual)
        else:
            logger.warning("Only %d usable size points; transport exponent not fitted", len(fit_points))
        return {"points": rows, "alpha": alpha, "fit": None if fit is None else fit.model_dump()}

    def run_ordering_compare(self) -> Dict[str, Any]:
        report = compare_orderings(self.config, runner=self)
        return {"report": report}


def _brief(result: RunResult) -> Dict[str, Any]:
    brief = result.to_dict()
    brief.pop("history")
    return brief


def sweeps_to_threshold(result: RunResult, threshold: float = COMPARE_THRESHOLD) -> Optional[int]:
    """First sweep index whose energy is at or below the threshold."""
    for record in result.records:
        if record.energy <= threshold:
            return record.sweep
    return None


def compare_orderings(config: ExperimentConfig, runner: Optional[ExperimentRunner] = None) -> Dict[str, Any]:
    """
    Solve one model under both orderings with the same schedule.

    Args:
        config: Experiment configuration (its scheme is ignored)
        runner: Runner whose bookkeeping and output directory are used

    Returns:
        Report with sweeps to threshold, final values and both energies at
        the last sweep index reached by both runs
    """
    runner = runner or ExperimentRunner(config)
    params = config.model_params()
    kinds = [OrderingKind.RLN, OrderingKind.RNLN]
    results = runner._solve_all([(kind.value, params, kind) for kind in kinds])

    report: Dict[str, Any] = {"threshold": COMPARE_THRESHOLD, "orderings": {}}
    energies = {}
    for kind, result in zip(kinds, results):
        if result is None:
            report["orderings"][kind.value] = None
            continue
        write_run(result, runner.output_dir / kind.value.lower())
        energies[kind.value] = result.energy_history
        report["orderings"][kind.value] = {
            "final_energy": result.final_energy,
            "sweeps": len(result.records),
            "sweeps_to_threshold": sweeps_to_threshold(result),
            "mean_current": result.mean_current,
            "converged": result.converged,
        }

    if len(energies) == len(kinds):
        common = min(len(values) for values in energies.values())
        report["common_sweep"] = common
        report["energy_at_common_sweep"] = {kind: values[common - 1] for kind, values in energies.items()}

    if energies:
        length = max(len(values) for values in energies.values())
        frame = pd.DataFrame({"sweep": np.arange(1, length + 1)})
        for kind, values in energies.items():
            frame[f"energy_{kind.lower()}"] = values + [np.nan] * (length - len(values))
        write_table(frame, runner.output_dir / "ordering_energies.csv")
    return report


def run_experiment(config: ExperimentConfig) -> int:
    """Run an experiment; returns the exit status."""
    return ExperimentRunner(config).run()
