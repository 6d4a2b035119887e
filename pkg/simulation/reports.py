"""
pcortest reports - schema-stable CSV/JSON tables for simulation output

Column order of scenario reports (REPORT_COLUMNS):

    scenario_id, n, design, span, sigma0, sigma_eps, rho, lambda,
    fit_lambda_y, fit_lambda_z, estimator, alternative, alpha,
    replications, b, master_seed, jitter, rejection_rate, mc_stderr,
    mean_abs_r_gap, rejections, completed, failures, runtime_seconds

Convergence tables and curve galleries use their own fixed columns.
"""
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from inference.errors import DomainError, ReportIOError
from simulation.harness import ConvergenceRow, Scenario, ScenarioReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCENARIO_COLUMNS = [
    "scenario_id", "n", "design", "span", "sigma0", "sigma_eps", "rho", "lambda",
    "fit_lambda_y", "fit_lambda_z", "estimator", "alternative", "alpha",
    "replications", "b", "master_seed",
]

REPORT_COLUMNS = SCENARIO_COLUMNS + [
    "jitter", "rejection_rate", "mc_stderr", "mean_abs_r_gap",
    "rejections", "completed", "failures", "runtime_seconds",
]

CONVERGENCE_COLUMNS = SCENARIO_COLUMNS + [
    "median_abs_r_gap", "mean_abs_r_gap", "failures",
]

CURVE_COLUMNS = ["lambda", "x", "g", "y", "h", "z"]


class ReportFormat(Enum):
    CSV = "csv"
    JSON = "json"

    @classmethod
    def parse(cls, value) -> 'ReportFormat':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"Unknown report format '{value}' (expected csv or json)")

    @classmethod
    def from_path(cls, path: PathLike) -> 'ReportFormat':
        return cls.JSON if Path(path).suffix.lower() == ".json" else cls.CSV


def scenario_record(s: Scenario) -> Dict:
    return {
        "scenario_id": s.scenario_id,
        "n": s.n,
        "design": s.design.value,
        "span": s.span,
        "sigma0": s.model.sigma0,
        "sigma_eps": s.model.sigma_eps,
        "rho": s.model.rho,
        "lambda": s.model.lam,
        "fit_lambda_y": s.fit_lambda_y,
        "fit_lambda_z": s.fit_lambda_z,
        "estimator": s.estimator.value,
        "alternative": s.alternative.value,
        "alpha": s.alpha,
        "replications": s.replications,
        "b": s.b,
        "master_seed": s.master_seed,
    }


def report_record(report: ScenarioReport) -> Dict:
    record = scenario_record(report.scenario)
    record.update({
        "jitter": report.jitter,
        "rejection_rate": report.rejection_rate,
        "mc_stderr": report.mc_stderr,
        "mean_abs_r_gap": report.mean_abs_r_gap,
        "rejections": report.rejections,
        "completed": report.completed,
        "failures": report.failures,
        "runtime_seconds": report.runtime_seconds,
    })
    return record


def convergence_record(row: ConvergenceRow) -> Dict:
    record = scenario_record(row.scenario)
    record.update({
        "median_abs_r_gap": row.median_abs_r_gap,
        "mean_abs_r_gap": row.mean_abs_r_gap,
        "failures": row.failures,
    })
    return record


def _plain(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and value != value:
        return None
    return value


def write_records(records: Sequence[Dict], columns: List[str], fmt, path: PathLike) -> Path:
    """Write records with a fixed column order; missing values stay empty"""
    fmt = ReportFormat.parse(fmt)
    path = Path(path)
    try:
        if fmt is ReportFormat.CSV:
            frame = pd.DataFrame(list(records), columns=columns)
            frame.to_csv(path, index=False)
        else:
            rows = [{column: _plain(record.get(column)) for column in columns} for record in records]
            with open(path, "w", encoding="utf-8") as fh:
                json.dump({"columns": columns, "records": rows}, fh, indent=2)
                fh.write("\n")
    except OSError as e:
        raise ReportIOError(f"cannot write report: {e.strerror or e}", path=path)
    logger.info("wrote %d rows to %s", len(records), path)
    return path


def write_report(reports: Sequence[ScenarioReport], fmt, path: PathLike) -> Path:
    """Write scenario reports as CSV or JSON in REPORT_COLUMNS order"""
    return write_records([report_record(r) for r in reports], REPORT_COLUMNS, fmt, path)


def write_convergence(rows: Sequence[ConvergenceRow], fmt, path: PathLike) -> Path:
    return write_records([convergence_record(r) for r in rows], CONVERGENCE_COLUMNS, fmt, path)


def write_curves(gallery: pd.DataFrame, fmt, path: PathLike) -> Path:
    return write_records(gallery.to_dict("records"), CURVE_COLUMNS, fmt, path)


def read_report(path: PathLike, fmt=None) -> List[Dict]:
    """Parse a CSV or JSON table back into plain records"""
    path = Path(path)
    fmt = ReportFormat.from_path(path) if fmt is None else ReportFormat.parse(fmt)
    try:
        if fmt is ReportFormat.CSV:
            frame = pd.read_csv(path, float_precision="round_trip")
            return [{key: _plain(value) for key, value in row.items()}
                    for row in frame.to_dict("records")]
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as e:
        raise ReportIOError(f"cannot read report: {e.strerror or e}", path=path)
    except (ValueError, pd.errors.ParserError) as e:
        raise ReportIOError(f"malformed report: {e}", path=path)

    if not isinstance(payload, dict) or "records" not in payload:
        raise ReportIOError("malformed report: missing 'records'", path=path)
    return payload["records"]


def summary_line(report: ScenarioReport) -> str:
    """One human-readable line per scenario"""
    s = report.scenario
    gap = "n/a" if report.mean_abs_r_gap is None else f"{report.mean_abs_r_gap:.4f}"
    return (f"n={s.n} lambda={s.model.lam:.4g} fit=({s.fit_lambda_y:.4g},{s.fit_lambda_z:.4g}) "
            f"rho={s.model.rho:.3g} {s.estimator.value}: rate={report.rejection_rate:.4f} "
            f"(se {report.mc_stderr:.4f}, {report.completed}/{s.replications} ok, "
            f"|r gap| {gap}, {report.runtime_seconds:.1f}s)")
