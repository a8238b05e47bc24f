"""File formats and report rendering.

Population CSV: header exactly `y,x,z`, then one row of three numbers
per unit. Parameter JSON: one flat object whose keys moments_from_params
understands. Reports: JSON with schema 1, keys sorted, floats rounded
to 12 significant digits, non-finite numbers rendered as null; byte
stability of a report given identical inputs is part of the contract.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict
from typing import Mapping

import numpy as np

from .analytics import VarianceReport
from .errors import HeaderMismatch, ParseError
from .montecarlo import EnumerationResult, SimulationResult
from .moments import MomentSet, PopulationFrame, moments_to_params
from .sampling import SampleStatistics, TwoPhaseSample

REPORT_SCHEMA = 1


def load_population_csv(path: str | os.PathLike) -> PopulationFrame:
    """Read a population file, reporting the line of the first problem."""
    ys: list[float] = []
    xs: list[float] = []
    zs: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch(f"{path}: empty file, expected header y,x,z") from None
        if [h.strip() for h in header] != ["y", "x", "z"]:
            raise HeaderMismatch(
                f"{path}:1: header must be exactly 'y,x,z', got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(
                    f"{path}:{lineno}: expected 3 comma-separated values, got {len(row)}"
                )
            try:
                values = [float(field) for field in row]
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: non-numeric value in {row!r}"
                ) from None
            ys.append(values[0])
            xs.append(values[1])
            zs.append(values[2])
    return PopulationFrame(
        y=np.asarray(ys), x=np.asarray(xs), z=np.asarray(zs)
    )


def load_params_json(path: str | os.PathLike) -> dict:
    """Read a flat parameter document; structural validation only.

    Semantic validation (key names, ranges, consistency) happens in
    moments_from_params so that library callers constructing dicts get
    the same checks.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    return doc


def save_params_json(doc: Mapping[str, object], path: str | os.PathLike) -> None:
    """Write a parameter document losslessly (full float precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _round_floats(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(format(obj, ".12g"))
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def render_report(doc: Mapping[str, object]) -> str:
    """Serialize a report: schema tag, sorted keys, 12 significant digits."""
    body = dict(doc)
    body["schema"] = REPORT_SCHEMA
    return json.dumps(_round_floats(body), indent=2, sort_keys=True) + "\n"


def _design_doc(design) -> dict:
    return {"N": design.N, "n1": design.n1, "n": design.n}


def moments_doc(m: MomentSet) -> dict:
    doc = {"kind": "moments"}
    doc.update(moments_to_params(m))
    doc["notes"] = list(m.notes)
    return doc


def efficiency_doc(report: VarianceReport, source: str | None = None) -> dict:
    inputs: dict[str, object] = {"n": report.n, "n1": report.n1}
    if source is not None:
        inputs["source"] = source
    doc: dict[str, object] = {
        "kind": "efficiency",
        "inputs": inputs,
        "var_r": report.var_r,
        "var_hd_min": report.var_hd_min,
        "var_td_min": report.var_td_min,
        "gap": report.gap,
        "pre_hd": report.pre_hd,
        "pre_td": report.pre_td,
        "notes": list(report.interpretation_notes),
    }
    if report.published is not None:
        doc["published"] = dict(report.published)
    return doc


def statistics_doc(stats: SampleStatistics) -> dict:
    doc = asdict(stats)
    doc.pop("delta_hat")
    doc["aux"] = {"zbar": stats.aux.zbar, "sz2": stats.aux.sz2}
    return doc


def estimate_doc(
    sample: TwoPhaseSample,
    stats: SampleStatistics,
    estimates: Mapping[str, float],
    errors: Mapping[str, str],
    clamp: bool,
    clamped_labels: list[str],
) -> dict:
    return {
        "kind": "estimate",
        "design": _design_doc(sample.design),
        "seed": sample.seed,
        "rep": sample.rep,
        "statistics": statistics_doc(stats),
        "estimates": dict(estimates),
        "errors": dict(errors),
        "clamp": bool(clamp),
        "clamped": list(clamped_labels),
    }


def simulation_doc(result: SimulationResult) -> dict:
    return {
        "kind": "simulate",
        "design": _design_doc(result.design),
        "estimator": result.estimator,
        "seed": result.seed,
        "rho_yx": result.rho_yx,
        "reps_requested": result.reps_requested,
        "reps_used": result.reps_used,
        "reps_skipped": result.reps_skipped,
        "skip_reasons": dict(result.skip_reasons),
        "mean_estimate": result.mean_estimate,
        "bias": result.bias,
        "empirical_mse": result.empirical_mse,
        "mc_se_mean": result.mc_se_mean,
        "mc_se_mse": result.mc_se_mse,
        "analytic_variance": result.analytic_variance,
    }


def enumeration_doc(result: EnumerationResult) -> dict:
    return {
        "kind": "enumerate",
        "design": _design_doc(result.design),
        "estimator": result.estimator,
        "rho_yx": result.rho_yx,
        "pairs_total": result.pairs_total,
        "pairs_used": result.pairs_used,
        "pairs_skipped": result.pairs_skipped,
        "skip_reasons": dict(result.skip_reasons),
        "mean_estimate": result.mean_estimate,
        "bias": result.bias,
        "exact_mse": result.exact_mse,
    }
