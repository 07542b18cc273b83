"""Result serialization: solution/report JSON documents and CSV tables.

Every JSON document carries a format_version field.  CSV files have a header
row and a stable column order; numbers are written with full repr precision so
identical solves produce byte-identical files.  All writers go through an
atomic replace (write to a temporary file in the target directory, then
rename), so readers never observe partial files.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

from .fairsolver import FeasibilityReport, FlowSolution, SolveReport

FORMAT_VERSION = 1

_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write_text(path, text: str) -> None:
    """Writes text to path via a temporary file and an atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _float_list(arr) -> list:
    return [float(v) for v in np.asarray(arr).ravel()]


def solution_to_dict(sol: FlowSolution) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "allocations": _float_list(sol.allocations),
        "link_flows": _float_list(sol.link_flow),
        "route_flows": _float_list(sol.route_flow),
        "certificate": {
            "scores": _float_list(sol.certificate.scores),
            "scale": float(sol.certificate.scale),
            "shift": float(sol.certificate.shift),
            "violations": _float_list(sol.certificate.violations),
        },
    }


def feasibility_to_dict(feas: FeasibilityReport) -> dict:
    return {
        "balance_residual": feas.balance_residual,
        "vehicle_violation": feas.vehicle_violation,
        "scenario_violation": feas.scenario_violation,
        "floor_violation": feas.floor_violation,
        "certificate_order_violation": feas.certificate_order_violation,
        "conjugate_excess": feas.conjugate_excess,
        "nonneg_violation": feas.nonneg_violation,
        "rho_recomputed": feas.rho_recomputed,
        "rho_excess": feas.rho_excess,
        "flow_scale": feas.flow_scale,
        "max_relative_residual": feas.max_relative_residual(),
        "ok": feas.ok(),
    }


def report_to_dict(rep: SolveReport, run: dict | None = None) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "objective": rep.objective,
        "objective_kind": rep.objective_kind,
        "alpha": rep.alpha,
        "risk": {"kind": rep.risk_kind, "delta": rep.delta,
                 "epsilon": rep.epsilon},
        "iterations": rep.iterations,
        "final_gap": rep.final_gap,
        "gap_trace": [float(g) for g in rep.gap_trace],
        "objective_trace": [float(v) for v in rep.objective_trace],
        "wall_time_s": rep.wall_time_s,
        "rho": rep.rho,
        "metrics": rep.metrics,
        "allocations": _float_list(rep.allocations),
        "feasibility": feasibility_to_dict(rep.feasibility),
        "warnings": list(rep.warnings),
    }
    if run is not None:
        out["run"] = run
    return out


def _json_text(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_solution_json(path, sol: FlowSolution) -> None:
    atomic_write_text(path, _json_text(solution_to_dict(sol)))


def write_report_json(path, rep: SolveReport, run: dict | None = None) -> None:
    atomic_write_text(path, _json_text(report_to_dict(rep, run)))


def write_metrics_json(path, fair_metrics: dict, maxsum_metrics: dict) -> None:
    atomic_write_text(path, _json_text({
        "format_version": FORMAT_VERSION,
        "fair": fair_metrics,
        "maxsum": maxsum_metrics,
    }))


def _csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_communities_csv(path, allocations) -> None:
    rows = [[k + 1, float(x)] for k, x in enumerate(np.asarray(allocations))]
    atomic_write_text(path, _csv_text(["community", "allocation"], rows))


def write_links_csv(path, link_flow) -> None:
    rows = [[k + 1, float(y)] for k, y in enumerate(np.asarray(link_flow))]
    atomic_write_text(path, _csv_text(["link", "flow"], rows))


def write_compare_csv(path, fair_alloc, maxsum_alloc) -> None:
    fair = np.asarray(fair_alloc)
    base = np.asarray(maxsum_alloc)
    rows = [[k + 1, float(fair[k]), float(base[k])] for k in range(len(fair))]
    atomic_write_text(
        path,
        _csv_text(["community", "fair_allocation", "maxsum_allocation"], rows))


def write_sweep_csv(path, rows) -> None:
    """rows: iterable of (delta, community_id_1_based, allocation, tag)."""
    out = [[float(d), int(k), float(x), str(tag)] for d, k, x, tag in rows]
    atomic_write_text(
        path, _csv_text(["delta", "community", "allocation", "objective"], out))
