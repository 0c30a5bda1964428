"""Scenario runner: computes every artifact of one configured quench."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .criticality import (
    critical_points,
    detect_cusps,
    fisher_zeros,
    orthogonality_vectors,
    q_factor,
    _branch_data,
)
from .errors import PreconditionError
from .loschmidt import QuenchScenario, echo_series, rate_function
from .nhband import near_ep
from .topology import chiral_quench_flow, is_chiral_quench, winding_report

HEADERS = {
    "rate_function.csv": ["t", "lambda"],
    "fisher_zeros.csv": ["n", "k", "re_z", "im_z"],
    "critical_points.csv": ["n", "k_c", "t_c"],
    "vector_flow.csv": ["k", "re_pre", "im_pre", "re_post", "im_post", "dot"],
    "orthogonality_flow.csv": ["n", "k", "vs_x", "vs_y", "vh_x", "vh_y", "dot"],
}


def check_preconditions(scenario: QuenchScenario):
    """Raise PreconditionError listing grid momenta at exceptional points."""
    k = scenario.k_grid.points()
    bad0 = near_ep(scenario.h0_model(k))
    bad1 = near_ep(scenario.h1_model(k))
    if np.any(bad0):
        ks = ", ".join(repr(float(x)) for x in k[bad0])
        raise PreconditionError(f"exceptional point of the prequench model at k = {ks}", k=float(k[bad0][0]))
    if np.any(bad1):
        ks = ", ".join(repr(float(x)) for x in k[bad1])
        raise PreconditionError(f"postquench model is gapless or exceptional at k = {ks}", k=float(k[bad1][0]))


def excluded_momenta(scenario: QuenchScenario) -> np.ndarray:
    """Grid momenta dropped from the criticality analysis (atanh poles)."""
    k = scenario.k_grid.points()
    _, _, c = _branch_data(scenario, k)
    return k[~np.isfinite(q_factor(c))]


def _clean(x):
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def _num(x) -> str:
    return repr(float(x))


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def compute(config: ScenarioConfig, threads: int = 1) -> RunResult:
    """All tables and the summary for ``config`` without touching the disk."""
    scenario = config.scenario()
    check_preconditions(scenario)
    analysis = config.analysis
    n_max = analysis.nMax
    t_grid = scenario.t_grid
    formulation = scenario.formulation

    series = echo_series(scenario, analysis.normalization, threads=threads)
    rate = rate_function(series)
    cusps = detect_cusps(rate, series.t, analysis.cuspThreshold)
    points = critical_points(scenario, n_max, t_max=t_grid.t_max)
    crossings = [p for p in points if not p.grazing]
    grazing = [p for p in points if p.grazing]

    tables = {}
    tables["rate_function.csv"] = [[_num(t), _num(v)] for t, v in zip(series.t, rate)]

    k = scenario.k_grid.points()
    _, e1, c = _branch_data(scenario, k)
    zeros = fisher_zeros(e1, c, n_max)
    rows = []
    for n in range(n_max):
        for kk, z in zip(k, zeros[n]):
            if np.isfinite(z):
                rows.append((n, float(kk), z))
    for p in crossings:
        for n, _ in p.times:
            rows.append((n, p.k, p.zero(n)))
    rows.sort(key=lambda r: (r[0], r[1]))
    tables["fisher_zeros.csv"] = [[str(n), _num(kk), _num(z.real), _num(z.imag)] for n, kk, z in rows]

    crit_rows = []
    for p in crossings:
        for n, tc in p.times:
            if tc <= t_grid.t_max:
                crit_rows.append((n, p.k, tc))
    crit_rows.sort()
    tables["critical_points.csv"] = [[str(n), _num(kk), _num(tc)] for n, kk, tc in crit_rows]

    chiral = is_chiral_quench(scenario)
    vector_rows = []
    if chiral:
        flow = chiral_quench_flow(scenario.h0_model, scenario.h1_model, k)
        for j in range(k.size):
            vector_rows.append([_num(k[j]), _num(flow.pre[0, j]), _num(flow.pre[1, j]),
                                _num(flow.post[0, j]), _num(flow.post[1, j]), _num(flow.dot[j])])
    tables["vector_flow.csv"] = vector_rows

    ortho_rows = []
    for n in range(n_max):
        vs, vh, dot = orthogonality_vectors(e1, c, n, formulation)
        for j in range(k.size):
            if np.isfinite(dot[j]):
                ortho_rows.append([str(n), _num(k[j]), _num(vs[0, j]), _num(vs[1, j]),
                                   _num(vh[0, j]), _num(vh[1, j]), _num(dot[j])])
    tables["orthogonality_flow.csv"] = ortho_rows

    report = winding_report(scenario, 0)
    window = 2 * t_grid.step
    critical_times = [tc for _, _, tc in crit_rows]
    cusp_rows = []
    for t, jump in cusps:
        near = [tc for tc in critical_times if abs(tc - t) <= window]
        cusp_rows.append({"t": t, "jump": jump, "t_c": min(near, key=lambda tc: abs(tc - t)) if near else None})
    matched = []
    for n, kk, tc in crit_rows:
        near = [t for t, _ in cusps if abs(tc - t) <= window]
        matched.append({"n": n, "k_c": kk, "t_c": tc, "cusp_t": min(near, key=lambda t: abs(tc - t)) if near else None})

    summary = {
        "version": __version__,
        "config": json.loads(config.model_dump_json()),
        "nu0": report.nu0,
        "nu1": report.nu1,
        "delta_nu": report.delta_nu,
        "wS": _clean(report.w_s),
        "wH": _clean(report.w_h),
        "delta_w": _clean(report.delta_w),
        "sufficient_dqpt": report.sufficient_dqpt,
        "chiral_quench": chiral,
        "critical_momenta": [p.k for p in crossings],
        "grazing_momenta": [p.k for p in grazing],
        "critical_times": [
            {"n": n, "k_c": p.k, "t_c": tc} for p in crossings for n, tc in p.times if n < n_max
        ],
        "critical_points_in_window": matched,
        "first_cusp": cusps[0][0] if cusps else None,
        "cusps": cusp_rows,
        "excluded": {
            "k_points": series.excluded_k_count,
            "cells": series.excluded_cells,
            "clamped_cells": series.clamped_cells,
            "criticality_k_points": int(excluded_momenta(scenario).size),
        },
    }
    return RunResult(tables=tables, summary=summary)


def write(result: RunResult, directory, formats=("csv", "json")) -> list:
    """Write tables and summary; on failure everything written is removed."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        if "csv" in formats:
            for name, header in HEADERS.items():
                path = directory / name
                with open(path, "w", newline="") as fh:
                    written.append(path)
                    writer = csv.writer(fh, lineterminator="\n")
                    writer.writerow(header)
                    writer.writerows(result.tables[name])
        if "json" in formats:
            path = directory / "summary.json"
            written.append(path)
            path.write_text(json.dumps(result.summary, indent=2, sort_keys=True, allow_nan=False) + "\n")
    except BaseException:
        for path in written:
            if path.exists():
                os.remove(path)
        raise
    return written
