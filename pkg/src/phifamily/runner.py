"""Experiment dispatch and CSV output for the command-line tool."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy

from . import __version__
from .config import ExperimentConfig, echo
from .delta2 import construct_exclusion_center, construct_non_delta2_center, delta2_probe
from .family import (boundary_witness, chart_map, inverse_psi, make_chart, normalize_psi,
                     project_to_B, psi_sweep)
from .measure import GridMeasure, ScalarField, integrate, make_uniform_grid
from .morlicz import classify_membership, luxemburg_norm, mo_from_phi, orlicz_norm, power_mo
from .phifunc import PhiFunction, center_from_density, make_exponential, make_kappa_exponential

log = logging.getLogger("phifamily")

VERDICTS = frozenset({
    "Finite", "Divergent", "Inconclusive", "Satisfied", "Violated", "ConvergentPsi",
    "DerivativeBlowup", "E_space", "L_class_only", "L_space_only", "Outside", "Unknown",
    "pass", "fail", "",
})

_T, _S = sympy.symbols("t s", real=True)


class ExpressionError(ValueError):
    pass


@dataclass
class ResultTable:
    headers: list[str]
    rows: list[list] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)
    ok: bool = True

    def add(self, *row):
        if len(row) != len(self.headers):
            raise ValueError(f"row has {len(row)} cells for {len(self.headers)} columns")
        for cell, name in zip(row, self.headers):
            if name == "verdict" and cell not in VERDICTS:
                raise ValueError(f"unknown verdict {cell!r}")
        self.rows.append(list(row))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.12g" % x
    if x is None:
        return ""
    return str(x)


def render_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    for key, value in table.metadata.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.headers)
    for row in table.rows:
        writer.writerow([_fmt(c) for c in row])
    return buf.getvalue()


def emit_csv(table: ResultTable, path: str | Path) -> None:
    """Write the table; raises ``OSError`` when the path is not writable."""
    Path(path).write_text(render_csv(table))


# --------------------------------------------------------------------------- expressions

def _parse(text: str) -> sympy.Expr:
    try:
        expr = sympy.sympify(text, locals={"t": _T, "s": _S})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc}") from exc
    extra = expr.free_symbols - {_T, _S}
    if extra:
        raise ExpressionError(f"expression {text!r} uses unknown symbols {sorted(map(str, extra))}")
    return expr


def _lambdify(expr, args):
    fn = sympy.lambdify(args, expr, "numpy")

    def call(*vals):
        with np.errstate(all="ignore"):
            out = fn(*vals)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(vals[0])).copy()
    return call


def field_from_expression(grid: GridMeasure, text: str) -> ScalarField:
    """A field in ``t`` and ``s = -log(t - a)``, re-evaluable on any grid.

    On grids singular at the left end, logarithms of ``t - a`` are rewritten
    in terms of ``s`` so they stay finite where ``t - a`` underflows.
    """
    expr = _parse(text)
    if grid.singular_ends[0]:
        a = grid.interval[0]
        expr = sympy.expand_log(expr.subs(_T, a + sympy.exp(-_S)), force=True)
    fn = _lambdify(expr, (_T, _S))
    return ScalarField.from_rule(grid, lambda c: fn(np.asarray(c.t), -np.asarray(c.log_left)), text)


def log_field_from_expression(grid: GridMeasure, text: str) -> ScalarField:
    """A positive field given by ``text``, held in log scale.

    The logarithm is simplified symbolically in terms of ``s`` so that
    expressions like ``1/t`` stay finite at nodes where ``t`` underflows.
    """
    a = grid.interval[0]
    expr = _parse(text).subs(_T, a + sympy.exp(-_S))
    log_expr = sympy.expand_log(sympy.log(expr), force=True)
    log_expr = sympy.simplify(log_expr)
    fn = _lambdify(log_expr, (_S,))
    return ScalarField.from_rule(grid, lambda c: fn(-np.asarray(c.log_left)), f"log({text})",
                                 log_scale=True)


# --------------------------------------------------------------------------- building blocks

def build_phi(cfg: ExperimentConfig) -> PhiFunction:
    if cfg.phi.kind == "kappa":
        return make_kappa_exponential(cfg.phi.kappa)
    return make_exponential()


def build_grid(cfg: ExperimentConfig) -> GridMeasure:
    return make_uniform_grid(cfg.grid.n, tuple(cfg.grid.interval), cfg.grid.grading)


def build_center(cfg: ExperimentConfig, phi: PhiFunction, grid: GridMeasure) -> ScalarField:
    spec = cfg.center
    a, b = grid.interval
    if spec.kind == "uniform":
        level = -math.log(b - a)
        return ScalarField.from_rule(
            grid, lambda c: phi.invert_log(c.t, np.full(np.shape(c.t), level)), "uniform center")
    if spec.kind == "density":
        return center_from_density(phi, log_field_from_expression(grid, spec.expression))
    data = np.loadtxt(spec.path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ExpressionError("center file must have two columns: t, c")
    order = np.argsort(data[:, 0])
    ts, cs = data[order, 0], data[order, 1]
    return ScalarField.from_rule(grid, lambda c: np.interp(c.t, ts, cs), f"file:{spec.path}")


def _chart(cfg: ExperimentConfig):
    phi = build_phi(cfg)
    grid = build_grid(cfg)
    return make_chart(phi, build_center(cfg, phi, grid))


def _metadata(cfg: ExperimentConfig, experiment: str) -> dict[str, str]:
    return {"library": f"phifamily {__version__}", "experiment": experiment, "config": echo(cfg)}


# --------------------------------------------------------------------------- experiments

def run_norm(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.norm
    phi = build_phi(cfg)
    grid = build_grid(cfg)
    if p.mo.kind == "power":
        Phi = power_mo(p.mo.p, p.mo.bound)
    else:
        Phi = mo_from_phi(phi, build_center(cfg, phi, grid))
    table = ResultTable(["field", "luxemburg", "orlicz", "ratio", "verdict"],
                        metadata=_metadata(cfg, "norm"))
    for text in p.fields:
        u = field_from_expression(grid, text)
        member = classify_membership(Phi, u)
        lux = luxemburg_norm(Phi, u, p.tol)
        orl = orlicz_norm(Phi, u, p.tol)
        ratio = orl / lux if lux > 0 else math.nan
        log.info("norm %s: luxemburg=%.12g orlicz=%.12g", text, lux, orl)
        table.add(text, lux, orl, ratio, member.value)
    table.metadata["mo"] = Phi.name
    return table


def run_psi_sweep(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.psi_sweep
    ch = _chart(cfg)
    if p.witness is not None:
        u = boundary_witness(ch, "WStar" if p.witness == "wstar" else "WSubStar")
    else:
        u = project_to_B(ch, field_from_expression(ch.grid, p.field))
    res = psi_sweep(ch, u, p.schedule, p.blowup_factor)
    table = ResultTable(["lambda", "psi", "dpsi"], metadata=_metadata(cfg, "psi-sweep"))
    for i, (lam, psi) in enumerate(zip(res.lambdas, res.psi_values)):
        table.add(lam, psi, res.right_derivs[i] if i < len(res.right_derivs) else None)
    table.metadata["direction"] = u.tag or ""
    table.metadata["verdict"] = res.verdict.value
    if res.alpha is not None:
        table.metadata["alpha"] = _fmt(res.alpha)
    table.metadata["truncated"] = _fmt(res.truncated)
    if res.error:
        table.metadata["error"] = res.error
        table.ok = False
    return table


def run_delta2_probe(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.delta2_probe
    phi = build_phi(cfg)
    grid = build_grid(cfg)
    if p.mo.kind == "power":
        Phi = power_mo(p.mo.p, p.mo.bound)
    else:
        Phi = mo_from_phi(phi, build_center(cfg, phi, grid))
    idx = np.unique(np.linspace(0, grid.n - 1, min(p.t_samples, grid.n)).astype(int))
    rep = delta2_probe(Phi, grid.t[idx], p.u_range, p.points, p.slope_tol)
    table = ResultTable(["u", "ratio", "log_ratio"], metadata=_metadata(cfg, "delta2-probe"))
    for (u, ratio), lr in zip(rep.ratio_curve, rep.log_ratio):
        table.add(u, ratio, float(lr))
    table.metadata["mo"] = Phi.name
    table.metadata["verdict"] = rep.classification.value
    table.metadata["tail_slope"] = _fmt(rep.tail_slope)
    if rep.constant_K is not None:
        table.metadata["K"] = _fmt(rep.constant_K)
    return table


def run_counterexample(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.counterexample
    phi = build_phi(cfg)
    grid = build_grid(cfg)
    table = ResultTable(["quantity", "value", "verdict"], metadata=_metadata(cfg, "counterexample"))
    if p.kind == "non-delta2":
        f = log_field_from_expression(grid, p.f)
        res = construct_non_delta2_center(phi, grid, p.A, p.B, f,
                                          build_center(cfg, phi, grid))
        table.add("beta", res.beta, "")
        for name, v in (("mass_c", res.mass), ("mass_c_plus_u", res.mass_at_one),
                        ("mass_c_plus_2u", res.mass_at_two)):
            table.add(name, v.value, v.kind.value)
        table.metadata["verdict"] = "pass" if res.certified else "fail"
        table.ok = res.certified
        return table
    base = build_center(cfg, phi, grid)
    witness = field_from_expression(grid, p.witness)
    res = construct_exclusion_center(phi, base, witness, p.n0)
    table.add("boundary", res.boundary, "")
    table.add("tail_mass", res.tail_mass, "")
    table.add("level", res.level, "")
    table.add("mass_c", res.mass.value, res.mass.kind.value)
    table.add("included", float(res.included), "fail" if res.included else "pass")
    table.metadata["verdict"] = "fail" if res.included else "pass"
    table.ok = not res.included
    return table


def run_chart_roundtrip(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.chart_roundtrip
    ch = _chart(cfg)
    table = ResultTable(["field", "psi", "mass", "psi_hat", "max_error", "verdict"],
                        metadata=_metadata(cfg, "chart-roundtrip"))
    for text in p.fields:
        u = project_to_B(ch, field_from_expression(ch.grid, text))
        psi = normalize_psi(ch, u)
        q = chart_map(ch, u)
        mass = integrate(q)
        back, psi_hat = inverse_psi(ch, q)
        err = float(np.max(np.abs(back.data - u.data)))
        good = err <= p.tol and mass.is_finite and abs(mass.value - 1.0) <= p.tol
        table.add(text, psi, mass.value, psi_hat, err, "pass" if good else "fail")
        table.ok &= good
    table.metadata["verdict"] = "pass" if table.ok else "fail"
    return table


RUNNERS = {
    "norm": run_norm,
    "psi-sweep": run_psi_sweep,
    "delta2-probe": run_delta2_probe,
    "counterexample": run_counterexample,
    "chart-roundtrip": run_chart_roundtrip,
}


def run(cfg: ExperimentConfig, experiment: str) -> ResultTable:
    if cfg.experiment is not None and cfg.experiment != experiment:
        raise ValueError(f"config is for {cfg.experiment!r}, not {experiment!r}")
    return RUNNERS[experiment](cfg)
