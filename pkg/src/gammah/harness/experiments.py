"""Named, configuration-driven reproductions of the numerical experiments.

Each experiment returns an ``ExperimentResult`` holding the computed rows,
the reported reference values where they exist, per-row deviations and
the outcome of every acceptance rule. ``run_experiment`` also writes
``<id>.csv``, ``<id>_plot.dat`` and ``<id>_report.txt``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.stats import linregress

from gammah.adaptive import adaptive_refine
from gammah.assembly import ProblemSpec, build_pencil
from gammah.chains import chain_report
from gammah.diagnostics import (indicators, numrange_distance, spectral_gap)
from gammah.errors import InvalidArgumentError
from gammah.harness.config import ExperimentConfig
from gammah.linalg import (SolverConfig, dense_svd_oracle, generalized_eigs_smallest,
                           numerical_rank, smallest_singular_pencil, symmetrized_dense)
from gammah.mesh import lshape_mesh, structured_square_mesh, uniform_mesh_1d
from gammah.util import csv_line, fmt

BOUND_SLACK = 1e-10
HERMITIAN_GAP_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Result container
# ---------------------------------------------------------------------------

@dataclass
class RuleOutcome:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    experiment_id: str
    columns: list
    rows: list
    rules: list = field(default_factory=list)
    runtime: float = 0.0
    notes: list = field(default_factory=list)
    plot_x: str = "h"
    plot_series: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rules)

    def rule(self, name: str) -> RuleOutcome:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def column(self, name: str, **where):
        return [row[name] for row in self.rows
                if all(row.get(k) == v for k, v in where.items())]

    def csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(csv_line([row.get(c) for c in self.columns]))
        return "\n".join(lines) + "\n"

    def plot_text(self) -> str:
        lines = []
        for name, pts in self.plot_series.items():
            lines.append(f"# series {name}")
            lines.append(f"# {self.plot_x} value")
            lines.extend(f"{fmt(x)} {fmt(y)}" for x, y in pts)
            lines.append("")
            lines.append("")
        return "\n".join(lines)

    def report_text(self, runtime: bool = True) -> str:
        """Pass/fail summary; the runtime line is left out when ``runtime`` is false."""
        out = [f"experiment {self.experiment_id}", f"rows {len(self.rows)}"]
        if runtime:
            out.append(f"runtime_seconds {self.runtime:.3f}")
        out.append("")
        for r in self.rules:
            out.append(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
        if self.notes:
            out.append("")
            out.extend(f"note: {n}" for n in self.notes)
        out.append("")
        out.append(f"overall {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(out) + "\n"


def fit_loglog_slope(pairs):
    """Least-squares line through ``(log h, log value)``; returns ``(slope, intercept, r2)``."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise InvalidArgumentError("need at least 3 (h, value) pairs")
    h = np.array([p[0] for p in pairs], dtype=float)
    v = np.array([p[1] for p in pairs], dtype=float)
    if np.any(h <= 0) or np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise InvalidArgumentError("h and values must be positive and finite")
    fit = linregress(np.log(h), np.log(v))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)


def aitken_limit(values):
    """Delta-squared extrapolation from the last three terms of a sequence."""
    g1, g2, g3 = (float(x) for x in values[-3:])
    d1, d2 = g2 - g1, g3 - g2
    if d2 - d1 == 0:
        return g3
    return g3 - d2 * d2 / (d2 - d1)


def _rel(value, ref):
    if ref is None or value is None:
        return None
    return (value - ref) / abs(ref)


def _cells(h) -> int:
    n = int(round(1.0 / h))
    if abs(n * h - 1.0) > 1e-9:
        raise InvalidArgumentError(f"1/h must be an integer, got h = {h}")
    return n


def _h_list(cfg, default):
    return list(cfg.get("mesh", "h", default))


def _exp2(k):
    return 2.0 ** k


def _lam(cfg, default):
    lam = cfg.lam
    return default if lam is None else lam


def _gamma_row(pencil, m, solver):
    r = smallest_singular_pencil(pencil.A, pencil.M, pencil.lam, m, solver, ops=pencil.ops)
    return float(r.gamma), bool(r.converged)


def _bound_rule(rows, name="bound-chain"):
    worst = max(r["numrange_dist"] - r["gamma_h"] for r in rows)
    return RuleOutcome(name, worst <= BOUND_SLACK,
                       f"max(numrange_dist - gamma_h) = {worst:.3e} (allowed {BOUND_SLACK:g})")


def _hermitian_gap_defect(g, gap):
    return abs(g - gap) / max(1.0, gap)


def _max_variation(vals):
    vals = np.asarray(vals, dtype=float)
    return float((vals.max() - vals.min()) / vals.max())


# ---------------------------------------------------------------------------
# Reported reference values (keyed by log2 h unless stated)
# ---------------------------------------------------------------------------

REPORTED_UPWIND_POWERS = {
    -4: (16.00, 2.29, 0.23),
    -5: (32.00, 1.15, 0.06),
    -6: (64.00, 0.57, 0.01),
    -7: (128.00, 0.29, None),  # reported as "< 1e-3"
}
REPORTED_SUPG_CENTRAL = {1e-3: (0.12, 0.10), 1e-4: (0.04, 0.03), 1e-5: (None, None)}
REPORTED_SUPG_STAB = {1e-3: (8.0, 7.8), 1e-5: (7.9, 7.7), 1e-8: (7.8, 7.6)}
REPORTED_LAPLACIAN = {
    -4: (10.12, 40.48, 14.88),
    -5: (9.94, 39.77, 14.94),
    -6: (9.89, 39.56, 15.06),
    -7: (9.88, 39.51, 15.12),
    -8: (9.87, 39.49, 15.13),
}
REPORTED_CD = {-4: (6.8, 6.5), -5: (7.4, 7.1), -6: (8.0, 7.8), -7: (8.4, 8.1), -8: (8.7, 8.5)}
REPORTED_INDICATORS = {"gamma_h": 8.0, "numrange_dist": 7.8, "cond": 1.2e3, "pseudo_radius": 12.4}
REPORTED_SQUARE = {20: 35.2, 40: 35.9, 80: 36.1}
REPORTED_LSHAPE = {-5: 2.31, -6: 2.45, -7: 2.52, -8: 2.56, -9: 2.58}
REPORTED_LSHAPE_LIMIT = 2.60
REPORTED_ASCENT = {-5: (2.41, 30, 2), -6: (2.44, 62, 2), -7: (2.46, 126, 2),
                   -8: (2.47, 254, 2), -9: (2.48, 510, 2)}
REPORTED_LOCAL_GAMMA = {"corner": 2.31, "interior": 2.56}


def _log2(h):
    return int(round(np.log2(h)))


# ---------------------------------------------------------------------------
# Model pencils
# ---------------------------------------------------------------------------

def laplacian_pencil(h, lam=25.0, mass="consistent"):
    spec = ProblemSpec("schrodinger_1d", epsilon=1.0)
    return build_pencil(spec, uniform_mesh_1d(_cells(h)), lam, mass=mass)


def cd_pencil(h, eps=0.02, beta=8.0, lam=-1.0, supg_delta=0.0):
    spec = ProblemSpec("convection_diffusion_1d", epsilon=eps, beta=beta, supg_delta=supg_delta)
    return build_pencil(spec, uniform_mesh_1d(_cells(h)), lam)


def transport_pencil(h, scheme, weighting, lam=0.0):
    spec = ProblemSpec("transport_fd", epsilon=0.0, fd_scheme=scheme)
    return build_pencil(spec, _cells(h), lam, weighting=weighting)


def mixed_laplacian_pencil(h, lam=0.0):
    spec = ProblemSpec("schrodinger_1d", epsilon=1.0, bc="mixed_left_dirichlet_right_neumann")
    return build_pencil(spec, uniform_mesh_1d(_cells(h)), lam)


def square_pencil(n, potential=25.0, lam=-1.0):
    spec = ProblemSpec("laplace_potential_2d", epsilon=1.0, potential=potential)
    return build_pencil(spec, structured_square_mesh(n), lam)


def lshape_pencil(n, lam=-1.0):
    spec = ProblemSpec("laplace_potential_2d", epsilon=1.0)
    return build_pencil(spec, lshape_mesh(n), lam)


def laplacian_dispersion(h, k):
    """Exact eigenvalues of the consistent-mass P1 Laplacian on (0, 1)."""
    c = np.cos(k * np.pi * h)
    return 6.0 / h ** 2 * (1.0 - c) / (2.0 + c)


def dense_operator(pencil):
    """``M^{-1}(A - lam M)`` as a dense array."""
    M = pencil.M.toarray()
    S = pencil.shifted.toarray()
    return sla.solve(M, S, assume_a="pos")


def ascent_verdict(S, m_max=4):
    """Smallest ``m >= 1`` with ``Ran S^m`` meeting ``ker S`` trivially, or ``"unresolved"``."""
    rep = chain_report(S, m_max)
    if not rep.resolved:
        return "unresolved", rep
    for m in range(1, m_max + 1):
        if rep.kt_intersection_trivial[m]:
            return str(m), rep
    return "unresolved", rep


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def exp_upwind_powers(cfg: ExperimentConfig) -> ExperimentResult:
    hs = _h_list(cfg, [_exp2(k) for k in range(-4, -8, -1)])
    powers = cfg.get("scheme", "powers", [1, 2, 3])
    lam = _lam(cfg, 0.0)
    solver = cfg.solver
    weightings = [cfg.get("scheme", "weighting")] if cfg.get("scheme", "weighting") else ["mass", "identity"]
    rows = []
    for w in weightings:
        for h in hs:
            p = transport_pencil(h, "upwind", w, lam)
            ref = REPORTED_UPWIND_POWERS.get(_log2(h))
            for m in powers:
                g, conv = _gamma_row(p, m, solver)
                r = ref[m - 1] if ref is not None and m <= 3 else None
                rows.append({"weighting": w, "h": h, "m": m, "gamma": g, "converged": conv,
                             "reported_gamma": r, "rel_dev": _rel(g, r)})
    res = ExperimentResult("tab1-upwind-powers",
                           ["weighting", "h", "m", "gamma", "converged", "reported_gamma", "rel_dev"],
                           rows)
    ok_any = False
    lower_any = False
    for w in weightings:
        slopes = {}
        for m in powers:
            pts = [(r["h"], r["gamma"]) for r in rows if r["weighting"] == w and r["m"] == m]
            res.plot_series[f"{w}_m{m}"] = pts
            if len(pts) >= 3 and all(v > 0 for _, v in pts):
                slopes[m] = fit_loglog_slope(pts)
                res.notes.append(f"{w} weighting m={m}: slope {slopes[m][0]:.4f}, "
                                 f"intercept {slopes[m][1]:.4f}, r2 {slopes[m][2]:.4f}")
        if 2 in slopes and 3 in slopes:
            ok_any |= abs(slopes[2][0] - 1) <= 0.35 and abs(slopes[3][0] - 2) <= 0.35
        if 1 in slopes:
            lower_any |= slopes[1][0] <= 0.35
    if len(weightings) == 2:
        for m in powers:
            a = [r["gamma"] for r in rows if r["weighting"] == "mass" and r["m"] == m]
            b = [r["gamma"] for r in rows if r["weighting"] == "identity" and r["m"] == m]
            ratio = [x / y for x, y in zip(a, b) if y > 0]
            res.notes.append(f"m={m} mass/identity ratio per h: "
                             + ", ".join(f"{x:.4g}" for x in ratio))
    res.notes.append("reported gamma(A^3) at h=2^-7 is an upper bound (< 1e-3); no deviation given")
    res.rules.append(RuleOutcome("power-decay-slopes", ok_any,
                                 "slopes m=2 -> +1 and m=3 -> +2 within 0.35 under some weighting"))
    res.rules.append(RuleOutcome("first-power-bounded-below", lower_any,
                                 "gamma(A) does not decay with h (slope <= 0.35) under some weighting"))
    return res


def exp_supg(cfg: ExperimentConfig) -> ExperimentResult:
    h = _h_list(cfg, [_exp2(-6)])[0]
    beta = cfg.get("problem", "beta", [8.0])[0]
    lam = _lam(cfg, -1.0)
    delta = cfg.get("problem", "supg_delta", 0.5)
    solver = cfg.solver
    n_angles = cfg.get("scheme", "n_angles", 64)
    rows = []
    for scheme, table in (("central", REPORTED_SUPG_CENTRAL), ("supg", REPORTED_SUPG_STAB)):
        for eps in sorted(table, reverse=True):
            p = cd_pencil(h, eps, beta, lam, supg_delta=delta if scheme == "supg" else 0.0)
            g, conv = _gamma_row(p, 1, solver)
            nr = numrange_distance(p, n_angles, solver)
            rg, rn = table[eps]
            rows.append({"scheme": scheme, "epsilon": eps, "h": h, "gamma_h": g,
                         "numrange_dist": nr, "converged": conv, "reported_gamma": rg,
                         "reported_numrange": rn, "rel_dev_gamma": _rel(g, rg),
                         "rel_dev_numrange": _rel(nr, rn)})
    res = ExperimentResult("tab2-supg", ["scheme", "epsilon", "h", "gamma_h", "numrange_dist",
                                         "converged", "reported_gamma", "reported_numrange",
                                         "rel_dev_gamma", "rel_dev_numrange"], rows, plot_x="epsilon")
    for s in ("central", "supg"):
        res.plot_series[s] = [(r["epsilon"], r["gamma_h"]) for r in rows if r["scheme"] == s]
    stab = [r["gamma_h"] for r in rows if r["scheme"] == "supg"]
    var = _max_variation(stab)
    res.rules.append(RuleOutcome("supg-uniform-in-epsilon", var < 0.10,
                                 f"relative variation {var:.4f} (< 0.10)"))
    g_c = [r["gamma_h"] for r in rows if r["scheme"] == "central" and r["epsilon"] == 1e-5]
    g_s = [r["gamma_h"] for r in rows if r["scheme"] == "supg" and r["epsilon"] == 1e-5]
    if g_c and g_s:
        ratio = g_s[0] / g_c[0] if g_c[0] > 0 else np.inf
        res.rules.append(RuleOutcome("supg-over-central", ratio >= 20,
                                     f"gamma_supg / gamma_central at eps=1e-5 = {ratio:.4f} (>= 20)"))
    res.rules.append(_bound_rule(rows))
    res.notes.append(f"streamline parameter delta_K = {delta} * h / |beta|")
    res.notes.append("reported central values at eps=1e-5 are upper bounds (< 1e-3)")
    return res


def exp_laplacian(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    hs = _h_list(cfg, [_exp2(k) for k in range(-4, -9, -1)])
    lam = _lam(cfg, 25.0)
    solver = cfg.solver
    limit = min(abs(lam.real - np.pi ** 2), abs(4 * np.pi ** 2 - lam.real)) if lam.imag == 0 else None
    rows = []
    for h in hs:
        p = laplacian_pencil(h, lam)
        g, conv = _gamma_row(p, 1, solver)
        gap = spectral_gap(p, solver)
        z = generalized_eigs_smallest(p.A, p.M, 2, solver).values
        pl = laplacian_pencil(h, lam, mass="lumped")
        zl = generalized_eigs_smallest(pl.A, pl.M, 2, solver).values
        gl, _ = _gamma_row(pl, 1, solver)
        ref = REPORTED_LAPLACIAN.get(_log2(h), (None, None, None))
        rows.append({"h": h, "n": p.n, "zeta1": float(z[0]), "zeta2": float(z[1]),
                     "zeta1_exact": laplacian_dispersion(h, 1), "zeta2_exact": laplacian_dispersion(h, 2),
                     "gamma_h": g, "spectral_gap": gap, "converged": conv,
                     "zeta1_lumped": float(zl[0]), "zeta2_lumped": float(zl[1]), "gamma_lumped": gl,
                     "reported_zeta1": ref[0], "reported_zeta2": ref[1], "reported_gamma": ref[2],
                     "rel_dev_zeta1": _rel(float(z[0]), ref[0]),
                     "rel_dev_zeta2": _rel(float(z[1]), ref[1]),
                     "rel_dev_gamma": _rel(g, ref[2])})
    elapsed = time.perf_counter() - t0
    cols = ["h", "n", "zeta1", "zeta2", "zeta1_exact", "zeta2_exact", "gamma_h", "spectral_gap",
            "converged", "zeta1_lumped", "zeta2_lumped", "gamma_lumped", "reported_zeta1",
            "reported_zeta2", "reported_gamma", "rel_dev_zeta1", "rel_dev_zeta2", "rel_dev_gamma"]
    res = ExperimentResult("tab3-laplacian", cols, rows)
    res.plot_series["gamma_h"] = [(r["h"], r["gamma_h"]) for r in rows]
    res.plot_series["zeta1"] = [(r["h"], r["zeta1"]) for r in rows]
    res.plot_series["zeta2"] = [(r["h"], r["zeta2"]) for r in rows]
    g = [r["gamma_h"] for r in rows]
    if limit is not None:
        err = [abs(x - limit) for x in g]
        mono = all(err[i + 1] < err[i] for i in range(len(err) - 1))
        res.rules.append(RuleOutcome("gamma-approaches-gap-limit", mono,
                                     f"|gamma_h - {limit:.6f}| = " + ", ".join(f"{e:.4g}" for e in err)))
        final = err[-1] / limit
        res.rules.append(RuleOutcome("final-within-2-percent", final <= 0.02,
                                     f"relative distance at h={hs[-1]:g}: {final:.4%}"))
    devs = [abs(r[k]) for r in rows for k in ("rel_dev_zeta1", "rel_dev_zeta2", "rel_dev_gamma")
            if r[k] is not None]
    if devs:
        res.rules.append(RuleOutcome("reported-values-within-5-percent", max(devs) <= 0.05,
                                     f"max relative deviation {max(devs):.4%}"))
    res.rules.append(RuleOutcome("runtime-under-1s", elapsed < 1.0,
                                 "wall time of the h sweep against a 1 s budget"))
    z1 = [r["zeta1"] for r in rows]
    z2 = [r["zeta2"] for r in rows]
    dec = all(z1[i + 1] < z1[i] and z2[i + 1] < z2[i] for i in range(len(rows) - 1))
    res.rules.append(RuleOutcome("ritz-values-decreasing", dec, "zeta1, zeta2 strictly decreasing"))
    above = all(a >= np.pi ** 2 and b >= 4 * np.pi ** 2 for a, b in zip(z1, z2))
    res.rules.append(RuleOutcome("ritz-values-above-exact", above, "zeta1 >= pi^2, zeta2 >= 4 pi^2"))
    an = max(abs(r[f"zeta{k}"] - r[f"zeta{k}_exact"]) / r[f"zeta{k}_exact"]
             for r in rows for k in (1, 2))
    res.rules.append(RuleOutcome("dispersion-formula", an <= 1e-8, f"max relative error {an:.3e}"))
    gd = max(_hermitian_gap_defect(r["gamma_h"], r["spectral_gap"]) for r in rows)
    res.rules.append(RuleOutcome("hermitian-gamma-equals-gap", gd <= HERMITIAN_GAP_RTOL,
                                 f"max defect {gd:.3e}"))
    res.notes.append("mass-lumped eigenvalues and gamma are reported alongside the consistent mass")
    return res


def exp_cd_numrange(cfg: ExperimentConfig) -> ExperimentResult:
    hs = _h_list(cfg, [_exp2(k) for k in range(-4, -9, -1)])
    eps = cfg.get("problem", "epsilon", 0.02)
    beta = cfg.get("problem", "beta", [8.0])[0]
    lam = _lam(cfg, -1.0)
    solver = cfg.solver
    n_angles = cfg.get("scheme", "n_angles", 64)
    rows = []
    for h in hs:
        p = cd_pencil(h, eps, beta, lam)
        g, conv = _gamma_row(p, 1, solver)
        nr = numrange_distance(p, n_angles, solver)
        rg, rn = REPORTED_CD.get(_log2(h), (None, None))
        rows.append({"h": h, "n": p.n, "gamma_h": g, "numrange_dist": nr, "converged": conv,
                     "reported_gamma": rg, "reported_numrange": rn,
                     "rel_dev_gamma": _rel(g, rg), "rel_dev_numrange": _rel(nr, rn)})
    res = ExperimentResult("tab4-cd-numrange",
                           ["h", "n", "gamma_h", "numrange_dist", "converged", "reported_gamma",
                            "reported_numrange", "rel_dev_gamma", "rel_dev_numrange"], rows)
    res.plot_series["gamma_h"] = [(r["h"], r["gamma_h"]) for r in rows]
    res.plot_series["numrange_dist"] = [(r["h"], r["numrange_dist"]) for r in rows]
    res.rules.append(_bound_rule(rows))
    g = [r["gamma_h"] for r in rows]
    res.rules.append(RuleOutcome("gamma-bounded-below", min(g) >= 0.5 * max(g) and min(g) > 0,
                                 f"min/max gamma_h = {min(g) / max(g):.4f}"))
    return res


def exp_indicators(cfg: ExperimentConfig) -> ExperimentResult:
    h = _h_list(cfg, [_exp2(-6)])[0]
    eps = cfg.get("problem", "epsilon", 0.02)
    beta = cfg.get("problem", "beta", [8.0])[0]
    lam = _lam(cfg, -1.0)
    solver = cfg.solver
    p = cd_pencil(h, eps, beta, lam)
    rep = indicators(p, cfg.get("scheme", "pseudo_eps", 1e-3), solver,
                     cfg.get("scheme", "n_angles", 64), cfg.get("scheme", "n_rays", 64))
    vals = {"gamma_h": rep.gamma_h, "numrange_dist": rep.numrange_dist,
            "cond": rep.cond_number, "pseudo_radius": rep.pseudo_radius[1]}
    rows = [{"indicator": k, "h": h, "value": v, "reported": REPORTED_INDICATORS[k],
             "rel_dev": _rel(v, REPORTED_INDICATORS[k])} for k, v in vals.items()]
    res = ExperimentResult("tab5-indicators", ["indicator", "h", "value", "reported", "rel_dev"],
                           rows, plot_x="index")
    res.plot_series["value"] = [(i, r["value"]) for i, r in enumerate(rows)]
    res.rules.append(_bound_rule([vals]))
    res.rules.append(RuleOutcome("condition-at-least-one", vals["cond"] >= 1,
                                 f"cond = {vals['cond']:.6g}"))
    res.notes.append(f"pseudospectral level {rep.pseudo_radius[0]:g}")
    res.notes.append(f"solver provenance: {rep.provenance['gamma_h']}")
    return res


def exp_transport_dichotomy(cfg: ExperimentConfig) -> ExperimentResult:
    hs = _h_list(cfg, [_exp2(k) for k in range(-4, -10, -1)])
    lam = _lam(cfg, 0.0)
    solver = cfg.solver
    weightings = [cfg.get("scheme", "weighting")] if cfg.get("scheme", "weighting") else ["mass", "identity"]
    m_max = cfg.get("scheme", "m_max", 4)
    rows = []
    for scheme in ("upwind", "central"):
        for w in weightings:
            for h in hs:
                p = transport_pencil(h, scheme, w, lam)
                g, conv = _gamma_row(p, 1, solver)
                verdict, rep = ascent_verdict(p.shifted.toarray(), m_max)
                rows.append({"scheme": scheme, "weighting": w, "h": h, "n": p.n, "gamma_h": g,
                             "gamma_over_h": g / h, "converged": conv, "kt_index": verdict,
                             "ascent": rep.ascent, "min_gap_ratio": rep.min_gap_ratio})
    res = ExperimentResult("tab6-transport-dichotomy",
                           ["scheme", "weighting", "h", "n", "gamma_h", "gamma_over_h", "converged",
                            "kt_index", "ascent", "min_gap_ratio"], rows)
    verdicts = {}
    central_ok = False
    upwind_ok = False
    for scheme in ("upwind", "central"):
        for w in weightings:
            sel = [r for r in rows if r["scheme"] == scheme and r["weighting"] == w]
            pts = [(r["h"], r["gamma_h"]) for r in sel]
            res.plot_series[f"{scheme}_{w}"] = pts
            slope = fit_loglog_slope(pts) if len(pts) >= 3 else (0.0, 0.0, 0.0)
            # gamma_h -> 0 like a positive power of h signals infinite ascent in the limit
            if slope[0] > 0.5 and slope[2] > 0.9:
                v = "inf-signal"
            else:
                ks = {r["kt_index"] for r in sel}
                v = ks.pop() if len(ks) == 1 else "unresolved"
            verdicts[(scheme, w)] = v
            res.notes.append(f"{scheme}/{w}: gamma slope {slope[0]:.4f} (r2 {slope[2]:.4f}), "
                             f"ascent verdict {v}")
            if scheme == "central":
                q = [r["gamma_over_h"] for r in sel]
                settled = len(q) >= 2 and abs(q[-1] - q[-2]) / abs(q[-1]) < 0.05
                central_ok |= settled and 3.0 <= q[-1] <= 5.0
                res.notes.append(f"central/{w}: gamma_h/h = " + ", ".join(f"{x:.4g}" for x in q))
            else:
                var = _max_variation([r["gamma_h"] for r in sel])
                upwind_ok |= var < 0.10
                res.notes.append(f"upwind/{w}: relative variation {var:.4f}")
    res.rules.append(RuleOutcome("central-gamma-linear-in-h", central_ok,
                                 "gamma_h/h settles to a constant in [3, 5] under some weighting"))
    res.rules.append(RuleOutcome("upwind-gamma-uniform", upwind_ok,
                                 "upwind gamma_h varies < 10% under some weighting"))
    c_ok = all(verdicts[("central", w)] in ("unresolved", "inf-signal") for w in weightings)
    u_ok = all(verdicts[("upwind", w)] == "1" for w in weightings)
    res.rules.append(RuleOutcome("ascent-verdicts", c_ok and u_ok,
                                 ", ".join(f"{s}/{w}={v}" for (s, w), v in verdicts.items())))
    return res


def exp_square(cfg: ExperimentConfig) -> ExperimentResult:
    ns = cfg.get("mesh", "n", [20, 40, 80])
    lam = _lam(cfg, -1.0)
    V = cfg.get("problem", "potential", 25.0)
    solver = cfg.solver
    exact = 2 * np.pi ** 2 + V - lam.real
    rows = []
    for n in ns:
        p = square_pencil(n, V, lam)
        g, conv = _gamma_row(p, 1, solver)
        gap = spectral_gap(p, solver)
        ref = REPORTED_SQUARE.get(n)
        rows.append({"n": n, "h": 1.0 / n, "dofs": p.n, "gamma_h": g, "spectral_gap": gap,
                     "converged": conv, "continuum_value": exact, "reported_gamma": ref,
                     "rel_dev": _rel(g, ref)})
    res = ExperimentResult("tab7-square", ["n", "h", "dofs", "gamma_h", "spectral_gap", "converged",
                                           "continuum_value", "reported_gamma", "rel_dev"], rows)
    res.plot_series["gamma_h"] = [(r["h"], r["gamma_h"]) for r in rows]
    g = [r["gamma_h"] for r in rows]
    res.rules.append(RuleOutcome("positive", min(g) > 0, f"min gamma_h = {min(g):.6g}"))
    if len(g) >= 2:
        ch = abs(g[-1] - g[-2]) / abs(g[-1])
        res.rules.append(RuleOutcome("stabilizes", ch < 0.02, f"final relative change {ch:.4%}"))
    gd = max(_hermitian_gap_defect(r["gamma_h"], r["spectral_gap"]) for r in rows)
    res.rules.append(RuleOutcome("hermitian-gamma-equals-gap", gd <= HERMITIAN_GAP_RTOL,
                                 f"max defect {gd:.3e}"))
    res.notes.append(f"continuum value 2 pi^2 + V - lambda = {exact:.6f}; reported values are "
                     "not consistent with it and are shown for comparison only")
    return res


def jordan_similarity_case(rng, n_max=12, kappa_max=1e3):
    """Random ``T J T^{-1}`` with known ascent.

    ``J`` holds nilpotent Jordan blocks of random sizes followed by an
    upper triangular invertible part with eigenvalues of modulus in [1, 2].
    ``T`` has condition number at most ``kappa_max``. Returns ``(S, ascent)``
    where the ascent (and descent) is the largest nilpotent block size.
    """
    n = int(rng.integers(1, n_max + 1))
    k0 = int(rng.integers(0, n + 1))
    blocks, left = [], k0
    while left:
        b = int(rng.integers(1, left + 1))
        blocks.append(b)
        left -= b
    J = np.zeros((n, n))
    i = 0
    for b in blocks:
        J[np.arange(i, i + b - 1), np.arange(i + 1, i + b)] = 1.0
        i += b
    k = n - k0
    d = rng.uniform(1.0, 2.0, k) * rng.choice([-1.0, 1.0], k)
    J[k0:, k0:] = np.diag(d) + np.triu(rng.uniform(-0.5, 0.5, (k, k)), 1)
    kappa = 10.0 ** rng.uniform(0.0, np.log10(kappa_max))
    Q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    T = Q1 @ np.diag(np.geomspace(1.0, kappa, n)) @ Q2
    return T @ J @ np.linalg.inv(T), max(blocks, default=0)


def jordan_oracle(n_cases=100, seed=20240607, n_max=12, kappa_max=1e3):
    """``(failures, n_cases, rank_nullity_ok)`` for chain verdicts on random Jordan cases.

    A case fails when ascent or descent differ from the largest nilpotent
    block, or when the intersection test at some ``m`` disagrees with
    ``ascent <= m``.
    """
    rng = np.random.default_rng(seed)
    failures, nullity_ok = 0, True
    for _ in range(n_cases):
        S, asc = jordan_similarity_case(rng, n_max, kappa_max)
        n = S.shape[0]
        rep = chain_report(S, n + 1)
        nullity_ok &= all(k + r == n for k, r in zip(rep.kernel_dims, rep.range_ranks))
        kt_ok = all(rep.kt_intersection_trivial[m] == (asc <= m) for m in range(1, n + 2))
        if not (rep.ascent == asc and rep.descent == asc and kt_ok):
            failures += 1
    return failures, n_cases, nullity_ok


def exp_ascent(cfg: ExperimentConfig) -> ExperimentResult:
    hs = _h_list(cfg, [_exp2(k) for k in range(-5, -10, -1)])
    lam = _lam(cfg, 0.0)
    solver = cfg.solver
    m_max = cfg.get("scheme", "m_max", 4)
    rows = []
    nullity_ok = True
    monotone_ok = True
    for h in hs:
        p = mixed_laplacian_pencil(h, lam)
        g, conv = _gamma_row(p, 1, solver)
        A = p.shifted.toarray()
        rk = numerical_rank(A)
        rep = chain_report(A, m_max)
        n = p.n
        nullity_ok &= all(k + r == n for k, r in zip(rep.kernel_dims, rep.range_ranks))
        monotone_ok &= all(rep.kernel_dims[i] <= rep.kernel_dims[i + 1] for i in range(m_max))
        ref = REPORTED_ASCENT.get(_log2(h), (None, None, None))
        rows.append({"h": h, "n": n, "gamma_h": g, "converged": conv, "rank": rk.rank,
                     "ascent": rep.ascent, "descent": rep.descent,
                     "min_gap_ratio": rep.min_gap_ratio, "reported_gamma": ref[0],
                     "reported_rank": ref[1], "reported_ascent": ref[2],
                     "rel_dev_gamma": _rel(g, ref[0])})
    res = ExperimentResult("tab8-ascent", ["h", "n", "gamma_h", "converged", "rank", "ascent",
                                           "descent", "min_gap_ratio", "reported_gamma",
                                           "reported_rank", "reported_ascent", "rel_dev_gamma"], rows)
    res.plot_series["gamma_h"] = [(r["h"], r["gamma_h"]) for r in rows]
    res.rules.append(RuleOutcome("rank-nullity", nullity_ok, "dim ker + rank = n for every power"))
    res.rules.append(RuleOutcome("kernel-chain-monotone", monotone_ok, "ker S^m nested"))
    fails, cases, jordan_nullity = jordan_oracle(cfg.get("scheme", "n_random", 100),
                                                 cfg.get("scheme", "seed", 20240607))
    res.rules.append(RuleOutcome("jordan-oracle", fails == 0 and jordan_nullity,
                                 f"{fails} failures over {cases} random similarity-conjugated "
                                 "Jordan matrices (n <= 12, cond(T) <= 1e3)"))
    res.notes.append("reported ranks n-2 with ascent 2 are inconsistent with a nonsingular "
                     "stiffness matrix; the ascent check is done on Jordan-structure oracles instead")
    return res


def exp_lshape(cfg: ExperimentConfig) -> ExperimentResult:
    hs = _h_list(cfg, [_exp2(k) for k in range(-5, -10, -1)])
    lam = _lam(cfg, -1.0)
    solver = cfg.solver
    rows = []
    for h in hs:
        n = _cells(h)
        p = lshape_pencil(n, lam)
        g, conv = _gamma_row(p, 1, solver)
        ref = REPORTED_LSHAPE.get(_log2(h))
        rows.append({"h": h, "dofs": p.n, "gamma_h": g, "converged": conv,
                     "reported_gamma": ref, "rel_dev": _rel(g, ref)})
    g = [r["gamma_h"] for r in rows]
    res = ExperimentResult("tab9-lshape", ["h", "dofs", "gamma_h", "converged", "reported_gamma",
                                           "rel_dev", "extrapolated_error"], rows)
    res.rules.append(RuleOutcome("positive", min(g) > 0, f"min gamma_h = {min(g):.6g}"))
    if len(g) >= 2:
        ch = abs(g[-1] - g[-2]) / abs(g[-1])
        res.rules.append(RuleOutcome("stabilizes", ch < 0.02, f"final relative change {ch:.4%}"))
    if len(g) >= 3:
        g_inf = aitken_limit(g)
        for r in rows:
            r["extrapolated_error"] = abs(r["gamma_h"] - g_inf)
        pts = [(r["h"], r["extrapolated_error"]) for r in rows if r["extrapolated_error"] > 0]
        res.plot_series["gamma_h"] = [(r["h"], r["gamma_h"]) for r in rows]
        res.plot_series["extrapolated_error"] = pts
        res.plot_series["reference_O(h)"] = [(h, pts[0][1] * h / pts[0][0]) for h, _ in pts]
        if len(pts) >= 3:
            slope, _, r2 = fit_loglog_slope(pts)
            res.rules.append(RuleOutcome("extrapolated-rate", 0.5 <= slope <= 1.5,
                                         f"slope {slope:.4f} (r2 {r2:.4f}) in [0.5, 1.5]"))
        res.notes.append(f"extrapolated limit {g_inf:.10g} (reported limit {REPORTED_LSHAPE_LIMIT})")
    return res


def corner_touching(mesh, corner=(0.0, 0.0)):
    """Triangles sharing a vertex with the patch of triangles around ``corner``."""
    v = mesh.vertices
    c = int(np.argmin(np.hypot(v[:, 0] - corner[0], v[:, 1] - corner[1])))
    tri = mesh.triangles
    ring = np.unique(tri[np.any(tri == c, axis=1)])
    return set(np.flatnonzero(np.isin(tri, ring).any(axis=1)).tolist())


def independent_local_gamma(mesh, A, M, lam, dof_map):
    """Patch values rebuilt from vertex neighbourhoods with plain Python sets."""
    A = A.toarray()
    M = M.toarray()
    vert_tris = {}
    for t, tri in enumerate(mesh.triangles):
        for vtx in tri:
            vert_tris.setdefault(int(vtx), set()).add(t)
    lam = complex(lam)
    out = np.full(mesh.n_triangles, np.inf)
    for t, tri in enumerate(mesh.triangles):
        nbr = set()
        for vtx in tri:
            nbr |= vert_tris[int(vtx)]
        verts = {int(x) for s in nbr for x in mesh.triangles[s]}
        idx = sorted(int(dof_map[x]) for x in verts if dof_map[x] >= 0)
        if not idx:
            continue
        Ak, Mk = A[np.ix_(idx, idx)], M[np.ix_(idx, idx)]
        w, U = np.linalg.eigh(Mk)
        Mh = U @ np.diag(w ** -0.5) @ U.T
        S = Ak - (lam.real if lam.imag == 0 else lam) * Mk
        out[t] = np.linalg.svd(Mh @ S @ Mh, compute_uv=False)[-1]
    return out


def exp_adaptive_lshape(cfg: ExperimentConfig) -> ExperimentResult:
    n = cfg.get("mesh", "n", [8])[0]
    l_max = cfg.get("mesh", "l_max", 3)
    tau = cfg.get("scheme", "tau", 1.05)
    cycles = cfg.get("scheme", "cycles", 3)
    lam = _lam(cfg, -1.0)
    spec = ProblemSpec("laplace_potential_2d", epsilon=1.0)
    _, states = adaptive_refine(lshape_mesh(n), spec, lam, tau, l_max, cycles)
    rows = []
    exact_ok = True
    corner_frac = []
    growth_ok = True
    for i, st in enumerate(states):
        p = build_pencil(spec, st.mesh, lam)
        vals = independent_local_gamma(st.mesh, p.A, p.M, lam, st.mesh.dof_map())
        fin = vals[np.isfinite(vals)]
        theta = tau * fin.min()
        indep = set(np.flatnonzero(vals < theta).tolist())
        exact_ok &= indep == st.marked
        touch = corner_touching(st.mesh)
        frac = len(st.marked & touch) / len(st.marked) if st.marked else None
        if frac is not None:
            corner_frac.append(frac)
        if st.marked and i + 1 < len(states):
            growth_ok &= states[i + 1].mesh.n_triangles > st.mesh.n_triangles
        f = st.gamma_field
        corner_vals = f.values[sorted(touch)]
        corner_vals = corner_vals[np.isfinite(corner_vals)]
        rows.append({"cycle": st.cycle, "n_elements": st.mesh.n_triangles, "min_gamma": f.min,
                     "max_gamma": f.max, "n_marked": len(st.marked), "theta": st.theta,
                     "corner_fraction": frac,
                     "corner_min_gamma": float(corner_vals.min()) if corner_vals.size else None,
                     "spread": f.max - f.min})
    res = ExperimentResult("alg2-lshape", ["cycle", "n_elements", "min_gamma", "max_gamma",
                                           "n_marked", "theta", "corner_fraction",
                                           "corner_min_gamma", "spread"], rows, plot_x="cycle")
    res.plot_series["min_gamma"] = [(r["cycle"], r["min_gamma"]) for r in rows]
    res.plot_series["max_gamma"] = [(r["cycle"], r["max_gamma"]) for r in rows]
    res.rules.append(RuleOutcome("marked-equals-subthreshold", exact_ok,
                                 "marked set equals an independent recomputation every cycle"))
    res.rules.append(RuleOutcome("refinement-grows-mesh", growth_ok,
                                 "element count increases after every marking cycle"))
    spreads = [r["spread"] for r in rows]
    res.rules.append(RuleOutcome("spread-non-increasing",
                                 all(b <= a for a, b in zip(spreads, spreads[1:])),
                                 "max - min of local gamma per cycle: "
                                 + ", ".join(f"{s:.4g}" for s in spreads)))
    first = corner_frac[0] if corner_frac else 0.0
    res.rules.append(RuleOutcome("marks-concentrate-at-corner", first >= 0.5,
                                 "fraction of marked elements touching the reentrant corner: "
                                 + ", ".join(f"{x:.3f}" for x in corner_frac)))
    res.notes.append(f"reported local values: corner {REPORTED_LOCAL_GAMMA['corner']}, "
                     f"interior {REPORTED_LOCAL_GAMMA['interior']}")
    return res


# ---------------------------------------------------------------------------
# Dense oracle sweep
# ---------------------------------------------------------------------------

def random_pencil(rng, n):
    """Complex non-Hermitian A, SPD M with modest conditioning, complex lam."""
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    M = Q @ np.diag(rng.uniform(0.1, 10.0, n)) @ Q.T
    M = 0.5 * (M + M.T)
    lam = complex(rng.normal(), rng.normal())
    from gammah.assembly import Pencil
    return Pencil(sp.csr_matrix(A), sp.csr_matrix(M), lam)


def model_pencils():
    """Every model pencil family with at most 400 unknowns."""
    out = []
    for k in range(-4, -9, -1):
        h = _exp2(k)
        out.append((f"laplacian h=2^{k}", laplacian_pencil(h)))
        out.append((f"cd h=2^{k}", cd_pencil(h)))
    for eps in (1e-3, 1e-4, 1e-5):
        out.append((f"cd-central eps={eps:g}", cd_pencil(_exp2(-6), eps)))
    for eps in (1e-3, 1e-5, 1e-8):
        out.append((f"cd-supg eps={eps:g}", cd_pencil(_exp2(-6), eps, supg_delta=0.5)))
    for scheme in ("upwind", "central"):
        for w in ("mass", "identity"):
            for k in range(-4, -9, -1):
                out.append((f"transport-{scheme}-{w} h=2^{k}", transport_pencil(_exp2(k), scheme, w)))
    for k in range(-5, -9, -1):
        out.append((f"mixed-laplacian h=2^{k}", mixed_laplacian_pencil(_exp2(k))))
    out.append(("square n=20", square_pencil(20)))
    out.append(("lshape n=8", lshape_pencil(8)))
    return out


def oracle_values(pencil, m):
    """``(stable, naive, kappa)`` dense values of ``sigma_min(B^m)``.

    ``stable`` inverts the largest singular value of the explicitly formed
    ``(B^{-1})^m``; ``naive`` is the smallest singular value of the
    explicitly formed ``B^m``, whose accuracy degrades like ``kappa^m``.
    """
    B = symmetrized_dense(pencil.A, pencil.M, pencil.lam)
    s = dense_svd_oracle(B)
    kappa = s[0] / s[-1]
    Binv = sla.inv(B)
    stable = 1.0 / dense_svd_oracle(np.linalg.matrix_power(Binv, m))[0]
    naive = dense_svd_oracle(np.linalg.matrix_power(B, m))[-1]
    return float(stable), float(naive), float(kappa)


def exp_oracle_check(cfg: ExperimentConfig) -> ExperimentResult:
    n_random = cfg.get("scheme", "n_random", 64)
    seed = cfg.get("scheme", "seed", 20240607)
    powers = cfg.get("scheme", "powers", [1, 2, 3])
    solver = cfg.solver
    rng = np.random.default_rng(seed)
    cases = [(f"random-{i}", random_pencil(rng, int(rng.integers(4, 61))))
             for i in range(n_random)]
    cases += model_pencils()
    rows = []
    bound_rows = []
    gap_defects = []
    for name, p in cases:
        for m in powers:
            r = smallest_singular_pencil(p.A, p.M, p.lam, m, solver, ops=p.ops)
            stable, naive, kappa = oracle_values(p, m)
            rows.append({"case": name, "n": p.n, "m": m, "gamma_krylov": float(r.gamma),
                         "gamma_oracle": stable, "rel_dev": _rel(float(r.gamma), stable),
                         "gamma_explicit_power": naive,
                         "explicit_rel_dev": _rel(naive, stable),
                         "kappa_pow_m": kappa ** m, "converged": bool(r.converged)})
        g1 = next(x["gamma_krylov"] for x in rows if x["case"] == name and x["m"] == 1)
        bound_rows.append({"gamma_h": g1, "numrange_dist": numrange_distance(p, 64, solver)})
        if p.is_hermitian:
            gap_defects.append(_hermitian_gap_defect(g1, spectral_gap(p, solver)))
    res = ExperimentResult("oracle-check", ["case", "n", "m", "gamma_krylov", "gamma_oracle",
                                            "rel_dev", "gamma_explicit_power", "explicit_rel_dev",
                                            "kappa_pow_m", "converged"], rows, plot_x="kappa_pow_m")
    res.plot_series["explicit_rel_dev"] = [(r["kappa_pow_m"], abs(r["explicit_rel_dev"]) + 1e-17)
                                           for r in rows]
    res.plot_series["krylov_rel_dev"] = [(r["kappa_pow_m"], abs(r["rel_dev"]) + 1e-17) for r in rows]
    dev = max(abs(r["rel_dev"]) for r in rows)
    res.rules.append(RuleOutcome("krylov-matches-dense", dev < 1e-8,
                                 f"max relative deviation {dev:.3e} over {len(rows)} evaluations "
                                 f"({n_random} random, {len(cases) - n_random} model pencils)"))
    res.rules.append(_bound_rule(bound_rows))
    if gap_defects:
        res.rules.append(RuleOutcome("hermitian-gamma-equals-gap",
                                     max(gap_defects) <= HERMITIAN_GAP_RTOL,
                                     f"max defect {max(gap_defects):.3e}"))
    worst = max(rows, key=lambda r: abs(r["explicit_rel_dev"]))
    res.notes.append(f"explicit power path: worst relative error {abs(worst['explicit_rel_dev']):.3e} "
                     f"at kappa^m = {worst['kappa_pow_m']:.3e} ({worst['case']}, m={worst['m']})")
    lo = [abs(r["explicit_rel_dev"]) for r in rows if r["kappa_pow_m"] < 1e4]
    hi = [abs(r["explicit_rel_dev"]) for r in rows if r["kappa_pow_m"] >= 1e8]
    if lo and hi:
        res.notes.append(f"explicit path median error: {np.median(lo):.3e} for kappa^m < 1e4, "
                         f"{np.median(hi):.3e} for kappa^m >= 1e8")
    return res


# ---------------------------------------------------------------------------
# Registry and driver
# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "tab1-upwind-powers": exp_upwind_powers,
    "tab2-supg": exp_supg,
    "tab3-laplacian": exp_laplacian,
    "tab4-cd-numrange": exp_cd_numrange,
    "tab5-indicators": exp_indicators,
    "tab6-transport-dichotomy": exp_transport_dichotomy,
    "tab7-square": exp_square,
    "tab8-ascent": exp_ascent,
    "tab9-lshape": exp_lshape,
    "alg2-lshape": exp_adaptive_lshape,
    "oracle-check": exp_oracle_check,
}


def compute_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run an experiment without writing anything."""
    eid = cfg.experiment_id
    if eid not in EXPERIMENTS:
        raise InvalidArgumentError(f"unknown experiment id {eid!r}; known: {', '.join(EXPERIMENTS)}")
    t0 = time.perf_counter()
    res = EXPERIMENTS[eid](cfg)
    res.runtime = time.perf_counter() - t0
    return res


def write_svg(result: ExperimentResult, path) -> None:
    """Minimal log-log line chart of the plot series."""
    W, H, pad = 480, 320, 48
    pts = [(x, y) for s in result.plot_series.values() for x, y in s if x > 0 and y > 0]
    if not pts:
        Path(path).write_text('<svg xmlns="http://www.w3.org/2000/svg"/>\n')
        return
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    x0, x1 = lx.min(), max(lx.max(), lx.min() + 1e-9)
    y0, y1 = ly.min(), max(ly.max(), ly.min() + 1e-9)

    def sx(x):
        return pad + (np.log10(x) - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(y):
        return H - pad - (np.log10(y) - y0) / (y1 - y0) * (H - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" '
             'fill="none" stroke="black"/>',
             f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle">log10 {result.plot_x}</text>',
             f'<text x="14" y="{H // 2}" transform="rotate(-90 14 {H // 2})" '
             'text-anchor="middle">log10 value</text>']
    for i, (name, series) in enumerate(result.plot_series.items()):
        s = [(x, y) for x, y in series if x > 0 and y > 0]
        if not s:
            continue
        c = colors[i % len(colors)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in s)
        parts.append(f'<polyline fill="none" stroke="{c}" points="{coords}"/>')
        parts.append(f'<text x="{pad + 4}" y="{pad + 14 * (i + 1)}" fill="{c}" '
                     f'font-size="11">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Compute an experiment and write its CSV, plot data and report.

    The files hold no timing information, so reruns are byte-identical.
    """
    res = compute_experiment(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    eid = res.experiment_id
    (out / f"{eid}.csv").write_text(res.csv_text())
    (out / f"{eid}_plot.dat").write_text(res.plot_text())
    (out / f"{eid}_report.txt").write_text(res.report_text(runtime=False))
    if cfg.get("output", "svg"):
        write_svg(res, out / f"{eid}_plot.svg")
    return res


def config_for(eid: str, overrides: dict | None = None) -> ExperimentConfig:
    """Configuration for ``eid`` with ``{(section, key): value}`` overrides."""
    cfg = ExperimentConfig(experiment_id=eid)
    for (section, key), value in (overrides or {}).items():
        cfg.set(section, key, value)
    return cfg
