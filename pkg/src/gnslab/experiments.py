"""Scan harness: identity verification, stability exponents, Bianchi--Egnell ratios.

Every scan point is evaluated independently from a picklable description
(family JSON, epsilon, n, t), so points can run in worker processes.  Verdicts
are recomputed from the stored points by :func:`_verdicts_*` and carry no
hidden state.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import functionals as fn
from .params import (
    Params,
    corollary_exponents,
    default_moment_p,
    derive_params,
    lemma22_constants,
    v_norm,
    v_norm_power,
)
from .profiles import PerturbationFamily, RadialProfile, lift, normalize, perturb
from .quad import Integrand1D, budget_limit, default_budget, integrate_radial

DEFAULT_EPS_GRID = tuple(np.logspace(-3, -1, 9))
IDENTITY_TOL = 1e-6
# deficits below this are indistinguishable from zero at default tolerances
NULL_LEVEL = 1e-12
MIN_FIT_POINTS = 3


class DegenerateFitError(ValueError):
    pass


# -- exponent fits --------------------------------------------------------------


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """OLS fit of ``ln y = slope * ln x + intercept``; returns ``(slope, intercept, r_squared)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if x.size < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs strictly positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise DegenerateFitError("all xs are equal")
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ np.array([slope, intercept])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), float(min(max(r2, 0.0), 1.0))


# -- the dimension-reduction identity ----------------------------------------------------


@dataclass(frozen=True)
class IdentityVerdict:
    passed: bool
    lhs: float
    rhs_direct: float
    rhs_closed_form: float
    delta_hat: float
    max_gap: float
    tolerance: float

    def as_dict(self) -> dict:
        return asdict(self)


def verify_identity_prop21(
    u: RadialProfile, params: Params, rel_tol: float = 1e-10, tol: float = IDENTITY_TOL
) -> IdentityVerdict:
    """Check ``D(n_s,s)^(2/2(t)) delta_hat[u] = S int|grad f|^2 y^s - (int f^{2*} y^s)^(2/2*)``.

    ``u`` is normalized first; the right side is computed by half-space
    quadrature of the lift and, independently, from norms of ``u``.
    """
    u_norm = normalize(u, params, min(rel_tol, 1e-12)).u_norm
    nm = fn.norms(u_norm, params, min(rel_tol, 1e-12))
    _, delta_hat = fn.deficits_from_norms(nm, params)
    lhs = params.d_ns_s ** (2 / params.two_t) * delta_hat
    rhs_direct = fn.weighted_sobolev_deficit(lift(u_norm, params), params, rel_tol)
    grad, mass = fn.lift_integrals_closed_form(nm, params)
    rhs_closed = params.s_sob * grad - mass ** (2 / params.two_star_s)
    gap = max(abs(lhs - rhs_direct), abs(lhs - rhs_closed), abs(rhs_direct - rhs_closed))
    allowed = tol * max(1.0, abs(delta_hat))
    return IdentityVerdict(gap <= allowed, lhs, rhs_direct, rhs_closed, delta_hat, gap, allowed)


# -- scan data model -------------------------------------------------------------------


@dataclass
class ScanPoint:
    eps: float
    report: Optional[fn.DeficitReport]
    extras: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.report is not None

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "report": None if self.report is None else self.report.to_json(),
            "extras": self.extras,
            "flags": self.flags,
            "error": self.error,
        }

    def row(self) -> dict:
        out = {"eps": self.eps}
        if self.report is not None:
            out.update(self.report.flat())
        out.update(self.extras)
        out["point_flags"] = ";".join(self.flags)
        out["error"] = self.error or ""
        return out


@dataclass
class ScanResult:
    kind: str
    family: PerturbationFamily
    n: int
    t: float
    eps_grid: list
    points: list
    fitted: dict
    verdicts: dict
    flags: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.eps_grid, dtype=float)
        if grid.size and (np.any(grid <= 0) or np.any(np.diff(grid) <= 0)):
            raise ValueError("eps_grid must be strictly increasing and positive")
        if len(self.points) != len(self.eps_grid):
            raise ValueError("one point per grid entry is required")

    @property
    def reports(self) -> list:
        return [p.report for p in self.points]

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.verdicts.values())

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "family": self.family.to_json(),
            "n": self.n,
            "t": self.t,
            "eps_grid": list(self.eps_grid),
            "points": [p.to_json() for p in self.points],
            "fitted": {k: list(v) for k, v in self.fitted.items()},
            "verdicts": self.verdicts,
            "flags": self.flags,
            "settings": self.settings,
        }

    def to_csv(self) -> str:
        rows = [p.row() for p in self.points]
        cols: list = []
        for r in rows:
            cols.extend(c for c in r if c not in cols)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\r\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: _csv_cell(r.get(c)) for c in cols})
        return buf.getvalue()

    def file_stem(self, timestamp: str) -> str:
        return f"{self.family.kind}_{self.n}_{_fmt_t(self.t)}_{timestamp}"

    def write(self, directory: str, timestamp: str, formats: Sequence[str] = ("json", "csv")) -> list:
        os.makedirs(directory, exist_ok=True)
        paths = []
        stem = os.path.join(directory, self.file_stem(timestamp))
        if "json" in formats:
            with open(stem + ".json", "w", encoding="utf-8") as fh:
                json.dump(_jsonable(self.to_json()), fh, indent=2, sort_keys=True)
                fh.write("\n")
            paths.append(stem + ".json")
        if "csv" in formats:
            with open(stem + ".csv", "w", encoding="utf-8", newline="") as fh:
                fh.write(self.to_csv())
            paths.append(stem + ".csv")
        return paths


def _fmt_t(t: float) -> str:
    return f"{t:g}"


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    return v


def _jsonable(obj):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


# -- worker plumbing ------------------------------------------------------------------


def worker_count(n_tasks: int) -> int:
    """Workers allowed by ``GNSLAB_THREADS`` (0 or unset: one per CPU), capped at ``n_tasks``."""
    raw = os.environ.get("GNSLAB_THREADS", "0").strip() or "0"
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"GNSLAB_THREADS must be an integer, got {raw!r}") from None
    if cap < 0:
        raise ValueError("GNSLAB_THREADS must be nonnegative")
    if cap == 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _run_points(task, args_list):
    workers = worker_count(len(args_list))
    if workers == 1:
        return [task(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so aggregation is deterministic
        return list(pool.map(task, *zip(*args_list)))


# -- stability scan --------------------------------------------------------------------


def step4_identity(u: RadialProfile, params: Params, rel_tol: float = 1e-12) -> tuple[float, float]:
    """Quadrature and closed form of ``int |u_tilde^{t+1} - u_a^{t+1}|`` for ``||u||_{t+1} = ||v||_{t+1}``.

    ``u_tilde`` is the normalized profile and ``u_a = a^{n/(t+1)} u(a x)`` with
    the same dilation ``a``.
    """
    n, t = params.n, params.t
    norm = normalize(u, params, rel_tol)
    a = norm.lam
    amp = a ** (n / (t + 1))
    ut = norm.u_norm
    quad = integrate_radial(
        Integrand1D(
            lambda r: np.abs(ut.value(r) ** (t + 1) - (amp * u.value(a * r)) ** (t + 1)),
            (t + 1) * u.tail_exponent,
            breakpoints=ut.breakpoints,
        ),
        n, max(rel_tol, 1e-10), fn.NOISE_FLOOR * v_norm_power(params, t + 1),
    ).value
    u2t = fn.lq_power(u, 2 * t, params, rel_tol) ** (1 / (2 * t))
    scale = u2t ** (t + 1) * a ** (n * (t - 1) / (2 * t))
    closed = abs(scale - v_norm(params, 2 * t) ** (t + 1)) / scale * v_norm_power(params, t + 1)
    return quad, closed


def _stability_point(family_json: dict, eps: float, n: int, t: float, p: float, opt_tol: float, budget: int) -> ScanPoint:
    params = derive_params(n, t)
    family = PerturbationFamily.from_json(family_json)
    point = ScanPoint(eps, None)
    # deficits are differences of O(1) norms, so norms always use the tight tolerance
    rel_tol = fn.DEFAULT_REL_TOL
    try:
        with budget_limit(budget):
            _fill_stability_point(point, family, params, p, rel_tol, opt_tol)
    except Exception as exc:  # a failed point is recorded, the scan goes on
        point.error = f"{type(exc).__name__}: {exc}"
    return point


def _fill_stability_point(point: ScanPoint, family, params: Params, p: float, rel_tol: float, opt_tol: float) -> None:
    t, eps = params.t, point.eps
    u_raw = perturb(family, eps, params)
    u_norm = normalize(u_raw, params, rel_tol).u_norm
    rep = fn.deficit_report(u_norm, params, p, rel_tol, parts=("thm11", "asymmetry", "l1"), opt_rel_tol=opt_tol)
    ex = point.extras
    if family.nonnegative:
        # the moment/entropy statements assume ||u||_{t+1} = ||v||_{t+1}
        t1 = fn.lq_power(u_raw, t + 1, params, rel_tol) ** (1 / (t + 1))
        u_t1 = u_raw.scaled(v_norm(params, t + 1) / t1)
        _, ex["delta_hat_t1"] = fn.gns_deficits(u_t1, params, rel_tol)
        rep.l1_dist_t1, rep.l1_a_star = fn.l1_t1_distance(u_t1, params)
        rep.entropy = fn.entropy(u_t1, params, rel_tol)
        if fn.moment_is_finite(u_t1, p, params):
            rep.moment_p = fn.moment(u_t1, p, params, rel_tol)
        else:
            rep.flags.append("moment_divergent")
        ex["step4_quad"], ex["step4_closed"] = step4_identity(u_t1, params, rel_tol)
        ident = verify_identity_prop21(u_raw, params)
        ex["identity_gap"] = ident.max_gap
        ex["identity_pass"] = ident.passed
        if not ident.passed:
            point.flags.append("identity_failed")
    else:
        ex["sign_split_ratio"] = fn.sign_split_details(u_norm, params, rel_tol).ratio
    point.report = rep
    point.flags.extend(rep.check_invariants(params))


def _series(points, getter):
    xs, ys = [], []
    for p in points:
        if not p.ok:
            continue
        y = getter(p)
        if y is not None and math.isfinite(y) and y > 0:
            xs.append(p.eps)
            ys.append(y)
    return xs, ys


def _fit_all(points, names_getters, floor: float = 0.0) -> dict:
    fitted = {}
    for name, getter in names_getters.items():
        xs, ys = _series(points, getter)
        keep = [(x, y) for x, y in zip(xs, ys) if y > floor]
        if len(keep) >= MIN_FIT_POINTS:
            fitted[name] = fit_exponent([k[0] for k in keep], [k[1] for k in keep])
    return fitted


def _ratio_verdict(points, num, den, power: float = 1.0) -> dict:
    ratios = []
    for p in points:
        if not p.ok:
            continue
        a, b = num(p), den(p)
        if a is None or b is None:
            continue
        if b <= NULL_LEVEL:
            continue
        ratios.append(max(a, 0.0) / b**power)
    if not ratios:
        return {"pass": False, "sup": None, "min": None, "points": 0, "note": "no valid points"}
    finite = all(math.isfinite(r) for r in ratios)
    return {"pass": finite, "sup": max(ratios), "min": min(ratios), "points": len(ratios)}


def _stability_verdicts(points, params: Params, p: float, equality_family: bool) -> dict:
    if equality_family:
        note = "equality family: deficits vanish, ratios are vacuous"
        return {k: {"pass": True, "vacuous": True, "note": note} for k in ("V1", "V2", "V3", "V4", "V5")}
    ce = corollary_exponents(params)

    def rep(attr):
        return lambda pt: getattr(pt.report, attr)

    verdicts = {
        "V1": _ratio_verdict(points, rep("thm11_dist"), rep("delta_hat")),
        "V2": _ratio_verdict(points, lambda pt: None if pt.report.asymmetry is None else max(pt.report.asymmetry, 0.0) ** ce.cor_power, rep("delta_gns")),
        "V3": _ratio_verdict(points, rep("l1_dist_t1"), lambda pt: pt.extras.get("delta_hat_t1"), (p - 1) / (2 * p)),
        "V4": _ratio_verdict(points, rep("l1_dist_2t"), rep("delta_hat"), 0.5),
    }
    fits = _fit_all(points, {"delta_hat": rep("delta_hat"), "asymmetry": rep("asymmetry")})
    if "delta_hat" in fits and "asymmetry" in fits:
        lhs = fits["asymmetry"][0] * ce.sharp_power
        rhs = fits["delta_hat"][0]
        verdicts["V5"] = {"pass": abs(lhs - rhs) <= 0.2, "slope_asymmetry_scaled": lhs, "slope_delta_hat": rhs, "margin": 0.2 - abs(lhs - rhs)}
    else:
        verdicts["V5"] = {"pass": False, "note": "not enough points to fit"}
    return verdicts


def _equality_family(points) -> bool:
    vals = [abs(p.report.delta_hat) for p in points if p.ok]
    return bool(vals) and max(vals) <= NULL_LEVEL


def stability_scan(
    family: PerturbationFamily,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    params: Optional[Params] = None,
    p: Optional[float] = None,
    rel_tol: float = 1e-10,
    budget: Optional[int] = None,
) -> ScanResult:
    """Deficits and distances along ``eps -> perturb(family, eps)``, with exponent fits and verdicts.

    ``rel_tol`` governs the distance searches; norms entering the deficits
    are always integrated at ``functionals.DEFAULT_REL_TOL``.
    """
    params = derive_params(2, 3.0) if params is None else params
    p = default_moment_p(params) if p is None else p
    grid = [float(e) for e in eps_grid]
    emax = family.resolved_epsilon_max()
    if any(e > emax for e in grid):
        raise ValueError(f"eps grid exceeds epsilon_max = {emax} for {family.kind}")
    budget = default_budget() if budget is None else budget
    args = [(family.to_json(), e, params.n, params.t, p, rel_tol, budget) for e in grid]
    points = _run_points(_stability_point, args)
    equality = _equality_family(points)

    def rep(attr):
        return lambda pt: getattr(pt.report, attr)

    fitted = {} if equality else _fit_all(
        points,
        {
            "delta_hat": rep("delta_hat"),
            "thm11_dist": rep("thm11_dist"),
            "asymmetry": rep("asymmetry"),
            "l1_dist_t1": rep("l1_dist_t1"),
            "l1_dist_2t": rep("l1_dist_2t"),
        },
    )
    flags = ["equality family"] if equality else []
    if sum(p_.ok for p_ in points) < MIN_FIT_POINTS:
        flags.append("too few valid points")
    return ScanResult(
        kind="stability",
        family=family,
        n=params.n,
        t=params.t,
        eps_grid=grid,
        points=points,
        fitted=fitted,
        verdicts=_stability_verdicts(points, params, p, equality),
        flags=flags,
        settings={"p": p, "rel_tol": rel_tol, "budget": budget},
    )


# -- Bianchi--Egnell ratio scan ----------------------------------------------------------


def _be_point(family_json: dict, eps: float, n: int, t: float, rel_tol: float, budget: int) -> ScanPoint:
    params = derive_params(n, t)
    family = PerturbationFamily.from_json(family_json)
    point = ScanPoint(eps, None)
    try:
        with budget_limit(budget):
            _fill_be_point(point, family, params, rel_tol)
    except Exception as exc:
        point.error = f"{type(exc).__name__}: {exc}"
    return point


def _fill_be_point(point: ScanPoint, family, params: Params, rel_tol: float) -> None:
    eps = point.eps
    u_norm = normalize(perturb(family, eps, params), params).u_norm
    rep = fn.deficit_report(u_norm, params, parts=())
    f = lift(u_norm, params)
    md = fn.manifold_distance(f, params, rel_tol)
    ex = point.extras
    ex.update(grad_dist=md.dist, c_star=md.c, a_star=md.a, d_star=md.d, search_converged=md.converged)
    ex["weighted_deficit"] = params.d_ns_s ** (2 / params.two_t) * rep.delta_hat
    ex["ratio"] = rep.delta_hat / md.dist if md.dist > 0 else float("nan")
    ex["recentred_dist"] = fn.gradient_distance(f, 1.0, 1.0, md.d, params, rel_tol)
    if md.dist <= NULL_LEVEL:
        point.flags.append("ratio indeterminate")
    point.report = rep


def _be_verdicts(points, params: Params, equality: bool) -> dict:
    lc = lemma22_constants(params)
    if equality:
        be = {"pass": True, "vacuous": True, "note": "equality family: gradient distance vanishes"}
    else:
        ratios = [p.extras["ratio"] for p in points if p.ok and p.extras["grad_dist"] > NULL_LEVEL]
        ok = bool(ratios) and all(math.isfinite(r) and r > 0 for r in ratios)
        be = {"pass": ok, "C_estimate": min(ratios) if ratios else None, "sup": max(ratios) if ratios else None, "points": len(ratios)}
    checked, worst = 0, -math.inf
    for p in points:
        if not p.ok or p.extras["grad_dist"] > lc.delta_0:
            continue
        checked += 1
        bound = lc.c_0 * p.extras["grad_dist"]
        worst = max(worst, p.extras["recentred_dist"] - bound)
    l22 = {"pass": worst <= 0 if checked else True, "points": checked, "delta_0": lc.delta_0, "c_0": lc.c_0}
    if not checked:
        l22["vacuous"] = True
    else:
        l22["worst_excess"] = worst
    return {"BE": be, "L22": l22}


def be_ratio_scan(
    family: PerturbationFamily,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    params: Optional[Params] = None,
    rel_tol: float = 1e-9,
    budget: Optional[int] = None,
) -> ScanResult:
    """Ratio of the GNS deficit to the weighted gradient distance from the lift to the extremal manifold."""
    params = derive_params(2, 3.0) if params is None else params
    grid = [float(e) for e in eps_grid]
    if not family.nonnegative:
        raise ValueError("the lift needs a positive family")
    emax = family.resolved_epsilon_max()
    if any(e > emax for e in grid):
        raise ValueError(f"eps grid exceeds epsilon_max = {emax} for {family.kind}")
    budget = default_budget() if budget is None else budget
    points = _run_points(_be_point, [(family.to_json(), e, params.n, params.t, rel_tol, budget) for e in grid])
    equality = _equality_family(points)
    fitted = {} if equality else _fit_all(
        points,
        {"delta_hat": lambda p: p.report.delta_hat, "grad_dist": lambda p: p.extras.get("grad_dist")},
    )
    return ScanResult(
        kind="be",
        family=family,
        n=params.n,
        t=params.t,
        eps_grid=grid,
        points=points,
        fitted=fitted,
        verdicts=_be_verdicts(points, params, equality),
        flags=["equality family"] if equality else [],
        settings={"rel_tol": rel_tol, "budget": budget},
    )
