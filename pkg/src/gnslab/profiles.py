"""Radial test functions, the half-space lift, and the two-step normalization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .params import Params, v_norm


class PositivityError(ValueError):
    pass


class NormError(ValueError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    """A centered radial function given by closed-form value and radial derivative.

    ``breakpoints`` are radii of narrow features, handed to the quadrature.
    """

    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    tail_exponent: float
    sign: str = "nonnegative"
    label: str = ""
    breakpoints: tuple = ()

    def __post_init__(self):
        if not self.tail_exponent > 0:
            raise ValueError("tail_exponent must be positive")
        if self.sign not in ("nonnegative", "signed"):
            raise ValueError(f"sign must be 'nonnegative' or 'signed', got {self.sign!r}")

    def scaled(self, c: float, label: Optional[str] = None) -> "RadialProfile":
        val, der = self.value, self.deriv
        return RadialProfile(
            value=lambda r: c * val(r),
            deriv=lambda r: c * der(r),
            tail_exponent=self.tail_exponent,
            sign=self.sign if c > 0 else "signed",
            label=label or f"{c:g}*{self.label}",
            breakpoints=self.breakpoints,
        )

    def dilated(self, lam: float, n: int, t: float, label: Optional[str] = None) -> "RadialProfile":
        """``lam^(n/2t) u(lam r)``; leaves the L^{2t} norm unchanged."""
        amp = lam ** (n / (2 * t))
        val, der = self.value, self.deriv
        return RadialProfile(
            value=lambda r: amp * val(lam * r),
            deriv=lambda r: amp * lam * der(lam * r),
            tail_exponent=self.tail_exponent,
            sign=self.sign,
            label=label or f"dil({lam:g})*{self.label}",
            breakpoints=tuple(b / lam for b in self.breakpoints),
        )


@dataclass(frozen=True)
class HalfSpaceFunction:
    """A function on the half space, radial in ``x``: value and ``|grad|^2`` in ``(r, y)``."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_sq: Callable[[np.ndarray, np.ndarray], np.ndarray]
    tail_exponent: float
    label: str = ""
    # partial derivatives, used for integrand-level differencing
    d_r: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    d_y: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None


def extremal_v(a: float, params: Params) -> RadialProfile:
    """``v_a(r) = (1 + a^2 r^2)^(-1/(t-1))``."""
    if not a > 0:
        raise ValueError("dilation a must be positive")
    t = params.t
    e = -1.0 / (t - 1)
    a2 = a * a

    def value(r):
        return (1.0 + a2 * np.square(r)) ** e

    def deriv(r):
        return e * 2 * a2 * r * (1.0 + a2 * np.square(r)) ** (e - 1)

    return RadialProfile(value, deriv, 2 / (t - 1), "nonnegative", "v" if a == 1 else f"v_{a:g}")


def lift(u: RadialProfile, params: Params, check_grid: Optional[np.ndarray] = None) -> HalfSpaceFunction:
    """``f(x, y) = (u(x)^(1-t) + y^2)^(-(n_s-2)/2)``."""
    t, n_s = params.t, params.n_s
    grid = np.geomspace(1e-3, 1e3, 61) if check_grid is None else check_grid
    if np.any(u.value(grid) <= 0):
        raise PositivityError(f"lift requires a strictly positive profile; {u.label} is not")
    k = (n_s - 2) / 2
    uv, ud = u.value, u.deriv

    def base(r, y):
        return uv(r) ** (1 - t) + np.square(y)

    def value(r, y):
        return base(r, y) ** (-k)

    def d_r(r, y):
        return -k * (1 - t) * uv(r) ** (-t) * ud(r) * base(r, y) ** (-n_s / 2)

    def d_y(r, y):
        return -k * 2 * y * base(r, y) ** (-n_s / 2)

    def grad_sq(r, y):
        return np.square(d_r(r, y)) + np.square(d_y(r, y))

    return HalfSpaceFunction(value, grad_sq, u.tail_exponent * (t - 1) * k, f"lift({u.label})", d_r, d_y)


def extremal_g(c: float, a: float, params: Params) -> HalfSpaceFunction:
    """``g_{c,a,0} = c a^((n_s-2)/2) (1 + a^2 r^2 + a^2 y^2)^(-(n_s-2)/2)``."""
    if not a > 0:
        raise ValueError("dilation a must be positive")
    n_s = params.n_s
    k = (n_s - 2) / 2
    amp = c * a**k
    a2 = a * a

    def value(r, y):
        return amp * (1 + a2 * (np.square(r) + np.square(y))) ** (-k)

    def d_r(r, y):
        return -(n_s - 2) * amp * a2 * r * (1 + a2 * (np.square(r) + np.square(y))) ** (-n_s / 2)

    def d_y(r, y):
        return -(n_s - 2) * amp * a2 * y * (1 + a2 * (np.square(r) + np.square(y))) ** (-n_s / 2)

    def grad_sq(r, y):
        return (n_s - 2) ** 2 * amp**2 * a2**2 * (np.square(r) + np.square(y)) * (
            1 + a2 * (np.square(r) + np.square(y))
        ) ** (-n_s)

    return HalfSpaceFunction(value, grad_sq, n_s - 2, f"g_{c:g},{a:g}", d_r, d_y)


# -- perturbation families --------------------------------------------------------

KINDS = ("multiplicative_bump", "tail_tilt", "dilation_null", "mass_shift")

_DEFAULT_SHAPES = {
    "multiplicative_bump": {"r0": 1.0, "w": 0.5},
    "tail_tilt": {"k": 2.0},
    "dilation_null": {},
    "mass_shift": {"r1": 6.0, "w": 0.5},
}


@dataclass(frozen=True)
class PerturbationFamily:
    kind: str
    params: dict = field(default_factory=dict)
    epsilon_max: Union[float, str] = "auto"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.params) - set(_DEFAULT_SHAPES[self.kind])
        if unknown:
            raise ValueError(f"unknown shape parameters for {self.kind}: {sorted(unknown)}")
        if self.kind == "tail_tilt" and self.shape["k"] < 2:
            raise ValueError("tail_tilt needs k >= 2")
        if self.epsilon_max != "auto" and not (isinstance(self.epsilon_max, (int, float)) and self.epsilon_max > 0):
            raise ValueError("epsilon_max must be 'auto' or a positive number")

    @property
    def shape(self) -> dict:
        return {**_DEFAULT_SHAPES[self.kind], **self.params}

    @property
    def nonnegative(self) -> bool:
        return self.kind != "mass_shift"

    def resolved_epsilon_max(self) -> float:
        if self.epsilon_max != "auto":
            return float(self.epsilon_max)
        return _auto_epsilon_max(self)

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "epsilon_max": self.epsilon_max}

    @classmethod
    def from_json(cls, obj: Union[str, dict]) -> "PerturbationFamily":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if "kind" not in obj:
            raise ValueError('family JSON needs a "kind" key')
        extra = set(obj) - {"kind", "params", "epsilon_max"}
        if extra:
            raise ValueError(f"unexpected family keys: {sorted(extra)}")
        return cls(kind=obj["kind"], params=dict(obj.get("params", {})), epsilon_max=obj.get("epsilon_max", "auto"))


def _bump(r, r0, w):
    return np.exp(-np.square((r - r0) / w))


def _bump_deriv(r, r0, w):
    return -2 * (r - r0) / w**2 * _bump(r, r0, w)


def _tilt(r, k):
    return np.square(r) / (1 + np.square(r)) ** k


def _tilt_deriv(r, k):
    q = 1 + np.square(r)
    return 2 * r / q**k - 2 * k * r**3 / q ** (k + 1)


_SCAN_GRID = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 2001)])


def _auto_epsilon_max(family: PerturbationFamily) -> float:
    """Largest epsilon keeping the multiplier ``1 + eps*phi`` at least 1/2 for both signs."""
    sh = family.shape
    if family.kind == "multiplicative_bump":
        peak = np.max(np.abs(_bump(_SCAN_GRID, sh["r0"], sh["w"])))
    elif family.kind == "tail_tilt":
        peak = np.max(np.abs(_tilt(_SCAN_GRID, sh["k"])))
    elif family.kind == "dilation_null":
        return 0.5
    else:
        return 10.0
    return 0.5 / peak


def _feature_radii(center: float, w: float) -> tuple:
    return tuple(x for x in (center - 2 * w, center - w, center, center + w, center + 2 * w) if x > 0)


def perturb(family: PerturbationFamily, eps: float, params: Params) -> RadialProfile:
    emax = family.resolved_epsilon_max()
    if abs(eps) > emax * (1 + 1e-12):
        raise ValueError(f"|eps| = {abs(eps)} exceeds epsilon_max = {emax} for {family.kind}")
    v = extremal_v(1.0, params)
    if eps == 0:
        return v
    sh = family.shape
    vv, vd = v.value, v.deriv
    label = f"{family.kind}({eps:g})"
    if family.kind == "multiplicative_bump":
        r0, w = sh["r0"], sh["w"]
        out = RadialProfile(
            value=lambda r: vv(r) * (1 + eps * _bump(r, r0, w)),
            deriv=lambda r: vd(r) * (1 + eps * _bump(r, r0, w)) + vv(r) * eps * _bump_deriv(r, r0, w),
            tail_exponent=v.tail_exponent,
            label=label,
            breakpoints=_feature_radii(r0, w),
        )
    elif family.kind == "tail_tilt":
        k = sh["k"]
        out = RadialProfile(
            value=lambda r: vv(r) * (1 + eps * _tilt(r, k)),
            deriv=lambda r: vd(r) * (1 + eps * _tilt(r, k)) + vv(r) * eps * _tilt_deriv(r, k),
            tail_exponent=v.tail_exponent,
            label=label,
        )
    elif family.kind == "dilation_null":
        va = extremal_v(1.0 + eps, params)
        out = RadialProfile(va.value, va.deriv, va.tail_exponent, label=label)
    else:
        r1, w = sh["r1"], sh["w"]
        out = RadialProfile(
            value=lambda r: vv(r) - eps * _bump(r, r1, w),
            deriv=lambda r: vd(r) - eps * _bump_deriv(r, r1, w),
            tail_exponent=v.tail_exponent,
            sign="signed",
            label=label,
            breakpoints=_feature_radii(r1, w),
        )
    if family.nonnegative and np.any(out.value(_SCAN_GRID) <= 0):
        raise PositivityError(f"{label} is not strictly positive")
    return out


# -- normalization ----------------------------------------------------------------


@dataclass(frozen=True)
class Normalization:
    c: float
    lam: float
    u_norm: RadialProfile


def normalize(u: RadialProfile, params: Params, rel_tol: float = 1e-13) -> Normalization:
    """Rescale ``u`` so that ``||u||_{2t} = ||v||_{2t}`` and ``((t^2-1)/2n) ||grad u||^2 = ||u||_{t+1}^{t+1}``.

    The multiple ``c`` is fixed first; the dilation ``lam`` then solves the
    second condition in closed form since it preserves the L^{2t} norm.
    """
    from .functionals import norms

    n, t = params.n, params.t
    nm = norms(u, params, rel_tol)
    if not all(math.isfinite(x) for x in (nm.lq_2t, nm.lq_t1, nm.grad_sq)):
        raise NormError(f"non-finite norm for {u.label}")
    if nm.lq_2t == 0:
        raise NormError("cannot normalize the zero function")
    c = v_norm(params, 2 * t) / nm.lq_2t
    # R(1) for c*u: the gradient term scales by c^2, the L^{t+1} term by c^{t+1}
    ratio = params.ratio_const * c**2 * nm.grad_sq / (c ** (t + 1) * nm.lq_t1 ** (t + 1))
    lam = ratio ** (-2 * t / (n - n * t + 4 * t))
    u_norm = u.scaled(c).dilated(lam, n, t, label=f"norm({u.label})")
    return Normalization(c, lam, u_norm)
