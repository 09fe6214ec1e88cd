"""Constant equilibria, critical pressure and coexistence pressure.

Constant stationary solutions have all gradient terms equal to zero, so they
are the critical points of psi(m, eps) at fixed p. Two branches exist:

* standard (fluid-poor) phase on the line m = b*eps, with p = f1(eps);
* fluid-rich phase on m = m_plus(eps), with p = f_plus(eps), defined for
  eps <= -2*sqrt(a/alpha)/b and present for p >= p_c = min f_plus.

The coexistence pressure p_co is the unique p > p_c where both phases have the
same energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError
from .model import ModelParams, PhasePoint, psi_total

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def f1(eps, params: ModelParams):
    return -eps - params.alpha * params.b**4 * eps**3 / 3.0


def branch_point(params: ModelParams) -> float:
    """Strain where the fluid-rich branch is born (zero discriminant)."""
    return -2.0 * math.sqrt(params.a / params.alpha) / params.b


def _discriminant(eps, params):
    return eps * eps - 4.0 * params.a / (params.alpha * params.b**2)


def m_plus(eps, params: ModelParams):
    disc = _discriminant(np.asarray(eps, dtype=float), params)
    if np.any(disc < 0):
        raise DomainError(f"eps={eps!r} is outside the fluid-rich branch")
    out = 0.5 * params.b * (eps + np.sqrt(disc))
    return float(out) if np.ndim(out) == 0 else out


def f_plus(eps, params: ModelParams):
    a, b, al = params.a, params.b, params.alpha
    mp = m_plus(eps, params)
    return -eps + a * b * (mp - b * eps) - al * b * b * eps * mp * mp + 2.0 / 3.0 * al * b * mp**3


def _f_plus_prime(eps, params):
    a, b, al = params.a, params.b, params.alpha
    mp = m_plus(eps, params)
    dmp = 0.5 * b * (1.0 + eps / math.sqrt(_discriminant(eps, params)))
    return (
        -1.0
        - a * b * b
        - al * b * b * mp * mp
        + (a * b - 2.0 * al * b * b * eps * mp + 2.0 * al * b * mp * mp) * dmp
    )


def _bisect(fun, lo, hi, xtol=0.0, maxiter=200):
    """Plain bisection on a sign change; runs to floating-point resolution."""
    flo, fhi = fun(lo), fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ConvergenceError(f"no sign change on [{lo}, {hi}]")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= min(lo, hi) or mid >= max(lo, hi) or abs(hi - lo) <= xtol:
            break
        fmid = fun(mid)
        if fmid == 0.0:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton_polish(fun, dfun, x, lo, hi, iters=4):
    """A few safeguarded Newton steps; falls back to x if a step leaves [lo, hi]."""
    lo, hi = min(lo, hi), max(lo, hi)
    for _ in range(iters):
        d = dfun(x)
        if d == 0.0:
            break
        x_new = x - fun(x) / d
        if not (lo <= x_new <= hi):
            break
        if abs(fun(x_new)) > abs(fun(x)):
            break
        x = x_new
    return x


def critical_pressure(params: ModelParams) -> tuple[float, float]:
    """Return ``(p_c, eps_c)`` with eps_c the minimiser of f_plus.

    Golden-section search brackets the minimum; the bracket is then refined to
    machine precision by bisection on the analytic derivative of f_plus.
    """
    return _critical_pressure_cached(params.a, params.b, params.alpha)


@lru_cache(maxsize=256)
def _critical_pressure_cached(a, b, alpha):
    # f_plus does not depend on p except through the additive term
    params = ModelParams(a=a, b=b, alpha=alpha, p=0.0)
    e_star = branch_point(params)
    fp = lambda e: f_plus(e, params)  # noqa: E731

    # expand left until f_plus turns upward
    lo = 2.0 * e_star
    while fp(lo) <= fp(0.5 * (lo + e_star)):
        lo *= 2.0
        if lo < -1e8:
            raise ConvergenceError("could not bracket the minimum of f_plus")
    hi = e_star
    c = hi - _GOLD * (hi - lo)
    d = lo + _GOLD * (hi - lo)
    fc, fd = fp(c), fp(d)
    for _ in range(200):
        if abs(hi - lo) < 1e-9 * abs(e_star):
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLD * (hi - lo)
            fc = fp(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLD * (hi - lo)
            fd = fp(d)
    else:
        raise ConvergenceError("golden-section search for p_c did not converge")

    dfp = lambda e: _f_plus_prime(e, params)  # noqa: E731
    pad = 1e-6 * abs(e_star)
    lo_b, hi_b = lo - pad, min(hi + pad, e_star * (1.0 + 1e-12))
    if np.sign(dfp(lo_b)) == np.sign(dfp(hi_b)):
        raise ConvergenceError("derivative of f_plus has no sign change near minimum")
    eps_c = _bisect(dfp, lo_b, hi_b)
    return float(fp(eps_c)), float(eps_c)


def standard_phase(p: float, params: ModelParams) -> PhasePoint:
    """Standard phase at pressure p: m = b*eps, f1(eps) = p, eps <= 0."""
    if p < 0:
        raise DomainError(f"pressure must be >= 0 (got {p})")
    if p == 0:
        return PhasePoint(m=0.0, eps=0.0)
    c = params.alpha * params.b**4 / 3.0
    g = lambda e: -e - c * e**3 - p  # noqa: E731
    dg = lambda e: -1.0 - 3.0 * c * e * e  # noqa: E731
    # f1 is strictly decreasing and f1(-p) >= p
    lo, hi = -p, 0.0
    eps = _bisect(g, lo, hi, xtol=1e-6 * p)
    eps = _newton_polish(g, dg, eps, lo, hi)
    return PhasePoint(m=params.b * eps, eps=eps)


def fluid_rich_phase(p: float, params: ModelParams) -> PhasePoint:
    """Fluid-rich phase: the root of f_plus(eps) = p with the smallest eps."""
    p_c, eps_c = critical_pressure(params)
    if p < p_c * (1.0 - 1e-14):
        raise DomainError(f"p={p} is below the critical pressure {p_c}")
    if p <= p_c:
        return PhasePoint(m=m_plus(eps_c, params), eps=eps_c)
    g = lambda e: f_plus(e, params) - p  # noqa: E731
    # f_plus decreases monotonically on (-inf, eps_c]; log-spaced outward scan
    hi = eps_c
    lo = eps_c
    step = 1e-3 * abs(eps_c)
    while g(lo) < 0:
        hi = lo
        lo = eps_c - step
        step *= 2.0
        if step > 1e8:
            raise ConvergenceError(f"could not bracket fluid-rich root for p={p}")
    eps = _bisect(g, lo, hi)
    return PhasePoint(m=m_plus(eps, params), eps=eps)


def energy_gap(p: float, params: ModelParams) -> float:
    """psi(standard(p)) - psi(fluid_rich(p)) at pressure p."""
    q = params.with_pressure(p)
    s = standard_phase(p, q)
    f = fluid_rich_phase(p, q)
    return float(psi_total(s.m, s.eps, q) - psi_total(f.m, f.eps, q))


def coexistence_pressure(params: ModelParams, p_hi: float | None = None) -> float:
    """Unique pressure where both phases carry the same energy.

    The gap g(p) = psi_s - psi_f has derivative eps_s(p) - eps_f(p) > 0 (the
    phases are critical points, so only the explicit p*eps term varies), which
    makes Newton on g cheap once bisection has bracketed the root.
    """
    return _coexistence_cached(params.a, params.b, params.alpha, p_hi)


@lru_cache(maxsize=256)
def _coexistence_cached(a, b, alpha, p_hi):
    params = ModelParams(a=a, b=b, alpha=alpha, p=0.0)
    p_c, _ = critical_pressure(params)
    if p_hi is None:
        p_hi = 10.0 * p_c
    g = lambda p: energy_gap(p, params)  # noqa: E731
    g_lo, g_hi = g(p_c), g(p_hi)
    if np.sign(g_lo) == np.sign(g_hi):
        raise ConvergenceError(f"no sign change of the energy gap on [{p_c}, {p_hi}]")

    def dg(p):
        q = params.with_pressure(p)
        return standard_phase(p, q).eps - fluid_rich_phase(p, q).eps

    p = _bisect(g, p_c, p_hi, xtol=1e-8 * p_c)
    p = _newton_polish(g, dg, p, p_c, p_hi)
    return float(p)


@dataclass(frozen=True)
class PhaseDiagramPoint:
    p: float
    standard: PhasePoint
    fluid_rich: PhasePoint | None


def phase_diagram_point(p: float, params: ModelParams) -> PhaseDiagramPoint:
    q = params.with_pressure(p)
    p_c, _ = critical_pressure(q)
    rich = fluid_rich_phase(p, q) if p >= p_c else None
    return PhaseDiagramPoint(p=p, standard=standard_phase(p, q), fluid_rich=rich)


def coexisting_phases(params: ModelParams) -> tuple[ModelParams, PhasePoint, PhasePoint]:
    """Parameters moved to p_co together with the (standard, fluid-rich) pair."""
    p_co = coexistence_pressure(params)
    q = params.with_pressure(p_co)
    return q, standard_phase(p_co, q), fluid_rich_phase(p_co, q)
