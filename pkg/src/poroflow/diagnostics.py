"""Energy functional, seepage velocity and velocity-profile features."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import find_peaks

from .discretization import BcRegime, FieldState, Grid, chemical_potential_field
from .errors import FeatureError
from .model import ModelParams, psi_total


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    F: float
    F_bulk: float
    F_grad: float


def energy(state: FieldState, params: ModelParams, grid: Grid) -> EnergyRecord:
    """Discrete energy: trapezoidal bulk term plus cellwise gradient term.

    Gradients are taken cell by cell, i.e. the gradient energy of the
    piecewise-linear interpolant. With this choice the partial derivatives of
    F with respect to interior nodal values are exactly h times the
    mechanical residual and h times the chemical potential, so the discrete
    flow dissipates this F.
    """
    h = grid.h
    bulk = psi_total(state.m, state.eps, params)
    f_bulk = h * (bulk.sum() - 0.5 * (bulk[0] + bulk[-1]))
    de = np.diff(state.eps) / h
    dm = np.diff(state.m) / h
    dens = 0.5 * (params.k1 * de * de + 2.0 * params.k2 * de * dm + params.k3 * dm * dm)
    f_grad = h * dens.sum()
    return EnergyRecord(t=state.t, F=float(f_bulk + f_grad), F_bulk=float(f_bulk), F_grad=float(f_grad))


def darcy_flux(mu: np.ndarray, params: ModelParams, grid: Grid) -> np.ndarray:
    """Seepage velocity on the n-1 cell faces, -(rho/D) * dmu/dx."""
    return -(params.rho0f / params.D) * np.diff(mu) / grid.h


def seepage_velocity(state: FieldState, params: ModelParams, grid: Grid,
                     regime: BcRegime | None = None) -> np.ndarray:
    """Nodal seepage velocity v = -(rho/D) mu'.

    Interior nodes use the centred difference of mu. End nodes report the
    flux through the adjacent boundary face, which is what the discrete mass
    balance exchanges with the exterior (zero at an impermeable end).
    """
    mu = chemical_potential_field(state, params, grid, regime)
    q = darcy_flux(mu, params, grid)
    v = np.empty(state.n)
    v[1:-1] = 0.5 * (q[:-1] + q[1:])
    v[0] = q[0]
    v[-1] = q[-1]
    return v


def dissipation_rate(state: FieldState, params: ModelParams, grid: Grid,
                     regime: BcRegime) -> float:
    """(rho^2/D) * integral of (mu')^2, evaluated on cell faces."""
    mu = chemical_potential_field(state, params, grid, regime)
    dmu = np.diff(mu) / grid.h
    return float(params.rho0f**2 / params.D * grid.h * np.sum(dmu * dmu))


def total_mass(state: FieldState, grid: Grid) -> float:
    """Sum of h*m over interior nodes (the nodes carrying a mass balance)."""
    return float(grid.h * state.m[1:-1].sum())


@dataclass(frozen=True)
class Extremum:
    x: float
    value: float


@dataclass(frozen=True)
class FeatureSet:
    maxima: tuple
    minima: tuple
    max_positive: float
    min_negative: float
    sign_pattern: str

    @property
    def n_maxima(self) -> int:
        return len(self.maxima)

    @property
    def n_minima(self) -> int:
        return len(self.minima)

    def peak_max(self) -> Extremum | None:
        return max(self.maxima, key=lambda e: e.value, default=None)

    def peak_min(self) -> Extremum | None:
        return min(self.minima, key=lambda e: e.value, default=None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_maxima"] = self.n_maxima
        d["n_minima"] = self.n_minima
        return d


def _smooth3(v):
    out = v.copy()
    out[1:-1] = (v[:-2] + v[1:-1] + v[2:]) / 3.0
    return out


def _parabolic(x, y, i):
    """Vertex of the parabola through (x, y)[i-1:i+2]."""
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return x[i], y1
    delta = 0.5 * (y0 - y2) / denom
    h = x[i + 1] - x[i]
    return x[i] + delta * h, y1 - 0.25 * (y0 - y2) * delta


def _sign_pattern(v, thresh):
    signs = np.where(v > thresh, "+", np.where(v < -thresh, "-", ""))
    out = []
    for s in signs:
        if s and (not out or out[-1] != s):
            out.append(s)
    return "".join(out)


def velocity_features(v: np.ndarray, grid: Grid, rel_threshold: float = 0.01) -> FeatureSet:
    """Interior local extrema of the 3-point smoothed velocity.

    An extremum counts when both its magnitude and its prominence exceed
    ``rel_threshold * max|v|``; the prominence test drops roundoff ripple on
    flat plateaus. Positions come from parabolic interpolation.
    """
    v = np.asarray(v, dtype=float)
    vmax = np.max(np.abs(v))
    if vmax == 0.0:
        raise FeatureError("velocity profile is identically zero")
    thresh = rel_threshold * vmax
    s = _smooth3(v)
    x = grid.x
    imax, _ = find_peaks(s, height=thresh, prominence=thresh)
    imin, _ = find_peaks(-s, height=thresh, prominence=thresh)
    return FeatureSet(
        maxima=tuple(Extremum(*map(float, _parabolic(x, s, i))) for i in imax),
        minima=tuple(Extremum(*map(float, _parabolic(x, s, i))) for i in imin),
        max_positive=float(max(v.max(), 0.0)),
        min_negative=float(min(v.min(), 0.0)),
        sign_pattern=_sign_pattern(s, thresh),
    )
