"""Stationary connection profiles between the two coexisting phases."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .discretization import (
    BcRegime,
    FieldState,
    Grid,
    Mode,
    assemble_jacobian,
    assemble_residual,
)
from .errors import BifurcationWarning, ConvergenceError, FeatureError
from .model import ModelParams, PhasePoint
from .newton import NewtonConfig, newton_solve
from .phases import coexisting_phases


# initial scale factor of the gradient-coefficient continuation
HOMOTOPY_START = 64.0


class InitialGuess(enum.Enum):
    LINEAR = "linear"
    FROM_STATE = "state"


def _warn_degenerate(params: ModelParams):
    if not params.strict_connection:
        warnings.warn(
            f"k1*k3 - k2**2 = {params.gradient_determinant:.3g}: degenerate gradient "
            "energy, existence of a connection is not guaranteed",
            BifurcationWarning,
            stacklevel=3,
        )


def _solve(params, grid, regime, guess, config):
    def residual(x):
        return assemble_residual(FieldState.unpack(x), None, None, regime, Mode.STATIONARY, params, grid)

    def jacobian(x):
        return assemble_jacobian(FieldState.unpack(x), None, regime, Mode.STATIONARY, params, grid)

    return FieldState.unpack(newton_solve(guess.pack(), residual, jacobian, config).solution)


def _scaled(params, lam):
    return replace(params, k1=params.k1 * lam, k2=params.k2 * lam, k3=params.k3 * lam)


def gradient_homotopy(params, grid, regime, config=NewtonConfig(), lam0=HOMOTOPY_START,
                      min_step=1e-4):
    """Continuation in a common scale factor lam on (k1, k2, k3), from lam0 down to 1.

    A wide interface (large lam) is reached from the linear guess; each
    solution seeds the next, smaller lam. The step in log(lam) grows by 1.5 on
    success (capped at log 2) and is halved on failure.
    """
    cap = np.log(2.0)
    log_lam, step = np.log(lam0), cap
    state = FieldState.linear(regime.left, regime.right, grid)
    solved = False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BifurcationWarning)
        while True:
            try:
                new = _solve(_scaled(params, np.exp(log_lam)), grid, regime, state, config)
            except ConvergenceError as exc:
                if not solved and log_lam < np.log(lam0) * 4:
                    # the linear guess is too far even for the widest interface
                    log_lam += cap
                    continue
                back = log_lam + step
                step /= 2.0
                if step < min_step or not solved:
                    raise ConvergenceError(
                        f"gradient homotopy stalled at k-scale {np.exp(log_lam):.4g}",
                        best=state.pack(), residual_norm=exc.residual_norm,
                    ) from exc
                log_lam = back - step
                continue
            state, solved = new, True
            if log_lam == 0.0:
                return state
            step = min(step * 1.5, cap)
            log_lam = max(0.0, log_lam - step)


def stationary_connection(
    params: ModelParams,
    grid: Grid,
    left: PhasePoint,
    right: PhasePoint,
    init: InitialGuess | FieldState = InitialGuess.LINEAR,
    config: NewtonConfig = NewtonConfig(),
    homotopy: bool = True,
) -> FieldState:
    """Solve the stationary problem with Dirichlet phases at both ends.

    ``init`` is either :attr:`InitialGuess.LINEAR` or a FieldState used as the
    starting iterate (read from a file by the caller, or a previous solution).
    If Newton fails from that iterate and ``homotopy`` is set, the solve is
    repeated by continuation in the gradient coefficients from the linear guess.
    """
    _warn_degenerate(params)
    if isinstance(init, FieldState):
        guess = init
    elif init is InitialGuess.LINEAR:
        guess = FieldState.linear(left, right, grid)
    else:
        raise ValueError(f"unsupported initial guess {init!r}")
    if guess.n != grid.n:
        raise ValueError(f"initial state has {guess.n} nodes, grid has {grid.n}")
    # mu = 0 at both ends in either regime, so the stationary rows are the same
    regime = BcRegime.zero_mu(left, right)
    try:
        return _solve(params, grid, regime, guess, config)
    except ConvergenceError:
        if not homotopy:
            raise
    return gradient_homotopy(params, grid, regime, config)


def coexistence_connection(params: ModelParams, grid: Grid, **kwargs):
    """Move params to p_co and connect standard (left) to fluid-rich (right)."""
    q, s, f = coexisting_phases(params)
    return q, stationary_connection(q, grid, s, f, **kwargs)


def _level_crossing(x, f, level):
    """First crossing of ``level`` by f, linearly interpolated between nodes."""
    g = f - level
    hits = np.nonzero(g == 0.0)[0]
    sign = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    cands = []
    if hits.size:
        cands.append(x[hits[0]])
    if sign.size:
        i = sign[0]
        cands.append(x[i] + (x[i + 1] - x[i]) * g[i] / (g[i] - g[i + 1]))
    if not cands:
        raise FeatureError(f"profile never crosses level {level}")
    return min(cands)


def _normalised_m(state, grid):
    m = state.m
    span = m[-1] - m[0]
    if span == 0.0 or np.ptp(m) == 0.0:
        raise FeatureError("m is constant; no interface")
    return (m - m[0]) / span


def interface_position(state: FieldState, grid: Grid) -> float:
    """Abscissa where m crosses halfway between its boundary values."""
    return _level_crossing(grid.x, _normalised_m(state, grid), 0.5)


def interface_width(state: FieldState, grid: Grid) -> float:
    """Distance between the 10% and 90% level crossings of m."""
    s = _normalised_m(state, grid)
    return abs(_level_crossing(grid.x, s, 0.9) - _level_crossing(grid.x, s, 0.1))


# second-gradient triples listed for the stationary figure; the base case
# k1 = k2 = k3 = 1e-3 is shared by all three rows
FIG1_K1 = (1e-3, 4e-3, 7e-3, 8e-3, 9e-3, 1e-2)
FIG1_K2 = (-1e-3, -0.4e-3, 0.2e-3, 0.8e-3, 1e-3)
FIG1_K3 = (1e-3, 2e-3, 4e-3, 7e-3, 1e-2)


def figure_sweep_cases(base: ModelParams) -> list[tuple[str, ModelParams]]:
    """Unique (label, params) pairs of the k1/k2/k3 sweep, base case first."""
    seen = {}
    k0 = 1e-3
    rows = [("k1", v, dict(k1=v, k2=k0, k3=k0)) for v in FIG1_K1]
    rows += [("k2", v, dict(k1=k0, k2=v, k3=k0)) for v in FIG1_K2]
    rows += [("k3", v, dict(k1=k0, k2=k0, k3=v)) for v in FIG1_K3]
    for name, v, ks in sorted(rows, key=lambda r: r[2] != dict(k1=k0, k2=k0, k3=k0)):
        key = (ks["k1"], ks["k2"], ks["k3"])
        if key not in seen:
            seen[key] = (f"{name}={v:g}", replace(base, **ks))
    return list(seen.values())


def continuation_solve(params_list, grid, left, right, config=NewtonConfig()):
    """Solve a list of parameter sets in order, each seeded by the previous solution.

    Falls back to a linear guess if continuation from the previous point fails.
    """
    out = []
    prev = None
    for params in params_list:
        try:
            init = prev if prev is not None else InitialGuess.LINEAR
            sol = stationary_connection(params, grid, left, right, init=init, config=config)
        except ConvergenceError:
            sol = stationary_connection(params, grid, left, right, config=config)
        out.append(sol)
        prev = sol
    return out
