"""Finite differences, boundary closures and residual/Jacobian assembly.

Unknowns are interleaved node by node, ``x = [eps_0, m_0, eps_1, m_1, ...]``,
so row ``2i`` holds the mechanical balance at node ``i`` and row ``2i + 1`` the
mass balance. Both ends carry Dirichlet data on eps and m.

Interior rows::

    E_i  = dpsi_deps - k1 eps''_i - k2 m''_i                       (mechanics)
    mu_i = dpsi_dm   - k2 eps''_i - k3 m''_i                       (chemical potential)
    stationary: mu_i = 0
    transient:  (D h^2 / (rho^2 dt)) (m_i - m_prev_i) - (mu_{i-1} - 2 mu_i + mu_{i+1}) = 0

The transient mass row is the balance ``D dm/dt = rho^2 mu''`` multiplied by
``h^2 / rho^2`` so that every row is O(1) and roundoff does not grow like h^-4.

Boundary nodes need one ghost value per field. The ghosts are eliminated by
the boundary conditions, which fixes the boundary chemical potential:

* zero chemical potential end: mu = 0;
* impermeable end (right, OneSideImpermeable): mu_{n-1} = mu_{n-2}, i.e. zero
  Darcy flux through the last cell face. This keeps the discrete mass balance
  and the discrete energy identity exact.

The traction condition at the boundary (mechanical residual zero) is the
second ghost equation; it only matters when the ghosts themselves are wanted
(:func:`ghost_values`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import ModelParams, PhasePoint, d2psi, dpsi_deps, dpsi_dm
from .newton import BandedMatrix

LOWER_BW = 5
UPPER_BW = 4


@dataclass(frozen=True)
class Grid:
    l1: float = 0.0
    l2: float = 1.0
    n: int = 201

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 5:
            raise ValueError(f"grid needs at least 5 nodes (got {self.n})")
        if not self.l2 > self.l1:
            raise ValueError(f"need l2 > l1 (got [{self.l1}, {self.l2}])")

    @property
    def h(self) -> float:
        return (self.l2 - self.l1) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return self.l1 + np.arange(self.n) * self.h

    def refined(self) -> "Grid":
        return Grid(self.l1, self.l2, 2 * self.n - 1)


@dataclass
class FieldState:
    eps: np.ndarray
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.eps.shape != self.m.shape or self.eps.ndim != 1:
            raise ValueError("eps and m must be 1-D arrays of equal length")

    @property
    def n(self) -> int:
        return self.eps.size

    def pack(self) -> np.ndarray:
        x = np.empty(2 * self.n)
        x[0::2] = self.eps
        x[1::2] = self.m
        return x

    @classmethod
    def unpack(cls, x: np.ndarray, t: float = 0.0) -> "FieldState":
        return cls(eps=x[0::2].copy(), m=x[1::2].copy(), t=t)

    def copy(self) -> "FieldState":
        return FieldState(self.eps.copy(), self.m.copy(), self.t)

    @classmethod
    def constant(cls, phase: PhasePoint, n: int, t: float = 0.0) -> "FieldState":
        return cls(np.full(n, phase.eps), np.full(n, phase.m), t)

    @classmethod
    def linear(cls, left: PhasePoint, right: PhasePoint, grid: Grid, t: float = 0.0) -> "FieldState":
        s = (grid.x - grid.l1) / (grid.l2 - grid.l1)
        return cls(
            left.eps + s * (right.eps - left.eps), left.m + s * (right.m - left.m), t
        )


class Regime(enum.Enum):
    ZERO_CHEMICAL_POTENTIAL = "zero-mu"
    ONE_SIDE_IMPERMEABLE = "impermeable"


class Mode(enum.Enum):
    STATIONARY = "stationary"
    TRANSIENT = "transient"


@dataclass(frozen=True)
class BcRegime:
    """Boundary-condition regime plus Dirichlet data at both ends.

    ``double_force`` selects natural double-force conditions in place of
    Dirichlet data on eps and m; it is part of the data model but not
    implemented by the assembly.
    """

    kind: Regime
    left: PhasePoint
    right: PhasePoint
    double_force: bool = field(default=False)

    @classmethod
    def zero_mu(cls, left, right) -> "BcRegime":
        return cls(Regime.ZERO_CHEMICAL_POTENTIAL, left, right)

    @classmethod
    def impermeable(cls, left, right) -> "BcRegime":
        return cls(Regime.ONE_SIDE_IMPERMEABLE, left, right)

    def check(self):
        if self.double_force:
            raise ConfigError("natural double-force boundary conditions are not implemented")
        if not isinstance(self.kind, Regime):
            raise ConfigError(f"unknown regime {self.kind!r}")
        for side in (self.left, self.right):
            if not (np.isfinite(side.m) and np.isfinite(side.eps)):
                raise ConfigError("Dirichlet data must be finite")


def second_derivative(f, i: int, h: float) -> float:
    """Three-point second difference at node i (interior nodes only)."""
    n = len(f)
    if not 1 <= i <= n - 2:
        raise IndexError(f"node {i} needs ghost values (n={n})")
    return (f[i - 1] - 2.0 * f[i] + f[i + 1]) / (h * h)


def second_difference(f: np.ndarray, h: float) -> np.ndarray:
    """Vectorised three-point second difference on interior nodes (length n-2)."""
    return (f[:-2] - 2.0 * f[1:-1] + f[2:]) / (h * h)


def _extrapolated_second_difference(f, h):
    d = second_difference(f, h)
    return np.concatenate(([2.0 * d[0] - d[1]], d, [2.0 * d[-1] - d[-2]]))


def chemical_potential_field(state: FieldState, params: ModelParams, grid: Grid,
                             regime: BcRegime | None = None) -> np.ndarray:
    """mu at every node.

    Interior nodes use the three-point stencil. Boundary values come from the
    ghost closure of ``regime``; without a regime the second differences are
    extrapolated linearly to the boundary instead.
    """
    eps, m, h = state.eps, state.m, grid.h
    if regime is None:
        e2 = _extrapolated_second_difference(eps, h)
        m2 = _extrapolated_second_difference(m, h)
        return dpsi_dm(m, eps, params) - params.k2 * e2 - params.k3 * m2
    mu = np.empty(state.n)
    mu[1:-1] = (
        dpsi_dm(m[1:-1], eps[1:-1], params)
        - params.k2 * second_difference(eps, h)
        - params.k3 * second_difference(m, h)
    )
    _close_mu(mu, regime)
    return mu


def _close_mu(mu: np.ndarray, regime: BcRegime):
    mu[0] = 0.0
    if regime.kind is Regime.ZERO_CHEMICAL_POTENTIAL:
        mu[-1] = 0.0
    else:
        mu[-1] = mu[-2]


def mechanical_residual_field(state: FieldState, params: ModelParams, grid: Grid,
                              regime: BcRegime | None = None) -> np.ndarray:
    """Generalised traction residual at every node.

    With a regime the boundary ghosts are chosen to cancel the traction, so
    the boundary entries are zero by construction.
    """
    eps, m, h = state.eps, state.m, grid.h
    if regime is None:
        e2 = _extrapolated_second_difference(eps, h)
        m2 = _extrapolated_second_difference(m, h)
        return dpsi_deps(m, eps, params) - params.k1 * e2 - params.k2 * m2
    out = np.zeros(state.n)
    out[1:-1] = (
        dpsi_deps(m[1:-1], eps[1:-1], params)
        - params.k1 * second_difference(eps, h)
        - params.k2 * second_difference(m, h)
    )
    return out


def ghost_values(state: FieldState, params: ModelParams, grid: Grid, regime: BcRegime):
    """Ghost values ``((eps_left, m_left), (eps_right, m_right))`` of the closure.

    At each end the ghosts solve ``k1 eps'' + k2 m'' = dpsi_deps`` and
    ``k2 eps'' + k3 m'' = dpsi_dm - mu_b`` with mu_b the closed boundary
    chemical potential. Returns None in the degenerate case k1*k3 = k2**2,
    where the ghosts are not unique.
    """
    if not params.strict_connection:
        return None
    mu = chemical_potential_field(state, params, grid, regime)
    h2 = grid.h**2
    kmat = np.array([[params.k1, params.k2], [params.k2, params.k3]])
    out = []
    for b, inner in ((0, 1), (-1, -2)):
        e, m = state.eps[b], state.m[b]
        rhs = np.array([dpsi_deps(m, e, params), dpsi_dm(m, e, params) - mu[b]])
        e2, m2 = np.linalg.solve(kmat, rhs)
        out.append(
            (h2 * e2 + 2.0 * e - state.eps[inner], h2 * m2 + 2.0 * m - state.m[inner])
        )
    return tuple(out)


def mass_coefficient(params: ModelParams, grid: Grid, dt: float) -> float:
    """Weight of (m - m_prev) in the scaled transient mass row."""
    return params.D * grid.h**2 / (params.rho0f**2 * dt)


def assemble_residual(state: FieldState, prev_state: FieldState | None, dt: float | None,
                      regime: BcRegime, mode: Mode, params: ModelParams,
                      grid: Grid) -> np.ndarray:
    """Residual vector of length 2n in interleaved ordering."""
    regime.check()
    if state.n != grid.n:
        raise ConfigError(f"state has {state.n} nodes, grid has {grid.n}")
    eps, m = state.eps, state.m
    res = np.empty(2 * grid.n)
    mech = mechanical_residual_field(state, params, grid, regime)
    mu = chemical_potential_field(state, params, grid, regime)
    res[2:-2:2] = mech[1:-1]
    if mode is Mode.STATIONARY:
        res[3:-2:2] = mu[1:-1]
    elif mode is Mode.TRANSIENT:
        if prev_state is None or dt is None or not dt > 0:
            raise ConfigError("transient assembly needs a previous state and dt > 0")
        c = mass_coefficient(params, grid, dt)
        res[3:-2:2] = c * (m[1:-1] - prev_state.m[1:-1]) - (mu[:-2] - 2.0 * mu[1:-1] + mu[2:])
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    res[0] = eps[0] - regime.left.eps
    res[1] = m[0] - regime.left.m
    res[-2] = eps[-1] - regime.right.eps
    res[-1] = m[-1] - regime.right.m
    return res


def assemble_jacobian(state: FieldState, dt: float | None, regime: BcRegime, mode: Mode,
                      params: ModelParams, grid: Grid) -> BandedMatrix:
    """Exact Jacobian of :func:`assemble_residual` in band storage.

    Mechanics rows couple nodes i-1..i+1 (offsets -2..+3); transient mass rows
    see mu at i-1..i+1 and hence nodes i-2..i+2 (offsets -5..+4).
    """
    regime.check()
    n = grid.n
    h2 = grid.h**2
    k1, k2, k3 = params.k1, params.k2, params.k3
    jac = BandedMatrix(2 * n, LOWER_BW, UPPER_BW)
    for r in (0, 1, 2 * n - 2, 2 * n - 1):
        jac.add([r], [r], [1.0])

    inner = np.arange(1, n - 1)
    d_mm, d_me, d_ee = d2psi(state.m[inner], state.eps[inner], params)

    # mechanics rows
    er, mr = 2 * inner, 2 * inner + 1
    jac.add(er, 2 * inner, d_ee + 2.0 * k1 / h2)
    jac.add(er, 2 * inner + 1, d_me + 2.0 * k2 / h2)
    for s in (-1, 1):
        jac.add(er, 2 * (inner + s), np.full(inner.size, -k1 / h2))
        jac.add(er, 2 * (inner + s) + 1, np.full(inner.size, -k2 / h2))

    # d mu_j / d x for interior j: list of (node offset, d/d eps, d/d m)
    dmu = [
        (0, d_me + 2.0 * k2 / h2, d_mm + 2.0 * k3 / h2),
        (-1, np.full(inner.size, -k2 / h2), np.full(inner.size, -k3 / h2)),
        (1, np.full(inner.size, -k2 / h2), np.full(inner.size, -k3 / h2)),
    ]

    if mode is Mode.STATIONARY:
        for off, de, dm in dmu:
            jac.add(mr, 2 * (inner + off), de)
            jac.add(mr, 2 * (inner + off) + 1, dm)
        return jac
    if mode is not Mode.TRANSIENT or dt is None or not dt > 0:
        raise ConfigError("transient Jacobian needs dt > 0")

    jac.add(mr, 2 * inner + 1, np.full(inner.size, mass_coefficient(params, grid, dt)))
    # row i gets -(mu_{i-1} - 2 mu_i + mu_{i+1}); mu_j expanded over interior j
    # (index into `inner` is j - 1). mu_0 = 0 always; mu_{n-1} is 0 or mu_{n-2}.
    weights = {-1: -1.0, 0: 2.0, 1: -1.0}
    impermeable = regime.kind is Regime.ONE_SIDE_IMPERMEABLE
    for s, w in weights.items():
        j = inner + s
        if impermeable:
            j = np.where(j == n - 1, n - 2, j)
        keep = (j >= 1) & (j <= n - 2)
        rows = mr[keep]
        jj = j[keep]
        for off, de, dm in dmu:
            jac.add(rows, 2 * (jj + off), w * de[jj - 1])
            jac.add(rows, 2 * (jj + off) + 1, w * dm[jj - 1])
    return jac
