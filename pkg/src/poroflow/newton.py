"""Banded direct solves and a damped Newton-Raphson iteration."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import lapack

from .errors import ConvergenceError, SingularMatrixError

log = logging.getLogger(__name__)


class BandedMatrix:
    """Square matrix in LAPACK band storage.

    ``ab[u + i - j, j] == A[i, j]`` for ``max(0, j - u) <= i <= min(N - 1, j + l)``.
    """

    def __init__(self, n: int, l: int, u: int, ab: np.ndarray | None = None):
        self.n, self.l, self.u = n, l, u
        self.ab = np.zeros((l + u + 1, n)) if ab is None else ab
        if self.ab.shape != (l + u + 1, n):
            raise ValueError(f"band storage has shape {self.ab.shape}, expected {(l + u + 1, n)}")

    @property
    def shape(self):
        return (self.n, self.n)

    def add(self, rows, cols, vals):
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        off = self.u + rows - cols
        if np.any(off < 0) or np.any(off > self.l + self.u):
            raise ValueError("entry outside the declared band")
        np.add.at(self.ab, (off, cols), vals)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for k in range(-self.u, self.l + 1):
            diag = self.ab[self.u + k, max(0, -k) : self.n - max(0, k)]
            a += np.diag(diag, -k)
        return a

    @classmethod
    def from_dense(cls, a: np.ndarray, l: int, u: int) -> "BandedMatrix":
        n = a.shape[0]
        out = cls(n, l, u)
        for k in range(-u, l + 1):
            d = np.diagonal(a, -k)
            out.ab[u + k, max(0, -k) : n - max(0, k)] = d
        outside = a - out.to_dense()
        if np.any(outside != 0):
            raise ValueError("matrix has entries outside the requested band")
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.n)
        for k in range(-self.u, self.l + 1):
            lo, hi = max(0, -k), self.n - max(0, k)
            # row i = j + k
            y[lo + k : hi + k] += self.ab[self.u + k, lo:hi] * x[lo:hi]
        return y

    def observed_bandwidth(self) -> tuple[int, int]:
        """(lower, upper) half-bandwidths actually occupied by nonzeros."""
        nz = np.nonzero(np.any(self.ab != 0, axis=1))[0]
        if nz.size == 0:
            return 0, 0
        offs = nz - self.u
        return int(max(offs.max(), 0)), int(max(-offs.min(), 0))


def solve_banded(matrix: BandedMatrix, rhs: np.ndarray, pivot_tol: float = 1e-14) -> np.ndarray:
    """Solve ``A x = rhs`` by LU with partial pivoting inside the band (LAPACK gbtrf/gbtrs)."""
    n, l, u = matrix.n, matrix.l, matrix.u
    work = np.zeros((2 * l + u + 1, n))
    work[l:, :] = matrix.ab
    lu, ipiv, info = lapack.dgbtrf(work, l, u)
    if info < 0:
        raise ValueError(f"dgbtrf: illegal argument {-info}")
    pivots = np.abs(lu[l + u, :])
    pmax = pivots.max() if n else 0.0
    if info > 0 or pmax == 0.0 or pivots.min() < pivot_tol * pmax:
        k = int(np.argmin(pivots))
        raise SingularMatrixError(
            f"pivot {pivots[k]:.3e} at column {k} below {pivot_tol:g} * max pivot {pmax:.3e}"
        )
    x, info = lapack.dgbtrs(lu, l, u, np.asarray(rhs, dtype=float), ipiv)
    if info != 0:
        raise ValueError(f"dgbtrs failed with info={info}")
    return x


@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-10
    max_iters: int = 50
    backtrack: float = 0.5
    min_step: float = 2.0**-20
    armijo: float = 1e-4
    # optional extra stopping requirements: a minimum number of iterations and
    # a bound on the max-norm of the last Newton update
    min_iters: int = 0
    tol_step: float | None = None

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class NewtonResult:
    solution: np.ndarray
    iterations: int
    residual_norm: float
    history: list


def newton_solve(
    initial: np.ndarray,
    residual_fn: Callable[[np.ndarray], np.ndarray],
    jacobian_fn: Callable[[np.ndarray], BandedMatrix],
    config: NewtonConfig = NewtonConfig(),
    linear_solver=solve_banded,
) -> NewtonResult:
    """Damped Newton iteration on the max-norm of the residual.

    Stops when the residual is below ``tol_residual``, at least ``min_iters``
    iterations have run and, if ``tol_step`` is set, the last update was below it.

    A step of length ``s`` is accepted once ``|r(x + s dx)| <= (1 - armijo*s) |r(x)|``;
    ``s`` is halved until it drops below ``min_step``.
    """
    x = np.array(initial, dtype=float)
    r = residual_fn(x)
    norm = float(np.max(np.abs(r)))
    history = [norm]
    if not np.isfinite(norm):
        raise ConvergenceError("non-finite residual at the initial guess", best=x, residual_norm=norm)
    it = 0
    last_dx = np.inf

    def converged():
        if norm > config.tol_residual or it < config.min_iters:
            return False
        return config.tol_step is None or (it > 0 and last_dx <= config.tol_step)

    while not converged():
        if it >= config.max_iters:
            raise ConvergenceError(
                f"Newton did not converge in {config.max_iters} iterations (|r|={norm:.3e})",
                best=x,
                residual_norm=norm,
            )
        try:
            dx = linear_solver(jacobian_fn(x), -r)
        except SingularMatrixError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}", best=x, residual_norm=norm) from exc
        step = 1.0
        while True:
            x_try = x + step * dx
            r_try = residual_fn(x_try)
            n_try = float(np.max(np.abs(r_try)))
            if np.isfinite(n_try) and (
                n_try <= (1.0 - config.armijo * step) * norm
                # a full step may trade a tiny residual for another one below tolerance
                or (step == 1.0 and n_try <= config.tol_residual)
            ):
                break
            step *= config.backtrack
            if step < config.min_step:
                break
        if step < config.min_step:
            if norm <= config.tol_residual and it >= config.min_iters:
                # no further decrease is possible at this noise level
                break
            raise ConvergenceError(f"line search stalled at |r|={norm:.3e}", best=x, residual_norm=norm)
        x, r, norm = x_try, r_try, n_try
        last_dx = float(np.max(np.abs(dx)))
        it += 1
        history.append(norm)
        log.debug("newton it=%d step=%g |r|=%.3e", it, step, norm)
    return NewtonResult(solution=x, iterations=it, residual_norm=norm, history=history)
