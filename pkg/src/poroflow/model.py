"""Material parameters and the bulk potential energy density.

The fields are the solid strain ``eps`` and the fluid mass density increment
``m``. The bulk potential is the Biot quadratic form plus a quartic term that
produces a second, fluid-rich equilibrium above a critical pressure::

    psi_B(m, eps) = p*eps + eps**2/2 + a/2*(m - b*eps)**2
    psi(m, eps)   = alpha/12 * m**2 * (3m**2 - 8b*eps*m + 6b**2*eps**2) + psi_B

All derivatives are hand-coded; every function broadcasts over numpy arrays.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError

PARAM_KEYS = ("a", "b", "alpha", "p", "k1", "k2", "k3", "D", "rho0f")


@dataclass(frozen=True)
class ModelParams:
    """All material and control constants (dimensionless).

    ``D`` is the Darcy drag coefficient and ``rho0f`` the reference fluid
    density; together they only rescale time in the transient problem.
    """

    a: float = 0.5
    b: float = 1.0
    alpha: float = 100.0
    p: float = 0.0
    k1: float = 1e-3
    k2: float = 1e-3
    k3: float = 1e-3
    D: float = 1.0
    rho0f: float = 1.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValidationError(problems)

    def problems(self) -> list[str]:
        out = []
        for name in ("a", "b", "alpha", "D", "rho0f"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                out.append(f"{name} must be > 0 (got {v!r})")
        if not (np.isfinite(self.p) and self.p >= 0):
            out.append(f"p must be >= 0 (got {self.p!r})")
        for name in ("k1", "k3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                out.append(f"{name} must be > 0 (got {v!r})")
        if not np.isfinite(self.k2):
            out.append(f"k2 must be finite (got {self.k2!r})")
        elif not out and self.gradient_determinant < -_det_tol(self):
            out.append(
                f"k1*k3 - k2**2 must be >= 0 (got {self.gradient_determinant:.3g})"
            )
        return out

    @property
    def gradient_determinant(self) -> float:
        return self.k1 * self.k3 - self.k2 * self.k2

    @property
    def strict_connection(self) -> bool:
        """True when k1*k3 - k2**2 > 0, the regime where a connection exists."""
        return self.gradient_determinant > _det_tol(self)

    def with_pressure(self, p: float) -> "ModelParams":
        return replace(self, p=float(p))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        keys = set(data)
        expected = set(PARAM_KEYS)
        problems = []
        if keys - expected:
            problems.append(f"unknown parameter keys: {sorted(keys - expected)}")
        if expected - keys:
            problems.append(f"missing parameter keys: {sorted(expected - keys)}")
        for k in keys & expected:
            v = data[k]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                problems.append(f"{k} must be a number (got {v!r})")
        if problems:
            raise ValidationError(problems)
        return cls(**{k: float(data[k]) for k in PARAM_KEYS})

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ModelParams":
        return cls.from_json(Path(path).read_text())


def _det_tol(params: ModelParams) -> float:
    # k's are O(1e-3) in practice; products carry relative roundoff only.
    return 1e-12 * (params.k1 * params.k3 + params.k2 * params.k2)


@dataclass(frozen=True)
class PhasePoint:
    """A constant equilibrium state (m, eps)."""

    m: float
    eps: float

    def as_dict(self) -> dict:
        return {"m": self.m, "eps": self.eps}


def psi_biot(m, eps, params: ModelParams):
    """Biot potential energy density."""
    a, b = params.a, params.b
    return params.p * eps + 0.5 * eps * eps + 0.5 * a * (m - b * eps) ** 2


def quartic_part(m, eps, params: ModelParams):
    al, b = params.alpha, params.b
    return al / 12.0 * m * m * (3.0 * m * m - 8.0 * b * eps * m + 6.0 * b * b * eps * eps)


def psi_total(m, eps, params: ModelParams):
    """Total bulk potential energy density psi(m, eps)."""
    return quartic_part(m, eps, params) + psi_biot(m, eps, params)


def dpsi_dm(m, eps, params: ModelParams):
    a, b, al = params.a, params.b, params.alpha
    # factored so the standard locus m = b*eps gives exactly zero
    d = m - b * eps
    return d * (al * m * d + a)


def dpsi_deps(m, eps, params: ModelParams):
    a, b, al = params.a, params.b, params.alpha
    return (
        -2.0 / 3.0 * al * b * m**3
        + al * b * b * m * m * eps
        + params.p
        + eps
        - a * b * (m - b * eps)
    )


def d2psi(m, eps, params: ModelParams):
    """Second partials ``(d2_mm, d2_me, d2_ee)`` of psi_total."""
    a, b, al = params.a, params.b, params.alpha
    d2_mm = al * (3.0 * m * m - 4.0 * b * eps * m + b * b * eps * eps) + a
    d2_me = al * (-2.0 * b * m * m + 2.0 * b * b * eps * m) - a * b
    d2_ee = al * b * b * m * m + 1.0 + a * b * b
    return d2_mm, d2_me, d2_ee
