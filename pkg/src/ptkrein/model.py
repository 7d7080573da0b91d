"""Complex PT-symmetric potentials V + i*gamma*W and problem parameters."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

POTENTIAL_TAGS = ("scarf2", "confining", "confining_scaled", "custom")


@dataclass(frozen=True)
class PotentialSpec:
    """One potential family.

    ``kind`` is one of POTENTIAL_TAGS.  ``v0`` parametrizes Scarf II,
    ``omega`` the two confining variants.  Custom potentials carry their own
    samples (``v_samples``, ``w_samples``) on a fixed symmetric grid.
    """

    kind: str
    v0: float | None = None
    omega: float | None = None
    v_samples: tuple | None = None
    w_samples: tuple | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_TAGS:
            raise ValueError(f"unknown potential {self.kind!r}; valid tags: {', '.join(POTENTIAL_TAGS)}")
        if self.kind == "scarf2" and not (self.v0 is not None and self.v0 > 0):
            raise ValueError("scarf2 requires v0 > 0")
        if self.kind in ("confining", "confining_scaled") and not (self.omega is not None and self.omega > 0):
            raise ValueError(f"{self.kind} requires omega > 0")
        if self.kind == "custom":
            if self.v_samples is None or self.w_samples is None:
                raise ValueError("custom potential requires v_samples and w_samples")
            v = np.asarray(self.v_samples, dtype=float)
            w = np.asarray(self.w_samples, dtype=float)
            if v.shape != w.shape or v.ndim != 1:
                raise ValueError("custom V and W samples must be 1-D arrays of equal length")
            check_parity(v, w)

    @property
    def decaying(self) -> bool:
        """True when V -> 0 at infinity, so a continuous band exists."""
        return self.kind == "scarf2"

    @classmethod
    def scarf2(cls, v0: float) -> "PotentialSpec":
        return cls("scarf2", v0=float(v0))

    @classmethod
    def confining(cls, omega: float) -> "PotentialSpec":
        return cls("confining", omega=float(omega))

    @classmethod
    def confining_scaled(cls, omega: float) -> "PotentialSpec":
        return cls("confining_scaled", omega=float(omega))

    @classmethod
    def custom(cls, v, w) -> "PotentialSpec":
        return cls("custom", v_samples=tuple(np.asarray(v, float)), w_samples=tuple(np.asarray(w, float)))


def check_parity(v: np.ndarray, w: np.ndarray, tol: float = 1e-12) -> None:
    """Reject samples (ordered on a symmetric grid) unless V is even and W odd."""
    scale = max(1.0, float(np.max(np.abs(v), initial=0.0)), float(np.max(np.abs(w), initial=0.0)))
    if np.max(np.abs(v - v[::-1]), initial=0.0) > tol * scale:
        raise ValueError("V samples are not even: V(x) != V(-x)")
    if np.max(np.abs(w + w[::-1]), initial=0.0) > tol * scale:
        raise ValueError("W samples are not odd: W(x) != -W(-x)")


def eval_potential(spec: PotentialSpec, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("potential evaluated at non-finite points")
    if spec.kind == "scarf2":
        sech = 1.0 / np.cosh(x)
        return -spec.v0 * sech**2, sech * np.tanh(x)
    if spec.kind == "confining":
        return spec.omega**2 * x**2, x * np.exp(-0.5 * x**2)
    if spec.kind == "confining_scaled":
        om = spec.omega
        return x**2, 2.0 * om**-1.5 * x * np.exp(-(x**2) / (2.0 * om))
    v = np.asarray(spec.v_samples)
    w = np.asarray(spec.w_samples)
    if v.shape != x.shape:
        raise ValueError(f"custom potential has {v.size} samples, grid has {x.size} points")
    return v.copy(), w.copy()


@dataclass(frozen=True)
class ProblemParams:
    mu: float
    gamma: float
    g: float
    potential: PotentialSpec

    def __post_init__(self):
        if self.g == 0:
            raise ValueError("nonlinearity coefficient g must be nonzero")

    def with_(self, **kw) -> "ProblemParams":
        return replace(self, **kw)
