"""Spectral stability problem L v = -i*lambda*sigma3 v and its adjoint.

Both are solved as standard dense eigenproblems of M = i*sigma3*L and
M_adj = i*sigma3*L_adj, where L_adj flips the sign of i*gamma*W.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import EigensolverFailure
from .grid import MappedGrid, inner_product
from .stationary import StationaryState, assemble_jacobian

log = logging.getLogger(__name__)

ISOLATED = "isolated-imaginary"
QUADRUPLET = "complex-quadruplet"
BAND = "continuous-band"
GAUGE = "zero-gauge"


@dataclass(frozen=True)
class SpectralTolerances:
    tol_zero: float = 1e-6
    tol_re: float = 1e-6
    band_margin_frac: float = 0.02
    loc_threshold: float = 0.5
    x_loc: float | None = None  # defaults to the grid scale L
    adjoint_match_tol: float = 1e-6
    gauge_overlap: float = 0.5
    # the discretized gauge pair splits to |lambda| ~ 1e-7..1e-6, so the zero
    # test uses a wider radius and relies on the overlap with (i*phi, -i*conj(phi))
    gauge_radius: float = 1e-4


@dataclass(eq=False)
class EigenPair:
    lam: complex
    y: np.ndarray
    z: np.ndarray
    classification: str
    residual: float
    localization: float
    adjoint_y: np.ndarray | None = None
    adjoint_z: np.ndarray | None = None
    adjoint_lam: complex | None = None

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.y, self.z])

    @property
    def adjoint_vector(self) -> np.ndarray | None:
        if self.adjoint_y is None:
            return None
        return np.concatenate([self.adjoint_y, self.adjoint_z])


@dataclass(eq=False)
class SpectrumSnapshot:
    state: StationaryState
    pairs: list
    continuous_band_edges: tuple | None
    tolerances: SpectralTolerances = field(default_factory=SpectralTolerances)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def of_class(self, *kinds: str) -> list:
        return [p for p in self.pairs if p.classification in kinds]

    @property
    def unstable(self) -> bool:
        return any(p.classification != GAUGE and abs(p.lam.real) > self.tolerances.tol_re for p in self.pairs)


def sigma3(m: int) -> np.ndarray:
    return np.concatenate([np.ones(m), -np.ones(m)])


def assemble_stability_matrix(state: StationaryState, grid: MappedGrid | None = None) -> np.ndarray:
    grid = grid or state.grid
    L = assemble_jacobian(state.phi, state.params, grid)
    return 1j * sigma3(grid.size)[:, None] * L


def assemble_adjoint_matrix(state: StationaryState, grid: MappedGrid | None = None) -> np.ndarray:
    grid = grid or state.grid
    L = assemble_jacobian(state.phi, state.params, grid, adjoint=True)
    return 1j * sigma3(grid.size)[:, None] * L


def gauge_vector(phi: np.ndarray) -> np.ndarray:
    return np.concatenate([1j * phi, -1j * np.conj(phi)])


def _normalize_columns(V: np.ndarray, grid: MappedGrid) -> np.ndarray:
    w = np.tile(grid.quad_weights, 2)
    nrm = np.sqrt(np.sum(w[:, None] * np.abs(V) ** 2, axis=0))
    return V / nrm[None, :]


def _sorted_eig(M: np.ndarray):
    try:
        lam, V = sla.eig(M, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(lam)):
        raise EigensolverFailure("non-finite eigenvalues")
    # fixed order (Im, Re) so every tolerance-based step below is deterministic
    order = np.lexsort((np.round(lam.real, 12), np.round(lam.imag, 12)))
    return lam[order], V[:, order]


def band_edge(state: StationaryState) -> float | None:
    if not state.params.potential.decaying:
        return None
    return abs(state.params.mu)


def localization(v: np.ndarray, grid: MappedGrid, x_loc: float) -> float:
    """Fraction of the (stacked) vector's L2 mass inside |x| <= x_loc."""
    m = grid.size
    w = grid.quad_weights
    dens = w * (np.abs(v[:m]) ** 2 + np.abs(v[m:]) ** 2)
    total = dens.sum()
    if total == 0:
        return 0.0
    return float(dens[np.abs(grid.x) <= x_loc].sum() / total)


def classify_eigenvalue(
    lam: complex,
    vec: np.ndarray,
    state: StationaryState,
    tol: SpectralTolerances | None = None,
    loc: float | None = None,
) -> str:
    tol = tol or SpectralTolerances()
    grid = state.grid
    if abs(lam) < max(tol.tol_zero, tol.gauge_radius):
        g = gauge_vector(state.phi)
        gn = np.sqrt(inner_product(g, g, grid).real)
        vn = np.sqrt(inner_product(vec, vec, grid).real)
        if gn > 0 and vn > 0 and abs(inner_product(vec, g, grid)) / (gn * vn) > tol.gauge_overlap:
            return GAUGE
    edge = band_edge(state)
    if edge is not None:
        margin = tol.band_margin_frac * edge
        if loc is None:
            loc = localization(vec, grid, tol.x_loc or grid.scale)
        # grid-trapped high-frequency modes can look localized, so on-axis
        # eigenvalues strictly beyond the edge are band modes regardless
        if abs(lam.imag) >= edge - margin and loc < tol.loc_threshold:
            return BAND
        if abs(lam.imag) > edge + margin and abs(lam.real) <= tol.tol_re:
            return BAND
    if abs(lam.real) > tol.tol_re:
        return QUADRUPLET
    return ISOLATED


def solve_spectrum(state: StationaryState, grid: MappedGrid | None = None, tol: SpectralTolerances | None = None) -> SpectrumSnapshot:
    grid = grid or state.grid
    tol = tol or SpectralTolerances()
    m = grid.size
    M = assemble_stability_matrix(state, grid)
    Ma = assemble_adjoint_matrix(state, grid)
    lam, V = _sorted_eig(M)
    lam_a, Va = _sorted_eig(Ma)
    V = _normalize_columns(V, grid)
    Va = _normalize_columns(Va, grid)

    x_loc = tol.x_loc or grid.scale
    s3 = sigma3(m)
    L = assemble_jacobian(state.phi, state.params, grid)
    scale = max(1.0, float(np.max(np.abs(M))))
    pairs = []
    for k in range(lam.size):
        v = V[:, k]
        res = float(np.max(np.abs(L @ v + 1j * lam[k] * s3 * v)) / scale)
        loc = localization(v, grid, x_loc)
        cls = classify_eigenvalue(lam[k], v, state, tol, loc=loc)
        pairs.append(EigenPair(lam[k], v[:m].copy(), v[m:].copy(), cls, res, loc))

    _match_adjoints(pairs, lam_a, Va, m, tol)
    return SpectrumSnapshot(state, pairs, _edges(state), tol)


def _edges(state):
    e = band_edge(state)
    return None if e is None else (-e, e)


def _match_adjoints(pairs, lam_a, Va, m, tol: SpectralTolerances) -> None:
    """Pair isolated eigenvalues with adjoint eigenvalues by optimal assignment."""
    idx = [i for i, p in enumerate(pairs) if p.classification in (ISOLATED, QUADRUPLET)]
    if not idx:
        return
    lam = np.array([pairs[i].lam for i in idx])
    cand = np.flatnonzero(np.min(np.abs(lam_a[:, None] - lam[None, :]), axis=1) < 10 * tol.adjoint_match_tol + 1e-3)
    if cand.size == 0:
        return
    cost = np.abs(lam[:, None] - lam_a[cand][None, :])
    rows, cols = linear_sum_assignment(cost)
    for r, c in zip(rows, cols):
        if cost[r, c] <= tol.adjoint_match_tol:
            p = pairs[idx[r]]
            va = Va[:, cand[c]]
            p.adjoint_y = va[:m].copy()
            p.adjoint_z = va[m:].copy()
            p.adjoint_lam = complex(lam_a[cand[c]])
        else:
            log.debug("no adjoint eigenvalue within %.1e of %s", tol.adjoint_match_tol, pairs[idx[r]].lam)
