"""Krein quantity K = <v, sigma3 v#> for isolated eigenvalues.

Eigenvectors and adjoint eigenvectors are rotated to the PT gauge
Y(x) = conj(Y(-x)), Z(x) = conj(Z(-x)), which leaves a sign ambiguity.  The
sign of v# is fixed at gamma = 0 by v# = v and continued along a sweep by
choosing, at every step, the orientation closest to the previous one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdjointUnavailable, AmbiguousSign, PhaseIncoherent
from .grid import MappedGrid, inner_product, norm
from .linearization import EigenPair

AMP_FLOOR = 1e-4
PHASE_VARIANCE_MAX = 1e-2


@dataclass
class KreinRecord:
    lam: complex
    krein: complex
    signature: int | None
    branch_id: int = -1
    phase_theta: float = 0.0
    adjoint_sign: int = 1

    @property
    def defined(self) -> bool:
        return self.signature is not None


def pt_phase_fix(y, z, grid: MappedGrid, amp_floor: float = AMP_FLOOR, max_variance: float = PHASE_VARIANCE_MAX):
    """Rotate (y, z) by exp(i*theta) so both components are PT-symmetric.

    Each point with |v(x_j)| above amp_floor*max|v| gives an estimate of
    2*theta = arg(conj(v(-x_j)) / v(x_j)); the estimates are combined by a
    circular mean, dropping those more than three circular standard
    deviations away.  theta is returned in [0, pi); theta + pi is the
    other, equally valid, orientation.
    """
    y = np.asarray(y, dtype=complex)
    z = np.asarray(z, dtype=complex)
    v = np.concatenate([y, z])
    vr = np.concatenate([grid.reflect(y), grid.reflect(z)])
    mag = np.abs(v)
    top = mag.max()
    if top == 0:
        raise PhaseIncoherent("zero vector has no phase")
    keep = (mag > amp_floor * top) & (np.abs(vr) > amp_floor * top)
    ratio = np.conj(vr[keep]) / v[keep]
    u = ratio / np.abs(ratio)

    mean = u.mean()
    R = abs(mean)
    if R < 1.0 - 1e-12:
        circ_std = np.sqrt(-2.0 * np.log(R))
        dev = np.abs(np.angle(u * np.conj(mean) / R))
        inliers = dev <= 3.0 * circ_std
        if inliers.sum() >= max(1, u.size // 2):
            u = u[inliers]
            mean = u.mean()
            R = abs(mean)
    if 1.0 - R > max_variance:
        raise PhaseIncoherent(f"circular variance {1.0 - R:.3e} of pointwise PT phases exceeds {max_variance:.1e}")
    theta = (0.5 * np.angle(mean)) % np.pi
    rot = np.exp(1j * theta)
    return rot * y, rot * z, float(theta)


def pt_residual(y, z, grid: MappedGrid) -> float:
    """max |v(x) - conj(v(-x))| relative to max |v|."""
    v = np.concatenate([y, z])
    vr = np.concatenate([grid.reflect(y), grid.reflect(z)])
    return float(np.max(np.abs(v - np.conj(vr))) / np.max(np.abs(v)))


def normalize(v: np.ndarray, grid: MappedGrid) -> np.ndarray:
    return v / norm(v, grid)


def krein_quantity(pair: EigenPair, grid: MappedGrid) -> complex:
    """K = int (Y conj(Y#) - Z conj(Z#)) dx with the vectors as stored on pair."""
    if pair.adjoint_y is None:
        raise AdjointUnavailable(f"no adjoint eigenvector matched to lambda = {pair.lam}")
    return inner_product(pair.y, pair.adjoint_y, grid) - inner_product(pair.z, pair.adjoint_z, grid)


def krein_of(v: np.ndarray, va: np.ndarray, grid: MappedGrid) -> complex:
    m = grid.size
    return inner_product(v[:m], va[:m], grid) - inner_product(v[m:], va[m:], grid)


def hamiltonian_krein(pair: EigenPair, grid: MappedGrid, gamma: float) -> float:
    """-i*lambda * int (|Y|^2 - |Z|^2) dx, valid only in the Hamiltonian case."""
    if gamma != 0:
        raise ValueError("the Hamiltonian Krein quantity requires gamma = 0")
    val = -1j * pair.lam * (inner_product(pair.y, pair.y, grid) - inner_product(pair.z, pair.z, grid))
    return float(val.real)


def orientation(cur: np.ndarray, prev: np.ndarray, grid: MappedGrid, ambiguity: float = 0.1) -> int:
    """+1 if cur is closer to prev than -cur is, else -1.

    Raises AmbiguousSign when the two distances are within ``ambiguity``
    (relative) of each other.
    """
    d_minus = norm(cur - prev, grid)
    d_plus = norm(cur + prev, grid)
    if abs(d_minus - d_plus) <= ambiguity * max(d_minus, d_plus):
        raise AmbiguousSign(f"|v - v_prev| = {d_minus:.3f}, |v + v_prev| = {d_plus:.3f}")
    return 1 if d_minus < d_plus else -1


def continue_adjoint_sign(prev_adjoint: np.ndarray, cur_adjoint: np.ndarray, grid: MappedGrid, ambiguity: float = 0.1) -> int:
    return orientation(cur_adjoint, prev_adjoint, grid, ambiguity)


def linear_limit_krein(v: np.ndarray, block: str, grid: MappedGrid) -> float:
    """PT-Krein quantity of a scalar-block eigenfunction at phi = 0.

    Y block: int Y(x) conj(Y(-x)) dx (adjoint Y#(x) = Y(-x)).
    Z block: int Z(x) conj(Z(-x)) dx, which is what K gives with the
    adjoint Z#(x) = -Z(-x).
    """
    if block not in ("Y", "Z"):
        raise ValueError("block must be 'Y' or 'Z'")
    v = np.asarray(v, dtype=complex)
    return float(inner_product(v, grid.reflect(v), grid).real)


def linear_limit_adjoint(y: np.ndarray, z: np.ndarray, grid: MappedGrid) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint eigenvector at phi = 0: Y#(x) = Y(-x), Z#(x) = -Z(-x)."""
    return grid.reflect(y), -grid.reflect(z)


def record_for(pair: EigenPair, grid: MappedGrid, branch_id: int = -1, theta: float = 0.0, adjoint_sign: int = 1,
               reality_tol: float = 1e-6) -> KreinRecord:
    K = krein_quantity(pair, grid)
    sig = None
    if abs(K) > 0:
        sig = 1 if K.real > 0 else -1
    return KreinRecord(pair.lam, K, sig, branch_id, theta, adjoint_sign)


def linear_limit_orientation(v: np.ndarray, va: np.ndarray, grid: MappedGrid) -> tuple[int, float]:
    """Sign s making s*va closest to the small-amplitude adjoint of v.

    At phi = 0 the adjoint is (Y(-x), -Z(-x)) exactly; away from that limit
    the relation still holds approximately for modes that live mostly where
    phi is small.  Returns (s, |overlap|) with unit-normalized inputs; the
    caller decides whether the overlap is large enough to trust.
    """
    m = grid.size
    lin = np.concatenate(linear_limit_adjoint(v[:m], v[m:], grid))
    c = inner_product(va, lin, grid) / (norm(va, grid) * norm(lin, grid))
    return (1 if c.real >= 0 else -1), float(abs(c))


def hamiltonian_orientation(v: np.ndarray, va: np.ndarray, grid: MappedGrid) -> int:
    """Sign s making s*va closest to v (at gamma = 0 the adjoint equals v)."""
    c = inner_product(va, v, grid)
    return 1 if c.real >= 0 else -1
