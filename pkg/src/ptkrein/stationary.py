"""PT-symmetric stationary modes of the NLSE with a complex potential.

Solves  F(phi) = (-d^2/dx^2 + V + i*gamma*W - mu - g|phi|^2) phi = 0
by Newton's method restricted to fields with phi(x) = conj(phi(-x)).
On that subspace the gauge mode (i*phi, -i*conj(phi)) is excluded, so the
restricted Jacobian is invertible away from folds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import hermite

from .errors import ConvergedToZero, NoConvergence, SingularJacobian
from .grid import MappedGrid, inner_product
from .model import ProblemParams, eval_potential

log = logging.getLogger(__name__)

BRANCH_LABELS = ("scarf-1", "scarf-2", "confining-1", "confining-2", "confining-3", "confining-4")
ZERO_POWER = 1e-10


@dataclass(frozen=True, eq=False)
class StationaryState:
    phi: np.ndarray
    params: ProblemParams
    grid: MappedGrid
    residual_inf: float
    power: float
    branch_label: str = ""
    iterations: int = 0
    history: tuple = field(default=(), repr=False)


def potential_terms(params: ProblemParams, grid: MappedGrid) -> np.ndarray:
    """Diagonal V + i*gamma*W - mu on the interior points."""
    V, W = eval_potential(params.potential, grid.x)
    return V + 1j * params.gamma * W - params.mu


def residual(phi, params: ProblemParams, grid: MappedGrid) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (grid.size,):
        raise ValueError(f"phi has shape {phi.shape}, grid expects ({grid.size},)")
    q = potential_terms(params, grid)
    return -grid.d2_mapped @ phi + (q - params.g * np.abs(phi) ** 2) * phi


def jacobian_blocks(phi, params: ProblemParams, grid: MappedGrid):
    """Return (A, B) so that the linearization is du -> A du + B conj(du)."""
    phi = np.asarray(phi, dtype=complex)
    q = potential_terms(params, grid)
    A = -grid.d2_mapped + np.diag(q - 2.0 * params.g * np.abs(phi) ** 2)
    B = np.diag(-params.g * phi**2)
    return A, B


def assemble_jacobian(phi, params: ProblemParams, grid: MappedGrid, adjoint: bool = False) -> np.ndarray:
    """Block Jacobian acting on stacked (u, conj(u)).

    With ``adjoint=True`` the sign of i*gamma*W is flipped in both diagonal
    blocks, which is the operator of the adjoint spectral problem.
    """
    phi = np.asarray(phi, dtype=complex)
    V, W = eval_potential(params.potential, grid.x)
    base = V - params.mu - 2.0 * params.g * np.abs(phi) ** 2
    s = -1.0 if adjoint else 1.0
    m = grid.size
    J = np.empty((2 * m, 2 * m), dtype=complex)
    J[:m, :m] = -grid.d2_mapped + np.diag(base + s * 1j * params.gamma * W)
    J[m:, m:] = -grid.d2_mapped + np.diag(base - s * 1j * params.gamma * W)
    J[:m, m:] = np.diag(-params.g * phi**2)
    J[m:, :m] = np.diag(-params.g * np.conj(phi) ** 2)
    return J


def pt_project(phi, grid: MappedGrid) -> np.ndarray:
    """Closest field with phi(x) = conj(phi(-x)).

    On the symmetric Chebyshev nodes this is the same as keeping the real
    part of even-index coefficients and the imaginary part of odd-index ones.
    """
    phi = np.asarray(phi, dtype=complex)
    return 0.5 * (phi + np.conj(grid.reflect(phi)))


def cheb_coefficients(values, grid: MappedGrid) -> np.ndarray:
    """Chebyshev coefficients c_0..c_N of the interpolant with zero endpoints."""
    n = grid.n
    u = np.zeros(n + 1, dtype=complex)
    u[1:-1] = values
    k = np.arange(n + 1)
    T = np.cos(np.outer(k, k) * np.pi / n)
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    c = (2.0 / n) * (T * w[None, :]) @ u
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


class PTBasis:
    """Real coordinates for PT-symmetric vectors on a grid.

    A PT-symmetric field is fixed by Re/Im on the x > 0 half plus the real
    value at x = 0 (present when N is even), N-1 real numbers in total.
    """

    def __init__(self, grid: MappedGrid):
        m = grid.size
        h = m // 2
        self.m, self.h = m, h
        self.center = m % 2 == 1
        P = np.zeros((m, m), dtype=complex)
        k = np.arange(h)
        P[k, k] = 1.0
        P[k, h + k] = 1j
        P[m - 1 - k, k] = 1.0
        P[m - 1 - k, h + k] = -1j
        if self.center:
            P[h, 2 * h] = 1.0
        self.P = P

    def to_field(self, r: np.ndarray) -> np.ndarray:
        return self.P @ r

    def coords(self, v: np.ndarray) -> np.ndarray:
        """Real coordinates of (the PT-symmetric part of) v, row-wise for matrices."""
        h = self.h
        parts = [v[:h].real, v[:h].imag]
        if self.center:
            parts.append(v[h : h + 1].real)
        return np.concatenate(parts, axis=0)


def _restricted_step(phi, F, params, grid, basis: PTBasis) -> np.ndarray:
    A, B = jacobian_blocks(phi, params, grid)
    C = A @ basis.P + B @ np.conj(basis.P)
    S = basis.coords(C)
    rhs = basis.coords(F)
    try:
        lu, piv = sla.lu_factor(S, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularJacobian(str(exc)) from exc
    piv_mag = np.abs(np.diag(lu))
    if piv_mag.min() <= 1e-14 * piv_mag.max():
        raise SingularJacobian(
            f"restricted Jacobian is numerically singular (pivot ratio {piv_mag.min() / piv_mag.max():.2e})"
        )
    dr = sla.lu_solve((lu, piv), rhs)
    return basis.to_field(dr)


def roundoff_floor(phi, grid: MappedGrid) -> float:
    """Smallest ||F||_inf resolvable in double precision: eps*||D2||*|phi|."""
    d2norm = float(np.max(np.sum(np.abs(grid.d2_mapped), axis=1)))
    return 16.0 * np.finfo(float).eps * d2norm * max(1.0, float(np.max(np.abs(phi))))


def newton_solve(
    initial,
    params: ProblemParams,
    grid: MappedGrid,
    tol: float = 1e-12,
    max_iter: int = 50,
    branch_label: str = "",
) -> StationaryState:
    """Undamped Newton iteration in the PT-symmetric subspace.

    Stops when ||F||_inf <= max(tol, roundoff_floor); at N = 500 the floor
    of the residual is a few 1e-12 and sits above the default tol.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    basis = PTBasis(grid)
    phi = pt_project(initial, grid)
    F = residual(phi, params, grid)
    r = float(np.max(np.abs(F)))
    history = [r]
    target = max(tol, roundoff_floor(phi, grid))
    while r > target:
        if len(history) > max_iter:
            raise NoConvergence(max_iter, r)
        step = _restricted_step(phi, F, params, grid, basis)
        phi = pt_project(phi - step, grid)
        if not np.all(np.isfinite(phi)):
            raise NoConvergence(len(history), r)
        F = residual(phi, params, grid)
        r = float(np.max(np.abs(F)))
        history.append(r)
        target = max(tol, roundoff_floor(phi, grid))
    power = inner_product(phi, phi, grid).real
    if power < ZERO_POWER:
        raise ConvergedToZero(power)
    log.debug("newton: %d iterations, residual %.3e, power %.6g", len(history) - 1, r, power)
    return StationaryState(
        phi=phi,
        params=params,
        grid=grid,
        residual_inf=r,
        power=power,
        branch_label=branch_label,
        iterations=len(history) - 1,
        history=tuple(history),
    )


def solve_with_retries(guess_fn, params, grid, amplitudes=(1.0, 0.5, 2.0), **kw) -> StationaryState:
    """Try Newton from guess_fn(a) for each amplitude; re-raise the last failure."""
    last = None
    for a in amplitudes:
        try:
            return newton_solve(guess_fn(a), params, grid, **kw)
        except (NoConvergence, SingularJacobian, ConvergedToZero) as exc:
            last = exc
            log.debug("retry: amplitude %g failed: %s", a, exc)
    raise last


def hermite_function(k: int, x: np.ndarray) -> np.ndarray:
    """L2-normalized Gauss-Hermite function H_k(x) exp(-x^2/2)."""
    from math import factorial, pi, sqrt

    c = np.zeros(k + 1)
    c[k] = 1.0
    norm = 1.0 / sqrt(2.0**k * factorial(k) * sqrt(pi))
    return norm * hermite.hermval(x, c) * np.exp(-0.5 * x**2)


def linear_eigenvalues(params: ProblemParams, grid: MappedGrid, count: int = 6) -> np.ndarray:
    """Lowest eigenvalues (by real part) of -d^2 + V + i*gamma*W."""
    V, W = eval_potential(params.potential, grid.x)
    H = -grid.d2_mapped + np.diag(V + 1j * params.gamma * W)
    ev = np.linalg.eigvals(H)
    ev = ev[np.argsort(ev.real)]
    return ev[:count]


def _branch_index(branch: str) -> tuple[str, int]:
    if branch not in BRANCH_LABELS:
        raise ValueError(f"unknown branch {branch!r}; valid labels: {', '.join(BRANCH_LABELS)}")
    family, k = branch.split("-")
    return family, int(k)


def guess_amplitude(branch: str, params: ProblemParams, grid: MappedGrid) -> float:
    """Small-amplitude balance a^2 = (mu_lin - mu)/g, else 1.

    mu_lin is the real part of the linear eigenvalue the branch bifurcates
    from; the shape overlap factor is ignored, it only seeds Newton.
    """
    family, k = _branch_index(branch)
    try:
        ev = linear_eigenvalues(params, grid, count=k)
    except np.linalg.LinAlgError:
        return 1.0
    mu_lin = ev[k - 1].real
    if abs(ev[k - 1].imag) > 1e-6:
        return 1.0
    a2 = (mu_lin - params.mu) / params.g
    if a2 <= 0:
        return 1.0
    return float(np.sqrt(a2))


def initial_guess(branch: str, params: ProblemParams, grid: MappedGrid, amplitude: float | None = None) -> np.ndarray:
    family, k = _branch_index(branch)
    x = grid.x
    if family == "scarf":
        sech = 1.0 / np.cosh(x)
        shape = sech if k == 1 else sech * np.tanh(x)
        if k == 2:
            shape = 1j * shape  # odd profiles are imaginary under PT symmetry
    else:
        om = params.potential.omega if params.potential.kind == "confining" else 1.0
        xi = np.sqrt(om) * x
        shape = hermite_function(k - 1, xi).astype(complex)
        shape /= np.max(np.abs(shape))
        if (k - 1) % 2 == 1:
            shape = 1j * shape
    a = guess_amplitude(branch, params, grid) if amplitude is None else amplitude
    return a * shape


def exact_scarf_solution(x, v0: float, gamma: float, g: float) -> tuple[np.ndarray, float]:
    """Closed-form mode A sech(x) exp(i*beta*arctan(sinh x)) for Scarf II.

    Exists at mu = -1 with beta = -gamma/3 and A^2 = (2 + beta^2 - v0)/g.
    Returns (phi, mu).
    """
    beta = -gamma / 3.0
    a2 = (2.0 + beta**2 - v0) / g
    if a2 <= 0:
        raise ValueError("no closed-form mode for these parameters (A^2 <= 0)")
    x = np.asarray(x, dtype=float)
    phi = np.sqrt(a2) / np.cosh(x) * np.exp(1j * beta * np.arctan(np.sinh(x)))
    return phi, -1.0


def homotopy(
    phi,
    params: ProblemParams,
    axis: str,
    target: float,
    grid: MappedGrid,
    step: float = 0.05,
    max_step: float = 0.5,
    min_step: float = 1e-6,
    **newton_kw,
) -> StationaryState:
    """Move a converged mode from params to params[axis] = target.

    Natural-parameter continuation with a secant predictor; the step doubles
    after each success and halves after each failure.
    """
    current = getattr(params, axis)
    state = newton_solve(phi, params, grid, **newton_kw)
    prev = None
    direction = np.sign(target - current)
    h = step
    while direction * (target - current) > 1e-14:
        nxt = current + direction * min(h, abs(target - current))
        guess = state.phi
        if prev is not None:
            t = (nxt - current) / (current - prev[0])
            guess = state.phi + t * (state.phi - prev[1])
        try:
            new = newton_solve(guess, params.with_(**{axis: nxt}), grid, **newton_kw)
        except (NoConvergence, SingularJacobian, ConvergedToZero):
            h *= 0.5
            if h < min_step:
                raise
            continue
        prev = (current, state.phi)
        current, state = nxt, new
        h = min(2 * h, max_step)
    return state


def find_state(branch: str, params: ProblemParams, grid: MappedGrid, **newton_kw) -> StationaryState:
    """Locate a mode of ``branch`` at ``params``.

    Confining branches (and Scarf II branches whose direct guess fails) are
    reached from the linear limit: Newton next to the linear eigenvalue the
    branch bifurcates from, then continuation in mu.  A direct shaped guess
    far from the linear limit tends to fall onto the ground state.
    """
    family, k = _branch_index(branch)
    state = None
    if family == "scarf":
        a = guess_amplitude(branch, params, grid)
        try:
            state = solve_with_retries(
                lambda s: initial_guess(branch, params, grid, amplitude=s),
                params, grid, amplitudes=(a, a / 2, 2 * a), **newton_kw,
            )
        except (NoConvergence, SingularJacobian, ConvergedToZero):
            state = None
    if state is None:
        mu_lin = linear_eigenvalues(params, grid, count=k)[k - 1].real
        offset = -np.sign(params.g) * min(0.02, 0.5 * abs(params.mu - mu_lin) + 1e-4)
        start = params.with_(mu=mu_lin + offset)
        a0 = guess_amplitude(branch, start, grid)
        seed = solve_with_retries(
            lambda s: initial_guess(branch, start, grid, amplitude=s),
            start, grid, amplitudes=(a0, a0 / 2, 2 * a0), **newton_kw,
        )
        state = homotopy(seed.phi, start, "mu", params.mu, grid, step=0.02, **newton_kw)
    return StationaryState(
        phi=state.phi,
        params=state.params,
        grid=grid,
        residual_inf=state.residual_inf,
        power=state.power,
        branch_label=branch,
        iterations=state.iterations,
        history=state.history,
    )
