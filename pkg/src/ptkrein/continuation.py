"""Parameter sweeps: eigenvalue tracking, Krein signatures and bifurcation events.

Only the upper half plane is tracked.  On-axis eigenvalues i*omega with
omega > 0 carry one track each; a complex quadruplet is represented by its two
upper-half members lambda and -conj(lambda), the lower half following from the
quadruple symmetry.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, linear_sum_assignment

from .errors import (
    AmbiguousSign,
    BranchJump,
    ConvergedToZero,
    InsufficientSamples,
    NoConvergence,
    PhaseIncoherent,
    PTKreinError,
    SingularJacobian,
    Unresolved,
)
from .grid import MappedGrid, build_grid, inner_product, norm
from .krein import (
    hamiltonian_orientation,
    krein_of,
    linear_limit_orientation,
    orientation,
    pt_phase_fix,
)
from .linearization import BAND, GAUGE, ISOLATED, QUADRUPLET, SpectralTolerances, band_edge, solve_spectrum
from .model import ProblemParams
from .stationary import StationaryState, find_state, homotopy, newton_solve

log = logging.getLogger(__name__)

ALIVE = "alive"
MERGED = "merged"
OFF_AXIS = "off-axis"
LOST = "lost"

DEFECTIVE_INSTABILITY = "defective-instability"
SAFE_PASSAGE = "defective-safe-passage"
NEAR_PASS = "near-pass"
ZERO_COLLISION = "zero-collision"
EVENT_KINDS = (DEFECTIVE_INSTABILITY, SAFE_PASSAGE, NEAR_PASS, ZERO_COLLISION)

AXES = ("gamma", "mu")


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep needs.  ``params`` supplies the fixed parameters;
    the swept one is overwritten at each step."""

    params: ProblemParams
    branch: str
    axis: str
    start: float
    stop: float
    step: float
    n: int = 500
    scale: float = 10.0
    spectral: SpectralTolerances = field(default_factory=SpectralTolerances)
    tracking_radius: float = 0.25
    proximity: float = 0.05
    d_defective: float = 0.05
    d_distinct: float = 0.5
    refine_depth: int = 8
    track_max: float | None = None
    anchor_overlap: float = 0.5
    sign_ambiguity: float = 0.1
    post_split_samples: int = 6
    # largest |P_new - P_old| / max(P_new, P_old) accepted between neighbouring solves
    branch_jump: float = 0.5
    newton_tol: float = 1e-12
    max_iter: int = 50

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        if not self.step > 0:
            raise ValueError("sweep step must be positive")
        if self.start == self.stop:
            raise ValueError("sweep start and stop must differ")
        if not 0 < self.d_defective < self.d_distinct:
            raise ValueError("need 0 < d_defective < d_distinct")
        if self.refine_depth < 0:
            raise ValueError("refine_depth must be non-negative")
        if self.tracking_radius <= 0 or self.proximity <= 0:
            raise ValueError("tracking_radius and proximity must be positive")
        if not 0 < self.branch_jump <= 1:
            raise ValueError("branch_jump must lie in (0, 1]")

    @property
    def direction(self) -> float:
        return 1.0 if self.stop > self.start else -1.0

    def values(self) -> np.ndarray:
        count = int(np.floor(abs(self.stop - self.start) / self.step + 1e-9))
        return self.start + self.direction * self.step * np.arange(count + 1)

    def params_at(self, value: float) -> ProblemParams:
        return self.params.with_(**{self.axis: float(value)})


@dataclass(eq=False)
class Mode:
    """One upper-half-plane eigenvalue prepared for tracking."""

    lam: complex
    classification: str
    v: np.ndarray
    va: np.ndarray | None
    krein: complex | None = None
    signature: int | None = None
    anchor: str = "none"
    frozen: bool = False

    @property
    def on_axis(self) -> bool:
        return self.classification == ISOLATED


@dataclass(eq=False)
class TrackSample:
    step: int
    param: float
    lam: complex
    krein: complex | None
    signature: int | None
    classification: str
    anchor: str
    frozen: bool
    v: np.ndarray = field(repr=False)
    va: np.ndarray | None = field(repr=False, default=None)

    @property
    def fingerprint(self) -> str:
        """Short digest of the eigenvector, stable under roundoff at 1e-8."""
        q = np.round(np.abs(self.v) * 1e8).astype(np.int64)
        return hashlib.sha1(q.tobytes()).hexdigest()[:12]

    @property
    def on_axis(self) -> bool:
        return self.classification == ISOLATED


@dataclass(eq=False)
class BranchTrack:
    branch_id: int
    samples: list = field(default_factory=list)
    status: str = ALIVE

    @property
    def last(self) -> TrackSample:
        return self.samples[-1]

    def at_step(self, k: int) -> TrackSample | None:
        for s in self.samples:
            if s.step == k:
                return s
        return None

    def on_axis_at(self, k: int) -> bool:
        s = self.at_step(k)
        return s is not None and s.on_axis


@dataclass(eq=False)
class CoalescenceEvidence:
    branch_ids: tuple
    params: list
    d_vec: list
    d_adj: list
    gaps: list
    bracket: tuple
    verdict: str
    post_split: list = field(default_factory=list)
    off_axis_seen: bool = False

    @property
    def min_d(self) -> float:
        vals = [d for d in self.d_vec if np.isfinite(d)]
        return min(vals) if vals else float("nan")


@dataclass(eq=False)
class BifurcationEvent:
    param_at: float
    kind: str
    branch_ids: tuple
    pre_signatures: tuple
    evidence: CoalescenceEvidence | None = None
    exponent: float | None = None
    param_fit: float | None = None
    theory_violation: bool = False
    reverse: bool = False
    note: str = ""


@dataclass(eq=False)
class StepRecord:
    step: int
    param: float
    power: float
    residual: float
    iterations: int
    stable: bool
    eigenvalues: np.ndarray = field(repr=False)
    classes: tuple = field(repr=False)


@dataclass(eq=False)
class ContinuationRun:
    config: SweepConfig
    steps: list = field(default_factory=list)
    tracks: list = field(default_factory=list)
    events: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)
    truncated: bool = False
    truncation: str | None = None

    @property
    def params(self) -> np.ndarray:
        return np.array([s.param for s in self.steps])

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]


# --------------------------------------------------------------------------
# per-step preparation


def _unit(v, grid):
    n = norm(v, grid)
    return v / n if n > 0 else v


def _real_pair(lam: complex, tol: SpectralTolerances) -> bool:
    return abs(lam.real) > tol.tol_re and abs(lam.imag) <= tol.tol_re


def prepare_modes(snapshot, cfg: SweepConfig) -> list:
    """Upper-half-plane isolated and quadruplet eigenvalues, PT-normalized."""
    grid = snapshot.state.grid
    tol = snapshot.tolerances
    edge = band_edge(snapshot.state)
    modes = []
    for p in snapshot.pairs:
        if p.classification not in (ISOLATED, QUADRUPLET):
            continue
        if p.lam.imag <= tol.tol_re:
            continue
        if cfg.track_max is not None and p.lam.imag > cfg.track_max:
            continue
        frozen = edge is not None and p.lam.imag > edge - tol.band_margin_frac * edge
        if p.classification == ISOLATED:
            try:
                y, z, _ = pt_phase_fix(p.y, p.z, grid)
                v = _unit(np.concatenate([y, z]), grid)
            except PhaseIncoherent:
                v = _unit(p.vector, grid)
            va = None
            if p.adjoint_y is not None:
                try:
                    ya, za, _ = pt_phase_fix(p.adjoint_y, p.adjoint_z, grid)
                    va = _unit(np.concatenate([ya, za]), grid)
                except PhaseIncoherent:
                    va = None
        else:
            v = _unit(p.vector, grid)
            va = None if p.adjoint_y is None else _unit(p.adjoint_vector, grid)
        K = None if va is None else krein_of(v, va, grid)
        modes.append(Mode(complex(p.lam), p.classification, v, va, K, None, "none", frozen))
    return modes


def _anchor(mode: Mode, gamma: float, grid: MappedGrid, cfg: SweepConfig) -> None:
    """Fix the adjoint orientation of a mode that has no history."""
    if not mode.on_axis or mode.va is None:
        return
    if gamma == 0.0:
        s = hamiltonian_orientation(mode.v, mode.va, grid)
        mode.anchor = "hamiltonian"
    else:
        s, overlap = linear_limit_orientation(mode.v, mode.va, grid)
        if overlap < cfg.anchor_overlap:
            mode.krein = krein_of(mode.v, mode.va, grid)
            return
        mode.anchor = "linear-limit"
    mode.va = s * mode.va
    mode.krein = krein_of(mode.v, mode.va, grid)
    mode.signature = 1 if mode.krein.real > 0 else -1


def _continue(mode: Mode, prev: TrackSample, grid: MappedGrid, cfg: SweepConfig) -> None:
    """Orient v and v# towards the previous sample and inherit its anchor."""
    if not mode.on_axis or mode.va is None:
        return
    try:
        mode.v = orientation(mode.v, prev.v, grid, cfg.sign_ambiguity) * mode.v
        mode.va = orientation(mode.va, prev.va, grid, cfg.sign_ambiguity) * mode.va
        mode.krein = krein_of(mode.v, mode.va, grid)
        mode.anchor = prev.anchor
    except AmbiguousSign:
        # K is continuous and nonzero along a simple imaginary eigenvalue,
        # so keep the sign of the previous K when the vectors cannot decide
        K = krein_of(mode.v, mode.va, grid)
        if np.sign(K.real) != np.sign(prev.krein.real):
            mode.va = -mode.va
            K = -K
        mode.krein = K
        mode.anchor = "k-continuity"
    mode.signature = 1 if mode.krein.real > 0 else -1


def _overlap(a, b, grid):
    return abs(inner_product(a, b, grid))


def track_eigenvalues(tracks: list, modes: list, step: int, param: float, grid: MappedGrid,
                      cfg: SweepConfig, gamma: float) -> list:
    """Match modes at a new parameter value to the live tracks.

    Cost is |d lambda| / tracking_radius plus (1 - |<v_new, v_old>|), so the
    eigenvector overlap breaks ties between nearby eigenvalues.  Unmatched
    modes open new tracks; unmatched tracks are marked lost.
    """
    heads = [t for t in tracks if t.status in (ALIVE, OFF_AXIS) and t.last.step == step - 1]
    big = 1e6
    if heads and modes:
        cost = np.full((len(heads), len(modes)), big)
        for i, t in enumerate(heads):
            for j, m in enumerate(modes):
                dl = abs(m.lam - t.last.lam)
                if dl <= cfg.tracking_radius:
                    cost[i, j] = dl / cfg.tracking_radius + (1.0 - _overlap(m.v, t.last.v, grid))
        rows, cols = linear_sum_assignment(cost)
        pairs = [(r, c) for r, c in zip(rows, cols) if cost[r, c] < big]
    else:
        pairs = []
    matched_t = {r for r, _ in pairs}
    matched_m = {c for _, c in pairs}
    for r, c in pairs:
        t, m = heads[r], modes[c]
        prev = t.last
        if prev.on_axis and prev.va is not None and prev.anchor != "none":
            _continue(m, prev, grid, cfg)
        else:
            _anchor(m, gamma, grid, cfg)
        t.samples.append(_sample(step, param, m))
        t.status = ALIVE if m.on_axis else OFF_AXIS
    for i, t in enumerate(heads):
        if i not in matched_t:
            t.status = LOST
    next_id = max((t.branch_id for t in tracks), default=-1) + 1
    for j, m in enumerate(modes):
        if j in matched_m:
            continue
        _anchor(m, gamma, grid, cfg)
        tracks.append(BranchTrack(next_id, [_sample(step, param, m)], ALIVE if m.on_axis else OFF_AXIS))
        next_id += 1
    return tracks


def _sample(step, param, m: Mode) -> TrackSample:
    return TrackSample(step, float(param), m.lam, m.krein, m.signature, m.classification, m.anchor, m.frozen, m.v, m.va)


# --------------------------------------------------------------------------
# the sweep


class _Solver:
    """Warm-started stationary solves plus spectra at arbitrary parameters.

    Every converged state is remembered so later probes start Newton from
    the closest known parameter value.
    """

    def __init__(self, cfg: SweepConfig, grid: MappedGrid):
        self.cfg = cfg
        self.grid = grid
        self.known: list = []

    def newton_kw(self):
        return dict(tol=self.cfg.newton_tol, max_iter=self.cfg.max_iter)

    def remember(self, state: StationaryState) -> None:
        self.known.append((float(getattr(state.params, self.cfg.axis)), state))

    def nearest(self, value: float) -> StationaryState:
        return min(self.known, key=lambda ps: abs(ps[0] - value))[1]

    def solve(self, value: float, near: StationaryState | None = None,
              before: StationaryState | None = None) -> StationaryState:
        near = near or self.nearest(value)
        params = self.cfg.params_at(value)
        guess = near.phi
        if before is not None:
            pa, pb = getattr(before.params, self.cfg.axis), getattr(near.params, self.cfg.axis)
            if pb != pa:
                guess = near.phi + (value - pb) / (pb - pa) * (near.phi - before.phi)
        try:
            st = newton_solve(guess, params, self.grid, **self.newton_kw())
        except (NoConvergence, SingularJacobian, ConvergedToZero):
            st = None
        if st is None or self._jumped(near, st):
            start = getattr(near.params, self.cfg.axis)
            st = homotopy(near.phi, near.params, self.cfg.axis, value, self.grid,
                          step=max(abs(value - start) / 4, 1e-9), **self.newton_kw())
            if self._jumped(near, st):
                raise BranchJump(
                    f"power {near.power:.6g} -> {st.power:.6g} between {self.cfg.axis} = {start:.6g} and {value:.6g}"
                )
        st = StationaryState(st.phi, st.params, self.grid, st.residual_inf, st.power,
                             near.branch_label, st.iterations, st.history)
        self.remember(st)
        return st

    def _jumped(self, old: StationaryState, new: StationaryState) -> bool:
        return abs(new.power - old.power) > self.cfg.branch_jump * max(new.power, old.power)

    def spectrum(self, state: StationaryState):
        return solve_spectrum(state, self.grid, self.cfg.spectral)

    def probe(self, value: float):
        state = self.solve(value)
        snap = self.spectrum(state)
        return state, snap, prepare_modes(snap, self.cfg)


def _record(k, value, state, snap) -> StepRecord:
    return StepRecord(k, float(value), state.power, state.residual_inf, state.iterations,
                      not snap.unstable, snap.eigenvalues.copy(), tuple(p.classification for p in snap.pairs))


def sweep(cfg: SweepConfig, grid: MappedGrid | None = None, detect: bool = True) -> ContinuationRun:
    """Continue the branch over cfg.values(), track eigenvalues, find events.

    A failing step truncates the run: tracks still alive are marked lost
    and the failure is recorded in run.truncation.
    """
    grid = grid or build_grid(cfg.n, cfg.scale)
    solver = _Solver(cfg, grid)
    run = ContinuationRun(cfg)
    states = []
    for k, value in enumerate(cfg.values()):
        params = cfg.params_at(value)
        try:
            if k == 0:
                state = find_state(cfg.branch, params, grid, **solver.newton_kw())
                solver.remember(state)
            else:
                state = solver.solve(value, states[-1], states[-2] if k > 1 else None)
            snap = solver.spectrum(state)
        except PTKreinError as exc:
            run.truncated = True
            run.truncation = f"{cfg.axis} = {value:.17e}: {exc}"
            log.warning("sweep truncated at %s", run.truncation)
            for t in run.tracks:
                if t.status in (ALIVE, OFF_AXIS):
                    t.status = LOST
            break
        states.append(state)
        run.steps.append(_record(k, value, state, snap))
        track_eigenvalues(run.tracks, prepare_modes(snap, cfg), k, value, grid, cfg, params.gamma)
    if detect and len(run.steps) > 1:
        detect_events(run, solver)
    return run


# --------------------------------------------------------------------------
# coalescence evidence


def _diff_norm(a, b, grid) -> float:
    """min(|a - b|, |a + b|): zero for parallel unit vectors of either sign."""
    if a is None or b is None:
        return float("nan")
    return float(min(norm(a - b, grid), norm(a + b, grid)))


def _nearest_pair(modes, la: complex, lb: complex):
    """The two distinct on-axis modes closest to la and lb respectively."""
    on = [m for m in modes if m.on_axis]
    if len(on) < 2:
        return None
    cost = np.array([[abs(m.lam - la) for m in on], [abs(m.lam - lb) for m in on]])
    _, cols = linear_sum_assignment(cost)
    return on[cols[0]], on[cols[1]]


def _offaxis_near(modes, im: float, radius: float):
    cand = [m for m in modes if m.classification == QUADRUPLET and abs(m.lam.imag - im) <= radius]
    if not cand:
        return None
    return max(cand, key=lambda m: abs(m.lam.real))


def _verdict(d: float, cfg: SweepConfig) -> str | None:
    if not np.isfinite(d):
        return None
    if d <= cfg.d_defective:
        return "defective"
    if d >= cfg.d_distinct:
        return "near-pass"
    return None


def detect_coalescence(solver: _Solver, ids: tuple, lo: float, hi: float, lam_fn,
                       mode: str = "split") -> CoalescenceEvidence:
    """Refine a window where two eigenvalues meet and measure eigenvector distances.

    lam_fn(p) predicts the two eigenvalues at p.  With mode='split', lo is
    on the on-axis side and hi on the off-axis side, and bisection keeps
    that bracket.  With mode='approach' both ends are on-axis and a
    golden-section search closes in on the smallest gap.  d(p) is
    min(|va - vb|, |va + vb|) for the PT-normalized eigenvectors (d_vec)
    and adjoint eigenvectors (d_adj).  Raises Unresolved if the smallest d
    lies between d_defective and d_distinct at maximum refinement.
    """
    cfg, grid = solver.cfg, solver.grid
    rows = []
    off_seen = False

    def measure(value, la, lb):
        """Probe value; return the on-axis pair near (la, lb) or None."""
        nonlocal off_seen
        _, _, modes = solver.probe(value)
        r = abs(la - lb) + 0.1 * cfg.proximity
        pair = _nearest_pair(modes, la, lb)
        if _offaxis_near(modes, 0.5 * (la.imag + lb.imag), r) is not None:
            off_seen = True
        if pair is None or abs(pair[0].lam - la) > r or abs(pair[1].lam - lb) > r:
            return None
        a, b = pair
        rows.append((value, _diff_norm(a.v, b.v, grid), _diff_norm(a.va, b.va, grid), abs(a.lam - b.lam)))
        return a.lam, b.lam

    if mode == "split":
        p_on, p_off = lo, hi
        cur = measure(p_on, *lam_fn(p_on)) or lam_fn(p_on)
        for _ in range(cfg.refine_depth):
            mid = 0.5 * (p_on + p_off)
            got = measure(mid, *cur)
            if got is None:
                p_off = mid
            else:
                p_on, cur = mid, got
        bracket = (p_on, p_off)
    else:
        gr = (np.sqrt(5.0) - 1.0) / 2.0
        a_, b_ = lo, hi
        gaps = {}

        def gap(value):
            if value not in gaps:
                got = measure(value, *lam_fn(value))
                gaps[value] = np.inf if got is None else abs(got[0] - got[1])
            return gaps[value]

        c_, e_ = b_ - gr * (b_ - a_), a_ + gr * (b_ - a_)
        for _ in range(max(cfg.refine_depth, 1)):
            if gap(c_) < gap(e_):
                b_ = e_
            else:
                a_ = c_
            c_, e_ = b_ - gr * (b_ - a_), a_ + gr * (b_ - a_)
        bracket = (a_, b_)
    rows.sort(key=lambda r: r[0])
    dv = [r[1] for r in rows]
    finite = [d for d in dv if np.isfinite(d)]
    verdict = _verdict(min(finite), cfg) if finite else None
    ev = CoalescenceEvidence(
        tuple(ids), [r[0] for r in rows], dv, [r[2] for r in rows], [r[3] for r in rows],
        tuple(bracket), verdict or "ambiguous", off_axis_seen=off_seen,
    )
    if verdict is None:
        raise Unresolved(
            f"eigenvector distance {min(finite) if finite else float('nan'):.3g} between "
            f"{cfg.d_defective} and {cfg.d_distinct} at maximum refinement near {0.5 * sum(bracket):.6g}"
        )
    return ev


def _post_split_samples(solver: _Solver, p_on: float, p_off: float, im: float) -> list:
    """|Re lambda| at geometrically growing offsets beyond the collision."""
    cfg = solver.cfg
    width = abs(p_off - p_on)
    sgn = np.sign(p_off - p_on)
    out = []
    for j in range(cfg.post_split_samples):
        value = p_on + sgn * width * 2.0**j
        try:
            _, _, modes = solver.probe(value)
        except PTKreinError:
            break
        q = _offaxis_near(modes, im, cfg.tracking_radius)
        if q is not None:
            out.append((float(value), abs(q.lam.real)))
    return out


def fit_sqrt_splitting(event: BifurcationEvent, samples, tol_re: float = 1e-6) -> tuple[float, float]:
    """Fit |Re lambda| = c * |p - p0|**e jointly over (log c, e, p0).

    p0 starts at event.param_at and is kept on the near side of every
    sample.  Returns (e, p0).
    """
    pts = [(p, r) for p, r in samples if r > tol_re]
    if len(pts) < 5:
        raise InsufficientSamples(f"need at least 5 post-split samples with |Re lambda| > {tol_re}, got {len(pts)}")
    p = np.array([q[0] for q in pts], dtype=float)
    r = np.array([q[1] for q in pts], dtype=float)
    p0 = float(event.param_at)
    sgn = float(np.sign(np.median(p) - p0)) or 1.0
    offsets = sgn * (p - p0)
    if np.any(offsets <= 0):
        raise InsufficientSamples("post-split samples must all lie on one side of the bifurcation estimate")
    # p0 = p_near - sgn * exp(s) can never pass the closest sample
    p_near = p0 + sgn * float(np.min(offsets))

    def resid(theta):
        logc, e, s = theta
        return logc + e * np.log(sgn * (p - (p_near - sgn * np.exp(s)))) - np.log(r)

    s0 = np.log(max(float(np.min(offsets)), 1e-300))
    c0 = float(np.mean(np.log(r) - 0.5 * np.log(offsets)))
    sol = least_squares(resid, x0=[c0, 0.5, s0], method="lm")
    _, e, s = sol.x
    return float(e), float(p_near - sgn * np.exp(s))


# --------------------------------------------------------------------------
# event detection and classification


def classify_bifurcation(evidence: CoalescenceEvidence, kind_hint: str, pre_signatures: tuple,
                         post_split: bool) -> BifurcationEvent:
    """Turn coalescence evidence into an event.

    kind_hint is 'zero' for the real-pair monitor, otherwise 'split' or
    'approach'.  A defective instability whose pre-collision signatures are
    equal is kept but flagged with theory_violation.
    """
    lo, hi = evidence.bracket
    mid = 0.5 * (lo + hi)
    if kind_hint == "zero":
        return BifurcationEvent(mid, ZERO_COLLISION, evidence.branch_ids, tuple(pre_signatures), evidence)
    if evidence.verdict == "defective":
        kind = DEFECTIVE_INSTABILITY if (post_split or evidence.off_axis_seen) else SAFE_PASSAGE
    else:
        kind = NEAR_PASS
    sigs = tuple(pre_signatures)
    if None not in sigs and sigs[0] < sigs[1]:
        sigs = (sigs[1], sigs[0])
    ev = BifurcationEvent(mid, kind, evidence.branch_ids, sigs, evidence)
    if kind == DEFECTIVE_INSTABILITY and None not in sigs and sigs[0] == sigs[1]:
        ev.theory_violation = True
        ev.note = "equal pre-collision signatures at a defective instability"
    return ev


def _sig(sample: TrackSample | None):
    # frozen samples still report their signature; freezing only exempts
    # them from the persistence checks
    return None if sample is None else sample.signature


def _lam_interp(track: BranchTrack | None, fixed: complex):
    """Linear interpolation of a track's on-axis eigenvalue in the parameter."""
    if track is None:
        return lambda p: fixed
    pts = sorted((s.param, s.lam) for s in track.samples if s.on_axis)
    xs = np.array([q[0] for q in pts])
    ys = np.array([q[1] for q in pts])
    return lambda p: complex(np.interp(p, xs, ys.real), np.interp(p, xs, ys.imag))


def _real_pairs_in(eigs, classes, tol: SpectralTolerances) -> int:
    return int(sum(1 for lam, c in zip(eigs, classes) if c == QUADRUPLET and _real_pair(lam, tol) and lam.real > 0))


def detect_events(run: ContinuationRun, solver: _Solver) -> None:
    """Scan a finished sweep for zero collisions, splittings and close approaches."""
    cfg = run.config
    tol = cfg.spectral
    steps = run.steps
    track_by_id = {t.branch_id: t for t in run.tracks}
    for k in range(1, len(steps)):
        vanished = [t for t in run.tracks if t.on_axis_at(k - 1) and not t.on_axis_at(k)]
        appeared = [t for t in run.tracks if t.on_axis_at(k) and not t.on_axis_at(k - 1)]
        new_off = [t.at_step(k) for t in run.tracks
                   if t.at_step(k) is not None and not t.at_step(k).on_axis
                   and (t.at_step(k - 1) is None or t.at_step(k - 1).on_axis)]
        gone_off = [t.at_step(k - 1) for t in run.tracks
                    if t.at_step(k - 1) is not None and not t.at_step(k - 1).on_axis
                    and (t.at_step(k) is None or t.at_step(k).on_axis)]

        base = _real_pairs_in(steps[k - 1].eigenvalues, steps[k - 1].classes, tol)
        if _real_pairs_in(steps[k].eigenvalues, steps[k].classes, tol) > base and vanished:
            t = min(vanished, key=lambda t: t.at_step(k - 1).lam.imag)
            vanished.remove(t)
            s = _sig(t.at_step(k - 1))
            lo, hi = _refine_count(solver, steps[k - 1].param, steps[k].param, base)
            evid = CoalescenceEvidence((t.branch_id,), [], [], [], [], (lo, hi), "zero")
            run.events.append(classify_bifurcation(evid, "zero", (s, s), False))

        for group, offs, reverse in ((vanished, new_off, False), (appeared, gone_off, True)):
            ref = k if reverse else k - 1
            pool = list(group)
            while pool:
                a = pool.pop(0)
                la = a.at_step(ref).lam
                if not any(abs(q.lam.imag - la.imag) <= cfg.tracking_radius for q in offs):
                    continue
                partner = min(pool, key=lambda b: abs(b.at_step(ref).lam - la), default=None)
                if partner is not None and abs(partner.at_step(ref).lam - la) <= cfg.tracking_radius:
                    pool.remove(partner)
                    ids = (a.branch_id, partner.branch_id)
                    sigs = (_sig(a.at_step(ref)), _sig(partner.at_step(ref)))
                    fns = (_lam_interp(a, la), _lam_interp(partner, partner.at_step(ref).lam))
                else:
                    lb = _nearest_untracked(steps[ref], la, tol)
                    ids = (a.branch_id, -1)
                    sigs = (_sig(a.at_step(ref)), None)
                    fns = (_lam_interp(a, la), _lam_interp(None, lb))
                _split_event(run, solver, ids, sigs, fns, k, reverse)

    _approach_events(run, solver)
    for ev in run.events:
        for i in ev.branch_ids:
            t = track_by_id.get(i)
            if t is not None and t.status == LOST and ev.kind in (DEFECTIVE_INSTABILITY, ZERO_COLLISION):
                t.status = MERGED
    run.events.sort(key=lambda e: (cfg.direction * e.param_at, e.kind))


def _nearest_untracked(rec: StepRecord, la: complex, tol) -> complex:
    cand = [l for l, c in zip(rec.eigenvalues, rec.classes)
            if c in (ISOLATED, BAND) and l.imag > tol.tol_re and l != la]
    return complex(min(cand, key=lambda l: abs(l - la))) if cand else la


def _split_event(run, solver, ids, sigs, fns, k, reverse):
    cfg = run.config
    p_prev, p_cur = run.steps[k - 1].param, run.steps[k].param
    p_on, p_off = (p_cur, p_prev) if reverse else (p_prev, p_cur)

    def lam_fn(p):
        return fns[0](p), fns[1](p)

    try:
        evid = detect_coalescence(solver, ids, p_on, p_off, lam_fn, mode="split")
    except Unresolved as exc:
        run.unresolved.append((ids, p_on, p_off, str(exc)))
        return
    except PTKreinError as exc:
        run.unresolved.append((ids, p_on, p_off, f"refinement failed: {exc}"))
        return
    if evid.verdict != "defective":
        run.unresolved.append((ids, p_on, p_off, f"split with distinct eigenvectors (min d {evid.min_d:.3g})"))
        return
    on, off = evid.bracket
    la, lb = lam_fn(on)
    evid.post_split = _post_split_samples(solver, on, off, 0.5 * (la.imag + lb.imag))
    ev = classify_bifurcation(evid, "split", sigs, post_split=True)
    ev.reverse = reverse
    try:
        e, p0 = fit_sqrt_splitting(ev, evid.post_split, cfg.spectral.tol_re)
        ev.exponent = e
        ev.param_fit = p0
        if abs(p0 - ev.param_at) <= abs(off - on):
            ev.param_at = p0
    except InsufficientSamples as exc:
        log.debug("no splitting fit: %s", exc)
    run.events.append(ev)


def _refine_count(solver: _Solver, p_lo: float, p_hi: float, base: int) -> tuple:
    """Bisect the step over which the real-pair count rises above base."""
    tol = solver.cfg.spectral
    a, b = p_lo, p_hi
    for _ in range(solver.cfg.refine_depth):
        mid = 0.5 * (a + b)
        try:
            _, snap, _ = solver.probe(mid)
        except PTKreinError:
            break
        cnt = _real_pairs_in(snap.eigenvalues, [p.classification for p in snap.pairs], tol)
        if cnt > base:
            b = mid
        else:
            a = mid
    return (a, b)


def _approach_events(run: ContinuationRun, solver: _Solver) -> None:
    """Local gap minima between on-axis tracks of opposite signature."""
    cfg = run.config
    nsteps = len(run.steps)
    tracks = [t for t in run.tracks if sum(s.on_axis for s in t.samples) >= 3]
    for i, ta in enumerate(tracks):
        for tb in tracks[i + 1:]:
            gaps = np.full(nsteps, np.inf)
            for k in range(nsteps):
                sa, sb = ta.at_step(k), tb.at_step(k)
                if sa is not None and sb is not None and sa.on_axis and sb.on_axis:
                    gaps[k] = abs(sa.lam - sb.lam)
            for k in range(1, nsteps - 1):
                if not (np.isfinite(gaps[k - 1]) and np.isfinite(gaps[k + 1])):
                    continue
                if not (gaps[k] <= gaps[k - 1] and gaps[k] <= gaps[k + 1] and gaps[k] <= cfg.proximity):
                    continue
                sigs = (_sig(ta.at_step(k - 1)), _sig(tb.at_step(k - 1)))
                if None in sigs or sigs[0] == sigs[1]:
                    continue
                lo, hi = run.steps[k - 1].param, run.steps[k + 1].param
                fa, fb = _lam_interp(ta, 0j), _lam_interp(tb, 0j)
                ids = (ta.branch_id, tb.branch_id)
                try:
                    evid = detect_coalescence(solver, ids, lo, hi, lambda p: (fa(p), fb(p)), mode="approach")
                except Unresolved as exc:
                    run.unresolved.append((ids, lo, hi, str(exc)))
                    continue
                except PTKreinError as exc:
                    run.unresolved.append((ids, lo, hi, f"refinement failed: {exc}"))
                    continue
                ev = classify_bifurcation(evid, "approach", sigs, post_split=False)
                if ev.kind == DEFECTIVE_INSTABILITY:
                    ev.note = "instability window narrower than the sweep step"
                run.events.append(ev)
