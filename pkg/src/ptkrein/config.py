"""Run configuration: YAML key-value documents with dotted key names.

Keys may be written nested (``problem: {potential: scarf2}``) or flat
(``problem.potential: scarf2``); both forms resolve to the same dotted names.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import yaml

from .continuation import AXES, SweepConfig
from .linearization import SpectralTolerances
from .model import POTENTIAL_TAGS, PotentialSpec, ProblemParams
from .stationary import BRANCH_LABELS

DEFAULT_N = 500
DEFAULT_SCALE = 10.0
MIN_SWEEP_N = 50

# errors of ||phi_exact - phi||^2 the verify verb compares against
REFERENCE_ERRORS = {50: 1.5e-6, 100: 2.4e-13, 500: 2.2e-13}
VERIFY_SLACK = 100.0

SPECTRAL_KEYS = tuple(f.name for f in fields(SpectralTolerances))
SWEEP_KEYS = (
    "tracking_radius", "proximity", "d_defective", "d_distinct", "refine_depth", "track_max",
    "anchor_overlap", "sign_ambiguity", "post_split_samples", "branch_jump", "newton_tol", "max_iter",
)
TOLERANCE_KEYS = SPECTRAL_KEYS + SWEEP_KEYS

KNOWN_KEYS = {
    "problem.potential", "problem.v0", "problem.omega", "problem.g", "problem.mu", "problem.gamma",
    "problem.v_samples", "problem.w_samples",
    "grid.n", "grid.scale",
    "sweep.axis", "sweep.start", "sweep.stop", "sweep.step",
    "branch", "seed",
    "output.dir", "output.snapshots",
    "verify.n", "verify.reference", "verify.slack",
} | {f"tolerances.{k}" for k in TOLERANCE_KEYS}


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(ConfigError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def _flatten(doc, prefix="") -> dict:
    out = {}
    for k, v in doc.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict) and name != "verify.reference":
            out.update(_flatten(v, name + "."))
        else:
            out[name] = v
    return out


def _number(flat, key, default=None, kind=float, required=False):
    if key not in flat or flat[key] is None:
        if required:
            raise ValidationError(key, "required")
        return default
    val = flat[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(key, f"expected a number, got {val!r}")
    if kind is int:
        if int(val) != val:
            raise ValidationError(key, f"expected an integer, got {val!r}")
        return int(val)
    return float(val)


@dataclass(frozen=True)
class SweepRange:
    axis: str
    start: float
    stop: float
    step: float


@dataclass(frozen=True)
class RunConfig:
    params: ProblemParams
    n: int = DEFAULT_N
    scale: float = DEFAULT_SCALE
    sweep: SweepRange | None = None
    branch: str = "scarf-1"
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "out"
    snapshots: tuple = ()
    seed: str = ""
    verify_n: tuple = (50, 100, 500)
    verify_reference: dict = field(default_factory=lambda: dict(REFERENCE_ERRORS))
    verify_slack: float = VERIFY_SLACK

    def spectral_tolerances(self) -> SpectralTolerances:
        return SpectralTolerances(**{k: self.tolerances[k] for k in SPECTRAL_KEYS if k in self.tolerances})

    def sweep_config(self) -> SweepConfig:
        if self.sweep is None:
            raise ValidationError("sweep", "this verb needs sweep.axis/start/stop/step")
        extra = {k: self.tolerances[k] for k in SWEEP_KEYS if k in self.tolerances}
        return SweepConfig(
            params=self.params, branch=self.branch, axis=self.sweep.axis, start=self.sweep.start,
            stop=self.sweep.stop, step=self.sweep.step, n=self.n, scale=self.scale,
            spectral=self.spectral_tolerances(), **extra,
        )

    def resolved(self) -> dict:
        """Flat dotted-key dictionary with every default materialized."""
        pot = self.params.potential
        d = {
            "problem.potential": pot.kind,
            "problem.v0": pot.v0,
            "problem.omega": pot.omega,
            "problem.g": self.params.g,
            "problem.mu": self.params.mu,
            "problem.gamma": self.params.gamma,
            "grid.n": self.n,
            "grid.scale": self.scale,
            "branch": self.branch,
            "seed": self.seed,
            "output.dir": self.output_dir,
            "output.snapshots": list(self.snapshots),
            "verify.n": list(self.verify_n),
            "verify.reference": {int(k): float(v) for k, v in self.verify_reference.items()},
            "verify.slack": self.verify_slack,
        }
        if pot.kind == "custom":
            d["problem.v_samples"] = list(pot.v_samples)
            d["problem.w_samples"] = list(pot.w_samples)
        if self.sweep is not None:
            d.update({"sweep.axis": self.sweep.axis, "sweep.start": self.sweep.start,
                      "sweep.stop": self.sweep.stop, "sweep.step": self.sweep.step})
        spec = self.spectral_tolerances()
        for k in SPECTRAL_KEYS:
            d[f"tolerances.{k}"] = getattr(spec, k)
        sweep_defaults = {f.name: f.default for f in fields(SweepConfig)}
        for k in SWEEP_KEYS:
            d[f"tolerances.{k}"] = self.tolerances.get(k, sweep_defaults[k])
        return d


def parse_config(text: str, require_sweep: bool = False) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ParseError(exc.problem or str(exc), line=line) from exc
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError("top level must be a mapping of keys to values")
    return build_config(_flatten(doc), require_sweep=require_sweep)


def build_config(flat: dict, require_sweep: bool = False) -> RunConfig:
    for key in flat:
        if key not in KNOWN_KEYS:
            raise ValidationError(key, "unknown key")

    kind = flat.get("problem.potential")
    if kind is None:
        raise ValidationError("problem.potential", "required")
    if kind not in POTENTIAL_TAGS:
        raise ValidationError("problem.potential", f"unknown potential {kind!r}; valid tags: {', '.join(POTENTIAL_TAGS)}")
    try:
        if kind == "scarf2":
            pot = PotentialSpec.scarf2(_number(flat, "problem.v0", required=True))
        elif kind in ("confining", "confining_scaled"):
            pot = getattr(PotentialSpec, kind)(_number(flat, "problem.omega", required=True))
        else:
            if "problem.v_samples" not in flat or "problem.w_samples" not in flat:
                raise ValidationError("problem.v_samples", "custom potentials need v_samples and w_samples")
            pot = PotentialSpec.custom(flat["problem.v_samples"], flat["problem.w_samples"])
    except ValueError as exc:
        key = "problem.v0" if kind == "scarf2" else "problem.omega" if kind != "custom" else "problem.v_samples"
        raise ValidationError(key, str(exc)) from exc

    g = _number(flat, "problem.g", required=True)
    if g == 0:
        raise ValidationError("problem.g", "must be nonzero")
    mu = _number(flat, "problem.mu", default=None)
    gamma = _number(flat, "problem.gamma", default=0.0)

    n = _number(flat, "grid.n", DEFAULT_N, kind=int)
    scale = _number(flat, "grid.scale", DEFAULT_SCALE)
    if n < 2:
        raise ValidationError("grid.n", "must be at least 2")
    if scale <= 0:
        raise ValidationError("grid.scale", "must be positive")

    sweep = None
    if any(k.startswith("sweep.") for k in flat) or require_sweep:
        axis = flat.get("sweep.axis")
        if axis not in AXES:
            raise ValidationError("sweep.axis", f"must be one of {', '.join(AXES)}, got {axis!r}")
        start = _number(flat, "sweep.start", required=True)
        stop = _number(flat, "sweep.stop", required=True)
        step = _number(flat, "sweep.step", required=True)
        if not step > 0:
            raise ValidationError("sweep.step", "must be positive")
        if start == stop:
            raise ValidationError("sweep.stop", "must differ from sweep.start")
        if n < MIN_SWEEP_N:
            raise ValidationError("grid.n", f"sweep runs need n >= {MIN_SWEEP_N}")
        sweep = SweepRange(axis, start, stop, step)
        if axis == "mu":
            mu = start
        else:
            gamma = start
    if mu is None:
        raise ValidationError("problem.mu", "required unless the sweep runs over mu")
    params = ProblemParams(mu=mu, gamma=gamma, g=g, potential=pot)

    default_branch = {"scarf2": "scarf-1", "custom": "scarf-1"}.get(kind, "confining-1")
    branch = flat.get("branch", default_branch)
    if branch not in BRANCH_LABELS:
        raise ValidationError("branch", f"unknown branch {branch!r}; valid labels: {', '.join(BRANCH_LABELS)}")
    if kind == "scarf2" and not branch.startswith("scarf"):
        raise ValidationError("branch", "scarf2 potentials use scarf-1 or scarf-2")
    if kind.startswith("confining") and not branch.startswith("confining"):
        raise ValidationError("branch", "confining potentials use confining-1 .. confining-4")

    tol = {}
    for k in TOLERANCE_KEYS:
        key = f"tolerances.{k}"
        if key in flat:
            kind_ = int if k in ("refine_depth", "post_split_samples", "max_iter") else float
            tol[k] = _number(flat, key, kind=kind_)
    try:
        SpectralTolerances(**{k: tol[k] for k in SPECTRAL_KEYS if k in tol})
        if sweep is not None:
            probe = RunConfig(params, n, scale, sweep, branch, tol)
            probe.sweep_config()
    except ValueError as exc:
        raise ValidationError("tolerances", str(exc)) from exc

    snaps = flat.get("output.snapshots", [])
    if not isinstance(snaps, list) or any(isinstance(s, bool) or not isinstance(s, (int, float)) for s in snaps):
        raise ValidationError("output.snapshots", "expected a list of parameter values")
    out_dir = flat.get("output.dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ValidationError("output.dir", "expected a directory name")

    verify_n = flat.get("verify.n", [50, 100, 500])
    if not isinstance(verify_n, list) or any(not isinstance(v, int) or v < 2 for v in verify_n):
        raise ValidationError("verify.n", "expected a list of integers >= 2")
    ref = flat.get("verify.reference", REFERENCE_ERRORS)
    if not isinstance(ref, dict):
        raise ValidationError("verify.reference", "expected a mapping from n to error")
    ref = {int(k): float(v) for k, v in ref.items()}
    slack = _number(flat, "verify.slack", VERIFY_SLACK)

    return RunConfig(
        params=params, n=n, scale=scale, sweep=sweep, branch=branch, tolerances=tol,
        output_dir=out_dir, snapshots=tuple(float(s) for s in snaps), seed=str(flat.get("seed", "")),
        verify_n=tuple(verify_n), verify_reference=ref, verify_slack=slack,
    )


def load_config(path, require_sweep: bool = False) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, require_sweep=require_sweep)
