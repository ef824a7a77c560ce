"""Experiment configuration: a versioned INI file with a closed key set.

Example::

    [experiment]
    version = 1
    seed = 20261016
    suite = oracle, isometry
    n_paths = 20000

    [triplet]
    sigma2 = 1
    atoms = 1.0:2.0

    [basis]
    kind = teugels
    n_max = 2

Unknown sections or keys are errors.  Every problem found is reported at
once, keyed by ``section.key``.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigInvalid
from .measure import NAMED_DENSITIES, Atomic, Density, LevyTriplet, empty_measure

CONFIG_VERSION = 1
SUITES = ("oracle", "isometry", "orthogonality", "covariation", "product", "permutation", "crp")
BASIS_KINDS = ("teugels", "indicator", "hermite", "haar", "monomial")


@dataclass(frozen=True)
class Tolerances:
    z: float = 3.0
    exact_gap: float = 1e-10
    relative: float = 1e-12
    grid_gap: float = 5e-2


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    horizon: float = 1.0
    grid_step: float = 1e-3
    n_paths: int = 20000
    suites: Tuple[str, ...] = ("oracle",)
    order: int = 2
    cell_depth: int = 0
    workers: int = 1
    scenarios: int = 200
    output: str = "levychaos-out"
    target: str = "Lbar**2"
    beta: float = 0.0
    sigma2: float = 0.0
    atoms: Tuple[Tuple[float, float], ...] = ((1.0, 1.0),)
    density: Optional[str] = None
    density_params: Tuple[float, ...] = ()
    truncation_eps: float = 0.0
    basis_kind: str = "teugels"
    n_max: int = 2
    intervals: Tuple[Tuple[float, float], ...] = ()
    orthonormalize: bool = True
    tolerances: Tolerances = field(default_factory=Tolerances)

    def triplet(self) -> LevyTriplet:
        if self.density is not None:
            h = NAMED_DENSITIES[self.density](*self.density_params)
            nu = Density(h, self.truncation_eps)
        elif self.atoms:
            nu = Atomic.of(self.atoms)
        else:
            nu = empty_measure()
        return LevyTriplet(self.beta, self.sigma2, nu)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output")
        d.pop("workers")  # results do not depend on it
        return d

    def digest(self) -> str:
        """SHA-256 of everything that can change a reported number."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        cfg = replace(self, **kw)
        _validate(cfg)
        return cfg


def _pairs(text: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        a, b = item.split(":")
        out.append((float(a), float(b)))
    return tuple(out)


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(s) for s in text.replace(",", " ").split())


def _names(text: str) -> Tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (attribute, parser); attribute None means checked separately
_SCHEMA: Dict[str, Dict[str, tuple]] = {
    "experiment": {
        "version": (None, int),
        "seed": ("seed", int),
        "horizon": ("horizon", float),
        "grid_step": ("grid_step", float),
        "n_paths": ("n_paths", int),
        "suite": ("suites", _names),
        "order": ("order", int),
        "cell_depth": ("cell_depth", int),
        "workers": ("workers", int),
        "scenarios": ("scenarios", int),
        "output": ("output", str),
        "target": ("target", str),
    },
    "triplet": {
        "beta": ("beta", float),
        "sigma2": ("sigma2", float),
        "atoms": ("atoms", _pairs),
        "density": ("density", str),
        "density_params": ("density_params", _floats),
        "truncation_eps": ("truncation_eps", float),
    },
    "basis": {
        "kind": ("basis_kind", str),
        "n_max": ("n_max", int),
        "intervals": ("intervals", _pairs),
        "orthonormalize": ("orthonormalize", _bool),
    },
    "tolerances": {name: (name, float) for name in ("z", "exact_gap", "relative", "grid_gap")},
}


def _validate(cfg: ExperimentConfig) -> None:
    problems: List[tuple] = []
    for name in ("horizon", "grid_step", "n_paths", "order", "workers", "scenarios", "n_max"):
        if not getattr(cfg, name) > 0:
            problems.append((name, "must be positive"))
    if cfg.grid_step > cfg.horizon:
        problems.append(("grid_step", "exceeds the horizon"))
    if cfg.cell_depth < 0:
        problems.append(("cell_depth", "must be >= 0"))
    if cfg.sigma2 < 0:
        problems.append(("triplet.sigma2", "must be >= 0"))
    bad = [s for s in cfg.suites if s not in SUITES + ("all",)]
    if bad or not cfg.suites:
        problems.append(("experiment.suite", f"unknown suite(s) {bad}; choose from {SUITES + ('all',)}"))
    if cfg.basis_kind not in BASIS_KINDS:
        problems.append(("basis.kind", f"unknown kind {cfg.basis_kind!r}"))
    if cfg.density is not None and cfg.density not in NAMED_DENSITIES:
        problems.append(("triplet.density", f"unknown density {cfg.density!r}"))
    if any(w <= 0 for _, w in cfg.atoms):
        problems.append(("triplet.atoms", "weights must be positive"))
    if any(x == 0 for x, _ in cfg.atoms):
        problems.append(("triplet.atoms", "an atom sits at the origin"))
    if cfg.truncation_eps < 0:
        problems.append(("triplet.truncation_eps", "must be >= 0"))
    for name, val in asdict(cfg.tolerances).items():
        if not val > 0:
            problems.append((f"tolerances.{name}", "must be positive"))
    if problems:
        raise ConfigInvalid(problems)


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; raises :class:`ConfigInvalid` listing every problem."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigInvalid([("config", str(exc).splitlines()[0])]) from None
    problems: List[tuple] = []
    values: dict = {}
    tols: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            problems.append((section, "unknown section"))
            continue
        for key, raw in cp.items(section):
            spec = _SCHEMA[section].get(key)
            if spec is None:
                problems.append((f"{section}.{key}", "unknown key"))
                continue
            attr, conv = spec
            try:
                val = conv(raw)
            except (ValueError, TypeError) as exc:
                problems.append((f"{section}.{key}", f"cannot parse {raw!r}: {exc}"))
                continue
            if section == "tolerances":
                tols[attr] = val
            elif attr is not None:
                values[attr] = val
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    if "version" not in exp:
        problems.append(("experiment.version", "missing"))
    elif exp["version"].strip() != str(CONFIG_VERSION):
        problems.append(("experiment.version", f"unsupported version {exp['version']!r}"))
    if "seed" not in values and not any(p[0] == "experiment.seed" for p in problems):
        problems.append(("experiment.seed", "mandatory"))
    if problems:
        raise ConfigInvalid(problems)
    if values.get("density") is not None and "atoms" not in values:
        values["atoms"] = ()
    cfg = ExperimentConfig(tolerances=Tolerances(**tols), **values)
    if "all" in cfg.suites:
        cfg = replace(cfg, suites=SUITES)
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid([("config", f"cannot read {path}: {exc.strerror}")]) from None
    return parse_config(text)


def default_config(seed: int) -> ExperimentConfig:
    cfg = ExperimentConfig(seed=int(seed))
    _validate(cfg)
    return cfg
