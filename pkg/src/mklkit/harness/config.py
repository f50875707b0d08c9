"""Experiment configuration and its flat ``key = value`` file format.

A config file looks like::

    [experiment]
    method = linf
    C = 0.01
    seed = 7

    [data]
    l = 10
    p_values = 1, 2, 5, 10

Section headers are for readability only; keys are looked up in a single
flat namespace, so a key may appear under any header (but only once).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..errors import ValidationError
from .multiclass import METHODS

SWEEPS = ("rho", "kernel_count", "C")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "linf"
    methods: tuple = ("linf", "l1", "l2")
    C: float = 1.0
    C_grid: tuple = ()
    select_C: bool = False
    sweep: str = "rho"
    # synthetic data
    l: int = 10
    m: int = 150
    n: int = 20
    tau: int = 4
    p: int = 10
    p_values: tuple = (1, 2, 5, 10)
    delta: float = 1.5
    # precomputed matrices (all points, train and test together)
    matrices: tuple = ()
    labels: str = ""
    grouping: str = ""
    distances: bool = False
    kernel_counts: tuple = ()
    # protocol
    normalize: bool = False
    train_frac: float = 0.5
    val_frac: float = 0.25
    repeats: int = 10
    seed: int = 0
    max_iter: int = 100
    obj_tol: float = 1e-5
    svm_max_iter: int = 50_000
    max_rounds: int = 10

    def __post_init__(self):
        for m in (self.method, *self.methods):
            if m not in METHODS:
                raise ValidationError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if self.sweep not in SWEEPS:
            raise ValidationError(f"sweep must be one of {', '.join(SWEEPS)}")
        if not self.C > 0 or any(not c > 0 for c in self.C_grid):
            raise ValidationError("C values must be positive")
        if self.repeats < 1:
            raise ValidationError("repeats must be >= 1")
        if not (0 < self.train_frac and 0 <= self.val_frac and self.train_frac + self.val_frac < 1):
            raise ValidationError("need 0 < train_frac, 0 <= val_frac and train_frac + val_frac < 1")
        if self.select_C and len(self.C_grid) < 1:
            raise ValidationError("select_C needs a C_grid")
        for path in (*self.matrices, self.labels, self.grouping):
            if path and not Path(path).exists():
                raise ValidationError(f"referenced path does not exist: {path}")
        if self.matrices and not self.labels:
            raise ValidationError("precomputed matrices need a labels file")
        if any(k < 1 for k in self.kernel_counts):
            raise ValidationError("kernel counts must be >= 1")

    @property
    def uses_files(self) -> bool:
        return bool(self.matrices)

    @property
    def grid(self) -> tuple:
        """Distinct C values in first-seen order (``(C,)`` if no grid was given)."""
        return tuple(dict.fromkeys(float(c) for c in self.C_grid)) or (float(self.C),)


def desk_scale_config(**overrides) -> ExperimentConfig:
    """The small redundancy setting used for the Fig. 1 style checks.

    l=10 kernels over m=150 points in n=20 dimensions with tau=4, kernels
    scaled to unit mean diagonal and the low C=0.01 at which the l1 and
    l-infinity solutions differ most.
    """
    base = ExperimentConfig(l=10, m=150, n=20, tau=4, p=10, p_values=(1, 2, 5, 10), repeats=10,
                            C=0.01, normalize=True, methods=("linf", "l1", "l2"))
    return replace(base, **overrides)


_TUPLES = {"methods": str, "C_grid": float, "p_values": int, "matrices": str, "kernel_counts": int}


def _coerce(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if name in _TUPLES:
            return tuple(_TUPLES[name](v.strip()) for v in raw.split(",") if v.strip())
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return type(default)(raw)
    except ValueError:
        raise ValidationError(f"bad value for {name}: {raw!r}") from None


def parse_overrides(pairs: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply ``{key: raw string}`` to ``base`` (defaults if omitted)."""
    base = base or ExperimentConfig()
    known = {f.name: getattr(base, f.name) for f in fields(base)}
    changes = {}
    for key, raw in pairs.items():
        if key not in known:
            raise ValidationError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, raw, known[key])
    return replace(base, **changes)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from None
    flat: dict = {}
    for section in cp.sections():
        for key, value in cp[section].items():
            if key in flat:
                raise ValidationError(f"config key {key!r} given twice")
            flat[key] = value
    # relative paths are taken relative to the config file
    root = Path(path).parent
    for key in ("labels", "grouping"):
        if flat.get(key):
            flat[key] = str(root / flat[key])
    if flat.get("matrices"):
        flat["matrices"] = ",".join(str(root / v.strip()) for v in flat["matrices"].split(",") if v.strip())
    return parse_overrides(flat, base)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = ["[experiment]"]
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
