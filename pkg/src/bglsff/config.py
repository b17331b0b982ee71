"""Run configuration: one flat record per job.

Values come from (lowest to highest precedence) the built-in defaults, a
``key=value`` config file and command-line flags.  Keys are the long flag
names with dashes replaced by underscores.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .analysis import FromTail
from .ensemble import EnsembleSpec, EvaluatorSpec, ModelSpec, TimeGrid
from .errors import InvalidArgumentError
from .sff import NAMED_FILTERS

COMMANDS = ("sff", "sweep", "evolve", "analyze", "plot")
EVALUATORS = ("unitary", "bgl", "dephasing_jumps", "filtered", "ode")
FILTERS = ("none", "power", *NAMED_FILTERS)

# keys never written to output preambles: they do not change any result
_EPHEMERAL = {"workers", "print_config", "config"}


class UsageError(InvalidArgumentError):
    """Invalid or conflicting options."""


@dataclass(frozen=True)
class RunConfig:
    command: str = "sff"
    model: str = "syk"
    majoranas: int = 12
    dim: int = 50
    j_scale: float = 1.0
    goe_scale: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    evaluator: str = "bgl"
    filter: str = "none"
    delta: float = 2.0
    x_source: str = "goe"
    dt: float = 0.02
    renormalize_every: int = 1
    realizations: int = 100
    seed: int = 0
    t_min: float = 0.1
    t_max: float = 1e6
    points_per_decade: int = 16
    include_zero: bool = False
    window: float = 0.5
    epsilon: float = 0.1
    tail_decades: float = 1.0
    search_from: float = 0.0
    sweep_param: str = "gamma"
    sweep_values: tuple = ()
    out: str = ""
    out_dir: str = ""
    metrics: str = ""
    inputs: tuple = ()
    title: str = ""
    workers: int = 0
    print_config: bool = False

    # -- conversion ---------------------------------------------------------

    def ensemble_spec(self) -> EnsembleSpec:
        model = ModelSpec(
            kind=self.model,
            n_majorana=self.majoranas,
            j_scale=self.j_scale,
            dim=self.dim,
            scale=self.goe_scale,
        )
        filter_name = self.filter if self.filter in NAMED_FILTERS else None
        evaluator = EvaluatorSpec(
            kind=self.evaluator,
            delta=self.delta,
            filter_name=filter_name,
            x_source=self.x_source,
            dt=self.dt,
            renormalize_every=self.renormalize_every,
        )
        grid = TimeGrid(self.t_min, self.t_max, self.points_per_decade, self.include_zero)
        return EnsembleSpec(model, self.realizations, self.seed, evaluator, self.beta, self.gamma, grid)

    def plateau_mode(self):
        return FromTail(self.tail_decades)

    def metric_kwargs(self) -> dict:
        return {
            "window_decades": self.window,
            "epsilon": self.epsilon,
            "search_from": self.search_from or None,
        }

    def to_flat(self, include_ephemeral: bool = False) -> dict:
        out = {}
        for key, value in asdict(self).items():
            if key in _EPHEMERAL and not include_ephemeral:
                continue
            if isinstance(value, (tuple, list)):
                value = ",".join(_fmt_scalar(v) for v in value)
            out[key] = value
        return out

    def dumps(self) -> str:
        return "".join(f"{k}={_fmt_scalar(v)}\n" for k, v in self.to_flat().items())


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TYPES = {f.name: type(f.default) if not isinstance(f.default, tuple) else tuple for f in fields(RunConfig)}


def _coerce(key: str, raw):
    if key not in _FIELDS:
        raise UsageError(f"unknown configuration key {key!r}")
    kind = _TYPES[key]
    if not isinstance(raw, str):
        if kind is tuple:
            return tuple(raw)
        if kind is float and isinstance(raw, int):
            return float(raw)
        return raw
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off", ""):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            items = [s.strip() for s in text.split(",") if s.strip()]
            if key == "sweep_values":
                return tuple(float(s) for s in items)
            return tuple(items)
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None
    return text


def parse_kv_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key=value`` lines; lines starting with ``#`` are comments."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise UsageError(f"{source}:{lineno}: expected key=value")
        key, value = (s.strip() for s in body.split("=", 1))
        values[key.replace("-", "_")] = _coerce(key.replace("-", "_"), value)
    return values


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    return parse_kv_text(text, str(path))


def config_from_preamble(meta: dict) -> RunConfig:
    """Rebuild the :class:`RunConfig` echoed at the top of an output file."""
    values = {k: _coerce(k, v) for k, v in meta.items() if not k.startswith("meta.")}
    return resolve(values)


def resolve(values: dict) -> RunConfig:
    """Apply defaults, canonicalise and validate."""
    for key in values:
        if key not in _FIELDS:
            raise UsageError(f"unknown configuration key {key!r}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    cfg = canonicalize(cfg)
    validate(cfg)
    return cfg


def canonicalize(cfg: RunConfig) -> RunConfig:
    """Rewrite equivalent configurations into one form.

    A power filter with ``delta = 2`` is the BGL Gaussian filter, so such a
    configuration is stored as ``evaluator=bgl``.
    """
    if cfg.evaluator == "filtered" and cfg.filter == "power" and cfg.delta == 2.0:
        return replace(cfg, evaluator="bgl", filter="none", delta=2.0)
    if cfg.model == "goe_with_x":
        return replace(cfg, x_source="goe")
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise UsageError(f"unknown command {cfg.command!r}")
    if cfg.model not in ("syk", "goe", "goe_with_x"):
        raise UsageError(f"unknown model {cfg.model!r}")
    if cfg.evaluator not in EVALUATORS:
        raise UsageError(f"unknown evaluator {cfg.evaluator!r}")
    if cfg.filter not in FILTERS:
        raise UsageError(f"unknown filter {cfg.filter!r}")
    if cfg.model == "syk" and (cfg.majoranas < 4 or cfg.majoranas % 2):
        raise UsageError(f"--majoranas must be an even integer >= 4, got {cfg.majoranas}")
    if cfg.model != "syk" and cfg.dim < 2:
        raise UsageError("--dim must be >= 2")
    if cfg.filter != "none" and cfg.evaluator != "filtered":
        raise UsageError("--filter only applies to --evaluator filtered")
    if cfg.evaluator == "filtered" and cfg.filter == "none" and not (
        cfg.command == "sweep" and cfg.sweep_param == "delta"
    ):
        raise UsageError("--evaluator filtered needs --filter")
    for key in ("beta", "gamma", "delta", "window", "search_from"):
        v = getattr(cfg, key)
        if not (math.isfinite(v) and v >= 0):
            raise UsageError(f"--{key.replace('_', '-')} must be finite and non-negative")
    if not (0 < cfg.epsilon < 1):
        raise UsageError("--epsilon must lie in (0, 1)")
    if not (0 < cfg.t_min < cfg.t_max):
        raise UsageError("need 0 < --t-min < --t-max")
    if cfg.points_per_decade < 1 or cfg.realizations < 1:
        raise UsageError("--points-per-decade and --realizations must be positive")
    if not 0 <= cfg.seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    if cfg.dt <= 0 or cfg.renormalize_every < 1:
        raise UsageError("--dt must be positive and --renormalize-every >= 1")
    if cfg.x_source not in ("goe", "h0"):
        raise UsageError("--x-source must be goe or h0")
    if cfg.workers < 0:
        raise UsageError("--workers must be >= 0")
    if cfg.command == "sweep":
        if cfg.sweep_param not in ("gamma", "delta"):
            raise UsageError("--param must be gamma or delta")
        if not cfg.sweep_values:
            raise UsageError("sweep needs --values")
        if cfg.sweep_param == "delta" and cfg.evaluator not in ("filtered", "bgl"):
            raise UsageError("a delta sweep needs --evaluator filtered")
        if not cfg.out_dir:
            raise UsageError("sweep needs --out-dir")
    if cfg.command in ("sff", "evolve") and not cfg.out and not cfg.print_config:
        raise UsageError(f"{cfg.command} needs --out")
    if cfg.command == "evolve" and cfg.model == "syk" and cfg.x_source == "goe" and cfg.majoranas > 20:
        raise UsageError("evolve is limited to small systems")
    if cfg.command in ("analyze", "plot") and not cfg.inputs:
        raise UsageError(f"{cfg.command} needs input files")
    if cfg.command == "plot" and not cfg.out:
        raise UsageError("plot needs --out")
    if cfg.command == "analyze" and not cfg.metrics and not cfg.out:
        raise UsageError("analyze needs --out (metrics CSV)")
