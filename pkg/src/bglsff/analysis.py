"""Dip / ramp / plateau extraction from averaged form-factor curves.

The four knobs that decide the numbers (smoothing window, dip search start,
plateau band ``epsilon`` and plateau reference) are recorded in every
:class:`RampMetrics`.  The ramp span is reported as ``t_p / t_d``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .ensemble import EnsembleSpec, SffCurve, run_ensemble
from .errors import BglsffError, InvalidArgumentError, NotSaturatedError
from .sff import plateau_value
from .spectral import DegeneracyClusters

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 0.5
DEFAULT_EPSILON = 0.1
DEFAULT_TAIL = 1.0

_FLOOR = 1e-300


@dataclass(frozen=True)
class FromTail:
    """Plateau reference: arithmetic mean of the raw curve over the last ``tail_decades``."""

    tail_decades: float = DEFAULT_TAIL

    def value(self, curve: SffCurve) -> float:
        t = curve.times
        mask = t >= t[-1] / 10.0**self.tail_decades
        return float(np.mean(curve.mean[mask]))

    def describe(self) -> str:
        return f"tail({self.tail_decades:g})"


@dataclass(frozen=True)
class FromFormula:
    """Plateau reference from the degeneracy structure, averaged over realisations."""

    clusters: Union[DegeneracyClusters, Sequence[DegeneracyClusters]]
    beta: float
    mode: str = "unitary"

    def value(self, curve: SffCurve | None = None) -> float:
        cl = [self.clusters] if isinstance(self.clusters, DegeneracyClusters) else list(self.clusters)
        return float(np.mean([plateau_value(c, self.beta, self.mode) for c in cl]))

    def describe(self) -> str:
        return f"formula({self.mode})"


@dataclass(frozen=True)
class FixedPlateau:
    f_p: float

    def value(self, curve: SffCurve | None = None) -> float:
        return float(self.f_p)

    def describe(self) -> str:
        return f"fixed({self.f_p:g})"


PlateauMode = Union[FromTail, FromFormula, FixedPlateau]


@dataclass
class DipResult:
    t_d: float
    f_d: float
    index: int
    boundary: bool


@dataclass
class RampMetrics:
    t_d: float
    f_d: float
    f_p: float
    t_p: float
    ratio: float
    dip_index: int
    plateau_index: int
    warnings: list = field(default_factory=list)
    method: dict = field(default_factory=dict)

    @property
    def resolved(self) -> bool:
        """False when the dip sits on a grid boundary or no ramp was found."""
        return not self.warnings


@dataclass
class SweepResult:
    parameter: str
    values: list
    metrics: list  # RampMetrics or None for failed entries
    curves: list
    errors: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.values)

    def ratios(self) -> np.ndarray:
        return np.array([m.ratio if m is not None else np.nan for m in self.metrics])

    def best(self):
        """``(value, metrics)`` with the largest ratio among resolved entries."""
        ok = [(v, m) for v, m in zip(self.values, self.metrics) if m is not None and m.resolved]
        if not ok:
            return None
        return max(ok, key=lambda vm: vm[1].ratio)


def _values(curve) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(curve, SffCurve):
        return np.asarray(curve.times, dtype=float), np.asarray(curve.mean, dtype=float)
    t, f = curve
    return np.asarray(t, dtype=float), np.asarray(f, dtype=float)


def smooth_curve(curve: SffCurve, window_decades: float = DEFAULT_WINDOW) -> SffCurve:
    """Centred moving geometric mean over a window of ``window_decades`` in log-time.

    Near the ends the window is truncated.  A ``t = 0`` point is passed
    through unchanged and excluded from all windows.
    """
    if window_decades < 0:
        raise InvalidArgumentError("smoothing window must be non-negative")
    t, f = curve.times, np.asarray(curve.mean, dtype=float)
    if window_decades == 0:
        return replace(curve, mean=f.copy())
    pos = t > 0
    logt = np.log10(t[pos])
    logf = np.log(np.maximum(f[pos], _FLOOR))
    half = 0.5 * window_decades + 1e-12
    lo = np.searchsorted(logt, logt - half, side="left")
    hi = np.searchsorted(logt, logt + half, side="right")
    csum = np.concatenate([[0.0], np.cumsum(logf)])
    smoothed = np.exp((csum[hi] - csum[lo]) / (hi - lo))
    out = f.copy()
    out[pos] = smoothed
    return replace(curve, mean=out, metadata={**curve.metadata, "smoothing_window_decades": window_decades})


def find_dip(curve: SffCurve, search_from: float | None = None) -> DipResult:
    """Global minimum for ``t >= search_from``; ties go to the earliest time."""
    t, f = _values(curve)
    start = 0 if search_from is None else int(np.searchsorted(t, search_from, side="left"))
    if start >= t.size:
        raise InvalidArgumentError("search_from lies beyond the time grid")
    idx = start + int(np.argmin(f[start:]))
    boundary = idx == t.size - 1 or (idx == start and start == 0)
    return DipResult(float(t[idx]), float(f[idx]), idx, boundary)


def find_plateau_time(
    curve: SffCurve,
    f_p: float,
    epsilon: float = DEFAULT_EPSILON,
    after_index: int = 0,
) -> tuple[float, int]:
    """Earliest grid time after ``after_index`` from which the curve stays in
    ``[f_p (1 - epsilon), f_p (1 + epsilon)]`` until the end of the grid."""
    if not f_p > 0:
        raise InvalidArgumentError("plateau value must be positive")
    if not 0 < epsilon < 1:
        raise InvalidArgumentError("epsilon must lie in (0, 1)")
    t, f = _values(curve)
    inside = (f >= f_p * (1 - epsilon)) & (f <= f_p * (1 + epsilon))
    if not inside[-1]:
        raise NotSaturatedError("curve does not end inside the plateau band")
    outside = np.flatnonzero(~inside)
    first = int(outside[-1]) + 1 if outside.size else 0
    first = max(first, after_index + 1)
    if first >= t.size:
        raise NotSaturatedError("no grid point after the dip inside the plateau band")
    return float(t[first]), first


def ramp_metrics(
    curve: SffCurve,
    plateau_mode: PlateauMode | None = None,
    window_decades: float = DEFAULT_WINDOW,
    epsilon: float = DEFAULT_EPSILON,
    search_from: float | None = None,
) -> RampMetrics:
    """Dip time and value, plateau value and time, and ``t_p / t_d``.

    Raises
    ------
    NotSaturatedError
        If the smoothed curve never settles in the plateau band.
    """
    plateau_mode = plateau_mode or FromTail()
    smooth = smooth_curve(curve, window_decades)
    dip = find_dip(smooth, search_from)
    f_p = plateau_mode.value(curve)
    t_p, ip = find_plateau_time(smooth, f_p, epsilon, after_index=dip.index)
    warnings = []
    if dip.boundary:
        warnings.append("dip_at_boundary")
    if dip.f_d > f_p:
        warnings.append("no_ramp")
    method = {
        "smoothing_window_decades": window_decades,
        "epsilon": epsilon,
        "search_from": search_from if search_from is not None else float(curve.times[0]),
        "plateau_reference": plateau_mode.describe(),
        "ratio_definition": "t_p/t_d",
    }
    return RampMetrics(
        t_d=dip.t_d,
        f_d=dip.f_d,
        f_p=f_p,
        t_p=t_p,
        ratio=t_p / dip.t_d if dip.t_d > 0 else math.inf,
        dip_index=dip.index,
        plateau_index=ip,
        warnings=warnings,
        method=method,
    )


def with_parameter(spec: EnsembleSpec, parameter: str, value: float) -> EnsembleSpec:
    """Copy of ``spec`` with ``gamma`` or the filter exponent ``delta`` replaced."""
    if parameter == "gamma":
        return replace(spec, gamma=float(value))
    if parameter == "delta":
        if spec.evaluator.kind not in ("filtered", "bgl"):
            raise InvalidArgumentError("a delta sweep needs the filtered evaluator")
        return replace(spec, evaluator=replace(spec.evaluator, kind="filtered", delta=float(value)))
    raise InvalidArgumentError(f"cannot sweep {parameter!r}; use 'gamma' or 'delta'")


def sweep(
    spec_template: EnsembleSpec,
    parameter: str,
    values: Sequence[float],
    plateau_mode: PlateauMode | None = None,
    workers: int | None = None,
    **metric_kwargs,
) -> SweepResult:
    """Run one ensemble per value (all sharing the template's master seed)."""
    values = list(values)
    if not values:
        raise InvalidArgumentError("sweep needs at least one value")
    metrics, curves, errors = [], [], {}
    for v in values:
        spec = with_parameter(spec_template, parameter, v)
        try:
            curve = run_ensemble(spec, workers=workers)
        except BglsffError as exc:
            log.warning("%s=%g failed: %s", parameter, v, exc)
            errors[v] = str(exc)
            metrics.append(None)
            curves.append(None)
            continue
        curves.append(curve)
        try:
            metrics.append(ramp_metrics(curve, plateau_mode, **metric_kwargs))
        except BglsffError as exc:
            errors[v] = str(exc)
            metrics.append(None)
    return SweepResult(parameter, values, metrics, curves, errors)
