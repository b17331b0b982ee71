"""Disorder averaging of form-factor curves.

Realisation ``i`` of a run with master seed ``m`` is built from the seed
``derive_seed(m, i)``, so each curve depends only on ``(spec, i)``.  Curves
are stored by index and reduced in index order, which makes the mean and
standard error bitwise independent of the number of worker threads.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Literal

import numpy as np

from . import __version__
from .dynamics import OdeConfig, coherent_gibbs, integrate_bgl_pure
from .errors import BglsffError, InvalidArgumentError, NumericError
from .hamiltonians import GoeParams, SykParams, build_goe_hamiltonian, make_rng, syk_hamiltonian
from .sff import FilterSpec, sff_bgl, sff_dephasing_jumps, sff_filtered, sff_unitary
from .spectral import diagonalize

log = logging.getLogger(__name__)

WORKERS_ENV = "BGLSFF_WORKERS"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """The SplitMix64 output function (Steele, Lea & Flood 2014); a bijection on 64-bit words."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, index: int) -> int:
    """Seed of realisation ``index``: ``splitmix64(master + (index + 1) * golden)``.

    For a fixed master seed this is injective in ``index`` over ``[0, 2**64)``
    (an odd multiplier and the SplitMix64 finaliser are both bijections).
    """
    if index < 0:
        raise InvalidArgumentError("realisation index must be non-negative")
    return splitmix64((int(master) + (int(index) + 1) * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class TimeGrid:
    t_min: float = 1e-1
    t_max: float = 1e6
    points_per_decade: int = 16
    include_zero: bool = False

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise InvalidArgumentError("time grid needs 0 < t_min < t_max")
        if self.points_per_decade < 1:
            raise InvalidArgumentError("points_per_decade must be positive")

    def times(self) -> np.ndarray:
        lo, hi = math.log10(self.t_min), math.log10(self.t_max)
        n = max(2, int(round((hi - lo) * self.points_per_decade)) + 1)
        t = np.logspace(lo, hi, n)
        return np.concatenate([[0.0], t]) if self.include_zero else t


@dataclass(frozen=True)
class ModelSpec:
    """``syk`` (``n_majorana``, ``j_scale``), ``goe`` (``dim``, ``scale``) or
    ``goe_with_x``: a GOE ``H0`` plus an independent GOE dephasing operator."""

    kind: Literal["syk", "goe", "goe_with_x"] = "syk"
    n_majorana: int = 12
    j_scale: float = 1.0
    dim: int = 50
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "syk":
            SykParams(self.n_majorana, self.j_scale)
        elif self.kind in ("goe", "goe_with_x"):
            GoeParams(self.dim, scale=self.scale)
        else:
            raise InvalidArgumentError(f"unknown model {self.kind!r}")

    @property
    def hilbert_dim(self) -> int:
        return 2 ** (self.n_majorana // 2) if self.kind == "syk" else self.dim


@dataclass(frozen=True)
class EvaluatorSpec:
    """Which form factor to evaluate per realisation.

    ``filtered`` uses the power filter ``exp(-gamma t |E|^delta)``, or a named
    form when ``filter_name`` is set.  ``ode`` integrates the nonlinear
    master equation from the coherent Gibbs state with dephasing operator
    ``X`` equal to an independent GOE draw (``x_source="goe"``) or to ``H0``.
    """

    kind: Literal["unitary", "bgl", "dephasing_jumps", "filtered", "ode"] = "bgl"
    delta: float = 2.0
    filter_name: str | None = None
    x_source: Literal["goe", "h0"] = "goe"
    dt: float = 0.02
    renormalize_every: int = 1

    def __post_init__(self):
        if self.kind not in ("unitary", "bgl", "dephasing_jumps", "filtered", "ode"):
            raise InvalidArgumentError(f"unknown evaluator {self.kind!r}")
        if self.x_source not in ("goe", "h0"):
            raise InvalidArgumentError(f"unknown x_source {self.x_source!r}")
        if self.delta < 0:
            raise InvalidArgumentError("delta must be non-negative")

    def filter(self, gamma: float) -> FilterSpec:
        if self.filter_name is not None:
            return FilterSpec(kind="custom", gamma=gamma, name=self.filter_name)
        return FilterSpec.power(gamma, self.delta)


@dataclass(frozen=True)
class EnsembleSpec:
    model: ModelSpec = field(default_factory=ModelSpec)
    n_realizations: int = 100
    master_seed: int = 0
    evaluator: EvaluatorSpec = field(default_factory=EvaluatorSpec)
    beta: float = 0.0
    gamma: float = 0.0
    grid: TimeGrid = field(default_factory=TimeGrid)

    def __post_init__(self):
        if self.n_realizations < 1:
            raise InvalidArgumentError("n_realizations must be >= 1")
        if self.beta < 0 or self.gamma < 0:
            raise InvalidArgumentError("beta and gamma must be non-negative")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidArgumentError("master_seed must be a 64-bit unsigned integer")
        if self.model.kind == "goe_with_x" and self.evaluator.kind == "ode" and self.evaluator.x_source != "goe":
            raise InvalidArgumentError("goe_with_x pairs with x_source='goe'")


@dataclass
class SffCurve:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_ok: int
    n_failed: int = 0
    failures: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.size

    def with_values(self, mean: np.ndarray, **meta) -> "SffCurve":
        return replace(self, mean=np.asarray(mean, dtype=float), metadata={**self.metadata, **meta})


def spec_metadata(spec: EnsembleSpec) -> dict:
    """Flat, ordered description of a run (written into curve-file preambles)."""
    out: dict = {"software": f"bglsff {__version__}"}
    out.update({f"model.{k}": v for k, v in asdict(spec.model).items()})
    out.update({f"evaluator.{k}": v for k, v in asdict(spec.evaluator).items()})
    out.update({f"grid.{k}": v for k, v in asdict(spec.grid).items()})
    out.update(
        n_realizations=spec.n_realizations,
        master_seed=spec.master_seed,
        beta=spec.beta,
        gamma=spec.gamma,
        ratio_definition="t_p/t_d",
    )
    if spec.model.kind in ("goe", "goe_with_x"):
        out["goe_normalization"] = "offdiag var sigma^2, diag 2 sigma^2, sigma=scale/sqrt(d)"
    return out


def build_realization(model: ModelSpec, seed: int):
    """Hamiltonian ``H0`` of one realisation."""
    if model.kind == "syk":
        return syk_hamiltonian(model.n_majorana, seed, model.j_scale)
    return build_goe_hamiltonian(GoeParams(model.dim, seed, model.scale), make_rng(seed))


def _goe_x(model: ModelSpec, seed: int) -> np.ndarray:
    # independent sub-stream for X
    sub = derive_seed(seed, 1)
    dim = model.hilbert_dim
    return build_goe_hamiltonian(GoeParams(dim, sub, model.scale), make_rng(sub)).matrix


def evaluate_realization(spec: EnsembleSpec, index: int) -> np.ndarray:
    """Form-factor values of realisation ``index`` on ``spec.grid``."""
    seed = derive_seed(spec.master_seed, index)
    h0 = build_realization(spec.model, seed)
    times = spec.grid.times()
    ev = spec.evaluator
    if ev.kind != "ode":
        s = diagonalize(h0)
        if ev.kind == "unitary":
            return sff_unitary(s, spec.beta, times)
        if ev.kind == "bgl":
            return sff_bgl(s, spec.beta, spec.gamma, times)
        if ev.kind == "dephasing_jumps":
            return sff_dephasing_jumps(s, spec.beta, spec.gamma, times)
        return sff_filtered(s, spec.beta, ev.filter(spec.gamma), times)

    eig = diagonalize(h0, want_vectors=True)
    use_goe = spec.model.kind == "goe_with_x" or ev.x_source == "goe"
    x = _goe_x(spec.model, seed) if use_goe else h0.matrix
    x_e = eig.to_energy_basis(np.asarray(x, dtype=complex))
    x2 = x_e @ x_e
    psi0 = coherent_gibbs(eig.spectrum, spec.beta).amplitudes
    cfg = OdeConfig(times, dt=ev.dt, renormalize_every=ev.renormalize_every)
    states = integrate_bgl_pure(psi0, eig.energies, 0.5 * (x2 + x2.conj().T), spec.gamma, cfg)
    return np.clip(np.abs(states @ psi0.conj()) ** 2, 0.0, 1.0)


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def run_ensemble(spec: EnsembleSpec, workers: int | None = None) -> SffCurve:
    """Average the chosen form factor over ``spec.n_realizations`` disorder draws.

    Failing realisations (numerical errors) are skipped and listed in
    ``failures``; if all fail a :class:`NumericError` is raised.
    """
    workers = resolve_workers(workers)
    times = spec.grid.times()

    def task(i):
        try:
            return evaluate_realization(spec, i)
        except NumericError as exc:
            log.warning("realisation %d failed: %s", i, exc)
            return exc

    if workers == 1:
        results = [task(i) for i in range(spec.n_realizations)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, range(spec.n_realizations)))

    failures = [(i, str(r)) for i, r in enumerate(results) if isinstance(r, BglsffError)]
    curves = [r for r in results if not isinstance(r, BglsffError)]
    if not curves:
        raise NumericError(f"all {spec.n_realizations} realisations failed")
    data = np.vstack(curves)
    mean = data.mean(axis=0)
    stderr = data.std(axis=0, ddof=1) / math.sqrt(len(curves)) if len(curves) > 1 else np.zeros_like(mean)
    meta = spec_metadata(spec)
    meta["n_failed"] = len(failures)
    return SffCurve(
        times=times,
        mean=np.clip(mean, 0.0, 1.0),
        stderr=stderr,
        n_ok=len(curves),
        n_failed=len(failures),
        failures=failures,
        metadata=meta,
    )


def realization_spectra(spec: EnsembleSpec) -> list:
    """Spectra of all realisations of ``spec`` (same seeds as :func:`run_ensemble`)."""
    return [
        diagonalize(build_realization(spec.model, derive_seed(spec.master_seed, i)))
        for i in range(spec.n_realizations)
    ]
