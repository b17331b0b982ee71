"""Closed-form spectral form factors of a single spectrum.

All evaluators accept a scalar or an array of times and return a float or an
array of the same shape.  Sums are evaluated in log space: the largest
exponent is subtracted before exponentiating, so ``beta E + gamma t E^2`` may
reach hundreds without overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.special import logsumexp, roots_hermitenorm

from .errors import DegenerateFilterError, InvalidArgumentError, ResourceError
from .spectral import DegeneracyClusters, as_spectrum

#: O(d^2) dephasing evaluator refuses larger spectra unless told otherwise.
DEPHASING_MAX_DIM = 2048

# chunk the (times x levels) work arrays to roughly this many entries
_CHUNK = 2**21

NAMED_FILTERS: dict[str, Callable[[np.ndarray, float, float], np.ndarray]] = {
    # log g(E) for filters whose expansion starts with 1 - gamma t E^2
    "lorentzian": lambda e, gamma, t: -np.log1p(gamma * t * e**2),
    "sech": lambda e, gamma, t: -np.log(np.cosh(np.sqrt(2.0 * gamma * t) * e)),
    "gaussian": lambda e, gamma, t: -gamma * t * e**2,
}


@dataclass(frozen=True)
class FilterSpec:
    """Spectral filter ``g(E) >= 0`` entering the filtered form factor.

    ``kind`` is one of

    * ``"none"``: ``g = 1``;
    * ``"power"``: ``g(E) = exp(-gamma t |E|^delta)``;
    * ``"custom"``: either a fixed table ``values`` aligned with the sorted
      spectrum, or a named form from :data:`NAMED_FILTERS`, or a callable
      ``function(E, t) -> g``.
    """

    kind: Literal["none", "power", "custom"] = "none"
    gamma: float = 0.0
    delta: float = 2.0
    values: np.ndarray | None = None
    name: str | None = None
    function: Callable[[np.ndarray, float], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "power", "custom"):
            raise InvalidArgumentError(f"unknown filter kind {self.kind!r}")
        if self.gamma < 0 or self.delta < 0:
            raise InvalidArgumentError("filter gamma and delta must be non-negative")
        if self.kind == "custom":
            given = [self.values is not None, self.name is not None, self.function is not None]
            if sum(given) != 1:
                raise InvalidArgumentError("a custom filter needs exactly one of values, name, function")
            if self.name is not None and self.name not in NAMED_FILTERS:
                raise InvalidArgumentError(f"unknown named filter {self.name!r}")
            if self.values is not None and np.any(np.asarray(self.values) < 0):
                raise InvalidArgumentError("filter values must be non-negative")

    @classmethod
    def power(cls, gamma: float, delta: float) -> "FilterSpec":
        return cls(kind="power", gamma=float(gamma), delta=float(delta))

    @property
    def time_coupled(self) -> bool:
        return self.kind == "power" or self.name is not None or self.function is not None

    def log_weights(self, energies: np.ndarray, t: np.ndarray) -> np.ndarray:
        """``log g(E_n)`` with shape ``(len(t), len(energies))``."""
        e = np.asarray(energies, dtype=float)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "none":
            return np.zeros((t.size, e.size))
        if self.kind == "power":
            return -self.gamma * t[:, None] * np.abs(e)[None, :] ** self.delta
        with np.errstate(divide="ignore"):
            if self.values is not None:
                vals = np.asarray(self.values, dtype=float)
                if vals.shape != e.shape:
                    raise InvalidArgumentError("filter table is not aligned with the spectrum")
                return np.broadcast_to(np.log(vals), (t.size, e.size))
            if self.name is not None:
                form = NAMED_FILTERS[self.name]
                return np.stack([form(e, self.gamma, ti) for ti in t])
            rows = [np.asarray(self.function(e, ti), dtype=float) for ti in t]
            if any(np.any(r < 0) for r in rows):
                raise InvalidArgumentError("filter function returned negative values")
            return np.log(np.stack(rows))


def _times(t) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("times must be finite and non-negative")
    return np.atleast_1d(arr).ravel(), arr.ndim == 0


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if beta < 0 or not math.isfinite(beta):
        raise InvalidArgumentError("beta must be finite and non-negative")
    return beta


def _finish(values: np.ndarray, scalar: bool):
    values = np.clip(values, 0.0, 1.0)
    return float(values[0]) if scalar else values


def _filtered_core(e: np.ndarray, beta: float, t: np.ndarray, log_g: np.ndarray) -> np.ndarray:
    """``|sum e^{-(beta+it)E} g|^2 / (Z(beta) sum e^{-beta E} g^2)`` for each row of ``log_g``."""
    log_z = logsumexp(-beta * e)
    out = np.empty(t.size)
    step = max(1, _CHUNK // max(e.size, 1))
    for lo in range(0, t.size, step):
        sl = slice(lo, lo + step)
        amp = -beta * e[None, :] + log_g[sl]
        peak = amp.max(axis=1)
        if np.any(~np.isfinite(peak)):
            raise DegenerateFilterError("the filter vanishes on the whole spectrum")
        phase = np.exp(-1j * np.outer(t[sl], e))
        s = (np.exp(amp - peak[:, None]) * phase).sum(axis=1)
        with np.errstate(divide="ignore"):
            log_num = 2.0 * peak + np.log(np.abs(s) ** 2)
        log_den = log_z + logsumexp(-beta * e[None, :] + 2.0 * log_g[sl], axis=1)
        out[sl] = np.exp(log_num - log_den)
    return out


def sff_unitary(s, beta: float, t):
    """``|Z(beta + it)|^2 / Z(beta)^2``."""
    e = as_spectrum(s).energies
    beta = _check_beta(beta)
    tt, scalar = _times(t)
    return _finish(_filtered_core(e, beta, tt, np.zeros((tt.size, e.size))), scalar)


def _power_log_filter(e: np.ndarray, gamma: float, delta: float, t: np.ndarray) -> np.ndarray:
    """``log g`` of the power filter, shifted by a constant per time so that its maximum is 0.

    The form factor is invariant under ``g -> c g``.  Subtracting the
    smallest ``|E|^delta`` before multiplying by ``gamma t`` keeps the
    exponents of the dominant levels free of the ``gamma t E^2`` rounding
    error, which reaches ``1e-9`` at ``gamma t = 1e6``.
    """
    a = np.abs(e)
    r = a.min()
    if delta == 2.0:
        excess = (a - r) * (a + r)
    else:
        excess = a**delta - r**delta
    return -float(gamma) * t[:, None] * excess[None, :]


def sff_bgl(s, beta: float, gamma: float, t):
    """Fidelity form factor under balanced gain and loss (Gaussian filter ``exp(-gamma t E^2)``)."""
    e = as_spectrum(s).energies
    beta = _check_beta(beta)
    if gamma < 0:
        raise InvalidArgumentError("gamma must be non-negative")
    tt, scalar = _times(t)
    return _finish(_filtered_core(e, beta, tt, _power_log_filter(e, gamma, 2.0, tt)), scalar)


def sff_filtered(s, beta: float, filt: FilterSpec, t):
    """Form factor with an arbitrary non-negative spectral filter.

    The power family with ``delta = 2`` coincides with :func:`sff_bgl`, and
    any constant filter (``delta = 0`` or ``g = 1``) gives :func:`sff_unitary`.
    """
    e = as_spectrum(s).energies
    beta = _check_beta(beta)
    tt, scalar = _times(t)
    if filt.kind == "power":
        log_g = _power_log_filter(e, filt.gamma, filt.delta, tt)
    else:
        log_g = filt.log_weights(e, tt)
    return _finish(_filtered_core(e, beta, tt, log_g), scalar)


def sff_dephasing_jumps(s, beta: float, gamma: float, t, max_dim: int = DEPHASING_MAX_DIM):
    """Fidelity under energy dephasing *with* quantum jumps.

    ``sum_{n,m} p_n p_m cos((E_n - E_m) t) exp(-gamma t (E_n - E_m)^2)`` with
    Gibbs weights ``p``; ``O(d^2)`` per time point.
    """
    e = as_spectrum(s).energies
    if e.size > max_dim:
        raise ResourceError(f"dephasing evaluator limited to d <= {max_dim}, got {e.size}")
    beta = _check_beta(beta)
    if gamma < 0:
        raise InvalidArgumentError("gamma must be non-negative")
    tt, scalar = _times(t)
    log_p = -beta * e
    p = np.exp(log_p - logsumexp(log_p))
    iu, ju = np.triu_indices(e.size, k=1)
    omega = e[ju] - e[iu]
    pair = p[iu] * p[ju]
    diag = float(np.sum(p**2))
    out = np.array(
        [diag + 2.0 * np.sum(pair * np.cos(omega * ti) * np.exp(-gamma * ti * omega**2)) for ti in tt]
    )
    return _finish(out, scalar)


def plateau_value(
    clusters: DegeneracyClusters,
    beta: float,
    mode: Literal["unitary", "bgl_asymptotic"] = "unitary",
) -> float:
    """Long-time value of the form factor from the degeneracy structure.

    ``unitary``: time average ``sum_n N_n^2 e^{-2 beta E_n} / Z(beta)^2`` of the
    isolated form factor.  ``bgl_asymptotic``: ``t -> infinity`` limit under
    BGL, ``N_* e^{-beta E_*} / Z(beta)`` with ``E_*`` the cluster of smallest
    ``|E|``.
    """
    beta = _check_beta(beta)
    e = np.asarray(clusters.energies, dtype=float)
    n = np.asarray(clusters.multiplicities, dtype=float)
    shift = e[0]
    w = np.exp(-beta * (e - shift))
    z = float(np.sum(n * w))
    if mode == "unitary":
        return float(np.sum(n**2 * w**2) / z**2)
    if mode == "bgl_asymptotic":
        k = int(np.argmin(np.abs(e)))
        return float(n[k] * w[k] / z)
    raise InvalidArgumentError(f"unknown plateau mode {mode!r}")


def plateau_value_at(clusters: DegeneracyClusters, beta: float, gamma: float, t):
    """Finite-time BGL plateau estimate (long-time average of the oscillating numerator)."""
    beta = _check_beta(beta)
    e = np.asarray(clusters.energies, dtype=float)
    n = np.asarray(clusters.multiplicities, dtype=float)
    tt, scalar = _times(t)
    log_n = np.log(n)
    filt = -2.0 * gamma * tt[:, None] * e[None, :] ** 2
    log_num = logsumexp(2 * log_n - 2 * beta * e + filt, axis=1)
    log_den = logsumexp(log_n - beta * e) + logsumexp(log_n - beta * e + filt, axis=1)
    out = np.exp(log_num - log_den)
    return float(out[0]) if scalar else out


def sff_via_kernel(
    s,
    beta: float,
    gamma: float,
    t: float,
    nodes: int = 64,
    tol: float = 1e-8,
    max_nodes: int = 8192,
) -> float:
    """BGL form factor from the heat-kernel average of ``Z(beta + i s)``.

    The kernel ``K(t, s)`` is a normal density in ``s`` with mean ``t`` and
    variance ``2 gamma t``; both integrals are done by probabilists'
    Gauss-Hermite quadrature after ``s = t + sqrt(2 gamma t) u``.  The double
    integral in the denominator factorises level by level.  The node count
    doubles from ``nodes`` until two successive results agree to ``tol``
    (relative); failing that a ``RuntimeWarning`` is issued.

    Notes
    -----
    On the real ``u`` axis every level contributes an O(1) oscillating
    integrand, so levels whose Boltzmann weight is large but whose filtered
    weight ``e^{-beta E - gamma t E^2}`` is tiny leave an absolute rounding
    floor of about ``1e-14`` that swamps small form factors.  The integrand
    is entire, so the ``u`` contour is moved to ``Im u = w c`` with
    ``w = sqrt(2 gamma t)`` and ``c`` the saddle of the weighted kernel
    (``-beta / w^2`` for the numerator, ``-beta / (2 w^2)`` for the
    denominator) clipped to the spectral range.  Each level then carries its
    exact exponential prefactor and the quadrature only resolves the
    remaining oscillation in ``E - c``.
    """
    if not (gamma > 0 and t > 0):
        raise InvalidArgumentError("the kernel representation needs gamma > 0 and t > 0")
    if nodes < 8:
        raise InvalidArgumentError("at least 8 quadrature nodes are required")
    e = as_spectrum(s).energies
    beta = _check_beta(beta)
    width = math.sqrt(2.0 * gamma * t)
    shifted = -beta * (e - e[0])
    c_num = float(np.clip(-beta / width**2, e[0], e[-1]))
    c_den = float(np.clip(-beta / (2.0 * width**2), e[0], e[-1]))
    # log of p_n times the contour-shift prefactor of each level
    lam = shifted + 0.5 * (width * c_num) ** 2 - width**2 * c_num * e
    mu = shifted + (width * c_den) ** 2 - 2.0 * width**2 * c_den * e
    lam_max, mu_max = lam.max(), mu.max()
    log_z = logsumexp(shifted)

    def shifted_average(u, w, c):
        # Gaussian average of exp(-i width u (E - c)); the carrier exp(-i t E) is exact
        return (w[:, None] * np.exp(-1j * width * np.outer(u, e - c))).sum(axis=0)

    def evaluate(n: int) -> float:
        u, w = roots_hermitenorm(n)
        w = w / math.sqrt(2.0 * math.pi)
        q_num = shifted_average(u, w, c_num) * np.exp(-1j * t * e)
        q_den = shifted_average(u, w, c_den)
        num = np.abs(np.sum(np.exp(lam - lam_max) * q_num)) ** 2
        den = np.sum(np.exp(mu - mu_max) * np.abs(q_den) ** 2)
        if not (num > 0 and den > 0):
            return 0.0
        return float(np.exp(math.log(num) - math.log(den) + 2.0 * lam_max - mu_max - log_z))

    n = int(nodes)
    prev = evaluate(n)
    while n < max_nodes:
        n *= 2
        cur = evaluate(n)
        if abs(cur - prev) <= tol * max(abs(cur), 1e-300):
            return min(max(cur, 0.0), 1.0)
        prev = cur
    warnings.warn(
        f"kernel quadrature not converged at {n} nodes (gamma t = {gamma * t:g})",
        RuntimeWarning,
        stacklevel=2,
    )
    return min(max(prev, 0.0), 1.0)
