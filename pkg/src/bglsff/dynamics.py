"""State-level evolution under balanced gain and loss (BGL).

Conventions
-----------
The effective Hamiltonian is ``H_eff = H0 - i gamma X^2`` for a Hermitian
dephasing operator ``X``; energy dephasing is ``X = H0``.  For a general
function of the Hamiltonian, ``X = w(H0)`` and the closed-form propagator
damps level ``n`` by ``exp(-gamma t |w(E_n)|^2)``.  The Lindblad operator
``K = sqrt(2) H0`` therefore corresponds to ``w(E) = E``; a dephasing operator
``X = c H0`` corresponds to ``|w(E)|^2 = c^2 E^2``.

The norm-preserving flow integrated numerically is::

    d rho/dt = -i (H_eff rho - rho H_eff^dag) + 2 gamma Tr[X^2 rho] rho

whose last term is exactly what restores ``d Tr rho / dt = 0``.

States are stored in the eigenbasis of ``H0`` unless tagged otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateFilterError, IntegrationError, InvalidArgumentError
from .hamiltonians import HamiltonianInstance
from .spectral import EigenSystem, Spectrum, as_spectrum, check_hermitian, diagonalize

Basis = Literal["energy", "computational"]

#: Largest tolerated per-step trace drift before integration is abandoned.
MAX_STEP_DRIFT = 1e-3


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    basis: Basis = "energy"

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density_matrix(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()), self.basis)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    basis: Basis = "energy"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def validate(self, tol: float = 1e-10) -> "DensityMatrix":
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise InvalidArgumentError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > tol:
            raise InvalidArgumentError("density matrix does not have unit trace")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() < -1e-9:
            raise InvalidArgumentError("density matrix is not positive semidefinite")
        return self


@dataclass(frozen=True)
class WFunction:
    """The function ``w`` of the generalised dephasing operator ``w(H0)``.

    Only ``|w(E)|^2`` enters the dynamics.  ``kind`` selects ``|w|^2 = c E^2``
    (``identity``), ``c |E|^delta`` (``power``) or a table aligned with the
    sorted spectrum (``table``); ``c`` is ``coefficient``.
    """

    kind: Literal["identity", "power", "table"] = "identity"
    delta: float = 2.0
    coefficient: float = 1.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "power", "table"):
            raise InvalidArgumentError(f"unknown w-function kind {self.kind!r}")
        if self.coefficient < 0 or self.delta < 0:
            raise InvalidArgumentError("w-function coefficient and exponent must be non-negative")
        if self.kind == "table" and (self.table is None or np.any(np.asarray(self.table) < 0)):
            raise InvalidArgumentError("a table w-function needs non-negative |w(E_n)|^2 values")

    @classmethod
    def for_operator_multiple(cls, c: float) -> "WFunction":
        """``X = c H0``: ``|w(E)|^2 = c^2 E^2``."""
        return cls(kind="identity", coefficient=float(c) ** 2)

    def weights(self, energies: np.ndarray) -> np.ndarray:
        e = np.asarray(energies, dtype=float)
        if self.kind == "identity":
            return self.coefficient * e**2
        if self.kind == "power":
            return self.coefficient * np.abs(e) ** self.delta
        table = np.asarray(self.table, dtype=float)
        if table.shape != e.shape:
            raise InvalidArgumentError("w-function table is not aligned with the spectrum")
        return self.coefficient * table

    def excess(self, energies: np.ndarray, ref: int) -> np.ndarray:
        """``|w(E_n)|^2 - |w(E_ref)|^2``, free of cancellation for the default form."""
        e = np.asarray(energies, dtype=float)
        if self.kind == "identity":
            a, r = np.abs(e), abs(e[ref])
            return self.coefficient * (a - r) * (a + r)
        w2 = self.weights(e)
        return w2 - w2[ref]


@dataclass(frozen=True)
class OdeConfig:
    """Fixed-step integration settings.

    Only the classical four-stage Runge-Kutta scheme (``"rk4"``, Butcher
    nodes 0, 1/2, 1/2, 1 and weights 1/6, 1/3, 1/3, 1/6) is provided.  Each
    interval between output times is split into equal steps no longer than
    ``dt``.
    """

    t_grid: np.ndarray
    dt: float = 0.01
    renormalize_every: int = 1
    method: str = "rk4"

    def __post_init__(self):
        grid = np.asarray(self.t_grid, dtype=float)
        object.__setattr__(self, "t_grid", grid)
        if self.method != "rk4":
            raise InvalidArgumentError(f"unsupported integration method {self.method!r}")
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if self.renormalize_every < 1:
            raise InvalidArgumentError("renormalize_every must be >= 1")
        if grid.ndim != 1 or grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
            raise InvalidArgumentError("output times must be non-negative and strictly increasing")


@dataclass
class Trajectory:
    """Density matrices (energy basis) at the output times plus diagnostics."""

    times: np.ndarray
    states: np.ndarray
    trace_drift: np.ndarray
    spectrum: Spectrum
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i) -> DensityMatrix:
        return DensityMatrix(self.states[i], "energy")

    def fidelities(self, psi: StateVector) -> np.ndarray:
        return np.array([fidelity(psi, self[i]) for i in range(len(self))])

    def purities(self) -> np.ndarray:
        return np.array([purity(self[i]) for i in range(len(self))])

    def mean_energies(self) -> np.ndarray:
        return np.array([mean_energy(self[i], self.spectrum) for i in range(len(self))])


def coherent_gibbs(s, beta: float) -> StateVector:
    """Amplitudes ``exp(-beta E_n / 2) / sqrt(Z(beta))`` in the energy basis."""
    if beta < 0:
        raise InvalidArgumentError("beta must be non-negative")
    e = as_spectrum(s).energies
    log_w = -0.5 * beta * e
    amp = np.exp(log_w - 0.5 * logsumexp(2.0 * log_w))
    amp /= np.linalg.norm(amp)
    return StateVector(amp.astype(complex), "energy")


def _as_density(rho) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    if isinstance(rho, StateVector):
        return rho.density_matrix()
    return DensityMatrix(np.asarray(rho, dtype=complex), "energy")


def evolve_bgl_closed(rho0, s, gamma: float, t: float, w: WFunction | None = None) -> DensityMatrix:
    """Exact BGL state at time ``t`` for dephasing operators that commute with ``H0``.

    ``rho_nm(t) = rho_nm(0) exp(-i (E_n - E_m) t - gamma t (|w_n|^2 + |w_m|^2))``
    divided by ``sum_k rho_kk(0) exp(-2 gamma t |w_k|^2)``.
    """
    rho0 = _as_density(rho0)
    if rho0.basis != "energy":
        raise InvalidArgumentError("closed-form evolution needs an energy-basis state")
    if gamma < 0 or t < 0:
        raise InvalidArgumentError("gamma and t must be non-negative")
    e = as_spectrum(s).energies
    if rho0.dim != e.size:
        raise InvalidArgumentError("state and spectrum dimensions differ")
    wf = w or WFunction()
    w2 = wf.weights(e)
    diag = np.real(np.diag(rho0.matrix))
    support = diag > 0
    if not np.any(support):
        raise DegenerateFilterError("initial state has no diagonal weight")
    ref = int(np.flatnonzero(support)[np.argmin(w2[support])])
    damp = np.exp(-gamma * t * wf.excess(e, ref))
    norm = float(np.sum(diag * damp**2))
    if norm < 1e-300:
        raise DegenerateFilterError("BGL normalisation vanished")
    phase = np.exp(-1j * e * t)
    amp = phase * damp
    return DensityMatrix(rho0.matrix * np.outer(amp, amp.conj()) / norm, "energy")


def fidelity(psi: StateVector, rho: DensityMatrix) -> float:
    """``<psi| rho |psi>``; imaginary residue above ``1e-12`` is an error."""
    rho = _as_density(rho)
    if psi.basis != rho.basis:
        raise InvalidArgumentError(f"basis mismatch: {psi.basis} vs {rho.basis}")
    if psi.dim != rho.dim:
        raise InvalidArgumentError("state dimensions differ")
    a = psi.amplitudes
    val = np.vdot(a, rho.matrix @ a)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise InvalidArgumentError("fidelity has a non-negligible imaginary part; is rho Hermitian?")
    return float(min(max(val.real, 0.0), 1.0))


def purity(rho: DensityMatrix) -> float:
    m = _as_density(rho).matrix
    return float(np.real(np.vdot(m.conj().T, m)))


def mean_energy(rho: DensityMatrix, s) -> float:
    """``Tr[rho H0]`` for an energy-basis state."""
    rho = _as_density(rho)
    if rho.basis != "energy":
        raise InvalidArgumentError("mean_energy needs an energy-basis state")
    e = as_spectrum(s).energies
    return float(np.real(np.diag(rho.matrix)) @ e)


def _eigensystem(h0) -> EigenSystem:
    if isinstance(h0, EigenSystem):
        return h0
    return diagonalize(h0, want_vectors=True)


def _rk4_steps(t_grid: np.ndarray, dt: float, t0: float = 0.0):
    """Yield ``(output_index, n_steps, step)`` for each output interval."""
    prev = t0
    for i, t in enumerate(t_grid):
        span = t - prev
        n = 0 if span <= 0 else max(1, math.ceil(span / dt - 1e-9))
        yield i, n, (span / n if n else 0.0)
        prev = t


def integrate_bgl_ode(
    rho0,
    h0: HamiltonianInstance | EigenSystem | np.ndarray,
    x_op: np.ndarray,
    gamma: float,
    cfg: OdeConfig,
) -> Trajectory:
    """Integrate the nonlinear BGL master equation with classical RK4.

    ``rho0`` and ``x_op`` are taken in the computational basis unless
    ``rho0`` is tagged ``"energy"``.  Integration runs in the eigenbasis of
    ``H0`` starting at ``t = 0``.  The trace is reset to one every
    ``cfg.renormalize_every`` steps; the largest pre-reset deviation in each
    output interval is reported as ``trace_drift``.
    """
    if gamma < 0:
        raise InvalidArgumentError("gamma must be non-negative")
    eig = _eigensystem(h0)
    e = eig.energies
    d = e.size
    x = check_hermitian(np.asarray(x_op), tol=1e-10)
    if x.shape != (d, d):
        raise InvalidArgumentError("dephasing operator has the wrong shape")
    rho = _as_density(rho0)
    if rho.dim != d:
        raise InvalidArgumentError("state and Hamiltonian dimensions differ")
    r = rho.matrix.astype(complex)
    if rho.basis == "computational":
        r = eig.to_energy_basis(r)

    x_e = eig.to_energy_basis(x.astype(complex))
    x2 = x_e @ x_e
    x2 = 0.5 * (x2 + x2.conj().T)
    # generator A = -i H_eff; rhs(r) = A r + r A^dag + 2 gamma Tr[X^2 r] r
    a = -gamma * x2 - 1j * np.diag(e)
    a_dag = a.conj().T
    x2_t = x2.T  # Tr[X2 r] = sum(X2^T * r)

    def rhs(m):
        return a @ m + m @ a_dag + (2.0 * gamma * np.sum(x2_t * m)) * m

    states = np.empty((cfg.t_grid.size, d, d), dtype=complex)
    drift = np.zeros(cfg.t_grid.size)
    counter = 0
    for i, n, h in _rk4_steps(cfg.t_grid, cfg.dt):
        worst = 0.0
        for _ in range(n):
            k1 = rhs(r)
            k2 = rhs(r + 0.5 * h * k1)
            k3 = rhs(r + 0.5 * h * k2)
            k4 = rhs(r + h * k3)
            r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            counter += 1
            if counter % cfg.renormalize_every == 0:
                tr = np.trace(r).real
                dev = tr - 1.0
                if not math.isfinite(tr) or abs(dev) > MAX_STEP_DRIFT * cfg.renormalize_every:
                    raise IntegrationError(
                        f"trace drift {dev:.3g} after a step of {h:.3g}; reduce dt"
                    )
                worst = dev if abs(dev) > abs(worst) else worst
                r = r / tr
        r = 0.5 * (r + r.conj().T)
        states[i] = r
        drift[i] = worst
    return Trajectory(
        times=cfg.t_grid.copy(),
        states=states,
        trace_drift=drift,
        spectrum=eig.spectrum,
        metadata={"gamma": gamma, "dt": cfg.dt, "method": cfg.method,
                  "renormalize_every": cfg.renormalize_every},
    )


def rk4_step_matrix(a: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for the linear system ``dv/dt = a v``.

    For a constant generator the four stages collapse to the degree-4 Taylor
    polynomial ``I + ha + (ha)^2/2 + (ha)^3/6 + (ha)^4/24``.
    """
    ha = h * np.asarray(a)
    out = np.eye(ha.shape[0], dtype=ha.dtype)
    term = out
    for k in (1, 2, 3, 4):
        term = term @ ha / k
        out = out + term
    return out


def integrate_bgl_pure(
    psi0: np.ndarray,
    energies: np.ndarray,
    x2_energy: np.ndarray,
    gamma: float,
    cfg: OdeConfig,
) -> np.ndarray:
    """Pure-state BGL evolution: ``d psi/dt = -i H_eff psi + gamma <X^2> psi``.

    The nonlinear term is a real multiple of ``psi``, so it only fixes the
    norm: the normalised solution equals the normalised solution of the linear
    equation ``d phi/dt = -i H_eff phi``.  That linear equation is stepped with
    classical RK4 at the step size implied by ``cfg.dt``; because the
    generator is constant, ``n`` equal steps are applied as the ``n``-th power
    of the RK4 step matrix (repeated squaring), and the state is renormalised
    at every output time.  Equivalent to :func:`integrate_bgl_ode` for
    ``rho = |psi><psi|`` at a fraction of the cost.

    ``psi0`` may hold several initial states as columns; each is normalised
    separately.  Everything is in the eigenbasis of ``H0``; ``x2_energy`` is
    ``X^2`` there.  Returns the normalised states, shape
    ``(len(t_grid),) + psi0.shape``.
    """
    if gamma < 0:
        raise InvalidArgumentError("gamma must be non-negative")
    psi = np.array(psi0, dtype=complex)
    vec = psi.ndim == 1
    if vec:
        psi = psi[:, None]
    psi = psi / np.linalg.norm(psi, axis=0)
    e = np.asarray(energies, dtype=float)
    a = -gamma * np.asarray(x2_energy, dtype=complex) - 1j * np.diag(e)

    out = np.empty((cfg.t_grid.size,) + psi.shape, dtype=complex)
    for i, n, h in _rk4_steps(cfg.t_grid, cfg.dt):
        if n:
            step = rk4_step_matrix(a, h)
            # the exact propagator is a contraction; growth means an unstable dt
            if np.linalg.norm(step, 2) > 1.0 + MAX_STEP_DRIFT:
                raise IntegrationError(f"RK4 step {h:.3g} is unstable for this generator; reduce dt")
            psi = np.linalg.matrix_power(step, n) @ psi
            norm = np.linalg.norm(psi, axis=0)
            if not np.all(np.isfinite(norm)) or np.any(norm == 0.0):
                raise IntegrationError(f"state lost its norm with step {h:.3g}; reduce dt")
            psi = psi / norm
        out[i] = psi
    return out[..., 0] if vec else out
