"""Diagonalisation and spectrum-level primitives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NumericError
from .hamiltonians import HamiltonianInstance

#: Default degeneracy tolerance, relative to the spectral width.
DEFAULT_CLUSTER_TOL = 1e-10

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.size == 0:
            raise InvalidArgumentError("a spectrum is a non-empty 1-d array")
        if not np.all(np.isfinite(e)):
            raise InvalidArgumentError("spectrum contains non-finite energies")
        e = np.sort(e)
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def width(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    def __len__(self) -> int:
        return self.dim


@dataclass(frozen=True)
class EigenSystem:
    spectrum: Spectrum
    vectors: np.ndarray  # columns are eigenvectors

    @property
    def energies(self) -> np.ndarray:
        return self.spectrum.energies

    def to_energy_basis(self, op: np.ndarray) -> np.ndarray:
        """Express a computational-basis operator in the eigenbasis."""
        v = self.vectors
        return v.conj().T @ op @ v


@dataclass(frozen=True)
class DegeneracyClusters:
    energies: np.ndarray
    multiplicities: np.ndarray
    tol: float

    @property
    def dim(self) -> int:
        return int(self.multiplicities.sum())


def as_spectrum(obj) -> Spectrum:
    """Coerce a :class:`Spectrum`, :class:`EigenSystem` or array of energies."""
    if isinstance(obj, Spectrum):
        return obj
    if isinstance(obj, EigenSystem):
        return obj.spectrum
    return Spectrum(np.asarray(obj, dtype=float))


def check_hermitian(matrix: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and np.max(np.abs(m - m.conj().T)) > tol * scale:
        raise InvalidArgumentError("matrix is not Hermitian within tolerance")
    return m


def diagonalize(h: HamiltonianInstance | np.ndarray, want_vectors: bool = False) -> Spectrum | EigenSystem:
    """Dense Hermitian eigensolve (LAPACK ``*heevr`` via SciPy).

    Eigenvalues are returned in ascending order.  Real symmetric input is
    diagonalised in real arithmetic.
    """
    if isinstance(h, HamiltonianInstance):
        matrix, prov = h.matrix, h.provenance
    else:
        matrix, prov = np.asarray(h), {}
    matrix = check_hermitian(matrix)
    if np.iscomplexobj(matrix) and not np.any(matrix.imag):
        matrix = matrix.real
    try:
        if want_vectors:
            w, v = scipy.linalg.eigh(matrix, driver="evr")
        else:
            w = scipy.linalg.eigh(matrix, eigvals_only=True, driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    spectrum = Spectrum(w, provenance=dict(prov))
    if want_vectors:
        return EigenSystem(spectrum, v)
    return spectrum


def _shifted_sum(s, z):
    e = as_spectrum(s).energies
    z = np.asarray(z, dtype=complex)
    e_ref = np.where(z.real >= 0, e[0], e[-1])
    terms = np.exp(-z[..., None] * (e - e_ref[..., None]))
    return z, e_ref, terms.sum(axis=-1)


def log_partition_function(s, z) -> np.ndarray | complex:
    """Overflow-safe ``log Z(z)`` as ``-z E_ref + log(sum_n exp(-z (E_n - E_ref)))``.

    The shift ``E_ref`` is ``E_min`` for ``Re z >= 0`` and ``E_max`` otherwise,
    so no exponent is positive.  Accepts array ``z``.
    """
    z, e_ref, total = _shifted_sum(s, z)
    with np.errstate(divide="ignore"):
        out = -z * e_ref + np.log(total)
    return out if out.ndim else complex(out)


def partition_function(s, z) -> np.ndarray | complex:
    """``Z(z) = sum_n exp(-z E_n)`` for complex (array) ``z``, with exponent shifting.

    At ``z = 0`` the result is the plain state count.
    """
    z, e_ref, total = _shifted_sum(s, z)
    with np.errstate(divide="ignore"):
        log_mag = -z.real * e_ref + np.log(np.abs(total))
    if np.any(log_mag > 700.0):
        raise NumericError("partition function overflows double precision")
    out = np.exp(-z * e_ref) * total
    return out if out.ndim else complex(out)


def cluster_degeneracies(s, tol: float = DEFAULT_CLUSTER_TOL) -> DegeneracyClusters:
    """Greedy left-to-right grouping of levels closer than ``tol * width``.

    Each new level joins the current cluster when it lies within the
    threshold of the previous level; representatives are cluster means.
    """
    if not tol > 0:
        raise InvalidArgumentError("clustering tolerance must be positive")
    spec = as_spectrum(s)
    e = spec.energies
    threshold = tol * spec.width
    breaks = np.flatnonzero(np.diff(e) > threshold) + 1
    groups = np.split(e, breaks)
    return DegeneracyClusters(
        energies=np.array([g.mean() for g in groups]),
        multiplicities=np.array([g.size for g in groups], dtype=np.int64),
        tol=float(tol),
    )
