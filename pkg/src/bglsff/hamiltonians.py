"""Random Hamiltonians: the quartic SYK model and the Gaussian Orthogonal Ensemble.

Majorana operators are realised through a Jordan-Wigner map on
``n_majorana // 2`` qubits, with qubit 1 the most significant bit of the
computational-basis index::

    chi_{2j-1} = Z_1 ... Z_{j-1} X_j / sqrt(2)
    chi_{2j}   = Z_1 ... Z_{j-1} Y_j / sqrt(2)

so that ``{chi_k, chi_l} = delta_kl``.  Every Pauli string maps a basis
state ``|b>`` onto a single basis state ``|b ^ x_mask>`` times a phase, which
is how the operators are stored internally (a "signed permutation"): a flip
mask plus a coefficient vector of length ``d``.  Dense matrices are only
materialised on request.

Random numbers come from :class:`numpy.random.Generator` with the PCG64 bit
generator.  SYK couplings are drawn in lexicographic order of the quadruples
``k < l < m < n``; GOE entries are drawn as one row-major ``d x d`` block.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from .errors import InvalidArgumentError, ResourceError

#: Largest Hilbert-space dimension a dense Hamiltonian may have (d = 2**15).
MAX_DENSE_DIM = 2**15

_SQRT_HALF = 1.0 / math.sqrt(2.0)


def make_rng(seed: int) -> np.random.Generator:
    """Return the package's canonical generator (PCG64) for a 64-bit seed."""
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class MajoranaSet:
    """Jordan-Wigner Majorana operators in signed-permutation form.

    ``flips[k]`` is the bit mask flipped by operator ``k`` and ``coefs[k, b]``
    is the amplitude of ``chi_k |b>`` on ``|b ^ flips[k]>``.
    """

    n_majorana: int
    flips: np.ndarray
    coefs: np.ndarray

    @property
    def dim(self) -> int:
        return self.coefs.shape[1]

    @property
    def n_qubits(self) -> int:
        return self.n_majorana // 2

    def dense(self, k: int) -> np.ndarray:
        """Dense ``d x d`` matrix of operator ``k`` (zero-based)."""
        d = self.dim
        cols = np.arange(d)
        out = np.zeros((d, d), dtype=complex)
        out[cols ^ self.flips[k], cols] = self.coefs[k]
        return out

    @cached_property
    def operators(self) -> list[np.ndarray]:
        return [self.dense(k) for k in range(self.n_majorana)]


def _check_dim(n_qubits: int, max_dim: int) -> int:
    if n_qubits > 62 or 2**n_qubits > max_dim:
        raise ResourceError(
            f"Hilbert dimension 2**{n_qubits} exceeds the limit of {max_dim}"
        )
    return 2**n_qubits


def build_majorana_set(n_majorana: int, max_dim: int = MAX_DENSE_DIM) -> MajoranaSet:
    """Jordan-Wigner realisation of ``n_majorana`` Majorana operators.

    Raises
    ------
    InvalidArgumentError
        If ``n_majorana`` is odd or smaller than 2.
    ResourceError
        If ``2**(n_majorana/2)`` exceeds ``max_dim``.
    """
    n_majorana = int(n_majorana)
    if n_majorana < 2 or n_majorana % 2:
        raise InvalidArgumentError(
            f"n_majorana must be an even integer >= 2, got {n_majorana}"
        )
    n_q = n_majorana // 2
    d = _check_dim(n_q, max_dim)
    basis = np.arange(d, dtype=np.int64)

    flips = np.empty(n_majorana, dtype=np.int64)
    coefs = np.empty((n_majorana, d), dtype=complex)
    for j in range(n_q):
        bit = n_q - 1 - j  # qubit j+1 lives on this bit of the basis index
        lower = ((1 << n_q) - 1) ^ ((1 << (bit + 1)) - 1)  # qubits 1..j
        z_string = 1.0 - 2.0 * (_popcount(basis & lower) & 1)
        own = (basis >> bit) & 1
        flips[2 * j] = flips[2 * j + 1] = 1 << bit
        coefs[2 * j] = _SQRT_HALF * z_string
        # Y|0> = i|1>, Y|1> = -i|0>
        coefs[2 * j + 1] = _SQRT_HALF * z_string * 1j * (1.0 - 2.0 * own)
    return MajoranaSet(n_majorana=n_majorana, flips=flips, coefs=coefs)


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.uint64)
    count = np.zeros(a.shape, dtype=np.int64)
    while np.any(a):
        count += (a & np.uint64(1)).astype(np.int64)
        a = a >> np.uint64(1)
    return count


@dataclass(frozen=True)
class SykParams:
    """Quartic SYK parameters; ``n_majorana`` is the total Majorana count (2N)."""

    n_majorana: int
    j_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_majorana) != self.n_majorana or self.n_majorana < 4 or self.n_majorana % 2:
            raise InvalidArgumentError(
                f"SYK needs an even n_majorana >= 4, got {self.n_majorana}"
            )
        if not self.j_scale > 0:
            raise InvalidArgumentError(f"j_scale must be positive, got {self.j_scale}")

    @property
    def dim(self) -> int:
        return 2 ** (self.n_majorana // 2)

    @property
    def coupling_variance(self) -> float:
        return math.factorial(3) * self.j_scale**2 / self.n_majorana**3


@dataclass(frozen=True)
class GoeParams:
    dim: int
    seed: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidArgumentError(f"GOE dimension must be >= 2, got {self.dim}")
        if not self.scale > 0:
            raise InvalidArgumentError(f"GOE scale must be positive, got {self.scale}")

    @property
    def sigma(self) -> float:
        """Off-diagonal standard deviation; the semicircle then spans ``[-2 scale, 2 scale]``."""
        return self.scale / math.sqrt(self.dim)


@dataclass(frozen=True)
class SykCouplings:
    """Independent couplings ``J_{klmn}`` for ``k<l<m<n`` (zero-based indices)."""

    n_majorana: int
    indices: np.ndarray  # (n_terms, 4), lexicographic
    values: np.ndarray  # (n_terms,)

    def __len__(self) -> int:
        return len(self.values)

    def full_tensor(self) -> np.ndarray:
        """Completely antisymmetric ``(2N)^4`` tensor built from the ordered table."""
        n = self.n_majorana
        out = np.zeros((n, n, n, n))
        for idx, val in zip(self.indices, self.values):
            for perm in itertools.permutations(range(4)):
                out[tuple(idx[list(perm)])] = _perm_sign(perm) * val
        return out


def _perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def sample_syk_couplings(params: SykParams, rng: np.random.Generator | None = None) -> SykCouplings:
    """Draw ``J_{klmn} ~ N(0, 3! J^2 / (2N)^3)``, one per ordered quadruple.

    When ``rng`` is omitted a fresh generator is seeded from ``params.seed``.
    """
    if rng is None:
        rng = make_rng(params.seed)
    indices = np.array(list(itertools.combinations(range(params.n_majorana), 4)), dtype=np.int64)
    values = rng.normal(0.0, math.sqrt(params.coupling_variance), size=len(indices))
    return SykCouplings(params.n_majorana, indices, values)


@dataclass(frozen=True)
class HamiltonianInstance:
    """A dense Hermitian matrix together with where it came from."""

    matrix: np.ndarray
    model: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def provenance(self) -> dict[str, Any]:
        return {"model": self.model, "seed": self.seed, **self.params}


def build_syk_hamiltonian(
    params: SykParams,
    couplings: SykCouplings | None = None,
    majoranas: MajoranaSet | None = None,
) -> HamiltonianInstance:
    """Quartic SYK Hamiltonian ``(1/4) sum_{k<l<m<n} J_klmn chi_k chi_l chi_m chi_n``.

    This equals the unrestricted sum over all ``(2N)^4`` index tuples with
    prefactor ``1/(4 * 4!)``: terms with repeated indices vanish and the
    ``4!`` orderings of a quadruple contribute identically because both the
    couplings and the operator products are antisymmetric.
    """
    if couplings is None:
        couplings = sample_syk_couplings(params)
    if couplings.n_majorana != params.n_majorana or len(couplings) != math.comb(params.n_majorana, 4):
        raise InvalidArgumentError("coupling table does not match n_majorana")
    if majoranas is None:
        majoranas = build_majorana_set(params.n_majorana)

    d = majoranas.dim
    cols = np.arange(d, dtype=np.int64)
    flips, coefs = majoranas.flips, majoranas.coefs
    h = np.zeros((d, d), dtype=complex)
    for (k, l, m, n), jval in zip(couplings.indices, couplings.values):
        # rightmost operator acts first: coefficient of chi_k chi_l chi_m chi_n |b>
        state = cols
        amp = coefs[n].copy()
        state = state ^ flips[n]
        amp *= coefs[m][state]
        state = state ^ flips[m]
        amp *= coefs[l][state]
        state = state ^ flips[l]
        amp *= coefs[k][state]
        state = state ^ flips[k]
        h[state, cols] += 0.25 * jval * amp

    # the sum is Hermitian term by term; symmetrise away rounding
    h = 0.5 * (h + h.conj().T)
    return HamiltonianInstance(
        matrix=h,
        model="syk",
        params={"n_majorana": params.n_majorana, "j_scale": params.j_scale},
        seed=params.seed,
    )


def syk_hamiltonian(n_majorana: int, seed: int, j_scale: float = 1.0) -> HamiltonianInstance:
    """Convenience wrapper: sample couplings from ``seed`` and build ``H``."""
    params = SykParams(n_majorana=n_majorana, j_scale=j_scale, seed=seed)
    return build_syk_hamiltonian(params, sample_syk_couplings(params))


def build_goe_hamiltonian(params: GoeParams, rng: np.random.Generator | None = None) -> HamiltonianInstance:
    """Real symmetric GOE matrix with off-diagonal variance ``sigma^2`` and diagonal ``2 sigma^2``.

    ``sigma = scale / sqrt(d)``.  A full row-major ``d x d`` standard-normal
    block ``A`` is drawn and symmetrised as ``sigma (A + A^T) / sqrt(2)``.
    """
    if rng is None:
        rng = make_rng(params.seed)
    a = np.asarray(rng.normal(size=(params.dim, params.dim)), dtype=float)
    h = params.sigma * (a + a.T) / math.sqrt(2.0)
    return HamiltonianInstance(
        matrix=h,
        model="goe",
        params={"dim": params.dim, "scale": params.scale, "sigma": params.sigma},
        seed=params.seed,
    )
