"""Map-dependent characteristic functions and their Gram matrices.

For a normalized Choi operator ``Omega`` on ``H x H`` (dimension ``D = d^2``)
and a unitary operator basis ``{U_mu}``:

    chi(U_mu)   = Tr(Omega U_mu)
    G[mu, nu]   = Tr(Omega U_mu^dagger U_nu)

``G`` is positive semidefinite exactly when ``Omega`` is, hence exactly when
the channel is completely positive. With Hilbert-Schmidt orthogonal bases
(``Tr(U_mu^dagger U_nu) = D delta``) the spectrum of ``G`` is the spectrum of
``Omega`` scaled by ``D``, each eigenvalue repeated ``D`` times.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channels import (
    DEFAULT_TOL,
    ChoiOperator,
    Superoperator,
    choi_from_superop,
    is_trace_preserving,
    normalize_choi,
)
from .operator_algebra import HermitianMatrix, as_matrix, dagger, hermitian_eigenvalues

PAULIS = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ConsistencyError(RuntimeError):
    """Two independent evaluation routes disagreed (usually a convention bug)."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class UnitaryBasis:
    name: str
    space_dim: int
    elements: np.ndarray = field(repr=False)  # shape (n, D, D)
    ortho_constant: float
    labels: tuple = field(default=(), repr=False)

    def __len__(self):
        return len(self.elements)

    def overlap_matrix(self) -> np.ndarray:
        """``Tr(U_mu^dagger U_nu)`` for all pairs."""
        u = self.elements
        return np.einsum("mba,nba->mn", u.conj(), u)

    def is_orthogonal(self, tol: float = 1e-10) -> bool:
        target = self.space_dim * np.eye(len(self))
        return bool(np.max(np.abs(self.overlap_matrix() - target)) <= tol)


@lru_cache(maxsize=None)
def pauli_basis(qubit_count: int) -> UnitaryBasis:
    """All tensor products of I, X, Y, Z in lexicographic order (I<X<Y<Z)."""
    if qubit_count < 1:
        raise ValueError("qubit_count must be >= 1")
    labels, mats = [], []
    for word in itertools.product("IXYZ", repeat=qubit_count):
        m = np.eye(1, dtype=complex)
        for ch in word:
            m = np.kron(m, PAULIS[ch])
        labels.append("".join(word))
        mats.append(m)
    elements = np.array(mats)
    elements.setflags(write=False)
    return UnitaryBasis("pauli", 2**qubit_count, elements, float(2**qubit_count), tuple(labels))


@lru_cache(maxsize=None)
def weyl_basis(D: int) -> UnitaryBasis:
    """Clock-and-shift operators ``X^a Z^b`` for ``a, b in 0..D-1`` (``a`` major)."""
    if D < 2:
        raise ValueError("weyl basis needs D >= 2")
    shift = np.roll(np.eye(D, dtype=complex), 1, axis=0)  # X|k> = |k+1>
    clock = np.diag(np.exp(2j * np.pi * np.arange(D) / D))
    labels, mats = [], []
    for a in range(D):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(D):
            mats.append(xa @ np.linalg.matrix_power(clock, b))
            labels.append(f"X{a}Z{b}")
    elements = np.array(mats)
    elements.setflags(write=False)
    return UnitaryBasis("weyl", D, elements, float(D), tuple(labels))


def basis_for_channel(name: str, d: int) -> UnitaryBasis:
    """Basis on the doubled space ``H x H`` of a channel on dimension ``d``."""
    D = d * d
    if name == "pauli":
        n = D.bit_length() - 1
        if 2**n != D:
            raise ValueError(f"pauli basis needs a power-of-two dimension, got d={d}")
        return pauli_basis(n)
    if name == "weyl":
        return weyl_basis(D)
    raise ValueError(f"unknown basis {name!r} (expected 'pauli' or 'weyl')")


def _omega_matrix(omega) -> np.ndarray:
    if isinstance(omega, ChoiOperator):
        return omega.matrix
    return as_matrix(omega)


def char_function(omega, u) -> complex:
    om, u = _omega_matrix(omega), as_matrix(u)
    if om.shape != u.shape:
        raise ValueError(f"dimension mismatch: Omega {om.shape} vs U {u.shape}")
    # Tr(A B) without forming the product
    return complex(np.sum(om * u.T))


def char_function_table(omega, basis: UnitaryBasis) -> np.ndarray:
    om = _omega_matrix(omega)
    _check_basis(om, basis)
    return np.einsum("ab,mba->m", om, basis.elements)


def reconstruct_from_char_function(values, basis: UnitaryBasis) -> np.ndarray:
    """Invert the characteristic function: ``sum_mu chi(U_mu) U_mu^dagger / c``."""
    u = basis.elements
    return np.einsum("m,mba->ab", np.asarray(values), u.conj()) / basis.ortho_constant


@dataclass(frozen=True)
class GramMatrix:
    entries: HermitianMatrix = field(repr=False)
    min_eigenvalue: float
    source: ChoiOperator | None = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.entries.matrix

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eigenvalues(self.entries)


def _check_basis(om: np.ndarray, basis: UnitaryBasis):
    if om.shape != (basis.space_dim, basis.space_dim):
        raise ValueError(
            f"dimension mismatch: Omega is {om.shape[0]}x{om.shape[1]} "
            f"but the basis acts on dimension {basis.space_dim}"
        )


def gram_entries(omega, basis: UnitaryBasis) -> np.ndarray:
    om = _omega_matrix(omega)
    _check_basis(om, basis)
    u = basis.elements
    # (Omega U_mu^dagger)[a, c] = sum_b Omega[a, b] conj(U_mu[c, b])
    left = np.einsum("ab,mcb->mac", om, u.conj())
    return np.einsum("mac,nca->mn", left, u)


def gram_matrix(omega, basis: UnitaryBasis) -> GramMatrix:
    entries = HermitianMatrix.from_array(gram_entries(omega, basis))
    lam = hermitian_eigenvalues(entries)
    src = omega if isinstance(omega, ChoiOperator) else None
    return GramMatrix(entries, float(lam[0]), src)


def quadratic_form(omega, basis: UnitaryBasis, coeffs) -> float:
    """``c^dagger G c``, evaluated through G and through ``Tr(Omega X^dagger X)``.

    Raises :class:`ConsistencyError` when the two routes differ by more than
    1e-10 or the result has an imaginary part above 1e-12 (both relative to
    ``max(1, |value|)``).
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} coefficients, got shape {c.shape}")
    om = _omega_matrix(omega)
    via_gram = complex(c.conj() @ gram_entries(om, basis) @ c)
    x = np.einsum("m,mab->ab", c, basis.elements)
    via_operator = complex(np.trace(om @ dagger(x) @ x))
    scale = max(1.0, abs(via_gram))
    if abs(via_gram - via_operator) > 1e-10 * scale:
        raise ConsistencyError(
            f"quadratic form routes disagree: {via_gram} vs {via_operator}"
        )
    if abs(via_gram.imag) > 1e-12 * scale:
        raise ConsistencyError(f"quadratic form has imaginary residue {via_gram.imag:.3e}")
    return via_gram.real


@dataclass(frozen=True)
class BochnerChoiReport:
    choi_min: float
    gram_min: float
    agree: bool
    orthogonal_basis: bool
    spectral_deviation: float | None  # None when the basis is not HS-orthogonal

    def cp(self, tol: float = DEFAULT_TOL) -> bool:
        return self.gram_min >= -tol


def spectral_deviation(omega, gram: GramMatrix, basis: UnitaryBasis) -> float:
    """Max deviation between spec(G) and ``D * spec(Omega)`` repeated ``D`` times."""
    om = HermitianMatrix.from_array(_omega_matrix(omega))
    D = basis.space_dim
    expected = np.repeat(D * hermitian_eigenvalues(om), D)
    return float(np.max(np.abs(np.sort(expected) - gram.eigenvalues())))


def bochner_choi_check(
    phi: Superoperator, basis: UnitaryBasis, tol: float = DEFAULT_TOL
) -> BochnerChoiReport:
    """Compare the CP verdicts of the Choi operator and the Gram matrix.

    ``choi_min`` is the smallest eigenvalue of the normalized Choi operator.
    """
    if not is_trace_preserving(phi, tol):
        raise PreconditionError(
            "the Bochner-Choi equivalence is stated for trace-preserving maps; "
            "input map is not trace-preserving"
        )
    omega = normalize_choi(choi_from_superop(phi))
    choi_min = float(omega.eigenvalues()[0])
    gram = gram_matrix(omega, basis)
    orthogonal = basis.is_orthogonal()
    dev = spectral_deviation(omega, gram, basis) if orthogonal else None
    agree = (choi_min >= -tol) == (gram.min_eigenvalue >= -tol)
    return BochnerChoiReport(choi_min, gram.min_eigenvalue, agree, orthogonal, dev)
