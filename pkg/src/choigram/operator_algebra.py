"""Dense complex linear algebra used by the channel and Gram-matrix code.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Everything here
is a pure function of its inputs.

Vectorization convention
------------------------
All superoperators in this package act on *column-stacked* density
matrices::

    vec(rho)[a + d*b] = rho[a, b]

so that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``. Use :func:`vec` and
:func:`unvec` instead of calling ``reshape`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_RTOL = 1e-12


class SingularMapError(ArithmeticError):
    """Raised when a matrix is too ill-conditioned to invert reliably."""

    def __init__(self, condition: float, limit: float):
        self.condition = condition
        self.limit = limit
        super().__init__(
            f"matrix condition number {condition:.3e} exceeds limit {limit:.3e}"
        )


class EigensolverError(np.linalg.LinAlgError):
    pass


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array (raises on NaN/Inf)."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    return m


@dataclass(frozen=True)
class HermitianMatrix:
    """A square matrix symmetrized to be exactly Hermitian.

    ``defect`` is ``max|A - A^dagger|`` of the input before symmetrization.
    Inputs whose defect exceeds ``1e-12 * max|A|`` are rejected.
    """

    matrix: np.ndarray = field(repr=False)
    defect: float = 0.0

    @classmethod
    def from_array(cls, a, rtol: float = HERMITICITY_RTOL) -> "HermitianMatrix":
        m = as_matrix(a)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"Hermitian matrix must be square, got {m.shape}")
        defect = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        scale = float(np.max(np.abs(m))) if m.size else 0.0
        if defect > rtol * max(scale, np.finfo(float).tiny):
            raise ValueError(
                f"matrix is not Hermitian: defect {defect:.3e} "
                f"exceeds {rtol:.1e} x max entry {scale:.3e}"
            )
        return cls(0.5 * (m + m.conj().T), defect)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape((d, d), order="F")


def dagger(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def hermitian_eigenvalues(a) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix.

    ``a`` may be a :class:`HermitianMatrix` or an array; arrays are checked
    for Hermiticity first.
    """
    h = a if isinstance(a, HermitianMatrix) else HermitianMatrix.from_array(a)
    try:
        return np.linalg.eigvalsh(h.matrix)
    except np.linalg.LinAlgError as exc:
        # LAPACK's heevd reports the failing index but not an iteration count
        raise EigensolverError(
            f"Hermitian eigensolver failed on a {h.dim}x{h.dim} matrix: {exc}"
        ) from exc


def min_eigenvalue(a) -> float:
    return float(hermitian_eigenvalues(a)[0])


def trace_norm(a) -> float:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"trace norm needs a square matrix, got {m.shape}")
    if m.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def condition_number(a) -> float:
    """2-norm condition number (``inf`` for exactly singular input)."""
    s = np.linalg.svd(as_matrix(a), compute_uv=False)
    return np.inf if s[-1] == 0 else float(s[0] / s[-1])


def invert(a, cond_limit: float = 1e12) -> np.ndarray:
    """Inverse of a square matrix, refusing ill-conditioned input.

    Raises :class:`SingularMapError` when the 2-norm condition number
    exceeds ``cond_limit``.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"cannot invert non-square matrix of shape {m.shape}")
    cond = condition_number(m)
    if not cond <= cond_limit:
        raise SingularMapError(cond, cond_limit)
    return np.linalg.inv(m)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
