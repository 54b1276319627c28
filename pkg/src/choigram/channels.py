"""Channel representations: Kraus operators, superoperators and Choi operators.

Superoperators use the column-stacking convention documented in
:mod:`choigram.operator_algebra`. The Choi operator is built from the
normalized maximally entangled state,

    J(Phi) = (Phi x id)(|Omega><Omega|),   |Omega> = sum_i |i>|i> / sqrt(d),

so ``trace(J) == 1`` for a trace-preserving map and the normalized operator
``Omega_Phi = J / d`` has trace ``1/d``. Both are exposed; every positivity
verdict is independent of that overall scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .operator_algebra import (
    HermitianMatrix,
    as_matrix,
    dagger,
    hermitian_eigenvalues,
    unvec,
    vec,
)

DEFAULT_TOL = 1e-10
CONVENTION = "column-stacking"


@dataclass(frozen=True)
class KrausChannel:
    dim: int
    kraus_ops: tuple = field(repr=False)
    trace_preserving: bool = True

    @classmethod
    def from_ops(cls, ops: Sequence, tol: float = DEFAULT_TOL) -> "KrausChannel":
        mats = tuple(as_matrix(k) for k in ops)
        if not mats:
            raise ValueError("a Kraus channel needs at least one operator")
        d = mats[0].shape[0]
        for k in mats:
            if k.shape != (d, d):
                raise ValueError(f"Kraus operators must all be {d}x{d}, got {k.shape}")
        completeness = sum(dagger(k) @ k for k in mats)
        tp = bool(np.max(np.abs(completeness - np.eye(d))) <= tol)
        if not tp:
            # trace-non-increasing is allowed, anything larger is not a channel
            if np.linalg.eigvalsh(0.5 * (completeness + dagger(completeness)))[-1] > 1 + tol:
                raise ValueError("Kraus operators are trace-increasing (sum K^dag K > I)")
        return cls(d, mats, tp)

    def apply(self, rho) -> np.ndarray:
        rho = as_matrix(rho)
        return sum(k @ rho @ dagger(k) for k in self.kraus_ops)


@dataclass(frozen=True)
class Superoperator:
    """Matrix of a linear map on d x d operators, acting on ``vec(rho)``."""

    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape != (self.dim**2, self.dim**2):
            raise ValueError(
                f"superoperator for d={self.dim} must be {self.dim**2}x{self.dim**2}, "
                f"got {m.shape}"
            )
        object.__setattr__(self, "matrix", m)

    def apply(self, rho) -> np.ndarray:
        return unvec(self.matrix @ vec(as_matrix(rho)), self.dim)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return compose(self, other)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        _check_dims(self, other)
        return Superoperator(self.dim, self.matrix + other.matrix)

    def __mul__(self, scalar) -> "Superoperator":
        return Superoperator(self.dim, scalar * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True)
class ChoiOperator:
    """Choi matrix of a map on dimension ``dim``.

    ``normalized`` is True for ``Omega_Phi = J / d``. The matrix is only
    guaranteed Hermitian for Hermiticity-preserving maps; use
    :meth:`hermitian` before taking eigenvalues.
    """

    dim: int
    matrix: np.ndarray = field(repr=False)
    normalized: bool = False

    def hermitian(self) -> HermitianMatrix:
        return HermitianMatrix.from_array(self.matrix)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eigenvalues(self.hermitian())


@dataclass(frozen=True)
class CPVerdict:
    cp: bool
    min_eigenvalue: float


def _check_dims(a, b):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def max_entangled_state(d: int) -> np.ndarray:
    if d < 2:
        raise ValueError(f"invalid dimension {d}: need d >= 2")
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = 1 / np.sqrt(d)
    return psi


def choi_from_superop(s: Superoperator) -> ChoiOperator:
    """Unnormalized Choi operator ``J = (1/d) sum_ij Phi(|i><j|) x |i><j|``."""
    d = s.dim
    # S[a + d*b, i + d*j] = Phi(E_ij)[a, b]; reshape gives axes (b, a, j, i)
    j4 = s.matrix.reshape(d, d, d, d).transpose(1, 3, 0, 2)
    return ChoiOperator(d, j4.reshape(d * d, d * d) / d, normalized=False)


def normalize_choi(j: ChoiOperator) -> ChoiOperator:
    if j.normalized:
        raise ValueError("Choi operator is already normalized")
    return ChoiOperator(j.dim, j.matrix / j.dim, normalized=True)


def superop_from_choi(j: ChoiOperator) -> Superoperator:
    d = j.dim
    m = j.matrix * d * (d if j.normalized else 1)
    s4 = m.reshape(d, d, d, d).transpose(2, 0, 3, 1)
    return Superoperator(d, s4.reshape(d * d, d * d))


def kraus_to_superop(k: KrausChannel) -> Superoperator:
    # column stacking: vec(K rho K^dag) = (conj(K) x K) vec(rho)
    m = sum(np.kron(op.conj(), op) for op in k.kraus_ops)
    return Superoperator(k.dim, m)


def superop_from_action(fn, d: int) -> Superoperator:
    """Tabulate a linear map given as a Python callable on d x d matrices."""
    cols = []
    for idx in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[idx] = 1
        cols.append(vec(as_matrix(fn(unvec(e, d)))))
    return Superoperator(d, np.column_stack(cols))


def is_completely_positive(j: ChoiOperator, tol: float = DEFAULT_TOL) -> CPVerdict:
    lam = float(j.eigenvalues()[0])
    return CPVerdict(lam >= -tol, lam)


def partial_trace_output(j: ChoiOperator) -> np.ndarray:
    """Trace over the first (output) factor of the Choi matrix."""
    d = j.dim
    return np.einsum("aiaj->ij", j.matrix.reshape(d, d, d, d))


def is_trace_preserving(s: Superoperator, tol: float = DEFAULT_TOL) -> bool:
    j = choi_from_superop(s)
    return bool(np.max(np.abs(partial_trace_output(j) - np.eye(s.dim) / s.dim)) <= tol)


def compose(a: Superoperator, b: Superoperator) -> Superoperator:
    """The map ``a o b`` (apply ``b`` first)."""
    _check_dims(a, b)
    return Superoperator(a.dim, a.matrix @ b.matrix)


def identity_channel(d: int) -> Superoperator:
    return Superoperator(d, np.eye(d * d, dtype=complex))


def unitary_channel(u) -> Superoperator:
    u = as_matrix(u)
    return Superoperator(u.shape[0], np.kron(u.conj(), u))


def transpose_map(d: int) -> Superoperator:
    return superop_from_action(lambda x: x.T, d)


def depolarizing_map(d: int, p: float = 1.0) -> Superoperator:
    """``rho -> (1-p) rho + p tr(rho) I/d``; p=1 is the completely depolarizing map."""
    return superop_from_action(lambda x: (1 - p) * x + p * np.trace(x) * np.eye(d) / d, d)


def random_cp_channel(d: int, rank: int, seed: int) -> KrausChannel:
    """Random CPTP channel with ``rank`` Kraus operators.

    Complex Gaussian Kraus stack whitened by ``(sum K^dag K)^(-1/2)``.
    """
    if not 1 <= rank <= d * d:
        raise ValueError(f"rank must lie in [1, {d * d}], got {rank}")
    rng = np.random.default_rng(seed)
    ops = rng.standard_normal((rank, d, d)) + 1j * rng.standard_normal((rank, d, d))
    m = np.einsum("kba,kbc->ac", ops.conj(), ops)
    w, v = np.linalg.eigh(m)
    inv_sqrt = (v / np.sqrt(w)) @ dagger(v)
    return KrausChannel.from_ops([k @ inv_sqrt for k in ops])


# -- serialization ---------------------------------------------------------


def _encode(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _decode(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim != 3 or a.shape[-1] != 2:
        raise ValueError("matrix entries must be rows of [re, im] pairs")
    return as_matrix(a[..., 0] + 1j * a[..., 1])


def channel_to_dict(ch) -> dict:
    if isinstance(ch, KrausChannel):
        rep, entries = "kraus", [_encode(k) for k in ch.kraus_ops]
    elif isinstance(ch, Superoperator):
        rep, entries = "superop", _encode(ch.matrix)
    elif isinstance(ch, ChoiOperator):
        mat = ch.matrix * ch.dim if ch.normalized else ch.matrix
        rep, entries = "choi", _encode(mat)
    else:
        raise TypeError(f"cannot serialize {type(ch).__name__}")
    return {"dim": ch.dim, "representation": rep, "convention": CONVENTION, "entries": entries}


def channel_from_dict(data: dict):
    """Inverse of :func:`channel_to_dict`. Choi entries are the unnormalized J."""
    try:
        d = int(data["dim"])
        rep = data["representation"]
        entries = data["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed channel description: {exc!r}") from exc
    conv = data.get("convention", CONVENTION)
    if conv != CONVENTION:
        raise ValueError(f"unsupported vectorization convention {conv!r}")
    if rep == "kraus":
        ops = [_decode(k) for k in entries]
        if any(k.shape != (d, d) for k in ops):
            raise ValueError(f"Kraus operators do not match dim={d}")
        return KrausChannel.from_ops(ops)
    m = _decode(entries)
    if m.shape != (d * d, d * d):
        raise ValueError(f"{rep} matrix must be {d * d}x{d * d}, got {m.shape}")
    if rep == "superop":
        return Superoperator(d, m)
    if rep == "choi":
        return ChoiOperator(d, m, normalized=False)
    raise ValueError(f"unknown representation {rep!r}")


def to_superop(ch) -> Superoperator:
    if isinstance(ch, Superoperator):
        return ch
    if isinstance(ch, KrausChannel):
        return kraus_to_superop(ch)
    if isinstance(ch, ChoiOperator):
        return superop_from_choi(ch)
    raise TypeError(f"cannot convert {type(ch).__name__} to a superoperator")
