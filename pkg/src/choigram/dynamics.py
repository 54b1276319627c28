"""Time-local qubit models with a signed decay rate.

Two generators are supported, both scaled by the rate

    gamma(t) = gamma0 + a * exp(-t) * cos(omega * t)

* amplitude damping:  gamma(t) (s- rho s+ - {s+ s-, rho}/2)
* pure dephasing:     gamma(t) (Z rho Z - rho)

with ``|1>`` the excited state and ``s- = |0><1|``. Writing
``Gamma(t) = int_0^t gamma``, the excited population survives with
``eta(t) = exp(-Gamma(t))`` under damping, and dephasing multiplies the
coherence by ``q(t) = exp(-2 Gamma(t)) = eta(t)^2``. Intermediate maps
``Phi(t, s) = Phi(t, 0) Phi(s, 0)^-1`` stay completely positive exactly while
``Gamma(t) - Gamma(s) >= 0``.
"""

from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    DEFAULT_TOL,
    KrausChannel,
    Superoperator,
    choi_from_superop,
    compose,
    normalize_choi,
)
from .charfunc import ConsistencyError, UnitaryBasis, gram_matrix
from .operator_algebra import (
    SingularMapError,
    condition_number,
    hermitian_eigenvalues,
    invert,
    trace_norm,
    unvec,
    vec,
)

QUAD_TOL = 1e-10
UNDERFLOW = 1e-12
COND_LIMIT = 1e12
ORACLE_TOL = 1e-8

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


class ModelKind(str, enum.Enum):
    AMPLITUDE_DAMPING = "amplitude_damping"
    PURE_DEPHASING = "pure_dephasing"


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RateProfile:
    """Decay-rate profile. Tabulated profiles interpolate linearly."""

    gamma0: float = 0.2
    a: float = 1.5
    omega: float = 4.0
    times: tuple | None = None
    values: tuple | None = None

    def __post_init__(self):
        if self.times is None:
            if not all(math.isfinite(x) for x in (self.gamma0, self.a, self.omega)):
                raise ValueError("rate parameters must be finite")
            return
        ts = np.asarray(self.times, dtype=float)
        vs = np.asarray(self.values, dtype=float)
        if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
            raise ValueError("tabulated profile needs matching 1-D times/values (>= 2 points)")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        object.__setattr__(self, "times", tuple(ts))
        object.__setattr__(self, "values", tuple(vs))

    @classmethod
    def tabulated(cls, times, values) -> "RateProfile":
        return cls(float("nan"), float("nan"), float("nan"), tuple(times), tuple(values))

    @property
    def is_tabulated(self) -> bool:
        return self.times is not None


def gamma(t, p: RateProfile):
    if p.is_tabulated:
        t_arr = np.asarray(t, dtype=float)
        lo, hi = p.times[0], p.times[-1]
        if np.any(t_arr < lo) or np.any(t_arr > hi):
            raise ValueError(f"t outside tabulated range [{lo}, {hi}]")
        out = np.interp(t_arr, p.times, p.values)
        return float(out) if out.ndim == 0 else out
    if np.any(np.asarray(t) < 0):
        raise ValueError("rate is defined for t >= 0")
    return p.gamma0 + p.a * np.exp(-np.asarray(t, dtype=float)) * np.cos(p.omega * np.asarray(t))


def _scalar_rate(p: RateProfile):
    g0, a, w = p.gamma0, p.a, p.omega
    exp, cos = math.exp, math.cos
    return lambda x: g0 + a * exp(-x) * cos(w * x)


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with absolute tolerance ``tol``."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) * (flo + 4 * flm + fmid) / 6
        right = (hi - mid) * (fmid + 4 * frm + fhi) / 6
        delta = left + right - est
        if abs(delta) <= 15 * eps:
            total += left + right + delta / 15
        elif depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson did not converge on [{lo}, {hi}] after {depth} bisections"
            )
        else:
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    return total


def integrated_rate(t: float, p: RateProfile, s: float = 0.0, quad_tol: float = QUAD_TOL) -> float:
    """``int_s^t gamma``."""
    if p.is_tabulated:
        gamma(np.array([s, t]), p)  # range check
        lo, hi = min(s, t), max(s, t)
        ts = np.asarray(p.times)
        inner = ts[(ts > lo) & (ts < hi)]
        nodes = np.concatenate(([lo], inner, [hi]))
        # piecewise linear integrand, so the trapezoid rule is exact
        vals = np.interp(nodes, p.times, p.values)
        val = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(nodes)))
        return val if t >= s else -val
    if s < 0 or t < 0:
        raise ValueError("rate is defined for t >= 0")
    return adaptive_simpson(_scalar_rate(p), s, t, quad_tol)


def survival(t: float, p: RateProfile, quad_tol: float = QUAD_TOL) -> float:
    return math.exp(-integrated_rate(t, p, 0.0, quad_tol))


def coherence_factor(t: float, p: RateProfile, quad_tol: float = QUAD_TOL) -> float:
    return math.exp(-2 * integrated_rate(t, p, 0.0, quad_tol))


def cumulative_rate(times, p: RateProfile, quad_tol: float = QUAD_TOL) -> np.ndarray:
    """``int_{times[0]}^{t_k} gamma`` for every grid time, segment by segment."""
    ts = np.asarray(times, dtype=float)
    segs = [integrated_rate(b, p, a, quad_tol) for a, b in zip(ts[:-1], ts[1:])]
    return np.concatenate(([0.0], np.cumsum(segs)))


def intermediate_ratio(t: float, s: float, p: RateProfile, quad_tol: float = QUAD_TOL) -> float:
    """``eta(t) / eta(s)``; above one exactly when the rate integrates negative on [s, t]."""
    if not t >= s >= 0:
        raise ValueError(f"need t >= s >= 0, got t={t}, s={s}")
    eta_s = survival(s, p, quad_tol)
    if eta_s < UNDERFLOW:
        raise SingularMapError(1 / max(eta_s, np.finfo(float).tiny), 1 / UNDERFLOW)
    return survival(t, p, quad_tol) / eta_s


# -- maps ------------------------------------------------------------------


def ad_kraus(eta: float) -> KrausChannel:
    if not 0 <= eta <= 1:
        raise ValueError(f"amplitude-damping Kraus form needs 0 <= eta <= 1, got {eta}")
    k0 = np.diag([1.0, math.sqrt(eta)]).astype(complex)
    k1 = math.sqrt(1 - eta) * SIGMA_MINUS
    return KrausChannel.from_ops([k0, k1])


def ad_map(eta: float) -> Superoperator:
    """Amplitude damping with excited-state survival ``eta``.

    Built directly as a superoperator so that ``eta > 1`` (intermediate maps
    that are not CP) is representable. Column-stacked index of ``rho[a, b]``
    is ``a + 2 b``.
    """
    if eta < 0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1.0
    m[0, 3] = 1.0 - eta
    m[1, 1] = m[2, 2] = math.sqrt(eta)
    m[3, 3] = eta
    return Superoperator(2, m)


def dephasing_map(lam: float) -> Superoperator:
    """Keep populations, scale coherences by ``lam``."""
    return Superoperator(2, np.diag([1.0, lam, lam, 1.0]).astype(complex))


def generator(model: ModelKind) -> np.ndarray:
    """Superoperator of the dissipator at unit rate."""
    model = ModelKind(model)
    eye = np.eye(2, dtype=complex)
    if model is ModelKind.AMPLITUDE_DAMPING:
        c = SIGMA_MINUS
        cdc = c.conj().T @ c
        return np.kron(c.conj(), c) - 0.5 * (np.kron(eye, cdc) + np.kron(cdc.T, eye))
    return np.kron(SIGMA_Z.conj(), SIGMA_Z) - np.eye(4)


def _map_from_rate_integral(model: ModelKind, big_gamma: float) -> Superoperator:
    if model is ModelKind.AMPLITUDE_DAMPING:
        return ad_map(math.exp(-big_gamma))
    return dephasing_map(math.exp(-2 * big_gamma))


def _decay_factor(model: ModelKind, big_gamma: float) -> float:
    return math.exp(-big_gamma) if model is ModelKind.AMPLITUDE_DAMPING else math.exp(-2 * big_gamma)


def dynamical_map(model: ModelKind, t: float, p: RateProfile, quad_tol: float = QUAD_TOL) -> Superoperator:
    """``Phi(t, 0)`` from the closed-form solution."""
    return _map_from_rate_integral(ModelKind(model), integrated_rate(t, p, 0.0, quad_tol))


def propagate_map(model: ModelKind, p: RateProfile, t: float, step: float = 1e-3) -> Superoperator:
    """``Phi(t, 0)`` by RK4 integration of ``dPhi/dt = gamma(t) L Phi``."""
    lmat = generator(model)
    phi = np.eye(4, dtype=complex)
    n = max(1, math.ceil(t / step - 1e-9))
    h = t / n
    for k in range(n):
        phi = _rk4_step(lmat, p, k * h, h, phi)
    return Superoperator(2, phi)


@dataclass(frozen=True)
class IntermediateMap:
    superop: Superoperator
    closed_form: Superoperator
    ratio: float  # eta(t)/eta(s) for damping, q(t)/q(s) for dephasing


def intermediate_from_rates(
    model: ModelKind, gamma_t: float, gamma_s: float,
    cond_limit: float = COND_LIMIT, oracle_tol: float = ORACLE_TOL,
) -> IntermediateMap:
    """Intermediate map given the integrated rates up to ``t`` and ``s``."""
    factor_s = _decay_factor(model, gamma_s)
    if factor_s < UNDERFLOW:
        raise SingularMapError(1 / max(factor_s, np.finfo(float).tiny), 1 / UNDERFLOW)
    phi_t = _map_from_rate_integral(model, gamma_t)
    phi_s = _map_from_rate_integral(model, gamma_s)
    general = compose(phi_t, Superoperator(2, invert(phi_s.matrix, cond_limit)))
    ratio = _decay_factor(model, gamma_t) / factor_s
    closed = ad_map(ratio) if model is ModelKind.AMPLITUDE_DAMPING else dephasing_map(ratio)
    err = float(np.max(np.abs(general.matrix - closed.matrix)))
    # inversion round-off grows with the conditioning of Phi(s, 0)
    allowed = max(oracle_tol, 64 * np.finfo(float).eps * condition_number(phi_s.matrix) * max(1.0, ratio))
    if err > allowed:
        raise ConsistencyError(
            f"intermediate map: inversion and closed form differ by {err:.3e}"
        )
    return IntermediateMap(general, closed, ratio)


def intermediate_map(
    t: float,
    s: float,
    model: ModelKind,
    p: RateProfile,
    cond_limit: float = COND_LIMIT,
    quad_tol: float = QUAD_TOL,
) -> Superoperator:
    """``Phi(t, s) = Phi(t, 0) Phi(s, 0)^-1`` via explicit inversion.

    The result is cross-checked against the closed form (amplitude damping
    with survival ``eta(t)/eta(s)``, or dephasing with ``q(t)/q(s)``).
    """
    if not t >= s >= 0:
        raise ValueError(f"need t >= s >= 0, got t={t}, s={s}")
    model = ModelKind(model)
    g_s = integrated_rate(s, p, 0.0, quad_tol)
    g_t = g_s + integrated_rate(t, p, s, quad_tol)
    return intermediate_from_rates(model, g_t, g_s, cond_limit).superop


# -- divisibility scan -----------------------------------------------------


@dataclass(frozen=True)
class ScanGrid:
    t_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("a scan grid needs at least 2 points")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")

    @property
    def step(self) -> float:
        return self.t_max / (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.step

    def pairs(self):
        """Index pairs ``(i, j)`` with ``t_i >= t_j``, row-major."""
        for i in range(self.n_points):
            for j in range(i + 1):
                yield i, j


@dataclass(frozen=True)
class PairRecord:
    i: int
    j: int
    t: float
    s: float
    r: float
    choi_min: float
    gram_min: float
    flag: str = ""


@dataclass
class DivisibilityReport:
    model: ModelKind
    records: list
    tol: float = DEFAULT_TOL

    @property
    def violating_pairs(self) -> list:
        return [rec for rec in self.records if not rec.flag and rec.gram_min < -self.tol]

    @property
    def flagged(self) -> list:
        return [rec for rec in self.records if rec.flag]


def _scan_row(i, model, times, big_gamma, basis, cond_limit):
    out = []
    for j in range(i + 1):
        t, s = float(times[i]), float(times[j])
        try:
            im = intermediate_from_rates(model, big_gamma[i], big_gamma[j], cond_limit)
        except SingularMapError:
            out.append(PairRecord(i, j, t, s, math.nan, math.nan, math.nan, "singular_map"))
            continue
        omega = normalize_choi(choi_from_superop(im.superop))
        choi_min = float(omega.eigenvalues()[0])
        gram_min = gram_matrix(omega, basis).min_eigenvalue
        out.append(PairRecord(i, j, t, s, im.ratio, choi_min, gram_min))
    return out


def scan_threads() -> int:
    """Worker cap from ``CHOIGRAM_THREADS`` (0 or unset means sequential)."""
    raw = os.environ.get("CHOIGRAM_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("CHOIGRAM_THREADS must be >= 0")
    return n


def cp_divisibility_scan(
    model: ModelKind,
    p: RateProfile,
    grid: ScanGrid,
    basis: UnitaryBasis,
    tol: float = DEFAULT_TOL,
    threads: int | None = None,
    cond_limit: float = COND_LIMIT,
    quad_tol: float = QUAD_TOL,
) -> DivisibilityReport:
    """Choi and Gram minimum eigenvalues of every intermediate map on the grid.

    Records are ordered by ``(i, j)`` whatever the number of worker threads.
    """
    model = ModelKind(model)
    times = grid.times
    big_gamma = cumulative_rate(times, p, quad_tol)
    if threads is None:
        threads = scan_threads()
    rows = range(grid.n_points)
    args = (model, times, big_gamma, basis, cond_limit)
    if threads <= 1:
        chunks = [_scan_row(i, *args) for i in rows]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda i: _scan_row(i, *args), rows))
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda rec: (rec.i, rec.j))
    return DivisibilityReport(model, records, tol)


# -- trajectories ----------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 2, 2)
    step: float
    warnings: list = field(default_factory=list)


def _rk4_step(lmat, p, t, h, y):
    g = (lambda x: float(gamma(x, p))) if p.is_tabulated else _scalar_rate(p)
    k1 = g(t) * (lmat @ y)
    k2 = g(t + h / 2) * (lmat @ (y + h / 2 * k1))
    k3 = g(t + h / 2) * (lmat @ (y + h / 2 * k2))
    k4 = g(t + h) * (lmat @ (y + h * k3))
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_density(rho, name="rho0"):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"{name} must be a 2x2 density matrix")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValueError(f"{name} must have unit trace")
    if hermitian_eigenvalues(rho)[0] < -1e-10:
        raise ValueError(f"{name} must be positive semidefinite")
    return rho


def integrate_master_equation(
    model: ModelKind, p: RateProfile, rho0, times, step: float = 1e-3
) -> Trajectory:
    """Classical RK4 on ``vec(rho)`` with the time-dependent generator.

    Each interval between output times is split into equal substeps no
    longer than ``step``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    rho0 = _check_density(rho0)
    ts = np.asarray(times, dtype=float)
    if np.any(np.diff(ts) < 0):
        raise ValueError("output times must be non-decreasing")
    lmat = generator(model)
    y = vec(rho0)
    states = [rho0.copy()]
    notes = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        n = max(1, math.ceil((t1 - t0) / step - 1e-9)) if t1 > t0 else 0
        h = (t1 - t0) / n if n else 0.0
        for k in range(n):
            y = _rk4_step(lmat, p, t0 + k * h, h, y)
        rho = unvec(y, 2)
        lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        if lam < -1e-6:
            notes.append(f"state at t={t1:.6g} has eigenvalue {lam:.3e}")
        states.append(rho.copy())
    if notes:
        warnings.warn(f"integration quality: {len(notes)} non-positive states", RuntimeWarning)
    return Trajectory(ts, np.array(states), step, notes)


def trace_distance_trajectory(
    model: ModelKind, p: RateProfile, rho1, rho2, times, step: float = 1e-3
) -> np.ndarray:
    a = integrate_master_equation(model, p, rho1, times, step)
    b = integrate_master_equation(model, p, rho2, times, step)
    return np.array([0.5 * trace_norm(x - y) for x, y in zip(a.states, b.states)])


@dataclass(frozen=True)
class Backflow:
    intervals: list  # [(t_start, t_end), ...]
    measure: float


def backflow_intervals(d_values, times, slope_tol: float = 0.0) -> Backflow:
    """Maximal runs where the finite-difference slope of D exceeds ``slope_tol``.

    The measure adds up the increase of D over each run.
    """
    dv = np.asarray(d_values, dtype=float)
    ts = np.asarray(times, dtype=float)
    if dv.shape != ts.shape or dv.size < 2:
        raise ValueError("need aligned D and time arrays with at least 2 points")
    rising = np.diff(dv) / np.diff(ts) > slope_tol
    intervals, measure = [], 0.0
    k = 0
    while k < rising.size:
        if not rising[k]:
            k += 1
            continue
        start = k
        while k < rising.size and rising[k]:
            k += 1
        intervals.append((float(ts[start]), float(ts[k])))
        measure += float(dv[k] - dv[start])
    return Backflow(intervals, measure)


def negative_rate_intervals(p: RateProfile, times, refine: int = 60) -> list:
    """Intervals inside ``[times[0], times[-1]]`` where the rate is negative.

    Sign changes are located on ``times`` and refined by bisection.
    """
    ts = np.asarray(times, dtype=float)
    g = np.asarray(gamma(ts, p), dtype=float)

    def root(lo, hi):
        glo = float(gamma(lo, p))
        for _ in range(refine):
            mid = 0.5 * (lo + hi)
            if (float(gamma(mid, p)) < 0) == (glo < 0):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    intervals, start = [], (float(ts[0]) if g[0] < 0 else None)
    for k in range(1, ts.size):
        if g[k - 1] >= 0 and g[k] < 0:
            start = root(ts[k - 1], ts[k])
        elif g[k - 1] < 0 and g[k] >= 0:
            intervals.append((start, root(ts[k - 1], ts[k])))
            start = None
    if start is not None:
        intervals.append((start, float(ts[-1])))
    return intervals
