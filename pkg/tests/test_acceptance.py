"""Exit criteria for the package, one test per criterion."""

import time

import numpy as np

from choigram import channels as ch
from choigram import dynamics as dyn
from choigram.charfunc import bochner_choi_check, gram_matrix, pauli_basis
from choigram.cli import main
from choigram.dynamics import ModelKind, RateProfile, ScanGrid
from oracles import bisect_root, eta_closed_form

TOL = 1e-10
DEFAULT = RateProfile(gamma0=0.2, a=1.5, omega=4.0)
GRID = ScanGrid(6.0, 121)
AD, DP = ModelKind.AMPLITUDE_DAMPING, ModelKind.PURE_DEPHASING
EXCITED, GROUND = np.diag([0.0, 1.0]), np.diag([1.0, 0.0])


def random_cptp(seed):
    rank = [1, 2, 2, 4][seed % 4]
    return ch.kraus_to_superop(ch.random_cp_channel(2, rank, seed))


def test_theorem1_equivalence(criterion):
    rng = np.random.default_rng(2024)
    basis = pauli_basis(2)
    transpose = ch.transpose_map(2)
    start = time.perf_counter()
    disagreements, non_cp = 0, 0
    for k in range(1000):
        if k < 500:
            phi = random_cptp(k)
        else:
            lam = rng.uniform(0, 0.6)
            phi = (1 - lam) * random_cptp(k) + lam * (transpose @ random_cptp(k + 10_000))
        rep = bochner_choi_check(phi, basis, TOL)
        gram_ok = rep.gram_min >= -TOL
        choi_ok = rep.choi_min >= -TOL
        disagreements += gram_ok != choi_ok
        non_cp += not choi_ok
    elapsed = time.perf_counter() - start
    criterion(
        "1 Theorem-1 equivalence",
        disagreements == 0 and elapsed < 10,
        f"{disagreements} disagreements over 1000 maps ({non_cp} not CP), {elapsed:.2f}s",
    )


def test_spectral_correspondence(criterion):
    rng = np.random.default_rng(7)
    basis = pauli_basis(2)
    worst = 0.0
    for k in range(100):
        phi = random_cptp(5000 + k)
        if k % 2:
            lam = rng.uniform(0, 1)
            phi = (1 - lam) * phi + lam * ch.transpose_map(2)
        omega = ch.normalize_choi(ch.choi_from_superop(phi))
        expected = np.sort(np.repeat(4 * np.linalg.eigvalsh(omega.matrix), 4))
        got = gram_matrix(omega, basis).eigenvalues()
        worst = max(worst, float(np.max(np.abs(got - expected))))
    criterion("2 spectral correspondence", worst <= 1e-10, f"max deviation {worst:.2e}")


def test_transpose_mixture_boundary(criterion):
    dep, tr = ch.depolarizing_map(2), ch.transpose_map(2)

    def choi_min(lam):
        return ch.choi_from_superop((1 - lam) * dep + lam * tr).eigenvalues()[0]

    crossing = bisect_root(choi_min, 0.0, 1.0)
    err = abs(crossing - 1 / 3)
    criterion("3 CP boundary at 1/3", err <= 1e-8, f"crossing {crossing:.15f}, |err| {err:.1e}")


def test_amplitude_damping_scan(criterion):
    start = time.perf_counter()
    rep = dyn.cp_divisibility_scan(AD, DEFAULT, GRID, pauli_basis(2), TOL, threads=0)
    elapsed = time.perf_counter() - start
    # independent ratio: survivals integrated from zero at each grid time
    eta = [dyn.survival(t, DEFAULT) for t in GRID.times]
    expected = {(i, j) for i, j in GRID.pairs() if eta[i] / eta[j] > 1 + TOL}
    got = {(r.i, r.j) for r in rep.violating_pairs}
    ok = got == expected and not rep.flagged and elapsed < 30
    criterion(
        "4 AD scan violations == r>1",
        ok,
        f"{len(got)} violating of {len(rep.records)} pairs, "
        f"{len(got ^ expected)} mismatches, {elapsed:.2f}s",
    )


def test_trace_distance_equals_survival(criterion):
    d = dyn.trace_distance_trajectory(AD, DEFAULT, EXCITED, GROUND, GRID.times, step=1e-3)
    eta = np.array([dyn.survival(t, DEFAULT) for t in GRID.times])
    dev = float(np.max(np.abs(d - eta)))
    criterion("5 D(t) == eta(t)", dev <= 1e-6, f"max deviation {dev:.2e}")


def test_backflow_matches_negative_rate(criterion):
    d = dyn.trace_distance_trajectory(AD, DEFAULT, EXCITED, GROUND, GRID.times, step=1e-3)
    flow = dyn.backflow_intervals(d, GRID.times)
    # brute-force sign of the rate on a fine grid
    fine = np.linspace(0, GRID.t_max, 1_200_001)
    neg = dyn.gamma(fine, DEFAULT) < 0
    edges = np.flatnonzero(np.diff(neg.astype(int)))
    bounds = [float(x) for x in fine[edges + 1]]
    if neg[0]:
        bounds.insert(0, 0.0)
    if len(bounds) % 2:
        bounds.append(GRID.t_max)
    rate_intervals = list(zip(bounds[::2], bounds[1::2]))
    ok = len(rate_intervals) == len(flow.intervals) > 0 and all(
        abs(a - c) <= GRID.step and abs(b - e) <= GRID.step
        for (a, b), (c, e) in zip(flow.intervals, rate_intervals)
    )
    criterion(
        "6 backflow aligned with gamma<0",
        ok,
        f"backflow {[(round(a, 3), round(b, 3)) for a, b in flow.intervals]} vs "
        f"gamma<0 {[(round(a, 3), round(b, 3)) for a, b in rate_intervals]}",
    )


def test_intermediate_map_oracle(criterion):
    ts = np.linspace(0, 6, 50)
    worst, skipped, checked = 0.0, 0, 0
    for model in (AD, DP):
        for t in ts:
            for s in ts[ts <= t]:
                try:
                    general = dyn.intermediate_map(t, s, model, DEFAULT).matrix
                except dyn.SingularMapError:
                    skipped += 1
                    continue
                ratio = dyn.survival(t, DEFAULT) / dyn.survival(s, DEFAULT)
                closed = dyn.ad_map(ratio) if model is AD else dyn.dephasing_map(ratio**2)
                worst = max(worst, float(np.max(np.abs(general - closed.matrix))))
                checked += 1
    criterion(
        "7 inversion vs closed form",
        worst <= 1e-8,
        f"max entry deviation {worst:.2e} over {checked} pairs ({skipped} singular)",
    )


def _rk4_errors(h):
    ts = np.linspace(0, 6, 13)
    eta = np.array([eta_closed_form(t) for t in ts])
    ad = dyn.integrate_master_equation(AD, DEFAULT, EXCITED, ts, h)
    dp = dyn.integrate_master_equation(DP, DEFAULT, np.full((2, 2), 0.5), ts, h)
    err_ad = float(np.max(np.abs(ad.states[:, 1, 1] - eta)))
    err_dp = float(np.max(np.abs(dp.states[:, 0, 1] - eta**2 / 2)))
    return err_ad, err_dp


def test_rk4_order(criterion):
    coarse, fine = _rk4_errors(0.01), _rk4_errors(0.005)
    ratios = [c / f for c, f in zip(coarse, fine)]
    criterion(
        "8 RK4 fourth order",
        all(12 <= r <= 20 for r in ratios),
        f"error ratios h/(h/2): damping {ratios[0]:.2f}, dephasing {ratios[1]:.2f}",
    )


def test_scan_determinism(criterion, tmp_path, monkeypatch):
    outputs = []
    for threads in ("1", "8", "1", "8"):
        monkeypatch.setenv("CHOIGRAM_THREADS", threads)
        out = tmp_path / f"scan_{threads}_{len(outputs)}.csv"
        code = main(["scan", "--output", str(out)])
        assert code == 0
        outputs.append(out.read_bytes())
    same = all(o == outputs[0] for o in outputs)
    criterion("9 scan determinism", same, f"{len(outputs)} runs, {len(outputs[0])} bytes each")
