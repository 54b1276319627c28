"""Command-line driver.

    choigram channel-check chan.json [--basis pauli|weyl] [--tol 1e-10]
    choigram make-channel transpose --dim 2 --output chan.json
    choigram scan --config run.toml --output scan.csv
    choigram figures --config run.toml --output figdir/

Exit codes: 0 on success (and CP for ``channel-check``), 2 when the checked
channel is not CP, 1 on any error. Nothing is written on exit code 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import channels as ch
from . import dynamics as dyn
from .charfunc import PreconditionError, basis_for_channel, bochner_choi_check, gram_matrix
from .operator_algebra import SingularMapError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class CLIError(Exception):
    pass


@dataclass
class RunConfig:
    model: str = "amplitude_damping"
    gamma0: float = 0.2
    a: float = 1.5
    omega: float = 4.0
    t_max: float = 6.0
    n_points: int = 121
    step: float = 1e-3
    basis: str = "pauli"
    tol: float = ch.DEFAULT_TOL

    def validate(self):
        try:
            dyn.ModelKind(self.model)
        except ValueError:
            raise CLIError(f"unknown model {self.model!r}") from None
        if self.basis not in ("pauli", "weyl"):
            raise CLIError(f"unknown basis {self.basis!r}")
        if self.n_points < 2:
            raise CLIError("n_points must be >= 2")
        if not (self.t_max > 0 and self.step > 0 and self.tol >= 0):
            raise CLIError("t_max and step must be positive, tol non-negative")
        for name in ("gamma0", "a", "omega"):
            if not math.isfinite(getattr(self, name)):
                raise CLIError(f"{name} must be finite")
        return self

    @property
    def profile(self) -> dyn.RateProfile:
        return dyn.RateProfile(self.gamma0, self.a, self.omega)

    @property
    def grid(self) -> dyn.ScanGrid:
        return dyn.ScanGrid(self.t_max, self.n_points)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
        data = tomllib.loads(raw.decode()) if path.suffix == ".toml" else json.loads(raw)
    except (OSError, ValueError) as exc:
        raise CLIError(f"cannot read config {path}: {exc}") from exc
    known = {f.name: f.type for f in fields(RunConfig)}
    unknown = set(data) - set(known)
    if unknown:
        raise CLIError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig()
    for key, value in data.items():
        default = getattr(cfg, key)
        try:
            setattr(cfg, key, type(default)(value))
        except (TypeError, ValueError):
            raise CLIError(f"bad value for {key}: {value!r}") from None
    return cfg


def fmt(x) -> str:
    return format(float(x), ".17g")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


# -- commands --------------------------------------------------------------


def cmd_channel_check(args) -> int:
    try:
        data = json.loads(Path(args.input).read_text())
        chan = ch.channel_from_dict(data)
    except (OSError, ValueError, TypeError) as exc:
        raise CLIError(f"cannot parse channel file {args.input}: {exc}") from exc
    phi = ch.to_superop(chan)
    basis_name = args.basis or "pauli"
    try:
        basis = basis_for_channel(basis_name, phi.dim)
        report = bochner_choi_check(phi, basis, args.tol)
    except (PreconditionError, ValueError) as exc:
        raise CLIError(str(exc)) from exc
    j = ch.choi_from_superop(phi)
    omega = ch.normalize_choi(j)
    out = {
        "dim": phi.dim,
        "basis": basis_name,
        "tol": args.tol,
        "choi_min": report.choi_min,
        "gram_min": report.gram_min,
        "cp_verdict": report.cp(args.tol),
        "agree": report.agree,
        "trace_J": j.trace.real,
        "trace_Omega": omega.trace.real,
        "spectral_deviation": report.spectral_deviation,
    }
    if args.format == "csv":
        keys = list(out)
        row = [out[k] if isinstance(out[k], float) else ("" if out[k] is None else str(out[k])) for k in keys]
        text = _csv_text(keys, [row])
    else:
        text = json.dumps(out, indent=2) + "\n"
    _emit(text, args.output)
    return 0 if out["cp_verdict"] else 2


def cmd_make_channel(args) -> int:
    d = args.dim
    if args.kind == "identity":
        chan = ch.identity_channel(d)
    elif args.kind == "transpose":
        chan = ch.transpose_map(d)
    elif args.kind == "depolarizing":
        chan = ch.depolarizing_map(d)
    else:
        chan = ch.random_cp_channel(d, args.rank or d, args.seed)
    if args.representation == "superop":
        chan = ch.to_superop(chan)
    elif args.representation == "choi":
        chan = ch.choi_from_superop(ch.to_superop(chan))
    elif not isinstance(chan, ch.KrausChannel):
        raise CLIError(f"{args.kind} map has no Kraus form here; use superop or choi")
    _emit(json.dumps(ch.channel_to_dict(chan)) + "\n", args.output)
    return 0


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.tol is not None:
        cfg.tol = args.tol
    if args.basis is not None:
        cfg.basis = args.basis
    return cfg.validate()


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


SCAN_HEADER = ["t", "s", "r", "choi_min", "gram_min", "flag"]


def scan_text(cfg: RunConfig, fmt_name: str = "csv", threads=None) -> tuple[str, dyn.DivisibilityReport]:
    basis = basis_for_channel(cfg.basis, 2)
    rep = dyn.cp_divisibility_scan(cfg.model, cfg.profile, cfg.grid, basis, cfg.tol, threads)
    if fmt_name == "json":
        body = {
            "config": asdict(cfg),
            "violating_pairs": len(rep.violating_pairs),
            "records": [
                {"t": r.t, "s": r.s, "r": _finite_or_none(r.r),
                 "choi_min": _finite_or_none(r.choi_min),
                 "gram_min": _finite_or_none(r.gram_min), "flag": r.flag}
                for r in rep.records
            ],
        }
        return json.dumps(body, indent=1) + "\n", rep
    rows = [[r.t, r.s, r.r, r.choi_min, r.gram_min, r.flag] for r in rep.records]
    return _csv_text(SCAN_HEADER, rows), rep


def cmd_scan(args) -> int:
    cfg = _config_from_args(args)
    text, rep = scan_text(cfg, args.format)
    _emit(text, args.output)
    print(
        f"violating pairs: {len(rep.violating_pairs)} of {len(rep.records)} "
        f"(singular: {len(rep.flagged)})",
        file=sys.stderr,
    )
    return 0


def figure_tables(cfg: RunConfig) -> dict:
    """CSV text of every figure series, keyed by file name."""
    p, ts = cfg.profile, cfg.grid.times
    model = dyn.ModelKind(cfg.model)
    big_gamma = dyn.cumulative_rate(ts, p)
    eta = np.exp(-big_gamma)
    q = eta**2
    g = dyn.gamma(ts, p)
    tables = {}

    tables["gamma.csv"] = _csv_text(["t", "gamma"], zip(ts, g))

    ratio_rows = []
    for lag in (1, 5, 10):
        for i in range(lag, len(ts)):
            j = i - lag
            ratio_rows.append([ts[i], ts[j], lag, eta[i] / eta[j], q[i] / q[j]])
    tables["ratio.csv"] = _csv_text(
        ["t", "s", "lag", "r_amplitude_damping", "r_pure_dephasing"], ratio_rows
    )

    basis = basis_for_channel(cfg.basis, 2)
    eig_rows = []
    for i in range(1, len(ts)):
        try:
            im = dyn.intermediate_from_rates(model, big_gamma[i], big_gamma[i - 1], dyn.COND_LIMIT)
        except SingularMapError:
            eig_rows.append([ts[i], ts[i - 1], math.nan, math.nan, "singular_map"])
            continue
        omega = ch.normalize_choi(ch.choi_from_superop(im.superop))
        eig_rows.append(
            [ts[i], ts[i - 1], omega.eigenvalues()[0], gram_matrix(omega, basis).min_eigenvalue, ""]
        )
    tables["eigenvalues.csv"] = _csv_text(["t", "s", "choi_min", "gram_min", "flag"], eig_rows)

    excited, ground = np.diag([0.0, 1.0]), np.diag([1.0, 0.0])
    plus, minus = np.full((2, 2), 0.5), np.array([[0.5, -0.5], [-0.5, 0.5]])
    d_ad = dyn.trace_distance_trajectory("amplitude_damping", p, excited, ground, ts, cfg.step)
    d_dp = dyn.trace_distance_trajectory("pure_dephasing", p, plus, minus, ts, cfg.step)
    tables["trace_distance.csv"] = _csv_text(
        ["t", "D_amplitude_damping", "eta", "D_pure_dephasing", "q"], zip(ts, d_ad, eta, d_dp, q)
    )

    traj = dyn.integrate_master_equation("pure_dephasing", p, plus, ts, cfg.step)
    tables["coherence.csv"] = _csv_text(
        ["t", "gamma", "q", "abs_rho01"], zip(ts, g, q, np.abs(traj.states[:, 0, 1]))
    )

    d_model = d_ad if model is dyn.ModelKind.AMPLITUDE_DAMPING else d_dp
    flow = dyn.backflow_intervals(d_model, ts)
    summary = {
        "model": model.value,
        "negative_rate_intervals": [list(map(float, iv)) for iv in dyn.negative_rate_intervals(p, ts)],
        "backflow_intervals": [list(iv) for iv in flow.intervals],
        "backflow_measure": flow.measure,
        "r_series_model": "r_amplitude_damping uses eta(t)/eta(s); r_pure_dephasing uses q(t)/q(s)",
    }
    tables["summary.json"] = json.dumps(summary, indent=2) + "\n"
    return tables


def cmd_figures(args) -> int:
    cfg = _config_from_args(args)
    if not args.output or args.output == "-":
        raise CLIError("figures needs --output <directory>")
    tables = figure_tables(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (out / name).write_text(text)
    print(f"wrote {len(tables)} files to {out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choigram",
        description="Choi/Gram-matrix complete-positivity and CP-divisibility checks.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="output path ('-' or omitted for stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--basis", choices=("pauli", "weyl"), default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON or TOML run configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel-check", parents=[common], help="Bochner-Choi check of a channel file")
    p.add_argument("input")
    p.set_defaults(func=cmd_channel_check)

    p = sub.add_parser("make-channel", parents=[common], help="write a channel file")
    p.add_argument("kind", choices=("identity", "transpose", "depolarizing", "random"))
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--representation", choices=("kraus", "superop", "choi"), default="superop")
    p.set_defaults(func=cmd_make_channel)

    p = sub.add_parser("scan", parents=[common], help="CP-divisibility scan over (t, s) pairs")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("figures", parents=[common], help="write figure data series as CSV")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "channel-check":
        args.format = args.format or "json"
        args.tol = ch.DEFAULT_TOL if args.tol is None else args.tol
    else:
        args.format = args.format or "csv"
    try:
        return args.func(args)
    except (CLIError, SingularMapError, ValueError) as exc:
        print(f"choigram: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
