"""Command-line interface: calibrate, arl, monitor, check-cov, simulate-data.

Exit codes: 0 success, 2 input error, 3 calibration failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Iterator, Optional

import numpy as np

from .chart import ChartConfig, EwmaChart
from .covcheck import N_SE, check_covariances
from .errors import NoBracket, ProfileError
from .model import ProcessModel, reference_model
from .simulate import (
    DEFAULT_SEED,
    ShiftScenario,
    SimulationConfig,
    apply_scenario,
    arl_cells,
    calibrate_limit,
    calibrate_shewhart,
    generate_sample,
    replication_rng,
)
from .tables import TABLE_TITLES, run_table

EXIT_INPUT = 2
EXIT_CALIBRATION = 3


class InputError(Exception):
    pass


def _g(v) -> str:
    return "" if v is None else f"{v:.6g}"


def load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def load_model(path: str) -> ProcessModel:
    d = load_json(path)
    if not isinstance(d, dict):
        raise InputError(f"{path}: expected a JSON object")
    try:
        return ProcessModel.from_dict(d)
    except (ProfileError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def load_scenarios(path: str, p: int) -> list[ShiftScenario]:
    d = load_json(path)
    items = d if isinstance(d, list) else [d]
    try:
        return [ShiftScenario.from_dict(item, p) for item in items]
    except (ProfileError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"{path}: {exc}") from None


@contextmanager
def _output(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None
    with fh:
        yield fh


# --- monitor ---------------------------------------------------------------


@dataclass(frozen=True)
class MonitorRecord:
    sample_id: str
    v: float
    limit: float
    signal: bool
    worst_point: int
    z0: float
    z1: float
    intercepts: list
    slopes: list

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "MonitorRecord":
        return cls(**json.loads(line))


def read_samples(path: str, model: ProcessModel) -> Iterator[tuple[str, np.ndarray]]:
    """Yield ``(sample_id, y)`` with ``y`` ordered like the model's design points."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    n, p = model.n, model.p
    design = model.design.x
    order = np.argsort(design, kind="stable")
    expected = ["sample_id", "x"] + [f"y{j + 1}" for j in range(p)]
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        if [h.strip() for h in header] != expected:
            raise InputError(f"{path}: line 1: header must be {','.join(expected)}")
        seen: set[str] = set()
        group: list[tuple[int, float, list[float]]] = []
        current = None

        def flush():
            line = group[0][0]
            if len(group) != n:
                raise InputError(f"{path}: line {line}: sample {current!r} has {len(group)} rows, expected {n}")
            xs = np.array([g[1] for g in group])
            rows = np.argsort(xs, kind="stable")
            if not np.array_equal(xs[rows], design[order]):
                raise InputError(f"{path}: line {line}: x values of sample {current!r} do not match the design points")
            y = np.empty((n, p))
            y[order] = np.array([group[r][2] for r in rows])
            return current, y

        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2 + p:
                raise InputError(f"{path}: line {line}: expected {2 + p} fields, got {len(row)}")
            try:
                x = float(row[1])
                ys = [float(c) for c in row[2:]]
            except ValueError:
                raise InputError(f"{path}: line {line}: non-numeric value") from None
            sid = row[0]
            if sid != current:
                if group:
                    yield flush()
                if sid in seen:
                    raise InputError(f"{path}: line {line}: sample {sid!r} appears in non-contiguous rows")
                seen.add(sid)
                current, group = sid, []
            group.append((line, x, ys))
        if group:
            yield flush()


def cmd_monitor(args) -> int:
    model = load_model(args.model)
    chart = EwmaChart(model, ChartConfig(theta=args.theta, l_b=args.l_b))
    # validate the whole file before writing anything
    samples = list(read_samples(args.data, model))
    with _output(args.out) as out:
        for sid, y in samples:
            verdict = chart.update(y)
            z = chart.state.z
            rec = MonitorRecord(
                sid, verdict.v, verdict.limit, bool(verdict.signal), verdict.worst_point,
                z.b0_sum, z.b1_sum, chart.last_fit.intercepts.tolist(), chart.last_fit.slopes.tolist(),
            )
            out.write(rec.to_json() + "\n")
    return 0


# --- simulate-data ---------------------------------------------------------


def cmd_simulate_data(args) -> int:
    model = load_model(args.model)
    if args.scenario_file:
        scenarios = load_scenarios(args.scenario_file, model.p)
        if len(scenarios) != 1:
            raise InputError("simulate-data takes a single scenario object")
        scenario = scenarios[0]
    else:
        scenario = ShiftScenario.in_control(model.p)
    try:
        shifted = apply_scenario(model, scenario)
    except ProfileError as exc:
        raise InputError(str(exc)) from None
    rng = replication_rng(args.seed, 0, (0xDA7A,))
    with _output(args.out) as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["sample_id", "x"] + [f"y{j + 1}" for j in range(model.p)])
        for k in range(args.samples):
            y = generate_sample(shifted, rng)
            for i, x in enumerate(model.design.x):
                w.writerow([str(k + 1), repr(float(x))] + [repr(float(v)) for v in y[i]])
    return 0


# --- arl -------------------------------------------------------------------


def cmd_arl(args) -> int:
    cc = ChartConfig(theta=args.theta, l_b=args.l_b)
    cfg = SimulationConfig(args.reps, args.max_steps, args.seed)
    if args.table is not None:
        base = load_model(args.model) if args.model else reference_model()
        if base.p != 2:
            raise InputError("published tables need a two-response model")
        rows = run_table(args.table, cc, cfg, base, workers=args.workers)
        p = 2
        records = [
            (c.table, c.rho, c.lambda1, c.lambda2, c.scenario, est, c.published, c.comparison)
            for c, est in rows
        ]
    else:
        if not args.model:
            raise InputError("--scenario-file needs a model file")
        model = load_model(args.model)
        scenarios = load_scenarios(args.scenario_file, model.p)
        if any(s.p != model.p for s in scenarios):
            raise InputError(f"scenario lists must have length {model.p}")
        p = model.p
        ests = arl_cells([(model, s) for s in scenarios], cc, cfg, stream_prefix=(0,), workers=args.workers)
        records = [(None, None, None, None, s, e, None, None) for s, e in zip(scenarios, ests)]

    header = ["table", "rho", "lambda1", "lambda2"]
    header += [f"intercept_shift_{j + 1}" for j in range(p)]
    header += [f"slope_shift_{j + 1}" for j in range(p)]
    header += [f"stddev_factor_{j + 1}" for j in range(p)]
    header += ["mean_rl", "std_err", "replications", "censored", "published_arl", "comparison_arl"]
    with _output(args.out) as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for table, rho, l1, l2, s, est, published, comp in records:
            w.writerow(
                ["" if table is None else table, _g(rho), _g(l1), _g(l2)]
                + [_g(v) for v in s.intercept_shifts + s.slope_shifts + s.stddev_factors]
                + [_g(est.mean_rl), _g(est.std_err), est.replications, est.censored, _g(published), _g(comp)]
            )
    return 0


# --- calibrate -------------------------------------------------------------


def cmd_calibrate(args) -> int:
    model = load_model(args.model)
    cfg = SimulationConfig(args.reps, args.max_steps, args.seed)
    try:
        cal = calibrate_limit(model, args.theta, args.target_arl, cfg, workers=args.workers)
    except NoBracket as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    e = cal.estimate
    print(f"l_b {cal.value:.6g}  in-control ARL {e.mean_rl:.6g} (se {e.std_err:.6g}, {e.replications} reps)")
    if args.shewhart:
        try:
            sh = calibrate_shewhart(model, args.target_arl, cfg)
        except NoBracket as exc:
            print(f"calibration failed: {exc}", file=sys.stderr)
            return EXIT_CALIBRATION
        e = sh.estimate
        print(f"m_alpha {sh.value:.6g}  in-control ARL {e.mean_rl:.6g} (se {e.std_err:.6g}, {e.replications} samples)")
    return 0


# --- check-cov -------------------------------------------------------------


def cmd_check_cov(args) -> int:
    model = load_model(args.model)
    rows = check_covariances(model, args.reps, args.seed)
    print(f"{'quantity':<22} {'u':>2} {'v':>2} {'analytic':>12} {'monte_carlo':>12} {'std_err':>10} {'z':>8}  result")
    for r in rows:
        u = "" if r.u is None else r.u
        v = "" if r.v is None else r.v
        verdict = "PASS" if r.passed else "FAIL"
        print(f"{r.quantity:<22} {u:>2} {v:>2} {r.analytic:>12.6g} {r.monte_carlo:>12.6g} "
              f"{r.std_err:>10.3g} {r.z:>8.3g}  {verdict}")
    print(f"(pass: |z| <= {N_SE:g}; rows marked [xbar] use xbar instead of xbar**2 in the intercept variance)")
    return 0


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="profile-ewma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def chart_flags(p, l_b=True):
        p.add_argument("--theta", type=float, default=0.2, help="smoothing constant (default 0.2)")
        if l_b:
            p.add_argument("--l-b", type=float, default=3.6233, help="limit multiplier (default 3.6233)")

    def sim_flags(p, reps):
        p.add_argument("--reps", type=int, default=reps, help=f"replications (default {reps})")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
        p.add_argument("--max-steps", type=int, default=20000, help="run-length cap (default 20000)")
        p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")

    p = sub.add_parser("calibrate", help="calibrate l_b to a target in-control ARL")
    p.add_argument("model")
    chart_flags(p, l_b=False)
    p.add_argument("--target-arl", type=float, default=200.0)
    p.add_argument("--shewhart", action="store_true", help="also calibrate the Shewhart m_alpha")
    sim_flags(p, 5000)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("arl", help="estimate ARLs for a published table or a scenario file")
    p.add_argument("model", nargs="?", help="model JSON (tables default to the reference model)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--table", type=int, choices=sorted(TABLE_TITLES))
    g.add_argument("--scenario-file")
    chart_flags(p)
    sim_flags(p, 5000)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_arl)

    p = sub.add_parser("monitor", help="run the EWMA chart over a CSV stream of samples")
    p.add_argument("model")
    p.add_argument("--data", required=True)
    chart_flags(p)
    p.add_argument("--out", help="JSONL output path (default stdout)")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("check-cov", help="Monte Carlo check of the estimator covariances")
    p.add_argument("model")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_check_cov)

    p = sub.add_parser("simulate-data", help="write synthetic samples in the monitor input format")
    p.add_argument("model")
    p.add_argument("--scenario-file")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_simulate_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ProfileError) as exc:
        print(f"profile-ewma: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"profile-ewma: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
