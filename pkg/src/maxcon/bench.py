"""Seeded benchmark harness: every method sees the identical instance per trial.

Instances for cell ``c`` and trial ``t`` are drawn from
``SeedSequence([seed, c, t])`` so any single trial can be regenerated in
isolation. Wall time covers only the fit call.
"""

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import baselines
from .errors import InvalidArgumentError
from .formats import read_instance, read_matches
from .model import linearize_fundamental, linearize_homography, normalize_matches, \
    synth_hyperplane, synth_matches
from .reweight import IRConfig, irlp_fit, irqp_fit

log = logging.getLogger(__name__)

PROBLEMS = ("hyperplane", "homography-linear", "fundamental-linear", "file")
METHODS = ("ransac", "lo-ransac", "mlesac", "l1", "linf", "irlp", "irqp", "exact")
FULL_TRIALS = 100
CSV_FIELDS = ("method", "cell", "n", "mean_count", "std_count", "mean_time_s", "oracle_opt_frac")


@dataclass(frozen=True)
class BenchSpec:
    problem: str = "hyperplane"
    fractions: Tuple[float, ...] = (0.2, 0.4, 0.6)
    n: int = 250
    d: int = 8
    epsilon: float = 0.3
    methods: Tuple[str, ...] = ("ransac", "irlp")
    trials: int = 20
    seed: int = 0
    time_budget: Optional[float] = None
    sigma_in: float = 0.1
    outlier_range: float = 10.0
    noise: float = 1.0
    input_path: Optional[str] = None
    oracle_limit: int = 2_000_000
    gamma: float = 0.01
    max_iters: int = 25
    zeta: float = 1e-4
    init: Optional[str] = None
    timing: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise InvalidArgumentError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        if not self.methods:
            raise InvalidArgumentError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InvalidArgumentError(f"unknown methods {bad}; choose from {METHODS}")
        if any(not 0 <= f < 1 for f in self.fractions):
            raise InvalidArgumentError("outlier fractions must lie in [0, 1)")
        if self.problem != "file" and not self.fractions:
            raise InvalidArgumentError("at least one outlier fraction is required")
        if self.problem == "file" and not self.input_path:
            raise InvalidArgumentError("problem 'file' needs an input path")
        if not self.epsilon >= 0:
            raise InvalidArgumentError("epsilon must be >= 0")
        if self.jobs < 1:
            raise InvalidArgumentError("jobs must be >= 1")

    def cells(self):
        if self.problem == "file":
            return ["file"]
        return [f"{f:g}" for f in self.fractions]


@dataclass
class BenchRow:
    method: str
    cell: str
    n: int
    mean_count: float
    std_count: float
    mean_time_s: Optional[float]
    oracle_opt_frac: Optional[float]


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    digests: list = field(default_factory=list)   # (cell, trial, sha256 of the system)
    notes: list = field(default_factory=list)

    def row(self, method, cell):
        for r in self.rows:
            if r.method == method and r.cell == cell:
                return r
        raise KeyError((method, cell))


def trial_seed(seed, cell_index, trial):
    return np.random.SeedSequence([int(seed), int(cell_index), int(trial)])


def make_instance(spec, cell_index, trial):
    """``(system, epsilon)`` for one cell and trial."""
    ss = trial_seed(spec.seed, cell_index, trial)
    rng = np.random.default_rng(ss)
    if spec.problem == "hyperplane":
        frac = spec.fractions[cell_index]
        inst = synth_hyperplane(spec.n, spec.d, spec.sigma_in, frac, spec.outlier_range, rng,
                                spec.epsilon)
        return inst.system, spec.epsilon
    if spec.problem in ("homography-linear", "fundamental-linear"):
        kind = spec.problem.split("-")[0]
        frac = spec.fractions[cell_index]
        matches, _ = synth_matches(kind, spec.n, spec.noise, frac, rng)
        norm, _, _ = normalize_matches(matches)
        lin = linearize_homography if kind == "homography" else linearize_fundamental
        return lin(norm), spec.epsilon
    return _load_file(spec.input_path, spec.epsilon)


def _load_file(path, epsilon):
    with open(path) as fh:
        first = next((ln for ln in fh if ln.split("#", 1)[0].strip()), "")
    if len(first.split("#", 1)[0].split()) == 3:
        inst = read_instance(path)
        return inst.system, inst.epsilon
    norm, _, _ = normalize_matches(read_matches(path))
    return linearize_homography(norm), epsilon


def run_method(name, system, epsilon, spec, seed):
    """Run one method; returns its :class:`~maxcon.reweight.ConsensusResult`."""
    if name in ("irlp", "irqp"):
        init = spec.init or ("linf" if spec.problem == "fundamental-linear" else "ones")
        cfg = IRConfig(epsilon=epsilon, gamma=spec.gamma, max_iters=spec.max_iters,
                       zeta=spec.zeta, init=init, seed=seed)
        return (irlp_fit if name == "irlp" else irqp_fit)(system, cfg)
    if name == "ransac":
        return baselines.ransac_fit(system, epsilon,
                                    baselines.RansacConfig(seed=seed, time_budget=spec.time_budget))
    if name == "lo-ransac":
        return baselines.lo_ransac_fit(system, epsilon, baselines.RansacConfig(seed=seed))
    if name == "mlesac":
        return baselines.mlesac_fit(system, epsilon, baselines.MlesacConfig(seed=seed))
    if name == "l1":
        return baselines.iterative_l1_fit(system, epsilon)
    if name == "linf":
        return baselines.iterative_linf_fit(system, epsilon)
    if name == "exact":
        return baselines.exact_maxcon(system, epsilon, spec.oracle_limit)
    raise InvalidArgumentError(f"unknown method {name!r}")


def _run_trial(args):
    spec, cell_index, trial = args
    system, epsilon = make_instance(spec, cell_index, trial)
    digest = system.digest()
    seed = int(trial_seed(spec.seed, cell_index, trial).generate_state(1)[0])
    out = {}
    admissible = baselines.exact_work(system) <= spec.oracle_limit
    for name in spec.methods:
        if name == "exact" and not admissible:
            out[name] = None
            continue
        t0 = time.perf_counter()
        res = run_method(name, system, epsilon, spec, seed)
        out[name] = (res.count, time.perf_counter() - t0)
    oracle = None
    if admissible:
        if "exact" in out:
            oracle = out["exact"][0]
        else:
            oracle = baselines.exact_maxcon(system, epsilon, spec.oracle_limit).count
    return digest, system.n, out, oracle


def run_bench(spec):
    report = BenchReport()
    if spec.problem == "file":
        _load_file(spec.input_path, spec.epsilon)  # fail early on a bad path
    for ci, cell in enumerate(spec.cells()):
        jobs = [(spec, ci, t) for t in range(spec.trials)]
        if spec.jobs > 1:
            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                results = list(pool.map(_run_trial, jobs))
        else:
            results = [_run_trial(j) for j in jobs]
        oracle_ok = all(r[3] is not None for r in results)
        if not oracle_ok:
            report.notes.append(f"cell {cell}: oracle skipped")
        n = results[0][1]
        for t, (digest, _, _, _) in enumerate(results):
            report.digests.append((cell, t, digest))
            log.info("cell %s trial %d system %s", cell, t, digest[:16])
        for name in spec.methods:
            if any(r[2][name] is None for r in results):
                report.notes.append(f"cell {cell}: exact skipped (enumeration limit)")
                continue
            counts = np.array([r[2][name][0] for r in results], dtype=float)
            times = np.array([r[2][name][1] for r in results])
            frac = None
            if oracle_ok:
                frac = float(np.mean([r[2][name][0] == r[3] for r in results]))
            report.rows.append(BenchRow(
                name, cell, n, float(counts.mean()), float(counts.std()),
                float(times.mean()) if spec.timing else None, frac))
    return report


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(round(v, 6))
    return str(v)


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def read_report_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            opt = lambda k: float(rec[k]) if rec[k] != "" else None  # noqa: E731
            rows.append(BenchRow(rec["method"], rec["cell"], int(rec["n"]), float(rec["mean_count"]),
                                 float(rec["std_count"]), opt("mean_time_s"), opt("oracle_opt_frac")))
    return BenchReport(rows)


def report_table(report):
    header = ["method", "cell", "n", "mean", "std", "time_s", "opt_frac"]
    body = [[r.method, r.cell, str(r.n), f"{r.mean_count:.2f}", f"{r.std_count:.2f}",
             "-" if r.mean_time_s is None else f"{r.mean_time_s:.4f}",
             "-" if r.oracle_opt_frac is None else f"{r.oracle_opt_frac:.2f}"]
            for r in report.rows]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(x.ljust(w) if i < 2 else x.rjust(w) for i, (x, w) in enumerate(zip(row, widths)))
             for row in [header] + body]
    return "\n".join(lines) + "\n"


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def report_svg(report, width=640, height=420):
    """Mean consensus against cell (outlier fraction), one polyline per method."""
    cells = list(dict.fromkeys(r.cell for r in report.rows))
    try:
        xs = {c: float(c) for c in cells}
    except ValueError:
        xs = {c: float(i) for i, c in enumerate(cells)}
    methods = list(dict.fromkeys(r.method for r in report.rows))
    ml, mr, mt, mb = 60, 120, 20, 50
    x0, x1 = min(xs.values()), max(xs.values())
    if x1 == x0:
        x1 = x0 + 1.0
    y1 = max(r.mean_count for r in report.rows) * 1.05 or 1.0
    sx = lambda x: ml + (x - x0) / (x1 - x0) * (width - ml - mr)  # noqa: E731
    sy = lambda y: height - mb - y / y1 * (height - mt - mb)  # noqa: E731

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>']
    for c in cells:
        out.append(f'<text x="{sx(xs[c]):.1f}" y="{height - mb + 15}" text-anchor="middle">{c}</text>')
    for k in range(5):
        y = y1 * k / 4
        out.append(f'<text x="{ml - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.0f}</text>')
    out.append(f'<text x="{(ml + width - mr) / 2:.0f}" y="{height - 12}" text-anchor="middle">'
               f'outlier fraction</text>')
    out.append(f'<text x="14" y="{(mt + height - mb) / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {(mt + height - mb) / 2:.0f})">mean consensus size</text>')
    for i, m in enumerate(methods):
        color = _COLORS[i % len(_COLORS)]
        pts = sorted((xs[r.cell], r.mean_count) for r in report.rows if r.method == m)
        path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        out.append(f'<polyline data-method="{m}" fill="none" stroke="{color}" stroke-width="2" '
                   f'points="{path}"/>')
        ly = mt + 16 * i + 8
        out.append(f'<line x1="{width - mr + 10}" y1="{ly}" x2="{width - mr + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - mr + 36}" y="{ly + 4}">{m}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report, fmt, path=None):
    """Render ``report`` as ``csv``, ``table`` or ``svg``; write to ``path`` if given."""
    if not report.rows:
        raise InvalidArgumentError("report is empty (every method was skipped)")
    render = {"csv": report_csv, "table": report_table, "svg": report_svg}.get(fmt)
    if render is None:
        raise InvalidArgumentError(f"unknown report format {fmt!r}")
    text = render(report)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def full_scale(spec):
    """Copy of the bench settings with 100 trials per cell."""
    return replace(spec, trials=FULL_TRIALS)
