"""Command line experiments.

Every subcommand writes a CSV file (``--csv``, default standard output)
whose first line is a comment with the package version and a hash of the
resolved configuration, followed by a header row.  Floats carry 12
significant digits, so reruns with the same configuration and seed are
byte-identical.

Options may also come from a config file (``--config``) with ``key =
value`` lines under a ``[subcommand]`` section; command line flags win.

Exit status: 0 when all embedded checks pass, 1 when one fails (the
failed invariant is named on standard error), 2 for usage or config
errors.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .embeddings import defective_norm_counterexample, uniform_bound_sweep
from .errors import HypothesisError, RkhsQmcError
from .idim_integration import (
    CostModel,
    fit_rate,
    fixed_subspace_integrate,
    mdm_integrate,
    mdm_plan,
    multilevel_integrate,
    multilevel_plan,
    product_test_integrand,
    theoretical_lambda,
)
from .qmc_rules import (
    RandomizedRuleFamily,
    cbc_construct,
    format_generating_vector,
    parse_generating_vector,
    randomized_error,
    scrambled_wce,
    wce,
)
from .tensor_spaces import ProductFunction, ProductKernel, cylinder_isometry_check, l1_embedding_check
from .univariate_spaces import (
    NormFlavor,
    SampledFunction,
    UnivariateSpace,
    equivalence_constant,
    galerkin_kernel,
)
from .weights import WeightSequence, parse_weights

THREADS_ENV = "RKHS_QMC_THREADS"


class UsageError(Exception):
    """Bad flags or config values (exit status 2)."""


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    return str(value)


@dataclass
class Report:
    """Rows of one experiment plus the checks made along the way."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    series: list[tuple[str, list[tuple[float, float]]]] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError("row length does not match the header")
        self.rows.append(list(values))

    def check(self, ok: bool, invariant: str) -> None:
        if not ok and invariant not in self.failures:
            self.failures.append(invariant)

    def csv_text(self, kind: str, config_hash: str) -> str:
        out = io.StringIO()
        out.write(f"# rkhs-qmc {__version__} kind={kind} config={config_hash}\n")
        for note in self.notes:
            out.write(f"# {note}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            out.write(",".join(_fmt(v) for v in row) + "\n")
        return out.getvalue()


def config_hash(kind: str, params: dict) -> str:
    blob = json.dumps({"kind": kind, **params}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def svg_loglog(series: list[tuple[str, list[tuple[float, float]]]], xlabel: str, ylabel: str) -> str:
    """Static log-log chart with one polyline per series and its fitted slope."""
    width, height, pad = 640, 420, 60
    pts = [(x, y) for _, data in series for x, y in data if x > 0 and y > 0]
    if not pts:
        raise UsageError("nothing to plot")
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    x0, x1 = float(lx.min()), float(lx.max())
    y0, y1 = float(ly.min()), float(ly.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(v: float) -> float:
        return pad + (math.log10(v) - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v: float) -> float:
        return height - pad - (math.log10(v) - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle">{xlabel} (log scale)</text>',
        f'<text x="15" y="{height / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {height / 2:.1f})">{ylabel} (log scale)</text>',
    ]
    for k in range(math.floor(x0), math.ceil(x1) + 1):
        if x0 <= k <= x1:
            x = sx(10.0**k)
            parts.append(f'<text x="{x:.1f}" y="{height - pad + 16}" text-anchor="middle">1e{k}</text>')
    for k in range(math.floor(y0), math.ceil(y1) + 1):
        if y0 <= k <= y1:
            y = sy(10.0**k)
            parts.append(f'<text x="{pad - 6}" y="{y + 4:.1f}" text-anchor="end">1e{k}</text>')
    for index, (label, data) in enumerate(series):
        data = [(x, y) for x, y in data if x > 0 and y > 0]
        if not data:
            continue
        color = colors[index % len(colors)]
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in data)
        parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in data:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        text = label
        if len(data) >= 4:
            try:
                slope, _ = fit_rate(data)
                text += f" (slope {slope:.3f})"
            except RkhsQmcError:
                pass
        parts.append(f'<text x="{width - pad - 6}" y="{pad + 16 + 16 * index}" text-anchor="end" fill="{color}">{text}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _int_range(text: str) -> list[int]:
    """``4:12`` (inclusive), ``4:12:2`` or a comma list."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            lo, hi, step = parts
            if step <= 0 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad integer range {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _space(flavor: str, r: int) -> UnivariateSpace:
    return UnivariateSpace(NormFlavor.parse(flavor), int(r))


def _weights(text: str) -> WeightSequence:
    return parse_weights(text)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer")
    return value


def _parallel_map(func: Callable, items: Sequence) -> list:
    """Order-preserving map over independent jobs."""
    threads = _threads()
    if threads == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _need_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for randomized experiments")
    return int(args.seed)


def _slope_check(report: Report, pairs: list[tuple[float, float]], expect: str | None, label: str) -> float | None:
    if len(pairs) < 4:
        return None
    slope, stderr = fit_rate(pairs)
    report.notes.append(f"{label} slope={slope:.6f} stderr={stderr:.6f}")
    if expect:
        lo, hi = _expect_range(expect)
        report.check(lo <= slope <= hi, f"{label} slope {slope:.4f} within [{lo}, {hi}]")
    return slope


def _expect_range(text: str) -> tuple[float, float]:
    lo_text, sep, hi_text = text.partition(":")
    try:
        lo = float(lo_text) if lo_text else -math.inf
        hi = float(hi_text) if sep and hi_text else math.inf
    except ValueError:
        raise UsageError(f"bad slope range {text!r}") from None
    return lo, hi


def _test_product(weights: WeightSequence, s: int) -> ProductFunction:
    """``prod_j (1 + gamma_j x - 0.7 gamma_j x**2)`` on ``s`` coordinates."""
    factors = []
    for j in range(1, s + 1):
        g = weights.weight(j)
        factors.append(SampledFunction.from_polynomial([1.0, g, -0.7 * g], degree=3))
    return ProductFunction(factors)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_kernel_check(args) -> Report:
    report = Report(["flavor", "r", "gamma", "max_abs_diff", "asymmetry", "min_eigenvalue", "homogeneity_gap"])
    grid = (np.arange(args.grid) + 0.5) / args.grid
    for flavor in args.flavor.split(","):
        for r in _int_range(args.r):
            space = _space(flavor, r)
            for gamma in _float_list(args.gamma):
                closed = 1.0 + space.kernel(gamma, grid[:, None], grid[None, :])
                oracle = galerkin_kernel(space, gamma, grid)
                diff = float(np.max(np.abs(closed - oracle)))
                asym = float(np.max(np.abs(closed - closed.T)))
                min_eig = float(np.linalg.eigvalsh(0.5 * (closed + closed.T)).min())
                scaled = space.kernel(gamma, grid[:, None], grid[None, :]) - gamma * space.kernel(1.0, grid[:, None], grid[None, :])
                gap = float(np.max(np.abs(scaled)))
                report.add(str(space.flavor), r, gamma, diff, asym, min_eig, gap)
                name = f"{space.flavor} r={r} gamma={gamma:g}"
                report.check(asym <= 1e-12, f"kernel symmetry ({name})")
                report.check(min_eig >= -1e-9, f"kernel positive semidefinite ({name})")
                if space.homogeneous:
                    report.check(diff <= args.tol, f"closed form matches oracle ({name})")
                elif gamma != 1.0:
                    report.check(gap >= 1e-3, f"Standard kernel is not gamma-homogeneous ({name})")
    return report


def run_embed_sweep(args) -> Report:
    flavor_i, flavor_ii = NormFlavor.parse(args.flavor_i), NormFlavor.parse(args.flavor_ii)
    weights = _weights(args.weights)
    c0 = args.c0
    if c0 is None:
        _, c0 = equivalence_constant(UnivariateSpace(flavor_i, args.r), UnivariateSpace(flavor_ii, args.r))
    report = Report(["s", "norm_fwd_c0", "norm_inv_c0inv", "norm_fwd_c0inv", "norm_inv_c0", "budget"])
    report.notes.append(f"c0={c0:.12g}")
    rows = uniform_bound_sweep(flavor_i, flavor_ii, args.r, weights, c0, args.s_max, args.resolution)
    previous = None
    for row in rows:
        report.add(row.s, *row.norms(), row.budget)
        report.check(all(v <= row.budget * (1 + 1e-9) for v in row.norms()), "embedding norms bounded by the weight budget")
        if previous is not None:
            report.check(all(b >= a * (1 - 1e-9) for a, b in zip(previous, row.norms())), "embedding norms nondecreasing in s")
        previous = row.norms()
    return report


def run_counterexample(args) -> Report:
    weights = _weights(args.weights)
    report = Report(["s", "lhs", "rhs", "rhs_formula"])
    for s in range(1, args.s_max + 1):
        lhs, rhs = defective_norm_counterexample(args.r, weights, s)
        formula = float(np.prod(1.0 + 3.0 / weights.first(s)))
        report.add(s, lhs, rhs, formula)
        report.check(lhs == 1.0, "defective norm of the counterexample equals 1")
        report.check(abs(rhs - formula) <= 1e-12 * formula, "full norm matches the product formula")
    return report


def _lattice_kernel(args, s: int) -> ProductKernel:
    return ProductKernel(_space(args.flavor, args.r), _weights(args.weights), s)


def run_cbc(args) -> Report:
    ms = _int_range(args.m)
    report = Report(["n", "m", "dims", "wce", "generating_vector"])
    kernel = _lattice_kernel(args, args.dims)
    pairs = []
    last = None
    for m in ms:
        lat = cbc_construct(args.base, m, args.dims, kernel, interlace_r=args.interlace, criterion=args.criterion)
        err = scrambled_wce(lat, kernel) if args.criterion == "scrambled" else wce(lat.rule(), kernel)
        report.add(lat.n, m, args.dims, err, " ".join(str(q) for q in lat.generating_vector))
        pairs.append((lat.n, err))
        last = lat
    report.series.append(("wce", pairs))
    _slope_check(report, pairs, args.expect_slope, "wce")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(format_generating_vector(last))
    return report


def run_wce(args) -> Report:
    with open(args.vector) as fh:
        lat = parse_generating_vector(fh.read())
    kernel = _lattice_kernel(args, lat.s)
    report = Report(["n", "dims", "interlace", "wce", "scrambled_wce"])
    try:
        swce = scrambled_wce(lat, kernel)
    except RkhsQmcError:
        swce = None
    report.add(lat.n, lat.s, lat.interlace, wce(lat.rule(), kernel), swce)
    return report


def run_scramble_rate(args) -> Report:
    seed = _need_seed(args)
    kernel = _lattice_kernel(args, args.dims)
    weights = _weights(args.weights)
    f = _test_product(weights, args.dims)
    interlace_r = args.interlace if args.interlace else (kernel.space.r if args.kind == "owen" else 1)
    report = Report(["n", "rmse", "bias", "std", "bias_sigmas", "replicates"])

    def one(m: int):
        lat = cbc_construct(args.base, m, args.dims, kernel, interlace_r=interlace_r, criterion=args.criterion)
        return randomized_error(RandomizedRuleFamily(lat, args.kind, seed), f, kernel, args.replicates), lat.n

    pairs = []
    for res, n in _parallel_map(one, _int_range(args.m)):
        sigma = res.std / math.sqrt(res.replicates)
        z = abs(res.bias) / sigma if sigma > 0 else 0.0
        report.add(n, res.rmse, res.bias, res.std, z, res.replicates)
        report.check(z <= args.bias_sigmas, f"randomized estimator unbiased within {args.bias_sigmas:g} sigma")
        pairs.append((n, res.rmse))
    report.series.append(("rmse", pairs))
    _slope_check(report, pairs, args.expect_slope, "rmse")
    return report


def run_transfer(args) -> Report:
    source = _space(args.flavor, args.r)
    target = _space(args.target_flavor, args.r)
    weights = _weights(args.weights)
    c0 = args.c0
    if c0 is None:
        _, c0 = equivalence_constant(source, target)
    k_source = ProductKernel(source, weights, args.dims)
    k_target = ProductKernel(target, weights.scaled(c0), args.dims)
    report = Report(["n", "wce_source", "wce_target"])
    report.notes.append(f"c0={c0:.12g}")
    src, tgt = [], []
    for m in _int_range(args.m):
        rule = cbc_construct(args.base, m, args.dims, k_source).rule()
        a, b = wce(rule, k_source), wce(rule, k_target)
        report.add(rule.n, a, b)
        src.append((rule.n, a))
        tgt.append((rule.n, b))
    report.series += [("source", src), ("target", tgt)]
    s1 = _slope_check(report, src, None, "source")
    s2 = _slope_check(report, tgt, None, "target")
    if s1 is not None and s2 is not None:
        report.check(abs(s1 - s2) <= args.slope_tol, f"transferred slope within {args.slope_tol:g} of the source slope")
    return report


_DEFAULT_COST = {"mdm": "unr", "ml": "nest", "fixed": "fix"}


def run_idim(args) -> Report:
    cost_variant = args.cost or _DEFAULT_COST[args.algo]
    if cost_variant != _DEFAULT_COST[args.algo]:
        raise UsageError(f"--algo {args.algo} is analysed under --cost {_DEFAULT_COST[args.algo]}")
    model = CostModel.parse(cost_variant, args.growth, args.anchor)
    space = _space(args.flavor, args.r)
    weights = _weights(args.weights)
    seed = _need_seed(args) if args.setting == "ran" else args.seed
    replicates = args.replicates if args.setting == "ran" else 1
    if args.setting == "ran" and replicates < 2:
        raise UsageError("randomized runs need at least two replicates")
    f = product_test_integrand(_weights(args.integrand_weights) if args.integrand_weights else weights, args.shape)
    columns = ["budget", "cost", "estimate", "error", "replicates"]
    if args.algo == "fixed":
        columns.append("dims")
    report = Report(columns)

    def estimates(run: Callable[[int], object]) -> tuple[float, float, float]:
        results = _parallel_map(run, list(range(replicates)))
        values = np.array([r.estimate for r in results])
        err = math.sqrt(float(np.mean((values - 1.0) ** 2)))
        return float(values.mean()), err, results[0].cost

    pairs = []
    for exponent in _int_range(args.budget_grid):
        budget = float(args.base ** exponent)
        extra = []
        if args.algo == "mdm":
            plan = mdm_plan(weights, space, budget, model, rate_hint=args.rate_hint, b=args.base)
            mean, err, cost = estimates(lambda q: mdm_integrate(f, plan, space, args.setting, seed, q))
        elif args.algo == "ml":
            plan = multilevel_plan(weights, space, budget, model, rate_hint=args.rate_hint, b=args.base)
            mean, err, cost = estimates(lambda q: multilevel_integrate(f, plan, space, weights, args.setting, seed, q))
        else:
            best = None
            for s in _fixed_dims(args.s_max):
                m = int(math.floor(math.log(budget / float(model.price(s)), args.base) + 1e-12))
                m = min(m, args.max_m)
                if m < 0:
                    continue
                n = args.base**m
                got = estimates(
                    lambda q: fixed_subspace_integrate(f, s, n, space, weights, args.setting, seed, model, args.base, q)
                )
                if best is None or got[1] < best[0][1]:
                    best = (got, s)
            if best is None:
                raise UsageError(f"budget {budget:g} cannot pay for a single node")
            (mean, err, cost), s_best = best
            extra = [s_best]
        report.check(cost <= budget * (1 + 1e-12), "cost within budget")
        report.add(budget, cost, mean, err, replicates, *extra)
        pairs.append((cost, err))
    report.series.append((f"{args.algo} {args.setting}", pairs))
    _slope_check(report, [p for p in pairs if p[1] > 0], args.expect_slope, "error")
    return report


def _fixed_dims(s_max: int) -> list[int]:
    """Roughly geometric grid ``1, 2, 3, 5, 8, ...`` up to ``s_max``, largest first."""
    dims = {min(s_max, int(round(1.5**k))) for k in range(64) if 1.5**k < 1.5 * s_max}
    return sorted(dims, reverse=True)


def run_lambda_table(args) -> Report:
    report = Report(
        ["setting", "model", "space", "r", "decay", "sigma", "growth", "lower", "upper", "exact", "open_gap", "result"]
    )
    table: dict[tuple, object] = {}
    for setting in args.settings.split(","):
        for model in args.models.split(","):
            for r in _float_list(args.r):
                for decay in _float_list(args.decay):
                    for sigma in _float_list(args.sigma):
                        key = (setting, model, r, decay, sigma)
                        try:
                            br = theoretical_lambda(setting, model, r, decay, sigma, args.growth, args.space)
                        except HypothesisError as exc:
                            report.add(setting, model, args.space, r, decay, sigma, args.growth, None, None, None, None, f"not covered: {exc}")
                            continue
                        table[key] = br
                        report.add(setting, model, args.space, r, decay, sigma, args.growth, br.lower, br.upper, br.exact, br.open_gap, br.result)
    for (setting, model, r, decay, sigma), br in table.items():
        for weaker, stronger in (("fix", "nest"), ("nest", "unr")):
            if model == weaker and (setting, stronger, r, decay, sigma) in table:
                other = table[(setting, stronger, r, decay, sigma)]
                report.check(br.lower <= other.lower and br.upper <= other.upper, "exponents ordered fix <= nest <= unr")
        if setting == "det" and ("ran", model, r, decay, sigma) in table:
            other = table[("ran", model, r, decay, sigma)]
            report.check(br.lower <= other.lower and br.upper <= other.upper, "deterministic exponents below randomized ones")
    return report


def run_l1_check(args) -> Report:
    seed = _need_seed(args)
    report = Report(["s", "max_ratio", "sigma", "bound"])
    for s in _int_range(args.dims):
        kernel = _lattice_kernel(args, s)
        ratio, bound, sigma = l1_embedding_check(kernel, trials=args.trials, seed=seed, samples=args.samples)
        report.add(s, ratio, sigma, bound)
        report.check(ratio <= bound + 3 * sigma, "L1 norm bounded by the product of univariate embedding norms")
    return report


def run_isometry_check(args) -> Report:
    seed = _need_seed(args)
    kernel = _lattice_kernel(args, args.dims)
    rng = np.random.default_rng(seed)
    points = rng.random((args.points, args.dims))
    values = rng.standard_normal(args.points)
    levels = _int_range(args.truncation)
    passed, norms, norm_s = cylinder_isometry_check(kernel, points, values, levels, args.tol)
    report = Report(["truncation", "norm", "norm_finite"])
    for level, value in zip(levels, norms):
        report.add(level, value, norm_s)
    report.check(passed, "norm of the cylinder extension equals the finite-dimensional norm")
    return report


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_COMMANDS: dict[str, tuple[Callable, bool]] = {}


def _command(sub, name: str, func: Callable, help_text: str, aliases: Sequence[str] = ()):
    p = sub.add_parser(name, help=help_text, aliases=list(aliases))
    p.add_argument("--config", help="file with key = value lines under [section] headers")
    p.add_argument("--csv", help="CSV output path (default: standard output)")
    p.add_argument("--plot", help="write a log-log SVG chart to this path")
    p.add_argument("--seed", type=int, help="seed for randomized experiments")
    for key in [name, *aliases]:
        _COMMANDS[key] = (func, name)
    return p


def _space_args(p, flavor: str = "anchored", r: int = 1, weights: str = "poly(p=3)") -> None:
    p.add_argument("--flavor", default=flavor)
    p.add_argument("--r", type=int, default=r)
    p.add_argument("--weights", default=weights)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rkhs-qmc", description="Experiments on weighted tensor-product spaces and QMC rules.")
    parser.add_argument("--version", action="version", version=f"rkhs-qmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = _command(sub, "kernel-check", run_kernel_check, "closed-form kernels against the numerical oracle")
    p.add_argument("--flavor", default="anchored,anova,korobov,standard", help="comma list")
    p.add_argument("--r", default="1,2", help="comma list or range")
    p.add_argument("--gamma", default="0.5,2")
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--tol", type=float, default=1e-6)

    p = _command(sub, "embed-sweep", run_embed_sweep, "embedding norms between flavors for s = 1..s_max")
    p.add_argument("--flavor-i", default="anchored")
    p.add_argument("--flavor-ii", default="anova")
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--weights", default="poly(p=2, scale=0.5)")
    p.add_argument("--c0", type=float)
    p.add_argument("--s-max", type=int, default=4)
    p.add_argument("--resolution", type=int, default=64)

    p = _command(sub, "counterexample", run_counterexample, "norm products of the defective Standard pair")
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--weights", default="poly(p=2)")
    p.add_argument("--s-max", type=int, default=10)

    p = _command(sub, "cbc", run_cbc, "construct polynomial lattice rules", aliases=["cbc-rate"])
    p.add_argument("--base", type=int, default=2)
    p.add_argument("--m", default="10", help="single m or range such as 4:12")
    p.add_argument("--dims", type=int, default=4)
    _space_args(p)
    p.add_argument("--interlace", type=int, default=1)
    p.add_argument("--criterion", choices=["wce", "scrambled"], default="wce")
    p.add_argument("--out", help="write the generating vector (largest m) to this file")
    p.add_argument("--expect-slope", help="fail unless the fitted slope lies in LO:HI")

    p = _command(sub, "wce", run_wce, "worst-case error of a stored generating vector")
    p.add_argument("--vector", required=True)
    _space_args(p)

    p = _command(sub, "scramble-rate", run_scramble_rate, "RMSE of randomized lattice rules")
    p.add_argument("--base", type=int, default=2)
    p.add_argument("--m", default="4:12")
    p.add_argument("--dims", type=int, default=3)
    _space_args(p, flavor="anova", weights="poly(p=4)")
    p.add_argument("--interlace", type=int, default=0, help="0 picks r for scrambling, 1 for shifts")
    p.add_argument("--kind", choices=["owen", "shift"], default="owen")
    p.add_argument("--criterion", choices=["wce", "scrambled"], default="scrambled")
    p.add_argument("--replicates", type=int, default=32)
    p.add_argument("--bias-sigmas", type=float, default=3.0)
    p.add_argument("--expect-slope")

    p = _command(sub, "transfer", run_transfer, "rules built for one flavor measured in another")
    p.add_argument("--base", type=int, default=2)
    p.add_argument("--m", default="4:12")
    p.add_argument("--dims", type=int, default=4)
    _space_args(p)
    p.add_argument("--target-flavor", default="anova")
    p.add_argument("--c0", type=float)
    p.add_argument("--slope-tol", type=float, default=0.1)

    p = _command(sub, "idim", run_idim, "integration in infinitely many variables", aliases=["idim-rate"])
    p.add_argument("--algo", choices=["mdm", "ml", "fixed"], default="mdm")
    p.add_argument("--cost", choices=["fix", "nest", "unr"])
    p.add_argument("--growth", default="lin", help="lin, pow:SIGMA or exp:SIGMA")
    p.add_argument("--anchor", type=float, default=0.0)
    p.add_argument("--setting", choices=["det", "ran"], default="det")
    p.add_argument("--budget-grid", default="6:16:2", help="exponents of the base")
    p.add_argument("--base", type=int, default=2)
    _space_args(p)
    p.add_argument("--integrand-weights", help="amplitudes of the test integrand (default: --weights)")
    p.add_argument("--shape", choices=["balanced", "offset"], default="balanced")
    p.add_argument("--replicates", type=int, default=8)
    p.add_argument("--rate-hint", type=float, default=1.0)
    p.add_argument("--s-max", type=int, default=1024, help="largest truncation dimension for --algo fixed")
    p.add_argument("--max-m", type=int, default=13)
    p.add_argument("--expect-slope")

    p = _command(sub, "lambda-table", run_lambda_table, "theoretical exponent brackets")
    p.add_argument("--settings", default="det,ran")
    p.add_argument("--models", default="std,fix,nest,unr")
    p.add_argument("--r", default="1,2")
    p.add_argument("--decay", default="1.5,3,6")
    p.add_argument("--sigma", default="1")
    p.add_argument("--growth", choices=["power", "exp"], default="power")
    p.add_argument("--space", choices=["sobolev", "korobov"], default="sobolev")

    p = _command(sub, "l1-check", run_l1_check, "L1 norms of random kernel interpolants")
    _space_args(p, weights="poly(p=2)")
    p.add_argument("--dims", default="1:3")
    p.add_argument("--trials", type=int, default=16)
    p.add_argument("--samples", type=int, default=100_000)

    p = _command(sub, "isometry-check", run_isometry_check, "norms of cylinder extensions")
    _space_args(p, weights="poly(p=2)")
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--truncation", default="16,32,64")
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str], args: argparse.Namespace) -> argparse.Namespace:
    """Fill options that were not given on the command line from the config file."""
    if not args.config:
        return args
    cfg = configparser.ConfigParser(interpolation=None)
    try:
        with open(args.config) as fh:
            cfg.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    section = args.command
    canonical = _COMMANDS[section][1]
    if not cfg.has_section(section) and cfg.has_section(canonical):
        section = canonical
    if not cfg.has_section(section):
        raise UsageError(f"config has no [{args.command}] section")
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    extra: list[str] = []
    for key, value in cfg.items(section):
        flag = "--" + key.strip().replace("_", "-")
        if flag in given:
            continue
        extra += [flag, value]
    merged = [args.command, *extra, *[a for a in argv if a != args.command]]
    return parser.parse_args(merged)


def _resolved_params(args: argparse.Namespace) -> dict:
    skip = {"config", "csv", "plot", "out", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _apply_config(parser, argv, args)
        func, canonical = _COMMANDS[args.command]
        report = func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"rkhs-qmc: error: {exc}", file=sys.stderr)
        return 2
    except RkhsQmcError as exc:
        print(f"rkhs-qmc: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rkhs-qmc: error: {exc}", file=sys.stderr)
        return 2
    text = report.csv_text(canonical, config_hash(canonical, _resolved_params(args)))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.plot:
        if not report.series:
            print("rkhs-qmc: error: this experiment has no rate series to plot", file=sys.stderr)
            return 2
        xlabel = "cost" if canonical == "idim" else "n"
        with open(args.plot, "w") as fh:
            fh.write(svg_loglog(report.series, xlabel, "error"))
    for failure in report.failures:
        print(f"rkhs-qmc: assertion failed: {failure}", file=sys.stderr)
    return 1 if report.failures else 0


if __name__ == "__main__":
    sys.exit(main())
