"""Experiment commands: compute scaling tables and write CSV/JSON outputs.

Each command takes an ExperimentConfig, fans grid points out to a worker
pool, sorts the collected rows, and writes plot-ready files. All numbers are
formatted with %.12g so a fixed config yields byte-identical output.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import norm

from ..errors import ValidationError
from ..locc import (
    BlockShiftFamily,
    build_block_dilution,
    concentrate,
    run_protocol,
    verify_theorem_chain,
)
from ..sigsub import growth_fit, min_dilution_dimension
from ..spectrum import (
    BaseSpectrum,
    berry_esseen_residual,
    spectrum_stats,
    tensor_power_spectrum,
)
from .config import ExperimentConfig


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.12g" % float(value)


def _write_csv(path: str, header, rows) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _write_json(path: str, obj) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _pool_map(threads: int, fn, items):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _ensure_out(config: ExperimentConfig) -> str:
    os.makedirs(config.out, exist_ok=True)
    return config.out


def residual_grid(n: int, cells: int):
    """Standardized interval endpoints covering [-4, 4] sigma.

    Pairs a left endpoint with a nonnegative width so every cell is a valid
    interval; width 0 probes single atoms against a zero Gaussian mass.
    """
    lefts = np.linspace(-4.0, 4.0, cells)
    widths = np.linspace(0.0, 8.0, cells)
    return lefts, widths


def cmd_spectrum(config: ExperimentConfig) -> tuple:
    """Exact class spectra plus a Gaussian-surrogate residual table."""
    out = _ensure_out(config)
    base = BaseSpectrum(np.asarray(config.p, dtype=float))
    st = spectrum_stats(base)

    def work(n: int):
        spec = tensor_power_spectrum(base, n)
        lefts, widths = residual_grid(n, config.grid_cells)
        scale = st.alpha * math.sqrt(n)
        rows = []
        for x1 in lefts:
            for w in widths:
                a = x1 * scale - n * st.entropy
                b = (x1 + w) * scale - n * st.entropy
                res = berry_esseen_residual(base, n, a, b, spectrum=spec)
                rows.append((n, a, b, res.residual, res.bound, res.passed))
        return n, spec, rows

    written = []
    all_rows = []
    for n, spec, rows in _pool_map(config.threads, work, list(config.n_grid)):
        written.append(_write_json(os.path.join(out, f"spectrum_n{n}.json"), spec.to_json()))
        all_rows.extend(rows)
    all_rows.sort(key=lambda r: (r[0], r[1], r[2]))
    written.append(
        _write_csv(
            os.path.join(out, "residuals.csv"),
            ("n", "a", "b", "residual", "bound", "pass"),
            all_rows,
        )
    )
    return tuple(written)


def cmd_inefficiency(config: ExperimentConfig) -> tuple:
    """Dimension window for dilution at the reference accuracy, with the
    significant-subspace growth fit."""
    out = _ensure_out(config)
    base = BaseSpectrum(np.asarray(config.p, dtype=float))
    st = spectrum_stats(base)

    def work(n: int):
        spec = tensor_power_spectrum(base, n)
        md = min_dilution_dimension(base, n, config.eps_reference, spectrum=spec)
        ne = n * st.entropy
        return (
            n,
            ne,
            md.lower_log2,
            md.upper_log2,
            md.lower_log2 - ne,
            st.alpha * math.sqrt(n),
        )

    rows = sorted(_pool_map(config.threads, work, list(config.n_grid)))
    written = [
        _write_csv(
            os.path.join(out, "inefficiency.csv"),
            ("n", "nE", "lower_bits", "upper_bits", "excess_over_nE", "alpha_sqrt_n"),
            rows,
        )
    ]
    fit = growth_fit(base, config.delta, config.n_grid)
    fit_rows = [
        (n, ex, res, ok, mc)
        for n, ex, res, ok, mc in zip(
            fit.n_grid, fit.excess, fit.residuals, fit.floor_ok, fit.measured_coeff
        )
    ]
    written.append(
        _write_csv(
            os.path.join(out, "growth_fit.csv"),
            ("n", "excess_bits", "fit_residual", "floor_ok", "measured_coeff"),
            fit_rows,
        )
    )
    summary = {
        "delta": fit.delta,
        "floor_coeff": fit.floor_coeff,
        "fitted_sqrt_coeff": fit.fitted_coeff,
        "fitted_const": fit.fitted_const,
        "entropy": st.entropy,
        "alpha": st.alpha,
        "beta": st.beta,
        "gaussian_quantile_coeff": float(norm.ppf(fit.delta)) * st.alpha,
        "eps_reference": config.eps_reference,
    }
    written.append(_write_json(os.path.join(out, "growth_summary.json"), summary))
    return tuple(written)


def dilution_dim(proto) -> int:
    """Source dimension a dilution protocol acts on."""
    if isinstance(proto, BlockShiftFamily):
        return proto.d_prime
    return proto.dim_a


def find_min_budget(spec, n: int, epsilon: float):
    """Smallest message budget whose block dilution run meets epsilon.

    The run error is nonincreasing in the budget, so a binary search over
    [0, n log2(rank)] finds the threshold.
    """
    hi = max(1, int(math.ceil(n * math.log2(max(2, len(spec.base_probs))))))
    lo = 0
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        proto, _ = build_block_dilution(spec, mid, eps_target=epsilon)
        outcomes, report = run_protocol(proto, dilution_dim(proto), spec, n=n)
        if report.success and report.epsilon <= epsilon:
            best = (mid, outcomes, report)
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:
        raise ValidationError(f"no budget up to {hi} meets epsilon {epsilon} at n {n}")
    return best


def cmd_communication(config: ExperimentConfig) -> tuple:
    """Minimal-budget search per n, with a theorem-chain certificate each."""
    out = _ensure_out(config)
    cert_dir = os.path.join(out, "certificates")
    os.makedirs(cert_dir, exist_ok=True)
    base = BaseSpectrum(np.asarray(config.p, dtype=float))
    st = spectrum_stats(base)

    def work(n: int):
        spec = tensor_power_spectrum(base, n)
        budget, outcomes, report = find_min_budget(spec, n, config.epsilon)
        good = next(o for o in outcomes if o.good)
        cert = verify_theorem_chain(good, base, n, report, spectrum=spec)
        sweep = []
        for extra in config.budget_grid:
            proto, terr = build_block_dilution(spec, extra, eps_target=config.epsilon)
            _, rep = run_protocol(proto, dilution_dim(proto), spec, n=n)
            sweep.append((n, extra, terr, rep.epsilon, rep.c, rep.s))
        return n, budget, report, cert, sweep

    rows = []
    sweep_rows = []
    written = []
    for n, budget, report, cert, sweep in sorted(
        _pool_map(config.threads, work, list(config.n_grid))
    ):
        asn = st.alpha * math.sqrt(n)
        rows.append((n, budget, asn, budget / asn))
        sweep_rows.extend(sweep)
        doc = {
            "n": n,
            "c_star": budget,
            "epsilon_target": config.epsilon,
            "run": json.loads(report.to_json()),
            "certificate": json.loads(cert.to_json()),
            "consistent": cert.consistent,
        }
        written.append(_write_json(os.path.join(cert_dir, f"cert_n{n}.json"), doc))
    written.append(
        _write_csv(
            os.path.join(out, "communication.csv"),
            ("n", "c_star", "alpha_sqrt_n", "ratio"),
            rows,
        )
    )
    if sweep_rows:
        sweep_rows.sort(key=lambda r: (r[0], r[1]))
        written.append(
            _write_csv(
                os.path.join(out, "communication_budgets.csv"),
                ("n", "budget", "target_error", "run_epsilon", "c", "s"),
                sweep_rows,
            )
        )
    return tuple(written)


def cmd_concentration(config: ExperimentConfig) -> tuple:
    """Expected distillation yield per n and its shortfall against nE."""
    out = _ensure_out(config)
    base = BaseSpectrum(np.asarray(config.p, dtype=float))
    st = spectrum_stats(base)

    def work(n: int):
        spec = tensor_power_spectrum(base, n)
        res = concentrate(base, n, spectrum=spec)
        ne = n * st.entropy
        return (n, ne, res.expected_yield, res.deficit, res.deficit / math.sqrt(n))

    rows = sorted(_pool_map(config.threads, work, list(config.n_grid)))
    path = _write_csv(
        os.path.join(out, "concentration.csv"),
        ("n", "nE", "expected_yield", "deficit", "deficit_over_sqrt_n"),
        rows,
    )
    return (path,)
