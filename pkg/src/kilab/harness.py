"""Experiment orchestration: configs, cell sweeps, CSV output, slope analysis.

A sweep enumerates (d, replicate) cells for one (kernel, gamma, s) setting
with n = round(c * d^gamma). Every cell derives its own seed substreams
from (master_seed, d, replicate, purpose), so execution order and worker
count never change the output.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import KilabError, NumericalError, UsageError
from .estimator import ErrorReport, evaluate_cell, fit
from .rates import (PhasePoint, bias_exponent, classify, fit_slope,
                    total_exponent, var_exponent)
from .seeding import SeedPath, TAG_AXIS, TAG_MC
from .spectrum import (KernelSpec, Spectrum, compute_spectrum,
                       kernel_by_id, kernel_from_coefficients)
from .target import build_target, make_dataset

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version", "kernel", "gamma", "s", "sigma2", "lambda",
    "d", "n", "replicate", "seed_path",
    "l", "beta_norm_sq", "hs_norm_sq", "c0",
    "bias_sq_exact", "var_exact", "var_low_degree", "var_high_degree",
    "B1", "B2", "bias_residual_bound",
    "bias_sq_mc", "bias_sq_mc_se", "var_mc", "var_mc_se", "mc_consistent",
    "lambda_min_K", "delta1_opnorm", "psi_gram_deviation", "psi_gram_meaningful",
    "kappa1", "kappa2", "jitter_used", "runtime_ms", "error",
]

SEED_ENV_VAR = "KILAB_SEED"


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a kernel, a (gamma, s) setting, a d-list and replicates."""

    gamma: float
    s: float
    d_list: tuple[int, ...]
    kernel: str = "exp"
    coefficients: tuple[float, ...] | None = None
    sigma2: float = 1.0
    n_coefficient: float = 1.0
    replicates: int = 1
    lam: float = 0.0
    master_seed: int = 20240901
    mc_test_points: int = 2000
    trace_tol: float = 1e-10
    jitter_policy: str = "forbid"
    n_cap: int = 8000

    def __post_init__(self):
        if self.gamma <= 0:
            raise UsageError(f"gamma must be positive, got {self.gamma}")
        if self.s < 0:
            raise UsageError(f"s must be >= 0, got {self.s}")
        if self.replicates < 1:
            raise UsageError(f"replicates must be >= 1, got {self.replicates}")
        if not self.d_list:
            raise UsageError("d_list must be non-empty")
        if any(d < 2 for d in self.d_list):
            raise UsageError("every d must be >= 2")
        if list(self.d_list) != sorted(set(self.d_list)):
            raise UsageError("d_list must be strictly increasing")
        for d in self.d_list:
            n = self.n_for(d)
            if n < 4:
                raise UsageError(f"d={d} gives n={n} < 4")
            if n > self.n_cap:
                raise UsageError(f"d={d} gives n={n} above the cap {self.n_cap}")

    def n_for(self, d: int) -> int:
        return int(round(self.n_coefficient * d ** self.gamma))

    def kernel_spec(self) -> KernelSpec:
        if self.coefficients is not None:
            return kernel_from_coefficients(self.coefficients)
        return kernel_by_id(self.kernel)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "d_list" in data:
            data["d_list"] = tuple(int(d) for d in data["d_list"])
        if data.get("coefficients") is not None:
            data["coefficients"] = tuple(float(c) for c in data["coefficients"])
        if SEED_ENV_VAR in os.environ:
            data["master_seed"] = int(os.environ[SEED_ENV_VAR])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise UsageError(f"bad config: {exc}") from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d_list"] = list(out["d_list"])
        if out["coefficients"] is not None:
            out["coefficients"] = list(out["coefficients"])
        return out

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def run_cell(config: ExperimentConfig, spectrum: Spectrum, d: int,
             replicate: int) -> dict:
    """Compute one CSV row; failures are captured as error rows."""
    n = config.n_for(d)
    cell_seed = SeedPath(config.master_seed, (d, replicate))
    row = {
        "schema_version": SCHEMA_VERSION,
        "kernel": spectrum.spec.family_id,
        "gamma": config.gamma, "s": config.s, "sigma2": config.sigma2,
        "lambda": config.lam, "d": d, "n": n, "replicate": replicate,
        "seed_path": f"{config.master_seed}:{d}:{replicate}",
        "error": "",
    }
    t0 = time.perf_counter()
    try:
        target = build_target(spectrum, config.s, config.gamma,
                              cell_seed.child(TAG_AXIS))
        dataset = make_dataset(target, n, config.sigma2, cell_seed)
        model = fit(dataset, spectrum, lam=config.lam,
                    jitter_policy=config.jitter_policy)
        report = evaluate_cell(model, target,
                               mc_test_points=config.mc_test_points,
                               mc_seed=cell_seed.child(TAG_MC))
    except KilabError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update({
        "l": target.l, "beta_norm_sq": target.l2_norm_sq,
        "hs_norm_sq": target.hs_norm_sq, "c0": target.c0,
    })
    for name in ("bias_sq_exact", "var_exact", "var_low_degree",
                 "var_high_degree", "B1", "B2", "bias_residual_bound",
                 "bias_sq_mc", "bias_sq_mc_se", "var_mc", "var_mc_se",
                 "mc_consistent", "lambda_min_K", "delta1_opnorm",
                 "psi_gram_deviation", "psi_gram_meaningful",
                 "kappa1", "kappa2", "jitter_used"):
        row[name] = getattr(report, name)
    row["runtime_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def _cell_worker(args) -> dict:
    config_dict, spectrum, d, replicate = args
    config = ExperimentConfig.from_dict(config_dict)
    return run_cell(config, spectrum, d, replicate)


def run_sweep(config: ExperimentConfig, workers: int = 1) -> Iterator[dict]:
    """Yield one row per (d, replicate) cell, in deterministic cell order."""
    spec = config.kernel_spec()
    spectra = {d: compute_spectrum(spec, d, config.trace_tol)
               for d in config.d_list}
    cells = [(d, r) for d in config.d_list for r in range(config.replicates)]
    if workers <= 1:
        for d, r in cells:
            yield run_cell(config, spectra[d], d, r)
        return
    cfg = config.to_dict()
    args = [(cfg, spectra[d], d, r) for d, r in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_cell_worker, args, chunksize=4)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows: Iterator[dict], path: str) -> tuple[int, int]:
    """Stream rows to CSV, flushing incrementally; returns (rows, failures)."""
    total = failed = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        f.flush()
        for row in rows:
            writer.writerow([_format_cell(row.get(c)) for c in CSV_COLUMNS])
            f.flush()
            total += 1
            if row.get("error"):
                failed += 1
    return total, failed


def read_rows(path: str) -> list[dict]:
    with open(path) as f:
        return list(csv.DictReader(f))


def analyze(results_path: str, quantity: str, gamma: float, s: float,
            tolerance: float = 0.25) -> dict:
    """Fit the log-log slope of a result column against the theory exponent."""
    if quantity not in ("var_exact", "bias_sq_exact", "total"):
        raise UsageError(f"unknown quantity {quantity!r}")
    rows = [r for r in read_rows(results_path) if not r.get("error")]
    if not rows:
        raise UsageError(f"no successful result rows in {results_path}")
    pairs = []
    for r in rows:
        d = float(r["d"])
        if quantity == "total":
            v = float(r["bias_sq_exact"]) + float(r["var_exact"])
        else:
            v = float(r[quantity])
        pairs.append((d, v))
    sf = fit_slope(pairs)
    if quantity == "var_exact":
        theory = var_exponent(gamma)
    elif quantity == "bias_sq_exact":
        theory = bias_exponent(s, gamma)
        if theory is None:
            raise UsageError("bias exponent is undefined at integer gamma")
    else:
        theory = total_exponent(s, gamma)
    passed = abs(sf.slope - theory) <= tolerance
    return {
        "quantity": quantity, "gamma": gamma, "s": s,
        "slope": sf.slope, "stderr": sf.stderr, "r2": sf.r2,
        "intercept": sf.intercept,
        "d_values": list(sf.d_values),
        "theory_exponent": theory, "tolerance": tolerance,
        "passed": bool(passed),
    }


def _parse_range(text: str) -> np.ndarray:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"range must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise UsageError(f"bad range {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def phase_grid(gamma_range: str, s_range: str) -> Iterator[dict]:
    """Classified (gamma, s) grid rows; integer-gamma lines always included."""
    gammas = [g for g in _parse_range(gamma_range) if g > 0]
    if not gammas:
        raise UsageError("gamma range contains no positive values")
    s_values = [s for s in _parse_range(s_range) if s >= 0]
    if not s_values:
        raise UsageError("s range contains no admissible values")
    extra = [float(g) for g in range(1, int(math.floor(max(gammas))) + 1)
             if not any(abs(g - x) < 1e-12 for x in gammas)]
    for g in sorted(list(gammas) + extra):
        for s in s_values:
            p = classify(s, g)
            yield {
                "gamma": p.gamma, "s": p.s, "l": p.l,
                "Gamma_gamma": "inf" if math.isinf(p.Gamma_gamma) else p.Gamma_gamma,
                "var_exp": p.var_exponent,
                "bias_exp": "" if p.bias_exponent is None else p.bias_exponent,
                "total_exp": p.total_exponent,
                "minimax_exp": "" if p.minimax_exponent is None else p.minimax_exponent,
                "classification": p.classification,
            }


PHASE_COLUMNS = ["gamma", "s", "l", "Gamma_gamma", "var_exp", "bias_exp",
                 "total_exp", "minimax_exp", "classification"]


def write_phase_grid(rows: Iterator[dict], path: str) -> int:
    count = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PHASE_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in PHASE_COLUMNS])
            count += 1
    return count
