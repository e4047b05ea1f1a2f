"""Ridge / minimum-norm interpolation fits and exact error oracles.

The estimator is f_hat(x) = k(x, X) (K + n*lambda*I)^-1 Y (lambda = 0 for
interpolation). Because both the kernel and the target are zonal, the bias
and variance of the fitted function are exact finite-dimensional
expressions in the n x n Gram matrix:

  variance = sigma^2 * tr(K^-1 M K^-1),  M_ij = Phi2(<x_i, x_j>),

with Phi2 the squared spectrum, and the degree-k component of the bias

  ||E f_hat - f*||^2 restricted to degree k
      = mu_k^2 N_k a^T P_k(G) a - 2 mu_k beta_k sqrt(N_k) a^T p_k(w)
        + beta_k^2,

where a = K^-1 f*(X) and p_k(w)_i = P_kd(<x_i, w>). Monte Carlo versions
of both quantities serve as independent cross-checks, never as truth.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvalsh, LinAlgError

from .errors import NumericalError, UsageError
from .seeding import SeedPath, SpherePoints, sample_sphere
from .spectrum import (Spectrum, assemble_kernel_matrix, eval_phi,
                       low_degree_kernel_matrix, squared_kernel, tail_sums)
from .target import Dataset, Target, eval_target
from .zonal import multiplicity

JITTER_LEVEL_FACTOR = 1e-10
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class FittedInterpolant:
    """An SPD-factorized kernel system with dual weights for Y and f*(X)."""

    dataset: Dataset
    spectrum: Spectrum
    lam: float
    K: np.ndarray
    cho: tuple                 # scipy (c, lower) factor of K + n*lam*I + jitter*I
    alpha: np.ndarray          # (K + n lam I)^-1 Y
    alpha_clean: np.ndarray    # (K + n lam I)^-1 f*(X)
    jitter_used: float

    @property
    def n(self) -> int:
        return self.dataset.n


def fit(dataset: Dataset, spectrum: Spectrum, lam: float = 0.0,
        jitter_policy: str = "forbid") -> FittedInterpolant:
    """Factorize K + n*lambda*I and solve for the dual weights.

    jitter_policy: "forbid" raises on factorization failure; "allow" retries
    once with jitter 1e-10 * Phi(1) on the diagonal and records it.
    """
    if lam < 0:
        raise UsageError(f"ridge level must be >= 0, got {lam}")
    if jitter_policy not in ("forbid", "allow"):
        raise UsageError(f"unknown jitter policy {jitter_policy!r}")
    if dataset.points.d != spectrum.d:
        raise UsageError("dataset and spectrum dimensions differ")

    n = dataset.n
    K = assemble_kernel_matrix(spectrum.spec, dataset.points)
    A = K + (n * lam) * np.eye(n)

    jitter = 0.0
    try:
        factor = cho_factor(A, lower=True)
    except LinAlgError:
        if jitter_policy == "forbid":
            lam_min = float(eigvalsh(A, subset_by_index=(0, 0))[0])
            raise NumericalError(
                f"kernel system not positive definite (lambda_min ~ {lam_min:.3e}) "
                "and jitter is forbidden"
            ) from None
        jitter = JITTER_LEVEL_FACTOR * float(eval_phi(spectrum.spec, 1.0))
        try:
            factor = cho_factor(A + jitter * np.eye(n), lower=True)
        except LinAlgError:
            lam_min = float(eigvalsh(A, subset_by_index=(0, 0))[0])
            raise NumericalError(
                f"factorization failed even with jitter {jitter:.1e} "
                f"(lambda_min ~ {lam_min:.3e})"
            ) from None

    A_eff = A if jitter == 0.0 else A + jitter * np.eye(n)

    def solve_refined(rhs: np.ndarray) -> np.ndarray:
        x = cho_solve(factor, rhs)
        # one iterative-refinement sweep keeps the 1e-10 residual contract
        r = rhs - A_eff @ x
        x = x + cho_solve(factor, r)
        scale = max(float(np.linalg.norm(rhs)), 1e-300)
        rel = float(np.linalg.norm(rhs - A_eff @ x)) / scale
        if rel > RESIDUAL_TOL:
            raise NumericalError(f"linear solve residual {rel:.3e} exceeds {RESIDUAL_TOL}")
        return x

    alpha = solve_refined(dataset.y)
    alpha_clean = solve_refined(dataset.clean)
    return FittedInterpolant(dataset=dataset, spectrum=spectrum, lam=float(lam),
                             K=K, cho=factor, alpha=alpha,
                             alpha_clean=alpha_clean, jitter_used=jitter)


def predict(model: FittedInterpolant, points: SpherePoints) -> np.ndarray:
    """k(x, X) alpha for each query point x."""
    if points.d != model.dataset.points.d:
        raise UsageError("query dimension does not match training dimension")
    kx = eval_phi(model.spectrum.spec, points.gram(model.dataset.points))
    return kx @ model.alpha


def exact_variance(model: FittedInterpolant) -> float:
    """sigma^2 * tr(K^-1 M K^-1) with M the squared-spectrum Gram matrix."""
    low, high = variance_split(model, l=-1)
    return low + high


def variance_split(model: FittedInterpolant, l: int) -> tuple[float, float]:
    """Exact variance split into degree <= l and degree > l contributions.

    The low part is sigma^2 tr(K^-1 Psi_{<=l} Sigma_{<=l}^2 Psi_{<=l}^T K^-1);
    the high part is the rest of the trace. l = -1 puts everything in 'high'.
    """
    sigma2 = model.dataset.sigma2
    if sigma2 == 0.0:
        return 0.0, 0.0
    sp = model.spectrum
    G = model.dataset.points.gram()
    M = assemble_kernel_matrix(squared_kernel(sp), model.dataset.points)

    def trace_quad(mat: np.ndarray) -> float:
        w = cho_solve(model.cho, mat)
        v = cho_solve(model.cho, w.T)
        return float(np.trace(v))

    if l < 0:
        return 0.0, sigma2 * trace_quad(M)
    coef = sp.mu**2 * sp.multiplicities
    M_low = np.zeros_like(M)
    for k, p_k in enumerate(sp.basis().iter_values(G)):
        if k > l:
            break
        M_low += coef[k] * p_k
    M_low = 0.5 * (M_low + M_low.T)
    low = sigma2 * trace_quad(M_low)
    high = sigma2 * trace_quad(M - M_low)
    return low, high


@dataclass(frozen=True)
class BiasReport:
    """Per-degree exact bias decomposition."""

    by_degree: np.ndarray      # squared L2 norms, degrees 0..k_max
    residual_bound: float      # bound on the dropped degrees > k_max
    l: int

    @property
    def B1(self) -> float:
        return float(self.by_degree[: self.l + 1].sum())

    @property
    def B2(self) -> float:
        return float(self.by_degree[self.l + 1:].sum())

    @property
    def total(self) -> float:
        return float(self.by_degree.sum())


def exact_bias_by_degree(model: FittedInterpolant, target: Target) -> BiasReport:
    """Exact squared bias, one nonnegative contribution per harmonic degree."""
    sp = model.spectrum
    if target.spectrum is not sp and (
            target.spectrum.d != sp.d or target.spectrum.k_max != sp.k_max
            or not np.array_equal(target.spectrum.mu, sp.mu)):
        raise UsageError("target was built on a different spectrum")
    G = model.dataset.points.gram()
    t_w = np.clip(model.dataset.points.coordinates @ target.axis, -1.0, 1.0)
    a = model.alpha_clean
    basis = sp.basis()

    beta = np.zeros(sp.k_max + 1)
    beta[: target.l + 2] = target.beta

    by_degree = np.zeros(sp.k_max + 1)
    gram_iter = basis.iter_values(G)
    axis_iter = basis.iter_values(t_w)
    for k in range(sp.k_max + 1):
        p_g = next(gram_iter)
        p_w = next(axis_iter)
        n_k = sp.multiplicities[k]
        mu_k = sp.mu[k]
        quad = float(a @ (p_g @ a))
        cross = float(a @ p_w)
        val = (mu_k * mu_k * n_k * quad
               - 2.0 * mu_k * beta[k] * math.sqrt(n_k) * cross
               + beta[k] * beta[k])
        if val < -1e-10:
            raise NumericalError(
                f"negative degree-{k} bias contribution {val:.3e}"
            )
        by_degree[k] = max(val, 0.0)

    # dropped degrees only overshoot: mu_k^2 N_k a^T P_k(G) a <= n ||a||^2 tail
    mu_edge = float(sp.mu[sp.k_max])
    residual = mu_edge * sp.trace_residual * model.n * float(a @ a)
    return BiasReport(by_degree=by_degree, residual_bound=residual, l=target.l)


@dataclass(frozen=True)
class McErrors:
    bias_sq: float
    bias_sq_se: float
    var: float
    var_se: float


def mc_errors(model: FittedInterpolant, target: Target, m_test: int,
              seed: SeedPath) -> McErrors:
    """Monte Carlo bias^2 and variance over fresh uniform test points."""
    if m_test < 100:
        raise UsageError(f"mc test points must be >= 100, got {m_test}")
    test = sample_sphere(target.d, m_test, seed)
    kx = eval_phi(model.spectrum.spec, test.gram(model.dataset.points))  # (m, n)

    bias_samples = (kx @ model.alpha_clean - eval_target(target, test)) ** 2
    bias_sq = float(bias_samples.mean())
    bias_se = float(bias_samples.std(ddof=1) / math.sqrt(m_test))

    sigma2 = model.dataset.sigma2
    if sigma2 == 0.0:
        return McErrors(bias_sq, bias_se, 0.0, 0.0)
    s = cho_solve(model.cho, kx.T)                    # K^-1 k(X, x), (n, m)
    var_samples = sigma2 * np.sum(s * s, axis=0)
    var = float(var_samples.mean())
    var_se = float(var_samples.std(ddof=1) / math.sqrt(m_test))
    return McErrors(bias_sq, bias_se, var, var_se)


@dataclass(frozen=True)
class ConcentrationReport:
    """Empirical concentration diagnostics for the random kernel matrix."""

    lambda_min_K: float
    delta1_opnorm: float       # ||K_{>l}/kappa1 - I||_op
    psi_gram_deviation: float  # max |lambda - 1| over top-B_l eigs of sum_k Gram_k / n
    B_l: int
    meaningful: bool           # n >= B_l, else the Psi-gram comparison is rank-deficient


def concentration_report(model: FittedInterpolant, l: int) -> ConcentrationReport:
    sp = model.spectrum
    if l >= sp.k_max:
        raise UsageError(f"l={l} must be below k_max={sp.k_max}")
    n = model.n
    G = model.dataset.points.gram()
    kappa1 = tail_sums(sp, l).kappa1

    lam_min_K = float(eigvalsh(model.K, subset_by_index=(0, 0))[0])

    K_high = model.K - low_degree_kernel_matrix(sp, l, G)
    ev = eigvalsh(K_high)
    delta1 = float(max(abs(ev[0] / kappa1 - 1.0), abs(ev[-1] / kappa1 - 1.0)))

    B_l = sum(multiplicity(sp.d, k) for k in range(l + 1))
    A = np.zeros_like(G)
    for k, p_k in enumerate(sp.basis().iter_values(G)):
        if k > l:
            break
        A += sp.multiplicities[k] * p_k
    A = 0.5 * (A + A.T) / n
    ev_a = eigvalsh(A)
    top = ev_a[-min(B_l, n):]
    psi_dev = float(np.max(np.abs(top - 1.0)))
    return ConcentrationReport(lambda_min_K=lam_min_K, delta1_opnorm=delta1,
                               psi_gram_deviation=psi_dev, B_l=B_l,
                               meaningful=n >= B_l)


@dataclass(frozen=True)
class ErrorReport:
    """Everything one experiment cell reports; maps 1:1 onto CSV columns."""

    bias_sq_exact: float
    var_exact: float
    var_low_degree: float
    var_high_degree: float
    B1: float
    B2: float
    bias_residual_bound: float
    bias_sq_mc: float | None
    bias_sq_mc_se: float | None
    var_mc: float | None
    var_mc_se: float | None
    mc_consistent: bool | None   # exact within 4 SE of MC (None if MC skipped)
    lambda_min_K: float
    delta1_opnorm: float
    psi_gram_deviation: float
    psi_gram_meaningful: bool
    kappa1: float
    kappa2: float
    jitter_used: float
    runtime_ms: float


def evaluate_cell(model: FittedInterpolant, target: Target,
                  mc_test_points: int = 2000,
                  mc_seed: SeedPath | None = None) -> ErrorReport:
    """Run all exact oracles and (optionally) the MC cross-check on one fit."""
    t0 = time.perf_counter()
    l = target.l
    ts = tail_sums(model.spectrum, l)
    var_low, var_high = variance_split(model, l)
    var_exact = var_low + var_high
    bias = exact_bias_by_degree(model, target)
    conc = concentration_report(model, l)

    bias_mc = bias_se = var_mc = var_se = None
    mc_ok = None
    if mc_test_points > 0:
        if mc_seed is None:
            raise UsageError("mc_seed is required when mc_test_points > 0")
        mc = mc_errors(model, target, mc_test_points, mc_seed)
        bias_mc, bias_se, var_mc, var_se = mc.bias_sq, mc.bias_sq_se, mc.var, mc.var_se
        bias_ok = abs(bias.total - bias_mc) <= 4.0 * bias_se + 1e-12
        var_ok = (model.dataset.sigma2 == 0.0
                  or abs(var_exact - var_mc) <= 4.0 * var_se + 1e-12)
        mc_ok = bool(bias_ok and var_ok)

    runtime_ms = (time.perf_counter() - t0) * 1e3
    return ErrorReport(
        bias_sq_exact=bias.total,
        var_exact=var_exact,
        var_low_degree=var_low,
        var_high_degree=var_high,
        B1=bias.B1,
        B2=bias.B2,
        bias_residual_bound=bias.residual_bound,
        bias_sq_mc=bias_mc,
        bias_sq_mc_se=bias_se,
        var_mc=var_mc,
        var_mc_se=var_se,
        mc_consistent=mc_ok,
        lambda_min_K=conc.lambda_min_K,
        delta1_opnorm=conc.delta1_opnorm,
        psi_gram_deviation=conc.psi_gram_deviation,
        psi_gram_meaningful=conc.meaningful,
        kappa1=ts.kappa1,
        kappa2=ts.kappa2,
        jitter_used=model.jitter_used,
        runtime_ms=runtime_ms,
    )
