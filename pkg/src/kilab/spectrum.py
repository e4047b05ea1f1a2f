"""Inner-product kernels Phi and their spherical-harmonic spectra.

A kernel k(x, x') = Phi(<x, x'>) with Phi(t) = sum_j a_j t^j, a_j >= 0 and
sum_j a_j <= 1, has Mercer decomposition

    Phi(t) = sum_k mu_k N(d,k) P_kd(t),

so the per-degree eigenvalues are the projections

    mu_k = E_rho[Phi(t) P_kd(t)],

computed here by Gauss-Jacobi quadrature. Tail sums kappa1/kappa2 over
degrees > l, the elementwise-squared spectrum Phi2 (entries of
Psi Sigma^2 Psi^T) and kernel-matrix assembly all live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, UsageError
from .seeding import SpherePoints
from .zonal import ZonalBasis, multiplicity, quadrature

K_MAX_CAP = 64
NEGATIVE_MU_CLAMP = 1e-13
ORTHO_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """An inner-product kernel Phi: nonnegative Taylor coefficients, Phi(1) <= 1.

    `phi` is an optional closed-form evaluator; without it the truncated
    series is evaluated by Horner's rule. `degenerate` marks test kernels
    that are allowed to have zero coefficients.
    """

    family_id: str
    coefficients: tuple[float, ...]
    phi: Callable[[np.ndarray], np.ndarray] | None = None
    degenerate: bool = False

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=float)
        if a.size == 0:
            raise UsageError("kernel needs at least one coefficient")
        if np.any(a < 0):
            raise UsageError("kernel coefficients must be nonnegative")
        if not self.degenerate and np.any(a[:-1] == 0):
            raise UsageError(
                "zero coefficients only allowed on degenerate test kernels"
            )
        if a.sum() > 1 + 1e-12 and self.phi is None:
            raise UsageError("coefficient sum exceeds 1 (violates Phi(1) <= 1)")


def eval_phi(spec: KernelSpec, t) -> np.ndarray:
    """Phi(t) for |t| <= 1, closed form when available else Horner."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > 1 + 1e-12):
        raise UsageError("kernel argument outside [-1, 1]")
    t_arr = np.clip(t_arr, -1.0, 1.0)
    if spec.phi is not None:
        out = spec.phi(t_arr)
    else:
        out = np.zeros_like(t_arr)
        for a_j in reversed(spec.coefficients):
            out = out * t_arr + a_j
    return out if np.ndim(t) else float(out)


def _exp_coefficients(n_terms: int = 40) -> tuple[float, ...]:
    return tuple(math.exp(-1) / math.factorial(j) for j in range(n_terms))


def _geometric_coefficients(n_terms: int = 80) -> tuple[float, ...]:
    return tuple(0.5 ** (j + 1) for j in range(n_terms))


def _phi_exp(t):
    return np.exp(t - 1.0)


def _phi_geometric(t):
    return 1.0 / (2.0 - t)


# module-level evaluators keep KernelSpec (and Spectrum) picklable
BUILTIN_KERNELS = {
    "exp": lambda: KernelSpec(
        family_id="exp", coefficients=_exp_coefficients(), phi=_phi_exp,
    ),
    "geometric": lambda: KernelSpec(
        family_id="geometric", coefficients=_geometric_coefficients(),
        phi=_phi_geometric,
    ),
}


def kernel_by_id(kernel_id: str) -> KernelSpec:
    try:
        return BUILTIN_KERNELS[kernel_id]()
    except KeyError:
        raise UsageError(
            f"unknown kernel id {kernel_id!r}; built-ins: {sorted(BUILTIN_KERNELS)}"
        ) from None


def kernel_from_coefficients(coeffs: Sequence[float], family_id: str = "custom",
                             degenerate: bool = False) -> KernelSpec:
    return KernelSpec(family_id=family_id, coefficients=tuple(float(c) for c in coeffs),
                      degenerate=degenerate)


@dataclass(frozen=True)
class Spectrum:
    """Per-degree eigenvalues of an inner-product kernel at a fixed d."""

    spec: KernelSpec
    d: int
    k_max: int
    mu: np.ndarray                 # shape (k_max+1,)
    multiplicities: np.ndarray     # shape (k_max+1,), float copies of exact ints
    trace_residual: float          # Phi(1) - sum_k mu_k N(d,k) >= 0

    @property
    def phi_one(self) -> float:
        return float(self.mu @ self.multiplicities + self.trace_residual)

    def basis(self) -> ZonalBasis:
        return ZonalBasis(self.d, self.k_max)


@dataclass(frozen=True)
class TailSums:
    """kappa1 = sum_{k>l} mu_k N(d,k), kappa2 likewise with mu_k^2."""

    l: int
    kappa1: float
    kappa2: float
    kappa1_tail_bound: float   # unaccounted mass beyond k_max
    kappa2_tail_bound: float


def compute_spectrum(spec: KernelSpec, d: int, tol: float = 1e-10) -> Spectrum:
    """Eigenvalues mu_k by quadrature, truncated once the trace residual < tol."""
    if tol <= 0:
        raise UsageError(f"trace tolerance must be positive, got {tol}")
    phi1 = float(eval_phi(spec, 1.0))

    basis = ZonalBasis(d, K_MAX_CAP)
    mults = np.array([multiplicity(d, k) for k in range(K_MAX_CAP + 1)], dtype=float)

    m_quad = 8 * (K_MAX_CAP + 1)
    for _ in range(5):
        rule = quadrature(d, m_quad)
        p_stack = basis.eval_all(rule.nodes)          # (K+1, m)
        # orthonormality residual: N(d,k) E[P_k^2] must be 1
        second = (p_stack * p_stack) @ rule.weights
        ortho_residual = float(np.max(np.abs(mults * second - 1.0)))
        if ortho_residual < ORTHO_RESIDUAL_TOL:
            break
        m_quad *= 2
    else:
        raise NumericalError(
            f"quadrature orthonormality residual {ortho_residual:.3e} did not "
            f"stabilize below {ORTHO_RESIDUAL_TOL} (d={d})"
        )

    phi_vals = eval_phi(spec, rule.nodes)
    mu = p_stack @ (rule.weights * phi_vals)

    bad = mu < -NEGATIVE_MU_CLAMP
    if np.any(bad):
        k_bad = int(np.argmax(bad))
        raise NumericalError(
            f"materially negative eigenvalue mu_{k_bad}={mu[k_bad]:.3e} "
            f"(kernel {spec.family_id!r} violates the positive-coefficient model)"
        )
    mu = np.maximum(mu, 0.0)

    cum_trace = np.cumsum(mu * mults)
    residuals = phi1 - cum_trace
    ok = np.nonzero(residuals < tol)[0]
    if ok.size == 0:
        raise NumericalError(
            f"k_max cap {K_MAX_CAP} binds: trace residual {residuals[-1]:.3e} >= "
            f"tol {tol:.1e} for kernel {spec.family_id!r} at d={d}"
        )
    k_max = int(ok[0])
    trace_residual = float(max(residuals[k_max], 0.0))
    return Spectrum(
        spec=spec, d=d, k_max=k_max,
        mu=mu[: k_max + 1].copy(),
        multiplicities=mults[: k_max + 1].copy(),
        trace_residual=trace_residual,
    )


def tail_sums(spectrum: Spectrum, l: int) -> TailSums:
    """Multiplicity-weighted tail sums over degrees > l (l = -1 gives the trace)."""
    if l >= spectrum.k_max:
        raise UsageError(
            f"tail degree l={l} >= k_max={spectrum.k_max}; recompute with smaller tol"
        )
    lo = l + 1
    w = spectrum.mu[lo:] * spectrum.multiplicities[lo:]
    kappa1 = float(w.sum() + spectrum.trace_residual)
    kappa2 = float((spectrum.mu[lo:] * w).sum())
    mu_edge = float(spectrum.mu[spectrum.k_max])
    return TailSums(
        l=l,
        kappa1=kappa1,
        kappa2=kappa2,
        kappa1_tail_bound=spectrum.trace_residual,
        kappa2_tail_bound=mu_edge * spectrum.trace_residual,
    )


@dataclass(frozen=True)
class SquaredKernel:
    """Evaluator for Phi2(t) = sum_k mu_k^2 N(d,k) P_kd(t).

    These are the entries of Psi Sigma^2 Psi^T, the matrix inside the exact
    variance trace. tail_bound bounds the dropped degrees > k_max.
    """

    spectrum: Spectrum
    tail_bound: float

    def eval(self, t) -> np.ndarray:
        sp = self.spectrum
        basis = sp.basis()
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros_like(t_arr)
        coef = sp.mu * sp.mu * sp.multiplicities
        for k, p_k in enumerate(basis.iter_values(t_arr)):
            out += coef[k] * p_k
        return out if np.ndim(t) else float(out)


def squared_kernel(spectrum: Spectrum) -> SquaredKernel:
    mu_edge = float(spectrum.mu[spectrum.k_max])
    return SquaredKernel(spectrum=spectrum, tail_bound=mu_edge * spectrum.trace_residual)


def assemble_kernel_matrix(evaluator, points: SpherePoints) -> np.ndarray:
    """K_ij = Phi(<x_i, x_j>) for a KernelSpec or SquaredKernel evaluator."""
    G = points.gram()
    if isinstance(evaluator, KernelSpec):
        K = eval_phi(evaluator, G)
        diag = float(eval_phi(evaluator, 1.0))
    elif isinstance(evaluator, SquaredKernel):
        K = evaluator.eval(G)
        diag = float(evaluator.eval(1.0))
    else:
        raise UsageError(f"cannot assemble kernel matrix from {type(evaluator)!r}")
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, diag)
    return K


def low_degree_kernel_matrix(spectrum: Spectrum, l: int, G: np.ndarray) -> np.ndarray:
    """K_{<=l}: entries sum_{k<=l} mu_k N(d,k) P_kd(G_ij)."""
    if l > spectrum.k_max:
        raise UsageError(f"l={l} exceeds k_max={spectrum.k_max}")
    if l < 0:
        return np.zeros_like(np.asarray(G, dtype=float))
    basis = spectrum.basis()
    G = np.asarray(G, dtype=float)
    out = np.zeros_like(G)
    coef = spectrum.mu * spectrum.multiplicities
    for k, p_k in enumerate(basis.iter_values(G)):
        if k > l:
            break
        out += coef[k] * p_k
    return 0.5 * (out + out.T)
