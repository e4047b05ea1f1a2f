import math

import numpy as np
import pytest

from kilab import (NumericalError, SeedPath, SpherePoints, UsageError,
                   ZonalBasis, assemble_kernel_matrix, compute_spectrum,
                   eval_phi, kernel_by_id, kernel_from_coefficients,
                   low_degree_kernel_matrix, multiplicity, quadrature,
                   sample_sphere, squared_kernel, tail_sums)


def test_eval_phi_exp_kernel():
    spec = kernel_by_id("exp")
    assert eval_phi(spec, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert eval_phi(spec, 0.0) == pytest.approx(math.exp(-1), abs=1e-15)
    # closed form agrees with the coefficient series
    t = np.linspace(-1, 1, 7)
    series = sum(a * t**j for j, a in enumerate(spec.coefficients))
    assert np.max(np.abs(eval_phi(spec, t) - series)) < 1e-14


def test_eval_phi_geometric_kernel():
    spec = kernel_by_id("geometric")
    assert eval_phi(spec, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert eval_phi(spec, 0.0) == pytest.approx(0.5, abs=1e-15)


def test_eval_phi_constant_kernel():
    spec = kernel_from_coefficients([0.3], degenerate=True)
    t = np.linspace(-1, 1, 11)
    assert np.array_equal(eval_phi(spec, t), np.full(11, 0.3))


def test_kernel_spec_validation():
    with pytest.raises(UsageError):
        kernel_from_coefficients([0.5, -0.1])
    with pytest.raises(UsageError):
        kernel_from_coefficients([0.9, 0.2])  # sum > 1
    with pytest.raises(UsageError):
        kernel_from_coefficients([0.5, 0.0, 0.3])  # interior zero, not degenerate


def test_constant_kernel_spectrum():
    spec = kernel_from_coefficients([0.3], degenerate=True)
    sp = compute_spectrum(spec, 5)
    assert sp.mu[0] == pytest.approx(0.3, abs=1e-13)
    assert np.all(sp.mu[1:] == 0.0)


def test_linear_kernel_eigenvalue():
    # Phi(t) = t at d = 2: mu_1 = 1/(d+1), and mu_1 N(2,1) = 1 = Phi(1)
    spec = kernel_from_coefficients([0.0, 1.0], degenerate=True)
    sp = compute_spectrum(spec, 2)
    assert sp.mu[1] == pytest.approx(1 / 3, abs=1e-12)
    assert sp.mu[1] * multiplicity(2, 1) == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("kernel_id", ["exp", "geometric"])
@pytest.mark.parametrize("d", [4, 8, 16])
def test_mercer_reconstruction(kernel_id, d):
    spec = kernel_by_id(kernel_id)
    sp = compute_spectrum(spec, d, tol=1e-10)
    t = np.linspace(-1, 1, 201)
    coef = sp.mu * sp.multiplicities
    recon = np.zeros_like(t)
    for k, p_k in enumerate(sp.basis().iter_values(t)):
        recon += coef[k] * p_k
    assert np.max(np.abs(eval_phi(spec, t) - recon)) <= 2e-10
    assert abs(coef.sum() + sp.trace_residual - eval_phi(spec, 1.0)) < 1e-12


def test_eigenvalue_decay_matches_d_power():
    spec = kernel_by_id("exp")
    for k in range(4):
        scaled = [compute_spectrum(spec, d).mu[k] * d**k for d in (10, 20, 40)]
        assert max(scaled) / min(scaled) < 5.0


def test_monotone_eigenvalue_dominance():
    # mu_k for k >= p+1 is O(mu_p / d)
    spec = kernel_by_id("exp")
    for d in (8, 16, 32):
        sp = compute_spectrum(spec, d)
        for p in range(min(3, sp.k_max - 1) + 1):
            assert np.all(sp.mu[p + 1:] <= 5.0 * sp.mu[p] / d)


def test_tail_sums_whole_trace():
    sp = compute_spectrum(kernel_by_id("exp"), 16)
    ts = tail_sums(sp, -1)
    assert ts.kappa1 == pytest.approx(1.0, abs=1e-10)


def test_tail_sums_complement_identity():
    sp = compute_spectrum(kernel_by_id("exp"), 16)
    ts = tail_sums(sp, 1)
    expected = 1.0 - sp.mu[0] - sp.mu[1] * multiplicity(16, 1)
    assert ts.kappa1 == pytest.approx(expected, abs=1e-10)
    assert 0 < ts.kappa1 <= 1.0
    assert 0 < ts.kappa2 <= sp.mu[2] * ts.kappa1 + 1e-15


def test_kappa2_scaling_in_d():
    l = 1
    scaled = [tail_sums(compute_spectrum(kernel_by_id("exp"), d), l).kappa2 * d ** (l + 1)
              for d in (8, 16, 32)]
    assert max(scaled) / min(scaled) < 5.0


def test_tail_sums_rejects_l_at_kmax():
    sp = compute_spectrum(kernel_by_id("exp"), 8)
    with pytest.raises(UsageError):
        tail_sums(sp, sp.k_max)


def test_squared_kernel_at_one_equals_kappa2():
    sp = compute_spectrum(kernel_by_id("exp"), 8)
    sq = squared_kernel(sp)
    ts = tail_sums(sp, -1)
    assert sq.eval(1.0) == pytest.approx(ts.kappa2, rel=1e-12)


def test_squared_kernel_constant_case():
    sp = compute_spectrum(kernel_from_coefficients([0.3], degenerate=True), 5)
    sq = squared_kernel(sp)
    t = np.linspace(-1, 1, 9)
    assert np.max(np.abs(sq.eval(t) - 0.09)) < 1e-13


def test_squared_kernel_projections_are_mu_squared():
    # projecting the squared kernel onto degree k recovers mu_k^2
    d = 8
    sp = compute_spectrum(kernel_by_id("exp"), d)
    sq = squared_kernel(sp)
    rule = quadrature(d, 200)
    basis = ZonalBasis(d, 6)
    vals = sq.eval(rule.nodes)
    for k in range(7):
        proj = rule.integrate(vals * basis.eval(k, rule.nodes))
        assert proj == pytest.approx(sp.mu[k] ** 2, abs=1e-14)


def test_assemble_single_point():
    spec = kernel_by_id("geometric")
    pts = SpherePoints(2, np.array([[1.0, 0.0, 0.0]]))
    K = assemble_kernel_matrix(spec, pts)
    assert K.shape == (1, 1)
    assert K[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_assemble_antipodal_pair():
    spec = kernel_by_id("exp")
    x = np.array([1.0, 0.0, 0.0])
    pts = SpherePoints(2, np.stack([x, -x]))
    K = assemble_kernel_matrix(spec, pts)
    assert K[0, 1] == pytest.approx(math.exp(-2), abs=1e-15)


def test_kernel_matrix_min_eigenvalue_near_kappa1():
    # lambda_min(K) stays a constant fraction of the degree > l tail mass
    # when n ~ d^gamma with l = floor(gamma)
    for d, n, l in ((16, 64, 1), (24, 117, 1)):
        spec = kernel_by_id("exp")
        sp = compute_spectrum(spec, d)
        pts = sample_sphere(d, n, SeedPath(11, (d,)))
        K = assemble_kernel_matrix(spec, pts)
        ev_min = np.linalg.eigvalsh(K)[0]
        kappa1 = tail_sums(sp, l).kappa1
        assert ev_min >= 0.3 * kappa1


def test_low_degree_matrix_degree_zero():
    sp = compute_spectrum(kernel_by_id("exp"), 6)
    pts = sample_sphere(6, 10, SeedPath(12))
    out = low_degree_kernel_matrix(sp, 0, pts.gram())
    assert np.max(np.abs(out - sp.mu[0])) < 1e-14


def test_low_degree_matrix_telescopes_to_full():
    spec = kernel_by_id("exp")
    sp = compute_spectrum(spec, 6)
    pts = sample_sphere(6, 30, SeedPath(13))
    full = assemble_kernel_matrix(spec, pts)
    trunc = low_degree_kernel_matrix(sp, sp.k_max, pts.gram())
    assert np.max(np.abs(full - trunc)) <= sp.trace_residual + 1e-14


def test_low_degree_matrix_rank_bound():
    sp = compute_spectrum(kernel_by_id("exp"), 5)
    pts = sample_sphere(5, 80, SeedPath(14))
    l = 2
    out = low_degree_kernel_matrix(sp, l, pts.gram())
    b_l = sum(multiplicity(5, k) for k in range(l + 1))
    rank = int(np.sum(np.linalg.eigvalsh(out) > 1e-9))
    assert rank <= b_l


def test_negative_coefficient_kernel_raises():
    # a non-PSD zonal function must be rejected as materially negative
    def bad_phi(t):
        return 0.5 - 0.4 * t

    spec = kernel_from_coefficients([0.5, 0.4], degenerate=True)
    object.__setattr__(spec, "phi", bad_phi)
    with pytest.raises(NumericalError):
        compute_spectrum(spec, 4)
