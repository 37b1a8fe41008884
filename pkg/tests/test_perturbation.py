import itertools
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from optpredict.gaussian import build_prior, condition
from optpredict.kernels import KernelSet, fourier_kernels, gaussian_bump_kernels
from optpredict.lattice import Grid, laplacian
from optpredict.opsolver import compute_c, op_rhs_fourier
from optpredict.partition import Partition, compute_b
from optpredict.perturbation import (DegenerateSeriesError, conditional_expectation_order0,
                                     conditional_expectation_order1, h1_conditional_mean,
                                     series_terms, site_expectation_order0, site_expectation_order1)

from conftest import REFERENCE_CENTERS, random_field


def constrained_q_quadrature(grid, m0, T, gvec, Vq, quartic, counterterm, npts):
    """Weights for the q-marginal of exp(-(H0 + H1)/T) on the plane g.q = Vq.

    ``p`` and ``q`` decouple in both H0 and H1, so the q-marginal is all that
    a q-observable needs.
    """
    prior = build_prior(grid, m0, T)
    B = scipy.linalg.null_space(gvec[None, :])
    K = prior.K / T
    q0 = gvec * Vq / (gvec @ gvec)
    A = B.T @ K @ B
    e, W = np.linalg.eigh(A)
    s0 = -np.linalg.solve(A, B.T @ K @ q0)
    x, w = np.polynomial.hermite_e.hermegauss(npts)
    d = B.shape[1]
    X = np.array(list(itertools.product(x, repeat=d)))
    Wt = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    q = q0 + (s0 + (X / np.sqrt(e)) @ W.T) @ B.T
    H1 = 0.25 * grid.h * np.sum(quartic * q**4 - 2 * counterterm * q**2, axis=1)
    wt = Wt * np.exp(-H1 / T)
    return q, wt / wt.sum()


@pytest.fixture(scope="module")
def four_site():
    g = Grid(4)
    k = gaussian_bump_kernels(g, [1.0], 0.8)
    V = np.array([0.7 + 0.3j])
    cg = condition(build_prior(g, 1.055, 1.0), k, V)
    return g, k, V, cg


def test_zero_data_odd_moments_vanish():
    g = Grid(16)
    cg = condition(build_prior(g, 1.055), gaussian_bump_kernels(g, REFERENCE_CENTERS, math.pi))
    assert np.all(site_expectation_order0(cg, "p", 3) == 0)
    assert np.all(conditional_expectation_order0(cg, "q3") == 0)


def test_order0_matches_gaussian_quadrature(four_site):
    g, k, V, cg = four_site
    q, w = constrained_q_quadrature(g, 1.055, 1.0, k.G_real[0], V[0].real, 0.0, 0.0, 8)
    exact = k.G_real[0] @ (w @ q**3)
    assert abs(conditional_expectation_order0(cg, "q3")[0] - exact) < 1e-8
    lap = k.G_real[0] @ laplacian(w @ q)
    assert abs(conditional_expectation_order0(cg, "lap_q")[0] - lap) < 1e-8


def test_order1_matches_weakly_coupled_quadrature(four_site):
    g, k, V, cg = four_site
    lam = 0.01
    part = Partition(1.055, 0.0, g, 1.0, quartic=lam, counterterm=0.0)
    q, w = constrained_q_quadrature(g, 1.055, 1.0, k.G_real[0], V[0].real, lam, 0.0, 30)
    exact = k.G_real[0] @ (w @ q**3)
    assert abs(conditional_expectation_order1(cg, part, "q3")[0] - exact) < 1e-4


def test_order1_error_is_second_order(four_site):
    g, k, V, cg = four_site
    errs = []
    for lam in (0.02, 0.01):
        part = Partition(1.055, 0.0, g, 1.0, quartic=lam, counterterm=0.0)
        q, w = constrained_q_quadrature(g, 1.055, 1.0, k.G_real[0], V[0].real, lam, 0.0, 30)
        errs.append(abs(conditional_expectation_order1(cg, part, "q3")[0] - k.G_real[0] @ (w @ q**3)))
    assert 3 < errs[0] / errs[1] < 5


def test_order1_improves_on_order0_at_physical_coupling(four_site):
    g, k, V, cg = four_site
    part = Partition(1.055, compute_b(1.055, g).b, g)
    q, w = constrained_q_quadrature(g, 1.055, 1.0, k.G_real[0], V[0].real, 1.0, 1.055**2, 40)
    exact = k.G_real[0] @ (w @ q**3)
    e0 = abs(conditional_expectation_order0(cg, "q3")[0] - exact)
    e1 = abs(conditional_expectation_order1(cg, part, "q3")[0] - exact)
    assert e1 < e0


def test_constant_observable():
    g = Grid(8)
    cg = condition(build_prior(g, 1.0), gaussian_bump_kernels(g, [1.0], 0.6), np.array([0.5]))
    part = Partition(1.0, 0.3, g)
    assert conditional_expectation_order1(cg, part, "one") == pytest.approx(1.0)
    assert conditional_expectation_order0(cg, "one") == 1.0


def test_unconditioned_first_moment_vanishes():
    g = Grid(32)
    part = Partition(1.055, compute_b(1.055, g).b, g)
    cg = condition(part.prior(), KernelSet(g, np.zeros((0, 32)), "none"))
    assert abs(h1_conditional_mean(cg, part)) < 1e-8


def test_orders_agree_without_perturbation(rng):
    g = Grid(16)
    cg = condition(build_prior(g, 1.2), gaussian_bump_kernels(g, REFERENCE_CENTERS, math.pi),
                   random_field(rng, 2))
    part = Partition(1.2, 0.0, g, quartic=0.0, counterterm=0.0)
    for obs in ("q3", "p3", "lap_q", "lap_p"):
        assert np.allclose(conditional_expectation_order1(cg, part, obs),
                           conditional_expectation_order0(cg, obs), rtol=0, atol=1e-14)


def test_order0_fourier_matches_effective_equation(rng):
    g = Grid(32)
    k = fourier_kernels(g, 4)
    pr = build_prior(g, 1.055)
    for _ in range(3):
        V = random_field(rng, 4, 0.5)
        cg = condition(pr, k, V)
        nl = conditional_expectation_order0(cg, "q3") + 1j * conditional_expectation_order0(cg, "p3")
        lap = conditional_expectation_order0(cg, "lap_q") + 1j * conditional_expectation_order0(cg, "lap_p")
        rhs = -1j * (-lap + nl)
        assert np.max(np.abs(rhs - op_rhs_fourier(V, pr, k, compute_c(pr, k)))) < 1e-10


@given(st.integers(0, 1000))
def test_order0_cubic_derivative(seed):
    rng = np.random.default_rng(seed)
    g = Grid(16)
    k = gaussian_bump_kernels(g, REFERENCE_CENTERS, math.pi)
    base = condition(build_prior(g, 1.055), k)
    V = rng.standard_normal(2) * 0.5
    dV = rng.standard_normal(2)
    eps = 1e-5
    f = lambda v: conditional_expectation_order0(base.with_data(v + 0j), "q3")
    fd = (f(V + eps * dV) - f(V - eps * dV)) / (2 * eps)
    cg = base.with_data(V + 0j)
    dmean = (base.Q @ dV).real
    analytic = k.G_real @ (3 * (cg.mean_q**2 + cg.site_variance) * dmean)
    assert np.max(np.abs(fd - analytic)) < 1e-6


def test_correction_shrinks_with_temperature():
    g = Grid(16)
    k = gaussian_bump_kernels(g, REFERENCE_CENTERS, math.pi)
    V = np.array([0.22 - 0.12j, 0.12 - 0.03j])
    ratios = []
    for T in (1.0, 0.5, 0.25):
        cg = condition(build_prior(g, 1.055, T), k, V)
        part = Partition(1.055, compute_b(1.055, g, T).b, g, T)
        o0 = conditional_expectation_order0(cg, "q3")
        o1 = conditional_expectation_order1(cg, part, "q3")
        ratios.append(np.abs(o1 - o0).max() / np.abs(o0).max())
    assert ratios[0] > ratios[1] > ratios[2]


def test_degenerate_denominator():
    g = Grid(8)
    cg = condition(build_prior(g, 1.0), gaussian_bump_kernels(g, [1.0], 0.6), np.array([0.5]))
    part0 = Partition(1.0, 0.0, g)
    b = (h1_conditional_mean(cg, part0) - 1.0) / math.pi
    with pytest.raises(DegenerateSeriesError):
        conditional_expectation_order1(cg, Partition(1.0, b, g), "q3")


def test_unknown_observable():
    g = Grid(8)
    cg = condition(build_prior(g, 1.0), gaussian_bump_kernels(g, [1.0], 0.6))
    with pytest.raises(ValueError):
        conditional_expectation_order0(cg, "q5")


def test_series_terms_shape(four_site):
    g, k, V, cg = four_site
    part = Partition(1.055, -0.38, g)
    t0, t1 = series_terms(cg, part, "q", 3)
    assert t0.order == 0 and t0.denominator_factor == 1.0
    recon = (t0.numerator + t1.numerator) / (1 + t1.denominator_factor)
    assert np.allclose(recon, site_expectation_order1(cg, part, "q", 3))
