"""End-to-end exit criteria, each checked at its stated tolerance."""
import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from optpredict.cli import ExperimentConfig, invariant_initial_values, main
from optpredict.gaussian import build_prior, closed_form_moments, condition, wick_moment
from optpredict.kernels import fourier_kernels, gaussian_bump_kernels
from optpredict.lattice import Grid, HamiltonianSpec, full_hamiltonian, integrate_field
from optpredict.montecarlo import SamplerConfig, sample_unconditioned
from optpredict.opsolver import compute_c
from optpredict.partition import Partition
from optpredict.perturbation import conditional_expectation_order0, conditional_expectation_order1

from conftest import report_criterion
from test_gaussian import _constrained_quadrature, random_conditioned
from test_perturbation import constrained_q_quadrature

pytestmark = pytest.mark.acceptance


def run_cli(tmp_path, name, argv):
    out = tmp_path / f"{name}.csv"
    t0 = time.perf_counter()
    status = main(argv + ["--output", str(out)])
    wall = time.perf_counter() - t0
    assert status == 0, f"{argv} exited with {status}"
    man = json.loads(out.with_name(out.stem + ".manifest.json").read_text())
    return man["summary"], wall, out


def test_c01_partition_constants(tmp_path):
    s, wall, _ = run_cli(tmp_path, "pf", ["partition-fit", "--n", "32", "--T", "1"])
    ref, _, _ = run_cli(tmp_path, "pf_ref", ["partition-fit", "--n", "32", "--T", "1", "--m0", "1.055"])
    ok_m0 = abs(s["m0_opt"] - 1.055) <= 0.01
    ok_int = abs(s["intermediate"] + 1.197) <= 0.005
    ok_b = abs(s["b"] + 0.381) <= 0.005
    ok = ok_m0 and ok_int and ok_b and wall < 60
    detail = (f"m0_opt={s['m0_opt']:.4f} (1.055+-0.01), at that m0 intermediate={s['intermediate']:.4f}"
              f" b={s['b']:.4f}; at m0=1.055 intermediate={ref['intermediate']:.4f} b={ref['b']:.4f};"
              f" {wall:.1f}s")
    assert report_criterion(1, "partition constants", ok, detail)


def test_c02_correlation_fit(tmp_path):
    s, wall, _ = run_cli(tmp_path, "cc", ["correlation-check", "--n", "32", "--T", "1",
                                          "--n-samples", "10000", "--seed", "7"])
    ok = abs(s["m0_fit"] - 1.055) <= 0.03 and s["max_abs_z"] < 3 and wall < 300
    detail = f"m0_fit={s['m0_fit']:.4f} (1.055+-0.03), max|z|={s['max_abs_z']:.2f} (<3), {wall:.1f}s"
    assert report_criterion(2, "correlation fit", ok, detail)


def test_c03_fourier_identities():
    worst = 0.0
    for n, N in ((8, 2), (32, 4), (32, 8), (32, 32)):
        g = Grid(n)
        k = fourier_kernels(g, N)
        cg = condition(build_prior(g, 1.055), k, np.random.default_rng(n + N).standard_normal(N) + 0.5j)
        worst = max(worst,
                    np.abs(k.G @ k.G.conj().T - np.eye(N) / n).max(),
                    np.abs(cg.Q - n * k.G.conj().T).max(),
                    np.abs(cg.mean - n * k.G.conj().T @ cg.V).max())
    assert report_criterion(3, "Fourier identities", worst < 1e-12, f"max deviation {worst:.2e} (<1e-12)")


def test_c04_subgrid_constant():
    g = Grid(32)
    pr = build_prior(g, 1.055, 1.0)
    cs, oracle_err = [], 0.0
    for N in range(2, 33, 2):
        k = fourier_kernels(g, N)
        c = compute_c(pr, k).c
        cs.append(c)
        res = {int(K) % 32 for K in k.modes}
        kk = [j for j in range(32) if j not in res]
        lam = 2.0 / (g.h * (g.laplacian_symbol(g.wavenumbers[kk]) + 1.055**2))
        oracle_err = max(oracle_err, abs(c - lam.sum() / 32))
    cs = np.array(cs)
    ok = abs(cs[-1]) < 1e-13 and np.all(cs[:-1] > 0) and cs[0] > cs[-1] and oracle_err < 1e-12
    detail = f"c(2)={cs[0]:.4f}, c(32)={cs[-1]:.1e}, monotone={bool(np.all(np.diff(cs) < 0))}, oracle err {oracle_err:.1e}"
    assert report_criterion(4, "subgrid constant", ok, detail)


def test_c05_conditioned_moments(tmp_path):
    s, wall, _ = run_cli(tmp_path, "mc", ["moments-compare", "--n", "32", "--N", "4", "--m0", "1.055",
                                          "--n-samples", "10000", "--seed", "7"])
    ratio = s["rms_second_galerkin"] / s["rms_second_regression"]
    ok = s["max_abs_z_second"] < 3 and s["max_abs_z_third"] < 3 and ratio >= 3
    detail = (f"max|z| second={s['max_abs_z_second']:.2f} third={s['max_abs_z_third']:.2f} (<3),"
              f" Galerkin/regression RMS={ratio:.1f} (>=3), {wall:.1f}s")
    assert report_criterion(5, "conditioned moments", ok, detail)


def test_c06_wick_consistency():
    worst = 0.0
    for seed in range(100):
        cg = random_conditioned(1000 + seed, n=5)
        for (j, s), kinds in itertools.product(itertools.product((1, 3), (2, 4)),
                                               itertools.product("pq", repeat=2)):
            for x, z in ((0, 0), (1, 3), (4, 2)):
                c = closed_form_moments(cg, j, s, x, z, kinds)
                w = wick_moment(cg, [(x, kinds[0])] * j + [(z, kinds[1])] * s)
                worst = max(worst, abs(c - w) / max(1.0, abs(w)))
    assert report_criterion(6, "Wick consistency", worst < 1e-12, f"max rel deviation {worst:.1e} (<1e-12)")


def test_c07_regression_oracle():
    g = Grid(4)
    m0, T = 1.055, 1.0
    k = gaussian_bump_kernels(g, [1.0], 0.8)
    gv = k.G_real[0]
    V = np.array([0.7 + 0.3j])
    cg = condition(build_prior(g, m0, T), k, V)
    q, w = _constrained_quadrature(cg.prior, gv, V[0].real, npts=8)
    mq = w @ q
    cov = (q - mq).T @ ((q - mq) * w[:, None])
    gauss_err = max(np.abs(mq - cg.mean_q).max(), np.abs(cov - cg.cov_real).max(),
                    abs(gv @ (w @ q**3) - conditional_expectation_order0(cg, "q3")[0]))
    lam = 0.01
    part = Partition(m0, 0.0, g, T, quartic=lam, counterterm=0.0)
    qn, wn = constrained_q_quadrature(g, m0, T, gv, V[0].real, lam, 0.0, 30)
    o1_err = abs(gv @ (wn @ qn**3) - conditional_expectation_order1(cg, part, "q3")[0])
    # full-strength quartic, reported for context
    phys = Partition(m0, -0.381, g, T)
    qp, wp = constrained_q_quadrature(g, m0, T, gv, V[0].real, 1.0, m0**2, 40)
    exact = gv @ (wp @ qp**3)
    e0 = abs(exact - conditional_expectation_order0(cg, "q3")[0])
    e1 = abs(exact - conditional_expectation_order1(cg, phys, "q3")[0])
    ok = gauss_err < 1e-8 and o1_err < 1e-4
    detail = (f"Gaussian err {gauss_err:.1e} (<1e-8), order-1 err at quartic {lam} {o1_err:.1e} (<1e-4);"
              f" unit quartic: order-0 err {e0:.3f}, order-1 err {e1:.3f}")
    assert report_criterion(7, "regression oracle", ok, detail)


def test_c08_dynamics_closure(tmp_path):
    results, total = {}, 0.0
    for N in (4, 8):
        s, wall, _ = run_cli(tmp_path, f"ens{N}", ["ensemble-compare", "--n", "32", "--N", str(N),
                                                   "--t-end", "2", "--n-samples", "2000", "--seed", "7"])
        results[N] = s
        total += wall
    s4 = results[4]
    ok4 = s4["rms_op"] <= 0.5 * s4["rms_galerkin"] and s4["exit_time_galerkin"] < s4["exit_time_op"]
    s8 = results[8]
    ok8 = s8["rms_op"] < s8["rms_galerkin"] and s8["exit_time_galerkin"] < s8["exit_time_op"]
    ok = ok4 and ok8 and total < 900
    detail = "; ".join(
        f"N={N}: rms op/gal={r['rms_op']:.4f}/{r['rms_galerkin']:.4f}, band exit op/gal="
        f"{r['exit_time_op']}/{r['exit_time_galerkin']}" for N, r in results.items()) + f"; {total:.0f}s"
    assert report_criterion(8, "dynamics closure", ok, detail)


def test_c09_gaussian_kernel_experiment(tmp_path):
    s, wall, _ = run_cli(tmp_path, "gk", ["ensemble-compare", "--kernel", "gaussian", "--n", "16",
                                          "--sigma", str(math.pi), "--m0", "1.055", "--b", "-0.381",
                                          "--T", "1", "--t-end", "1", "--n-samples", "2000",
                                          "--seed", "7"])
    e0, e1 = np.array(s["endpoint_error_order0"]), np.array(s["endpoint_error_order1"])
    wins = int(np.sum(e1 <= e0))
    detail = (f"order-1 no worse on {wins}/4 variables (>=3); endpoint errors order0="
              f"{np.round(e0, 4).tolist()} order1={np.round(e1, 4).tolist()}")
    assert report_criterion(9, "Gaussian-kernel experiment", wins >= 3, detail)


def test_c10_temperature_trend(tmp_path):
    grid = Grid(16)
    k = gaussian_bump_kernels(grid, (math.pi / 8, 9 * math.pi / 8), math.pi)
    cfg = ExperimentConfig(experiment="ensemble-compare", seed=7)
    V, _ = invariant_initial_values(HamiltonianSpec(grid, 1.0), k, cfg.sampler())
    v0 = ",".join(repr(float(x)) for x in np.r_[V.imag, V.real])
    amp = {}
    for T in ("0.2", "4"):
        s, _, _ = run_cli(tmp_path, f"T{T}", ["ensemble-compare", "--kernel", "gaussian", "--n", "16",
                                              "--T", T, "--t-end", "2", "--n-samples", "2000",
                                              "--seed", "7", "--v0=" + v0])
        amp[T] = s["endpoint_abs_V"]
    ok = amp["4"] < amp["0.2"]
    assert report_criterion(10, "temperature trend", ok,
                            f"|V(2)| at T=4: {amp['4']:.4f}, at T=0.2: {amp['0.2']:.4f}")


def test_c11_conservation_and_convergence():
    g = Grid(16)
    cfg = SamplerConfig(seed=7, n_samples=1, n_chains=1, burn_in=1000)
    u = sample_unconditioned(HamiltonianSpec(g, 1.0), cfg).samples[0]
    _, s = integrate_field(u, 1e-3, 1.0, stride=50)
    H = full_hamiltonian(s)
    drift = float(np.max(np.abs(H - H[0])) / H[0])
    end = lambda dt: integrate_field(u, dt, 1.0, stride=10**6)[1][-1]
    ref = end(0.01 / 8)
    ratio = float(np.linalg.norm(end(0.01) - ref) / np.linalg.norm(end(0.005) - ref))
    ok = drift < 1e-6 and 8 <= ratio <= 32
    assert report_criterion(11, "conservation and convergence", ok,
                            f"relative drift {drift:.1e} (<1e-6), halving ratio {ratio:.1f} (16 within x2)")


def test_c12_determinism(tmp_path):
    runs = {
        "partition-fit": ["--n", "16"],
        "correlation-check": ["--n", "8", "--n-samples", "1000", "--chains", "200", "--burn-in", "50"],
        "moments-compare": ["--n", "8", "--N", "2", "--n-samples", "400", "--chains", "200", "--burn-in", "50"],
        "c-scan": ["--n", "16"],
        "evolve": ["--n", "16", "--N", "4", "--t-end", "0.2"],
        "ensemble-compare": ["--kernel", "gaussian", "--n", "8", "--t-end", "0.2", "--n-samples", "400",
                             "--chains", "200", "--burn-in", "50"],
    }
    mismatched = []
    for exp, extra in runs.items():
        bodies = set()
        for w in ("1", "2", "8"):
            out = tmp_path / f"{exp}-{w}.csv"
            assert main([exp, "--seed", "7", "--workers", w, "--output", str(out)] + extra) == 0
            bodies.add(out.read_bytes())
        if len(bodies) != 1:
            mismatched.append(exp)
    ok = not mismatched
    assert report_criterion(12, "determinism", ok,
                            f"{len(runs) - len(mismatched)}/{len(runs)} experiments byte-identical across 1/2/8 workers")
