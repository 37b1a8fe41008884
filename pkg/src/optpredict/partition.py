"""Splitting ``H = H^0 + H^1`` and choosing the partition parameters.

On the lattice the perturbation is

.. math::
    H^1 = \\frac{h}{4} \\sum_j \\big[\\lambda(p_j^4 + q_j^4)
          - 2\\kappa (p_j^2 + q_j^2)\\big] - \\pi b

with ``lambda = 1`` and ``kappa = m0**2`` for the nonlinear Schrodinger
Hamiltonian.  ``m0`` is picked by minimizing the variance of ``H^1`` under the
Gaussian measure and ``b`` by requiring ``<H^1>^0 = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .gaussian import GaussianPrior, build_prior, raw_moment
from .lattice import Grid

__all__ = [
    "Partition",
    "BConstants",
    "h1_moments",
    "h1_second_moment",
    "optimize_m0",
    "scan_m0",
    "compute_b",
    "spectral_sum",
    "empirical_two_point",
    "fit_m0_to_correlation",
    "MIN_CORRELATION_SAMPLES",
]

SPECTRAL_KMAX = 10_000
MIN_CORRELATION_SAMPLES = 1000


@dataclass(frozen=True)
class Partition:
    """Parameters of ``H^1``.

    ``quartic`` and ``counterterm`` default to the physical values
    (``1`` and ``m0**2``); they are exposed so the perturbation series can be
    checked against exactly solvable or weakly coupled targets.
    """

    m0: float
    b: float
    grid: Grid
    temperature: float = 1.0
    quartic: float = 1.0
    counterterm: float | None = None

    def __post_init__(self):
        if not self.m0 > 0:
            raise ValueError(f"m0 must be positive, got {self.m0}")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def kappa(self) -> float:
        return self.m0**2 if self.counterterm is None else float(self.counterterm)

    def prior(self) -> GaussianPrior:
        return build_prior(self.grid, self.m0, self.temperature)

    def energy(self, u) -> np.ndarray:
        """``H^1`` evaluated on fields of shape ``(..., n)``."""
        u = np.asarray(u, dtype=complex)
        h = self.grid.h
        p, q = u.imag, u.real
        dens = self.quartic * (p**4 + q**4) - 2.0 * self.kappa * (p**2 + q**2)
        return 0.25 * h * dens.sum(axis=-1) - math.pi * self.b


def _centered_pair_moments(vx, vz, c):
    """Centred bivariate Gaussian moments needed for the ``H^1`` variance."""
    e44 = 9 * vx**2 * vz**2 + 72 * vx * vz * c**2 + 24 * c**4
    e42 = 3 * vx**2 * vz + 12 * vx * c**2
    e22 = vx * vz + 2 * c**2
    return e44, e42, e22


def h1_moments(m0: float, grid: Grid, temperature: float = 1.0):
    """``(<H^1>^0, <(H^1)^2>^0)`` at ``b = 0`` as lattice double sums."""
    prior = build_prior(grid, m0, temperature)
    r = prior.C_real
    v = np.diag(r)
    h = grid.h
    e44, e42, e22 = _centered_pair_moments(v[:, None], v[None, :], r)
    e4 = raw_moment(0.0, v, 4)
    e2 = v
    m2 = m0**2
    integrand = (2 * e44 + 2 * np.outer(e4, e4)
                 - 8 * m2 * e42 - 8 * m2 * np.outer(e4, e2)
                 + 8 * m2**2 * np.outer(e2, e2) + 8 * m2**2 * e22)
    second = h * h / 16.0 * integrand.sum()
    mean = 0.25 * h * np.sum(2 * e4 - 4 * m2 * e2)
    return float(mean), float(second)


def h1_second_moment(m0: float, grid: Grid, temperature: float = 1.0,
                     kind: str = "variance") -> float:
    """Objective for choosing ``m0``.

    ``kind="variance"`` (the default) returns ``Var(H^1)``, which does not
    depend on ``b``; ``kind="raw"`` returns ``<(H^1)^2>^0`` at ``b = 0``.
    """
    mean, second = h1_moments(m0, grid, temperature)
    if kind == "variance":
        return second - mean**2
    if kind == "raw":
        return second
    raise ValueError(f"unknown objective kind {kind!r}")


def scan_m0(grid: Grid, temperature: float = 1.0, m0_values=None, kind="variance"):
    if m0_values is None:
        m0_values = np.round(np.arange(0.5, 2.0 + 1e-9, 0.01), 10)
    m0_values = np.asarray(m0_values, dtype=float)
    vals = np.array([h1_second_moment(m, grid, temperature, kind) for m in m0_values])
    return m0_values, vals


def optimize_m0(grid: Grid, temperature: float = 1.0, bracket=(0.5, 2.0),
                kind: str = "variance", xtol: float = 1e-4) -> float:
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    f = lambda m: h1_second_moment(m, grid, temperature, kind)
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": xtol})
    m = float(res.x)
    edge = 10 * xtol
    if m - lo < edge or hi - m < edge or not (res.fun < f(lo) and res.fun < f(hi)):
        raise ValueError(f"no interior minimum of the H^1 {kind} in [{lo}, {hi}]")
    return m


def spectral_sum(m0: float, kmax: int = SPECTRAL_KMAX) -> float:
    """``sum_{|k| <= kmax} 1 / (k^2 + m0^2)``."""
    k = np.arange(1, kmax + 1, dtype=float)
    return float(1.0 / m0**2 + 2.0 * np.sum(1.0 / (k**2 + m0**2)))


@dataclass(frozen=True)
class BConstants:
    b: float
    b_pi: float
    intermediate: float
    b_continuum: float


def compute_b(m0: float, grid: Grid, temperature: float = 1.0,
              quartic: float = 1.0, counterterm: float | None = None) -> BConstants:
    """Shift ``b`` that makes ``<H^1>^0`` vanish on the lattice.

    ``intermediate`` is the continuum expression
    ``T S (3 T S / (4 pi) - m0^2)`` with ``S`` the truncated spectral sum; it
    equals ``b pi`` in the continuum limit.
    """
    kappa = m0**2 if counterterm is None else counterterm
    var = build_prior(grid, m0, temperature).variance
    b = 3.0 * quartic * var**2 - 2.0 * kappa * var
    S = spectral_sum(m0)
    T = temperature
    intermediate = T * S * (3.0 * T * S / (4.0 * math.pi) - m0**2)
    return BConstants(b=float(b), b_pi=float(math.pi * b),
                      intermediate=float(intermediate),
                      b_continuum=float(intermediate / math.pi))


def empirical_two_point(samples, chains=None):
    """Translation-averaged ``<u_{i+d} u_i^*>`` and its standard error.

    The standard error comes from the spread of per-chain means when chain
    labels are given (at least two chains), otherwise from the per-sample
    spread.
    """
    u = np.asarray(samples, dtype=complex)
    if u.ndim != 2:
        raise ValueError("samples must have shape (S, n)")
    n = u.shape[1]
    F = np.fft.fft(u, axis=1)
    per_sample = np.fft.ifft(np.abs(F) ** 2, axis=1).real / n
    mean = per_sample.mean(axis=0)
    if chains is not None and len(np.unique(chains)) >= 2:
        chains = np.asarray(chains)
        labels = np.unique(chains)
        groups = np.array([per_sample[chains == c].mean(axis=0) for c in labels])
        se = groups.std(axis=0, ddof=1) / math.sqrt(len(labels))
    else:
        se = per_sample.std(axis=0, ddof=1) / math.sqrt(len(u))
    return mean, se


def fit_m0_to_correlation(samples, grid: Grid, temperature: float = 1.0,
                          bounds=(0.3, 3.0), xtol: float = 1e-5) -> float:
    """Least-squares fit of the Gaussian correlation function to samples."""
    u = np.asarray(samples, dtype=complex)
    if u.ndim != 2 or u.shape[1] != grid.n:
        raise ValueError(f"samples must have shape (S, {grid.n})")
    if len(u) < MIN_CORRELATION_SAMPLES:
        raise ValueError(
            f"correlation fit needs at least {MIN_CORRELATION_SAMPLES} samples, got {len(u)}"
        )
    target, _ = empirical_two_point(u)
    k = grid.wavenumbers
    lap = grid.laplacian_symbol(k)

    def model(m0):
        return np.fft.ifft(2.0 * temperature / (grid.h * (lap + m0**2))).real

    res = minimize_scalar(lambda m: np.sum((target - model(m)) ** 2),
                          bounds=bounds, method="bounded", options={"xatol": xtol})
    return float(res.x)
