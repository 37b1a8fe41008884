"""Gaussian reference measure, conditioning on ``G u = V`` and Wick moments.

The reference Hamiltonian is

.. math::
    H^0(u) = \\frac{1}{2} \\sum_j \\Big[ \\frac{|u_{j+1}-u_j|^2}{h} + h m_0^2 |u_j|^2 \\Big],

which acts identically on ``q`` and ``p``.  Under ``exp(-H^0/T)`` both are
independent real Gaussian fields with covariance ``T K^{-1}`` where
``K = (2 I - S - S^T)/h + h m_0^2 I`` (``S`` the cyclic shift).  The complex
two-point function is therefore ``C = <u u^H> = 2 T K^{-1}``.

Conditioning uses the regression formulas

``Q = C G^H (G C G^H)^{-1}``, ``mean = Q V``, ``cov = C - Q G C``.

The conditioned fluctuation ``u - mean`` is circular (``<du du^T> = 0``), so
real and imaginary parts have covariance ``Re(cov)/2`` each and cross
covariance ``<dp_i dq_j> = Im(cov_ij)/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .kernels import KernelSet
from .lattice import Grid, laplacian

__all__ = [
    "ConditioningError",
    "GaussianPrior",
    "ConditionedGaussian",
    "build_prior",
    "condition",
    "wick_moment",
    "closed_form_moments",
    "raw_moment",
    "hafnian_moment",
]

MAX_WICK_FACTORS = 8


class ConditioningError(ValueError):
    """The Gram matrix ``G C G^H`` is singular for the requested conditions."""


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    grid: Grid
    m0: float
    temperature: float
    K: np.ndarray
    C_real: np.ndarray

    @property
    def C(self) -> np.ndarray:
        """Complex two-point function ``<u_i u_j^*>``."""
        return 2.0 * self.C_real

    @property
    def variance(self) -> float:
        """Single-site variance of ``q`` (equal to that of ``p``)."""
        return float(self.C_real[0, 0])

    def correlation(self) -> np.ndarray:
        """``<u_{i+d} u_i^*>`` as a function of the separation ``d = 0..n-1``."""
        return self.C[:, 0].real.copy()

    def spectrum(self) -> np.ndarray:
        """Eigenvalues of ``C`` in FFT wavenumber order."""
        g = self.grid
        return 2.0 * self.temperature / (g.h * (g.laplacian_symbol(g.wavenumbers) + self.m0**2))


def quadratic_form(grid: Grid, m0: float) -> np.ndarray:
    n, h = grid.n, grid.h
    eye = np.eye(n)
    shift = np.roll(eye, 1, axis=1)
    return (2.0 * eye - shift - shift.T) / h + h * m0**2 * eye


def build_prior(grid: Grid, m0: float, temperature: float = 1.0) -> GaussianPrior:
    if not m0 > 0:
        raise ValueError(f"m0 must be positive, got {m0}")
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    K = quadratic_form(grid, m0)
    # K is circulant: invert through its DFT eigenvalues
    eig = (grid.laplacian_symbol(grid.wavenumbers) + m0**2) * grid.h
    first_col = np.fft.ifft(temperature / eig).real
    C_real = scipy.linalg.circulant(first_col)
    C_real = 0.5 * (C_real + C_real.T)
    C_real.flags.writeable = False
    K.flags.writeable = False
    return GaussianPrior(grid, float(m0), float(temperature), K, C_real)


@dataclass(frozen=True, eq=False)
class ConditionedGaussian:
    """Conditioned Gaussian measure; ``Q`` and ``cov`` do not depend on ``V``."""

    prior: GaussianPrior
    kernels: KernelSet
    V: np.ndarray
    Q: np.ndarray
    cov: np.ndarray

    @cached_property
    def mean(self) -> np.ndarray:
        return self.Q @ self.V

    def with_data(self, V) -> "ConditionedGaussian":
        V = np.asarray(V, dtype=complex)
        if V.shape != (self.kernels.N,):
            raise ValueError(f"V must have shape ({self.kernels.N},), got {V.shape}")
        return ConditionedGaussian(self.prior, self.kernels, V, self.Q, self.cov)

    @property
    def mean_q(self) -> np.ndarray:
        return self.mean.real

    @property
    def mean_p(self) -> np.ndarray:
        return self.mean.imag

    @cached_property
    def cov_real(self) -> np.ndarray:
        """Covariance of ``q`` (identical to that of ``p``)."""
        return 0.5 * self.cov.real

    @cached_property
    def cov_pq(self) -> np.ndarray:
        """``<dp_i dq_j>``."""
        return 0.5 * self.cov.imag

    @cached_property
    def site_variance(self) -> np.ndarray:
        return np.diag(self.cov_real).copy()

    def kind_mean(self, kind: str) -> np.ndarray:
        return {"p": self.mean_p, "q": self.mean_q}[kind]

    def kind_cov(self, kind_a: str, kind_b: str) -> np.ndarray:
        """Covariance matrix between field components ``kind_a(i)`` and ``kind_b(j)``."""
        if kind_a == kind_b:
            return self.cov_real
        if (kind_a, kind_b) == ("p", "q"):
            return self.cov_pq
        if (kind_a, kind_b) == ("q", "p"):
            return -self.cov_pq
        raise ValueError(f"unknown field kinds {kind_a!r}, {kind_b!r}")

    def mean_laplacian(self) -> np.ndarray:
        """Lattice Laplacian of the conditional mean field."""
        return laplacian(self.mean)


def condition(prior: GaussianPrior, kernels: KernelSet, V=None) -> ConditionedGaussian:
    """Condition the prior on ``G u = V``.

    ``V`` defaults to zeros.  The affine offset vanishes because the prior is
    centred.
    """
    if kernels.grid.n != prior.grid.n:
        raise ValueError("kernel and prior grids differ")
    G = kernels.G
    N, n = G.shape
    V = np.zeros(N, complex) if V is None else np.asarray(V, dtype=complex)
    if V.shape != (N,):
        raise ValueError(f"V must have shape ({N},), got {V.shape}")
    C = prior.C.astype(complex)
    if N == 0:
        Q = np.zeros((n, 0), complex)
        cov = C.copy()
    else:
        GC = G @ C
        gram = GC @ G.conj().T
        gram = 0.5 * (gram + gram.conj().T)
        try:
            factor = scipy.linalg.cho_factor(gram, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(
                f"Gram matrix G C G^H of the {kernels.family} conditions (N={N}) "
                "is not positive definite"
            ) from exc
        # Q^H = gram^{-1} G C since C and gram are Hermitian
        Q = scipy.linalg.cho_solve(factor, GC).conj().T
        cov = C - Q @ GC
        cov = 0.5 * (cov + cov.conj().T)
    Q.flags.writeable = False
    cov.flags.writeable = False
    return ConditionedGaussian(prior, kernels, V, Q, cov)


# --------------------------------------------------------------------------
# Wick moments


def hafnian_moment(means, cov) -> float:
    """``E[prod_k X_k]`` for jointly Gaussian ``X`` with given means and covariance.

    Expands every factor into mean plus fluctuation and sums over all partial
    pairings: each factor is either left as its mean or paired with a later
    factor through the covariance.  With zero means this is the Wick sum over
    perfect pairings (zero for an odd number of factors).
    """
    means = list(means)
    cov = np.asarray(cov)

    def rec(idx):
        if not idx:
            return 1.0
        first, rest = idx[0], idx[1:]
        total = means[first] * rec(rest) if means[first] != 0 else 0.0
        for pos, other in enumerate(rest):
            c = cov[first, other]
            if c != 0:
                total += c * rec(rest[:pos] + rest[pos + 1:])
        return total

    return rec(tuple(range(len(means))))


def wick_moment(cg: ConditionedGaussian, monomial, centered: bool = False) -> float:
    """Conditional expectation of a product of field components.

    ``monomial`` is a sequence of ``(site, kind)`` pairs with ``kind`` in
    ``{"p", "q"}``.  With ``centered=True`` each factor has its conditional
    mean subtracted first.
    """
    monomial = [(int(site), kind) for site, kind in monomial]
    if len(monomial) > MAX_WICK_FACTORS:
        raise ValueError(
            f"the generic enumerator handles at most {MAX_WICK_FACTORS} factors, "
            f"got {len(monomial)}"
        )
    for _, kind in monomial:
        if kind not in ("p", "q"):
            raise ValueError(f"unknown field kind {kind!r}")
    P = len(monomial)
    means = [0.0 if centered else float(cg.kind_mean(k)[i]) for i, k in monomial]
    cov = np.empty((P, P))
    for a, (i, ka) in enumerate(monomial):
        for b, (j, kb) in enumerate(monomial):
            cov[a, b] = cg.kind_cov(ka, kb)[i, j]
    return float(hafnian_moment(means, cov))


def raw_moment(mean, var, power: int):
    """``E[X^power]`` for ``X ~ N(mean, var)``, ``power <= 4``."""
    m, v = mean, var
    if power == 0:
        return np.ones_like(np.asarray(m, dtype=float))
    if power == 1:
        return m
    if power == 2:
        return m**2 + v
    if power == 3:
        return m**3 + 3 * m * v
    if power == 4:
        return m**4 + 6 * m**2 * v + 3 * v**2
    raise ValueError(f"power {power} not supported")


def _bivariate(j, s, px, pz, pxz, p2x, p2z):
    """Printed closed forms for ``<X^j Y^s>`` in terms of raw moments."""
    if (j, s) == (1, 2):
        return -2 * px * pz**2 + 2 * pz * pxz + px * p2z
    if (j, s) == (1, 4):
        return (6 * px * pz**4 - 8 * pz**3 * pxz - 12 * px * pz**2 * p2z
                + 12 * pz * pxz * p2z + 3 * px * p2z**2)
    if (j, s) == (3, 2):
        return (-12 * px**2 * pz * pxz + 6 * p2x * pz * pxz
                + px**3 * (6 * pz**2 - 2 * p2z)
                + px * (6 * pxz**2 + p2x * (-6 * pz**2 + 3 * p2z)))
    if (j, s) == (3, 4):
        return (72 * px**2 * pz * pxz * (pz**2 - p2z)
                + px**3 * (-20 * pz**4 + 36 * pz**2 * p2z - 6 * p2z**2)
                + 12 * pz * pxz * (2 * pxz**2 + p2x * (-2 * pz**2 + 3 * p2z))
                + 9 * px * (4 * pxz**2 * (-2 * pz**2 + p2z)
                            + p2x * (2 * pz**4 - 4 * pz**2 * p2z + p2z**2)))
    raise ValueError(f"closed forms exist for j in (1, 3), s in (2, 4); got ({j}, {s})")


def closed_form_moments(cg: ConditionedGaussian, j: int, s: int, x, z,
                        kinds=("p", "p")):
    """``<a^j(x) b^s(z)>_V`` from the closed-form Wick identities.

    ``a, b`` are the field components named by ``kinds``.  ``x`` and ``z``
    are site indices and broadcast against each other, so passing
    ``np.arange(n)[:, None]`` and ``np.arange(n)[None, :]`` yields the full
    ``n x n`` table.  Mixed ``p``/``q`` pairs use the same identities with the
    cross covariance, which vanishes for real kernels.
    """
    ka, kb = kinds
    x = np.asarray(x)
    z = np.asarray(z)
    ma, mb = cg.kind_mean(ka), cg.kind_mean(kb)
    var = cg.site_variance
    px, pz = ma[x], mb[z]
    pxz = px * pz + cg.kind_cov(ka, kb)[x, z]
    p2x = px**2 + var[x]
    p2z = pz**2 + var[z]
    return _bivariate(j, s, px, pz, pxz, p2x, p2z)
