"""First-order optimal prediction ODEs for the collective variables.

Two closures are implemented:

* Fourier kernels, where the conditional expectations are available in
  closed form and the prediction equations read

  ``i dV_a/dt = w_a V_a + (1/4) sum [3 V_b V_g^* V_e d(a, b-g+e)
  + V_b^* V_g^* V_e^* d(a, -b-g-e)] + (6/4) c V_a``

  with ``w_a = (4/h^2) sin^2(K_a h / 2)`` and ``c`` the diagonal of the
  unresolved covariance.  Dropping the ``c`` term gives the Galerkin
  (pseudo-spectral) truncation.  Wavenumber matching is done modulo ``n``,
  which is exact on the lattice;

* Gaussian-bump kernels with real collective variables ``(V^p, V^q)`` and the
  conditional expectations taken from the perturbation series.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gaussian import ConditionedGaussian, GaussianPrior, condition
from .kernels import FOURIER, KernelSet
from .lattice import laplacian, rk4_integrate
from .partition import Partition
from .perturbation import site_expectation_order0, site_expectation_order1

__all__ = [
    "CollectiveTrajectory",
    "SubgridConstant",
    "SCHEMES",
    "compute_c",
    "op_rhs_fourier",
    "galerkin_rhs",
    "op_rhs_gaussian_kernels",
    "integrate_collective",
    "evolve_fourier",
    "evolve_gaussian_kernels",
]

SCHEMES = ("OP_order0", "OP_order1", "OP_fourier", "Galerkin")


@dataclass(frozen=True, eq=False)
class CollectiveTrajectory:
    """Time series of collective variables.

    ``values`` is ``(T, N)`` complex for Fourier kernels and ``(T, 2N)`` real
    (columns ``V^p_1..V^p_N, V^q_1..V^q_N``) for Gaussian-bump kernels.  For
    complex values ``stderr`` packs the real-part error in its real part and
    the imaginary-part error in its imaginary part.
    """

    times: np.ndarray
    values: np.ndarray
    scheme: str
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES + ("ensemble",):
            raise ValueError(f"unknown scheme tag {self.scheme!r}")
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class SubgridConstant:
    c: float
    n: int
    N: int
    m0: float
    T: float


def compute_c(prior: GaussianPrior, kernels: KernelSet, atol: float = 1e-12) -> SubgridConstant:
    if kernels.family != FOURIER:
        raise ValueError("the subgrid constant is defined for Fourier kernels")
    n = prior.grid.n
    resid = (np.eye(n) - kernels.projector()) @ prior.C
    diag = np.diag(resid)
    c = float(np.mean(diag.real))
    spread = np.max(np.abs(diag - c))
    if spread > atol * max(1.0, abs(c)):
        raise ValueError(
            f"residual covariance diagonal is not constant (spread {spread:.2e}); "
            "translation invariance is broken"
        )
    return SubgridConstant(c=c, n=n, N=kernels.N, m0=prior.m0, T=prior.temperature)


@lru_cache(maxsize=64)
def _triad_tables(n: int, modes: tuple):
    K = np.array(modes)
    N = len(K)
    lookup = {int(k) % n: a for a, k in enumerate(K)}
    b, g, e = np.meshgrid(K, K, K, indexing="ij")
    s1 = ((b - g + e) % n).ravel()
    s2 = ((-b - g - e) % n).ravel()
    t1 = np.array([lookup.get(int(s), -1) for s in s1])
    t2 = np.array([lookup.get(int(s), -1) for s in s2])
    return N, t1, t2


def _fourier_nonlinear(V, kernels: KernelSet):
    N, t1, t2 = _triad_tables(kernels.grid.n, tuple(int(k) for k in kernels.modes))
    Vc = V.conj()
    trip1 = (V[:, None, None] * Vc[None, :, None] * V[None, None, :]).ravel()
    trip2 = (Vc[:, None, None] * Vc[None, :, None] * Vc[None, None, :]).ravel()
    out = np.zeros(N, complex)
    m1, m2 = t1 >= 0, t2 >= 0
    np.add.at(out, t1[m1], 3.0 * trip1[m1])
    np.add.at(out, t2[m2], trip2[m2])
    return 0.25 * out


def galerkin_rhs(V, kernels: KernelSet) -> np.ndarray:
    """``dV/dt`` of the Galerkin truncation (no prior information)."""
    V = np.asarray(V, dtype=complex)
    if kernels.family != FOURIER:
        raise ValueError("galerkin_rhs requires Fourier kernels")
    omega = kernels.grid.laplacian_symbol(kernels.modes)
    return -1j * (omega * V + _fourier_nonlinear(V, kernels))


def op_rhs_fourier(V, prior: GaussianPrior, kernels: KernelSet, c) -> np.ndarray:
    """``dV/dt`` of the optimal prediction closure with Fourier kernels."""
    cval = c.c if isinstance(c, SubgridConstant) else float(c)
    V = np.asarray(V, dtype=complex)
    return galerkin_rhs(V, kernels) - 1j * (1.5 * cval) * V


def op_rhs_gaussian_kernels(Vp, Vq, prior: GaussianPrior, kernels: KernelSet,
                            partition: Partition | None = None, order: int = 0,
                            cg: ConditionedGaussian | None = None):
    """``(dV^p/dt, dV^q/dt)`` for real kernels at perturbation order 0 or 1.

    ``cg`` may carry a precomputed conditioning (its ``V`` is ignored), which
    saves refactoring the Gram matrix at every call.
    """
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    if order == 1 and partition is None:
        raise ValueError("order 1 needs a partition")
    G = kernels.G_real
    V = np.asarray(Vq, dtype=float) + 1j * np.asarray(Vp, dtype=float)
    base = cg if cg is not None else condition(prior, kernels)
    cg = base.with_data(V)
    if order == 0:
        mq, mp = cg.mean_q, cg.mean_p
        q3 = site_expectation_order0(cg, "q", 3)
        p3 = site_expectation_order0(cg, "p", 3)
    else:
        mq = site_expectation_order1(cg, partition, "q", 1)
        mp = site_expectation_order1(cg, partition, "p", 1)
        q3 = site_expectation_order1(cg, partition, "q", 3)
        p3 = site_expectation_order1(cg, partition, "p", 3)
    dVp = G @ laplacian(mq) - G @ q3
    dVq = -(G @ laplacian(mp)) + G @ p3
    return dVp, dVq


def integrate_collective(rhs, V0, dt: float, t_end: float, stride: int = 1,
                         scheme: str = "OP_fourier") -> CollectiveTrajectory:
    """Fixed-step RK4 for a collective-variable system ``dV/dt = rhs(V)``."""
    times, states, _ = rk4_integrate(rhs, np.asarray(V0), dt, t_end, stride)
    return CollectiveTrajectory(times, states, scheme)


def evolve_fourier(V0, prior: GaussianPrior, kernels: KernelSet, scheme: str = "OP_fourier",
                   dt: float = 1e-3, t_end: float = 2.0, stride: int = 1) -> CollectiveTrajectory:
    if scheme == "OP_fourier":
        c = compute_c(prior, kernels)
        rhs = lambda V: op_rhs_fourier(V, prior, kernels, c)
    elif scheme == "Galerkin":
        rhs = lambda V: galerkin_rhs(V, kernels)
    else:
        raise ValueError(f"unknown Fourier scheme {scheme!r}")
    return integrate_collective(rhs, np.asarray(V0, dtype=complex), dt, t_end, stride, scheme)


def evolve_gaussian_kernels(Vp0, Vq0, prior: GaussianPrior, kernels: KernelSet,
                            partition: Partition | None = None, order: int = 0,
                            dt: float = 1e-3, t_end: float = 1.0,
                            stride: int = 1) -> CollectiveTrajectory:
    N = kernels.N
    base = condition(prior, kernels)

    def rhs(y):
        dVp, dVq = op_rhs_gaussian_kernels(y[:N], y[N:], prior, kernels, partition,
                                           order, cg=base)
        return np.concatenate([dVp, dVq])

    y0 = np.concatenate([np.asarray(Vp0, float), np.asarray(Vq0, float)])
    return integrate_collective(rhs, y0, dt, t_end, stride, f"OP_order{order}")
