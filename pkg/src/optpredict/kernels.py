"""Kernel families defining the collective variables ``V = G u``.

Two families are provided:

* periodic Gaussian bumps of width ``sigma`` centred at ``x_alpha``; row
  ``alpha`` of ``G`` holds ``h g_alpha(x_j)`` so that ``G u`` is the
  trapezoidal approximation of ``int g_alpha u dx``;
* discrete Fourier modes ``g_{alpha i} = exp(-i K_alpha x_i) / n`` with
  ``K_alpha = -N/2 + 1, ..., N/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lattice import Grid, LatticeField

__all__ = [
    "KernelError",
    "KernelSet",
    "gaussian_bump_kernels",
    "fourier_kernels",
    "periodic_gaussian",
    "collective_variables",
    "collective_pq",
    "kernel_rank",
]

GAUSSIAN_BUMP = "gaussian"
FOURIER = "fourier"

_RANK_RTOL = 1e-10
_IMAGE_RTOL = 1e-16


class KernelError(ValueError):
    """Invalid or rank-deficient kernel construction."""


@dataclass(frozen=True, eq=False)
class KernelSet:
    grid: Grid
    G: np.ndarray
    family: str
    centers: np.ndarray | None = None
    sigma: float | None = None
    modes: np.ndarray | None = None

    def __post_init__(self):
        G = np.array(self.G, dtype=complex)
        if G.ndim != 2 or G.shape[1] != self.grid.n:
            raise KernelError(f"G must be N x {self.grid.n}, got shape {G.shape}")
        if G.shape[0] > self.grid.n:
            raise KernelError("more conditions than lattice points")
        G.flags.writeable = False
        object.__setattr__(self, "G", G)

    @property
    def N(self) -> int:
        return self.G.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.any(self.G.imag)

    @property
    def G_real(self) -> np.ndarray:
        if not self.is_real:
            raise KernelError(f"{self.family} kernels are complex")
        return self.G.real

    def projector(self) -> np.ndarray:
        """``n G^H G``, the Galerkin projector for the Fourier family."""
        return self.grid.n * (self.G.conj().T @ self.G)


def kernel_rank(G) -> int:
    """Numerical rank of ``G`` from a column-pivoted QR of ``G^H``."""
    G = np.asarray(G)
    if G.shape[0] == 0:
        return 0
    _, R, _ = scipy.linalg.qr(G.conj().T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = _RANK_RTOL * max(np.linalg.norm(G), np.finfo(float).tiny)
    return int(np.sum(diag > tol))


def _check_rank(G, what):
    r = kernel_rank(G)
    if r < G.shape[0]:
        raise KernelError(f"{what}: G has rank {r} < N = {G.shape[0]}")


def periodic_gaussian(x, sigma: float) -> np.ndarray:
    """Normalized Gaussian of width ``sigma`` summed over its ``2 pi`` images.

    Shells of images ``tau = +-1, +-2, ...`` are added until the largest new
    term drops below ``1e-16`` of the running total.
    """
    if not sigma > 0:
        raise KernelError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=float)
    norm = 1.0 / (math.sqrt(math.pi) * sigma)
    total = norm * np.exp(-(x**2) / sigma**2)
    tau = 1
    while True:
        shell = norm * (np.exp(-((x - 2 * math.pi * tau) ** 2) / sigma**2)
                        + np.exp(-((x + 2 * math.pi * tau) ** 2) / sigma**2))
        total = total + shell
        if np.all(shell <= _IMAGE_RTOL * total):
            break
        tau += 1
    return total


def gaussian_bump_kernels(grid: Grid, centers, sigma: float) -> KernelSet:
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    if np.any(centers < 0) or np.any(centers >= 2 * math.pi):
        raise KernelError("kernel centers must lie in [0, 2 pi)")
    if not sigma > 0:
        raise KernelError(f"sigma must be positive, got {sigma}")
    G = grid.h * periodic_gaussian(grid.x[None, :] - centers[:, None], sigma)
    _check_rank(G, "gaussian bump kernels")
    return KernelSet(grid, G, GAUSSIAN_BUMP, centers=centers, sigma=float(sigma))


def fourier_modes(N: int) -> np.ndarray:
    if N < 0 or N % 2:
        raise KernelError(f"the Fourier mode set is defined for even N only, got N={N}")
    return np.arange(-N // 2 + 1, N // 2 + 1)


def fourier_kernels(grid: Grid, N: int) -> KernelSet:
    if N > grid.n:
        raise KernelError(f"N={N} exceeds n={grid.n}")
    K = fourier_modes(N)
    G = np.exp(-1j * np.outer(K, grid.x)) / grid.n
    _check_rank(G, "fourier kernels")
    return KernelSet(grid, G, FOURIER, modes=K)


def collective_variables(kernels: KernelSet, field) -> np.ndarray:
    """``V = G u`` for one field or a batch of shape ``(..., n)``."""
    u = field.values if isinstance(field, LatticeField) else np.asarray(field, dtype=complex)
    return u @ kernels.G.T


def collective_pq(kernels: KernelSet, field):
    """``(V^p, V^q) = (G p, G q)`` for a real kernel matrix."""
    u = field.values if isinstance(field, LatticeField) else np.asarray(field, dtype=complex)
    G = kernels.G_real
    return u.imag @ G.T, u.real @ G.T
