"""Periodic lattice, discrete Hamiltonians and nonlinear Schrodinger dynamics.

The field lives on ``n`` equally spaced points ``x_j = j h`` (``j = 1..n``,
``h = 2 pi / n``) with periodic wraparound.  A complex field ``u = q + i p``
is stored as a complex array whose last axis has length ``n``; leading axes
are treated as batch dimensions throughout, so an ensemble of fields is just
an array of shape ``(M, n)``.

The discrete Hamiltonian is

.. math::
    H(p, q) = \\frac{h}{2} \\sum_j \\Big[ \\Big(\\frac{p_{j+1}-p_j}{h}\\Big)^2
        + \\Big(\\frac{q_{j+1}-q_j}{h}\\Big)^2 + \\frac{p_j^4 + q_j^4}{2} \\Big]

and the equations of motion are ``dp/dt = D q - q^3``, ``dq/dt = -D p + p^3``
with ``D`` the three-point periodic Laplacian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "LatticeField",
    "HamiltonianSpec",
    "DivergenceError",
    "laplacian",
    "full_hamiltonian",
    "complex_hamiltonian",
    "lattice_energy",
    "nls_rhs",
    "nls_rhs_pair",
    "rk4_integrate",
    "integrate_field",
]

OVERFLOW_GUARD = 1e6


class DivergenceError(RuntimeError):
    """Raised when a trajectory exceeds the overflow guard."""


@dataclass(frozen=True)
class Grid:
    """Periodic grid on ``[0, 2 pi)`` with ``n`` points."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs an integer n >= 2, got {self.n!r}")

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.n

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order (``0, 1, ..., -1``)."""
        return np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(int)

    def laplacian_symbol(self, k) -> np.ndarray:
        """Eigenvalue of ``-D`` on ``exp(i k x)``: ``(4/h^2) sin^2(k h / 2)``."""
        k = np.asarray(k, dtype=float)
        return 4.0 / self.h**2 * np.sin(0.5 * k * self.h) ** 2


@dataclass(frozen=True)
class LatticeField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape[-1:] != (self.grid.n,):
            raise ValueError(
                f"field has trailing length {values.shape[-1:]}, grid has n={self.grid.n}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def q(self) -> np.ndarray:
        return self.values.real

    @property
    def p(self) -> np.ndarray:
        return self.values.imag

    @classmethod
    def from_pq(cls, grid: Grid, p, q) -> "LatticeField":
        return cls(grid, np.asarray(q) + 1j * np.asarray(p))

    def hamiltonian(self):
        return full_hamiltonian(self)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Lattice Hamiltonian together with the temperature of its canonical measure.

    ``mass_sq`` and ``quartic`` default to the nonlinear Schrodinger values
    (no mass term, unit quartic coupling).  Setting ``quartic=0`` and
    ``mass_sq=m0**2`` gives the Gaussian reference Hamiltonian, which the
    samplers use for oracle checks.
    """

    grid: Grid
    temperature: float = 1.0
    mass_sq: float = 0.0
    quartic: float = 1.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.mass_sq < 0 or self.quartic < 0:
            raise ValueError("mass_sq and quartic must be non-negative")
        if self.mass_sq == 0 and self.quartic == 0:
            raise ValueError("measure is not normalizable without mass or quartic term")

    def energy(self, u) -> np.ndarray:
        return lattice_energy(_values(u), self.mass_sq, self.quartic)


def _values(field) -> np.ndarray:
    if isinstance(field, LatticeField):
        return field.values
    return np.asarray(field, dtype=complex)


def laplacian(f) -> np.ndarray:
    """Three-point periodic Laplacian along the last axis."""
    f = np.asarray(f)
    n = f.shape[-1]
    h = 2.0 * math.pi / n
    return (np.roll(f, 1, axis=-1) - 2.0 * f + np.roll(f, -1, axis=-1)) / h**2


def lattice_energy(u, mass_sq: float = 0.0, quartic: float = 1.0) -> np.ndarray:
    """Gradient + mass + quartic lattice energy, vectorized over leading axes."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[-1]
    h = 2.0 * math.pi / n
    du = np.roll(u, -1, axis=-1) - u
    grad = np.sum(np.abs(du) ** 2, axis=-1) / (2.0 * h)
    energy = grad
    if mass_sq:
        energy = energy + 0.5 * h * mass_sq * np.sum(np.abs(u) ** 2, axis=-1)
    if quartic:
        energy = energy + 0.25 * h * quartic * np.sum(u.real**4 + u.imag**4, axis=-1)
    return energy


def full_hamiltonian(field) -> np.ndarray:
    """Discrete NLS Hamiltonian in ``(p, q)`` form."""
    u = _values(field)
    n = u.shape[-1]
    h = 2.0 * math.pi / n
    p, q = u.imag, u.real
    dp = (np.roll(p, -1, axis=-1) - p) / h
    dq = (np.roll(q, -1, axis=-1) - q) / h
    return 0.5 * h * np.sum(dp**2 + dq**2 + 0.5 * (p**4 + q**4), axis=-1)


def complex_hamiltonian(field) -> np.ndarray:
    """The same Hamiltonian written in terms of ``u`` and ``u*``."""
    u = _values(field)
    n = u.shape[-1]
    h = 2.0 * math.pi / n
    du = np.roll(u, -1, axis=-1) - u
    nonlinear = (u**4 + 6.0 * np.abs(u) ** 4 + np.conj(u) ** 4).real
    return 0.5 * np.sum(np.abs(du) ** 2 / h + h / 16.0 * nonlinear, axis=-1)


def nls_rhs(field) -> np.ndarray:
    """``du/dt`` from ``i du/dt = -D u + (3|u|^2 u + (u*)^3) / 4``."""
    u = _values(field)
    nonlinear = 0.25 * (3.0 * np.abs(u) ** 2 * u + np.conj(u) ** 3)
    return -1j * (-laplacian(u) + nonlinear)


def nls_rhs_pair(p, q):
    """``(dp/dt, dq/dt)`` of the real difference equations."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return laplacian(q) - q**3, -laplacian(p) + p**3


def rk4_integrate(rhs, y0, dt: float, t_end: float, stride: int = 1,
                  guard: float = OVERFLOW_GUARD, mask_rows: bool = False):
    """Classical fixed-step RK4.

    The step count is ``ceil(t_end / dt)`` and the step is shrunk slightly so
    the last step lands on ``t_end``.  States are recorded every ``stride``
    steps (and at ``t_end``).

    With ``mask_rows=True`` the leading axis of ``y0`` indexes independent
    members; a member that crosses the guard is frozen at zero and flagged
    instead of aborting the run.  Returns ``(times, states, diverged)`` with
    ``diverged`` a boolean array over members (or a scalar flag).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise ValueError(f"t_end must be non-negative, got {t_end}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n_steps = int(math.ceil(t_end / dt - 1e-12)) if t_end > 0 else 0
    step = t_end / n_steps if n_steps else 0.0
    y = np.array(y0, copy=True)
    diverged = np.zeros(y.shape[0], dtype=bool) if mask_rows else np.bool_(False)
    times = [0.0]
    states = [y.copy()]
    for i in range(1, n_steps + 1):
        # overflow in a runaway member is caught by the guard below
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * step * k1)
            k3 = rhs(y + 0.5 * step * k2)
            k4 = rhs(y + step * k3)
            y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if mask_rows:
            flat = np.abs(y.reshape(y.shape[0], -1))
            bad = ~np.all(np.isfinite(flat) & (flat <= guard), axis=1)
            if bad.any():
                diverged |= bad
                y[bad] = 0
        else:
            a = np.abs(y)
            if not np.all(np.isfinite(a)) or a.max(initial=0.0) > guard:
                raise DivergenceError(
                    f"trajectory exceeded |y| > {guard:g} at t = {i * step:.6g}; "
                    "try a smaller dt"
                )
        if i % stride == 0 or i == n_steps:
            times.append(i * step)
            states.append(y.copy())
    return np.asarray(times), np.asarray(states), diverged


def integrate_field(field, dt: float, t_end: float, stride: int = 1):
    """Integrate the lattice NLS from ``field``.

    ``field`` may be a :class:`LatticeField` or an array of shape ``(..., n)``.
    Returns ``(times, snapshots)`` with snapshots of shape ``(len(times), ..., n)``.
    """
    u0 = _values(field)
    times, states, _ = rk4_integrate(nls_rhs, u0, dt, t_end, stride)
    return times, states
