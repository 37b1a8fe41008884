"""Conditional expectations under ``exp(-H/T)`` as a series around the
conditioned Gaussian.

Truncating numerator and denominator of the expansion at first order gives

.. math::
    \\langle F \\rangle_V \\approx
    \\frac{\\langle F \\rangle^0_V - \\langle F H^1 \\rangle^0_V / T}
         {1 - \\langle H^1 \\rangle^0_V / T},

and the zeroth order is simply ``<F>^0_V``.  Observables are the site-wise
powers ``p^j(x)``, ``q^j(x)`` (``j = 1, 3``); the kernel projections
``(g_alpha, .)`` and the lattice Laplacian are applied afterwards since both
are linear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import ConditionedGaussian, closed_form_moments, raw_moment
from .lattice import laplacian
from .partition import Partition

__all__ = [
    "DegenerateSeriesError",
    "SeriesTerm",
    "OBSERVABLES",
    "site_expectation_order0",
    "site_expectation_order1",
    "site_h1_correlation",
    "h1_conditional_mean",
    "series_terms",
    "conditional_expectation_order0",
    "conditional_expectation_order1",
]

DENOMINATOR_GUARD = 1e-8

# name -> (field component, power, apply lattice Laplacian)
OBSERVABLES = {
    "q3": ("q", 3, False),
    "p3": ("p", 3, False),
    "lap_q": ("q", 1, True),
    "lap_p": ("p", 1, True),
    "one": (None, 0, False),
}


class DegenerateSeriesError(ArithmeticError):
    """``1 - <H^1>^0_V / T`` is too close to zero."""


@dataclass(frozen=True)
class SeriesTerm:
    order: int
    numerator: np.ndarray | float
    denominator_factor: float


def site_expectation_order0(cg: ConditionedGaussian, kind: str, power: int) -> np.ndarray:
    return raw_moment(cg.kind_mean(kind), cg.site_variance, power)


def h1_conditional_mean(cg: ConditionedGaussian, partition: Partition) -> float:
    h = partition.grid.h
    var = cg.site_variance
    dens = 0.0
    for kind in ("p", "q"):
        m = cg.kind_mean(kind)
        dens = dens + partition.quartic * raw_moment(m, var, 4) \
            - 2.0 * partition.kappa * raw_moment(m, var, 2)
    return float(0.25 * h * np.sum(dens) - math.pi * partition.b)


def site_h1_correlation(cg: ConditionedGaussian, partition: Partition,
                        kind: str, power: int) -> np.ndarray:
    """``<kind^power(x) H^1>^0_V`` for every site ``x``."""
    n = partition.grid.n
    h = partition.grid.h
    x = np.arange(n)[:, None]
    z = np.arange(n)[None, :]
    acc = np.zeros(n)
    for other in ("p", "q"):
        m4 = closed_form_moments(cg, power, 4, x, z, kinds=(kind, other))
        m2 = closed_form_moments(cg, power, 2, x, z, kinds=(kind, other))
        acc = acc + (partition.quartic * m4 - 2.0 * partition.kappa * m2).sum(axis=1)
    lead = site_expectation_order0(cg, kind, power)
    return 0.25 * h * acc - math.pi * partition.b * lead


def _denominator(cg, partition):
    d = 1.0 - h1_conditional_mean(cg, partition) / partition.temperature
    if abs(d) < DENOMINATOR_GUARD:
        raise DegenerateSeriesError(
            f"first-order denominator 1 - <H1>/T = {d:.3e} is degenerate"
        )
    return d


def site_expectation_order1(cg: ConditionedGaussian, partition: Partition,
                            kind: str, power: int) -> np.ndarray:
    T = partition.temperature
    denom = _denominator(cg, partition)
    lead = site_expectation_order0(cg, kind, power)
    corr = site_h1_correlation(cg, partition, kind, power)
    return (lead - corr / T) / denom


def series_terms(cg: ConditionedGaussian, partition: Partition, kind: str, power: int):
    """The two truncated series terms for a site observable."""
    T = partition.temperature
    lead = site_expectation_order0(cg, kind, power)
    return [
        SeriesTerm(0, lead, 1.0),
        SeriesTerm(1, -site_h1_correlation(cg, partition, kind, power) / T,
                   -h1_conditional_mean(cg, partition) / T),
    ]


def _lookup(observable):
    try:
        return OBSERVABLES[observable]
    except KeyError:
        raise ValueError(
            f"unsupported observable {observable!r}; choose from {sorted(OBSERVABLES)}"
        ) from None


def _project(cg, values, lap):
    if lap:
        values = laplacian(values)
    return cg.kernels.G @ values


def conditional_expectation_order0(cg: ConditionedGaussian, observable: str):
    """``(g_alpha, <obs>^0_V)`` for every kernel, or ``1`` for ``"one"``."""
    kind, power, lap = _lookup(observable)
    if kind is None:
        return 1.0
    return _project(cg, site_expectation_order0(cg, kind, power), lap)


def conditional_expectation_order1(cg: ConditionedGaussian, partition: Partition,
                                   observable: str):
    kind, power, lap = _lookup(observable)
    if kind is None:
        d = _denominator(cg, partition)
        return (1.0 - h1_conditional_mean(cg, partition) / partition.temperature) / d
    return _project(cg, site_expectation_order1(cg, partition, kind, power), lap)
