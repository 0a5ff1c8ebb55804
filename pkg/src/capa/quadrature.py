"""Gauss-Legendre rules and the product grids built from them.

Two grids are used throughout: a tensor grid over the rectangular aperture
(for surface integrals) and a nested grid over the propagating disk in the
wavenumber plane (for spectral integrals).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, NumericError
from .physics import Aperture

_MAX_ORDER = 512


def _legendre_pair(order: int, x: np.ndarray):
    """Legendre polynomial of the given order and its derivative, by recurrence."""
    p_prev = np.ones_like(x)
    p = np.array(x, copy=True)
    for n in range(2, order + 1):
        p, p_prev = ((2.0 * n - 1.0) * x * p - (n - 1.0) * p_prev) / n, p
    dp = order * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


@dataclass(frozen=True)
class GaussLegendreRule:
    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


@lru_cache(maxsize=None)
def legendre_rule(order: int) -> GaussLegendreRule:
    """Gauss-Legendre nodes and weights on [-1, 1].

    Nodes are the roots of the Legendre polynomial, found by Newton iteration
    from Chebyshev-point initial guesses; weights follow from the derivative.
    """
    if order < 1 or order > _MAX_ORDER:
        raise DomainError(f"order must lie in [1, {_MAX_ORDER}]", module="quadrature")
    order = int(order)
    i = np.arange(1, order + 1)
    x = np.cos(np.pi * (i - 0.25) / (order + 0.5))
    for _ in range(100):
        p, dp = _legendre_pair(order, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise NumericError("Newton iteration for Legendre nodes did not converge",
                           module="quadrature")
    _, dp = _legendre_pair(order, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x, w = x[::-1].copy(), w[::-1].copy()
    # the roots are symmetric about 0; enforce the symmetry exactly
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return GaussLegendreRule(order=order, nodes=x, weights=w)


@dataclass(frozen=True)
class ApertureGrid:
    """Tensor Gauss-Legendre grid over a rectangular aperture.

    points has shape (order**2, 3), row-major in (x node, y node); weights are
    the matching surface quadrature weights (the diagonal of the weight
    operator for grid inner products).
    """

    aperture: Aperture
    order: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.order ** 2

    def integrate(self, values):
        """Surface integral of samples taken on the grid (last axis)."""
        return np.asarray(values) @ self.weights


def aperture_grid(aperture: Aperture, order: int) -> ApertureGrid:
    rule = legendre_rule(order)
    xs = 0.5 * aperture.length_x * rule.nodes
    ys = 0.5 * aperture.length_y * rule.nodes
    points = np.column_stack([np.repeat(xs, order),
                              np.tile(ys, order),
                              np.zeros(order * order)])
    weights = (np.outer(rule.weights, rule.weights) * (aperture.area / 4.0)).ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return ApertureGrid(aperture=aperture, order=order, points=points, weights=weights)


@dataclass(frozen=True)
class WavenumberDiskGrid:
    """Nested quadrature grid over the propagating disk ||kappa|| < k.

    The outer rule runs over kappa_x, the inner over the chord in kappa_y
    whose half-width shrinks toward the rim.  kappa has shape (order**2, 3)
    with zero third component; weights are the products of outer and inner
    quadrature weights, row-major in (outer node, inner node).
    """

    wavenumber: float
    order: int
    inner_rule: str
    kappa: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def term_count(self) -> int:
        return self.order ** 2


def disk_wavenumber_grid(wavenumber: float, order: int,
                         inner_rule: str = "legendre") -> WavenumberDiskGrid:
    """Quadrature grid for integrals over the propagating disk.

    inner_rule "legendre" integrates the chord with a plain Gauss-Legendre
    rule; "chebyshev" uses a Chebyshev-weighted rule that absorbs the
    inverse-square-root rim singularity of the coupling spectrum.
    """
    if wavenumber <= 0:
        raise DomainError("wavenumber must be positive", module="quadrature")
    if inner_rule not in ("legendre", "chebyshev"):
        raise DomainError("inner_rule must be 'legendre' or 'chebyshev'", module="quadrature")
    rule = legendre_rule(order)
    kx = wavenumber * rule.nodes
    wx = wavenumber * rule.weights
    half_chord = np.sqrt(wavenumber ** 2 - kx ** 2)
    if inner_rule == "legendre":
        t = rule.nodes
        inner_w = rule.weights
    else:
        m = np.arange(1, order + 1)
        t = np.cos(np.pi * (2.0 * m - 1.0) / (2.0 * order))[::-1].copy()
        t = 0.5 * (t - t[::-1])
        inner_w = (np.pi / order) * np.sqrt(1.0 - t * t)
    ky = (half_chord[:, None] * t[None, :]).ravel()
    kappa = np.column_stack([np.repeat(kx, order), ky, np.zeros(order * order)])
    weights = (wx[:, None] * (half_chord[:, None] * inner_w[None, :])).ravel()
    kappa.setflags(write=False)
    weights.setflags(write=False)
    return WavenumberDiskGrid(wavenumber=float(wavenumber), order=int(order),
                              inner_rule=inner_rule, kappa=kappa, weights=weights)
