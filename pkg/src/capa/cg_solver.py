"""Conjugate-gradient solution of the coupling-aware beamforming equation.

The optimality condition is a Fredholm integral equation of the second kind:
the coupling operator applied to the transmit distribution must reproduce the
conjugate channel over the aperture.  It is discretized on the tensor
Gauss-Legendre grid and solved by conjugate gradients in the grid's weighted
inner product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, NumericError
from .physics import Aperture, FarFieldChannel, PhysicalConfig, radiation_kernel
from .quadrature import ApertureGrid, aperture_grid


@dataclass(frozen=True)
class DiscretizedOperator:
    """Coupling operator restricted to an aperture quadrature grid.

    kernel_matrix holds the radiation kernel between every pair of grid
    points; the full operator adds the surface-resistance identity term.
    """

    config: PhysicalConfig
    grid: ApertureGrid
    kernel_matrix: np.ndarray = field(repr=False)

    @property
    def surface_resistance(self) -> float:
        return self.config.surface_resistance


def discretize_operator(cfg: PhysicalConfig, grid: ApertureGrid) -> DiscretizedOperator:
    pts = grid.points
    diffs = pts[:, None, :] - pts[None, :, :]
    matrix = radiation_kernel(diffs, cfg.wavenumber, cfg.impedance)
    matrix.setflags(write=False)
    return DiscretizedOperator(config=cfg, grid=grid, kernel_matrix=matrix)


def apply_operator(op: DiscretizedOperator, values: np.ndarray) -> np.ndarray:
    """Apply the discretized coupling operator: kernel convolution plus loss term."""
    return op.kernel_matrix @ (op.grid.weights * values) + op.surface_resistance * values


@dataclass(frozen=True)
class CgState:
    """Conjugate-gradient iterate and per-iteration history."""

    values: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    direction: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    residual_norms: np.ndarray = field(repr=False)
    functional_values: np.ndarray = field(repr=False)


def solve_fredholm(op: DiscretizedOperator, rhs: np.ndarray, tol: float = 1e-8,
                   max_iter: int = 10_000, init: str = "zero",
                   seed: int | None = None) -> CgState:
    """Conjugate gradients on the grid-discretized coupling equation.

    rhs holds the conjugate channel sampled on the grid.  Convergence is
    declared when the weighted residual norm falls below tol relative to the
    weighted norm of rhs.  residual_norms[i] is that relative norm before
    iteration i; functional_values tracks the quadratic objective whose
    stationary point is the solution, which must decrease monotonically.
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive", module="cg_solver")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1", module="cg_solver")
    w = op.grid.weights
    rhs = np.asarray(rhs, dtype=complex)
    rhs_norm2 = float(np.real(np.vdot(rhs, w * rhs)))
    if rhs_norm2 <= 0.0:
        raise DomainError("right-hand side has zero weighted norm", module="cg_solver")
    if init == "zero":
        v = np.zeros_like(rhs)
    elif init == "random":
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(rhs.size) + 1j * rng.standard_normal(rhs.size)
    else:
        raise DomainError("init must be 'zero' or 'random'", module="cg_solver")

    def functional(vec, res):
        # operator apply recovered from the residual: A v = rhs - r
        coupled = 0.5 * np.real(np.vdot(vec, w * (rhs - res)))
        matched = np.real(np.vdot(rhs, w * vec))
        return coupled - matched

    r = rhs - apply_operator(op, v)
    p = r.copy()
    rr = float(np.real(np.vdot(r, w * r)))
    rel = np.sqrt(rr / rhs_norm2)
    residual_norms = [rel]
    functional_values = [functional(v, r)]
    converged = rel < tol
    iterations = 0
    while not converged and iterations < max_iter:
        ap = apply_operator(op, p)
        denom = float(np.real(np.vdot(p, w * ap)))
        if denom <= 0.0:
            raise NumericError("search-direction curvature is not positive; "
                               "discretized operator lost definiteness", module="cg_solver")
        alpha = rr / denom
        v = v + alpha * p
        r = r - alpha * ap
        rr_next = float(np.real(np.vdot(r, w * r)))
        xi = rr_next / rr
        p = r + xi * p
        rr = rr_next
        rel = np.sqrt(rr / rhs_norm2)
        iterations += 1
        residual_norms.append(rel)
        functional_values.append(functional(v, r))
        converged = rel < tol
    state = CgState(values=v, residual=r, direction=p, iterations=iterations,
                    converged=converged,
                    residual_norms=np.asarray(residual_norms),
                    functional_values=np.asarray(functional_values))
    if not converged:
        raise ConvergenceError(f"conjugate gradients did not reach tol {tol:.1e} "
                               f"in {max_iter} iterations (residual {rel:.3e})",
                               module="cg_solver", state=state)
    return state


@dataclass(frozen=True)
class FredholmSolution:
    """Normalized beamformer synthesized from a grid solution.

    The object is callable on surface points and evaluates the continuous
    transmit distribution; grid_values holds the unnormalized solution on the
    quadrature grid and scale the power normalization factor.
    """

    operator: DiscretizedOperator
    channel: FarFieldChannel
    power: float
    grid_values: np.ndarray = field(repr=False)
    scale: complex
    matched_inner: complex
    state: CgState | None = field(default=None, repr=False)

    @property
    def gain(self) -> float:
        return 2.0 * float(np.real(self.matched_inner))

    def solution_field(self, points) -> np.ndarray:
        """Continuous unnormalized solution off the grid.

        Uses the equation itself: the conjugate channel minus the kernel
        convolution of the grid solution, over the surface resistance.
        """
        s = np.asarray(points, dtype=float)
        grid_pts = self.operator.grid.points
        disp = s[..., None, :] - grid_pts
        kern = radiation_kernel(disp, self.operator.config.wavenumber,
                                self.operator.config.impedance)
        conv = kern @ (self.operator.grid.weights * self.grid_values)
        out = (np.conj(self.channel(s)) - conv) / self.operator.surface_resistance
        return complex(out) if np.ndim(out) == 0 else out

    def __call__(self, points) -> np.ndarray:
        return self.scale * self.solution_field(points)


def synthesize_beamformer(op: DiscretizedOperator, channel: FarFieldChannel,
                          state: CgState, power: float = 1.0) -> FredholmSolution:
    """Power-normalize a grid solution into a transmit beamformer."""
    if power <= 0:
        raise DomainError("transmit power must be positive", module="cg_solver")
    h = channel(op.grid.points)
    inner = np.sum(op.grid.weights * h * state.values)
    if np.real(inner) <= 0.0:
        raise NumericError("channel/solution inner product has non-positive real part; "
                           "solution is inconsistent", module="cg_solver")
    scale = np.sqrt(2.0 * power / inner)
    return FredholmSolution(operator=op, channel=channel, power=power,
                            grid_values=state.values, scale=complex(scale),
                            matched_inner=complex(inner), state=state)


def beamform_cg(cfg: PhysicalConfig, channel: FarFieldChannel, aperture: Aperture,
                order: int, power: float = 1.0, tol: float = 1e-8,
                max_iter: int = 10_000, init: str = "zero",
                seed: int | None = None) -> FredholmSolution:
    """Discretize, solve, and normalize in one call."""
    grid = aperture_grid(aperture, order)
    op = discretize_operator(cfg, grid)
    rhs = np.conj(channel(grid.points))
    state = solve_fredholm(op, rhs, tol=tol, max_iter=max_iter, init=init, seed=seed)
    return synthesize_beamformer(op, channel, state, power=power)
