"""Closed-form coupling-aware beamforming via a plane-wave kernel expansion.

The radiation kernel is approximated by a finite sum of plane waves whose
wavenumbers and coefficients come from a quadrature rule over the propagating
disk.  Under that approximation the optimal transmit distribution and its
array gain have closed forms involving one dense linear solve whose size is
the number of expansion terms, independent of any surface discretization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .physics import Aperture, FarFieldChannel, PhysicalConfig, wavenumber_kernel
from .quadrature import disk_wavenumber_grid

_RESIDUAL_TOL = 1e-8
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class PlaneWaveExpansion:
    """Finite plane-wave approximation of the radiation kernel.

    The kernel is approximated as sum_i rho_i * exp(j * kappa_i . s) with
    strictly positive coefficients rho.
    """

    wavenumber: float
    impedance: float
    order: int
    inner_rule: str
    kappa: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)

    @property
    def term_count(self) -> int:
        return self.coefficients.size

    def reconstruct(self, points):
        """Approximated kernel at displacement(s) of shape (..., 3)."""
        s = np.asarray(points, dtype=float)
        out = np.real(np.exp(1j * (s @ self.kappa.T)) @ self.coefficients)
        return float(out) if out.ndim == 0 else out


def build_expansion(cfg: PhysicalConfig, order: int,
                    inner_rule: str = "legendre") -> PlaneWaveExpansion:
    """Plane-wave expansion of the radiation kernel at the given quadrature order."""
    grid = disk_wavenumber_grid(cfg.wavenumber, order, inner_rule)
    spectrum = wavenumber_kernel(grid.kappa, cfg.wavenumber, cfg.impedance)
    rho = grid.weights * spectrum / (2.0 * np.pi) ** 2
    if np.any(rho <= 0.0):
        raise NumericError("expansion produced non-positive coefficients",
                           module="kernel_approx")
    rho.setflags(write=False)
    return PlaneWaveExpansion(wavenumber=cfg.wavenumber, impedance=cfg.impedance,
                              order=int(order), inner_rule=inner_rule,
                              kappa=grid.kappa, coefficients=rho)


def _sinc(t: np.ndarray) -> np.ndarray:
    # sin(t)/t with the removable singularity filled; np.sinc is sin(pi x)/(pi x)
    return np.sinc(t / np.pi)


def gram_matrix(expansion: PlaneWaveExpansion, aperture: Aperture) -> np.ndarray:
    """Aperture inner products between the expansion's plane waves."""
    kx = expansion.kappa[:, 0]
    ky = expansion.kappa[:, 1]
    qx = _sinc((kx[:, None] - kx[None, :]) * (0.5 * aperture.length_x))
    qy = _sinc((ky[:, None] - ky[None, :]) * (0.5 * aperture.length_y))
    return aperture.area * qx * qy


@dataclass(frozen=True)
class InverseOperatorData:
    """Dense data of the resolvent solve shared by every steering direction."""

    lambda_diag: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    inverse: np.ndarray = field(repr=False)


def inverse_operator(expansion: PlaneWaveExpansion, gram: np.ndarray,
                     surface_resistance: float) -> InverseOperatorData:
    """Resolvent (I + Lambda Q)^-1 of the expansion/aperture pair.

    Lambda is the diagonal of expansion coefficients over the surface
    resistance.  The solve is verified by its residual; failure reports a
    condition estimate.
    """
    if surface_resistance <= 0:
        raise DomainError("surface resistance must be positive", module="kernel_approx")
    lam = expansion.coefficients / surface_resistance
    system = np.eye(lam.size) + lam[:, None] * gram
    try:
        inverse = np.linalg.solve(system, np.eye(lam.size))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"resolvent solve failed: {exc}", module="kernel_approx") from exc
    residual = np.max(np.abs(system @ inverse - np.eye(lam.size)))
    bound = _RESIDUAL_TOL * np.max(np.abs(system))
    if residual > bound:
        cond = np.linalg.cond(system)
        raise NumericError(f"resolvent residual {residual:.3e} exceeds {bound:.3e} "
                           f"(condition estimate {cond:.3e}, limit {_COND_LIMIT:.0e})",
                           module="kernel_approx")
    return InverseOperatorData(lambda_diag=lam, gram=gram, inverse=inverse)


def channel_moments(channel: FarFieldChannel, expansion: PlaneWaveExpansion,
                    aperture: Aperture) -> np.ndarray:
    """Aperture inner products between the conjugate channel and each plane wave."""
    dk = expansion.kappa - channel.wavevector
    mx = _sinc(dk[:, 0] * (0.5 * aperture.length_x))
    my = _sinc(dk[:, 1] * (0.5 * aperture.length_y))
    return np.conj(channel.amplitude) * aperture.area * mx * my


@dataclass(frozen=True)
class ClosedFormBeamformer:
    """Optimal transmit distribution under the plane-wave kernel approximation.

    Calling the object with surface points evaluates the distribution:
    scale * (conjugate channel minus its projection onto the expansion waves).
    """

    channel: FarFieldChannel
    expansion: PlaneWaveExpansion
    aperture: Aperture
    surface_resistance: float
    power: float
    moments: np.ndarray = field(repr=False)
    projection: np.ndarray = field(repr=False)
    matched_energy: float
    penalty: float
    scale: float

    def __call__(self, points) -> np.ndarray:
        s = np.asarray(points, dtype=float)
        conj_channel = np.conj(self.channel(s))
        waves = np.exp(1j * (s @ self.expansion.kappa.T)) @ self.projection
        out = self.scale * (conj_channel - waves)
        return complex(out) if np.ndim(out) == 0 else out

    @property
    def gain(self) -> float:
        return 2.0 * (self.matched_energy - self.penalty) / self.surface_resistance

    @property
    def uncoupled_bound(self) -> float:
        """Gain of the matched filter when coupling is ignored, 2*eta/Zs."""
        return 2.0 * self.matched_energy / self.surface_resistance


def beamform_ka(cfg: PhysicalConfig, channel: FarFieldChannel,
                expansion: PlaneWaveExpansion, aperture: Aperture,
                power: float = 1.0,
                inverse: InverseOperatorData | None = None) -> ClosedFormBeamformer:
    """Closed-form coupling-aware beamformer for one steering channel.

    The resolvent data may be precomputed once and shared across steering
    directions for the same expansion and aperture.
    """
    if power <= 0:
        raise DomainError("transmit power must be positive", module="kernel_approx")
    if inverse is None:
        inverse = inverse_operator(expansion, gram_matrix(expansion, aperture),
                                   cfg.surface_resistance)
    a = channel_moments(channel, expansion, aperture)
    b = inverse.inverse @ (inverse.lambda_diag * a)
    penalty = float(np.real(np.vdot(a, b)))
    eta = aperture.area * abs(channel.amplitude) ** 2
    net = eta - penalty
    if net <= 0.0:
        raise NumericError("matched energy does not exceed the coupling penalty; "
                           "closed form is numerically inconsistent", module="kernel_approx")
    scale = float(np.sqrt(2.0 * power / (cfg.surface_resistance * net)))
    return ClosedFormBeamformer(channel=channel, expansion=expansion, aperture=aperture,
                                surface_resistance=cfg.surface_resistance, power=power,
                                moments=a, projection=b, matched_energy=eta,
                                penalty=penalty, scale=scale)


def array_gain_ka(beamformer: ClosedFormBeamformer) -> float:
    """Array gain of the closed-form beamformer."""
    return beamformer.gain
