"""Large-aperture limits, directivity profiles, beampatterns, and benchmarks."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .physics import (Aperture, Direction, FarFieldChannel, PhysicalConfig,
                      far_field_channel, wavenumber_kernel)
from .quadrature import aperture_grid

_IDENTITY_TOL = 1e-12


def directivity_factor(cfg: PhysicalConfig, theta, phi):
    """Angular directivity factor of the optimally driven unbounded surface.

    Closed form in the steering angles; zero at grazing incidence.
    """
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    if np.any(np.abs(ph) > np.pi / 2):
        raise DomainError("polar angle must lie in [-pi/2, pi/2]", module="analysis")
    z0 = cfg.impedance
    zs = cfg.surface_resistance
    pol = 1.0 - (np.sin(th) * np.sin(ph)) ** 2
    num = z0 ** 2 * pol ** 2 * np.cos(ph)
    den = 2.0 * zs * np.cos(ph) + z0 * pol
    out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def infinite_aperture_gain(cfg: PhysicalConfig, theta, phi, distance: float):
    """Per-area normalized array gain in the unbounded-aperture limit.

    Finite apertures approach this value as 4*pi^2 * gain / area.  Evaluated
    through the wavenumber spectrum and cross-checked against the closed
    directivity form; grazing steering returns the limit value 0.
    """
    if distance <= 0:
        raise DomainError("receiver distance must be positive", module="analysis")
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    if np.any(np.abs(ph) > np.pi / 2):
        raise DomainError("polar angle must lie in [-pi/2, pi/2]", module="analysis")
    th, ph = np.broadcast_arrays(th, ph)
    k0 = cfg.wavenumber
    zs = cfg.surface_resistance
    # float pi/2 leaves cos at ~6e-17, so grazing needs a small window
    grazing = np.abs(np.cos(ph)) < 1e-9
    if np.any(grazing):
        warnings.warn("grazing steering direction: unbounded-aperture gain "
                      "returned as its limit value 0", stacklevel=2)
    pol = 1.0 - (np.sin(th) * np.sin(ph)) ** 2
    amp2 = (k0 * cfg.impedance / (4.0 * np.pi * distance)) ** 2 * pol ** 2
    kx = k0 * np.cos(th) * np.sin(ph)
    ky = k0 * np.sin(th) * np.sin(ph)
    kappa = np.stack([np.where(grazing, 0.0, kx), np.where(grazing, 0.0, ky)], axis=-1)
    spectrum = wavenumber_kernel(kappa, k0, cfg.impedance)
    raw = 8.0 * np.pi ** 2 * amp2 / (zs + spectrum)
    raw = np.where(grazing, 0.0, raw)
    reference = np.where(grazing, 0.0,
                         (k0 / distance) ** 2 * directivity_factor(cfg, th, ph))
    scale = np.maximum(np.abs(raw), np.abs(reference))
    # the spectral form loses digits as 1/(1 - |kappa|^2/k0^2) near the rim
    cond = 1.0 / np.maximum(1.0 - np.sin(ph) ** 2, 1e-15)
    allowed = _IDENTITY_TOL * np.where(scale > 0, scale, 1.0) * np.maximum(cond, 1.0)
    mismatch = np.abs(raw - reference) > allowed
    if np.any(mismatch):
        worst = float(np.max(np.abs(raw - reference) / np.where(scale > 0, scale, 1.0)))
        raise NumericError(f"unbounded-aperture gain forms disagree (rel {worst:.3e})",
                           module="analysis")
    return float(raw) if raw.ndim == 0 else raw


@dataclass(frozen=True)
class DirectivityProfile:
    plane: str
    phi: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def directivity_plane(cfg: PhysicalConfig, plane: str, phi) -> DirectivityProfile:
    """Directivity factor along a principal plane.

    "E" scans the polarization plane (azimuth pi/2), "H" the orthogonal one.
    """
    if plane not in ("E", "H"):
        raise DomainError("plane must be 'E' or 'H'", module="analysis")
    ph = np.asarray(phi, dtype=float)
    theta = np.pi / 2 if plane == "E" else 0.0
    values = directivity_factor(cfg, theta, ph)
    return DirectivityProfile(plane=plane, phi=ph, values=np.asarray(values))


@dataclass(frozen=True)
class UncoupledBeamformer:
    """Matched-filter transmit distribution normalized without coupling.

    Power accounting uses a flat resistance per unit area, so the gain is
    2 * matched_energy / resistance regardless of steering.
    """

    channel: FarFieldChannel
    power: float
    resistance: float
    matched_energy: float
    scale: float

    def __call__(self, points) -> np.ndarray:
        return self.scale * np.conj(self.channel(points))

    @property
    def gain(self) -> float:
        return 2.0 * self.matched_energy / self.resistance


def uncoupled_beamformer(cfg: PhysicalConfig, channel: FarFieldChannel,
                         aperture: Aperture, power: float = 1.0,
                         resistance: float | None = None) -> UncoupledBeamformer:
    """Coupling-blind matched filter; resistance defaults to the surface resistance."""
    if power <= 0:
        raise DomainError("transmit power must be positive", module="analysis")
    rho = cfg.surface_resistance if resistance is None else resistance
    if rho <= 0:
        raise DomainError("normalization resistance must be positive", module="analysis")
    eta = aperture.area * abs(channel.amplitude) ** 2
    scale = float(np.sqrt(2.0 * power / (rho * eta)))
    return UncoupledBeamformer(channel=channel, power=power, resistance=rho,
                               matched_energy=eta, scale=scale)


@dataclass(frozen=True)
class Beampattern:
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    peak: float


def beampattern(w, cfg: PhysicalConfig, aperture: Aperture, theta, phi,
                order: int = 20) -> Beampattern:
    """Peak-normalized radiated far-field magnitude of a transmit distribution.

    w is a callable over surface points.  For each direction the aperture
    transform of w is weighted by the polarization projection of the field.
    """
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    th, ph = np.broadcast_arrays(th, ph)
    shape = th.shape
    grid = aperture_grid(aperture, order)
    wq = grid.weights * np.asarray(w(grid.points), dtype=complex)
    k0 = cfg.wavenumber
    tf = th.ravel()
    pf = ph.ravel()
    kx = k0 * np.cos(tf) * np.sin(pf)
    ky = k0 * np.sin(tf) * np.sin(pf)
    pol = 1.0 - (np.sin(tf) * np.sin(pf)) ** 2
    values = np.empty(tf.size)
    block = 4096
    px = grid.points[:, 0]
    py = grid.points[:, 1]
    for start in range(0, tf.size, block):
        sl = slice(start, min(start + block, tf.size))
        phase = np.exp(-1j * (np.outer(kx[sl], px) + np.outer(ky[sl], py)))
        values[sl] = pol[sl] * np.abs(phase @ wq)
    peak = float(np.max(values))
    if peak == 0.0:
        raise NumericError("beampattern is identically zero over the requested grid",
                           module="analysis")
    return Beampattern(theta=tf.reshape(shape), phi=pf.reshape(shape),
                       values=(values / peak).reshape(shape), peak=peak)


def half_power_width(angle: np.ndarray, values: np.ndarray) -> float:
    """Width of the main lobe where a peak-normalized pattern stays above 1/sqrt(2).

    The grid is assumed fine enough to resolve the lobe; crossings are
    located by linear interpolation, and a lobe truncated by the grid edge
    ends there.
    """
    a = np.asarray(angle, dtype=float)
    v = np.asarray(values, dtype=float)
    if a.ndim != 1 or a.shape != v.shape or a.size < 3:
        raise DomainError("angle and values must be matching 1-D arrays", module="analysis")
    level = np.max(v) / np.sqrt(2.0)
    i_pk = int(np.argmax(v))
    left = a[0]
    for i in range(i_pk, 0, -1):
        if v[i - 1] < level:
            frac = (level - v[i - 1]) / (v[i] - v[i - 1])
            left = a[i - 1] + frac * (a[i] - a[i - 1])
            break
    right = a[-1]
    for i in range(i_pk, a.size - 1):
        if v[i + 1] < level:
            frac = (v[i] - level) / (v[i] - v[i + 1])
            right = a[i] + frac * (a[i + 1] - a[i])
            break
    return float(right - left)


def coupling_ratio(cfg: PhysicalConfig, kappa):
    """Coupled-to-uncoupled spectral response ratio, normalized at broadside.

    Falls to zero on the propagating-disk boundary where the coupling
    spectrum diverges.
    """
    k = np.asarray(kappa, dtype=float)
    if k.shape[-1] not in (2, 3):
        raise DomainError("wavevector must have 2 or 3 components", module="analysis")
    k0 = cfg.wavenumber
    zs = cfg.surface_resistance
    n2 = (k[..., 0] ** 2 + k[..., 1] ** 2) / k0 ** 2
    rim = n2 == 1.0
    safe = np.where(rim, np.zeros_like(k[..., 0]), k[..., 0])
    kk = np.stack([safe, np.where(rim, 0.0, k[..., 1])], axis=-1)
    spectrum = wavenumber_kernel(kk, k0, cfg.impedance)
    ratio = np.where(rim, 0.0, 1.0 / (zs + spectrum))
    broadside = 1.0 / (zs + 0.5 * cfg.impedance)
    out = ratio / broadside
    return float(out) if out.ndim == 0 else out


def steered_gain_profile(cfg: PhysicalConfig, aperture: Aperture, plane: str,
                         phi, distance: float, order: int = 20,
                         power: float = 1.0) -> np.ndarray:
    """Closed-form array gain of the finite aperture along a principal plane."""
    from .kernel_approx import (beamform_ka, build_expansion, gram_matrix,
                                inverse_operator)
    if plane not in ("E", "H"):
        raise DomainError("plane must be 'E' or 'H'", module="analysis")
    ph = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.pi / 2 if plane == "E" else 0.0
    expansion = build_expansion(cfg, order)
    inverse = inverse_operator(expansion, gram_matrix(expansion, aperture),
                               cfg.surface_resistance)
    gains = np.empty(ph.size)
    for i, p in enumerate(ph):
        channel = far_field_channel(cfg, Direction(theta, float(p)), distance)
        if channel.amplitude == 0.0:
            gains[i] = 0.0
            continue
        bf = beamform_ka(cfg, channel, expansion, aperture, power=power, inverse=inverse)
        gains[i] = bf.gain
    return gains
