"""
Photon decay rates, coupling efficiency and cooperativity.

All rates are weak-loss estimates evaluated on the lossless mode: a mirror
of power transmission ``T`` leaks in proportion to the intensity next to
it, and an absorbing slab in proportion to the field energy stored inside
it.  The numerical FWHM from :mod:`multimembrane.tmm` is the exact referee.

Closed forms for the centre array use free-space lengths and accept the
``innermost_excess`` correction described in :mod:`multimembrane.coupling`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .core import C, KindMismatchError, extremal_ratio


def sinc(x):
    """``sin(x)/x`` with the removable singularity filled in."""
    return np.sinc(np.asarray(x) / np.pi) if np.ndim(x) else (math.sin(x) / x if x else 1.0)


def empty_cavity_decay(transmission, L):
    """Decay rate of an empty cavity with two mirrors of transmission ``T``."""
    return transmission * C / L


def _center_denominator(N, r, l, L, innermost_excess):
    G = extremal_ratio(r)
    return r + (G ** (N / 2) - (r * N + 1)) * l / L + r * (G ** (N / 2) - 1) * innermost_excess / L


# --- mirror leakage -----------------------------------------------------------

def mirror_decay(profile, transmission, transmission_right=None):
    """Leakage through both end mirrors: ``T*(c/2L)*A*(I_first + I_last)``."""
    t_right = transmission if transmission_right is None else transmission_right
    I = profile.intensities
    return (C / (2 * profile.length) * profile.absolute_intensity
            * (transmission * I[0] + t_right * I[-1]))


def center_config_mirror_decay(N, r, l, L, transmission, innermost_excess=0.0):
    """Mirror leakage of a centre array; ``N = 0`` gives the empty-cavity rate."""
    return C / L * r * transmission / _center_denominator(N, r, l, L, innermost_excess)


# --- absorption -------------------------------------------------------------------

def xi(phi, theta):
    """Fraction-of-field-volume factor ``(phi + sin(phi)*cos(2*theta + phi))/2`` of a slab."""
    return 0.5 * (phi + np.sin(phi) * np.cos(2 * np.asarray(theta) + phi))


def chi(n, phi, r, theta_r):
    """Geometric absorption factor of a slab sitting at the maximal-gradient phase."""
    return (phi * ((1 + n ** -2) + r * (1 - n ** -2) * math.cos(theta_r))
            + 2 * r / n * math.sin(theta_r))


def absorption_decay(profile, i, spec):
    """Absorption rate of slab ``i`` from its interior intensity and phase."""
    if not spec.is_slab:
        raise KindMismatchError("absorption_decay needs a slab; use thin_scatterer_absorption")
    phi = spec.n * profile.omega / C * spec.thickness
    I0 = profile.interior_intensity(i)
    theta0 = profile.interior_phase(i)
    return (4 * spec.n_imag * C / (spec.n ** 2 * profile.length) * profile.absolute_intensity
            * I0 * xi(phi, theta0))


def thin_scatterer_absorption(profile, i, spec):
    """Absorption rate of a zero-thickness scatterer with imaginary polarizability."""
    if spec.is_slab:
        raise KindMismatchError("thin_scatterer_absorption needs a thin scatterer")
    phi = profile.phase_before(i)
    return (profile.absolute_intensity * profile.left_intensity(i) * C / profile.length
            * 4 * spec.zeta_imag * math.cos(phi) ** 2)


def center_config_absorption_decay(N, r, theta_r, l, L, n, n_imag, d, omega,
                                   innermost_excess=0.0):
    phi = n * omega / C * d
    G = extremal_ratio(r)
    return (n_imag * C / L * chi(n, phi, r, theta_r) * (G ** (N / 2) - 1)
            / _center_denominator(N, r, l, L, innermost_excess))


@dataclass(frozen=True)
class DecayBreakdown:
    kappa_mirror: float
    kappa_absorption: np.ndarray
    kappa0: float

    def __post_init__(self):
        k = np.asarray(self.kappa_absorption, dtype=float)
        if self.kappa_mirror < 0 or np.any(k < 0):
            raise ValueError("decay rates must be non-negative")
        object.__setattr__(self, "kappa_absorption", k)

    @property
    def kappa_sigma(self):
        return float(self.kappa_absorption.sum())

    @property
    def total(self):
        return self.kappa_mirror + self.kappa_sigma


def decay_breakdown(config, profile):
    """Weak-loss decay rates of ``config`` evaluated on the lossless ``profile``."""
    t_left = config.mirror_left.transmission
    t_right = config.mirror_right.transmission
    km = mirror_decay(profile, t_left, t_right)
    ks = [absorption_decay(profile, i, m) if m.is_slab else thin_scatterer_absorption(profile, i, m)
          for i, m in enumerate(config.membranes)]
    return DecayBreakdown(km, np.array(ks), 0.5 * (t_left + t_right) * C / config.length)


# --- efficiency ------------------------------------------------------------------------

def _efficiency_prefactor(n, n_imag, wavelength, q_zpf):
    if not n_imag > 0:
        raise ValueError("efficiency is unbounded without absorption (n_imag must be > 0)")
    return q_zpf / wavelength * math.pi * (n * n - 1) / n_imag


def coupling_efficiency(n, n_imag, d, wavelength, theta0, q_zpf):
    """``|g|/kappa_sigma`` of one slab whose interior phase is ``theta0``."""
    pre = _efficiency_prefactor(n, n_imag, wavelength, q_zpf)
    phi = 2 * math.pi * n * d / wavelength
    s = sinc(phi)
    x = 2 * np.asarray(theta0) + phi
    return pre * np.abs(s * np.sin(x)) / (1 + s * np.cos(x))


@dataclass(frozen=True)
class EfficiencyReport:
    eta: np.ndarray
    eta_max: float

    @property
    def strong_coupling_possible(self):
        return self.eta_max > 1


def max_coupling_efficiency(n, n_imag, d, wavelength, q_zpf):
    """Largest single-slab efficiency over all field phases."""
    if not d > 0:
        raise ValueError("slab thickness must be positive; the bound diverges as d -> 0")
    pre = _efficiency_prefactor(n, n_imag, wavelength, q_zpf)
    s = sinc(2 * math.pi * n * d / wavelength)
    return pre * abs(s) / math.sqrt(1 - s * s)


def efficiency_peak_phases(n, d, wavelength):
    """The two interior phases in ``[0, pi)`` where the efficiency peaks.

    The efficiency is even in ``sin(2*theta0 + phi)``, so its maximum is
    reached twice per period with couplings of opposite sign.
    """
    phi = 2 * math.pi * n * d / wavelength
    x = math.acos(-sinc(phi))
    return tuple(sorted(((s * x - phi) / 2) % math.pi for s in (1, -1)))


def max_phase_coupling(n, d, wavelength):
    """Largest ``|I_plus - I_minus|`` over the interior phase at unit incident intensity."""
    phi = 2 * math.pi * n * d / wavelength

    def neg(th):
        I0 = 1 / (math.sin(th) ** 2 + math.cos(th) ** 2 / n ** 2)
        return -abs(I0 * (1 - n ** -2) * math.sin(phi) * math.sin(2 * th + phi))

    grid = np.linspace(0, math.pi, 2049)
    j = int(np.argmin([neg(t) for t in grid]))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    return -min(res.fun, neg(grid[j]))


def efficiency_report(spec, wavelength, thetas):
    """Efficiency at each interior phase together with the bound."""
    if not spec.is_slab:
        raise KindMismatchError("efficiency_report needs a slab")
    eta = coupling_efficiency(spec.n, spec.n_imag, spec.thickness, wavelength, thetas, spec.q_zpf)
    return EfficiencyReport(np.atleast_1d(eta),
                            max_coupling_efficiency(spec.n, spec.n_imag, spec.thickness,
                                                    wavelength, spec.q_zpf))


@dataclass(frozen=True)
class PhaseSweep:
    """Coupling, absorption and efficiency of one slab versus its interior phase.

    The intensity incident from the left is held fixed, so ``coupling`` is
    proportional to ``I_plus - I_minus`` and ``absorption`` to the energy
    stored in the slab.  Both are in arbitrary but common units.
    """

    theta0: np.ndarray
    coupling: np.ndarray
    absorption: np.ndarray
    efficiency: np.ndarray

    def normalized(self):
        return (np.abs(self.coupling) / np.abs(self.coupling).max(),
                self.absorption / self.absorption.max(),
                self.efficiency / self.efficiency.max())


def phase_sweep(spec, wavelength, thetas):
    if not spec.is_slab:
        raise KindMismatchError("phase_sweep needs a slab")
    n, d = spec.n, spec.thickness
    th = np.asarray(thetas, dtype=float)
    phi = 2 * math.pi * n * d / wavelength
    I0 = 1 / (np.sin(th) ** 2 + np.cos(th) ** 2 / n ** 2)
    dI = I0 * (1 - n ** -2) * math.sin(phi) * np.sin(2 * th + phi)
    k = I0 * xi(phi, th)
    eta = coupling_efficiency(n, spec.n_imag, d, wavelength, th, spec.q_zpf)
    return PhaseSweep(th, dI, k, eta)


# --- cooperativity -----------------------------------------------------------------------

def cooperativity(g_c, kappa, gamma_m):
    """Single-photon cooperativity ``4*g_c**2/(kappa*Gamma_m)``."""
    if not kappa > 0 or not gamma_m > 0:
        raise ValueError("decay rates must be positive")
    return 4 * g_c ** 2 / (kappa * gamma_m)


def reference_cooperativity(r, omega, L, q_zpf, transmission, gamma_m):
    """Cooperativity of one lossless, optimally placed membrane at the cavity centre."""
    g1 = 2 * q_zpf * omega * r / L
    return cooperativity(g1, empty_cavity_decay(transmission, L), gamma_m)


def cooperativity_enhancement(N, r, theta_r, l, L, n, n_imag, d, transmission, omega,
                              innermost_excess=0.0):
    """Cooperativity of a centre array of absorbing slabs relative to the lossless single membrane."""
    G = extremal_ratio(r)
    absorbed = n_imag * chi(n, n * omega / C * d, r, theta_r) * (G ** (N / 2) - 1)
    return (0.5 * r * transmission / (r * transmission + absorbed) * (G ** N - 1)
            / _center_denominator(N, r, l, L, innermost_excess))


def saturated_enhancement(r, transmission, n_imag, chi_value, L_over_l):
    """Many-membrane limit of the cooperativity enhancement for absorbing slabs."""
    return 0.5 * r * transmission / (n_imag * chi_value) * L_over_l


def thin_saturated_enhancement(r, transmission, absorptance, L_over_l):
    """Many-membrane limit of the enhancement for thin scatterers of absorptance ``A``."""
    return 0.5 * r * transmission / absorptance * L_over_l


@dataclass(frozen=True)
class ThinScattererFigures:
    g0: float
    kappa_sigma: float
    eta: float
    reflectance: float
    absorptance: float
    strong_coupling_possible: bool
    at_node: bool


def strong_coupling_condition(reflectance, absorptance, q_zpf, wavelength):
    """Necessary condition ``A/R < 4*pi*q_zpf/lambda`` for strong single-photon coupling."""
    return absorptance / reflectance < 4 * math.pi * q_zpf / wavelength


def thin_scatterer_figures(zeta, zeta_imag, phi_minus, q_zpf, wavelength, omega, L,
                           a_times_i_minus):
    """Coupling, absorption and efficiency of a thin scatterer seen by a field of phase ``phi_minus``.

    ``a_times_i_minus`` is the absolute intensity times the regional
    intensity on the scatterer's left.  At a field node the absorption
    vanishes, which the weak-loss model cannot describe; ``at_node`` is
    then set and the efficiency is NaN.
    """
    c, s = math.cos(phi_minus), math.sin(phi_minus)
    g0 = q_zpf * a_times_i_minus * omega / L * 4 * zeta * (zeta * c * c + s * c)
    kappa = a_times_i_minus * C / L * 4 * zeta_imag * c * c
    R = zeta ** 2 / (1 + zeta ** 2)
    A = 2 * zeta_imag / (1 + zeta ** 2)
    at_node = abs(c) < 1e-12
    if at_node or zeta_imag == 0:
        eta = math.nan
    else:
        eta = 2 * math.pi * q_zpf / wavelength * zeta / zeta_imag * abs(zeta + s / c)
    possible = R > 0 and strong_coupling_condition(R, A, q_zpf, wavelength)
    return ThinScattererFigures(g0, kappa, eta, R, A, possible, at_node)
