"""
Closed-form optomechanical couplings.

Single-membrane couplings follow from the jump in standing-wave intensity
across the membrane, ``g = q_zpf * A * (omega/L) * (I_plus - I_minus)``.
For the two optimal array geometries the regional intensities form a
geometric ladder with ratio ``Gamma = (1 + r)/(1 - r)``, which gives the
individual couplings, the collective coupling and their saturation values
in closed form.

The array formulas work with free-space lengths: ``l`` is the gap between
neighbouring membrane surfaces and ``L`` the free-space part of the cavity,
i.e. the energy stored inside the membranes is neglected (thin
approximation).  Two small geometric corrections are carried explicitly:

* ``innermost_excess``: the central gap of a centre array is longer than
  ``l`` by a quarter wavelength.  The bare formulas (``innermost_excess=0``)
  treat it as ``l``.
* ``mirror_gap``: the gap between an end-mirror array and its mirror.  The
  bare formulas take it to be ``l/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (C, CavityConfig, GeometryError, center_array_free_length, extremal_ratio,
                   mirror_array_free_length)

__all__ = [
    "extremal_ratio", "intensity_ratio", "absolute_intensity", "coupling_from_profile",
    "couplings_from_profile", "reference_coupling", "coupling_general_position",
    "collective_coupling", "collective_strength", "CenterArrayAnalytics",
    "MirrorArrayAnalytics", "center_config_analytics", "mirror_config_analytics",
    "analytics_for", "evenly_spaced_reference",
]


def intensity_ratio(r, theta_r, phi_minus):
    """Ratio of regional intensities right/left of a membrane.

    ``phi_minus`` is the phase of the left standing wave at the membrane's
    left surface.  Works element-wise on arrays.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= 1):
        raise ValueError("reflectivity must lie in [0, 1)")
    out = (1 - 2 * r * np.cos(2 * np.asarray(phi_minus) + theta_r) + r * r) / (1 - r * r)
    return out if np.ndim(out) else float(out)


def absolute_intensity(intensities, lengths, L, thin=False, interior=None):
    """``A = 1 / sum(I_i * L_i / L)``.

    With ``thin=True`` the terms flagged by ``interior`` (default: every odd
    region, i.e. the membrane interiors of a profile) are dropped.
    """
    I = np.asarray(intensities, dtype=float)
    Li = np.asarray(lengths, dtype=float)
    if I.shape != Li.shape:
        raise ValueError("one length per region required")
    if np.any(Li < 0):
        raise ValueError("region lengths must be non-negative")
    if thin:
        if interior is None:
            interior = np.zeros(len(I), dtype=bool)
            interior[1::2] = True
        Li = np.where(interior, 0.0, Li)
    if not np.any(Li > 0):
        raise ValueError("all region lengths are zero")
    return float(L / np.dot(I, Li))


def coupling_from_profile(profile, i, q_zpf):
    """Signed coupling of membrane ``i`` (0-based) from a field profile."""
    if not 0 <= i < profile.N:
        raise IndexError(f"membrane index {i} out of range for N={profile.N}")
    dI = profile.right_intensity(i) - profile.left_intensity(i)
    return q_zpf * profile.absolute_intensity * profile.omega / profile.length * dI


def couplings_from_profile(profile, q_zpf):
    I = profile.intensities
    return q_zpf * profile.absolute_intensity * profile.omega / profile.length * (I[2::2] - I[0:-1:2])


def reference_coupling(r, omega, L, q_zpf):
    """Coupling of one optimally placed membrane at the cavity centre, ``2*q_zpf*omega*r/L``."""
    return 2 * q_zpf * omega * r / L


def coupling_general_position(q_over_L, r, omega, L, q_zpf):
    """Coupling of a single membrane at the maximal-gradient phase, a distance ``q`` from the centre."""
    if abs(q_over_L) >= 0.5:
        raise ValueError("membrane must sit strictly between the mirrors (|q/L| < 1/2)")
    if not 0 <= r < 1:
        raise ValueError("reflectivity must lie in [0, 1)")
    return reference_coupling(r, omega, L, q_zpf) / (1 - 2 * r * q_over_L)


def collective_coupling(g, weights, atol=1e-12):
    """Coupling of the collective mode with unit-norm ``weights``."""
    a = np.asarray(weights, dtype=float)
    g = np.asarray(g, dtype=float)
    if a.shape != g.shape:
        raise ValueError("one weight per membrane required")
    if abs(np.dot(a, a) - 1) > atol:
        raise ValueError(f"weights must satisfy sum(a**2) = 1, got {np.dot(a, a)!r}")
    return float(np.dot(a, g))


def collective_strength(g):
    """Largest collective coupling, reached by the mode along the coupling vector."""
    return float(np.linalg.norm(np.asarray(g, dtype=float)))


def _near_integer(x, tol):
    return abs(x - round(x)) <= tol and round(x) >= 0


@dataclass(frozen=True)
class CenterArrayAnalytics:
    N: int
    r: float
    theta_r: float
    l: float
    L: float
    wavelength: float
    q_zpf: float
    innermost_excess: float = 0.0

    @property
    def gamma(self):
        return extremal_ratio(self.r)

    @property
    def omega(self):
        return 2 * math.pi * C / self.wavelength

    @property
    def g1(self):
        return reference_coupling(self.r, self.omega, self.L, self.q_zpf)

    @property
    def denominator(self):
        G, r, N = self.gamma, self.r, self.N
        return (r + (G ** (N / 2) - (r * N + 1)) * self.l / self.L
                + r * (G ** (N / 2) - 1) * self.innermost_excess / self.L)

    @property
    def g_individual(self):
        G, half = self.gamma, self.N // 2
        ladder = G ** np.arange(half)
        prefactor = 0.5 * self.g1 * (G - 1) / self.denominator
        return prefactor * np.concatenate([ladder, -ladder[::-1]])

    @property
    def g_c(self):
        return (self.g1 * math.sqrt(self.r / 2) * math.sqrt(self.gamma ** self.N - 1)
                / self.denominator)

    @property
    def g_sat(self):
        return math.sqrt(2 * self.r ** 3) * self.q_zpf / self.l * self.omega


@dataclass(frozen=True)
class MirrorArrayAnalytics:
    N: int
    r: float
    theta_r: float
    l: float
    L: float
    wavelength: float
    q_zpf: float
    mirror_gap: float = None

    @property
    def gamma(self):
        return extremal_ratio(self.r)

    @property
    def omega(self):
        return 2 * math.pi * C / self.wavelength

    @property
    def g1(self):
        return reference_coupling(self.r, self.omega, self.L, self.q_zpf)

    @property
    def denominator(self):
        G, r, N = self.gamma, self.r, self.N
        den = r + 0.5 * (G ** N - (2 * r * N + 1)) * self.l / self.L
        if self.mirror_gap is not None:
            den += r * (G ** N - 1) * (self.mirror_gap - 0.5 * self.l) / self.L
        return den

    @property
    def g_individual(self):
        G = self.gamma
        return 0.5 * self.g1 * (G - 1) / self.denominator * G ** np.arange(self.N)

    @property
    def g_c(self):
        return (self.g1 * 0.5 * math.sqrt(self.r) * math.sqrt(self.gamma ** (2 * self.N) - 1)
                / self.denominator)

    @property
    def g_sat(self):
        return 2 * math.sqrt(self.r ** 3) * self.q_zpf / self.l * self.omega


def _check_center_geometry(N, theta_r, l, L, wavelength, tol=1e-9):
    ns = l / (0.5 * wavelength) - 1.5 + theta_r / math.pi
    if not _near_integer(ns, tol * 2):
        raise GeometryError(f"spacing {l!r} is not an allowed centre-array spacing")
    nL = (L - center_array_free_length(N, theta_r, wavelength, 0, 0)) / wavelength
    if not _near_integer(nL, tol):
        raise GeometryError(f"free length {L!r} is not resonant for a centre array")


def _check_mirror_geometry(N, theta_r, l, L, wavelength, tol=1e-9):
    ns = l / wavelength - 0.75 + theta_r / (2 * math.pi)
    if not _near_integer(ns, tol):
        raise GeometryError(f"spacing {l!r} is not an allowed end-mirror-array spacing")
    nL = (L - mirror_array_free_length(N, theta_r, wavelength, round(ns), 0)) / (0.5 * wavelength)
    if not _near_integer(nL, tol * 2):
        raise GeometryError(f"free length {L!r} is not resonant for an end-mirror array")


def center_config_analytics(N, r, theta_r, l, L, wavelength, q_zpf, innermost_excess=0.0,
                            check_geometry=True):
    """Closed-form couplings of a centre array with free spacing ``l`` and free length ``L``."""
    if int(N) != N or N < 2 or N % 2:
        raise ValueError(f"centre array needs an even N >= 2, got {N}")
    if not 0 <= r < 1:
        raise ValueError("reflectivity must lie in [0, 1)")
    if check_geometry:
        _check_center_geometry(int(N), theta_r, l, L, wavelength)
    return CenterArrayAnalytics(int(N), r, theta_r, l, L, wavelength, q_zpf, innermost_excess)


def mirror_config_analytics(N, r, theta_r, l, L, wavelength, q_zpf, mirror_gap=None,
                            check_geometry=True):
    """Closed-form couplings of an array next to the right mirror.

    ``mirror_gap=None`` keeps the bare formulas (gap of ``l/2``).
    """
    if int(N) != N or N < 1:
        raise ValueError(f"end-mirror array needs N >= 1, got {N}")
    if not 0 <= r < 1:
        raise ValueError("reflectivity must lie in [0, 1)")
    if check_geometry:
        _check_mirror_geometry(int(N), theta_r, l, L, wavelength)
    return MirrorArrayAnalytics(int(N), r, theta_r, l, L, wavelength, q_zpf, mirror_gap)


def analytics_for(config, q_zpf, exact_geometry=True):
    """Closed forms matching a configuration made by one of the array builders.

    With ``exact_geometry`` the innermost-gap or mirror-gap correction of
    the builder's geometry is included.
    """
    d = config.design
    if d is None:
        raise GeometryError("configuration carries no array design")
    if d.kind == "center-array":
        return center_config_analytics(d.N, d.r, d.theta_r, d.spacing, d.free_length,
                                       d.wavelength, q_zpf,
                                       d.innermost_excess if exact_geometry else 0.0)
    return mirror_config_analytics(d.N, d.r, d.theta_r, d.spacing, d.free_length,
                                   d.wavelength, q_zpf, d.mirror_gap if exact_geometry else None)


def evenly_spaced_reference(N, membrane, wavelength, spacing, length):
    """Evenly spaced array of ``N`` membranes with pitch ``spacing`` centred in a cavity.

    This is the comparison geometry for collective-coupling sweeps: the
    same membranes at the same approximate spacing but without the
    phase-engineered ladder.
    """
    offset = 0.5 * (N - 1) * spacing
    positions = [j * spacing - offset for j in range(N)]
    return CavityConfig(wavelength, length, (membrane,) * N, positions)
