"""
Domain types, validation and geometry builders for one-dimensional
multi-membrane cavities.

Sign and phase conventions (used by every module of the package)
----------------------------------------------------------------
* Time dependence ``exp(-i*omega*t)``.  In a region of refractive index
  ``n`` the field is ``E(z) = a*exp(+i*n*k*z') + b*exp(-i*n*k*z')`` where
  ``z'`` is measured from the region's left boundary and ``k = omega/c``.
  ``a`` is the right-moving amplitude.
* A lossless standing wave has ``b = conj(a)`` so that
  ``E = 2|a| cos(n*k*z' + arg(a))``.  ``arg(a)`` is the *regional phase*.
* Regional intensity is ``I = eps * (2|a|)**2`` (``eps = n**2``), i.e. the
  interior of a slab carries ``sqrt(I0/n**2)`` as its field amplitude.
* ``(r, theta_r)`` are the magnitude and phase of the amplitude reflection
  coefficient for incidence from the left, referenced to the membrane's
  outer surfaces.  For a zero-thickness scatterer both surfaces coincide
  with the membrane position.
* Perfect end mirrors impose a field node (reflection amplitude -1).
* The coordinate origin is the cavity centre; membranes are indexed from 0,
  left to right.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

C = 299_792_458.0

SLAB = "slab"
THIN = "thin-scatterer"


class KindMismatchError(TypeError):
    """Operation applied to the wrong kind of membrane."""


class SolverError(RuntimeError):
    """Base class for numerical solver failures."""


class NotAModeError(SolverError):
    """Frequency passed as a resonance does not satisfy the boundary condition."""


class BranchTrackingError(SolverError):
    """Finite-difference resonance tracking jumped to another branch."""


class GeometryError(ValueError):
    """Geometry inconsistent with the closed-form configuration it claims to be."""


class CavityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MembraneSpec:
    """One optical element of the cavity.

    Use :meth:`slab`, :meth:`thin_scatterer` or :meth:`from_reflectivity`
    rather than the raw constructor.
    """

    kind: str
    n: float = 1.0
    n_imag: float = 0.0
    thickness: float = 0.0
    zeta: float = 0.0
    zeta_imag: float = 0.0
    q_zpf: float = 1e-15

    def __post_init__(self):
        if self.kind == SLAB:
            if not self.n > 1:
                raise ValueError(f"slab index must exceed 1, got {self.n}")
            if not self.thickness > 0:
                raise ValueError(f"slab thickness must be positive, got {self.thickness}")
            if self.n_imag < 0:
                raise ValueError("extinction coefficient must be >= 0")
        elif self.kind == THIN:
            if self.zeta_imag < 0:
                raise ValueError("imaginary polarizability must be >= 0")
            if self.thickness != 0:
                raise ValueError("thin scatterers have zero thickness")
        else:
            raise ValueError(f"unknown membrane kind {self.kind!r}")
        if not self.q_zpf > 0:
            raise ValueError("q_zpf must be positive")

    @classmethod
    def slab(cls, n, thickness, n_imag=0.0, q_zpf=1e-15):
        return cls(SLAB, n=float(n), n_imag=float(n_imag), thickness=float(thickness), q_zpf=q_zpf)

    @classmethod
    def thin_scatterer(cls, zeta, zeta_imag=0.0, q_zpf=1e-15):
        return cls(THIN, zeta=float(zeta), zeta_imag=float(zeta_imag), q_zpf=q_zpf)

    @classmethod
    def from_reflectivity(cls, r, zeta_imag=0.0, q_zpf=1e-15):
        """Lossless-limit thin scatterer with amplitude reflectivity ``r``."""
        if not 0 <= r < 1:
            raise ValueError(f"reflectivity must lie in [0, 1), got {r}")
        return cls.thin_scatterer(r / math.sqrt(1 - r * r), zeta_imag, q_zpf)

    @classmethod
    def from_reflectance_absorption(cls, reflectance, absorption, q_zpf=1e-15):
        """Thin scatterer from power reflectance and absorption (lowest order in the loss)."""
        if not 0 <= reflectance < 1:
            raise ValueError("reflectance must lie in [0, 1)")
        zeta = math.sqrt(reflectance / (1 - reflectance))
        return cls.thin_scatterer(zeta, 0.5 * absorption * (1 + zeta * zeta), q_zpf)

    @property
    def is_slab(self):
        return self.kind == SLAB

    @property
    def lossless(self):
        return (self.n_imag if self.is_slab else self.zeta_imag) == 0

    @property
    def index(self):
        return complex(self.n, self.n_imag)

    @property
    def polarizability(self):
        return complex(self.zeta, self.zeta_imag)

    def without_loss(self):
        return replace(self, n_imag=0.0, zeta_imag=0.0)

    def with_loss(self, loss):
        """Copy with the extinction coefficient (slab) or imaginary polarizability set."""
        if self.is_slab:
            return replace(self, n_imag=float(loss))
        return replace(self, zeta_imag=float(loss))


@dataclass(frozen=True)
class MirrorSpec:
    transmission: float = 0.0

    def __post_init__(self):
        if not 0 <= self.transmission < 0.01:
            raise ValueError(
                f"mirror transmission must be in [0, 0.01) (weak loss), got {self.transmission}")

    @property
    def model(self):
        return "perfect" if self.transmission == 0 else "partially-transmissive"

    @property
    def perfect(self):
        return self.transmission == 0


PERFECT = MirrorSpec()


@dataclass(frozen=True)
class ArrayDesign:
    """Bookkeeping attached to configurations made by the array builders.

    ``spacing`` and ``free_length`` are free-space lengths (membrane
    thickness excluded), which is what the closed-form couplings use.
    ``innermost_excess`` is the extra free-space length of the central gap
    of a centre array; ``mirror_gap`` is the free-space gap between the last
    membrane of an end-mirror array and the right mirror.
    """

    kind: str
    N: int
    r: float
    theta_r: float
    wavelength: float
    spacing: float
    free_length: float
    spacing_index: int
    length_index: int
    innermost_excess: float = 0.0
    mirror_gap: float = 0.0


@dataclass(frozen=True)
class CavityConfig:
    """Mirrors, wavelength and an ordered list of membranes.

    ``positions`` are centre-of-mass coordinates measured from the cavity
    centre.  Mirrors sit at ``-length/2`` and ``+length/2``.
    """

    wavelength: float
    length: float
    membranes: tuple = ()
    positions: tuple = ()
    mirror_left: MirrorSpec = PERFECT
    mirror_right: MirrorSpec = PERFECT
    design: Optional[ArrayDesign] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "membranes", tuple(self.membranes))
        object.__setattr__(self, "positions", tuple(float(q) for q in self.positions))
        if len(self.membranes) != len(self.positions):
            raise ValueError("one position per membrane required")

    @property
    def N(self):
        return len(self.membranes)

    @property
    def omega_design(self):
        return 2 * math.pi * C / self.wavelength

    @property
    def free_length(self):
        return self.length - sum(m.thickness for m in self.membranes)

    @property
    def lossless(self):
        return all(m.lossless for m in self.membranes)

    @property
    def perfect_mirrors(self):
        return self.mirror_left.perfect and self.mirror_right.perfect

    def without_loss(self):
        """Same geometry with lossless membranes and perfect mirrors."""
        return replace(self, membranes=tuple(m.without_loss() for m in self.membranes),
                       mirror_left=PERFECT, mirror_right=PERFECT)

    def with_mirrors(self, transmission, right=None):
        right = transmission if right is None else right
        return replace(self, mirror_left=MirrorSpec(transmission), mirror_right=MirrorSpec(right))

    def with_membranes(self, membranes):
        return replace(self, membranes=tuple(membranes))

    def with_positions(self, positions):
        return replace(self, positions=tuple(positions))

    def displaced(self, i, dq):
        q = list(self.positions)
        q[i] += dq
        return replace(self, positions=tuple(q))

    def reversed(self):
        """Mirror image of the configuration about the cavity centre."""
        return replace(self, membranes=self.membranes[::-1],
                       positions=tuple(-q for q in self.positions[::-1]),
                       mirror_left=self.mirror_right, mirror_right=self.mirror_left, design=None)

    def region_bounds(self):
        """(start, stop) of the 2N+1 regions, left to right; odd entries are membrane interiors."""
        bounds = []
        z = -0.5 * self.length
        for m, q in zip(self.membranes, self.positions):
            lo, hi = q - 0.5 * m.thickness, q + 0.5 * m.thickness
            bounds.append((z, lo))
            bounds.append((lo, hi))
            z = hi
        bounds.append((z, 0.5 * self.length))
        return bounds


@dataclass(frozen=True)
class FieldProfile:
    """Regional intensities and phases of one lossless resonant mode.

    Regions alternate free space / membrane interior, so membrane ``i``
    occupies region ``2*i + 1`` and is flanked by regions ``2*i`` and
    ``2*i + 2``.  Zero-thickness scatterers get an interior entry of zero
    length and zero intensity.
    """

    omega: float
    intensities: np.ndarray
    phases: np.ndarray
    lengths: np.ndarray
    absolute_intensity: float
    length: float
    indices: np.ndarray

    @property
    def N(self):
        return (len(self.intensities) - 1) // 2

    @property
    def interior_mask(self):
        mask = np.zeros(len(self.intensities), dtype=bool)
        mask[1::2] = True
        return mask

    def left_intensity(self, i):
        return self.intensities[2 * i]

    def right_intensity(self, i):
        return self.intensities[2 * i + 2]

    def interior_intensity(self, i):
        return self.intensities[2 * i + 1]

    def interior_phase(self, i):
        return self.phases[2 * i + 1]

    def phase_before(self, i):
        """Regional phase of the left standing wave evaluated at membrane ``i``'s left surface."""
        k = self.omega / C
        return self.phases[2 * i] + k * self.lengths[2 * i]

    def intensity_ratio(self, i):
        return self.right_intensity(i) / self.left_intensity(i)


@dataclass(frozen=True)
class CollectiveMode:
    """Collective displacement ``q_i = weights[i]*u + offsets[i]``."""

    weights: np.ndarray
    offsets: np.ndarray
    u_zpf: float = 1e-15

    def __post_init__(self):
        a = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.offsets, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("weights and offsets must be 1-D of equal length")
        if abs(np.dot(a, a) - 1) > 1e-12:
            raise ValueError(f"mode weights must satisfy sum(a**2) = 1, got {np.dot(a, a)!r}")
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "offsets", b)

    @classmethod
    def along(cls, direction, offsets, u_zpf=1e-15):
        """Normalised mode pointing along ``direction`` (e.g. the individual couplings)."""
        d = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(d)
        if norm == 0:
            raise ValueError("mode direction must be non-zero")
        return cls(d / norm, offsets, u_zpf)

    @classmethod
    def center_of_mass(cls, offsets, u_zpf=1e-15):
        n = len(offsets)
        return cls(np.full(n, 1 / math.sqrt(n)), offsets, u_zpf)

    def positions(self, u):
        return self.weights * u + self.offsets


@dataclass(frozen=True)
class FiguresOfMerit:
    g_individual: np.ndarray
    g_collective: float
    kappa_mirror: float
    kappa_absorption: float
    eta: Optional[np.ndarray] = None
    cooperativity: Optional[float] = None
    provenance: str = "analytic"

    def __post_init__(self):
        if self.kappa_mirror < 0 or self.kappa_absorption < 0:
            raise ValueError("decay rates must be non-negative")
        if self.cooperativity is not None and self.cooperativity < 0:
            raise ValueError("cooperativity must be non-negative")
        if self.provenance not in ("analytic", "numeric"):
            raise ValueError("provenance is 'analytic' or 'numeric'")

    @property
    def kappa_total(self):
        return self.kappa_mirror + self.kappa_absorption


@dataclass(frozen=True)
class Violation:
    field: str
    constraint: str

    def __str__(self):
        return f"{self.field}: {self.constraint}"


def _wrap_phase(theta):
    theta = math.remainder(theta, 2 * math.pi)
    return math.pi if theta <= -math.pi else theta


def membrane_reflectivity(spec, omega):
    """Lossless amplitude reflectivity ``(r, theta_r)`` of either membrane kind."""
    from . import tmm

    spec = spec.without_loss()
    m = tmm.slab_matrix(spec, omega) if spec.is_slab else tmm.thin_scatterer_matrix(spec)
    rho = -m[1, 0] / m[1, 1]
    return abs(rho), _wrap_phase(math.atan2(rho.imag, rho.real))


def slab_reflectivity(spec, omega):
    """Magnitude and phase of a slab's amplitude reflectivity.

    The extinction coefficient is ignored (weak-loss limit).  The phase is
    referenced to the slab's outer surfaces and lies in ``(-pi, pi]``.
    """
    if not spec.is_slab:
        raise KindMismatchError("slab_reflectivity needs a slab membrane")
    return membrane_reflectivity(spec, omega)


def slab_thickness_for_reflectivity(n, r, wavelength):
    """Thinnest lossless slab of index ``n`` reaching reflectivity ``r``."""
    r_max = (n * n - 1) / (n * n + 1)
    if not 0 < r <= r_max:
        raise ValueError(f"index {n} slab reaches reflectivity at most {r_max:.6g}")
    omega = 2 * math.pi * C / wavelength
    quarter = wavelength / (4 * n)
    if r == r_max:
        return quarter

    def f(d):
        return membrane_reflectivity(MembraneSpec.slab(n, d), omega)[0] - r

    return brentq(f, quarter * 1e-9, quarter, xtol=1e-16 * wavelength, rtol=4 * np.finfo(float).eps)


def extremal_ratio(r):
    """Largest intensity ratio a membrane of reflectivity ``r`` can impose."""
    return (1 + r) / (1 - r)


def center_array_spacing(theta_r, wavelength, spacing_index=0):
    return 0.5 * wavelength * (1.5 - theta_r / math.pi + spacing_index)


def center_array_free_length(N, theta_r, wavelength, spacing_index=0, length_index=0):
    """Free-space length of a resonant centre-array cavity with node mirrors."""
    l = center_array_spacing(theta_r, wavelength, spacing_index)
    return (N - 1) * l + wavelength * (1.25 - theta_r / (2 * math.pi) + length_index)


def mirror_array_spacing(theta_r, wavelength, spacing_index=0):
    return wavelength * (0.75 - theta_r / (2 * math.pi) + spacing_index)


def mirror_array_free_length(N, theta_r, wavelength, spacing_index=0, length_index=0):
    l = mirror_array_spacing(theta_r, wavelength, spacing_index)
    return (N - 0.5) * l + 0.5 * wavelength * (1.75 - theta_r / (2 * math.pi) + length_index)


def _check_indices(spacing_index, length_index):
    for name, v in (("spacing_index", spacing_index), ("length_index", length_index)):
        if int(v) != v or v < 0:
            raise ValueError(f"{name} must be a non-negative integer, got {v}")


def build_center_array(N, membrane, wavelength, spacing_index=0, length_index=0,
                       mirrors=(PERFECT, PERFECT)):
    """Even array centred in the cavity with intensity growing by Gamma towards the centre.

    Free-space gaps are ``l`` except the central one, which is ``l + lambda/4``.
    """
    if int(N) != N or N < 2 or N % 2:
        raise ValueError(f"centre array needs an even N >= 2, got {N}")
    _check_indices(spacing_index, length_index)
    N = int(N)
    omega = 2 * math.pi * C / wavelength
    r, theta = membrane_reflectivity(membrane, omega)
    d = membrane.thickness
    l = center_array_spacing(theta, wavelength, spacing_index)
    excess = 0.25 * wavelength
    free = center_array_free_length(N, theta, wavelength, spacing_index, length_index)
    pitch = l + d
    inner = -0.5 * (d + l + excess)
    half = [inner - j * pitch for j in range(N // 2)][::-1]
    positions = half + [-q for q in half[::-1]]
    design = ArrayDesign("center-array", N, r, theta, wavelength, l, free, int(spacing_index),
                         int(length_index), innermost_excess=excess)
    return CavityConfig(wavelength, free + N * d, (membrane,) * N, positions,
                        mirrors[0], mirrors[1], design)


def build_mirror_array(N, membrane, wavelength, spacing_index=0, length_index=0,
                       mirrors=(PERFECT, PERFECT)):
    """Array next to the right mirror with intensity growing by Gamma towards that mirror."""
    if int(N) != N or N < 1:
        raise ValueError(f"mirror array needs N >= 1, got {N}")
    _check_indices(spacing_index, length_index)
    N = int(N)
    omega = 2 * math.pi * C / wavelength
    r, theta = membrane_reflectivity(membrane, omega)
    d = membrane.thickness
    l = mirror_array_spacing(theta, wavelength, spacing_index)
    free = mirror_array_free_length(N, theta, wavelength, spacing_index, length_index)
    # closest node-compatible gap to l/2; shifted by lambda/2 when it would crowd the mirror
    gap = 0.5 * l - 0.125 * wavelength
    if gap < 0.125 * wavelength:
        gap += 0.5 * wavelength
    length = free + N * d
    last = 0.5 * length - gap - 0.5 * d
    positions = [last - j * (l + d) for j in range(N)][::-1]
    design = ArrayDesign("mirror-array", N, r, theta, wavelength, l, free, int(spacing_index),
                         int(length_index), mirror_gap=gap)
    return CavityConfig(wavelength, length, (membrane,) * N, positions, mirrors[0], mirrors[1],
                        design)


def empty_cavity(wavelength, length, mirrors=(PERFECT, PERFECT)):
    return CavityConfig(wavelength, length, (), (), mirrors[0], mirrors[1])


def validate(config):
    """List every violated invariant of ``config``; never raises."""
    out = []
    try:
        lam, L = config.wavelength, config.length
        if not lam > 0:
            out.append(Violation("wavelength", "must be positive"))
        if not L > 0:
            out.append(Violation("length", "must be positive"))
            return out
        if lam > 0 and L < 100 * lam:
            warnings.warn(f"cavity length {L:g} m is below 100 wavelengths", CavityWarning,
                          stacklevel=2)
        for side in ("mirror_left", "mirror_right"):
            if not isinstance(getattr(config, side), MirrorSpec):
                out.append(Violation(side, "must be a MirrorSpec"))
        q = config.positions
        for i in range(1, len(q)):
            if not q[i] > q[i - 1]:
                out.append(Violation(f"positions[{i}]", "positions must be strictly increasing"))
        for i, (m, qi) in enumerate(zip(config.membranes, q)):
            if not isinstance(m, MembraneSpec):
                out.append(Violation(f"membranes[{i}]", "must be a MembraneSpec"))
                continue
            lo, hi = qi - 0.5 * m.thickness, qi + 0.5 * m.thickness
            if not (-0.5 * L < lo and hi < 0.5 * L):
                out.append(Violation(f"membranes[{i}]", "must lie strictly between the mirrors"))
        for i in range(len(q) - 1):
            m0, m1 = config.membranes[i], config.membranes[i + 1]
            hi0 = q[i] + 0.5 * getattr(m0, "thickness", 0.0)
            lo1 = q[i + 1] - 0.5 * getattr(m1, "thickness", 0.0)
            if not hi0 < lo1:
                out.append(Violation(f"membranes[{i}],membranes[{i + 1}]",
                                     "membranes must not overlap"))
    except Exception as exc:  # validation never throws
        out.append(Violation("config", f"malformed: {exc}"))
    return out


def require_valid(config):
    problems = validate(config)
    if problems:
        raise ValueError("invalid cavity configuration: " + "; ".join(map(str, problems)))
    return config


def length_index_for_ratio(kind, N, theta_r, wavelength, spacing_index, target, rtol=0.01):
    """Smallest length index whose free length over spacing is within ``rtol`` of ``target``."""
    if kind == "center-array":
        l = center_array_spacing(theta_r, wavelength, spacing_index)
        base = center_array_free_length(N, theta_r, wavelength, spacing_index, 0)
        unit = wavelength
    elif kind == "mirror-array":
        l = mirror_array_spacing(theta_r, wavelength, spacing_index)
        base = mirror_array_free_length(N, theta_r, wavelength, spacing_index, 0)
        unit = 0.5 * wavelength
    else:
        raise ValueError(f"unknown array kind {kind!r}")
    lo = max(0, math.ceil(((1 - rtol) * target * l - base) / unit))
    if abs((base + lo * unit) / l - target) > rtol * target:
        raise ValueError(f"no length index reaches L/l = {target} within {rtol:.0%}")
    return lo
