"""
Plane-wave transfer matrices for a 1D cavity and the numerical oracle built on them.

A transfer matrix maps the amplitudes ``(a, b)`` of the right- and
left-moving waves at one reference plane to those at a plane further right.
The conventions are documented in :mod:`multimembrane.core`.

Lossless resonances are found by shooting: a field with a node on the left
mirror is carried through the cavity and the field value on the right mirror
is the residual.  Lossy systems are only ever characterised through their
transmission spectra.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import (C, BranchTrackingError, FieldProfile, KindMismatchError, NotAModeError,
                   SolverError)

DEFAULT_SCAN_DENSITY = 64
DEFAULT_FD_FRACTION = 1e-6
MODE_TOLERANCE = 1e-6
RICHARDSON_TOLERANCE = 1e-4


class LinewidthError(SolverError):
    pass


class PeakClippedError(LinewidthError):
    pass


class UnderResolvedError(LinewidthError):
    pass


class ScanResolutionWarning(UserWarning):
    pass


class PerfectMirror:
    """Boundary condition of an ideal mirror: field node, reflection amplitude -1."""

    reflection = -1.0
    transmission = 0.0

    def __repr__(self):
        return "PerfectMirror()"


# --- elementary matrices --------------------------------------------------

def propagation_matrix(length, omega, index=1.0):
    """Propagation over ``length`` in a medium of complex refractive ``index``."""
    if length < 0:
        raise ValueError(f"propagation length must be >= 0, got {length}")
    phase = complex(index) * omega / C * length
    return np.array([[cmath.exp(1j * phase), 0], [0, cmath.exp(-1j * phase)]])


def interface_matrix(n1, n2):
    """Step from index ``n1`` (left) to ``n2`` (right); E and H continuous."""
    n1, n2 = complex(n1), complex(n2)
    return np.array([[n2 + n1, n2 - n1], [n2 - n1, n2 + n1]]) / (2 * n2)


def slab_matrix(spec, omega):
    if not spec.is_slab:
        raise KindMismatchError("slab_matrix needs a slab membrane")
    n = spec.index
    return (interface_matrix(n, 1) @ propagation_matrix(spec.thickness, omega, n)
            @ interface_matrix(1, n))


def thin_scatterer_matrix(spec):
    if spec.is_slab:
        raise KindMismatchError("thin_scatterer_matrix needs a thin scatterer")
    z, zt = spec.zeta, spec.zeta_imag
    return np.array([[1 - zt + 1j * z, -zt + 1j * z],
                     [zt - 1j * z, 1 + zt - 1j * z]])


def membrane_matrix(spec, omega):
    return slab_matrix(spec, omega) if spec.is_slab else thin_scatterer_matrix(spec)


def mirror_matrix(spec):
    """Matrix of a partially transmissive mirror, or a :class:`PerfectMirror` marker.

    The mirror is a lossless two-port with reflection ``-sqrt(1 - T)`` from
    either side and transmission ``i*sqrt(T)``.
    """
    if spec.perfect:
        return PerfectMirror()
    t = spec.transmission
    rt = math.sqrt(1 - t) / math.sqrt(t)
    return np.array([[1j / math.sqrt(t), 1j * rt], [-1j * rt, -1j / math.sqrt(t)]])


def reflection_transmission(matrix):
    """Left-incidence amplitude reflection and transmission of a two-port."""
    m = np.asarray(matrix)
    rho = -m[1, 0] / m[1, 1]
    return rho, np.linalg.det(m) / m[1, 1]


# --- fast entry-wise engine ------------------------------------------------
# Matrices are carried as 4-tuples (m00, m01, m10, m11) of python complex
# numbers or numpy arrays so the same code serves scalar bisection and
# vectorised scans.

def _layout(config):
    """Free-space gaps (len N+1) interleaved with membranes."""
    gaps = []
    z = -0.5 * config.length
    for m, q in zip(config.membranes, config.positions):
        gaps.append((q - 0.5 * m.thickness) - z)
        z = q + 0.5 * m.thickness
    gaps.append(0.5 * config.length - z)
    return gaps


def _entries(spec, k, exp):
    if not spec.is_slab:
        z, zt = spec.zeta, spec.zeta_imag
        return (1 - zt + 1j * z, -zt + 1j * z, zt - 1j * z, 1 + zt - 1j * z)
    n = spec.index
    p = exp(1j * n * k * spec.thickness)
    m = 1 / p
    s = (n * n - 1) * (p - m) / (4 * n)
    return (((n + 1) ** 2 * p - (n - 1) ** 2 * m) / (4 * n), s, -s,
            ((n + 1) ** 2 * m - (n - 1) ** 2 * p) / (4 * n))


def _shoot(config, omega, exp, a, b, record=None):
    """Carry amplitudes from the left mirror face to the right one."""
    k = omega / C
    gaps = _layout(config)
    for gap, spec in zip(gaps, config.membranes):
        if record is not None:
            record.append((a, b))
        p = exp(1j * k * gap)
        a, b = a * p, b / p
        if record is not None:
            record.append((a, b))
        m00, m01, m10, m11 = _entries(spec, k, exp)
        a, b = m00 * a + m01 * b, m10 * a + m11 * b
    if record is not None:
        record.append((a, b))
    p = exp(1j * k * gaps[-1])
    return a * p, b / p


def _product(config, omega, exp):
    """Total matrix as entries, built from the two basis vectors."""
    a0, b0 = _shoot(config, omega, exp, 1.0 + 0j, 0j)
    a1, b1 = _shoot(config, omega, exp, 0j, 1.0 + 0j)
    return a0, a1, b0, b1


def assemble(config, omega):
    """Transfer matrix from the inner face of the left mirror to that of the right one."""
    from .core import require_valid

    require_valid(config)
    m00, m01, m10, m11 = _product(config, float(omega), cmath.exp)
    return np.array([[m00, m01], [m10, m11]])


def _require_lossless(config, what):
    if not config.lossless:
        raise SolverError(f"{what} needs lossless membranes; characterise lossy systems "
                          "with transmission_spectrum")
    if not config.perfect_mirrors:
        raise SolverError(f"{what} needs perfect mirrors; use transmission_spectrum for "
                          "transmissive ones")


# node on the left mirror: E = sin(k z')
_NODE_START = (-0.5j, 0.5j)


def resonance_residual(config, omega):
    """Field on the right mirror of a mode that has a node on the left mirror.

    Zeros are the lossless resonances.  Accepts a scalar or an array of
    angular frequencies.
    """
    _require_lossless(config, "resonance_residual")
    if np.ndim(omega) == 0:
        a, b = _shoot(config, float(omega), cmath.exp, *_NODE_START)
        return (a + b).real
    w = np.asarray(omega, dtype=float)
    a, b = _shoot(config, w, np.exp, np.full(w.shape, _NODE_START[0]),
                  np.full(w.shape, _NODE_START[1]))
    return (a + b).real


def free_spectral_range(config):
    return math.pi * C / config.length


def scan_step(config, scan_density=DEFAULT_SCAN_DENSITY):
    return free_spectral_range(config) / (scan_density * (config.N + 1))


def _refine(config, lo, hi, rtol):
    f = lambda w: resonance_residual(config, w)
    fa, fb = f(lo), f(hi)
    # vectorised and scalar evaluation can disagree in the last bits when a
    # root sits on a grid point; the endpoint is then the root
    if fa * fb >= 0:
        return lo if abs(fa) <= abs(fb) else hi
    return brentq(f, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=200)


def _roots_on_grid(config, grid, rtol):
    vals = resonance_residual(config, grid)
    roots = []
    for j in range(len(grid) - 1):
        if vals[j] == 0:
            roots.append(grid[j])
        elif vals[j] * vals[j + 1] < 0:
            roots.append(_refine(config, grid[j], grid[j + 1], rtol))
    if vals[-1] == 0:
        roots.append(grid[-1])
    return roots


def find_resonances(config, omega_min, omega_max, scan_density=DEFAULT_SCAN_DENSITY,
                    rtol=1e-12):
    """All lossless resonances in ``[omega_min, omega_max]`` by uniform scan and bisection."""
    if not omega_max > omega_min:
        raise ValueError("empty frequency window")
    _require_lossless(config, "find_resonances")
    step = scan_step(config, scan_density)
    count = int(math.ceil((omega_max - omega_min) / step))
    grid = np.linspace(omega_min, omega_max, count + 1)
    roots = _roots_on_grid(config, grid, rtol)
    h = grid[1] - grid[0]
    if any(b - a < 4 * h for a, b in zip(roots, roots[1:])):
        warnings.warn("adjacent resonances closer than 4 scan steps; increase scan_density",
                      ScanResolutionWarning, stacklevel=2)
    return roots


def nearest_resonance(config, omega, window=None, rtol=0.0, scan_density=DEFAULT_SCAN_DENSITY):
    """Resonance closest to ``omega``, searched in a small window around it."""
    h = scan_step(config, scan_density) if window is None else window
    for width in (h, 4 * h, 16 * h):
        grid = np.linspace(omega - width, omega + width, 33)
        roots = _roots_on_grid(config, grid, rtol)
        if roots:
            return min(roots, key=lambda w: abs(w - omega))
    # scatterers can bunch modes and open gaps of a few free spectral ranges
    span = (config.N + 2) * free_spectral_range(config)
    if 16 * h < span:
        count = int(math.ceil(2 * span / scan_step(config, scan_density)))
        roots = _roots_on_grid(config, np.linspace(omega - span, omega + span, count + 1), rtol)
        if roots:
            return min(roots, key=lambda w: abs(w - omega))
    raise SolverError(f"no resonance within {max(16 * h, span):.3g} rad/s of {omega:.17g}")


def design_resonance(config, scan_density=DEFAULT_SCAN_DENSITY):
    """Resonance nearest the configuration's design frequency ``2*pi*c/wavelength``."""
    return nearest_resonance(config, config.omega_design, scan_density=scan_density)


# --- field profile ------------------------------------------------------------

def field_profile(config, omega, tolerance=MODE_TOLERANCE):
    """Regional intensities, phases and absolute intensity of a lossless mode.

    Raises :class:`NotAModeError` when the right-mirror field exceeds
    ``tolerance`` times the largest standing-wave amplitude in the cavity.
    """
    _require_lossless(config, "field_profile")
    omega = float(omega)
    record = []
    a, b = _shoot(config, omega, cmath.exp, *_NODE_START, record=record)
    amp_max = max(2 * abs(x) for x, _ in record + [(a, b)])
    if abs((a + b).real) > tolerance * amp_max:
        raise NotAModeError(f"omega={omega!r} is not a resonance "
                            f"(residual {abs(a + b) / amp_max:.3g} of field scale)")
    # record holds, per membrane, the amplitudes at the gap start and at the
    # membrane's left surface, plus the amplitudes at the last gap start
    k = omega / C
    gaps = _layout(config)
    intens, phases, lengths, indices = [], [], [], []
    for i, spec in enumerate(config.membranes):
        a_gap, _ = record[2 * i]
        a_surf, b_surf = record[2 * i + 1]
        intens.append(4 * abs(a_gap) ** 2)
        phases.append(cmath.phase(a_gap))
        lengths.append(gaps[i])
        indices.append(1.0)
        if spec.is_slab:
            n = spec.n
            # amplitude just inside the left surface
            a_in = ((n + 1) * a_surf + (n - 1) * b_surf) / (2 * n)
            intens.append(n * n * 4 * abs(a_in) ** 2)
            phases.append(cmath.phase(a_in))
            lengths.append(spec.thickness)
            indices.append(n)
        else:
            intens.append(0.0)
            phases.append(math.nan)
            lengths.append(0.0)
            indices.append(1.0)
    a_last, _ = record[-1]
    intens.append(4 * abs(a_last) ** 2)
    phases.append(cmath.phase(a_last))
    lengths.append(gaps[-1])
    indices.append(1.0)
    intens = np.array(intens)
    intens /= intens.sum()
    lengths = np.array(lengths)
    A = config.length / np.dot(intens, lengths)
    return FieldProfile(omega, intens, np.array(phases), lengths, float(A), config.length,
                        np.array(indices))


# --- spectra ------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    omega: np.ndarray
    transmission: np.ndarray

    def __post_init__(self):
        if self.omega.shape != self.transmission.shape:
            raise ValueError("grid and transmission must match")

    @property
    def peak_index(self):
        return int(np.argmax(self.transmission))


def _mirror_entries(spec):
    m = mirror_matrix(spec)
    return m[0, 0], m[0, 1], m[1, 0], m[1, 1]


def _mul(x, y):
    x00, x01, x10, x11 = x
    y00, y01, y10, y11 = y
    return (x00 * y00 + x01 * y10, x00 * y01 + x01 * y11,
            x10 * y00 + x11 * y10, x10 * y01 + x11 * y11)


def _transmission(config, omega, exp):
    inner = _product(config, omega, exp)
    total = _mul(_mirror_entries(config.mirror_right), _mul(inner, _mirror_entries(config.mirror_left)))
    det = total[0] * total[3] - total[1] * total[2]
    return np.abs(det / total[3]) ** 2


def transmission_spectrum(config, omega):
    """Transmitted power fraction through both mirrors at each grid frequency."""
    w = np.asarray(omega, dtype=float)
    if not (config.mirror_left.transmission > 0 and config.mirror_right.transmission > 0):
        warnings.warn("a perfect mirror blocks transmission; spectrum is identically zero",
                      stacklevel=2)
        return Spectrum(w, np.zeros_like(w))
    return Spectrum(w, np.asarray(_transmission(config, w, np.exp), dtype=float))


def fwhm_linewidth(spectrum, peak_index=None, min_points=20):
    """Full width at half maximum of one transmission peak.

    The peak height comes from a parabola through the three samples around
    the maximum of ``1/T``; each flank crossing is found by linear
    interpolation of ``1/T``, which is monotone on either side of the peak.
    """
    w, t = spectrum.omega, spectrum.transmission
    j = spectrum.peak_index if peak_index is None else int(peak_index)
    if j <= 0 or j >= len(w) - 1:
        raise PeakClippedError("peak sits on the edge of the grid")
    inv = 1 / t[j - 1:j + 2]
    denom = inv[0] - 2 * inv[1] + inv[2]
    height = t[j]
    if denom > 0:
        height = 1 / (inv[1] - (inv[2] - inv[0]) ** 2 / (8 * denom))
    half = 0.5 * height
    lo = j
    while lo > 0 and t[lo] > half:
        lo -= 1
    hi = j
    while hi < len(w) - 1 and t[hi] > half:
        hi += 1
    if t[lo] > half or t[hi] > half:
        raise PeakClippedError("half maximum not reached inside the grid")
    if hi - lo - 1 < min_points:
        raise UnderResolvedError(f"only {hi - lo - 1} samples above half maximum, "
                                 f"need {min_points}")
    target = 1 / half

    def crossing(i0, i1):
        y0, y1 = 1 / t[i0], 1 / t[i1]
        return w[i0] + (target - y0) * (w[i1] - w[i0]) / (y1 - y0)

    return crossing(hi - 1, hi) - crossing(lo + 1, lo)


@dataclass(frozen=True)
class LinewidthResult:
    kappa: float
    omega_peak: float
    peak_transmission: float
    spectrum: Spectrum


def resonance_linewidth(config, omega_guess, points=601, span=3.0, scan_density=DEFAULT_SCAN_DENSITY):
    """Numerical FWHM of the transmission peak belonging to the mode near ``omega_guess``.

    The lossless twin of ``config`` (same geometry, lossless membranes,
    perfect mirrors) fixes the mode and its neighbours; the peak is then
    located on the lossy spectrum and sampled over ``+-span`` widths.
    """
    twin = config.without_loss()
    w0 = nearest_resonance(twin, omega_guess, scan_density=scan_density)
    fsr = free_spectral_range(config)
    near = find_resonances(twin, w0 - fsr, w0 + fsr, scan_density=scan_density)
    others = [abs(w - w0) for w in near if abs(w - w0) > 1e-9 * w0]
    gap = min(others) if others else fsr
    t = lambda w: float(_transmission(config, w, cmath.exp))
    # search in the offset from w0: the bounded method's tolerance scales with |x|
    res = minimize_scalar(lambda u: 1 / t(w0 + u), bounds=(-0.25 * gap, 0.25 * gap),
                          method="bounded", options={"xatol": 1e-15 * w0, "maxiter": 2000})
    wp = w0 + res.x
    tp = t(wp)
    half = 0.5 * tp
    right = brentq(lambda w: t(w) - half, wp, wp + 0.5 * gap, xtol=1e-300, rtol=1e-13)
    left = brentq(lambda w: t(w) - half, wp - 0.5 * gap, wp, xtol=1e-300, rtol=1e-13)
    width = right - left
    grid = np.linspace(wp - span * width, wp + span * width, points)
    spec = transmission_spectrum(config, grid)
    return LinewidthResult(fwhm_linewidth(spec), wp, tp, spec)


# --- finite-difference couplings --------------------------------------------------

@dataclass(frozen=True)
class SlopeEstimate:
    """Richardson-refined central difference of a resonance frequency.

    ``value`` is the coupling in rad/s, ``coarse`` and ``fine`` the plain
    central differences at steps ``h`` and ``h/2`` (also scaled to rad/s).
    """

    value: float
    coarse: float
    fine: float
    step: float
    flagged: bool

    @property
    def spread(self):
        scale = max(abs(self.value), 1e-300)
        return abs(self.coarse - self.fine) / scale


def _tracked(config_at, omega0, slope, dq, floor):
    """Root of the configuration displaced by ``dq``, nearest the linear prediction."""
    predicted = omega0 + slope * dq
    cfg = config_at(dq)
    root = nearest_resonance(cfg, predicted, window=max(32 * abs(slope * dq), 64 * floor))
    if abs(root - predicted) > 10 * abs(slope * dq) + floor:
        raise BranchTrackingError(
            f"resonance moved by {root - omega0:.6g} rad/s, predicted {slope * dq:.6g}")
    return root


def _slope(config_at, omega0, slope_guess, h, zpf, floor):
    def central(step):
        up = _tracked(config_at, omega0, slope_guess, step, floor)
        down = _tracked(config_at, omega0, slope_guess, -step, floor)
        return (up - down) / (2 * step)

    coarse, fine = central(h), central(h / 2)
    value = (4 * fine - coarse) / 3
    # below this the two differences disagree only through the float resolution of the roots
    atol = max(1e-9 * omega0 / config_at(0).length, 4 * np.finfo(float).eps * omega0 / h)
    flagged = abs(coarse - fine) > RICHARDSON_TOLERANCE * abs(value) + atol
    return SlopeEstimate(zpf * value, zpf * coarse, zpf * fine, h, flagged)


def _profile_slopes(config, omega0):
    profile = field_profile(config, omega0)
    I = profile.intensities
    return profile.absolute_intensity * omega0 / config.length * (I[2::2] - I[0:-1:2])


def numeric_coupling(config, i, omega0, q_zpf, step_fraction=DEFAULT_FD_FRACTION):
    """Finite-difference coupling ``q_zpf * d(omega)/d(q_i)`` along the resonance branch."""
    if not 0 <= i < config.N:
        raise IndexError(f"membrane index {i} out of range for N={config.N}")
    _require_lossless(config, "numeric_coupling")
    omega0 = nearest_resonance(config, omega0, rtol=0.0)
    slope = _profile_slopes(config, omega0)[i]
    floor = 1e-3 * scan_step(config)
    return _slope(lambda dq: config.displaced(i, dq), omega0, slope,
                  step_fraction * config.wavelength, q_zpf, floor)


def numeric_collective_coupling(config, mode, omega0, step_fraction=DEFAULT_FD_FRACTION):
    """Finite-difference coupling ``u_zpf * d(omega)/du`` of a collective mode at ``u = 0``."""
    _require_lossless(config, "numeric_collective_coupling")
    if len(mode.weights) != config.N:
        raise ValueError("mode length differs from the number of membranes")
    base = config.with_positions(mode.positions(0.0))
    omega0 = nearest_resonance(base, omega0, rtol=0.0)
    slope = float(np.dot(mode.weights, _profile_slopes(base, omega0)))
    floor = 1e-3 * scan_step(base)
    return _slope(lambda du: config.with_positions(mode.positions(du)), omega0, slope,
                  step_fraction * config.wavelength, mode.u_zpf, floor)
