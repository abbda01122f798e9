# %% [markdown]
# # Collective coupling of a centre array
#
# Eight identical membranes are placed so that the intensity jumps by the
# same ratio Gamma = (1 + r)/(1 - r) across each one, rising towards the
# cavity centre and falling after it.  The individual couplings then form a
# geometric ladder and the collective coupling grows like Gamma**(N/2) until
# the field energy is squeezed into the innermost gap.

# %%
import warnings

import numpy as np

from multimembrane import C, CollectiveMode, MembraneSpec, build_center_array, tmm
from multimembrane.core import length_index_for_ratio
from multimembrane.tmm import ScanResolutionWarning
from multimembrane.coupling import analytics_for, couplings_from_profile, evenly_spaced_reference

wavelength = 1064e-9
q_zpf = 1e-15
# evenly spaced stacks bunch their modes; the nearest one is still found
warnings.simplefilter("ignore", ScanResolutionWarning)
omega = 2 * np.pi * C / wavelength


def center_array(N, r, ratio=1e3):
    spec = MembraneSpec.from_reflectivity(r)
    theta = tmm.reflection_transmission(tmm.membrane_matrix(spec, omega))[0]
    n_L = length_index_for_ratio("center-array", N, np.angle(theta), wavelength, 0, ratio)
    return build_center_array(N, spec, wavelength, 0, n_L)


# %% [markdown]
# ## Individual couplings, N = 8
# The finite-difference couplings follow the resonance while one membrane
# moves; the closed form needs only r, l and L.

# %%
cfg = center_array(8, 0.5)
w0 = tmm.design_resonance(cfg)
a = analytics_for(cfg, q_zpf)
print(f"L/l = {cfg.free_length / cfg.design.spacing:.1f}")
print(f"{'i':>2} {'analytic g/g1':>14} {'numeric g/g1':>14} {'rel dev':>9}")
for i, g_ana in enumerate(a.g_individual):
    g = tmm.numeric_coupling(cfg, i, w0, q_zpf).value
    print(f"{i:>2} {g_ana / a.g1:>14.6f} {g / a.g1:>14.6f} {abs(g / g_ana - 1):>9.1e}")

# %% [markdown]
# ## Collective coupling against N
# Compared with the same membranes evenly spaced at the array pitch.  For
# strong reflectors the evenly spaced stack has a stop band around the
# design frequency and no nearby mode to compare with.

# %%
print(f"{'r':>5} {'N':>3} {'g_c/g1':>10} {'closed form':>12} {'evenly spaced':>14}")
for r in (0.5, 0.75, 0.9):
    for N in range(2, 13, 2):
        cfg = center_array(N, r)
        w0 = tmm.design_resonance(cfg)
        a = analytics_for(cfg, q_zpf)
        mode = CollectiveMode.along(a.g_individual, cfg.positions, u_zpf=q_zpf)
        gc = tmm.numeric_collective_coupling(cfg, mode, w0).value
        ref = evenly_spaced_reference(N, cfg.membranes[0], wavelength, cfg.design.spacing,
                                      cfg.length)
        fsr = tmm.free_spectral_range(ref)
        roots = tmm.find_resonances(ref, w0 - fsr, w0 + fsr)
        if not roots:
            print(f"{r:>5} {N:>3} {gc / a.g1:>10.3f} {a.g_c / a.g1:>12.3f} {'stop band':>14}")
            continue
        w_ref = min(roots, key=lambda w: abs(w - w0))
        g_ref = np.linalg.norm(couplings_from_profile(tmm.field_profile(ref, w_ref), q_zpf))
        print(f"{r:>5} {N:>3} {gc / a.g1:>10.3f} {a.g_c / a.g1:>12.3f} {g_ref / a.g1:>14.3f}")
    print(f"      saturation g_sat/g1 = {a.g_sat / a.g1:.1f}")
