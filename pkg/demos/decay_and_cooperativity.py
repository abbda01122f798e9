# %% [markdown]
# # Linewidth, efficiency and cooperativity
#
# Absorbing slabs (n = 2, thickness chosen for r = 0.5, extinction 1e-5)
# in a centre array between mirrors of transmission 5e-5.  The mirror
# leakage falls as the array confines the light, while absorption grows
# with the collective coupling; their balance sets the cooperativity.

# %%
import numpy as np

from multimembrane import (C, CavityConfig, CollectiveMode, MembraneSpec, build_center_array,
                           slab_thickness_for_reflectivity, tmm)
from multimembrane.core import length_index_for_ratio
from multimembrane import loss
from multimembrane.coupling import couplings_from_profile, reference_coupling

wavelength = 1064e-9
omega = 2 * np.pi * C / wavelength
q_zpf, T, n_imag = 1e-15, 5e-5, 1e-5
spec = MembraneSpec.slab(2.0, slab_thickness_for_reflectivity(2.0, 0.5, wavelength), n_imag=n_imag)
theta_r = np.angle(tmm.reflection_transmission(tmm.slab_matrix(spec.without_loss(), omega))[0])

# %% [markdown]
# ## Decay rate against N
# The weak-loss formulas use the lossless mode; the transmission FWHM is
# the exact reference.

# %%
print(f"{'N':>2} {'kT/k0':>8} {'ks/k0':>8} {'sum':>8} {'FWHM/k0':>8} {'dev':>7} {'C0/C1 an':>9} {'C0/C1 num':>9}")
for N in (0, 2, 4, 6, 8):
    if N == 0:
        cfg = CavityConfig(wavelength, 2.7e-4).with_mirrors(T)
        k0 = loss.empty_cavity_decay(T, cfg.length)
        fwhm = tmm.resonance_linewidth(cfg, omega).kappa
        print(f"{0:>2} {1:>8.4f} {0:>8.4f} {1:>8.4f} {fwhm / k0:>8.4f} {abs(fwhm / k0 - 1):>7.2%}")
        continue
    n_L = length_index_for_ratio("center-array", N, theta_r, wavelength, 0, 1e3)
    cfg = build_center_array(N, spec, wavelength, 0, n_L).with_mirrors(T)
    d = cfg.design
    k0 = loss.empty_cavity_decay(T, cfg.length)
    kt = loss.center_config_mirror_decay(N, d.r, d.spacing, d.free_length, T, d.innermost_excess)
    ks = loss.center_config_absorption_decay(N, d.r, d.theta_r, d.spacing, d.free_length, spec.n,
                                             n_imag, spec.thickness, omega, d.innermost_excess)
    res = tmm.resonance_linewidth(cfg, omega)
    twin = cfg.without_loss()
    g = couplings_from_profile(tmm.field_profile(twin, omega), q_zpf)
    gc = tmm.numeric_collective_coupling(twin, CollectiveMode.along(g, twin.positions, q_zpf), omega).value
    g1 = reference_coupling(d.r, omega, cfg.length, q_zpf)
    numeric = (gc / g1) ** 2 * k0 / res.kappa
    analytic = loss.cooperativity_enhancement(N, d.r, d.theta_r, d.spacing, d.free_length, spec.n,
                                              n_imag, spec.thickness, T, omega, d.innermost_excess)
    print(f"{N:>2} {kt / k0:>8.4f} {ks / k0:>8.4f} {(kt + ks) / k0:>8.4f} {res.kappa / k0:>8.4f} "
          f"{abs(res.kappa / (kt + ks) - 1):>7.2%} {analytic:>9.2f} {numeric:>9.2f}")

# %% [markdown]
# ## Coupling efficiency of 50 nm silicon nitride
# The efficiency peaks twice per half period of the interior phase, at
# phases where the coupling itself is only about an eighth of its maximum.

# %%
sin = MembraneSpec.slab(2.0, 50e-9, n_imag=n_imag)
eta_max = loss.max_coupling_efficiency(2.0, n_imag, 50e-9, wavelength, q_zpf)
top = loss.max_phase_coupling(2.0, 50e-9, wavelength)
print(f"eta_max = {eta_max:.3e}, strong coupling possible: {eta_max > 1}")
for th in loss.efficiency_peak_phases(2.0, 50e-9, wavelength):
    frac = abs(loss.phase_sweep(sin, wavelength, [th]).coupling[0]) / top
    print(f"  peak at theta0 = {th:.4f} rad, coupling there {frac:.1%} of its maximum")

# %% [markdown]
# ## Saturated enhancement

# %%
rho = tmm.reflection_transmission(tmm.slab_matrix(sin.without_loss(), omega))[0]
r, theta = abs(rho), np.angle(rho)
chi = loss.chi(2.0, 2 * np.pi * 2.0 * 50e-9 / wavelength, r, theta)
print(f"silicon nitride, L/l = 5e4: C_sat/C1 = {loss.saturated_enhancement(r, T, n_imag, chi, 5e4):.3g}")
print(f"thin scatterer R = 0.994, A = 1e-7, L/l = 6.3e3: C_sat/C1 = "
      f"{loss.thin_saturated_enhancement(np.sqrt(0.994), T, 1e-7, 6.3e3):.3g}")
