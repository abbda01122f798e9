"""
End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that the terminal summary prints at the
end of the run; ``python3 tests/test_acceptance.py`` runs just this file.
"""
import math
import time

import numpy as np
import pytest

from conftest import (LAMBDA, OMEGA, Q_ZPF, center_at_ratio, mirror_at_ratio, record)
from multimembrane import (C, CavityConfig, CollectiveMode, MembraneSpec, membrane_reflectivity,
                           slab_thickness_for_reflectivity, tmm)
from multimembrane.core import extremal_ratio
from multimembrane.coupling import (analytics_for, center_config_analytics, couplings_from_profile,
                                    mirror_config_analytics, reference_coupling)
from multimembrane.loss import (absorption_decay, center_config_absorption_decay,
                                center_config_mirror_decay, chi, coupling_efficiency,
                                cooperativity_enhancement, efficiency_peak_phases,
                                empty_cavity_decay, max_coupling_efficiency, max_phase_coupling,
                                mirror_decay, phase_sweep, saturated_enhancement,
                                strong_coupling_condition, thin_saturated_enhancement)

T = 5e-5
NT = 1e-5
SEED = 20240611


def half_slab(n_imag=NT):
    return MembraneSpec.slab(2.0, slab_thickness_for_reflectivity(2.0, 0.5, LAMBDA), n_imag=n_imag)


def test_criterion_1_individual_couplings():
    start = time.perf_counter()
    cfg = center_at_ratio(8, MembraneSpec.from_reflectivity(0.5))
    g_ana = analytics_for(cfg, Q_ZPF).g_individual
    w = tmm.design_resonance(cfg)
    dev = [abs(tmm.numeric_coupling(cfg, i, w, Q_ZPF).value - g_ana[i]) / abs(g_ana[i])
           for i in range(8)]
    elapsed = time.perf_counter() - start
    ok = max(dev) <= 1e-3 and elapsed < 10
    record(1, ok, f"N=8 r=0.5 L/l={cfg.free_length / cfg.design.spacing:.1f}: "
                  f"max rel dev {max(dev):.2e} (<=1e-3), {elapsed:.2f} s (<10 s)")
    assert ok


def _presaturated(a_next):
    # the ladder term of the denominator is still small against r
    return a_next.denominator / a_next.r - 1 <= 0.05


def test_criterion_2_collective_scaling():
    worst, ratio_dev, bound_ok, lines, pre_pairs = 0.0, 0.0, True, [], []
    for r in (0.5, 0.75, 0.9):
        spec = MembraneSpec.from_reflectivity(r)
        prev = None
        for N in range(2, 13, 2):
            cfg = center_at_ratio(N, spec)
            a = analytics_for(cfg, Q_ZPF)
            w = tmm.design_resonance(cfg)
            mode = CollectiveMode.along(a.g_individual, cfg.positions, u_zpf=Q_ZPF)
            gc = tmm.numeric_collective_coupling(cfg, mode, w).value
            g1 = a.g1
            worst = max(worst, abs(gc / g1 - a.g_c / g1) / (a.g_c / g1))
            bare = center_config_analytics(N, r, a.theta_r, a.l, a.L, LAMBDA, Q_ZPF)
            g_sat = math.sqrt(r / 2) * (a.L / a.l) * g1
            bound_ok &= gc <= g_sat and bare.g_c <= g_sat
            if prev is not None:
                ratio = gc / prev
                pre = _presaturated(a)
                lines.append(f"    r={r} N={N - 2}->{N}: g_c ratio {ratio:.4f} vs Gamma "
                             f"{a.gamma:.4f} ({ratio / a.gamma - 1:+.2%})"
                             f"{' [pre-saturation]' if pre else ''}")
                if pre:
                    ratio_dev = max(ratio_dev, abs(ratio / a.gamma - 1))
                    pre_pairs.append(f"r={r} N={N - 2}->{N}")
            prev = gc
    for line in lines:
        print(line)
    ok = worst <= 1e-3 and ratio_dev <= 0.05 and bound_ok and pre_pairs
    record(2, ok, f"numeric vs closed-form g_c/g1 max rel dev {worst:.2e} (<=1e-3); "
                  f"pre-saturation ratio dev {ratio_dev:.2%} (<=5%) over "
                  f"{len(pre_pairs)} pair(s) [{'; '.join(pre_pairs)}]; g_c <= g_sat: {bound_ok}")
    assert ok


def test_criterion_3_linewidth():
    start = time.perf_counter()
    spec = half_slab()
    devs = {}
    L_ref = center_at_ratio(2, spec).length
    empty = CavityConfig(LAMBDA, L_ref).with_mirrors(T)
    k0 = empty_cavity_decay(T, L_ref)
    devs[0] = abs(tmm.resonance_linewidth(empty, OMEGA).kappa / k0 - 1)
    for N in (2, 4, 6, 8):
        cfg = center_at_ratio(N, spec).with_mirrors(T)
        d = cfg.design
        analytic = (center_config_mirror_decay(N, d.r, d.spacing, d.free_length, T, d.innermost_excess)
                    + center_config_absorption_decay(N, d.r, d.theta_r, d.spacing, d.free_length,
                                                     spec.n, NT, spec.thickness, OMEGA,
                                                     d.innermost_excess))
        devs[N] = abs(tmm.resonance_linewidth(cfg, OMEGA).kappa / analytic - 1)
    elapsed = time.perf_counter() - start
    ok = devs[0] <= 0.01 and max(devs.values()) <= 0.05 and elapsed < 60
    detail = ", ".join(f"N={N} {v:.2%}" for N, v in devs.items())
    record(3, ok, f"FWHM vs closed form: {detail} (N=0 <=1%, others <=5%); {elapsed:.2f} s (<60 s)")
    assert ok


def test_criterion_4_mirror_decay_suppression():
    ok, first = True, {}
    for r in (0.3, 0.5, 0.75, 0.9):
        for l_over_L in (1e-2, 1e-3, 1e-4):
            L, l = 1.0, l_over_L
            k0 = empty_cavity_decay(T, L)
            k = [center_config_mirror_decay(N, r, l, L, T) for N in range(0, 42, 2)]
            ok &= bool(np.all(np.diff(k) < 0))
            G = extremal_ratio(r)
            for N, kt in zip(range(0, 42, 2), k):
                if G ** (N / 2) * l / L > 10 * r:
                    first.setdefault((r, l_over_L), N)
                    ok &= kt < 0.1 * k0
    # the same from field profiles of built arrays
    spec = MembraneSpec.from_reflectivity(0.5)
    prof = []
    for N in range(2, 21, 2):
        cfg = center_at_ratio(N, spec)
        p = tmm.field_profile(cfg, tmm.design_resonance(cfg))
        kt = mirror_decay(p, T)
        prof.append(kt)
        if extremal_ratio(0.5) ** (N / 2) / (cfg.free_length / cfg.design.spacing) > 10 * 0.5:
            ok &= kt < 0.1 * empty_cavity_decay(T, cfg.length)
    ok &= bool(np.all(np.diff(prof) < 0))
    record(4, ok, f"kappa_T strictly decreasing and <0.1 kappa0 past the threshold "
                  f"(r=0.5, L/l=1e3 first at N={first[(0.5, 1e-3)]}); profile check N=2..20")
    assert ok


def _random_identical_config(rng):
    n = float(rng.uniform(1.5, 3.0))
    d = float(rng.uniform(20e-9, 250e-9))
    spec = MembraneSpec.slab(n, d, n_imag=NT)
    N = int(rng.integers(1, 9))
    L = LAMBDA * float(rng.uniform(150, 400))
    usable = L - 6 * LAMBDA * (N + 1)
    cuts = np.sort(rng.uniform(0, usable, N))
    positions = [-0.5 * L + 3 * LAMBDA * (2 * j + 1) + c for j, c in enumerate(cuts)]
    return CavityConfig(LAMBDA, L, (spec,) * N, tuple(positions)).with_mirrors(T)


def test_criterion_5_efficiency_bound():
    rng = np.random.default_rng(SEED)
    violations, closest = 0, 0.0
    for _ in range(200):
        cfg = _random_identical_config(rng)
        twin = cfg.without_loss()
        p = tmm.field_profile(twin, tmm.nearest_resonance(twin, OMEGA))
        spec = cfg.membranes[0]
        gc = np.linalg.norm(couplings_from_profile(p, Q_ZPF))
        k_sigma = sum(absorption_decay(p, i, spec) for i in range(cfg.N))
        k_total = k_sigma + mirror_decay(p, T)
        eta_max = max_coupling_efficiency(spec.n, NT, spec.thickness, LAMBDA, Q_ZPF)
        # strictest form: absorption alone in the denominator
        closest = max(closest, gc / k_sigma / eta_max)
        if gc / k_total > eta_max * (1 + 1e-9) or gc / k_sigma > eta_max * (1 + 1e-9):
            violations += 1
    ok = violations == 0
    record(5, ok, f"200 random configs (seed {SEED}): {violations} violations of "
                  f"g_c/kappa <= eta_max; largest g_c/kappa_sigma/eta_max = {closest:.4f}")
    assert ok


def test_criterion_6_silicon_nitride():
    spec = MembraneSpec.slab(2.0, 50e-9, n_imag=NT)
    eta_max = max_coupling_efficiency(2.0, NT, 50e-9, LAMBDA, Q_ZPF)
    top = max_phase_coupling(2.0, 50e-9, LAMBDA)
    fractions = []
    for th in efficiency_peak_phases(2.0, 50e-9, LAMBDA):
        assert coupling_efficiency(2.0, NT, 50e-9, LAMBDA, th, Q_ZPF) == pytest.approx(eta_max, rel=1e-12)
        fractions.append(abs(phase_sweep(spec, LAMBDA, [th]).coupling[0]) / top)
    ok = 1.5e-3 <= eta_max <= 6e-3 and all(abs(f - 0.125) <= 0.02 for f in fractions)
    record(6, ok, f"eta_max = {eta_max:.3e} (in [1.5e-3, 6e-3]); coupling at the two "
                  f"peak-efficiency phases = {', '.join(f'{f:.2%}' for f in fractions)} (12.5% +- 2 pp)")
    assert ok


def test_criterion_7_cooperativity():
    spec = half_slab()
    devs = []
    for N in (2, 4, 6, 8):
        cfg = center_at_ratio(N, spec).with_mirrors(T)
        d = cfg.design
        twin = cfg.without_loss()
        w = tmm.design_resonance(twin)
        g = couplings_from_profile(tmm.field_profile(twin, w), Q_ZPF)
        gc = tmm.numeric_collective_coupling(twin, CollectiveMode.along(g, twin.positions, Q_ZPF), w).value
        kappa = tmm.resonance_linewidth(cfg, w).kappa
        g1 = reference_coupling(d.r, w, cfg.length, Q_ZPF)
        numeric = (gc / g1) ** 2 * empty_cavity_decay(T, cfg.length) / kappa
        analytic = cooperativity_enhancement(N, d.r, d.theta_r, d.spacing, d.free_length, spec.n, NT,
                                             spec.thickness, T, w, d.innermost_excess)
        devs.append(abs(numeric / analytic - 1))
    curve_ok = max(devs) <= 0.10
    # saturation for 50 nm silicon nitride at L/l = 5e4
    r, theta = membrane_reflectivity(MembraneSpec.slab(2.0, 50e-9), OMEGA)
    x = chi(2.0, 2 * math.pi * 2.0 * 50e-9 / LAMBDA, r, theta)
    c_sat = saturated_enhancement(r, T, NT, x, 5e4)
    sat_ok = 0.5e4 <= c_sat <= 2e4
    ok = curve_ok and sat_ok
    record(7, ok, f"curve N=2..8 max dev {max(devs):.2%} (<=10%): {'pass' if curve_ok else 'fail'}; "
                  f"saturation at L/l=5e4 = {c_sat:.3g} vs 1e4 within factor 2: "
                  f"{'pass' if sat_ok else 'fail'} (r={r:.4f}, chi={x:.3f})")
    assert curve_ok, "enhancement curve deviates from the numerical pipeline"
    assert sat_ok, f"saturation enhancement {c_sat:.3g} is not within a factor 2 of 1e4"


def test_criterion_8_thin_scatterer():
    r = math.sqrt(0.994)
    c_sat = thin_saturated_enhancement(r, T, 1e-7, 6.3e3)
    sat_ok = 1.3e6 / 2 <= c_sat <= 1.3e6 * 2
    false_ok = not strong_coupling_condition(0.994, 1e-7, Q_ZPF, LAMBDA)
    rng = np.random.default_rng(SEED)
    limit = 4 * math.pi * Q_ZPF / LAMBDA
    true_ok = True
    for _ in range(1000):
        R = float(rng.uniform(1e-3, 1.0))
        A = float(rng.uniform(0, 1 - 1e-9)) * limit * R
        true_ok &= strong_coupling_condition(R, A, Q_ZPF, LAMBDA)
        q = float(rng.uniform(1e-16, 1e-13))
        true_ok &= strong_coupling_condition(R, 0.999 * 4 * math.pi * q / LAMBDA * R, q, LAMBDA)
    ok = sat_ok and false_ok and true_ok
    record(8, ok, f"C_sat = {c_sat:.3g} (1.3e6 within factor 2); condition FALSE for R=0.994 "
                  f"A=1e-7: {false_ok}; TRUE for 2000 synthetic A/R below the limit: {true_ok}")
    assert ok


def test_criterion_9_conservation():
    from conftest import random_config

    rng = np.random.default_rng(SEED)
    worst_sum = worst_norm = worst_spread = 0.0
    flagged = pairs = beyond = unexplained = 0
    for _ in range(500):
        cfg = random_config(rng)
        w = tmm.nearest_resonance(cfg, OMEGA)
        p = tmm.field_profile(cfg, w)
        worst_sum = max(worst_sum, abs(p.intensities.sum() - 1))
        worst_norm = max(worst_norm, abs(p.absolute_intensity * np.dot(p.intensities, p.lengths)
                                         / p.length - 1))
        for i in range(cfg.N):
            s = tmm.numeric_coupling(cfg, i, w, Q_ZPF)
            pairs += 1
            flagged += s.flagged
            worst_spread = max(worst_spread, s.spread)
            if s.spread > 1e-4:
                beyond += 1
                # float resolution of the four roots behind one difference pair
                floor = 4 * np.finfo(float).eps * w / s.step * Q_ZPF
                unexplained += abs(s.coarse - s.fine) > floor
    ok = worst_sum <= 1e-12 and worst_norm <= 1e-9 and flagged == 0 and unexplained == 0
    record(9, ok, f"500 configs: max |sum I - 1| = {worst_sum:.1e} (<=1e-12), "
                  f"max |A sum I L/L - 1| = {worst_norm:.1e} (<=1e-9); {pairs - beyond}/{pairs} "
                  f"Richardson pairs within 1e-4 relative, {beyond} near-zero coupling(s) "
                  f"agreeing to the root-resolution floor (max spread {worst_spread:.1e}), "
                  f"{unexplained} beyond it")
    assert ok


def test_criterion_10_mirror_array():
    r, l, L = 0.5, 1e-6, 1e-3
    m = mirror_config_analytics(4, r, math.pi, l, L, LAMBDA, Q_ZPF, check_geometry=False)
    c = center_config_analytics(4, r, math.pi, l, L, LAMBDA, Q_ZPF, check_geometry=False)
    ratio_ok = abs(m.g_sat / c.g_sat - math.sqrt(2)) <= 4 * np.finfo(float).eps
    g = m.g_individual
    ladder_ok = bool(np.all(np.abs(g[1:] / g[:-1] - 3.0) <= 1e-12 * 3.0))
    cfg = mirror_at_ratio(4, MembraneSpec.from_reflectivity(r))
    p = tmm.field_profile(cfg, tmm.design_resonance(cfg))
    ladder_ok &= all(abs(p.intensity_ratio(i) / 3.0 - 1) <= 1e-12 for i in range(4))
    worst = 0.0
    for N in range(1, 7):
        cfg = mirror_at_ratio(N, MembraneSpec.from_reflectivity(r))
        g_ana = analytics_for(cfg, Q_ZPF).g_individual
        w = tmm.design_resonance(cfg)
        for i in range(N):
            worst = max(worst, abs(tmm.numeric_coupling(cfg, i, w, Q_ZPF).value / g_ana[i] - 1))
    ok = ratio_ok and ladder_ok and worst <= 1e-3
    record(10, ok, f"g_sat ratio sqrt(2): {ratio_ok}; N=4 ladder = Gamma within 1e-12: {ladder_ok}; "
                   f"numeric vs closed form N<=6 max rel dev {worst:.2e} (<=1e-3)")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
