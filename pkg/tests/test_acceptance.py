"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one pass line on success (run with -s to see them);
a failing criterion fails its test. Target runtime for the whole suite
is well under three minutes.
"""

import json
import math

import numpy as np
import pytest
from scipy.constants import hbar, k as k_B

import kipa.oracle as oracle
from kipa import (
    CoupledSystem,
    NoiseChain,
    ResonatorParams,
    RWAViolation,
    Trace,
    added_noise,
    bias_frequency_shift,
    double_mode_gain_bare,
    double_mode_gain_hybrid,
    fit_bias_sweep,
    fit_gain_profile,
    fit_lorentzian,
    fit_noise_temperature,
    fit_reflection,
    gain_bandwidth_product,
    hz_to_angular,
    pair_threshold,
    phase_sensitive_gain,
    pump_onoff_nk,
    single_mode_gain,
)
from kipa.cli import main as cli_main
from kipa.prng import SplitMix64

import warnings


def ok(num, text):
    print(f"criterion {num:2d}: PASS - {text}")


def make_res(kappa_hz, eta, f0=7.155e9):
    kappa = hz_to_angular(kappa_hz)
    return ResonatorParams(omega0=hz_to_angular(f0),
                           kappa_e=eta * kappa, kappa_i=(1 - eta) * kappa)


def test_criterion_1_oracle_equivalence():
    report = oracle.transfer_equivalence(1000, seed=7)
    worst = max(report["max_rel_err_single"], report["max_rel_err_double"])
    assert worst < 1e-9
    ok(1, f"closed forms match matrix transfer to {worst:.2e} over 1000 draws")


def test_criterion_2_time_domain():
    rng = SplitMix64(202)
    worst = 0.0
    # 17 detuned-probe cases
    for _ in range(17):
        res = make_res(10 ** rng.uniform(5.8, 6.8), rng.uniform(0.6, 1.0))
        g = rng.uniform(0.0, 0.45) * res.kappa
        delta = rng.uniform(-0.3, 0.3) * res.kappa
        wd = rng.uniform(0.1, 0.8) * res.kappa
        phi = rng.uniform(0.0, 2 * math.pi)
        run = oracle.make_run(res, g, delta=delta, phi_p=phi, drive_freq=wd)
        got = oracle.time_domain_gain(run).signal_gain
        signal, _ = single_mode_gain(res, g, delta, phi, [wd])
        expected = abs(signal.values[0]) ** 2
        worst = max(worst, abs(got - expected) / expected)
    # 3 phase-sensitive (resonant probe) cases
    for dphi in (0.0, 1.0, 2.2):
        res = make_res(1e6, 1.0)
        g = 0.42 * res.kappa
        run = oracle.make_run(res, g, phi_p=dphi, drive_freq=0.0)
        result = oracle.time_domain_gain(run)
        got = abs(result.signal_amp + result.idler_amp) ** 2
        expected = phase_sensitive_gain(res, g, dphi)
        worst = max(worst, abs(got - expected) / expected)
    assert worst < 0.01
    ok(2, f"ODE steady state within {worst * 100:.3f}% of closed form, 20 cases")


def test_criterion_3_commutation_identity():
    rng = SplitMix64(303)
    worst = 0.0
    for _ in range(1000):
        kappa = 2 * math.pi * 10 ** rng.uniform(5.5, 7.5)
        eta = rng.uniform(0.5, 1.0)
        res = ResonatorParams(omega0=2 * math.pi * 7e9,
                              kappa_e=eta * kappa, kappa_i=(1 - eta) * kappa)
        g = rng.uniform(0.0, 0.98) * kappa / 2
        omega = rng.uniform(-3.0, 3.0) * kappa
        worst = max(worst, abs(oracle.commutation_residual(res, g, omega)))
    assert worst < 1e-9
    ok(3, f"commutation residual {worst:.2e} over 1000 draws, eta in [0.5, 1]")


def test_criterion_4_bias_shift_anchor():
    w0 = hz_to_angular(7.4e9)
    shifted_hz = (w0 + bias_frequency_shift(w0, 1.575e-3, 5.86e-3)) / (2 * math.pi)
    assert shifted_hz == pytest.approx(7.1327e9, rel=1e-4)
    deviation = abs(shifted_hz - 7.155e9) / 7.155e9
    assert deviation < 0.005
    ok(4, f"predicted {shifted_hz / 1e9:.4f} GHz vs measured 7.155 GHz "
          f"({deviation * 100:.2f}%)")


def test_criterion_5_gain_anchor():
    res = make_res(32e6, 0.9)
    signal, _ = single_mode_gain(res, 0.99365 * res.kappa / 2, 0.0, 0.0, [0.0])
    peak_db = float(signal.power_db[0])
    assert abs(peak_db - 43.0) <= 0.2
    ok(5, f"peak gain {peak_db:.2f} dB at g/(kappa/2) = 0.99365")


def test_criterion_6_phase_sensitive_symmetry():
    # lossless: extrema product exactly one
    res = make_res(32e6, 1.0)
    for frac in (0.2, 0.5, 0.9, 0.99):
        signal, idler = single_mode_gain(res, frac * res.kappa / 2, 0.0, 0.0, [0.0])
        s, i = abs(signal.values[0]), abs(idler.values[0])
        assert (s + i) ** 2 * (s - i) ** 2 == pytest.approx(1.0, abs=1e-9)
    # lossy near threshold: strong amplification with bounded de-amplification
    res = make_res(32e6, 0.9)
    g = 0.999 * res.kappa / 2
    dphi = np.linspace(0.0, 2 * math.pi, 100001)
    gains = phase_sensitive_gain(res, g, dphi)
    max_db = 10 * math.log10(gains.max())
    min_db = 10 * math.log10(gains.min())
    assert max_db >= 50.0
    assert min_db >= -50.0
    assert max_db + min_db > 0.0
    ok(6, f"extrema product 1 (eta=1); eta=0.9: max {max_db:.1f} dB, "
          f"min {min_db:.1f} dB, sum positive")


ACCEPT_DEVICE = {
    "film": {"l0_h": 2.51e-7, "i_star_a": 5.86e-3},
    "ring": {"f0_hz": 7.4e9, "kappa_e_hz": 5.4e6, "kappa_i_hz": 0.6e6},
    "auxiliary": {"f0_hz": 7.133e9, "kappa_e_hz": 5.4e6, "kappa_i_hz": 0.6e6},
    "j_hz": 2.15e7,
    "pump": {"f_p_hz": 1.4266e10, "phi_p_rad": 0.0, "i_dc_a": 1.575e-3,
             "drive": {"g_hz": 5.0e6}},
}


def test_criterion_7_double_mode_structure(tmp_path, capsys):
    config = tmp_path / "device.json"
    config.write_text(json.dumps(ACCEPT_DEVICE), encoding="utf-8")
    out_csv = tmp_path / "double.csv"
    code = cli_main([
        "double-gain", "--config", str(config), "--g-over-threshold", "0.85",
        "--points", "4001", "--out", str(out_csv),
    ])
    record = json.loads(capsys.readouterr().out)
    assert code == 0
    assert record["outputs"]["peak_count"]["value"] == 2
    separation = record["outputs"]["peak_separation_hz"]["value"]
    assert separation == pytest.approx(43e6, rel=0.02)

    code = cli_main([
        "regime-map", "--config", str(config), "--g-over-threshold", "0.85",
        "--pump-points", "401",
    ])
    outputs = json.loads(capsys.readouterr().out)["outputs"]
    assert code == 0
    pump_sep = outputs["outer_separation_hz"]["value"]
    assert pump_sep == pytest.approx(91e6, rel=0.10)
    with capsys.disabled():
        ok(7, f"two peaks split by {separation / 1e6:.2f} MHz; regime "
              f"separation {pump_sep / 1e6:.2f} MHz vs 91 MHz")


def test_criterion_8_hybrid_bare_agreement():
    diffs = []
    for j_over_kappa in (5.0, 2.5, 1.25):
        kappa = 2 * math.pi * 1e6
        mode_a = ResonatorParams(omega0=2 * math.pi * 7e9,
                                 kappa_e=0.9 * kappa, kappa_i=0.1 * kappa)
        mode_b = ResonatorParams(omega0=2 * math.pi * 7e9,
                                 kappa_e=1e-9 * kappa, kappa_i=kappa)
        system = CoupledSystem(mode_a, mode_b, J=j_over_kappa * kappa)
        g = 0.9 * pair_threshold(system)
        grid = np.linspace(0.2 * system.J, 1.8 * system.J, 4001)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RWAViolation)
            hyb = double_mode_gain_hybrid(system, g, 0.0, 0.0, grid)
            bare = double_mode_gain_bare(system, g, 0.0, 0.0, 0.0, grid)
        peak_h = np.max(hyb.signal_plus.power)
        peak_b = np.max(bare.signal_a.power)
        diffs.append(abs(peak_b - peak_h) / peak_h)
    assert diffs[0] < 0.05
    assert diffs[0] < diffs[1] < diffs[2]
    ok(8, "peak-gain discrepancy "
          + " < ".join(f"{d * 100:.1f}%" for d in diffs)
          + " as 2J/max(kappa, g) drops from 10 to 2.5")


def test_criterion_9_gbp_asymptote():
    kappa_hz = 32e6
    res = make_res(kappa_hz, 0.875)
    g = 0.4995 * res.kappa
    width = res.kappa / 2 - g
    grid = np.linspace(-30 * width, 30 * width, 4001)
    signal, _ = single_mode_gain(res, g, 0.0, 0.0, grid)
    result = gain_bandwidth_product(signal)
    target = 0.875 * kappa_hz  # eta*kappa = kappa_e = 28 MHz
    assert result.gbp_hz == pytest.approx(target, rel=0.05)
    ok(9, f"GBP {result.gbp_hz / 1e6:.2f} MHz vs eta*kappa = 28 MHz "
          f"(paper scale ~30 MHz)")


def test_criterion_10_noise_formulas():
    chain = NoiseChain(G_k=1e9, G_h=1e6, n_h=20.0, eta=1.0,
                       T=0.0, T_dev=0.0, omega=2 * math.pi * 7.155e9)
    n_add = added_noise(chain).n_add
    assert abs(n_add - 0.5) <= 1e-6

    omega = 2 * math.pi * 7.155e9
    recovered = {}
    for planted, T in ((0.82, 0.1), (1.5, 0.05)):
        BW, G_k, G_h, alpha, n_h = 1e6, 1e6, 1e8, 1.0, 10.0
        n_bar = 1.0 / math.expm1(hbar * omega / (k_B * T))
        s_off = hbar * omega * G_h * BW * (n_bar + 0.5 + (G_h - 1) / G_h * n_h)
        n_add_fwd = (G_k - 1) / G_k * (n_bar + 0.5 + planted) + n_h / G_k
        s_on = hbar * omega * G_h * BW * (
            alpha * G_k * (n_bar + 0.5 + n_add_fwd) + (1 - alpha) * (n_bar + 0.5)
        )
        got = pump_onoff_nk(s_on, s_off, BW, G_k, G_h, alpha, omega, T)
        assert got == pytest.approx(planted, abs=1e-9)
        recovered[planted] = got
    ok(10, f"n_add -> 0.5 at eta=1, T=0; on/off round trips recover "
           f"{recovered[0.82]:.3f} and {recovered[1.5]:.3f}")


def _noiseless_round_trips():
    """All five fits against their own forward models, 1e-6 relative."""
    results = {}
    # reflection
    f = np.linspace(7.155e9 - 1.4e8, 7.155e9 + 1.4e8, 201)
    res = make_res(23e6, 19 / 23)
    signal, _ = single_mode_gain(res, 0.0, 0.0, 0.0, hz_to_angular(f - 7.155e9))
    fit = fit_reflection(Trace(x=f, y=signal.values, kind="reflection"))
    results["reflection"] = [
        (fit.params["f0_hz"], 7.155e9),
        (fit.params["kappa_e_hz"], 19e6),
        (fit.params["kappa_i_hz"], 4e6),
    ]
    # bias sweep
    currents = np.linspace(0.1e-3, 3e-3, 25)
    freqs = 7.4e9 * (1 - 0.5 * (currents / 5.86e-3) ** 2)
    fit = fit_bias_sweep(Trace(x=currents, y=freqs, kind="bias_shift"))
    results["bias"] = [
        (fit.params["f0_hz"], 7.4e9),
        (fit.params["i_star_a"], 5.86e-3),
    ]
    # gain profile (43 dB working point)
    res = make_res(32e6, 0.9)
    g_true_hz = 0.99365 * 16e6
    f = np.linspace(7.145e9 - 96e6, 7.145e9 + 96e6, 401)
    signal, _ = single_mode_gain(res, hz_to_angular(g_true_hz), 0.0, 0.0,
                                 hz_to_angular(f - 7.145e9))
    fit = fit_gain_profile(Trace(x=f, y=signal.power_db, kind="gain_db"))
    results["gain"] = [
        (fit.params["g_hz"], g_true_hz),
        (fit.params["kappa_e_hz"], 0.9 * 32e6),
        (fit.params["kappa_i_hz"], 0.1 * 32e6),
        (fit.params["f_center_hz"], 7.145e9),
    ]
    # noise temperature
    omega = 2 * math.pi * 7.155e9
    temps = np.linspace(0.05, 1.0, 25)
    psd = 1e6 * hbar * omega * (
        0.5 / np.tanh(hbar * omega / (2 * k_B * temps)) + 0.661
    )
    fit = fit_noise_temperature(Trace(x=temps, y=psd, kind="noise_psd"), omega)
    results["noise"] = [
        (fit.params["g_tot"], 1e6),
        (fit.params["n_add"], 0.661),
    ]
    # Lorentzian
    f = np.linspace(7e9 - 5e6, 7e9 + 5e6, 301)
    lor = 900.0 / (1.0 + ((f - 7e9) / (0.6e6 / 2)) ** 2) + 50.0
    fit = fit_lorentzian(Trace(x=f, y=10 * np.log10(lor), kind="gain_db"))
    results["lorentzian"] = [
        (fit.params["peak_lin"], 950.0),
        (fit.params["f_peak_hz"] - 7e9 + 1.0, 1.0),  # offset-referenced
        (fit.params["fwhm_hz"], 0.6e6),
    ]
    return results


def _noisy_ensembles(n_seeds=100):
    """3-sigma coverage of all five fits over seeded noisy ensembles."""
    rng = np.random.default_rng(1111)
    hits = {name: 0 for name in
            ("reflection", "bias", "gain", "noise", "lorentzian")}

    f_r = np.linspace(7.155e9 - 1.4e8, 7.155e9 + 1.4e8, 201)
    res_r = make_res(23e6, 19 / 23)
    clean_r, _ = single_mode_gain(res_r, 0.0, 0.0, 0.0,
                                  hz_to_angular(f_r - 7.155e9))
    currents = np.linspace(0.1e-3, 3e-3, 25)
    clean_b = 7.4e9 * (1 - 0.5 * (currents / 5.86e-3) ** 2)
    span_b = 7.4e9 * 0.5 * (3e-3 / 5.86e-3) ** 2
    res_g = make_res(32e6, 0.9)
    f_g = np.linspace(7.145e9 - 96e6, 7.145e9 + 96e6, 401)
    clean_g, _ = single_mode_gain(res_g, hz_to_angular(12e6), 0.0, 0.0,
                                  hz_to_angular(f_g - 7.145e9))
    omega = 2 * math.pi * 7.155e9
    temps = np.linspace(0.05, 1.0, 31)
    clean_n = 1e6 * hbar * omega * (
        0.5 / np.tanh(hbar * omega / (2 * k_B * temps)) + 0.661
    )
    f_l = np.linspace(7e9 - 5e6, 7e9 + 5e6, 301)
    clean_l = 900.0 / (1.0 + ((f_l - 7e9) / (0.6e6 / 2)) ** 2) + 50.0

    def covered(fit, truths):
        return all(abs(fit.params[name] - value) <= 3 * fit.sigma[name]
                   for name, value in truths)

    for _ in range(n_seeds):
        noisy = clean_r.values + 0.01 * (rng.standard_normal(len(f_r))
                                         + 1j * rng.standard_normal(len(f_r)))
        fit = fit_reflection(Trace(x=f_r, y=noisy, kind="reflection"))
        hits["reflection"] += covered(fit, [("f0_hz", 7.155e9),
                                            ("kappa_e_hz", 19e6),
                                            ("kappa_i_hz", 4e6)])

        noisy = clean_b + 0.005 * span_b * rng.standard_normal(len(currents))
        fit = fit_bias_sweep(Trace(x=currents, y=noisy, kind="bias_shift"))
        hits["bias"] += covered(fit, [("f0_hz", 7.4e9), ("i_star_a", 5.86e-3)])

        noisy = clean_g.power_db + 0.05 * rng.standard_normal(len(f_g))
        fit = fit_gain_profile(Trace(x=f_g, y=noisy, kind="gain_db"),
                               kappa_hint=32e6)
        hits["gain"] += covered(fit, [("g_hz", 12e6),
                                      ("kappa_e_hz", 0.9 * 32e6),
                                      ("kappa_i_hz", 0.1 * 32e6),
                                      ("f_center_hz", 7.145e9)])

        noisy = clean_n + 0.01 * np.mean(clean_n) * rng.standard_normal(len(temps))
        fit = fit_noise_temperature(Trace(x=temps, y=noisy, kind="noise_psd"),
                                    omega)
        hits["noise"] += covered(fit, [("g_tot", 1e6), ("n_add", 0.661)])

        noisy = clean_l + 4.5 * rng.standard_normal(len(f_l))
        fit = fit_lorentzian(Trace(x=f_l, y=10 * np.log10(noisy),
                                   kind="gain_db"))
        hits["lorentzian"] += covered(fit, [("peak_lin", 950.0),
                                            ("f_peak_hz", 7e9),
                                            ("fwhm_hz", 0.6e6)])
    return {name: count / n_seeds for name, count in hits.items()}


def test_criterion_11_fit_round_trips():
    worst_rel = 0.0
    for name, pairs in _noiseless_round_trips().items():
        for got, truth in pairs:
            rel = abs(got - truth) / abs(truth)
            assert rel < 1e-6, f"{name}: {got} vs {truth}"
            worst_rel = max(worst_rel, rel)
    rates = _noisy_ensembles(100)
    for name, rate in rates.items():
        assert rate >= 0.95, f"{name} 3-sigma coverage {rate:.2f}"
    ok(11, f"noiseless round trips to {worst_rel:.1e}; 100-seed coverage "
           + ", ".join(f"{name} {rate * 100:.0f}%" for name, rate in rates.items()))


def test_criterion_12_determinism(capsys):
    outputs = []
    for _ in range(2):
        code = cli_main(["oracle-check", "--draws", "200", "--seed", "7"])
        assert code == 0
        outputs.append(capsys.readouterr().out.encode("utf-8"))
    assert outputs[0] == outputs[1]
    with capsys.disabled():
        ok(12, f"repeated oracle-check --seed 7: byte-identical "
               f"{len(outputs[0])}-byte reports")
