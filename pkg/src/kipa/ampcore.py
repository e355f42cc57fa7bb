"""Closed-form device physics: kinetic inductance, gain spectra, stability
and mode hybridization for single- and double-mode parametric operation.

All functions are pure; inputs are immutable value types from
:mod:`kipa.params`. Every rate and frequency here is angular (rad/s).
Reported gains are power gains; dB means 10*log10.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PoleAtFrequency, RWAViolation, UnstableRegime
from .params import (
    ComplexSpectrum,
    CoupledSystem,
    KineticFilm,
    PumpConfig,
    ResonatorParams,
    angular_to_hz,
    power_db,
)

# Relative tolerance below which a gain denominator counts as a real pole.
_POLE_RTOL = 1e-12


# ---------------------------------------------------------------------------
# Device-level relations: inductance, bias tuning, pump rate
# ---------------------------------------------------------------------------

def kinetic_inductance(film: KineticFilm, I_dc: float, I_rf: float = 0.0) -> float:
    """Current-dependent kinetic inductance [H].

    L(I) = L0 * [1 + (I_dc/I*)^2 + 2*I_rf*I_dc/I*^2 + (I_rf/I*)^2]

    The quadratic DC term tunes the resonance, the cross term enables
    three-wave mixing, and the quadratic RF term is the (neglected
    elsewhere) four-wave-mixing contribution.
    """
    x_dc = I_dc / film.I_star
    x_rf = I_rf / film.I_star
    return film.L0 * (1.0 + x_dc**2 + 2.0 * x_rf * x_dc + x_rf**2)


def bias_frequency_shift(omega0: float, I_dc: float, I_star: float) -> float:
    """Resonance shift from a DC bias current [rad/s]; always <= 0.

    delta_omega = -(omega0/2) * (I_dc/I*)^2
    """
    if not I_star > 0:
        raise ValueError(f"I_star must be > 0, got {I_star!r}")
    return -(omega0 / 2.0) * (I_dc / I_star) ** 2


def pump_rate(pump: PumpConfig, film: KineticFilm, omega0: float) -> float:
    """Parametric rate g [rad/s] from the pump drive.

    With the drive given as a power, the pump current under the
    matched-drive assumption is I_p = cal*sqrt(2*P_p/Z_ref) and

        g = |I_dc * I_p * omega0 / (4*I*^2)|

    The magnitude is returned; the sign of the mixing product is folded
    into the pump phase. A directly-specified rate passes through.
    """
    if pump.g is not None:
        return pump.g
    i_p = pump.cal * math.sqrt(2.0 * pump.P_p / pump.Z_ref)
    return abs(pump.I_dc * i_p * omega0 / (4.0 * film.I_star**2))


# ---------------------------------------------------------------------------
# Stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleModeStability:
    stable: bool
    margin: float     # threshold - g [rad/s]
    threshold: float  # kappa/2 [rad/s]


@dataclass(frozen=True)
class DoubleModeStability:
    stable: bool
    cooperativity: float  # C0 = 4 J^2 / (kappa_a * kappa_b)
    threshold: float      # kappa_a (1 + C0) / 2 [rad/s]
    margin: float         # threshold - g [rad/s]


def stability_single(res: ResonatorParams, g: float) -> SingleModeStability:
    """Single-mode oscillation threshold: stable iff g < kappa/2."""
    threshold = res.kappa / 2.0
    return SingleModeStability(
        stable=g < threshold, margin=threshold - g, threshold=threshold
    )


def stability_double(system: CoupledSystem, g: float) -> DoubleModeStability:
    """Coupled-system threshold: stable iff g < kappa_a*(1 + C0)/2.

    C0 = 4 J^2/(kappa_a kappa_b) is the cooperativity of the coupling.
    This is the zero-frequency divergence of the coupled static response;
    at the anticrossing the finite-frequency pair-oscillation threshold
    :func:`pair_threshold` can be lower and is then the binding one.
    """
    ka = system.mode_a.kappa
    kb = system.mode_b.kappa
    c0 = 4.0 * system.J**2 / (ka * kb)
    threshold = ka * (1.0 + c0) / 2.0
    return DoubleModeStability(
        stable=g < threshold, cooperativity=c0, threshold=threshold,
        margin=threshold - g,
    )


# ---------------------------------------------------------------------------
# Single-mode response
# ---------------------------------------------------------------------------

def susceptibility(
    res: ResonatorParams, g: float, phi_p: float, omega: float
) -> np.ndarray:
    """2x2 susceptibility matrix of the pumped mode at detuning zero.

    chi(omega) = [[-i w + k/2,  -i g e^{+i phi_p}],
                  [ i g e^{-i phi_p},  -i w + k/2]] / ((i w - k/2)^2 - g^2)

    Raises PoleAtFrequency if evaluated exactly on a real pole (only
    possible at omega = 0 when g = kappa/2).
    """
    k = res.kappa
    den = (1j * omega - k / 2.0) ** 2 - g**2
    scale = (k / 2.0) ** 2 + g**2 + omega**2
    if abs(den) <= _POLE_RTOL * scale:
        raise PoleAtFrequency(
            f"susceptibility pole at omega={omega:g} rad/s (g={g:g}, kappa={k:g})"
        )
    num = np.array(
        [
            [-1j * omega + k / 2.0, -1j * g * np.exp(1j * phi_p)],
            [1j * g * np.exp(-1j * phi_p), -1j * omega + k / 2.0],
        ],
        dtype=complex,
    )
    return num / den


def _single_mode_denominator(res, g, delta, omega):
    return delta**2 - g**2 + (1j * omega - res.kappa / 2.0) ** 2


def single_mode_gain(
    res: ResonatorParams,
    g: float,
    delta: float,
    phi_p: float,
    omega_grid,
) -> tuple[ComplexSpectrum, ComplexSpectrum]:
    """Signal and idler gain factors of the single-mode amplifier.

    Parameters
    ----------
    res : ResonatorParams
        The pumped mode.
    g : float
        Parametric rate [rad/s].
    delta : float
        Detuning of the mode from half the pump frequency [rad/s].
    phi_p : float
        Pump phase [rad].
    omega_grid : array_like
        Frequency offsets from half the pump frequency [rad/s],
        strictly increasing.

    Returns
    -------
    (signal, idler) : tuple of ComplexSpectrum
        signal(w) = eta*k*(k/2 - i(w + delta)) / D(w) - 1
        idler(w)  = -i*eta*k*g*e^{i phi_p} / D(w)
        with D(w) = delta^2 - g^2 + (i w - k/2)^2.

    Raises
    ------
    UnstableRegime
        If g >= kappa/2: the pump is above the parametric-oscillation
        threshold and the closed forms describe self-oscillation,
        not amplification.
    """
    stab = stability_single(res, g)
    if not stab.stable:
        raise UnstableRegime(
            f"g={g:g} rad/s is at or above the oscillation threshold "
            f"kappa/2={stab.threshold:g} rad/s"
        )
    w = np.asarray(omega_grid, dtype=float)
    k = res.kappa
    den = _single_mode_denominator(res, g, delta, w)
    scale = delta**2 + g**2 + (k / 2.0) ** 2 + w**2
    if np.any(np.abs(den) <= _POLE_RTOL * scale):
        bad = w[np.abs(den) <= _POLE_RTOL * scale][0]
        raise PoleAtFrequency(f"gain pole at omega={bad:g} rad/s")
    signal = res.eta * k * (k / 2.0 - 1j * (w + delta)) / den - 1.0
    idler = -1j * res.eta * k * g * np.exp(1j * phi_p) / den
    return ComplexSpectrum(w, signal), ComplexSpectrum(w, idler)


def on_resonance_gain(res: ResonatorParams, g: float) -> float:
    """Degenerate on-resonance power gain, lossless (eta = 1) form:

    G = (2 / (1 - 4 (g/kappa)^2) - 1)^2

    Strictly increasing in g and divergent as g -> kappa/2.
    """
    stab = stability_single(res, g)
    if not stab.stable:
        raise UnstableRegime(
            f"g={g:g} rad/s is at or above the oscillation threshold "
            f"kappa/2={stab.threshold:g} rad/s"
        )
    r2 = (g / res.kappa) ** 2
    return (2.0 / (1.0 - 4.0 * r2) - 1.0) ** 2


def phase_sensitive_gain(res: ResonatorParams, g: float, delta_phi):
    """Degenerate (signal on resonance, delta = omega = 0) gain versus the
    pump-probe phase difference:

        G(dphi) = |G_S(0) + G_I(0) e^{i dphi}|^2

    Interference between the signal and idler responses makes the gain
    2*pi-periodic with amplification/de-amplification extrema pi apart.
    Accepts a scalar or array of phase differences [rad].
    """
    stab = stability_single(res, g)
    if not stab.stable:
        raise UnstableRegime(
            f"g={g:g} rad/s is at or above the oscillation threshold "
            f"kappa/2={stab.threshold:g} rad/s"
        )
    k = res.kappa
    den = (k / 2.0) ** 2 - g**2
    gs0 = res.eta * k * (k / 2.0) / den - 1.0
    gi0 = -1j * res.eta * k * g / den
    dphi = np.asarray(delta_phi, dtype=float)
    out = np.abs(gs0 + gi0 * np.exp(1j * dphi)) ** 2
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Double-mode response
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HybridModes:
    omega_plus: float   # upper collective-mode frequency [rad/s]
    omega_minus: float  # lower collective-mode frequency [rad/s]
    delta_ab: float     # (omega_a - omega_b)/2 [rad/s]


def hybridize(system: CoupledSystem, form: str = "as_printed") -> HybridModes:
    """Collective-mode frequencies of the coupled pair.

    form="as_printed" (default) uses

        omega_+- = (omega_a + omega_b)/2 +- sqrt(delta_ab^2/4 + J^2)

    with delta_ab = (omega_a - omega_b)/2. form="standard" uses the
    textbook two-mode diagonalization sqrt(delta_ab^2 + J^2); the two
    agree at the anticrossing (omega_a = omega_b), where the splitting
    is exactly 2J.
    """
    wa, wb = system.mode_a.omega0, system.mode_b.omega0
    delta_ab = (wa - wb) / 2.0
    if form == "as_printed":
        root = math.sqrt(delta_ab**2 / 4.0 + system.J**2)
    elif form == "standard":
        root = math.sqrt(delta_ab**2 + system.J**2)
    else:
        raise ValueError(f"unknown hybridization form {form!r}")
    center = (wa + wb) / 2.0
    return HybridModes(
        omega_plus=center + root, omega_minus=center - root, delta_ab=delta_ab
    )


def _hybrid_rates(system: CoupledSystem) -> tuple[float, float, float, float]:
    """Extrinsic/intrinsic rates of the 50/50 hybridized modes.

    At the anticrossing each collective mode carries half of each bare
    mode, so kappa_+-^(e/i) = (kappa_a^(e/i) + kappa_b^(e/i)) / 2 and the
    two collective modes share the same damping.
    """
    ke = (system.mode_a.kappa_e + system.mode_b.kappa_e) / 2.0
    ki = (system.mode_a.kappa_i + system.mode_b.kappa_i) / 2.0
    return ke, ki, ke, ki  # (plus_e, plus_i, minus_e, minus_i)


def pair_threshold(system: CoupledSystem) -> float:
    """Oscillation threshold of the non-degenerate collective-mode pair at
    the anticrossing, in bare pump-rate units [rad/s].

    The pair process carries half the bare parametric rate (the pumped
    mode is an equal superposition of the two collective modes), so the
    pair self-oscillates at g/2 = sqrt(kappa_+ kappa_-)/2, i.e.
    g = sqrt(kappa_+ kappa_-). At the anticrossing this finite-frequency
    threshold is the binding one whenever it lies below the
    zero-frequency bound of :func:`stability_double`.
    """
    kpe, kpi, kme, kmi = _hybrid_rates(system)
    return math.sqrt((kpe + kpi) * (kme + kmi))


@dataclass(frozen=True, eq=False)
class HybridGains:
    signal_plus: ComplexSpectrum
    idler_plus: ComplexSpectrum
    signal_minus: ComplexSpectrum
    idler_minus: ComplexSpectrum


def double_mode_gain_hybrid(
    system: CoupledSystem,
    g: float,
    delta: float,
    phi_p: float,
    omega_grid,
) -> HybridGains:
    """Gain factors of the hybridized (collective) modes at the anticrossing.

    ``g`` is the bare parametric rate of the pumped mode, the same
    quantity used by the single-mode and bare-mode gain functions. The
    pumped mode is an equal superposition of the two collective modes, so
    the pair (non-degenerate) process runs at q = g/2 and, for the upper
    mode (+) with Delta_pm = delta +- J,

        S_+(w) = eta_+ k_+ (k_-/2 - i(w + Delta_-)) / D_+(w) - 1
        I_+(w) = -i sqrt(eta_+ eta_-) sqrt(k_+ k_-) q e^{i phi_p} / D_+(w)
        D_+(w) = (i(w - Delta_+) - k_+/2)(i(w + Delta_-) - k_-/2) - q^2

    The lower mode (-) follows by swapping every +/- label, so the two
    responses peak near w = +J and w = -J (split by 2J for delta = 0).
    Emits an RWAViolation warning unless 2J > max(kappa_+, kappa_-, g);
    the counter-rotating terms dropped by this model scale as (kappa/2J)^2
    (the bare-mode forms in :func:`double_mode_gain_bare` keep them).
    """
    stab = stability_double(system, g)
    if not stab.stable:
        raise UnstableRegime(
            f"g={g:g} rad/s is at or above the coupled-system threshold "
            f"{stab.threshold:g} rad/s"
        )
    kpe, kpi, kme, kmi = _hybrid_rates(system)
    kp, km = kpe + kpi, kme + kmi
    if not 2.0 * system.J > max(kp, km, g):
        warnings.warn(
            f"2J={2 * system.J:g} rad/s does not exceed "
            f"max(kappa_+, kappa_-, g)={max(kp, km, g):g} rad/s; "
            "hybridized-mode gains are unreliable here",
            RWAViolation,
            stacklevel=2,
        )
    eta_p, eta_m = kpe / kp, kme / km
    d_p, d_m = delta + system.J, delta - system.J
    w = np.asarray(omega_grid, dtype=float)
    phase = np.exp(1j * phi_p)
    q = g / 2.0  # pair-process rate seen by the 50/50 collective modes
    cross = math.sqrt(eta_p * eta_m * kp * km)

    out = []
    for k_self, k_other, eta_self, d_self, d_other in (
        (kp, km, eta_p, d_p, d_m),
        (km, kp, eta_m, d_m, d_p),
    ):
        den = (1j * (w - d_self) - k_self / 2.0) * (
            1j * (w + d_other) - k_other / 2.0
        ) - q**2
        scale = (k_self * k_other / 4.0 + q**2
                 + np.abs(w - d_self) * np.abs(w + d_other))
        if np.any(np.abs(den) <= _POLE_RTOL * scale):
            bad = w[np.abs(den) <= _POLE_RTOL * scale][0]
            raise PoleAtFrequency(f"hybrid gain pole at omega={bad:g} rad/s")
        signal = eta_self * k_self * (k_other / 2.0 - 1j * (w + d_other)) / den - 1.0
        idler = -1j * cross * q * phase / den
        out.append((ComplexSpectrum(w, signal), ComplexSpectrum(w, idler)))
    return HybridGains(
        signal_plus=out[0][0], idler_plus=out[0][1],
        signal_minus=out[1][0], idler_minus=out[1][1],
    )


@dataclass(frozen=True, eq=False)
class BareGains:
    signal_a: ComplexSpectrum  # a_out <- a_e
    idler_a: ComplexSpectrum   # a_out <- b_e^dagger
    signal_b: ComplexSpectrum  # b_out <- b_e
    idler_b: ComplexSpectrum   # b_out <- a_e^dagger


def double_mode_gain_bare(
    system: CoupledSystem,
    g: float,
    delta_a: float,
    delta_b: float,
    phi_p: float,
    omega_grid,
) -> BareGains:
    """Exact bare-mode gain factors of the coupled pair (no RWA).

    Solves the coupled linear response with the parametric drive acting on
    mode a only. Writing, per mode, am = k_a/2 - i(w - delta_a),
    ap = k_a/2 - i(w + delta_a) and bm, bp likewise for mode b, the common
    denominator is

        D(w) = (am*bm + J^2)(ap*bp + J^2) - g^2 * bm * bp

    and

        S_a(w) =  k_ae * bm * (ap*bp + J^2) / D - 1
        I_a(w) =  g J e^{i phi_p} sqrt(k_ae k_be) * bm / D
        S_b(w) =  k_be * (am*(ap*bp + J^2) - g^2 * bp) / D - 1
        I_b(w) = -g J e^{i phi_p} sqrt(k_ae k_be) * bp / D

    At J = 0 the a-mode forms collapse exactly to the single-mode gain
    factors. The idlers couple each output to the other mode's conjugated
    input; the remaining (non-resonant) input channels are not part of
    these factors and are available from the full transfer-matrix solve.
    """
    stab = stability_double(system, g)
    if not stab.stable:
        raise UnstableRegime(
            f"g={g:g} rad/s is at or above the coupled-system threshold "
            f"{stab.threshold:g} rad/s"
        )
    a, b = system.mode_a, system.mode_b
    J = system.J
    w = np.asarray(omega_grid, dtype=float)
    am = a.kappa / 2.0 - 1j * (w - delta_a)
    ap = a.kappa / 2.0 - 1j * (w + delta_a)
    bm = b.kappa / 2.0 - 1j * (w - delta_b)
    bp = b.kappa / 2.0 - 1j * (w + delta_b)
    upper = ap * bp + J**2
    lower = am * bm + J**2
    den = lower * upper - g**2 * bm * bp
    scale = np.abs(lower) * np.abs(upper) + g**2 * np.abs(bm) * np.abs(bp)
    if np.any(np.abs(den) <= _POLE_RTOL * scale):
        bad = w[np.abs(den) <= _POLE_RTOL * scale][0]
        raise PoleAtFrequency(f"bare gain pole at omega={bad:g} rad/s")
    cross = g * J * np.exp(1j * phi_p) * math.sqrt(a.kappa_e * b.kappa_e)
    signal_a = a.kappa_e * bm * upper / den - 1.0
    idler_a = cross * bm / den
    signal_b = b.kappa_e * (am * upper - g**2 * bp) / den - 1.0
    idler_b = -cross * bp / den
    return BareGains(
        signal_a=ComplexSpectrum(w, signal_a),
        idler_a=ComplexSpectrum(w, idler_a),
        signal_b=ComplexSpectrum(w, signal_b),
        idler_b=ComplexSpectrum(w, idler_b),
    )


def _bare_drift(system: CoupledSystem, g: float, delta_a: float,
                delta_b: float, phi_p: float) -> np.ndarray:
    """Drift matrix of the bare coupled pair, state [a, b, a+, b+].

    Used only for eigenvalue stability classification in the pump sweep;
    gain evaluation goes through the closed forms above.
    """
    a, b = system.mode_a, system.mode_b
    J = system.J
    gp = 1j * g * np.exp(1j * phi_p)
    return np.array(
        [
            [-(1j * delta_a + a.kappa / 2.0), -1j * J, -gp, 0.0],
            [-1j * J, -(1j * delta_b + b.kappa / 2.0), 0.0, 0.0],
            [-np.conj(gp), 0.0, 1j * delta_a - a.kappa / 2.0, 1j * J],
            [0.0, 0.0, 1j * J, 1j * delta_b - b.kappa / 2.0],
        ],
        dtype=complex,
    )


# ---------------------------------------------------------------------------
# Pump-frequency regime map
# ---------------------------------------------------------------------------

def find_peaks_db(values_db, prominence_db: float = 3.0) -> list[int]:
    """Indices of local maxima with at least the given dB prominence.

    A run of equal samples that rises on the left and falls on the right
    counts as one peak at its midpoint (symmetric grids with an even
    point count sample a resonance top as such a plateau). Prominence is
    the height above the higher of the two base levels, where each base
    is the minimum between the peak and the nearest higher sample (or
    the grid edge).
    """
    y = np.asarray(values_db, dtype=float)
    n = len(y)
    peaks = []
    i = 1
    while i < n - 1:
        if not y[i] > y[i - 1]:
            i += 1
            continue
        j = i
        while j < n - 1 and y[j + 1] == y[i]:
            j += 1
        if j == n - 1 or y[j + 1] > y[i]:
            i = j + 1
            continue
        left_min = y[i]
        k = i - 1
        left_base = None
        while k >= 0:
            left_min = min(left_min, y[k])
            if y[k] > y[i]:
                left_base = left_min
                break
            k -= 1
        if left_base is None:
            left_base = left_min
        right_min = y[j]
        k = j + 1
        right_base = None
        while k < n:
            right_min = min(right_min, y[k])
            if y[k] > y[j]:
                right_base = right_min
                break
            k += 1
        if right_base is None:
            right_base = right_min
        if y[i] - max(left_base, right_base) >= prominence_db:
            peaks.append((i + j) // 2)
        i = j + 1
    return peaks


def _refined_peak_height(y_db: np.ndarray) -> float:
    """Maximum of a sampled curve with parabolic refinement through the
    three points around the discrete peak; removes the sampling ripple a
    sharp resonance leaves on a sweep of peak heights."""
    i = int(np.argmax(y_db))
    if i == 0 or i == len(y_db) - 1:
        return float(y_db[i])
    y0, y1, y2 = y_db[i - 1], y_db[i], y_db[i + 1]
    if not (np.isfinite(y0) and np.isfinite(y1) and np.isfinite(y2)):
        return float(y1)
    curvature = y0 - 2.0 * y1 + y2
    if curvature >= 0.0:
        return float(y1)
    return float(y1 - (y0 - y2) ** 2 / (8.0 * curvature))


@dataclass(frozen=True, eq=False)
class RegimeMap:
    """Pump frequencies maximizing gain in the three amplification regimes.

    single_minus / single_plus: degenerate amplification of the lower /
    upper collective mode (pump near 2*Omega -+ 2J); double: non-degenerate
    pair amplification (pump near omega_a + omega_b). Values are absolute
    pump angular frequencies [rad/s]; None when a regime is not resolved
    on the grid.
    """

    single_minus: float | None
    double: float | None
    single_plus: float | None
    outer_separation: float | None
    pump_freqs: np.ndarray
    peak_gains_db: np.ndarray


def pump_regime_map(
    system: CoupledSystem, g: float, pump_grid, prominence_db: float = 3.0
) -> RegimeMap:
    """Sweep the pump frequency across the anticrossing and locate the
    three amplification regimes.

    For each pump frequency the bare-mode response is evaluated at the
    common detuning delta = Omega - omega_p/2 and the peak of the a-mode
    signal gain over an internal frequency grid is recorded; pump points
    where the coupled system self-oscillates (drift eigenvalue with
    non-negative real part) are skipped. Local maxima of the resulting
    sweep with at least ``prominence_db`` prominence are classified by
    their detuning as the lower single-mode, double-mode and upper
    single-mode regimes.

    Requires the system to be at the anticrossing (omega_a = omega_b to
    within J/100).
    """
    if not system.J > 0:
        raise ValueError("pump_regime_map requires a coupled pair (J > 0)")
    wa, wb = system.mode_a.omega0, system.mode_b.omega0
    if abs(wa - wb) > system.J / 100.0:
        raise ValueError(
            "pump_regime_map requires the modes at the anticrossing "
            f"(|omega_a - omega_b|={abs(wa - wb):g} rad/s exceeds J/100)"
        )
    omega_c = (wa + wb) / 2.0
    J = system.J
    kmax = max(system.mode_a.kappa, system.mode_b.kappa)
    half_span = J + 4.0 * kmax + 2.0 * g
    w_grid = np.linspace(-half_span, half_span, 2001)

    pump = np.asarray(pump_grid, dtype=float)
    peak_db = np.full(len(pump), np.nan)
    for i, wp in enumerate(pump):
        delta = omega_c - wp / 2.0
        drift = _bare_drift(system, g, delta, delta, 0.0)
        if np.max(np.linalg.eigvals(drift).real) >= 0.0:
            continue  # self-oscillating at this pump point
        a, b = system.mode_a, system.mode_b
        am = a.kappa / 2.0 - 1j * (w_grid - delta)
        ap = a.kappa / 2.0 - 1j * (w_grid + delta)
        bm = b.kappa / 2.0 - 1j * (w_grid - delta)
        bp = b.kappa / 2.0 - 1j * (w_grid + delta)
        den = (am * bm + J**2) * (ap * bp + J**2) - g**2 * bm * bp
        signal_a = a.kappa_e * bm * (ap * bp + J**2) / den - 1.0
        gains_db = power_db(np.abs(signal_a) ** 2)
        peak_db[i] = _refined_peak_height(gains_db)

    finite = np.where(np.isfinite(peak_db))[0]
    if len(finite) == 0:
        raise UnstableRegime("system self-oscillates over the whole pump grid")
    filled = peak_db.copy()
    filled[~np.isfinite(filled)] = np.min(peak_db[finite])
    peaks = find_peaks_db(filled, prominence_db)

    # classify each peak by its detuning: delta ~ +J, 0, -J
    targets = {"single_minus": J, "double": 0.0, "single_plus": -J}
    best: dict[str, tuple[float, float]] = {}  # label -> (gain_db, pump freq)
    for idx in peaks:
        delta = omega_c - pump[idx] / 2.0
        label = min(targets, key=lambda key: abs(delta - targets[key]))
        if label not in best or filled[idx] > best[label][0]:
            best[label] = (float(filled[idx]), float(pump[idx]))
    found = {label: freq for label, (_, freq) in best.items()}
    sep = None
    if "single_minus" in found and "single_plus" in found:
        sep = abs(found["single_plus"] - found["single_minus"])
    return RegimeMap(
        single_minus=found.get("single_minus"),
        double=found.get("double"),
        single_plus=found.get("single_plus"),
        outer_separation=sep,
        pump_freqs=pump,
        peak_gains_db=peak_db,
    )


# ---------------------------------------------------------------------------
# Gain-bandwidth product
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainBandwidth:
    peak_gain_db: float  # fitted peak power gain [dB]
    bandwidth_hz: float  # full width at half maximum of linear gain [Hz]
    gbp_hz: float        # sqrt(linear peak gain) * bandwidth [Hz]


def gain_bandwidth_product(spectrum: ComplexSpectrum) -> GainBandwidth:
    """Gain-bandwidth product of a single-peaked gain spectrum.

    The linear power gain is fitted to a Lorentzian line shape
    (:func:`kipa.calfit.fit_lorentzian`); the bandwidth is its FWHM and
    GBP = sqrt(G_peak) * BW. Near threshold the GBP approaches
    eta*kappa/(2*pi) in Hz. Raises NoPeak when the grid does not resolve
    a single dominant peak (e.g. pump off).
    """
    from . import calfit  # deferred: calfit builds its models on this module

    trace = calfit.Trace(
        x=angular_to_hz(spectrum.freqs), y=spectrum.power_db, kind="gain_db"
    )
    fit = calfit.fit_lorentzian(trace)
    peak_lin = fit.params["peak_lin"]
    bw = fit.params["fwhm_hz"]
    return GainBandwidth(
        peak_gain_db=float(power_db(peak_lin)),
        bandwidth_hz=bw,
        gbp_hz=math.sqrt(peak_lin) * bw,
    )
