"""Closed-loop calibration of the cancellation tone.

The chain mirrors experimental practice: measure the crosstalk pi time on
the spectator, match the compensation power to that pi time, then scan the
compensation phase at a long pulse time and fit the population model to
locate the cancellation point.  A separate resonance scan calibrates the
light shift of the driven target.
"""

from __future__ import annotations

import json
import math
import time as _time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .dynamics import QubitState
from .errors import ConfigError, FitFailureError, LowSignalError, OutOfRangeError
from .field import (
    CompensationSetting,
    CrosstalkContext,
    effective_magnitude_polarized,
    phase_tolerance,
)
from .fitting import FitResult, gauss_newton
from .pulses import (
    SPECTATOR,
    TARGET,
    ChannelPulse,
    PulseSegment,
    PulseSequence,
    simulate,
    with_pcc,
)

__all__ = [
    "CalibrationResult",
    "FitModel",
    "measure_pi_time",
    "calibrate_amplitude",
    "calibrate_phase",
    "calibrate_stark_shift",
    "recalibration_interval",
    "fit_crosstalk_model",
    "run_full_calibration",
    "save_result",
]

DEFAULT_SHOTS = 200
DEFAULT_SCAN_POINTS = 40


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of one calibration pass."""

    t_pi_ct: float  # s
    f_comp_star: float
    delta_phi_star: float  # rad, in [0, 2 pi)
    delta_ct_star: float  # rad/s
    residual: float  # rms of the phase fit
    timestamp: float  # s since the epoch

    def __post_init__(self):
        if self.t_pi_ct <= 0.0:
            raise ValueError("t_pi_ct must be > 0")
        if self.residual < 0.0:
            raise ValueError("residual must be >= 0")

    def to_dict(self) -> dict:
        return {
            "t_pi_ct_s": self.t_pi_ct,
            "f_comp_star": self.f_comp_star,
            "delta_phi_star_rad": self.delta_phi_star,
            "delta_ct_star_rad_per_s": self.delta_ct_star,
            "residual": self.residual,
            "timestamp": datetime.fromtimestamp(self.timestamp, timezone.utc).isoformat(),
        }


def save_result(result: CalibrationResult, path, diagnostics: dict | None = None) -> None:
    """Write the result as JSON; fit diagnostics go to a ``.diag.json`` sidecar."""
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if diagnostics is not None:
        side = path[: -len(".json")] if path.endswith(".json") else path
        with open(side + ".diag.json", "w", encoding="utf-8") as fh:
            json.dump(diagnostics, fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class FitModel:
    """Crosstalk benchmark fit configuration.

    ``params`` is (f_eff, detuning ratio delta_ct / omega_0, offset).
    """

    model_id: str = "eq6-population"
    params: np.ndarray = field(default_factory=lambda: np.array([0.05, 0.0, 0.0]))
    bounds: tuple = (
        np.array([0.0, -1.0, -0.2]),
        np.array([1.0, 1.0, 0.2]),
    )

    def __post_init__(self):
        if self.model_id not in ("eq6-population", "sk1-numeric"):
            raise ValueError(f"unknown model id {self.model_id!r}")
        self.params = np.asarray(self.params, dtype=float)
        lo, hi = self.bounds
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(self.params < lo) or np.any(self.params > hi):
            raise ValueError("initial parameters must lie within bounds")


class _ShotCounter:
    """Hands out unique per-measurement indices so repeated scans never share draws."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.index = 0

    def next(self) -> tuple[int, int]:
        self.index += 1
        return self.seed, self.index


def _measure_population(seq, ctx, shots, counter: _ShotCounter | None) -> float:
    if shots is None or counter is None:
        return simulate(seq, ctx).populations[SPECTATOR]
    seed, idx = counter.next()
    res = simulate(seq, ctx, shots=shots, seed=seed, point_index=idx)
    return res.sampled[SPECTATOR]


def _target_drive(omega_0: float, duration: float) -> PulseSequence:
    seg = PulseSegment(omega_0, 0.0, 0.0, duration)
    return PulseSequence((ChannelPulse(TARGET, (seg,)),))


def _compensation_drive(ctx: CrosstalkContext, f_comp: float, duration: float) -> PulseSequence:
    seg = PulseSegment(f_comp * ctx.f_ct * ctx.omega_0, 0.0, ctx.delta_ct, duration)
    return PulseSequence((ChannelPulse(SPECTATOR, (seg,)),))


def _fit_flop_half_period(
    make_seq, ctx, t_guess, shots, counter, points
) -> tuple[float, FitResult]:
    """Scan pulse duration over one expected period and fit a sinusoid."""
    durations = np.linspace(0.0, 2.0 * t_guess, points + 1)[1:]
    pops = np.array([_measure_population(make_seq(t), ctx, shots, counter) for t in durations])
    floor = 5.0 * math.sqrt(0.25 / shots) if shots else 1e-9
    if float(np.max(pops) - np.min(pops)) < floor:
        raise LowSignalError("flop contrast below five times the shot-noise floor")

    def residual(params):
        a, omega = params
        return a * np.sin(0.5 * omega * durations) ** 2 - pops

    x0 = np.array([max(float(np.max(pops)), 0.1), math.pi / t_guess])
    fit = gauss_newton(
        residual,
        x0,
        bounds=(np.array([0.0, 0.1 * math.pi / t_guess]),
                np.array([1.5, 10.0 * math.pi / t_guess])),
    )
    return math.pi / fit.params[1], fit


def measure_pi_time(
    ctx: CrosstalkContext,
    shots: int | None = DEFAULT_SHOTS,
    seed: int = 0,
    points: int = 20,
) -> float:
    """Spectator pi time under crosstalk from a target-channel Rabi scan.

    Scans the target drive duration over one expected spectator flop period
    (``points`` samples, ``shots`` measurements each), fits
    ``a sin^2(omega t / 2)`` and returns the fitted half period.  ``shots``
    of ``None`` uses the analytic populations.

    Raises
    ------
    LowSignalError
        If the flop contrast is below five times the shot-noise floor,
        for example when ``f_ct = 0``.
    """
    if ctx.f_ct <= 0.0:
        raise LowSignalError("no crosstalk drive, cannot measure a pi time")
    counter = _ShotCounter(seed) if shots else None
    t_pi, _ = _fit_flop_half_period(
        lambda t: _target_drive(ctx.omega_0, t), ctx, ctx.t_pi_ct, shots, counter, points
    )
    return t_pi


def calibrate_amplitude(
    ctx: CrosstalkContext,
    t_pi_ct: float,
    shots: int | None = DEFAULT_SHOTS,
    seed: int = 0,
    bracket: tuple = (0.25, 4.0),
    tol: float = 1e-4,
    points: int = 20,
) -> float:
    """Compensation amplitude whose own spectator pi time matches ``t_pi_ct``.

    Bisects the amplitude ratio until the compensation-only pi time equals
    the measured crosstalk pi time.

    Raises
    ------
    ConfigError
        If ``bracket`` does not enclose the matching amplitude.
    """
    if t_pi_ct <= 0.0:
        raise ValueError("t_pi_ct must be > 0")
    counter = _ShotCounter(seed + 1) if shots else None

    def mismatch(f_comp: float) -> float:
        guess = math.pi / (f_comp * ctx.f_ct * ctx.omega_0)
        t_meas, _ = _fit_flop_half_period(
            lambda t: _compensation_drive(ctx, f_comp, t), ctx, guess, shots, counter, points
        )
        return t_meas - t_pi_ct

    lo, hi = bracket
    if not 0.0 < lo < hi:
        raise ConfigError("bracket must satisfy 0 < lo < hi")
    m_lo = mismatch(lo)
    m_hi = mismatch(hi)
    if not (m_lo > 0.0 > m_hi):
        raise ConfigError("bracket does not enclose the matching amplitude")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mismatch(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _phase_scan_fit(
    ctx: CrosstalkContext,
    f_comp: float,
    n_periods: int,
    shots: int | None,
    seed: int,
    points: int,
    t_pi_ct: float | None,
) -> tuple[float, FitResult]:
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    t_pi = ctx.t_pi_ct if t_pi_ct is None else t_pi_ct
    duration = 2.0 * n_periods * t_pi
    counter = _ShotCounter(seed + 2) if shots else None
    dials = np.arange(points) * (2.0 * math.pi / points)
    pops = np.empty(points)
    base = _target_drive(ctx.omega_0, duration)
    for i, dial in enumerate(dials):
        seq = with_pcc(base, ctx, CompensationSetting(f_comp, dial))
        pops[i] = _measure_population(seq, ctx, shots, counter)

    def model(params, dial):
        a, kappa, offset = params
        mag = effective_magnitude_polarized(f_comp, dial - offset, ctx.pol_overlap)
        return a * np.sin(math.pi * n_periods * kappa * mag) ** 2

    def residual(params):
        return np.array([model(params, d) for d in dials]) - pops

    # seed the phase from a coarse grid to dodge the periodic local optima
    best = min(
        (float(np.dot(residual([1.0, 1.0, c]), residual([1.0, 1.0, c]))), c)
        for c in dials
    )[1]
    fit = gauss_newton(
        residual,
        np.array([1.0, 1.0, best]),
        bounds=(np.array([0.05, 0.5, best - math.pi]),
                np.array([1.5, 1.5, best + math.pi])),
    )
    floor = 3.0 * math.sqrt(0.25 / shots) if shots else 1e-6
    if not fit.converged and fit.residual_rms > floor:
        raise FitFailureError("phase fit diverged", diagnostics=fit.diagnostics())
    dial_star = (math.pi + fit.params[2]) % (2.0 * math.pi)
    return dial_star, fit


def calibrate_phase(
    ctx: CrosstalkContext,
    f_comp: float,
    n_periods: int = 1,
    shots: int | None = DEFAULT_SHOTS,
    seed: int = 0,
    points: int = DEFAULT_SCAN_POINTS,
    t_pi_ct: float | None = None,
) -> float:
    """Compensation phase dial that extinguishes the crosstalk.

    Scans the dial over [0, 2 pi) at a pulse time of ``2 n_periods`` crosstalk
    pi times with both the gate pulse and the cancellation tone applied, then
    fits the two-level population model by damped least squares.  Longer
    pulse times (larger ``n_periods``) narrow the feature and sharpen the
    estimate.

    Raises
    ------
    FitFailureError
        If the damped fit stalls with a residual above the shot-noise scale;
        the exception carries the fit diagnostics.
    """
    dial_star, _ = _phase_scan_fit(ctx, f_comp, n_periods, shots, seed, points, t_pi_ct)
    return dial_star


def calibrate_stark_shift(
    ctx: CrosstalkContext,
    shots: int | None = DEFAULT_SHOTS,
    seed: int = 0,
    span: float | None = None,
    points: int = 61,
) -> float:
    """Light shift of the driven target line from a resonance scan.

    Applies a pi pulse at each scan detuning (relative to the bare
    resonance), fits the power-broadened lineshape and returns the fitted
    center.  By the sign convention used here the spectator detuning to
    store is minus the returned shift.

    Raises
    ------
    OutOfRangeError
        If the response peaks at the scan edge, i.e. the resonance lies
        outside the scanned range.
    """
    if span is None:
        span = 1.5 * ctx.omega_0
    counter = _ShotCounter(seed + 3) if shots else None
    offsets = np.linspace(-span, span, points)
    t_pi = math.pi / ctx.omega_0
    pops = np.empty(points)
    for i, off in enumerate(offsets):
        seg = PulseSegment(ctx.omega_0, 0.0, off - ctx.stark_shift, t_pi)
        seq = PulseSequence((ChannelPulse(TARGET, (seg,)),))
        if shots is None or counter is None:
            pops[i] = simulate(seq, ctx).populations[TARGET]
        else:
            s, idx = counter.next()
            pops[i] = simulate(seq, ctx, shots=shots, seed=s, point_index=idx).sampled[TARGET]
    peak = int(np.argmax(pops))
    if peak in (0, points - 1):
        raise OutOfRangeError("resonance lies at the scan edge, widen the span")

    om = ctx.omega_0

    def residual(params):
        a, center = params
        u = offsets - center
        gen = np.sqrt(om**2 + u**2)
        return a * (om**2 / gen**2) * np.sin(0.5 * gen * t_pi) ** 2 - pops

    fit = gauss_newton(
        residual,
        np.array([1.0, offsets[peak]]),
        bounds=(np.array([0.1, -span]), np.array([1.5, span])),
    )
    center = float(fit.params[1])
    if abs(center) >= span:
        raise OutOfRangeError("fitted resonance outside the scanned range")
    return center


def recalibration_interval(drift_rate: float, suppression_target: float) -> float:
    """Minutes between phase recalibrations holding a given error suppression.

    The phase budget is the tolerance from the relative-error model at
    matched amplitude, ``2 asin(sqrt(target) / 2)``, divided by the drift
    rate in rad/min.
    """
    if drift_rate <= 0.0:
        raise ValueError("drift_rate must be > 0")
    if not 0.0 < suppression_target < 1.0:
        raise ValueError("suppression_target must be in (0, 1)")
    return phase_tolerance(suppression_target) / drift_rate


def _sk1_spectator_population(f_eff: float, det_ratio: float, n_pulses: int) -> float:
    from .pulses import pi_train, sequence_unitaries

    ctx = CrosstalkContext(omega_0=1.0, f_ct=max(f_eff, 1e-12), delta_ct=det_ratio)
    seq, _ = pi_train("sk1", 1.0, n_pulses)
    u = sequence_unitaries(seq, ctx)[SPECTATOR]
    state = QubitState.from_vector(u @ QubitState.ground().vector)
    return state.excited_population()


def fit_crosstalk_model(data, model: FitModel) -> FitResult:
    """Fit spectator populations versus pi-pulse count.

    ``data`` is a sequence of ``(n_pulses, population)`` pairs with at least
    five points.  The ``eq6-population`` model is the closed-form detuned
    flop; ``sk1-numeric`` simulates the composite sequence per point.  The
    parameter covariance estimate from the Jacobian is attached to the
    returned fit.

    Raises
    ------
    DegenerateFitError
        If the Jacobian is singular (for example featureless data).
    """
    pairs = [(int(n), float(p)) for n, p in data]
    if len(pairs) < 5:
        raise ValueError("need at least five (n, population) points")
    ns = np.array([n for n, _ in pairs], dtype=float)
    pops = np.array([p for _, p in pairs])

    if model.model_id == "eq6-population":

        def predict(params):
            f_eff, d, off = params
            gen = math.hypot(f_eff, d)
            if gen == 0.0:
                return np.full_like(ns, off)
            weight = f_eff**2 / gen**2
            return off + weight * np.sin(0.5 * math.pi * ns * gen) ** 2

    else:

        def predict(params):
            f_eff, d, off = params
            return off + np.array(
                [_sk1_spectator_population(f_eff, d, int(n)) for n in ns]
            )

    # parameters pinned by equal bounds stay fixed (e.g. a known zero
    # detuning, where the model is even in d and the Jacobian degenerates)
    lo, hi = (np.asarray(b, dtype=float) for b in model.bounds)
    free = hi > lo
    base = model.params.copy()

    def expand(reduced):
        full = base.copy()
        full[free] = reduced
        return full

    def residual(reduced):
        return predict(expand(reduced)) - pops

    fit = gauss_newton(residual, base[free], bounds=(lo[free], hi[free]))
    fit.params = expand(fit.params)
    return fit


def run_full_calibration(
    ctx: CrosstalkContext,
    shots: int | None = DEFAULT_SHOTS,
    seed: int = 0,
    phase_periods: int = 2,
    include_stark: bool = False,
    timestamp: float | None = None,
) -> tuple[CalibrationResult, dict]:
    """Full pi-time, amplitude and phase chain; returns result and diagnostics."""
    t_pi = measure_pi_time(ctx, shots=shots, seed=seed)
    f_star = calibrate_amplitude(ctx, t_pi, shots=shots, seed=seed)
    dial_star, fit = _phase_scan_fit(
        ctx, f_star, phase_periods, shots, seed, DEFAULT_SCAN_POINTS, t_pi
    )
    delta_ct_star = 0.0
    if include_stark:
        delta_ct_star = -calibrate_stark_shift(ctx, shots=shots, seed=seed)
    result = CalibrationResult(
        t_pi_ct=t_pi,
        f_comp_star=f_star,
        delta_phi_star=dial_star,
        delta_ct_star=delta_ct_star,
        residual=fit.residual_rms,
        timestamp=_time.time() if timestamp is None else timestamp,
    )
    return result, {"phase_fit": fit.diagnostics()}
