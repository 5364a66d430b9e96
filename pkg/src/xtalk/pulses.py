"""Construction and simulation of two-channel addressing pulse sequences.

A sequence holds per-channel lists of square segments.  Channel 0 addresses
the target ion and channel 1 the spectator.  During simulation each ion sees
its own channel's field plus a fraction ``f_ct`` of the other channel's
field (the crosstalk), evolved exactly with 2x2 propagators in the ion's own
frame so that off-resonant light also produces the physical phase shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .dynamics import IDENTITY, QubitState, frame_segment_unitary
from .errors import ChannelConflictError
from .field import CompensationSetting, CrosstalkContext

__all__ = [
    "TARGET",
    "SPECTATOR",
    "PulseSegment",
    "ChannelPulse",
    "PulseSequence",
    "SimulationResult",
    "square_pi",
    "sk1",
    "quadrilateral",
    "quad_frame_step",
    "pi_train",
    "ramsey_wrap",
    "with_pcc",
    "concat",
    "simulate",
    "sequence_unitaries",
]

TARGET = 0
SPECTATOR = 1

SK1_PHI1 = math.acos(-1.0 / 4.0)  # inner-loop axis offset for a pi rotation


@dataclass(frozen=True)
class PulseSegment:
    """One square drive segment.

    ``amplitude`` is the Rabi frequency magnitude (rad/s), ``phase`` the
    rotation-axis phase (rad), ``detuning`` the drive offset from the ion the
    channel addresses (rad/s) and ``duration`` the length in seconds.
    """

    amplitude: float
    phase: float
    detuning: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.duration < 0.0:
            raise ValueError("duration must be >= 0")
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be >= 0; use the phase for the sign")
        for name in ("amplitude", "phase", "detuning", "duration"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class ChannelPulse:
    channel: int
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True)
class PulseSequence:
    """Time-aligned channel pulses plus optional shot metadata."""

    channels: tuple
    seed: int | None = None
    shots: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        ids = [cp.channel for cp in self.channels]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate channel ids")

    def channel(self, channel_id: int) -> ChannelPulse:
        for cp in self.channels:
            if cp.channel == channel_id:
                return cp
        return ChannelPulse(channel_id, ())

    @property
    def total_duration(self) -> float:
        return max((cp.total_duration for cp in self.channels), default=0.0)


def square_pi(omega_0: float, phase: float = 0.0) -> PulseSequence:
    """Plain square pi pulse on the target channel, duration pi / omega_0."""
    if omega_0 <= 0.0:
        raise ValueError("omega_0 must be > 0")
    seg = PulseSegment(omega_0, phase, 0.0, math.pi / omega_0)
    return PulseSequence((ChannelPulse(TARGET, (seg,)),))


def sk1(theta: float, phase: float, omega_0: float) -> PulseSequence:
    """First-order amplitude-robust composite pulse on the target channel.

    A ``theta`` rotation about ``phase`` followed by two full 2*pi rotations
    at axis phases ``phase + phi1`` and ``phase - phi1`` with
    ``phi1 = arccos(-theta / 4 pi)``.
    """
    if not 0.0 < theta <= math.pi:
        raise ValueError("theta must be in (0, pi]")
    if omega_0 <= 0.0:
        raise ValueError("omega_0 must be > 0")
    phi1 = math.acos(-theta / (4.0 * math.pi))
    two_pi_t = 2.0 * math.pi / omega_0
    segs = (
        PulseSegment(omega_0, phase, 0.0, theta / omega_0),
        PulseSegment(omega_0, phase + phi1, 0.0, two_pi_t),
        PulseSegment(omega_0, phase - phi1, 0.0, two_pi_t),
    )
    return PulseSequence((ChannelPulse(TARGET, segs),))


def quadrilateral(omega_0: float, phase_offset: float = 0.0) -> PulseSequence:
    """Four-segment composite pi/2 block: +X, -Y, -X, +Y quarter rotations.

    At full drive it equals an X pi/2 rotation up to a software Z rotation
    (see :func:`quad_frame_step`); a weak parasitic drive traces a small
    closed square and is suppressed to high order.
    """
    if omega_0 <= 0.0:
        raise ValueError("omega_0 must be > 0")
    dur = 0.5 * math.pi / omega_0
    phases = (0.0, -0.5 * math.pi, math.pi, 0.5 * math.pi)
    segs = tuple(PulseSegment(omega_0, p + phase_offset, 0.0, dur) for p in phases)
    return PulseSequence((ChannelPulse(TARGET, segs),))


@lru_cache(maxsize=1)
def quad_frame_step() -> float:
    """Software Z-frame angle left behind by one quadrilateral block.

    Measured numerically from the full-drive block unitary: the angle alpha
    such that shifting all later axis phases by alpha absorbs the block's
    residual Z rotation, leaving an exact X pi/2 rotation.
    """
    seq = quadrilateral(1.0)
    u = sequence_unitaries(seq, CrosstalkContext(omega_0=1.0, f_ct=0.0))[TARGET]
    # u = Rz(-alpha) @ Rx(pi/2): e^{i alpha/2} u00 must be real positive
    return -2.0 * math.atan2(u[0, 0].imag, u[0, 0].real)


def pi_train(
    method: str,
    omega_0: float,
    n_pulses: int,
    ctx: CrosstalkContext | None = None,
    setting: CompensationSetting | None = None,
    phase: float = 0.0,
) -> tuple[PulseSequence, float]:
    """Sequence of ``n_pulses`` target pi pulses built by the given method.

    ``method`` is one of ``none`` (square pulses), ``pcc`` (square pulses
    with the cancellation tone), ``sk1`` or ``quad`` (the composite block
    applied twice per pi with Z-frame phase tracking).  Returns the sequence
    and the trailing software frame angle to be absorbed by any later pulse.
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    frame = 0.0
    parts = []
    if method in ("none", "pcc"):
        parts = [square_pi(omega_0, phase) for _ in range(n_pulses)]
    elif method == "sk1":
        parts = [sk1(math.pi, phase, omega_0) for _ in range(n_pulses)]
    elif method == "quad":
        step = quad_frame_step()
        for _ in range(2 * n_pulses):
            parts.append(quadrilateral(omega_0, phase + frame))
            frame += step
    else:
        raise ValueError(f"unknown method {method!r}")
    seq = concat(*parts)
    if method == "pcc":
        if ctx is None or setting is None:
            raise ValueError("method 'pcc' needs a context and a compensation setting")
        seq = with_pcc(seq, ctx, setting)
    return seq, frame


def ramsey_wrap(
    seq: PulseSequence,
    omega_0: float,
    open_phase: float = 0.0,
    close_phase: float = math.pi,
) -> PulseSequence:
    """Spectator pi/2 pulses before and after ``seq``.

    With the default phases the second pulse undoes the first, so an ideal
    sequence returns the spectator to the ground state and the excited
    population directly reads the accumulated error.
    """
    half = PulseSegment(omega_0, open_phase, 0.0, 0.5 * math.pi / omega_0)
    back = PulseSegment(omega_0, close_phase, 0.0, 0.5 * math.pi / omega_0)
    opener = PulseSequence((ChannelPulse(SPECTATOR, (half,)),))
    closer = PulseSequence((ChannelPulse(SPECTATOR, (back,)),))
    return concat(opener, seq, closer)


def with_pcc(
    seq: PulseSequence, ctx: CrosstalkContext, setting: CompensationSetting
) -> PulseSequence:
    """Add the cancellation tone on the spectator channel.

    Every target segment gets a time-aligned spectator segment of amplitude
    ``f_comp * f_ct`` times the target amplitude, axis phase offset by the
    dial value ``delta_phi``, at the gate-light frequency (detuned by
    ``delta_ct`` from the spectator).
    """
    spec = seq.channel(SPECTATOR)
    if any(s.amplitude > 0.0 for s in spec.segments):
        raise ChannelConflictError("spectator channel already driven")
    comp = tuple(
        PulseSegment(
            setting.f_comp * ctx.f_ct * s.amplitude,
            s.phase + setting.delta_phi,
            ctx.delta_ct,
            s.duration,
        )
        for s in seq.channel(TARGET).segments
    )
    others = tuple(cp for cp in seq.channels if cp.channel != SPECTATOR)
    return replace(seq, channels=others + (ChannelPulse(SPECTATOR, comp),))


def concat(*seqs: PulseSequence) -> PulseSequence:
    """Concatenate sequences in time, padding idle channels with dark segments."""
    channels = sorted({cp.channel for s in seqs for cp in s.channels} | {TARGET, SPECTATOR})
    parts: dict[int, list] = {ch: [] for ch in channels}
    for s in seqs:
        total = s.total_duration
        for ch in channels:
            cp = s.channel(ch)
            parts[ch].extend(cp.segments)
            gap = total - cp.total_duration
            if gap > 0.0:
                parts[ch].append(PulseSegment(0.0, 0.0, 0.0, gap))
    return PulseSequence(tuple(ChannelPulse(ch, tuple(parts[ch])) for ch in channels))


@dataclass(frozen=True)
class SimulationResult:
    """Final states, analytic populations and optional shot-sampled values."""

    states: dict
    populations: dict
    sampled: dict | None = None

    def population(self, channel: int) -> float:
        return self.populations[channel]


def _slices(seq: PulseSequence):
    """Common time grid: sorted union of all channel segment boundaries."""
    channels = {TARGET: (), SPECTATOR: ()}
    for cp in seq.channels:
        channels[cp.channel] = cp.segments
    total = max(
        (sum(s.duration for s in segs) for segs in channels.values()), default=0.0
    )
    edges = {0.0, total}
    spans = {}
    for ch, segs in channels.items():
        t = 0.0
        spans[ch] = []
        for s in segs:
            if s.duration > 0.0:
                spans[ch].append((t, t + s.duration, s))
                t += s.duration
                edges.add(t)
    cuts = sorted(edges)
    tol = 1e-9 * max(total, 1e-300)
    merged = [cuts[0]]
    for c in cuts[1:]:
        if c - merged[-1] > tol:
            merged.append(c)
    out = []
    cursor = {ch: 0 for ch in channels}
    for a, b in zip(merged[:-1], merged[1:]):
        active = {}
        for ch in channels:
            ch_spans = spans[ch]
            j = cursor[ch]
            while j < len(ch_spans) and ch_spans[j][1] <= a + tol:
                j += 1
            cursor[ch] = j
            active[ch] = None
            if j < len(ch_spans):
                lo, hi, s = ch_spans[j]
                if lo <= a + tol and hi >= b - tol:
                    active[ch] = s
        out.append((a, b - a, active))
    return out


def _ion_field(ion: int, active: dict, ctx: CrosstalkContext, scale: float,
               spectator_phase_offset: float):
    """Effective (complex rabi, detuning) for one ion during one slice.

    The spectator beam interferes with crosstalk only through the
    polarization overlap; its orthogonal remainder is added in quadrature.
    """
    coherent = 0.0j
    quadrature = 0.0
    detunings = []
    p = ctx.pol_overlap
    for ch, seg in active.items():
        if seg is None or seg.amplitude <= 0.0:
            continue
        amp = scale * seg.amplitude
        phase = seg.phase
        det = seg.detuning
        if ch == SPECTATOR:
            phase += spectator_phase_offset
        if ch != ion:
            # cross illumination
            amp *= ctx.f_ct
            phase += ctx.ct_phase
            det = det + ctx.delta_ct if ion == SPECTATOR else det - ctx.delta_ct
        if amp <= 0.0:
            continue
        if ch == SPECTATOR:
            coherent += p * amp * complex(math.cos(phase), math.sin(phase))
            quadrature = math.hypot(quadrature, math.sqrt(max(1.0 - p * p, 0.0)) * amp)
        else:
            coherent += amp * complex(math.cos(phase), math.sin(phase))
        detunings.append(det)
    if not detunings:
        return 0.0j, 0.0
    if max(detunings) - min(detunings) > 1e-6 * (1.0 + abs(detunings[0])):
        raise ValueError("overlapping drives at different detunings are not supported")
    omega = coherent
    if quadrature > 0.0:
        unit = coherent / abs(coherent) if abs(coherent) > 0.0 else 1.0 + 0.0j
        omega = coherent + 1.0j * quadrature * unit
    return omega, detunings[0]


def sequence_unitaries(
    seq: PulseSequence,
    ctx: CrosstalkContext,
    scale: float = 1.0,
    spectator_phase_offset: float = 0.0,
) -> dict:
    """Total qubit-frame propagator per ion for the full sequence."""
    out = {TARGET: IDENTITY.copy(), SPECTATOR: IDENTITY.copy()}
    for start, dur, active in _slices(seq):
        if dur <= 0.0:
            continue
        for ion in (TARGET, SPECTATOR):
            omega, det = _ion_field(ion, active, ctx, scale, spectator_phase_offset)
            if omega == 0.0j:
                continue
            out[ion] = frame_segment_unitary(omega, det, dur, start) @ out[ion]
    return out


def simulate(
    seq: PulseSequence,
    ctx: CrosstalkContext,
    initial: dict | None = None,
    shots: int | None = None,
    seed: int | None = None,
    point_index: int = 0,
    phase_noise=None,
    scale: float = 1.0,
) -> SimulationResult:
    """Evolve both channels through the sequence.

    Parameters
    ----------
    seq : PulseSequence
        The pulse program; channels are padded to a common duration.
    ctx : CrosstalkContext
        Crosstalk ratio, detuning, polarization overlap and crosstalk phase.
    initial : dict, optional
        Initial :class:`QubitState` per channel; defaults to ground states.
    shots : int, optional
        If given, draw binomial measurement outcomes per channel.
    seed, point_index : int
        Shot noise is drawn from a generator keyed on ``(seed, point_index)``
        so scan points are reproducible independent of evaluation order.
    phase_noise : array-like, optional
        Per-shot phase offsets (rad) applied to the whole spectator channel,
        modeling differential path phase drift between the channels.
    scale : float
        Global amplitude scale applied to every segment.
    """
    if initial is None:
        initial = {}
    states0 = {
        TARGET: initial.get(TARGET, QubitState.ground()),
        SPECTATOR: initial.get(SPECTATOR, QubitState.ground()),
    }
    unitaries = sequence_unitaries(seq, ctx, scale)
    states = {ch: QubitState.from_vector(unitaries[ch] @ states0[ch].vector)
              for ch in (TARGET, SPECTATOR)}
    populations = {ch: states[ch].excited_population() for ch in (TARGET, SPECTATOR)}

    sampled = None
    if shots is None:
        shots = seq.shots
    if shots is not None:
        if shots < 1:
            raise ValueError("shots must be >= 1")
        if seed is None:
            seed = seq.seed if seq.seed is not None else 0
        words = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(point_index) & 0xFFFFFFFFFFFFFFFF]
        rng = np.random.default_rng(np.random.SeedSequence(words))
        sampled = {}
        if phase_noise is None:
            for ch in (TARGET, SPECTATOR):
                sampled[ch] = float(rng.binomial(shots, populations[ch])) / shots
        else:
            offsets = np.asarray(phase_noise, dtype=float)
            if offsets.size < shots:
                raise ValueError("phase_noise must provide one offset per shot")
            counts = {TARGET: 0, SPECTATOR: 0}
            for k in range(shots):
                us = sequence_unitaries(seq, ctx, scale, spectator_phase_offset=offsets[k])
                for ch in (TARGET, SPECTATOR):
                    vec = us[ch] @ states0[ch].vector
                    pk = min(max(abs(vec[1]) ** 2, 0.0), 1.0)
                    counts[ch] += int(rng.random() < pk)
            sampled = {ch: counts[ch] / shots for ch in (TARGET, SPECTATOR)}
    return SimulationResult(states=states, populations=populations, sampled=sampled)
