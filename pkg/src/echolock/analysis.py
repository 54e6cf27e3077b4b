"""Echo detection, analytic predictors, and the symbolic phase ledger.

Sign conventions used throughout: right after a weak data pulse the
ensemble coherence points along +i (Im P > 0), which is the absorptive
quadrature; an emissive feature has Im P < 0 at its peak.  A free optical
coherence advances its phase at +2*pi*delta_khz*1e-3 rad/us; an odd-pi
P-channel pulse conjugates the coherence (arg -> -arg); the B1-B2 locking
pair pauses optical phase evolution while the coherence is shelved in the
spin state and contributes +pi/2 of carrier phase per pi of transfer area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    KHZ_TO_RAD_PER_US,
    RunParams,
    Trajectory,
    integrate_group,
)
from .ensemble import EnsembleSignal
from .errors import ConfigError, DetectionError, ShapeError
from .sequence import (
    CHANNEL_C,
    CHANNEL_P,
    DecayRates,
    PulseSequence,
    ROLE_B1,
    ROLE_B2,
    ROLE_DATA,
    ROLE_R1,
    ROLE_R2,
    locking_phase_shift,
)

#: detection exclusion margin around every pulse (us)
PULSE_EXCLUSION_MARGIN_US = 0.2

#: map component id -> human description
MAP_COMPONENTS = {
    "re13": "Re rho13",
    "im13": "Im rho13",
    "rho33": "rho33",
}

LOC_GROUND = "ground-coherent"
LOC_EXCITED = "excited-coherent"
LOC_SHELVED = "spin-shelved"


# ---------------------------------------------------------------------------
# echo events and detection


@dataclass(frozen=True)
class EchoEvent:
    """A detected |P| peak outside all pulse windows.

    im_sign classifies emissive (-1) versus absorptive (+1) from the sign
    of Im P at the peak sample; inverted records whether the echo formed
    under population inversion (<rho33> > <rho11>).
    """

    t_us: float
    amplitude: float
    im_sign: int
    inverted: bool


def pulse_exclusion_mask(
    times_us: np.ndarray, seq: PulseSequence, margin_us: float = PULSE_EXCLUSION_MARGIN_US
) -> np.ndarray:
    """Boolean mask of samples inside any pulse window (padded by margin)."""
    mask = np.zeros(times_us.shape, dtype=bool)
    for p in seq.pulses:
        mask |= (times_us >= p.t_start_us - margin_us) & (
            times_us <= p.t_end_us + margin_us
        )
    return mask


def detect_echoes(
    signal: EnsembleSignal,
    seq: PulseSequence,
    threshold_fraction: float = 0.35,
) -> list[EchoEvent]:
    """Find |P(t)| peaks above a relative threshold, outside pulse windows.

    The threshold is threshold_fraction times the maximum of |P| over all
    out-of-window samples.  Peak times and amplitudes are refined by a
    parabola through the peak sample and its neighbours; the classification
    flags are evaluated at the peak sample itself.
    """

    if not 0.0 < threshold_fraction < 1.0:
        raise ConfigError(
            f"threshold_fraction must be in (0, 1), got {threshold_fraction}"
        )
    if signal.times_us.size == 0:
        raise ShapeError("empty signal")

    absp = np.abs(signal.polarization)
    excluded = pulse_exclusion_mask(signal.times_us, seq)
    included = ~excluded
    if not included.any():
        return []
    peak_floor = float(absp[included].max())
    if peak_floor <= 0.0:
        return []
    threshold = threshold_fraction * peak_floor

    events = []
    for i in range(1, len(absp) - 1):
        if excluded[i] or excluded[i - 1] or excluded[i + 1]:
            continue
        if not (absp[i] > absp[i - 1] and absp[i] > absp[i + 1]):
            continue
        if absp[i] <= threshold:
            continue
        t_peak, amp = _parabolic_vertex(
            signal.times_us[i - 1 : i + 2], absp[i - 1 : i + 2]
        )
        events.append(
            EchoEvent(
                t_us=t_peak,
                amplitude=amp,
                im_sign=1 if signal.polarization[i].imag >= 0 else -1,
                inverted=bool(signal.inversion_w[i] > 0),
            )
        )
    return events


def _parabolic_vertex(ts: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    """Vertex of the parabola through three samples (non-uniform spacing ok)."""
    a, b, c = np.polyfit(ts - ts[1], ys, 2)
    if a >= 0:
        return float(ts[1]), float(ys[1])
    x = -b / (2.0 * a)
    if not (ts[0] - ts[1] <= x <= ts[2] - ts[1]):
        return float(ts[1]), float(ys[1])
    return float(ts[1] + x), float(a * x * x + b * x + c)


def inversion_profile(signal: EnsembleSignal) -> np.ndarray:
    """Inversion time series w(t) = <rho33> - <rho11>; w > 0 means inverted."""
    return signal.inversion_w


# ---------------------------------------------------------------------------
# echo timing


@dataclass(frozen=True)
class EchoPrediction:
    """Analytic echo times (us); both second-echo formulas are reported.

    t_e2_chain_us results from time reversal of the first echo about the
    second rephasing pulse; t_e2_paper_us is the closed-form variant
    2*T_R2 - (T_R1 + T_D + T).  They coincide exactly when T_R1 = 2*T_D.
    """

    t_data_us: float
    t_lock_us: float
    t_e1_us: float
    t_e2_chain_us: Optional[float] = None
    t_e2_paper_us: Optional[float] = None
    agree: Optional[bool] = None


def predict_echo_times_at(seq: PulseSequence, t_data_us: float) -> EchoPrediction:
    """Echo-time prediction for a data pulse centred at t_data_us.

    Pulse positions enter through their centres.  Requires roles R1, B1
    and B2; R2 is optional (no second echo without it).
    """

    t_r1 = seq.require_role(ROLE_R1).t_center_us
    t_b1 = seq.require_role(ROLE_B1).t_center_us
    t_b2 = seq.require_role(ROLE_B2).t_center_us
    t_lock = t_b2 - t_b1
    t_e1 = 2.0 * t_r1 - t_data_us + t_lock

    r2 = seq.find_role(ROLE_R2)
    if r2 is None:
        return EchoPrediction(t_data_us, t_lock, t_e1)
    t_r2 = r2.t_center_us
    chain = 2.0 * t_r2 - t_e1
    paper = 2.0 * t_r2 - (t_r1 + t_data_us + t_lock)
    return EchoPrediction(
        t_data_us=t_data_us,
        t_lock_us=t_lock,
        t_e1_us=t_e1,
        t_e2_chain_us=chain,
        t_e2_paper_us=paper,
        agree=bool(abs(chain - paper) <= 1e-9),
    )


def predict_echo_times(seq: PulseSequence) -> EchoPrediction:
    """Echo-time prediction for the pulse with role D."""
    return predict_echo_times_at(seq, seq.require_role(ROLE_DATA).t_center_us)


# ---------------------------------------------------------------------------
# first/second echo intensity relation


@dataclass(frozen=True)
class Eq1Params:
    """Inputs of the echo-intensity relation.

    tau_us is the optical homogeneous intensity decay time; alpha is a
    dimensionless spin-dephasing decay factor.
    """

    I0: float
    tau_us: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.I0 < 0:
            raise ConfigError(f"I0 must be >= 0, got {self.I0}")
        if self.tau_us <= 0:
            raise ConfigError(f"tau_us must be positive, got {self.tau_us}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")


def eq1_intensities(
    p: Eq1Params, t_d_us: float, t_e1_us: float, t_e2_us: float
) -> tuple[float, float]:
    """Predicted first/second echo intensities.

    I_E1 = I0 exp(-(T_E1-T_D)/tau - alpha) and
    I_E2 = I_E1 exp(-(T_E2-T_E1)/tau), which depends only on the time
    differences.
    """

    if not (t_d_us < t_e1_us < t_e2_us):
        raise ValueError(
            f"need T_D < T_E1 < T_E2, got {t_d_us}, {t_e1_us}, {t_e2_us}"
        )
    i_e1 = p.I0 * math.exp(-(t_e1_us - t_d_us) / p.tau_us - p.alpha)
    i_e2 = i_e1 * math.exp(-(t_e2_us - t_e1_us) / p.tau_us)
    return i_e1, i_e2


def fit_intensity_decay(
    times_us: np.ndarray, intensities: np.ndarray
) -> tuple[float, float]:
    """Least-squares single-exponential fit I(t) = I0 exp(-t/tau).

    Returns (I0, tau_us).  Used to calibrate the intensity decay time from
    a free-decay run before asserting echo-intensity ratios.
    """

    times_us = np.asarray(times_us, dtype=float)
    intensities = np.asarray(intensities, dtype=float)
    if times_us.shape != intensities.shape or times_us.size < 2:
        raise ShapeError("need matching time/intensity arrays of length >= 2")
    if np.any(intensities <= 0):
        raise ValueError("intensities must be positive for a log-linear fit")
    slope, intercept = np.polyfit(times_us, np.log(intensities), 1)
    if slope >= 0:
        raise ValueError("intensity does not decay; cannot fit tau")
    return float(np.exp(intercept)), float(-1.0 / slope)


# ---------------------------------------------------------------------------
# multi-bit ordering


@dataclass(frozen=True)
class OrderReport:
    verdict: str  # "same" | "reversed" | "mixed"
    pairs: list[tuple[int, EchoEvent]]
    amplitude_spread: float


def check_order(
    data_bit_times: Sequence[float],
    events: Sequence[EchoEvent],
    kind: str,
    tol_us: float = 0.5,
) -> OrderReport:
    """Match data bits to in-window echo events and judge their order.

    kind selects the expected timing law: in the first-echo window events
    obey t_event + t_bit = const (reversed read-out), in the second-echo
    window t_event - t_bit = const (original order).  The verdict is
    decided from which law the matched times actually satisfy, "mixed" if
    neither.  Also reports the peak-amplitude spread max/min - 1 of the
    matched events for flatness checks.
    """

    if kind not in ("E1-window", "E2-window"):
        raise ConfigError(f"kind must be 'E1-window' or 'E2-window', got {kind!r}")
    bits = sorted(float(t) for t in data_bit_times)
    evs = sorted(events, key=lambda e: e.t_us)
    if len(bits) != len(evs):
        raise DetectionError(
            f"{len(bits)} data bits but {len(evs)} events in the {kind}: "
            f"bits at {bits}, events at {[round(e.t_us, 3) for e in evs]}"
        )
    if not bits:
        raise DetectionError("no data bits to match")

    amps = [e.amplitude for e in evs]
    spread = max(amps) / min(amps) - 1.0 if min(amps) > 0 else math.inf

    n = len(bits)
    if n == 1:
        return OrderReport("same", [(0, evs[0])], spread)

    sums = [evs[n - 1 - k].t_us + bits[k] for k in range(n)]
    diffs = [evs[k].t_us - bits[k] for k in range(n)]
    rev_resid = max(sums) - min(sums)
    same_resid = max(diffs) - min(diffs)

    if same_resid <= tol_us and same_resid <= rev_resid:
        return OrderReport("same", [(k, evs[k]) for k in range(n)], spread)
    if rev_resid <= tol_us:
        return OrderReport(
            "reversed", [(k, evs[n - 1 - k]) for k in range(n)], spread
        )
    return OrderReport("mixed", [(k, evs[k]) for k in range(n)], spread)


# ---------------------------------------------------------------------------
# coherence maps and uv trajectories


def coherence_map(
    trajectories: Sequence[Trajectory], component: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rectangular (detuning x time) map of one coherence component.

    Returns (deltas_khz, times_us, values) with one row per group in
    ascending detuning order.
    """

    if component not in MAP_COMPONENTS:
        raise ConfigError(
            f"unknown component {component!r}; choose from {sorted(MAP_COMPONENTS)}"
        )
    if not trajectories:
        raise ShapeError("no trajectories to map")
    trajs = sorted(trajectories, key=lambda t: t.delta_khz)
    times = trajs[0].times_us
    for t in trajs[1:]:
        if not np.array_equal(t.times_us, times):
            raise ShapeError("trajectories do not share a common sample grid")
    if component == "re13":
        rows = [t.rho13.real for t in trajs]
    elif component == "im13":
        rows = [t.rho13.imag for t in trajs]
    else:
        rows = [t.rho33 for t in trajs]
    deltas = np.array([t.delta_khz for t in trajs])
    return deltas, times.copy(), np.stack(rows, axis=0)


@dataclass(frozen=True)
class UvPoint:
    """One point of the optical coherence in the uv plane.

    u and v are the real and imaginary parts of rho13.
    """

    u: float
    v: float


def uv_trajectory(trajectory: Trajectory) -> list[UvPoint]:
    """Pointwise (Re rho13, Im rho13) path of one atom group.

    Plotting two of these for symmetric detunings +/-delta reproduces the
    mirrored pair of coherence orbits; the mirror axis is the v axis
    because rho13(-delta, t) = -conj(rho13(delta, t)) for real-phase
    pulse sequences.
    """

    return [
        UvPoint(float(z.real), float(z.imag)) for z in trajectory.rho13
    ]


# ---------------------------------------------------------------------------
# symbolic phase ledger


@dataclass(frozen=True)
class LedgerInterval:
    """One stretch of the predicted coherence-phase history.

    sign is the paper-style exponent sign of exp(+/- i 2 pi delta t)
    relative to the running rephasing reference; const_phase_rad is the
    accumulated carrier phase (odd-pi P pulses contribute pi, the locking
    pair its transfer shift).  phase_at_begin_rad is the full predicted
    phase (constant plus evolution) relative to the +i quadrature.
    """

    t_begin_us: float
    t_end_us: float
    sign: int
    const_phase_rad: float
    phase_at_begin_rad: float
    location: str

    def contains(self, t_us: float) -> bool:
        return self.t_begin_us <= t_us <= self.t_end_us


@dataclass(frozen=True)
class EchoCharacter:
    label: str  # "E1", "E2", ...
    t_us: float
    const_phase_rad: float
    character: str  # "absorptive" | "emissive" | "mixed"


@dataclass
class LedgerReport:
    """Piecewise symbolic prediction of one group's coherence phase."""

    delta_khz: float
    intervals: list[LedgerInterval]
    echoes: list[EchoCharacter]
    t_data_us: float

    def interval_at(self, t_us: float) -> LedgerInterval:
        for iv in self.intervals:
            if iv.contains(t_us):
                return iv
        raise ValueError(f"t = {t_us} us outside the ledger horizon")

    def predicted_phase(self, t_us: float) -> float:
        """Phase relative to the +i quadrature (constant + evolution)."""
        iv = self.interval_at(t_us)
        if iv.location == LOC_SHELVED:
            return iv.phase_at_begin_rad
        delta_rad = self.delta_khz * KHZ_TO_RAD_PER_US
        return iv.phase_at_begin_rad + delta_rad * (t_us - iv.t_begin_us)

    def predicted_arg_rho13(self, t_us: float) -> float:
        """Predicted arg rho13 (the data coherence starts on +i)."""
        return 0.5 * math.pi + self.predicted_phase(t_us)


def _is_odd_pi(area_pi: float, tol: float = 1e-9) -> bool:
    n = round(area_pi)
    return abs(area_pi - n) <= tol and n % 2 == 1


def phase_ledger(seq: PulseSequence, delta_khz: float) -> LedgerReport:
    """Symbolic phase history of the data coherence for one detuning.

    Models a single weak data pulse (role D): evolution starts at the data
    pulse centre with phase 0 on the +i quadrature; every odd-pi P-channel
    pulse conjugates the accumulated phase and adds pi of carrier phase;
    the B1..B2 span freezes evolution (coherence shelved in the spin
    state) and contributes the pair's transfer shift on completion.
    Intervals are split at pulse centres and at rephasing closures (echo
    instants), where the paper-style evolution sign changes.
    """

    data = seq.require_role(ROLE_DATA)
    seq.require_role(ROLE_R1)
    b1 = seq.find_role(ROLE_B1)
    b2 = seq.find_role(ROLE_B2)
    if (b1 is None) != (b2 is None):
        raise ConfigError("roles B1 and B2 must both be present or both absent")
    for p in seq.channel_pulses(CHANNEL_C):
        if p.role not in (ROLE_B1, ROLE_B2):
            raise ConfigError(
                f"C-channel pulse with role {p.role!r} not supported by the ledger"
            )

    delta_rad = delta_khz * KHZ_TO_RAD_PER_US

    # events at pulse centres
    events: list[tuple[float, str, object]] = []
    for p in seq.pulses:
        if p is data:
            events.append((p.t_center_us, "data", p))
        elif p.channel == CHANNEL_P and _is_odd_pi(p.area_pi):
            events.append((p.t_center_us, "conjugate", p))
        elif p.channel == CHANNEL_P:
            raise ConfigError(
                f"P-channel pulse {p.role or '?'} with area {p.area_pi} pi is "
                "neither the data pulse nor an odd-pi rephasing pulse"
            )
    if b1 is not None:
        events.append((b1.t_center_us, "shelve", b1))
        events.append((b2.t_center_us, "unshelve", b2))
    events.sort(key=lambda e: e[0])

    intervals: list[LedgerInterval] = []
    echoes: list[EchoCharacter] = []

    const = 0.0  # accumulated carrier phase
    tau = 0.0  # signed evolution time (us); echo when tau crosses 0
    started = False
    shelved = False
    location = LOC_GROUND
    conjugations = 0
    t_prev = 0.0

    def emit(t0: float, t1: float):
        """Record [t0, t1], splitting at a rephasing closure if one occurs."""
        nonlocal tau
        if t1 - t0 <= 1e-12:
            return
        if not started or shelved:
            seg_sign = int(np.sign(tau)) or 1
            intervals.append(
                LedgerInterval(
                    t0,
                    t1,
                    seg_sign,
                    const,
                    const + delta_rad * tau,
                    LOC_SHELVED if shelved else location,
                )
            )
            return
        # free evolution: tau grows at +1 us/us
        t_cross = t0 - tau  # tau == 0 there
        pieces = [(t0, t1)]
        if conjugations >= 1 and t0 < t_cross < t1:
            pieces = [(t0, t_cross), (t_cross, t1)]
            echoes.append(
                EchoCharacter(
                    label=f"E{len(echoes) + 1}",
                    t_us=t_cross,
                    const_phase_rad=const,
                    character=_phase_character(const),
                )
            )
        for a, b in pieces:
            tau_a = tau + (a - t0)
            seg_sign = int(np.sign(tau_a + 0.5 * (b - a))) or 1
            intervals.append(
                LedgerInterval(
                    a,
                    b,
                    seg_sign,
                    const,
                    const + delta_rad * tau_a,
                    location,
                )
            )
        tau += t1 - t0

    for t_ev, kind, pulse in events:
        emit(t_prev, t_ev)
        t_prev = t_ev
        if kind == "data":
            started = True
            const = 0.0
            tau = 0.0
            location = LOC_GROUND
        elif kind == "conjugate":
            if shelved:
                raise ConfigError(
                    "rephasing pulse inside the B1..B2 locking span is not "
                    "supported by the ledger"
                )
            if started:
                const = math.pi - const
                tau = -tau
                conjugations += 1
            location = LOC_EXCITED if location == LOC_GROUND else LOC_GROUND
        elif kind == "shelve":
            if shelved:
                raise ConfigError("B1 while already shelved")
            shelved = True
        elif kind == "unshelve":
            if not shelved:
                raise ConfigError("B2 without a preceding B1")
            shelved = False
            if started:
                const += locking_phase_shift(
                    seq.require_role(ROLE_B1).area_pi, pulse.area_pi
                ).shift_rad

    emit(t_prev, seq.horizon_us)
    return LedgerReport(
        delta_khz=delta_khz,
        intervals=intervals,
        echoes=echoes,
        t_data_us=data.t_center_us,
    )


def _phase_character(const_phase_rad: float) -> str:
    """Absorptive when the carrier phase is an even multiple of pi (the
    coherence realigns on the +i quadrature it started from), emissive for
    odd multiples."""
    w = math.cos(const_phase_rad)
    if w > 0.999:
        return "absorptive"
    if w < -0.999:
        return "emissive"
    return "mixed"


def wrap_phase(x: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return float(math.remainder(x, 2.0 * math.pi))


def ledger_vs_simulation(
    seq: PulseSequence,
    delta_khz: float,
    rates: Optional[DecayRates] = None,
    params: Optional[RunParams] = None,
) -> float:
    """Maximum phase discrepancy (rad) between ledger and full integration.

    Integrates the group twice, once as configured and once with the data
    pulse area set to zero, and compares the phase of the difference (the
    data-borne coherence in the perturbative regime) against the ledger at
    the midpoint of every free post-data interval.  The zero-area baseline
    removes the small detuning-dependent coherence that imperfect pi
    pulses create from population, which is not part of the ledger model
    and would otherwise mask the phase being checked.  Shelved intervals
    are skipped: the optical coherence is parked in the spin state there
    and carries no optical phase to compare.
    """

    rates = rates or DecayRates()
    params = params or RunParams()
    data = seq.require_role(ROLE_DATA)
    if data.area_pi > 0.01 + 1e-12:
        raise ConfigError(
            "ledger comparison requires a perturbative data pulse "
            f"(area <= 0.01 pi), got {data.area_pi} pi"
        )
    ledger = phase_ledger(seq, delta_khz)

    baseline_seq = seq.with_replaced(data, replace(data, area_pi=0.0))
    traj = integrate_group(delta_khz, seq, rates, params)
    base = integrate_group(delta_khz, baseline_seq, rates, params)
    if not np.array_equal(traj.times_us, base.times_us):
        raise ShapeError("baseline run produced a different sample grid")
    signal = traj.rho13 - base.rho13

    worst = 0.0
    for iv in ledger.intervals:
        if iv.location == LOC_SHELVED:
            continue
        if iv.t_end_us <= ledger.t_data_us:
            continue
        mid = 0.5 * (iv.t_begin_us + iv.t_end_us)
        if any(p.t_start_us <= mid <= p.t_end_us for p in seq.pulses):
            continue
        i = int(np.argmin(np.abs(traj.times_us - mid)))
        t = float(traj.times_us[i])
        if not iv.contains(t):
            continue
        measured = float(np.angle(signal[i]))
        predicted = ledger.predicted_arg_rho13(t)
        worst = max(worst, abs(wrap_phase(measured - predicted)))
    return worst
