"""Rotating-frame dynamics of the three-level lambda atom.

Basis order is (|1>, |2>, |3>) with |3> the shared excited state.  In the
rotating-wave frame (one rotating frame per optical transition) the
Hamiltonian is

    H/hbar = Delta |3><3|
           + (Omega_P(t)/2) (exp(-i phi_P) |3><1| + h.c.)
           + (Omega_C(t)/2) (exp(-i phi_C) |3><2| + h.c.)

where Delta = 2*pi*1e-3*delta_khz rad/us.  The detuning sits entirely on
|3>, so the spin coherence rho12 is detuning-free and a free optical
coherence evolves as rho13(t) = rho13(0) * exp(+i*Delta*t).

Unit conventions (the only conversion site in the package): configuration
frequencies are ordinary kHz; times are us; Rabi amplitudes and H entries
are angular rad/us; decay values in kHz convert to 1/us rates by *1e-3
with no 2*pi factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ensemble import AtomGroup, EnsembleSignal, group_deltas, reduce_signal
from .errors import ConfigError, NumericalStabilityError
from .sequence import CHANNEL_P, DecayRates, Pulse, PulseSequence

KHZ_TO_PER_US = 1.0e-3
KHZ_TO_RAD_PER_US = 2.0 * math.pi * 1.0e-3

TRACE_TOL = 1e-8
HERM_TOL = 1e-10
EIG_TOL = 1e-8

GROUND = np.diag([1.0, 0.0, 0.0]).astype(complex)


@dataclass(frozen=True)
class RunParams:
    """Integrator step sizes (ns) and sampling stride (in steps)."""

    dt_pulse_ns: float = 1.0
    dt_free_ns: float = 10.0
    sample_stride: int = 10

    def __post_init__(self):
        if self.dt_pulse_ns <= 0 or self.dt_free_ns <= 0:
            raise ConfigError("step sizes must be positive")
        if self.dt_pulse_ns > self.dt_free_ns:
            raise ConfigError(
                f"dt_pulse_ns ({self.dt_pulse_ns}) must not exceed "
                f"dt_free_ns ({self.dt_free_ns})"
            )
        if self.sample_stride < 1:
            raise ConfigError("sample_stride must be >= 1")

    @property
    def dt_pulse_us(self) -> float:
        return self.dt_pulse_ns * 1e-3

    @property
    def dt_free_us(self) -> float:
        return self.dt_free_ns * 1e-3


@dataclass
class Trajectory:
    """Sampled evolution of one atom group.

    Population samples are real; coherences complex.  max_herm_drift records
    the largest Hermiticity defect removed by symmetrization at a sample.
    """

    delta_khz: float
    times_us: np.ndarray
    rho11: np.ndarray
    rho22: np.ndarray
    rho33: np.ndarray
    rho12: np.ndarray
    rho13: np.ndarray
    rho23: np.ndarray
    max_herm_drift: float = 0.0

    def density_matrix(self, i: int) -> np.ndarray:
        """Reassemble the Hermitian 3x3 density matrix at sample i."""
        r = np.empty((3, 3), dtype=complex)
        r[0, 0] = self.rho11[i]
        r[1, 1] = self.rho22[i]
        r[2, 2] = self.rho33[i]
        r[0, 1] = self.rho12[i]
        r[0, 2] = self.rho13[i]
        r[1, 2] = self.rho23[i]
        r[1, 0] = np.conj(r[0, 1])
        r[2, 0] = np.conj(r[0, 2])
        r[2, 1] = np.conj(r[1, 2])
        return r

    def purity(self) -> np.ndarray:
        """tr(rho^2) at every sample."""
        return (
            self.rho11**2
            + self.rho22**2
            + self.rho33**2
            + 2.0 * (np.abs(self.rho12) ** 2 + np.abs(self.rho13) ** 2 + np.abs(self.rho23) ** 2)
        ).real


def hamiltonian_at(t_us: float, delta_khz: float, seq: PulseSequence) -> np.ndarray:
    """Rotating-frame Hamiltonian (rad/us) at one instant for one group.

    All pulses active at t on a channel contribute additively to that
    channel's complex drive amplitude.
    """

    omega_p, omega_c = _drive_amplitudes(
        [p for p in seq.pulses if p.active_at(t_us)]
    )
    h = np.zeros((3, 3), dtype=complex)
    h[2, 2] = delta_khz * KHZ_TO_RAD_PER_US
    h[2, 0] = omega_p
    h[0, 2] = np.conj(omega_p)
    h[2, 1] = omega_c
    h[1, 2] = np.conj(omega_c)
    return h


def _drive_amplitudes(active: Sequence[Pulse]) -> tuple[complex, complex]:
    """Summed half-Rabi drive terms (the |3><1| and |3><2| entries)."""
    omega_p = 0.0 + 0.0j
    omega_c = 0.0 + 0.0j
    for p in active:
        amp = 0.5 * p.rabi_rad_per_us * np.exp(-1j * p.phase_rad)
        if p.channel == CHANNEL_P:
            omega_p += amp
        else:
            omega_c += amp
    return omega_p, omega_c


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, rates: DecayRates) -> np.ndarray:
    """Right-hand side d(rho)/dt = -i[H, rho] + relaxation (1/us).

    Population relaxation moves rho33 into rho11 and rho22 at Gamma31 and
    Gamma32; coherences decay at gamma31 + (Gamma31+Gamma32)/2 (rho13),
    gamma32 + (Gamma31+Gamma32)/2 (rho23) and gamma21 (rho12).  The result
    is exactly traceless.  Broadcasts over leading batch axes.
    """

    decay, big_g31, big_g32 = _decay_terms(rates)
    drho = -1j * (h @ rho - rho @ h)
    drho -= decay * rho
    p33 = rho[..., 2, 2]
    drho[..., 0, 0] += big_g31 * p33
    drho[..., 1, 1] += big_g32 * p33
    drho[..., 2, 2] -= (big_g31 + big_g32) * p33
    return drho


def _decay_terms(rates: DecayRates) -> tuple[np.ndarray, float, float]:
    """Elementwise decay-rate mask (1/us) plus the population rates."""
    big_g31 = rates.Gamma31_khz * KHZ_TO_PER_US
    big_g32 = rates.Gamma32_khz * KHZ_TO_PER_US
    g13 = rates.gamma31_khz * KHZ_TO_PER_US + 0.5 * (big_g31 + big_g32)
    g23 = rates.gamma32_khz * KHZ_TO_PER_US + 0.5 * (big_g31 + big_g32)
    g12 = rates.gamma21_khz * KHZ_TO_PER_US
    decay = np.array(
        [
            [0.0, g12, g13],
            [g12, 0.0, g23],
            [g13, g23, 0.0],
        ]
    )
    return decay, big_g31, big_g32


@dataclass(frozen=True)
class _Segment:
    t0_us: float
    t1_us: float
    h_us: float
    n_steps: int
    active: tuple[Pulse, ...]


#: per-step rotation budget (rad) at the default dt_pulse of 1 ns; within
#: pulses the step shrinks below dt_pulse whenever the drive would rotate
#: the state by more than this per step, so the RK4 truncation error (and
#: with it the positivity drift of the sampled density matrices) stays
#: bounded for arbitrarily strong pulses
STEP_ROTATION_BUDGET_RAD_PER_NS = 0.015


def _build_schedule(
    seq: PulseSequence, params: RunParams, max_abs_delta_rad: float = 0.0
) -> list[_Segment]:
    """Split [0, horizon] at pulse edges; pick the step size per segment.

    Steps never straddle a pulse edge, so the drive is constant within any
    single RK4 step and pulse areas integrate exactly.  Within pulses the
    step is additionally capped by the per-step rotation budget (which
    scales with dt_pulse, so halving dt_pulse still halves every step).
    """

    edges = {0.0, float(seq.horizon_us)}
    for p in seq.pulses:
        for e in (p.t_start_us, p.t_end_us):
            if 0.0 < e < seq.horizon_us:
                edges.add(float(e))
    cuts = sorted(edges)
    budget_rad = STEP_ROTATION_BUDGET_RAD_PER_NS * params.dt_pulse_ns
    segments = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-12:
            continue
        mid = 0.5 * (a + b)
        active = tuple(p for p in seq.pulses if p.active_at(mid))
        if active:
            omega_p, omega_c = _drive_amplitudes(active)
            omega_eff = 2.0 * (abs(omega_p) + abs(omega_c)) + max_abs_delta_rad
            dt = min(params.dt_pulse_us, budget_rad / max(omega_eff, 1e-12))
        else:
            dt = params.dt_free_us
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        segments.append(_Segment(a, b, (b - a) / n, n, active))
    return segments


def _segment_hamiltonian(
    seg: _Segment, deltas_rad: np.ndarray
) -> np.ndarray:
    """Constant Hamiltonian of a segment for every group, shape (n,3,3)."""
    n = deltas_rad.shape[0]
    h = np.zeros((n, 3, 3), dtype=complex)
    h[:, 2, 2] = deltas_rad
    omega_p, omega_c = _drive_amplitudes(seg.active)
    h[:, 2, 0] = omega_p
    h[:, 0, 2] = np.conj(omega_p)
    h[:, 2, 1] = omega_c
    h[:, 1, 2] = np.conj(omega_c)
    return h


class _Recorder:
    """Accumulates samples for a batch of groups and polices invariants."""

    def __init__(self, deltas_khz: np.ndarray):
        self.deltas_khz = deltas_khz
        self.times: list[float] = []
        self.rhos: list[np.ndarray] = []
        self.max_herm_drift = np.zeros(deltas_khz.shape[0])

    def _fail(self, what: str, value: float, group: int, t_us: float):
        raise NumericalStabilityError(
            f"{what} ({value:.3e}) for group delta = "
            f"{self.deltas_khz[group]:g} kHz",
            t_us,
        )

    def record(self, t_us: float, rho: np.ndarray) -> np.ndarray:
        drift = np.max(np.abs(rho - rho.conj().swapaxes(-1, -2)), axis=(-1, -2))
        bad = int(np.argmax(drift))
        if drift[bad] > HERM_TOL:
            self._fail("hermiticity drift", drift[bad], bad, t_us)
        self.max_herm_drift = np.maximum(self.max_herm_drift, drift)
        rho = 0.5 * (rho + rho.conj().swapaxes(-1, -2))

        trace = rho[..., 0, 0].real + rho[..., 1, 1].real + rho[..., 2, 2].real
        terr = np.abs(trace - 1.0)
        bad = int(np.argmax(terr))
        if terr[bad] > TRACE_TOL:
            self._fail("trace deviation", terr[bad], bad, t_us)
        eigs = np.linalg.eigvalsh(rho)
        lows = eigs.min(axis=-1)
        bad = int(np.argmin(lows))
        if lows[bad] < -EIG_TOL:
            self._fail("negative eigenvalue", lows[bad], bad, t_us)
        self.times.append(t_us)
        self.rhos.append(rho)
        return rho


def _integrate_batch(
    deltas_khz: np.ndarray,
    seq: PulseSequence,
    rates: DecayRates,
    params: RunParams,
    rho0: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fixed-step RK4 over the full horizon for a batch of detunings.

    Returns (times, rho_samples, max_herm_drift) with rho_samples of shape
    (n_samples, n_groups, 3, 3).  Deterministic: the step schedule depends
    only on the sequence and params, never on the data.
    """

    n = deltas_khz.shape[0]
    deltas_rad = deltas_khz * KHZ_TO_RAD_PER_US
    if rho0 is None:
        rho = np.broadcast_to(GROUND, (n, 3, 3)).copy()
    else:
        rho = np.array(rho0, dtype=complex)
        if rho.shape == (3, 3):
            rho = np.broadcast_to(rho, (n, 3, 3)).copy()
        if rho.shape != (n, 3, 3):
            raise ConfigError(f"rho0 must have shape (3,3) or ({n},3,3)")

    decay, big_g31, big_g32 = _decay_terms(rates)
    any_pop_decay = big_g31 + big_g32 > 0.0

    def rhs(r, h):
        d = -1j * (h @ r - r @ h)
        d -= decay * r
        if any_pop_decay:
            p33 = r[..., 2, 2]
            d[..., 0, 0] += big_g31 * p33
            d[..., 1, 1] += big_g32 * p33
            d[..., 2, 2] -= (big_g31 + big_g32) * p33
        return d

    rec = _Recorder(deltas_khz)
    rec.record(0.0, rho)
    stride = params.sample_stride

    schedule = _build_schedule(
        seq, params, max_abs_delta_rad=float(np.max(np.abs(deltas_rad), initial=0.0))
    )
    # The stride counter restarts at every segment and segment ends (pulse
    # edges, horizon) are always sampled, so the free-region sample grid is
    # anchored to the pulse layout and survives step refinement unchanged.
    for seg in schedule:
        h_mat = _segment_hamiltonian(seg, deltas_rad)
        h = seg.h_us
        for i in range(seg.n_steps):
            k1 = rhs(rho, h_mat)
            k2 = rhs(rho + (0.5 * h) * k1, h_mat)
            k3 = rhs(rho + (0.5 * h) * k2, h_mat)
            k4 = rhs(rho + h * k3, h_mat)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            done = i + 1
            if done % stride == 0 or done == seg.n_steps:
                t = seg.t1_us if done == seg.n_steps else seg.t0_us + done * h
                rho = rec.record(t, rho)

    times = np.array(rec.times)
    samples = np.stack(rec.rhos, axis=0)
    return times, samples, rec.max_herm_drift


def _trajectories_from_samples(
    deltas_khz: np.ndarray,
    times: np.ndarray,
    samples: np.ndarray,
    herm_drift: np.ndarray,
) -> list[Trajectory]:
    out = []
    for k, d in enumerate(deltas_khz):
        out.append(
            Trajectory(
                delta_khz=float(d),
                times_us=times,
                rho11=samples[:, k, 0, 0].real.copy(),
                rho22=samples[:, k, 1, 1].real.copy(),
                rho33=samples[:, k, 2, 2].real.copy(),
                rho12=samples[:, k, 0, 1].copy(),
                rho13=samples[:, k, 0, 2].copy(),
                rho23=samples[:, k, 1, 2].copy(),
                max_herm_drift=float(herm_drift[k]),
            )
        )
    return out


def integrate_group(
    delta_khz: float,
    seq: PulseSequence,
    rates: DecayRates,
    params: RunParams,
    rho0: Optional[np.ndarray] = None,
) -> Trajectory:
    """Integrate one atom group from rho0 (default |1><1|)."""
    deltas = np.array([float(delta_khz)])
    times, samples, drift = _integrate_batch(deltas, seq, rates, params, rho0)
    return _trajectories_from_samples(deltas, times, samples, drift)[0]


def simulate_ensemble(
    groups: Sequence[AtomGroup],
    seq: PulseSequence,
    rates: DecayRates,
    params: RunParams,
) -> tuple[list[Trajectory], EnsembleSignal]:
    """Integrate every group from |1><1| and reduce to the ensemble signal.

    Groups evolve independently (vectorized over the batch axis); the
    reduction order is fixed ascending in detuning.
    """

    deltas = group_deltas(groups)
    times, samples, drift = _integrate_batch(deltas, seq, rates, params)
    trajectories = _trajectories_from_samples(deltas, times, samples, drift)
    signal = reduce_signal(trajectories, list(groups))
    return trajectories, signal
