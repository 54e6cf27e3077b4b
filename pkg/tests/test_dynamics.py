import math

import numpy as np
import pytest

from echolock.dynamics import (
    RunParams,
    hamiltonian_at,
    integrate_group,
    lindblad_rhs,
    simulate_ensemble,
)
from echolock.ensemble import EnsembleSpec, build_ensemble
from echolock.errors import ConfigError, NumericalStabilityError
from echolock.scenarios import scenario_config
from echolock.sequence import DecayRates, Pulse, make_sequence

NO_DECAY = DecayRates()


def _pi_pulse(t_center=1.0, area=1.0, channel="P", role="R1"):
    return Pulse(channel, t_center - 0.05, 0.1, area, role=role)


# ---------------------------------------------------------------------------
# Hamiltonian


def test_hamiltonian_idle_resonant_is_zero():
    seq = make_sequence([], horizon_us=10.0)
    h = hamiltonian_at(5.0, 0.0, seq)
    assert np.all(h == 0.0)


def test_hamiltonian_detuning_term():
    seq = make_sequence([], horizon_us=10.0)
    h = hamiltonian_at(5.0, 10.0, seq)
    expected = 2 * math.pi * 0.01
    assert h[2, 2] == pytest.approx(expected, rel=1e-12)
    h[2, 2] = 0.0
    assert np.all(h == 0.0)


def test_hamiltonian_inside_rephasing_pulse():
    seq = make_sequence([_pi_pulse(t_center=1.0)], horizon_us=10.0)
    h = hamiltonian_at(1.0, 0.0, seq)
    assert h[2, 0] == pytest.approx(5 * math.pi, rel=1e-12)
    assert h[0, 2] == pytest.approx(5 * math.pi, rel=1e-12)
    assert h[2, 1] == 0.0


def test_hamiltonian_carrier_phase_enters_off_diagonal():
    seq = make_sequence(
        [Pulse("C", 0.0, 1.0, 1.0, phase_rad=math.pi / 2)], horizon_us=10.0
    )
    h = hamiltonian_at(0.5, 0.0, seq)
    assert h[2, 1] == pytest.approx((math.pi / 2) * np.exp(-1j * math.pi / 2))
    assert h[1, 2] == pytest.approx(np.conj(h[2, 1]))
    assert np.max(np.abs(h - h.conj().T)) <= 1e-15


def test_hamiltonian_sums_simultaneous_pulses():
    seq = make_sequence(
        [Pulse("P", 0.0, 1.0, 0.5), Pulse("P", 0.5, 1.0, 0.5)], horizon_us=10.0
    )
    lone = hamiltonian_at(0.25, 0.0, seq)[2, 0]
    both = hamiltonian_at(0.75, 0.0, seq)[2, 0]
    assert both == pytest.approx(2 * lone, rel=1e-12)


# ---------------------------------------------------------------------------
# right-hand side


def test_rhs_zero_hamiltonian_zero_rates():
    rho = np.array([[0.5, 0.1j, 0.2], [-0.1j, 0.3, 0.0], [0.2, 0.0, 0.2]], complex)
    d = lindblad_rhs(rho, np.zeros((3, 3), complex), NO_DECAY)
    assert np.max(np.abs(d)) == 0.0


def test_rhs_commutator_is_traceless():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = 0.5 * (h + h.conj().T)
        d = lindblad_rhs(rho, h, NO_DECAY)
        assert abs(np.trace(d)) <= 1e-14


def test_rhs_population_decay_rates():
    rho = np.diag([0.0, 0.0, 1.0]).astype(complex)
    rates = DecayRates(Gamma31_khz=1.0, Gamma32_khz=1.0)
    d = lindblad_rhs(rho, np.zeros((3, 3), complex), rates)
    assert d[2, 2].real == pytest.approx(-0.002, rel=1e-12)
    assert d[0, 0].real == pytest.approx(0.001, rel=1e-12)
    assert d[1, 1].real == pytest.approx(0.001, rel=1e-12)
    assert abs(np.trace(d)) == 0.0


def test_rhs_coherence_decay_channels():
    rho = np.full((3, 3), 0.1, dtype=complex)
    np.fill_diagonal(rho, 1 / 3)
    rates = DecayRates(
        Gamma31_khz=2.0, Gamma32_khz=4.0, gamma31_khz=1.0, gamma32_khz=5.0,
        gamma21_khz=7.0,
    )
    d = lindblad_rhs(rho, np.zeros((3, 3), complex), rates)
    # optical coherences decay at gamma + (Gamma31+Gamma32)/2, spin at gamma21
    assert d[0, 2] == pytest.approx(-(0.001 + 0.003) * 0.1, rel=1e-12)
    assert d[1, 2] == pytest.approx(-(0.005 + 0.003) * 0.1, rel=1e-12)
    assert d[0, 1] == pytest.approx(-0.007 * 0.1, rel=1e-12)
    assert abs(np.trace(d)) <= 1e-18


def test_rhs_broadcasts_over_batches():
    rho = np.stack([np.diag([1.0, 0, 0]), np.diag([0, 0, 1.0])]).astype(complex)
    h = np.zeros((2, 3, 3), complex)
    h[:, 2, 2] = 1.0
    d = lindblad_rhs(rho, h, DecayRates(Gamma31_khz=1.0))
    assert d.shape == (2, 3, 3)
    assert d[0, 2, 2] == 0.0
    assert d[1, 2, 2].real == pytest.approx(-0.001)


# ---------------------------------------------------------------------------
# integration


def test_resonant_pi_pulse_inverts_population():
    seq = make_sequence([_pi_pulse()], horizon_us=2.0)
    tr = integrate_group(0.0, seq, NO_DECAY, RunParams())
    assert abs(tr.rho33[-1] - 1.0) <= 1e-6
    assert abs(tr.rho11[-1]) <= 1e-6


def test_free_evolution_phase_advance():
    rho0 = np.array([[0.5, 0, 0.45], [0, 0, 0], [0.45, 0, 0.5]], complex)
    seq = make_sequence([], horizon_us=25.0)
    tr = integrate_group(10.0, seq, NO_DECAY, RunParams(), rho0=rho0)
    advance = np.angle(tr.rho13[-1]) - np.angle(tr.rho13[0])
    assert abs(advance - math.pi / 2) <= 1e-4
    assert np.max(np.abs(np.abs(tr.rho13) - 0.45)) <= 1e-9


def test_rephasing_conjugates_accumulated_phase():
    """Across a pi pulse the data coherence phase is mirrored: the phases at
    symmetric instants around the pulse centre sum to zero (mod 2 pi)."""
    base = [
        Pulse("P", 9.5, 1.0, 0.01, role="D"),
        _pi_pulse(t_center=20.0, role="R1"),
    ]
    seq = make_sequence(base, horizon_us=25.0)
    silent = make_sequence(
        [Pulse("P", 9.5, 1.0, 0.0, role="D"), _pi_pulse(t_center=20.0, role="R1")],
        horizon_us=25.0,
    )
    for delta in (10.0, 50.0, -30.0):
        tr = integrate_group(delta, seq, NO_DECAY, RunParams())
        bg = integrate_group(delta, silent, NO_DECAY, RunParams())
        sig = tr.rho13 - bg.rho13
        i_before = int(np.argmin(np.abs(tr.times_us - 19.0)))
        i_after = int(np.argmin(np.abs(tr.times_us - 21.0)))
        total = np.angle(sig[i_before]) + np.angle(sig[i_after])
        wrapped = math.remainder(total, 2 * math.pi)
        assert abs(wrapped) <= 0.02, f"delta={delta}: {wrapped}"


def test_detuning_mirror_symmetry():
    """rho13(-delta, t) = -conj(rho13(delta, t)) for real-phase sequences."""
    cfg = scenario_config("fig2")
    up = integrate_group(35.0, cfg.sequence, NO_DECAY, RunParams())
    down = integrate_group(-35.0, cfg.sequence, NO_DECAY, RunParams())
    assert np.max(np.abs(down.rho13 + np.conj(up.rho13))) <= 1e-9
    assert np.max(np.abs(down.rho33 - up.rho33)) <= 1e-9


def test_trajectory_invariants_on_locked_sequence():
    seq = scenario_config("fig1").sequence
    tr = integrate_group(25.0, seq, NO_DECAY, RunParams())
    trace = tr.rho11 + tr.rho22 + tr.rho33
    assert np.max(np.abs(trace - 1.0)) <= 1e-8
    assert np.max(np.abs(tr.purity() - 1.0)) <= 1e-6
    assert tr.max_herm_drift <= 1e-10
    cs = np.abs(tr.rho13) ** 2 - tr.rho11 * tr.rho33
    assert cs.max() <= 1e-8


def test_population_decay_between_pulses():
    seq = make_sequence([_pi_pulse()], horizon_us=101.05)
    rates = DecayRates(Gamma31_khz=5.0, Gamma32_khz=0.0)
    tr = integrate_group(0.0, seq, rates, RunParams())
    # |3> decays back to |1> at 0.005 /us over the 100 us after the pulse;
    # decay during the 0.1 us pulse itself shifts the endpoint by O(Gamma*tau)
    assert tr.rho33[-1] == pytest.approx(math.exp(-0.5), rel=1e-3)


def test_unstable_step_raises_with_time_and_group():
    seq = make_sequence([_pi_pulse()], horizon_us=40.0)
    with pytest.raises(NumericalStabilityError) as err:
        integrate_group(
            200.0, seq, NO_DECAY, RunParams(dt_pulse_ns=5000, dt_free_ns=5000)
        )
    assert "us" in str(err.value)
    assert "delta" in str(err.value)


def test_run_params_validation():
    with pytest.raises(ConfigError):
        RunParams(dt_pulse_ns=0)
    with pytest.raises(ConfigError):
        RunParams(dt_pulse_ns=20, dt_free_ns=10)
    with pytest.raises(ConfigError):
        RunParams(sample_stride=0)


def test_integration_is_deterministic():
    seq = scenario_config("fig2").sequence
    a = integrate_group(12.5, seq, NO_DECAY, RunParams())
    b = integrate_group(12.5, seq, NO_DECAY, RunParams())
    assert np.array_equal(a.rho13, b.rho13)
    assert np.array_equal(a.times_us, b.times_us)


def test_simulate_ensemble_single_group_matches_integrate():
    spec = EnsembleSpec(fwhm_khz=340.0, span_khz=1.0, n_groups=3)
    groups = build_ensemble(spec)
    seq = make_sequence([Pulse("P", 9.5, 1.0, 0.1, role="D")], horizon_us=15.0)
    trajs, sig = simulate_ensemble(groups, seq, NO_DECAY, RunParams())
    lone = integrate_group(0.0, seq, NO_DECAY, RunParams())
    middle = trajs[1]
    assert middle.delta_khz == 0.0
    # narrow span: 1 kHz groups barely differ but the reduction is exact
    recon = sum(
        g.weight * t.rho13 for g, t in zip(groups, trajs)
    )
    assert np.max(np.abs(recon - sig.polarization)) <= 1e-15
    assert np.max(np.abs(middle.rho13 - lone.rho13)) <= 1e-12
