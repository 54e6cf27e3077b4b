import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echolock.dynamics import Trajectory, simulate_ensemble
from echolock.ensemble import (
    AtomGroup,
    EnsembleSpec,
    build_ensemble,
    group_deltas,
    group_weights,
    reduce_signal,
)
from echolock.errors import ConfigError, ShapeError


def test_default_grid_layout():
    groups = build_ensemble(EnsembleSpec(340.0, 800.0, 161))
    deltas = group_deltas(groups)
    assert len(groups) == 161
    assert deltas[0] == -400.0 and deltas[-1] == 400.0
    assert np.allclose(np.diff(deltas), 5.0)
    assert deltas[80] == 0.0


def test_default_grid_weights():
    groups = build_ensemble(EnsembleSpec(340.0, 800.0, 161))
    deltas = group_deltas(groups)
    w = group_weights(groups)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert w.argmax() == 80
    # half maximum sits exactly at +/- FWHM/2 = 170 kHz, a grid point
    i170 = int(np.flatnonzero(deltas == 170.0)[0])
    assert abs(w[i170] / w[80] - 0.5) <= 1e-9
    assert np.allclose(w, w[::-1], rtol=0, atol=1e-15)


@pytest.mark.parametrize(
    "fwhm,span,n",
    [(340, 800, 160), (340, 800, 2), (340, 800, 1), (0, 800, 161), (340, -1, 161)],
)
def test_invalid_specs_rejected(fwhm, span, n):
    with pytest.raises(ConfigError):
        EnsembleSpec(fwhm, span, n)


@settings(max_examples=60, derandomize=True)
@given(
    fwhm=st.floats(1.0, 5000.0),
    span=st.floats(1.0, 5000.0),
    half=st.integers(1, 300),
)
def test_weights_normalized_and_symmetric(fwhm, span, half):
    groups = build_ensemble(EnsembleSpec(fwhm, span, 2 * half + 1))
    w = group_weights(groups)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert w.max() == w[half]
    assert np.allclose(w, w[::-1], rtol=0, atol=1e-15)
    assert (w >= 0).all()


def _flat_trajectory(delta, times, rho13):
    n = times.size
    return Trajectory(
        delta_khz=delta,
        times_us=times,
        rho11=np.full(n, 0.9),
        rho22=np.zeros(n),
        rho33=np.full(n, 0.1),
        rho12=np.zeros(n, complex),
        rho13=rho13,
        rho23=np.zeros(n, complex),
    )


def test_reduce_single_group_is_identity():
    times = np.linspace(0.0, 1.0, 11)
    rho13 = (0.1 + 0.2j) * np.exp(1j * times)
    sig = reduce_signal(
        [_flat_trajectory(0.0, times, rho13)], [AtomGroup(0.0, 1.0)]
    )
    assert np.array_equal(sig.polarization, rho13)
    assert np.allclose(sig.rho11, 0.9)
    assert np.allclose(sig.inversion_w, 0.1 - 0.9)


def test_reduce_symmetric_pair_is_real():
    # equal real starting coherence on +/- delta rotating opposite ways
    times = np.linspace(0.0, 10.0, 101)
    omega = 2 * np.pi * 0.01
    up = 0.3 * np.exp(1j * omega * times)
    down = 0.3 * np.exp(-1j * omega * times)
    sig = reduce_signal(
        [_flat_trajectory(-10.0, times, down), _flat_trajectory(10.0, times, up)],
        [AtomGroup(-10.0, 0.5), AtomGroup(10.0, 0.5)],
    )
    assert np.max(np.abs(sig.polarization.imag)) <= 1e-12


def test_reduce_rejects_mismatched_grids():
    t1 = np.linspace(0.0, 1.0, 11)
    t2 = np.linspace(0.0, 1.0, 12)
    trajs = [
        _flat_trajectory(-1.0, t1, np.zeros(11, complex)),
        _flat_trajectory(1.0, t2, np.zeros(12, complex)),
    ]
    with pytest.raises(ShapeError):
        reduce_signal(trajs, [AtomGroup(-1.0, 0.5), AtomGroup(1.0, 0.5)])


def test_reduce_rejects_count_mismatch():
    times = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ShapeError):
        reduce_signal(
            [_flat_trajectory(0.0, times, np.zeros(11, complex))],
            [AtomGroup(-1.0, 0.5), AtomGroup(1.0, 0.5)],
        )


def test_half_ensemble_reconstruction(fig2_run):
    """P(t) equals the delta >= 0 half plus conjugate mirror contributions."""
    trajs = sorted(fig2_run.trajectories, key=lambda t: t.delta_khz)
    groups = build_ensemble(fig2_run.cfg.ensemble_spec)
    w = group_weights(groups)
    n = len(trajs)
    mid = n // 2
    half = w[mid] * trajs[mid].rho13
    for k in range(mid + 1, n):
        half = half + w[k] * 2j * trajs[k].rho13.imag
    assert np.max(np.abs(half - fig2_run.signal.polarization)) <= 1e-10


def test_refinement_stability(fig2_run):
    """Doubling the grid resolution moves echo amplitudes by < 1%."""
    from dataclasses import replace

    from echolock import analysis

    cfg = replace(
        fig2_run.cfg,
        ensemble_spec=replace(fig2_run.cfg.ensemble_spec, n_groups=321),
    )
    groups = build_ensemble(cfg.ensemble_spec)
    _, signal = simulate_ensemble(groups, cfg.sequence, cfg.rates, cfg.params)
    events = analysis.detect_echoes(signal, cfg.sequence, cfg.threshold_fraction)
    assert len(events) == len(fig2_run.events) == 2
    for coarse, fine in zip(fig2_run.events, events):
        assert abs(fine.amplitude / coarse.amplitude - 1.0) < 0.01
