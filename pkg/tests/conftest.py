"""Shared fixtures: the expensive ensemble runs are computed once per session."""

from dataclasses import dataclass, replace

import pytest

from echolock import analysis
from echolock.config import RunConfig
from echolock.dynamics import simulate_ensemble
from echolock.ensemble import build_ensemble
from echolock.scenarios import scenario_config
from echolock.sequence import DecayRates


@dataclass
class RunResult:
    cfg: RunConfig
    trajectories: list
    signal: object
    events: list


def execute(cfg: RunConfig) -> RunResult:
    groups = build_ensemble(cfg.ensemble_spec)
    trajectories, signal = simulate_ensemble(
        groups, cfg.sequence, cfg.rates, cfg.params
    )
    events = analysis.detect_echoes(signal, cfg.sequence, cfg.threshold_fraction)
    return RunResult(cfg, trajectories, signal, events)


def with_b2_area(cfg: RunConfig, area_pi: float) -> RunConfig:
    b2 = cfg.sequence.require_role("B2")
    return replace(
        cfg, sequence=cfg.sequence.with_replaced(b2, replace(b2, area_pi=area_pi))
    )


@pytest.fixture(scope="session")
def fig1_run() -> RunResult:
    return execute(scenario_config("fig1"))


@pytest.fixture(scope="session")
def fig2_run() -> RunResult:
    return execute(scenario_config("fig2"))


@pytest.fixture(scope="session")
def fig2_half_run() -> RunResult:
    cfg = scenario_config("fig2").replace_params(
        dt_pulse_ns=0.5, dt_free_ns=5.0, sample_stride=20
    )
    return execute(cfg)


@pytest.fixture(scope="session")
def fig2_b2_3pi_run(fig2_run) -> RunResult:
    return execute(with_b2_area(fig2_run.cfg, 3.0))


@pytest.fixture(scope="session")
def fig2_b2_7pi_run(fig2_run) -> RunResult:
    return execute(with_b2_area(fig2_run.cfg, 7.0))


@pytest.fixture(scope="session")
def fig2_gamma2_run(fig2_run) -> RunResult:
    cfg = replace(
        fig2_run.cfg, rates=DecayRates(gamma31_khz=2.0, gamma32_khz=2.0)
    )
    return execute(cfg)


@pytest.fixture(scope="session")
def fig3blue_run() -> RunResult:
    return execute(scenario_config("fig3blue"))


@pytest.fixture(scope="session")
def fig3red_run() -> RunResult:
    return execute(scenario_config("fig3red"))
