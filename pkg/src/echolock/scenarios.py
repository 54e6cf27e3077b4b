"""Bundled demonstration scenarios.

All four scenarios share the ensemble (340 kHz FWHM Gaussian over an
800 kHz span, 161 groups), a 120 us horizon, and the pulse skeleton
data -> R1 (20 us) -> B1 (22 us) -> B2 (62 us) [-> R2 (90 us)], with the
quoted times being pulse centres (the analytic echo-time formulas count
phase from pulse centres, so centred placement makes the simulated peaks
land exactly on the predicted times).

fig1      single 0.1 pi data pulse, B2 area 3 pi, no R2: one optically
          locked echo at 70 us, emitted under population inversion.
fig2      B2 area pi plus a second rephasing pulse R2: the 70 us echo is
          rendered absorptive (silenced) and a second, inversion-free
          echo forms at 110 us.
fig3blue  three weak data bits (0.05 pi at 2, 6 and 14 us, slot 10
          skipped) instead of the single data pulse: first echoes replay
          reversed, second echoes in the original order.
fig3red   fig3blue with optical coherence decay gamma31 = gamma32 =
          2 kHz: first echoes decay with echo time, second echoes stay
          flat.
"""

from __future__ import annotations

from .config import RunConfig, serialize_config
from .dynamics import RunParams
from .ensemble import EnsembleSpec
from .sequence import (
    CHANNEL_C,
    CHANNEL_P,
    DecayRates,
    Pulse,
    ROLE_B1,
    ROLE_B2,
    ROLE_DATA,
    ROLE_R1,
    ROLE_R2,
    make_sequence,
)

SCENARIO_IDS = ("fig1", "fig2", "fig3blue", "fig3red")

HORIZON_US = 120.0

#: data-bit centres (us) for the multi-bit scenarios; the third slot of the
#: 4 us ladder is left empty (on, on, off, on).  The spacing keeps every
#: first echo inside the clear window between B2 and R2 and far enough from
#: its neighbours that envelope tails do not perturb the peak amplitudes.
BIT_CENTERS_US = (2.0, 6.0, 14.0)
BIT_AREA_PI = 0.05


def _centered(channel, role, center_us, duration_us, area_pi) -> Pulse:
    return Pulse(
        channel=channel,
        t_start_us=center_us - 0.5 * duration_us,
        duration_us=duration_us,
        area_pi=area_pi,
        role=role,
    )


def _skeleton(b2_area_pi: float, with_r2: bool) -> list[Pulse]:
    pulses = [
        _centered(CHANNEL_P, ROLE_R1, 20.0, 0.1, 1.0),
        _centered(CHANNEL_C, ROLE_B1, 22.0, 0.1, 1.0),
        _centered(CHANNEL_C, ROLE_B2, 62.0, 0.1, b2_area_pi),
    ]
    if with_r2:
        pulses.append(_centered(CHANNEL_P, ROLE_R2, 90.0, 0.1, 1.0))
    return pulses


def _build(pulses, rates: DecayRates) -> RunConfig:
    return RunConfig(
        sequence=make_sequence(pulses, horizon_us=HORIZON_US),
        rates=rates,
        ensemble_spec=EnsembleSpec(),
        params=RunParams(),
    )


def _single_data() -> list[Pulse]:
    return [_centered(CHANNEL_P, ROLE_DATA, 10.0, 1.0, 0.1)]


def _data_bits() -> list[Pulse]:
    return [
        _centered(CHANNEL_P, f"bit{i}", t, 1.0, BIT_AREA_PI)
        for i, t in enumerate(BIT_CENTERS_US)
    ]


def scenario_config(scenario_id: str) -> RunConfig:
    """Resolved RunConfig of one scenario preset."""
    if scenario_id == "fig1":
        return _build(_single_data() + _skeleton(3.0, with_r2=False), DecayRates())
    if scenario_id == "fig2":
        return _build(_single_data() + _skeleton(1.0, with_r2=True), DecayRates())
    if scenario_id == "fig3blue":
        return _build(_data_bits() + _skeleton(1.0, with_r2=True), DecayRates())
    if scenario_id == "fig3red":
        return _build(
            _data_bits() + _skeleton(1.0, with_r2=True),
            DecayRates(gamma31_khz=2.0, gamma32_khz=2.0),
        )
    raise KeyError(scenario_id)


def scenario_text(scenario_id: str) -> str:
    """Scenario preset as config text (round-trips through parse_config)."""
    return serialize_config(scenario_config(scenario_id))
