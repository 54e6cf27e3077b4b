"""Control pulses on the two optical transitions of the lambda system.

Channel P couples |1>-|3> (data and rephasing pulses); channel C couples
|2>-|3> (the locking pair B1/B2).  Pulses are rectangular: a pulse of area
a*pi and duration d has constant Rabi amplitude a*pi/d (rad/us).  Roles
(D, R1, B1, B2, R2, bit<k>) are explicit labels so the analytic predictors
never have to guess which pulse plays which part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ConfigError

CHANNEL_P = "P"
CHANNEL_C = "C"

#: roles understood by the analytic predictors
ROLE_DATA = "D"
ROLE_R1 = "R1"
ROLE_R2 = "R2"
ROLE_B1 = "B1"
ROLE_B2 = "B2"


def area_to_rabi(area_pi: float, duration_us: float) -> float:
    """Angular Rabi amplitude (rad/us) of a rectangular pulse.

    The time-integrated area of the returned amplitude over duration_us is
    exactly area_pi * pi.
    """

    if duration_us <= 0:
        raise ConfigError(f"pulse duration must be positive, got {duration_us}")
    return area_pi * math.pi / duration_us


@dataclass(frozen=True)
class Pulse:
    channel: str
    t_start_us: float
    duration_us: float
    area_pi: float
    phase_rad: float = 0.0
    role: Optional[str] = None

    def __post_init__(self):
        if self.channel not in (CHANNEL_P, CHANNEL_C):
            raise ConfigError(f"unknown channel {self.channel!r} (use P or C)")
        if self.duration_us <= 0:
            raise ConfigError(
                f"pulse duration must be positive, got {self.duration_us}"
            )
        if self.area_pi < 0:
            raise ConfigError(f"pulse area must be >= 0, got {self.area_pi}")

    @property
    def t_end_us(self) -> float:
        return self.t_start_us + self.duration_us

    @property
    def t_center_us(self) -> float:
        return self.t_start_us + 0.5 * self.duration_us

    @property
    def rabi_rad_per_us(self) -> float:
        return area_to_rabi(self.area_pi, self.duration_us)

    def active_at(self, t_us: float) -> bool:
        """Half-open activity window [t_start, t_end)."""
        return self.t_start_us <= t_us < self.t_end_us


@dataclass(frozen=True)
class DecayRates:
    """Decay rates in ordinary-frequency kHz (rate = value * 1e3 / s).

    Gamma* are population decay rates out of |3>; gamma31/gamma32 are extra
    optical coherence decay rates; gamma21 is the spin coherence decay rate.
    """

    Gamma31_khz: float = 0.0
    Gamma32_khz: float = 0.0
    gamma31_khz: float = 0.0
    gamma32_khz: float = 0.0
    gamma21_khz: float = 0.0

    def __post_init__(self):
        for name in (
            "Gamma31_khz",
            "Gamma32_khz",
            "gamma31_khz",
            "gamma32_khz",
            "gamma21_khz",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"negative rate {name} = {getattr(self, name)}")


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...]
    horizon_us: float

    def __post_init__(self):
        if self.horizon_us <= 0:
            raise ConfigError(f"horizon_us must be positive, got {self.horizon_us}")

    def channel_pulses(self, channel: str) -> list[Pulse]:
        return [p for p in self.pulses if p.channel == channel]

    def find_role(self, role: str) -> Optional[Pulse]:
        for p in self.pulses:
            if p.role == role:
                return p
        return None

    def require_role(self, role: str) -> Pulse:
        p = self.find_role(role)
        if p is None:
            raise ConfigError(f"sequence has no pulse with role {role!r}")
        return p

    def data_pulses(self) -> list[Pulse]:
        """Pulses carrying data: role D or bit<k>, sorted by start time."""
        out = [
            p
            for p in self.pulses
            if p.role == ROLE_DATA or (p.role or "").startswith("bit")
        ]
        return sorted(out, key=lambda p: p.t_start_us)

    def with_replaced(self, old: Pulse, new: Pulse) -> "PulseSequence":
        pulses = tuple(new if p is old else p for p in self.pulses)
        return make_sequence(pulses, self.horizon_us)


def make_sequence(pulses: Iterable[Pulse], horizon_us: float) -> PulseSequence:
    """Build a sequence with pulses sorted by start time."""
    ordered = tuple(sorted(pulses, key=lambda p: (p.t_start_us, p.channel)))
    return PulseSequence(pulses=ordered, horizon_us=horizon_us)


@dataclass(frozen=True)
class Violation:
    severity: str  # "error" | "warning" | "notice"
    message: str


def validate(seq: PulseSequence) -> list[Violation]:
    """Diagnose a sequence; returns an empty list when everything is fine.

    Same-channel overlap and pulses beyond the horizon are errors.
    Cross-channel overlap is permitted (the lambda system supports
    simultaneous drive) but flagged as a warning since none of the bundled
    scenarios use it.  An empty pulse list is a notice.
    """

    out: list[Violation] = []
    if not seq.pulses:
        out.append(Violation("notice", "no pulses"))
        return out

    starts = [p.t_start_us for p in seq.pulses]
    if starts != sorted(starts):
        out.append(Violation("notice", "pulses were not sorted by start time"))

    for p in seq.pulses:
        if p.t_end_us > seq.horizon_us + 1e-12:
            out.append(
                Violation(
                    "error",
                    f"pulse {p.role or p.channel} ending at {p.t_end_us:g} us "
                    f"exceeds horizon {seq.horizon_us:g} us",
                )
            )
        if p.t_start_us < 0:
            out.append(
                Violation(
                    "error",
                    f"pulse {p.role or p.channel} starts before t = 0",
                )
            )

    def overlaps(a: Pulse, b: Pulse) -> bool:
        return a.t_start_us < b.t_end_us - 1e-12 and b.t_start_us < a.t_end_us - 1e-12

    n = len(seq.pulses)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = seq.pulses[i], seq.pulses[j]
            if not overlaps(a, b):
                continue
            la, lb = a.role or a.channel, b.role or b.channel
            if a.channel == b.channel:
                out.append(
                    Violation(
                        "error",
                        f"same-channel overlap between {la} and {lb} "
                        f"on channel {a.channel}",
                    )
                )
            else:
                out.append(
                    Violation(
                        "warning",
                        f"cross-channel overlap between {la} and {lb}",
                    )
                )
    return out


@dataclass(frozen=True)
class LockingShift:
    shift_rad: float
    satisfies_2npi: bool
    n: Optional[int]


def locking_phase_shift(theta_b1_pi: float, theta_b2_pi: float) -> LockingShift:
    """Carrier-phase shift imparted by a B1-B2 locking pair.

    Each population transfer between |3> and |2> contributes pi/2 of phase
    per pi of transfer area, so the pair shifts the optical coherence by
    (theta_b1 + theta_b2) * pi / 2.  The shift leaves the rephased
    coherence unchanged when it equals 2*n*pi.
    """

    if theta_b1_pi < 0 or theta_b2_pi < 0:
        raise ConfigError("locking pulse areas must be >= 0")
    shift = (theta_b1_pi + theta_b2_pi) * math.pi / 2.0
    n = round(shift / (2.0 * math.pi))
    satisfied = abs(shift - 2.0 * math.pi * n) <= 1e-9
    return LockingShift(
        shift_rad=shift,
        satisfies_2npi=satisfied,
        n=n if satisfied else None,
    )


__all__ = [
    "CHANNEL_P",
    "CHANNEL_C",
    "ROLE_DATA",
    "ROLE_R1",
    "ROLE_R2",
    "ROLE_B1",
    "ROLE_B2",
    "Pulse",
    "PulseSequence",
    "DecayRates",
    "Violation",
    "LockingShift",
    "area_to_rabi",
    "make_sequence",
    "validate",
    "locking_phase_shift",
]
