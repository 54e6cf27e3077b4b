"""Line-oriented run configuration: parsing and serialization.

Format: `key = value` assignments, `#` comments, and repeated `[pulse]`
blocks, one per pulse.  Unknown keys and sections are hard errors; a typo
that silently fell back to a default would be worse than strictness.

Global keys (defaults in parentheses):

    horizon_us         (120)   total simulated time
    fwhm_khz           (340)   Gaussian linewidth of the ensemble
    span_khz           (800)   full detuning-grid width
    n_groups           (161)   odd number of detuning groups
    Gamma31_khz        (0)     population decay |3> -> |1>
    Gamma32_khz        (0)     population decay |3> -> |2>
    gamma31_khz        (0)     optical coherence decay on |1>-|3>
    gamma32_khz        (0)     optical coherence decay on |2>-|3>
    gamma21_khz        (0)     spin coherence decay
    dt_pulse_ns        (1)     integrator step inside pulses
    dt_free_ns         (10)    integrator step between pulses
    sample_stride      (10)    emit a sample every N steps
    threshold_fraction (0.35)  relative echo-detection threshold

Pulse keys: channel (P|C), role (optional label: D, R1, B1, B2, R2,
bit0, bit1, ...), t_start_us, duration_us, area_pi, phase_rad (0).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .dynamics import RunParams
from .ensemble import EnsembleSpec
from .errors import ConfigError
from .sequence import (
    DecayRates,
    Pulse,
    PulseSequence,
    Violation,
    make_sequence,
    validate,
)

_GLOBAL_FLOAT_KEYS = {
    "horizon_us",
    "fwhm_khz",
    "span_khz",
    "Gamma31_khz",
    "Gamma32_khz",
    "gamma31_khz",
    "gamma32_khz",
    "gamma21_khz",
    "dt_pulse_ns",
    "dt_free_ns",
    "threshold_fraction",
}
_GLOBAL_INT_KEYS = {"n_groups", "sample_stride"}
_PULSE_FLOAT_KEYS = {"t_start_us", "duration_us", "area_pi", "phase_rad"}
_PULSE_STR_KEYS = {"channel", "role"}

_DEFAULTS = {
    "horizon_us": 120.0,
    "fwhm_khz": 340.0,
    "span_khz": 800.0,
    "n_groups": 161,
    "Gamma31_khz": 0.0,
    "Gamma32_khz": 0.0,
    "gamma31_khz": 0.0,
    "gamma32_khz": 0.0,
    "gamma21_khz": 0.0,
    "dt_pulse_ns": 1.0,
    "dt_free_ns": 10.0,
    "sample_stride": 10,
    "threshold_fraction": 0.35,
}


@dataclass
class RunConfig:
    """Fully resolved inputs of one simulation run."""

    sequence: PulseSequence
    rates: DecayRates
    ensemble_spec: EnsembleSpec
    params: RunParams
    threshold_fraction: float = 0.35
    notices: list[Violation] = field(default_factory=list)

    def replace_params(self, **kwargs) -> "RunConfig":
        return replace(self, params=replace(self.params, **kwargs))


def _fail(line_no: int, message: str):
    raise ConfigError(f"line {line_no}: {message}")


def _parse_scalar(line_no: int, key: str, raw: str, as_int: bool):
    try:
        value = float(raw)
    except ValueError:
        _fail(line_no, f"cannot parse value {raw!r} for key {key!r}")
    if as_int:
        if value != int(value):
            _fail(line_no, f"key {key!r} requires an integer, got {raw!r}")
        return int(value)
    return value


def parse_config(text: str) -> RunConfig:
    """Parse config text into validated run inputs.

    Raises ConfigError with a line number for syntax problems, unknown
    keys, or semantic violations; sequence-level notices (for example
    "no pulses") are attached to the returned RunConfig.
    """

    globals_seen: dict[str, object] = {}
    pulse_blocks: list[tuple[int, dict[str, object]]] = []
    current: dict[str, object] | None = None

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[pulse]":
                _fail(line_no, f"unknown section {line!r} (only [pulse] exists)")
            current = {}
            pulse_blocks.append((line_no, current))
            continue
        if "=" not in line:
            _fail(line_no, f"expected 'key = value', got {raw_line.strip()!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not raw:
            _fail(line_no, f"missing value for key {key!r}")

        if current is None:
            if key in _GLOBAL_FLOAT_KEYS or key in _GLOBAL_INT_KEYS:
                if key in globals_seen:
                    _fail(line_no, f"duplicate key {key!r}")
                globals_seen[key] = _parse_scalar(
                    line_no, key, raw, key in _GLOBAL_INT_KEYS
                )
            else:
                _fail(line_no, f"unknown key {key!r}")
        else:
            if key in _PULSE_STR_KEYS:
                if key in current:
                    _fail(line_no, f"duplicate pulse key {key!r}")
                current[key] = raw
            elif key in _PULSE_FLOAT_KEYS:
                if key in current:
                    _fail(line_no, f"duplicate pulse key {key!r}")
                current[key] = _parse_scalar(line_no, key, raw, as_int=False)
            else:
                _fail(line_no, f"unknown pulse key {key!r}")

    values = dict(_DEFAULTS)
    values.update(globals_seen)

    pulses = []
    for line_no, block in pulse_blocks:
        for required in ("channel", "t_start_us", "duration_us", "area_pi"):
            if required not in block:
                _fail(line_no, f"[pulse] block is missing key {required!r}")
        try:
            pulses.append(
                Pulse(
                    channel=str(block["channel"]),
                    t_start_us=float(block["t_start_us"]),
                    duration_us=float(block["duration_us"]),
                    area_pi=float(block["area_pi"]),
                    phase_rad=float(block.get("phase_rad", 0.0)),
                    role=str(block["role"]) if "role" in block else None,
                )
            )
        except ConfigError as exc:
            _fail(line_no, str(exc))

    try:
        rates = DecayRates(
            Gamma31_khz=values["Gamma31_khz"],
            Gamma32_khz=values["Gamma32_khz"],
            gamma31_khz=values["gamma31_khz"],
            gamma32_khz=values["gamma32_khz"],
            gamma21_khz=values["gamma21_khz"],
        )
        spec = EnsembleSpec(
            fwhm_khz=values["fwhm_khz"],
            span_khz=values["span_khz"],
            n_groups=values["n_groups"],
        )
        params = RunParams(
            dt_pulse_ns=values["dt_pulse_ns"],
            dt_free_ns=values["dt_free_ns"],
            sample_stride=values["sample_stride"],
        )
        seq = make_sequence(pulses, horizon_us=values["horizon_us"])
    except ConfigError as exc:
        raise ConfigError(str(exc)) from None

    threshold = values["threshold_fraction"]
    if not 0.0 < threshold < 1.0:
        raise ConfigError(
            f"threshold_fraction must be in (0, 1), got {threshold}"
        )

    notices = []
    for v in validate(seq):
        if v.severity == "error":
            raise ConfigError(v.message)
        notices.append(v)

    return RunConfig(
        sequence=seq,
        rates=rates,
        ensemble_spec=spec,
        params=params,
        threshold_fraction=threshold,
        notices=notices,
    )


def serialize_config(cfg: RunConfig) -> str:
    """Emit config text that parses back to an identical RunConfig.

    Floats are written with shortest round-trip precision.
    """

    def num(x) -> str:
        return str(int(x)) if isinstance(x, int) else repr(float(x))

    lines = [
        f"horizon_us = {num(cfg.sequence.horizon_us)}",
        f"fwhm_khz = {num(cfg.ensemble_spec.fwhm_khz)}",
        f"span_khz = {num(cfg.ensemble_spec.span_khz)}",
        f"n_groups = {cfg.ensemble_spec.n_groups}",
        f"Gamma31_khz = {num(cfg.rates.Gamma31_khz)}",
        f"Gamma32_khz = {num(cfg.rates.Gamma32_khz)}",
        f"gamma31_khz = {num(cfg.rates.gamma31_khz)}",
        f"gamma32_khz = {num(cfg.rates.gamma32_khz)}",
        f"gamma21_khz = {num(cfg.rates.gamma21_khz)}",
        f"dt_pulse_ns = {num(cfg.params.dt_pulse_ns)}",
        f"dt_free_ns = {num(cfg.params.dt_free_ns)}",
        f"sample_stride = {cfg.params.sample_stride}",
        f"threshold_fraction = {num(cfg.threshold_fraction)}",
    ]
    for p in cfg.sequence.pulses:
        lines.append("")
        lines.append("[pulse]")
        lines.append(f"channel = {p.channel}")
        if p.role is not None:
            lines.append(f"role = {p.role}")
        lines.append(f"t_start_us = {num(p.t_start_us)}")
        lines.append(f"duration_us = {num(p.duration_us)}")
        lines.append(f"area_pi = {num(p.area_pi)}")
        lines.append(f"phase_rad = {num(p.phase_rad)}")
    return "\n".join(lines) + "\n"
