"""Command-line interface.

Subcommands:

    run <config>            simulate a config file
    scenario <id>           simulate a bundled scenario (fig1, fig2,
                            fig3blue, fig3red)
    predict <config>        print analytic echo times and the locking
                            condition without simulating
    sweep <config> <path> <values...>
                            rerun the simulation for each value of one
                            numeric config key

Exit codes: 0 success, 2 configuration error, 3 numerical-stability error.

run/scenario write signal.csv and echoes.csv into --out-dir, plus
cohmap_<component>.csv / uv_<delta>.csv on request, each with a PNG
sibling unless --no-figures is given.  Numbers are serialized with nine
significant digits, so identical configs produce byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import analysis, viz
from .analysis import EchoEvent, EchoPrediction
from .config import RunConfig, parse_config, serialize_config
from .dynamics import simulate_ensemble
from .ensemble import EnsembleSignal, build_ensemble
from .errors import (
    ConfigError,
    DetectionError,
    EchoLockError,
    NumericalStabilityError,
    ShapeError,
)
from .scenarios import SCENARIO_IDS, scenario_config
from .sequence import ROLE_B1, ROLE_B2, ROLE_DATA, PulseSequence, locking_phase_shift

#: maximum distance between a detected peak and an analytic echo time for
#: the event to be attributed to that data pulse
MATCH_TOL_US = 1.0


def _fmt(x: float) -> str:
    return f"{x:.9g}"


# ---------------------------------------------------------------------------
# CSV writers


def _write_lines(path: Path, lines: list[str]):
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def write_signal_csv(path: Path, signal: EnsembleSignal):
    lines = ["t_us,reP,imP,absP2,rho11,rho22,rho33,inversion_w"]
    p = signal.polarization
    inv = signal.inversion_w
    for i, t in enumerate(signal.times_us):
        lines.append(
            ",".join(
                (
                    _fmt(t),
                    _fmt(p[i].real),
                    _fmt(p[i].imag),
                    _fmt(abs(p[i]) ** 2),
                    _fmt(signal.rho11[i]),
                    _fmt(signal.rho22[i]),
                    _fmt(signal.rho33[i]),
                    _fmt(inv[i]),
                )
            )
        )
    _write_lines(path, lines)


def write_echoes_csv(path: Path, events: Sequence[EchoEvent], matched: Sequence[int]):
    lines = ["t_us,amplitude,im_sign,inverted,matched_bit"]
    for e, bit in zip(events, matched):
        lines.append(
            ",".join(
                (
                    _fmt(e.t_us),
                    _fmt(e.amplitude),
                    str(e.im_sign),
                    str(int(e.inverted)),
                    str(bit),
                )
            )
        )
    _write_lines(path, lines)


def write_cohmap_csv(path: Path, deltas, times, values):
    lines = ["delta_khz," + ",".join(_fmt(t) for t in times)]
    for d, row in zip(deltas, values):
        lines.append(_fmt(d) + "," + ",".join(_fmt(v) for v in row))
    _write_lines(path, lines)


def write_uv_csv(path: Path, times, points):
    lines = ["t_us,u,v"]
    for t, pt in zip(times, points):
        lines.append(f"{_fmt(t)},{_fmt(pt.u)},{_fmt(pt.v)}")
    _write_lines(path, lines)


def write_sweep_csv(path: Path, rows: Sequence[dict]):
    lines = ["value,T_E1,T_E2,amp_E1,amp_E2,inverted_E1,inverted_E2"]

    def cell(x):
        if x is None:
            return ""
        if isinstance(x, bool):
            return str(int(x))
        return _fmt(x)

    for r in rows:
        lines.append(
            ",".join(
                cell(r[k])
                for k in (
                    "value",
                    "T_E1",
                    "T_E2",
                    "amp_E1",
                    "amp_E2",
                    "inverted_E1",
                    "inverted_E2",
                )
            )
        )
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# event attribution


def match_events_to_bits(
    seq: PulseSequence, events: Sequence[EchoEvent]
) -> list[int]:
    """Index of the data pulse each event belongs to (-1 when unmatched).

    An event is attributed to the data pulse whose analytic first- or
    second-echo time lies closest to the peak, within MATCH_TOL_US.
    """

    data = seq.data_pulses()
    predictions: list[tuple[float, int]] = []
    for i, d in enumerate(data):
        try:
            pred = analysis.predict_echo_times_at(seq, d.t_center_us)
        except ConfigError:
            return [-1] * len(events)
        predictions.append((pred.t_e1_us, i))
        if pred.t_e2_chain_us is not None:
            predictions.append((pred.t_e2_chain_us, i))

    out = []
    for e in events:
        best = (-1, MATCH_TOL_US)
        for t_pred, i in predictions:
            gap = abs(e.t_us - t_pred)
            if gap <= best[1]:
                best = (i, gap)
        out.append(best[0])
    return out


# ---------------------------------------------------------------------------
# simulation driver shared by run/scenario/sweep


def _resolve_overrides(cfg: RunConfig, args) -> RunConfig:
    kwargs = {}
    if args.dt_pulse_ns is not None:
        kwargs["dt_pulse_ns"] = args.dt_pulse_ns
    if args.dt_free_ns is not None:
        kwargs["dt_free_ns"] = args.dt_free_ns
    if kwargs:
        cfg = cfg.replace_params(**kwargs)
    if args.threshold is not None:
        cfg = replace(cfg, threshold_fraction=args.threshold)
    return cfg


def _simulate(cfg: RunConfig):
    if not cfg.sequence.pulses:
        raise ConfigError("no pulses")
    groups = build_ensemble(cfg.ensemble_spec)
    trajectories, signal = simulate_ensemble(
        groups, cfg.sequence, cfg.rates, cfg.params
    )
    events = analysis.detect_echoes(signal, cfg.sequence, cfg.threshold_fraction)
    return trajectories, signal, events


def _run_and_write(cfg: RunConfig, args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for notice in cfg.notices:
        print(f"{notice.severity}: {notice.message}", file=sys.stderr)

    trajectories, signal, events = _simulate(cfg)
    matched = match_events_to_bits(cfg.sequence, events)

    write_signal_csv(out_dir / "signal.csv", signal)
    write_echoes_csv(out_dir / "echoes.csv", events, matched)
    written = ["signal.csv", "echoes.csv"]

    figures = not args.no_figures
    if figures:
        viz.render_signal_figure(out_dir / "signal.png", signal, cfg.sequence, events)
        written.append("signal.png")

    for component in args.cohmap or ():
        deltas, times, values = analysis.coherence_map(trajectories, component)
        write_cohmap_csv(out_dir / f"cohmap_{component}.csv", deltas, times, values)
        written.append(f"cohmap_{component}.csv")
        if figures:
            viz.render_cohmap_figure(
                out_dir / f"cohmap_{component}.png", deltas, times, values, component
            )
            written.append(f"cohmap_{component}.png")

    for delta in args.uv or ():
        traj = min(trajectories, key=lambda tr: abs(tr.delta_khz - delta))
        points = analysis.uv_trajectory(traj)
        tag = f"{traj.delta_khz:g}"
        write_uv_csv(out_dir / f"uv_{tag}.csv", traj.times_us, points)
        written.append(f"uv_{tag}.csv")
        if figures:
            viz.render_uv_figure(out_dir / f"uv_{tag}.png", points, traj.delta_khz)
            written.append(f"uv_{tag}.png")

    for e, bit in zip(events, matched):
        kind = "emissive" if e.im_sign < 0 else "absorptive"
        inv = "inverted" if e.inverted else "not inverted"
        bit_note = f"  bit {bit}" if bit >= 0 else ""
        print(
            f"echo at {e.t_us:.3f} us  |P| = {e.amplitude:.6g}  "
            f"{kind}, {inv}{bit_note}"
        )
    if not events:
        print("no echoes detected")
    print(f"wrote {' '.join(written)} in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    cfg = _resolve_overrides(parse_config(text), args)
    if args.dump_config:
        sys.stdout.write(serialize_config(cfg))
        return 0
    return _run_and_write(cfg, args)


def cmd_scenario(args) -> int:
    if args.id not in SCENARIO_IDS:
        raise ConfigError(
            f"unknown scenario {args.id!r}; choose from {', '.join(SCENARIO_IDS)}"
        )
    cfg = _resolve_overrides(scenario_config(args.id), args)
    if args.dump_config:
        sys.stdout.write(serialize_config(cfg))
        return 0
    return _run_and_write(cfg, args)


def _print_prediction(prefix: str, pred: EchoPrediction):
    print(f"{prefix}T_E1_us = {_fmt(pred.t_e1_us)}")
    if pred.t_e2_chain_us is None:
        print(f"{prefix}T_E2_chain_us = n/a")
        print(f"{prefix}T_E2_paper_us = n/a")
        print(f"{prefix}formulas_agree = n/a")
    else:
        print(f"{prefix}T_E2_chain_us = {_fmt(pred.t_e2_chain_us)}")
        print(f"{prefix}T_E2_paper_us = {_fmt(pred.t_e2_paper_us)}")
        print(f"{prefix}formulas_agree = {'yes' if pred.agree else 'no'}")


def cmd_predict(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    seq = cfg.sequence

    data = seq.data_pulses()
    if not data:
        raise ConfigError("no data pulse (role D or bit<k>) in the sequence")
    first = analysis.predict_echo_times_at(seq, data[0].t_center_us)
    print(f"T_lock_us = {_fmt(first.t_lock_us)}")
    if len(data) == 1:
        _print_prediction("", first)
    else:
        for d in data:
            pred = analysis.predict_echo_times_at(seq, d.t_center_us)
            prefix = f"{d.role}."
            print(f"{prefix}T_D_us = {_fmt(d.t_center_us)}")
            _print_prediction(prefix, pred)

    b1 = seq.require_role(ROLE_B1)
    b2 = seq.require_role(ROLE_B2)
    lock = locking_phase_shift(b1.area_pi, b2.area_pi)
    print(f"b_pair_shift_rad = {_fmt(lock.shift_rad)}")
    print(f"b_pair_is_2npi = {'yes' if lock.satisfies_2npi else 'no'}")
    print(f"b_pair_n = {lock.n if lock.n is not None else '-'}")
    return 0


_PULSE_SWEEP_FIELDS = ("t_start_us", "duration_us", "area_pi", "phase_rad")


def _apply_parameter(cfg: RunConfig, path: str, value: float) -> RunConfig:
    """Return a copy of cfg with one numeric key set to value.

    path is either a global config key (for example gamma31_khz) or
    pulse.<role>.<field> with field one of t_start_us, duration_us,
    area_pi, phase_rad.
    """

    if path.startswith("pulse."):
        try:
            _, role, fld = path.split(".")
        except ValueError:
            raise ConfigError(f"bad pulse parameter path {path!r}") from None
        if fld not in _PULSE_SWEEP_FIELDS:
            raise ConfigError(
                f"unknown pulse field {fld!r}; choose from {_PULSE_SWEEP_FIELDS}"
            )
        pulse = cfg.sequence.require_role(role)
        new_seq = cfg.sequence.with_replaced(pulse, replace(pulse, **{fld: value}))
        return replace(cfg, sequence=new_seq)

    if path == "horizon_us":
        from .sequence import make_sequence

        return replace(
            cfg, sequence=make_sequence(cfg.sequence.pulses, horizon_us=value)
        )
    if path == "threshold_fraction":
        return replace(cfg, threshold_fraction=value)
    if path in ("Gamma31_khz", "Gamma32_khz", "gamma31_khz", "gamma32_khz", "gamma21_khz"):
        return replace(cfg, rates=replace(cfg.rates, **{path: value}))
    if path in ("fwhm_khz", "span_khz"):
        return replace(cfg, ensemble_spec=replace(cfg.ensemble_spec, **{path: value}))
    if path == "n_groups":
        if value != int(value):
            raise ConfigError(f"n_groups must be an integer, got {value}")
        return replace(
            cfg, ensemble_spec=replace(cfg.ensemble_spec, n_groups=int(value))
        )
    if path in ("dt_pulse_ns", "dt_free_ns"):
        return cfg.replace_params(**{path: value})
    if path == "sample_stride":
        if value != int(value):
            raise ConfigError(f"sample_stride must be an integer, got {value}")
        return cfg.replace_params(sample_stride=int(value))
    raise ConfigError(f"unknown sweep parameter {path!r}")


def cmd_sweep(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    base = _resolve_overrides(parse_config(text), args)
    if not args.values:
        raise ConfigError("empty sweep value list")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for value in args.values:
        cfg = _apply_parameter(base, args.parameter, value)
        _, signal, events = _simulate(cfg)
        pred = analysis.predict_echo_times(cfg.sequence)

        def nearest(t_pred: Optional[float]) -> Optional[EchoEvent]:
            if t_pred is None:
                return None
            best = None
            for e in events:
                if abs(e.t_us - t_pred) <= MATCH_TOL_US * 1.5:
                    if best is None or abs(e.t_us - t_pred) < abs(best.t_us - t_pred):
                        best = e
            return best

        e1 = nearest(pred.t_e1_us)
        e2 = nearest(pred.t_e2_chain_us)
        rows.append(
            {
                "value": value,
                "T_E1": e1.t_us if e1 else None,
                "T_E2": e2.t_us if e2 else None,
                "amp_E1": e1.im_sign * e1.amplitude if e1 else None,
                "amp_E2": e2.im_sign * e2.amplitude if e2 else None,
                "inverted_E1": e1.inverted if e1 else None,
                "inverted_E2": e2.inverted if e2 else None,
            }
        )
        print(
            f"{args.parameter} = {value:g}: "
            + (f"E1 at {e1.t_us:.3f} us" if e1 else "E1 not detected")
            + (f", E2 at {e2.t_us:.3f} us" if e2 else ", E2 not detected")
        )

    write_sweep_csv(out_dir / "sweep.csv", rows)
    written = ["sweep.csv"]
    if not args.no_figures:
        viz.render_sweep_figure(out_dir / "sweep.png", rows)
        written.append("sweep.png")
    print(f"wrote {' '.join(written)} in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echolock",
        description=(
            "Photon-echo simulator for a three-level lambda system with "
            "double rephasing and optical locking.  Times in the bundled "
            "scenarios refer to pulse centres: data at 10 us (bits at 6/9/15 "
            "us), R1 at 20 us, locking pair B1/B2 at 22 and 62 us, R2 at "
            "90 us."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_outputs=True):
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--dt-pulse-ns", type=float, default=None)
        p.add_argument("--dt-free-ns", type=float, default=None)
        p.add_argument(
            "--threshold",
            type=float,
            default=None,
            help="relative echo-detection threshold in (0, 1)",
        )
        if with_outputs:
            p.add_argument(
                "--cohmap",
                action="append",
                choices=sorted(analysis.MAP_COMPONENTS),
                help="also write a (time x detuning) coherence map",
            )
            p.add_argument(
                "--uv",
                action="append",
                type=float,
                metavar="DELTA_KHZ",
                help="also write the uv orbit of the group nearest this detuning",
            )
            p.add_argument(
                "--dump-config",
                action="store_true",
                help="print the resolved config and exit without simulating",
            )
            p.add_argument(
                "--no-figures", action="store_true", help="skip PNG rendering"
            )

    p_run = sub.add_parser("run", help="simulate a config file")
    p_run.add_argument("config")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_scen = sub.add_parser("scenario", help="simulate a bundled scenario")
    p_scen.add_argument("id", metavar="ID", help=", ".join(SCENARIO_IDS))
    add_common(p_scen)
    p_scen.set_defaults(func=cmd_scenario)

    p_pred = sub.add_parser(
        "predict", help="print analytic echo times and the locking report"
    )
    p_pred.add_argument("config")
    p_pred.set_defaults(func=cmd_predict)

    p_sweep = sub.add_parser("sweep", help="rerun over a list of parameter values")
    p_sweep.add_argument("config")
    p_sweep.add_argument(
        "parameter",
        help="numeric config key, e.g. gamma31_khz or pulse.B2.area_pi",
    )
    p_sweep.add_argument("values", nargs="+", type=float)
    add_common(p_sweep, with_outputs=False)
    p_sweep.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalStabilityError as exc:
        print(f"numerical-stability error: {exc}", file=sys.stderr)
        return 3
    except (ShapeError, DetectionError, EchoLockError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
