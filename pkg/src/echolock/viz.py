"""Figure rendering for run reports.

Every CSV the CLI emits has a PNG sibling so a run can be eyeballed
without loading the data anywhere.  Rendering is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .analysis import EchoEvent, UvPoint
from .ensemble import EnsembleSignal
from .sequence import PulseSequence


def _shade_pulses(ax, seq: PulseSequence):
    for p in seq.pulses:
        ax.axvspan(p.t_start_us, p.t_end_us, color="0.82", zorder=0)
        ax.annotate(
            p.role or p.channel,
            xy=(p.t_center_us, 1.0),
            xycoords=("data", "axes fraction"),
            ha="center",
            va="bottom",
            fontsize=7,
            color="0.35",
        )


def render_signal_figure(
    path: Path,
    signal: EnsembleSignal,
    seq: PulseSequence,
    events: Sequence[EchoEvent] = (),
) -> Path:
    """|P| and Im P over time plus populations and inversion."""

    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(9.5, 6.0), sharex=True, height_ratios=[3, 2]
    )
    t = signal.times_us
    ax1.plot(t, np.abs(signal.polarization), color="tab:blue", lw=0.9, label="|P|")
    ax1.plot(
        t, signal.polarization.imag, color="tab:orange", lw=0.7, alpha=0.8,
        label="Im P",
    )
    for e in events:
        marker = "v" if e.im_sign < 0 else "^"
        ax1.plot([e.t_us], [e.amplitude], marker, color="tab:red", ms=6)
        ax1.annotate(
            f"{e.t_us:.1f}",
            xy=(e.t_us, e.amplitude),
            xytext=(0, 8),
            textcoords="offset points",
            ha="center",
            fontsize=7,
        )
    _shade_pulses(ax1, seq)
    ax1.set_ylabel("ensemble coherence")
    ax1.legend(loc="upper right", fontsize=8)

    ax2.plot(t, signal.rho11, label=r"$\rho_{11}$", lw=0.9)
    ax2.plot(t, signal.rho22, label=r"$\rho_{22}$", lw=0.9)
    ax2.plot(t, signal.rho33, label=r"$\rho_{33}$", lw=0.9)
    ax2.plot(t, signal.inversion_w, "k--", lw=0.8, label="inversion w")
    ax2.axhline(0.0, color="0.6", lw=0.5)
    ax2.set_xlabel("time (us)")
    ax2.set_ylabel("population")
    ax2.legend(loc="upper right", fontsize=8, ncol=2)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_cohmap_figure(
    path: Path,
    deltas_khz: np.ndarray,
    times_us: np.ndarray,
    values: np.ndarray,
    component: str,
) -> Path:
    """Coherence component over (time, detuning)."""

    fig, ax = plt.subplots(figsize=(9.5, 4.2))
    vmax = float(np.abs(values).max()) or 1.0
    mesh = ax.pcolormesh(
        times_us,
        deltas_khz,
        values,
        cmap="RdBu_r",
        vmin=-vmax,
        vmax=vmax,
        shading="nearest",
        rasterized=True,
    )
    fig.colorbar(mesh, ax=ax, label=component)
    ax.set_xlabel("time (us)")
    ax.set_ylabel("detuning (kHz)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_uv_figure(
    path: Path, points: Sequence[UvPoint], delta_khz: float
) -> Path:
    """Coherence orbit in the uv plane for one detuning group."""

    u = np.array([p.u for p in points])
    v = np.array([p.v for p in points])
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    ax.plot(u, v, lw=0.8, color="tab:blue")
    ax.plot([u[0]], [v[0]], "o", color="tab:green", ms=5, label="start")
    ax.plot([u[-1]], [v[-1]], "s", color="tab:red", ms=5, label="end")
    ax.axhline(0.0, color="0.7", lw=0.5)
    ax.axvline(0.0, color="0.7", lw=0.5)
    ax.set_xlabel(r"u = Re $\rho_{13}$")
    ax.set_ylabel(r"v = Im $\rho_{13}$")
    ax.set_title(f"delta = {delta_khz:g} kHz")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_sweep_figure(path: Path, rows: Sequence[dict]) -> Path:
    """Echo amplitudes against the swept parameter value."""

    values = [r["value"] for r in rows]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for key, style in (("amp_E1", "o-"), ("amp_E2", "s--")):
        ys = [r[key] for r in rows]
        ax.plot(values, [y if y is not None else np.nan for y in ys], style, label=key)
    ax.axhline(0.0, color="0.7", lw=0.5)
    ax.set_xlabel("swept value")
    ax.set_ylabel("signed echo amplitude")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
