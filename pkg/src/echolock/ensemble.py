"""Inhomogeneously broadened ensemble: detuning grid and signal reduction.

The optical line is discretized into atom groups on a uniform detuning grid
with Gaussian weights.  Per-group density-matrix trajectories are reduced to
macroscopic observables by weighted summation; the ensemble-summed coherence
rho13 serves as the emission proxy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import ConfigError, ShapeError

if TYPE_CHECKING:
    from .dynamics import Trajectory


@dataclass(frozen=True)
class AtomGroup:
    """One spectral component of the broadened line.

    delta_khz is the detuning of the upper level from the optical carrier
    (ordinary frequency, kHz); weight is the normalized Gaussian weight.
    """

    delta_khz: float
    weight: float


@dataclass(frozen=True)
class EnsembleSpec:
    """Gaussian line parameters and grid resolution.

    n_groups must be odd so delta = 0 is a grid point.
    """

    fwhm_khz: float = 340.0
    span_khz: float = 800.0
    n_groups: int = 161

    def __post_init__(self):
        if self.n_groups < 3 or self.n_groups % 2 == 0:
            raise ConfigError(
                f"n_groups must be odd and >= 3, got {self.n_groups}"
            )
        if self.span_khz <= 0:
            raise ConfigError(f"span_khz must be positive, got {self.span_khz}")
        if self.fwhm_khz <= 0:
            raise ConfigError(f"fwhm_khz must be positive, got {self.fwhm_khz}")


def build_ensemble(spec: EnsembleSpec) -> list[AtomGroup]:
    """Uniform detuning grid on [-span/2, +span/2] with Gaussian weights.

    Weights follow exp(-4 ln2 delta^2 / FWHM^2), renormalized to sum to 1
    after truncation at the grid edges.
    """

    deltas = np.linspace(-spec.span_khz / 2.0, spec.span_khz / 2.0, spec.n_groups)
    weights = np.exp(-4.0 * np.log(2.0) * (deltas / spec.fwhm_khz) ** 2)
    weights /= weights.sum()
    return [AtomGroup(float(d), float(w)) for d, w in zip(deltas, weights)]


def group_deltas(groups: Sequence[AtomGroup]) -> np.ndarray:
    return np.array([g.delta_khz for g in groups], dtype=float)


def group_weights(groups: Sequence[AtomGroup]) -> np.ndarray:
    return np.array([g.weight for g in groups], dtype=float)


@dataclass
class EnsembleSignal:
    """Weighted macroscopic observables sampled on a shared time grid.

    polarization holds the complex ensemble coherence P(t) = sum_k w_k
    rho13_k(t); rho11/rho22/rho33 are the weighted population averages.
    """

    times_us: np.ndarray
    polarization: np.ndarray
    rho11: np.ndarray
    rho22: np.ndarray
    rho33: np.ndarray

    @property
    def inversion_w(self) -> np.ndarray:
        """Population inversion on the echo transition, <rho33> - <rho11>."""
        return self.rho33 - self.rho11


def reduce_signal(
    trajectories: Sequence["Trajectory"], groups: Sequence[AtomGroup]
) -> EnsembleSignal:
    """Weighted reduction of per-group trajectories into an EnsembleSignal.

    All trajectories must share one sample grid.  Summation runs in fixed
    ascending-delta order so the result is bit-reproducible regardless of
    how the per-group integrations were scheduled.
    """

    if len(trajectories) != len(groups):
        raise ShapeError(
            f"{len(trajectories)} trajectories for {len(groups)} groups"
        )
    order = np.argsort(group_deltas(groups), kind="stable")
    trajs = [trajectories[i] for i in order]
    ordered_groups = [groups[i] for i in order]

    times = trajs[0].times_us
    for t in trajs[1:]:
        if not np.array_equal(t.times_us, times):
            raise ShapeError("trajectories do not share a common sample grid")

    w = group_weights(ordered_groups)
    rho13 = np.stack([t.rho13 for t in trajs], axis=0)
    p11 = np.stack([t.rho11 for t in trajs], axis=0)
    p22 = np.stack([t.rho22 for t in trajs], axis=0)
    p33 = np.stack([t.rho33 for t in trajs], axis=0)

    return EnsembleSignal(
        times_us=times.copy(),
        polarization=np.add.reduce(w[:, None] * rho13, axis=0),
        rho11=np.add.reduce(w[:, None] * p11, axis=0),
        rho22=np.add.reduce(w[:, None] * p22, axis=0),
        rho33=np.add.reduce(w[:, None] * p33, axis=0),
    )
