"""Two-gain sweeps classifying each cell as string stable / unstable / plant unstable."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .car_following import LinearGains
from .errors import LccError
from .string_stability import (
    MARGINAL,
    STABLE,
    UNSTABLE,
    OmegaGrid,
    classify_peak,
    magnitude_peak,
    plant_stability,
)
from .system_builder import FeedbackGains, LccTopology, build

STRING_STABLE = 0
STRING_UNSTABLE = 1
PLANT_UNSTABLE = 2
CELL_MARGINAL = 3
CLASS_NAMES = {
    STRING_STABLE: "string_stable",
    STRING_UNSTABLE: "string_unstable",
    PLANT_UNSTABLE: "plant_unstable",
    CELL_MARGINAL: "marginal",
}


@dataclass(frozen=True)
class GainAxis:
    vehicle: int
    kind: str  # "mu" or "k"

    def __post_init__(self):
        if self.kind not in ("mu", "k"):
            raise ValueError(f"gain kind must be 'mu' or 'k', got {self.kind!r}")

    @property
    def label(self) -> str:
        return f"{self.kind}[{self.vehicle}]"


@dataclass(frozen=True)
class ScanSpec:
    topology: LccTopology
    gains: LinearGains
    x_gain: GainAxis
    y_gain: GainAxis
    x_range: tuple[float, float, int] = (-10.0, 10.0, 201)
    y_range: tuple[float, float, int] = (-10.0, 10.0, 201)
    fixed_gains: FeedbackGains = field(default_factory=FeedbackGains)
    omega_grid: OmegaGrid = field(default_factory=OmegaGrid)

    def __post_init__(self):
        for lo, hi, steps in (self.x_range, self.y_range):
            if int(steps) < 2 or not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("scan ranges need finite bounds and at least 2 steps")
        if self.x_gain == self.y_gain:
            raise ValueError("x_gain and y_gain must differ")
        allowed = set(self.topology.followers) | set(self.topology.preceding)
        for ax in (self.x_gain, self.y_gain):
            if ax.vehicle not in allowed:
                raise ValueError(f"{ax.label} is not a vehicle in F u P of the topology")

    def x_values(self) -> np.ndarray:
        lo, hi, steps = self.x_range
        return np.linspace(lo, hi, int(steps))

    def y_values(self) -> np.ndarray:
        lo, hi, steps = self.y_range
        return np.linspace(lo, hi, int(steps))


@dataclass
class StabilityChart:
    x_gain: GainAxis
    y_gain: GainAxis
    x_values: np.ndarray
    y_values: np.ndarray
    labels: np.ndarray  # shape (len(y), len(x))
    notes: dict = field(default_factory=dict)

    @property
    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.labels == code)) for code, name in CLASS_NAMES.items()}

    def same_axes(self, other: "StabilityChart") -> bool:
        return (
            self.x_gain == other.x_gain
            and self.y_gain == other.y_gain
            and np.array_equal(self.x_values, other.x_values)
            and np.array_equal(self.y_values, other.y_values)
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.x_gain.label, self.y_gain.label, "class"])
            for iy, y in enumerate(self.y_values):
                for ix, x in enumerate(self.x_values):
                    w.writerow([f"{x:.10g}", f"{y:.10g}", CLASS_NAMES[int(self.labels[iy, ix])]])


def classify_cell(topology, gains, fb, grid, sys=None):
    """Label code for one gain vector.  Plant instability wins over string verdicts."""
    sys = sys if sys is not None else build(topology, gains)
    plant, _ = plant_stability(sys, fb)
    if plant == UNSTABLE:
        return PLANT_UNSTABLE
    if plant == MARGINAL:
        return CELL_MARGINAL
    peak, _, at_edge = magnitude_peak(topology, gains, fb, grid)
    return {
        STABLE: STRING_STABLE,
        UNSTABLE: STRING_UNSTABLE,
        MARGINAL: CELL_MARGINAL,
    }[classify_peak(peak, at_edge, grid.margin)]


def _scan_rows(spec: ScanSpec, rows):
    sys = build(spec.topology, spec.gains)
    xs = spec.x_values()
    ys = spec.y_values()
    out = np.empty((len(rows), len(xs)), dtype=np.int8)
    notes = {}
    for r, iy in enumerate(rows):
        base = spec.fixed_gains.with_gain(spec.y_gain.vehicle, spec.y_gain.kind, float(ys[iy]))
        for ix, x in enumerate(xs):
            fb = base.with_gain(spec.x_gain.vehicle, spec.x_gain.kind, float(x))
            try:
                out[r, ix] = classify_cell(spec.topology, spec.gains, fb, spec.omega_grid, sys)
            except (LccError, np.linalg.LinAlgError) as exc:
                out[r, ix] = CELL_MARGINAL
                notes[(int(iy), ix)] = f"{type(exc).__name__}: {exc}"
    return out, notes


def scan(spec: ScanSpec, threads: int | None = None) -> StabilityChart:
    """Evaluate every cell of the sweep.  Output does not depend on ``threads``."""
    xs, ys = spec.x_values(), spec.y_values()
    threads = threads or os.cpu_count() or 1
    labels = np.empty((len(ys), len(xs)), dtype=np.int8)
    notes = {}
    row_ids = list(range(len(ys)))
    if threads <= 1:
        labels[:, :], notes = _scan_rows(spec, row_ids)
    else:
        chunks = [row_ids[i::threads] for i in range(threads)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            for rows, (block, part) in zip(chunks, pool.map(_scan_rows, [spec] * len(chunks), chunks)):
                labels[rows, :] = block
                notes.update(part)
    return StabilityChart(spec.x_gain, spec.y_gain, xs, ys, labels, dict(sorted(notes.items())))


@dataclass
class RegionDelta:
    newly_stable: np.ndarray  # boolean mask, same shape as the charts
    newly_unstable: np.ndarray

    @property
    def newly_stable_count(self) -> int:
        return int(self.newly_stable.sum())

    @property
    def newly_unstable_count(self) -> int:
        return int(self.newly_unstable.sum())

    def to_dict(self) -> dict:
        return {
            "newly_stable_count": self.newly_stable_count,
            "newly_unstable_count": self.newly_unstable_count,
        }


def region_delta(chart_a: StabilityChart, chart_b: StabilityChart) -> RegionDelta:
    """Cells that became string stable (or stopped being so) going from a to b.

    Cells entering or leaving the marginal class are not counted either way.
    """
    from .errors import AxesMismatch

    if not chart_a.same_axes(chart_b):
        raise AxesMismatch("charts were scanned over different gain axes")
    a_stable = chart_a.labels == STRING_STABLE
    b_stable = chart_b.labels == STRING_STABLE
    a_marg = chart_a.labels == CELL_MARGINAL
    b_marg = chart_b.labels == CELL_MARGINAL
    return RegionDelta(
        newly_stable=b_stable & ~a_stable & ~a_marg,
        newly_unstable=a_stable & ~b_stable & ~b_marg,
    )
