import csv
import dataclasses

import numpy as np
import pytest

from lcc.errors import AxesMismatch
from lcc.region_scanner import (
    CELL_MARGINAL,
    PLANT_UNSTABLE,
    STRING_STABLE,
    STRING_UNSTABLE,
    GainAxis,
    ScanSpec,
    classify_cell,
    region_delta,
    scan,
)
from lcc.string_stability import OmegaGrid
from lcc.system_builder import FeedbackGains, LccTopology

TOPO = LccTopology(2, 2)
COARSE = (-10.0, 10.0, 21)


def spec_for(gains, vehicle, fixed=None, rng=COARSE, grid=None):
    return ScanSpec(
        topology=TOPO,
        gains=gains,
        x_gain=GainAxis(vehicle, "mu"),
        y_gain=GainAxis(vehicle, "k"),
        x_range=rng,
        y_range=rng,
        fixed_gains=fixed or FeedbackGains(),
        omega_grid=grid or OmegaGrid(),
    )


@pytest.fixture(scope="module")
def base_charts():
    from lcc.car_following import REFERENCE_DRIVER, equilibrium_from_spacing, linearize

    g = linearize(REFERENCE_DRIVER, equilibrium_from_spacing(REFERENCE_DRIVER, 20.0))
    return g, {v: scan(spec_for(g, v), threads=1) for v in (-1, 1)}


def test_counts_sum_and_origin(base_charts):
    _, charts = base_charts
    for chart in charts.values():
        assert sum(chart.counts.values()) == 21 * 21
        # gain origin reduces to the HDV-only chain
        assert chart.labels[10, 10] == STRING_UNSTABLE


def test_behind_region_nonempty(base_charts):
    _, charts = base_charts
    assert charts[1].counts["string_stable"] > 0


def test_deterministic(base_charts):
    g, charts = base_charts
    again = scan(spec_for(g, -1), threads=1)
    assert np.array_equal(again.labels, charts[-1].labels)
    assert again.notes == charts[-1].notes


def test_parallel_equals_serial(base_charts):
    g, charts = base_charts
    par = scan(spec_for(g, 1), threads=2)
    assert np.array_equal(par.labels, charts[1].labels)
    assert par.notes == charts[1].notes


def test_denser_grid_never_creates_stability(base_charts):
    g, charts = base_charts
    dense = scan(spec_for(g, -1, rng=COARSE, grid=OmegaGrid(points=2000)), threads=1)
    coarse = charts[-1].labels
    flipped = (coarse == STRING_UNSTABLE) & (dense.labels == STRING_STABLE)
    assert not flipped.any()


def test_fixed_behind_gain_expands_region(base_charts):
    g, charts = base_charts
    fixed = FeedbackGains({1: -1.0}, {1: -1.0})
    new = scan(spec_for(g, -1, fixed=fixed), threads=1)
    delta = region_delta(charts[-1], new)
    assert new.counts["string_stable"] > charts[-1].counts["string_stable"]
    assert delta.newly_stable_count > 0
    assert delta.newly_unstable_count == 0


def test_self_delta_empty(base_charts):
    _, charts = base_charts
    d = region_delta(charts[1], charts[1])
    assert d.newly_stable_count == 0 and d.newly_unstable_count == 0


def test_axes_mismatch(base_charts):
    _, charts = base_charts
    with pytest.raises(AxesMismatch):
        region_delta(charts[-1], charts[1])


def test_plant_unstable_dominates(gains):
    # A large positive velocity gain on the CAV's own follower destabilizes the loop.
    fb = FeedbackGains({}, {1: 10.0})
    assert classify_cell(TOPO, gains, fb, OmegaGrid()) == PLANT_UNSTABLE


def test_case_a_cell_is_stable(gains, cases):
    assert classify_cell(TOPO, gains, cases["A"], OmegaGrid()) == STRING_STABLE


def test_cell_errors_become_marginal(gains, monkeypatch):
    from lcc import region_scanner
    from lcc.errors import PoleOnImaginaryAxis

    def boom(*a, **k):
        raise PoleOnImaginaryAxis("pole")

    monkeypatch.setattr(region_scanner, "classify_cell", boom)
    chart = scan(spec_for(gains, 1, rng=(-1, 1, 2)), threads=1)
    assert (chart.labels == CELL_MARGINAL).all()
    assert len(chart.notes) == 4


def test_write_csv(tmp_path, base_charts):
    _, charts = base_charts
    path = tmp_path / "chart.csv"
    charts[1].write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["mu[1]", "k[1]", "class"]
    assert len(rows) == 1 + 21 * 21
    assert rows[1] == ["-10", "-10", rows[1][2]]


def test_spec_validation(gains):
    with pytest.raises(ValueError):
        spec_for(gains, 1, rng=(-1, 1, 1))
    with pytest.raises(ValueError):
        spec_for(gains, 1, rng=(-np.inf, 1, 5))
    with pytest.raises(ValueError):
        spec_for(gains, 3)
    good = spec_for(gains, 1)
    with pytest.raises(ValueError):
        dataclasses.replace(good, y_gain=good.x_gain)
    with pytest.raises(ValueError):
        GainAxis(1, "nu")
