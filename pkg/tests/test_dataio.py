"""Dataset loading and synthetic generation."""

import math

import numpy as np
import pytest

from privdist.core import LinearAlphabet, PlanarAlphabet
from privdist.dataio import (
    Binomial,
    Explicit,
    UniformOn,
    bbox_extent_km,
    empirical_distribution,
    grid_for_bbox,
    load_ages,
    load_checkins,
    project_latlon,
    sample_synthetic,
)
from privdist.core import Distribution
from privdist.errors import (
    BBoxGridMismatchError,
    EmptyDatasetError,
    InvalidSpecError,
    TooManyMalformedRowsError,
)

MANHATTAN_BBOX = (40.7044, 40.7942, -74.0205, -73.9374)


def write(path, text):
    path.write_text(text)
    return str(path)


class TestLoadAges:
    def test_plain_rows(self, tmp_path):
        path = write(tmp_path / "ages.csv", "age\n25\n38\n25\n")
        ds = load_ages(path)
        assert ds.values == (25, 38, 25)
        assert ds.kind == "ages" and ds.n_malformed == 0

    def test_malformed_row_skipped_and_counted(self, tmp_path):
        rows = "\n".join(["age"] + ["30"] * 200 + ["abc"])
        ds = load_ages(write(tmp_path / "ages.csv", rows + "\n"))
        assert ds.n == 200 and ds.n_malformed == 1

    def test_malformed_threshold(self, tmp_path):
        path = write(tmp_path / "ages.csv", "age\n25\nabc\nxyz\n40\n")
        with pytest.raises(TooManyMalformedRowsError):
            load_ages(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyDatasetError):
            load_ages(write(tmp_path / "ages.csv", ""))

    def test_out_of_range_dropped(self, tmp_path):
        path = write(tmp_path / "ages.csv", "age\n25\n150\n70\n")
        ds = load_ages(path, lo=0, hi=99)
        assert ds.values == (25, 70) and ds.n_out_of_range == 1

    def test_column_by_index(self, tmp_path):
        path = write(tmp_path / "t.csv", "id,age\n1,33\n2,44\n")
        ds = load_ages(path, age_column=1)
        assert ds.values == (33, 44)

    def test_deterministic(self, tmp_path):
        path = write(tmp_path / "ages.csv", "age\n25\n38\n25\n")
        assert load_ages(path).values == load_ages(path).values


class TestCheckins:
    def test_manhattan_grid_shape(self):
        grid = grid_for_bbox(MANHATTAN_BBOX, 0.5)
        assert (grid.ny, grid.nx) == (20, 14)
        assert grid.size == 280
        width, height = bbox_extent_km(MANHATTAN_BBOX)
        assert width == pytest.approx(7.0, abs=0.05)
        assert height == pytest.approx(10.0, abs=0.05)

    def test_cell_center_is_fixed_point(self, tmp_path):
        grid = grid_for_bbox(MANHATTAN_BBOX, 0.5)
        # invert the projection for an exact grid center, then reload
        target = grid.values[37]
        lat_min, lat_max, lon_min, lon_max = MANHATTAN_BBOX
        lat0 = math.radians((lat_min + lat_max) / 2.0)
        lat = lat_min + math.degrees(target[1] / 6371.0088)
        lon = lon_min + math.degrees(target[0] / (6371.0088 * math.cos(lat0)))
        path = write(tmp_path / "c.csv", f"lat,lon\n{lat:.10f},{lon:.10f}\n")
        ds = load_checkins(path, MANHATTAN_BBOX, grid)
        assert ds.values == (target,)

    def test_outside_bbox_dropped(self, tmp_path):
        grid = grid_for_bbox(MANHATTAN_BBOX, 0.5)
        path = write(tmp_path / "c.csv", "lat,lon\n41.5,-73.99\n40.75,-73.99\n")
        ds = load_checkins(path, MANHATTAN_BBOX, grid)
        assert ds.n == 1 and ds.n_out_of_range == 1

    def test_grid_mismatch(self, tmp_path):
        small = PlanarAlphabet.grid(3, 3, 0.5)
        path = write(tmp_path / "c.csv", "lat,lon\n40.75,-73.99\n")
        with pytest.raises(BBoxGridMismatchError):
            load_checkins(path, MANHATTAN_BBOX, small)

    def test_discretization_idempotent(self):
        grid = grid_for_bbox(MANHATTAN_BBOX, 0.5)
        # mapping any point to its cell center and discretizing again must
        # return the same center
        w = grid.cell_width_km
        ox, oy = grid.origin
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.uniform(0, grid.nx * w)
            y = rng.uniform(0, grid.ny * w)
            ix = min(max(int((x - ox + w / 2) // w), 0), grid.nx - 1)
            iy = min(max(int((y - oy + w / 2) // w), 0), grid.ny - 1)
            cx, cy = grid.values[iy * grid.nx + ix]
            ix2 = min(max(int((cx - ox + w / 2) // w), 0), grid.nx - 1)
            iy2 = min(max(int((cy - oy + w / 2) // w), 0), grid.ny - 1)
            assert (ix2, iy2) == (ix, iy)


class TestSynthetic:
    def test_point_mass_constant(self):
        alpha = LinearAlphabet.range(0, 3)
        dist = Distribution(alpha, [0.0, 0.0, 1.0, 0.0])
        ds = sample_synthetic(Explicit(dist), 50, np.random.default_rng(0))
        assert set(ds.values) == {2}

    def test_uniform_frequencies(self):
        ds = sample_synthetic(UniformOn((3, 4, 5, 6)), 100_000, np.random.default_rng(2))
        freqs = np.array([ds.values.count(v) / ds.n for v in (3, 4, 5, 6)])
        assert np.all(np.abs(freqs - 0.25) < 0.006)  # 4 sigma of Bin(1e5, .25)

    def test_binomial_mean(self):
        ds = sample_synthetic(Binomial(10, 0.5), 100_000, np.random.default_rng(3))
        # mean of 9 fair trials is 4.5; 4 sigma of the sample mean is ~0.019
        assert abs(np.mean(ds.values) - 4.5) < 0.02
        assert min(ds.values) >= 0 and max(ds.values) <= 9

    def test_invalid_specs(self):
        rng = np.random.default_rng(0)
        with pytest.raises(InvalidSpecError):
            sample_synthetic(Binomial(1, 0.5), 10, rng)
        with pytest.raises(InvalidSpecError):
            sample_synthetic(UniformOn(()), 10, rng)
        with pytest.raises(InvalidSpecError):
            sample_synthetic("bogus", 10, rng)
        with pytest.raises(InvalidSpecError):
            sample_synthetic(Binomial(10, 0.5), 0, rng)


def test_empirical_distribution():
    alpha = LinearAlphabet.range(0, 2)
    d = empirical_distribution(alpha, [0, 1, 1, 2])
    np.testing.assert_allclose(d.probs, [0.25, 0.5, 0.25])
