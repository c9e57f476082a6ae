import numpy as np
import pytest

from plasmaviz.fields import (DomainExit, FrameSeries, GridDims, ScalarField,
                              VectorField, field_minmax, linear_index, sample_vector)

from helpers import make_scalar


def random_vector_field(rng, n=4, **kw):
    dims = GridDims(n, n, n, **kw)
    cnt = dims.node_count
    return VectorField(dims, rng.normal(size=cnt), rng.normal(size=cnt),
                       rng.normal(size=cnt))


def trilinear_oracle(field, p):
    """Independent 8-term weighted-corner formula."""
    d = field.dims
    lo, _ = d.bounds()
    gx = (p[0] - lo[0]) / d.dx
    gy = (p[1] - lo[1]) / d.dy
    gz = (p[2] - lo[2]) / d.dz
    i, j, k = (min(int(g), nn - 2) for g, nn in ((gx, d.nx), (gy, d.ny), (gz, d.nz)))
    fx, fy, fz = gx - i, gy - j, gz - k
    out = np.zeros(3)
    for dz in (0, 1):
        for dy in (0, 1):
            for dx in (0, 1):
                w = ((fx if dx else 1 - fx)
                     * (fy if dy else 1 - fy)
                     * (fz if dz else 1 - fz))
                out += w * field.at(i + dx, j + dy, k + dz)
    return out


class TestGridDims:
    def test_rejects_tiny_grids(self):
        with pytest.raises(ValueError):
            GridDims(1, 4, 4)

    def test_rejects_nonpositive_spacing(self):
        with pytest.raises(ValueError):
            GridDims(4, 4, 4, dx=0.0)

    def test_bounds_and_positions(self):
        d = GridDims(3, 4, 5, 0.5, 1.0, 2.0, (1.0, 2.0, 3.0))
        lo, hi = d.bounds()
        assert lo.tolist() == [1.0, 2.0, 3.0]
        assert hi.tolist() == [2.0, 5.0, 11.0]
        assert d.node_position(2, 3, 4).tolist() == [2.0, 5.0, 11.0]


class TestLinearIndex:
    def test_origin_is_zero(self):
        assert linear_index(GridDims(2, 2, 2), 0, 0, 0) == 0

    def test_last_node_of_2x2x2(self):
        assert linear_index(GridDims(2, 2, 2), 1, 1, 1) == 7

    def test_matches_nested_loop_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            nx, ny, nz = rng.integers(2, 6, 3)
            d = GridDims(int(nx), int(ny), int(nz))
            expected = 0
            for k in range(d.nz):
                for j in range(d.ny):
                    for i in range(d.nx):
                        assert linear_index(d, i, j, k) == expected
                        expected += 1
            assert expected == d.node_count  # bijection onto 0..n-1

    def test_out_of_range_raises(self):
        d = GridDims(2, 3, 4)
        with pytest.raises(IndexError):
            linear_index(d, 2, 0, 0)
        with pytest.raises(IndexError):
            linear_index(d, 0, -1, 0)


class TestFieldInvariants:
    def test_scalar_length_mismatch(self):
        with pytest.raises(ValueError):
            ScalarField(GridDims(2, 2, 2), np.zeros(7))

    def test_scalar_rejects_nan(self):
        vals = np.zeros(8)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            ScalarField(GridDims(2, 2, 2), vals)

    def test_vector_rejects_inf(self):
        ok = np.zeros(8)
        bad = np.zeros(8)
        bad[0] = np.inf
        with pytest.raises(ValueError):
            VectorField(GridDims(2, 2, 2), ok, bad, ok)

    def test_float32_values_are_preserved(self):
        vals = np.arange(8, dtype=np.float32)
        f = ScalarField(GridDims(2, 2, 2), vals)
        assert f.values.dtype == np.float32


class TestSampleVector:
    def test_exact_at_every_node(self):
        rng = np.random.default_rng(0)
        f = random_vector_field(rng, n=3, dx=0.7, dy=1.3, dz=0.9, origin=(-1, 2, 0.5))
        for k in range(3):
            for j in range(3):
                for i in range(3):
                    p = f.dims.node_position(i, j, k)
                    assert np.allclose(sample_vector(f, p), f.at(i, j, k), atol=1e-12)

    def test_edge_midpoint_is_average(self):
        rng = np.random.default_rng(1)
        f = random_vector_field(rng, n=3)
        p = (0.5, 1.0, 2.0)  # midpoint of the x-edge (0,1,2)-(1,1,2)
        expected = 0.5 * (f.at(0, 1, 2) + f.at(1, 1, 2))
        assert np.allclose(sample_vector(f, p), expected, atol=1e-12)

    def test_matches_eight_term_oracle(self):
        rng = np.random.default_rng(2)
        f = random_vector_field(rng, n=4, dx=0.3, dy=0.8, dz=1.7, origin=(5, -2, 1))
        lo, hi = f.dims.bounds()
        for _ in range(200):
            p = rng.uniform(lo, hi)
            assert np.allclose(sample_vector(f, p), trilinear_oracle(f, p), atol=1e-12)

    def test_outside_domain_signals_exit(self):
        rng = np.random.default_rng(3)
        f = random_vector_field(rng, n=3)
        with pytest.raises(DomainExit):
            sample_vector(f, (-0.001, 1.0, 1.0))
        with pytest.raises(DomainExit):
            sample_vector(f, (1.0, 1.0, 2.001))


class TestFieldMinmax:
    def test_constant_field(self):
        f = make_scalar(np.full((2, 2, 2), 3.25))
        assert field_minmax(f) == (3.25, 3.25)

    def test_linear_ramp(self):
        vals = np.zeros((4, 4, 4))
        for i in range(4):
            vals[:, :, i] = i
        assert field_minmax(make_scalar(vals)) == (0.0, 3.0)

    def test_matches_full_scan(self):
        rng = np.random.default_rng(4)
        vals = rng.normal(size=(16, 16, 16))
        f = make_scalar(vals)
        lo, hi = field_minmax(f)
        scan_lo = scan_hi = vals[0, 0, 0]
        for v in vals.ravel():
            scan_lo = min(scan_lo, v)
            scan_hi = max(scan_hi, v)
        assert (lo, hi) == (scan_lo, scan_hi)
        assert all(lo <= v <= hi for v in vals.ravel()[::97])


class TestFrameSeries:
    def test_lazy_loads_once_per_frame(self):
        calls = []
        fs = FrameSeries(3, {"scalar": lambda k: calls.append(k) or k * 10}, policy="lazy")
        assert calls == []
        assert fs.get("scalar", 1) == 10
        assert fs.get("scalar", 1) == 10
        assert calls == [1]

    def test_eager_loads_everything_up_front(self):
        calls = []
        fs = FrameSeries(3, {"scalar": lambda k: calls.append(k) or k}, policy="eager")
        assert calls == [0, 1, 2]

    def test_frame_range_and_modality_checks(self):
        fs = FrameSeries(2, {"scalar": lambda k: k})
        with pytest.raises(IndexError):
            fs.get("scalar", 2)
        with pytest.raises(KeyError):
            fs.get("vector", 0)

    def test_rejects_bad_policy_and_count(self):
        with pytest.raises(ValueError):
            FrameSeries(0, {})
        with pytest.raises(ValueError):
            FrameSeries(1, {}, policy="sometimes")
