import subprocess
import sys

import numpy as np
import pytest

from plasmaviz.cli import main
from plasmaviz.decimate import decimate_qem
from plasmaviz.fields import field_minmax
from plasmaviz.io_formats import (pack_texture, read_manifest, read_obj,
                                  read_particle_frame, read_scalar_frame,
                                  unpack_texture, write_obj)
from plasmaviz.isosurface import flying_edges
from plasmaviz.particles import encode_texture, subsample
from plasmaviz.session import slice_png

from helpers import parse_obj_text, write_dataset


@pytest.fixture()
def dataset(tmp_path):
    return write_dataset(tmp_path / "ds")


class TestValidate:
    def test_summary_and_exit_code(self, dataset, capsys):
        assert main(["validate", str(dataset)]) == 0
        out = capsys.readouterr().out
        assert "frames: 3" in out
        assert "scalar" in out and "vector" in out and "particles" in out

    def test_truncated_dataset_exits_2_with_parsable_error(self, dataset, capsys):
        victim = dataset / "scalar_0000.f32"
        victim.write_bytes(victim.read_bytes()[:-8])
        assert main(["validate", str(dataset)]) == 2
        err = capsys.readouterr().err
        assert err.startswith("error: data_error:")
        assert "scalar frame 0" in err
        assert "\n" not in err.strip()

    def test_missing_dataset_exits_2(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "missing")]) == 2

    def test_unknown_command_exits_1(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_env_root_resolves_relative_paths(self, dataset, monkeypatch):
        monkeypatch.setenv("PLASMAVIZ_ROOT", str(dataset.parent))
        assert main(["validate", dataset.name]) == 0


class TestIso:
    def test_writes_one_obj_per_frame(self, dataset, tmp_path, capsys):
        out = tmp_path / "objs"
        assert main(["iso", str(dataset), "--isovalue", "0.5",
                     "--frames", "0..2", "--out", str(out)]) == 0
        names = sorted(p.name for p in out.glob("*.obj"))
        assert names == ["iso_0000.obj", "iso_0001.obj", "iso_0002.obj"]

    def test_output_matches_direct_module_call(self, dataset, tmp_path):
        out = tmp_path / "objs"
        main(["iso", str(dataset), "--isovalue", "0.5", "--ratio", "0.5",
              "--frames", "1", "--out", str(out)])
        m = read_manifest(dataset)
        mesh = decimate_qem(flying_edges(read_scalar_frame(m, 1), 0.5), 0.5)
        assert (out / "iso_0001.obj").read_bytes() == write_obj(mesh)

    def test_rerun_is_byte_identical(self, dataset, tmp_path):
        out = tmp_path / "objs"
        args = ["iso", str(dataset), "--isovalue", "0.5", "--frames", "0",
                "--out", str(out)]
        main(args)
        first = (out / "iso_0000.obj").read_bytes()
        main(args)
        assert (out / "iso_0000.obj").read_bytes() == first

    def test_parallel_jobs_match_serial(self, dataset, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["iso", str(dataset), "--isovalue", "0.5", "--out", str(a)])
        main(["iso", str(dataset), "--isovalue", "0.5", "--out", str(b),
              "--jobs", "3"])
        for k in range(3):
            assert (a / f"iso_{k:04d}.obj").read_bytes() == \
                (b / f"iso_{k:04d}.obj").read_bytes()

    def test_bad_frame_range_exits_1(self, dataset, tmp_path, capsys):
        assert main(["iso", str(dataset), "--isovalue", "0.5",
                     "--frames", "0..9", "--out", str(tmp_path)]) == 1
        assert "error: invalid_argument:" in capsys.readouterr().err


class TestSlice:
    def test_png_matches_module_bytes(self, dataset, tmp_path):
        out = tmp_path / "png"
        assert main(["slice", str(dataset), "--axis", "z", "--index", "4",
                     "--frame", "0", "--out", str(out)]) == 0
        m = read_manifest(dataset)
        field = read_scalar_frame(m, 0)
        vmin, vmax = field_minmax(field)
        assert (out / "slice_z004_0000.png").read_bytes() == \
            slice_png(field, "z", 4, vmin, vmax)

    def test_all_frames_by_default(self, dataset, tmp_path):
        out = tmp_path / "png"
        main(["slice", str(dataset), "--axis", "x", "--index", "2", "--out", str(out)])
        assert len(list(out.glob("slice_x002_*.png"))) == 3

    def test_bad_index_exits_1(self, dataset, tmp_path):
        assert main(["slice", str(dataset), "--axis", "z", "--index", "99",
                     "--frame", "0", "--out", str(tmp_path)]) == 1

    def test_global_normalization_uses_dataset_extrema(self, dataset, tmp_path):
        out = tmp_path / "png"
        main(["slice", str(dataset), "--axis", "z", "--index", "4", "--frame", "0",
              "--norm", "global", "--out", str(out)])
        m = read_manifest(dataset)
        pairs = [field_minmax(read_scalar_frame(m, k)) for k in range(3)]
        vmin, vmax = min(p[0] for p in pairs), max(p[1] for p in pairs)
        expected = slice_png(read_scalar_frame(m, 0), "z", 4, vmin, vmax)
        assert (out / "slice_z004_0000.png").read_bytes() == expected


class TestParticles:
    def test_blob_matches_module_bytes(self, dataset, tmp_path):
        out = tmp_path / "ptex"
        assert main(["particles", str(dataset), "--fraction", "0.5", "--res", "8",
                     "--seed", "7", "--frames", "2", "--out", str(out)]) == 0
        m = read_manifest(dataset)
        frame = read_particle_frame(m, 2)
        expected = pack_texture(encode_texture(subsample(frame, 0.5, 7 + 2), 8))
        assert (out / "particles_0002.ptex").read_bytes() == expected

    def test_capacity_error_exits_1(self, dataset, tmp_path, capsys):
        assert main(["particles", str(dataset), "--res", "4",
                     "--out", str(tmp_path)]) == 1
        assert "capacity" in capsys.readouterr().err


class TestStreamlines:
    def test_writes_line_sets(self, dataset, tmp_path):
        out = tmp_path / "lines"
        assert main(["streamlines", str(dataset), "--stride", "4",
                     "--max-steps", "20", "--frames", "0", "--out", str(out)]) == 0
        verts, faces, lines = parse_obj_text((out / "streamlines_0000.obj").read_bytes())
        assert not faces
        assert len(lines) == 8
        assert len(verts) == sum(len(l) for l in lines)


class TestDecimateCommand:
    def test_roundtrip_through_obj(self, dataset, tmp_path):
        src = tmp_path / "objs"
        main(["iso", str(dataset), "--isovalue", "0.5", "--frames", "0",
              "--out", str(src)])
        dst = tmp_path / "dec.obj"
        assert main(["decimate", str(src / "iso_0000.obj"), "--ratio", "0.4",
                     "--out", str(dst)]) == 0
        orig = read_obj((src / "iso_0000.obj").read_bytes())
        dec = read_obj(dst.read_bytes())
        assert 0 < dec.triangle_count <= int(0.4 * orig.triangle_count)

    def test_missing_input_exits_2(self, tmp_path):
        assert main(["decimate", str(tmp_path / "none.obj"), "--ratio", "0.5",
                     "--out", str(tmp_path / "o.obj")]) == 2


class TestConsoleEntry:
    def test_module_invocation_works(self, dataset):
        proc = subprocess.run(
            [sys.executable, "-m", "plasmaviz.cli", "validate", str(dataset)],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "frames: 3" in proc.stdout

    def test_error_exit_code_via_subprocess(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "plasmaviz.cli", "validate",
             str(tmp_path / "missing")],
            capture_output=True, text=True)
        assert proc.returncode == 2
        assert proc.stderr.startswith("error: data_error:")
