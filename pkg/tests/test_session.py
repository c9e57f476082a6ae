import threading

import numpy as np
import pytest

import plasmaviz.session as session_mod
from plasmaviz.io_formats import unpack_mesh, unpack_streamlines, unpack_texture
from plasmaviz.session import ExplorerSession, PlaybackClock

from helpers import write_dataset


class FakeClock:
    def __init__(self):
        self.t = 100.0

    def __call__(self):
        return self.t

    def advance(self, dt):
        self.t += dt


class TestPlaybackClock:
    def test_pause_then_seek(self):
        clk = FakeClock()
        pb = PlaybackClock(8, fps=10, now=clk)
        pb.pause()
        st = pb.seek(5)
        assert st == {"frame": 5, "playing": False, "fps": 10, "frame_count": 8}

    def test_one_second_at_ten_fps_wraps_modulo_frames(self):
        clk = FakeClock()
        pb = PlaybackClock(4, fps=10, now=clk)
        pb.seek(1)
        pb.play()
        clk.advance(1.0)
        assert pb.current_frame() == (1 + 10) % 4

    def test_monotone_between_commands(self):
        clk = FakeClock()
        pb = PlaybackClock(6, fps=3, now=clk)
        pb.play()
        seen = []
        for _ in range(40):
            clk.advance(0.07)
            seen.append(pb.current_frame())
        jumps = np.diff(seen)
        assert ((jumps >= 0) | (jumps == -(6 - 1))).all()  # wraps allowed

    def test_pause_freezes_frame(self):
        clk = FakeClock()
        pb = PlaybackClock(10, fps=4, now=clk)
        pb.play()
        clk.advance(1.0)
        frozen = pb.pause()["frame"]
        clk.advance(5.0)
        assert pb.current_frame() == frozen

    def test_seek_preserves_playing_flag(self):
        clk = FakeClock()
        pb = PlaybackClock(10, fps=4, now=clk)
        pb.play()
        st = pb.seek(7)
        assert st["playing"] is True
        clk.advance(0.25)
        assert pb.current_frame() == 8

    def test_set_rate_rebases_cleanly(self):
        clk = FakeClock()
        pb = PlaybackClock(100, fps=1, now=clk)
        pb.play()
        clk.advance(2.0)  # at frame 2
        pb.set_rate(10)
        clk.advance(1.0)
        assert pb.current_frame() == 12

    def test_seek_out_of_range_and_bad_fps(self):
        pb = PlaybackClock(4, now=FakeClock())
        with pytest.raises(IndexError):
            pb.seek(4)
        with pytest.raises(ValueError):
            pb.set_rate(0.0)


@pytest.fixture()
def dataset(tmp_path):
    return write_dataset(tmp_path / "ds")


class TestSessionPayloads:
    def test_summary_lists_everything(self, dataset):
        s = ExplorerSession(dataset)
        info = s.summary()
        assert info["frame_count"] == 3
        assert set(info["modalities"]) == {"scalar", "vector", "particles"}
        assert info["scalar"]["dims"] == [8, 8, 8]
        assert info["playback"]["frame"] == 0

    def test_mesh_payload_caches(self, dataset):
        s = ExplorerSession(dataset)
        p1, cached1 = s.mesh_payload(0, 0.5, None)
        p2, cached2 = s.mesh_payload(0, 0.5, None)
        assert (cached1, cached2) == (False, True)
        assert p1 == p2
        mesh = unpack_mesh(p1)
        assert mesh.triangle_count > 0
        # different key computes fresh
        _, cached3 = s.mesh_payload(0, 0.6, None)
        assert cached3 is False

    def test_mesh_payload_with_decimation(self, dataset):
        s = ExplorerSession(dataset)
        full = unpack_mesh(s.mesh_payload(0, 0.5)[0])
        dec = unpack_mesh(s.mesh_payload(0, 0.5, 0.3)[0])
        assert dec.triangle_count <= int(0.3 * full.triangle_count)

    def test_out_of_range_isovalue_gives_empty_mesh(self, dataset):
        s = ExplorerSession(dataset)
        mesh = unpack_mesh(s.mesh_payload(0, 1e9)[0])
        assert mesh.triangle_count == 0

    def test_streamline_payload_decodes(self, dataset):
        s = ExplorerSession(dataset)
        payload, _ = s.streamline_payload(0, stride=4, max_steps=30)
        lines = unpack_streamlines(payload)
        assert len(lines) == 8  # 8^3 grid, stride 4 -> 2 per axis
        assert all(l.shape[1] == 4 for l in lines)

    def test_particles_payload_capacity_and_subsampling(self, dataset):
        s = ExplorerSession(dataset)
        tex = unpack_texture(s.particles_payload(0, 1.0, 8)[0])
        assert tex.occupancy == 20
        from plasmaviz.particles import CapacityError
        with pytest.raises(CapacityError):
            s.particles_payload(0, 1.0, 4)  # 20 > 16
        thin = unpack_texture(s.particles_payload(0, 0.5, 8, seed=3)[0])
        assert thin.occupancy <= 20

    def test_slice_payload_is_png_and_cached(self, dataset):
        s = ExplorerSession(dataset)
        p1, c1 = s.slice_payload(0, "z", 4)
        p2, c2 = s.slice_payload(0, "z", 4)
        assert p1[:8] == b"\x89PNG\r\n\x1a\n"
        assert (c1, c2) == (False, True) and p1 == p2

    def test_moving_a_plane_rescans_nothing_but_the_slice(self, dataset, monkeypatch):
        s = ExplorerSession(dataset)
        s.slice_payload(0, "z", 0)
        calls = {"minmax": 0}
        import plasmaviz.fields as fields_mod
        real = fields_mod.field_minmax

        def counting(field):
            calls["minmax"] += 1
            return real(field)

        monkeypatch.setattr(session_mod, "field_minmax", counting)
        for idx in range(1, 8):
            s.slice_payload(0, "z", idx)
        assert calls["minmax"] == 0  # extrema came from the frame cache

    def test_identical_requests_share_one_computation(self, dataset, monkeypatch):
        s = ExplorerSession(dataset)
        calls = []
        real = session_mod.flying_edges

        def counting(field, iso, **kw):
            calls.append(iso)
            return real(field, iso, **kw)

        monkeypatch.setattr(session_mod, "flying_edges", counting)
        results = []

        def worker():
            results.append(s.mesh_payload(1, 0.5)[0])

        threads = [threading.Thread(target=worker) for _ in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(calls) == 1
        assert all(r == results[0] for r in results)

    def test_verify_mode_checks_cached_responses(self, dataset):
        s = ExplorerSession(dataset, verify_cache=True)
        s.slice_payload(0, "y", 2)
        s.slice_payload(0, "y", 2)  # recomputes and compares under the hood
        # poison the cache to prove the verify path is active
        key = (0, "y", 2)
        s._caches["slice"][key] = b"garbage"
        with pytest.raises(AssertionError):
            s.slice_payload(0, "y", 2)

    def test_eager_policy_loads_frames_up_front(self, dataset):
        s = ExplorerSession(dataset, policy="eager")
        assert len(s.frames._cache) == 9  # 3 modalities x 3 frames

    def test_precompute_meshes_warms_cache(self, dataset):
        s = ExplorerSession(dataset)
        assert s.precompute_meshes(0.5, None) == 3
        for k in range(3):
            _, cached = s.mesh_payload(k, 0.5, None)
            assert cached

    def test_frame_out_of_range(self, dataset):
        s = ExplorerSession(dataset)
        with pytest.raises(IndexError):
            s.mesh_payload(3, 0.5)
        with pytest.raises(IndexError):
            s.slice_payload(0, "z", 8)

    def test_annotations_persist_across_sessions(self, dataset):
        s = ExplorerSession(dataset)
        ann = s.annotation_create(group="A", color=(1, 2, 3), frame_start=0,
                                  frame_end=2, strokes=[[(0, 0, 0), (1, 1, 1)]])
        s2 = ExplorerSession(dataset)
        assert [a.id for a in s2.annotations.list()] == [ann.id]

    def test_global_normalization_scope_spans_all_frames(self, dataset):
        per_frame = ExplorerSession(dataset)
        spanning = ExplorerSession(dataset, norm_scope="global")
        pairs = [per_frame.frame_minmax(k) for k in range(3)]
        expected = (min(p[0] for p in pairs), max(p[1] for p in pairs))
        assert spanning.dataset_minmax() == expected
        assert spanning.heatmap_range(0) == expected
        assert per_frame.heatmap_range(0) == pairs[0]
        # the test dataset drifts between frames, so the scopes must differ
        assert pairs[0] != expected
        a = per_frame.slice_payload(0, "z", 4)[0]
        b = spanning.slice_payload(0, "z", 4)[0]
        assert a != b

    def test_unknown_norm_scope_rejected(self, dataset):
        with pytest.raises(ValueError):
            ExplorerSession(dataset, norm_scope="session")
