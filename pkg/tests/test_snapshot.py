"""Snapshot containers, file formats, centering, and spectra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyrom.snapshot import (CenteredSnapshots, MatrixParseError, SnapshotSet,
                              center, load_matrix, load_snapshot_set,
                              save_matrix, save_snapshot_set, smat_decode,
                              smat_encode, svd_spectrum)


@pytest.fixture
def small_matrix():
    return np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])


class TestBinaryFormat:
    def test_round_trip_identity(self, small_matrix, tmp_path):
        path = tmp_path / "m.smat"
        save_matrix(small_matrix, path)
        back = load_matrix(path)
        assert back.tobytes() == small_matrix.tobytes()

    def test_file_size_formula(self, tmp_path):
        rng = np.random.default_rng(0)
        for n, k in [(3, 2), (7, 11), (1, 5)]:
            path = tmp_path / f"m{n}x{k}.smat"
            save_matrix(rng.normal(size=(n, k)), path)
            assert path.stat().st_size == len(b"SMAT1\n") + 16 + 8 * n * k

    def test_empty_matrix_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty matrix"):
            save_matrix(np.zeros((3, 0)), tmp_path / "e.smat")

    def test_non_finite_rejected_on_save(self, tmp_path):
        bad = np.array([[1.0, np.nan]])
        with pytest.raises(ValueError, match="non-finite"):
            save_matrix(bad, tmp_path / "bad.smat")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.smat"
        path.write_bytes(b"NOTSMAT" + b"\x00" * 32)
        with pytest.raises(MatrixParseError, match="byte 0"):
            load_matrix(path)

    def test_dimension_mismatch_names_bytes(self, tmp_path):
        payload = smat_encode(np.ones((2, 2)))
        path = tmp_path / "trunc.smat"
        path.write_bytes(payload[:-8])
        with pytest.raises(MatrixParseError, match="dimension mismatch"):
            load_matrix(path)

    def test_non_finite_payload_names_offset(self):
        payload = bytearray(smat_encode(np.ones((2, 2))))
        payload[22 + 8:22 + 16] = np.array([np.inf]).tobytes()
        with pytest.raises(MatrixParseError, match="byte 30"):
            smat_decode(bytes(payload))

    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_property(self, n, k, seed):
        matrix = np.random.default_rng(seed).normal(scale=1e3, size=(n, k))
        assert smat_decode(smat_encode(matrix)).tobytes() == matrix.tobytes()


class TestCsvFormat:
    def test_round_trip_exact(self, small_matrix, tmp_path):
        path = tmp_path / "m.csv"
        save_matrix(small_matrix, path, fmt="csv")
        back = load_matrix(path, fmt="csv")
        assert back.tobytes() == small_matrix.tobytes()

    def test_round_trip_awkward_values(self, tmp_path):
        vals = np.array([[0.1, 1e-300], [np.pi, -2.5000000000000004e-10]])
        path = tmp_path / "m.csv"
        save_matrix(vals, path, fmt="csv")
        assert load_matrix(path).tobytes() == vals.tobytes()

    def test_transposed_layout(self, small_matrix, tmp_path):
        path = tmp_path / "m.csv"
        save_matrix(small_matrix, path, fmt="csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "3,2"
        assert len(lines) == 1 + 2  # one line per snapshot column
        assert [float(v) for v in lines[1].split(",")] == [1.0, 3.0, 5.0]

    def test_non_numeric_token_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,2\n1.0,2.0\n1.0,oops\n")
        with pytest.raises(MatrixParseError, match="line 3"):
            load_matrix(path)

    def test_wrong_value_count_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,2\n1.0,2.0\n1.0\n")
        with pytest.raises(MatrixParseError, match="line 3"):
            load_matrix(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("rows cols\n")
        with pytest.raises(MatrixParseError, match="line 1"):
            load_matrix(path)


class TestSnapshotSet:
    def test_validates_times_length(self):
        with pytest.raises(ValueError):
            SnapshotSet(data=np.ones((2, 3)), times=np.arange(2.0))

    def test_requires_two_columns(self):
        with pytest.raises(ValueError):
            SnapshotSet(data=np.ones((2, 1)), times=np.zeros(1))

    def test_times_reset_allowed_at_breaks(self):
        times = np.array([0.0, 1.0, 0.0, 1.0])
        sset = SnapshotSet(data=np.ones((2, 4)), times=times, trajectory_breaks=(2,))
        assert sset.trajectory_slices() == [(0, 2), (2, 4)]

    def test_times_must_increase_within_trajectory(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SnapshotSet(data=np.ones((2, 3)), times=np.array([0.0, 1.0, 1.0]))

    def test_break_bounds(self):
        with pytest.raises(ValueError):
            SnapshotSet(data=np.ones((2, 4)), times=np.arange(4.0),
                        trajectory_breaks=(4,))

    def test_param_labels_per_trajectory(self):
        with pytest.raises(ValueError):
            SnapshotSet(data=np.ones((2, 4)), times=np.array([0, 1, 0, 1.0]),
                        trajectory_breaks=(2,), param_labels=(0.5,))


class TestCentering:
    def test_single_column_mean(self):
        c = np.array([2.0, -1.0])
        sset = SnapshotSet(data=np.column_stack([c, c]), times=np.arange(2.0))
        cs = center(sset, "column_mean")
        np.testing.assert_array_equal(cs.s_ref, c)
        assert np.all(cs.centered == 0)

    def test_initial_condition_mean(self):
        a = np.array([1.0, 0.0])
        b = np.array([3.0, 2.0])
        data = np.column_stack([a, a + 1, b, b + 1])
        sset = SnapshotSet(data=data, times=np.array([0, 1, 0, 1.0]),
                           trajectory_breaks=(2,))
        cs = center(sset, "initial_condition_mean")
        np.testing.assert_allclose(cs.s_ref, (a + b) / 2)

    def test_custom_vector(self):
        sset = SnapshotSet(data=np.ones((2, 3)), times=np.arange(3.0))
        cs = center(sset, "custom", vector=np.array([1.0, 0.0]))
        np.testing.assert_array_equal(cs.centered[0], 0.0)
        np.testing.assert_array_equal(cs.centered[1], 1.0)

    def test_custom_requires_matching_length(self):
        sset = SnapshotSet(data=np.ones((2, 3)), times=np.arange(3.0))
        with pytest.raises(ValueError):
            center(sset, "custom", vector=np.ones(3))

    @given(st.integers(0, 2**32))
    @settings(max_examples=25, deadline=None)
    def test_centering_preserves_data(self, seed):
        rng = np.random.default_rng(seed)
        data = rng.normal(scale=10.0, size=(4, 6))
        sset = SnapshotSet(data=data, times=np.arange(6.0))
        cs = center(sset, "column_mean")
        recon = cs.centered + cs.s_ref[:, None]
        assert np.max(np.abs(recon - data)) <= 1e-14 * max(1.0, np.max(np.abs(data)))


class TestSpectrum:
    def test_diagonal_matrix(self):
        centered = np.zeros((4, 3))
        centered[0, 0], centered[1, 1], centered[2, 2] = 3.0, 2.0, 1.0
        cs = CenteredSnapshots(centered=centered, s_ref=np.zeros(4),
                               times=np.arange(3.0))
        spec = svd_spectrum(cs)
        np.testing.assert_allclose(spec.singular_values, [3, 2, 1])
        np.testing.assert_allclose(spec.cumulative_energy, [9 / 14, 13 / 14, 1.0])
        assert spec.energy_at(2) == pytest.approx(13 / 14)

    def test_degenerate_matrix(self):
        cs = CenteredSnapshots(centered=np.zeros((3, 3)), s_ref=np.zeros(3),
                               times=np.arange(3.0))
        with pytest.raises(ValueError, match="degenerate snapshot matrix"):
            svd_spectrum(cs)

    def test_energy_monotone_and_complete(self):
        rng = np.random.default_rng(7)
        centered = rng.normal(size=(6, 10))
        centered -= centered.mean(axis=1, keepdims=True)
        spec = svd_spectrum(CenteredSnapshots(centered=centered,
                                              s_ref=np.zeros(6),
                                              times=np.arange(10.0)))
        assert np.all(np.diff(spec.cumulative_energy) >= -1e-15)
        assert abs(spec.cumulative_energy[-1] - 1.0) <= 1e-12
        assert np.all(np.diff(spec.singular_values) <= 0)


class TestSidecar:
    def test_snapshot_set_round_trip(self, tmp_path):
        data = np.arange(12.0).reshape(3, 4)
        sset = SnapshotSet(data=data, times=np.array([0, 1, 0, 1.0]),
                           trajectory_breaks=(2,), param_labels=(0.5, 0.6))
        path = tmp_path / "set.smat"
        save_snapshot_set(sset, path, config={"problem": "test"})
        back, config = load_snapshot_set(path)
        assert back.data.tobytes() == data.tobytes()
        assert back.trajectory_breaks == (2,)
        assert back.param_labels == (0.5, 0.6)
        np.testing.assert_array_equal(back.times, sset.times)
        assert config == {"problem": "test"}
