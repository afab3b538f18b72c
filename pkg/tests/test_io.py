import numpy as np
import pytest

from motkit.geometry import BoundingBox
from motkit.io import (
    BadMagicError,
    FormatError,
    TruncatedError,
    parse_mot_line,
    read_det_boxes,
    read_gt_boxes,
    read_mot,
    read_run_config,
    read_tensor,
    write_mot,
    write_tensor,
)


class TestMotRows:
    def test_parse_example_row(self):
        row = parse_mot_line("1,2,10,20,30,40,1,-1,-1,-1", 1)
        assert row.frame == 1 and row.track_id == 2
        assert row.to_box().corners() == (10.0, 20.0, 40.0, 60.0)

    def test_round_trip_random_rows(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = {}
        for frame in range(1, 5):
            rows = []
            for tid in range(1, 4):
                x, y = rng.uniform(0, 100, 2)
                w, h = rng.uniform(5, 40, 2)
                rows.append(
                    (tid, BoundingBox(x, y, x + w, y + h, float(rng.uniform(0, 1))))
                )
            frames[frame] = rows
        path = tmp_path / "rows.txt"
        write_mot(frames, path)
        back = read_mot(path)
        assert set(back) == set(frames)
        for frame in frames:
            for (tid_a, box_a), (tid_b, box_b) in zip(frames[frame], back[frame]):
                assert tid_a == tid_b
                assert box_a.corners() == box_b.corners()
                assert box_a.score == box_b.score

    def test_writer_deterministic(self, tmp_path):
        frames = {1: [(1, BoundingBox(0.5, 1.25, 10.75, 20.125, 0.375))]}
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        write_mot(frames, p1)
        write_mot(frames, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_wrong_column_count(self):
        with pytest.raises(FormatError, match="line 3"):
            parse_mot_line("1,2,3", 3)

    def test_rejects_non_positive_size_with_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1,1,10,20,30,40,1,-1,-1,-1\n1,2,10,20,0,40,1,-1,-1,-1\n")
        with pytest.raises(FormatError, match="line 2"):
            read_mot(path)

    def test_rejects_garbage_number(self):
        with pytest.raises(FormatError, match="line 7"):
            parse_mot_line("1,2,xx,20,30,40,1,-1,-1,-1", 7)


class TestTensorDump:
    def test_single_zero_round_trip(self, tmp_path):
        path = tmp_path / "t.tnsr"
        write_tensor(np.zeros((1,), dtype=np.int32), path)
        assert np.array_equal(read_tensor(path), np.zeros((1,), dtype=np.int32))

    def test_headmap_sized_float_round_trip_byte_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(84, 24, 40)).astype(np.float32)
        p1, p2 = tmp_path / "a.tnsr", tmp_path / "b.tnsr"
        write_tensor(data, p1)
        back = read_tensor(p1)
        assert back.dtype == np.float32
        assert np.array_equal(back, data)
        write_tensor(back, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_int_round_trip(self, tmp_path):
        data = np.arange(-6, 6, dtype=np.int64).reshape(3, 4)
        path = tmp_path / "i.tnsr"
        write_tensor(data, path)
        assert np.array_equal(read_tensor(path), data)

    def test_bad_magic_distinct_error(self, tmp_path):
        path = tmp_path / "bad.tnsr"
        path.write_bytes(b"NOPE" + bytes(10))
        with pytest.raises(BadMagicError):
            read_tensor(path)

    def test_truncation_distinct_error(self, tmp_path):
        path = tmp_path / "t.tnsr"
        write_tensor(np.arange(10, dtype=np.int32), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(TruncatedError):
            read_tensor(path)

    def test_int32_overflow_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_tensor(np.array([2**40]), tmp_path / "x.tnsr")


class TestRunConfig:
    def test_parses_known_keys(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# pipeline settings\n"
            "score_thresh = 0.4\n"
            "nms_iou = 0.5\n"
            "max_age = 3\n"
        )
        cfg = read_run_config(path)
        assert cfg == {"score_thresh": 0.4, "nms_iou": 0.5, "max_age": 3}
        assert isinstance(cfg["max_age"], int)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("warp_factor = 9\n")
        with pytest.raises(FormatError, match="warp_factor"):
            read_run_config(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("score_thresh 0.4\n")
        with pytest.raises(FormatError, match="line 1"):
            read_run_config(path)


class TestDetJson:
    def test_gt_and_det_files(self, tmp_path):
        gt_path = tmp_path / "gt.json"
        det_path = tmp_path / "det.json"
        gt_path.write_text('{"img1": [[0, 0, 10, 10, 3]]}')
        det_path.write_text('{"img1": [[0, 0, 10, 10, 0.9, 3]]}')
        gts = read_gt_boxes(gt_path)
        dets = read_det_boxes(det_path)
        assert gts["img1"][0].class_id == 3
        assert dets["img1"][0].score == 0.9

    def test_wrong_arity_rejected(self, tmp_path):
        path = tmp_path / "gt.json"
        path.write_text('{"img1": [[0, 0, 10, 10]]}')
        with pytest.raises(FormatError):
            read_gt_boxes(path)
