import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from mfswb.io import (
    FormatError,
    ImagePalette,
    ParseError,
    load_image_palette,
    load_pointcloud,
    quantize_colors,
    read_manifest,
    read_metrics_csv,
    write_image_palette,
    write_manifest,
    write_metrics_csv,
    write_ply,
    write_points,
)
from mfswb.optimizer import MetricsRecord


class TestPointClouds:
    def test_xyz(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("0 0 0\n1 0 0\n0 1 0\n")
        m = load_pointcloud(p)
        assert m.n == 3 and np.allclose(m.weights, 1 / 3)
        assert np.array_equal(m.supports, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])

    def test_ply_vertex_count(self, tmp_path, rng):
        p = tmp_path / "c.ply"
        write_ply(rng.standard_normal((2048, 3)), p)
        assert load_pointcloud(p).n == 2048

    def test_ply_with_extra_properties_and_faces(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text("ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float nx\nproperty float x\n"
                     "property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n"
                     "end_header\n9 1 2 3\n9 4 5 6\n3 0 1 1\n")
        assert np.array_equal(load_pointcloud(p).supports, [[1, 2, 3], [4, 5, 6]])

    def test_round_trip(self, tmp_path, rng):
        x = rng.standard_normal((40, 3)) * 100
        write_points(x, tmp_path / "c.xyz")
        assert np.max(np.abs(load_pointcloud(tmp_path / "c.xyz").supports - x)) < 1e-6

    @pytest.mark.parametrize("text,line", [("0 0 0\n1 0\n", 2), ("0 0 0\n0 0 zz\n", 2), ("", None)])
    def test_xyz_errors_carry_line(self, tmp_path, text, line):
        p = tmp_path / "bad.xyz"
        p.write_text(text)
        with pytest.raises(ParseError) as exc:
            load_pointcloud(p)
        assert exc.value.line == line

    @pytest.mark.parametrize("text", [
        "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n",
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
        "end_header\n0 0 0\n",
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n",
    ])
    def test_ply_errors(self, tmp_path, text):
        p = tmp_path / "bad.ply"
        p.write_text(text)
        with pytest.raises(ParseError):
            load_pointcloud(p)


def save(tmp_path, name, arr, mode=None):
    p = tmp_path / name
    img = Image.fromarray(np.asarray(arr, dtype=np.uint8))
    (img.convert(mode) if mode else img).save(p)
    return p


class TestImages:
    def test_red(self, tmp_path):
        _, m = load_image_palette(save(tmp_path, "r.png", np.tile([255, 0, 0], (2, 2, 1))))
        assert m.n == 4 and np.all(m.supports == [255, 0, 0])

    def test_black_pixel(self, tmp_path):
        _, m = load_image_palette(save(tmp_path, "k.png", np.zeros((1, 1, 3))))
        assert np.array_equal(m.supports, [[0, 0, 0]])

    def test_round_trip(self, tmp_path, rng):
        arr = rng.integers(0, 256, size=(5, 7, 3))
        pal, m = load_image_palette(save(tmp_path, "a.png", arr))
        assert (pal.width, pal.height) == (7, 5)
        write_image_palette(pal, m.supports, tmp_path / "b.png")
        assert np.array_equal(load_image_palette(tmp_path / "b.png")[1].supports, m.supports)

    def test_unmodified_write_back_is_byte_identical(self, tmp_path, rng):
        pal, m = load_image_palette(save(tmp_path, "a.png", rng.integers(0, 256, size=(4, 4, 3))))
        write_image_palette(pal, m.supports, tmp_path / "b.png")
        write_image_palette(pal, m.supports, tmp_path / "c.png")
        assert (tmp_path / "b.png").read_bytes() == (tmp_path / "c.png").read_bytes()

    def test_clamp_and_round(self):
        assert np.array_equal(quantize_colors([[-3.2, 260.0, 128.4]]), [[0, 255, 128]])

    def test_decodes_clamped_optimizer_output(self, tmp_path, rng):
        pal = ImagePalette(4, 4, np.zeros((16, 3)))
        colors = rng.uniform(-20, 280, size=(16, 3))
        write_image_palette(pal, colors, tmp_path / "o.png")
        got = load_image_palette(tmp_path / "o.png")[1].supports
        assert np.array_equal(got, np.rint(np.clip(colors, 0, 255)))

    def test_shape_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_image_palette(ImagePalette(2, 2, np.zeros((4, 3))), np.zeros((3, 3)), tmp_path / "x.png")

    def test_rejects_grayscale_and_garbage(self, tmp_path):
        with pytest.raises(FormatError):
            load_image_palette(save(tmp_path, "g.png", np.zeros((2, 2, 3)), mode="L"))
        (tmp_path / "x.png").write_bytes(b"not an image")
        with pytest.raises(FormatError):
            load_image_palette(tmp_path / "x.png")


class TestMetricsCsv:
    def test_empty(self, tmp_path):
        write_metrics_csv([], tmp_path / "m.csv")
        assert (tmp_path / "m.csv").read_text() == "iteration,F,W,objective\n"

    def test_one_record(self, tmp_path):
        write_metrics_csv([MetricsRecord(0, 1.5, 2.5, 3.0)], tmp_path / "m.csv")
        assert (tmp_path / "m.csv").read_text().splitlines() == ["iteration,F,W,objective", "0,1.5,2.5,3"]

    @given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False),
                              st.floats(allow_nan=False, allow_infinity=False),
                              st.floats(allow_nan=False, allow_infinity=False)), max_size=20))
    @settings(max_examples=50)
    def test_bitwise_round_trip(self, tmp_path_factory, rows):
        recs = [MetricsRecord(i, *r) for i, r in enumerate(rows)]
        p = tmp_path_factory.mktemp("csv") / "m.csv"
        write_metrics_csv(recs, p)
        assert read_metrics_csv(p) == recs

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("a,b\n")
        with pytest.raises(ParseError):
            read_metrics_csv(tmp_path / "m.csv")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            write_metrics_csv([], tmp_path / "missing" / "m.csv")


def test_manifest_round_trip(tmp_path):
    man = {"seed": 3, "lambda": 1.0, "method": "mfswb"}
    write_manifest(man, tmp_path / "m.json")
    assert read_manifest(tmp_path / "m.json") == man
