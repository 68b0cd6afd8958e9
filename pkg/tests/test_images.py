import struct
import zlib

import numpy as np
import pytest
from PIL import Image

from splat4d.images import (
    decode_pfm,
    encode_pfm,
    encode_png,
    quantize_u8,
    read_pfm,
    read_png,
    write_pfm,
    write_png,
)


def parse_png_chunks(data: bytes):
    """Minimal chunk walk used to pin the container layout."""
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos = 8
    chunks = []
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        (crc,) = struct.unpack(">I", data[pos + 8 + length : pos + 12 + length])
        assert crc == zlib.crc32(tag + payload)
        chunks.append((tag, payload))
        pos += 12 + length
    return chunks


class TestQuantize:
    def test_half_rounds_up(self):
        # 0.5 * 255 + 0.5 = 128.0 exactly
        assert quantize_u8(np.array([0.5]))[0] == 128

    def test_endpoints_and_clipping(self):
        got = quantize_u8(np.array([0.0, 1.0, -0.3, 2.5]))
        np.testing.assert_array_equal(got, [0, 255, 0, 255])

    def test_eighth_bit_levels_round_trip(self):
        levels = np.arange(256)
        np.testing.assert_array_equal(quantize_u8(levels / 255.0), levels)

    def test_matches_scalar_rule(self, rng):
        vals = rng.random(200)
        want = [min(255, max(0, int(np.floor(v * 255.0 + 0.5)))) for v in vals]
        np.testing.assert_array_equal(quantize_u8(vals), want)

    def test_bucket_boundary(self):
        # the first value that quantizes to 1 is 0.5/255
        edge = 0.5 / 255.0
        assert quantize_u8(np.array([edge]))[0] == 1
        assert quantize_u8(np.array([edge - 1e-12]))[0] == 0


class TestPngEncoder:
    def test_bytes_are_deterministic(self, rng):
        img = rng.random((9, 13, 3))
        assert encode_png(img) == encode_png(img.copy())

    def test_layout_is_pinned(self, rng):
        img = rng.random((5, 7, 3))
        chunks = parse_png_chunks(encode_png(img))
        assert [tag for tag, _ in chunks] == [b"IHDR", b"sRGB", b"IDAT", b"IEND"]
        w, h, depth, color, comp, filt, inter = struct.unpack(">IIBBBBB", chunks[0][1])
        assert (w, h) == (7, 5)
        assert (depth, color, comp, filt, inter) == (8, 2, 0, 0, 0)

    def test_idat_is_filter_zero_scanlines(self, rng):
        img = rng.random((4, 6, 3))
        chunks = dict(parse_png_chunks(encode_png(img)))
        raw = zlib.decompress(chunks[b"IDAT"])
        want = quantize_u8(img)
        assert len(raw) == 4 * (1 + 6 * 3)
        for i in range(4):
            row = raw[i * 19 : (i + 1) * 19]
            assert row[0] == 0
            np.testing.assert_array_equal(
                np.frombuffer(row[1:], np.uint8).reshape(6, 3), want[i])

    def test_pillow_reads_back_the_exact_pixels(self, rng, tmp_path):
        img = rng.random((8, 11, 3))
        path = tmp_path / "out.png"
        write_png(path, img)
        got = read_png(path)
        np.testing.assert_array_equal(got, quantize_u8(img) / 255.0)
        with Image.open(path) as im:
            assert im.size == (11, 8)
            assert im.mode == "RGB"

    def test_read_agrees_with_other_encoder(self, rng, tmp_path):
        # same pixels written by Pillow must read back identically
        img = rng.random((6, 6, 3))
        ours = tmp_path / "a.png"
        theirs = tmp_path / "b.png"
        write_png(ours, img)
        Image.fromarray(quantize_u8(img), "RGB").save(theirs)
        np.testing.assert_array_equal(read_png(ours), read_png(theirs))

    def test_bad_shapes_rejected(self):
        with pytest.raises(ValueError):
            encode_png(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            encode_png(np.zeros((4, 4, 4)))

    def test_no_temp_files_left_behind(self, rng, tmp_path):
        write_png(tmp_path / "x.png", rng.random((3, 3, 3)))
        write_pfm(tmp_path / "y.pfm", rng.random((3, 3)).astype(np.float32))
        assert sorted(p.name for p in tmp_path.iterdir()) == ["x.png", "y.pfm"]


class TestPfm:
    def test_gray_round_trip_is_bitwise(self, rng):
        a = rng.normal(scale=40.0, size=(7, 5)).astype(np.float32)
        np.testing.assert_array_equal(decode_pfm(encode_pfm(a)), a)

    def test_color_round_trip_is_bitwise(self, rng):
        a = rng.normal(size=(4, 9, 3)).astype(np.float32)
        np.testing.assert_array_equal(decode_pfm(encode_pfm(a)), a)

    def test_special_values_survive(self):
        a = np.array([[0.0, -0.0], [np.inf, 1e-42]], np.float32)
        back = decode_pfm(encode_pfm(a))
        np.testing.assert_array_equal(back, a)
        assert np.signbit(back[0, 1])

    def test_file_round_trip(self, rng, tmp_path):
        a = rng.random((6, 8)).astype(np.float32)
        write_pfm(tmp_path / "d.pfm", a)
        np.testing.assert_array_equal(read_pfm(tmp_path / "d.pfm"), a)

    def test_header_layout(self):
        a = np.arange(6, dtype=np.float32).reshape(2, 3)
        data = encode_pfm(a)
        assert data.startswith(b"Pf\n3 2\n-1.0\n")
        assert len(data) == len(b"Pf\n3 2\n-1.0\n") + 6 * 4

    def test_scanlines_are_bottom_up(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]], np.float32)
        body = encode_pfm(a)[len(b"Pf\n2 2\n-1.0\n"):]
        np.testing.assert_array_equal(
            np.frombuffer(body, "<f4"), [3.0, 4.0, 1.0, 2.0])

    def test_big_endian_scale_is_honored(self):
        a = np.array([[1.5, -2.25]], np.float32)
        data = b"Pf\n2 1\n1.0\n" + a[::-1].astype(">f4").tobytes()
        np.testing.assert_array_equal(decode_pfm(data), a)

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError):
            decode_pfm(b"P6\n2 1\n-1.0\n" + b"\x00" * 8)

    def test_truncated_payload_rejected(self):
        a = np.ones((2, 2), np.float32)
        data = encode_pfm(a)
        with pytest.raises(ValueError):
            decode_pfm(data[:-5])

    def test_truncated_header_rejected(self):
        with pytest.raises(ValueError):
            decode_pfm(b"Pf\n2")

    def test_bad_rank_rejected(self):
        with pytest.raises(ValueError):
            encode_pfm(np.zeros((2, 2, 2), np.float32))
