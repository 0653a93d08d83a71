import struct

import cv2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasemotion.errors import FormatError, StructureError, UsageError
from phasemotion.fileio import (FLOW_MAGIC, PYR_MAGIC, decode_flow, decode_pyramids, encode_flow, encode_pyramids,
                                flow_to_color, list_frames, read_flow, read_frames, read_image, read_pyramids,
                                write_flow, write_frames, write_image, write_pyramids)
from phasemotion.motion import FlowField
from phasemotion.pyramid import PyramidSpec, decompose, reconstruct


def pyr(seed=0, dims=(64, 48), spec=PyramidSpec(3, 4, 8)):
    return decompose(np.random.default_rng(seed).random(dims), spec)


def test_pyramid_round_trip_bit_exact(tmp_path):
    ps = [pyr(0), pyr(1), pyr(2)]
    data = encode_pyramids(ps, 0)
    assert data.startswith(PYR_MAGIC)
    w, h, c, S, K, prec = struct.unpack("<IIBBBB", data[7:19])
    assert (w, h, c, S, K, prec) == (48, 64, 3, 3, 4, 0)
    back, prec = decode_pyramids(data)
    assert prec == 0 and len(back) == 3
    for a, b in zip(ps, back):
        assert b.spec.scales == 3 and b.spec.orientations == 4
        for s, k, band in a.iter_bands():
            assert np.array_equal(band, b.bands[s][k])
        assert np.array_equal(a.highpass, b.highpass) and np.array_equal(a.lowpass, b.lowpass)
    assert encode_pyramids(back, 0) == data
    path = tmp_path / "p.phpyr"
    write_pyramids(path, ps)
    assert path.read_bytes() == data
    assert np.array_equal(reconstruct(read_pyramids(path)[0][1]), reconstruct(ps[1]))


def test_pyramid_f32_precision():
    p = pyr(3)
    back, prec = decode_pyramids(encode_pyramids([p], 1))
    assert prec == 1
    assert np.array_equal(back[0].bands[1][2], p.bands[1][2].astype(np.complex64).astype(complex))
    assert encode_pyramids(back, 1) == encode_pyramids([p], 1)
    assert len(encode_pyramids([p], 1)) < len(encode_pyramids([p], 0))


def test_odd_dims_round_trip():
    p = pyr(4, (67, 45), PyramidSpec(2, 3))
    back, _ = decode_pyramids(encode_pyramids([p]))
    assert np.array_equal(back[0].lowpass, p.lowpass)


@pytest.mark.parametrize("cut", [3, 10, 19, 25, 500, -1])
def test_truncated_pyramid_rejected(cut):
    data = encode_pyramids([pyr()])
    with pytest.raises(FormatError):
        decode_pyramids(data[:cut])


def test_corrupt_pyramids_rejected():
    data = bytearray(encode_pyramids([pyr()]))
    with pytest.raises(FormatError):
        decode_pyramids(b"XXPYR1\0" + bytes(data[7:]))
    with pytest.raises(FormatError):
        decode_pyramids(bytes(data) + b"\0")
    bad = bytearray(data)
    bad[18] = 7  # precision
    with pytest.raises(FormatError):
        decode_pyramids(bytes(bad))
    bad = bytearray(data)
    bad[19:23] = struct.pack("<I", 47)  # first block width
    with pytest.raises(FormatError):
        decode_pyramids(bytes(bad))
    bad = bytearray(data)
    bad[17] = 1  # one orientation
    with pytest.raises(FormatError):
        decode_pyramids(bytes(bad))
    with pytest.raises(StructureError):
        encode_pyramids([pyr(), pyr(dims=(64, 64))])
    with pytest.raises(StructureError):
        encode_pyramids([])


@settings(max_examples=30, deadline=None)
@given(st.binary(max_size=200))
def test_random_bytes_never_crash(blob):
    for dec in (decode_pyramids, decode_flow):
        for data in (blob, PYR_MAGIC + blob, FLOW_MAGIC + blob):
            try:
                dec(data)
            except FormatError:
                pass


def test_flow_round_trip(tmp_path):
    r = np.random.default_rng(5)
    f = FlowField(r.normal(size=(20, 30)).astype(np.float32).astype(float),
                  r.normal(size=(20, 30)).astype(np.float32).astype(float), r.random((20, 30)) > 0.2)
    f.u[~f.valid] = 0
    f.v[~f.valid] = 0
    data = encode_flow(f)
    assert data.startswith(FLOW_MAGIC) and len(data) == 7 + 8 + 20 * 30 * 9
    g = decode_flow(data)
    assert np.array_equal(g.u, f.u) and np.array_equal(g.v, f.v) and np.array_equal(g.valid, f.valid)
    assert encode_flow(g) == data
    write_flow(tmp_path / "f.phflo", f)
    assert (tmp_path / "f.phflo").read_bytes() == data
    assert np.array_equal(read_flow(tmp_path / "f.phflo").u, f.u)
    with pytest.raises(FormatError):
        decode_flow(data[:-1])
    bad = bytearray(data)
    bad[7 + 8 + 8] = 3
    with pytest.raises(FormatError):
        decode_flow(bytes(bad))


def test_image_io(tmp_path):
    r = np.random.default_rng(6)
    rgb = r.random((20, 24, 3))
    write_image(str(tmp_path / "a.png"), rgb)
    back = read_image(str(tmp_path / "a.png"))
    assert back.shape == rgb.shape and np.max(np.abs(back - rgb)) <= 0.5 / 255 + 1e-12
    write_image(str(tmp_path / "b.png"), rgb, depth=16)
    assert np.max(np.abs(read_image(str(tmp_path / "b.png")) - rgb)) <= 0.5 / 65535 + 1e-12
    red = np.zeros((8, 8, 3))
    red[..., 0] = 1
    write_image(str(tmp_path / "r.png"), red)
    assert np.array_equal(read_image(str(tmp_path / "r.png")), red)
    cv2.imwrite(str(tmp_path / "w.pgm"), np.full((5, 6), 65535, np.uint16))
    assert np.array_equal(read_image(str(tmp_path / "w.pgm")), np.ones((5, 6)))
    cv2.imwrite(str(tmp_path / "c.ppm"), np.full((5, 6, 3), 255, np.uint8))
    assert read_image(str(tmp_path / "c.ppm")).shape == (5, 6, 3)
    rgba = np.zeros((4, 4, 4), np.uint8)
    rgba[..., 2] = 255
    cv2.imwrite(str(tmp_path / "x.png"), rgba)
    assert np.array_equal(read_image(str(tmp_path / "x.png"))[..., 0], np.ones((4, 4)))
    (tmp_path / "junk.png").write_bytes(b"not a png")
    with pytest.raises(FormatError):
        read_image(str(tmp_path / "junk.png"))
    with pytest.raises(UsageError):
        read_image(str(tmp_path / "missing.png"))
    with pytest.raises(UsageError):
        write_image(str(tmp_path / "d.png"), rgb, depth=12)


def test_frames_round_trip(tmp_path):
    r = np.random.default_rng(7)
    frames = [r.random((16, 20)) for _ in range(4)]
    paths = write_frames(str(tmp_path / "seq"), frames)
    assert [p.rsplit("/", 1)[1] for p in paths] == ["000000.png", "000001.png", "000002.png", "000003.png"]
    back = read_frames(str(tmp_path / "seq"))
    assert len(back) == 4
    assert max(np.max(np.abs(a - b)) for a, b in zip(frames, back)) <= 1 / 255


def test_manifest_order_and_listing(tmp_path):
    d = tmp_path / "seq"
    d.mkdir()
    for name, v in [("b.png", 0.2), ("a.png", 0.8), ("c.pgm", 0.5)]:
        write_image(str(d / name), np.full((8, 8), v))
    (d / "notes.txt").write_text("ignored")
    assert [p.rsplit("/", 1)[1] for p in list_frames(str(d))] == ["a.png", "b.png", "c.pgm"]
    (d / "manifest.txt").write_text("c.pgm\nb.png\n")
    vals = [f[0, 0] for f in read_frames(str(d))]
    assert vals == pytest.approx([0.5, 0.2], abs=1 / 255)
    (d / "manifest.txt").write_text("zzz.png\n")
    with pytest.raises(FormatError):
        list_frames(str(d))


def test_frame_dir_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(UsageError):
        read_frames(str(tmp_path / "empty"))
    with pytest.raises(UsageError):
        read_frames(str(tmp_path / "nope"))
    d = tmp_path / "mixed"
    d.mkdir()
    write_image(str(d / "0.png"), np.zeros((8, 8)))
    write_image(str(d / "1.png"), np.zeros((8, 9)))
    with pytest.raises(StructureError, match="1.png"):
        read_frames(str(d))


def test_flow_to_color():
    f = FlowField.constant((8, 8), 1.0, 0.0)
    f.valid[0, 0] = False
    c = flow_to_color(f)
    assert c.shape == (8, 8, 3) and np.all(c[0, 0] == 0)
    assert c.min() >= 0 and c.max() <= 1
    assert np.allclose(flow_to_color(FlowField.constant((4, 4)))[1, 1], 1.0)
