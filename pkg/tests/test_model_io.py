import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nss3dqa.errors import ModelFormatError
from nss3dqa.model_io import (ColoredMesh, ColoredPointCloud, load_model,
                              parse_obj, parse_ply, write_ply)

ASCII_CLOUD = b"""ply
format ascii 1.0
element vertex 2
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
end_header
0 0 0 255 0 0
1.5 -2 0.25 0 255 128
"""

ASCII_MESH = b"""ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
element face 1
property list uchar int vertex_indices
end_header
0 0 0 255 255 255
1 0 0 10 20 30
0 1 0 1 2 3
3 0 1 2
"""


def test_parse_ascii_cloud():
    m = parse_ply(ASCII_CLOUD)
    assert isinstance(m, ColoredPointCloud)
    assert m.count == 2
    np.testing.assert_array_equal(m.positions[1], [1.5, -2.0, 0.25])
    np.testing.assert_array_equal(m.colors, [[255, 0, 0], [0, 255, 128]])


def test_parse_ascii_mesh():
    m = parse_ply(ASCII_MESH)
    assert isinstance(m, ColoredMesh)
    np.testing.assert_array_equal(m.faces, [[0, 1, 2]])
    np.testing.assert_array_equal(m.vertex_colors[2], [1, 2, 3])


def test_unknown_scalar_property_skipped():
    data = b"""ply
format ascii 1.0
element vertex 1
property float x
property float y
property float z
property float nx
property uchar red
property uchar green
property uchar blue
end_header
1 2 3 0.5 10 20 30
"""
    m = parse_ply(data)
    np.testing.assert_array_equal(m.positions[0], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(m.colors[0], [10, 20, 30])


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: d.replace(b"ply\n", b"plx\n"), "magic"),
    (lambda d: d.replace(b"format ascii 1.0", b"format binary_big_endian 1.0"),
     "binary_big_endian"),
    (lambda d: d[:-22], "truncated"),  # drop the whole last vertex line
    (lambda d: d.replace(b"property uchar red\n", b""), "color"),
])
def test_parse_errors(mutate, needle):
    with pytest.raises(ModelFormatError) as exc:
        parse_ply(mutate(ASCII_CLOUD))
    assert needle in str(exc.value).lower()


def test_non_triangle_face_rejected():
    data = ASCII_MESH.replace(b"element vertex 3", b"element vertex 4")
    data = data.replace(b"3 0 1 2\n", b"0.5 0.5 0 9 9 9\n4 0 1 2 3\n")
    with pytest.raises(ModelFormatError, match="triangle"):
        parse_ply(data)


def test_face_index_out_of_range():
    data = ASCII_MESH.replace(b"3 0 1 2", b"3 0 1 9")
    with pytest.raises(ModelFormatError):
        parse_ply(data)


def test_binary_truncation():
    m = parse_ply(ASCII_MESH)
    blob = write_ply(m, "binary_le")
    with pytest.raises(ModelFormatError, match="truncated"):
        parse_ply(blob[:-1])


def test_cross_encoding_equality():
    for src in (ASCII_CLOUD, ASCII_MESH):
        m = parse_ply(src)
        a = parse_ply(write_ply(m, "ascii"))
        b = parse_ply(write_ply(m, "binary_le"))
        assert a == m
        assert b == m


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(
    st.floats(-1e6, 1e6, width=32), st.floats(-1e6, 1e6, width=32),
    st.floats(-1e6, 1e6, width=32),
    st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)),
    min_size=1, max_size=40))
def test_roundtrip_property(rows):
    pos = np.array([r[:3] for r in rows], dtype=np.float32).astype(np.float64)
    col = np.array([r[3:] for r in rows], dtype=np.uint8)
    m = ColoredPointCloud(pos, col)
    for enc in ("ascii", "binary_le"):
        assert parse_ply(write_ply(m, enc)) == m


@settings(max_examples=40, deadline=None)
@given(st.binary(min_size=0, max_size=300))
def test_fuzz_no_crash(blob):
    try:
        parse_ply(b"ply\nformat ascii 1.0\n" + blob)
    except ModelFormatError:
        pass
    try:
        parse_obj(blob)
    except ModelFormatError:
        pass


def test_obj_with_colors():
    data = b"""# comment
v 0 0 0 1 0 0
v 1 0 0 0 0.5 0
v 0 1 0 0 0 1
f 1 2 3
"""
    m = parse_obj(data)
    assert isinstance(m, ColoredMesh)
    np.testing.assert_array_equal(m.faces, [[0, 1, 2]])
    np.testing.assert_array_equal(m.vertex_colors,
                                  [[255, 0, 0], [0, 128, 0], [0, 0, 255]])


def test_obj_without_colors_defaults_white():
    m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 3/3\n")
    assert np.all(m.vertex_colors == 255)
    np.testing.assert_array_equal(m.faces, [[0, 1, 2]])


def test_obj_mixed_colors_error():
    with pytest.raises(ModelFormatError, match="mixed"):
        parse_obj(b"v 0 0 0 1 0 0\nv 1 0 0\nv 0 1 0 0 1 0\nf 1 2 3\n")


def test_obj_out_of_range_face():
    with pytest.raises(ModelFormatError, match="out of range"):
        parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n")


def test_obj_color_rounding_half_up():
    m = parse_obj(b"v 0 0 0 0.5 0.002 1\nv 1 0 0 0 0 0\nv 0 1 0 0 0 0\nf 1 2 3\n")
    # 0.5*255 = 127.5 rounds half-up to 128; 0.002*255 = 0.51 rounds to 1
    np.testing.assert_array_equal(m.vertex_colors[0], [128, 1, 255])


def test_load_model_dispatch(tmp_path):
    m = parse_ply(ASCII_MESH)
    p = tmp_path / "m.ply"
    p.write_bytes(write_ply(m, "binary_le"))
    assert load_model(p) == m
    o = tmp_path / "m.obj"
    o.write_bytes(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    assert isinstance(load_model(o), ColoredMesh)


def test_degenerate_face_validation():
    with pytest.raises(ModelFormatError, match="repeats"):
        ColoredMesh(np.zeros((3, 3)), np.zeros((3, 3), dtype=np.uint8),
                    np.array([[0, 1, 1]]))
