import numpy as np

from nss3dqa.color_features import DELTA, WHITE_XYZ, f_lab, rgb_to_lab


def test_white_and_black():
    lab = rgb_to_lab(np.array([[255, 255, 255], [0, 0, 0]], dtype=np.uint8))
    # White: f(1) = 1 -> L = 100, A = B = 0 exactly.
    assert lab.l[0] == 100.0
    assert lab.a[0] == 0.0
    assert lab.b[0] == 0.0
    # Black: f(0) = 4/29 -> 116 * 4/29 - 16 = 0 exactly in the formula.
    np.testing.assert_allclose(lab.l[1], 0.0, atol=1e-12)
    assert lab.a[1] == 0.0
    assert lab.b[1] == 0.0


def test_gray_axis_achromatic():
    grays = np.stack([np.arange(256)] * 3, axis=1).astype(np.uint8)
    lab = rgb_to_lab(grays)
    np.testing.assert_allclose(lab.a, 0.0, atol=1e-9)
    np.testing.assert_allclose(lab.b, 0.0, atol=1e-9)
    # L increases monotonically with gray level.
    assert np.all(np.diff(lab.l) > 0)


def test_transfer_function_continuity():
    t0 = DELTA ** 3
    eps = 1e-12
    below = f_lab(t0 - eps)
    above = f_lab(t0 + eps)
    assert abs(above - below) <= 1e-9
    np.testing.assert_allclose(f_lab(t0), DELTA, atol=1e-12)


def test_linear_branch_value():
    t = DELTA ** 3 / 2.0
    expected = t / (3.0 * DELTA ** 2) + 4.0 / 29.0
    np.testing.assert_allclose(f_lab(t), expected, atol=1e-15)


def test_white_reference_is_matrix_row_sums():
    from nss3dqa.color_features import RGB_TO_XYZ
    np.testing.assert_allclose(WHITE_XYZ, RGB_TO_XYZ.sum(axis=1))


def test_primaries_are_chromatic():
    lab = rgb_to_lab(np.array([[255, 0, 0], [0, 255, 0], [0, 0, 255]],
                              dtype=np.uint8))
    assert lab.a[0] > 0      # red: positive A
    assert lab.a[1] < 0      # green: negative A
    assert lab.b[2] < 0      # blue: negative B
    assert np.all(np.abs(np.concatenate([lab.a, lab.b])) > 1.0)
