import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from corner_flow import extension as ext
from corner_flow.errors import KernelUnderresolved

finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 9), elements=finite), st.sampled_from(["odd", "even"]))
def test_extension_parity_is_exact(field, parity):
    e = ext.extend(field, parity)
    assert e.mirror_residual() == 0.0
    assert e.values.shape == (4, 17)
    if parity == "even":
        assert np.array_equal(e.restrict(), field)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 21), elements=finite), st.sampled_from(["odd", "even"]), st.integers(2, 5))
def test_mollification_preserves_parity(field, parity, k):
    h = 0.05
    e = ext.mollify_z2(ext.extend(field, parity), ext.Mollifier(k * h, h))
    assert e.mirror_residual() == 0.0


def test_kernel_has_unit_mass_and_is_symmetric():
    m = ext.Mollifier(0.2, 0.02)
    assert m.mass == pytest.approx(1.0, abs=1e-14)
    assert np.array_equal(m.kernel, m.kernel[::-1])


def test_underresolved_kernel():
    with pytest.raises(KernelUnderresolved):
        ext.Mollifier(0.03, 0.02)


def test_mollify_matches_direct_convolution(rng):
    h = 0.01
    m = ext.Mollifier(0.05, h)
    f = rng.normal(size=200)
    n = m.half_width
    ref = np.convolve(np.pad(f, n, mode="edge"), m.kernel * h, mode="valid")
    assert np.allclose(ext.mollify_z2(f, m), ref, atol=1e-13)


def test_constants_survive_mollification():
    m = ext.Mollifier(0.1, 0.01)
    out = ext.mollify_z2(np.full((3, 50), 2.5), m)
    assert np.max(np.abs(out - 2.5)) <= 1e-12


def test_odd_extension_zeroes_axis():
    e = ext.extend(np.array([1.0, 2.0, 3.0]), "odd")
    assert np.array_equal(e.values, [-3.0, -2.0, 0.0, 2.0, 3.0])


def test_lemma32_on_background_coefficients():
    shape = (10, 12)
    r = {"00": np.ones(shape), "01": np.zeros(shape), "02": np.zeros(shape),
         "11": -np.ones(shape), "12": np.zeros(shape), "22": -np.ones(shape)}
    rep = ext.check_lemma32(r, -np.ones(shape), np.zeros(shape), ext.Mollifier(0.04, 0.01), 0.0,
                            {"11": -1.0, "22": -1.0})
    assert rep.passed
    assert rep.to_dict()["items"]["parity"]


def test_lemma32_corner_slope_is_second_order_in_kernel_width():
    # bbar2 ~ c z2^3 near the corner: the mollified first difference grows like width^2
    z = np.arange(0, 1.0, 0.01)
    shape = (5, z.size)
    r = {"11": -np.ones(shape), "12": np.zeros(shape)}
    b2 = np.broadcast_to(0.1 * z**3, shape)
    diffs = []
    for width in (0.04, 0.08):
        rep = ext.check_lemma32(r, -np.ones(shape), b2, ext.Mollifier(width, 0.01), 1.0, {"11": -1.0})
        diffs.append(abs(rep.b2_corner_difference))
    assert rep.b2_corner == 0.0
    assert 3.0 < diffs[1] / diffs[0] < 4.5
