import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from tlsdet.core import (AttentionMap, CountGrid, DensityMap, GridSpec, Label, MultiChannelImage,
                         NucleusRecord, NucleusTable)
from tlsdet.density import assemble_input, count_nuclei, lda, mean_pool, normalize_density
from tlsdet.errors import DimMismatch, OutOfBounds

L, NL = Label.LYMPHOCYTE, Label.NON_LYMPHOCYTE
SPEC = GridSpec(64, 64, 1.0, 32)


def _counts(arr):
    arr = np.asarray(arr)
    return CountGrid(arr, GridSpec(arr.shape[1], arr.shape[0], 1.0, 1))


def test_single_lymphocyte():
    g = count_nuclei([NucleusRecord(10.0, 10.0, L)], SPEC)
    assert g.values.tolist() == [[1, 0], [0, 0]]


def test_empty_list():
    assert count_nuclei([], SPEC).values.tolist() == [[0, 0], [0, 0]]


def test_label_filter():
    nuclei = [NucleusRecord(1.0, 1.0, L), NucleusRecord(5.0, 9.0, L), NucleusRecord(3.0, 3.0, NL)]
    assert count_nuclei(nuclei, SPEC, {L}).values[0, 0] == 2
    assert count_nuclei(nuclei, SPEC, {L, NL}).values[0, 0] == 3


def test_binning_uses_pitch_and_floor():
    spec = GridSpec(64, 64, 0.5, 32)  # one patch = 16 um
    g = count_nuclei([NucleusRecord(15.99, 0.0, L), NucleusRecord(16.0, 16.0, L)], spec)
    assert g.values.tolist() == [[1, 0], [0, 1]]


def test_out_of_bounds_reported():
    with pytest.raises(OutOfBounds):
        count_nuclei([NucleusRecord(64.0, 1.0, L)], SPEC)
    # non-counted classes still have to lie on the slide
    with pytest.raises(OutOfBounds):
        count_nuclei([NucleusRecord(1.0, 70.0, NL)], SPEC, {L})


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(0, 99.99), st.floats(0, 79.99), st.sampled_from(list(Label))),
                max_size=200),
       st.integers(1, 40))
def test_total_equals_filtered_count(pts, d):
    spec = GridSpec(100, 80, 1.0, d)
    table = NucleusTable.from_arrays([p[0] for p in pts], [p[1] for p in pts],
                                     np.array([int(p[2]) for p in pts], dtype=np.int8))
    g = count_nuclei(table, spec)
    assert g.total == sum(p[2] is L for p in pts)


def test_normalize_hand_example():
    d = normalize_density(_counts([[0, 4], [8, 8]]))
    assert d.values.tolist() == [[0.0, 127.5], [255.0, 255.0]]


def test_normalize_uniform_is_zero():
    assert not normalize_density(_counts(np.full((3, 3), 7))).values.any()


def test_normalize_identity_on_0_to_255():
    n = np.arange(256).reshape(16, 16)
    assert np.array_equal(normalize_density(_counts(n)).values, n.astype(np.float32))


@given(hnp.arrays(np.int64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12),
                  elements=st.integers(0, 1000)))
def test_normalize_spans_full_range(n):
    d = normalize_density(_counts(n)).values
    if n.min() != n.max():
        assert d.min() == 0 and d.max() == 255
    assert ((d >= 0) & (d <= 255)).all()


@pytest.mark.parametrize("value, expected", [(0.0, 255.0), (255.0, 0.0), (127.5, 127.5)])
def test_lda_values(value, expected):
    dmap = DensityMap(np.full((1, 1), value), GridSpec(1, 1, 1.0, 1))
    assert lda(dmap).values[0, 0] == expected


@given(hnp.arrays(np.int64, (6, 6), elements=st.integers(0, 255 * 2 ** 16)))
def test_lda_involution_on_dyadic_values(k):
    # exact in float32 for multiples of 2**-16 up to 255
    vals = k / 2.0 ** 16
    dmap = DensityMap(vals, GridSpec(6, 6, 1.0, 1))
    back = lda(DensityMap(lda(dmap).values, dmap.spec))
    assert np.array_equal(back.values, dmap.values)


def test_lda_involution_on_normalized_maps(rng):
    dmap = normalize_density(_counts(rng.integers(0, 97, (20, 20))))
    back = lda(DensityMap(lda(dmap).values, dmap.spec)).values
    np.testing.assert_allclose(back, dmap.values, rtol=0, atol=np.spacing(np.float32(255)))


def test_mean_pool_block():
    img = MultiChannelImage(np.array([[0, 0], [255, 255]], dtype=float), ("G",))
    assert mean_pool(img, 2).values[0, 0, 0] == 127.5


def test_mean_pool_constant(rng):
    img = MultiChannelImage(np.full((7, 5, 3), 42.0))
    out = mean_pool(img, 3)
    assert out.shape == (3, 2) and (out.values == 42.0).all()


def test_mean_pool_partial_tile():
    # 3 rows x 2 cols, d=2: bottom output cell averages the single 1x2 last row
    img = MultiChannelImage(np.array([[10, 20], [30, 40], [100, 200]], dtype=float), ("G",))
    out = mean_pool(img, 2).values[:, :, 0]
    assert out.shape == (2, 1)
    assert out.tolist() == [[25.0], [150.0]]


def test_mean_pool_identity(rng):
    img = MultiChannelImage(rng.uniform(0, 255, (9, 11, 3)))
    assert np.array_equal(mean_pool(img, 1).values, img.values)


def test_mean_pool_preserves_mean_when_divisible(rng):
    img = MultiChannelImage(rng.uniform(0, 255, (32, 48, 3)))
    out = mean_pool(img, 8)
    np.testing.assert_allclose(out.values.mean(axis=(0, 1)), img.values.mean(axis=(0, 1)), rtol=1e-5)


def test_assemble_stacks_channels(rng):
    rgb = MultiChannelImage(rng.uniform(0, 255, (2, 2, 3)))
    att = AttentionMap(rng.uniform(0, 255, (2, 2)))
    out = assemble_input(rgb, att)
    assert out.values.shape == (2, 2, 4)
    assert out.channel_names == ("R", "G", "B", "LDA")
    assert np.array_equal(out.channel("LDA"), att.values)
    assert np.array_equal(out.values[:, :, :3], rgb.values)


def test_assemble_dim_mismatch():
    with pytest.raises(DimMismatch):
        assemble_input(MultiChannelImage(np.zeros((2, 2, 3))), AttentionMap(np.zeros((3, 3))))
