import numpy as np
import pytest

import reference
from ca_segment import (
    BALANCED,
    ContractError,
    MultibandImage,
    SumRange,
    classify_spectral_region,
    compute_sum_histogram,
    generate_seeds,
    select_ranges,
)


def image_from(data, depth=8):
    dtype = np.uint8 if depth == 8 else np.uint16
    return MultibandImage(data=np.asarray(data, dtype=dtype), depth=depth)


class TestSumHistogram:
    def test_direct_sums(self):
        image = image_from([[[1, 2], [3, 4]]])
        hist = compute_sum_histogram(image)
        assert hist.shape == (2 * 255 + 1,)
        assert hist[3] == 1 and hist[7] == 1
        assert hist.sum() == 2

    def test_uniform_spike(self):
        image = image_from(np.full((4, 5, 3), 9))
        hist = compute_sum_histogram(image)
        assert hist[27] == 20
        assert hist.sum() == 20

    def test_random_against_loop_oracle(self):
        rng = np.random.default_rng(11)
        image = image_from(rng.integers(0, 256, size=(16, 16, 3)))
        hist = compute_sum_histogram(image)
        assert hist.sum() == 256
        assert hist.tolist() == reference.histogram_by_loop(image.data, image.depth)

    def test_sixteen_bit_domain(self):
        image = image_from(np.full((1, 1, 2), 65535), depth=16)
        hist = compute_sum_histogram(image)
        assert hist.shape == (2 * 65535 + 1,)
        assert hist[131070] == 1


class TestSelectRanges:
    def test_flat_histogram_falls_back_to_full_domain(self):
        ranges = select_ranges(np.full(100, 5))
        assert ranges == [SumRange(0, 99, 0)]

    def test_two_spikes(self):
        hist = np.zeros(256, dtype=np.int64)
        hist[50] = 100
        hist[200] = 80
        ranges = select_ranges(hist)
        assert [r.peak for r in ranges] == [50, 200]
        assert ranges == [SumRange(45, 55, 50), SumRange(195, 205, 200)]

    def test_close_spikes_collapse_to_one_range(self):
        # smoothing fuses the two spikes into one hump centered between them
        hist = np.zeros(256, dtype=np.int64)
        hist[50] = 100
        hist[53] = 80
        ranges = select_ranges(hist, min_separation=10)
        assert len(ranges) == 1
        assert ranges[0].peak == 51
        assert ranges[0].contains(50) and ranges[0].contains(53)

    def test_close_spikes_keep_taller_unsmoothed(self):
        hist = np.zeros(256, dtype=np.int64)
        hist[50] = 100
        hist[53] = 80
        ranges = select_ranges(hist, smooth_window=1, min_separation=10)
        assert len(ranges) == 1
        assert ranges[0].peak == 50

    def test_overlapping_ranges_merge(self):
        hist = np.zeros(256, dtype=np.int64)
        hist[50] = 100
        hist[60] = 90
        # separation 10 keeps both; half_width 5 makes the spans touch at 55
        ranges = select_ranges(hist, smooth_window=1, min_separation=10, half_width=5)
        assert ranges == [SumRange(45, 65, 50)]

    def test_clamping_at_domain_edges(self):
        hist = np.zeros(100, dtype=np.int64)
        hist[1] = 50
        hist[98] = 40
        ranges = select_ranges(hist, smooth_window=1)
        assert ranges[0].lo == 0 and ranges[0].peak == 1
        assert ranges[-1].hi == 99 and ranges[-1].peak == 98

    def test_max_peaks_keeps_tallest(self):
        hist = np.zeros(300, dtype=np.int64)
        for i, height in enumerate([50, 90, 70, 80], start=1):
            hist[i * 50] = height
        ranges = select_ranges(hist, smooth_window=1, max_peaks=2)
        assert sorted(r.peak for r in ranges) == [100, 200]

    @pytest.mark.parametrize("bad", [
        dict(smooth_window=4), dict(smooth_window=0), dict(prominence_frac=0.0),
        dict(prominence_frac=1.0), dict(min_separation=0), dict(half_width=0),
        dict(max_peaks=0),
    ])
    def test_parameter_validation(self, bad):
        with pytest.raises(ContractError):
            select_ranges(np.ones(10, dtype=np.int64), **bad)

    def test_random_against_scan_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            length = int(rng.integers(20, 200))
            hist = rng.integers(0, 40, size=length)
            for _ in range(int(rng.integers(0, 5))):
                hist[int(rng.integers(0, length))] += int(rng.integers(50, 300))
            window = int(rng.choice([1, 3, 5, 7]))
            params = dict(
                smooth_window=window,
                prominence_frac=float(rng.uniform(0.01, 0.6)),
                min_separation=int(rng.integers(1, 25)),
                half_width=int(rng.integers(1, 12)),
                max_peaks=int(rng.integers(1, 9)),
            )
            got = [(r.lo, r.hi, r.peak) for r in select_ranges(hist, **params)]
            assert got == reference.select_ranges_by_scan(hist, **params)


class TestClassify:
    def test_equal_levels_balanced(self):
        assert classify_spectral_region((100, 100, 100), 0.1) == BALANCED

    def test_dominant_band(self):
        assert classify_spectral_region((200, 50, 50), 0.1) == 0

    def test_small_spread_balanced(self):
        assert classify_spectral_region((120, 110, 115), 0.1) == BALANCED

    def test_all_zero_balanced(self):
        assert classify_spectral_region((0, 0, 0), 0.1) == BALANCED

    def test_tie_breaks_to_lowest_band(self):
        assert classify_spectral_region((9, 200, 200), 0.1) == 1

    def test_scale_covariance(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            v = rng.integers(0, 256, size=int(rng.integers(1, 5)))
            for k in (2, 3, 10):
                assert classify_spectral_region(k * v) == classify_spectral_region(v)

    def test_random_against_rule_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            v = rng.integers(0, 256, size=int(rng.integers(1, 6)))
            delta = float(rng.uniform(0.0, 0.5))
            assert classify_spectral_region(v, delta) == reference.classify_by_rule(v, delta)


class TestGenerateSeeds:
    def test_uniform_single_label(self):
        image = image_from(np.full((4, 6, 3), 50))
        seeds = generate_seeds(image, [SumRange(140, 160, 150)])
        assert len(seeds) == 24
        assert seeds.label_count == 1
        assert seeds.label_table == {(0, BALANCED): 1}

    def test_two_halves_two_dominant_labels(self):
        data = np.empty((4, 8, 3), dtype=np.uint8)
        data[:, :4] = (200, 10, 10)
        data[:, 4:] = (10, 200, 10)
        image = image_from(data)
        seeds = generate_seeds(image, [SumRange(0, 765, 220)])
        assert seeds.label_count == 2
        assert seeds.label_table == {(0, 0): 1, (0, 1): 2}
        assert len(seeds) == 32

    def test_stride_subsampling(self):
        image = image_from(np.full((4, 4, 3), 50))
        seeds = generate_seeds(image, [SumRange(0, 765, 150)], stride=2)
        assert len(seeds) == 4
        assert seeds.pixel_indices.tolist() == [0, 2, 8, 10]

    def test_empty_range_list_rejected(self):
        image = image_from(np.full((2, 2, 3), 50))
        with pytest.raises(ContractError):
            generate_seeds(image, [])

    def test_overlapping_ranges_rejected(self):
        image = image_from(np.full((2, 2, 3), 50))
        with pytest.raises(ContractError):
            generate_seeds(image, [SumRange(0, 100, 50), SumRange(100, 200, 150)])

    def test_out_of_range_pixels_unseeded(self):
        data = np.zeros((1, 3, 1), dtype=np.uint8)
        data[0, 1, 0] = 200
        image = image_from(data)
        seeds = generate_seeds(image, [SumRange(150, 255, 200)])
        assert seeds.pixel_indices.tolist() == [1]

    def test_random_against_loop_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            h, w = int(rng.integers(1, 12)), int(rng.integers(1, 12))
            bands = int(rng.integers(1, 4))
            image = image_from(rng.integers(0, 256, size=(h, w, bands)))
            top = bands * 255
            cut_a, cut_b = sorted(rng.integers(0, top + 1, size=2).tolist())
            ranges = [SumRange(0, cut_a, 0)]
            if cut_b > cut_a + 1:
                peak = cut_a + 1 + (cut_b - cut_a - 1) // 2
                ranges.append(SumRange(cut_a + 1, cut_b, peak))
            stride = int(rng.integers(1, 4))
            delta = float(rng.uniform(0.0, 0.4))
            seeds = generate_seeds(image, ranges, delta_rel=delta, stride=stride)
            entries, table = reference.seeds_by_loop(
                image.data, [(r.lo, r.hi) for r in ranges], delta, stride
            )
            assert list(seeds.entries()) == entries
            assert seeds.label_table == table

    def test_label_count_bound(self):
        rng = np.random.default_rng(19)
        image = image_from(rng.integers(0, 256, size=(16, 16, 3)))
        hist = compute_sum_histogram(image)
        ranges = select_ranges(hist)
        seeds = generate_seeds(image, ranges)
        assert seeds.label_count <= len(ranges) * (image.bands + 1)
        assert len(seeds) <= 16 * 16

    def test_full_domain_stride_one_seeds_everything(self):
        rng = np.random.default_rng(29)
        image = image_from(rng.integers(0, 256, size=(7, 5, 2)))
        seeds = generate_seeds(image, [SumRange(0, 510, 100)])
        assert len(seeds) == 35

    def test_determinism(self):
        rng = np.random.default_rng(31)
        image = image_from(rng.integers(0, 256, size=(9, 9, 3)))
        ranges = select_ranges(compute_sum_histogram(image))
        a = generate_seeds(image, ranges)
        b = generate_seeds(image, ranges)
        assert (a.pixel_indices == b.pixel_indices).all()
        assert (a.labels == b.labels).all()
        assert a.label_table == b.label_table
