import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from phaseqrng.randomness import (
    BitStats,
    PValue,
    ent_battery,
    ks_statistic,
    ks_uniformity,
    monobit_test,
    monte_carlo_pi,
    run_tests,
    runs_test,
    write_report,
)

bit_lists = st.lists(st.integers(0, 1), min_size=100, max_size=600)


def alternating(n):
    return np.tile(np.array([0, 1], np.uint8), n // 2)


class TestEnt:
    def test_alternating(self):
        r = ent_battery(alternating(10_000))
        assert r.arithmetic_mean == 0.5
        assert r.entropy_bits_per_bit == 1.0
        assert r.chi_square == 0.0
        assert r.serial_correlation == pytest.approx(-1.0, abs=1e-15)

    def test_all_zeros(self):
        r = ent_battery(np.zeros(1000, np.uint8))
        assert r.entropy_bits_per_bit == 0.0 and r.arithmetic_mean == 0.0
        assert math.isnan(r.serial_correlation) and not r.serial_correlation_defined

    def test_too_short(self):
        with pytest.raises(ValueError):
            ent_battery([1])
        r = ent_battery([0, 1, 1])
        assert not r.monte_carlo_defined

    def test_chi_square_tail_reproduces_reported_pair(self):
        # chi^2 = 1.84 on 1 degree of freedom is exceeded 17.50 % of the time
        assert float(mp.erfc(mp.sqrt(mp.mpf("1.84") / 2))) == pytest.approx(0.1750, abs=5e-5)
        bits = np.zeros(10_000, np.uint8)
        # 5068 ones of 10000: chi^2 = 2 * 68^2 / 5000 = 1.8496
        bits[:5068] = 1
        r = ent_battery(bits)
        assert r.chi_square == pytest.approx(1.8496, rel=1e-12)
        assert r.chi_square_excess_prob == pytest.approx(float(mp.erfc(mp.sqrt(mp.mpf("1.8496") / 2))), rel=1e-9)

    def test_monte_carlo_convention(self):
        # group 1: X = Y = 0 (inside); group 2: X = Y = 2^24 - 1 (outside)
        data = bytes([0] * 6 + [255] * 6)
        bits = np.unpackbits(np.frombuffer(data, np.uint8))
        assert monte_carlo_pi(bits) == 2.0
        # on the circle edge with Y = 0 is not strictly inside
        edge = np.unpackbits(np.frombuffer(bytes([255, 255, 255, 0, 0, 0]), np.uint8))
        assert monte_carlo_pi(edge) == 0.0
        # trailing partial group ignored
        assert monte_carlo_pi(np.r_[bits, np.ones(47, np.uint8)]) == 2.0

    def test_byte_chi_square(self):
        bits = np.unpackbits(np.arange(256, dtype=np.uint8))
        r = ent_battery(bits)
        assert r.chi_square_bytes == 0.0

    @given(bit_lists)
    def test_ranges(self, bits):
        r = ent_battery(bits)
        assert 0 <= r.entropy_bits_per_bit <= 1 and 0 <= r.arithmetic_mean <= 1
        assert r.chi_square >= 0 and 0 <= r.chi_square_excess_prob <= 1
        if r.serial_correlation_defined:
            assert -1 - 1e-12 <= r.serial_correlation <= 1 + 1e-12

    @given(bit_lists)
    def test_complement_symmetry(self, bits):
        b = np.array(bits, np.uint8)
        a, c = ent_battery(b), ent_battery(1 - b)
        assert c.entropy_bits_per_bit == pytest.approx(a.entropy_bits_per_bit, abs=1e-15)
        assert c.chi_square == pytest.approx(a.chi_square, abs=1e-12)
        assert c.arithmetic_mean == pytest.approx(1 - a.arithmetic_mean, abs=1e-15)
        if a.serial_correlation_defined:
            assert abs(c.serial_correlation) == pytest.approx(abs(a.serial_correlation), abs=1e-12)
        assert monobit_test(1 - b).value == monobit_test(b).value

    def test_permutation_sensitivity(self, rng):
        b = np.repeat(rng.integers(0, 2, 500).astype(np.uint8), 4)
        p = rng.permutation(b)
        a, c = ent_battery(b), ent_battery(p)
        assert a.entropy_bits_per_bit == c.entropy_bits_per_bit
        assert a.chi_square == c.chi_square and a.arithmetic_mean == c.arithmetic_mean
        assert a.serial_correlation != pytest.approx(c.serial_correlation, abs=0.1)
        assert runs_test(b).value != pytest.approx(runs_test(p).value, abs=1e-3)


class TestNist:
    def test_balanced_monobit(self):
        assert monobit_test(alternating(1000)).value == 1.0

    def test_all_ones_monobit(self):
        p = monobit_test(np.ones(100, np.uint8)).value
        assert p == pytest.approx(1.5239706048321052132e-23, rel=1e-12)
        assert not PValue(p, "monobit").passes()

    def test_alternating_runs(self):
        assert runs_test(alternating(10_000)).value < 1e-100

    def test_runs_prerequisite(self):
        assert runs_test(np.zeros(1000, np.uint8)).value == 0.0

    def test_minimum_length(self):
        for fn in (monobit_test, runs_test):
            with pytest.raises(ValueError):
                fn(np.zeros(99, np.uint8))

    def test_runs_worked_value(self):
        # 1001101011 has 7 runs; repeats join 1|1 so 10 copies give 61
        bits = np.array([1, 0, 0, 1, 1, 0, 1, 0, 1, 1] * 10, np.uint8)
        st_ = BitStats.from_bits(bits)
        assert st_.runs == 61
        pi = 0.6
        z = abs(61 - 2 * 100 * pi * (1 - pi)) / (2 * math.sqrt(200) * pi * (1 - pi))
        assert runs_test(bits).value == pytest.approx(math.erfc(z), rel=1e-14)

    @given(bit_lists)
    def test_pvalues_in_range(self, bits):
        for fn in (monobit_test, runs_test):
            assert 0 <= fn(bits).value <= 1


class TestKs:
    def test_evenly_spread(self):
        assert ks_statistic([0.1, 0.3, 0.5, 0.7, 0.9]) == pytest.approx(0.1, abs=1e-15)
        assert ks_uniformity([0.1, 0.3, 0.5, 0.7, 0.9]).value > 0.99

    def test_degenerate_mass(self):
        p = ks_uniformity([0.999] * 100)
        assert ks_statistic([0.999] * 100) == pytest.approx(0.999)
        assert p.value < 1e-50

    def test_needs_five(self):
        with pytest.raises(ValueError):
            ks_uniformity([0.5] * 4)

    def test_matches_scipy_statistic(self, rng):
        for _ in range(50):
            u = rng.random(int(rng.integers(5, 200)))
            assert ks_statistic(u) == pytest.approx(stats.kstest(u, "uniform").statistic, rel=1e-12)

    def test_null_pass_rate(self):
        passes = [ks_uniformity(np.random.default_rng(s).random(1000)).value >= 0.01 for s in range(300)]
        assert np.mean(passes) >= 0.97


class TestBitStats:
    @given(bit_lists, st.integers(1, 99))
    def test_merge_matches_whole(self, bits, cut):
        b = np.array(bits, np.uint8)
        merged = BitStats.from_bits(b[:cut]).merge(BitStats.from_bits(b[cut:]))
        assert merged == BitStats.from_bits(b)

    def test_empty(self):
        with pytest.raises(ValueError):
            BitStats.from_bits([])


def test_pvalue_range():
    with pytest.raises(ValueError):
        PValue(1.5, "x")
    assert PValue(0.5, "x").passes() and not PValue(0.995, "x").passes()


def test_report_export(tmp_path, rng):
    bits = rng.integers(0, 2, 60_000).astype(np.uint8)
    report = run_tests(bits, block_bits=10_000)
    tests = {p.test for p in report.pvalues}
    assert tests == {"monobit", "runs", "ks_monobit", "ks_runs"}
    write_report(report, tmp_path / "tests")
    text = (tmp_path / "tests.txt").read_text()
    assert "ent.entropy_bits_per_bit = " in text and "pass.all = " in text
    csv_lines = (tmp_path / "tests.csv").read_text().splitlines()
    assert csv_lines[0] == "key,value" and len(csv_lines) == len(text.splitlines()) + 1
    strict = run_tests(bits, p_low=0.0, p_high=1.0)
    assert strict.passed
