import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specpower_trends.parser import MarketingClass, MonthYear, OsFamily, Vendor
from specpower_trends.trends import (DistributionSummary, EmptySelectionError, analyse, before, between,
                                     bin_by_year, bin_by_year_vendor, correlation_scan, eiq, era_mean,
                                     feature_share, idle_fraction, overall_efficiency, per_socket_power_at,
                                     relative_efficiency_at, since, submission_rate, top_k_vendor_counts, until)

from conftest import make_run


def run_in(year, vendor=Vendor.INTEL, idle=50.0, result_id=None, **kw):
    cls = MarketingClass.XEON if vendor is Vendor.INTEL else MarketingClass.EPYC
    return make_run(result_id or f"r-{year}-{vendor.value}-{idle}", idle=idle, vendor=vendor, marketing_class=cls,
                    hw_availability=MonthYear(year, 6), **kw)


def test_singleton_summary():
    (a,) = analyse([run_in(2020)])
    (summary,) = bin_by_year_vendor([a], idle_fraction).values()
    assert summary.n == 1
    assert summary.min == summary.max == summary.mean == summary.median == a.metrics.idle_fraction
    assert summary.std == 0


def test_summary_quantiles_interpolate_linearly():
    s = DistributionSummary.from_values([1, 2, 3, 4])
    assert (s.p25, s.median, s.p75) == (1.75, 2.5, 3.25)
    assert s.std == pytest.approx(np.std([1, 2, 3, 4]))
    assert DistributionSummary.from_values([1, 2, 3, 4], ddof=1).std == pytest.approx(np.std([1, 2, 3, 4], ddof=1))


def test_bins_are_keyed_by_year_and_vendor():
    runs = analyse([run_in(2019), run_in(2019, Vendor.AMD), run_in(2019, idle=60), run_in(2021, Vendor.AMD),
                    run_in(2021, Vendor.OTHER)])
    bins = bin_by_year_vendor(runs, idle_fraction)
    assert list(bins) == [(2019, Vendor.AMD), (2019, Vendor.INTEL), (2021, Vendor.AMD)]
    assert bins[(2019, Vendor.INTEL)].n == 2
    assert bin_by_year_vendor([], idle_fraction) == {}
    assert bin_by_year(runs, idle_fraction)[2021].n == 2


def test_pooled_levels_contribute_one_sample_each():
    runs = analyse([run_in(2015), run_in(2015, idle=70)])
    (summary,) = bin_by_year_vendor(runs, relative_efficiency_at(0.6, 0.7, 0.8, 0.9)).values()
    assert summary.n == 8


def test_era_predicates():
    assert until(2010)(2010) and not until(2010)(2011)
    assert since(2022)(2022) and not since(2022)(2021)
    assert before(2018)(2017) and not before(2018)(2018)
    assert between(2013, 2017)(2013) and between(2013, 2017)(2017) and not between(2013, 2017)(2018)


def test_era_mean():
    runs = analyse([run_in(2008, power=[200.0] * 10), run_in(2009, power=[300.0] * 10), run_in(2023)])
    assert era_mean(runs, until(2010), per_socket_power_at(1.0)) == 125.0
    (single,) = [a for a in runs if a.year == 2023]
    assert era_mean(runs, since(2022), overall_efficiency) == single.metrics.overall_efficiency
    with pytest.raises(EmptySelectionError):
        era_mean(runs, since(2030), overall_efficiency)


def test_top_k_examples():
    runs = analyse([run_in(2020, Vendor.AMD, idle=i + 1, ops=[10_000 * (10 - j) * (i + 1) for j in range(10)])
                    for i in range(3)] + [run_in(2020, Vendor.INTEL, idle=5)])
    (best,) = top_k_vendor_counts(runs, overall_efficiency, 1)
    top = max(runs, key=overall_efficiency)
    assert best is top.run.vendor
    assert top_k_vendor_counts(runs, overall_efficiency, len(runs)) == {Vendor.AMD: 3, Vendor.INTEL: 1}
    with pytest.raises(ValueError):
        top_k_vendor_counts(runs, overall_efficiency, len(runs) + 1)


def test_top_k_ties_break_by_result_id():
    runs = analyse([run_in(2020, Vendor.INTEL, result_id="b"), run_in(2020, Vendor.AMD, result_id="a")])
    assert top_k_vendor_counts(runs, overall_efficiency, 1) == {Vendor.AMD: 1}


def test_feature_share_split():
    runs = [run_in(2010, os_family=OsFamily.WINDOWS)] * 3 + [run_in(2012, os_family=OsFamily.LINUX)]
    runs += [run_in(2020, os_family=OsFamily.LINUX)] * 2
    assert feature_share([r for r in runs if r.hw_availability.year < 2018], lambda r: r.os_family,
                         per_year=False) == {"Linux": 0.25, "Windows": 0.75}
    per_year = feature_share(runs, lambda r: r.os_family)
    assert per_year == {2010: {"Windows": 1.0}, 2012: {"Linux": 1.0}, 2020: {"Linux": 1.0}}
    assert feature_share([], lambda r: r.vendor, per_year=False) == {}


def test_submission_rate():
    runs = [run_in(2013)] * 4 + [run_in(2015)] * 2 + [run_in(2019)]
    assert submission_rate(runs, 2013, 2017) == 6 / 5
    assert submission_rate(runs, 2014, 2014) == 0
    assert submission_rate(analyse(runs), 2013, 2019) == 1.0
    with pytest.raises(ValueError):
        submission_rate(runs, 2017, 2013)


def test_correlation_scan_shape():
    runs = analyse([run_in(2021, Vendor.AMD, idle=10 + i, cores_total=64 * (i % 2 + 1), cores_per_chip=32 * (i % 2 + 1),
                           threads_total=128 * (i % 2 + 1), cpu_nominal_mhz=2000 + 100 * i) for i in range(5)])
    scan = correlation_scan(runs)
    n = len(scan.features)
    assert scan.coefficient("cores_total", "cores_total") == 1
    assert scan.coefficient("sockets", "sockets") is None
    assert scan.coefficient("sockets", "idle_fraction") is None
    for i in range(n):
        for j in range(n):
            assert scan.matrix[i][j] == scan.matrix[j][i]
    stats = scan.vendor_stats["AMD"]["cpu_nominal_ghz"]
    assert stats.mean == pytest.approx(2.2) and stats.std == pytest.approx(np.std([2.0, 2.1, 2.2, 2.3, 2.4]))
    with pytest.raises(ValueError):
        correlation_scan(runs[:2])


# -- properties -------------------------------------------------------------

years = st.integers(2005, 2024)
vendors = st.sampled_from([Vendor.INTEL, Vendor.AMD])


@st.composite
def populations(draw, min_size=0):
    n = draw(st.integers(min_size, 30))
    out = []
    for i in range(n):
        watts = draw(st.lists(st.floats(20, 2000), min_size=10, max_size=10))
        ops = sorted(draw(st.lists(st.integers(1, 10_000_000), min_size=10, max_size=10)), reverse=True)
        out.append(run_in(draw(years), draw(vendors), idle=draw(st.floats(5, 500)), result_id=f"p-{i:03d}",
                          power=watts, ops=ops, os_family=draw(st.sampled_from(list(OsFamily)))))
    return analyse(out)


@given(populations())
def test_binning_is_a_partition(runs):
    bins = bin_by_year_vendor(runs, eiq)
    assert sum(s.n for s in bins.values()) == len(runs)
    for s in bins.values():
        assert s.n >= 1
        assert s.min <= s.p25 <= s.median <= s.p75 <= s.max


@given(populations())
def test_shares_sum_to_one(runs):
    for shares in feature_share(runs, lambda r: r.os_family).values():
        assert math.fsum(shares.values()) == pytest.approx(1.0, abs=1e-9)
    if runs:
        assert math.fsum(feature_share(runs, lambda r: r.vendor, per_year=False).values()) == pytest.approx(1, abs=1e-9)


@given(populations(min_size=1), st.data())
def test_top_k_sums_to_k(runs, data):
    k = data.draw(st.integers(1, len(runs)))
    assert sum(top_k_vendor_counts(runs, overall_efficiency, k).values()) == k


@given(populations(min_size=1), st.data())
def test_singleton_era_mean_is_the_value(runs, data):
    a = data.draw(st.sampled_from(runs))
    assert era_mean([a], since(a.year), idle_fraction) == a.metrics.idle_fraction
    assert era_mean([a], until(a.year), per_socket_power_at(0.2)) == a.metrics.per_socket_power[0.2]


@given(populations(min_size=3))
def test_correlation_matrix_is_symmetric_and_bounded(runs):
    scan = correlation_scan(runs)
    for i, row in enumerate(scan.matrix):
        for j, r in enumerate(row):
            assert r == scan.matrix[j][i]
            if r is not None:
                assert -1 <= r <= 1
                assert not math.isnan(r)
        if row[i] is not None:
            assert row[i] == pytest.approx(1.0)
