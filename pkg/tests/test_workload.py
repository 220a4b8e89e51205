import pytest
from hypothesis import given, strategies as st

from underradar.simcore import SEC, RngStream
from underradar.workload import (EmpiricalCdf, load_cdf_table, poisson_flows, size_dist,
                                 websearch_cdf)


def test_cdf_sampling_interpolates():
    cdf = EmpiricalCdf((0.0, 100.0, 300.0), (0.0, 0.5, 1.0))
    assert cdf.sample(0.25) == pytest.approx(50.0)
    assert cdf.sample(0.75) == pytest.approx(200.0)
    assert cdf.mean() == pytest.approx(0.5 * 50 + 0.5 * 200)


@pytest.mark.parametrize("sizes,probs", [((1.0,), (1.0,)), ((2.0, 1.0), (0.0, 1.0)),
                                         ((1.0, 2.0), (0.5, 0.4)), ((1.0, 2.0), (0.0, 0.9))])
def test_cdf_validation(sizes, probs):
    with pytest.raises(ValueError):
        EmpiricalCdf(sizes, probs)


def test_table_parser_skips_comments():
    cdf = load_cdf_table("# size prob\n0 0\n\n10 0.5  # half\n20 1\n")
    assert cdf.sizes == (0.0, 10.0, 20.0)


def test_websearch_table_shape():
    cdf = websearch_cdf()
    assert cdf.probs[-1] == 1.0
    assert 1.5e6 < cdf.mean() < 1.8e6


@given(st.floats(0.0, 1.0))
def test_samples_stay_in_support(u):
    cdf = websearch_cdf()
    assert cdf.sizes[0] <= cdf.sample(u) <= cdf.sizes[-1]


def test_size_dist_constant_and_scaled():
    assert size_dist(5000).draw(RngStream(1, "x")) == 5000
    d = size_dist("websearch", 0.1)
    assert d.mean() == pytest.approx(websearch_cdf().mean() * 0.1)
    with pytest.raises(ValueError):
        size_dist("hadoop")


def test_poisson_rate_matches_offered_load():
    hosts = [f"h{i}" for i in range(8)]
    sizes = size_dist(10_000)
    flows = poisson_flows(hosts, RngStream(4, "w"), load=0.5, link_bps=1e7, sizes=sizes,
                          start=0, stop=20 * SEC)
    offered = sum(f.size for f in flows) * 8 / 20 / len(hosts)
    assert offered == pytest.approx(0.5 * 1e7, rel=0.1)
    assert all(f.src != f.dst for f in flows)
    assert [f.start for f in flows] == sorted(f.start for f in flows)


def test_poisson_rejects_bad_load():
    with pytest.raises(ValueError):
        poisson_flows(["a", "b"], RngStream(1, "w"), load=0.0, link_bps=1e6,
                      sizes=size_dist(100), start=0, stop=SEC)
