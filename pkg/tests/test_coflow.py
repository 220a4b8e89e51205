import math
import random

import pytest
from hypothesis import given, strategies as st

from underradar.coflow import (CoflowConfig, Strategy, _failed_coflows, _order_stats,
                               analytic_random_oracle, classify, rows_to_csv, run_trial, sweep)


def test_budget_uses_decimal_drop_rate():
    cfg = CoflowConfig(n=10_000, m=500, r=1, D=1e-4)
    assert cfg.packets == 5_000_000
    assert cfg.budget == 500
    assert CoflowConfig(n=10_000, m=500, r=2).budget == 1000


@pytest.mark.parametrize("r,F,targets", [(1, 1, 500), (2, 1, 500), (2, 5, 100), (1, 10, 50)])
def test_targeted_coflows(r, F, targets):
    assert CoflowConfig(r=r, F=F).targeted == targets


@pytest.mark.parametrize("bad", [dict(r=3), dict(F=0), dict(F=501), dict(p_mc=1.5), dict(D=-1),
                                 dict(trials=0), dict(n=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        CoflowConfig(**bad)


def test_perfect_knowledge_is_exact():
    res = run_trial(CoflowConfig(trials=3), Strategy.PERFECT)
    assert res.failed_fraction == 0.05 and res.stddev == 0.0
    assert res.budget_used == 500


def test_failed_coflow_counting():
    drops = [(0, 1, 0), (0, 1, 1), (0, 2, 0), (1, 5, 0), (1, 5, 1), (1, 6, 0), (1, 6, 1)]
    assert _failed_coflows(drops, r=2, F=1) == 2
    assert _failed_coflows(drops, r=2, F=2) == 1
    assert _failed_coflows(drops, r=1, F=2) == 2
    assert _failed_coflows(drops, r=1, F=3) == 0


def test_order_stats_are_sorted_uniforms():
    keys = list(_order_stats(2000, random.Random(3)))
    assert keys == sorted(keys) and 0 < keys[0] and keys[-1] < 1
    assert abs(sum(keys) / len(keys) - 0.5) < 0.03


def test_classify_misclassifies_at_rate():
    rng = random.Random(1)
    wrong = sum(classify((3, 4), 0.3, rng, 10_000, 500) != (3, 4) for _ in range(20_000))
    assert abs(wrong / 20_000 - 0.3) < 0.02
    assert classify((3, 4), 0.0, rng, 10, 5) == (3, 4)


def test_analytic_oracle_values():
    assert analytic_random_oracle(500, 1, 1e-4) == pytest.approx(1 - (1 - 1e-4) ** 500)
    assert analytic_random_oracle(500, 1, 1e-4, r=2) == pytest.approx(1 - (1 - 1e-8) ** 500)
    two = analytic_random_oracle(10, 2, 0.1)
    assert two == pytest.approx(1 - 0.9 ** 10 - 10 * 0.1 * 0.9 ** 9)
    assert analytic_random_oracle(10, 1, 0.0) == 0.0


def test_random_drop_matches_oracle_on_small_instance():
    cfg = CoflowConfig(n=2000, m=50, D=0.01, trials=40)
    res = run_trial(cfg, Strategy.RANDOM)
    oracle = analytic_random_oracle(50, 1, 0.01)
    assert abs(res.failed_fraction - oracle) < 4 * res.stddev / math.sqrt(cfg.trials) + 0.005


def test_runs_are_reproducible_and_seed_dependent():
    cfg = CoflowConfig(n=1000, m=100, D=1e-3, p_mc=0.3, r=2, trials=4)
    a = run_trial(cfg, Strategy.CLASSIFIER)
    assert a.per_trial == run_trial(cfg, Strategy.CLASSIFIER).per_trial
    from dataclasses import replace
    b = run_trial(replace(cfg, seed=2), Strategy.CLASSIFIER)
    assert a.per_trial != b.per_trial


@given(st.sampled_from([0.0, 0.2, 0.5, 1.0]), st.sampled_from([1, 2]), st.sampled_from([1, 2, 5]),
       st.sampled_from(list(Strategy)))
def test_budget_ceiling(p, r, F, strategy):
    cfg = CoflowConfig(n=500, m=50, r=r, F=F, D=2e-3, p_mc=p, trials=2)
    res = run_trial(cfg, strategy)
    assert all(d <= cfg.budget for d in res.drops_per_trial)
    assert 0.0 <= res.failed_fraction <= cfg.targeted / cfg.n + 1e-12 or strategy is Strategy.RANDOM


def test_failure_falls_as_misclassification_grows():
    base = CoflowConfig(n=2000, m=100, D=1e-3, r=2, trials=6)
    rows = sweep(base, [0.0, 0.3, 0.6, 1.0], rs=[2], Fs=[1], ms=[100])
    vals = [row["mean_failed_fraction"] for row in rows]
    assert vals == sorted(vals, reverse=True)


def test_hedging_dominates_single_copy():
    for p in (0.3, 1.0):
        one = run_trial(CoflowConfig(n=2000, m=100, D=1e-3, r=1, p_mc=p, trials=6))
        two = run_trial(CoflowConfig(n=2000, m=100, D=1e-3, r=2, p_mc=p, trials=6))
        assert two.failed_fraction <= one.failed_fraction


def test_sweep_csv_columns():
    rows = sweep(CoflowConfig(n=200, m=20, D=0.01, trials=2), [0.0], rs=[1], Fs=[1], ms=[20])
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "p_mc,r,F,m,D,n,mean_failed_fraction,stddev,budget_used"
