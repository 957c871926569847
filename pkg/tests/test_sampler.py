import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excursion_lab.errors import InputError
from excursion_lab.extremes import expected_longest
from excursion_lab.laws import Zeta
from excursion_lab.renewal_dp import longest_cdf_vector, renewal_mass
from excursion_lab.sampler import (
    OvershootState,
    PathSample,
    build_alias,
    make_stream,
    overshoot_step,
    run_experiment,
    run_overshoot_chain,
    sample_free,
    sample_pinned,
)


def test_streams_depend_on_seed_and_index():
    a = make_stream(7, 3).random(4)
    assert np.array_equal(a, make_stream(7, 3).random(4))
    assert not np.array_equal(a, make_stream(7, 4).random(4))
    assert not np.array_equal(a, make_stream(8, 3).random(4))
    make_stream(2**64 - 1, 0)
    with pytest.raises(InputError):
        make_stream(2**64, 0)
    with pytest.raises(InputError):
        make_stream(-1)


@given(w=st.lists(st.floats(0, 10), min_size=1, max_size=60).filter(lambda w: sum(w) > 0))
@settings(max_examples=100)
def test_alias_round_trip(w):
    w = np.array(w)
    a = build_alias(w)
    p = w / w.sum()
    np.testing.assert_allclose(a.pmf(), p, rtol=0, atol=1e-15)
    assert abs(a.pmf().sum() - 1) < 1e-14


def test_alias_model_table(zeta2_model):
    a = build_alias(zeta2_model.q_normalized)
    np.testing.assert_allclose(a.pmf(), zeta2_model.q_normalized, rtol=0, atol=1e-15)


def test_path_sample_structure(zeta2_model):
    s = sample_free(make_stream(1, 0), zeta2_model, 500)
    assert s.gamma == max(s.lengths) and s.total == sum(s.lengths) and s.k == len(s.lengths)
    assert s.total >= 500 and s.total - s.lengths[-1] < 500
    one = sample_free(make_stream(1, 1), zeta2_model, 1)
    assert one.k == 1


def test_free_mean_and_lln(zeta2_model):
    m = zeta2_model
    s = sample_free(make_stream(11), m, 10**6)
    q = m.q_normalized
    n = np.arange(1, q.size + 1)
    sd = math.sqrt(float(np.sum(n**2 * q)) - m.mu**2)
    se = sd / math.sqrt(s.k)
    assert abs(s.lengths.mean() - m.mu) < 4 * se
    assert s.k / 10**6 == pytest.approx(1 / m.mu, rel=4 * se / m.mu)


def test_pinned_first_step_twopoint(twopoint_model):
    # P(T_1 = 1) = Q(1) u(1) / u(2) = 4/7
    t = renewal_mass(twopoint_model, 2)
    n = 40000
    firsts = np.array([sample_pinned(make_stream(5, i), twopoint_model, t, 2).lengths[0] for i in range(n)])
    p = 4 / 7
    assert abs(np.mean(firsts == 1) - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_pinned_n1(zeta2_model):
    s = sample_pinned(make_stream(0, 0), zeta2_model, None, 1)
    assert list(s.lengths) == [1]


def composition_law(law, beta, N):
    K = law.pmf_array(np.arange(1, N + 1))
    out = {}
    for cuts in itertools.product((0, 1), repeat=N - 1):
        parts, last = [], 0
        for b, c in enumerate(cuts):
            if c:
                parts.append(b + 1 - last)
                last = b + 1
        parts.append(N - last)
        out[tuple(parts)] = math.exp(beta * len(parts)) * math.prod(K[p - 1] for p in parts)
    Z = math.fsum(out.values())
    return {c: w / Z for c, w in out.items()}


def test_pinned_composition_law(zeta2_model):
    N, n = 10, 10**5
    exact = composition_law(zeta2_model.law, zeta2_model.beta, N)
    t = renewal_mass(zeta2_model, N)
    seen = Counter(tuple(sample_pinned(make_stream(3, i), zeta2_model, t, N).lengths) for i in range(n))
    tv = 0.5 * sum(abs(seen.get(c, 0) / n - p) for c, p in exact.items())
    assert set(seen) <= set(exact)
    assert tv < 3 * math.sqrt(len(exact) / n)


def test_overshoot_step(zeta2_model):
    assert overshoot_step(OvershootState(3, 2), None, zeta2_model) == OvershootState(3, 1)
    s = overshoot_step(OvershootState(5, 0), make_stream(9), zeta2_model)
    assert s.j == s.i - 1 and 1 <= s.i <= zeta2_model.M
    with pytest.raises(InputError):
        OvershootState(2, 2)


def test_overshoot_chain_matches_step(zeta2_model):
    # the compiled chain and the per-step function consume the stream identically
    run = run_overshoot_chain(zeta2_model, 200, seed=4)
    rng = make_stream(4)
    s = OvershootState(1, 0)
    zeros = 0
    for _ in range(200):
        s = overshoot_step(s, rng, zeta2_model)
        zeros += s.j == 0
    assert run.final == s and run.zero_visits == zeros


def test_overshoot_chain_stationarity(zeta2_model):
    run = run_overshoot_chain(zeta2_model, 10**6, seed=2)
    p = 1 / zeta2_model.mu
    assert abs(run.zero_fraction - p) <= 3 * math.sqrt(p * (1 - p) / run.steps)
    tv = 0.5 * np.abs(run.renewal_marginal - zeta2_model.q_normalized).sum()
    assert tv <= 0.02


@pytest.mark.parametrize("mode", ["free", "pinned"])
def test_run_experiment_deterministic(zeta2_model, mode):
    a = run_experiment(zeta2_model, mode, 300, 500, seed=7, workers=1)
    b = run_experiment(zeta2_model, mode, 300, 500, seed=7, workers=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, run_experiment(zeta2_model, mode, 300, 500, seed=8))
    if mode == "pinned":
        assert np.all(a[:, 2] == 300)
    else:
        assert np.all(a[:, 2] >= 300)


def test_pinned_gamma_law_small_tv(zeta2_model):
    N, n = 200, 20000
    rows = run_experiment(zeta2_model, "pinned", N, n, seed=1, workers=4)
    cdf = longest_cdf_vector(zeta2_model, N)
    emp = np.bincount(rows[:, 0], minlength=cdf.size)[: cdf.size] / n
    tv = 0.5 * np.abs(emp[1:] - np.diff(cdf)).sum()
    assert tv < 0.03


def test_free_vs_pinned_mean_report(zeta2_model, capsys):
    N = 10**4
    free = run_experiment(zeta2_model, "free", N, 2000, seed=3, workers=4)
    exact = expected_longest(zeta2_model, N)
    with capsys.disabled():
        print(f"\nfree-mode mean gamma {free[:, 0].mean():.3f} vs exact pinned {exact:.3f} at N={N}")
    assert abs(free[:, 0].mean() - exact) < 1.0
