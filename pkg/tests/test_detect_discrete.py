import itertools
import math

import numpy as np
import pytest

import oracles
from wmdetect import Decision
from wmdetect.detect_discrete import (
    DetectorConfig,
    EmbedConstraint,
    detection_objective,
    individual_covertext_accepts,
    lambda_star_accepts,
    lambda_star_statistic,
    optimal_embed_discrete,
    optimal_embed_discrete_result,
    random_wm_accepts,
    universal_accepts,
)
from wmdetect.empirical import BINARY, WATERMARK, Alphabet, EmpiricalJoint, MemorylessSource
from wmdetect.errors import CapExceeded, DomainError, InfeasibleError

UNIFORM = MemorylessSource.uniform(BINARY)


def ks(lam):
    return DetectorConfig(lam, "known_source")


def image(u):
    return tuple((1 + a) // 2 for a in u)


def test_lambda_star_image_of_u():
    u = (1, -1) * 5
    expected = -10 * math.log(2) + 3 - 2 * math.log(11)
    j = EmpiricalJoint(WATERMARK, BINARY, [[0, 5], [5, 0]])
    assert expected < 0
    assert lambda_star_statistic(UNIFORM, j, 0.3) == pytest.approx(expected)
    assert lambda_star_accepts(UNIFORM, u, tuple(1 - b for b in image(u)), ks(0.3)) is Decision.H1


def test_lambda_star_independent_pair():
    u = (1, 1, -1, -1) * 50
    y = (0, 1, 0, 1) * 50
    assert lambda_star_accepts(UNIFORM, u, y, ks(0.3)) is Decision.H0


def test_lambda_star_huge_lambda():
    u = (1, -1, 1)
    assert lambda_star_accepts(UNIFORM, u, image(u), ks(1e6)) is Decision.H0


def test_lambda_star_zero_probability_symbol_is_h1():
    src = MemorylessSource(BINARY, (1.0, 0.0))
    assert lambda_star_accepts(src, (1, -1), (1, 1), ks(5.0)) is Decision.H1


def test_config_validation():
    with pytest.raises(DomainError):
        DetectorConfig(0.0)
    with pytest.raises(DomainError):
        DetectorConfig(0.1, "bogus")
    with pytest.raises(DomainError):
        universal_accepts((1,), (0,), ks(0.1), BINARY)


def test_universal_examples():
    cfg = DetectorConfig(0.5, "universal")
    u = (1, -1) * 10
    assert universal_accepts(u, image(u), cfg, BINARY) is Decision.H1
    u = (1, 1, -1, -1) * 10
    y = (0, 1, 0, 1) * 10
    assert universal_accepts(u, y, DetectorConfig(0.3, "universal"), BINARY) is Decision.H0


def test_universal_implies_some_known_source():
    rng = np.random.default_rng(3)
    n = 10
    grid = [j / 100 for j in range(1, 100)]
    hits = 0
    for _ in range(200):
        u = tuple(int(v) for v in rng.choice([-1, 1], size=n))
        y = tuple(int(v) for v in (rng.random(n) < 0.5))
        lam = float(rng.uniform(0.01, 0.5))
        if universal_accepts(u, y, DetectorConfig(lam, "universal"), BINARY):
            hits += 1
            assert any(
                lambda_star_accepts(MemorylessSource(BINARY, (1 - p, p)), u, y, ks(lam)) for p in grid
            )
    assert hits > 10


def test_random_watermark_examples():
    pu = MemorylessSource(WATERMARK, (0.5, 0.5))
    u = (1, -1) * 6
    y = image(u)
    for lam in (0.1, 0.3, 0.6):
        rw = random_wm_accepts(UNIFORM, pu, u, y, DetectorConfig(lam, "random_watermark"))
        assert rw is lambda_star_accepts(UNIFORM, u, y, ks(lam))
    u = (1, 1, -1, -1) * 50
    y = (0, 1, 0, 1) * 50
    assert random_wm_accepts(UNIFORM, pu, u, y, DetectorConfig(0.3, "random_watermark")) is Decision.H0


def test_random_watermark_degenerate_source():
    pu = MemorylessSource(WATERMARK, (0.0, 1.0))
    src = MemorylessSource(BINARY, (0.7, 0.3))
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 15))
        u = (1,) * n
        y = tuple(int(v) for v in rng.integers(0, 2, size=n))
        lam = float(rng.uniform(0.01, 1))
        rw = random_wm_accepts(src, pu, u, y, DetectorConfig(lam, "random_watermark"))
        assert rw is lambda_star_accepts(src, u, y, ks(lam))


def test_individual_covertext_examples():
    u = (1, -1, -1, 1)
    cfg = lambda lam: DetectorConfig(lam, "individual_covertext")  # noqa: E731
    assert individual_covertext_accepts(u, image(u), cfg(0.5), BINARY) is Decision.H1
    assert individual_covertext_accepts(u, image(u), cfg(math.log(2)), BINARY) is Decision.H1
    u = (1, 1, -1, -1)
    y = (0, 1, 0, 1)
    assert individual_covertext_accepts(u, y, cfg(0.01), BINARY) is Decision.H0
    assert individual_covertext_accepts((1, -1, 1, 1), (0, 1, 0, 1), cfg(math.log(2)), BINARY) is Decision.H0


@pytest.mark.parametrize("n", [9, 10])
@pytest.mark.parametrize("px", [(0.5, 0.5), (0.8, 0.2)])
def test_false_positive_bound_exhaustive(n, px):
    src = MemorylessSource(BINARY, px)
    for lam in (0.1, 0.3):
        for m in (0, n // 2, n):
            u = (-1,) * m + (1,) * (n - m)
            mass, rep = oracles.type_probabilities(u, px, n)
            p_fp = sum(
                w for key, w in mass.items()
                if lambda_star_statistic(src, EmpiricalJoint(WATERMARK, BINARY, np.reshape(key, (2, 2))), lam) <= 0
            )
            assert p_fp <= (n + 1) ** 2 * math.exp(-n * lam)


# ----------------------------------------------------------- embedder


def brute_best_score(src, x, u, d, budget, k):
    """Max of -(1/n)[ln P_X(y) + n H(Y|U)] over every feasible y."""
    n = len(x)
    best = -math.inf
    for y in itertools.product(range(k), repeat=n):
        if sum(d[a][b] for a, b in zip(x, y)) > n * budget + 1e-12:
            continue
        best = max(best, -detection_objective(src, u, y) / n)
    return best


def test_embed_zero_budget_is_identity():
    x = (0, 1, 1, 0, 1, 0)
    u = (1, -1, 1, 1, -1, -1)
    c = EmbedConstraint.hamming(BINARY, 0.0)
    assert optimal_embed_discrete(UNIFORM, x, u, c) == x
    assert optimal_embed_discrete(UNIFORM, x, u, c, mode="search") == x


def test_embed_unconstrained_reaches_ln2():
    u = (1, -1, -1, 1, 1, -1, 1, -1)
    x = (0,) * 8
    res = optimal_embed_discrete_result(UNIFORM, x, u, EmbedConstraint.hamming(BINARY, 1.0))
    assert res.mutual_info == pytest.approx(math.log(2))
    y = res.y
    assert len({b for a, b in zip(u, y) if a == 1}) == 1
    assert len({b for a, b in zip(u, y) if a == -1}) == 1


def test_embed_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(40):
        k = int(rng.integers(2, 4))
        n = int(rng.integers(2, 7 if k == 2 else 6))
        alph = Alphabet.range(k)
        p = rng.dirichlet(np.ones(k))
        src = MemorylessSource(alph, tuple(p / p.sum()))
        x = tuple(int(v) for v in rng.integers(0, k, size=n))
        u = tuple(int(v) for v in rng.choice([-1, 1], size=n))
        budget = float(rng.uniform(0, 0.7))
        c = EmbedConstraint.hamming(alph, budget)
        res = optimal_embed_discrete_result(src, x, u, c)
        d = c.matrix
        assert sum(d[a][b] for a, b in zip(x, res.y)) <= n * budget + 1e-12
        assert -detection_objective(src, u, res.y) / n == pytest.approx(res.score, abs=1e-12)
        assert res.score == pytest.approx(brute_best_score(src, x, u, d, budget, k), abs=1e-12)


def test_exact_and_search_agree_n8():
    rng = np.random.default_rng(6)
    for _ in range(60):
        k = int(rng.integers(2, 4))
        alph = Alphabet.range(k)
        p = rng.dirichlet(np.ones(k))
        src = MemorylessSource(alph, tuple(p / p.sum()))
        x = tuple(int(v) for v in rng.integers(0, k, size=8))
        u = tuple(int(v) for v in rng.choice([-1, 1], size=8))
        c = EmbedConstraint.hamming(alph, float(rng.uniform(0, 0.6)))
        exact = optimal_embed_discrete_result(src, x, u, c, mode="exact")
        search = optimal_embed_discrete_result(src, x, u, c, mode="search")
        assert search.score >= exact.score - 1 / 8
        assert search.score <= exact.score + 1e-12


def test_score_monotone_in_budget():
    rng = np.random.default_rng(7)
    alph = Alphabet.range(3)
    src = MemorylessSource(alph, (0.5, 0.3, 0.2))
    for _ in range(10):
        x = tuple(int(v) for v in rng.integers(0, 3, size=7))
        u = tuple(int(v) for v in rng.choice([-1, 1], size=7))
        scores = [
            optimal_embed_discrete_result(src, x, u, EmbedConstraint.hamming(alph, b)).score
            for b in np.linspace(0, 1, 8)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))


def test_embed_deterministic_and_universal():
    x = (0, 1, 0, 1, 1, 0, 0)
    u = (1, 1, -1, -1, 1, -1, 1)
    c = EmbedConstraint.hamming(BINARY, 0.3)
    a = optimal_embed_discrete_result(None, x, u, c, alphabet=BINARY)
    b = optimal_embed_discrete_result(None, x, u, c, alphabet=BINARY)
    assert a == b
    with pytest.raises(DomainError):
        optimal_embed_discrete(None, x, u, c)


def test_embed_errors():
    # d(x, x) > 0 everywhere and a zero budget: nothing is feasible
    c = EmbedConstraint(np.ones((2, 2)), 0.0)
    with pytest.raises(InfeasibleError):
        optimal_embed_discrete(UNIFORM, (0, 1), (1, -1), c)
    with pytest.raises(CapExceeded):
        optimal_embed_discrete(UNIFORM, (0,) * 13, (1,) * 13, EmbedConstraint.hamming(BINARY, 0.1))
    with pytest.raises(DomainError):
        EmbedConstraint(-np.ones((2, 2)), 0.1)


def test_search_mode_long_sequence():
    rng = np.random.default_rng(8)
    n = 300
    x = tuple(int(v) for v in rng.integers(0, 2, size=n))
    u = tuple(int(v) for v in rng.choice([-1, 1], size=n))
    c = EmbedConstraint.hamming(BINARY, 0.1)
    res = optimal_embed_discrete_result(UNIFORM, x, u, c, mode="search")
    assert sum(a != b for a, b in zip(x, res.y)) <= 30
    assert lambda_star_accepts(UNIFORM, u, res.y, ks(0.01)) is Decision.H1
