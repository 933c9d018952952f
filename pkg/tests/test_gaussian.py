import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wmdetect import Decision
from wmdetect.errors import DomainError
from wmdetect.gaussian import (
    EmbedderKind,
    EmbedStats,
    detect_corr,
    detect_mi,
    distortion_ab,
    embed,
    embed_coefficients,
    embed_coefficients_batch,
    emp_mutual_info_gauss,
    erase_gain,
    mi_threshold_r2,
    normalized_correlation,
    objective_R,
    optimal_coefficients,
    project_to_span,
    ratio_ab,
    stats,
)

KINDS = ("optimal", "improved_sign", "sign", "additive")


def pm1(rng, n):
    return rng.choice([-1.0, 1.0], size=n)


def test_stats_examples():
    u = np.array([1.0, -1, 1, 1, -1, -1])
    s = stats(u, u)
    assert (s.alpha2, s.rho) == (1.0, 1.0)
    s = stats(-u, u)
    assert (s.alpha2, s.rho) == (1.0, -1.0)
    x = np.sqrt(2) * np.array([1.0, 1, -1, -1, 1, -1])
    u2 = np.array([1.0, -1, -1, 1, 1, 1])
    assert float(np.dot(x, u2)) == pytest.approx(0, abs=1e-12)
    s = stats(x, u2)
    assert s.alpha2 == pytest.approx(2.0)
    assert s.rho == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        stats(x, u2[:3])
    with pytest.raises(DomainError):
        stats(x, 2 * u2)


def test_mutual_info_examples():
    u = np.array([1.0, -1, -1, 1])
    assert emp_mutual_info_gauss(u, 3 * u) == math.inf
    assert emp_mutual_info_gauss(u, np.array([1.0, 1, 1, 1])) == 0.0
    lam = 0.37
    r = math.sqrt(1 - math.exp(-2 * lam))
    # y = r u + sqrt(1 - r^2) v with v orthogonal to u and of the same norm
    v = np.array([1.0, 1, 1, 1])
    y = r * u + math.sqrt(1 - r * r) * v
    assert normalized_correlation(u, y) == pytest.approx(r)
    assert emp_mutual_info_gauss(u, y) == pytest.approx(lam, abs=1e-12)
    with pytest.raises(DomainError):
        emp_mutual_info_gauss(u, np.zeros(4))


def test_detector_examples():
    u = np.array([1.0, -1, 1, -1])
    pos = np.array([1.0, -1, 1, 1])
    neg = -pos
    zero = np.array([1.0, 1, 1, 1])
    assert detect_corr(u, pos, 0.0) is Decision.H1
    assert detect_corr(u, neg, 0.0) is Decision.H0
    assert detect_corr(u, zero, 0.0) is Decision.H0
    assert detect_mi(u, pos, 0.0) is Decision.H1
    assert detect_mi(u, neg, 0.0) is Decision.H1
    assert detect_mi(u, zero, 0.0) is Decision.H0
    for lam in (0.1, 1.0, 10.0):
        assert detect_mi(u, u, lam) is Decision.H1
        assert detect_corr(u, u, lam) is Decision.H1


def test_mi_boundary_crossing():
    u = np.array([1.0, -1, -1, 1])
    v = np.array([1.0, 1, 1, 1])
    lam = 0.2
    r = math.sqrt(mi_threshold_r2(lam))
    for eps, want in ((1e-6, Decision.H1), (-1e-6, Decision.H0)):
        rr = r + eps
        y = rr * u + math.sqrt(1 - rr * rr) * v
        assert detect_mi(u, y, lam) is want
        assert detect_mi(u, -y, lam) is want


def test_objective_examples():
    rng = np.random.default_rng(0)
    u = pm1(rng, 10)
    assert objective_R(u, u) == pytest.approx(10)
    v = u.copy()
    v[:5] *= -1
    v = v if float(np.dot(u, v)) == 0 else None
    if v is not None:
        assert objective_R(u, v) == 0
    y = rng.standard_normal(10)
    assert objective_R(u, -3.5 * y) == pytest.approx(objective_R(u, y))
    assert emp_mutual_info_gauss(u, y) == pytest.approx(-0.5 * math.log(1 - objective_R(u, y) / 10))


def test_optimal_erase_example():
    a, b = optimal_coefficients(1.0, 0.5, 1.0)
    assert (a, b) == (0.0, 1.0)
    assert distortion_ab(a, b, 1.0, 0.5) == pytest.approx(1.0)
    assert ratio_ab(a, b, 1.0, 0.5) == 1.0
    assert oracles.th1_brute(1.0, 0.5, 1.0) == pytest.approx(1.0, abs=1e-9)


def test_sign_and_additive_definitions():
    rng = np.random.default_rng(1)
    n = 50
    u = pm1(rng, n)
    x = rng.standard_normal(n)
    if np.dot(x, u) >= 0:
        x = x - 2 * np.dot(x, u) / n * u  # force rho < 0
    De = 0.3
    y = embed(EmbedderKind("sign", De), x, u)
    assert np.allclose(y, x - math.sqrt(De) * u)
    assert float(np.sum((y - x) ** 2)) == pytest.approx(n * De)
    x = -x
    assert np.array_equal(embed(EmbedderKind("sign", De), x, u), embed(EmbedderKind("additive", De), x, u))


def test_erase_degenerate_root():
    # rho < 0 with De = alpha2: first root rho + |rho| vanishes
    b = erase_gain(1.0, -0.6, 1.0)
    assert b == pytest.approx(-1.2)
    assert distortion_ab(0.0, b, 1.0, -0.6) <= 1.0 + 1e-12
    a, b2 = optimal_coefficients(1.0, -0.6, 1.0)
    assert a == 0.0 and b2 == pytest.approx(-1.2)


def test_kind_validation():
    with pytest.raises(DomainError):
        EmbedderKind("sign", 0.0)
    with pytest.raises(DomainError):
        EmbedderKind("bogus", 1.0)
    assert EmbedderKind("improved-sign", 1.0).kind == "improved_sign"


def test_projection_examples():
    rng = np.random.default_rng(2)
    n = 12
    x = rng.standard_normal(n)
    u = pm1(rng, n)
    y = 0.7 * x - 1.3 * u
    assert np.allclose(project_to_span(y, x, u), y)
    basis, _ = np.linalg.qr(np.column_stack([x, u]))
    z = rng.standard_normal(n)
    z -= basis @ (basis.T @ z)
    assert np.allclose(project_to_span(x + u + z, x, u), x + u)
    # x parallel to u
    assert np.allclose(project_to_span(u + z, 2 * u, u), u)


def random_case(rng):
    n = int(rng.integers(4, 200))
    u = pm1(rng, n)
    x = rng.standard_normal(n) * rng.uniform(0.1, 3)
    if rng.random() < 0.2:
        x = x + rng.uniform(-2, 2) * u
    De = float(10 ** rng.uniform(-2, 1))
    return x, u, De


def test_feasibility_and_dominance():
    rng = np.random.default_rng(3)
    for _ in range(2000):
        x, u, De = random_case(rng)
        n = len(x)
        R = {}
        for kind in KINDS:
            y = embed(EmbedderKind(kind, De), x, u)
            assert float(np.sum((y - x) ** 2)) <= n * De * (1 + 1e-9)
            R[kind] = objective_R(u, y)
        tol = 1e-9 * n
        assert R["optimal"] >= R["improved_sign"] - tol
        assert R["improved_sign"] >= R["sign"] - tol
        assert R["sign"] >= R["additive"] - tol
        if De < stats(x, u).alpha2:
            assert R["improved_sign"] == R["sign"]


def test_optimal_matches_brute_force_on_sequences():
    rng = np.random.default_rng(4)
    for _ in range(150):
        x, u, De = random_case(rng)
        s = stats(x, u)
        y = embed(EmbedderKind("optimal", De), x, u)
        brute = oracles.th1_brute(s.alpha2, s.rho, De)
        assert objective_R(u, y) / len(x) == pytest.approx(brute, rel=1e-6)


def test_sign_correlation_identity():
    rng = np.random.default_rng(5)
    for _ in range(500):
        x, u, De = random_case(rng)
        s = stats(x, u)
        y = embed(EmbedderKind("sign", De), x, u)
        g = (abs(s.rho) + math.sqrt(De)) ** 2
        expected = g / (g + s.alpha2 - s.rho**2)
        assert normalized_correlation(u, y) ** 2 == pytest.approx(expected, rel=1e-10)


def test_batch_matches_scalar():
    rng = np.random.default_rng(6)
    alpha2 = rng.uniform(0.05, 4, size=300)
    rho = rng.uniform(-1, 1, size=300) * np.sqrt(alpha2)
    for kind in KINDS:
        k = EmbedderKind(kind, 0.8)
        a, b = embed_coefficients_batch(k, alpha2, rho)
        for i in range(300):
            sa, sb = embed_coefficients(k, EmbedStats(float(alpha2[i]), float(rho[i]), 1))
            assert a[i] == pytest.approx(sa, abs=1e-12)
            assert b[i] == pytest.approx(sb, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0.01, 10.0),
    st.floats(-1.0, 1.0),
    st.floats(0.001, 10.0),
)
def test_optimal_coefficients_feasible(alpha2, c, De):
    rho = c * math.sqrt(alpha2)
    a, b = optimal_coefficients(alpha2, rho, De)
    assert distortion_ab(a, b, alpha2, rho) <= De * (1 + 1e-9) + 1e-12
    assert (a, b) != (0.0, 0.0)
    # never worse than doing nothing or the sign rule
    base = max(ratio_ab(1.0, 0.0, alpha2, rho), ratio_ab(1.0, math.copysign(math.sqrt(De), rho if rho else 1.0), alpha2, rho))
    assert ratio_ab(a, b, alpha2, rho) >= base - 1e-9
