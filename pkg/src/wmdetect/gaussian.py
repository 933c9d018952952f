"""Gaussian-covertext embedders and detectors.

The detector sees the energy ``sum y_i^2`` and the correlation
``sum u_i y_i``. Every embedder here has the form ``y = a x + b u`` with the
coefficients computed from the pair ``(alpha2, rho)`` of the covertext.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decision import Decision
from .errors import DomainError

KINDS = ("optimal", "sign", "improved_sign", "additive")
# gain used when the optimum is only a supremum (rho = 0, De = alpha2)
DEGENERATE_GAIN = 1e-6
CLAMP_TOL = 1e-12


def sgn(v: float) -> float:
    """Signum with ``sgn(0) = +1``."""
    return 1.0 if v >= 0 else -1.0


def _clamped_sqrt(v: float) -> float:
    if v < 0:
        if v < -CLAMP_TOL * max(1.0, abs(v)):
            raise DomainError(f"square root of negative value {v}")
        return 0.0
    return math.sqrt(v)


@dataclass(frozen=True)
class EmbedStats:
    alpha2: float
    rho: float
    n: int

    def __post_init__(self):
        if self.alpha2 < 0:
            raise DomainError("alpha2 must be nonnegative")
        if self.rho**2 > self.alpha2 * (1 + 1e-12) + 1e-300:
            raise DomainError(f"rho^2={self.rho**2} exceeds alpha2={self.alpha2}")


@dataclass(frozen=True)
class EmbedderKind:
    kind: str
    De: float

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in KINDS:
            raise DomainError(f"unknown embedder {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "kind", kind)
        if not self.De > 0:
            raise DomainError(f"D_e must be > 0, got {self.De}")


def _as_pair(x, u) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != u.shape:
        raise DomainError(f"length mismatch: {x.shape} vs {u.shape}")
    if x.ndim != 1 or len(x) == 0:
        raise DomainError("expected nonempty 1-D sequences")
    return x, u


def _check_watermark(u: np.ndarray):
    if not np.all(np.abs(u) == 1):
        raise DomainError("watermark entries must be -1 or +1")


def stats(x, u) -> EmbedStats:
    x, u = _as_pair(x, u)
    _check_watermark(u)
    n = len(x)
    alpha2 = float(np.dot(x, x) / n)
    rho = float(np.dot(x, u) / n)
    # Cauchy-Schwarz can fail by an ulp
    rho = math.copysign(min(abs(rho), math.sqrt(alpha2)), rho)
    return EmbedStats(alpha2, rho, n)


def normalized_correlation(u, y) -> float:
    u, y = _as_pair(u, y)
    ny = float(np.dot(y, y))
    if ny == 0:
        raise DomainError("all-zero y has no normalized correlation")
    return float(np.dot(u, y) / math.sqrt(float(np.dot(u, u)) * ny))


def emp_mutual_info_gauss(u, y) -> float:
    """``-1/2 ln(1 - rho_hat^2)``; ``+inf`` when y is parallel to u."""
    r2 = min(1.0, normalized_correlation(u, y) ** 2)
    if r2 >= 1.0:
        return math.inf
    return -0.5 * math.log1p(-r2)


def mi_threshold_r2(lam: float) -> float:
    """Squared normalized correlation at which the MI detector switches."""
    return -math.expm1(-2 * lam)


def detect_mi(u, y, lam: float) -> Decision:
    """H1 iff the empirical mutual information exceeds ``lam`` (two-sided)."""
    if lam < 0:
        raise DomainError("lam must be >= 0")
    return Decision.of(emp_mutual_info_gauss(u, y) > lam)


def detect_corr(u, y, lam: float) -> Decision:
    """H1 iff the normalized correlation exceeds sqrt(1 - e^{-2 lam}) (one-sided)."""
    if lam < 0:
        raise DomainError("lam must be >= 0")
    return Decision.of(normalized_correlation(u, y) > math.sqrt(mi_threshold_r2(lam)))


def objective_R(u, y) -> float:
    """``<u,y>^2 / ||y||^2``."""
    u, y = _as_pair(u, y)
    ny = float(np.dot(y, y))
    if ny == 0:
        raise DomainError("objective undefined for all-zero y")
    return float(np.dot(u, y)) ** 2 / ny


def project_to_span(y, x, u) -> np.ndarray:
    """Orthogonal projection of y onto span{x, u}.

    Falls back to the 1-D projection when x and u are parallel.
    """
    x, u = _as_pair(x, u)
    y = np.asarray(y, dtype=float)
    if y.shape != x.shape:
        raise DomainError("y must have the same length as x and u")
    basis = np.column_stack([x, u])
    if not basis.any():
        raise DomainError("x and u are both zero")
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return basis @ coef


# -------------------------------------------------------------- embedders


def ratio_ab(a: float, b: float, alpha2: float, rho: float) -> float:
    """Squared normalized correlation of ``a x + b u`` in terms of (alpha2, rho)."""
    num = (a * rho + b) ** 2
    den = a * a * alpha2 + 2 * a * b * rho + b * b
    if den <= 0:
        return 0.0
    return min(1.0, num / den)


def distortion_ab(a: float, b: float, alpha2: float, rho: float) -> float:
    """Per-symbol ``||a x + b u - x||^2 / n``."""
    return (a - 1) ** 2 * alpha2 + 2 * (a - 1) * b * rho + b * b


def erase_gain(alpha2: float, rho: float, De: float) -> float:
    """Gain b of the erasing stegotext ``y = b u`` (requires De >= alpha2 - rho^2).

    Uses the root ``rho + sqrt(rho^2 - alpha2 + De)``; when that root is zero
    (possible for rho < 0) the other root ``rho - sqrt(...)`` is taken, which
    is equally feasible and keeps y away from the useless all-zero vector.
    Returns 0 only when both roots vanish.
    """
    root = _clamped_sqrt(rho * rho - alpha2 + De)
    scale = max(abs(rho), root, 1.0)
    b = rho + root
    if abs(b) <= 1e-12 * scale:
        b = rho + sgn(rho) * root
    return b if abs(b) > 1e-12 * scale else 0.0


def optimal_coefficients(alpha2: float, rho: float, De: float) -> tuple[float, float]:
    """Closed-form maximizer (a*, b*) of the normalized correlation.

    Erase regime (De >= alpha2 - rho^2): a* = 0 and b* is a root of the
    binding constraint. Otherwise a* is the best of four candidates (two
    stationary points of t(a) and the ends of the admissible interval), judged
    by the objective itself, which is sgn(rho) t(a).
    """
    gap = alpha2 - rho * rho
    if gap < 0:
        gap = 0.0
    s = sgn(rho)
    if De >= gap:
        b = erase_gain(alpha2, rho, De)
        if b != 0:
            return 0.0, b
        # rho = 0 and De = alpha2: the supremum 1 is approached as a -> 0+ but
        # y = 0 is useless; step just inside the boundary
        a = DEGENERATE_GAIN
        return a, s * _clamped_sqrt(De - (a - 1) ** 2 * gap)
    w = math.sqrt(De / gap)
    lo, hi = 1 - w, 1 + w
    disc = math.sqrt(De * rho * rho) * _clamped_sqrt(gap * (alpha2 - De))
    cands = [
        (gap * (alpha2 - De) + disc) / (alpha2 * gap),
        (gap * (alpha2 - De) - disc) / (alpha2 * gap),
        lo,
        hi,
    ]
    best = None
    for a in cands:
        if a == 0 or a < lo - CLAMP_TOL or a > hi + CLAMP_TOL:
            continue
        arg = De - (a - 1) ** 2 * gap
        if arg < -CLAMP_TOL * max(De, 1.0):
            continue
        b = (1 - a) * rho + s * math.sqrt(max(arg, 0.0))
        value = ratio_ab(a, b, alpha2, rho)
        key = (value, -abs(a - 1))
        if best is None or key > best[0]:
            best = (key, a, b)
    if best is None:
        raise DomainError("no admissible candidate for the optimal embedder")
    return best[1], best[2]


def embed_coefficients(kind: EmbedderKind, st: EmbedStats) -> tuple[float, float]:
    De = kind.De
    if kind.kind == "optimal":
        return optimal_coefficients(st.alpha2, st.rho, De)
    if kind.kind == "sign":
        return 1.0, sgn(st.rho) * math.sqrt(De)
    if kind.kind == "improved_sign":
        if De >= st.alpha2:
            return 0.0, erase_gain(st.alpha2, st.rho, De)
        return 1.0, sgn(st.rho) * math.sqrt(De)
    return 1.0, math.sqrt(De)


def embed(kind: EmbedderKind, x, u) -> np.ndarray:
    """Stegotext ``a x + b u``; always within ``n D_e`` squared error of x."""
    x, u = _as_pair(x, u)
    st = stats(x, u)
    a, b = embed_coefficients(kind, st)
    y = a * x + b * u
    if not y.any():
        raise DomainError("embedder produced the all-zero stegotext")
    return y


def embed_coefficients_batch(kind: EmbedderKind, alpha2: np.ndarray, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized coefficients for a batch of covertexts (rows)."""
    alpha2 = np.asarray(alpha2, dtype=float)
    rho = np.asarray(rho, dtype=float)
    sq = math.sqrt(kind.De)
    s = np.where(rho >= 0, 1.0, -1.0)
    if kind.kind == "additive":
        return np.ones_like(alpha2), np.full_like(alpha2, sq)
    if kind.kind == "sign":
        return np.ones_like(alpha2), s * sq
    if kind.kind == "improved_sign":
        erase = kind.De >= alpha2
        root = np.sqrt(np.maximum(rho * rho - alpha2 + kind.De, 0.0))
        b_erase = rho + root
        b_erase = np.where(np.abs(b_erase) <= 1e-12 * np.maximum(np.abs(rho), 1.0), rho + s * root, b_erase)
        return np.where(erase, 0.0, 1.0), np.where(erase, b_erase, s * sq)
    pairs = [optimal_coefficients(float(a2), float(r), kind.De) for a2, r in zip(alpha2, rho)]
    ab = np.array(pairs, dtype=float).reshape(-1, 2)
    return ab[:, 0], ab[:, 1]
