"""False-negative error exponents for the Gaussian embedders.

Exponents are in nats per symbol. The additive-embedder exponent needs a
one-dimensional minimization over the covertext energy ``r``; it is done on a
dense uniform grid and refined by golden-section search on the winning bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError

EMBEDDERS = ("sign", "improved_sign", "additive")
GRID_POINTS = 10_000
SIN_FLOOR = 1e-300
# lam within this relative distance below the zero-exponent boundary counts as
# on it; absorbs ln(1+x) rounding for small D_e/sigma2, exponent there < 1e-18
BOUNDARY_RTOL = 1e-9
CURVE_SAMPLES = 400


@dataclass(frozen=True)
class ExponentQuery:
    lam: float
    De: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if not self.De > 0:
            raise DomainError(f"D_e must be > 0, got {self.De}")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be > 0, got {self.sigma2}")

    @property
    def T2(self) -> float:
        """Squared correlation threshold ``1 - e^{-2 lam}``."""
        return -math.expm1(-2 * self.lam)

    @property
    def r0(self) -> float:
        """``D_e e^{-2 lam} / (1 - e^{-2 lam})``; infinite at lam = 0."""
        if self.lam == 0:
            return math.inf
        return self.De / math.expm1(2 * self.lam)


def _query(q, De=None, sigma2=None) -> ExponentQuery:
    if isinstance(q, ExponentQuery):
        return q
    return ExponentQuery(float(q), float(De), 1.0 if sigma2 is None else float(sigma2))


def _half_gap(g: float) -> float:
    # (g - ln g - 1) / 2, accurate near g = 1
    d = g - 1.0
    return 0.5 * (d - math.log1p(d))


def zero_exponent_lambda(De: float, sigma2: float) -> float:
    """``1/2 ln(1 + D_e/sigma2)``: the sign exponent vanishes at and above it."""
    if not (De > 0 and sigma2 > 0):
        raise DomainError("D_e and sigma2 must be positive")
    return 0.5 * math.log1p(De / sigma2)


def exponent_sign(q, De=None, sigma2=None) -> float:
    """False-negative exponent of the sign embedder with the MI detector."""
    q = _query(q, De, sigma2)
    if q.lam == 0:
        return math.inf
    g = q.r0 / q.sigma2
    if g <= 1 or q.lam >= zero_exponent_lambda(q.De, q.sigma2) * (1 - BOUNDARY_RTOL):
        return 0.0
    return _half_gap(g)


def exponent_improved_sign(q, De=None, sigma2=None) -> float:
    """Exponent of the sign embedder that erases the covertext when D_e >= alpha^2."""
    q = _query(q, De, sigma2)
    if q.lam > 0.5 * math.log(2):
        if q.De <= q.sigma2:
            return 0.0
        return _half_gap(q.De / q.sigma2)
    return exponent_sign(q)


def cap_log_ratio(theta: float) -> float:
    """Exponential rate ``ln sin theta`` of a spherical cap of half-angle theta."""
    if not (0 < theta <= math.pi / 2 + 1e-15):
        raise DomainError(f"cap half-angle must lie in (0, pi/2], got {theta}")
    return math.log(math.sin(min(theta, math.pi / 2)))


def _clamp_cos(c: float) -> float:
    if c > 1 + 1e-12 or c < -1 - 1e-12:
        raise DomainError(f"arccos argument {c} outside [-1, 1]")
    return min(1.0, max(-1.0, c))


def psi_angles(r: float, T: float, De: float) -> tuple[float, float]:
    """Cap angles (Psi1, Psi2) bounding the miss event at covertext energy r."""
    if not (0 <= T < 1):
        raise DomainError(f"threshold T must lie in [0, 1), got {T}")
    floor = De * (1 - T * T)
    arg = r - floor
    if arg < -1e-12 * max(1.0, r):
        raise DomainError(f"r={r} below the feasibility limit {floor}")
    s = math.sqrt(max(arg, 0.0))
    base = math.sqrt(De) * (T * T - 1)
    sr = math.sqrt(r)
    return (
        math.acos(_clamp_cos((base + T * s) / sr)),
        math.acos(_clamp_cos((base - T * s) / sr)),
    )


def e1_objective(r, q: ExponentQuery):
    """``1/2 [r/s2 - ln(r/s2) - 2 ln sin Psi1(r) - 1]``, vectorized over r."""
    r = np.asarray(r, dtype=float)
    T2 = q.T2
    T = math.sqrt(T2)
    s = np.sqrt(np.maximum(r - q.De * (1 - T2), 0.0))
    c = np.clip((math.sqrt(q.De) * (T2 - 1) + T * s) / np.sqrt(r), -1.0, 1.0)
    sin_psi = np.maximum(np.sqrt(np.maximum(1 - c * c, 0.0)), SIN_FLOOR)
    v = r / q.sigma2
    out = 0.5 * (v - np.log(v) - 2 * np.log(sin_psi) - 1)
    return out if out.ndim else float(out)


def _search_upper(q: ExponentQuery, left: float) -> float:
    """Energy beyond which the E1 objective cannot beat a reference value.

    The objective is at least ``1/2 [v - ln v - 1]``, which grows without bound
    for v > 1, so any r whose lower bound exceeds a known objective value is
    discarded. Exact pruning; it keeps the grid fine when r0 is huge (small lam).
    """
    hi = q.r0
    ref_r = min(max(q.sigma2, left * (1 + 1e-9)), hi) if math.isfinite(hi) else max(q.sigma2, 2 * left)
    ref = float(e1_objective(ref_r, q))
    start = max(q.sigma2, left)

    def excess(r):
        return _half_gap(r / q.sigma2) - ref

    if excess(start) > 0:
        return min(hi, start)
    top = 2 * start
    while excess(top) <= 0:
        top *= 2
        if top > hi:
            return hi
    return min(hi, optimize.brentq(excess, start, top, xtol=1e-12 * top))


@dataclass(frozen=True)
class E1Result:
    value: float
    argmin: float
    grid_points: int


def e1_minimize(q, De=None, sigma2=None, grid_points: int = GRID_POINTS, tol: float = 1e-8) -> E1Result:
    """Minimize the E1 objective over ``(D_e e^{-2lam}, r0]``."""
    q = _query(q, De, sigma2)
    left = q.De * (1 - q.T2)
    hi = _search_upper(q, left)
    grid = left + (hi - left) * np.arange(1, grid_points + 1) / grid_points
    vals = e1_objective(grid, q)
    i = int(np.argmin(vals))
    best_r, best_v = float(grid[i]), float(vals[i])
    lo_r = float(grid[i - 1]) if i > 0 else left
    hi_r = float(grid[i + 1]) if i + 1 < len(grid) else float(grid[i])
    f = lambda r: float(e1_objective(r, q))  # noqa: E731
    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(f, bracket=(lo_r, best_r, hi_r), method="golden", tol=tol / max(best_r, 1.0))
        cand_r, cand_v = float(res.x), float(res.fun)
    else:
        a, b = (lo_r, best_r) if i > 0 else (left, hi_r)
        res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": tol})
        cand_r, cand_v = float(res.x), float(res.fun)
    if left < cand_r <= hi and cand_v < best_v:
        best_r, best_v = cand_r, cand_v
    return E1Result(best_v, best_r, grid_points)


def exponent_additive(q, De=None, sigma2=None, grid_points: int = GRID_POINTS) -> float:
    """False-negative exponent of ``y = x + sqrt(D_e) u`` with the correlation detector."""
    q = _query(q, De, sigma2)
    e2 = exponent_sign(q)
    if e2 == 0.0:
        return 0.0
    e1 = e1_minimize(q, grid_points=grid_points).value
    return min(e1, e2)


_FUNCS = {
    "sign": exponent_sign,
    "improved_sign": exponent_improved_sign,
    "additive": exponent_additive,
}


def exponent(kind: str, q) -> float:
    kind = kind.replace("-", "_")
    if kind not in _FUNCS:
        raise DomainError(f"no exponent for embedder {kind!r}; choose from {EMBEDDERS}")
    return _FUNCS[kind](q)


def default_lambda_grid(De: float, sigma2: float, samples: int = CURVE_SAMPLES) -> np.ndarray:
    """``samples`` uniform points over ``(0, 1.2 * zero_exponent_lambda]``."""
    lam_max = 1.2 * zero_exponent_lambda(De, sigma2)
    return lam_max * np.arange(1, samples + 1) / samples


@dataclass(frozen=True)
class ExponentCurve:
    kind: str
    De: float
    sigma2: float
    lambdas: tuple = field(repr=False)
    values: tuple = field(repr=False)

    def zero_crossing(self) -> float | None:
        """Smallest sampled lambda with a zero exponent (a grid value, not exact)."""
        for lam, v in zip(self.lambdas, self.values):
            if v == 0.0:
                return lam
        return None

    def is_nonincreasing(self) -> bool:
        v = np.asarray(self.values)
        return bool(np.all(np.diff(v) <= 1e-12))


def exponent_curve(kind: str, De: float, sigma2: float = 1.0, lambdas=None) -> ExponentCurve:
    kind = kind.replace("-", "_")
    lams = default_lambda_grid(De, sigma2) if lambdas is None else np.asarray(lambdas, dtype=float)
    if lams.ndim != 1 or len(lams) == 0 or np.any(lams < 0) or np.any(np.diff(lams) <= 0):
        raise DomainError("lambda grid must be nonempty, nonnegative and strictly increasing")
    values = tuple(exponent(kind, ExponentQuery(float(l), De, sigma2)) for l in lams)
    return ExponentCurve(kind, De, sigma2, tuple(float(l) for l in lams), values)
