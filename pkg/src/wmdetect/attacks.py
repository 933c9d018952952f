"""Decision regions and embedders under attack channels.

Two attack models are covered. A memoryless attack ``W(z|y)`` makes the
detector input ``z`` memoryless with marginal ``Q = P_X W``, so the
attack-free region carries over with ``Q`` in place of ``P_X``. For an
unknown strongly exchangeable attack within distortion ``D_a`` the detector
is tuned to the worst channel ``W*``, which spreads its mass uniformly over
the feasible conditional types ``T(z|y)``.

The inner problem of the worst-case region,

    min D(P_y || P_X)  over joint pmfs P(y, z) with z-marginal P_z
                       and  sum P(y, z) d_a(y, z) <= D_a,

is convex; it is solved by Frank-Wolfe with away steps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize

from .decision import Decision
from .detect_discrete import (
    Cells,
    EmbedConstraint,
    lambda_star_statistic,
    rank_key,
)
from .empirical import (
    ENUMERATION_CAP,
    WATERMARK,
    Alphabet,
    EmpiricalJoint,
    MemorylessSource,
    compositions,
    joint_counts,
    kl_divergence,
    log_multinomial,
    mutual_information,
)
from .errors import CapExceeded, DomainError, InfeasibleError

ROW_TOL = 1e-12
FW_MAX_ITER = 10_000
FW_GAP_TOL = 1e-8
GRID_FALLBACK_N = 8
MAX_EXACT_ALPHABET = 3


@dataclass(frozen=True)
class MemorylessAttack:
    """Single-letter attack channel; ``W[y, z]`` is the probability of z given y."""

    W: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.W, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DomainError(f"attack channel must be square, got shape {w.shape}")
        if (w < 0).any() or not np.all(np.isfinite(w)):
            raise DomainError("channel entries must be finite and nonnegative")
        if np.any(np.abs(w.sum(axis=1) - 1) > ROW_TOL):
            raise DomainError("channel rows must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "W", w)

    @classmethod
    def identity(cls, k: int) -> "MemorylessAttack":
        return cls(np.eye(k))

    @classmethod
    def symmetric(cls, k: int, eps: float) -> "MemorylessAttack":
        """Keep the symbol w.p. 1 - eps, otherwise move to one of the others uniformly."""
        if not 0 <= eps <= 1 or k < 2:
            raise DomainError("need 0 <= eps <= 1 and k >= 2")
        return cls((1 - eps) * np.eye(k) + eps / (k - 1) * (1 - np.eye(k)))


class AttackBudget(EmbedConstraint):
    """Attacker distortion ``d_a`` and per-symbol level ``D_a``."""


def output_marginal(src: MemorylessSource, attack: MemorylessAttack) -> MemorylessSource:
    """Single-letter channel output ``Q(z) = sum_y P_X(y) W(z|y)``."""
    if attack.W.shape[0] != src.alphabet.size:
        raise DomainError("channel does not match the source alphabet")
    q = src.probs @ attack.W
    return MemorylessSource(src.alphabet, tuple(q / q.sum()))


def _threshold(n: int, k: int) -> float:
    return k * math.log(n + 1) / n


def _uz_joint(alphabet: Alphabet, u: Sequence, z: Sequence) -> EmpiricalJoint:
    if len(u) != len(z):
        raise DomainError(f"length mismatch: {len(u)} != {len(z)}")
    if len(u) == 0:
        raise DomainError("sequences must be nonempty")
    ui, zi = WATERMARK.index(u), alphabet.index(z)
    return EmpiricalJoint(WATERMARK, alphabet, joint_counts(ui, zi, 2, alphabet.size))


def memoryless_attack_accepts(Q: MemorylessSource, u: Sequence, z: Sequence, lam: float) -> Decision:
    """H1 iff ``n[I(Z;U) + D(P_z||Q)] >= lam n - |A| ln(n+1)``."""
    if not lam > 0:
        raise DomainError("lam must be > 0")
    j = _uz_joint(Q.alphabet, u, z)
    return Decision.of(lambda_star_statistic(Q, j, lam) <= 0)


# ------------------------------------------------ inner divergence problem


@dataclass(frozen=True)
class InnerResult:
    value: float
    joint: np.ndarray | None = field(repr=False)  # optimal P(y, z), None if infeasible
    iterations: int
    gap: float
    converged: bool


def _lp_vertex(c: np.ndarray, d: np.ndarray, q: np.ndarray, budget: float) -> np.ndarray | None:
    """Minimize ``sum c[y] P[y, z]`` over couplings with z-marginal q and cost <= budget.

    Solved through the Lagrangian in the distortion multiplier: for a fixed
    multiplier each z picks the y minimizing ``c[y] + mu d[y, z]``. The
    smallest multiplier whose low-distortion choice fits the budget is found
    among the breakpoints, then one z is split between its two tied choices so
    the budget binds. The result is a vertex with at most one split column.
    """
    k_y, k_z = d.shape
    live = np.flatnonzero(q > 0)

    def choice(mu, prefer_low):
        pick = {}
        for zz in live:
            score = c + mu * d[:, zz]
            best = score.min()
            ties = np.flatnonzero(score <= best + 1e-12 * max(1.0, abs(best)))
            dist = d[ties, zz]
            pick[zz] = int(ties[np.argmin(dist)] if prefer_low else ties[np.argmax(dist)])
        return pick

    def cost(pick):
        return float(sum(q[zz] * d[y, zz] for zz, y in pick.items()))

    def build(pick):
        p = np.zeros((k_y, k_z))
        for zz, y in pick.items():
            p[y, zz] = q[zz]
        return p

    slack = 1e-12 * max(1.0, budget)
    cheapest = {int(zz): int(np.argmin(d[:, zz])) for zz in live}
    if cost(cheapest) > budget + slack:
        return None
    pick = choice(0.0, True)
    if cost(pick) <= budget + slack:
        return build(pick)
    mus = set()
    for zz in live:
        for a in range(k_y):
            for b in range(k_y):
                dd = d[b, zz] - d[a, zz]
                if dd > 0 and c[a] > c[b]:
                    mus.add((c[a] - c[b]) / dd)
    mu_star = None
    for mu in sorted(mus):
        if cost(choice(mu, True)) <= budget + slack:
            mu_star = mu
            break
    if mu_star is None:
        return build(cheapest)
    low, high = choice(mu_star, True), choice(mu_star, False)
    pick = dict(high)
    p = build(pick)
    excess = cost(pick) - budget
    for zz in live:
        if excess <= slack:
            break
        if low[zz] == high[zz]:
            continue
        save = q[zz] * (d[high[zz], zz] - d[low[zz], zz])
        frac = min(1.0, excess / save)
        p[high[zz], zz] -= frac * q[zz]
        p[low[zz], zz] += frac * q[zz]
        excess -= frac * save
    return p


def _kl_rows(py: np.ndarray, px: np.ndarray) -> float:
    mask = py > 0
    return float(np.sum(py[mask] * np.log(py[mask] / px[mask])))


def _line_search(py: np.ndarray, dpy: np.ndarray, px: np.ndarray, gmax: float) -> float:
    """Exact minimizer over [0, gmax] of ``D(py + g dpy || px)`` (convex in g)."""

    def deriv(g):
        v = py + g * dpy
        mask = dpy != 0
        return float(np.sum(dpy[mask] * np.log(np.maximum(v[mask], 1e-300) / px[mask])))

    if deriv(0.0) >= 0:
        return 0.0
    if deriv(gmax) <= 0:
        return gmax
    return optimize.brentq(deriv, 0.0, gmax, xtol=1e-15)


def inner_divergence(
    pz: Sequence[float],
    px: Sequence[float],
    budget: AttackBudget,
    max_iter: int = FW_MAX_ITER,
    gap_tol: float = FW_GAP_TOL,
) -> InnerResult:
    """Frank-Wolfe (with away steps) for the worst-case inner minimum.

    Symbols with ``P_X(y) = 0`` are excluded from the support of y since any
    mass there makes the divergence infinite. Returns ``inf`` when no coupling
    meets the budget.
    """
    pz = np.asarray(pz, dtype=float)
    px_full = np.asarray(px, dtype=float)
    d_full = budget.matrix
    if d_full.shape != (len(px_full), len(pz)):
        raise DomainError("distortion matrix does not match the alphabets")
    supp = np.flatnonzero(px_full > 0)
    px = px_full[supp]
    d = d_full[supp]

    def embed(p_small):
        full = np.zeros(d_full.shape)
        full[supp] = p_small
        return full

    start = _lp_vertex(-np.log(px), d, pz, budget.budget)
    if start is None:
        return InnerResult(math.inf, None, 0, 0.0, True)

    # active set: vertex key -> (vertex, weight)
    active = {start.tobytes(): [start, 1.0]}
    x = start.copy()
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        py = x.sum(axis=1)
        g = np.log(np.maximum(py, 1e-300) / px) + 1.0
        grad = np.repeat(g[:, None], x.shape[1], axis=1)
        s = _lp_vertex(g, d, pz, budget.budget)
        fw_dir = s - x
        gap = float(-np.sum(grad * fw_dir))
        if gap <= gap_tol:
            break
        away_key, (away_v, away_w) = max(active.items(), key=lambda kv: float(np.sum(grad * kv[1][0])))
        away_dir = x - away_v
        away_gap = float(-np.sum(grad * away_dir))
        if gap >= away_gap or len(active) == 1:
            direction, gmax, fw_step = fw_dir, 1.0, True
        else:
            direction, gmax, fw_step = away_dir, away_w / (1 - away_w), False
        step = _line_search(py, direction.sum(axis=1), px, gmax)
        if step <= 0:
            if fw_step:
                break
            # no progress along the away direction; drop to a plain FW step
            direction, gmax, fw_step = fw_dir, 1.0, True
            step = _line_search(py, direction.sum(axis=1), px, gmax)
            if step <= 0:
                break
        x = x + step * direction
        if fw_step:
            for entry in active.values():
                entry[1] *= 1 - step
            key = s.tobytes()
            if key in active:
                active[key][1] += step
            else:
                active[key] = [s, step]
            if step >= 1 - 1e-15:
                active = {key: [s, 1.0]}
        else:
            for entry in active.values():
                entry[1] *= 1 + step
            active[away_key][1] -= step
            if step >= gmax * (1 - 1e-12):
                del active[away_key]
        active = {kk: vv for kk, vv in active.items() if vv[1] > 1e-15}
    value = _kl_rows(x.sum(axis=1), px)
    return InnerResult(max(0.0, value), embed(x), it, gap, gap <= gap_tol)


def inner_divergence_grid(z_counts: Sequence[int], px: Sequence[float], budget: AttackBudget) -> float:
    """Exhaustive minimum over joint count matrices with the given z column sums.

    The 1/n-grid oracle for :func:`inner_divergence`; ``inf`` if infeasible.
    """
    z_counts = [int(c) for c in z_counts]
    n = sum(z_counts)
    px = np.asarray(px, dtype=float)
    d = budget.matrix
    k = len(px)
    limit = budget.budget * n * (1 + 1e-12) + 1e-12
    best = math.inf
    columns = [tuple(compositions(m, k)) for m in z_counts]
    for cols in itertools.product(*columns):
        joint = np.array(cols, dtype=float).T  # rows y, columns z
        if float(np.sum(joint * d)) > limit:
            continue
        best = min(best, kl_divergence(joint.sum(axis=1) / n, px))
    return best


def inner_min(pz, src: MemorylessSource | None, budget: AttackBudget, n: int | None = None) -> float:
    """Inner minimum used by the worst-case regions; 0 for the universal variant."""
    if src is None:
        return 0.0
    res = inner_divergence(pz, src.probs, budget)
    value = res.value
    if not res.converged and n is not None and n <= GRID_FALLBACK_N:
        counts = np.rint(np.asarray(pz) * n).astype(int)
        value = min(value, inner_divergence_grid(counts, src.probs, budget))
    return value


def worstcase_statistic(src: MemorylessSource | None, j: EmpiricalJoint, budget: AttackBudget) -> float:
    """``I(Z;U) + min D(P_y||P_X)`` for the (u, z) joint type ``j``."""
    return mutual_information(j) + inner_min(j.col_marginal(), src, budget, j.n)


def worstcase_accepts(
    src: MemorylessSource, u: Sequence, z: Sequence, lam: float, budget: AttackBudget
) -> Decision:
    """H1 iff ``I(Z;U) + inner min >= lam + |A| ln(n+1)/n``."""
    if not lam > 0:
        raise DomainError("lam must be > 0")
    j = _uz_joint(src.alphabet, u, z)
    return Decision.of(worstcase_statistic(src, j, budget) >= lam + _threshold(j.n, src.alphabet.size))


def random_wm_worstcase_accepts(
    src: MemorylessSource,
    src_u: MemorylessSource,
    u: Sequence,
    z: Sequence,
    lam: float,
    budget: AttackBudget,
) -> Decision:
    """Worst-case region over pairs (u, z); adds ``D(P_u||P_U)`` to the statistic."""
    if not lam > 0:
        raise DomainError("lam must be > 0")
    if src_u.alphabet != WATERMARK:
        raise DomainError("watermark source must live on {-1, +1}")
    j = _uz_joint(src.alphabet, u, z)
    stat = worstcase_statistic(src, j, budget) + kl_divergence(j.row_marginal(), src_u.probs)
    return Decision.of(stat >= lam + _threshold(j.n, src.alphabet.size))


# ------------------------------------------------------ worst-case channel


def _feasible_cond_types(yi: np.ndarray, budget: AttackBudget, k: int):
    """Conditional types of z given y (per-symbol rows) within the attack budget."""
    n = len(yi)
    m = np.bincount(yi, minlength=k)
    limit = budget.budget * n * (1 + 1e-12) + 1e-12
    d = budget.matrix
    for rows in itertools.product(*(tuple(compositions(int(c), k)) for c in m)):
        if sum(float(np.dot(row, d[a])) for a, row in enumerate(rows)) <= limit:
            yield rows


@dataclass(frozen=True)
class ExchangeableWorstCase:
    """``W*(z|y) = c_n(y) / |T(z|y)|`` on distortion-feasible z, zero elsewhere."""

    budget: AttackBudget
    alphabet: Alphabet
    n: int
    cap: int = ENUMERATION_CAP

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.n > self.cap:
            raise CapExceeded(f"n={self.n} exceeds enumeration cap {self.cap}")
        if self.budget.matrix.shape[0] != self.alphabet.size:
            raise DomainError("attack distortion does not match the alphabet")

    def _idx(self, seq) -> np.ndarray:
        idx = self.alphabet.index(seq)
        if len(idx) != self.n:
            raise DomainError(f"expected length {self.n}, got {len(idx)}")
        return idx

    def type_count(self, y) -> int:
        """Number of feasible conditional types T(z|y); ``c_n(y)`` is its reciprocal."""
        yi = self._idx(y)
        return sum(1 for _ in _feasible_cond_types(yi, self.budget, self.alphabet.size))

    def c_n(self, y) -> float:
        return 1.0 / self.type_count(y)

    def _feasible(self, yi, zi) -> bool:
        limit = self.budget.budget * self.n * (1 + 1e-12) + 1e-12
        return self.budget.total(yi, zi) <= limit

    def prob_exact(self, y, z) -> Fraction:
        yi, zi = self._idx(y), self._idx(z)
        if not self._feasible(yi, zi):
            return Fraction(0)
        k = self.alphabet.size
        size = 1
        for a in range(k):
            counts = np.bincount(zi[yi == a], minlength=k)
            size *= math.factorial(int(counts.sum())) // math.prod(math.factorial(int(c)) for c in counts)
        return Fraction(1, self.type_count(y) * size)

    def prob(self, y, z) -> float:
        yi, zi = self._idx(y), self._idx(z)
        if not self._feasible(yi, zi):
            return 0.0
        k = self.alphabet.size
        log_size = sum(log_multinomial(np.bincount(zi[yi == a], minlength=k)) for a in range(k))
        return math.exp(-log_size) / self.type_count(y)


def wstar_prob(y, z, budget: AttackBudget, alphabet: Alphabet | None = None) -> float:
    """``W*(z|y)``; depends on nothing but (y, z) and the attack budget."""
    if alphabet is None:
        alphabet = Alphabet.range(budget.matrix.shape[0])
    return ExchangeableWorstCase(budget, alphabet, len(y)).prob(y, z)


# ------------------------------------------------------------- embedders


def _cond_z_types(uy: np.ndarray) -> np.ndarray:
    """All (u, y, z) count tensors whose (u, y) margin is ``uy``; shape (T, 2, k, k)."""
    k = uy.shape[1]
    cells = [(b, a, int(uy[b, a])) for b in range(2) for a in range(k) if uy[b, a] > 0]
    options = [tuple(compositions(m, k)) for _, _, m in cells]
    combos = list(itertools.product(*options))
    out = np.zeros((len(combos), 2, k, k), dtype=np.int64)
    for t, combo in enumerate(combos):
        for (b, a, _), row in zip(cells, combo):
            out[t, b, a] = row
    return out


def _xlogx(c: np.ndarray) -> np.ndarray:
    c = c.astype(float)
    return np.where(c > 0, c * np.log(np.where(c > 0, c, 1.0)), 0.0)


def _mi_uz(N: np.ndarray, n: int) -> np.ndarray:
    uz = N.sum(axis=2)
    u = uz.sum(axis=2)
    z = uz.sum(axis=1)
    h = _xlogx(uz).sum(axis=(1, 2)) - _xlogx(u).sum(axis=1) - _xlogx(z).sum(axis=1) + _xlogx(np.array(n))
    return np.maximum(h / n, 0.0)


def _cmi_zu_given_y(N: np.ndarray, n: int) -> np.ndarray:
    # I(Z;U|Y) = sum N ln(N N_y / (N_uy N_yz)) / n
    uy = N.sum(axis=3)
    yz = N.sum(axis=1)
    y = yz.sum(axis=2)
    v = _xlogx(N).sum(axis=(1, 2, 3)) + _xlogx(y).sum(axis=1) - _xlogx(uy).sum(axis=(1, 2)) - _xlogx(yz).sum(axis=(1, 2))
    return np.maximum(v / n, 0.0)


def _channel_divergence(N: np.ndarray, n: int, W: np.ndarray) -> np.ndarray:
    """``sum_a P_y(a) D(P(Z|Y=a) || W(.|a))`` per tensor; inf off the channel support."""
    yz = N.sum(axis=1).astype(float)
    y = yz.sum(axis=2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = yz / (y * W[None])
        terms = np.where(yz > 0, yz * np.log(ratio), 0.0)
    return terms.sum(axis=(1, 2)) / n


def _z_divergence(N: np.ndarray, n: int, Q: np.ndarray) -> np.ndarray:
    z = N.sum(axis=(1, 2)).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(z > 0, z * np.log(z / (n * Q[None])), 0.0)
    return np.maximum(terms.sum(axis=1) / n, 0.0)


@dataclass(frozen=True)
class AttackEmbedResult:
    """Chosen stegotext and the false-negative exponent that selected it."""

    y: tuple
    ytype: tuple
    exponent: float  # +inf when no z type leads to a miss
    statistic: float  # detection statistic of y itself (tie-break)
    distortion: float


def memoryless_miss_exponent(
    uy: np.ndarray, attack: MemorylessAttack, Q: MemorylessSource, lam: float
) -> float:
    """Smallest ``I(Z;U|Y) + sum_a P_y(a) D(P(Z|Y=a)||W)`` over z types in the H0 region."""
    n = int(uy.sum())
    k = uy.shape[1]
    N = _cond_z_types(uy)
    inside = _mi_uz(N, n) + _z_divergence(N, n, Q.probs) >= lam - _threshold(n, k) - 1e-12
    vals = _cmi_zu_given_y(N, n) + _channel_divergence(N, n, attack.W)
    vals = np.where(inside, np.inf, vals)
    return float(vals.min())


def worstcase_miss_exponent(
    uy: np.ndarray, budget: AttackBudget, lam: float, src: MemorylessSource | None = None
) -> float:
    """Smallest ``I(Z;U|Y)`` over feasible z types outside the worst-case region."""
    n = int(uy.sum())
    k = uy.shape[1]
    N = _cond_z_types(uy)
    yz = N.sum(axis=1)
    feasible = (yz * budget.matrix[None]).sum(axis=(1, 2)) <= budget.budget * n * (1 + 1e-12) + 1e-12
    stat = _mi_uz(N, n)
    if src is not None:
        zc = N.sum(axis=(1, 2))
        cache = {}
        extra = np.empty(len(N))
        for t, row in enumerate(zc):
            key = tuple(int(v) for v in row)
            if key not in cache:
                cache[key] = inner_min(np.asarray(key) / n, src, budget, n)
            extra[t] = cache[key]
        stat = stat + extra
    miss = feasible & (stat < lam + _threshold(n, k) - 1e-12)
    vals = np.where(miss, _cmi_zu_given_y(N, n), np.inf)
    return float(vals.min())


def _outer_search(alphabet, x, u, c: EmbedConstraint, score_fn, stat_fn, cap) -> AttackEmbedResult:
    if len(x) != len(u):
        raise DomainError(f"length mismatch: {len(x)} != {len(u)}")
    if len(x) > cap:
        raise CapExceeded(f"attack-aware embedding needs n <= {cap}, got n={len(x)}")
    if alphabet.size > MAX_EXACT_ALPHABET:
        raise CapExceeded(f"attack-aware embedding needs |A| <= {MAX_EXACT_ALPHABET}")
    xi, ui = alphabet.index(x), WATERMARK.index(u)
    cells = Cells.of(xi, ui, alphabet.size)
    d = c.matrix
    limit = c.budget * cells.n * (1 + 1e-12) + 1e-12
    best = None
    for t in cells.all_types():
        if cells.distortion(t, d) > limit:
            continue
        uy = cells.yu_counts(t)
        value = score_fn(uy)
        stat = stat_fn(uy)
        mi = mutual_information(EmpiricalJoint(WATERMARK, alphabet, uy))
        key = rank_key(value, stat, mi, t)
        if best is None or key < best[0]:
            best = (key, t, value, stat)
    if best is None:
        raise InfeasibleError("no stegotext satisfies the distortion constraint")
    _, t, value, stat = best
    y = alphabet.decode(cells.representative(t))
    return AttackEmbedResult(y, t, value, stat, cells.distortion(t, d) / cells.n)


def embed_memoryless_attack(
    src: MemorylessSource,
    attack: MemorylessAttack,
    x: Sequence,
    u: Sequence,
    lam: float,
    c: EmbedConstraint,
    cap: int = ENUMERATION_CAP,
) -> AttackEmbedResult:
    """Embedder maximizing the false-negative exponent under a known memoryless attack.

    Every distortion-feasible conditional type of y given (x, u) is scored by
    the smallest miss exponent over the z types it can produce. Ties go to the
    larger attack-free statistic ``I(U;Y) + D(P_y||Q)``, then larger I(U;Y),
    then the smallest count matrix.
    """
    if not lam > 0:
        raise DomainError("lam must be > 0")
    Q = output_marginal(src, attack)
    a = src.alphabet

    def stat(uy):
        j = EmpiricalJoint(WATERMARK, a, uy)
        return mutual_information(j) + kl_divergence(j.col_marginal(), Q.probs)

    return _outer_search(a, x, u, c, lambda uy: memoryless_miss_exponent(uy, attack, Q, lam), stat, cap)


def embed_worstcase(
    x: Sequence,
    u: Sequence,
    lam: float,
    c: EmbedConstraint,
    budget: AttackBudget,
    alphabet: Alphabet | None = None,
    src: MemorylessSource | None = None,
    cap: int = ENUMERATION_CAP,
) -> AttackEmbedResult:
    """Embedder maximizing the miss exponent under the worst exchangeable attack.

    Universal by default: the region uses I(Z;U) alone. Passing ``src`` adds
    the inner divergence term of the known-source region.
    """
    if not lam > 0:
        raise DomainError("lam must be > 0")
    a = src.alphabet if src is not None else alphabet
    if a is None:
        raise DomainError("alphabet is required without a source")

    def stat(uy):
        j = EmpiricalJoint(WATERMARK, a, uy)
        return worstcase_statistic(src, j, budget)

    return _outer_search(a, x, u, c, lambda uy: worstcase_miss_exponent(uy, budget, lam, src), stat, cap)


# --------------------------------------------- exact false-positive sums


def _as_fraction(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v).limit_denominator(10**9)


def exact_sequence_probs(pmf: Sequence, n: int) -> dict:
    """Memoryless probabilities of every index sequence of length n, as Fractions."""
    p = [_as_fraction(v) for v in pmf]
    out = {}
    for seq in itertools.product(range(len(p)), repeat=n):
        out[seq] = math.prod((p[s] for s in seq), start=Fraction(1))
    return out


def false_positive_exact(
    region_weight: dict,
    px_seq: dict,
    channel: dict,
) -> Fraction:
    """``sum_z w(z) sum_y P_X(y) W(z|y)`` with exact rationals.

    ``region_weight`` maps z to the P_U-mass of watermarks u with (u, z) in
    the region; ``channel`` maps y to a dict ``{z: W(z|y)}``.
    """
    total = Fraction(0)
    for y, py in px_seq.items():
        row = channel[y]
        s = Fraction(0)
        for z, w in row.items():
            rw = region_weight.get(z)
            if rw:
                s += rw * w
        total += py * s
    return total


def permute_channel(channel: dict, perm: Sequence[int]) -> dict:
    """``W^pi(z|y) = W(pi z | pi y)`` for an explicit channel table."""

    perm = list(perm)
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i

    def apply(seq, order):
        return tuple(seq[i] for i in order)

    # (pi z)_i = z_{perm[i]}, so z = pi^{-1} z' for every stored z'
    return {y: {apply(zp, inv): w for zp, w in channel[apply(y, perm)].items()} for y in channel}


def joint_type_region_weight(types: set, pu_seq: dict, n: int, k: int) -> dict:
    """Region weights for the union of (u, z) joint types given as count keys."""
    weights: dict = {}
    for u, pu in pu_seq.items():
        ui = np.asarray(u)
        for z in itertools.product(range(k), repeat=n):
            key = tuple(joint_counts(ui, np.asarray(z), 2, k).ravel())
            if key in types:
                weights[z] = weights.get(z, Fraction(0)) + pu
    return weights
