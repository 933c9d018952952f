"""Attack-free decision regions and the optimal embedder over finite alphabets.

Every detector here sees only the joint type of ``(u, y)``. The embedders
search over conditional types of ``y`` given ``(x, u)``: the objective and the
additive distortion depend on ``y`` only through that type, so the search runs
over polynomially many count matrices instead of ``|A|^n`` sequences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .decision import Decision
from .empirical import (
    ENUMERATION_CAP,
    WATERMARK,
    Alphabet,
    EmpiricalJoint,
    MemorylessSource,
    compositions,
    conditional_entropy,
    joint_counts,
    joint_entropy,
    kl_divergence,
    log_prob_from_counts,
    mutual_information,
)
from .errors import CapExceeded, DomainError, InfeasibleError

VARIANTS = ("known_source", "universal", "random_watermark", "individual_covertext")

# scores closer than this are ties; see rank_key
TIE_TOL = 1e-12


@dataclass(frozen=True)
class DetectorConfig:
    lam: float
    variant: str = "known_source"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown detector variant {self.variant!r}")
        if not (self.lam > 0) or math.isnan(self.lam):
            raise DomainError(f"false-positive exponent must be > 0, got {self.lam}")


@dataclass(frozen=True)
class EmbedConstraint:
    """Single-letter distortion matrix ``d[a, b]`` and per-symbol budget."""

    matrix: np.ndarray
    budget: float

    def __post_init__(self):
        d = np.array(self.matrix, dtype=float, copy=True)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DomainError(f"distortion matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or (d < 0).any():
            raise DomainError("distortion must be finite and nonnegative")
        if self.budget < 0:
            raise DomainError(f"distortion budget must be >= 0, got {self.budget}")
        d.setflags(write=False)
        object.__setattr__(self, "matrix", d)

    @classmethod
    def hamming(cls, alphabet: Alphabet, budget: float):
        k = alphabet.size
        return cls(1.0 - np.eye(k), budget)

    @classmethod
    def squared(cls, alphabet: Alphabet, budget: float):
        s = np.asarray(alphabet.symbols, dtype=float)
        return cls((s[:, None] - s[None, :]) ** 2, budget)

    @classmethod
    def from_function(cls, alphabet: Alphabet, fn: Callable, budget: float):
        s = alphabet.symbols
        return cls([[fn(a, b) for b in s] for a in s], budget)

    def total(self, a_idx: np.ndarray, b_idx: np.ndarray) -> float:
        return float(self.matrix[a_idx, b_idx].sum())


# ---------------------------------------------------------------- detectors


def _indices(src_alphabet: Alphabet, u: Sequence, y: Sequence) -> tuple[np.ndarray, np.ndarray]:
    if len(u) != len(y):
        raise DomainError(f"length mismatch: {len(u)} != {len(y)}")
    if len(u) == 0:
        raise DomainError("sequences must be nonempty")
    return WATERMARK.index(u), src_alphabet.index(y)


def _joint(alphabet: Alphabet, ui: np.ndarray, yi: np.ndarray) -> EmpiricalJoint:
    return EmpiricalJoint(WATERMARK, alphabet, joint_counts(ui, yi, 2, alphabet.size))


def _check_variant(cfg: DetectorConfig, variant: str):
    if cfg.variant != variant:
        raise DomainError(f"detector config is for {cfg.variant!r}, expected {variant!r}")


def lambda_star_statistic(src: MemorylessSource, j: EmpiricalJoint, lam: float) -> float:
    """``ln P_X(y) + n H(Y|U) + lam n - |A| ln(n+1)``; H1 iff <= 0."""
    n = j.n
    logp = log_prob_from_counts(src, j.col_counts())
    if logp == -math.inf:
        return -math.inf
    return logp + n * conditional_entropy(j, "row") + lam * n - src.alphabet.size * math.log(n + 1)


def lambda_star_accepts(src: MemorylessSource, u: Sequence, y: Sequence, cfg: DetectorConfig) -> Decision:
    """Known-source region: H1 iff ln P_X(y) + nH(Y|U) + lam n - |A| ln(n+1) <= 0."""
    _check_variant(cfg, "known_source")
    ui, yi = _indices(src.alphabet, u, y)
    return Decision.of(lambda_star_statistic(src, _joint(src.alphabet, ui, yi), cfg.lam) <= 0)


def universal_accepts(u: Sequence, y: Sequence, cfg: DetectorConfig, alphabet: Alphabet) -> Decision:
    """Maximum-mutual-information rule: H1 iff n I(U;Y) >= lam n - |A| ln(n+1)."""
    _check_variant(cfg, "universal")
    ui, yi = _indices(alphabet, u, y)
    j = _joint(alphabet, ui, yi)
    n = j.n
    return Decision.of(n * mutual_information(j) >= cfg.lam * n - alphabet.size * math.log(n + 1))


def random_wm_accepts(
    src_x: MemorylessSource,
    src_u: MemorylessSource,
    u: Sequence,
    y: Sequence,
    cfg: DetectorConfig,
) -> Decision:
    """Random-watermark region over pairs (u, y), built on the joint type class."""
    _check_variant(cfg, "random_watermark")
    if src_u.alphabet != WATERMARK:
        raise DomainError("watermark source must live on {-1, +1}")
    ui, yi = _indices(src_x.alphabet, u, y)
    j = _joint(src_x.alphabet, ui, yi)
    n = j.n
    lx = log_prob_from_counts(src_x, j.col_counts())
    lu = log_prob_from_counts(src_u, j.row_counts())
    if lx == -math.inf or lu == -math.inf:
        return Decision.H1
    stat = lx + lu + n * joint_entropy(j) + cfg.lam * n - src_x.alphabet.size * math.log(n + 1)
    return Decision.of(stat <= 0)


def individual_covertext_accepts(u: Sequence, y: Sequence, cfg: DetectorConfig, alphabet: Alphabet) -> Decision:
    """H1 iff H(U|Y) <= ln 2 - lam (threshold in nats)."""
    _check_variant(cfg, "individual_covertext")
    ui, yi = _indices(alphabet, u, y)
    j = _joint(alphabet, ui, yi)
    return Decision.of(conditional_entropy(j, "col") <= math.log(2) - cfg.lam)


# ------------------------------------------------------- type-space search


@dataclass(frozen=True)
class Cells:
    """Positions of a pair sequence (x, u) grouped by their symbol pair."""

    keys: tuple[tuple[int, int], ...]  # (x index, u index), sorted
    positions: tuple[np.ndarray, ...]
    k: int
    n: int

    @classmethod
    def of(cls, xi: np.ndarray, ui: np.ndarray, k: int) -> "Cells":
        keys, positions = [], []
        for a in range(k):
            for b in range(2):
                pos = np.flatnonzero((xi == a) & (ui == b))
                if len(pos):
                    keys.append((a, b))
                    positions.append(pos)
        return cls(tuple(keys), tuple(positions), k, len(xi))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.positions)

    def all_types(self) -> Iterable[tuple[tuple[int, ...], ...]]:
        return itertools.product(*(tuple(compositions(m, self.k)) for m in self.sizes))

    def yu_counts(self, ytype) -> np.ndarray:
        """Joint counts of (u, y): rows are watermark symbols."""
        out = np.zeros((2, self.k), dtype=np.int64)
        for (_, b), row in zip(self.keys, ytype):
            out[b] += row
        return out

    def distortion(self, ytype, d: np.ndarray) -> float:
        return float(sum(np.dot(row, d[a]) for (a, _), row in zip(self.keys, ytype)))

    def representative(self, ytype) -> np.ndarray:
        """Canonical member of the conditional type: symbols ascending within each cell."""
        y = np.empty(self.n, dtype=np.int64)
        for pos, row in zip(self.positions, ytype):
            y[pos] = np.repeat(np.arange(self.k), row)
        return y

    def type_of(self, yi: np.ndarray) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(int(c) for c in np.bincount(yi[pos], minlength=self.k)) for pos in self.positions)


def _info_terms(uy: np.ndarray, src: MemorylessSource | None) -> tuple[float, float]:
    j = EmpiricalJoint(WATERMARK, Alphabet.range(uy.shape[1]), uy)
    mi = mutual_information(j)
    div = 0.0 if src is None else kl_divergence(j.col_marginal(), src.probs)
    return mi, div


def rank_key(primary: float, secondary: float, tertiary: float, ytype) -> tuple:
    """Sort key: larger primary, then secondary, then tertiary, then smallest counts.

    Scores are snapped to a ``TIE_TOL`` lattice so rounding noise does not
    decide ties; the final fallback is lexicographic on the flattened
    conditional-type count matrix.
    """

    def snap(v):
        if v == math.inf:
            return -math.inf
        if v == -math.inf:
            return math.inf
        return -round(v / TIE_TOL)

    return (snap(primary), snap(secondary), snap(tertiary), tuple(itertools.chain.from_iterable(ytype)))


@dataclass(frozen=True)
class EmbedResult:
    """Chosen stegotext with the type-level quantities that selected it."""

    y: tuple
    ytype: tuple
    score: float  # per-symbol I(U;Y) + D(P_y||P_X), or I(U;Y) when universal
    mutual_info: float
    distortion: float
    mode: str


def _score_type(cells: Cells, ytype, src):
    mi, div = _info_terms(cells.yu_counts(ytype), src)
    return mi + div, mi


def optimal_embed_discrete(
    src: MemorylessSource | None,
    x: Sequence,
    u: Sequence,
    c: EmbedConstraint,
    mode: str = "exact",
    cap: int = ENUMERATION_CAP,
    alphabet: Alphabet | None = None,
) -> tuple:
    """Stegotext minimizing ``ln P_X(y) + n H(Y|U)`` within the distortion budget.

    ``src=None`` selects the universal embedder (maximize I(U;Y)); pass the
    symbol ``alphabet`` in that case. See :func:`optimal_embed_discrete_result`.
    """
    return optimal_embed_discrete_result(src, x, u, c, mode=mode, cap=cap, alphabet=alphabet).y


def optimal_embed_discrete_result(
    src: MemorylessSource | None,
    x: Sequence,
    u: Sequence,
    c: EmbedConstraint,
    mode: str = "exact",
    cap: int = ENUMERATION_CAP,
    alphabet: Alphabet | None = None,
) -> EmbedResult:
    """Search conditional types of y given (x, u).

    The objective equals ``-n [I(U;Y) + D(P_y||P_X)]``, so the search
    maximizes that score. ``mode="exact"`` enumerates every conditional type
    (n <= cap). ``mode="search"`` works for any n: it evaluates the vertices of
    the relaxed problem over conditional distributions (deterministic maps per
    cell, plus single-cell splits where the distortion budget binds), rounds
    them to realizable types, then polishes by unit moves.

    Ties: larger I(U;Y) first, then the lexicographically smallest count matrix.
    """
    alphabet = src.alphabet if src is not None else alphabet
    if alphabet is None:
        raise DomainError("alphabet is required for the universal embedder")
    if len(x) != len(u):
        raise DomainError(f"length mismatch: {len(x)} != {len(u)}")
    d = c.matrix
    if d.shape[0] != alphabet.size:
        raise DomainError("distortion matrix does not match the alphabet")
    xi, ui = alphabet.index(x), WATERMARK.index(u)
    cells = Cells.of(xi, ui, alphabet.size)
    limit = c.budget * cells.n * (1 + 1e-12) + 1e-12

    def evaluate(t):
        score, mi = _score_type(cells, t, src)
        return rank_key(score, mi, 0.0, t), score, mi

    if mode == "exact":
        if cells.n > cap:
            raise CapExceeded(f"exact mode needs n <= {cap}, got n={cells.n}")
        candidates = (t for t in cells.all_types() if cells.distortion(t, d) <= limit)
        best = None
        for t in candidates:
            key, score, mi = evaluate(t)
            if best is None or key < best[0]:
                best = (key, t, score, mi)
    elif mode == "search":
        best = _vertex_search(cells, d, limit, evaluate)
    else:
        raise DomainError(f"unknown embedding mode {mode!r}")
    if best is None:
        raise InfeasibleError("no stegotext satisfies the distortion constraint")
    _, t, score, mi = best
    dist = cells.distortion(t, d)
    if dist > limit:
        raise AssertionError("embedder produced an infeasible stegotext")
    return EmbedResult(alphabet.decode(cells.representative(t)), t, score, mi, dist / cells.n, mode)


def _vertex_search(cells: Cells, d: np.ndarray, limit: float, evaluate):
    k = cells.k
    m = cells.sizes
    n_cells = len(m)

    def det_type(assign):
        return tuple(tuple(m[i] if s == assign[i] else 0 for s in range(k)) for i in range(n_cells))

    seen = {}

    def consider(t):
        if t in seen:
            return
        if cells.distortion(t, d) > limit:
            seen[t] = None
            return
        seen[t] = evaluate(t)

    for assign in itertools.product(range(k), repeat=n_cells):
        base = det_type(assign)
        base_cost = cells.distortion(base, d)
        consider(base)
        for i in range(n_cells):
            a = cells.keys[i][0]
            for s in range(k):
                if s == assign[i]:
                    continue
                # move j units of cell i from assign[i] to s; cost is linear in j
                step = d[a, s] - d[a, assign[i]]
                if base_cost <= limit:
                    j = m[i] if step <= 0 else min(m[i], int(math.floor((limit - base_cost) / step + 1e-9)))
                else:
                    if step >= 0:
                        continue
                    j = int(math.ceil((base_cost - limit) / -step - 1e-9))
                    if j > m[i]:
                        continue
                if j <= 0:
                    continue
                row = [0] * k
                row[assign[i]] = m[i] - j
                row[s] = j
                consider(base[:i] + (tuple(row),) + base[i + 1:])

    feasible = [(v[0], t, v[1], v[2]) for t, v in seen.items() if v is not None]
    if not feasible:
        return None
    feasible.sort()
    best = feasible[0]
    for start in feasible[: min(4, len(feasible))]:
        cand = _polish(cells, d, limit, evaluate, start)
        if cand[0] < best[0]:
            best = cand
    return best


def _polish(cells, d, limit, evaluate, start):
    """Best-improvement local search with unit count moves inside one cell."""
    best = start
    while True:
        improved = None
        t = best[1]
        for i, row in enumerate(t):
            for s_from in range(cells.k):
                if row[s_from] == 0:
                    continue
                for s_to in range(cells.k):
                    if s_to == s_from:
                        continue
                    new_row = list(row)
                    new_row[s_from] -= 1
                    new_row[s_to] += 1
                    cand = t[:i] + (tuple(new_row),) + t[i + 1:]
                    if cells.distortion(cand, d) > limit:
                        continue
                    key, score, mi = evaluate(cand)
                    if key < (improved or best)[0]:
                        improved = (key, cand, score, mi)
        if improved is None:
            return best
        best = improved


def detection_objective(src: MemorylessSource, u: Sequence, y: Sequence) -> float:
    """``ln P_X(y) + n H(Y|U)``, the quantity the optimal embedder minimizes."""
    ui, yi = _indices(src.alphabet, u, y)
    j = _joint(src.alphabet, ui, yi)
    logp = log_prob_from_counts(src, j.col_counts())
    return logp + j.n * conditional_entropy(j, "row")
