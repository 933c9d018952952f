"""Empirical distributions and method-of-types primitives.

All information quantities are in nats with the convention ``0 ln 0 = 0``.
Counts are kept as exact integers; frequencies are derived on demand.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import CapExceeded, DomainError

PMF_TOL = 1e-12
ENUMERATION_CAP = 12


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite set of distinct symbols."""

    symbols: tuple

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if not symbols:
            raise DomainError("alphabet must contain at least one symbol")
        if len(set(symbols)) != len(symbols):
            raise DomainError(f"alphabet symbols are not distinct: {symbols}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_lookup", {s: i for i, s in enumerate(symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, seq: Sequence) -> np.ndarray:
        """Map a symbol sequence to integer indices, rejecting unknown symbols."""
        lookup = self._lookup
        try:
            return np.fromiter((lookup[s] for s in seq), dtype=np.int64)
        except KeyError as exc:
            raise DomainError(f"symbol {exc.args[0]!r} not in alphabet {self.symbols}") from None
        except TypeError:
            # unhashable numpy scalars, e.g. 0-d arrays
            return self.index([s.item() if hasattr(s, "item") else s for s in seq])

    def decode(self, idx: Sequence[int]) -> tuple:
        return tuple(self.symbols[int(i)] for i in idx)

    @classmethod
    def range(cls, size: int) -> "Alphabet":
        return cls(tuple(range(size)))


WATERMARK = Alphabet((-1, 1))
BINARY = Alphabet((0, 1))


@dataclass(frozen=True)
class MemorylessSource:
    """A pmf over a finite alphabet, e.g. the covertext source P_X or P_U."""

    alphabet: Alphabet
    pmf: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.pmf)
        if len(p) != self.alphabet.size:
            raise DomainError(f"pmf has {len(p)} entries, alphabet has {self.alphabet.size}")
        if any(v < 0 or not math.isfinite(v) for v in p):
            raise DomainError(f"pmf entries must be finite and nonnegative: {p}")
        if abs(math.fsum(p) - 1.0) > PMF_TOL:
            raise DomainError(f"pmf sums to {math.fsum(p)!r}, not 1")
        object.__setattr__(self, "pmf", p)

    @property
    def probs(self) -> np.ndarray:
        return np.asarray(self.pmf)

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> "MemorylessSource":
        k = alphabet.size
        return cls(alphabet, (1.0 / k,) * k)

    def sample(self, n: int, rng: np.random.Generator) -> tuple:
        return self.alphabet.decode(rng.choice(self.alphabet.size, size=n, p=self.probs))


@dataclass(frozen=True)
class EmpiricalJoint:
    """Joint counts of a pair sequence over ``row_alphabet x col_alphabet``."""

    row_alphabet: Alphabet
    col_alphabet: Alphabet
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64, copy=True)
        if c.shape != (self.row_alphabet.size, self.col_alphabet.size):
            raise DomainError(f"counts shape {c.shape} does not match alphabets")
        if (c < 0).any():
            raise DomainError("counts must be nonnegative")
        if c.sum() < 1:
            raise DomainError("empirical joint needs n >= 1")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def freqs(self) -> np.ndarray:
        return self.counts / self.n

    def row_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_counts(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def row_marginal(self) -> np.ndarray:
        return self.row_counts() / self.n

    def col_marginal(self) -> np.ndarray:
        return self.col_counts() / self.n

    def transpose(self) -> "EmpiricalJoint":
        return EmpiricalJoint(self.col_alphabet, self.row_alphabet, self.counts.T)

    def key(self) -> tuple:
        return tuple(int(v) for v in self.counts.ravel())


def empirical_joint(
    u: Sequence,
    y: Sequence,
    row_alphabet: Alphabet = WATERMARK,
    col_alphabet: Alphabet = BINARY,
) -> EmpiricalJoint:
    """Count pairs ``(u_i, y_i)``; ``u`` indexes rows and ``y`` columns."""
    if len(u) != len(y):
        raise DomainError(f"length mismatch: {len(u)} != {len(y)}")
    if len(u) < 1:
        raise DomainError("sequences must be nonempty")
    ui = row_alphabet.index(u)
    yi = col_alphabet.index(y)
    return EmpiricalJoint(row_alphabet, col_alphabet, joint_counts(ui, yi, row_alphabet.size, col_alphabet.size))


def joint_counts(ui: np.ndarray, yi: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Integer count matrix from index sequences."""
    flat = np.bincount(np.asarray(ui) * n_cols + np.asarray(yi), minlength=n_rows * n_cols)
    return flat.reshape(n_rows, n_cols)


def _xlogx_counts(c: np.ndarray, n: float) -> float:
    # -sum (c/n) ln(c/n) over positive cells
    c = np.asarray(c, dtype=float).ravel()
    c = c[c > 0]
    p = c / n
    return float(-np.sum(p * np.log(p)))


def entropy(pmf) -> float:
    """Shannon entropy in nats."""
    p = np.asarray(pmf, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def joint_entropy(j: EmpiricalJoint) -> float:
    return _xlogx_counts(j.counts, j.n)


def conditional_entropy(j: EmpiricalJoint, given: str = "row") -> float:
    """Empirical conditional entropy; ``given="row"`` is H(col | row).

    Computed as ``-sum p(a,b) ln p(b|a)`` so that functional dependence gives
    exactly zero rather than a rounding residue.
    """
    if given not in ("row", "col"):
        raise DomainError(f"given must be 'row' or 'col', not {given!r}")
    c = j.counts.astype(float)
    marg = c.sum(axis=1, keepdims=True) if given == "row" else c.sum(axis=0, keepdims=True)
    mask = c > 0
    cond = np.divide(c, marg, out=np.ones_like(c), where=mask)
    return float(-np.sum(c[mask] / j.n * np.log(cond[mask])))


def mutual_information(j: EmpiricalJoint) -> float:
    """Empirical mutual information, clipped at zero against rounding."""
    c = j.counts.astype(float)
    n = j.n
    mask = c > 0
    outer = np.outer(c.sum(axis=1), c.sum(axis=0))
    ratio = np.divide(c * n, outer, out=np.ones_like(c), where=mask)
    return max(0.0, float(np.sum(c[mask] / n * np.log(ratio[mask]))))


def kl_divergence(p, q) -> float:
    """D(p||q) in nats; ``+inf`` when p puts mass where q has none."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise DomainError(f"pmf shapes differ: {p.shape} vs {q.shape}")
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return max(0.0, float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask])))))


def log_prob_memoryless(src: MemorylessSource, y: Sequence) -> float:
    """ln P_X(y) for a memoryless source; ``-inf`` on zero-probability symbols."""
    idx = src.alphabet.index(y)
    return log_prob_from_counts(src, np.bincount(idx, minlength=src.alphabet.size))


def log_prob_from_counts(src: MemorylessSource, counts: np.ndarray) -> float:
    p = src.probs
    counts = np.asarray(counts)
    used = counts > 0
    if np.any(p[used] == 0):
        return -math.inf
    return float(np.sum(counts[used] * np.log(p[used])))


def log_multinomial(counts) -> float:
    """ln of the multinomial coefficient ``m! / prod(c_i!)``."""
    c = np.asarray(counts, dtype=float)
    return float(gammaln(c.sum() + 1) - gammaln(c + 1).sum())


def conditional_type_log_size(j: EmpiricalJoint) -> float:
    """Exact ln|T(col | row)|: product of multinomials over row cells."""
    return float(sum(log_multinomial(row) for row in j.counts))


def conditional_type_size_bounds(j: EmpiricalJoint) -> tuple[float, float]:
    """Bracket for ln|T(y|u)|: ``(nH - |A| ln(n+1), nH)`` with H = H(col|row)."""
    upper = j.n * conditional_entropy(j, "row")
    lower = upper - j.col_alphabet.size * math.log(j.n + 1)
    return lower, upper


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All ``parts``-tuples of nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def conditional_types(row_counts: Sequence[int], k: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All count matrices with the given row sums and ``k`` columns."""
    return itertools.product(*(tuple(compositions(int(m), k)) for m in row_counts))


def multiset_permutations(counts: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Distinct orderings of a multiset given as per-symbol counts, lexicographic."""
    if sum(counts) == 0:
        yield ()
        return
    for s, c in enumerate(counts):
        if c:
            reduced = tuple(counts[:s]) + (c - 1,) + tuple(counts[s + 1:])
            for tail in multiset_permutations(reduced):
                yield (s,) + tail


def enumerate_conditional_type(
    j_target: EmpiricalJoint, u: Sequence, cap: int = ENUMERATION_CAP
) -> Iterator[tuple]:
    """Yield every y whose joint type with ``u`` equals ``j_target``.

    Brute-force oracle for small n. ``u`` is read in ``j_target.row_alphabet``.
    An inconsistent target (row marginal differs from u's composition) yields
    nothing.
    """
    if len(u) > cap:
        raise CapExceeded(f"n={len(u)} exceeds enumeration cap {cap}")
    ui = j_target.row_alphabet.index(u)
    if len(ui) != j_target.n:
        return
    if not np.array_equal(np.bincount(ui, minlength=j_target.row_alphabet.size), j_target.row_counts()):
        return
    cells = [np.flatnonzero(ui == a) for a in range(j_target.row_alphabet.size)]
    per_cell = [list(multiset_permutations(tuple(int(c) for c in row))) for row in j_target.counts]
    y = np.zeros(len(ui), dtype=np.int64)
    for combo in itertools.product(*per_cell):
        for positions, symbols in zip(cells, combo):
            y[positions] = symbols
        yield j_target.col_alphabet.decode(y)
