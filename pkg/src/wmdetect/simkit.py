"""Monte Carlo harness for the Gaussian and discrete detectors.

Randomness: every block of ``BLOCK`` trials gets its own Philox stream keyed by
``(seed, n, hypothesis, block)`` through ``numpy.random.SeedSequence``, so the
counts do not depend on how blocks are scheduled. Gaussian samples come from
``Generator.standard_normal`` (numpy's ziggurat) on that stream.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps
from statsmodels.stats.proportion import proportion_confint

from . import exponents
from .attacks import MemorylessAttack, memoryless_attack_accepts, output_marginal
from .detect_discrete import EmbedConstraint, optimal_embed_discrete
from .empirical import Alphabet, MemorylessSource
from .errors import DomainError
from .gaussian import EmbedderKind, embed_coefficients_batch, mi_threshold_r2

SCHEMA_VERSION = "1"
BLOCK = 4096
DETECTORS = ("mi", "corr")
HYPOTHESES = ("H0", "H1")
CSV_COLUMNS = ("n", "hypothesis", "trials", "errors", "p_hat", "ci_lo", "ci_hi")
MIN_TRIALS = 100


def _check_common(n_list, trials, lam):
    n_list = tuple(int(n) for n in n_list)
    if not n_list or any(n < 1 for n in n_list):
        raise DomainError("n_list must hold positive lengths")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be strictly increasing")
    if trials < MIN_TRIALS:
        raise DomainError(f"need at least {MIN_TRIALS} trials, got {trials}")
    if not lam >= 0:
        raise DomainError("lambda must be >= 0")
    return n_list


@dataclass(frozen=True)
class SimConfig:
    """Gaussian run. ``embedder=None`` leaves the covertext untouched (D_e = 0)."""

    n_list: tuple
    trials: int
    lam: float
    seed: int
    sigma2: float = 1.0
    embedder: EmbedderKind | None = None
    detector: str = "mi"
    attack: MemorylessAttack | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_list", _check_common(self.n_list, self.trials, self.lam))
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be > 0")
        if self.detector not in DETECTORS:
            raise DomainError(f"detector must be one of {DETECTORS}")
        if self.attack is not None:
            raise DomainError("attack tables apply to discrete runs only; use DiscreteSimConfig")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def echo(self) -> dict:
        return {
            "kind": "gaussian",
            "n_list": list(self.n_list),
            "trials": self.trials,
            "lambda": self.lam,
            "seed": self.seed,
            "sigma2": self.sigma2,
            "embedder": None if self.embedder is None else self.embedder.kind,
            "de": 0.0 if self.embedder is None else self.embedder.De,
            "detector": self.detector,
        }


@dataclass(frozen=True)
class DiscreteSimConfig:
    """Discrete run: known-source region, type-search embedder, optional memoryless attack."""

    n_list: tuple
    trials: int
    lam: float
    seed: int
    source: MemorylessSource
    constraint: EmbedConstraint
    attack: MemorylessAttack | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_list", _check_common(self.n_list, self.trials, self.lam))
        if not self.lam > 0:
            raise DomainError("discrete detectors need lambda > 0")
        k = self.source.alphabet.size
        if self.constraint.matrix.shape[0] != k:
            raise DomainError("distortion matrix does not match the source alphabet")
        if self.attack is not None and self.attack.W.shape[0] != k:
            raise DomainError("attack channel does not match the source alphabet")

    def echo(self) -> dict:
        return {
            "kind": "discrete",
            "n_list": list(self.n_list),
            "trials": self.trials,
            "lambda": self.lam,
            "seed": self.seed,
            "source": list(self.source.pmf),
            "de": self.constraint.budget,
            "distortion": self.constraint.matrix.tolist(),
            "attack": None if self.attack is None else self.attack.W.tolist(),
        }


@dataclass(frozen=True)
class Cell:
    n: int
    hypothesis: str
    trials: int
    errors: int
    p_hat: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class ExponentFit:
    slope: float | None
    stderr: float | None
    intercept: float | None
    n_used: tuple
    advisory: str = ""

    @property
    def ok(self) -> bool:
        return self.slope is not None


@dataclass(frozen=True)
class SimResult:
    config: dict
    cells: tuple
    theory: float | None = None
    fit: ExponentFit | None = field(default=None)

    def cell(self, n: int, hypothesis: str) -> Cell:
        for c in self.cells:
            if c.n == n and c.hypothesis == hypothesis:
                return c
        raise KeyError((n, hypothesis))


def wilson(errors: int, trials: int) -> tuple[float, float]:
    """95% Wilson interval; a zero count gets ``[0, one-sided 95% upper bound]``."""
    if errors == 0:
        _, hi = proportion_confint(0, trials, alpha=0.10, method="wilson")
        return 0.0, float(hi)
    lo, hi = proportion_confint(errors, trials, alpha=0.05, method="wilson")
    return float(lo), float(hi)


def _cell(n, hyp, trials, errors) -> Cell:
    lo, hi = wilson(errors, trials)
    return Cell(n, hyp, trials, errors, errors / trials, lo, hi)


def _rng(seed: int, n: int, hyp: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(n, hyp, block))))


def _blocks(trials: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK, trials - b * BLOCK)) for b in range(math.ceil(trials / BLOCK))]


def _decide_h1(detector: str, corr: np.ndarray, energy: np.ndarray, n: int, lam: float) -> np.ndarray:
    # corr = <u, y>, energy = ||y||^2, ||u||^2 = n
    with np.errstate(divide="ignore", invalid="ignore"):
        r = corr / np.sqrt(n * energy)
    if detector == "corr":
        return r > math.sqrt(mi_threshold_r2(lam))
    r2 = np.minimum(r * r, 1.0)
    with np.errstate(divide="ignore"):
        mi = np.where(r2 >= 1.0, np.inf, -0.5 * np.log1p(-r2))
    return mi > lam


def _gaussian_block(cfg: SimConfig, n: int, hyp: int, block: int, size: int) -> int:
    rng = _rng(cfg.seed, n, hyp, block)
    x = rng.standard_normal((size, n)) * math.sqrt(cfg.sigma2)
    u = rng.integers(0, 2, size=(size, n), dtype=np.int8).astype(float) * 2 - 1
    xu = np.einsum("ij,ij->i", x, u)
    xx = np.einsum("ij,ij->i", x, x)
    if hyp == 0 or cfg.embedder is None:
        corr, energy = xu, xx
    else:
        a, b = embed_coefficients_batch(cfg.embedder, xx / n, xu / n)
        corr = a * xu + b * n
        energy = a * a * xx + 2 * a * b * xu + b * b * n
    h1 = _decide_h1(cfg.detector, corr, energy, n, cfg.lam)
    # H0 trials err on H1, H1 trials err on H0
    return int(np.count_nonzero(h1 if hyp == 0 else ~h1))


def _count(cfg, n, hyp, block_fn, trials, workers) -> int:
    jobs = _blocks(trials)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda bs: block_fn(cfg, n, hyp, *bs), jobs))
    else:
        parts = [block_fn(cfg, n, hyp, *bs) for bs in jobs]
    return sum(parts)


def _theory(cfg: SimConfig) -> float | None:
    if cfg.embedder is None or cfg.embedder.kind == "optimal":
        return None
    if cfg.lam == 0 and cfg.embedder.kind == "additive":
        return None
    return exponents.exponent(cfg.embedder.kind, exponents.ExponentQuery(cfg.lam, cfg.embedder.De, cfg.sigma2))


def run_trials(cfg: SimConfig, hypotheses: Sequence[str] = HYPOTHESES) -> SimResult:
    """Estimate false-positive (H0) and false-negative (H1) rates for every n."""
    cells = []
    for n in cfg.n_list:
        for name in hypotheses:
            hyp = HYPOTHESES.index(name)
            errors = _count(cfg, n, hyp, _gaussian_block, cfg.trials, cfg.workers)
            cells.append(_cell(n, name, cfg.trials, errors))
    res = SimResult(cfg.echo(), tuple(cells), _theory(cfg))
    if "H1" in hypotheses:
        res = SimResult(res.config, res.cells, res.theory, estimate_exponent(res))
    return res


def _apply_channel(W: np.ndarray, yi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(W, axis=1)
    draws = rng.random(len(yi))
    zi = (draws[:, None] >= cum[yi]).sum(axis=1)
    return np.minimum(zi, W.shape[1] - 1)


def _discrete_block(cfg: DiscreteSimConfig, n: int, hyp: int, block: int, size: int) -> int:
    rng = _rng(cfg.seed, n, hyp, block)
    src = cfg.source
    a = src.alphabet
    q = src if cfg.attack is None else output_marginal(src, cfg.attack)
    errors = 0
    for _ in range(size):
        xi = rng.choice(a.size, size=n, p=src.probs)
        u = tuple(int(v) for v in rng.integers(0, 2, size=n) * 2 - 1)
        x = a.decode(xi)
        y = x if hyp == 0 else optimal_embed_discrete(src, x, u, cfg.constraint, mode="search")
        yi = a.index(y)
        zi = yi if cfg.attack is None else _apply_channel(cfg.attack.W, yi, rng)
        h1 = bool(memoryless_attack_accepts(q, u, a.decode(zi), cfg.lam))
        errors += h1 if hyp == 0 else not h1
    return errors


def run_discrete_trials(cfg: DiscreteSimConfig, hypotheses: Sequence[str] = HYPOTHESES) -> SimResult:
    """Discrete counterpart of :func:`run_trials`; the detector is tuned to ``Q = P_X W``."""
    cells = []
    for n in cfg.n_list:
        for name in hypotheses:
            hyp = HYPOTHESES.index(name)
            errors = _count(cfg, n, hyp, _discrete_block, cfg.trials, 1)
            cells.append(_cell(n, name, cfg.trials, errors))
    res = SimResult(cfg.echo(), tuple(cells), None)
    if "H1" in hypotheses:
        res = SimResult(res.config, res.cells, None, estimate_exponent(res))
    return res


def fit_exponent(n: Sequence[float], p_hat: Sequence[float]) -> ExponentFit:
    """Least-squares slope of ``-ln p_hat`` against n."""
    n = np.asarray(n, dtype=float)
    p = np.asarray(p_hat, dtype=float)
    if len(n) < 2:
        return ExponentFit(None, None, None, tuple(n), "need at least two lengths to fit")
    if np.any(p <= 0):
        zeros = [int(v) for v in n[p <= 0]]
        return ExponentFit(None, None, None, tuple(int(v) for v in n), f"zero error count at n={zeros}; fit refused")
    fit = sps.linregress(n, -np.log(p))
    stderr = float(fit.stderr) if len(n) > 2 else 0.0
    return ExponentFit(float(fit.slope), stderr, float(fit.intercept), tuple(int(v) for v in n))


def estimate_exponent(result: SimResult, hypothesis: str = "H1") -> ExponentFit:
    """Fit on the largest half of the lengths (at least two)."""
    rows = sorted((c for c in result.cells if c.hypothesis == hypothesis), key=lambda c: c.n)
    keep = rows[-max(2, math.ceil(len(rows) / 2)):]
    return fit_exponent([c.n for c in keep], [c.p_hat for c in keep])


@dataclass(frozen=True)
class FalsePositiveReport:
    lam: float
    detector: str
    rows: tuple  # (n, errors, trials, empirical exponent, required exponent, ok)
    cap_rate: float
    message: str

    @property
    def ok(self) -> bool:
        return all(r[-1] for r in self.rows)


def false_positive_check(cfg: SimConfig, slack: float = 2.0) -> FalsePositiveReport:
    """Compare ``-(1/n) ln p_fp`` with ``lam - slack ln(n+1)/n`` at every n.

    The correlation statistic of an untouched covertext is uniform on the
    sphere, so the false-positive rate decays like a cap area: exponent
    ``-ln sin(theta)`` with ``cos(theta) = sqrt(1 - e^{-2 lam})``, i.e. lam.
    """
    res = run_trials(cfg, hypotheses=("H0",))
    rows = []
    for c in res.cells:
        emp = math.inf if c.errors == 0 else -math.log(c.p_hat) / c.n
        need = cfg.lam - slack * math.log(c.n + 1) / c.n
        rows.append((c.n, c.errors, c.trials, emp, need, emp >= need))
    theta = math.acos(math.sqrt(mi_threshold_r2(cfg.lam))) if cfg.lam > 0 else math.pi / 2
    cap_rate = -exponents.cap_log_ratio(theta)
    bad = [r[0] for r in rows if not r[-1]]
    message = f"exponent below target at n={bad}" if bad else "no violations observed"
    return FalsePositiveReport(cfg.lam, cfg.detector, tuple(rows), cap_rate, message)


# ------------------------------------------------------------- serialization


def _num(v):
    if v is None:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def to_csv(result: SimResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in result.cells:
        w.writerow([c.n, c.hypothesis, c.trials, c.errors, repr(c.p_hat), repr(c.ci_lo), repr(c.ci_hi)])
    return buf.getvalue()


def read_csv(text: str) -> tuple[Cell, ...]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != CSV_COLUMNS:
        raise DomainError(f"unexpected CSV columns {tuple(rows[0].keys())}")
    return tuple(
        Cell(int(r["n"]), r["hypothesis"], int(r["trials"]), int(r["errors"]), float(r["p_hat"]), float(r["ci_lo"]), float(r["ci_hi"]))
        for r in rows
    )


def to_json(result: SimResult) -> str:
    fit = None if result.fit is None else {k: _num(v) if not isinstance(v, tuple) else list(v) for k, v in asdict(result.fit).items()}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": {k: _num(v) for k, v in result.config.items()},
        "theory": _num(result.theory),
        "fit": fit,
        "cells": [{k: _num(v) for k, v in asdict(c).items()} for c in result.cells],
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_result(result: SimResult, path: str, fmt: str = "csv") -> None:
    if fmt not in ("csv", "json"):
        raise DomainError(f"unknown format {fmt!r}")
    text = to_csv(result) if fmt == "csv" else to_json(result)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def make_alphabet(k: int) -> Alphabet:
    if k < 2:
        raise DomainError("alphabet size must be >= 2")
    return Alphabet.range(k)
