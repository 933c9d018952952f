import json
import math

import numpy as np
import pytest

from wmdetect import exponents, simkit
from wmdetect.attacks import MemorylessAttack
from wmdetect.detect_discrete import EmbedConstraint
from wmdetect.empirical import BINARY, MemorylessSource
from wmdetect.errors import DomainError
from wmdetect.gaussian import EmbedderKind


def sign_cfg(**kw):
    base = dict(n_list=(10, 20, 40), trials=3000, lam=0.05, seed=1, embedder=EmbedderKind("sign", 0.3))
    base.update(kw)
    return simkit.SimConfig(**base)


def test_deterministic_and_schedule_independent():
    a = simkit.run_trials(sign_cfg())
    b = simkit.run_trials(sign_cfg())
    c = simkit.run_trials(sign_cfg(workers=4))
    assert a == b
    assert a.cells == c.cells
    d = simkit.run_trials(sign_cfg(seed=2))
    assert a.cells != d.cells


def test_trial_count_not_multiple_of_block():
    res = simkit.run_trials(sign_cfg(trials=simkit.BLOCK + 7, n_list=(5,)))
    assert all(c.trials == simkit.BLOCK + 7 for c in res.cells)


def test_lambda_zero_sign_never_misses():
    res = simkit.run_trials(sign_cfg(lam=0.0, n_list=(5, 50, 200), trials=2000))
    assert all(res.cell(n, "H1").errors == 0 for n in (5, 50, 200))
    assert all(res.cell(n, "H0").p_hat == 1.0 for n in (5, 50, 200))
    assert res.theory is None or res.theory == math.inf


def test_no_embedding_misses_more_as_lambda_grows():
    rates = [
        simkit.run_trials(sign_cfg(embedder=None, lam=lam, n_list=(50,), trials=4000)).cell(50, "H1").p_hat
        for lam in (0.001, 0.01, 0.05, 0.2)
    ]
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    assert rates[-1] > 0.999


def test_fit_synthetic():
    n = np.array([100, 200, 300, 400])
    fit = simkit.fit_exponent(n, np.exp(-0.1 * n))
    assert fit.slope == pytest.approx(0.1, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    fit = simkit.fit_exponent(n, 0.37 * np.exp(-0.1 * n))
    assert fit.slope == pytest.approx(0.1, abs=1e-12)
    assert fit.intercept == pytest.approx(-math.log(0.37), abs=1e-9)
    refused = simkit.fit_exponent(n, [1e-3, 1e-5, 0.0, 0.0])
    assert not refused.ok and "300" in refused.advisory


def test_estimate_uses_largest_half():
    cells = []
    for n, p in ((10, 0.5), (20, 0.3), (30, math.exp(-3.0)), (40, math.exp(-4.0))):
        cells.append(simkit.Cell(n, "H1", 100, 0, p, 0, 1))
    fit = simkit.estimate_exponent(simkit.SimResult({}, tuple(cells)))
    assert fit.n_used == (30, 40)
    assert fit.slope == pytest.approx(0.1)


def test_small_exponent_against_theory():
    # a regime where misses are common enough to count at every length
    lam, De = 0.15, 0.4
    cfg = simkit.SimConfig((100, 200, 300, 400), 40_000, lam, seed=9, embedder=EmbedderKind("sign", De))
    res = simkit.run_trials(cfg)
    theory = exponents.exponent_sign(lam, De, 1.0)
    assert res.theory == theory
    assert res.fit.ok
    assert res.fit.slope == pytest.approx(theory, rel=0.25)


def test_false_positive_check_examples():
    rep = simkit.false_positive_check(sign_cfg(lam=0.02, n_list=(50, 200, 500, 1000, 2000), trials=20_000))
    assert rep.ok
    for n, errors, trials, emp, need, ok in rep.rows:
        assert emp >= 0.015
    assert rep.cap_rate == pytest.approx(0.02)
    rep = simkit.false_positive_check(sign_cfg(lam=3.0, n_list=(50, 100), trials=1000))
    assert rep.message == "no violations observed"
    res = simkit.run_trials(sign_cfg(lam=0.0, detector="corr", n_list=(30,), trials=20_000), hypotheses=("H0",))
    assert res.cell(30, "H0").p_hat == pytest.approx(0.5, abs=0.015)


def test_wilson_intervals():
    lo, hi = simkit.wilson(50, 100)
    assert lo < 0.5 < hi
    lo, hi = simkit.wilson(0, 1000)
    assert lo == 0.0 and 0 < hi < 0.004
    lo, hi = simkit.wilson(1000, 1000)
    assert hi == pytest.approx(1.0) and lo > 0.99


def test_wilson_calibration():
    """A high-precision reference estimate falls inside >= 93% of ordinary-run intervals."""
    n_list = (10, 20, 40, 80)
    ref = simkit.run_trials(sign_cfg(n_list=n_list, trials=400_000, seed=12345))
    inside = total = 0
    for seed in range(20):
        run = simkit.run_trials(sign_cfg(n_list=n_list, trials=2000, seed=seed))
        for c in run.cells:
            r = ref.cell(c.n, c.hypothesis)
            if r.p_hat in (0.0, 1.0):
                continue
            total += 1
            inside += c.ci_lo <= r.p_hat <= c.ci_hi
    assert total >= 100
    assert inside / total >= 0.93


def test_csv_json_roundtrip(tmp_path):
    res = simkit.run_trials(sign_cfg())
    text = simkit.to_csv(res)
    assert text.splitlines()[0] == ",".join(simkit.CSV_COLUMNS)
    cells = simkit.read_csv(text)
    assert cells == res.cells
    assert simkit.to_csv(simkit.SimResult(res.config, cells)) == text
    doc = json.loads(simkit.to_json(res))
    assert doc["schema_version"] == "1"
    assert doc["config"]["seed"] == 1 and doc["config"]["embedder"] == "sign"
    path = tmp_path / "r.json"
    simkit.write_result(res, str(path), "json")
    assert path.read_text() == simkit.to_json(res)
    with pytest.raises(DomainError):
        simkit.read_csv("a,b\n1,2\n")


def test_config_validation():
    with pytest.raises(DomainError):
        sign_cfg(trials=10)
    with pytest.raises(DomainError):
        sign_cfg(n_list=(20, 10))
    with pytest.raises(DomainError):
        sign_cfg(sigma2=0.0)
    with pytest.raises(DomainError):
        sign_cfg(detector="xx")
    with pytest.raises(DomainError):
        sign_cfg(attack=MemorylessAttack.identity(2))
    with pytest.raises(DomainError):
        sign_cfg(seed=-1)


def test_discrete_run():
    src = MemorylessSource.uniform(BINARY)
    c = EmbedConstraint.hamming(BINARY, 0.2)
    cfg = simkit.DiscreteSimConfig((16, 32, 64), 300, 0.3, 4, src, c, MemorylessAttack.symmetric(2, 0.05))
    a = simkit.run_discrete_trials(cfg)
    assert a == simkit.run_discrete_trials(cfg)
    for n in cfg.n_list:
        h0, h1 = a.cell(n, "H0"), a.cell(n, "H1")
        assert 0 <= h0.p_hat <= 1 and 0 <= h1.p_hat <= 1
    # the threshold lam - k ln(n+1)/n is negative at n=16, so false alarms only die out later
    fp = [a.cell(n, "H0").p_hat for n in cfg.n_list]
    assert fp[0] == 1.0 and fp[-1] == 0.0
    assert all(b <= a for a, b in zip(fp, fp[1:]))
    assert all(a.cell(n, "H1").p_hat < 0.5 for n in cfg.n_list)
    with pytest.raises(DomainError):
        simkit.DiscreteSimConfig((8,), 400, 0.0, 4, src, c)
