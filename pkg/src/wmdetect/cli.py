"""Command-line entry point: ``wmdetect <subcommand> [flags]``.

Exit codes: 0 success, 2 usage, 3 numeric/domain failure, 4 cap exceeded.
Vector files hold one number per line; watermark files only -1 and +1.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys

import numpy as np

from . import exponents, gaussian, simkit
from .attacks import AttackBudget, ExchangeableWorstCase, MemorylessAttack, worstcase_statistic
from .detect_discrete import EmbedConstraint
from .empirical import WATERMARK, EmpiricalJoint, MemorylessSource, joint_counts
from .errors import CapExceeded, DomainError, WatermarkError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_CAP = 0, 2, 3, 4
DEMO_CAP = 729  # largest |A|^n for the attack demo's explicit channel table
UNITS = {"nats": 1.0, "bits": 1 / math.log(2)}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def read_vector(path: str) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise DomainError(f"{path}:{lineno}: not a number: {line!r}") from None
    if not vals:
        raise DomainError(f"{path}: no values")
    return np.asarray(vals)


def read_watermark(path: str) -> np.ndarray:
    u = read_vector(path)
    if not np.all(np.abs(u) == 1):
        raise DomainError(f"{path}: watermark entries must be -1 or +1")
    return u


def write_vector(path: str, v) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{float(x)!r}\n" for x in v)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else "-inf"
    return v


# ------------------------------------------------------------ subcommands


def _embedder_list(raw: str) -> list[str]:
    kinds = [k.strip().replace("-", "_") for k in raw.split(",") if k.strip()]
    if not kinds:
        raise UsageError("empty embedder list")
    for k in kinds:
        if k not in exponents.EMBEDDERS:
            raise UsageError(f"no exponent for embedder {k!r}; choose from {', '.join(exponents.EMBEDDERS)}")
    return kinds


def _lambda_grid(args) -> np.ndarray:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    lam_max = args.lam if args.lam is not None else 1.2 * exponents.zero_exponent_lambda(args.de, args.sigma2)
    lam_min = args.lambda_min
    if not (lam_max > 0 and 0 <= lam_min < lam_max):
        raise UsageError(f"invalid lambda range ({lam_min}, {lam_max}]")
    return lam_min + (lam_max - lam_min) * np.arange(1, args.samples + 1) / args.samples


def curve_csv(curve: exponents.ExponentCurve, scale: float = 1.0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("lambda", "exponent"))
    for lam, v in zip(curve.lambdas, curve.values):
        w.writerow((repr(lam * scale), repr(v * scale)))
    return buf.getvalue()


def curve_json(curve: exponents.ExponentCurve, units: str) -> str:
    scale = UNITS[units]
    zero = curve.zero_crossing()
    doc = {
        "schema_version": simkit.SCHEMA_VERSION,
        "embedder": curve.kind,
        "de": curve.De,
        "sigma2": curve.sigma2,
        "units": units,
        "zero_crossing": None if zero is None else zero * scale,
        "nonincreasing": curve.is_nonincreasing(),
        "lambda": [lam * scale for lam in curve.lambdas],
        "exponent": [_finite(v * scale) for v in curve.values],
    }
    return _json(doc)


def cmd_exponents(args) -> int:
    kinds = _embedder_list(args.embedder)
    _check_positive(de=args.de, sigma2=args.sigma2)
    lams = _lambda_grid(args)
    os.makedirs(args.out, exist_ok=True)
    for kind in kinds:
        curve = exponents.exponent_curve(kind, args.de, args.sigma2, lams)
        if args.format == "csv":
            text = curve_csv(curve, UNITS[args.units])
        else:
            text = curve_json(curve, args.units)
        path = os.path.join(args.out, f"exponent_{kind}.{args.format}")
        _emit(text, path)
        print(path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Exponent curves for several sigma2/D_e ratios in one table."""
    kinds = _embedder_list(args.embedder)
    if not args.ratios or any(r <= 0 for r in args.ratios):
        raise UsageError("--ratios must be positive")
    _check_positive(de=args.de)
    rows = []
    scale = UNITS[args.units]
    for ratio in args.ratios:
        sigma2 = ratio * args.de
        lam_max = args.lam if args.lam is not None else 1.2 * exponents.zero_exponent_lambda(args.de, sigma2)
        lams = lam_max * np.arange(1, args.samples + 1) / args.samples
        curves = [exponents.exponent_curve(k, args.de, sigma2, lams) for k in kinds]
        for i, lam in enumerate(lams):
            rows.append([ratio, float(lam)] + [c.values[i] for c in curves])
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ratio", "lambda"] + kinds)
        for r in rows:
            w.writerow([repr(r[0]), repr(r[1] * scale)] + [repr(v * scale) for v in r[2:]])
        text = buf.getvalue()
    else:
        text = _json(
            {
                "schema_version": simkit.SCHEMA_VERSION,
                "de": args.de,
                "units": args.units,
                "columns": ["ratio", "lambda"] + kinds,
                "rows": [[r[0], r[1] * scale] + [_finite(v * scale) for v in r[2:]] for r in rows],
            }
        )
    _emit(text, args.out)
    return EXIT_OK


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise DomainError(f"--{name} must be > 0, got {v}")


def _embedder_kind(args) -> gaussian.EmbedderKind | None:
    if args.de == 0:
        return None
    return gaussian.EmbedderKind(args.embedder, args.de)


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise UsageError("simulate requires --seed")
    n_list = args.n_list if args.n_list else ([args.n] if args.n else None)
    if not n_list:
        raise UsageError("simulate requires --n-list or --n")
    if args.alphabet_size:
        k = args.alphabet_size
        alphabet = simkit.make_alphabet(k)
        src = MemorylessSource.uniform(alphabet)
        c = _constraint(args.distortion, alphabet, args.de)
        attack = None if args.attack_eps is None else MemorylessAttack.symmetric(k, args.attack_eps)
        cfg = simkit.DiscreteSimConfig(tuple(n_list), args.trials, args.lam, args.seed, src, c, attack)
        result = simkit.run_discrete_trials(cfg)
    else:
        cfg = simkit.SimConfig(
            tuple(n_list),
            args.trials,
            args.lam,
            args.seed,
            sigma2=args.sigma2,
            embedder=_embedder_kind(args),
            detector=args.detector,
            workers=args.workers,
        )
        result = simkit.run_trials(cfg)
    text = simkit.to_csv(result) if args.format == "csv" else simkit.to_json(result)
    _emit(text, args.out)
    return EXIT_OK


def _constraint(kind: str, alphabet, budget: float) -> EmbedConstraint:
    if kind == "hamming":
        return EmbedConstraint.hamming(alphabet, budget)
    return EmbedConstraint.squared(alphabet, budget)


def cmd_embed(args) -> int:
    x = read_vector(args.x)
    u = read_watermark(args.u)
    kind = gaussian.EmbedderKind(args.embedder, args.de)
    y = gaussian.embed(kind, x, u)
    write_vector(args.out, y)
    return EXIT_OK


def cmd_detect(args) -> int:
    u = read_watermark(args.u)
    y = read_vector(args.y)
    lam = args.lam
    if args.detector == "mi":
        decision = gaussian.detect_mi(u, y, lam)
    else:
        decision = gaussian.detect_corr(u, y, lam)
    doc = {
        "schema_version": simkit.SCHEMA_VERSION,
        "decision": decision.name,
        "detector": args.detector,
        "lambda": lam,
        "mutual_info": _finite(gaussian.emp_mutual_info_gauss(u, y)),
        "correlation": gaussian.normalized_correlation(u, y),
        "n": int(len(u)),
    }
    if args.out:
        if args.format == "json":
            _emit(_json(doc), args.out)
        else:
            keys = sorted(doc)
            _emit(",".join(keys) + "\n" + ",".join(str(doc[k]) for k in keys) + "\n", args.out)
    print(decision.name)
    return EXIT_OK


def cmd_attack_demo(args) -> int:
    n, k = args.n, args.alphabet_size
    if n is None or n < 1 or k < 2:
        raise UsageError("attack-demo needs --n >= 1 and --alphabet-size >= 2")
    if k**n > DEMO_CAP:
        raise CapExceeded(f"|A|^n = {k**n} exceeds the demo cap {DEMO_CAP}")
    if not args.lam > 0:
        raise DomainError("--lambda must be > 0")
    alphabet = simkit.make_alphabet(k)
    budget = AttackBudget(_constraint(args.distortion, alphabet, args.da).matrix, args.da)
    src = MemorylessSource.uniform(alphabet)
    wc = ExchangeableWorstCase(budget, alphabet, n)
    seqs = list(itertools.product(range(k), repeat=n))
    table = np.array([[wc.prob(y, z) for z in seqs] for y in seqs])
    out = io.StringIO()
    out.write(f"# worst-case exchangeable channel, n={n}, |A|={k}, D_a={args.da}, d_a={args.distortion}\n")
    out.write("# rows y, columns z (lexicographic); entries W*(z|y)\n")
    for y, row in zip(seqs, table):
        out.write("".join(map(str, y)) + " " + " ".join(f"{p:.6g}" for p in row) + "\n")
    out.write("# c_n(y) = 1 / #feasible conditional types\n")
    for y in seqs:
        out.write(f"{''.join(map(str, y))} {wc.type_count(y)} {wc.c_n(y):.6g}\n")

    # worst-case region for the watermark u = (+1, -1, +1, ...), P_X uniform
    u = np.array([1 if i % 2 == 0 else -1 for i in range(n)])
    ui = WATERMARK.index(u)
    thr = args.lam + k * math.log(n + 1) / n
    member = {}
    out.write(f"# region membership per conditional type T(z|u), u={''.join('+' if v > 0 else '-' for v in u)}\n")
    out.write(f"# statistic I(Z;U) + min D(P_y||P_X) vs threshold {thr:.6g}\n")
    for z in seqs:
        counts = joint_counts(ui, np.asarray(z), 2, k)
        key = tuple(int(v) for v in counts.ravel())
        if key not in member:
            stat = worstcase_statistic(src, EmpiricalJoint(WATERMARK, alphabet, counts), budget)
            member[key] = stat >= thr
            out.write(f"{key} {stat:.6g} {'H1' if member[key] else 'H0'}\n")
    px = np.full(len(seqs), 1.0 / len(seqs))
    qstar = px @ table
    in_region = np.array([member[tuple(int(v) for v in joint_counts(ui, np.asarray(z), 2, k).ravel())] for z in seqs])
    p_fp = float(qstar[in_region].sum())
    bound = (n + 1) ** k * math.exp(-n * args.lam)
    out.write(f"# exact P_fp under W* = {p_fp:.6g}; bound (n+1)^|A| e^(-n lambda) = {bound:.6g}; {'OK' if p_fp <= bound else 'VIOLATED'}\n")
    _emit(out.getvalue(), args.out)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wmdetect", description="Watermark detection exponents, embedders and simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, lam_required=False, lam_default=None):
        sp.add_argument("--lambda", dest="lam", type=float, required=lam_required, default=lam_default, help="false-positive exponent (nats)")
        sp.add_argument("--out", default=None, help="output path ('-' for stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    e = sub.add_parser("exponents", help="false-negative exponent curves, one file per embedder")
    common(e)
    e.add_argument("--lambda-min", type=float, default=0.0)
    e.add_argument("--samples", type=int, default=exponents.CURVE_SAMPLES)
    e.add_argument("--de", type=float, required=True)
    e.add_argument("--sigma2", type=float, default=1.0)
    e.add_argument("--embedder", default="sign,improved-sign,additive", help="comma-separated list")
    e.add_argument("--units", choices=tuple(UNITS), default="nats")
    e.set_defaults(func=cmd_exponents, out=".")

    w = sub.add_parser("sweep", help="exponent curves over several sigma2/D_e ratios")
    common(w)
    w.add_argument("--de", type=float, default=1.0)
    w.add_argument("--ratios", type=_floats, default=[0.1, 1.0, 10.0], help="sigma2/D_e values")
    w.add_argument("--samples", type=int, default=exponents.CURVE_SAMPLES)
    w.add_argument("--embedder", default="sign,additive")
    w.add_argument("--units", choices=tuple(UNITS), default="nats")
    w.set_defaults(func=cmd_sweep)

    s = sub.add_parser("simulate", help="Monte Carlo error rates")
    common(s, lam_required=True)
    s.add_argument("--n-list", type=_ints)
    s.add_argument("--n", type=int)
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--seed", type=int)
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--de", type=float, default=1.0)
    s.add_argument("--embedder", choices=("optimal", "sign", "improved-sign", "additive"), default="sign")
    s.add_argument("--detector", choices=simkit.DETECTORS, default="mi")
    s.add_argument("--alphabet-size", type=int, help="run the discrete simulation over {0..k-1}")
    s.add_argument("--distortion", choices=("hamming", "squared"), default="hamming")
    s.add_argument("--attack-eps", type=float, help="symmetric memoryless attack (discrete runs)")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("embed", help="embed a watermark into a Gaussian covertext file")
    m.add_argument("--x", required=True)
    m.add_argument("--u", required=True)
    m.add_argument("--de", type=float, required=True)
    m.add_argument("--embedder", choices=("optimal", "sign", "improved-sign", "additive"), default="optimal")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_embed)

    d = sub.add_parser("detect", help="decide H0/H1 for a stegotext file")
    common(d, lam_required=True)
    d.add_argument("--u", required=True)
    d.add_argument("--y", required=True)
    d.add_argument("--detector", choices=simkit.DETECTORS, default="mi")
    d.set_defaults(func=cmd_detect)

    a = sub.add_parser("attack-demo", help="worst-case channel table and exact false-positive check")
    common(a, lam_default=0.1)
    a.add_argument("--n", type=int, default=4)
    a.add_argument("--alphabet-size", type=int, default=2)
    a.add_argument("--da", type=float, default=0.0)
    a.add_argument("--distortion", choices=("hamming", "squared"), default="hamming")
    a.set_defaults(func=cmd_attack_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"wmdetect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as exc:
        print(f"wmdetect: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (WatermarkError, ValueError, OSError) as exc:
        print(f"wmdetect: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
