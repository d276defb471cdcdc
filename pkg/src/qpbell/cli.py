"""Command-line front end.

    qpbell eval-w       --state tmss --r 0.6 --alpha 0.2+0.1i --beta 0.3 --s -0.7 --check-oracle
    qpbell bell-max     --state tmss --r 2 --s 0 --eta 1
    qpbell threshold    --axis eta --state single-photon --s -1
    qpbell scan         --state single-photon --s -1.6:0:81 --eta 0.8:1:41
    qpbell oracle-check --trials 200 --seed 7

Data goes to stdout (or ``--output``), diagnostics to stderr.  Exit codes:
2 domain error, 3 optimizer not converged, 4 no violation, 5 scan with
< 99% converged cells, 6 oracle deviation above 1e-8.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time

import numpy as np

from qpbell import fock, kernels
from qpbell.bell import BellContext, MeasurementSettings, bell_value, effective_s
from qpbell.kernels import DomainError, GenericFock, SinglePhotonEntangled, Tmss
from qpbell.search import (
    NoViolation,
    SearchOptions,
    maximize_bell,
    min_eta_threshold,
    min_s_threshold,
    scan_grid,
    audit_mismatches,
)

log = logging.getLogger("qpbell")

EXIT_DOMAIN, EXIT_NOT_CONVERGED, EXIT_NO_VIOLATION, EXIT_SCAN, EXIT_ORACLE = 2, 3, 4, 5, 6
ORACLE_TOL = 1e-8
SCAN_COLUMNS = ["s", "eta", "r", "bell_magnitude", "violated", "alpha1", "alpha2", "beta1", "beta2",
                "converged"]

# -- literals ----------------------------------------------------------------


def parse_complex(text: str) -> complex:
    """Parse ``a``, ``a+bi``, ``a-bi`` or ``bi`` (``j`` is accepted too)."""
    t = text.strip().replace(" ", "")
    if t.endswith("i"):
        t = t[:-1] + "j"
    try:
        z = complex(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex literal: {text!r}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise argparse.ArgumentTypeError(f"complex literal must be finite: {text!r}")
    return z


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real:.17g}{z.imag:+.17g}i"


def format_float(x: float) -> str:
    return repr(float(x))


def parse_grid(text: str) -> list[float]:
    """``lo:hi:count`` (inclusive) or a single number."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:count, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    return [lo] if n == 1 else np.linspace(lo, hi, n).tolist()


def parse_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def parse_settings(text: str) -> MeasurementSettings:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("settings must be alpha1,alpha2,beta1,beta2")
    return MeasurementSettings(*(parse_complex(p) for p in parts))


# -- shared plumbing ---------------------------------------------------------


def _state(args):
    if args.state == "single-photon":
        return SinglePhotonEntangled()
    if args.state == "tmss":
        if args.r is None:
            raise DomainError("--state tmss requires --r")
        return Tmss(args.r)
    if args.state == "fock":
        if not args.rho:
            raise DomainError("--state fock requires --rho FILE.npz")
        data = np.load(args.rho)
        rho = fock.FockDensityMatrix.from_matrix(data["entries"], int(data["dim_a"]), int(data["dim_b"]))
        return GenericFock(rho)
    raise DomainError(f"unknown state {args.state!r}")


def _options(args) -> SearchOptions:
    return SearchOptions(
        restarts=args.restarts, box=args.box, max_evals=args.max_evals,
        complex_settings=not args.real_settings, verify_full=args.verify_full, seed=args.seed,
    )


def _config(args) -> dict:
    skip = {"func", "command_name"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, MeasurementSettings):
            v = ",".join(format_complex(z) for z in v.as_tuple())
        elif isinstance(v, complex):
            v = format_complex(v)
        out[k] = v
    return out


def _emit(args, text: str):
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_record(args, record: dict):
    if args.format == "csv":
        buf = io.StringIO()
        for k, v in _config(args).items():
            buf.write(f"# {k}={v}\n")
        w = csv.DictWriter(buf, fieldnames=list(record))
        w.writeheader()
        w.writerow({k: _csv_value(v) for k, v in record.items()})
        _emit(args, buf.getvalue())
    else:
        _emit(args, json.dumps({**record, "config": _config(args)}, indent=2) + "\n")


def _csv_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if v is None:
        return ""
    return v


def _settings_record(settings: MeasurementSettings) -> dict:
    return {name: format_complex(z) for name, z in
            zip(("alpha1", "alpha2", "beta1", "beta2"), settings.as_tuple())}


# -- commands ----------------------------------------------------------------


def cmd_eval_w(args) -> int:
    state = _state(args)
    s = kernels.check_s(args.s)
    rec = {
        "state": args.state, "r": args.r, "s": s,
        "alpha": format_complex(args.alpha), "beta": format_complex(args.beta),
        "w_pair": float(kernels.w_pair(state, args.alpha, args.beta, s)),
        "w_marginal_a": float(kernels.w_marginal(state, args.alpha, s, "a")),
        "w_marginal_b": float(kernels.w_marginal(state, args.beta, s, "b")),
    }
    if args.check_oracle:
        radius = max(abs(args.alpha), abs(args.beta))
        cutoff = args.cutoff or fock.cutoff_for(state, radius, s)
        rho = fock.build_density(state, cutoff)
        rec["cutoff"] = cutoff
        rec["oracle_w_pair"] = float(fock.w_pair_oracle(rho, args.alpha, args.beta, s, cutoff))
        rec["oracle_w_marginal_a"] = float(fock.w_single_oracle(rho.reduced("a"), args.alpha, s, cutoff))
        rec["oracle_w_marginal_b"] = float(fock.w_single_oracle(rho.reduced("b"), args.beta, s, cutoff))
        rec["max_abs_diff"] = max(abs(rec["w_pair"] - rec["oracle_w_pair"]),
                                  abs(rec["w_marginal_a"] - rec["oracle_w_marginal_a"]),
                                  abs(rec["w_marginal_b"] - rec["oracle_w_marginal_b"]))
    _emit_record(args, rec)
    return 0


def _bell_record(args, res_value, settings, extra) -> dict:
    return {
        "state": args.state, "r": args.r, "s": args.s, "eta": args.eta,
        "s_eff": effective_s(args.s, args.eta),
        "magnitude": res_value.magnitude, "value": res_value.value, "violated": res_value.violated,
        **_settings_record(settings), **extra, "seed": args.seed,
    }


def cmd_bell_max(args) -> int:
    state = _state(args)
    ctx = BellContext(args.s, args.eta)
    if args.no_optimize:
        settings = args.settings or MeasurementSettings.zeros()
        value = bell_value(state, settings, ctx)
        _emit_record(args, _bell_record(args, value, settings,
                                        {"restarts": 0, "evaluations": 1, "converged": True}))
        return 0
    res = maximize_bell(state, ctx, _options(args), warm_start=args.settings)
    extra = {"restarts": res.restarts_used, "evaluations": res.evaluations, "converged": res.converged}
    if res.full_gain is not None:
        extra["full_gain"] = res.full_gain
    _emit_record(args, _bell_record(args, res.best, res.settings, extra))
    if not res.converged:
        log.error("no restart met the simplex tolerance within %d evaluations", args.max_evals)
        return EXIT_NOT_CONVERGED
    return 0


def cmd_threshold(args) -> int:
    state = _state(args)
    opts = _options(args)
    t0 = time.perf_counter()
    try:
        if args.axis == "eta":
            if args.s is None:
                raise DomainError("--axis eta requires --s")
            res = min_eta_threshold(state, kernels.check_s(args.s), args.tol, opts)
        else:
            res = min_s_threshold(state, fock.check_eta(args.eta), args.tol, opts)
    except NoViolation as exc:
        log.error("%s", exc)
        return EXIT_NO_VIOLATION
    rec = {
        "state": args.state, "r": args.r, "axis": res.axis,
        "s": args.s if args.axis == "eta" else None, "eta": args.eta if args.axis == "s" else None,
        "threshold": res.threshold, "bracket_lo": res.bracket_lo, "bracket_hi": res.bracket_hi,
        "tolerance": res.tolerance, "magnitude_lo": res.magnitude_lo, "magnitude_hi": res.magnitude_hi,
        **_settings_record(res.settings_hi), "steps": res.steps, "seed": args.seed,
    }
    log.info("threshold search took %.1f s", time.perf_counter() - t0)
    _emit_record(args, rec)
    return 0


def scan_rows(scan) -> list[dict]:
    rows = []
    for cell in scan.cells:
        res = cell.result
        row = {"s": cell.s, "eta": cell.eta, "r": cell.r}
        if res is None:
            row.update(bell_magnitude=math.nan, violated=False, alpha1="", alpha2="", beta1="",
                       beta2="", converged=False)
        else:
            row.update(bell_magnitude=res.magnitude, violated=res.violated,
                       **_settings_record(res.settings), converged=res.converged)
        rows.append(row)
    return rows


def read_scan_csv(path_or_text: str):
    """Parse a scan CSV back into (config dict, list of typed rows)."""
    text = path_or_text if "\n" in path_or_text else open(path_or_text).read()
    config, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            config[key] = value
        elif line:
            body.append(line)
    rows = []
    for raw in csv.DictReader(body):
        rows.append({
            "s": float(raw["s"]), "eta": float(raw["eta"]),
            "r": float(raw["r"]) if raw["r"] else None,
            "bell_magnitude": float(raw["bell_magnitude"]),
            "violated": raw["violated"] == "true", "converged": raw["converged"] == "true",
            **{k: parse_complex(raw[k]) if raw[k] else None for k in ("alpha1", "alpha2", "beta1", "beta2")},
        })
    return config, rows


def cmd_scan(args) -> int:
    s_grid = args.s_list if args.s_list is not None else args.s
    eta_grid = args.eta_list if args.eta_list is not None else args.eta
    if s_grid is None or eta_grid is None:
        raise DomainError("scan needs --s/--s-list and --eta/--eta-list")
    for s in s_grid:
        kernels.check_s(s)
    for eta in eta_grid:
        fock.check_eta(eta)
    opts = _options(args)
    if args.state == "tmss" and args.r is not None and len(args.r) > 1:
        for r in args.r:
            kernels.check_r(r)
        scan = scan_grid(None, s_grid, eta_grid, opts, jobs=args.jobs, audit_fraction=args.audit,
                         state_for_r=Tmss, r_grid=args.r)
    else:
        r = args.r[0] if args.r else None
        state = _state(argparse.Namespace(**{**vars(args), "r": r}))
        scan = scan_grid(state, s_grid, eta_grid, opts, jobs=args.jobs, audit_fraction=args.audit, r=r)
    for i, warm, cold in audit_mismatches(scan):
        log.warning("cold-start audit: cell %d warm |B|=%.12f cold |B|=%.12f", i, warm, cold)
    for cell in scan.cells:
        if cell.error:
            log.warning("cell r=%s s=%s eta=%s failed: %s", cell.r, cell.s, cell.eta, cell.error)
    buf = io.StringIO()
    for k, v in _config(args).items():
        buf.write(f"# {k}={v}\n")
    if args.format == "json":
        payload = {"config": _config(args), "rows": scan_rows(scan)}
        for row in payload["rows"]:
            if isinstance(row["bell_magnitude"], float) and math.isnan(row["bell_magnitude"]):
                row["bell_magnitude"] = None
        _emit(args, json.dumps(payload, indent=2) + "\n")
    else:
        w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS)
        w.writeheader()
        for row in scan_rows(scan):
            w.writerow({k: _csv_value(v) for k, v in row.items()})
        _emit(args, buf.getvalue())
    frac = scan.converged_fraction
    if frac < 0.99:
        log.error("only %.1f%% of cells converged", 100 * frac)
        return EXIT_SCAN
    return 0


# -- oracle self-check -------------------------------------------------------


def _random_point(rng, radius):
    return complex(radius * math.sqrt(rng.uniform()) * np.exp(2j * math.pi * rng.uniform()))


def oracle_equivalence(trials: int, seed: int, cutoff: int | None = None, radius: float = 1.5):
    """Analytic kernels vs Fock traces on seeded random inputs.

    Returns (max deviation, worst input).  A truncation failure counts as
    an infinite deviation.
    """
    rng = np.random.default_rng(seed)
    worst, worst_case = 0.0, None
    for i in range(trials):
        if i % 2 == 0:
            state = SinglePhotonEntangled()
        else:
            state = Tmss(1.5 * (1.0 - rng.uniform()))
        alpha, beta = _random_point(rng, radius), _random_point(rng, radius)
        s = -2.0 * rng.uniform()
        case = {"trial": i, "state": state.label, "r": getattr(state, "r", None),
                "alpha": format_complex(alpha), "beta": format_complex(beta), "s": s}
        try:
            n = cutoff or fock.cutoff_for(state, radius, s)
            case["cutoff"] = n
            rho = fock.build_density(state, n)
            dev = max(
                abs(kernels.w_pair(state, alpha, beta, s) - fock.w_pair_oracle(rho, alpha, beta, s, n)),
                abs(kernels.w_marginal(state, alpha, s, "a")
                    - fock.w_single_oracle(rho.reduced("a"), alpha, s, n)),
                abs(kernels.w_marginal(state, beta, s, "b")
                    - fock.w_single_oracle(rho.reduced("b"), beta, s, n)),
            )
        except fock.InadequateCutoff as exc:
            dev, case["error"] = math.inf, str(exc)
        if dev > worst or worst_case is None:
            worst, worst_case = float(dev), {**case, "deviation": float(dev)}
    return worst, worst_case


def oracle_loss(trials: int, seed: int, cutoff: int | None = None):
    """Binomially smeared origin value vs W(0; s')/eta.

    Runs the fixed grid s in {0, -0.5, -1, -1.5} x eta in {0.6, 0.8, 1}
    for the reduced states of both families, then ``trials`` random
    (s, eta, r) draws.
    """
    rng = np.random.default_rng(seed)
    cases = [(SinglePhotonEntangled(), s, eta) for s in (0, -0.5, -1, -1.5) for eta in (0.6, 0.8, 1.0)]
    cases += [(Tmss(0.4), s, eta) for s in (0, -0.5, -1, -1.5) for eta in (0.6, 0.8, 1.0)]
    for _ in range(trials):
        state = SinglePhotonEntangled() if rng.uniform() < 0.5 else Tmss(1.5 * (1.0 - rng.uniform()))
        cases.append((state, -2.0 * rng.uniform(), 1.0 - 0.95 * rng.uniform()))
    worst, worst_case = 0.0, None
    for state, s, eta in cases:
        case = {"state": state.label, "r": getattr(state, "r", None), "s": s, "eta": eta}
        try:
            n = cutoff or fock.cutoff_for(state, 0.0, s)
            p = fock.photon_distribution(fock.build_density(state, n).reduced("a"))
            measured = fock.measured_w_origin(p, s, eta)
            expected = kernels.w_marginal(state, 0.0, effective_s(s, eta)) / eta
            dev = abs(measured - expected)
        except fock.InadequateCutoff as exc:
            dev, case["error"] = math.inf, str(exc)
        if dev > worst or worst_case is None:
            worst, worst_case = float(dev), {**case, "deviation": float(dev)}
    return worst, worst_case


def cmd_oracle_check(args) -> int:
    suites = ("equivalence", "loss") if args.suite == "all" else (args.suite,)
    report, failed = {}, []
    for name in suites:
        t0 = time.perf_counter()
        if name == "equivalence":
            dev, case = oracle_equivalence(args.trials, args.seed, args.cutoff)
        else:
            dev, case = oracle_loss(args.trials, args.seed, args.cutoff)
        ok = dev < ORACLE_TOL
        report[name] = {"max_deviation": dev if math.isfinite(dev) else None, "passed": ok,
                        "worst": case, "seconds": round(time.perf_counter() - t0, 3)}
        if not ok:
            failed.append(name)
            log.error("%s suite failed, worst input: %s", name, json.dumps(case))
    _emit(args, json.dumps({"suites": report, "tolerance": ORACLE_TOL, "config": _config(args)},
                           indent=2) + "\n")
    return EXIT_ORACLE if failed else 0


# -- parser ------------------------------------------------------------------


def _add_state(p, r_grid=False):
    p.add_argument("--state", choices=["single-photon", "tmss", "fock"], default="single-photon")
    if r_grid:
        p.add_argument("--r", type=parse_grid, default=None, help="squeezing, value or lo:hi:count")
    else:
        p.add_argument("--r", type=float, default=None, help="TMSS squeezing parameter (> 0)")
    p.add_argument("--rho", default=None, help="npz with entries, dim_a, dim_b for --state fock")


def _add_search(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=SearchOptions.restarts)
    p.add_argument("--box", type=float, default=SearchOptions.box,
                   help="half-width of the start box per real coordinate")
    p.add_argument("--max-evals", type=int, default=SearchOptions.max_evals)
    p.add_argument("--real-settings", action="store_true",
                   help="restrict displacements to the real axis (4 parameters)")
    p.add_argument("--verify-full", action="store_true",
                   help="with --real-settings, polish the optimum over complex settings")


def _add_output(p, default_format):
    p.add_argument("--format", choices=["json", "csv"], default=default_format)
    p.add_argument("--output", "-o", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpbell", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command_name", required=True)

    p = sub.add_parser("eval-w", help="evaluate W(alpha, beta; s) and its marginals")
    _add_state(p)
    p.add_argument("--alpha", type=parse_complex, default=0j)
    p.add_argument("--beta", type=parse_complex, default=0j)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--check-oracle", action="store_true")
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p, "json")
    p.set_defaults(func=cmd_eval_w)

    p = sub.add_parser("bell-max", help="maximize |<B>| over measurement settings")
    _add_state(p)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--settings", type=parse_settings, default=None,
                   help="alpha1,alpha2,beta1,beta2 (warm start, or the point evaluated with --no-optimize)")
    p.add_argument("--no-optimize", action="store_true")
    _add_search(p)
    _add_output(p, "json")
    p.set_defaults(func=cmd_bell_max)

    p = sub.add_parser("threshold", help="minimum eta (or s) for a violation")
    _add_state(p)
    p.add_argument("--axis", choices=["eta", "s"], required=True)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    _add_search(p)
    _add_output(p, "json")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("scan", help="optimized |<B>| over an (r,) s x eta grid")
    _add_state(p, r_grid=True)
    p.add_argument("--s", type=parse_grid, default=None, help="lo:hi:count or a single value")
    p.add_argument("--s-list", type=parse_list, default=None)
    p.add_argument("--eta", type=parse_grid, default=None, help="lo:hi:count or a single value")
    p.add_argument("--eta-list", type=parse_list, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--audit", type=float, default=0.0, help="fraction of cells re-run cold")
    _add_search(p)
    _add_output(p, "csv")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("oracle-check", help="analytic kernels vs truncated Fock traces")
    p.add_argument("--suite", choices=["all", "equivalence", "loss"], default="all")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cutoff", type=int, default=None)
    _add_output(p, "json")
    p.set_defaults(func=cmd_oracle_check)
    return parser


# options whose values may start with "-" without being plain negative numbers
VALUE_OPTIONS = {"--s", "--eta", "--r", "--s-list", "--eta-list", "--alpha", "--beta", "--settings"}


def _join_values(argv):
    """Rewrite ``--s -1.6:0:81`` as ``--s=-1.6:0:81`` so argparse keeps the value."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in VALUE_OPTIONS:
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            elif nxt.startswith("-") and not nxt.startswith("--"):
                out.append(f"{tok}={nxt}")
            else:
                out.extend([tok, nxt])
        else:
            out.append(tok)
    return out


def _setup_logging(verbosity: int):
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel([logging.WARNING, logging.INFO, logging.DEBUG][min(verbosity, 2)])
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_values(sys.argv[1:] if argv is None else list(argv)))
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except fock.InadequateCutoff as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE if args.command_name == "oracle-check" else EXIT_DOMAIN
