"""Command-line front end.

    orlicz-lab legendre --func "pow(r,1)*max(r,1)" --grid=-5:5:0.01 --out lstar.csv
    orlicz-lab subgrad  --func hinge_power:1 --dim 2 --point 0.6,0.8
    orlicz-lab delta2   --func "pow(r,2)*log1p(r)" --grid 0.1:10:0.1 --format csv
    orlicz-lab norms    --func pow3 --in field.json
    orlicz-lab mixture  --func "pow(r,2)*max(r,1)" --trials 20
    orlicz-lab verify   --suite sandwich --func pow2 --trials 100 --seed 7

Exit status is 0 when every asserted check passes, 2 when a check fails and
1 on usage, parse or IO errors. Estimates never fail.
"""

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, delta2, orlicz, registry, subgrad
from .convex_core import SearchConfig, legendre_values
from .errors import OrliczLabError, ParseError
from .func_dsl import NormSpec, lift_radial, parse_young
from .report import CheckRecord, ReportEnvelope, emit

COMMANDS = ("legendre", "subgrad", "delta2", "norms", "mixture", "verify")
SUITES = ("sandwich", "holder", "mixture", "convolution", "perturbation", "young",
          "subgrad", "gamma", "all")
RUN_KEYS = ("command", "func", "registry", "dim", "norm", "seed", "grid", "trials",
            "eps_grid", "in", "out", "format", "suite", "point", "search", "timing")
_DEFAULTS = {"dim": 1, "norm": "euclidean", "seed": 0, "trials": 10,
             "eps_grid": "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6", "suite": "all", "timing": False}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n\n{self.format_usage()}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--func", help="profile text (e.g. 'pow(r,2)*max(r,1)') or registry name")
    common.add_argument("--registry", help="registry name (alternative to --func)")
    common.add_argument("--dim", type=int, help="ambient dimension n (default 1)")
    common.add_argument("--norm", help="euclidean | lp:<p> | linf | weighted:<w1>,...")
    common.add_argument("--seed", type=int, help="64-bit seed (default 0)")
    common.add_argument("--grid", help="start:stop:step, endpoints inclusive")
    common.add_argument("--trials", type=int, help="random instances per check")
    common.add_argument("--eps-grid", dest="eps_grid", help="comma separated eps values")
    common.add_argument("--in", dest="in_", metavar="IN", help="JSON field {dim, atoms:[{weight, value}]}")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), help="inferred from --out when omitted")
    common.add_argument("--suite", help="verification suite: " + ", ".join(SUITES))
    common.add_argument("--point", help="comma separated point for subgrad")
    common.add_argument("--config", help="JSON config file with the same keys as the flags")
    common.add_argument("--timing", action="store_true", default=None,
                        help="record wall time (makes output non byte-stable)")
    parser = _Parser(prog="orlicz-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args):
    """Merge the config file (if any) with flags; flags win."""
    cfg = dict(_DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(doc) - set(RUN_KEYS))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update({k.replace("-", "_"): v for k, v in doc.items()})
    flags = vars(args).copy()
    flags["in"] = flags.pop("in_")
    flags.pop("config")
    for k, v in flags.items():
        if v is not None:
            cfg[k] = v
    if cfg.get("format") is None:
        out = cfg.get("out") or ""
        cfg["format"] = "csv" if out.lower().endswith(".csv") else "json"
    search = cfg.get("search") or {}
    fields = {f.name for f in dataclasses.fields(SearchConfig)}
    bad = sorted(set(search) - fields)
    if bad:
        raise UsageError(f"unknown search keys: {', '.join(bad)}")
    if "exponent_offsets" in search:
        search = dict(search, exponent_offsets=tuple(search["exponent_offsets"]))
    cfg["search"] = search
    return cfg


def parse_grid(text):
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"grid must be start:stop:step, got {text!r}") from exc
    if step <= 0 or b < a:
        raise UsageError("grid needs step > 0 and stop >= start")
    count = int(math.floor((b - a) / step + 0.5))
    pts = a + step * np.arange(count + 1)
    # inclusive endpoint within half a step; round away representation noise
    return np.round(pts, 12)


def parse_floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma separated numbers, got {text!r}") from exc


def build_function(spec, dim, norm):
    """Registry name or profile text -> oracle."""
    norm_spec = NormSpec.parse(norm) if isinstance(norm, str) else norm
    if registry.is_registry_name(spec):
        return registry.make(spec, dim, norm_spec)
    return lift_radial(parse_young(spec), norm_spec, dim)


def _workers():
    try:
        return max(1, int(os.environ.get("ORLICZ_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    # ordered results regardless of worker count keep reports deterministic
    n = _workers()
    if n == 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- commands ----------------------------------------------------------------


def cmd_legendre(run, search):
    f = run["function"]
    grid = parse_grid(run.get("grid") or "-5:5:0.01")
    X = np.zeros((grid.size, f.dim))
    X[:, 0] = grid
    vals = legendre_values(f, X, search, numeric=True)
    side = "lower_bound_of_sup"
    table = [{"x": float(x), "Lstar": float(v), "bound_side": side} for x, v in zip(grid, vals)]
    columns = ["x", "Lstar", "bound_side"]
    records = []
    if f.analytic_conjugate is not None:
        exact = f.analytic_conjugate(X)
        with np.errstate(invalid="ignore"):
            gap = np.where(np.isfinite(exact) & np.isfinite(vals), exact - vals, 0.0)
        for row, e, g in zip(table, exact, gap):
            row["analytic"] = float(e)
            row["gap"] = float(g)
        columns += ["analytic", "gap"]
        k = int(np.argmax(np.abs(gap)))
        records.append(CheckRecord("legendre_vs_closed_form", "estimate",
                                   {"max_abs_gap": float(np.abs(gap).max()), "at_x": float(grid[k])},
                                   {"tol_fenchel": search.tol_fenchel}))
    records.append(CheckRecord("legendre_grid", "estimate",
                               {"points": int(grid.size), "bound_side": side}))
    return records, table, columns


def cmd_subgrad(run, search):
    f = run["function"]
    rng = np.random.default_rng(run["seed"])
    points = []
    if run.get("point"):
        p = parse_floats(run["point"])
        if len(p) != f.dim:
            raise UsageError(f"--point has {len(p)} coordinates, --dim is {f.dim}")
        points.append(np.array(p))
    else:
        points.append(np.zeros(f.dim))
    trials = int(run["trials"]) if run.get("point") is None else 0
    points += [rng.standard_normal(f.dim) * 2.0 for _ in range(trials)]

    def one(x):
        out = []
        for method, fn in (("sphere_average", subgrad.sphere_average_subgradient),
                           ("barycenter", subgrad.barycenter_subgradient),
                           ("mollified", lambda g, z, c: subgrad.mollified_subgradient(g, z, 1e-6, c))):
            y, cert = fn(f, x, search)
            status = "pass" if cert.valid else "fail"
            wit = {} if cert.valid else {"point": x.tolist(), "candidate": y.tolist(),
                                          "probe": cert.witness.tolist()}
            out.append(CheckRecord(f"subgradient/{method}", status,
                                   {"point": x.tolist(), "candidate": y.tolist(),
                                    "probe_count": cert.probe_count, "std_error": cert.std_error,
                                    "resolved": cert.resolved},
                                   {"min_slack": cert.min_slack, "tol": cert.tol}, wit))
        return out

    return [r for rs in _map(one, points) for r in rs], [], []


def cmd_delta2(run, search):
    f = run["function"]
    grid = parse_grid(run.get("grid") or "0.1:10:0.1")
    phi = delta2.young_estimate(f, "Phi", grid, search)
    psi = delta2.young_estimate(f, "Psi", grid, search)
    big_r = delta2.young_estimate(f, "R", grid, search)
    table = [{"r": float(r), "Phi": float(a), "Psi": float(b), "R": float(c)}
             for r, a, b, c in zip(grid, phi.values, psi.values, big_r.values)]
    diag_all = delta2.delta2_diagnostic(f, "all", search)
    diag_out = delta2.delta2_diagnostic(f, "outside", search)
    records = [
        CheckRecord("young/Phi", "estimate", {"bound_side": phi.bound_side, "exact": phi.exact,
                                               "p_minus": phi.p_minus, "p_plus": phi.p_plus}),
        CheckRecord("young/Psi", "estimate", {"bound_side": psi.bound_side}),
        CheckRecord("young/R", "estimate", {"bound_side": big_r.bound_side}),
    ]
    for d in (diag_all, diag_out):
        records.append(CheckRecord(
            f"delta2/{d.domain}", "estimate",
            {"sup_ratio_estimate": d.sup_ratio_estimate, "bound_side": d.bound_side,
             "p_minus": d.p_minus, "p_plus": d.p_plus, "verdict": d.verdict,
             "doubling_constant": d.doubling_constant, "witness": d.witness}))
        ok = d.verdict == "delta2_evidence"
        records.append(CheckRecord(
            f"delta2/{d.domain}/below_p_plus", "pass" if ok else "fail",
            {"sup_ratio_estimate": d.sup_ratio_estimate, "p_plus": d.p_plus},
            {"p_plus_margin": d.p_plus * 1.02 - d.sup_ratio_estimate},
            {} if ok else {"x": d.witness}))
    return records, table, ["r", "Phi", "Psi", "R"]


def _sandwich_record(f, sp, u, search, label):
    rep = orlicz.sandwich_check(f, sp, u, search)
    res = rep.values
    return CheckRecord(label, "pass" if rep.passed else "fail",
                       dict(res, bound_side="bracket"), rep.slacks,
                       {} if rep.passed else {"u": np.asarray(u).tolist(),
                                              "weights": sp.weights.tolist()})


def cmd_norms(run, search):
    f = run["function"]
    if run.get("in"):
        try:
            sp, u = orlicz.load_field(run["in"], f.dim)
        except OSError as exc:
            raise UsageError(f"cannot read {run['in']}: {exc.strerror}") from exc
        fields = [(sp, u)]
    else:
        rng = np.random.default_rng(run["seed"])
        fields = [(orlicz.DiscreteProbabilitySpace.random(rng, 64), rng.standard_normal((64, f.dim)))
                  for _ in range(int(run["trials"]))]
    return [_sandwich_record(f, sp, u, search, f"norms/{i}") for i, (sp, u) in enumerate(fields)], [], []


def _mixture_records(f, rng, trials, search, exponents=None):
    out = []
    for i in range(trials):
        sp1 = orlicz.DiscreteProbabilitySpace.random(rng, 32)
        sp2 = orlicz.DiscreteProbabilitySpace.random(rng, 32)
        u = rng.standard_normal((32, f.dim)) * rng.uniform(0.2, 4.0)
        t = rng.uniform()
        rep = orlicz.mixture_concavity_check(f, u, [sp1, sp2], [t, 1 - t], search,
                                             exponents=exponents)
        out.append(CheckRecord(f"mixture/{i}", "pass" if rep.passed else "fail", rep.values,
                               rep.slacks, {} if rep.passed else {"u": u.tolist(), "t": t}))
    return out


def cmd_mixture(run, search):
    f = run["function"]
    rng = np.random.default_rng(run["seed"])
    exps = None
    records = []
    if f.homogeneity_order is None:
        exps = delta2.growth_exponents(f, search)
        p0 = max(1.0, min(exps))
        p1 = max(p0, max(exps))
        g = delta2.gamma(p1, p0)
        g_grid = delta2.gamma_grid_oracle(p1, p0)
        ok = abs(g - g_grid) <= 1e-6
        records.append(CheckRecord("gamma/cross_validation", "pass" if ok else "fail",
                                   {"p1": p1, "p0": p0, "gamma": g, "grid_oracle": g_grid},
                                   {"tol_minus_diff": 1e-6 - abs(g - g_grid)}))
    records += _mixture_records(f, rng, int(run["trials"]), search, exps)
    return records, [], []


def _verify_suite(suite, f, run, search, rng):
    trials = int(run["trials"])
    recs = []
    if suite == "sandwich":
        for i in range(trials):
            sp = orlicz.DiscreteProbabilitySpace.random(rng, int(rng.integers(2, 65)))
            u = rng.standard_normal((sp.atom_count, f.dim)) * rng.uniform(0.1, 5.0)
            recs.append(_sandwich_record(f, sp, u, search, f"sandwich/{f.name}/{i}"))
    elif suite == "holder":
        from .convex_core import conjugate_oracle
        conj = conjugate_oracle(f, search)
        for i in range(trials):
            sp = orlicz.DiscreteProbabilitySpace.random(rng, 16)
            u = rng.standard_normal((16, f.dim)) * rng.uniform(0.1, 5.0)
            v = rng.standard_normal((16, f.dim)) * rng.uniform(0.1, 5.0)
            rep = orlicz.holder_check(f, sp, u, v, search, conj=conj)
            recs.append(CheckRecord(f"holder/{f.name}/{i}", "pass" if rep.passed else "fail",
                                    {k: rep.values[k] for k in ("lhs", "rhs")}, rep.slacks,
                                    {} if rep.passed else rep.witnesses))
    elif suite == "mixture":
        exps = None if f.homogeneity_order is not None else delta2.growth_exponents(f, search)
        recs += _mixture_records(f, rng, trials, search, exps)
    elif suite == "convolution":
        if f.homogeneity_order is None:
            return recs
        for i in range(trials):
            recs.append(_convolution_record(f, rng, f"convolution/{f.name}/{i}", search))
    elif suite == "perturbation":
        f0 = registry.make("quadratic", f.dim)
        sp = orlicz.DiscreteProbabilitySpace.random(rng, 16)
        u = rng.standard_normal((16, f.dim))
        rep = orlicz.perturbation_sweep(f, f0, sp, u, parse_floats(run["eps_grid"]), search)
        recs.append(CheckRecord(f"perturbation/{f.name}", "pass" if rep.passed else "fail",
                                {"eps_grid": rep.eps_grid, "norms": rep.norms,
                                 "conj_norms": rep.conj_norms, "base_norm": rep.base_norm,
                                 "base_conj_norm": rep.base_conj_norm},
                                {"terminal_gap": rep.terminal_gap,
                                 "terminal_conj_gap": rep.terminal_conj_gap},
                                {} if rep.passed else {"violations": rep.violations,
                                                       "u": u.tolist()}))
    elif suite == "young":
        grid = np.array([0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0])
        phi = delta2.young_estimate(f, "Phi", grid, search)
        psi = delta2.young_estimate(f, "Psi", 1.0 / grid, search)
        recip = psi.values * phi.values
        dev = float(np.abs(recip - 1.0).max())
        recs.append(CheckRecord(f"young/reciprocal/{f.name}", "pass" if dev <= 0.05 else "fail",
                                {"products": recip.tolist()}, {"tol_minus_dev": 0.05 - dev}))
        prop = delta2.young_properties_check(phi)
        recs.append(CheckRecord(f"young/properties/{f.name}", "pass" if prop.passed else "fail",
                                {"pairs": prop.pairs_tested, "shortfalls": len(prop.shortfalls)},
                                {"violations": -float(len(prop.violations))},
                                {} if prop.passed else {"violations": prop.violations}))
    elif suite == "subgrad":
        sub_run = dict(run, point=None, trials=trials)
        recs += cmd_subgrad(dict(sub_run, function=f), search)[0]
    return recs


def _convolution_record(f, rng, label, search):
    m = f.dim
    size = 3
    lam = {tuple(int(c) for c in rng.integers(0, size, m)): 1.0 for _ in range(3)}
    kap = {tuple(int(c) for c in rng.integers(0, size, m)): 1.0 for _ in range(3)}
    lam = {k: float(w) for k, w in zip(lam, rng.dirichlet(np.ones(len(lam))))}
    kap = {k: float(w) for k, w in zip(kap, rng.dirichlet(np.ones(len(kap))))}
    grid = np.stack(np.meshgrid(*[np.arange(2 * size)] * m, indexing="ij"), -1).reshape(-1, m)
    u = {tuple(int(c) for c in g): rng.standard_normal(f.dim) for g in grid}
    rep = orlicz.convolution_check(f, u, lam, kap, search)
    return CheckRecord(label, "pass" if rep.passed else "fail", rep.values, rep.slacks,
                       {} if rep.passed else {"lam": str(lam), "kap": str(kap)})


def cmd_verify(run, search):
    suite = run.get("suite") or "all"
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    rng = np.random.default_rng(run["seed"])
    suites = [s for s in SUITES if s not in ("all", "gamma")] if suite == "all" else [suite]
    records = []
    if suite in ("gamma", "all"):
        for p1, p0 in ((2.0, 1.0), (3.0, 2.0), (2.5, 1.5), (4.0, 1.0), (2.0, 2.0)):
            g = delta2.gamma(p1, p0)
            o = delta2.gamma_grid_oracle(p1, p0)
            ok = abs(g - o) <= 1e-6 and 0 < g <= 1
            records.append(CheckRecord(f"gamma/{p1:g}/{p0:g}", "pass" if ok else "fail",
                                       {"gamma": g, "grid_oracle": o},
                                       {"tol_minus_diff": 1e-6 - abs(g - o)}))
    funcs = [run["function"]] if run.get("function") is not None else [
        registry.make(name, run["dim"], run["norm"]) for name in registry.DEFAULT_SUITE]
    for s in suites:
        for f in funcs:
            records += _verify_suite(s, f, run, search, rng)
    return records, [], []


HANDLERS = {"legendre": cmd_legendre, "subgrad": cmd_subgrad, "delta2": cmd_delta2,
            "norms": cmd_norms, "mixture": cmd_mixture, "verify": cmd_verify}


def run(argv=None, stdout=None, stderr=None):
    """Execute one command; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        cfg = resolve_config(args)
        search = SearchConfig(**dict(cfg["search"], seed=int(cfg["seed"])))
        spec = cfg.get("func") or cfg.get("registry")
        if spec is None and cfg["command"] != "verify":
            raise UsageError("--func or --registry is required")
        run_cfg = dict(cfg)
        run_cfg["function"] = build_function(spec, int(cfg["dim"]), cfg["norm"]) if spec else None
        start = time.perf_counter()
        records, table, columns = HANDLERS[cfg["command"]](run_cfg, search)
        echo = {k: v for k, v in cfg.items() if k not in ("search", "timing", "out") and v is not None}
        echo["search"] = search.to_dict()
        report = ReportEnvelope(cfg["command"], echo, records, table, columns)
        if cfg.get("timing"):
            report.wall_time = time.perf_counter() - start
        emit(report, cfg["format"], cfg.get("out"), stdout)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return 1
    except ParseError as exc:
        print(f"parse error: {exc}", file=stderr)
        if exc.source:
            print(f"  {exc.source}\n  {' ' * exc.offset}^", file=stderr)
        return 1
    except (OrliczLabError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=stderr)
        return 1
    return 2 if report.failed else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
