"""Command-line entry point ``bgwlab``.

Exit codes: 0 success, 2 invalid input (bad flags, invalid law file),
3 a failed oracle or verification verdict, 4 a sampling budget exceeded.
All randomness comes from ``--seed``.  Every output carries the package
version, the law hash and the seed: JSON outputs in a ``meta`` field,
CSV outputs in a leading ``#`` comment line, NDJSON in every record.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .offspring import InvalidLaw, OffspringLaw, build_critical_tail_law

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3
EXIT_BUDGET = 4

TOY_HEAD = (0.5, 0.1, 0.3, 0.1)

log = logging.getLogger("bgwlab")


class UsageError(Exception):
    """Invalid command-line input (maps to exit code 2)."""


# ---------------------------------------------------------------------------
# argument types and shared helpers

def int_arg(text: str) -> int:
    """Integer that may be written in scientific notation (1e6, 2.5E5)."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not np.isfinite(v) or v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    # decimal parse keeps e.g. 1e18 exact
    from decimal import Decimal
    return int(Decimal(text))


def grid_arg(text: str) -> list:
    """Comma-separated integers, each possibly in scientific notation."""
    return [int_arg(t.strip()) for t in text.split(",") if t.strip()]


def load_law(path) -> OffspringLaw:
    if path is None:
        return OffspringLaw(TOY_HEAD)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read law file: {e}")
    try:
        return OffspringLaw.from_json(text)
    except (InvalidLaw, ValueError, KeyError, TypeError) as e:
        raise UsageError(f"invalid law file {path}: {e}")


def meta(law: OffspringLaw | None, seed=None) -> dict:
    return {"version": __version__, "law_hash": None if law is None else law.hash(),
            "seed": seed}


def _announce(law, seed=None):
    log.info("bgwlab %s law=%s seed=%s", __version__, None if law is None else law.hash(), seed)


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w")


def _write_json(obj, path):
    fh = _open_out(path)
    try:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _csv_comment(law, seed):
    m = meta(law, seed)
    return f"# bgwlab {m['version']} law_hash={m['law_hash']} seed={m['seed']}\n"


# ---------------------------------------------------------------------------
# subcommands

def cmd_law(args):
    if args.action == "build":
        if args.family == "log2":
            if args.c is None:
                raise UsageError("--c is required for --family log2")
            try:
                law = build_critical_tail_law(args.c, args.kmin, mean_tol=args.mean_tol)
            except InvalidLaw as e:
                raise UsageError(str(e))
        else:
            if args.head is None:
                raise UsageError("--head is required for --family head")
            try:
                law = OffspringLaw([float(v) for v in args.head.split(",")],
                                   mean_tol=args.mean_tol)
            except (InvalidLaw, ValueError) as e:
                raise UsageError(str(e))
        _announce(law)
        fh = _open_out(args.out)
        try:
            fh.write(law.to_json() + "\n")
        finally:
            if fh is not sys.stdout:
                fh.close()
        return EXIT_OK
    law = load_law(args.law)
    _announce(law)
    out = {"mass_deviation": law.mass_error, "mean_deviation": law.mean_error,
           "mean_tol": law.mean_tol, "mu0": float(law.pmf(0)),
           "tail": law.to_dict()["tail"], "meta": meta(law)}
    _write_json(out, args.out)
    return EXIT_OK


def cmd_constants(args):
    from .scaling import compute_constants
    law = load_law(args.law)
    _announce(law)
    out = compute_constants(law, args.n).to_dict()
    out["meta"] = meta(law)
    _write_json(out, args.out)
    return EXIT_OK


def cmd_sample(args):
    from .harness import derive_seed
    law = load_law(args.law)
    _announce(law, args.seed)
    if args.what == "walk":
        from .walk import sample_walk
        rng = np.random.default_rng(args.seed)
        path = sample_walk(law, args.n, rng)
        if args.emit == "path":
            fh = _open_out(args.out)
            try:
                fh.write(_csv_comment(law, args.seed))
                fh.write("w\n")
                np.savetxt(fh, path.W, fmt="%d")
            finally:
                if fh is not sys.stdout:
                    fh.close()
        else:
            m = path.markers
            _write_json({"n": args.n, "W_n": int(path.W[-1]), "zeta": m.zeta, "I_n": m.I_n,
                         "H_n": m.H_n, "max_increment": int(path.increments.max(initial=-1)),
                         "meta": meta(law, args.seed)}, args.out)
        return EXIT_OK
    fh = _open_out(args.out)
    try:
        for r in range(args.reps):
            seed = derive_seed(args.seed, 0, r)
            rec = tree_record(law, args.mode, args.n, seed, with_height=not args.no_height,
                              budget=args.budget)
            rec.update({"replicate": r, "mode": args.mode, "law_hash": law.hash(),
                        "version": __version__})
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def sample_tree(law, mode, n, seed, budget=10**10):
    """The tree of one ``sample tree`` record, regenerated from its seed."""
    from .tree import (
        sample_tree_approx_Zn, sample_tree_exact_n, sample_tree_tail,
    )
    rng = np.random.default_rng(seed)
    if mode == "exact-n":
        return sample_tree_exact_n(law, n, rng, budget=budget)
    if mode == "approx-zn":
        return sample_tree_approx_Zn(law, n, rng)
    if mode == "tail-rejection":
        return sample_tree_tail(law, n, rng, strategy="rejection", budget=budget)
    if mode == "tail-vecz":
        tree = sample_tree_tail(law, n, rng, strategy="vecZ")
        if tree is None:
            raise UsageError("tail-vecz excursion too long to store")
        return tree
    raise UsageError(f"unknown mode {mode!r}")


def tree_record(law, mode, n, seed, with_height=True, budget=10**10) -> dict:
    from .tree import tree_stats
    tree = sample_tree(law, mode, n, seed, budget)
    rec = tree_stats(tree, top=32, with_height=with_height).record(32)
    rec.update({"n": int(n), "seed": int(seed)})
    return rec


def cmd_loop(args):
    from .looptree import LOOP_CSV_COLUMNS, build_looptree, circle_proximity
    from .scaling import compute_constants
    law = load_law(args.law)
    _announce(law)
    try:
        with open(args.input) as fh:
            records = [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read {args.input}: {e}")
    fh = _open_out(args.out)
    try:
        fh.write(_csv_comment(law, None))
        fh.write(",".join(LOOP_CSV_COLUMNS) + "\n")
        for rec in records:
            if rec.get("law_hash") not in (None, law.hash()):
                raise UsageError(f"record law hash {rec['law_hash']} does not match the law file")
            n, seed = int(rec["n"]), int(rec["seed"])
            tree = sample_tree(law, rec.get("mode", "approx-zn"), n, seed)
            if tree.size != rec.get("size", tree.size):
                raise UsageError(f"regenerated tree for seed {seed} differs from the record")
            b = compute_constants(law, n).b_n
            cp = circle_proximity(build_looptree(tree), b)
            fh.write(f"{n},{seed},{cp.cycle_len_ratio!r},{cp.max_graft_radius_ratio!r},"
                     f"{cp.gh_upper_bound!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_analytic(args):
    from .analytic import height_tail
    law = load_law(args.law)
    _announce(law)
    T = height_tail(law, args.nmax)
    fh = _open_out(args.out)
    try:
        fh.write(_csv_comment(law, None))
        fh.write("n,Q,nQ\n")
        for n, q, nq in T.rows():
            fh.write(f"{n},{q!r},{nq!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_verify(args):
    from .harness import ExperimentConfig, run_experiment
    law = load_law(args.law)
    _announce(law, args.seed)
    tol = {}
    for item in args.tol or []:
        key, _, val = item.partition("=")
        try:
            tol[key] = float(val)
        except ValueError:
            raise UsageError(f"bad --tol {item!r}; expected name=value")
    try:
        cfg = ExperimentConfig(args.theorem, law, sorted(args.n), args.reps, args.seed,
                               mode=args.mode, tolerances=tol, threads=args.threads,
                               aux_reps=args.aux_reps)
    except ValueError as e:
        raise UsageError(str(e))
    rep = run_experiment(cfg)
    out = args.out or "report.json"
    timing = None if args.no_timing else out + ".timing.json"
    rep.write(out, timing)
    if args.emit_plotdata:
        rep.write_plotdata(args.emit_plotdata)
    for v in rep.verdicts:
        log.info("%s n=%s statistic=%s %s", v["name"], v["n"], v["statistic"],
                 "pass" if v["pass"] else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_oracle(args):
    from .oracle import run_check
    law = load_law(args.law)
    _announce(law, args.seed)
    if args.nmax is not None and args.check != "lukasiewicz" and args.nmax > 14:
        raise UsageError("--nmax must be <= 14 for the exact oracles")
    res = run_check(args.check, law, args.nmax, rng=np.random.default_rng(args.seed))
    res["meta"] = meta(law, args.seed)
    _write_json(res, args.out)
    return EXIT_OK if res["holds"] else EXIT_FAILED


def cmd_refdist(args):
    from .refdist import laplace_check, sample_cauchy1
    _announce(None, args.seed)
    rng = np.random.default_rng(args.seed)
    rows = laplace_check(sample_cauchy1(rng, args.n))
    ok = all(abs(r["z"]) <= 3 for r in rows)
    _write_json({"n": args.n, "laplace": rows, "within_3_se": ok, "meta": meta(None, args.seed)},
                args.out)
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    from .harness import THEOREM_IDS
    from .oracle import CHECKS

    p = argparse.ArgumentParser(
        prog="bgwlab",
        description="Critical Galton-Watson trees with Cauchy-type offspring: laws, samplers, "
                    "exact oracles and theorem-level experiments.",
        epilog="exit codes: 0 ok, 2 invalid input, 3 oracle or verdict failure, "
               "4 budget exceeded")
    p.add_argument("--version", action="version", version=f"bgwlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    law = sub.add_parser("law", help="build or audit an offspring law file")
    lsub = law.add_subparsers(dest="action", required=True)
    b = lsub.add_parser("build", help="write a critical law as JSON")
    b.add_argument("--family", choices=("log2", "head"), default="log2")
    b.add_argument("--c", type=float, help="tail constant c of c/(k^2 ln^2 k)")
    b.add_argument("--kmin", type=int, default=3)
    b.add_argument("--head", help="comma-separated mu(0), mu(1), ... for --family head")
    b.add_argument("--mean-tol", type=float, default=1e-10)
    b.add_argument("--out")
    a = lsub.add_parser("audit", help="print mass and mean deviations")
    a.add_argument("--law", required=True)
    a.add_argument("--out")
    law.set_defaults(func=cmd_law)

    c = sub.add_parser("constants", help="a_n, b_n, ell*(a_n), Lambda(n)")
    c.add_argument("--law", required=True)
    c.add_argument("--n", type=int_arg, required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_constants)

    s = sub.add_parser("sample", help="sample walks or trees")
    ssub = s.add_subparsers(dest="what", required=True)
    w = ssub.add_parser("walk", help="one free walk of n steps")
    w.add_argument("--law", required=True)
    w.add_argument("--n", type=int_arg, required=True)
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--emit", choices=("stats", "path"), default="stats")
    w.add_argument("--out")
    t = ssub.add_parser("tree", help="NDJSON tree statistics, one record per replicate")
    t.add_argument("--law", required=True)
    t.add_argument("--mode", choices=("exact-n", "approx-zn", "tail-rejection", "tail-vecz"),
                   required=True)
    t.add_argument("--n", type=int_arg, required=True)
    t.add_argument("--reps", type=int_arg, default=1)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--no-height", action="store_true", help="skip the tree height")
    t.add_argument("--budget", type=int_arg, default=10**10,
                   help="step budget of the rejection samplers (exit 4 when exceeded)")
    t.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    lp = sub.add_parser("loop", help="looptree statistics")
    lpsub = lp.add_subparsers(dest="action", required=True)
    la = lpsub.add_parser("analyze", help="circle proximity of the trees in an NDJSON file")
    la.add_argument("--in", dest="input", required=True)
    la.add_argument("--law", required=True)
    la.add_argument("--out")
    lp.set_defaults(func=cmd_loop)

    an = sub.add_parser("analytic", help="generating-function computations")
    ansub = an.add_subparsers(dest="action", required=True)
    ht = ansub.add_parser("height-tail", help="Q[n] = P(height >= n) for n <= nmax")
    ht.add_argument("--law", required=True)
    ht.add_argument("--nmax", type=int_arg, required=True)
    ht.add_argument("--out")
    an.set_defaults(func=cmd_analytic)

    v = sub.add_parser("verify", help="run a theorem-level experiment")
    v.add_argument("--theorem", choices=THEOREM_IDS, required=True)
    v.add_argument("--law", required=True)
    v.add_argument("--n", type=grid_arg, required=True, help="comma-separated n grid")
    v.add_argument("--reps", type=int_arg, required=True)
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--mode", choices=("exact-n", "approx-zn", "tail-rejection", "tail-vecz"))
    v.add_argument("--aux-reps", type=int_arg, help="walks for P(T_1 > n) estimates")
    v.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help="override a named tolerance")
    v.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    v.add_argument("--out", help="report path (default report.json)")
    v.add_argument("--emit-plotdata", metavar="CSV")
    v.add_argument("--no-timing", action="store_true", help="do not write the timing sidecar")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle", help="exact identities on small n")
    o.add_argument("--check", choices=sorted(CHECKS), required=True)
    o.add_argument("--law", help="law file (default: the toy law 0.5, 0.1, 0.3, 0.1)")
    o.add_argument("--nmax", type=int_arg)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("refdist", help="reference-law self tests")
    rsub = r.add_subparsers(dest="action", required=True)
    st = rsub.add_parser("selftest", help="Laplace check of the C1 sampler")
    st.add_argument("--n", type=int_arg, default=10**6)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--out")
    r.set_defaults(func=cmd_refdist)
    return p


def main(argv=None) -> int:
    from .harness import ReplicateError
    from .tree import CapExceeded, InvalidExcursion
    from .walk import BudgetExceeded

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"bgwlab: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidLaw, InvalidExcursion) as e:
        print(f"bgwlab: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (BudgetExceeded, CapExceeded) as e:
        print(f"bgwlab: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except ReplicateError as e:
        print(f"bgwlab: {e}", file=sys.stderr)
        if isinstance(e.__cause__, (BudgetExceeded, CapExceeded)):
            return EXIT_BUDGET
        raise


if __name__ == "__main__":
    sys.exit(main())
