"""Command line entry point (``dpsubstr``).

Exit status: 0 on success, 2 when candidate construction aborted on size
(the structure is still written, flagged as failed), 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .corpus import InvalidInputError, read_corpus
from .countingtrie import build_private_trie
from .evaluation import OracleTooLargeError, run_eval
from .mechanisms import BudgetExceededError, InvalidParameterError
from .qgrams import build_qgrams_approx, build_qgrams_pure
from .serialization import CorruptFileError, load, save
from .treecount import (RootedTree, colored_counts, dp_tree_counts_approx,
                        dp_tree_counts_pure, read_items, read_tree)
from .validation import (SEED_ENV, check_privacy_params, decode_pattern, default_seed,
                         encode_pattern, resolve_cap)

log = logging.getLogger("dpsubstr")

EXIT_OK, EXIT_ERROR, EXIT_SIZE_ABORT = 0, 1, 2
TREE_SCHEMA = "dpsubstr.tree-count/1"


def fmt(x: float) -> str:
    return f"{x:.6f}"


def _privacy_args(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=["pure", "approx"], default=None,
                   help="privacy notion; inferred from --delta when omitted")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                   help=f"noise seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--zero-noise", action="store_true",
                   help="TESTING ONLY: disable all noise (output is not private)")


def _corpus_args(p: argparse.ArgumentParser):
    p.add_argument("--input", "-i", required=True, help="corpus file, one document per line")
    p.add_argument("--alphabet", type=int, default=None,
                   help="pin the alphabet size (overrides the #alphabet header)")
    p.add_argument("--ell", type=int, default=None,
                   help="maximum document length; longer lines are rejected")
    p.add_argument("--cap", type=int, default=None, help="per-document count cap")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpsubstr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a private substring/document count structure")
    _corpus_args(b)
    _privacy_args(b)
    b.add_argument("--task", choices=["substring", "document"], default="substring")
    b.add_argument("--output", "-o", required=True)
    b.add_argument("--tau-candidates", type=float, default=None,
                   help="override the candidate threshold (tests only)")
    b.add_argument("--prune-threshold", type=float, default=None,
                   help="override the pruning threshold (tests only)")

    q = sub.add_parser("qgram-build", help="build a private q-gram structure")
    _corpus_args(q)
    _privacy_args(q)
    q.add_argument("--q", type=int, required=True)
    q.add_argument("--output", "-o", required=True)

    qu = sub.add_parser("query", help="query a structure; prints one count per pattern")
    qu.add_argument("structure")
    qu.add_argument("patterns", nargs="*")
    qu.add_argument("--meta", action="store_true", help="print build metadata as JSON")
    qu.add_argument("--clamp", action="store_true", help="clamp negative answers at 0")

    m = sub.add_parser("mine", help="list retained patterns with count >= tau")
    m.add_argument("structure")
    m.add_argument("--tau", type=float, default=0.0)

    t = sub.add_parser("tree-count", help="private counts on a tree")
    t.add_argument("--tree", required=True, help="'node_id parent_id' lines, root parent -1")
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--items", help="'leaf_id color' lines (colored tree counting)")
    src.add_argument("--counts", help="'node_id count' lines (exact counts you computed)")
    t.add_argument("--d", type=float, default=None,
                   help="leaf sensitivity (default 2 for --items, required for --counts)")
    t.add_argument("--cap", type=float, default=None,
                   help="per-node sensitivity bound (approx mode)")
    t.add_argument("--validate", action="store_true", help="check count monotonicity")
    _privacy_args(t)

    e = sub.add_parser("eval", help="measure errors against the exact oracle")
    _corpus_args(e)
    _privacy_args(e)
    e.add_argument("--task", choices=["substring", "document"], default="substring")
    e.add_argument("--q", type=int, default=None, help="evaluate the q-gram pipeline")
    e.add_argument("--trials", type=int, default=10)
    e.add_argument("--rows", default=None, help="also write per-pattern rows to this TSV")
    e.add_argument("--max-patterns", type=int, default=500_000)
    return ap


def _resolve_common(args):
    mode = check_privacy_params(args.epsilon, args.delta, args.beta, args.mode)
    seed = default_seed() if args.seed is None else args.seed
    if args.zero_noise:
        log.warning("zero-noise mode: output is NOT differentially private")
    return mode, seed


def _report_build(ds, out_path, digest):
    meta = ds.meta
    keys = ("mode", "n", "ell", "sigma", "cap", "alpha_total", "alpha", "prune_threshold",
            "threshold", "failed", "fail_level")
    summary = {k: meta[k] for k in keys if k in meta}
    summary.update(nodes=len(ds), output=str(out_path), sha256=digest)
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    if meta.get("zero_noise"):
        print("WARNING: built with zero_noise=true; not private", file=sys.stderr)
    if ds.failed:
        print(f"candidate construction aborted at level {meta.get('fail_level')}",
              file=sys.stderr)
        return EXIT_SIZE_ABORT
    return EXIT_OK


def cmd_build(args) -> int:
    mode, seed = _resolve_common(args)
    db = read_corpus(args.input, args.alphabet, args.ell)
    cap = resolve_cap(args.task, args.cap, db.ell)
    ds = build_private_trie(db, args.epsilon, args.delta, args.beta, cap=cap, seed=seed,
                            zero_noise=args.zero_noise, tau_candidates=args.tau_candidates,
                            prune_threshold=args.prune_threshold)
    ds.meta["task"] = args.task
    return _report_build(ds, args.output, save(ds, args.output))


def cmd_qgram_build(args) -> int:
    mode, seed = _resolve_common(args)
    db = read_corpus(args.input, args.alphabet, args.ell)
    cap = resolve_cap("substring", args.cap, db.ell)
    if mode == "pure":
        ds = build_qgrams_pure(db, args.q, args.epsilon, args.beta, cap=cap, seed=seed,
                               zero_noise=args.zero_noise)
    else:
        ds = build_qgrams_approx(db, args.q, args.epsilon, args.delta, args.beta, cap=cap,
                                 seed=seed, zero_noise=args.zero_noise)
    return _report_build(ds, args.output, save(ds, args.output))


def cmd_query(args, out=None) -> int:
    out = out or sys.stdout
    ds = load(args.structure)
    if args.meta:
        out.write(json.dumps(ds.meta, sort_keys=True, indent=1) + "\n")
    symbols = ds.meta.get("symbols")
    ell = ds.meta.get("ell")
    for p in args.patterns:
        codes = encode_pattern(p, symbols)
        if ell is not None and len(codes) > ell:
            log.warning("pattern %r is longer than ell=%d; answering 0", p, ell)
            val = 0.0
        else:
            val = ds.query(codes)
        if args.clamp:
            val = max(val, 0.0)
        out.write(fmt(val) + "\n")
    return EXIT_OK


def cmd_mine(args, out=None) -> int:
    out = out or sys.stdout
    ds = load(args.structure)
    symbols = ds.meta.get("symbols")
    for p, c in ds.mine(args.tau):
        out.write(f"{decode_pattern(p, symbols)}\t{fmt(c)}\n")
    return EXIT_OK


def _read_node_counts(path, tree: RootedTree) -> np.ndarray:
    pos = {lab: i for i, lab in enumerate(tree.labels)}
    counts = np.full(len(tree), np.nan)
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0] not in pos:
                raise InvalidInputError(f"{path}:{ln}: expected 'node_id count' for a known node")
            counts[pos[parts[0]]] = float(parts[1])
    if np.isnan(counts).any():
        raise InvalidInputError(f"{path}: missing counts for some nodes")
    return counts


def cmd_tree_count(args, out=None) -> int:
    out = out or sys.stdout
    mode, seed = _resolve_common(args)
    tree = read_tree(args.tree)
    if args.items:
        counts = colored_counts(tree, read_items(args.items, tree))
        d = 2.0 if args.d is None else args.d
    else:
        if args.d is None:
            raise InvalidParameterError("--d is required with --counts")
        counts = _read_node_counts(args.counts, tree)
        d = args.d
    if mode == "pure":
        res = dp_tree_counts_pure(tree, counts, d, args.epsilon, args.beta, seed=seed,
                                  zero_noise=args.zero_noise, validate=args.validate)
    else:
        cap = args.cap if args.cap is not None else d
        res = dp_tree_counts_approx(tree, counts, d, cap, args.epsilon, args.delta, args.beta,
                                    seed=seed, zero_noise=args.zero_noise,
                                    validate=args.validate)
    out.write(f"#schema={TREE_SCHEMA}\n#bound={fmt(res.bound)}\nnode_id\testimate\n")
    for v in range(len(tree)):
        out.write(f"{tree.labels[v]}\t{fmt(res.estimates[v])}\n")
    return EXIT_OK


def cmd_eval(args, out=None) -> int:
    out = out or sys.stdout
    mode, seed = _resolve_common(args)
    db = read_corpus(args.input, args.alphabet, args.ell)
    cap = resolve_cap(args.task, args.cap, db.ell)
    report = run_eval(db, args.trials, args.epsilon, args.delta, args.beta, cap=cap,
                      seed=seed, q=args.q, zero_noise=args.zero_noise,
                      keep_rows=args.rows is not None, max_patterns=args.max_patterns)
    out.write(report.summary_tsv())
    if args.rows:
        symbols = db.alphabet.symbols
        with open(args.rows, "w") as fh:
            fh.write(report.rows_tsv(lambda b: decode_pattern(b, symbols)))
    return EXIT_OK


COMMANDS = {"build": cmd_build, "qgram-build": cmd_qgram_build, "query": cmd_query,
            "mine": cmd_mine, "tree-count": cmd_tree_count, "eval": cmd_eval}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InvalidInputError, InvalidParameterError, BudgetExceededError, CorruptFileError,
            OracleTooLargeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
