"""Error evaluation against the exact oracle.

Every trial builds a structure with its own seed and compares it with exact
counts on every distinct substring of the corpus plus every retained
pattern. Patterns outside both sets have true count 0 and answer 0.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .corpus import Database, build_index
from .countingtrie import build_private_trie
from .qgrams import build_qgrams_approx, build_qgrams_pure

EVAL_SCHEMA = "dpsubstr.eval/1"
ROWS_SCHEMA = "dpsubstr.eval-rows/1"
SUMMARY_COLUMNS = ("trial", "seed", "patterns", "max_error", "mean_error", "q50", "q90",
                   "q99", "alpha_total", "within_bound", "failed")
ROW_COLUMNS = ("trial", "pattern", "true_count", "answer", "abs_error")

DEFAULT_MAX_PATTERNS = 500_000


class OracleTooLargeError(ValueError):
    """The exact sweep would be too large to run."""


@dataclass
class EvalReport:
    """Per-pattern rows for every trial plus per-trial aggregates."""

    rows: list = field(default_factory=list)          # (trial, pattern, true, answer, err)
    trials: list = field(default_factory=list)        # dicts keyed by SUMMARY_COLUMNS
    meta: dict = field(default_factory=dict)

    @property
    def fraction_within_bound(self) -> float:
        ok = [t["within_bound"] for t in self.trials if not t["failed"]]
        return float(np.mean(ok)) if ok else float("nan")

    @staticmethod
    def aggregate(errors) -> dict:
        e = np.asarray(errors, dtype=float)
        if e.size == 0:
            return {"patterns": 0, "max_error": 0.0, "mean_error": 0.0,
                    "q50": 0.0, "q90": 0.0, "q99": 0.0}
        return {"patterns": int(e.size), "max_error": float(e.max()),
                "mean_error": float(e.mean()), "q50": float(np.quantile(e, 0.5)),
                "q90": float(np.quantile(e, 0.9)), "q99": float(np.quantile(e, 0.99))}

    def recompute(self) -> list[dict]:
        """Aggregates rebuilt from ``rows`` (used to check consistency)."""
        out = []
        for t in self.trials:
            errs = [r[4] for r in self.rows if r[0] == t["trial"]]
            out.append(self.aggregate(errs))
        return out

    def summary_tsv(self) -> str:
        buf = io.StringIO()
        buf.write(f"#schema={EVAL_SCHEMA}\n")
        buf.write("\t".join(SUMMARY_COLUMNS) + "\n")
        for t in self.trials:
            cells = []
            for c in SUMMARY_COLUMNS:
                v = t[c]
                if isinstance(v, bool):
                    cells.append(str(int(v)))
                elif isinstance(v, float):
                    cells.append(f"{v:.6f}")
                else:
                    cells.append(str(v))
            buf.write("\t".join(cells) + "\n")
        buf.write(f"#fraction_within_bound={self.fraction_within_bound:.6f}\n")
        return buf.getvalue()

    def rows_tsv(self, decode=None) -> str:
        decode = decode or (lambda b: b.hex())
        buf = io.StringIO()
        buf.write(f"#schema={ROWS_SCHEMA}\n")
        buf.write("\t".join(ROW_COLUMNS) + "\n")
        for trial, p, true, ans, err in self.rows:
            buf.write(f"{trial}\t{decode(p)}\t{true}\t{ans:.6f}\t{err:.6f}\n")
        return buf.getvalue()


def exact_table(db: Database, cap: int, q: int | None = None, index=None) -> dict:
    idx = build_index(db) if index is None else index
    lengths = [q] if q is not None else range(1, db.ell + 1)
    table = {}
    for m in lengths:
        table.update(idx.substrings_of_length(m, cap))
    return table


def run_eval(db: Database, trials: int, epsilon: float, delta: float = 0.0,
             beta: float = 0.05, cap: int | None = None, seed: int = 0, q: int | None = None,
             zero_noise: bool = False, keep_rows: bool = True,
             max_patterns: int = DEFAULT_MAX_PATTERNS, **build_kw) -> EvalReport:
    """Run ``trials`` builds with seeds ``seed, seed+1, ...`` and measure errors.

    ``q`` switches to the q-gram pipelines. Refuses corpora whose sweep
    would exceed ``max_patterns`` distinct patterns per trial.
    """
    cap = db.ell if cap is None else cap
    idx = build_index(db)
    truth = exact_table(db, cap, q, idx)
    if len(truth) > max_patterns:
        raise OracleTooLargeError(
            f"corpus has {len(truth)} distinct patterns (limit {max_patterns}); "
            "use fewer or shorter documents, or raise --max-patterns")
    report = EvalReport(meta={"epsilon": epsilon, "delta": delta, "beta": beta, "cap": cap,
                              "q": q, "trials": trials, "seed": seed,
                              "distinct_patterns": len(truth), "zero_noise": zero_noise})
    for t in range(trials):
        s = seed + t
        if q is None:
            ds = build_private_trie(db, epsilon, delta, beta, cap=cap, seed=s,
                                    zero_noise=zero_noise, index=idx, **build_kw)
            bound = ds.meta["alpha_total"]
        elif delta == 0:
            ds = build_qgrams_pure(db, q, epsilon, beta, cap=cap, seed=s,
                                   zero_noise=zero_noise, index=idx, **build_kw)
            bound = ds.meta.get("alpha", float("nan"))
        else:
            ds = build_qgrams_approx(db, q, epsilon, delta, beta, cap=cap, seed=s,
                                     zero_noise=zero_noise, index=idx, **build_kw)
            bound = ds.meta["alpha"]
        answers = dict(ds.items())
        patterns = sorted(set(truth) | set(answers))
        errs = []
        for p in patterns:
            true = truth.get(p, 0)
            ans = answers.get(p, 0.0)
            err = abs(ans - true)
            errs.append(err)
            if keep_rows:
                report.rows.append((t, p, true, ans, err))
        agg = EvalReport.aggregate(errs)
        failed = ds.failed
        report.trials.append({"trial": t, "seed": s, **agg, "alpha_total": float(bound),
                              "within_bound": (not failed) and agg["max_error"] <= bound,
                              "failed": failed})
    return report
