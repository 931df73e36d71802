"""Workload generation, trace replay, auditing and reporting.

Run ``dbetree-harness --help`` (or ``python -m dbetree.harness``).  Exit codes:
0 clean, 1 usage error, 2 invariant violation, 3 oracle mismatch.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import random
import sys
from dataclasses import dataclass, field

from . import audit
from .baseline import AmortizedTree
from .core import ContractError
from .dictionary import DeamortizedTree
from .oracle import Oracle
from .params import ParamError, derive_params

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_MISMATCH = 0, 1, 2, 3
KINDS = ("random", "sequential", "adversarial")
CSV_FIELDS = ["op_index", "op", "reads", "writes", "cumulative_io", "max_per_op",
              "height", "leaves", "overfull"]


class UsageError(ValueError):
    pass


# -- workloads ----------------------------------------------------------------

def gen_workload(kind, n, seed, *, key_bits=40, burst=8192):
    """Deterministic list of ``n`` ops: ``("I", k)``, ``("D", k)``, ``("P", k)``
    or ``("R", a, b)``.  Every insertion and deletion is valid at its turn."""
    if kind not in KINDS:
        raise UsageError(f"unknown workload kind {kind!r} (choose from {', '.join(KINDS)})")
    if n < 1:
        raise UsageError("workload needs n >= 1")
    if kind == "sequential":
        return [("I", k) for k in range(1, n + 1)]
    rng = random.Random(seed)
    if kind == "random":
        return _gen_random(rng, n, key_bits)
    return _gen_adversarial(rng, n, key_bits, burst)


def _gen_random(rng, n, key_bits):
    ops, live, present = [], [], set()
    width = 1 << max(1, key_bits - 8)
    while len(ops) < n:
        r = rng.random()
        if r < 0.5 or not live:
            k = rng.getrandbits(key_bits)
            if k in present:
                continue
            present.add(k)
            live.append(k)
            ops.append(("I", k))
        elif r < 0.75:
            i = rng.randrange(len(live))
            k = live[i]
            live[i] = live[-1]
            live.pop()
            present.discard(k)
            ops.append(("D", k))
        elif r < 0.95:
            # half the probes hit a present key so membership is exercised
            k = rng.choice(live) if rng.random() < 0.5 else rng.getrandbits(key_bits)
            ops.append(("P", k))
        else:
            a = rng.getrandbits(key_bits)
            ops.append(("R", a, a + rng.randrange(width)))
    return ops


def _gen_adversarial(rng, n, key_bits, burst):
    """Random background keys, then dense bursts that are inserted and deleted
    again in key order.  The deletions concentrate on a few leaves and keep
    forcing merges; sparse probes land inside the bursts."""
    ops, present = [], set()
    for _ in range(max(1, n // 10)):
        k = rng.getrandbits(key_bits)
        if k not in present:
            present.add(k)
            ops.append(("I", k))
    shift = max(1, burst.bit_length() + 1)
    while len(ops) < n:
        base = rng.getrandbits(max(1, key_bits - shift)) << shift
        keys = [base + i for i in range(burst) if base + i not in present]
        for phase in ("I", "D"):
            for j, k in enumerate(keys):
                ops.append((phase, k))
                if j % 64 == 63:
                    ops.append(("P", k + rng.randrange(burst)))
        ops.append(("R", base, base + burst))
    return ops[:n]


def format_op(op) -> str:
    return " ".join(str(x) for x in op)


def parse_op(line, lineno=0):
    parts = line.split()
    arity = {"I": 1, "D": 1, "P": 1, "R": 2}
    if not parts or parts[0] not in arity or len(parts) != arity[parts[0]] + 1:
        raise UsageError(f"line {lineno}: cannot parse {line.strip()!r}")
    try:
        vals = [int(x) for x in parts[1:]]
    except ValueError:
        raise UsageError(f"line {lineno}: keys must be decimal integers") from None
    if any(not 0 <= v < 1 << 64 for v in vals):
        raise UsageError(f"line {lineno}: key outside the unsigned 64-bit range")
    return (parts[0], *vals)


def write_workload(ops, path):
    with open(path, "w", encoding="utf-8") as f:
        for op in ops:
            f.write(format_op(op) + "\n")


def read_workload(path):
    with open(path, encoding="utf-8") as f:
        return [parse_op(line, i) for i, line in enumerate(f, 1) if line.strip()]


# -- engines ------------------------------------------------------------------

class _Engine:
    pager = None

    def io_total(self):
        return self.pager.total if self.pager is not None else 0

    def reads(self):
        return self.pager.reads if self.pager is not None else 0


class DeamoEngine(_Engine):
    name = "deamo"

    def __init__(self, params, cache_blocks=None, backing=None):
        self.d = DeamortizedTree(params=params, cache_blocks=cache_blocks, backing=backing)
        self.pager = self.d.pager
        self.quiescent_violations: list = []
        self.censuses = 0
        self._hooked = None
        self._last = None
        self.structure_pending = False
        self._hook()

    def _hook(self):
        m = self.d.tree.maint
        if self._hooked is not m:
            m.quiescent_hooks.append(self._on_quiescent)
            self._hooked = m

    def _on_quiescent(self, tree):
        if self.structure_pending:
            self.structure_pending = False
            self.quiescent_violations.extend(audit.structure_violations(tree))
        # nothing below the root changes without maintenance work, so the
        # full census is only repeated after some
        token = (id(tree.maint), tree.maint.work_done)
        if token == self._last:
            root = tree.root
            if len(root.buffer) > 2 * tree.p.buffer_cap:
                self.quiescent_violations.append(audit.Violation(
                    "overfull_size", f"root buffer {len(root.buffer)}"))
            return
        self._last = token
        self.censuses += 1
        self.quiescent_violations.extend(audit.census(tree))

    def insert(self, k):
        self.d.insert(k)
        self._hook()

    def delete(self, k):
        self.d.delete(k)
        self._hook()

    def predecessor(self, k):
        return self.d.predecessor(k)

    def member(self, k):
        return self.d.member(k)

    def range_report(self, a, b):
        return self.d.range_report(a, b)

    def stats(self):
        s = self.d.tree.stats()
        return s["height"], s["leaves"], s["overfull"]

    def audit(self, oracle=None, final=False):
        """Content, budget and loop checks now; structural checks (which only
        hold between phases) at the next quiescent point, or right away after
        finishing the current phase when ``final``."""
        tree = self.d.tree
        out = []
        if oracle is not None:
            out += audit.content_violations(tree, oracle.contents())
        if final:
            m = tree.maint
            while not m._at_boundary:
                m.resume()
            out += audit.census(tree) + audit.structure_violations(tree)
        else:
            self.structure_pending = True
        out += [audit.Violation("loop_bound", f"{name} ran {n} times")
                for name, n in tree.maint.loop_violations]
        if self.d.meter.over_budget:
            out.append(audit.Violation("budget", f"{self.d.meter.over_budget} updates over "
                                                 f"budget, max {self.d.meter.max_ios_between_yields}"))
        out += self.quiescent_violations
        self.quiescent_violations = []
        return out

    def contents(self):
        return self.d.contents()

    def summary(self):
        d = self.d
        m = d.tree.maint
        return {"meter": d.meter.as_dict(), "loop_max": dict(m.loop_max),
                "loop_bounds": m.bounds(), "arrival_max": m.arrival_max,
                "events": dict(m.events), "rebuilds": d.history,
                "root_high_water": d.tree.root_high_water, "censuses": self.censuses,
                "params": d.params}


class BaselineEngine(_Engine):
    name = "baseline"

    def __init__(self, params, cache_blocks=None):
        self.t = AmortizedTree(params.B, params.epsilon,
                               cache_blocks=cache_blocks or params.default_cache_blocks,
                               logBN=params.logBN)
        self.pager = self.t.pager

    def insert(self, k):
        self.t.insert(k)

    def delete(self, k):
        self.t.delete(k)

    def predecessor(self, k):
        return self.t.predecessor(k)

    def member(self, k):
        return self.t.member(k)

    def range_report(self, a, b):
        return self.t.range_report(a, b)

    def stats(self):
        return self.t.height(), None, None

    def audit(self, oracle=None, final=False):
        if oracle is not None and self.t.contents() != oracle.contents():
            return [audit.Violation("content", "baseline contents differ from the oracle")]
        return []

    def contents(self):
        return self.t.contents()

    def summary(self):
        return {"events": dict(self.t.events)}


class OracleEngine(_Engine):
    name = "oracle"

    def __init__(self, *_, **__):
        self.o = Oracle()

    def insert(self, k):
        self.o.insert(k)

    def delete(self, k):
        self.o.delete(k)

    def predecessor(self, k):
        return self.o.predecessor(k)

    def member(self, k):
        return self.o.member(k)

    def range_report(self, a, b):
        return self.o.range_report(a, b)

    def stats(self):
        return None, None, None

    def audit(self, oracle=None, final=False):
        return []

    def contents(self):
        return self.o.contents()

    def summary(self):
        return {}


def make_engine(name, params, cache_blocks=None, backing=None):
    if name == "deamo":
        return DeamoEngine(params, cache_blocks, backing)
    if name == "baseline":
        return BaselineEngine(params, cache_blocks)
    if name == "oracle":
        return OracleEngine()
    raise UsageError(f"unknown engine {name!r}")


# -- replay -------------------------------------------------------------------

def content_digest(keys) -> str:
    h = hashlib.sha256()
    for k in keys:
        h.update(k.to_bytes(8, "little"))
    return h.hexdigest()


@dataclass
class Replay:
    engine: str
    ops: list = field(default_factory=list)           # op codes
    reads: list = field(default_factory=list)
    writes: list = field(default_factory=list)
    sizes: list = field(default_factory=list)         # keys reported by R ops
    snapshots: dict = field(default_factory=dict)     # op index -> (h, leaves, overfull)
    violations: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)
    digest: str = ""
    oracle_digest: str = ""
    summary: dict = field(default_factory=dict)
    logBN: int = 1
    B: int = 1

    @property
    def exit_code(self):
        if self.mismatches:
            return EXIT_MISMATCH
        if self.violations:
            return EXIT_VIOLATION
        return EXIT_OK


def replay(ops, engine="deamo", params=None, *, cache_blocks=None, audit_every=0,
           backing=None, check_member=True, stop_on_error=True, on_record=None):
    """Run ``ops`` on ``engine`` next to an oracle and collect per-op metrics.

    With ``audit_every = k > 0`` the engine's invariants are audited after every
    ``k``-th op and, for the deamortized tree, a census runs at every quiescent
    point of the maintenance cycle.
    """
    params = params or derive_params(256, 0.5, 1 << 20)
    eng = make_engine(engine, params, cache_blocks, backing)
    if backing is not None:
        from .pagefile import attach
        attach(backing, eng.d)
    oracle = Oracle()
    rec = Replay(engine, logBN=params.logBN, B=params.B)
    if audit_every <= 0 and isinstance(eng, DeamoEngine):
        eng._hooked.quiescent_hooks.clear()
        eng._hook = lambda: None
    for i, op in enumerate(ops):
        code = op[0]
        r0, t0 = eng.reads(), eng.io_total()
        got = exp = None
        try:
            if code == "I":
                oracle.insert(op[1])
                eng.insert(op[1])
            elif code == "D":
                oracle.delete(op[1])
                eng.delete(op[1])
            elif code == "P":
                got, exp = eng.predecessor(op[1]), oracle.predecessor(op[1])
                if check_member and got == exp:
                    got, exp = (got, eng.member(op[1])), (exp, oracle.member(op[1]))
            elif code == "R":
                got, exp = eng.range_report(op[1], op[2]), oracle.range_report(op[1], op[2])
                rec.sizes.append(len(exp))
            else:
                raise UsageError(f"op {i}: unknown code {code!r}")
        except ContractError as exc:
            raise UsageError(f"op {i} ({format_op(op)}): {exc}") from None
        dr = eng.reads() - r0
        rec.ops.append(code)
        rec.reads.append(dr)
        rec.writes.append(eng.io_total() - t0 - dr)
        if got != exp:
            rec.mismatches.append((i, format_op(op), got, exp))
            if stop_on_error:
                break
        if audit_every > 0 and (i + 1) % audit_every == 0:
            rec.snapshots[i] = eng.stats()
            bad = eng.audit(oracle)
            if bad:
                rec.violations.extend((i, v) for v in bad)
                if stop_on_error:
                    break
        if on_record is not None:
            on_record(i, code, rec.reads[-1], rec.writes[-1])
    if audit_every > 0 and not rec.violations and not rec.mismatches:
        rec.violations.extend((len(rec.ops) - 1, v) for v in eng.audit(oracle, final=True))
    rec.digest = content_digest(eng.contents())
    rec.oracle_digest = content_digest(oracle.contents())
    if rec.digest != rec.oracle_digest and not rec.mismatches:
        rec.mismatches.append((len(rec.ops) - 1, "final contents", rec.digest, rec.oracle_digest))
    rec.summary = eng.summary()
    if backing is not None:
        eng.pager.flush()
    return rec


# -- reporting ------------------------------------------------------------------

def quantile(sorted_vals, q):
    """Nearest-rank quantile of an ascending list."""
    if not sorted_vals:
        return 0
    i = max(0, math.ceil(q * len(sorted_vals)) - 1)
    return sorted_vals[i]


def per_op_csv(rec: Replay) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    cum = hw = 0
    for i, code in enumerate(rec.ops):
        d = rec.reads[i] + rec.writes[i]
        cum += d
        hw = max(hw, d)
        snap = rec.snapshots.get(i, (None, None, None))
        w.writerow([i, code, rec.reads[i], rec.writes[i], cum, hw,
                    *("" if s is None else s for s in snap)])
    return buf.getvalue()


def aggregate(rec: Replay) -> list[dict]:
    """Per op-class rows: count, mean, max, p99.9 and total I/O, plus the
    fitted query constant ``c_q`` where it applies."""
    groups = {"update": ("I", "D"), "insert": ("I",), "delete": ("D",),
              "predecessor": ("P",), "range": ("R",), "all": ("I", "D", "P", "R")}
    costs = [r + w for r, w in zip(rec.reads, rec.writes)]
    rows = []
    for name, codes in groups.items():
        vals = [c for c, op in zip(costs, rec.ops) if op in codes]
        row = {"class": name, "count": len(vals), "mean": sum(vals) / len(vals) if vals else 0.0,
               "max": max(vals, default=0), "p99.9": quantile(sorted(vals), 0.999),
               "total": sum(vals), "c_q": ""}
        if name == "predecessor" and vals:
            row["c_q"] = max(vals) / rec.logBN
        if name == "range" and vals:
            row["c_q"] = fit_c_q(vals, rec.sizes, rec.logBN, rec.B)
        rows.append(row)
    return rows


def fit_c_q(costs, sizes, logBN, B):
    """Smallest ``c`` with ``cost <= c * (logBN + k / B)`` on every range query."""
    return max((c / (logBN + k / B) for c, k in zip(costs, sizes)), default=0.0)


def table(rows) -> str:
    cols = ["class", "count", "mean", "max", "p99.9", "total", "c_q"]

    def fmt(v):
        return f"{v:.3f}" if isinstance(v, float) else str(v)

    cells = [cols] + [[fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(cols))]
    lines = ["  ".join(v.rjust(wd) for v, wd in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines)


def report(rec: Replay):
    """``(per-op CSV text, aggregate table text)``."""
    return per_op_csv(rec), table(aggregate(rec))


def smallest_constants(summary, params) -> dict:
    """Smallest ``c_h`` that covers the measured height-type loops, and the
    measured flush-loop counts against their bound."""
    lm = summary.get("loop_max") or {}
    if not lm:
        return {}
    h = max(lm[k] for k in ("l3", "l5", "l11", "l19", "l16", "l24"))
    return {"c_h_needed": max(1, -(-h // params.logBN)),
            "flush_loops": max(lm["l9"], lm["l18"]), "flush_bound": params.drain_loop_cap}


def fit_c_i(ops, B, epsilon, n_cap, candidates=(1, 2, 4, 8, 16, 32), cache_blocks=None):
    """Smallest ``c_i`` for which replaying ``ops`` shows no violation."""
    for c in candidates:
        p = derive_params(B, epsilon, n_cap, c_i=c)
        rec = replay(ops, "deamo", p, cache_blocks=cache_blocks,
                     audit_every=max(1, len(ops) // 50), check_member=False)
        if rec.exit_code == EXIT_OK:
            return c
    return None


def measure_query_costs(N, B=256, epsilon=0.5, *, updates=20_000, queries=2_000,
                        ranges=300, seed=0, spacing=64):
    """Worst predecessor I/O and fitted range constant on a tree of ``N`` keys.

    The tree is bulk loaded with ``N`` evenly spaced keys, then takes
    ``updates`` random insertions (so buffers are populated) before the
    probes.  ``pred_max`` is measured with whatever the cache holds,
    ``pred_max_cold`` right after the cache is emptied.  Range widths are
    mixed so outputs span from empty to many blocks.
    """
    from array import array
    params = derive_params(B, epsilon, N)
    d = DeamortizedTree(params=params, keys=array("Q", range(0, N * spacing, spacing)))
    rng = random.Random(seed)
    space = N * spacing
    for _ in range(updates):
        k = rng.randrange(space)
        if k % spacing:
            d.insert(k)
    pager = d.pager
    pred = 0
    for _ in range(queries):
        before = pager.total
        d.predecessor(rng.randrange(space))
        pred = max(pred, pager.total - before)
    costs, sizes = [], []
    widths = (0, 16 * spacing, 1024 * spacing, 16 * B * spacing)
    for _ in range(ranges):
        a = rng.randrange(space)
        before = pager.total
        out = d.range_report(a, a + rng.choice(widths))
        costs.append(pager.total - before)
        sizes.append(len(out))
    cold = 0
    for _ in range(queries // 10):
        pager.drop_cache()
        before = pager.total
        d.predecessor(rng.randrange(space))
        cold = max(cold, pager.total - before)
    return {"N": N, "logBN": params.logBN, "height": d.tree.height,
            "pred_max": pred, "pred_max_cold": cold,
            "range_c_q": fit_c_q(costs, sizes, params.logBN, B),
            "range_max": max(costs)}


def plot(rec: Replay, outdir, title=""):
    """Per-op I/O and cumulative I/O figures (PNG) in ``outdir``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(outdir, exist_ok=True)
    costs = [r + w for r, w in zip(rec.reads, rec.writes)]
    upd = [(i, c) for i, (c, op) in enumerate(zip(costs, rec.ops)) if op in "ID"]
    paths = []
    fig, ax = plt.subplots(figsize=(8, 3.5))
    if upd:
        xs, ys = zip(*upd)
        ax.plot(xs, ys, ".", ms=2)
    ax.set_xlabel("op index")
    ax.set_ylabel("block transfers")
    ax.set_title(f"{rec.engine}: I/O per update {title}".strip())
    fig.tight_layout()
    paths.append(os.path.join(outdir, f"{rec.engine}_update_io.png"))
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(8, 3.5))
    cum, s = [], 0
    for c in costs:
        s += c
        cum.append(s)
    ax.plot(range(len(cum)), cum)
    ax.set_xlabel("op index")
    ax.set_ylabel("cumulative block transfers")
    ax.set_title(f"{rec.engine}: cumulative I/O {title}".strip())
    fig.tight_layout()
    paths.append(os.path.join(outdir, f"{rec.engine}_cumulative_io.png"))
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)
    return paths


# -- CLI ------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="dbetree-harness",
                 description="Replay a workload on the deamortized tree, the amortized "
                             "baseline or the oracle and report block-transfer counts.")
    ap.add_argument("--engine", choices=("deamo", "baseline", "oracle"), default="deamo")
    ap.add_argument("--B", type=int, default=256, help="block size in updates")
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--n-cap", type=int, default=1 << 20, help="initial capacity bound N")
    ap.add_argument("--c-i", type=int, default=4, help="maintenance pacing constant")
    ap.add_argument("--c-h", type=int, default=8, help="height constant")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--workload", help="workload file (I/D/P/R lines)")
    src.add_argument("--gen", choices=KINDS, help="generate a workload instead")
    ap.add_argument("--n", type=int, default=10_000, help="ops to generate")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--save-workload", help="write the generated workload here")
    ap.add_argument("--audit-every", type=int, default=0, metavar="K",
                    help="audit invariants every K ops (0: never)")
    ap.add_argument("--csv", help="per-op metrics CSV path")
    ap.add_argument("--cache-blocks", type=int, help="cache size in blocks")
    ap.add_argument("--file-backed", metavar="PATH", help="also write pages to this file")
    ap.add_argument("--plot-dir", help="write PNG figures here")
    ap.add_argument("--fit-c-i", action="store_true",
                    help="also report the smallest c_i this workload needs")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = derive_params(args.B, args.epsilon, args.n_cap, c_i=args.c_i, c_h=args.c_h)
        if args.workload:
            ops = read_workload(args.workload)
        else:
            ops = gen_workload(args.gen, args.n, args.seed)
        if args.save_workload:
            write_workload(ops, args.save_workload)
        if args.cache_blocks is not None and args.cache_blocks < 2:
            raise UsageError("--cache-blocks must be at least 2")
        backing = None
        if args.file_backed:
            if args.engine != "deamo":
                raise UsageError("--file-backed needs --engine deamo")
            from .pagefile import FileBacking
            backing = FileBacking(args.file_backed, params.B)
        rec = replay(ops, args.engine, params, cache_blocks=args.cache_blocks,
                     audit_every=args.audit_every, backing=backing)
    except (UsageError, ParamError, OSError) as exc:
        print(f"dbetree-harness: {exc}", file=sys.stderr)
        return EXIT_USAGE

    csv_text, tab = report(rec)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as f:
            f.write(csv_text)
    print(f"engine {rec.engine}  ops {len(rec.ops)}  B {params.B}  eps {params.epsilon}  "
          f"N_cap {params.N_cap}  logBN {params.logBN}")
    print(tab)
    s = rec.summary
    if "meter" in s:
        m = s["meter"]
        print(f"k_io (max I/O per update) {m['max']}  normal {m['max_normal']}  "
              f"rebuilding {m['max_rebuild']}  over budget {m['over_budget']}")
        print("loop max  " + "  ".join(f"{k}={v}" for k, v in s["loop_max"].items()))
        print(f"arrivals per l5 iteration max {s['arrival_max']} (cap {params.buffer_cap}); "
              f"root buffer high water {s['root_high_water']}; censuses {s['censuses']}")
        print("constants " + "  ".join(f"{k}={v}" for k, v in
                                       smallest_constants(s, params).items()))
        for h in s["rebuilds"]:
            print("rebuild " + "  ".join(f"{k}={v}" for k, v in h.items()))
    if s.get("events"):
        print("events " + "  ".join(f"{k}={v}" for k, v in sorted(s["events"].items())))
    if args.fit_c_i and args.engine == "deamo":
        print(f"smallest sufficient c_i: {fit_c_i(ops, args.B, args.epsilon, args.n_cap)}")
    if backing is not None:
        from .pagefile import load_tree
        backing.close()
        tree, _ = load_tree(args.file_backed)
        same = content_digest(tree.contents()) == rec.oracle_digest
        print(f"page file {args.file_backed}: {backing.pages_written} page writes, "
              f"reload {'matches' if same else 'DIFFERS'}")
        if not same:
            rec.mismatches.append((len(rec.ops), "page file reload", "", ""))
    if args.plot_dir:
        for path in plot(rec, args.plot_dir, f"(B={params.B})"):
            print(f"figure {path}")
    print(f"digest {rec.digest}  oracle {rec.oracle_digest}")
    for i, v in rec.violations[:20]:
        print(f"VIOLATION after op {i}: {v}", file=sys.stderr)
    for i, what, got, exp in rec.mismatches[:20]:
        print(f"MISMATCH at op {i} ({what}): got {got!r}, expected {exp!r}", file=sys.stderr)
    return rec.exit_code


if __name__ == "__main__":
    sys.exit(main())
