import csv
import io
import os

import pytest

from dbetree import harness
from dbetree.audit import Violation
from dbetree.harness import (CSV_FIELDS, Replay, UsageError, aggregate, gen_workload,
                             main, measure_query_costs, parse_op, per_op_csv,
                             read_workload, replay, write_workload)
from dbetree.params import derive_params

P256 = derive_params(256, 0.5, 1 << 20)
P16 = derive_params(16, 0.5, 1 << 16, c_i=8)


def test_generation_is_deterministic():
    for kind in harness.KINDS:
        assert gen_workload(kind, 10, seed=1) == gen_workload(kind, 10, seed=1)
    assert gen_workload("random", 50, 1) != gen_workload("random", 50, 2)


def test_sequential_strictly_increasing():
    ops = gen_workload("sequential", 100, 0)
    keys = [k for _, k in ops]
    assert all(op == "I" for op, _ in ops)
    assert keys == sorted(set(keys)) and keys[0] == 1


def test_bad_generator_args():
    with pytest.raises(UsageError):
        gen_workload("zipf", 10, 0)
    with pytest.raises(UsageError):
        gen_workload("random", 0, 0)


@pytest.mark.parametrize("kind", harness.KINDS)
def test_generated_updates_are_valid(kind):
    ops = gen_workload(kind, 20_000, seed=5)
    assert len(ops) == 20_000
    live = set()
    for op in ops:
        if op[0] == "I":
            assert op[1] not in live
            live.add(op[1])
        elif op[0] == "D":
            live.remove(op[1])
        elif op[0] == "R":
            assert op[1] <= op[2]


def test_adversarial_forces_merges():
    n = 100_000
    adv = replay(gen_workload("adversarial", n, 3), "deamo", P256)
    rnd = replay(gen_workload("random", n, 3), "deamo", P256)
    a = adv.summary["events"].get("leaf_merge", 0)
    r = rnd.summary["events"].get("leaf_merge", 0)
    print(f"leaf merges: adversarial {a}, random {r}")
    assert a > 0 and a >= 10 * r


def test_workload_file_round_trip(tmp_path):
    ops = gen_workload("random", 500, 9)
    path = tmp_path / "w.txt"
    write_workload(ops, path)
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0].split()[0] in "IDPR"
    assert read_workload(path) == ops


@pytest.mark.parametrize("line", ["X 5", "I", "I 1 2", "R 5", "I -3", "I abc",
                                  f"I {1 << 64}"])
def test_parse_errors(line):
    with pytest.raises(UsageError):
        parse_op(line, 1)


def test_parse_ok():
    assert parse_op("R 3 9") == ("R", 3, 9)
    assert parse_op(f"I {(1 << 64) - 1}") == ("I", (1 << 64) - 1)


def test_deamo_and_oracle_digests_agree():
    ops = gen_workload("random", 20_000, 8)
    d = replay(ops, "deamo", P256)
    o = replay(ops, "oracle", P256)
    assert d.exit_code == o.exit_code == 0
    assert d.digest == o.digest == d.oracle_digest


def test_audit_every_op():
    rec = replay(gen_workload("random", 10_000, 2), "deamo", P256, audit_every=1)
    assert rec.exit_code == 0 and not rec.violations
    assert rec.summary["censuses"] > 0


def test_baseline_replay_clean():
    rec = replay(gen_workload("adversarial", 20_000, 2), "baseline", P256, audit_every=500)
    assert rec.exit_code == 0


def test_empty_metrics_header_only():
    assert per_op_csv(Replay("deamo")) == ",".join(CSV_FIELDS) + "\n"


def test_three_record_fixture():
    rec = Replay("deamo", ops=["I", "P", "D"], reads=[0, 2, 1], writes=[1, 0, 3],
                 snapshots={1: (2, 5, 0)})
    assert per_op_csv(rec).splitlines() == [
        "op_index,op,reads,writes,cumulative_io,max_per_op,height,leaves,overfull",
        "0,I,0,1,1,1,,,",
        "1,P,2,0,3,2,2,5,0",
        "2,D,1,3,7,4,,,",
    ]
    rows = {r["class"]: r for r in aggregate(rec)}
    assert rows["update"]["count"] == 2 and rows["update"]["max"] == 4
    assert rows["update"]["mean"] == 2.5 and rows["all"]["total"] == 7


def test_csv_deltas_sum_to_totals():
    ops = gen_workload("random", 3000, 4)
    seen = []
    rec = replay(ops, "deamo", P16, on_record=lambda *r: seen.append(r))
    rows = list(csv.DictReader(io.StringIO(per_op_csv(rec))))
    assert len(rows) == len(ops) == len(seen)
    assert int(rows[-1]["cumulative_io"]) == sum(rec.reads) + sum(rec.writes)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_clean_run_writes_csv(tmp_path, capsys):
    path = tmp_path / "m.csv"
    code, out, _ = _run(["--gen", "random", "--n", "3000", "--B", "16", "--n-cap", "65536",
                         "--c-i", "8", "--audit-every", "100", "--csv", str(path)], capsys)
    assert code == 0
    assert "k_io" in out and "digest" in out
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS) and len(lines) == 3001


def test_cli_reproducible_csv(tmp_path, capsys):
    outs = []
    for name in ("a.csv", "b.csv"):
        p = tmp_path / name
        assert _run(["--gen", "adversarial", "--n", "4000", "--seed", "3",
                     "--csv", str(p)], capsys)[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_cli_argparse_error_exits_one(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--engine", "btree", "--gen", "random"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1


def test_cli_bad_inputs_exit_one(tmp_path, capsys):
    assert _run(["--workload", str(tmp_path / "missing.txt")], capsys)[0] == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("I 1\nQ 2\n")
    assert _run(["--workload", str(bad)], capsys)[0] == 1
    wrong = tmp_path / "wrong.txt"
    wrong.write_text("I 1\nD 2\n")            # deletes an absent key
    code, _, err = _run(["--workload", str(wrong)], capsys)
    assert code == 1 and "op 1" in err
    assert _run(["--gen", "random", "--B", "8"], capsys)[0] == 1


def test_cli_violation_exits_two(monkeypatch, capsys):
    monkeypatch.setattr(harness.DeamoEngine, "audit",
                        lambda self, oracle=None, final=False: [Violation("leaf_size", "forced")])
    code, _, err = _run(["--gen", "random", "--n", "200", "--audit-every", "50"], capsys)
    assert code == 2 and "VIOLATION" in err


def test_cli_mismatch_exits_three(monkeypatch, capsys):
    monkeypatch.setattr(harness.DeamoEngine, "predecessor", lambda self, k: 12345)
    code, _, err = _run(["--gen", "random", "--n", "500"], capsys)
    assert code == 3 and "MISMATCH" in err


def test_cli_file_backed_and_plots(tmp_path, capsys):
    pf = tmp_path / "tree.pages"
    figs = tmp_path / "figs"
    code, out, _ = _run(["--gen", "random", "--n", "5000", "--B", "16", "--n-cap", "65536",
                         "--c-i", "8", "--file-backed", str(pf), "--plot-dir", str(figs)], capsys)
    assert code == 0
    assert "reload matches" in out
    pngs = sorted(os.listdir(figs))
    assert pngs and all(name.endswith(".png") for name in pngs)


def test_cli_saves_workload(tmp_path, capsys):
    w = tmp_path / "w.txt"
    assert _run(["--gen", "sequential", "--n", "100", "--save-workload", str(w),
                 "--engine", "oracle"], capsys)[0] == 0
    assert read_workload(w) == gen_workload("sequential", 100, 0)


def test_two_scales_track_log_growth():
    small = measure_query_costs(1 << 12)
    big = measure_query_costs(1 << 20)
    print(small, big)
    allowed = 2 * big["logBN"] / small["logBN"]
    assert big["pred_max"] / small["pred_max"] <= allowed
    lo, hi = sorted((small["range_c_q"], big["range_c_q"]))
    assert hi <= 1.25 * lo
