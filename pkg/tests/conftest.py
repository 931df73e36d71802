import random

import pytest

from dbetree.oracle import Oracle


def random_updates(rng, n, key_bits=30, p_insert=0.65, live=None):
    """Valid insert/delete ops against a running key set."""
    live = [] if live is None else live
    present = set(live)
    ops = []
    while len(ops) < n:
        if live and rng.random() > p_insert:
            i = rng.randrange(len(live))
            k = live[i]
            live[i] = live[-1]
            live.pop()
            present.discard(k)
            ops.append(("D", k))
        else:
            k = rng.getrandbits(key_bits)
            if k in present:
                continue
            present.add(k)
            live.append(k)
            ops.append(("I", k))
    return ops


def apply(target, ops):
    for code, k in ops:
        (target.insert if code == "I" else target.delete)(k)


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture
def oracle():
    return Oracle()


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the run summary and return the flag."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
