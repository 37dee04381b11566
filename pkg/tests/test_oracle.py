import pytest
from hypothesis import given
from hypothesis import strategies as st

from vstream.oracle import OracleLog, oracle_live_check
from vstream.varray import build

from strategies import update_logs

A, B = 1, 2


@pytest.fixture
def log():
    lg = OracleLog()
    lg.append(A, b"a1")
    lg.append(B, b"b2")
    lg.append(A, b"a3")
    return lg


def test_query(log):
    assert log.query(2, A, B) == [(A, 1, b"a1"), (B, 2, b"b2")]


def test_root_is_empty(log):
    assert log.query(0, A, B) == []


def test_tombstone_hides_key(log):
    log.append(A, None)
    assert log.query(4, A, A) == []
    assert log.point(3, A) == (A, 3, b"a3")


def test_version_out_of_range(log):
    with pytest.raises(ValueError):
        log.query(4, A, B)
    with pytest.raises(ValueError):
        log.nv(-1)


def test_nv(log):
    assert [log.nv(v) for v in range(4)] == [0, 1, 2, 2]
    assert OracleLog().nv(0) == 0
    solo = OracleLog()
    solo.append(A, b"x")
    solo.append(A, None)
    assert solo.nv(2) == 0


def test_live_check():
    e1 = build([(A, 3, b""), (B, 2, b""), (A, 1, b"")], 1, 3)
    assert [oracle_live_check(e1, w) for w in (1, 2, 3)] == [1, 2, 2]
    assert oracle_live_check(build([], 1, 1), 1) == 0
    assert oracle_live_check(build([(A, 4, b"")], 4, 4), 4) == 1


def test_save_load(tmp_path, log):
    log.append(B, None)
    path = tmp_path / "log.txt"
    log.save(path)
    assert OracleLog.load(path).updates == log.updates


def test_load_rejects_unknown_op(tmp_path):
    path = tmp_path / "log.txt"
    path.write_text("put 1 00\nzap 2 -\n")
    with pytest.raises(ValueError, match="line 2"):
        OracleLog.load(path)


@given(update_logs(), update_logs())
def test_appending_never_changes_the_past(first, more):
    lg = OracleLog(list(first))
    before = [lg.query(v, 0, 100) for v in range(len(first) + 1)]
    for k, p in more:
        lg.append(k, p)
    assert [lg.query(v, 0, 100) for v in range(len(first) + 1)] == before
