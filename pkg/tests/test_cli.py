import json
from fractions import Fraction

import pytest

from conftest import E1_VALUES
from fairdiv import cli
from fairdiv.core import Instance, format_value
from fairdiv.divider import AuditFailure
from fairdiv.io import (
    ParseError,
    dumps,
    instance_to_dict,
    load_allocation,
    load_instance,
    parse_instance,
    parse_value,
)


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


def inst_doc(rows, **extra):
    doc = {"schema_version": 1, "agents": len(rows), "items": len(rows[0]), "valuations": rows}
    doc.update(extra)
    return doc


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def e1_file(tmp_path):
    return write(tmp_path, "e1.json", inst_doc([E1_VALUES] * 3, label="E1"))


# --- io


def test_parse_values():
    assert parse_value(3) == 3
    assert parse_value("1.25") == Fraction(5, 4)
    assert parse_value("7/4") == Fraction(7, 4)
    for bad in (1.5, True, None, "x"):
        with pytest.raises(ParseError):
            parse_value(bad)


def test_instance_round_trip(tmp_path):
    inst = Instance([[1, "1/2"], ["0.25", 4]], label="demo")
    doc = instance_to_dict(inst, ["ann", "bob"], ["a", "b"])
    assert doc["valuations"] == [[1, "1/2"], ["1/4", 4]]
    back = parse_instance(json.loads(dumps(doc)))
    assert back.instance == inst
    assert back.agent_names == ("ann", "bob") and back.item_names == ("a", "b")


@pytest.mark.parametrize(
    "doc",
    [
        [1, 2],
        {"schema_version": 2, "agents": 1, "items": 1, "valuations": [[1]]},
        {"schema_version": 1, "agents": 2, "items": 1, "valuations": [[1]]},
        {"schema_version": 1, "agents": 2, "items": 2, "valuations": [[1, 2], [3]]},
        {"schema_version": 1, "agents": 1, "items": 1, "valuations": [[-1]]},
        {"schema_version": 1, "agents": 1, "items": 1, "valuations": [[0.5]]},
        {"schema_version": 1, "agents": 1, "items": 1, "valuations": [[1]], "labels": {"items": []}},
    ],
)
def test_bad_instance_files(doc):
    with pytest.raises(ParseError):
        parse_instance(doc)


def test_bad_files_on_disk(tmp_path):
    with pytest.raises(ParseError):
        load_instance(tmp_path / "missing.json")
    with pytest.raises(ParseError):
        load_instance(write(tmp_path, "x.json", "{not json"))
    inst = Instance([[1, 1], [1, 1]])
    for bundles in ([[0]], [[0], [0]], [[0], [5]], [[0], ["1"]]):
        path = write(tmp_path, "a.json", {"schema_version": 1, "bundles": bundles})
        with pytest.raises(ParseError):
            load_allocation(path, inst)


# --- analyze


def test_analyze_e1_perturbed(capsys, e1_file):
    code, out, _ = run(capsys, "analyze", e1_file, "--perturb", "--json")
    assert code == 0
    rep = json.loads(out)
    th = Fraction(rep["agents"][0]["theta"])
    assert th > 303 and rep["perturbed"]
    code, table, _ = run(capsys, "analyze", e1_file, "--perturb")
    # the human table shows the same exact strings
    for row in rep["agents"]:
        for key in ("mms", "mxs", "theta", "rmms"):
            assert row[key] in table


def test_analyze_degenerate_needs_perturb(capsys, e1_file):
    code, out, _ = run(capsys, "analyze", e1_file)
    assert code == 0 and "requires --perturb" in out
    rep = json.loads(run(capsys, "analyze", e1_file, "--json")[1])
    assert rep["agents"][0]["theta"] is None


def test_analyze_single_agent(capsys, tmp_path):
    path = write(tmp_path, "one.json", inst_doc([[2, 3, 4]]))
    rep = json.loads(run(capsys, "analyze", path, "--perturb", "--json")[1])
    row = rep["agents"][0]
    assert row["mms"] == row["mxs"] == row["theta"] == row["rmms"]


def test_analyze_too_large(capsys, tmp_path):
    path = write(tmp_path, "big.json", inst_doc([[1] * 13] * 2))
    code, _, err = run(capsys, "analyze", path)
    assert code == 3 and "m <=" in err


def test_parse_error_exit_code(capsys, tmp_path):
    path = write(tmp_path, "bad.json", inst_doc([[1.5]]))
    assert run(capsys, "analyze", path)[0] == 2


def test_timing_is_opt_in(capsys, e1_file):
    rep = json.loads(run(capsys, "analyze", e1_file, "--json")[1])
    assert "timing_seconds" not in rep
    rep = json.loads(run(capsys, "analyze", e1_file, "--json", "--timing")[1])
    assert rep["timing_seconds"] >= 0


# --- check


def test_check_e1_allocation(capsys, tmp_path, e1_file):
    alloc = write(tmp_path, "x.json", {"schema_version": 1, "bundles": [[0, 1], [2, 3, 4], [5, 6, 7, 8, 9]]})
    code, out, _ = run(capsys, "check", e1_file, alloc, "--json")
    rep = json.loads(out)
    assert code == 0
    assert rep["agents"][0]["eefx_feasible"] and rep["agents"][0]["value"] == "300"
    assert not rep["agents"][1]["eefx_feasible"]
    assert rep["verdicts"]["eefx"] is False
    table = run(capsys, "check", e1_file, alloc)[1]
    assert "EEFX: FAIL" in table and "{g1,g2}" in table


def test_check_symmetric_one_each(capsys, tmp_path):
    inst = write(tmp_path, "s.json", inst_doc([[1, 1], [1, 1]]))
    alloc = write(tmp_path, "a.json", {"schema_version": 1, "bundles": [[0], [1]]})
    rep = json.loads(run(capsys, "check", inst, alloc, "--json")[1])
    assert all(rep["verdicts"].values())


def test_check_everything_to_one_agent(capsys, tmp_path):
    inst = write(tmp_path, "s.json", inst_doc([[1, 2, 3], [2, 2, 2], [3, 1, 1]]))
    alloc = write(tmp_path, "a.json", {"schema_version": 1, "bundles": [[0, 1, 2], [], []]})
    rep = json.loads(run(capsys, "check", inst, alloc, "--json")[1])
    assert [a["eefx_feasible"] for a in rep["agents"]] == [True, False, False]


def test_check_shape_mismatch(capsys, tmp_path, e1_file):
    alloc = write(tmp_path, "a.json", {"schema_version": 1, "bundles": [[0], [1]]})
    assert run(capsys, "check", e1_file, alloc)[0] == 2


# --- solve


def test_solve_writes_allocation(capsys, tmp_path, e1_file):
    out_path = tmp_path / "alloc.json"
    code, out, _ = run(capsys, "solve", e1_file, "--out", str(out_path), "--json")
    assert code == 0
    rep = json.loads(out)
    assert rep["verdicts"]["efl"] and rep["verdicts"]["eefx"] and rep["solver"]["perturbed"]
    saved = json.loads(out_path.read_text())
    assert saved["bundles"] == [a["bundle"] for a in rep["agents"]]
    assert run(capsys, "check", e1_file, str(out_path))[0] == 0


def test_solve_oracle_route(capsys, tmp_path):
    path = write(tmp_path, "s.json", inst_doc([[3, 1, 2, 5], [1, 4, 4, 1], [2, 2, 2, 2]]))
    code, out, _ = run(capsys, "solve", path, "--oracle", "--json")
    assert code == 0 and json.loads(out)["solver"]["method"] == "oracle"
    assert run(capsys, "solve", path, "--oracle", "--budget", "10")[0] == 3


def test_solve_audit_failure(capsys, tmp_path, e1_file, monkeypatch):
    def broken(*a, **k):
        raise AuditFailure("audit failed", {"why": "test"})

    monkeypatch.setattr(cli, "solve_efl_eefx", broken)
    dump = tmp_path / "dump.json"
    code, _, err = run(capsys, "solve", e1_file, "--dump", str(dump))
    assert code == 4 and str(dump) in err
    assert json.loads(dump.read_text()) == {"why": "test"}


# --- gen and verify


def test_gen_is_reproducible(capsys, tmp_path):
    a = run(capsys, "gen", "--seed", "42", "--n", "3", "--m", "8")[1]
    b = run(capsys, "gen", "--seed", "42", "--n", "3", "--m", "8")[1]
    assert a == b
    doc = json.loads(a)
    assert parse_instance(doc).instance.m == 8


def test_gen_non_degenerate(capsys, tmp_path):
    from fairdiv.core import is_non_degenerate

    out = tmp_path / "g.json"
    run(capsys, "gen", "--seed", "1", "--non-degenerate", "--out", str(out))
    inst = load_instance(out).instance
    assert all(is_non_degenerate(inst, a) for a in range(inst.n))


def test_verify_file_and_suite(capsys, e1_file, tmp_path):
    code, out, _ = run(capsys, "verify", e1_file, "--json")
    rep = json.loads(out)
    assert code == 0 and rep["passed"] == 1 and rep["instances"][0]["chain_ok"]
    code, out, _ = run(capsys, "verify", "--count", "3", "--seed", "2")
    assert code == 0 and "3/3 pass" in out


def test_verify_single_agent(capsys, tmp_path):
    path = write(tmp_path, "one.json", inst_doc([[1, 2]]))
    assert run(capsys, "verify", path)[0] == 0


def test_verify_failure_exit(capsys, tmp_path, monkeypatch, e1_file):
    from fairdiv import oracle

    real = oracle.verify_instance

    def failing(inst, oracle_budget=10**5):
        rep = real(inst, oracle_budget)
        rep.solved, rep.solver_error = False, "forced"
        return rep

    monkeypatch.setattr(cli, "verify_instance", failing)
    witness = tmp_path / "w.json"
    code, _, err = run(capsys, "verify", e1_file, "--witness", str(witness))
    assert code == 5
    assert json.loads(witness.read_text())["failures"][0]["solver_error"] == "forced"


def test_report_round_trip(capsys, e1_file):
    out = run(capsys, "analyze", e1_file, "--perturb", "--json")[1]
    rep = json.loads(out)
    assert dumps(rep) == out
    for row in rep["agents"]:
        for key in ("mms", "mxs", "theta", "rmms"):
            assert format_value(Fraction(row[key])) == row[key]
