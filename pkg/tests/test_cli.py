import csv
import io
import json

import pytest

from nccartier.algebras import AxiomError
from nccartier.cli import (
    InputError,
    RunConfig,
    SpecError,
    exit_code,
    load_source,
    main,
    parse_algebra_spec,
    render,
    run_suite,
)
from nccartier.derham import PresentedAlgebra

DUAL_SPEC = """\
[meta]
p = 3
dim = 2
labels = 1, x
name = dual
[unit]
1 0
[product]
0 0 -> 0
0 1 -> 1
1 0 -> 1
"""


def write(tmp_path, text, name="alg.txt"):
    f = tmp_path / name
    f.write_text(text)
    return str(f)


def run_json(argv, capsys):
    code = main(argv + ["--format", "json"])
    return code, json.loads(capsys.readouterr().out)


# [TRIVIAL]
def test_builtins():
    assert load_source("group:Z/2", 3).algebra.name == "F_3[Z/2]"
    assert load_source("trunc:2", 3).algebra.name == "F_3[x]/x^2"
    assert load_source("matrix:2", 3).algebra.dim == 4
    with pytest.raises(InputError):
        load_source("group:Q8", 3)


# [DERIVED] a hand-written table for the dual numbers equals the builtin
def test_spec_file_product(tmp_path):
    A = parse_algebra_spec(write(tmp_path, DUAL_SPEC))
    B = load_source("trunc:2", 3).algebra
    assert (A.st == B.st).all() and A.labels == ("1", "x")


# [TRIVIAL] parse errors carry line and column
def test_spec_parse_error_position(tmp_path):
    bad = DUAL_SPEC.replace("1 0 -> 1", "1 0 -> 7")
    with pytest.raises(SpecError) as e:
        parse_algebra_spec(write(tmp_path, bad))
    assert e.value.line == 11 and e.value.col == 8
    with pytest.raises(SpecError) as e:
        parse_algebra_spec(write(tmp_path, "[meta]\np = 3\n  [bogus]\n"))
    assert (e.value.line, e.value.col) == (3, 3)


# [TRIVIAL] error case: a non-associative table is rejected and the triple is named
def test_spec_non_associative(tmp_path, capsys):
    text = """\
[meta]
p = 3
dim = 3
labels = 1, a, b
[product]
0 0 -> 0
0 1 -> 1
0 2 -> 2
1 0 -> 1
2 0 -> 2
1 2 -> 1
2 1 -> 2
"""
    path = write(tmp_path, text)
    with pytest.raises(AxiomError) as e:
        parse_algebra_spec(path)
    assert e.value.triple is not None and len(e.value.triple) == 3
    assert main(["compute", "-a", path]) == 3
    assert "associativity" in capsys.readouterr().err


# [TRIVIAL] monoid and presentation sections
def test_spec_monoid_and_presentation(tmp_path):
    mono = parse_algebra_spec(write(tmp_path, "[monoid]\nidentity = 0\n0 1\n1 0\n", "m.txt"))
    assert mono.size == 2 and mono.is_commutative()
    pres = parse_algebra_spec(write(tmp_path, "[meta]\np = 3\n[presentation]\nvariables = t\nrelations = t^2 - 1\n",
                                    "p.txt"))
    assert isinstance(pres, PresentedAlgebra) and pres.dim == 2
    with pytest.raises(SpecError):
        parse_algebra_spec(write(tmp_path, "[meta]\np = 3\n[presentation]\nvariables = x, y\nrelations = x*y, y^2\n",
                                 "q.txt"))


# [TRIVIAL] p = 2 is refused for the Cartier suites
def test_p2_rejected(capsys):
    assert main(["verify", "-p", "2", "-a", "trunc:2", "--suites", "cartier"]) == 3
    assert "odd primes" in capsys.readouterr().err
    assert main(["compute", "-p", "2", "-a", "trunc:2"]) == 0


# [DERIVED] HH of k[x]/x^2 in characteristic 3 as csv rows (degree, dim)
def test_hh_dims_csv(capsys):
    assert main(["compute", "-a", "trunc:2", "--dmax", "3", "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["suite", "degree", "quantity", "value"]
    hh = [(int(r[1]), int(r[3])) for r in rows[1:] if r[2] == "HH"]
    assert hh == [(0, 2), (1, 1), (2, 1), (3, 1)]


# [TRIVIAL] empty suite list: only the config echo
def test_empty_suites(capsys):
    code, rep = run_json(["verify", "--suites", ""], capsys)
    assert code == 0 and rep["results"] == [] and rep["config"]["suites"] == []


def strip_run(text):
    rep = json.loads(text)
    rep.pop("run")
    return json.dumps(rep, sort_keys=True, indent=2)


# [TRIVIAL] determinism: two identical runs agree byte for byte outside the run field
def test_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["verify", "-a", "trunc:2", "--suites", "relations,monoid-phi,hh-dims", "--format", "json",
                     "--out", str(out)]) == 0
        outs.append(strip_run(out.read_text()))
    assert outs[0] == outs[1]


# [TRIVIAL] cache hits reproduce the cold run; corrupt entries are recomputed
def test_cache(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    cfg = lambda: RunConfig(3, "trunc:2", 1, ["kp", "hh-dims"], cache_dir=str(cache))  # noqa: E731
    cold = run_suite(cfg())
    warm = run_suite(cfg())
    assert cold["run"]["cache_hits"] == 0 and warm["run"]["cache_hits"] == 2
    assert cold["results"] == warm["results"]
    for f in cache.iterdir():
        f.write_bytes(b"garbage")
    again = run_suite(cfg())
    assert again["run"]["cache_hits"] == 0 and again["results"] == cold["results"]
    monkeypatch.setenv("NCCARTIER_CACHE_DIR", str(cache))
    assert run_suite(RunConfig(3, "trunc:2", 1, ["kp", "hh-dims"]))["run"]["cache_hits"] == 2


# [TRIVIAL] too few levels and oversized levels are inconclusive, never pass or fail
def test_inconclusive(capsys):
    code, rep = run_json(["verify", "-a", "trunc:2", "--dmax", "2", "--truncation", "1", "--suites", "cartier"],
                         capsys)
    assert code == 2 and rep["results"][0]["status"] == "inconclusive: raise N"
    code, rep = run_json(["verify", "-a", "matrix:2", "--suites", "cartier"], capsys)
    assert code == 2 and "size budget" in rep["results"][0]["status"]


# [TRIVIAL]
def test_exit_code_priority():
    rep = lambda *st: {"results": [{"status": s} for s in st]}  # noqa: E731
    assert exit_code(rep("pass", "n/a")) == 0
    assert exit_code(rep("pass", "inconclusive: raise N")) == 2
    assert exit_code(rep("inconclusive: raise N", "fail")) == 1


# [TRIVIAL] report re-renders a saved json; bad inputs exit 3
def test_report_subcommand(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["compute", "-a", "group:Z/2", "--format", "json", "--out", str(out)]) == 0
    assert main(["report", str(out), "--format", "text"]) == 0
    text = capsys.readouterr().out
    assert "hh-dims" in text and "HH=[2, 0]" in text
    out.write_text('{"schema": "other"}')
    assert main(["report", str(out)]) == 3
    assert main(["compute", "--out", str(tmp_path / "missing" / "x.json")]) == 3
    assert main(["compute", "-p", "4"]) == 3


# [TRIVIAL]
def test_render_unknown_format():
    with pytest.raises(InputError):
        render({"results": []}, "xml")


# [TRIVIAL] the size budget of a one-dimensional algebra is unbounded (and computing it terminates)
def test_field_budget():
    from nccartier.suites import feasible_level

    assert feasible_level(1, 3, 10) > 100
    assert feasible_level(2, 3, 2 ** 9) == 2
    assert main(["verify", "-a", "field", "--dmax", "1", "--suites", "kp,cartier,monoid-phi"]) == 0
