import csv

import pytest

from finsec.cli import (
    EXIT_INCONSISTENT,
    EXIT_INPUT,
    EXIT_OK,
    RunSpec,
    corpus_names,
    load_corpus,
    main,
    parse_spec,
    render,
    run,
)
from finsec.errors import MissingSOChoice, ParseError, UnknownSymbolFunction

FLAGSHIP = 'operator: FS(conv("2+atan(xi)"))\n'
SO_TEXT = """name: so
# comment line
symbol: a = 2+0.5*sin(ln(1+ln(1+abs(x))))
operator: FS(mult(a) * conv("2+atan(xi)"))
"""


# --- parsing -----------------------------------------------------------------

def test_parse_defaults():
    spec = parse_spec(FLAGSHIP)
    assert spec == RunSpec(operator='FS(conv("2+atan(xi)"))')
    assert (spec.command, spec.n_list, spec.m, spec.tau, spec.pad_factor) == ("predict", (8, 16, 32, 48), 8, 1e-4, 2.5)
    assert spec.window_max == 48


def test_parse_so_choice_pass_through():
    spec = parse_spec(SO_TEXT + "so_choice: a = 2.0\n")
    assert spec.so_choices == (("a", 2.0),)
    assert spec.config().so_choices == {"a": 2.0}


def test_missing_so_choice_reports_position():
    with pytest.raises(MissingSOChoice) as exc:
        parse_spec(SO_TEXT)
    assert exc.value.line == 3 and exc.value.column >= 1


@pytest.mark.parametrize("text, line", [
    (FLAGSHIP + "colour: red\n", 2),
    (FLAGSHIP + "tau: 1e-3\ntau: 1e-4\n", 3),
    (FLAGSHIP + "tau: fast\n", 2),
    (FLAGSHIP + "n_list: 8, 16\n", 2),
    (FLAGSHIP + "n_list: 8, 32, 16\n", 2),
    (FLAGSHIP + "pad_factor: 1.5\n", 2),
    (FLAGSHIP + "command: guess\n", 2),
    ("tau: 1e-3\n" + 'operator: FS(conv("2+atan(xi)")\n', 2),
])
def test_parse_errors_carry_lines(text, line):
    with pytest.raises(ParseError) as exc:
        parse_spec(text)
    assert exc.value.line == line


def test_parse_missing_operator_and_unknown_function():
    with pytest.raises(ParseError):
        parse_spec("tau: 1e-3\n")
    with pytest.raises(UnknownSymbolFunction):
        parse_spec('operator: FS(mult("foo(x)"))\n')


def test_overrides():
    spec = parse_spec(SO_TEXT + "so_choice: a = 2.0\n", ["so_choice=a=2.5", "tau=1e-6", "command=verify"])
    assert spec.so_choices == (("a", 2.5),)
    assert spec.tau == 1e-6 and spec.command == "verify"
    with pytest.raises(ParseError) as exc:
        parse_spec(FLAGSHIP, ["colour=red"])
    assert exc.value.line == 0


@pytest.mark.parametrize("name", corpus_names())
def test_render_round_trip(name):
    spec = load_corpus(name)
    assert parse_spec(render(spec)) == spec


def test_corpus_is_complete():
    assert set(corpus_names()) == {
        "flagship", "cayley", "mixed_pc", "shifted_jump", "lift", "hankel",
        "slow_oscillation", "mixed_unstable", "cauchy_paired",
    }


# --- running -----------------------------------------------------------------

def test_predict_cayley(tmp_path):
    res = run(parse_spec(render(load_corpus("cayley"))), str(tmp_path))
    assert res.code == EXIT_OK
    assert "verdict = unstable" in res.text
    assert (tmp_path / "report.csv").exists() and (tmp_path / "predict.txt").exists()


def test_verify_flagship(tmp_path):
    res = run(parse_spec(FLAGSHIP + "command: verify\nn_list: 4, 8, 16\n"), str(tmp_path))
    assert res.code == EXIT_OK and "consistent" in res.text
    assert (tmp_path / "trajectory.svg").exists()


def test_solve_flagship(tmp_path):
    spec = parse_spec(FLAGSHIP + "command: solve\nsolution: exp(-(x/4)^2)\nn_list: 4, 8, 16\n")
    res = run(spec, str(tmp_path))
    assert res.code == EXIT_OK and "error decreasing" in res.text


def test_splitting_lift(tmp_path):
    res = run(load_corpus("lift"), str(tmp_path))
    assert res.code == EXIT_OK and "verdict = pass" in res.text


def test_cauchy_probe(tmp_path):
    spec = parse_spec('operator: S\ncommand: probe\nprobe: cauchy\nparams: 1:10, 2:20\nn_max: 32\nn_list: 8, 16, 32\n')
    res = run(spec, str(tmp_path))
    assert res.code == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "cauchy.csv")))
    assert rows[0] == ["m", "n", "measured", "bound", "pass"] and len(rows) == 3


def test_inconsistent_exit_code(tmp_path):
    # an absurd floor makes the Cayley decay look too slow
    spec = parse_spec(render(load_corpus("cayley")), ["command=verify", "floor_tol=1e-300", "n_list=4,8,16"])
    assert run(spec, str(tmp_path)).code == EXIT_INCONSISTENT


def test_main_exit_codes(tmp_path, capsys):
    f = tmp_path / "flag.spec"
    f.write_text(FLAGSHIP + "n_list: 4, 8, 16\n")
    assert main(["predict", str(f), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "verdict = stable" in capsys.readouterr().out
    bad = tmp_path / "bad.spec"
    bad.write_text(FLAGSHIP + "colour: red\n")
    assert main(["predict", str(bad)]) == EXIT_INPUT
    assert main(["predict", str(tmp_path / "missing.spec")]) == EXIT_INPUT
    assert main(["describe", "corpus:flagship", "--out", str(tmp_path / "d")]) == EXIT_OK
    assert main(["predict", "corpus:flagship", "--out", str(tmp_path / "c"), "--override", "m=4096"]) == EXIT_INPUT


def test_csv_is_deterministic(tmp_path):
    spec = parse_spec(render(load_corpus("lift")))
    a, b = tmp_path / "a", tmp_path / "b"
    run(spec, str(a))
    run(spec, str(b))
    for name in ("splitting.csv", "splitting.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
