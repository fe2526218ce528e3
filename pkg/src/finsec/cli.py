"""Batch front end: spec files in, tables, CSV and SVG plots out.

Usage::

    finsec <command> <spec-file> [--out DIR] [--override key=value ...]

Commands are ``describe``, ``predict``, ``verify``, ``splitting``, ``probe``
and ``solve``.  The spec-file format is documented in ``docs/specfile.md``.

Exit codes
----------
0
    Completed; for ``verify``, ``splitting``, ``solve`` and the Cauchy probe
    the empirical side agrees with the prediction.
2
    Completed, but prediction and measurement disagree.
3
    Completed with an inconclusive verdict or tag.
4
    Input error (bad spec, unknown key, missing accumulation choice, grid
    too large, ...).
"""

import argparse
import os
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import analysis
from .discretize import DEFAULT_PAD, make_grid
from .errors import FinsecError, MissingSOChoice, ParseError
from .operators import (
    Const,
    FiniteSection,
    OperatorExpr,
    active_directions,
    mu_of,
    parse_direction,
    simplify,
    snapshot,
    to_text,
)
from .opgrammar import parse_operator
from . import pframework
from .symbols import symbol

__all__ = [
    "RunSpec",
    "parse_spec",
    "render",
    "build",
    "run",
    "main",
    "load_corpus",
    "corpus_names",
    "EXIT_OK",
    "EXIT_INCONSISTENT",
    "EXIT_INCONCLUSIVE",
    "EXIT_INPUT",
]

EXIT_OK = 0
EXIT_INCONSISTENT = 2
EXIT_INCONCLUSIVE = 3
EXIT_INPUT = 4

COMMANDS = ("describe", "predict", "verify", "splitting", "probe", "solve")
PROBES = ("pcompact", "quasibanded", "commutator", "cauchy", "pstrong")

# key -> (field, converter); symbol and so_choice may repeat
_SCALAR_KEYS = {
    "name": str,
    "command": str,
    "operator": str,
    "n_max": int,
    "m": int,
    "pad_factor": float,
    "n_list": "ints",
    "tau": float,
    "split_tol": float,
    "floor_tol": float,
    "slack": float,
    "probe": str,
    "family": str,
    "direction": str,
    "params": "params",
    "k_max": int,
    "solution": str,
    "seed": int,
    "out": str,
}
_MULTI_KEYS = ("symbol", "so_choice")
_ORDER = (
    "name", "command", "operator", "symbol", "so_choice", "n_max", "m", "pad_factor",
    "n_list", "tau", "split_tol", "floor_tol", "slack", "probe", "family", "direction",
    "params", "k_max", "solution", "seed", "out",
)


@dataclass(frozen=True)
class RunSpec:
    """Validated contents of a spec file.

    ``symbols`` and ``so_choices`` are tuples of ``(name, text)`` and
    ``(name, value)`` pairs in file order.  ``params`` holds the probe
    parameter list (``m`` values, ``t`` values, radii, or ``(m, n)`` pairs for
    the Cauchy probe).
    """

    operator: str
    command: str = "predict"
    name: str = ""
    symbols: tuple = ()
    so_choices: tuple = ()
    n_max: int | None = None
    m: int = 8
    pad_factor: float = DEFAULT_PAD
    n_list: tuple = (8, 16, 32, 48)
    tau: float = 1e-4
    split_tol: float = 1e-6
    floor_tol: float = 1e-3
    slack: float = 0.1
    probe: str | None = None
    family: str | None = None
    direction: str | None = None
    params: tuple = ()
    k_max: int = 3
    solution: str | None = None
    seed: int = 0
    out: str | None = None

    @property
    def window_max(self):
        return self.n_max if self.n_max is not None else max(self.n_list)

    def so_dict(self):
        return dict(self.so_choices)

    def config(self):
        return analysis.AnalysisConfig(
            n_list=self.n_list, m=self.m, pad_factor=self.pad_factor, tau=self.tau,
            so_choices=self.so_dict(),
        )


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _num(text, line, col=1):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a real number, got {text!r}", line, col) from None


def _convert(key, conv, text, line, col):
    if conv == "ints":
        parts = [p for p in text.replace(",", " ").split()]
        if not parts:
            raise ParseError(f"{key} is empty", line, col)
        vals = []
        for p in parts:
            v = _num(p, line, col)
            if v != int(v):
                raise ParseError(f"{key} entries must be integers", line, col)
            vals.append(int(v))
        return tuple(vals)
    if conv == "params":
        out = []
        for p in [q for q in text.split(",") if q.strip()]:
            if ":" in p:
                a, b = p.split(":", 1)
                out.append((_num(a.strip(), line, col), _num(b.strip(), line, col)))
            else:
                out.append(_num(p.strip(), line, col))
        return tuple(out)
    if conv is int:
        v = _num(text, line, col)
        if v != int(v):
            raise ParseError(f"{key} must be an integer", line, col)
        return int(v)
    if conv is float:
        return float(_num(text, line, col))
    return text


def _named(text, line, col, key):
    if "=" not in text:
        raise ParseError(f"{key} needs the form 'name = value'", line, col)
    name, value = (s.strip() for s in text.split("=", 1))
    if not name.isidentifier():
        raise ParseError(f"bad {key} name {name!r}", line, col)
    return name, value


def _raw_entries(text):
    """Yield ``(key, value, line, column)`` for every non-comment line."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if ":" not in stripped:
            raise ParseError("expected 'key: value'", lineno, 1)
        key, value = raw.split(":", 1)
        col = len(raw) - len(raw.lstrip()) + 1
        yield key.strip(), value.strip(), lineno, col + len(key) + 1


def parse_spec(text, overrides=()):
    """Parse and validate spec-file text.

    Parameters
    ----------
    text : str
    overrides : sequence of str
        ``key=value`` strings applied after the file (a repeated-key override
        replaces the entry of the same name).

    Returns
    -------
    RunSpec

    Raises
    ------
    ParseError
        Unknown keys, malformed values or failed validation (with line and
        column; overrides report line 0).
    UnknownSymbolFunction
        A symbol or operator uses an unknown function.
    MissingSOChoice
        A slowly oscillating coefficient has no accumulation value.

    Examples
    --------
    >>> parse_spec('operator: FS(conv("2+atan(xi)"))').n_list
    (8, 16, 32, 48)
    """
    fields = {}
    multi = {k: [] for k in _MULTI_KEYS}
    where = {}

    def put(key, value, line, col):
        if key in _MULTI_KEYS:
            name, v = _named(value, line, col, key)
            lst = multi[key]
            lst[:] = [e for e in lst if e[0] != name] if line == 0 else lst
            if line and any(e[0] == name for e in lst):
                raise ParseError(f"{key} {name!r} declared twice", line, col)
            lst.append((name, v, line, col))
            return
        if key not in _SCALAR_KEYS:
            raise ParseError(f"unknown key {key!r}", line, 1)
        if line and key in fields:
            raise ParseError(f"duplicate key {key!r}", line, 1)
        fields[key] = _convert(key, _SCALAR_KEYS[key], value, line, col)
        where[key] = (line, col)

    for key, value, line, col in _raw_entries(text):
        put(key, value, line, col)
    for ov in overrides:
        if "=" not in ov:
            raise ParseError(f"override {ov!r} needs key=value", 0, 1)
        key, value = ov.split("=", 1)
        put(key.strip(), value.strip(), 0, 1)

    if "operator" not in fields:
        raise ParseError("missing required key 'operator'", None, None)

    symbols = []
    for name, value, line, col in multi["symbol"]:
        symbols.append((name, value))
    so = []
    for name, value, line, col in multi["so_choice"]:
        so.append((name, float(_num(value, line, col))))

    spec = RunSpec(symbols=tuple(symbols), so_choices=tuple(so), **fields)
    _validate(spec, where, multi)
    return spec


def _validate(spec, where, multi):
    def fail(msg, key=None):
        line, col = where.get(key, (None, None))
        raise ParseError(msg, line, col)

    if spec.command not in COMMANDS:
        fail(f"unknown command {spec.command!r}", "command")
    for key in ("tau", "split_tol", "floor_tol", "slack"):
        if not getattr(spec, key) > 0:
            fail(f"{key} must be positive", key)
    if spec.m < 1:
        fail("m must be positive", "m")
    if spec.pad_factor < 2:
        fail("pad_factor must be at least 2", "pad_factor")
    ns = spec.n_list
    if len(ns) < 3 or any(b <= a for a, b in zip(ns, ns[1:])):
        fail("n_list must be strictly increasing with at least three entries", "n_list")
    if ns[0] < 1 or ns[-1] > spec.window_max:
        fail("n_list must lie in [1, n_max]", "n_list")
    if spec.k_max < 1:
        fail("k_max must be positive", "k_max")
    if spec.command == "probe":
        if spec.probe not in PROBES:
            fail(f"probe must be one of {', '.join(PROBES)}", "probe")
        if spec.probe == "commutator" and spec.family not in pframework.FAMILIES:
            fail(f"family must be one of {', '.join(pframework.FAMILIES)}", "family")
        if spec.probe == "pstrong" and not spec.direction:
            fail("the pstrong probe needs a direction", "direction")
        if spec.probe == "cauchy" and any(not isinstance(p, tuple) for p in spec.params):
            fail("cauchy params are m:n pairs", "params")
        if spec.probe in ("quasibanded", "commutator") and not spec.params:
            fail(f"the {spec.probe} probe needs params", "params")
    if spec.command == "solve" and not spec.solution:
        fail("solve needs a manufactured solution", "solution")
    if spec.direction:
        try:
            parse_direction(spec.direction)
        except ValueError as exc:
            fail(str(exc), "direction")

    # symbols parse now so that errors carry their line
    table = {}
    for name, text, line, col in multi["symbol"]:
        try:
            table[name] = symbol(text, name=name)
        except ParseError as exc:
            raise ParseError(f"symbol {name}: {exc.message}", line, col) from None
    chosen = set(spec.so_dict())
    for name, s in table.items():
        if s.cls.tag.startswith("SO") and name not in chosen:
            line, col = next((l, c) for n, _, l, c in multi["symbol"] if n == name)
            raise MissingSOChoice(
                f"symbol {name} is slowly oscillating; add 'so_choice: {name} = <value>'", line, col
            )
    unknown = chosen - set(table)
    if unknown:
        fail(f"so_choice for undeclared symbol(s) {sorted(unknown)}")
    line, col = where.get("operator", (None, None))
    parse_operator(spec.operator, dict(spec.symbols), line)
    if spec.solution is not None:
        symbol(spec.solution, var="x")


def render(spec):
    """Spec-file text that parses back to ``spec``."""
    out = []
    for key in _ORDER:
        if key == "symbol":
            out += [f"symbol: {n} = {t}" for n, t in spec.symbols]
            continue
        if key == "so_choice":
            out += [f"so_choice: {n} = {v!r}" for n, v in spec.so_choices]
            continue
        v = getattr(spec, key)
        if v is None or (key == "params" and not v):
            continue
        if key == "name" and not v:
            continue
        if key == "n_list":
            v = ", ".join(str(n) for n in v)
        elif key == "params":
            v = ", ".join(f"{p[0]!r}:{p[1]!r}" if isinstance(p, tuple) else repr(p) for p in v)
        elif isinstance(v, float):
            v = repr(v)
        out.append(f"{key}: {v}")
    return "\n".join(out) + "\n"


def build(spec):
    """Parsed operator or sequence of a spec."""
    return parse_operator(spec.operator, dict(spec.symbols))


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------


def corpus_names():
    """Names of the built-in corpus spec files (without extension)."""
    root = resources.files("finsec") / "corpus"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".spec"))


def load_corpus(name=None):
    """Built-in corpus specs: one :class:`RunSpec` or a dict of all."""
    root = resources.files("finsec") / "corpus"
    if name is not None:
        return parse_spec((root / f"{name}.spec").read_text())
    return {n: load_corpus(n) for n in corpus_names()}


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    """Exit code, printed text and written files of one run."""

    code: int
    text: str
    files: list = field(default_factory=list)


def _as_sequence(expr):
    if isinstance(expr, OperatorExpr):
        return FiniteSection(Const(expr))
    return expr


def _plot(path, x, series, xlabel, ylabel, title, logy=True):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "finsec"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, y in series:
        y = np.asarray(y, dtype=float)
        if logy:
            y = np.where(y > 0, y, np.nan)
        ax.plot(x, y, marker="o", label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


class _Out:
    def __init__(self, directory):
        self.dir = directory
        self.files = []

    def path(self, name):
        os.makedirs(self.dir, exist_ok=True)
        p = os.path.join(self.dir, name)
        self.files.append(p)
        return p

    def csv(self, name, rows):
        analysis.write_csv(self.path(name), rows)

    def text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _describe(spec, expr, out):
    seq = _as_sequence(expr)
    lines = [f"operator: {to_text(expr)}"]
    try:
        lines.append(f"mu = {mu_of(seq)}")
    except FinsecError as exc:
        lines.append(f"mu: {exc}")
    dset = active_directions(seq)
    lines.append("jump points: " + (", ".join(f"{t:g}" for t in dset.jump_points) or "none"))
    special = {0.0, *dset.jump_points}
    rows = [["direction", "snapshot"]]
    shown = hidden = 0
    for d in dset.directions:
        # off the jump set H(t) depends on t only through symbol values
        generic = d.is_h and d.t is not None and abs(d.t) not in {abs(t) for t in special}
        if generic and shown:
            hidden += 1
            continue
        shown += generic
        text = to_text(simplify(snapshot(seq, d, spec.so_dict())))
        rows.append([str(d), text])
        lines.append(f"  {str(d):<14} {text}")
    if hidden:
        lines.append(f"  ... and {hidden} further continuum directions of the same form")
    out.csv("snapshots.csv", rows)
    return EXIT_OK, "\n".join(lines)


def _predict(spec, expr, out):
    report = analysis.stability_report(_as_sequence(expr), spec.config())
    out.csv("report.csv", report.rows())
    code = EXIT_INCONCLUSIVE if report.verdict == "inconclusive" else EXIT_OK
    return code, report.table(), report


def _plateau(traj):
    """``max/min`` of the condition numbers over the top half of the windows."""
    conds = [c for _, _, c in traj[len(traj) // 2:]]
    return max(conds) / min(conds)


def _verify(spec, expr, out):
    code, text, report = _predict(spec, expr, out)
    traj = analysis.condition_trajectory(_as_sequence(expr), spec.n_list, spec.config())
    out.csv("trajectory.csv", [["n", "sigma_min", "cond"]] + [list(r) for r in traj])
    ns = [r[0] for r in traj]
    _plot(out.path("trajectory.svg"), ns, [("sigma_min", [r[1] for r in traj]), ("cond", [r[2] for r in traj])],
          "n", "value", spec.name or "finite sections")
    lines = [text, "", f"{'n':>4} {'sigma_min':>12} {'cond':>12}"]
    lines += [f"{n:>4} {s:>12.4e} {c:>12.4e}" for n, s, c in traj]
    if report.verdict == "stable":
        ratio = _plateau(traj)
        ok = ratio <= 2.0
        lines.append(f"empirics: cond plateau ratio {ratio:.3f} (<= 2 expected)")
    elif report.verdict == "unstable":
        ratio = traj[-1][1] / traj[0][1] if traj[0][1] > 0 else 0.0
        ok = ratio <= spec.floor_tol
        lines.append(f"empirics: sigma_min ratio {ratio:.3e} (<= {spec.floor_tol:g} expected)")
    else:
        lines.append("empirics: no prediction to compare")
        return EXIT_INCONCLUSIVE, "\n".join(lines)
    lines.append("consistent" if ok else "INCONSISTENT")
    return (EXIT_OK if ok else EXIT_INCONSISTENT), "\n".join(lines)


def _splitting(spec, expr, out):
    res = analysis.splitting_study(_as_sequence(expr), spec.k_max, spec.n_list, spec.config(),
                                   split_tol=spec.split_tol, floor_tol=spec.floor_tol)
    out.csv("splitting.csv", res.rows())
    _plot(out.path("splitting.svg"), list(res.n_list),
          [(f"s_{k + 1}", res.trajectories[:, k]) for k in range(res.trajectories.shape[1])],
          "n", "singular value", spec.name or "splitting")
    lines = [f"{'n':>4} " + " ".join(f"{'s_' + str(k + 1):>12}" for k in range(res.trajectories.shape[1]))]
    for n, row in zip(res.n_list, res.trajectories):
        lines.append(f"{n:>4} " + " ".join(f"{v:>12.4e}" for v in row))
    lines.append(f"predicted alpha = {res.predicted_alpha}  observed = {res.observed}  verdict = {res.verdict}")
    if not res.monotone:
        lines.append("note: a trajectory is not monotone")
    code = {"pass": EXIT_OK, "fail": EXIT_INCONSISTENT}.get(res.verdict, EXIT_INCONCLUSIVE)
    return code, "\n".join(lines)


def _probe(spec, expr, out):
    grid = make_grid(spec.window_max, spec.m, spec.pad_factor)
    kind = spec.probe
    if kind == "cauchy":
        pairs = spec.params or ((1, 10), (2, 20), (4, 40))
        rows = [["m", "n", "measured", "bound", "pass"]]
        ok = True
        lines = [f"{'m':>4} {'n':>5} {'measured':>12} {'bound':>12}"]
        for mm, nn in pairs:
            c = pframework.cauchy_tail_check(int(mm), int(nn), 2.0, grid, spec.slack)
            ok &= c.passed
            rows.append([c.m, c.n, c.measured, c.bound, c.passed])
            lines.append(f"{c.m:>4} {c.n:>5} {c.measured:>12.6f} {c.bound:>12.6f} {'ok' if c.passed else 'FAIL'}")
        out.csv("cauchy.csv", rows)
        return (EXIT_OK if ok else EXIT_INCONSISTENT), "\n".join(lines)
    if kind != "pstrong" and not isinstance(expr, OperatorExpr):
        raise ParseError(f"the {kind} probe takes an operator, not a sequence")
    if kind == "pcompact":
        params = [int(p) for p in spec.params] if spec.params else list(spec.n_list)
        tr = pframework.pcompact_probe(expr, grid, params)
    elif kind == "quasibanded":
        tr = pframework.quasibanded_probe(expr, [int(p) for p in spec.params], spec.window_max // 2, grid)
    elif kind == "commutator":
        tr = pframework.commutator_probe(expr, spec.family, list(spec.params), grid)
    else:
        d = parse_direction(spec.direction)
        ns = [int(p) for p in spec.params] if spec.params else [n for n in spec.n_list if 2.6 * n <= grid.L]
        tr = pframework.pstrong_limit_probe(expr, d, None, ns, grid, spec.so_dict())
    out.csv(f"{kind}.csv", tr.rows())
    _plot(out.path(f"{kind}.svg"), tr.params, [(c, tr.norms[:, i]) for i, c in enumerate(tr.columns)],
          "parameter", "norm", spec.name or kind)
    lines = [f"{'param':>8} " + " ".join(f"{c:>14}" for c in tr.columns)]
    for p, row in zip(tr.params, tr.norms):
        lines.append(f"{p:>8g} " + " ".join(f"{v:>14.6e}" for v in row))
    lines.append(f"tag: {tr.tag}")
    code = EXIT_INCONCLUSIVE if tr.tag == pframework.INCONCLUSIVE else EXIT_OK
    return code, "\n".join(lines)


def _solve(spec, expr, out):
    u = symbol(spec.solution, var="x")
    rows = analysis.manufactured_study(expr, u, spec.n_list, spec.m, spec.pad_factor)
    out.csv("solve.csv", [["n", "error", "residual", "cond"]] + [list(r) for r in rows])
    _plot(out.path("solve.svg"), [r[0] for r in rows], [("error", [r[1] for r in rows])],
          "n", "relative error", spec.name or "manufactured solution")
    lines = [f"{'n':>4} {'error':>12} {'residual':>12} {'cond':>12}"]
    lines += [f"{n:>4} {e:>12.4e} {r:>12.4e} {c:>12.4e}" for n, e, r, c in rows]
    errs = [r[1] for r in rows]
    ok = all(b <= a * (1 + 1e-9) for a, b in zip(errs, errs[1:])) and errs[-1] < errs[0]
    lines.append("error decreasing" if ok else "error NOT decreasing")
    return (EXIT_OK if ok else EXIT_INCONSISTENT), "\n".join(lines)


_RUNNERS = {
    "describe": _describe,
    "predict": lambda s, e, o: _predict(s, e, o)[:2],
    "verify": _verify,
    "splitting": _splitting,
    "probe": _probe,
    "solve": _solve,
}


def run(spec, out_dir=None):
    """Execute a spec.

    Parameters
    ----------
    spec : RunSpec
    out_dir : str, optional
        Output directory; defaults to ``spec.out`` or ``finsec-out/<name>``.

    Returns
    -------
    RunResult
    """
    np.random.seed(spec.seed)
    directory = out_dir or spec.out or os.path.join("finsec-out", spec.name or spec.command)
    out = _Out(directory)
    try:
        expr = build(spec)
        code, text = _RUNNERS[spec.command](spec, expr, out)
    except FinsecError as exc:
        return RunResult(EXIT_INPUT, f"error: {exc}", out.files)
    out.text(f"{spec.command}.txt", text)
    return RunResult(code, text, out.files)


def main(argv=None):
    """Console entry point; returns the exit code."""
    ap = argparse.ArgumentParser(prog="finsec", description="finite section method laboratory")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("spec_file", help="spec file, or corpus:<name> for a built-in item")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--override", action="append", default=[], metavar="key=value",
                    help="replace a spec entry (repeatable)")
    args = ap.parse_args(argv)
    try:
        if args.spec_file.startswith("corpus:"):
            text = (resources.files("finsec") / "corpus" / f"{args.spec_file[7:]}.spec").read_text()
        else:
            with open(args.spec_file) as fh:
                text = fh.read()
        spec = parse_spec(text, [f"command={args.command}"] + args.override)
    except (FinsecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    result = run(spec, args.out)
    stream = sys.stderr if result.code == EXIT_INPUT else sys.stdout
    print(result.text, file=stream)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
