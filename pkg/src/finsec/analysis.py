"""Numerical verdicts: invertibility of snapshots, stability, splitting, solving.

The finite section method applies to a sequence in the finite-section
algebra exactly when every snapshot is invertible.  :func:`stability_report`
checks each snapshot from :func:`~finsec.operators.active_directions` and
aggregates the verdicts, kernel counts and indices.

Verdicts are three-valued.  Snapshots of a few recognisable shapes are
decided analytically:

* multiplication operators ``a I``: invertible iff ``inf |a| > tau``;
* ``Pi W(g) Pi + mu (I - Pi)`` with ``Pi`` one of ``I, chi_-, chi_+, P_1``
  and a paired symbol ``g = c_- chi_- + c_+ chi_+``: invertible iff  ``mu``
  is nonzero and the segment ``[c_-, c_+]`` stays away from 0 (for
  ``Pi = I`` just ``c_-, c_+`` nonzero).

Everything else is assembled on a sequence of growing grids and judged from
the trajectory of the smallest singular value.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretize import (
    DEFAULT_CAP,
    DEFAULT_PAD,
    DiscreteOperator,
    assemble,
    assemble_finite_section,
    assemble_snapshot,
    make_grid,
    sampled_symbol,
)
from .errors import AmbiguousWinding, MissingLimits, SingularSection, SymbolVanishes
from .operators import (
    Block2x2,
    Const,
    Conv,
    FiniteSection,
    Mult,
    OperatorExpr,
    Scalar,
    SequenceExpr,
    Single,
    active_directions,
    dilate,
    expand,
    mu_of,
    snapshot,
    to_text,
    simplify,
    DEFAULT_T_GRID,
)
from .symbols import SymbolSpec, constant

__all__ = [
    "AnalysisConfig",
    "DirectionRecord",
    "StabilityReport",
    "SplittingResult",
    "FSMSolution",
    "singular_values",
    "invertibility_verdict",
    "winding_number",
    "stability_report",
    "splitting_study",
    "solve_fsm",
    "manufactured_study",
    "condition_trajectory",
    "write_csv",
]

INVERTIBLE = "invertible"
NOT_INVERTIBLE = "not-invertible"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class AnalysisConfig:
    """Thresholds of the numerical verdicts.

    Attributes
    ----------
    n_list : tuple of int
        Window radii, strictly increasing, at least three.
    m : int
        Nodes per unit length.
    pad_factor : float
        Grid half width over window radius.
    tau : float
        Invertibility threshold for smallest singular values and moduli.
    kernel_tol : float
        Near-kernel tolerance relative to the matrix norm.
    gap : float
        Required ratio between the first uncounted and last counted value.
    floor : float
        Relative level below which a singular value is numerically zero.
    stabilize : float
        Largest relative change over the last two windows for "invertible".
    decay : float
        Largest per-doubling ratio for "not-invertible".
    t_grid : tuple of float
        Representatives of the ``H(t)`` continuum.
    so_choices : dict
        Accumulation values of slowly oscillating coefficients.
    """

    n_list: tuple = (8, 16, 32, 48)
    m: int = 8
    pad_factor: float = DEFAULT_PAD
    tau: float = 1e-4
    kernel_tol: float = 1e-4
    gap: float = 10.0
    floor: float = 1e-10
    stabilize: float = 0.1
    decay: float = 0.5
    t_grid: tuple = DEFAULT_T_GRID
    so_choices: dict = field(default_factory=dict)
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        n = tuple(int(v) for v in self.n_list)
        if len(n) < 3 or any(b <= a for a, b in zip(n, n[1:])):
            raise ValueError("n_list must be strictly increasing with at least three windows")
        object.__setattr__(self, "n_list", n)
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass
class DirectionRecord:
    """Verdict for one snapshot direction.

    Attributes
    ----------
    direction : SnapshotDirection
    snapshot : str
        Simplified snapshot expression.
    verdict : str
        ``invertible``, ``not-invertible`` or ``inconclusive``.
    method : str
        ``analytic-scalar``, ``analytic-paired`` or ``numeric-window``.
    evidence : dict
        Scalar moduli or the smallest singular value per window.
    dim_ker, dim_coker, index : int or None
        None when not determined.
    """

    direction: object
    snapshot: str
    verdict: str
    method: str
    evidence: dict = field(default_factory=dict)
    dim_ker: int | None = None
    dim_coker: int | None = None
    index: int | None = None


@dataclass
class StabilityReport:
    """Per-direction records and the aggregate decision.

    ``verdict`` is ``unstable`` as soon as one snapshot is not invertible,
    ``inconclusive`` when no snapshot fails but some verdict is open, and
    ``stable`` when every snapshot is invertible.
    """

    records: list
    mu: complex
    verdict: str
    alpha: int | None
    beta: int | None
    index_sum: int | None
    so_choices: dict = field(default_factory=dict)

    @property
    def stable(self):
        return {"stable": True, "unstable": False}.get(self.verdict)

    @property
    def culprits(self):
        return [r.direction for r in self.records if r.verdict != INVERTIBLE]

    def table(self):
        """Plain-text verdict table."""
        head = f"{'direction':<16} {'verdict':<15} {'method':<16} {'ker':>4} {'coker':>5} {'ind':>4}  evidence"
        lines = [head, "-" * len(head)]
        for r in self.records:
            lines.append(
                f"{str(r.direction):<16} {r.verdict:<15} {r.method:<16} "
                f"{_opt(r.dim_ker):>4} {_opt(r.dim_coker):>5} {_opt(r.index):>4}  {_evidence_text(r.evidence)}"
            )
        lines.append("")
        lines.append(
            f"mu = {_c(self.mu)}  verdict = {self.verdict}  alpha = {_opt(self.alpha)}  "
            f"beta = {_opt(self.beta)}  index_sum = {_opt(self.index_sum)}"
        )
        return "\n".join(lines)

    def rows(self):
        """CSV rows: one per direction."""
        out = [["direction", "verdict", "method", "dim_ker", "dim_coker", "index", "evidence"]]
        for r in self.records:
            out.append([str(r.direction), r.verdict, r.method, _opt(r.dim_ker), _opt(r.dim_coker),
                        _opt(r.index), _evidence_text(r.evidence)])
        return out


@dataclass
class SplittingResult:
    """Smallest singular values of the finite sections per window.

    Attributes
    ----------
    n_list : tuple of int
    trajectories : ndarray
        ``trajectories[i, k]`` is ``s_{k+1}(A_n)`` for ``n = n_list[i]``.
    predicted_alpha : int or None
    observed : int
        Trajectories tending to zero (final value below ``split_tol``, not
        increasing over the last two windows).
    verdict : str
        ``pass``, ``fail`` or ``inconclusive`` (no prediction).
    monotone : bool
        False flags a non-monotone trajectory.
    """

    n_list: tuple
    trajectories: np.ndarray
    predicted_alpha: int | None
    observed: int
    verdict: str
    monotone: bool = True

    def rows(self):
        k = self.trajectories.shape[1]
        out = [["n"] + [f"s_{i + 1}" for i in range(k)]]
        for n, row in zip(self.n_list, self.trajectories):
            out.append([n] + [repr(float(v)) for v in row])
        return out


@dataclass
class FSMSolution:
    """Solution of one truncated system.

    Attributes
    ----------
    u : ndarray
        Values on the window nodes.
    x : ndarray
        Window nodes.
    residual : float
        ``||A_n u_n - P_n v|| / ||v||``.
    cond : float
        Spectral condition number of the section.
    """

    u: np.ndarray
    x: np.ndarray
    residual: float
    cond: float


def _opt(v):
    return "-" if v is None else str(v)


def _c(z):
    z = complex(z)
    return f"{z.real:g}" if z.imag == 0 else f"{z.real:g}{z.imag:+g}i"


def _evidence_text(ev):
    parts = []
    for k, v in ev.items():
        if isinstance(v, (list, tuple)):
            parts.append(f"{k}=[" + ", ".join(f"{x:.3g}" if isinstance(x, float) else str(x) for x in v) + "]")
        elif isinstance(v, float):
            parts.append(f"{k}={v:.4g}")
        else:
            parts.append(f"{k}={v}")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# singular values
# ---------------------------------------------------------------------------


def _matrix(M):
    return M.matrix if isinstance(M, DiscreteOperator) else np.asarray(M)


def _decoupled(A):
    """Indices whose row and column vanish off the diagonal, and the rest."""
    off = A != 0
    np.fill_diagonal(off, False)
    iso = ~(off.any(axis=0) | off.any(axis=1))
    return np.flatnonzero(iso), np.flatnonzero(~iso)


def _svdvals(A):
    iso, core = _decoupled(A)
    parts = [np.abs(np.diag(A)[iso])]
    if core.size:
        parts.append(sla.svdvals(A[np.ix_(core, core)]))
    return np.sort(np.concatenate(parts))[::-1]


def _svd(A):
    """Full SVD exploiting decoupled diagonal indices (same values, exact)."""
    n = A.shape[0]
    iso, core = _decoupled(A)
    s_list, U = [], np.zeros((n, n), dtype=complex)
    V = np.zeros((n, n), dtype=complex)
    d = np.diag(A)[iso]
    s_iso = np.abs(d)
    col = 0
    for j, dj, sj in zip(iso, d, s_iso):
        U[j, col] = dj / sj if sj > 0 else 1.0
        V[j, col] = 1.0
        col += 1
    s = list(s_iso)
    if core.size:
        u, sc, vh = sla.svd(A[np.ix_(core, core)])
        U[np.ix_(core, np.arange(col, n))] = u
        V[np.ix_(core, np.arange(col, n))] = vh.conj().T
        s += list(sc)
    s = np.array(s)
    order = np.argsort(-s, kind="stable")
    return U[:, order], s[order], V[:, order].conj().T


def singular_values(M, k=None):
    """The ``k`` smallest singular values, ascending.

    Examples
    --------
    >>> singular_values(np.diag([1.0, 2.0, 3.0]), 2)
    array([1., 2.])
    """
    s = _svdvals(np.asarray(_matrix(M)))[::-1]
    if k is None:
        return s
    if k > s.size:
        raise ValueError("k exceeds the matrix size")
    return s[:k]


# ---------------------------------------------------------------------------
# winding numbers
# ---------------------------------------------------------------------------


def winding_number(b, grid):
    """Winding number of the closed symbol curve about 0.

    The curve runs over the dual nodes, continues through geometrically
    spaced tail points to the limits at infinity and is closed by the
    straight chord from ``b(+inf)`` to ``b(-inf)``.  Jumps are bridged by
    straight chords between the one-sided values.

    Raises
    ------
    MissingLimits
        Without both limits at infinity.
    SymbolVanishes
        If the curve (chords included) comes within ``1e-12`` of 0.
    AmbiguousWinding
        If the total argument increment is not within 0.1 of a multiple of ``2 pi``.
    """
    if not b.has_limits:
        raise MissingLimits(f"{b.name} has no limits at infinity")
    if b.constant is not None:
        if b.constant == 0:
            raise SymbolVanishes("constant zero symbol")
        return 0
    core = grid.dual_nodes
    xmax = math.pi / grid.h
    tail = xmax * 2.0 ** np.arange(1, 48)
    xi = np.concatenate([-tail[::-1], core, tail])
    parts = []
    js = list(b.jumps)
    start = 0
    for j in js:
        stop = np.searchsorted(xi, j.t)
        seg = xi[start:stop]
        seg = seg[seg != j.t]
        parts.append(b.eval_unchecked(seg))
        parts.append(np.array([j.left, j.right]))
        start = stop
    seg = xi[start:]
    parts.append(b.eval_unchecked(seg))
    z = np.concatenate([[b.limit_minus]] + parts + [[b.limit_plus], [b.limit_minus]])
    scale = max(1.0, float(np.max(np.abs(z))))
    if np.min(np.abs(z)) <= 1e-12 * scale:
        raise SymbolVanishes(f"{b.name} vanishes on the sampled curve")
    a, c = z[:-1], z[1:]
    # distance from 0 to each chord
    d = c - a
    tpar = np.clip(-np.real(np.conj(a) * d) / np.maximum(np.abs(d) ** 2, 1e-300), 0, 1)
    if np.min(np.abs(a + tpar * d)) <= 1e-12 * scale:
        raise SymbolVanishes(f"the curve of {b.name} passes through 0")
    total = float(np.sum(np.angle(c / a))) / (2 * math.pi)
    k = int(round(total))
    if abs(total - k) >= 0.1:
        raise AmbiguousWinding(f"argument increment {total:.3f} turns is not an integer")
    return k


# ---------------------------------------------------------------------------
# shape recognition
# ---------------------------------------------------------------------------


def _indicator_kind(p):
    """Classify a coefficient as chi_-, chi_+, P_1 or none of these."""
    if not ("pwc" in p.traits and p.has_limits):
        return None
    lm, lp, js = p.limit_minus, p.limit_plus, p.jump_points
    if js == (0.0,):
        if lm == 1 and lp == 0:
            return "minus"
        if lm == 0 and lp == 1:
            return "plus"
    if js == (-1.0, 1.0) and lm == 0 and lp == 0:
        if complex(p.eval_unchecked(np.array([0.0]))[0]) == 1:
            return "unit"
    return None


def _region_values(m, kind):
    """(inside, outside) constants of ``m`` relative to ``Pi``, or None."""
    if m.constant is not None:
        return m.constant, m.constant
    if not ("pwc" in m.traits and m.has_limits):
        return None
    js = m.jump_points
    if kind == "minus" and js == (0.0,):
        return m.limit_minus, m.limit_plus
    if kind == "plus" and js == (0.0,):
        return m.limit_plus, m.limit_minus
    if kind == "unit" and set(js) <= {-1.0, 1.0} and m.limit_minus == m.limit_plus:
        inside = complex(m.eval_unchecked(np.array([0.0]))[0])
        return inside, m.limit_minus
    return None


def _combined(terms, var):
    out = None
    for c, s in terms:
        t = s * c if c != 1 else s
        out = t if out is None else out + t
    return out if out is not None else constant(0.0, var=var)


def _shape(expr):
    """Recognise ``m(x)`` or ``Pi W(g) Pi + m(x)``; return a dict or None."""
    mons = expand(expr)
    if mons is None:
        return None
    mults, convs = [], []
    kind = None
    for c, w in mons:
        if all(isinstance(f, Mult) for f in w):
            s = constant(1.0)
            for f in w:
                s = s * f.a
            mults.append((c, s))
            continue
        if len(w) == 1 and isinstance(w[0], Conv):
            k = "identity"
            b = w[0].b
        elif (len(w) == 3 and isinstance(w[0], Mult) and isinstance(w[1], Conv)
              and isinstance(w[2], Mult)):
            k1, k2 = _indicator_kind(w[0].a), _indicator_kind(w[2].a)
            if k1 is None or k1 != k2:
                return None
            k, b = k1, w[1].b
        else:
            return None
        if kind is not None and kind != k:
            return None
        kind = k
        convs.append((c, b))
    m = _combined(mults, "x")
    if not convs:
        return {"kind": "scalar", "m": m}
    vals = _region_values(m, "minus" if kind == "identity" else kind) if kind != "identity" else (
        (m.constant, m.constant) if m.constant is not None else None)
    if vals is None:
        return None
    inside, outside = vals
    g = _combined(convs, "xi") + inside
    return {"kind": kind, "g": g, "mu": outside}


def _inf_modulus(a):
    """Sampled infimum of ``|a|`` (exact on piecewise constant functions)."""
    if a.constant is not None:
        return abs(a.constant)
    vals = []
    if a.has_limits:
        vals += [a.limit_minus, a.limit_plus]
    for j in a.jumps:
        vals += [j.left, j.right]
    if "pwc" in a.traits and a.has_limits:
        ts = list(a.jump_points)
        mids = [0.5 * (u + v) for u, v in zip(ts, ts[1:])] or [0.5]
        vals += list(a.eval_unchecked(np.array(mids)))
        return float(np.min(np.abs(vals)))
    x = np.concatenate([np.linspace(-64, 64, 16385), np.geomspace(64, 1e12, 400), -np.geomspace(64, 1e12, 400)])
    vals += list(a.eval_unchecked(x))
    return float(np.min(np.abs(vals)))


def _paired_values(g):
    if g.constant is not None:
        return g.constant, g.constant
    if "pwc" in g.traits and g.has_limits and g.jump_points == (0.0,):
        return g.limit_minus, g.limit_plus
    return None


def _segment_distance(a, b):
    d = b - a
    if d == 0:
        return abs(a)
    t = min(1.0, max(0.0, -((a.conjugate() * d).real) / abs(d) ** 2))
    return abs(a + t * d)


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


def _analytic(expr, cfg):
    sh = _shape(expr)
    if sh is None:
        return None
    if sh["kind"] == "scalar":
        v = _inf_modulus(sh["m"])
        verdict = INVERTIBLE if v > cfg.tau else NOT_INVERTIBLE
        rec = dict(verdict=verdict, method="analytic-scalar", evidence={"min_modulus": v})
        if verdict == INVERTIBLE:
            rec.update(dim_ker=0, dim_coker=0, index=0)
        return rec
    pv = _paired_values(sh["g"])
    if pv is None:
        return {"shape": sh}
    cm, cp = complex(pv[0]), complex(pv[1])
    mu = complex(sh["mu"])
    if sh["kind"] == "identity":
        moduli = [abs(cm), abs(cp)]
        ok = min(moduli) > cfg.tau
        ev = {"moduli": moduli}
    else:
        dist = _segment_distance(cm, cp)
        moduli = [abs(mu), dist]
        ok = min(moduli) > cfg.tau
        ev = {"mu": abs(mu), "segment_distance": dist}
    method = "analytic-paired" if cm != cp else "analytic-scalar"
    rec = dict(verdict=INVERTIBLE if ok else NOT_INVERTIBLE, method=method, evidence=ev)
    if ok:
        rec.update(dim_ker=0, dim_coker=0, index=0)
    return rec


def _trajectory_verdict(ns, sig, norms, cfg):
    last, prev = sig[-1], sig[-2]
    if last <= cfg.floor * max(norms[-1], 1.0):
        return NOT_INVERTIBLE
    if last >= cfg.tau and abs(last - prev) < cfg.stabilize * last:
        return INVERTIBLE
    if last < cfg.tau:
        first = sig[0]
        if first > 0:
            ratio = (last / first) ** (math.log(2) / math.log(ns[-1] / ns[0]))
            if ratio < cfg.decay:
                return NOT_INVERTIBLE
    return INCONCLUSIVE


def _near_kernel(M, x2, L, cfg):
    """Localized near-kernel counts of the largest-window matrix."""
    U, s, Vh = _svd(M)
    nrm = s[0] if s.size else 0.0
    tol = cfg.kernel_tol * max(nrm, 1e-300)
    small = np.flatnonzero(s <= tol)
    if small.size:
        nxt = s[small[0] - 1] if small[0] > 0 else np.inf
        if nxt < cfg.gap * s[small[0]]:
            return None, None
    inside = np.abs(x2) <= L / 2
    ker = coker = 0
    for i in small:
        v = Vh[i].conj()
        u = U[:, i]
        if np.sum(np.abs(v[inside]) ** 2) >= 0.5 * np.sum(np.abs(v) ** 2):
            ker += 1
        if np.sum(np.abs(u[inside]) ** 2) >= 0.5 * np.sum(np.abs(u) ** 2):
            coker += 1
    return ker, coker


def _numeric_conv(g, cfg):
    # a discrete convolution is normal: its singular values are |g(xi_k)|
    ns = cfg.n_list
    sig, norms = [], []
    for n in ns:
        vals = np.abs(sampled_symbol(g, make_grid(n, cfg.m, cfg.pad_factor, cfg.cap)))
        sig.append(float(vals.min()))
        norms.append(float(vals.max()))
    verdict = _trajectory_verdict(ns, sig, norms, cfg)
    dims = (0, 0) if verdict == INVERTIBLE else (None, None)
    return dict(verdict=verdict, method="numeric-window",
                evidence={"n": list(ns), "sigma_min": sig}, dim_ker=dims[0], dim_coker=dims[1])


def _numeric(snap, direction, cfg, frame_dilate):
    ns = cfg.n_list
    sig, norms = [], []
    last = None
    for i, n in enumerate(ns):
        grid = make_grid(n, cfg.m, cfg.pad_factor, cfg.cap)
        s = snap
        if frame_dilate:
            if isinstance(s, Block2x2):
                s = Block2x2(*(dilate(e, n) for e in (s.a11, s.a12, s.a21, s.a22)), direction=s.direction)
            else:
                s = dilate(s, n)
        M = assemble_snapshot(s if not isinstance(s, OperatorExpr) else Single(s), grid).matrix
        sv = _svdvals(M)
        sig.append(float(sv[-1]))
        norms.append(float(sv[0]))
        last = (M, grid)
    verdict = _trajectory_verdict(ns, sig, norms, cfg)
    M, grid = last
    x = grid.nodes
    x2 = np.concatenate([x, x]) if M.shape[0] == 2 * grid.N else x
    ker, coker = (0, 0) if verdict == INVERTIBLE else _near_kernel(M, x2, grid.L, cfg)
    if verdict == INCONCLUSIVE and sig[-1] < cfg.tau and ker is not None and ker + coker > 0:
        # a fixed operator with an isolated near-kernel: the small value does not decay
        verdict = NOT_INVERTIBLE
    return dict(verdict=verdict, method="numeric-window",
                evidence={"n": list(ns), "sigma_min": sig}, dim_ker=ker, dim_coker=coker)


def _record_single(expr, direction, cfg):
    desc = to_text(simplify(expr))
    an = _analytic(expr, cfg)
    if an is not None and "shape" not in an:
        return DirectionRecord(direction, desc, **an)
    sh = an["shape"] if an is not None else None
    if sh is not None and sh["kind"] == "identity":
        return DirectionRecord(direction, desc, index=0, **_numeric_conv(sh["g"], cfg))
    frame = direction is not None and direction.is_h
    rec = DirectionRecord(direction, desc, **_numeric(expr, direction, cfg, frame))
    if sh is None:
        if rec.verdict == INVERTIBLE:
            rec.index = 0
        elif rec.dim_ker is not None and rec.dim_coker is not None:
            rec.index = rec.dim_ker - rec.dim_coker
        return rec
    # half-line or interval compression of a convolution: index from the winding
    try:
        grid = make_grid(cfg.n_list[-1], cfg.m, cfg.pad_factor, cfg.cap)
        w = winding_number(sh["g"], grid)
        if sh["kind"] == "minus":
            rec.index = w
        elif sh["kind"] == "plus":
            rec.index = -w
        else:
            rec.index = 0 if rec.verdict == INVERTIBLE else None
        rec.evidence["winding"] = w
    except (SymbolVanishes, AmbiguousWinding, MissingLimits):
        rec.index = None
    if rec.verdict == INVERTIBLE:
        rec.index, rec.dim_ker, rec.dim_coker = 0 if rec.index in (None, 0) else rec.index, 0, 0
    return rec


def _merge(r1, r2, direction, desc):
    vs = {r1.verdict, r2.verdict}
    if NOT_INVERTIBLE in vs:
        v = NOT_INVERTIBLE
    elif INCONCLUSIVE in vs:
        v = INCONCLUSIVE
    else:
        v = INVERTIBLE
    method = r1.method if r1.method == r2.method else "numeric-window" if "numeric-window" in (
        r1.method, r2.method) else "analytic-paired"
    ev = {f"[1] {k}": val for k, val in r1.evidence.items()}
    ev.update({f"[2] {k}": val for k, val in r2.evidence.items()})

    def add(a, b):
        return None if a is None or b is None else a + b

    return DirectionRecord(direction, desc, v, method, ev, add(r1.dim_ker, r2.dim_ker),
                           add(r1.dim_coker, r2.dim_coker), add(r1.index, r2.index))


def invertibility_verdict(snap, n_list=None, tau=None, config=None):
    """Decide invertibility of one snapshot.

    Parameters
    ----------
    snap : Single, Block2x2 or OperatorExpr
    n_list : sequence of int, optional
        Window radii (at least three, increasing); defaults from ``config``.
    tau : float, optional
        Threshold; defaults from ``config``.
    config : AnalysisConfig, optional

    Returns
    -------
    DirectionRecord

    Notes
    -----
    Numeric windows assemble the snapshot on a grid of half width
    ``pad_factor * n`` for each ``n``.  ``H`` snapshots are first conjugated
    by the dilation ``Z_n`` (an isometry), which turns ``P_1`` into ``P_n`` so
    that larger windows resolve the snapshot better.  The verdict is

    * not-invertible if the last value is numerically zero, or below
      ``tau`` and shrinking at least by ``decay`` per doubling of ``n``, or
      below ``tau`` with a localized near-kernel separated by a spectral gap;
    * invertible if the last value is at least ``tau`` and changed by less
      than ``stabilize`` (relative) over the last two windows;
    * inconclusive otherwise.
    """
    cfg = config or AnalysisConfig()
    kw = {}
    if n_list is not None:
        kw["n_list"] = tuple(n_list)
    if tau is not None:
        kw["tau"] = tau
    if kw:
        cfg = AnalysisConfig(**{**cfg.__dict__, **kw})
    direction = getattr(snap, "direction", None)
    if isinstance(snap, OperatorExpr):
        snap = Single(snap)
    if isinstance(snap, Single):
        return _record_single(snap.expr, direction, cfg)
    desc = to_text(simplify(snap))
    if _zero(snap.a12) and _zero(snap.a21):
        sub = None
        if direction is not None:
            sub = direction
        r1 = _record_single(snap.a11, sub, cfg)
        r2 = _record_single(snap.a22, sub, cfg)
        return _merge(r1, r2, direction, desc)
    frame = direction is not None and direction.is_h
    rec = DirectionRecord(direction, desc, **_numeric(snap, direction, cfg, frame))
    if rec.verdict == INVERTIBLE:
        rec.index = 0
    elif rec.dim_ker is not None:
        rec.index = rec.dim_ker - rec.dim_coker
    return rec


def _zero(e):
    mons = expand(e)
    return mons is not None and not mons


# ---------------------------------------------------------------------------
# stability report
# ---------------------------------------------------------------------------


def stability_report(seq, config=None):
    """Check every active snapshot of a finite-section sequence.

    Parameters
    ----------
    seq : SequenceExpr
        Element of the finite-section algebra.
    config : AnalysisConfig, optional

    Returns
    -------
    StabilityReport
        The ``H(t)`` continuum is reported as one record for the worst grid
        point (smallest modulus or singular value).

    Raises
    ------
    RichnessRequired
        Slowly oscillating coefficients without accumulation values.
    NotFiniteSectionAlgebra
        Sequences outside the finite-section algebra.
    """
    cfg = config or AnalysisConfig()
    mu = mu_of(seq)
    ds = active_directions(seq, cfg.t_grid)
    cont = set(ds.continuum) - set(ds.jump_points) - {0.0}
    records, cont_records = [], []
    cache = {}
    for d in ds.directions:
        snap = snapshot(seq, d, cfg.so_choices)
        key = None
        in_cont = d.tag in ("H", "HStar") and d.t in cont
        if in_cont:
            key = to_text(snap)
            if key in cache:
                r = cache[key]
                cont_records.append(DirectionRecord(d, r.snapshot, r.verdict, r.method, r.evidence,
                                                    r.dim_ker, r.dim_coker, r.index))
                continue
        rec = invertibility_verdict(snap, config=cfg)
        rec.direction = d
        if in_cont:
            cache[key] = rec
            cont_records.append(rec)
        else:
            records.append(rec)
    counted = records + cont_records
    if cont_records:
        worst = min(cont_records, key=_badness)
        shown = DirectionRecord(worst.direction, worst.snapshot, worst.verdict, worst.method,
                                dict(worst.evidence, continuum_points=len(cont_records)),
                                worst.dim_ker, worst.dim_coker, worst.index)
        records.append(shown)
    verdicts = [r.verdict for r in counted]
    if NOT_INVERTIBLE in verdicts:
        agg = "unstable"
    elif INCONCLUSIVE in verdicts:
        agg = "inconclusive"
    else:
        agg = "stable"

    def total(attr):
        vals = [getattr(r, attr) for r in counted]
        return None if any(v is None for v in vals) else int(sum(vals))

    return StabilityReport(records, mu, agg, total("dim_ker"), total("dim_coker"), total("index"),
                           dict(cfg.so_choices))


def _badness(r):
    order = {NOT_INVERTIBLE: 0, INCONCLUSIVE: 1, INVERTIBLE: 2}[r.verdict]
    ev = r.evidence
    val = ev.get("min_modulus")
    if val is None:
        if "sigma_min" in ev:
            val = ev["sigma_min"][-1]
        else:
            nums = [v for v in ev.values() if isinstance(v, float)]
            nums += [min(v) for v in ev.values() if isinstance(v, list) and v and isinstance(v[0], float)]
            val = min(nums) if nums else math.inf
    return (order, val)


# ---------------------------------------------------------------------------
# splitting, conditioning, solving
# ---------------------------------------------------------------------------


def _as_seq(seq):
    if isinstance(seq, OperatorExpr):
        return FiniteSection(Const(seq))
    return seq


def splitting_study(seq, k_max, n_list=None, config=None, predicted_alpha="auto",
                    split_tol=1e-6, floor_tol=1e-3):
    """Track the ``k_max`` smallest singular values of the finite sections.

    Parameters
    ----------
    seq : SequenceExpr
    k_max : int
        At least the predicted alpha plus one.
    n_list : sequence of int, optional
    config : AnalysisConfig, optional
    predicted_alpha : int, None or "auto"
        "auto" takes alpha from :func:`stability_report`.
    split_tol : float
        A trajectory tends to 0 when its final value is at most this.
    floor_tol : float
        Trajectory ``alpha + 1`` must stay at least this large.

    Returns
    -------
    SplittingResult
    """
    cfg = config or AnalysisConfig()
    seq = _as_seq(seq)
    ns = tuple(n_list or cfg.n_list)
    if predicted_alpha == "auto":
        predicted_alpha = stability_report(seq, cfg).alpha
    if predicted_alpha is not None and k_max < predicted_alpha + 1:
        raise ValueError("k_max must exceed the predicted alpha")
    traj = []
    for n in ns:
        grid = make_grid(n, cfg.m, cfg.pad_factor, cfg.cap)
        traj.append(singular_values(assemble_finite_section(seq, n, grid), k_max))
    traj = np.array(traj)
    vanishing = 0
    monotone = True
    for k in range(k_max):
        col = traj[:, k]
        if col[-1] <= split_tol and col[-1] <= col[-2] * (1 + 1e-9) + split_tol * 1e-3:
            vanishing += 1
        if np.any(np.diff(col) > 1e-12 + 1e-9 * col[:-1]) and np.any(np.diff(col) < -1e-12 - 1e-9 * col[:-1]):
            monotone = False
    if predicted_alpha is None:
        verdict = "inconclusive"
    else:
        ok = vanishing == predicted_alpha
        if ok and predicted_alpha < k_max:
            ok = traj[-1, predicted_alpha] >= floor_tol
        verdict = "pass" if ok else "fail"
    return SplittingResult(ns, traj, predicted_alpha, vanishing, verdict, monotone)


def condition_trajectory(seq, n_list=None, config=None):
    """Smallest singular value and condition number of ``A_n`` per window.

    Returns
    -------
    list of (n, sigma_min, cond)
    """
    cfg = config or AnalysisConfig()
    seq = _as_seq(seq)
    out = []
    for n in tuple(n_list or cfg.n_list):
        grid = make_grid(n, cfg.m, cfg.pad_factor, cfg.cap)
        s = singular_values(assemble_finite_section(seq, n, grid))
        smin, smax = float(s[0]), float(s[-1])
        out.append((n, smin, smax / smin if smin > 0 else math.inf))
    return out


def _rhs_values(v, x):
    if isinstance(v, SymbolSpec):
        return v.eval_unchecked(x)
    if callable(v):
        return np.asarray(v(x), dtype=complex)
    arr = np.asarray(v, dtype=complex)
    if arr.shape != x.shape:
        raise ValueError("right-hand side vector does not match the grid")
    return arr


def solve_fsm(seq, v, n, grid, cond_cap=1e12):
    """Solve the truncated system ``A_n u_n = P_n v``.

    Parameters
    ----------
    seq : SequenceExpr or OperatorExpr
        Operators ``A`` are read as ``FS(A)``.
    v : callable, SymbolSpec or ndarray
        Right-hand side (a vector is given on all grid nodes).
    n : int
    grid : Grid
    cond_cap : float

    Returns
    -------
    FSMSolution

    Raises
    ------
    SingularSection
        If the LU factorisation fails or the condition number exceeds ``cond_cap``.
    """
    seq = _as_seq(seq)
    A = assemble_finite_section(seq, n, grid).matrix
    idx = grid.window(n)
    x = grid.nodes
    vv = _rhs_values(v, x)
    rhs = vv[idx]
    s = _svdvals(A)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    if not cond <= cond_cap:
        raise SingularSection(f"section n={n} has condition number {cond:.3g} > {cond_cap:g}")
    try:
        lu = sla.lu_factor(A, check_finite=True)
        with np.errstate(all="raise"):
            u = sla.lu_solve(lu, rhs)
    except (sla.LinAlgError, FloatingPointError, ValueError) as exc:
        raise SingularSection(f"factorisation failed: {exc}") from None
    vnorm = math.sqrt(grid.h) * np.linalg.norm(vv)
    res = math.sqrt(grid.h) * np.linalg.norm(A @ u - rhs) / (vnorm if vnorm > 0 else 1.0)
    return FSMSolution(u, x[idx], float(res), cond)


def manufactured_study(op, u_exact, n_list=(8, 16, 32, 48), m=8, pad_factor=DEFAULT_PAD, cap=DEFAULT_CAP):
    """Manufactured-solution errors ``||u_n - u|| / ||u||`` along ``n_list``.

    One grid, sized for the largest window, is used throughout; the right-hand
    side is ``v = A u`` computed with the assembled operator on that grid.

    Returns
    -------
    list of (n, relative error, residual, cond)
    """
    if isinstance(op, FiniteSection):
        op = op.inner
    if isinstance(op, Const):
        op = op.op
    grid = make_grid(max(n_list), m, pad_factor, cap)
    x = grid.nodes
    u = _rhs_values(u_exact, x)
    v = assemble(op, grid).matrix @ u
    unorm = np.linalg.norm(u)
    out = []
    for n in n_list:
        sol = solve_fsm(FiniteSection(Const(op)), v, n, grid)
        full = np.zeros_like(u)
        full[grid.window(n)] = sol.u
        out.append((n, float(np.linalg.norm(full - u) / unorm), sol.residual, sol.cond))
    return out


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    if isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def write_csv(path, rows):
    """Write rows (first row is the header); floats use ``repr`` for exactness."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in rows:
            w.writerow([_cell(v) for v in row])
