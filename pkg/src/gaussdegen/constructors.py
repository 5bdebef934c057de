"""Cones, twisted cones from plane families in P^4, twisted cylinders, and
the checks that go with them (pencil foliation, osculating flags, cylinder
detection).

Constructions are done symbolically with sympy and emitted as ordinary
variety specs, so anything built here can be written to a file and
re-analysed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy as sp

from . import dsl
from .dsl import BinOp, Func, Neg, Num, Pow, Var, VarietySpec
from .engine import NotApplicable, focus_map, gauss_rank, _locals
from .jets import to_fraction
from .proj import (
    HomPoint,
    ProjSubspace,
    containment_residual,
    meet,
    null_space,
    numerical_rank,
    point_distance,
    subspace_angle,
)

PHI_RANGE = (Fraction(0), Fraction("3.14159"))
S_RANGE = (Fraction(1, 5), Fraction(1))


class ConstructionError(ValueError):
    pass


# ----------------------------------------------------- sympy bridge

_T = [sp.Symbol(f"t{i}") for i in range(1, 5)]


def to_sympy(node):
    if isinstance(node, Num):
        return sp.Rational(node.value.numerator, node.value.denominator)
    if isinstance(node, Var):
        return _T[node.index - 1]
    if isinstance(node, Neg):
        return -to_sympy(node.arg)
    if isinstance(node, Pow):
        return to_sympy(node.base) ** node.exponent
    if isinstance(node, Func):
        return getattr(sp, node.name)(to_sympy(node.arg))
    if isinstance(node, BinOp):
        a, b = to_sympy(node.left), to_sympy(node.right)
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b}[node.op]
    raise TypeError(f"cannot convert {node!r}")


def from_sympy(expr):
    """Convert a sympy expression back to a DSL tree."""
    if expr.is_Rational:
        return dsl._const(Fraction(int(expr.p), int(expr.q)))
    if expr.is_Symbol:
        name = expr.name
        if name.startswith("t") and name[1:].isdigit():
            return Var(int(name[1:]))
        raise ConstructionError(f"unexpected symbol {name}")
    if expr is sp.E:
        return Func("exp", Num(Fraction(1)))
    if isinstance(expr, (sp.sin, sp.cos, sp.exp)):
        return Func(type(expr).__name__, from_sympy(expr.args[0]))
    if expr.is_Add:
        terms = sorted(expr.args, key=sp.default_sort_key)
        node = from_sympy(terms[0])
        for term in terms[1:]:
            coeff, _ = term.as_coeff_Mul()
            if coeff < 0:
                node = BinOp("-", node, from_sympy(-term))
            else:
                node = BinOp("+", node, from_sympy(term))
        return node
    if expr.is_Mul:
        coeff, rest = expr.as_coeff_Mul()
        if coeff < 0:
            return Neg(from_sympy(-expr))
        factors = list(sp.Mul.make_args(rest))
        num = [f for f in factors if not (f.is_Pow and f.exp.is_negative)]
        den = [f.base ** (-f.exp) for f in factors if f.is_Pow and f.exp.is_negative]
        if coeff != 1:
            num = [coeff] + num
        node = from_sympy(num[0]) if num else Num(Fraction(1))
        for f in num[1:]:
            node = BinOp("*", node, from_sympy(f))
        for f in den:
            node = BinOp("/", node, from_sympy(f))
        return node
    if expr.is_Pow:
        if expr.base is sp.E:
            return Func("exp", from_sympy(expr.exp))
        if not expr.exp.is_Integer:
            raise ConstructionError(f"non-integer power in {expr}")
        return Pow(from_sympy(expr.base), int(expr.exp))
    raise ConstructionError(f"cannot express {expr} in the expression language")


def _compact(expr, var=None):
    """Expand and, for polynomials, rewrite in Horner form."""
    expr = sp.expand(expr)
    if var is not None and expr.is_polynomial(var) and expr.free_symbols <= {var}:
        return sp.horner(expr, wrt=var)
    return expr


# ------------------------------------------------------- plane families


@dataclass(frozen=True)
class PlaneFamily:
    """One-parameter family of 2-planes in P^4 spanned by three curves."""

    curves: tuple  # three tuples of 5 expression trees, parameter t1
    domain: tuple  # (lo, hi) as Fractions

    def __post_init__(self):
        if len(self.curves) != 3 or any(len(c) != 5 for c in self.curves):
            raise ConstructionError("a plane family needs three curves in P^4")

    @property
    def lower(self) -> float:
        return float(self.domain[0])

    @property
    def upper(self) -> float:
        return float(self.domain[1])

    def specs(self) -> list[VarietySpec]:
        return [VarietySpec(1, 4, tuple(c), (self.domain,)) for c in self.curves]

    def matrices(self, t):
        """(P, P') at t: rows are the spanning points and their derivatives."""
        vals, ders = [], []
        for spec in self.specs():
            x, X1 = spec.derivatives(np.array([t], dtype=float), 1)
            vals.append(x)
            ders.append(X1[0])
        return np.array(vals), np.array(ders)

    def plane(self, t) -> ProjSubspace:
        return ProjSubspace.span(self.matrices(t)[0])

    def is_general_at(self, t, tol: float = 1e-9) -> bool:
        P, dP = self.matrices(t)
        return numerical_rank(P, tol) == 3 and numerical_rank(np.vstack([P, dP]), tol) == 5

    def sample_points(self, k: int = 11) -> np.ndarray:
        return np.linspace(self.lower, self.upper, k)

    def text(self) -> str:
        head = dsl.header_text(1, 4, (self.domain,))
        return head + "\n" + "\n".join(dsl.tuple_text(c) for c in self.curves) + "\n"


def parse_family(text: str) -> PlaneFamily:
    n, N, domain, tuples = dsl.parse_tuples(text)
    if n != 1 or N != 4:
        raise ConstructionError("a plane family file needs 'params n=1 ambient N=4'")
    if len(tuples) != 3:
        raise ConstructionError(f"a plane family file needs three tuples, found {len(tuples)}")
    return PlaneFamily(tuple(tuples), domain[0])


def family_from_strings(rows, domain) -> PlaneFamily:
    curves = tuple(tuple(dsl.parse_expr(e, 1) for e in row) for row in rows)
    return PlaneFamily(curves, (to_fraction(domain[0]), to_fraction(domain[1])))


def characteristic_point(fam: PlaneFamily, t, tol: float = 1e-9) -> HomPoint:
    """The point where the plane at t meets the infinitesimally close plane."""
    P, dP = fam.matrices(t)
    if numerical_rank(P, tol) != 3:
        raise ConstructionError(f"spanning points are dependent at t={t}")
    quotient = null_space(P, tol)  # rows span the complement of the plane
    K = quotient @ dP.T  # 2 x 3
    scale = np.linalg.norm(dP)
    s = np.linalg.svd(K, compute_uv=False) if scale > 0 else np.zeros(0)
    rank = int(np.sum(s > tol * scale)) if scale > 0 else 0
    if 3 - rank != 1:
        raise ConstructionError(
            f"characteristic point undefined at t={t}: {3 - rank}-dimensional solution space"
        )
    lam = np.linalg.svd(K)[2][-1]
    return HomPoint(lam @ P)


def _check_general(fam: PlaneFamily, k: int = 11) -> None:
    for t in fam.sample_points(k):
        characteristic_point(fam, t)
        if not fam.is_general_at(t):
            raise ConstructionError(f"plane family is not general at t={t}: planes and derivatives do not span P^4")


def _characteristic_symbolic(fam: PlaneFamily):
    """Symbolic A(t) as a list of five sympy expressions in t1."""
    t = _T[0]
    P = [sp.Matrix([to_sympy(e) for e in c]) for c in fam.curves]
    dP = [p.diff(t) for p in P]
    rows = []
    for cols in itertools.combinations(range(5), 4):
        row = []
        for i in range(3):
            M = sp.Matrix.hstack(P[0], P[1], P[2], dP[i])[list(cols), :]
            row.append(sp.expand(M.det()))
        rows.append(row)
    samples = fam.sample_points(9)
    num_rows = [
        np.array([[float(e.subs(t, s)) for e in row] for s in samples]) for row in rows
    ]
    best, best_score = None, -1.0
    for a, b in itertools.combinations(range(len(rows)), 2):
        cr = np.cross(num_rows[a], num_rows[b])
        scale = np.linalg.norm(num_rows[a], axis=1) * np.linalg.norm(num_rows[b], axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = float(np.min(np.linalg.norm(cr, axis=1) / scale))
        if np.isfinite(score) and score > best_score:
            best, best_score = (a, b), score
    if best is None or best_score < 1e-8:
        raise ConstructionError("characteristic point undefined on the domain")
    ra, rb = (sp.Matrix(rows[k]) for k in best)
    lam = ra.cross(rb)
    A = [sp.expand(sum(lam[i] * P[i][m] for i in range(3))) for m in range(5)]
    if all(c.is_polynomial(t) for c in A):
        g = sp.gcd_list([c for c in A if c != 0])
        A = [sp.cancel(c / g) for c in A]
    return A


def _scale_to_unit(exprs, t_mid: float):
    """Divide by a rational approximation of the signed norm at ``t_mid``."""
    vals = np.array([float(e.subs(_T[0], t_mid)) for e in exprs])
    norm = float(np.linalg.norm(vals)) * (1.0 if vals[np.argmax(np.abs(vals))] >= 0 else -1.0)
    c = sp.Rational(Fraction(norm).limit_denominator(1000)) if norm != 0 else sp.Integer(1)
    return [e / c for e in exprs]


def build_twisted_cone(fam: PlaneFamily, phi_range=PHI_RANGE, s_range=S_RANGE) -> VarietySpec:
    """Union of the pencils of lines centred at A(t) in the planes of ``fam``.

    Parameters of the result: ``t1`` = family parameter, ``t2`` = pencil
    angle, ``t3`` = position on the line from A(t) (s = 0 is the focus).
    """
    _check_general(fam)
    t, phi, s = _T[0], _T[1], _T[2]
    A = _characteristic_symbolic(fam)
    t_mid = 0.5 * (fam.lower + fam.upper)
    A = _scale_to_unit(A, t_mid)
    P = [[to_sympy(e) for e in c] for c in fam.curves]
    # two spanning curves that together with A(t) span each plane
    best, best_score = None, -1.0
    for i, j in itertools.combinations(range(3), 2):
        score = np.inf
        for tv in fam.sample_points(9):
            m = np.array([[float(e.subs(t, tv)) for e in row] for row in (A, P[i], P[j])])
            m = m / np.linalg.norm(m, axis=1, keepdims=True)
            score = min(score, np.linalg.svd(m, compute_uv=False)[-1])
        if score > best_score:
            best, best_score = (i, j), score
    if best_score < 1e-6:
        raise ConstructionError("no pair of spanning curves completes A(t) to the plane")
    Q1 = _scale_to_unit(P[best[0]], t_mid)
    Q2 = _scale_to_unit(P[best[1]], t_mid)
    exprs = []
    for m in range(5):
        a = _compact(A[m], t)
        q1 = _compact(Q1[m], t)
        q2 = _compact(Q2[m], t)
        node = _combine(a, q1, q2, phi, s)
        exprs.append(node)
    domain = (fam.domain, tuple(map(to_fraction, phi_range)), tuple(map(to_fraction, s_range)))
    return VarietySpec(3, 4, tuple(exprs), domain)


def _combine(a, q1, q2, phi, s):
    """DSL tree for (1 - s) a + s (cos(phi) q1 + sin(phi) q2)."""
    one_minus_s = BinOp("-", Num(Fraction(1)), Var(3))
    parts = []
    if a != 0:
        parts.append(BinOp("*", one_minus_s, from_sympy(a)))
    pencil = []
    if q1 != 0:
        pencil.append(BinOp("*", Func("cos", Var(2)), from_sympy(q1)))
    if q2 != 0:
        pencil.append(BinOp("*", Func("sin", Var(2)), from_sympy(q2)))
    if pencil:
        inner = pencil[0] if len(pencil) == 1 else BinOp("+", pencil[0], pencil[1])
        parts.append(BinOp("*", Var(3), inner))
    if not parts:
        return Num(Fraction(0))
    return parts[0] if len(parts) == 1 else BinOp("+", parts[0], parts[1])


# ------------------------------------------------------------------ cones


def build_cone(vertex: ProjSubspace, directrix: VarietySpec, s_range=(-1, 1)) -> VarietySpec:
    """Cone joining ``vertex`` to the directrix: x = c(u) + sum_j s_j v_j."""
    if vertex.ambient_dim != directrix.N:
        raise ConstructionError("vertex and directrix live in different spaces")
    k = vertex.dim + 1
    n = directrix.n + k
    if n > dsl.MAX_PARAMS:
        raise ConstructionError(f"cone would need {n} parameters (max {dsl.MAX_PARAMS})")
    rng = np.random.default_rng(1)
    pts = directrix.lower + rng.random((8, directrix.n)) * (directrix.upper - directrix.lower)
    for u in np.vstack([directrix.center, pts]):
        c = directrix.evaluate(u)
        if numerical_rank(np.vstack([vertex.basis, c]), 1e-9) < k + 1:
            raise ConstructionError(f"vertex meets the directrix at u={u.tolist()}")
    basis = vertex.basis / np.max(np.abs(vertex.basis), axis=1, keepdims=True)
    exprs = []
    for m, e in enumerate(directrix.exprs):
        node = e
        for j in range(k):
            coeff = to_fraction(float(basis[j, m]))
            if coeff == 0:
                continue
            term = Var(directrix.n + j + 1)
            if coeff != 1:
                term = BinOp("*", dsl._const(coeff), term)
            node = BinOp("+", node, term)
        exprs.append(node)
    rng_s = (to_fraction(s_range[0]), to_fraction(s_range[1]))
    return VarietySpec(n, directrix.N, tuple(exprs), tuple(directrix.domain) + (rng_s,) * k)


# ------------------------------------------------------ osculating flags


@dataclass
class OsculatingFlag:
    point: HomPoint
    line: ProjSubspace
    plane: ProjSubspace
    hyperplane: ProjSubspace

    @property
    def dims(self):
        return (0, self.line.dim, self.plane.dim, self.hyperplane.dim)


def osculating_flag(curve: VarietySpec, t, tol: float = 1e-10) -> OsculatingFlag:
    """Point, tangent line, osculating plane and hyperplane of a curve in P^4."""
    if curve.n != 1:
        raise ConstructionError("osculating flags are defined for curves")
    x, X1, X2, X3 = curve.derivatives(np.array([float(t)]), 3)
    vecs = np.vstack([x, X1[0], X2[0, 0], X3[0, 0, 0]])
    for k in range(2, 5):
        if numerical_rank(vecs[:k], tol) < k:
            raise ConstructionError(f"curve is degenerate at t={t}: derivatives up to order {k - 1} are dependent")
    return OsculatingFlag(
        HomPoint(x),
        ProjSubspace(vecs[:2]),
        ProjSubspace(vecs[:3]),
        ProjSubspace(vecs[:4]),
    )


# -------------------------------------------------------- twisted cylinders


def build_twisted_cylinder(curve_in_hyperplane: VarietySpec, plane_family: PlaneFamily,
                           **kwargs) -> VarietySpec:
    """Twisted cone from planes tangent to a curve in {x4 = 0}.

    With {x4 = 0} taken as the hyperplane at infinity the result is a twisted
    cylinder in affine 4-space.
    """
    curve = curve_in_hyperplane
    if curve.n != 1 or curve.N != 4:
        raise ConstructionError("the focal curve must be a curve in P^4")
    for t in plane_family.sample_points(11):
        c, dc = curve.derivatives(np.array([t]), 1)
        if abs(c[4]) > 1e-12 * np.linalg.norm(c):
            raise ConstructionError(f"curve leaves the hyperplane x4 = 0 at t={t}")
        P, dP = plane_family.matrices(t)
        plane = ProjSubspace.span(P)
        if containment_residual(plane, np.vstack([c, dc[0]])) > 1e-9:
            raise ConstructionError(f"plane at t={t} does not contain the tangent line of the curve")
        if np.max(np.abs(P[:, 4])) <= 1e-12 * np.linalg.norm(P):
            raise ConstructionError(f"plane at t={t} lies in the hyperplane x4 = 0")
        if numerical_rank(np.vstack([P, dP]), 1e-9) < 5:
            raise ConstructionError(f"consecutive planes at t={t} lie in a 3-dimensional subspace")
    return build_twisted_cone(plane_family, **kwargs)


def _focal_curve(X: VarietySpec, ts, tol: float = 1e-8) -> np.ndarray:
    rest = X.center[1:]
    return np.array([focus_map(X, np.concatenate([[t], rest]), tol).coords for t in ts])


def osculating_hyperplanes(X: VarietySpec, ts, rel_step: float = 0.02) -> list[ProjSubspace]:
    """Osculating hyperplanes of the focal curve of a twisted cone.

    Each is the span of four nearby foci, which converges to the osculating
    hyperplane and is exact when the curve lies in a hyperplane.
    """
    h = rel_step * float(X.upper[0] - X.lower[0])
    out = []
    for t in ts:
        pts = _focal_curve(X, t + h * np.array([-1.5, -0.5, 0.5, 1.5]))
        pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        if numerical_rank(pts, 1e-12) < 4:
            raise NotApplicable(f"focal curve degenerate near t={t}")
        out.append(ProjSubspace(pts))
    return out


def detect_cylinder(X: VarietySpec, tol: float = 1e-8, t_grid=None) -> bool:
    """True iff the osculating hyperplane of the focal curve is stationary."""
    if X.n != 3 or X.N != 4:
        raise NotApplicable("cylinder detection is for 3-folds in P^4")
    lo, hi = X.lower[0], X.upper[0]
    margin = 0.1 * (hi - lo)
    ts = np.linspace(lo + margin, hi - margin, 7) if t_grid is None else np.asarray(t_grid, float)
    foci = _focal_curve(X, ts)
    foci = foci / np.linalg.norm(foci, axis=1, keepdims=True)
    if numerical_rank(foci, 1e-8) < 2:
        raise NotApplicable("focal curve is a point (cone)")
    planes = osculating_hyperplanes(X, ts)
    return max(subspace_angle(planes[0], p) for p in planes[1:]) < tol


# ------------------------------------------------------------ pencils


@dataclass
class PencilReport:
    passed: bool
    max_plane_angle: float
    max_line_residual: float
    centers: list
    reason: str = ""


def verify_pencil_foliation(X: VarietySpec, t_grid=None, tol: float = 1e-8,
                            fiber_samples: int = 4, rank_tol: float = 1e-8) -> PencilReport:
    """Check that each fiber t = const is a pencil of lines in a fixed plane.

    The fiber tangent plane is the span of x and its derivatives along the
    non-t parameters; lines are the leaves found by ``gauss_rank``.
    """
    lo, hi = X.lower, X.upper
    inner_lo = lo + 0.1 * (hi - lo)
    inner_hi = hi - 0.1 * (hi - lo)
    ts = np.linspace(inner_lo[0], inner_hi[0], 5) if t_grid is None else np.asarray(t_grid, float)
    if X.n == 2:
        return PencilReport(True, 0.0, 0.0, [], "fibers are single generators")
    fiber_axes = [np.linspace(a, b, fiber_samples) for a, b in zip(inner_lo[1:], inner_hi[1:])]
    max_angle = 0.0
    max_line = 0.0
    centers = []
    reason = ""
    for t in ts:
        pts = np.array([[t, *rest] for rest in itertools.product(*fiber_axes)])
        locs = _locals(X, pts, 1)
        planes = [ProjSubspace.span(np.vstack([loc.x, loc.X1[1:]])) for loc in locs]
        for p in planes[1:]:
            if p.dim != planes[0].dim:
                max_angle = np.pi / 2
            else:
                max_angle = max(max_angle, subspace_angle(planes[0], p))
        lines = []
        for u in pts:
            td = gauss_rank(X, u, rank_tol)
            if td.leaf.dim != 1:
                reason = f"leaf through u={u.tolist()} is not a line (rank {td.rank})"
                break
            lines.append(td.leaf)
        if reason:
            max_line = float("inf")
            continue
        center = None
        for a, b in itertools.combinations(range(len(lines)), 2):
            if subspace_angle(lines[a], lines[b]) > 1e-3:
                center = meet(lines[a], lines[b], 1e-7)
                break
        if center is None or center.dim != 0:
            reason = reason or f"fiber lines at t={t} have no common point"
            max_line = float("inf")
            continue
        c = center.basis[0]
        centers.append(HomPoint(c))
        for line in lines:
            max_line = max(max_line, containment_residual(line, c))
    passed = max_angle < tol and max_line < tol
    if not passed and not reason:
        reason = "fiber tangent plane varies" if max_angle >= tol else "fiber lines miss the centre"
    return PencilReport(passed, float(max_angle), float(max_line), centers, reason)


def characteristic_distance(X: VarietySpec, fam: PlaneFamily, ts) -> float:
    """Largest distance between the focus of X and A(t) of the family."""
    rest = X.center[1:]
    worst = 0.0
    for t in ts:
        f = focus_map(X, np.concatenate([[t], rest]))
        worst = max(worst, point_distance(f, characteristic_point(fam, t)))
    return worst
