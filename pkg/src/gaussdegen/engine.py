"""Gauss rank, Monge-Ampere leaves, adapted frames, the matrices B and C_a,
focal polynomials and the classification of varieties with one-dimensional
leaves.

Conventions: a parametrization ``x(u)`` gives homogeneous coordinates; the
parameter-space directions are split into leaf directions (common kernel of
the second fundamental forms) and transverse directions.  The adapted frame
is ``A_0 = x``, ``A_a = d_{v_a} x`` for leaf directions ``v_a``, ``A_p =
d_{w_p} x`` for transverse directions ``w_p`` and the normal covectors of the
tangent space as the remaining points.  ``C_a[p, q]`` is the ``A_p``
component of ``d_{w_q} A_a``; ``B[p, q]`` the normal component of ``d_{w_q}
A_p``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dsl import EvaluationError, VarietySpec
from .proj import Frame, HomPoint, ProjSubspace, null_space, numerical_rank

RANK_TOL = 1e-8
ROOT_CLUSTER_TOL = 1e-8
FD_RANK_TOL = 1e-5
ZERO_MATRIX_TOL = 1e-11


class SingularPointError(ValueError):
    """The first-derivative matrix drops rank: the point lies on a focal locus."""


class FrameError(ValueError):
    pass


class NotApplicable(ValueError):
    pass


class CaseTag(str, enum.Enum):
    FOCAL_SURFACE = "FOCAL_SURFACE"
    TWISTED_CONE = "TWISTED_CONE"
    TWISTED_CYLINDER = "TWISTED_CYLINDER"
    NON_DEGENERATE = "NON_DEGENERATE"
    CONE = "CONE"
    UNDETERMINED = "UNDETERMINED"


@dataclass
class TangentData:
    point: HomPoint
    tangent: ProjSubspace
    rank: int | None = None
    leaf: ProjSubspace | None = None
    leaf_directions: np.ndarray | None = None  # n x l, orthonormal columns
    transverse_directions: np.ndarray | None = None  # n x r
    second_forms: np.ndarray | None = None  # (N-n) x n x n
    normals: np.ndarray | None = None  # (N-n) x (N+1)

    @property
    def n(self) -> int:
        return self.tangent.dim

    @property
    def leaf_dim(self) -> int | None:
        return None if self.rank is None else self.n - self.rank


# ----------------------------------------------------------- local data


@dataclass
class _Local:
    """Derivative arrays of the parametrization at one parameter point."""

    u: np.ndarray
    x: np.ndarray
    X1: np.ndarray
    X2: np.ndarray | None = None
    X3: np.ndarray | None = None

    @property
    def T(self) -> np.ndarray:
        return np.vstack([self.x, self.X1])


def _locals(spec: VarietySpec, U, order: int) -> list[_Local]:
    """Evaluate derivative arrays at a batch of points in one jet pass."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    for u in U:
        if not spec.contains(u):
            raise EvaluationError(f"parameter point {u.tolist()} is outside the domain")
    arrays = spec.derivatives(U, order)
    out = []
    for k, u in enumerate(U):
        parts = [a[k] for a in arrays] + [None] * (4 - len(arrays))
        out.append(_Local(u, *parts[:4]))
    return out


def _check_regular(loc: _Local) -> None:
    T = loc.T
    s = np.linalg.svd(T, compute_uv=False)
    n = loc.X1.shape[0]
    if s[-1] <= 1e-10 * s[0] or T.shape[0] != n + 1:
        raise SingularPointError(
            f"first-derivative matrix has rank < {n + 1} at u={loc.u.tolist()}"
        )


def _normals(loc: _Local) -> np.ndarray:
    T = loc.T
    _, _, vt = np.linalg.svd(T)
    return vt[T.shape[0] :]


def _second_forms(loc: _Local, normals: np.ndarray) -> np.ndarray:
    return np.einsum("am,ijm->aij", normals, loc.X2)


def _split_directions(forms: np.ndarray, scale: float, tol: float):
    """Leaf (common kernel) and transverse directions in parameter space."""
    k, n, _ = forms.shape
    stacked = forms.reshape(k * n, n)
    if stacked.size == 0:
        return np.eye(n), np.zeros((n, 0))
    _, s, vt = np.linalg.svd(stacked)
    s = np.concatenate([s, np.zeros(n - s.size)])
    rank = int(np.sum(s > tol * scale)) if scale > 0 else 0
    return vt[rank:].T, vt[:rank].T


def _tangent_from_local(loc: _Local, tol: float) -> TangentData:
    _check_regular(loc)
    return TangentData(point=HomPoint(loc.x), tangent=ProjSubspace.span(loc.T))


def _rank_from_local(loc: _Local, tol: float) -> TangentData:
    td = _tangent_from_local(loc, tol)
    normals = _normals(loc)
    forms = _second_forms(loc, normals)
    scale = float(np.linalg.norm(loc.X2))
    V, W = _split_directions(forms, scale, tol)
    td.rank = W.shape[1]
    td.leaf_directions = V
    td.transverse_directions = W
    td.second_forms = forms
    td.normals = normals
    td.leaf = ProjSubspace.span(np.vstack([loc.x, V.T @ loc.X1]))
    return td


def tangent_space(spec: VarietySpec, u, tol: float = RANK_TOL) -> TangentData:
    """Tangent subspace at ``u`` (rank and leaf left unset)."""
    return _tangent_from_local(_locals(spec, u, 1)[0], tol)


def gauss_rank(spec: VarietySpec, u, tol: float = RANK_TOL) -> TangentData:
    """Rank of the Gauss map at ``u`` and the leaf through ``x(u)``.

    The leaf directions are the common kernel of the second fundamental
    forms; singular values below ``tol`` times the size of the Hessian
    stack count as zero.
    """
    return _rank_from_local(_locals(spec, u, 2)[0], tol)


# ------------------------------------------------------------ the frame


@dataclass
class AdaptedFrame:
    frame: Frame
    directions: np.ndarray  # n x n, columns: leaf then transverse
    l: int
    residual: float  # max relative size of the A_{n+1..N} part of dA_0, dA_a
    shifts: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def r(self) -> int:
        return self.directions.shape[0] - self.l


def _frame_from(loc: _Local, td: TangentData) -> AdaptedFrame:
    if td.rank is None:
        raise FrameError("gauss rank not computed")
    if td.rank < 1:
        raise FrameError("rank 0: no transverse directions, the variety is a plane")
    M = np.hstack([td.leaf_directions, td.transverse_directions])
    cols = [loc.x] + [M[:, k] @ loc.X1 for k in range(M.shape[1])] + list(td.normals)
    F = np.column_stack(cols)
    try:
        frame = Frame(F)
    except ValueError as exc:
        raise FrameError(f"cannot complete the frame: {exc}") from None
    l = td.leaf_directions.shape[1]
    n = M.shape[0]
    # conditions omega_0^{n+1} = 0 and omega_a^{n+1} = 0
    resid = 0.0
    scale2 = max(float(np.linalg.norm(loc.X2)), 1e-300)
    for i in range(n):
        for a in range(l):
            v = np.einsum("j,jkm->km", td.leaf_directions[:, a], loc.X2)[i]
            comp = td.normals @ v
            resid = max(resid, float(np.linalg.norm(comp)) / scale2)
        comp = td.normals @ loc.X1[i]
        resid = max(resid, float(np.linalg.norm(comp) / np.linalg.norm(loc.X1[i])))
    return AdaptedFrame(frame, M, l, resid)


def adapted_frame(spec: VarietySpec, u, tangent_data: TangentData | None = None,
                  tol: float = RANK_TOL) -> AdaptedFrame:
    loc = _locals(spec, u, 2)[0]
    td = tangent_data if tangent_data is not None else _rank_from_local(loc, tol)
    return _frame_from(loc, td)


# ------------------------------------------------- fundamental matrices


@dataclass
class FundamentalData:
    frame: AdaptedFrame
    B: np.ndarray  # r x r, dominant normal direction
    B_all: list  # one r x r matrix per normal
    C: list  # l matrices r x r, C[a][p, q] = c^p_{aq}
    symmetry_residuals: list  # one per (normal, i) pair, i = 0..l
    condition_number: float

    @property
    def r(self) -> int:
        return self.B.shape[0]

    @property
    def l(self) -> int:
        return len(self.C)

    @property
    def max_symmetry_residual(self) -> float:
        return max(self.symmetry_residuals, default=0.0)


def symmetry_residual(B: np.ndarray, C: np.ndarray) -> float:
    """Relative asymmetry of ``B @ C``; zero when C vanishes numerically."""
    H = B @ C
    norm = np.linalg.norm(H)
    if np.linalg.norm(C) <= ZERO_MATRIX_TOL or norm == 0.0:
        return 0.0
    return float(np.linalg.norm(H - H.T) / norm)


def _fundamental_from(loc: _Local, td: TangentData, shift_to_focus: bool = True) -> FundamentalData:
    af = _frame_from(loc, td)
    n = loc.X1.shape[0]
    l, r = af.l, af.r
    V = td.leaf_directions
    W = td.transverse_directions
    normals = td.normals
    forms = td.second_forms
    F = af.frame.matrix
    Finv = np.linalg.inv(F)

    # B^alpha[p, q] = normal component of d_{w_q} A_p
    B_all = [W.T @ forms[k] @ W for k in range(normals.shape[0])]
    B_all = [0.5 * (b + b.T) for b in B_all]
    if len(B_all) == 1:
        B = B_all[0]
    else:
        # dominant combination of the normal components
        stack = np.array([b.ravel() for b in B_all])
        _, sv, vt = np.linalg.svd(stack, full_matrices=False)
        B = (sv[0] * vt[0]).reshape(r, r)

    # derivative of the leaf field along transverse directions
    T = loc.T
    Tpinv = np.linalg.pinv(T)
    stacked_forms = forms.reshape(-1, n)
    forms_pinv = np.linalg.pinv(stacked_forms, rcond=1e-10)
    C = [np.zeros((r, r)) for _ in range(l)]
    for q in range(r):
        d = W[:, q]
        dT = np.vstack([d @ loc.X1, np.einsum("j,ijm->im", d, loc.X2)])
        dnormals = -(Tpinv @ (dT @ normals.T)).T  # rows: derivative of each normal
        dforms = np.einsum("am,ijm->aij", dnormals, loc.X2) + np.einsum(
            "am,ijkm,k->aij", normals, loc.X3, d
        )
        for a in range(l):
            v = V[:, a]
            dv = -forms_pinv @ np.einsum("aij,j->ai", dforms, v).reshape(-1)
            dA = np.einsum("i,ijm,j->m", v, loc.X2, d) + dv @ loc.X1
            comps = Finv @ dA
            C[a][:, q] = comps[1 + l : 1 + n]

    shifts = np.zeros(l)
    if shift_to_focus and r >= 2:
        # move A_a to the centroid of the foci on the leaf
        for a in range(l):
            shifts[a] = np.trace(C[a]) / r
            C[a] = C[a] - shifts[a] * np.eye(r)
        F = F.copy()
        for a in range(l):
            F[:, 1 + a] = F[:, 1 + a] - shifts[a] * F[:, 0]
        af = AdaptedFrame(Frame(F), af.directions, l, af.residual, shifts)
    else:
        af.shifts = shifts

    residuals = []
    for b in B_all:
        residuals.append(symmetry_residual(b, np.eye(r)))
        residuals.extend(symmetry_residual(b, c) for c in C)
    return FundamentalData(af, B, B_all, C, residuals, af.frame.condition_number)


def fundamental_matrices(spec: VarietySpec, u, frame: AdaptedFrame | None = None,
                         tol: float = RANK_TOL, shift_to_focus: bool = True) -> FundamentalData:
    """B and C_a at ``u``.

    For r >= 2 the leaf points ``A_a`` are moved along the leaf to the
    centroid of its foci, so an r-fold focus shows up as nilpotent ``C_a``.
    ``frame`` is accepted for interface symmetry; the frame is always
    rebuilt from the same data, so passing one only checks consistency.
    """
    loc = _locals(spec, u, 3)[0]
    td = _rank_from_local(loc, tol)
    fd = _fundamental_from(loc, td, shift_to_focus)
    if frame is not None and frame.l != fd.l:
        raise FrameError("frame does not match the local leaf structure")
    return fd


# ---------------------------------------------------- focal polynomial


@dataclass
class FocalPolynomial:
    """``det(x0 I + sum_a x_a C_a)`` as {exponents: coefficient}."""

    r: int
    l: int
    coeffs: dict
    scale: float = 1.0  # max(1, max_a |C_a|); x^a carries the units of 1/C

    @property
    def leading(self) -> float:
        return self.coeffs.get((self.r,) + (0,) * self.l, 0.0)

    def relative_residual(self) -> float:
        lead = abs(self.leading)
        # a monomial of degree d in the x^a scales like |C|^d
        others = [abs(c) / self.scale ** (self.r - e[0]) for e, c in self.coeffs.items() if e[0] != self.r]
        return max(others, default=0.0) / lead if lead else float("inf")

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(c * np.prod(x ** np.array(e)) for e, c in self.coeffs.items()))

    def generator_roots(self) -> np.ndarray:
        """Roots in x0 with x1 = 1 (one-dimensional leaves)."""
        if self.l != 1:
            raise NotApplicable("roots on a generator need one-dimensional leaves")
        poly = [self.coeffs.get((k, self.r - k), 0.0) for k in range(self.r, -1, -1)]
        return np.roots(poly)

    def as_list(self) -> list:
        return [[list(e), float(c)] for e, c in sorted(self.coeffs.items(), reverse=True)]


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0.0) + c1 * c2
    return out


def _perm_sign(perm) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def focal_polynomial(fd_or_C) -> FocalPolynomial:
    """Expand ``det(x0 I + x^a C_a)`` exactly (Leibniz expansion)."""
    C = fd_or_C.C if isinstance(fd_or_C, FundamentalData) else [np.asarray(c, float) for c in fd_or_C]
    l = len(C)
    r = C[0].shape[0]
    nv = l + 1

    def entry(p, q):
        poly = {}
        if p == q:
            e = [0] * nv
            e[0] = 1
            poly[tuple(e)] = 1.0
        for a in range(l):
            if C[a][p, q] != 0.0:
                e = [0] * nv
                e[a + 1] = 1
                poly[tuple(e)] = float(C[a][p, q])
        return poly

    total: dict = {}
    for perm in itertools.permutations(range(r)):
        term = {(0,) * nv: float(_perm_sign(perm))}
        for p in range(r):
            term = _poly_mul(term, entry(p, perm[p]))
            if not term:
                break
        for e, c in term.items():
            total[e] = total.get(e, 0.0) + c
    # keep every monomial of degree r so the coefficient table is complete
    for e in _exponents(r, nv):
        total.setdefault(e, 0.0)
    scale = max([1.0] + [float(np.linalg.norm(c, 2)) for c in C])
    return FocalPolynomial(r, l, total, scale)


def _exponents(deg: int, nv: int):
    for combo in itertools.combinations_with_replacement(range(nv), deg):
        e = [0] * nv
        for i in combo:
            e[i] += 1
        yield tuple(e)


def is_r_fold_focus(fp: FocalPolynomial, tol: float = RANK_TOL) -> bool:
    return fp.relative_residual() < tol


def nilpotency_and_r1(fd_or_C, tol: float = RANK_TOL, samples: int = 20, seed: int = 0):
    """Nilpotency of every C_a and of bundle samples, and the maximal bundle rank.

    Returns ``(nilpotent, r1, strict)`` where ``strict`` records whether
    ``r1 < r - 1`` holds in addition to ``r1 <= r - 1``.
    """
    C = fd_or_C.C if isinstance(fd_or_C, FundamentalData) else [np.asarray(c, float) for c in fd_or_C]
    r = C[0].shape[0]
    rng = np.random.default_rng(seed)
    mats = list(C) + [sum(w * c for w, c in zip(rng.standard_normal(len(C)), C)) for _ in range(samples)]
    nilpotent = True
    r1 = 0
    for m in mats:
        norm = np.linalg.norm(m)
        if norm <= ZERO_MATRIX_TOL:
            continue
        if np.linalg.norm(np.linalg.matrix_power(m / norm, r)) > tol:
            nilpotent = False
        r1 = max(r1, numerical_rank(m, tol))
    return nilpotent, r1, r1 < r - 1


# ------------------------------------------------------------ the focus


def _power_deviation(fp: FocalPolynomial, mean: float, scale: float) -> float:
    """Relative coefficient distance of a generator polynomial from a_r (x0 - mean x1)^r."""
    r = fp.r
    lead = fp.coeffs.get((r, 0), 0.0)
    if lead == 0.0:
        return float("inf")
    dev = 0.0
    for k in range(r):
        want = lead * math.comb(r, k) * (-mean) ** (r - k)
        dev = max(dev, abs(fp.coeffs.get((k, r - k), 0.0) - want) / (abs(lead) * scale ** (r - k)))
    return dev


def _focus_from(loc: _Local, td: TangentData, root_tol: float = ROOT_CLUSTER_TOL):
    if td.rank is None or td.leaf_directions.shape[1] != 1:
        raise NotApplicable("the focus map needs one-dimensional leaves")
    fd = _fundamental_from(loc, td)
    fp = focal_polynomial(fd)
    r = fp.r
    lead = fp.coeffs.get((r, 0), 0.0)
    if lead == 0.0:
        raise NotApplicable("focal polynomial has no x0^r term")
    # the mean of the roots is linear in the coefficients, unlike the roots
    mean = -fp.coeffs.get((r - 1, 1), 0.0) / (r * lead)
    scale = max(1.0, abs(mean), float(np.linalg.norm(fd.C[0])))
    dev = _power_deviation(fp, mean, scale)
    if dev > root_tol:
        raise NotApplicable(f"focus is not {r}-fold (coefficient deviation {dev:.3e})")
    F = fd.frame.frame.matrix
    point = mean * F[:, 0] + F[:, 1]
    return HomPoint(point), fd, fp


def focus_map(spec: VarietySpec, u, tol: float = RANK_TOL) -> HomPoint:
    """The r-fold focus on the generator through ``x(u)``."""
    loc = _locals(spec, u, 3)[0]
    return _focus_from(loc, _rank_from_local(loc, tol))[0]


def _stencil_points(u, h):
    """Points for fourth-order central differences along each axis."""
    u = np.asarray(u, dtype=float)
    pts = [u]
    for i in range(u.size):
        for k in (-2, -1, 1, 2):
            p = u.copy()
            p[i] += k * h[i]
            pts.append(p)
    return np.array(pts)


def _fd_first(values, h):
    """Fourth-order first derivatives from ``_stencil_points`` samples."""
    n = len(h)
    out = []
    for i in range(n):
        m2, m1, p1, p2 = values[1 + 4 * i : 5 + 4 * i]
        out.append((m2 - 8 * m1 + 8 * p1 - p2) / (12 * h[i]))
    return np.array(out)


def _fd_step(spec: VarietySpec, u, rel: float = 1e-3):
    width = spec.upper - spec.lower
    h = rel * width
    u = np.asarray(u, dtype=float)
    # keep the stencil inside the domain
    room = np.minimum(u - spec.lower, spec.upper - u) / 2.0
    return np.minimum(h, np.maximum(room, 1e-12))


def _affine(points: np.ndarray, k: int) -> np.ndarray:
    return points / points[..., k : k + 1]


def _jacobian_from(locs, h, tol: float):
    foci = np.array([_focus_from(loc, _rank_from_local(loc, tol))[0].coords for loc in locs])
    k = int(np.argmax(np.abs(foci[0])))
    aff = _affine(foci, k)
    J = _fd_first(aff, h)
    f = aff[0] / np.linalg.norm(aff[0])
    J = (J - np.outer(J @ f, f)) / np.linalg.norm(aff[0])
    return HomPoint(foci[0]), J


def focus_jacobians(spec: VarietySpec, U, tol: float = RANK_TOL) -> list:
    """``focus_jacobian`` at every row of ``U``, with all stencils in one jet pass."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    steps = [_fd_step(spec, u) for u in U]
    pts = np.vstack([_stencil_points(u, h) for u, h in zip(U, steps)])
    locs = _locals(spec, pts, 3)
    size = 1 + 4 * spec.n
    return [_jacobian_from(locs[i * size : (i + 1) * size], h, tol) for i, h in enumerate(steps)]


def focus_jacobian(spec: VarietySpec, u, tol: float = RANK_TOL):
    """Focus at ``u`` and the derivative of the focus map (normalized chart).

    Returns ``(focus, J)`` where ``J`` has one row per parameter and is the
    derivative of the unit representative projected orthogonally to it.
    """
    return focus_jacobians(spec, [u], tol)[0]


def focus_rank(J: np.ndarray, spec: VarietySpec, fd_tol: float = FD_RANK_TOL) -> int:
    s = np.linalg.svd(J, compute_uv=False)
    width = float(np.mean(spec.upper - spec.lower))
    scale = max(float(s[0]) if s.size else 0.0, 1.0 / width)
    return int(np.sum(s > fd_tol * scale))


# ------------------------------------------------------ classification


@dataclass
class ClassificationVerdict:
    case_tag: CaseTag
    focal_dim: int | None
    evidence: dict

    @property
    def detail(self) -> str:
        return self.evidence.get("detail", "")


def default_grid(spec: VarietySpec, per_axis: int = 9) -> np.ndarray:
    """Uniform grid inside the box, 5% away from its faces.

    Up to two parameters the full ``per_axis**n`` grid is used; beyond that
    a diagonal sub-lattice of ``per_axis**(n-1)`` points that still hits
    every axis value equally often.
    """
    lo = spec.lower + 0.05 * (spec.upper - spec.lower)
    hi = spec.upper - 0.05 * (spec.upper - spec.lower)
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    pts = []
    for idx in itertools.product(range(per_axis), repeat=spec.n):
        if spec.n >= 3 and sum(idx) % per_axis:
            continue
        pts.append([axes[i][j] for i, j in enumerate(idx)])
    return np.array(pts)


def _mode(values):
    values = list(values)
    best = max(set(values), key=values.count)
    return best, values.count(best) / len(values)


def classify(spec: VarietySpec, sample_grid=None, tol: float = RANK_TOL,
             fd_tol: float = FD_RANK_TOL, min_agreement: float = 0.8) -> ClassificationVerdict:
    """Three-way classification of varieties with one-dimensional leaves.

    The focus map's rank decides: ``n - 1`` is a focal variety (case 1),
    ``n - 2`` a twisted cone (case 2), a twisted cone whose foci lie in a
    hyperplane is a twisted cylinder (case 3), and a constant focus a cone.
    """
    grid = default_grid(spec) if sample_grid is None else np.atleast_2d(np.asarray(sample_grid, float))
    n = spec.n
    evidence: dict = {"samples": len(grid), "tol": tol, "fd_tol": fd_tol}
    locs = _locals(spec, grid, 3)
    tds = []
    singular = 0
    for loc in locs:
        try:
            tds.append((loc, _rank_from_local(loc, tol)))
        except SingularPointError:
            singular += 1
    evidence["singular_samples"] = singular
    if not tds:
        evidence["detail"] = "no regular sample points"
        return ClassificationVerdict(CaseTag.UNDETERMINED, None, evidence)
    ranks = [td.rank for _, td in tds]
    r, share = _mode(ranks)
    evidence["rank_counts"] = {str(k): ranks.count(k) for k in sorted(set(ranks))}
    evidence["rank"] = r
    if share < min_agreement:
        evidence["detail"] = "inconsistent Gauss rank across the grid"
        return ClassificationVerdict(CaseTag.UNDETERMINED, None, evidence)
    if r == 0:
        evidence["detail"] = "plane"
        return ClassificationVerdict(CaseTag.NON_DEGENERATE, None, evidence)
    if r == n:
        evidence["detail"] = "Gauss map of maximal rank"
        return ClassificationVerdict(CaseTag.NON_DEGENERATE, None, evidence)
    if n - r != 1:
        evidence["detail"] = f"leaves of dimension {n - r}; classification needs one-dimensional leaves"
        return ClassificationVerdict(CaseTag.UNDETERMINED, None, evidence)

    foci, focus_ranks, sym = [], [], []
    tds = [(loc, td) for loc, td in tds if td.rank == r]
    try:
        jacobians = focus_jacobians(spec, [loc.u for loc, _ in tds], tol)
    except (NotApplicable, SingularPointError, EvaluationError) as exc:
        evidence["detail"] = str(exc)
        return ClassificationVerdict(CaseTag.UNDETERMINED, None, evidence)
    for (loc, td), (focus, J) in zip(tds, jacobians):
        fd = _fundamental_from(loc, td)
        sym.append(fd.max_symmetry_residual)
        foci.append(focus.coords / np.linalg.norm(focus.coords))
        focus_ranks.append(focus_rank(J, spec, fd_tol))
    k, share = _mode(focus_ranks)
    evidence["focus_rank_counts"] = {str(v): focus_ranks.count(v) for v in sorted(set(focus_ranks))}
    evidence["max_symmetry_residual"] = max(sym)
    if share < min_agreement:
        evidence["detail"] = "inconsistent focus-map rank across the grid"
        return ClassificationVerdict(CaseTag.UNDETERMINED, None, evidence)
    if k == 0:
        evidence["detail"] = "focus is stationary (vertex)"
        return ClassificationVerdict(CaseTag.CONE, 0, evidence)
    if k == n - 1:
        return ClassificationVerdict(CaseTag.FOCAL_SURFACE, k, evidence)
    if k == n - 2:
        foci = np.array(foci)
        s = np.linalg.svd(foci, compute_uv=False)
        fit = float(s[-1] / s[0]) if foci.shape[0] >= foci.shape[1] else 0.0
        evidence["hyperplane_fit_residual"] = fit
        if spec.N == n + 1 and fit < tol:
            return ClassificationVerdict(CaseTag.TWISTED_CYLINDER, k, evidence)
        return ClassificationVerdict(CaseTag.TWISTED_CONE, k, evidence)
    evidence["detail"] = f"focus-map rank {k} fits no case"
    return ClassificationVerdict(CaseTag.UNDETERMINED, k, evidence)


# ------------------------------------------- second forms of the focal variety


@dataclass
class FocalForms:
    forms: np.ndarray  # 2 x (n-1) x (n-1) in transverse coordinates
    generator_direction: np.ndarray  # in transverse coordinates
    generator_residual: float  # how well the direction hits the line A_1 A_0
    values: np.ndarray  # |Phi(dir, dir)| / |Phi| for each form


def _fd_second(f, u, dirs, h):
    """Fourth-order second derivatives of ``f`` along columns of ``dirs``."""
    m = dirs.shape[1]
    D1 = []
    for i in range(m):
        vals = [f(u + k * h * dirs[:, i]) for k in (-2, -1, 1, 2)]
        D1.append((vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h))
    f0 = f(u)
    D2 = np.zeros((m, m) + f0.shape)
    for i in range(m):
        vals = [f(u + k * h * dirs[:, i]) for k in (-2, -1, 1, 2)]
        D2[i, i] = (-vals[0] + 16 * vals[1] - 30 * f0 + 16 * vals[2] - vals[3]) / (12 * h * h)
    for i, j in itertools.combinations(range(m), 2):
        def cross(step):
            return sum(
                w * f(u + step * (a * dirs[:, i] + b * dirs[:, j]))
                for a, b, w in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
            )

        D2[i, j] = D2[j, i] = (16 * cross(h) - cross(2 * h)) / (48 * h * h)
    return f0, np.array(D1), D2


def focus_second_forms(spec: VarietySpec, u, tol: float = RANK_TOL,
                       fd_tol: float = FD_RANK_TOL, step: float = 2e-3) -> FocalForms:
    """Second fundamental forms of the focal variety at the focus of ``u``.

    Requires case 1: the focus map has rank ``n - 1`` and the variety is a
    hypersurface.  The forms are returned in the transverse parameter
    coordinates, together with the direction whose image is the generator.
    """
    if spec.N != spec.n + 1:
        raise NotApplicable("focal second forms are computed for hypersurfaces")
    u = np.asarray(u, dtype=float)
    loc = _locals(spec, u, 3)[0]
    td = _rank_from_local(loc, tol)
    focus, J = focus_jacobian(spec, u, tol)
    k = focus_rank(J, spec, fd_tol)
    if k != spec.n - 1:
        raise NotApplicable(f"focal variety has dimension {k}, not {spec.n - 1} (not case 1)")
    W = td.transverse_directions
    ref = int(np.argmax(np.abs(focus.coords)))

    def G(p):
        return _affine(focus_map(spec, p, tol).coords, ref)

    width = float(np.min(spec.upper - spec.lower))
    g0, D1, D2 = _fd_second(G, u, W, step * width)
    tangent = np.vstack([g0, D1])
    normals = null_space(tangent, 1e-10)[: spec.N + 1 - tangent.shape[0]]
    forms = np.einsum("am,ijm->aij", normals, D2)
    # generator direction: D1-combination lying in span(focus, x)
    line = np.vstack([g0, loc.x])
    q, _ = np.linalg.qr(line.T)
    outside = D1 - (D1 @ q) @ q.T
    _, s, vt = np.linalg.svd(outside.T)
    w = vt[-1]
    gen_res = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    values = []
    for form in forms:
        norm = np.linalg.norm(form, 2)
        values.append(abs(w @ form @ w) / norm if norm > 0 else 0.0)
    return FocalForms(forms, w, gen_res, np.array(values))


def second_fundamental_forms(spec: VarietySpec, u) -> tuple[np.ndarray, float]:
    """Second fundamental forms at ``u`` and the Hessian-stack scale."""
    loc = _locals(spec, u, 2)[0]
    _check_regular(loc)
    normals = _normals(loc)
    return _second_forms(loc, normals), float(np.linalg.norm(loc.X2))


def verify_asymptotic_direction(surface_spec: VarietySpec, direction_field, u,
                                tol: float = 1e-9) -> bool:
    """True iff every second fundamental form annihilates the direction at ``u``."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(direction_field(u) if callable(direction_field) else direction_field, dtype=float)
    if not np.any(d):
        raise ValueError("direction field vanishes")
    d = d / np.linalg.norm(d)
    forms, scale = second_fundamental_forms(surface_spec, u)
    if scale == 0.0:
        return True
    return all(abs(d @ f @ d) < tol * scale for f in forms)
