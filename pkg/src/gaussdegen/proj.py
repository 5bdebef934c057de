"""Points, subspaces and frames of real projective space, stored as
homogeneous coordinate vectors and basis matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-10


class ProjectiveError(ValueError):
    pass


def numerical_rank(mat, tol: float = RANK_TOL) -> int:
    """Count singular values above ``tol`` times the largest one."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space(mat, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as rows) of the right null space of ``mat``."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    ncols = mat.shape[1]
    if mat.size == 0:
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(mat)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return vt[rank:]


def row_basis(mat, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal rows spanning the row space of ``mat``."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    _, s, vt = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, mat.shape[1]))
    rank = int(np.sum(s > tol * s[0]))
    return vt[:rank]


def normalize_point(coords) -> np.ndarray:
    """Scale so that the largest-magnitude entry equals 1."""
    coords = np.asarray(coords, dtype=float)
    k = int(np.argmax(np.abs(coords)))
    if coords[k] == 0.0:
        raise ProjectiveError("the zero vector is not a projective point")
    return coords / coords[k]


@dataclass(frozen=True, eq=False)
class HomPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).copy()
        if c.ndim != 1 or not np.any(c):
            raise ProjectiveError("a point needs a nonzero coordinate vector")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def ambient_dim(self) -> int:
        return self.coords.size - 1

    def normalized(self) -> np.ndarray:
        return normalize_point(self.coords)

    def as_subspace(self) -> "ProjSubspace":
        return ProjSubspace(self.coords[None, :])

    def isclose(self, other: "HomPoint", tol: float = 1e-9) -> bool:
        return point_distance(self, other) < tol

    def __repr__(self):
        return f"HomPoint({np.array2string(self.normalized(), precision=6)})"


@dataclass(frozen=True, eq=False)
class ProjSubspace:
    """Projective subspace spanned by the rows of ``basis``."""

    basis: np.ndarray
    tol: float = RANK_TOL

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float)).copy()
        if b.shape[0] == 0:
            raise ProjectiveError("empty basis")
        if numerical_rank(b, self.tol) != b.shape[0]:
            raise ProjectiveError("subspace basis is not of full row rank")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors, tol: float = RANK_TOL) -> "ProjSubspace":
        """Subspace spanned by possibly dependent vectors."""
        rows = row_basis(vectors, tol)
        if rows.shape[0] == 0:
            raise ProjectiveError("vectors span nothing")
        return cls(rows, tol)

    @property
    def dim(self) -> int:
        return self.basis.shape[0] - 1

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1] - 1

    def orthonormal(self) -> np.ndarray:
        return row_basis(self.basis, self.tol)

    def annihilator(self) -> np.ndarray:
        """Covectors (rows) vanishing on the subspace."""
        return null_space(self.basis, self.tol)

    def contains(self, vectors, tol: float = 1e-8) -> bool:
        return containment_residual(self, vectors) < tol

    def __eq__(self, other):
        if not isinstance(other, ProjSubspace):
            return NotImplemented
        return self.dim == other.dim and subspace_angle(self, other) < max(self.tol, other.tol) * 1e3

    __hash__ = None

    def __repr__(self):
        return f"ProjSubspace(dim={self.dim}, ambient={self.ambient_dim})"


def _check_ambient(s1: ProjSubspace, s2: ProjSubspace) -> None:
    if s1.ambient_dim != s2.ambient_dim:
        raise ProjectiveError("subspaces live in different ambient spaces")


def join(s1: ProjSubspace, s2: ProjSubspace, tol: float = RANK_TOL) -> ProjSubspace:
    _check_ambient(s1, s2)
    return ProjSubspace.span(np.vstack([s1.orthonormal(), s2.orthonormal()]), tol)


def meet(s1: ProjSubspace, s2: ProjSubspace, tol: float = RANK_TOL) -> ProjSubspace | None:
    """Intersection, or ``None`` when the subspaces are disjoint."""
    _check_ambient(s1, s2)
    annihilators = np.vstack([s1.annihilator(), s2.annihilator()])
    if annihilators.shape[0] == 0:
        return ProjSubspace(np.eye(s1.ambient_dim + 1), tol)
    common = null_space(annihilators, tol)
    if common.shape[0] == 0:
        return None
    return ProjSubspace(common, tol)


def principal_angles(s1: ProjSubspace, s2: ProjSubspace) -> np.ndarray:
    q1, q2 = s1.orthonormal(), s2.orthonormal()
    s = np.linalg.svd(q1 @ q2.T, compute_uv=False)
    # sine form is accurate for small angles
    p1 = q1.T @ q1
    resid = q2 - q2 @ p1
    sines = np.linalg.svd(resid, compute_uv=False)
    sines = np.sort(np.clip(sines, 0.0, 1.0))
    cos_angles = np.arccos(np.clip(np.sort(s)[::-1], -1.0, 1.0))
    return np.where(sines < 0.5, np.arcsin(sines), cos_angles)


def subspace_angle(s1: ProjSubspace, s2: ProjSubspace) -> float:
    """Largest principal angle between two subspaces of equal dimension."""
    _check_ambient(s1, s2)
    if s1.dim != s2.dim:
        raise ProjectiveError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
    return float(np.max(principal_angles(s1, s2)))


def containment_residual(space: ProjSubspace, vectors) -> float:
    """Largest sine of the angle between a vector and the subspace."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    q = space.orthonormal()
    resid = vectors - (vectors @ q.T) @ q
    norms = np.linalg.norm(vectors, axis=1)
    return float(np.max(np.linalg.norm(resid, axis=1) / norms))


def point_distance(p: HomPoint, q: HomPoint) -> float:
    """Sine of the angle between representative vectors (0 iff same point)."""
    a = p.coords / np.linalg.norm(p.coords)
    b = q.coords / np.linalg.norm(q.coords)
    return float(np.linalg.norm(b - (a @ b) * a))


@dataclass(frozen=True, eq=False)
class Frame:
    """Projective frame A_0..A_N, stored as the columns of ``matrix``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).copy()
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ProjectiveError("frame matrix must be square")
        if numerical_rank(m) != m.shape[0]:
            raise ProjectiveError("frame points are linearly dependent")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def points(self) -> list[HomPoint]:
        return [HomPoint(c) for c in self.matrix.T]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def components(self, vectors) -> np.ndarray:
        """Coordinates of vectors (last axis) with respect to the frame."""
        return np.linalg.solve(self.matrix, np.asarray(vectors, dtype=float).T).T
