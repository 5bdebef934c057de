"""Independent reference computations used by the tests.

Nothing here goes through jets, the frame machinery or the package's own
rational elimination.
"""
from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np
import sympy as sp

from gaussdegen.cartan import PfaffianTableau


# ----------------------------------------------------------- Gauss rank


def fd_tangent_basis(spec, u, h=1e-3):
    """Rows x, dx/du_i from fourth-order central differences of plain evaluation."""
    u = np.asarray(u, dtype=float)
    rows = [spec.evaluate(u)]
    for i in range(spec.n):
        e = np.zeros(spec.n)
        e[i] = h
        f = [spec.evaluate(u + k * e) for k in (-2, -1, 1, 2)]
        rows.append((f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h))
    return np.array(rows)


def plucker(basis):
    """Unit Plücker vector of the row space of ``basis``."""
    k, m = basis.shape
    p = np.array([np.linalg.det(basis[:, list(c)]) for c in itertools.combinations(range(m), k)])
    return p / np.linalg.norm(p)


def plucker_gauss_rank(spec, u, h=1e-3, tol=1e-5):
    """Rank of the Gauss map from finite differences of Plücker coordinates."""
    u = np.asarray(u, dtype=float)
    p0 = plucker(fd_tangent_basis(spec, u))
    cols = []
    for i in range(spec.n):
        e = np.zeros(spec.n)
        e[i] = h
        vals = []
        for k in (-2, -1, 1, 2):
            p = plucker(fd_tangent_basis(spec, u + k * e))
            vals.append(p if p @ p0 >= 0 else -p)
        cols.append((vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h))
    J = np.column_stack(cols)
    s = np.linalg.svd(J, compute_uv=False)
    return int(np.sum(s > tol))


# ------------------------------------------------------------------ jets


def fd_partials(spec, u, h1=1e-3, h2=2e-3):
    """Fourth-order central differences of plain evaluation up to second order."""
    n = spec.n
    f = spec.evaluate
    D1, D2 = [], np.zeros((n, n, spec.N + 1))
    for i in range(n):
        e = np.eye(n)[i] * h1
        v = [f(u + k * e) for k in (-2, -1, 1, 2)]
        D1.append((v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h1))
    for i in range(n):
        ei = np.eye(n)[i] * h2
        v = [f(u + k * ei) for k in (-2, -1, 0, 1, 2)]
        D2[i, i] = (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h2 * h2)
        for j in range(i + 1, n):
            ej = np.eye(n)[j] * h2

            def cross(k):
                return (f(u + k * (ei + ej)) - f(u + k * (ei - ej))
                        - f(u - k * (ei - ej)) + f(u - k * (ei + ej)))

            D2[i, j] = D2[j, i] = (16 * cross(1) - cross(2)) / (48 * h2 * h2)
    return np.array(D1), D2


# -------------------------------------------------- integral elements


def brute_force_integral_dim(t: PfaffianTableau) -> int:
    """Nullity of the p-linear system built from explicit wedge products."""
    m, q = t.m, t.q
    p = [[sp.Symbol(f"p_{a}_{r}") for r in range(m)] for a in range(q)]
    unknowns = [s for row in p for s in row]
    equations = []
    for Ee, Te in zip(t.E, t.T):
        two_form = sp.zeros(m, m)
        for a in range(q):
            pi = sp.Matrix(p[a])
            theta = sp.Matrix([sp.Rational(Ee[a][r].numerator, Ee[a][r].denominator) for r in range(m)])
            two_form += pi * theta.T - theta * pi.T
        torsion = sp.Matrix(m, m, lambda i, j: sp.Rational(Te[i][j].numerator, Te[i][j].denominator))
        # T[i][j] with i<j is the coefficient of omega^i ^ omega^j; the
        # antisymmetric matrix for that 2-form is T itself
        two_form += torsion
        for i in range(m):
            for j in range(i + 1, m):
                equations.append(sp.expand(two_form[i, j]))
    if not unknowns:
        return -1 if any(e != 0 for e in equations) else 0
    if not equations:
        return len(unknowns)
    A, b = sp.linear_eq_to_matrix(equations, unknowns)
    rank_A = A.rank()
    if A.row_join(b).rank() != rank_A:
        return -1
    return len(unknowns) - rank_A


# --------------------------------------------------------- random data


def random_tableau(rng: random.Random, q_max=6, m_max=3, torsion=True) -> PfaffianTableau:
    m = rng.randint(1, m_max)
    q = rng.randint(0, q_max)
    n_eq = rng.randint(0, q + 1)
    density = rng.choice([0.2, 0.4, 0.7])

    def val():
        if rng.random() > density:
            return Fraction(0)
        return Fraction(rng.randint(-3, 3), rng.randint(1, 3))

    E, T = [], []
    for _ in range(n_eq):
        E.append([[val() for _ in range(m)] for _ in range(q)])
        Te = [[Fraction(0)] * m for _ in range(m)]
        if torsion:
            for i in range(m):
                for j in range(i + 1, m):
                    c = val()
                    Te[i][j], Te[j][i] = c, -c
        T.append(Te)
    return PfaffianTableau(m, q, E, T)


def random_invertible(rng: random.Random, k: int):
    while True:
        M = [[Fraction(rng.randint(-3, 3), rng.randint(1, 2)) for _ in range(k)] for _ in range(k)]
        if k == 0 or sp.Matrix(M).det() != 0:
            return M


def recombine_equations(t: PfaffianTableau, M) -> PfaffianTableau:
    """New equations e'_i = sum_j M[i][j] e_j."""
    k = t.n_equations
    E = [[[sum((M[i][j] * t.E[j][a][r] for j in range(k)), Fraction(0)) for r in range(t.m)]
          for a in range(t.q)] for i in range(k)]
    T = [[[sum((M[i][j] * t.T[j][a][b] for j in range(k)), Fraction(0)) for b in range(t.m)]
          for a in range(t.m)] for i in range(k)]
    return PfaffianTableau(t.m, t.q, E, T)


def change_pi_basis(t: PfaffianTableau, M) -> PfaffianTableau:
    """Substitute pi^alpha = sum_beta M[alpha][beta] pi'^beta."""
    E = [[[sum((M[a][b] * Ee[a][r] for a in range(t.q)), Fraction(0)) for r in range(t.m)]
          for b in range(t.q)] for Ee in t.E]
    return PfaffianTableau(t.m, t.q, E, [list(map(list, Te)) for Te in t.T])


def random_projective(rng: np.random.Generator, size: int):
    """Well-conditioned rational matrix (entries with denominator 8)."""
    while True:
        M = np.round(rng.uniform(-1, 1, (size, size)) * 8) / 8 + 2 * np.eye(size)
        if np.linalg.cond(M) < 20:
            return M


def random_box_reparam(rng: np.random.Generator, spec):
    """Affine change u = A v + b mapping a new box onto the old one.

    A is a signed, scaled permutation, so boxes go to boxes.
    """
    n = spec.n
    perm = rng.permutation(n)
    scales = rng.choice([0.5, 2.0, 1.0, 4.0], n) * rng.choice([-1.0, 1.0], n)
    shifts = np.round(rng.uniform(-1, 1, n) * 4) / 4
    A = np.zeros((n, n))
    for i in range(n):
        A[i, perm[i]] = scales[i]
    # u_i = scales[i] * v_{perm[i]} + b_i  =>  v_{perm[i]} = (u_i - b_i) / scales[i]
    new_domain = [None] * n
    for i in range(n):
        lo, hi = (float(spec.lower[i]) - shifts[i]) / scales[i], (float(spec.upper[i]) - shifts[i]) / scales[i]
        new_domain[perm[i]] = (min(lo, hi), max(lo, hi))
    return A, shifts, new_domain


def map_points_back(A, b, U):
    """Points v with A v + b = u for each row u of U."""
    return np.linalg.solve(A, (np.asarray(U) - b).T).T
