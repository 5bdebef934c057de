"""Cartan's test for linear exterior quadratic (Pfaffian) systems.

A tableau is a set of equations

    sum_{alpha, rho} E[alpha][rho] pi^alpha ^ omega^rho
        + sum_{rho < sigma} T[rho][sigma] omega^rho ^ omega^sigma = 0

in fiber forms pi^1..pi^q and basis forms omega^1..omega^m.  All arithmetic
is exact over the rationals.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import dsl
from .jets import to_fraction

FLAG_TRIALS = 5
FLAG_SEED = 20040917
NUMERATOR_RANGE = 7

_WORDS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"]


class TableauError(ValueError):
    pass


# ------------------------------------------------------- exact linear algebra


def row_reduce(rows, ncols: int):
    """Reduced row echelon form over Q.  Returns (rows, pivot columns)."""
    mat = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(mat)) if mat[i][c] != 0), None)
        if p is None:
            continue
        mat[r], mat[p] = mat[p], mat[r]
        inv = 1 / mat[r][c]
        mat[r] = [v * inv for v in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    return mat[:r], pivots


def exact_rank(rows, ncols: int) -> int:
    return len(row_reduce(rows, ncols)[1])


# ------------------------------------------------------------------ tableau


@dataclass
class PfaffianTableau:
    m: int
    q: int
    E: list  # E[e][alpha][rho], 0-based
    T: list  # T[e][rho][sigma], antisymmetric
    labels: list = field(default_factory=list)
    name: str = ""
    constants: dict = field(default_factory=dict)
    source: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.m < 1 or self.q < 0:
            raise TableauError(f"need m >= 1 and q >= 0, got m={self.m}, q={self.q}")
        if len(self.E) != len(self.T):
            raise TableauError("E and T must list the same equations")
        for e, (Ee, Te) in enumerate(zip(self.E, self.T)):
            if len(Ee) != self.q or any(len(row) != self.m for row in Ee):
                raise TableauError(f"equation {e + 1}: E has the wrong shape")
            if len(Te) != self.m or any(len(row) != self.m for row in Te):
                raise TableauError(f"equation {e + 1}: T has the wrong shape")
            for a in range(self.m):
                for b in range(self.m):
                    if Te[a][b] != -Te[b][a]:
                        raise TableauError(f"equation {e + 1}: torsion is not antisymmetric")

    @property
    def n_equations(self) -> int:
        return len(self.E)

    @classmethod
    def empty(cls, m: int, q: int) -> "PfaffianTableau":
        return cls(m, q, [], [])


def _zeros(a, b):
    return [[Fraction(0)] * b for _ in range(a)]


def _coeff(term: dict, constants: dict, where: str) -> Fraction:
    if "coeff" in term:
        raw = term["coeff"]
        if isinstance(raw, (int, float)):
            return to_fraction(raw)
        try:
            node = dsl.parse_expr(str(raw), 0, symbols=tuple(constants))
            return dsl.eval_exact(node, constants)
        except (dsl.DSLError, dsl.EvaluationError) as exc:
            raise TableauError(f"{where}: {exc}") from None
    num = term.get("coeff_num", 1)
    den = term.get("coeff_den", 1)
    if int(den) == 0:
        raise TableauError(f"{where}: zero denominator")
    return Fraction(int(num), int(den))


def _index(term: dict, key: str, size: int, where: str) -> int:
    try:
        i = int(term[key])
    except (KeyError, TypeError, ValueError):
        raise TableauError(f"{where}: missing or bad '{key}'") from None
    if not 1 <= i <= size:
        raise TableauError(f"{where}: {key}={i} out of range 1..{size}")
    return i - 1


def tableau_from_dict(data: dict, overrides: dict | None = None) -> PfaffianTableau:
    """Build a tableau from its JSON form (1-based indices)."""
    try:
        m, q = int(data["m"]), int(data["q"])
    except (KeyError, TypeError, ValueError):
        raise TableauError("tableau needs integer fields 'm' and 'q'") from None
    constants = {k: to_fraction(v) for k, v in data.get("constants", {}).items()}
    for k, v in (overrides or {}).items():
        if k not in constants:
            raise TableauError(f"unknown constant {k!r}")
        constants[k] = to_fraction(v)
    E, T, labels = [], [], []
    for e, eq in enumerate(data.get("equations", [])):
        label = eq.get("label", str(e + 1))
        Ee, Te = _zeros(q, m), _zeros(m, m)
        for k, term in enumerate(eq.get("pi_terms", [])):
            where = f"equation {label}, pi term {k + 1}"
            a = _index(term, "alpha", q, where)
            r = _index(term, "rho", m, where)
            Ee[a][r] += _coeff(term, constants, where)
        for k, term in enumerate(eq.get("torsion", [])):
            where = f"equation {label}, torsion term {k + 1}"
            r = _index(term, "rho", m, where)
            s = _index(term, "sigma", m, where)
            c = _coeff(term, constants, where)
            if r != s:
                Te[r][s] += c
                Te[s][r] -= c
        E.append(Ee)
        T.append(Te)
        labels.append(label)
    return PfaffianTableau(m, q, E, T, labels, data.get("name", ""), constants, data)


def load_tableau(path, overrides: dict | None = None) -> PfaffianTableau:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TableauError(f"malformed tableau JSON: {exc}") from None
    if not isinstance(data, dict):
        raise TableauError("tableau JSON must be an object")
    return tableau_from_dict(data, overrides)


# --------------------------------------------------------------- characters


def _random_rational(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-NUMERATOR_RANGE, NUMERATOR_RANGE), rng.randint(1, NUMERATOR_RANGE))


def polar_rank(t: PfaffianTableau, flag) -> int:
    """Rank of the polar equations of the vectors in ``flag``."""
    rows = []
    for v in flag:
        for Ee in t.E:
            rows.append([sum((Ee[a][r] * v[r] for r in range(t.m)), Fraction(0)) for a in range(t.q)])
    return exact_rank(rows, t.q) if rows and t.q else 0


def polar_ranks(t: PfaffianTableau, trials: int = FLAG_TRIALS, seed: int = FLAG_SEED) -> list[int]:
    """Max over pseudorandom flags of the polar rank for k = 1..m-1."""
    rng = random.Random(seed)
    best = [0] * max(t.m - 1, 0)
    for _ in range(trials):
        flag = [[_random_rational(rng) for _ in range(t.m)] for _ in range(t.m - 1)]
        for k in range(1, t.m):
            best[k - 1] = max(best[k - 1], polar_rank(t, flag[:k]))
    return best


def characters(t: PfaffianTableau, trials: int = FLAG_TRIALS, seed: int = FLAG_SEED) -> list[int]:
    """Cartan characters s_1..s_m; the last one closes the count to q."""
    ranks = polar_ranks(t, trials, seed)
    s, prev = [], 0
    for r in ranks:
        s.append(r - prev)
        prev = r
    s.append(t.q - prev)
    return s


def cartan_number(s) -> int:
    return sum((k + 1) * sk for k, sk in enumerate(s))


# ---------------------------------------------------------- integral elements


def _unknown(t: PfaffianTableau, alpha: int, rho: int) -> int:
    return alpha * t.m + rho


def integral_system(t: PfaffianTableau):
    """Linear system A p = b for the coefficients of pi^alpha = p^alpha_rho omega^rho.

    One row per equation and pair sigma < rho (the omega^sigma ^ omega^rho
    component).
    """
    A, b = [], []
    for Ee, Te in zip(t.E, t.T):
        for s in range(t.m):
            for r in range(s + 1, t.m):
                row = [Fraction(0)] * (t.q * t.m)
                for a in range(t.q):
                    # p^a_s w^s ^ (E[a][r] w^r) and p^a_r w^r ^ (E[a][s] w^s)
                    row[_unknown(t, a, s)] += Ee[a][r]
                    row[_unknown(t, a, r)] -= Ee[a][s]
                A.append(row)
                b.append(-Te[s][r])
    return A, b


@dataclass
class IntegralElements:
    dim: int  # -1 when no integral element exists
    rank: int
    certificate: list | None = None  # y with y A = 0, y b != 0


def integral_elements(t: PfaffianTableau) -> IntegralElements:
    A, b = integral_system(t)
    n = t.q * t.m
    if not A:
        return IntegralElements(n, 0)
    k = len(A)
    # augment with the identity to track row combinations
    aug = [A[i] + [b[i]] + [Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    red, piv = row_reduce(aug, n + 1)
    rank_A = sum(1 for c in piv if c < n)
    if n in piv:
        row = red[piv.index(n)]
        cert = row[n + 1 :]
        return IntegralElements(-1, rank_A, [str(c) for c in cert])
    return IntegralElements(n - rank_A, rank_A)


def integral_element_dim(t: PfaffianTableau) -> int:
    return integral_elements(t).dim


# ------------------------------------------------------------------- report


def _count(k: int, noun: str) -> str:
    word = _WORDS[k] if k < len(_WORDS) else str(k)
    return f"{word} {noun}{'' if k == 1 else 's'}"


def arbitrariness(s, involutive: bool) -> str:
    if not involutive:
        return "not determined: the system is not in involution"
    for k in range(len(s), 0, -1):
        if s[k - 1] > 0:
            return f"general solution depends on {_count(s[k - 1], 'function')} of {_count(k, 'variable')}"
    return "general solution depends on finitely many constants"


@dataclass
class CartanReport:
    s: list
    Q: int
    S: int
    involutive: bool
    arbitrariness: str
    m: int = 0
    q: int = 0
    certificate: list | None = None
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {
            "s": list(self.s),
            "Q": self.Q,
            "S": self.S,
            "involutive": self.involutive,
            "arbitrariness": self.arbitrariness,
            "m": self.m,
            "q": self.q,
        }
        for k, sk in enumerate(self.s):
            out[f"s{k + 1}"] = sk
        if self.certificate is not None:
            out["certificate"] = self.certificate
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def _genericity_warnings(t: PfaffianTableau, s, trials: int, seed: int) -> list[str]:
    """Compare against the same tableau with random values of its constants."""
    if not t.constants or t.source is None:
        return []
    rng = random.Random(seed + 1)
    values = {}
    for k in t.constants:
        v = Fraction(0)
        while v == 0:
            v = _random_rational(rng)
        values[k] = v
    generic = tableau_from_dict(t.source, values)
    s_gen = characters(generic, trials, seed)
    if s_gen != s:
        return [f"constants {dict((k, str(v)) for k, v in t.constants.items())} are not generic: "
                f"characters {s} differ from generic {s_gen}"]
    return []


def cartan_test(t: PfaffianTableau, trials: int = FLAG_TRIALS, seed: int = FLAG_SEED) -> CartanReport:
    s = characters(t, trials, seed)
    Q = cartan_number(s)
    ie = integral_elements(t)
    involutive = ie.dim == Q
    warnings = _genericity_warnings(t, s, trials, seed)
    if ie.dim > Q:
        warnings.append(f"S = {ie.dim} exceeds Q = {Q}: flags were not generic")
    if ie.dim < 0:
        warnings.append("torsion is inconsistent: no integral element")
    return CartanReport(s, Q, ie.dim, involutive, arbitrariness(s, involutive), t.m, t.q,
                        ie.certificate, warnings)
