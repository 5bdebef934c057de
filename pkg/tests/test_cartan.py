import json
import random
import time
from fractions import Fraction

import pytest

from gaussdegen import cartan, fixtures

from oracles import (
    brute_force_integral_dim,
    change_pi_basis,
    random_invertible,
    random_tableau,
    recombine_equations,
)


def load(name):
    return cartan.load_tableau(fixtures.data_path(f"tableau_{name}.json"))


@pytest.mark.parametrize(
    "name, s, Q, S, words",
    [
        ("T1", [4, 1], 6, 6, "one function of two variables"),
        ("T2", [5, 0], 5, 5, "five functions of one variable"),
        ("T3", [5, 0], 5, 5, "five functions of one variable"),
        ("T4", [4, 0], 4, 4, "four functions of one variable"),
    ],
)
def test_fixture_numbers(name, s, Q, S, words):
    start = time.perf_counter()
    rep = cartan.cartan_test(load(name))
    assert time.perf_counter() - start < 1.0
    assert (rep.s, rep.Q, rep.S, rep.involutive) == (s, Q, S, True)
    assert rep.arbitrariness.endswith(words)
    assert not rep.warnings


def test_t3_has_five_fiber_forms():
    assert load("T3").q == 5


def test_single_equation_example():
    t = cartan.PfaffianTableau(2, 1, [[[Fraction(1), Fraction(0)]]], [[[Fraction(0)] * 2] * 2])
    rep = cartan.cartan_test(t)
    assert (rep.s, rep.Q, rep.S, rep.involutive) == ([1, 0], 1, 1, True)


def test_empty_tableau():
    rep = cartan.cartan_test(load("empty"))
    assert (rep.s, rep.Q, rep.S, rep.involutive) == ([0, 0], 0, 0, True)
    # with free fiber forms every form counts as a function of m variables
    rep = cartan.cartan_test(cartan.PfaffianTableau.empty(2, 3))
    assert (rep.s, rep.Q, rep.S) == ([0, 3], 6, 6)


def test_inconsistent_torsion():
    T = [[Fraction(0), Fraction(1)], [Fraction(-1), Fraction(0)]]
    t = cartan.PfaffianTableau(2, 1, [[[Fraction(0), Fraction(0)]]], [T])
    ie = cartan.integral_elements(t)
    assert ie.dim == -1
    # certificate y: y A = 0 (no unknowns here) and y b != 0
    A, b = cartan.integral_system(t)
    y = [Fraction(c) for c in ie.certificate]
    assert all(sum(yi * row[j] for yi, row in zip(y, A)) == 0 for j in range(len(A[0])))
    assert sum(yi * bi for yi, bi in zip(y, b)) != 0
    rep = cartan.cartan_test(t)
    assert rep.S == -1 and not rep.involutive
    assert "no integral element" in rep.warnings[0]


def test_non_involutive_example():
    # pi^1 ^ w^1 = 0 and pi^1 ^ w^2 = 0 force pi^1 = 0: S = 0 < Q
    E1 = [[Fraction(1), Fraction(0)]]
    E2 = [[Fraction(0), Fraction(1)]]
    Z = [[Fraction(0)] * 2] * 2
    rep = cartan.cartan_test(cartan.PfaffianTableau(2, 1, [E1, E2], [Z, Z]))
    assert rep.S == 0 and rep.Q == 1
    assert not rep.involutive
    assert "not in involution" in rep.arbitrariness


def test_fixtures_agree_with_oracle():
    for name in ["T1", "T2", "T3", "T4", "empty"]:
        t = load(name)
        assert cartan.integral_element_dim(t) == brute_force_integral_dim(t)


def test_random_tableaux_cartan_inequality_and_oracle():
    rng = random.Random(2024)
    for _ in range(200):
        t = random_tableau(rng)
        rep = cartan.cartan_test(t)
        assert rep.S <= rep.Q
        assert rep.S == brute_force_integral_dim(t)
        assert sum(rep.s) == t.q
        assert rep.Q == sum((k + 1) * s for k, s in enumerate(rep.s))


def test_characters_invariant_under_recombination_and_basis_change():
    rng = random.Random(7)
    for _ in range(40):
        t = random_tableau(rng, q_max=5, m_max=3)
        s = cartan.characters(t)
        S = cartan.integral_element_dim(t)
        t2 = recombine_equations(t, random_invertible(rng, t.n_equations))
        t3 = change_pi_basis(t, random_invertible(rng, t.q))
        assert cartan.characters(t2) == s
        assert cartan.characters(t3) == s
        assert cartan.integral_element_dim(t2) == S
        assert cartan.integral_element_dim(t3) == S


def test_deterministic():
    a = cartan.cartan_test(load("T1")).as_dict()
    b = cartan.cartan_test(load("T1")).as_dict()
    assert a == b


def test_constant_overrides_and_genericity_warning(tmp_path):
    t = cartan.load_tableau(fixtures.data_path("tableau_T1.json"), {"b23": "3/2"})
    assert cartan.cartan_test(t).S == 6
    with pytest.raises(cartan.TableauError, match="unknown constant"):
        cartan.load_tableau(fixtures.data_path("tableau_T1.json"), {"zz": 1})
    # polar rank is 2 unless k = 1
    data = {"m": 2, "q": 2, "constants": {"k": "2"}, "equations": [
        {"pi_terms": [{"alpha": 1, "rho": 1}, {"alpha": 2, "rho": 2}]},
        {"pi_terms": [{"alpha": 1, "rho": 1, "coeff": "k"}, {"alpha": 2, "rho": 2}]},
    ]}
    path = tmp_path / "k.json"
    path.write_text(json.dumps(data))
    generic = cartan.cartan_test(cartan.load_tableau(path))
    assert generic.s == [2, 0] and not generic.warnings
    special = cartan.cartan_test(cartan.load_tableau(path, {"k": 1}))
    assert special.s == [1, 1]
    assert special.warnings and "not generic" in special.warnings[0]


def test_malformed_tableaux(tmp_path):
    bad = [
        ({"q": 1}, "integer fields"),
        ({"m": 2, "q": 1, "equations": [{"pi_terms": [{"alpha": 2, "rho": 1}]}]}, "out of range"),
        ({"m": 2, "q": 1, "equations": [{"pi_terms": [{"rho": 1}]}]}, "alpha"),
        ({"m": 2, "q": 1, "equations": [{"pi_terms": [{"alpha": 1, "rho": 1, "coeff": "2*"}]}]}, "column"),
        ({"m": 2, "q": 1, "equations": [{"pi_terms": [{"alpha": 1, "rho": 1, "coeff_den": 0}]}]}, "zero denominator"),
    ]
    for data, msg in bad:
        with pytest.raises(cartan.TableauError, match=msg):
            cartan.tableau_from_dict(data)
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(cartan.TableauError, match="malformed"):
        cartan.load_tableau(p)


def test_fraction_coefficients_from_json():
    data = {"m": 2, "q": 1, "equations": [{"pi_terms": [{"alpha": 1, "rho": 2, "coeff_num": 3, "coeff_den": 4}],
                                           "torsion": [{"rho": 2, "sigma": 1, "coeff": "1/2"}]}]}
    t = cartan.tableau_from_dict(json.loads(json.dumps(data)))
    assert t.E[0][0][1] == Fraction(3, 4)
    assert t.T[0][0][1] == Fraction(-1, 2) and t.T[0][1][0] == Fraction(1, 2)
    # (3/4) p_1 w^1 ^ w^2 ... solvable
    assert cartan.integral_element_dim(t) == 1


def test_row_reduce():
    rows = [[Fraction(1), Fraction(2)], [Fraction(2), Fraction(4)]]
    red, piv = cartan.row_reduce(rows, 2)
    assert piv == [0] and red == [[1, 2]]
