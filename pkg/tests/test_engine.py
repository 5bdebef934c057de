import numpy as np
import pytest

from gaussdegen import dsl, engine, fixtures
from gaussdegen.engine import CaseTag
from gaussdegen.proj import HomPoint, point_distance, subspace_angle

from oracles import plucker_gauss_rank, random_projective


def load(name):
    return dsl.parse(fixtures.read_text(name))


def interior(spec, rng, k):
    return spec.lower + (0.1 + 0.8 * rng.random((k, spec.n))) * (spec.upper - spec.lower)


EXPECTED_RANK = {
    "plane.txt": 0,
    "quadric.txt": 2,
    "hypersurface.txt": 3,
    "cone.txt": 1,
    "case1.txt": 2,
    "twisted_cone.txt": 2,
    "twisted_cylinder.txt": 2,
}


@pytest.mark.parametrize("name, rank", sorted(EXPECTED_RANK.items()))
def test_gauss_rank_matches_oracle(name, rank):
    spec = load(name)
    for u in interior(spec, np.random.default_rng(11), 6):
        td = engine.gauss_rank(spec, u)
        assert td.rank == rank
        assert td.leaf.dim == spec.n - rank
        assert plucker_gauss_rank(spec, u) == rank


def test_singular_point_detected():
    spec = dsl.parse("params n=1 ambient N=2 domain [-1,1]\n(1, t1^2, t1^3)")
    with pytest.raises(engine.SingularPointError):
        engine.gauss_rank(spec, [0.0])


def test_cone_leaf_passes_through_vertex():
    spec = load("cone.txt")
    vertex = np.array([0, 0, 0, 0, 1.0])
    for u in interior(spec, np.random.default_rng(0), 5):
        td = engine.gauss_rank(spec, u)
        assert td.leaf.contains([vertex], 1e-9)
        assert td.leaf.contains([td.point.coords], 1e-12)


def test_tangent_space_constant_along_leaf():
    spec = load("twisted_cone.txt")
    u = spec.center
    base = engine.tangent_space(spec, u).tangent
    for s in np.linspace(0.25, 0.95, 5):
        other = engine.tangent_space(spec, [u[0], u[1], s]).tangent
        assert subspace_angle(base, other) < 1e-7


def test_adapted_frame():
    spec = load("case1.txt")
    af = engine.adapted_frame(spec, spec.center)
    assert af.l == 1 and af.r == 2
    assert af.residual < 1e-10
    F = af.frame.matrix
    assert np.allclose(F[:, 0], spec.evaluate(spec.center))
    assert af.frame.condition_number < 1e6


def test_frame_needs_positive_rank():
    with pytest.raises(engine.FrameError):
        engine.adapted_frame(load("plane.txt"), [0.1, 0.2])


@pytest.mark.parametrize("name", ["cone.txt", "twisted_cone.txt", "twisted_cylinder.txt", "case1.txt"])
def test_symmetry_of_b_c(name):
    spec = load(name)
    for u in interior(spec, np.random.default_rng(4), 8):
        fd = engine.fundamental_matrices(spec, u)
        assert fd.max_symmetry_residual < 1e-9
        assert np.allclose(fd.B, fd.B.T)


def test_focal_polynomial_from_matrices():
    fp = engine.focal_polynomial([np.diag([1.0, 2.0])])
    assert fp.coeffs[(2, 0)] == pytest.approx(1.0)
    assert fp.coeffs[(1, 1)] == pytest.approx(3.0)
    assert fp.coeffs[(0, 2)] == pytest.approx(2.0)
    assert not engine.is_r_fold_focus(fp)
    assert sorted(fp.generator_roots().real) == pytest.approx([-2.0, -1.0])
    nil = engine.focal_polynomial([np.array([[0.0, 1.0], [0.0, 0.0]])])
    assert engine.is_r_fold_focus(nil)
    assert nil([1.0, 5.0]) == pytest.approx(1.0)


def test_nilpotency_and_rank_of_c():
    nilpotent, r1, _ = engine.nilpotency_and_r1([np.array([[0.0, 1.0], [0.0, 0.0]])])
    assert nilpotent and r1 == 1
    nilpotent, _, _ = engine.nilpotency_and_r1([np.eye(2)])
    assert not nilpotent


@pytest.mark.parametrize("name", ["twisted_cone.txt", "twisted_cylinder.txt", "case1.txt"])
def test_r_fold_focus_on_degenerate_fixtures(name):
    spec = load(name)
    for u in interior(spec, np.random.default_rng(9), 5):
        fd = engine.fundamental_matrices(spec, u)
        fp = engine.focal_polynomial(fd)
        assert fp.relative_residual() < 1e-8
        assert engine.is_r_fold_focus(fp)


def test_cone_focus_is_vertex():
    spec = load("cone.txt")
    vertex = HomPoint([0, 0, 0, 0, 1.0])
    for u in interior(spec, np.random.default_rng(1), 4):
        assert point_distance(engine.focus_map(spec, u), vertex) < 1e-9


def test_case1_focus_lies_on_surface():
    spec = load("case1.txt")
    surface = load("case1_surface.txt")
    for u in interior(spec, np.random.default_rng(2), 4):
        f = engine.focus_map(spec, u)
        assert point_distance(f, HomPoint(surface.evaluate(u[:2]))) < 1e-9


def test_focus_jacobian_rank():
    spec = load("case1.txt")
    _, J = engine.focus_jacobian(spec, spec.center)
    assert engine.focus_rank(J, spec) == 2
    spec = load("twisted_cone.txt")
    _, J = engine.focus_jacobian(spec, spec.center)
    assert engine.focus_rank(J, spec) == 1


@pytest.mark.parametrize(
    "name, tag, focal_dim",
    [
        ("plane.txt", CaseTag.NON_DEGENERATE, None),
        ("hypersurface.txt", CaseTag.NON_DEGENERATE, None),
        ("quadric.txt", CaseTag.NON_DEGENERATE, None),
        ("cone.txt", CaseTag.CONE, 0),
        ("case1.txt", CaseTag.FOCAL_SURFACE, 2),
        ("twisted_cone.txt", CaseTag.TWISTED_CONE, 1),
        ("twisted_cylinder.txt", CaseTag.TWISTED_CYLINDER, 1),
    ],
)
def test_classify_fixtures(name, tag, focal_dim):
    verdict = engine.classify(load(name), engine.default_grid(load(name), 5))
    assert verdict.case_tag == tag
    assert verdict.focal_dim == focal_dim


def test_plane_detail():
    verdict = engine.classify(load("plane.txt"))
    assert verdict.detail == "plane"


def test_two_dimensional_leaves_undetermined():
    spec = dsl.parse("params n=3 ambient N=4 domain [-1,1]x[-1,1]x[-1,1]\n(1, t1, t1^2, t2, t3)")
    assert engine.gauss_rank(spec, [0.2, 0.1, 0.3]).rank == 1
    assert engine.classify(spec, engine.default_grid(spec, 5)).case_tag == CaseTag.UNDETERMINED


def test_default_grid():
    g2 = engine.default_grid(load("cone.txt"))
    assert g2.shape == (81, 2)
    g3 = engine.default_grid(load("case1.txt"))
    assert g3.shape == (81, 3)
    spec = load("case1.txt")
    assert np.all(g3 > spec.lower) and np.all(g3 < spec.upper)


def test_asymptotic_directions_on_quadric():
    spec = load("quadric.txt")
    for u in interior(spec, np.random.default_rng(3), 5):
        assert engine.verify_asymptotic_direction(spec, np.array([1.0, 0.0]), u)
        assert engine.verify_asymptotic_direction(spec, np.array([0.0, 1.0]), u)
        assert not engine.verify_asymptotic_direction(spec, np.array([1.0, 1.0]), u)


def test_case1_surface_asymptotic_field():
    spec = load("case1_surface.txt")
    field = lambda u: np.array([1.0, u[1]])  # noqa: E731
    for u in interior(spec, np.random.default_rng(5), 5):
        assert engine.verify_asymptotic_direction(spec, field, u)
        assert not engine.verify_asymptotic_direction(spec, np.array([0.0, 1.0]), u)


def test_focus_second_forms_annihilate_generator():
    spec = load("case1.txt")
    ff = engine.focus_second_forms(spec, spec.center)
    assert np.max(ff.values) < 1e-8
    assert ff.generator_residual < 1e-6


def test_projective_invariance_quick():
    spec = load("twisted_cone.txt")
    rng = np.random.default_rng(8)
    M = random_projective(rng, 5)
    moved = dsl.transform_spec(spec, M)
    grid = engine.default_grid(spec, 5)
    assert engine.classify(moved, grid).case_tag == CaseTag.TWISTED_CONE
    f0 = engine.focus_map(spec, spec.center).coords
    f1 = engine.focus_map(moved, spec.center)
    assert point_distance(f1, HomPoint(M @ f0)) < 1e-9
