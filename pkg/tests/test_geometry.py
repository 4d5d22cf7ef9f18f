"""Simplex construction, membrane projection, barycentric/Born agreement."""

import math

import numpy as np
import pytest

from helpers import random_density, random_orthonormal_frame, random_pure

from hm_sim.bloch import (
    BlochVector,
    DensityOperator,
    PureState,
    build_generator_basis,
    density_to_bloch,
    pure_to_density,
)
from hm_sim.errors import (
    GeometryError,
    InvalidMembranePointError,
    ObservableError,
)
from hm_sim.geometry import (
    Observable,
    barycentric_coordinates,
    born_probabilities,
    build_measurement_simplex,
    canonical_observable,
    classify_breaking_point,
    project_onto_membrane,
    spin_observable,
    subsimplex_volume_fractions,
)


def make_simplex(n, labels=None):
    return build_measurement_simplex(
        canonical_observable(n, labels), build_generator_basis(n)
    )


def n2_state(theta):
    """Unit Bloch vector at polar angle theta from the +z vertex."""
    return BlochVector(2, np.array([math.sin(theta), 0.0, math.cos(theta)]))


def test_observable_partition_from_labels():
    obs = canonical_observable(4, (1.0, 2.0, 1.0, 3.0))
    assert obs.degeneracy_partition == ((0, 2), (1,), (3,))
    assert obs.block_of(2) == (0, 2)


def test_observable_rejects_nonorthogonal_eigenstates():
    s0 = PureState.normalized([1.0, 0.0])
    s1 = PureState.normalized([1.0, 1.0])
    with pytest.raises(ObservableError):
        Observable(2, (s0, s1), (0.0, 1.0))


def test_n2_simplex_is_antipodal():
    s = make_simplex(2)
    np.testing.assert_allclose(s.vertices[0], [0, 0, 1], atol=1e-14)
    np.testing.assert_allclose(s.vertices[1], [0, 0, -1], atol=1e-14)


@pytest.mark.parametrize("n", (3, 4, 6, 8))
def test_vertex_inner_products(n):
    # Oracle: Tr(P_i P_j) = 0 for orthogonal projections forces the Bloch
    # inner product to -1/(N-1); checked both with canonical and random frames.
    s = make_simplex(n)
    gram = s.vertices @ s.vertices.T
    expected = np.full((n, n), -1.0 / (n - 1)) + np.eye(n) * (1 + 1.0 / (n - 1))
    np.testing.assert_allclose(gram, expected, atol=1e-10)

    rng = np.random.default_rng(500 + n)
    frame = random_orthonormal_frame(rng, n)
    states = tuple(PureState(n, frame[:, k]) for k in range(n))
    obs = Observable(n, states, tuple(float(i) for i in range(n)))
    s2 = build_measurement_simplex(obs, build_generator_basis(n))
    gram2 = s2.vertices @ s2.vertices.T
    np.testing.assert_allclose(gram2, expected, atol=1e-10)


def test_projection_n2_lands_at_cos_theta():
    s = make_simplex(2)
    for theta in (0.0, 0.3, math.pi / 3, math.pi / 2, 2.5, math.pi):
        p = project_onto_membrane(n2_state(theta), s)
        np.testing.assert_allclose(
            p.coordinates, [0, 0, math.cos(theta)], atol=1e-12
        )


def test_projection_fixes_vertices():
    s = make_simplex(5)
    for row in s.vertices:
        p = project_onto_membrane(BlochVector(5, row), s)
        np.testing.assert_allclose(p.coordinates, row, atol=1e-12)


@pytest.mark.parametrize("n", (2, 3, 4, 7))
def test_projection_of_center_is_centroid(n):
    s = make_simplex(n)
    p = project_onto_membrane(BlochVector.center(n), s)
    np.testing.assert_allclose(p.coordinates, s.vertices.mean(axis=0), atol=1e-12)
    w = barycentric_coordinates(p, s).weights
    np.testing.assert_allclose(w, np.full(n, 1.0 / n), atol=1e-12)


@pytest.mark.parametrize("n", (2, 3, 5, 8))
def test_projection_residual_orthogonal_to_edges(n):
    rng = np.random.default_rng(600 + n)
    s = make_simplex(n)
    basis = build_generator_basis(n)
    for _ in range(10):
        r = density_to_bloch(random_density(rng, n), basis)
        resid = r.coordinates - project_onto_membrane(r, s).coordinates
        for i in range(n):
            for j in range(i + 1, n):
                edge = s.vertices[i] - s.vertices[j]
                assert abs(np.dot(resid, edge)) <= 1e-10


def test_barycentric_examples():
    s = make_simplex(3)
    w = barycentric_coordinates(BlochVector(3, s.vertices[0]), s).weights
    np.testing.assert_allclose(w, [1, 0, 0], atol=1e-12)

    s2 = make_simplex(2)
    for theta in (0.4, math.pi / 3, 2.0):
        p = BlochVector(2, np.array([0, 0, math.cos(theta)]))
        w = barycentric_coordinates(p, s2).weights
        np.testing.assert_allclose(
            w,
            [math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2],
            atol=1e-12,
        )


def test_barycentric_rejects_off_hull_and_outside_points():
    s = make_simplex(3)
    rel = np.zeros(8)
    rel[3] = 1e-4  # antisymmetric direction, orthogonal to the membrane plane
    off = BlochVector(3, s.vertices.mean(axis=0) + rel)
    with pytest.raises(GeometryError):
        barycentric_coordinates(off, s)

    # Walk from a vertex through the centroid and beyond the opposite face
    # (t = 1.5 hits the face); the point stays inside the unit ball but its
    # first barycentric weight is -1/15, beyond every clamp tolerance.
    t = 1.6
    centroid = s.vertices.mean(axis=0)
    outside = BlochVector(3, (1 - t) * s.vertices[0] + t * centroid)
    with pytest.raises(InvalidMembranePointError):
        barycentric_coordinates(outside, s)


def test_born_probabilities_examples():
    obs = canonical_observable(3)
    d = pure_to_density(PureState.basis_state(3, 1))
    np.testing.assert_allclose(
        born_probabilities(d, obs).weights, [0, 1, 0], atol=1e-14
    )
    np.testing.assert_allclose(
        born_probabilities(DensityOperator.maximally_mixed(3), obs).weights,
        np.full(3, 1 / 3),
        atol=1e-14,
    )
    # Spin-1/2 at polar angle pi/3 from the measurement axis: cos^2(pi/6) = 3/4.
    basis2 = build_generator_basis(2)
    from hm_sim.bloch import bloch_to_density

    d2 = bloch_to_density(n2_state(math.pi / 3), basis2)
    np.testing.assert_allclose(
        born_probabilities(d2, canonical_observable(2)).weights,
        [0.75, 0.25],
        atol=1e-12,
    )


@pytest.mark.parametrize("n", range(2, 9))
def test_born_geometry_identity(n):
    # The central claim: barycentric coordinates of the projected state point
    # equal the Hilbert-space probabilities Tr(D P_i).
    rng = np.random.default_rng(700 + n)
    basis = build_generator_basis(n)
    obs = canonical_observable(n)
    s = build_measurement_simplex(obs, basis)
    for _ in range(25):
        d = pure_to_density(random_pure(rng, n))
        r = density_to_bloch(d, basis)
        w = barycentric_coordinates(project_onto_membrane(r, s), s).weights
        p = born_probabilities(d, obs).weights
        assert np.max(np.abs(w - p)) <= 1e-9
    for _ in range(10):
        d = random_density(rng, n)
        r = density_to_bloch(d, basis)
        w = barycentric_coordinates(project_onto_membrane(r, s), s).weights
        p = born_probabilities(d, obs).weights
        assert np.max(np.abs(w - p)) <= 1e-9


def test_subsimplex_volume_examples():
    s = make_simplex(3)
    centroid = BlochVector(3, s.vertices.mean(axis=0))
    np.testing.assert_allclose(
        subsimplex_volume_fractions(centroid, s).weights,
        np.full(3, 1 / 3),
        atol=1e-12,
    )
    midpoint = BlochVector(3, (s.vertices[1] + s.vertices[2]) / 2)
    np.testing.assert_allclose(
        subsimplex_volume_fractions(midpoint, s).weights,
        [0.0, 0.5, 0.5],
        atol=1e-12,
    )


@pytest.mark.parametrize("n", (2, 3, 4, 6, 8))
def test_volume_and_solve_routes_agree(n):
    rng = np.random.default_rng(800 + n)
    s = make_simplex(n)
    for _ in range(20):
        w = rng.dirichlet(np.ones(n))
        p = BlochVector(n, s.from_barycentric(w))
        via_volumes = subsimplex_volume_fractions(p, s).weights
        via_solve = barycentric_coordinates(p, s).weights
        assert np.max(np.abs(via_volumes - via_solve)) <= 1e-9
        assert np.max(np.abs(via_solve - w)) <= 1e-9


def _membership_oracle(x, p, vertices):
    """Brute sub-simplex membership with lowest-index tie-break."""
    n = vertices.shape[0]
    for i in range(n):
        pts = vertices.copy()
        pts[i] = p
        a = np.vstack([pts.T, np.ones((1, n))])
        b = np.append(x, 1.0)
        w, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
        if np.linalg.norm(a @ w - b) <= 1e-8 and w.min() >= -1e-9:
            return i
    return None


def test_classify_examples():
    s = make_simplex(3)
    centroid = BlochVector(3, s.vertices.mean(axis=0))
    midpoint = BlochVector(3, (s.vertices[1] + s.vertices[2]) / 2)
    # Breaking on the far edge detaches anchors n_2, n_3: outcome is index 0.
    assert classify_breaking_point(midpoint, centroid, s) == 0
    # Breaking exactly at the landed point: tie among all, lowest index wins.
    assert classify_breaking_point(centroid, centroid, s) == 0
    # Near a vertex the outcome is never that vertex (it anchors the other
    # subregions, not its own).
    for eps in (1e-3, 1e-6):
        x = BlochVector(
            3, s.from_barycentric(np.array([1 - eps, eps * 0.6, eps * 0.4]))
        )
        assert classify_breaking_point(x, centroid, s) in (1, 2)


@pytest.mark.parametrize("n", (2, 3, 4, 6))
def test_classify_matches_membership_oracle(n):
    rng = np.random.default_rng(900 + n)
    s = make_simplex(n)
    for _ in range(40):
        u = rng.dirichlet(np.ones(n))
        p = BlochVector(n, s.from_barycentric(u))
        x = BlochVector(n, s.from_barycentric(rng.dirichlet(np.ones(n))))
        got = classify_breaking_point(x, p, s)
        expected = _membership_oracle(x.coordinates, p.coordinates, s.vertices)
        assert got == expected


@pytest.mark.parametrize("n", (3, 5))
def test_classification_partitions_match_weights(n):
    # Frequencies of classified uniform samples converge to the barycentric
    # weights of the landed point (statistical check, 4 sigma).
    rng = np.random.default_rng(1000 + n)
    s = make_simplex(n)
    u = rng.dirichlet(np.ones(n))
    p = BlochVector(n, s.from_barycentric(u))
    trials = 20000
    e = rng.standard_exponential((trials, n))
    v = e / e.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        ratios = v / u
    outcomes = np.argmin(ratios, axis=1)
    freq = np.bincount(outcomes, minlength=n) / trials
    band = 4.0 * np.sqrt(u * (1 - u) / trials)
    assert np.all(np.abs(freq - u) <= band)


def test_classify_rejects_points_outside_simplex():
    s = make_simplex(3)
    centroid = BlochVector(3, s.vertices.mean(axis=0))
    t = 1.6
    outside = BlochVector(3, (1 - t) * s.vertices[0] + t * centroid.coordinates)
    with pytest.raises(GeometryError):
        classify_breaking_point(outside, centroid, s)


def test_spin_observable_vertices_align_with_axis():
    basis = build_generator_basis(2)
    rng = np.random.default_rng(11)
    for _ in range(10):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        s = build_measurement_simplex(spin_observable(axis), basis)
        np.testing.assert_allclose(s.vertices[0], axis, atol=1e-12)
        np.testing.assert_allclose(s.vertices[1], -axis, atol=1e-12)
    with pytest.raises(GeometryError):
        spin_observable([0.0, 0.0, 0.0])
