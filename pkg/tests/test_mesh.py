import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_msem.errors import ConfigError, MeshDegeneracyError
from hybrid_msem.mesh import MeshConfig, build_mesh, jacobian
from hybrid_msem.polybasis import gauss_rule


def test_orthogonal_3x3_squares(unit_mesh):
    mesh = unit_mesh(3)
    assert mesh.n_elements == 9
    for el in mesh.elements:
        (a, b), (c, d) = el.x_range, el.y_range
        assert b - a == pytest.approx(1 / 3, abs=1e-15)
        assert d - c == pytest.approx(1 / 3, abs=1e-15)
        J, det = jacobian(el, 0.3, -0.7)
        np.testing.assert_allclose(J, np.diag([1 / 6, 1 / 6]), atol=1e-15)
        assert det == pytest.approx(1 / 36, abs=1e-15)


def test_curved_with_zero_amplitude_equals_orthogonal(unit_mesh):
    flat, curved = unit_mesh(3), unit_mesh(3, "curved", c=0.0)
    s = np.linspace(-1, 1, 17)
    XI, ETA = np.meshgrid(s, s)
    for a, b in zip(flat.elements, curved.elements):
        for u, v in zip(a.map(XI, ETA), b.map(XI, ETA)):
            assert np.max(np.abs(u - v)) == 0.0
        np.testing.assert_array_equal(a.jacobian(XI, ETA)[0], b.jacobian(XI, ETA)[0])


def test_curved_2x2_positive_jacobian_dense_sampling(unit_mesh):
    mesh = unit_mesh(2, "curved", c=0.15)
    s = np.linspace(-1, 1, 50)
    XI, ETA = np.meshgrid(s, s)
    for el in mesh.elements:
        assert np.min(el.jacobian(XI, ETA)[1]) > 0


def test_curved_jacobian_matches_central_differences(unit_mesh):
    el = unit_mesh(3, "curved", c=0.15).elements[4]
    J, det = jacobian(el, 0.0, 0.0)
    h = 1e-6
    fd = np.empty((2, 2))
    for s, (dxi, deta) in enumerate([(h, 0.0), (0.0, h)]):
        xp, yp = el.map(dxi, deta)
        xm, ym = el.map(-dxi, -deta)
        fd[:, s] = [(xp - xm) / (2 * h), (yp - ym) / (2 * h)]
    np.testing.assert_allclose(J, fd, atol=1e-8)
    assert det == pytest.approx(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0], abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(1, 5),
    c=st.floats(0.0, 0.15),
    xi=st.floats(-1, 1),
    eta=st.floats(-1, 1),
)
def test_jacobian_finite_difference_property(k, c, xi, eta):
    mesh = build_mesh(MeshConfig(k, k, deformation="curved", amplitude=c))
    el = mesh.elements[-1]
    h = 1e-6
    J, _ = el.jacobian(xi, eta)
    for s, (dxi, deta) in enumerate([(h, 0.0), (0.0, h)]):
        xp, yp = el.map(xi + dxi, eta + deta)
        xm, ym = el.map(xi - dxi, eta - deta)
        np.testing.assert_allclose([(xp - xm) / (2 * h), (yp - ym) / (2 * h)], J[:, s], atol=1e-8)


@pytest.mark.parametrize("kind", ["orthogonal", "curved"])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_tiling_area(kind, k):
    mesh = build_mesh(MeshConfig(k, k + 1, domain=(0.0, 2.0, -1.0, 0.5), deformation=kind))
    g, w = gauss_rule(12)
    XI, ETA = np.meshgrid(g, g, indexing="ij")
    area = sum(np.sum(np.outer(w, w) * el.jacobian(XI, ETA)[1]) for el in mesh.elements)
    assert area == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["orthogonal", "curved"])
def test_neighbor_edges_coincide(kind):
    mesh = build_mesh(MeshConfig(4, 3, deformation=kind))
    s = gauss_rule(9)[0]
    one = np.ones_like(s)
    for e, el in enumerate(mesh.elements):
        r = mesh.neighbor(e, "right")
        if r is not None:
            a = np.array(el.map(one, s))
            b = np.array(mesh.elements[r].map(-one, s))
            assert np.max(np.abs(a - b)) <= 1e-13
        t = mesh.neighbor(e, "top")
        if t is not None:
            a = np.array(el.map(s, one))
            b = np.array(mesh.elements[t].map(s, -one))
            assert np.max(np.abs(a - b)) <= 1e-13


def test_adjacency_and_boundary():
    mesh = build_mesh(MeshConfig(3, 2))
    assert mesh.neighbor(0, "right") == 1
    assert mesh.neighbor(0, "top") == 3
    assert mesh.neighbor(0, "left") is None
    assert mesh.boundary_sides(4) == ["top"]
    assert mesh.n_interior_interfaces == 2 * 2 + 3 * 1
    for e in range(mesh.n_elements):
        for side, back in [("left", "right"), ("right", "left"), ("bottom", "top"), ("top", "bottom")]:
            n = mesh.neighbor(e, side)
            if n is not None:
                assert mesh.neighbor(n, back) == e


def test_over_curved_mesh_is_rejected():
    with pytest.raises(MeshDegeneracyError) as info:
        build_mesh(MeshConfig(3, 3, deformation="curved", amplitude=0.3))
    assert info.value.element is not None
    assert f"element {info.value.element}" in str(info.value)
    assert info.value.exit_code == 3


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kx=0, ky=2),
        dict(kx=2, ky=-1),
        dict(kx=2, ky=2, domain=(1.0, 0.0, 0.0, 1.0)),
        dict(kx=2, ky=2, deformation="twisted"),
        dict(kx=2, ky=2, deformation="curved", amplitude=-0.1),
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        MeshConfig(**kwargs)
