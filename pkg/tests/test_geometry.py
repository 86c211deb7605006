import numpy as np
import pytest

from curveddg.geometry import (REF_NODES, CurvedMap, CurvedMaps, DegenerateMapError, face_frame, face_frames,
                               locate_points, map_derivatives, map_point, q_form)
from curveddg.mesh import build_connectivity, curve_boundary, generate_disk_mesh


@pytest.fixture(scope="module")
def disk():
    mesh = generate_disk_mesh(0.3)
    faces = build_connectivity(mesh)
    return mesh, faces, curve_boundary(mesh, faces=faces)


def curved_maps(disk, count=10, seed=0):
    _, _, maps = disk
    idx = np.flatnonzero(maps.curved)
    rng = np.random.default_rng(seed)
    return [maps[i] for i in rng.choice(idx, size=min(count, len(idx)), replace=False)]


def random_ref_points(rng, n):
    p = rng.dirichlet([1, 1, 1], size=n)[:, :2]
    return 0.1 + 0.8 * p  # stay away from the edges for central differences


def test_map_point_is_nodal(disk):
    for cmap in curved_maps(disk):
        assert np.allclose(cmap.map_point(REF_NODES), cmap.nodes, atol=1e-15)
        assert np.array_equal(map_point(cmap, [0.0, 0.0]), cmap.nodes[0])


def test_affine_element_midpoint_and_derivatives():
    v = np.array([[0.2, 0.1], [1.0, 0.3], [0.4, 0.9]])
    nodes = np.vstack([v, 0.5 * (v + v[[1, 2, 0]])])
    cmap = CurvedMap(nodes)
    assert np.allclose(cmap.map_point([0.5, 0.0]), 0.5 * (v[0] + v[1]), atol=1e-15)
    d = map_derivatives(cmap, [0.3, 0.3])
    assert np.allclose(d["DF"], cmap.B, atol=1e-15)
    assert np.allclose(d["D2F"], 0, atol=1e-15)
    assert np.allclose(d["D2F_inv"], 0, atol=1e-14)
    assert np.allclose(d["D3F_inv"], 0, atol=1e-14)


def test_jacobian_matches_finite_differences(disk, rng):
    step = 1e-5
    for cmap in curved_maps(disk):
        for xi in random_ref_points(rng, 5):
            DF = cmap.jacobian(xi)
            fd = np.column_stack([(cmap.map_point(xi + step * e) - cmap.map_point(xi - step * e)) / (2 * step)
                                  for e in np.eye(2)])
            assert np.linalg.norm(fd - DF) <= 1e-6 * np.linalg.norm(DF)


def _inverse_jacobian_at(cmap, x):
    return np.linalg.inv(cmap.jacobian(cmap.inverse(x)))


def test_inverse_map_derivatives_match_finite_differences(disk, rng):
    for cmap in curved_maps(disk):
        xi = random_ref_points(rng, 1)[0]
        x = cmap.map_point(xi)
        d = cmap.map_derivatives(xi)
        h = 1e-4 * np.linalg.norm(cmap.B)
        # D2(F^{-1})[a, i, j] = d/dx_j of D(F^{-1})[a, i]
        fd2 = np.stack([(_inverse_jacobian_at(cmap, x + h * e) - _inverse_jacobian_at(cmap, x - h * e)) / (2 * h)
                        for e in np.eye(2)], axis=-1)
        assert np.linalg.norm(fd2 - d["D2F_inv"]) <= 1e-5 * np.linalg.norm(d["D2F_inv"])

        def g2_at(y):
            return cmap.map_derivatives(cmap.inverse(y))["D2F_inv"]

        fd3 = np.stack([(g2_at(x + h * e) - g2_at(x - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
        assert np.linalg.norm(fd3 - d["D3F_inv"]) <= 1e-5 * np.linalg.norm(d["D3F_inv"])


def test_inverse_round_trip(disk, rng):
    for cmap in curved_maps(disk):
        xi = random_ref_points(rng, 1)[0]
        assert np.allclose(cmap.inverse(cmap.map_point(xi)), xi, atol=1e-13)


def test_second_derivative_of_map_is_constant(disk):
    cmap = curved_maps(disk, 1)[0]
    maps = CurvedMaps(cmap.nodes)
    step = 1e-4
    xi = np.array([0.3, 0.2])
    fd = (maps.jacobians(np.array([xi + step * np.eye(2)[0]]))[0, 0]
          - maps.jacobians(np.array([xi - step * np.eye(2)[0]]))[0, 0]) / (2 * step)
    assert np.allclose(fd, maps.D2F[0][:, :, 0], atol=1e-9)


def test_degenerate_map_rejected():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = np.vstack([v, [[0.5, 0.0], [0.5, 0.5], [0.9, 0.9]]])  # edge midpoint pulled across
    maps = CurvedMaps(nodes)
    with pytest.raises(DegenerateMapError):
        maps.derivatives(np.array([[0.0, 1.0], [0.0, 0.5], [0.05, 0.9]]))


def test_straight_face_frame(disk):
    _, faces, maps = disk
    f = faces[faces.interior[0]]
    fr = face_frame(f, maps, np.linspace(0, 1, 5))
    assert np.allclose(fr.curvature, 0, atol=1e-13)
    assert np.allclose(fr.shape_operator, 0, atol=1e-13)


def test_frame_orthonormal_and_outward(disk):
    mesh, faces, maps = disk
    t = np.array([0.1, 0.5, 0.9])
    fr, _, _ = face_frames(maps, faces.left, faces.left_edge, t)
    assert np.allclose(np.linalg.norm(fr.tangent, axis=-1), 1, atol=1e-15)
    assert np.allclose(np.linalg.norm(fr.normal, axis=-1), 1, atol=1e-15)
    assert np.allclose(np.sum(fr.tangent * fr.normal, -1), 0, atol=1e-15)
    centroid = maps.map_points(np.array([[1 / 3, 1 / 3]]))[:, 0]
    out = np.sum(fr.normal * (fr.point - centroid[faces.left][:, None]), -1)
    assert np.all(out > 0)


def test_boundary_curvature_matches_parametric_formula_and_tends_to_one():
    errors = []
    for h in (0.5, 0.25, 0.125):
        mesh = generate_disk_mesh(h)
        faces = build_connectivity(mesh)
        maps = curve_boundary(mesh, faces=faces)
        bf = faces.boundary
        t = np.array([0.2, 0.5, 0.8])
        fr, _, _ = face_frames(maps, faces.left[bf], faces.left_edge[bf], t)
        # independent curvature from finite differences of the face curve
        f = faces[bf[0]]
        step = 1e-4
        p = lambda s: face_frame(f, maps, s).point  # noqa: E731
        d1 = (p(0.5 + step) - p(0.5 - step)) / (2 * step)
        d2 = (p(0.5 + step) - 2 * p(0.5) + p(0.5 - step)) / step**2
        k = (d1[0] * d2[1] - d1[1] * d2[0]) / np.linalg.norm(d1) ** 3
        assert k == pytest.approx(fr.curvature[0, 1], rel=1e-5)
        assert np.all(fr.curvature > 0)  # outward normal on a convex domain
        errors.append(np.max(np.abs(fr.curvature - 1)))
    assert errors[0] > errors[1] > errors[2]
    assert errors[-1] < 0.05


def test_q_form_is_curvature_times_tangential_components(disk):
    _, faces, maps = disk
    fr = face_frame(faces[faces.boundary[0]], maps, 0.3)
    a, b = np.array([0.3, -1.2]), np.array([2.0, 0.5])
    expected = fr.curvature * (a @ fr.tangent) * (b @ fr.tangent)
    assert q_form(fr, a, b) == pytest.approx(expected, rel=1e-14)
    assert q_form(fr, a, fr.normal) == pytest.approx(0, abs=1e-15)


def test_locate_points(disk, rng):
    _, _, maps = disk
    e = rng.integers(0, len(maps), 100)
    xi = rng.dirichlet([1, 1, 1], size=100)[:, :2]
    x = maps.map_points(xi[:, None], e)[:, 0]
    elem, ref = locate_points(maps, x)
    assert np.all(elem >= 0)
    back = maps.map_points(ref[:, None], elem)[:, 0]
    assert np.allclose(back, x, atol=1e-13)
    elem, ref = locate_points(maps, [[3.0, 0.0]])
    assert elem[0] == -1 and np.all(np.isnan(ref))
