"""Quadratic (P2) element maps, their inverse derivatives, and face frames."""

from dataclasses import dataclass

import numpy as np

from .mesh import GeometryError, LOCAL_EDGES

# reference vertices and the direction of each ccw reference edge
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_EDGE_START = REF_VERTICES[LOCAL_EDGES[:, 0]]
REF_EDGE_DIR = REF_VERTICES[LOCAL_EDGES[:, 1]] - REF_EDGE_START
REF_NODES = np.vstack([REF_VERTICES, 0.5 * (REF_EDGE_START + REF_VERTICES[LOCAL_EDGES[:, 1]])])


class DegenerateMapError(GeometryError):
    pass


class DegenerateFaceError(GeometryError):
    pass


def p2_shape(pts):
    """P2 geometry basis at reference points ``(..., 2)``: values and gradients."""
    x, y = pts[..., 0], pts[..., 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    N = np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                  4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)
    gx = np.stack([1 - 4 * l0, 4 * l1 - 1, 0 * x, 4 * (l0 - l1), 4 * l2, -4 * l2], axis=-1)
    gy = np.stack([1 - 4 * l0, 0 * x, 4 * l2 - 1, -4 * l1, 4 * l1, 4 * (l0 - l2)], axis=-1)
    return N, np.stack([gx, gy], axis=-1)


# second derivatives of the P2 geometry basis are constant
P2_HESSIAN = np.array([
    [[4, 4], [4, 4]],
    [[4, 0], [0, 0]],
    [[0, 0], [0, 4]],
    [[-8, -4], [-4, 0]],
    [[0, 4], [4, 0]],
    [[0, -4], [-4, -8]],
], dtype=float)


def inverse_derivatives(DF, D2F):
    """Derivatives of F^{-1} up to order three at image points.

    ``DF[..., i, a] = dF_i/dx_a`` and ``D2F[..., i, a, b]``; with D^3F = 0,
    implicit differentiation of F(G(x)) = x is exact.
    Returns ``G1[..., a, i] = dG_a/dx_i``, ``G2[..., a, i, j]``, ``G3[..., a, i, j, k]``.
    """
    G1 = np.linalg.inv(DF)
    # G2_{a ij} = -G1_{a m} F_{m bc} G1_{b i} G1_{c j}
    G2 = -np.einsum("...am,...mbc,...bi,...cj->...aij", G1, D2F, G1, G1, optimize=True)
    # differentiate F_{m b}(G) G2_{b ij} + F_{m bc} G1_{b i} G1_{c j} = 0 once more
    T = (np.einsum("...mbc,...ck,...bij->...mijk", D2F, G1, G2, optimize=True)
         + np.einsum("...mbc,...bik,...cj->...mijk", D2F, G2, G1, optimize=True)
         + np.einsum("...mbc,...bi,...cjk->...mijk", D2F, G1, G2, optimize=True))
    G3 = -np.einsum("...am,...mijk->...aijk", G1, T, optimize=True)
    return G1, G2, G3


class CurvedMaps:
    """A batch of P2 element maps, one per element, given by six geometry nodes.

    Node order: the three vertices, then the midpoints of local edges
    (v0, v1), (v1, v2), (v2, v0).
    """

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 2:
            nodes = nodes[None]
        self.nodes = nodes
        self.nodes.setflags(write=False)
        v = nodes[:, :3]
        self.B = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)  # (nE, 2, 2)
        self.b = v[:, 0].copy()
        # D2F_{i a b} = sum_k node_{k i} H_{k a b}
        self.D2F = np.einsum("eki,kab->eiab", nodes, P2_HESSIAN)
        self.curved = np.any(np.abs(nodes[:, 3:] - 0.5 * (v[:, LOCAL_EDGES[:, 0]] + v[:, LOCAL_EDGES[:, 1]])) > 0, axis=(1, 2))

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, k):
        return CurvedMap(self.nodes[k])

    def _pts(self, pts, elements):
        pts = np.asarray(pts, dtype=float)
        nodes = self.nodes if elements is None else self.nodes[elements]
        return pts, nodes

    def map_points(self, pts, elements=None):
        """Physical points; ``pts`` is ``(nq, 2)`` shared or ``(nE, nq, 2)`` per element."""
        pts, nodes = self._pts(pts, elements)
        N, _ = p2_shape(pts)
        if pts.ndim == 2:
            return np.einsum("qk,eki->eqi", N, nodes)
        return np.einsum("eqk,eki->eqi", N, nodes)

    def jacobians(self, pts, elements=None):
        pts, nodes = self._pts(pts, elements)
        _, dN = p2_shape(pts)
        if pts.ndim == 2:
            return np.einsum("qka,eki->eqia", dN, nodes)
        return np.einsum("eqka,eki->eqia", dN, nodes)

    def hessians(self, elements=None):
        return self.D2F if elements is None else self.D2F[elements]

    def derivatives(self, pts, elements=None, check=True):
        """DF, det DF and the inverse-map derivatives G1, G2, G3 at ``pts``."""
        DF = self.jacobians(pts, elements)
        D2F = self.hessians(elements)[:, None]
        det = DF[..., 0, 0] * DF[..., 1, 1] - DF[..., 0, 1] * DF[..., 1, 0]
        if check:
            B = self.B if elements is None else self.B[elements]
            scale = np.sum(B * B, axis=(1, 2))[:, None]
            if np.any(det <= 1e-14 * scale):
                raise DegenerateMapError("element map has non-positive Jacobian determinant")
        G1, G2, G3 = inverse_derivatives(DF, np.broadcast_to(D2F, DF.shape[:-2] + (2, 2, 2)))
        return DF, det, G1, G2, G3

    def nonlinearity(self, pts=None):
        """C_K = max over sample points of ||D Phi_K B_K^{-1}||_2."""
        if pts is None:
            from .quadrature import triangle_rule
            pts = np.vstack([REF_NODES, triangle_rule(8).points])
        DF = self.jacobians(pts)
        DPhi = DF - self.B[:, None]
        M = DPhi @ np.linalg.inv(self.B)[:, None]
        ck = np.linalg.norm(M, ord=2, axis=(-2, -1)).max(axis=1)
        ck[~self.curved] = 0.0  # Phi_K vanishes identically; drop rounding noise
        return ck


@dataclass(frozen=True)
class CurvedMap:
    """Single-element view of a P2 map."""

    nodes: np.ndarray

    @property
    def B(self):
        return np.column_stack([self.nodes[1] - self.nodes[0], self.nodes[2] - self.nodes[0]])

    @property
    def b(self):
        return self.nodes[0]

    def _batch(self):
        return CurvedMaps(self.nodes)

    def map_point(self, ref_point):
        pts = np.asarray(ref_point, dtype=float)
        out = self._batch().map_points(np.atleast_2d(pts))[0]
        return out[0] if pts.ndim == 1 else out

    def jacobian(self, ref_point):
        pts = np.asarray(ref_point, dtype=float)
        out = self._batch().jacobians(np.atleast_2d(pts))[0]
        return out[0] if pts.ndim == 1 else out

    def jacobian_det(self, ref_points):
        J = self.jacobian(np.atleast_2d(ref_points))
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    def map_derivatives(self, ref_point):
        """Dictionary with DF, det, DF^{-1}, D2F and D^k(F^{-1}), k = 1..3, at one point."""
        DF, det, G1, G2, G3 = self._batch().derivatives(np.atleast_2d(ref_point))
        return {
            "DF": DF[0, 0],
            "det": float(det[0, 0]),
            "DF_inv": G1[0, 0],
            "D2F": self._batch().D2F[0],
            "D2F_inv": G2[0, 0],
            "D3F_inv": G3[0, 0],
        }

    def inverse(self, x, tol=1e-14, max_iter=50):
        """Reference point mapped to physical ``x`` (Newton iteration)."""
        x = np.asarray(x, dtype=float)
        xi = np.linalg.solve(self.B, x - self.b)
        for _ in range(max_iter):
            r = self.map_point(xi) - x
            step = np.linalg.solve(self.jacobian(xi), r)
            xi = xi - step
            if np.linalg.norm(step) < tol:
                break
        return xi


def map_point(cmap, ref_point):
    return cmap.map_point(ref_point)


def map_derivatives(cmap, ref_point):
    return cmap.map_derivatives(ref_point)


def edge_reference_points(local_edge, t):
    """Reference points of ``t`` in [0, 1] along the given local edge(s), ccw."""
    local_edge = np.asarray(local_edge)
    t = np.asarray(t, dtype=float)
    return REF_EDGE_START[local_edge][..., None, :] + t[..., :, None] * REF_EDGE_DIR[local_edge][..., None, :]


@dataclass(frozen=True)
class FaceFrame:
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    metric: np.ndarray
    curvature: np.ndarray

    @property
    def shape_operator(self):
        """grad_T n^T = H tau tau^T for a plane curve."""
        t = self.tangent
        return self.curvature[..., None, None] * t[..., :, None] * t[..., None, :]


def face_frames(maps, element, local_edge, t):
    """Vectorised frames for faces parameterised by the given elements' ccw edges.

    ``element`` and ``local_edge`` have shape ``(nF,)``; ``t`` is ``(nq,)``.
    """
    element = np.asarray(element)
    ref = edge_reference_points(local_edge, t)  # (nF, nq, 2)
    x = maps.map_points(ref, element)
    DF = maps.jacobians(ref, element)
    d = REF_EDGE_DIR[np.asarray(local_edge)]  # (nF, 2)
    g1 = np.einsum("fqia,fa->fqi", DF, d)
    g2 = np.einsum("fiab,fa,fb->fi", maps.hessians(element), d, d)[:, None, :]
    speed = np.linalg.norm(g1, axis=-1)
    if np.any(speed <= 1e-14):
        raise DegenerateFaceError("face parameterisation has vanishing speed")
    tau = g1 / speed[..., None]
    normal = np.stack([tau[..., 1], -tau[..., 0]], axis=-1)
    cross = g1[..., 0] * g2[..., 1] - g1[..., 1] * g2[..., 0]
    H = cross / speed**3
    return FaceFrame(x, tau, normal, speed, H), ref, g2


def face_frame(face, maps, t):
    """Frame of one face at reference parameter(s) ``t`` using its left element."""
    scalar = np.ndim(t) == 0
    frame, _, _ = face_frames(maps, [face.left], [face.left_edge], np.atleast_1d(t))
    pick = (lambda a: a[0, 0]) if scalar else (lambda a: a[0])
    return FaceFrame(pick(frame.point), pick(frame.tangent), pick(frame.normal),
                     pick(frame.metric), pick(frame.curvature))


def q_form(frame, xi1, xi2):
    """xi1^T (grad_T n^T) xi2."""
    return np.einsum("...i,...ij,...j->...", np.asarray(xi1, float), frame.shape_operator, np.asarray(xi2, float))


def face_points_and_metric(face, maps, t):
    frame, _, _ = face_frames(maps, [face.left], [face.left_edge], np.asarray(t))
    return frame.point[0], frame.metric[0]


def locate_points(maps, x, tol=1e-10, candidates=8, max_iter=30):
    """Element index and reference coordinates of physical points.

    Candidates come from the elements with nearest centroids; each candidate
    map is inverted by Newton's method and the first element whose reference
    triangle contains the preimage (up to ``tol``) wins. Points that no
    candidate contains get element ``-1`` and NaN coordinates.
    """
    from scipy.spatial import cKDTree

    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    k = min(candidates, len(maps))
    centroids = maps.map_points(np.array([[1 / 3, 1 / 3]]))[:, 0]
    _, cand = cKDTree(centroids).query(x, k=k)
    cand = cand.reshape(n, k)
    elem = cand.ravel()
    target = np.repeat(x, k, axis=0)
    Binv = np.linalg.inv(maps.B[elem])
    xi = np.einsum("mij,mj->mi", Binv, target - maps.b[elem])
    for _ in range(max_iter):
        r = maps.map_points(xi[:, None], elem)[:, 0] - target
        J = maps.jacobians(xi[:, None], elem)[:, 0]
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        ok = np.abs(det) > 1e-14 * np.sum(J * J, axis=(1, 2))
        det = np.where(ok, det, 1.0)
        step = np.stack([J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1],
                         J[:, 0, 0] * r[:, 1] - J[:, 1, 0] * r[:, 0]], axis=-1) / det[:, None]
        step[~ok] = 0.0
        # keep far-off candidates where their maps stay invertible
        xi = np.clip(xi - step, -1.0, 2.0)
        if np.max(np.abs(step)) < 1e-15:
            break
    inside = (xi[:, 0] >= -tol) & (xi[:, 1] >= -tol) & (xi.sum(1) <= 1 + tol)
    inside = inside.reshape(n, k)
    found = inside.any(axis=1)
    first = np.argmax(inside, axis=1)
    out_e = np.where(found, cand[np.arange(n), first], -1)
    out_xi = xi.reshape(n, k, 2)[np.arange(n), first]
    out_xi[~found] = np.nan
    return out_e, out_xi
