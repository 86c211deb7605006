"""Discontinuous Lagrange spaces on curved triangles and physical derivatives."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg


def monomial_exponents(p):
    return [(a, k - a) for k in range(p + 1) for a in range(k, -1, -1)]


def lattice_nodes(p):
    """Uniform barycentric lattice; node alpha has coordinates (alpha_1/p, alpha_2/p)."""
    return np.array([(i / p, j / p) for j in range(p + 1) for i in range(p + 1 - j)])


def _falling(n, k):
    out = 1
    for i in range(k):
        out *= n - i
    return out


def _monomial_derivative(pts, exps, dx, dy):
    x, y = pts[..., 0], pts[..., 1]
    cols = []
    for a, b in exps:
        c = _falling(a, dx) * _falling(b, dy)
        if c == 0:
            cols.append(np.zeros_like(x))
        else:
            cols.append(c * x ** (a - dx) * y ** (b - dy))
    return np.stack(cols, axis=-1)


@lru_cache(maxsize=None)
def _coefficients(p):
    exps = monomial_exponents(p)
    V = _monomial_derivative(lattice_nodes(p), exps, 0, 0)
    lu, piv = scipy.linalg.lu_factor(V)
    C = scipy.linalg.lu_solve((lu, piv), np.eye(len(exps)))
    C.setflags(write=False)
    return C


@dataclass(frozen=True)
class RefBasisTable:
    """Reference basis values and derivatives at a point set.

    Shapes: ``values (..., nb)``, ``grads (..., nb, 2)``,
    ``hessians (..., nb, 2, 2)``, ``thirds (..., nb, 2, 2, 2)``.
    """

    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray
    thirds: np.ndarray


def eval_ref_basis(p, points, max_order=3):
    """Nodal Lagrange basis of degree ``p`` on the reference triangle."""
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    pts = np.asarray(points, dtype=float)
    exps = monomial_exponents(p)
    C = _coefficients(p)

    def d(dx, dy):
        return _monomial_derivative(pts, exps, dx, dy) @ C

    values = d(0, 0)
    nb = values.shape[-1]
    shp = values.shape
    grads = np.zeros(shp + (2,))
    hess = np.zeros(shp + (2, 2))
    third = np.zeros(shp + (2, 2, 2))
    if max_order >= 1:
        grads[..., 0] = d(1, 0)
        grads[..., 1] = d(0, 1)
    if max_order >= 2:
        hxx, hxy, hyy = d(2, 0), d(1, 1), d(0, 2)
        hess[..., 0, 0] = hxx
        hess[..., 0, 1] = hess[..., 1, 0] = hxy
        hess[..., 1, 1] = hyy
    if max_order >= 3:
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    nx = (i == 0) + (j == 0) + (k == 0)
                    third[..., i, j, k] = d(nx, 3 - nx)
    assert nb == (p + 1) * (p + 2) // 2
    return RefBasisTable(values, grads, hess, third)


@dataclass(frozen=True)
class DGSpace:
    """Element-major discontinuous space V_{h,p} of mapped polynomials."""

    degree: int
    n_elements: int

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")

    @property
    def n_local(self):
        p = self.degree
        return (p + 1) * (p + 2) // 2

    @property
    def n_dofs(self):
        return self.n_local * self.n_elements

    def dofs(self, element):
        element = np.asarray(element)
        return element[..., None] * self.n_local + np.arange(self.n_local)


@dataclass(frozen=True)
class PhysicalBasis:
    """Physical derivatives of every local basis function.

    ``values (..., nb)``, ``grads (..., nb, 2)``, ``hessians (..., nb, 2, 2)``,
    ``thirds (..., nb, 2, 2, 2)``; unused orders are ``None``.
    """

    values: np.ndarray
    grads: np.ndarray = None
    hessians: np.ndarray = None
    thirds: np.ndarray = None


def push_forward(ref, G1, G2=None, G3=None, max_order=3):
    """Composite derivatives of rho o F^{-1} from reference derivatives of rho.

    ``ref`` is a :class:`RefBasisTable` whose leading axes broadcast against
    those of the inverse-map derivatives ``G1 (..., 2, 2)`` etc.
    """
    g1 = G1
    grads = hess = third = None
    if max_order >= 1:
        grads = np.einsum("...na,...ai->...ni", ref.grads, g1)
    if max_order >= 2:
        g2 = G2
        hess = (np.einsum("...nab,...ai,...bj->...nij", ref.hessians, g1, g1, optimize=True)
                + np.einsum("...na,...aij->...nij", ref.grads, g2, optimize=True))
    if max_order >= 3:
        g3 = G3
        R3, R2, R1 = ref.thirds, ref.hessians, ref.grads
        third = (np.einsum("...nabc,...ai,...bj,...ck->...nijk", R3, g1, g1, g1, optimize=True)
                 + np.einsum("...nab,...aik,...bj->...nijk", R2, g2, g1, optimize=True)
                 + np.einsum("...nab,...ai,...bjk->...nijk", R2, g1, g2, optimize=True)
                 + np.einsum("...nab,...aij,...bk->...nijk", R2, g2, g1, optimize=True)
                 + np.einsum("...na,...aijk->...nijk", R1, g3, optimize=True))
    values = np.broadcast_to(ref.values, G1.shape[:-2] + ref.values.shape[-1:])
    return PhysicalBasis(values, grads, hess, third)


def physical_derivatives(space, maps, ref_points, max_order=3, elements=None):
    """Physical basis derivatives on curved elements.

    ``ref_points`` is ``(nq, 2)`` shared by all elements or ``(nE, nq, 2)``.
    Returns a :class:`PhysicalBasis` with leading axes ``(nE, nq)``, plus
    ``det DF`` of shape ``(nE, nq)``.
    """
    if max_order > 3:
        raise ValueError("derivatives are available up to order 3")
    ref_points = np.asarray(ref_points, dtype=float)
    ref = eval_ref_basis(space.degree, ref_points, max_order)
    DF, det, G1, G2, G3 = maps.derivatives(ref_points, elements)
    return push_forward(ref, G1, G2, G3, max_order), det


@dataclass(frozen=True)
class FaceTraces:
    """Trace quantities of every local basis function on one side of a batch of faces.

    Scalar fields have shape ``(nF, nq, nb)``. Tangential quantities are
    computed on the face curve parameterised by the left element:
    ``tgrad`` is the tangential-gradient coefficient (grad_T v = tgrad * tau),
    ``lap_t`` the tangential Laplacian and ``tgrad_dn`` the coefficient of
    grad_T(dv/dn).
    """

    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray
    thirds: np.ndarray
    dn: np.ndarray
    tgrad: np.ndarray
    lap_t: np.ndarray
    tgrad_dn: np.ndarray
    lap: np.ndarray
    dlap_dn: np.ndarray


def trace_derivatives(space, maps, faces, face_idx, t, side="left", max_order=3, frame=None):
    """Face traces of the basis of the left or right element of ``faces[face_idx]``.

    ``t`` holds reference face parameters in [0, 1] along the left element's
    counter-clockwise edge. ``frame`` may pass a precomputed
    ``geometry.face_frames`` result for the same faces and parameters.
    """
    from .geometry import REF_EDGE_DIR, edge_reference_points, face_frames

    face_idx = np.asarray(face_idx)
    t = np.asarray(t, dtype=float)
    if frame is None:
        frame = face_frames(maps, faces.left[face_idx], faces.left_edge[face_idx], t)
    fr, _, g2 = frame
    if side == "left":
        elem, edge, s, sign = faces.left[face_idx], faces.left_edge[face_idx], t, 1.0
    elif side == "right":
        elem, edge = faces.right[face_idx], faces.right_edge[face_idx]
        if np.any(elem < 0):
            raise ValueError("boundary faces have no right element")
        s, sign = 1.0 - t, -1.0
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    ref_pts = edge_reference_points(edge, s)
    ref = eval_ref_basis(space.degree, ref_pts, max(max_order, 2))
    _, _, G1, G2, G3 = maps.derivatives(ref_pts, elem)
    phys = push_forward(ref, G1, G2, G3, max_order)

    d = REF_EDGE_DIR[edge]
    # derivatives of g(t) = v(gamma(t)) straight from the reference polynomial
    g1 = sign * np.einsum("fqna,fa->fqn", ref.grads, d)
    g2r = np.einsum("fqnab,fa,fb->fqn", ref.hessians, d, d)
    speed = fr.metric[..., None]
    # d|gamma'|/dt = tau . gamma''
    dspeed = np.sum(fr.tangent * g2, axis=-1)[..., None]
    tgrad = g1 / speed
    lap_t = g2r / speed**2 - g1 * dspeed / speed**3

    tau = fr.tangent[:, :, None, :]
    nrm = fr.normal[:, :, None, :]
    H = fr.curvature[..., None]
    dn = np.sum(phys.grads * nrm, axis=-1)
    dtau = np.sum(phys.grads * tau, axis=-1)
    tnn = np.einsum("fqni,fqnij,fqnj->fqn", np.broadcast_to(tau, phys.grads.shape), phys.hessians,
                    np.broadcast_to(nrm, phys.grads.shape))
    tgrad_dn = tnn + H * dtau
    lap = phys.hessians[..., 0, 0] + phys.hessians[..., 1, 1]
    dlap_dn = None
    if max_order >= 3:
        glap = phys.thirds[..., 0, 0, :] + phys.thirds[..., 1, 1, :]
        dlap_dn = np.sum(glap * nrm, axis=-1)
    return FaceTraces(phys.values, phys.grads, phys.hessians, phys.thirds,
                      dn, tgrad, lap_t, tgrad_dn, lap, dlap_dn)
