"""Symmetric interior penalty systems for the Poisson and clamped-plate problems."""

from dataclasses import dataclass
from functools import cached_property
import warnings

import numpy as np
import scipy.sparse as sp

from .geometry import face_frames
from .mesh import build_connectivity, curve_boundary, disk_chart, mesh_metrics
from .quadrature import edge_rule, triangle_rule
from .space import DGSpace, eval_ref_basis, physical_derivatives, trace_derivatives


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltyConfig:
    eta1: float = None
    eta2: float = None
    eta3: float = None
    eta4: float = None

    def __post_init__(self):
        for name in ("eta1", "eta2", "eta3", "eta4"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ParameterError(f"{name} must be positive, got {val}")

    @classmethod
    def reference(cls, degree):
        """Literal disk-experiment penalties: 10 p^4, and c_p p^6, c_p p^4 with c_p = 0.1 (p = 2) or 10."""
        p = degree
        c_p = 0.1 if p <= 2 else 10.0
        return cls(10.0 * p**4, c_p * p**6, c_p * p**4, c_p * p**4)

    @classmethod
    def default(cls, degree):
        """Defaults: :meth:`reference` except c_p = 0.5 at p = 2.

        With h_F taken as the smaller incident diameter, c_p = 0.1 leaves the
        quadratic biharmonic form indefinite; 0.5 restores a coercivity margin.
        """
        p = degree
        c_p = 0.5 if p <= 2 else 10.0
        return cls(10.0 * p**4, c_p * p**6, c_p * p**4, c_p * p**4)

    def resolved(self, degree):
        base = PenaltyConfig.default(degree)
        return PenaltyConfig(*(getattr(self, n) if getattr(self, n) is not None else getattr(base, n)
                               for n in ("eta1", "eta2", "eta3", "eta4")))


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def n_dofs(self):
        return self.matrix.shape[0]

    @property
    def row_offsets(self):
        return self.matrix.indptr

    @property
    def column_indices(self):
        return self.matrix.indices

    @property
    def values(self):
        return self.matrix.data

    def asymmetry(self):
        """max |A - A^T| / max |A|."""
        d = abs(self.matrix - self.matrix.T)
        return (d.max() if d.nnz else 0.0) / abs(self.matrix).max()


@dataclass(frozen=True)
class FaceData:
    """Quadrature data on a batch of faces (interior or boundary)."""

    index: np.ndarray
    weights: np.ndarray  # (nF, nq): rule weight times curve speed
    frame: object
    left: object
    right: object  # None for boundary faces
    face_h: np.ndarray

    @property
    def curvature(self):
        return self.frame.curvature

    def jump(self, name):
        a = getattr(self.left, name)
        if self.right is None:
            return a
        return np.concatenate([a, -getattr(self.right, name)], axis=-1)

    def avg(self, name):
        a = getattr(self.left, name)
        if self.right is None:
            return a
        return 0.5 * np.concatenate([a, getattr(self.right, name)], axis=-1)


class Discretization:
    """Mesh, curved geometry, DG space and quadrature tables for one level.

    Element tables hold physical basis derivatives up to order two at the
    element quadrature points; face tables hold traces up to order three.
    """

    def __init__(self, mesh, degree, chart=disk_chart, quad_degree=None, face_quad_degree=None,
                 curved=True, maps=None):
        self.mesh = mesh
        self.faces = build_connectivity(mesh)
        if maps is None:
            if curved:
                maps = curve_boundary(mesh, chart, self.faces)
            else:
                maps = curve_boundary(mesh, lambda x: x, self.faces)
        self.maps = maps
        self.metrics = mesh_metrics(mesh, maps, self.faces)
        self.space = DGSpace(degree, mesh.n_elements)
        self.quad_degree = quad_degree if quad_degree is not None else 2 * degree + 4
        self.face_quad_degree = face_quad_degree if face_quad_degree is not None else 2 * degree + 4
        self.elem_rule = triangle_rule(self.quad_degree)
        self.face_rule = edge_rule(self.face_quad_degree)

    @property
    def degree(self):
        return self.space.degree

    @property
    def n_dofs(self):
        return self.space.n_dofs

    @cached_property
    def element_table(self):
        phys, det = physical_derivatives(self.space, self.maps, self.elem_rule.points, max_order=2)
        return phys, det * self.elem_rule.weights

    @cached_property
    def element_points(self):
        return self.maps.map_points(self.elem_rule.points)

    def _face_data(self, idx, interior):
        t = self.face_rule.points
        f = self.faces
        frame = face_frames(self.maps, f.left[idx], f.left_edge[idx], t)
        left = trace_derivatives(self.space, self.maps, f, idx, t, "left", 3, frame)
        right = trace_derivatives(self.space, self.maps, f, idx, t, "right", 3, frame) if interior else None
        w = self.face_rule.weights * frame[0].metric
        return FaceData(idx, w, frame[0], left, right, self.metrics.face_h[idx])

    @cached_property
    def interior_faces(self):
        return self._face_data(self.faces.interior, True)

    @cached_property
    def boundary_faces(self):
        return self._face_data(self.faces.boundary, False)

    def face_dofs(self, data):
        left = self.space.dofs(self.faces.left[data.index])
        if data.right is None:
            return left
        return np.concatenate([left, self.space.dofs(self.faces.right[data.index])], axis=1)

    # -- global assembly -------------------------------------------------

    def assemble(self, blocks):
        """Sum local blocks ``[(dofs (nb, m), local (nb, m, m)), ...]`` into CSR."""
        rows, cols, vals = [], [], []
        for dofs, local in blocks:
            m = dofs.shape[1]
            rows.append(np.repeat(dofs, m, axis=1).ravel())
            cols.append(np.tile(dofs, (1, m)).ravel())
            vals.append(local.ravel())
        n = self.n_dofs
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        A = A.tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A

    def element_blocks(self, kind):
        phys, dx = self.element_table
        if kind == "mass":
            local = np.einsum("eq,eqi,eqj->eij", dx, phys.values, phys.values, optimize=True)
        elif kind == "grad":
            local = np.einsum("eq,eqia,eqja->eij", dx, phys.grads, phys.grads, optimize=True)
        elif kind == "hess":
            local = np.einsum("eq,eqiab,eqjab->eij", dx, phys.hessians, phys.hessians, optimize=True)
        elif kind == "lap":
            lap = phys.hessians[..., 0, 0] + phys.hessians[..., 1, 1]
            local = np.einsum("eq,eqi,eqj->eij", dx, lap, lap, optimize=True)
        else:
            raise ValueError(f"unknown element term {kind!r}")
        return self.space.dofs(np.arange(self.space.n_elements)), local

    def element_matrix(self, kind):
        return self.assemble([self.element_blocks(kind)])

    def face_sets(self, which):
        if which == "all":
            return [self.interior_faces, self.boundary_faces]
        if which == "interior":
            return [self.interior_faces]
        if which == "boundary":
            return [self.boundary_faces]
        raise ValueError(f"unknown face set {which!r}")

    def jump_blocks(self, quantity, power=1, which="all"):
        """Blocks of sum_F h_F^{-power} <[q u], [q v]>_F."""
        out = []
        for data in self.face_sets(which):
            if len(data.index) == 0:
                continue
            j = data.jump(quantity)
            w = data.weights * data.face_h[:, None] ** (-power)
            out.append((self.face_dofs(data), np.einsum("fq,fqi,fqj->fij", w, j, j, optimize=True)))
        return out

    def jump_matrix(self, quantity, power=1, which="all"):
        return self.assemble(self.jump_blocks(quantity, power, which))

    def load_vector(self, f):
        phys, dx = self.element_table
        fx = np.asarray(f(self.element_points), dtype=float)
        return np.einsum("eq,eq,eqi->ei", dx, fx, phys.values).ravel()


def _sym_blocks(dofs, X):
    return dofs, X + np.swapaxes(X, 1, 2)


def poisson_consistency_blocks(disc):
    """Blocks of B_1(u, v) + B_1(v, u) with B_1(u, v) = -sum_F <{du/dn}, [v]>_F."""
    out = []
    for data in disc.face_sets("all"):
        # X[i, j] = B_1(phi_j, phi_i)
        X = -np.einsum("fq,fqi,fqj->fij", data.weights, data.jump("values"), data.avg("dn"), optimize=True)
        out.append(_sym_blocks(disc.face_dofs(data), X))
    return out


def biharmonic_consistency_blocks(disc):
    """Blocks of B_2 and C, both symmetrised."""
    out = []
    for data in disc.face_sets("all"):
        w = data.weights
        X = (np.einsum("fq,fqi,fqj->fij", w, data.jump("values"), data.avg("dlap_dn"), optimize=True)
             - np.einsum("fq,fqi,fqj->fij", w, data.jump("dn"), data.avg("lap"), optimize=True))
        if data.right is not None:
            X = X + c_form_local(data)
        out.append(_sym_blocks(disc.face_dofs(data), X))
    return out


def c_form_local(data):
    """X[i, j] = C(phi_j, phi_i) on interior faces."""
    w = data.weights
    H = data.curvature
    jdn, jtg = data.jump("dn"), data.jump("tgrad")
    return (np.einsum("fq,fqi,fqj->fij", w, jdn, data.avg("lap_t") + H[..., None] * data.avg("dn"), optimize=True)
            - np.einsum("fq,fqi,fqj->fij", w, jtg, data.avg("tgrad_dn") - H[..., None] * data.avg("tgrad"),
                        optimize=True))


def assemble_poisson(disc, penalties=None, f=None):
    """A_1 and the load vector for -Laplace(u) = f, u = 0 on the boundary."""
    pen = (penalties or PenaltyConfig()).resolved(disc.degree)
    if not pen.eta1 > 0:
        raise ParameterError("eta1 must be positive")
    blocks = [disc.element_blocks("grad")]
    blocks += poisson_consistency_blocks(disc)
    blocks += [(d, pen.eta1 * m) for d, m in disc.jump_blocks("values", 1)]
    A = disc.assemble(blocks)
    rhs = disc.load_vector(f) if f is not None else np.zeros(disc.n_dofs)
    return SparseSystem(A, rhs)


def assemble_biharmonic(disc, penalties=None, f=None):
    """A_2 and the load vector for Laplace^2(u) = f, u = du/dn = 0 on the boundary."""
    if disc.degree < 2:
        raise ParameterError("the biharmonic scheme needs degree >= 2")
    if disc.degree == 2:
        warnings.warn("degree 2 is below the p >= 3 covered by the error analysis", stacklevel=2)
    pen = (penalties or PenaltyConfig()).resolved(disc.degree)
    blocks = [disc.element_blocks("hess")]
    blocks += biharmonic_consistency_blocks(disc)
    blocks += [(d, pen.eta2 * m) for d, m in disc.jump_blocks("values", 3)]
    blocks += [(d, pen.eta3 * m) for d, m in disc.jump_blocks("dn", 1)]
    blocks += [(d, pen.eta4 * m) for d, m in disc.jump_blocks("tgrad", 1)]
    A = disc.assemble(blocks)
    rhs = disc.load_vector(f) if f is not None else np.zeros(disc.n_dofs)
    return SparseSystem(A, rhs)


def penalty_matrix(disc, k, penalties=None):
    """J_k as a matrix."""
    pen = (penalties or PenaltyConfig()).resolved(disc.degree)
    if k == 1:
        return disc.assemble([(d, pen.eta1 * m) for d, m in disc.jump_blocks("values", 1)])
    blocks = [(d, pen.eta2 * m) for d, m in disc.jump_blocks("values", 3)]
    blocks += [(d, pen.eta3 * m) for d, m in disc.jump_blocks("dn", 1)]
    blocks += [(d, pen.eta4 * m) for d, m in disc.jump_blocks("tgrad", 1)]
    return disc.assemble(blocks)


def norm_matrix(disc, k, penalties=None):
    """Matrix of ||v||_{h,k}^2 = |v|^2_{H^k broken} + J_k(v, v)."""
    vol = disc.element_matrix("grad" if k == 1 else "hess")
    return (vol + penalty_matrix(disc, k, penalties)).tocsr()


# -- the C form on general (analytic or discrete) arguments --------------------

def _analytic_face(func, data):
    """Face quantities of a smooth function; identical on both sides."""
    fr = data.frame
    x = fr.point
    g = func.grad(x)
    hs = func.hess(x)
    tau, n, H = fr.tangent, fr.normal, fr.curvature
    dn = np.sum(g * n, -1)
    dt = np.sum(g * tau, -1)
    ttH = np.einsum("fqi,fqij,fqj->fq", tau, hs, tau)
    tnH = np.einsum("fqi,fqij,fqj->fq", tau, hs, n)
    return {"values": func.value(x), "dn": dn, "tgrad": dt, "lap_t": ttH - H * dn,
            "tgrad_dn": tnH + H * dt}


def _discrete_face(coef, disc, data):
    cl = coef.reshape(disc.space.n_elements, -1)[disc.faces.left[data.index]]
    cr = coef.reshape(disc.space.n_elements, -1)[disc.faces.right[data.index]]
    names = ("values", "dn", "tgrad", "lap_t", "tgrad_dn")
    avg = {k: 0.5 * (np.einsum("fqn,fn->fq", getattr(data.left, k), cl)
                     + np.einsum("fqn,fn->fq", getattr(data.right, k), cr)) for k in names}
    jump = {k: np.einsum("fqn,fn->fq", getattr(data.left, k), cl)
            - np.einsum("fqn,fn->fq", getattr(data.right, k), cr) for k in names}
    return avg, jump


def eval_form_C(disc, u, v):
    """C(u, v) by face quadrature; ``u``/``v`` are coefficient vectors or smooth functions.

    A smooth function has zero interior jumps, so C(u, smooth) = 0.
    """
    data = disc.interior_faces
    if isinstance(u, np.ndarray):
        ua, _ = _discrete_face(u, disc, data)
    else:
        ua = _analytic_face(u, data)
    if isinstance(v, np.ndarray):
        _, vj = _discrete_face(v, disc, data)
    else:
        return 0.0
    H = data.curvature
    integrand = ((ua["lap_t"] + H * ua["dn"]) * vj["dn"]
                 - (ua["tgrad_dn"] - H * ua["tgrad"]) * vj["tgrad"])
    return float(np.sum(data.weights * integrand))


def boundary_remainder(disc, w, v):
    """Boundary terms dropped from the C identity when w, grad w do not vanish on the boundary.

    Equals sum_{bdry F} <D^2w n, grad v> - <Laplace w, dv/dn>, written with the
    face-intrinsic operators.
    """
    data = disc.boundary_faces
    wa = _analytic_face(w, data)
    cl = v.reshape(disc.space.n_elements, -1)[disc.faces.left[data.index]]
    vdn = np.einsum("fqn,fn->fq", data.left.dn, cl)
    vtg = np.einsum("fqn,fn->fq", data.left.tgrad, cl)
    H = data.curvature
    integrand = ((wa["tgrad_dn"] - H * wa["tgrad"]) * vtg
                 - (wa["lap_t"] + H * wa["dn"]) * vdn)
    return float(np.sum(data.weights * integrand))


def element_pairings(disc, w, v):
    """(sum_K <Laplace w, Laplace v>_K, sum_K <D^2 w, D^2 v>_K) for smooth w, discrete v."""
    phys, dx = disc.element_table
    x = disc.element_points
    coef = v.reshape(disc.space.n_elements, -1)
    vh = np.einsum("eqnab,en->eqab", phys.hessians, coef)
    wh = w.hess(x)
    lap = np.sum(dx * np.trace(wh, axis1=-2, axis2=-1) * np.trace(vh, axis1=-2, axis2=-1))
    hess = np.sum(dx * np.einsum("eqab,eqab->eq", wh, vh))
    return float(lap), float(hess)
