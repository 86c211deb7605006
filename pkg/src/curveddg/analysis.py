"""Error norms, convergence rates, L2 projection and inequality checks."""

from dataclasses import dataclass, field
import logging
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assembly import Discretization, PenaltyConfig, assemble_biharmonic, assemble_poisson, norm_matrix
from .quadrature import MAX_DEGREE, triangle_rule
from .space import eval_ref_basis

log = logging.getLogger(__name__)

DEFAULT_SEED = 20_240_611


@dataclass
class ErrorRecord:
    """Errors of one discrete solution against the exact one.

    ``jumps`` holds the unweighted squared face contributions
    ``sum_F h_F^{-power} ||[q e]||^2`` keyed by quantity.
    """

    h: float
    dofs: int
    err_L2: float
    err_H1_broken: float
    err_h1_norm: float
    err_H2_broken: float = None
    err_h2_norm: float = None
    jumps: dict = field(default_factory=dict)


def _face_error_traces(disc, coef, exact, data):
    """Traces of e = u - u_h on a face batch: (values, dn, tgrad) jumps."""
    c = coef.reshape(disc.space.n_elements, -1)
    cl = c[disc.faces.left[data.index]]
    out = {}
    for name in ("values", "dn", "tgrad"):
        uh = np.einsum("fqn,fn->fq", getattr(data.left, name), cl)
        if data.right is not None:
            cr = c[disc.faces.right[data.index]]
            # the exact solution is continuous, so only u_h jumps
            out[name] = -(uh - np.einsum("fqn,fn->fq", getattr(data.right, name), cr))
        else:
            x = data.frame.point
            if name == "values":
                u = exact.value(x)
            else:
                g = exact.grad(x)
                vec = data.frame.normal if name == "dn" else data.frame.tangent
                u = np.sum(g * vec, -1)
            out[name] = u - uh
    return out


def error_norms(disc, coef, exact, penalties=None):
    """Element and face norms of ``u - u_h``.

    ``exact`` provides ``value``, ``grad`` and optionally ``hess`` as
    vectorised callables on arrays of points ``(..., 2)``. Boundary faces use
    the actual trace of ``u`` there, which is close to but not exactly zero
    because the computational boundary only interpolates the circle.
    """
    coef = np.asarray(coef, dtype=float)
    if coef.size != disc.n_dofs:
        raise ValueError(f"expected {disc.n_dofs} coefficients, got {coef.size}")
    pen = (penalties or PenaltyConfig()).resolved(disc.degree)
    phys, dx = disc.element_table
    x = disc.element_points
    c = coef.reshape(disc.space.n_elements, -1)

    ev = np.einsum("eqn,en->eq", phys.values, c) - exact.value(x)
    eg = np.einsum("eqna,en->eqa", phys.grads, c) - exact.grad(x)
    l2 = np.sum(dx * ev**2)
    h1 = np.sum(dx * np.sum(eg**2, -1))
    h2 = None
    if hasattr(exact, "hess"):
        eh = np.einsum("eqnab,en->eqab", phys.hessians, c) - exact.hess(x)
        h2 = np.sum(dx * np.sum(eh**2, (-1, -2)))

    jumps = {"values/h": 0.0, "values/h3": 0.0, "dn/h": 0.0, "tgrad/h": 0.0}
    for data in disc.face_sets("all"):
        if len(data.index) == 0:
            continue
        tr = _face_error_traces(disc, coef, exact, data)
        hf = data.face_h[:, None]
        jumps["values/h"] += np.sum(data.weights * tr["values"] ** 2 / hf)
        jumps["values/h3"] += np.sum(data.weights * tr["values"] ** 2 / hf**3)
        jumps["dn/h"] += np.sum(data.weights * tr["dn"] ** 2 / hf)
        jumps["tgrad/h"] += np.sum(data.weights * tr["tgrad"] ** 2 / hf)
    jumps = {k: float(v) for k, v in jumps.items()}

    rec = ErrorRecord(
        h=float(disc.metrics.h_max),
        dofs=int(disc.n_dofs),
        err_L2=float(np.sqrt(l2)),
        err_H1_broken=float(np.sqrt(h1)),
        err_h1_norm=float(np.sqrt(h1 + pen.eta1 * jumps["values/h"])),
        jumps=jumps,
    )
    if h2 is not None:
        j2 = pen.eta2 * jumps["values/h3"] + pen.eta3 * jumps["dn/h"] + pen.eta4 * jumps["tgrad/h"]
        rec.err_H2_broken = float(np.sqrt(h2))
        rec.err_h2_norm = float(np.sqrt(h2 + j2))
    return rec


def eoc(errors, hs):
    """Experimental orders log(e_i / e_{i+1}) / log(h_i / h_{i+1})."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if e.shape != h.shape or e.ndim != 1 or len(e) < 2:
        raise ValueError("errors and hs must be 1-d sequences of equal length >= 2")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def ls_slope(errors, hs, last=3):
    """Least-squares slope of log(error) against log(h) over the last ``last`` entries."""
    e = np.asarray(errors, dtype=float)[-last:]
    h = np.asarray(hs, dtype=float)[-last:]
    if len(e) < 2 or np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("need at least two positive entries")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def l2_project(disc, target, quad_degree=None):
    """Coefficients of the mapped L2 projection, shape ``(n_elements, n_local)``.

    On each element the pulled-back target ``v o F_K`` is projected onto
    polynomials on the reference triangle using the reference mass matrix, so
    the interpolant is ``rho o F_K^{-1}`` with ``rho`` a polynomial.
    """
    p = disc.degree
    rule = triangle_rule(quad_degree or min(MAX_DEGREE, 2 * p + 8))
    ref = eval_ref_basis(p, rule.points, max_order=0).values
    mass = np.einsum("q,qi,qj->ij", rule.weights, ref, ref)
    vals = np.asarray(target(disc.maps.map_points(rule.points)), dtype=float)
    rhs = np.einsum("q,eq,qi->ei", rule.weights, vals, ref)
    return np.linalg.solve(mass, rhs.T).T


# -- inequality verification ------------------------------------------------------

INVERSE_PAIRS = ((0, 1), (1, 2), (0, 2))


@dataclass
class InequalityReport:
    """Per-level supremum ratios.

    ``sampled`` maps a family name to one value per level, obtained from
    ``samples`` seeded random coefficient vectors. ``exact`` holds, where
    computed, the true supremum (or for coercivity the true minimum) from a
    generalised eigenproblem on the same level.
    """

    degree: int
    h: list
    samples: int
    seed: int
    sampled: dict
    exact: dict

    def spread(self, name, source="sampled"):
        vals = np.asarray(getattr(self, source)[name], dtype=float)
        if len(vals) < 2:
            return None
        return float(vals.max() / vals.min())

    @property
    def families(self):
        return list(self.sampled)


def _element_trace_blocks(disc):
    """Per-element matrices of ||v||^2_{dK}, shape (nE, nb, nb)."""
    nb = disc.space.n_local
    out = np.zeros((disc.space.n_elements, nb, nb))
    for data in disc.face_sets("all"):
        w = data.weights
        loc = np.einsum("fq,fqi,fqj->fij", w, data.left.values, data.left.values, optimize=True)
        np.add.at(out, disc.faces.left[data.index], loc)
        if data.right is not None:
            loc = np.einsum("fq,fqi,fqj->fij", w, data.right.values, data.right.values, optimize=True)
            np.add.at(out, disc.faces.right[data.index], loc)
    return out


def _quad(local, V):
    """v_K^T X_K v_K for samples V (S, nE, nb) -> (S, nE)."""
    return np.einsum("sei,eij,sej->se", V, local, V, optimize=True)


def _global_quad(A, V):
    return np.einsum("si,si->s", V, (A @ V.T).T)


def _extreme_eig(A, B, largest):
    """Largest or smallest eigenvalue of A x = lambda B x with B symmetric positive definite."""
    n = A.shape[0]
    if n <= 3000:
        idx = [n - 1, n - 1] if largest else [0, 0]
        return float(sla.eigh(A.toarray(), B.toarray(), eigvals_only=True, subset_by_index=idx)[0])
    A = sp.csc_matrix(A)
    B = sp.csc_matrix(B)
    if largest:
        lu = spla.splu(B)
        Minv = spla.LinearOperator(B.shape, matvec=lu.solve, dtype=float)
        return float(spla.eigsh(A, k=1, M=B, Minv=Minv, which="LA", return_eigenvectors=False)[0])
    # the eigenvalue nearest a shift below the spectrum is the minimum
    return float(spla.eigsh(A, k=1, M=B, sigma=-10.0, which="LM", return_eigenvectors=False)[0])


def _level_ratios(disc, V, coercivity, exact):
    """All ratio families for one level; V has shape (S, n_dofs)."""
    S = V.shape[0]
    nE, nb = disc.space.n_elements, disc.space.n_local
    Vl = V.reshape(S, nE, nb)
    hK = disc.metrics.h[None, :]
    _, mass = disc.element_blocks("mass")
    _, grad = disc.element_blocks("grad")
    _, hess = disc.element_blocks("hess")
    trace = _element_trace_blocks(disc)

    m, g, hh, t = _quad(mass, Vl), _quad(grad, Vl), _quad(hess, Vl), _quad(trace, Vl)
    sampled, ex = {}, {}
    sampled["trace"] = float(np.max(t / (m / hK + hK * g)))
    star = {0: np.sqrt(m), 1: np.sqrt(g), 2: np.sqrt(g + hh)}
    for s, mm in INVERSE_PAIRS:
        sampled[f"inverse_{s}{mm}"] = float(np.max(hK ** (mm - s) * star[mm] / star[s]))

    M = disc.element_matrix("mass")
    G = disc.element_matrix("grad")
    Hs = disc.element_matrix("hess")
    pf_den = (G + disc.jump_matrix("values", 0, "boundary") + disc.jump_matrix("values", 1, "interior")).tocsr()
    gpf_den = (Hs + disc.jump_matrix("dn", 1, "interior") + disc.jump_matrix("values", 1, "all")).tocsr()
    sampled["discrete_pf"] = float(np.max(_global_quad(M, V) / _global_quad(pf_den, V)))
    sampled["gradient_pf"] = float(np.max(_global_quad(G, V) / _global_quad(gpf_den, V)))

    if exact:
        ex["trace"] = float(max(_local_max_eig(trace, mass / disc.metrics.h[:, None, None]
                                               + disc.metrics.h[:, None, None] * grad)))
        ex["discrete_pf"] = _extreme_eig(M, pf_den, largest=True)
        ex["gradient_pf"] = _extreme_eig(G, gpf_den, largest=True)

    for k, pen in coercivity.items():
        if k == 2 and disc.degree < 2:
            continue
        asm = assemble_poisson if k == 1 else assemble_biharmonic
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            A = asm(disc, pen).matrix
        N = norm_matrix(disc, k, pen)
        sampled[f"coercivity_{k}"] = float(np.min(_global_quad(A, V) / _global_quad(N, V)))
        if exact:
            ex[f"coercivity_{k}"] = _extreme_eig(A, N, largest=False)
    return sampled, ex


def _local_max_eig(A, B):
    """Largest generalised eigenvalue of each pair of small dense blocks."""
    L = np.linalg.cholesky(B)
    Li = np.linalg.inv(L)
    C = Li @ A @ np.swapaxes(Li, 1, 2)
    return np.linalg.eigvalsh(C)[:, -1]


def verify_inequalities(meshes, degree, samples=100, seed=DEFAULT_SEED, coercivity=None, exact=True,
                        **disc_kwargs):
    """Supremum ratios of the trace, inverse and Poincare-Friedrichs inequalities.

    Parameters
    ----------
    meshes : sequence of Mesh
        One mesh per level, coarse to fine.
    degree : int
        Polynomial degree of the discontinuous space.
    samples : int
        Random coefficient vectors per level (at least 50); entries are i.i.d.
        uniform on [-1, 1] from ``numpy.random.default_rng(seed)``.
    coercivity : dict, optional
        ``{k: PenaltyConfig}`` selecting which bilinear forms ``A_k`` get a
        Rayleigh-quotient minimum. Defaults to the literal reference
        penalties for ``k = 1`` and, when ``degree >= 2``, ``k = 2``.
    exact : bool
        Also compute true extrema from generalised eigenproblems.
    """
    if samples < 50:
        raise ValueError(f"samples must be at least 50, got {samples}")
    if coercivity is None:
        coercivity = {1: PenaltyConfig.reference(degree)}
        if degree >= 2:
            coercivity[2] = PenaltyConfig.reference(degree)
    rng = np.random.default_rng(seed)
    hs, sampled, ex = [], {}, {}
    for mesh in meshes:
        disc = Discretization(mesh, degree, **disc_kwargs)
        V = rng.uniform(-1.0, 1.0, size=(samples, disc.n_dofs))
        s, e = _level_ratios(disc, V, coercivity, exact)
        hs.append(float(disc.metrics.h_max))
        for k, v in s.items():
            sampled.setdefault(k, []).append(v)
        for k, v in e.items():
            ex.setdefault(k, []).append(v)
        log.info("level h=%.4f: %s", hs[-1], s)
    return InequalityReport(degree, hs, samples, seed, sampled, ex)
