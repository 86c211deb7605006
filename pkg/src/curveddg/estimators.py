"""Estimator-style wrappers: ``fit`` assembles and solves, ``predict`` evaluates u_h."""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import error_norms
from .assembly import Discretization, PenaltyConfig, assemble_biharmonic, assemble_poisson
from .geometry import locate_points
from .mesh import Mesh, generate_disk_mesh
from .problems import BIHARMONIC_SOLUTION, POISSON_SOLUTION
from .solver import ConvergenceError, solve_spd
from .space import eval_ref_basis


class _DGEstimator(RegressorMixin, BaseEstimator):
    _order = None
    _min_degree = 1
    _manufactured = None

    def _penalties(self):
        raise NotImplementedError

    def _assemble(self, disc, pen, f):
        raise NotImplementedError

    def _preconditioner(self):
        return "jacobi"

    def _precision(self):
        return "double"

    def _validate_params(self):
        if not isinstance(self.degree, (int, np.integer)) or self.degree < self._min_degree:
            raise ValueError(f"degree must be an integer >= {self._min_degree}, got {self.degree!r}")
        if not self.target_h > 0:
            raise ValueError(f"target_h must be positive, got {self.target_h!r}")
        if not 0 < self.tol <= 1e-4:
            raise ValueError(f"tol must lie in (0, 1e-4], got {self.tol!r}")

    def fit(self, X=None, y=None, *, f=None):
        """Assemble and solve on a mesh.

        Parameters
        ----------
        X : Mesh, optional
            Triangulation of the domain. When omitted a disk mesh is generated
            with ``target_h``.
        y : ignored
        f : callable, optional
            Right-hand side ``f(points) -> values`` on arrays ``(..., 2)``.
            Defaults to the manufactured right-hand side of this problem.
        """
        self._validate_params()
        if X is None:
            mesh = generate_disk_mesh(self.target_h)
        elif isinstance(X, Mesh):
            mesh = X
        else:
            raise TypeError(f"X must be a Mesh or None, got {type(X).__name__}")
        f = self._manufactured.rhs if f is None else f
        if not callable(f):
            raise TypeError("f must be callable")
        disc = Discretization(mesh, int(self.degree), quad_degree=self.quad_degree)
        pen = self._penalties()
        system = self._assemble(disc, pen, f)
        try:
            report = solve_spd(system, tol=self.tol, preconditioner=self._preconditioner(),
                               block=disc.space.n_local, precision=self._precision())
            self.solve_report_ = report
            coef = report.solution
        except ConvergenceError as err:
            if not self.accept_floor or err.solution is None or err.floor is None or err.best_residual > err.floor:
                raise
            warnings.warn(f"residual {err.best_residual:.2e} stalled at the rounding level {err.floor:.1e}",
                          RuntimeWarning, stacklevel=2)
            self.solve_report_ = err
            coef = err.solution
        self.disc_ = disc
        self.system_ = system
        self.penalties_ = pen.resolved(disc.degree)
        # the solve may run in extended precision; evaluation needs only doubles
        self.coef_ = np.asarray(coef, dtype=float)
        self.n_dofs_ = disc.n_dofs
        return self

    def predict(self, X):
        """Values of u_h at points ``X`` of shape ``(n, 2)``."""
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"expected points with 2 coordinates, got {X.shape[1]}")
        elem, xi = locate_points(self.disc_.maps, X)
        if np.any(elem < 0):
            raise ValueError(f"{int(np.sum(elem < 0))} point(s) lie outside the computational domain")
        vals = eval_ref_basis(self.disc_.degree, xi, max_order=0).values
        coef = self.coef_.reshape(self.disc_.space.n_elements, -1)
        return np.einsum("qn,qn->q", vals, coef[elem])

    def errors(self, exact=None):
        """:class:`curveddg.analysis.ErrorRecord` against ``exact`` (default: the manufactured solution)."""
        check_is_fitted(self, "coef_")
        return error_norms(self.disc_, self.coef_, exact or self._manufactured, self.penalties_)


class PoissonDG(_DGEstimator):
    """Symmetric interior penalty solver for ``-Laplace(u) = f``, ``u = 0`` on the boundary.

    Examples
    --------
    >>> est = PoissonDG(degree=2, target_h=0.25).fit()
    >>> est.predict([[0.0, 0.0]]).shape
    (1,)
    """

    _manufactured = POISSON_SOLUTION

    def __init__(self, degree=2, target_h=0.25, eta1=None, quad_degree=None, tol=1e-10, accept_floor=False):
        self.degree = degree
        self.target_h = target_h
        self.eta1 = eta1
        self.quad_degree = quad_degree
        self.tol = tol
        self.accept_floor = accept_floor

    def _penalties(self):
        return PenaltyConfig(eta1=self.eta1)

    def _assemble(self, disc, pen, f):
        return assemble_poisson(disc, pen, f)


class BiharmonicDG(_DGEstimator):
    """Interior penalty solver for the clamped plate ``Laplace^2(u) = f``, ``u = du/dn = 0``."""

    _manufactured = BIHARMONIC_SOLUTION
    _min_degree = 2

    def __init__(self, degree=3, target_h=0.25, eta2=None, eta3=None, eta4=None, quad_degree=None,
                 tol=1e-10, accept_floor=False):
        self.degree = degree
        self.target_h = target_h
        self.eta2 = eta2
        self.eta3 = eta3
        self.eta4 = eta4
        self.quad_degree = quad_degree
        self.tol = tol
        self.accept_floor = accept_floor

    def _penalties(self):
        return PenaltyConfig(eta2=self.eta2, eta3=self.eta3, eta4=self.eta4)

    def _assemble(self, disc, pen, f):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return assemble_biharmonic(disc, pen, f)

    def _preconditioner(self):
        # the fourth-order system is too ill conditioned for cheap Krylov
        # preconditioners at fine levels; a symmetric-ordered LU stays sparse
        return "direct"

    def _precision(self):
        return "extended"
