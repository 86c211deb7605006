"""Command-line driver: convergence studies, inequality checks and mesh export."""

import argparse
import csv
from dataclasses import dataclass, field
import logging
import sys
import time
import warnings

import numpy as np

from .analysis import DEFAULT_SEED, eoc, error_norms, verify_inequalities
from .assembly import Discretization, ParameterError, PenaltyConfig, assemble_biharmonic, assemble_poisson
from .mesh import MeshError, generate_disk_mesh, write_mesh
from .problems import BIHARMONIC_SOLUTION, POISSON_SOLUTION
from .solver import ConvergenceError, NotSPDError, solve_spd

log = logging.getLogger(__name__)

PROBLEMS = ("poisson", "biharmonic")


class ConfigError(ValueError):
    pass


class StudyAborted(RuntimeError):
    """A level failed to solve; ``report`` holds the levels finished before it."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class StudyConfig:
    problem: str
    degree: int
    levels: int = 5
    h0: float = 0.5
    penalties: PenaltyConfig = None
    quad_degree: int = None
    tol: float = 1e-10
    out: str = None
    seed: int = DEFAULT_SEED
    preconditioner: str = "auto"
    accept_floor: bool = False
    precision: str = "auto"

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        min_p = 1 if self.problem == "poisson" else 2
        if int(self.degree) != self.degree or self.degree < min_p:
            raise ConfigError(f"{self.problem} needs an integer degree >= {min_p}, got {self.degree}")
        if self.levels < 2:
            raise ConfigError(f"levels must be at least 2, got {self.levels}")
        if not self.h0 > 0:
            raise ConfigError(f"h0 must be positive, got {self.h0}")
        if not 0 < self.tol <= 1e-4:
            raise ConfigError(f"tol must lie in (0, 1e-4], got {self.tol}")
        if self.preconditioner not in ("auto", "jacobi", "block", "direct"):
            raise ConfigError(f"unknown preconditioner {self.preconditioner!r}")
        if self.precision not in ("auto", "double", "extended"):
            raise ConfigError(f"unknown precision {self.precision!r}")
        return self

    @property
    def columns(self):
        cols = ["err_L2", "err_H1_broken", "err_h1_norm"]
        if self.problem == "biharmonic":
            cols += ["err_H2_broken", "err_h2_norm"]
        return cols


@dataclass
class LevelSolve:
    """Solver outcome for one level."""

    residual: float
    iterations: int
    sweeps: int
    floor: float = None  # set when the solve stalled at the rounding level
    seconds: float = 0.0
    asymmetry: float = None  # max |A - A^T| / max |A| of the assembled matrix


@dataclass
class ConvergenceReport:
    config: StudyConfig
    records: list = field(default_factory=list)
    solves: list = field(default_factory=list)
    penalties: PenaltyConfig = None

    @property
    def hs(self):
        return [r.h for r in self.records]

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def eocs(self, name):
        if len(self.records) < 2:
            return []
        return list(eoc(self.column(name), self.hs))

    @property
    def fieldnames(self):
        cols = self.config.columns
        return ["level", "h", "dofs", *cols, *(f"eoc_{c}" for c in cols), "residual", "iterations"]

    def rows(self):
        """One dictionary per level in CSV column order."""
        out = []
        cols = self.config.columns
        rates = {c: self.eocs(c) for c in cols}
        for i, (rec, slv) in enumerate(zip(self.records, self.solves)):
            row = {"level": i, "h": rec.h, "dofs": rec.dofs}
            row.update({c: getattr(rec, c) for c in cols})
            row.update({f"eoc_{c}": (rates[c][i - 1] if i > 0 else None) for c in cols})
            row.update({"residual": slv.residual, "iterations": slv.iterations})
            out.append(row)
        return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(rows, path_or_stream, fieldnames=None):
    """Write dictionaries as CSV; floats keep 17 significant digits so they read back exactly."""
    if not rows and fieldnames is None:
        return
    own = isinstance(path_or_stream, str)
    stream = open(path_or_stream, "w", newline="") if own else path_or_stream
    try:
        w = csv.DictWriter(stream, fieldnames=fieldnames or list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    finally:
        if own:
            stream.close()


def read_csv(path_or_stream):
    """Rows of a written report with numeric fields parsed back; blanks become None."""
    own = isinstance(path_or_stream, str)
    stream = open(path_or_stream, newline="") if own else path_or_stream
    try:
        rows = []
        for row in csv.DictReader(stream):
            parsed = {}
            for k, v in row.items():
                if v == "":
                    parsed[k] = None
                    continue
                try:
                    parsed[k] = int(v)
                except ValueError:
                    try:
                        parsed[k] = float(v)
                    except ValueError:
                        parsed[k] = v
            rows.append(parsed)
        return rows
    finally:
        if own:
            stream.close()


def run_convergence(config):
    """Solve the manufactured problem on ``levels`` fresh disk meshes with ``h0 / 2**level``.

    Raises :class:`StudyAborted` carrying the partial report if a level's
    solve fails. With ``accept_floor`` a solve that stalls at the rounding
    level of its residual is kept and flagged instead.
    """
    config.validate()
    exact = POISSON_SOLUTION if config.problem == "poisson" else BIHARMONIC_SOLUTION
    pen = config.penalties or PenaltyConfig()
    report = ConvergenceReport(config, penalties=pen.resolved(config.degree))
    precond = config.preconditioner
    if precond == "auto":
        precond = "jacobi" if config.problem == "poisson" else "direct"
    precision = config.precision
    if precision == "auto":
        precision = "double" if config.problem == "poisson" else "extended"
    for level in range(config.levels):
        target = config.h0 / 2**level
        disc = Discretization(generate_disk_mesh(target), config.degree, quad_degree=config.quad_degree)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            asm = assemble_poisson if config.problem == "poisson" else assemble_biharmonic
            system = asm(disc, pen, exact.rhs)
        t0 = time.perf_counter()
        try:
            res = solve_spd(system, tol=config.tol, preconditioner=precond, block=disc.space.n_local,
                            precision=precision)
            coef = res.solution
            solve = LevelSolve(res.residual, res.iterations, res.sweeps)
        except ConvergenceError as err:
            stalled = err.floor is not None and err.best_residual <= err.floor
            if not (config.accept_floor and stalled):
                raise StudyAborted(f"level {level} (h0/2^{level}): {err}", report) from err
            coef = err.solution
            solve = LevelSolve(err.best_residual, err.iterations, err.sweeps, err.floor)
        except NotSPDError as err:
            raise StudyAborted(f"level {level}: {err}", report) from err
        solve.seconds = time.perf_counter() - t0
        solve.asymmetry = system.asymmetry()
        rec = error_norms(disc, coef, exact, pen)
        report.records.append(rec)
        report.solves.append(solve)
        log.info("level %d: h=%.4f dofs=%d residual=%.2e its=%d", level, rec.h, rec.dofs,
                 solve.residual, solve.iterations)
    return report


def verify_rows(report):
    rows = []
    for fam in report.families:
        ex = report.exact.get(fam)
        for i, h in enumerate(report.h):
            rows.append({"family": fam, "level": i, "h": h, "sampled": report.sampled[fam][i],
                         "exact": ex[i] if ex else None})
        if len(report.h) > 1:
            rows.append({"family": fam, "level": "max/min", "h": None, "sampled": report.spread(fam),
                         "exact": report.spread(fam, "exact") if ex else None})
    return rows


def run_verify(levels, degree, samples=100, seed=DEFAULT_SEED, h0=0.5, out=None, exact=True):
    """Drive :func:`curveddg.analysis.verify_inequalities` over ``levels`` disk meshes and write CSV."""
    if levels < 1:
        raise ConfigError(f"levels must be at least 1, got {levels}")
    meshes = [generate_disk_mesh(h0 / 2**k) for k in range(levels)]
    report = verify_inequalities(meshes, degree, samples=samples, seed=seed, exact=exact)
    if levels == 1:
        print("notice: one level only, cross-level max/min omitted", file=sys.stderr)
    if out is not None:
        write_csv(verify_rows(report), out)
    return report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="curveddg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="convergence study for a manufactured solution")
    s.add_argument("--problem", choices=PROBLEMS, required=True)
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--levels", type=int, default=5)
    s.add_argument("--h0", type=float, default=0.5)
    s.add_argument("--tol", type=float, default=1e-10)
    for name in ("eta1", "eta2", "eta3", "eta4"):
        s.add_argument(f"--{name}", type=float)
    s.add_argument("--quad-degree", type=int)
    s.add_argument("--preconditioner", choices=("auto", "jacobi", "block", "direct"), default="auto",
                   help="auto: Jacobi PCG for Poisson, sparse factorisation for the plate")
    s.add_argument("--precision", choices=("auto", "double", "extended"), default="auto",
                   help="arithmetic of the refinement residual; auto: extended for the plate")
    s.add_argument("--accept-floor", action="store_true",
                   help="keep solves that stall at the rounding level of the residual")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="trace, inverse, Poincare-Friedrichs and coercivity ratios")
    v.add_argument("--levels", type=int, default=4)
    v.add_argument("--degree", type=int, required=True)
    v.add_argument("--samples", type=int, default=100)
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--h0", type=float, default=0.5)
    v.add_argument("--no-exact", action="store_true", help="skip the eigenvalue-based extrema")
    v.add_argument("--out", required=True)

    m = sub.add_parser("mesh", help="write a disk mesh in the text format")
    m.add_argument("--target-h", type=float, required=True)
    m.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "solve":
            etas = {n: getattr(args, n) for n in ("eta1", "eta2", "eta3", "eta4")}
            if args.problem == "poisson" and any(etas[n] is not None for n in ("eta2", "eta3", "eta4")):
                raise ConfigError("--eta2/--eta3/--eta4 apply to the biharmonic problem only")
            if args.problem == "biharmonic" and etas["eta1"] is not None:
                raise ConfigError("--eta1 applies to the Poisson problem only")
            config = StudyConfig(args.problem, args.degree, args.levels, args.h0, PenaltyConfig(**etas),
                                 args.quad_degree, args.tol, args.out, args.seed, args.preconditioner,
                                 args.accept_floor, args.precision).validate()
            try:
                report = run_convergence(config)
            except StudyAborted as err:
                write_csv(err.report.rows(), args.out, err.report.fieldnames)
                print(f"solver failure: {err}", file=sys.stderr)
                return 2
            write_csv(report.rows(), args.out, report.fieldnames)
            for row in report.rows():
                print("  ".join(f"{k}={_fmt(v)}" for k, v in row.items() if k != "level"))
        elif args.command == "verify":
            run_verify(args.levels, args.degree, args.samples, args.seed, args.h0, args.out,
                       exact=not args.no_exact)
        else:
            mesh = generate_disk_mesh(args.target_h)
            with open(args.out, "w") as fh:
                write_mesh(mesh, fh)
    except (ConfigError, ParameterError, MeshError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
