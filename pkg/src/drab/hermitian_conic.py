"""Solver-agnostic conic problem representation over complex Hermitian data.

Problems are assembled in real arithmetic. Hermitian matrix variables are
stored through :func:`herm_vec` (an isometry onto R^{N^2}), complex vectors
as ``[Re; Im]`` slices, and every Hermitian PSD constraint is lowered to a
real symmetric PSD constraint through :func:`herm_embed`. Only three cone
types appear in the IR (linear, second-order, PSD); the adapter in
:func:`solve` hands them to Clarabel.
"""

from __future__ import annotations

import enum
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

SQRT2 = np.sqrt(2.0)
DEFAULT_TOL = 1e-8
HERMITIAN_TOL = 1e-12


class ConeKind(str, enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    SOC = "soc"
    PSD = "psd"


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_LIMIT = "numerical_limit"


def _check_hermitian(X, tol=HERMITIAN_TOL):
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    scale = max(1.0, float(np.max(np.abs(X), initial=0.0)))
    if np.max(np.abs(X - X.conj().T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return X


def herm_vec(X):
    """Vectorize a Hermitian matrix into R^{N^2}, preserving the Frobenius norm.

    Layout: the N real diagonal entries, then the real parts of the strictly
    upper triangle (row-major) times sqrt(2), then the imaginary parts of the
    same entries times sqrt(2).
    """
    X = _check_hermitian(X)
    n = X.shape[0]
    iu = np.triu_indices(n, 1)
    upper = X[iu]
    return np.concatenate([np.real(np.diag(X)), SQRT2 * upper.real, SQRT2 * upper.imag])


def herm_unvec(v, n=None):
    """Inverse of :func:`herm_vec`."""
    v = np.asarray(v, dtype=float)
    if n is None:
        n = int(round(np.sqrt(v.size)))
    if v.size != n * n:
        raise ValueError(f"vector of length {v.size} does not encode a {n}x{n} matrix")
    m = n * (n - 1) // 2
    X = np.diag(v[:n]).astype(complex)
    iu = np.triu_indices(n, 1)
    upper = (v[n:n + m] + 1j * v[n + m:]) / SQRT2
    X[iu] = upper
    X[(iu[1], iu[0])] = upper.conj()
    return X


def herm_basis(n):
    """Hermitian matrices E_k with herm_vec(E_k) = e_k, shape (n*n, n, n)."""
    return np.stack([herm_unvec(e, n) for e in np.eye(n * n)])


def herm_embed(X):
    """Real symmetric 2N x 2N embedding [[Re X, -Im X], [Im X, Re X]]."""
    X = _check_hermitian(X)
    return _embed(X)


def _embed(X):
    # works on stacked (..., n, n) arrays as well
    re, im = X.real, X.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


# ---------------------------------------------------------------------------
# affine expressions
# ---------------------------------------------------------------------------

def _pad(coef, k):
    if coef.shape[0] == k:
        return coef
    extra = np.zeros((k - coef.shape[0],) + coef.shape[1:], dtype=coef.dtype)
    return np.concatenate([coef, extra], axis=0)


class Affine:
    """Affine function ``sum_k x_k * coef[k] + const`` of the real variable vector.

    ``const`` may be real or complex and of any shape; matrix- and
    vector-valued expressions share the same implementation.
    """

    __array_priority__ = 100

    def __init__(self, coef, const):
        self.coef = np.asarray(coef)
        self.const = np.asarray(const)

    @property
    def shape(self):
        return self.const.shape

    @classmethod
    def constant(cls, value):
        value = np.asarray(value)
        return cls(np.zeros((0,) + value.shape, dtype=value.dtype), value)

    def _lift(self, other):
        if isinstance(other, Affine):
            return other
        return Affine.constant(other)

    def __add__(self, other):
        other = self._lift(other)
        k = max(self.coef.shape[0], other.coef.shape[0])
        return Affine(_pad(self.coef, k) + _pad(other.coef, k), self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.coef, -self.const)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, scalar):
        if isinstance(scalar, Affine):
            raise TypeError("product of two affine expressions is not affine")
        scalar = np.asarray(scalar)
        if self.const.ndim == 0 and scalar.ndim > 0:
            # scalar expression times a constant array
            k = self.coef.shape[0]
            return Affine(self.coef.reshape((k,) + (1,) * scalar.ndim) * scalar,
                          self.const * scalar)
        return Affine(self.coef * scalar, self.const * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __matmul__(self, M):
        M = np.asarray(M)
        return Affine(self.coef @ M, self.const @ M)

    def __rmatmul__(self, M):
        M = np.asarray(M)
        return Affine(np.matmul(M, self.coef), M @ self.const)

    @property
    def H(self):
        return Affine(np.conj(np.swapaxes(self.coef, -1, -2)) if self.coef.ndim > 2
                      else np.conj(self.coef),
                      self.const.conj().T)

    @property
    def real(self):
        return Affine(np.real(self.coef), np.real(self.const))

    @property
    def imag(self):
        return Affine(np.imag(self.coef), np.imag(self.const))

    def trace(self):
        return Affine(np.trace(self.coef, axis1=-2, axis2=-1), np.trace(self.const))

    def inner(self, M):
        """Real Frobenius inner product Re tr(self^H M) with a constant matrix."""
        M = np.asarray(M)
        coef = np.real(np.einsum("kij,ij->k", np.conj(self.coef), M))
        return Affine(coef, np.real(np.vdot(self.const, M)))

    def vdot(self, a):
        """Re(a^H v) for a constant complex vector a and vector-valued self."""
        a = np.asarray(a)
        return Affine(np.real(self.coef @ np.conj(a)), np.real(np.vdot(a, self.const)))

    def flatten_real(self):
        """Stack into a real vector expression (real part then imaginary part)."""
        k = self.coef.shape[0]
        if np.iscomplexobj(self.coef) or np.iscomplexobj(self.const):
            m = self.const.size
            coef = np.concatenate([np.real(self.coef).reshape(k, m),
                                   np.imag(self.coef).reshape(k, m)], axis=1)
            const = np.concatenate([np.real(self.const).ravel(), np.imag(self.const).ravel()])
        else:
            coef = self.coef.reshape(k, self.const.size)
            const = self.const.ravel()
        return Affine(coef, const)

    def herm_vec(self):
        n = self.shape[0]
        iu = np.triu_indices(n, 1)
        coef = np.concatenate([np.real(np.diagonal(self.coef, axis1=1, axis2=2)),
                               SQRT2 * np.real(self.coef[:, iu[0], iu[1]]),
                               SQRT2 * np.imag(self.coef[:, iu[0], iu[1]])], axis=1)
        return Affine(coef, herm_vec(self.const))

    def embed(self):
        return Affine(_embed(self.coef), _embed(self.const))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        k = self.coef.shape[0]
        return np.tensordot(x[:k], self.coef, axes=(0, 0)) + self.const

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Affine(self.coef[(slice(None),) + idx], self.const[idx])


def stack(items):
    """Concatenate scalar/vector real expressions into one vector expression."""
    items = [it if isinstance(it, Affine) else Affine.constant(np.atleast_1d(it)) for it in items]
    k = max(it.coef.shape[0] for it in items)
    coef = np.concatenate([_pad(it.coef, k).reshape(k, it.const.size) for it in items], axis=1)
    const = np.concatenate([np.atleast_1d(it.const).ravel() for it in items])
    return Affine(coef, const)


def bordered(top_left, column, corner):
    """Assemble the Hermitian block matrix [[A, c], [c^H, s]].

    ``top_left`` is an n x n matrix expression, ``column`` an n-vector
    expression and ``corner`` a real scalar expression.
    """
    top_left, column, corner = (e if isinstance(e, Affine) else Affine.constant(e)
                                for e in (top_left, column, corner))
    k = max(e.coef.shape[0] for e in (top_left, column, corner))
    n = top_left.shape[0]
    coef = np.zeros((k, n + 1, n + 1), dtype=complex)
    coef[:, :n, :n] = _pad(top_left.coef, k)
    col = _pad(column.coef, k)
    coef[:, :n, n] = col
    coef[:, n, :n] = np.conj(col)
    coef[:, n, n] = _pad(np.reshape(corner.coef, (corner.coef.shape[0],)), k)
    const = np.zeros((n + 1, n + 1), dtype=complex)
    const[:n, :n] = top_left.const
    const[:n, n] = column.const
    const[n, :n] = np.conj(column.const)
    const[n, n] = np.reshape(corner.const, ())
    return Affine(coef, const)


# ---------------------------------------------------------------------------
# IR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarInfo:
    name: str
    kind: str  # "herm", "cvec" or "real"
    offset: int
    size: int
    dim: int

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.size)


@dataclass
class ConeConstraint:
    """``F @ x + g`` lies in the cone.

    For PSD constraints the rows are the row-major entries of a real
    symmetric ``dim x dim`` matrix.
    """

    kind: ConeKind
    F: sp.csr_matrix
    g: np.ndarray
    dim: int
    label: str = ""

    def values(self, x):
        return self.F @ x + self.g

    def violation(self, x):
        v = self.values(x)
        if self.kind is ConeKind.ZERO:
            return float(np.max(np.abs(v), initial=0.0))
        if self.kind is ConeKind.NONNEG:
            return float(max(0.0, -np.min(v, initial=0.0)))
        if self.kind is ConeKind.SOC:
            return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))
        M = v.reshape(self.dim, self.dim)
        return float(max(0.0, -np.linalg.eigvalsh(0.5 * (M + M.T))[0]))


@dataclass
class ConicProblemIR:
    """Linear objective ``c @ x + c0`` minimized over a product of cones."""

    n_vars: int
    c: np.ndarray
    c0: float
    constraints: list
    variables: dict
    meta: dict = field(default_factory=dict)

    def value(self, name, x):
        info = self.variables[name]
        chunk = np.asarray(x)[info.slice]
        if info.kind == "herm":
            return herm_unvec(chunk, info.dim)
        if info.kind == "cvec":
            return chunk[:info.dim] + 1j * chunk[info.dim:]
        return float(chunk[0])

    def decode(self, x):
        return {name: self.value(name, x) for name in self.variables}

    def objective(self, x):
        return float(self.c @ x + self.c0)

    def with_objective(self, c, c0=None):
        return replace(self, c=np.asarray(c, dtype=float), c0=self.c0 if c0 is None else c0)

    def max_violation(self, x):
        return max((con.violation(x) for con in self.constraints), default=0.0)

    def dump(self, fh=None):
        """Write the IR in a sparse text format; returns the text if ``fh`` is None.

        Line ``VARS n`` followed by one ``VAR name kind offset size`` per
        variable, ``OBJ c0 col:coef ...``, then one line per constraint:
        ``<cone> <dim> <label> | row:col:coef ... | row:const ...``.
        """
        out = fh if fh is not None else io.StringIO()
        out.write(f"VARS {self.n_vars}\n")
        for info in self.variables.values():
            out.write(f"VAR {info.name} {info.kind} {info.offset} {info.size}\n")
        nz = np.flatnonzero(self.c)
        out.write("OBJ {!r} ".format(float(self.c0))
                  + " ".join(f"{j}:{float(self.c[j])!r}" for j in nz) + "\n")
        for con in self.constraints:
            F = con.F.tocoo()
            terms = " ".join(f"{i}:{j}:{float(v)!r}" for i, j, v in zip(F.row, F.col, F.data))
            consts = " ".join(f"{i}:{float(con.g[i])!r}" for i in np.flatnonzero(con.g))
            label = (con.label or "-").replace(" ", "_")
            out.write(f"{con.kind.value.upper()} {con.dim} {label} | {terms} | {consts}\n")
        if fh is None:
            return out.getvalue()
        return None


class ProblemBuilder:
    """Incrementally declares variables and constraints, then emits a :class:`ConicProblemIR`."""

    def __init__(self):
        self.n = 0
        self.variables = {}
        self.constraints = []
        self._objective = Affine.constant(0.0)
        self._bases = {}

    def _declare(self, name, kind, size, dim):
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        info = VarInfo(name, kind, self.n, size, dim)
        self.variables[name] = info
        self.n += size
        return info

    def herm(self, name, n):
        info = self._declare(name, "herm", n * n, n)
        if n not in self._bases:
            self._bases[n] = herm_basis(n)
        coef = np.zeros((self.n, n, n), dtype=complex)
        coef[info.slice] = self._bases[n]
        return Affine(coef, np.zeros((n, n), dtype=complex))

    def cvec(self, name, n):
        info = self._declare(name, "cvec", 2 * n, n)
        coef = np.zeros((self.n, n), dtype=complex)
        coef[info.offset:info.offset + n] = np.eye(n)
        coef[info.offset + n:info.offset + 2 * n] = 1j * np.eye(n)
        return Affine(coef, np.zeros(n, dtype=complex))

    def real(self, name):
        info = self._declare(name, "real", 1, 1)
        coef = np.zeros(self.n)
        coef[info.offset] = 1.0
        return Affine(coef, np.asarray(0.0))

    def _add(self, kind, expr, dim, label):
        expr = expr.flatten_real() if expr.const.ndim != 1 or np.iscomplexobj(expr.const) else expr
        coef = _pad(expr.coef.reshape(expr.coef.shape[0], -1), self.n)
        F = sp.csr_matrix(coef.T)
        F.eliminate_zeros()
        self.constraints.append(ConeConstraint(kind, F, np.asarray(expr.const, float).ravel(),
                                               dim, label))

    def add_nonneg(self, expr, label=""):
        expr = expr if isinstance(expr, Affine) else Affine.constant(expr)
        e = expr.real if np.iscomplexobj(expr.const) else expr
        e = Affine(e.coef.reshape(e.coef.shape[0], -1), np.atleast_1d(e.const).ravel())
        self._add(ConeKind.NONNEG, e, e.const.size, label)

    def add_zero(self, expr, label=""):
        e = expr.flatten_real()
        self._add(ConeKind.ZERO, e, e.const.size, label)

    def add_soc(self, t, v, label=""):
        """``||v|| <= t`` for a real scalar t and a real or complex vector v."""
        e = stack([t, v.flatten_real()])
        self._add(ConeKind.SOC, e, e.const.size, label)

    def add_psd(self, M, label=""):
        """Hermitian (or real symmetric) matrix expression M must be PSD."""
        E = M.embed() if (np.iscomplexobj(M.coef) or np.iscomplexobj(M.const)) else M
        d = E.shape[0]
        self._add(ConeKind.PSD, Affine(E.coef.reshape(E.coef.shape[0], -1), E.const.ravel()),
                  d, label)

    def norm_epigraph(self, name, v, label=""):
        t = self.real(name)
        self.add_soc(t, v, label or name)
        return t

    def frob_epigraph(self, name, M, label=""):
        """Scalar t with ||M||_F <= t for a Hermitian matrix expression M."""
        t = self.real(name)
        self.add_soc(t, M.herm_vec(), label or name)
        return t

    def lambda_max_epigraph(self, name, M, label=""):
        """Scalar s with s*I - M PSD."""
        s = self.real(name)
        n = M.shape[0]
        self.add_psd(s * np.eye(n) - M, label or name)
        return s

    def minimize(self, expr):
        self._objective = expr

    def build(self, meta=None):
        obj = self._objective
        c = _pad(np.reshape(np.real(obj.coef), (obj.coef.shape[0],)), self.n).astype(float)
        constraints = []
        for con in self.constraints:
            F = con.F.copy()
            F.resize((F.shape[0], self.n))
            constraints.append(replace(con, F=F))
        return ConicProblemIR(self.n, c, float(np.real(obj.const)), constraints,
                              dict(self.variables), dict(meta or {}))


# ---------------------------------------------------------------------------
# solver adapter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConicSolution:
    x: np.ndarray
    status: SolveStatus
    objective_value: float
    solver_tolerance: float
    max_violation: float = float("nan")
    iterations: int = 0
    solve_seconds: float = 0.0
    raw_status: str = ""

    @property
    def optimal(self):
        return self.status is SolveStatus.OPTIMAL


def _svec_rows(dim):
    """Row selection and scaling mapping a row-major dim x dim vec to Clarabel's svec."""
    rows, scale = [], []
    for j in range(dim):
        for i in range(j + 1):
            rows.append(i * dim + j)
            scale.append(1.0 if i == j else SQRT2)
    return np.asarray(rows), np.asarray(scale)


def _to_clarabel(problem):
    import clarabel

    blocks, rhs, cones = [], [], []
    for con in problem.constraints:
        F, g = con.F, con.g
        if con.kind is ConeKind.PSD:
            rows, scale = _svec_rows(con.dim)
            D = sp.diags(scale)
            F = D @ F[rows]
            g = scale * g[rows]
            cones.append(clarabel.PSDTriangleConeT(con.dim))
        elif con.kind is ConeKind.SOC:
            cones.append(clarabel.SecondOrderConeT(F.shape[0]))
        elif con.kind is ConeKind.NONNEG:
            cones.append(clarabel.NonnegativeConeT(F.shape[0]))
        else:
            cones.append(clarabel.ZeroConeT(F.shape[0]))
        blocks.append(-F)
        rhs.append(g)
    A = sp.vstack(blocks, format="csc") if blocks else sp.csc_matrix((0, problem.n_vars))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    P = sp.csc_matrix((problem.n_vars, problem.n_vars))
    return P, A, b, cones


BACKENDS = ("auto", "clarabel", "cvxopt")


def solve(problem, tol=DEFAULT_TOL, max_iter=200, verbose=False, backend="auto"):
    """Solve a :class:`ConicProblemIR` with an interior-point conic solver.

    ``backend`` is "clarabel", "cvxopt" or "auto" (Clarabel first, CVXOPT
    when Clarabel's answer is not an accepted optimum). Never raises on
    solver trouble: failures come back as ``SolveStatus.NUMERICAL_LIMIT``.
    A reported optimum is accepted only if the primal cone residuals are
    within ten times ``tol`` (relative to the data/iterate scale).
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "cvxopt":
        return _solve_cvxopt(problem, tol, max_iter, verbose)
    sol = _solve_clarabel(problem, tol, max_iter, verbose)
    if backend == "auto" and sol.status is SolveStatus.NUMERICAL_LIMIT:
        fallback = _solve_cvxopt(problem, tol, max_iter, verbose)
        if fallback.status is not SolveStatus.NUMERICAL_LIMIT:
            return replace(fallback, solve_seconds=fallback.solve_seconds + sol.solve_seconds)
    return sol


def _finish(problem, x, status, tol, iterations, seconds, raw):
    violation = problem.max_violation(x) if np.all(np.isfinite(x)) else float("inf")
    if status is SolveStatus.OPTIMAL and not violation <= 10 * tol * max(1.0, _scale(problem, x)):
        status = SolveStatus.NUMERICAL_LIMIT
    objective = problem.objective(x) if status is SolveStatus.OPTIMAL else float("nan")
    return ConicSolution(x, status, objective, tol, violation, int(iterations), float(seconds), raw)


def _failed(problem, tol, raw):
    x = np.full(problem.n_vars, np.nan)
    return ConicSolution(x, SolveStatus.NUMERICAL_LIMIT, float("nan"), tol, raw_status=raw)


def _solve_clarabel(problem, tol, max_iter, verbose):
    import clarabel

    P, A, b, cones = _to_clarabel(problem)
    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = min(1e-6, settings.tol_ktratio)
    settings.presolve_enable = False
    try:
        result = clarabel.DefaultSolver(P, problem.c, A, b, cones, settings).solve()
    except BaseException as exc:  # rust panics surface as BaseException subclasses
        if isinstance(exc, (KeyboardInterrupt, SystemExit)):
            raise
        return _failed(problem, tol, f"clarabel exception: {exc}")

    raw = str(result.status)
    if raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = SolveStatus.INFEASIBLE
    elif raw in ("DualInfeasible", "AlmostDualInfeasible"):
        status = SolveStatus.UNBOUNDED
    elif raw in ("Solved", "AlmostSolved"):
        status = SolveStatus.OPTIMAL
    else:
        status = SolveStatus.NUMERICAL_LIMIT
    return _finish(problem, np.asarray(result.x, dtype=float), status, tol,
                   result.iterations, result.solve_time, "clarabel: " + raw)


def _to_cvxopt(problem):
    from cvxopt import matrix, spmatrix

    groups = {kind: [c for c in problem.constraints if c.kind is kind] for kind in ConeKind}
    cone_part = groups[ConeKind.NONNEG] + groups[ConeKind.SOC] + groups[ConeKind.PSD]
    n = problem.n_vars

    def sparse(blocks, sign):
        if not blocks:
            return spmatrix([], [], [], (0, n)), matrix(0.0, (0, 1))
        M = (sign * sp.vstack([c.F for c in blocks])).tocoo()
        rhs = np.concatenate([c.g for c in blocks])
        return (spmatrix(M.data.tolist(), M.row.tolist(), M.col.tolist(), M.shape),
                matrix(-sign * rhs))

    G, h = sparse(cone_part, -1.0)
    A, b = sparse(groups[ConeKind.ZERO], 1.0)
    dims = {"l": int(sum(c.F.shape[0] for c in groups[ConeKind.NONNEG])),
            "q": [c.F.shape[0] for c in groups[ConeKind.SOC]],
            "s": [c.dim for c in groups[ConeKind.PSD]]}
    return matrix(problem.c), G, h, dims, A, b


def _solve_cvxopt(problem, tol, max_iter, verbose):
    from cvxopt import solvers

    c, G, h, dims, A, b = _to_cvxopt(problem)
    options = {"show_progress": verbose, "maxiters": max_iter,
               "abstol": tol, "reltol": tol, "feastol": tol}
    t0 = time.perf_counter()
    try:
        if A.size[0]:
            result = solvers.conelp(c, G, h, dims, A, b, options=options)
        else:
            result = solvers.conelp(c, G, h, dims, options=options)
    except (ValueError, ArithmeticError) as exc:
        return _failed(problem, tol, f"cvxopt exception: {exc}")
    seconds = time.perf_counter() - t0
    raw = result["status"]
    status = {"optimal": SolveStatus.OPTIMAL, "primal infeasible": SolveStatus.INFEASIBLE,
              "dual infeasible": SolveStatus.UNBOUNDED}.get(raw, SolveStatus.NUMERICAL_LIMIT)
    if result["x"] is None:
        x = np.full(problem.n_vars, np.nan)
    else:
        x = np.asarray(result["x"], dtype=float).ravel()
    return _finish(problem, x, status, tol, result["iterations"], seconds, "cvxopt: " + raw)


def _scale(problem, x):
    # residuals are judged relative to the magnitude of the data and iterate
    g = max((float(np.max(np.abs(c.g), initial=0.0)) for c in problem.constraints), default=0.0)
    return max(g, float(np.max(np.abs(x), initial=0.0)))
