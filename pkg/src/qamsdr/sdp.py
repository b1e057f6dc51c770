"""Dense conic programs over PSD blocks and the nonnegative orthant.

Primal (standard form)::

    min  sum_k <C_k, X_k> + c_l' x_l + constant
    s.t. sum_k <A_ik, X_k> + a_il' x_l = b_i,   X_k PSD, x_l >= 0

Dual::

    max  b'y + constant
    s.t. C_k - sum_i y_i A_ik = Z_k PSD,  c_l - A_l' y = z_l >= 0

The solver is a primal-dual path-following method using the HKM search
direction with a Mehrotra predictor-corrector step.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)


class NotPsdError(ValueError):
    """Raised when a matrix expected to be PSD has a clearly negative eigenvalue."""


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class ConeStructure:
    psd_block_sizes: tuple[int, ...]
    nonneg_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "psd_block_sizes", tuple(int(n) for n in self.psd_block_sizes))
        if any(n < 1 for n in self.psd_block_sizes):
            raise ValueError("PSD block sizes must be positive")
        if self.nonneg_count < 0:
            raise ValueError("nonneg_count must be nonnegative")
        if not self.psd_block_sizes and self.nonneg_count == 0:
            raise ValueError("at least one cone is required")

    @property
    def barrier_degree(self) -> int:
        return sum(self.psd_block_sizes) + self.nonneg_count


@dataclass
class ConeProblem:
    """A standard-form conic program with dense coefficient storage.

    ``a_psd[k]`` has shape ``(m, n_k, n_k)`` and ``a_lin`` has shape
    ``(m, nonneg_count)``; row ``i`` of all of them together with ``b[i]``
    is one equality constraint.
    """

    structure: ConeStructure
    c_psd: list[np.ndarray]
    c_lin: np.ndarray
    a_psd: list[np.ndarray]
    a_lin: np.ndarray
    b: np.ndarray
    constant_term: float = 0.0

    def __post_init__(self):
        st = self.structure
        self.b = np.asarray(self.b, dtype=float)
        m = self.b.shape[0]
        if m < 1:
            raise ValueError("at least one constraint is required")
        if len(self.c_psd) != len(st.psd_block_sizes) or len(self.a_psd) != len(st.psd_block_sizes):
            raise ValueError("block count mismatch")
        for n, c, a in zip(st.psd_block_sizes, self.c_psd, self.a_psd):
            if c.shape != (n, n) or a.shape != (m, n, n):
                raise ValueError(f"coefficient shape mismatch for block of size {n}")
            if not np.allclose(c, c.T) or not np.allclose(a, a.transpose(0, 2, 1)):
                raise ValueError("coefficient matrices must be symmetric")
        self.c_lin = np.asarray(self.c_lin, dtype=float).reshape(st.nonneg_count)
        self.a_lin = np.asarray(self.a_lin, dtype=float).reshape(m, st.nonneg_count)

    @property
    def n_constraints(self) -> int:
        return self.b.shape[0]

    @property
    def constraints(self):
        """Yield ``(psd_coefficients, lin_coefficients, rhs)`` per equality row."""
        for i in range(self.n_constraints):
            yield [a[i] for a in self.a_psd], self.a_lin[i], float(self.b[i])

    def primal_objective(self, x_psd, x_lin) -> float:
        val = sum(float(np.vdot(c, x)) for c, x in zip(self.c_psd, x_psd))
        return val + float(self.c_lin @ x_lin) + self.constant_term

    def residual(self, x_psd, x_lin) -> np.ndarray:
        """b - A(x)."""
        ax = self.a_lin @ x_lin
        for a, x in zip(self.a_psd, x_psd):
            ax = ax + a.reshape(a.shape[0], -1) @ x.ravel()
        return self.b - ax

    def to_json(self) -> str:
        """Debug dump; see README for the format."""
        doc = {
            "psd_block_sizes": list(self.structure.psd_block_sizes),
            "nonneg_count": self.structure.nonneg_count,
            "constant_term": self.constant_term,
            "c_psd": [c.tolist() for c in self.c_psd],
            "c_lin": self.c_lin.tolist(),
            "constraints": [
                {"psd": [a.tolist() for a in ap], "lin": al.tolist(), "rhs": rhs}
                for ap, al, rhs in self.constraints
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ConeProblem":
        doc = json.loads(text)
        st = ConeStructure(doc["psd_block_sizes"], doc["nonneg_count"])
        rows = doc["constraints"]
        m = len(rows)
        a_psd = [np.array([r["psd"][k] for r in rows], dtype=float).reshape(m, n, n)
                 for k, n in enumerate(st.psd_block_sizes)]
        a_lin = np.array([r["lin"] for r in rows], dtype=float).reshape(m, st.nonneg_count)
        return cls(st, [np.array(c, dtype=float) for c in doc["c_psd"]], np.array(doc["c_lin"], dtype=float),
                   a_psd, a_lin, np.array([r["rhs"] for r in rows], dtype=float), doc["constant_term"])


class ProblemBuilder:
    """Incrementally assemble a ConeProblem from sparse entries.

    Entries are addressed as ``(block, i, j)`` for PSD blocks and ``("lin", j)``
    for the orthant. Off-diagonal PSD entries are symmetrized: a coefficient
    ``w`` on ``(k, i, j)`` with ``i != j`` contributes ``w`` to the inner
    product through ``X_ij`` (that is, ``w/2`` on each of the mirrored
    positions).
    """

    def __init__(self, structure: ConeStructure):
        self.structure = structure
        self.c_psd = [np.zeros((n, n)) for n in structure.psd_block_sizes]
        self.c_lin = np.zeros(structure.nonneg_count)
        self._rows: list[dict] = []
        self._rhs: list[float] = []
        self.constant_term = 0.0

    @staticmethod
    def _put(mat, i, j, w):
        if i == j:
            mat[i, i] += w
        else:
            mat[i, j] += 0.5 * w
            mat[j, i] += 0.5 * w

    def objective(self, block, mat):
        self.c_psd[block] += mat

    def add_constraint(self, entries: dict, rhs: float):
        self._rows.append(entries)
        self._rhs.append(float(rhs))

    def build(self) -> ConeProblem:
        st = self.structure
        m = len(self._rows)
        a_psd = [np.zeros((m, n, n)) for n in st.psd_block_sizes]
        a_lin = np.zeros((m, st.nonneg_count))
        for r, entries in enumerate(self._rows):
            for key, w in entries.items():
                if key[0] == "lin":
                    a_lin[r, key[1]] += w
                else:
                    k, i, j = key
                    self._put(a_psd[k][r], i, j, w)
        return ConeProblem(st, self.c_psd, self.c_lin, a_psd, a_lin, np.array(self._rhs), self.constant_term)


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iters: int = 100
    step_fraction: float = 0.98
    verbose: bool = False
    # keep iterating past gap_tol towards this gap while progress lasts
    target_gap: float | None = 1e-10
    stall_iters: int = 5
    # final least-norm projection of the primal point onto the equality rows
    refine_primal: bool = True


@dataclass
class ConeSolution:
    x_psd: list[np.ndarray]
    x_lin: np.ndarray
    dual_y: np.ndarray
    z_psd: list[np.ndarray]
    z_lin: np.ndarray
    status: Status
    gap: float
    primal_infeas: float
    dual_infeas: float
    objective: float
    dual_objective: float
    iterations: int
    message: str = ""
    trace: list[dict] = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def min_eig(x: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    x = np.asarray(x, dtype=float)
    return float(sla.eigvalsh(0.5 * (x + x.T), subset_by_index=[0, 0])[0])


def sqrt_factor(x: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Return R with R'R = x, from the eigendecomposition with negative eigenvalues clipped."""
    x = np.asarray(x, dtype=float)
    x = 0.5 * (x + x.T)
    w, v = np.linalg.eigh(x)
    scale = 1.0 + np.abs(w).max(initial=0.0)
    if w[0] < -tol * scale:
        raise NotPsdError(f"minimum eigenvalue {w[0]:.3e} below -tol")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)).T


def _max_step_psd(x_chol, dx):
    # largest a with X + a dX PSD, given lower Cholesky factor of X
    t = sla.solve_triangular(x_chol, dx, lower=True)
    t = sla.solve_triangular(x_chol, t.T, lower=True)
    lam = sla.eigvalsh(0.5 * (t + t.T), subset_by_index=[0, 0])[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _chol_all(mats):
    try:
        return [sla.cholesky(m, lower=True, check_finite=False) for m in mats]
    except sla.LinAlgError:
        return None


NEIGHBOURHOOD = 1e-4


def _centrality(x_chol, Z, xl, zl):
    # smallest eigenvalue of X^(1/2) Z X^(1/2) over all cones
    vals = [np.inf]
    if xl.size:
        vals.append(float(np.min(xl * zl)))
    for L, z in zip(x_chol, Z):
        t = L.T @ z @ L
        vals.append(sla.eigvalsh(0.5 * (t + t.T), subset_by_index=[0, 0])[0])
    return min(vals)


def _max_step_lin(x, dx):
    neg = dx < 0
    if not neg.any():
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _apply(X, xl, a_psd_flat, a_lin):
    ax = a_lin @ xl
    for af, x in zip(a_psd_flat, X):
        ax = ax + af @ x.ravel()
    return ax


def _project_affine(X, xl, a_psd_flat, a_lin, b, passes=2):
    """Least-norm correction of (X, xl) onto A(x) = b.

    Removes the residual the interior-point iterations leave behind; the
    correction is of the size of that residual, so cone membership is
    affected only at the same order.
    """
    a_full = np.hstack(a_psd_flat + [a_lin])
    try:
        gram_f = sla.cho_factor(a_full @ a_full.T, lower=True)
    except sla.LinAlgError:
        # dependent rows: leave the point as it is
        return X, xl
    sizes = [x.shape[0] for x in X]
    for _ in range(passes):
        r = b - _apply(X, xl, a_psd_flat, a_lin)
        d = a_full.T @ sla.cho_solve(gram_f, r)
        off = 0
        X = list(X)
        for k, n in enumerate(sizes):
            dk = d[off:off + n * n].reshape(n, n)
            X[k] = X[k] + 0.5 * (dk + dk.T)
            off += n * n
        xl = xl + d[off:]
    return X, xl


def solve(problem: ConeProblem, opts: SolverOptions | None = None) -> ConeSolution:
    """Solve a ConeProblem with a dense HKM predictor-corrector method."""
    opts = opts or SolverOptions()
    st = problem.structure
    m = problem.n_constraints

    # unit-norm equality rows
    norms = np.sum(problem.a_lin ** 2, axis=1)
    for a in problem.a_psd:
        norms = norms + np.sum(a ** 2, axis=(1, 2))
    norms = np.sqrt(norms)
    if np.any(norms == 0):
        raise ValueError("constraint with all-zero coefficients")
    a_psd = [a / norms[:, None, None] for a in problem.a_psd]
    a_psd_flat = [a.reshape(m, -1) for a in a_psd]
    a_lin = problem.a_lin / norms[:, None]
    b = problem.b / norms
    c_psd = problem.c_psd
    c_lin = problem.c_lin
    sizes = st.psd_block_sizes
    nu = st.barrier_degree

    target = min(opts.gap_tol, opts.target_gap or opts.gap_tol)
    tau = 1.0 + np.max(np.abs(b))
    X = [tau * np.eye(n) for n in sizes]
    Z = [tau * np.eye(n) for n in sizes]
    xl = np.full(st.nonneg_count, tau)
    zl = np.full(st.nonneg_count, tau)
    y = np.zeros(m)

    b_norm = 1.0 + np.linalg.norm(b)
    c_norm = 1.0 + np.sqrt(sum(np.sum(c ** 2) for c in c_psd) + np.sum(c_lin ** 2))

    x_chol, z_chol = _chol_all(X), _chol_all(Z)
    trace = []
    best = None
    status = Status.MAX_ITERATIONS
    message = ""
    it = 0

    def aty(vec):
        return [(vec @ af).reshape(n, n) for af, n in zip(a_psd_flat, sizes)], a_lin.T @ vec

    def measures():
        rp = b - a_lin @ xl
        for af, x in zip(a_psd_flat, X):
            rp = rp - af @ x.ravel()
        ay_psd, ay_lin = aty(y)
        rd = [c - ay - z for c, ay, z in zip(c_psd, ay_psd, Z)]
        rdl = c_lin - ay_lin - zl
        pobj = sum(float(np.vdot(c, x)) for c, x in zip(c_psd, X)) + float(c_lin @ xl)
        dobj = float(b @ y)
        pinf = np.linalg.norm(rp) / b_norm
        dinf = np.sqrt(sum(np.sum(r ** 2) for r in rd) + np.sum(rdl ** 2)) / c_norm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return rp, rd, rdl, pobj, dobj, pinf, dinf, gap

    for it in range(opts.max_iters + 1):
        rp, rd, rdl, pobj, dobj, pinf, dinf, gap = measures()
        xz = sum(float(np.vdot(x, z)) for x, z in zip(X, Z)) + float(xl @ zl)
        mu = xz / nu
        coupling = sum(float(np.vdot(r, x)) for r, x in zip(rd, X)) + float(rdl @ xl) - float(rp @ y)
        trace.append({"iter": it, "pobj": pobj + problem.constant_term, "dobj": dobj + problem.constant_term,
                      "gap": gap, "pinf": pinf, "dinf": dinf, "mu": mu, "coupling": coupling})
        if opts.verbose:
            log.info("it %3d pobj % .10e dobj % .10e gap %.2e pinf %.2e dinf %.2e", it, pobj, dobj, gap, pinf, dinf)
        if not np.all(np.isfinite([pobj, dobj, pinf, dinf])):
            status, message = Status.NUMERICAL_FAILURE, "non-finite iterate"
            break
        merit = max(gap / opts.gap_tol, pinf / opts.feas_tol, dinf / opts.feas_tol)
        if best is None or merit < best[0]:
            best = (merit, [x.copy() for x in X], xl.copy(), y.copy(), [z.copy() for z in Z], zl.copy(),
                    pobj, dobj, gap, pinf, dinf, it)
        if gap <= target and pinf <= opts.feas_tol and dinf <= opts.feas_tol:
            status = Status.OPTIMAL
            break
        if best[0] <= 1.0 and it - best[-1] >= opts.stall_iters:
            status = Status.OPTIMAL
            break
        if it == opts.max_iters:
            status = Status.MAX_ITERATIONS
            break

        if x_chol is None:
            x_chol, z_chol = _chol_all(X), _chol_all(Z)
        z_inv = [sla.cho_solve((L, True), np.eye(L.shape[0])) for L in z_chol]
        z_inv = [0.5 * (zi + zi.T) for zi in z_inv]

        schur = (a_lin * (xl / zl)) @ a_lin.T
        for a, af, x, zi, n in zip(a_psd, a_psd_flat, X, z_inv, sizes):
            g = np.matmul(np.matmul(x, a), zi).reshape(m, -1)
            schur += af @ g.T
        schur = 0.5 * (schur + schur.T)
        try:
            schur_f = sla.cho_factor(schur, lower=True, check_finite=False)
        except sla.LinAlgError:
            # regularize lightly once before giving up
            try:
                schur_f = sla.cho_factor(schur + 1e-14 * np.trace(schur) * np.eye(m), lower=True)
            except sla.LinAlgError:
                status, message = Status.NUMERICAL_FAILURE, "Schur complement not factorizable"
                break

        def direction(rc, rcl):
            rhs = rp.copy()
            for af, x, r, zi, rcb in zip(a_psd_flat, X, rd, z_inv, rc):
                t = (rcb - x @ r) @ zi
                rhs -= af @ t.ravel()
            rhs -= a_lin @ ((rcl - xl * rdl) / zl)
            dy = sla.cho_solve(schur_f, rhs, check_finite=False)
            ay_psd, ay_lin = aty(dy)
            dz = [r - ay for r, ay in zip(rd, ay_psd)]
            dzl = rdl - ay_lin
            dx = []
            for x, d, zi, rcb in zip(X, dz, z_inv, rc):
                t = (rcb - x @ d) @ zi
                dx.append(0.5 * (t + t.T))
            dxl = (rcl - xl * dzl) / zl
            return dx, dxl, dy, dz, dzl

        def steps(dx, dxl, dz, dzl):
            ap = min([_max_step_psd(L, d) for L, d in zip(x_chol, dx)] + [_max_step_lin(xl, dxl)])
            ad = min([_max_step_psd(L, d) for L, d in zip(z_chol, dz)] + [_max_step_lin(zl, dzl)])
            return ap, ad

        # predictor
        rc = [-(x @ z) for x, z in zip(X, Z)]
        rcl = -xl * zl
        dx, dxl, dy, dz, dzl = direction(rc, rcl)
        ap, ad = steps(dx, dxl, dz, dzl)
        ap, ad = min(1.0, ap), min(1.0, ad)
        xz_aff = sum(float(np.vdot(x + ap * d, z + ad * e)) for x, d, z, e in zip(X, dx, Z, dz))
        xz_aff += float((xl + ap * dxl) @ (zl + ad * dzl))
        sigma = min(1.0, max(0.0, xz_aff / xz)) ** 3

        # corrector
        rc = [sigma * mu * np.eye(n) - x @ z - d @ e for n, x, z, d, e in zip(sizes, X, Z, dx, dz)]
        rcl = sigma * mu - xl * zl - dxl * dzl
        dx, dxl, dy, dz, dzl = direction(rc, rcl)
        ap, ad = steps(dx, dxl, dz, dzl)
        ap = min(1.0, opts.step_fraction * ap)
        ad = min(1.0, opts.step_fraction * ad)
        if max(ap, ad) < 1e-12:
            status, message = Status.NUMERICAL_FAILURE, "step collapse"
            break

        # backtrack until both iterates are in the cone and stay in a wide
        # neighbourhood of the central path
        accepted = False
        for _ in range(40):
            X_new = [x + ap * d for x, d in zip(X, dx)]
            X_new = [0.5 * (x + x.T) for x in X_new]
            Z_new = [z + ad * d for z, d in zip(Z, dz)]
            Z_new = [0.5 * (z + z.T) for z in Z_new]
            xl_new, zl_new = xl + ap * dxl, zl + ad * dzl
            x_chol, z_chol = _chol_all(X_new), _chol_all(Z_new)
            if x_chol is not None and z_chol is not None:
                mu_new = (sum(float(np.vdot(x, z)) for x, z in zip(X_new, Z_new)) + float(xl_new @ zl_new)) / nu
                if _centrality(x_chol, Z_new, xl_new, zl_new) >= NEIGHBOURHOOD * mu_new:
                    accepted = True
                    break
            ap *= 0.8
            ad *= 0.8
        if not accepted:
            status, message = Status.NUMERICAL_FAILURE, "no acceptable step"
            break
        X, Z = X_new, Z_new
        trace[-1].update(step_p=ap, step_d=ad, sigma=sigma)
        xl = xl + ap * dxl
        y = y + ad * dy
        zl = zl + ad * dzl

    if best is not None and best[-1] != it:
        _, X, xl, y, Z, zl, pobj, dobj, gap, pinf, dinf, _ = best
    if opts.refine_primal:
        X, xl = _project_affine(X, xl, a_psd_flat, a_lin, b)
        pinf = np.linalg.norm(b - _apply(X, xl, a_psd_flat, a_lin)) / b_norm
        pobj = sum(float(np.vdot(c, x)) for c, x in zip(c_psd, X)) + float(c_lin @ xl)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    if best is not None and best[0] <= 1.0 and gap <= opts.gap_tol and pinf <= opts.feas_tol:
        status, message = Status.OPTIMAL, ""

    return ConeSolution(
        x_psd=X, x_lin=xl, dual_y=y / norms, z_psd=Z, z_lin=zl, status=status,
        gap=gap, primal_infeas=pinf, dual_infeas=dinf,
        objective=pobj + problem.constant_term, dual_objective=dobj + problem.constant_term,
        iterations=it, message=message, trace=trace,
    )
