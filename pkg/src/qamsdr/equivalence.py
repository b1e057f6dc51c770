"""Feasibility checkers and the maps between BC, PI and VA feasible points.

Also hosts the 64-QAM alternate-form maps, the Vandermonde decomposition of
moment matrices, and the numerical interval D reachable by the 64-QAM PI
constraints for arbitrary roots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import va_weight_matrix
from .relaxations import CANONICAL_ROOTS_64, PiAux, RootSet, SdrPoint, VaAux, default_bounds, poly_coeffs
from .sdp import ConeStructure, ProblemBuilder, SolverOptions, Status, min_eig, solve, sqrt_factor

DEFAULT_TOL = 1e-6
ROOTS_16 = (1.0, 9.0)


class MissingAux(ValueError):
    """The point lacks the auxiliary variables the checker needs."""


class InfeasibleInput(ValueError):
    pass


class NormOutOfRange(ValueError):
    pass


class DimensionTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    worst_psd_violation: float
    worst_equality_violation: float
    worst_bound_violation: float
    tol: float

    def __bool__(self):
        return self.feasible


def _report(psd, eq, bound, tol) -> FeasibilityReport:
    psd, eq, bound = float(psd), float(eq), float(bound)
    return FeasibilityReport(max(psd, eq, bound) <= tol, psd, eq, bound, tol)


def _psd_violation(mat, vec) -> float:
    """Negative part of min_eig(M - m m'), relative to 1 + tr(M)."""
    gap = mat - np.outer(vec, vec)
    return max(0.0, -min_eig(0.5 * (gap + gap.T))) / (1.0 + abs(np.trace(mat)))


def _row_violation(terms, rhs=0.0) -> float:
    """|sum(terms) - rhs| relative to the magnitude of the row."""
    terms = np.asarray(terms, dtype=float)
    return abs(terms.sum() - rhs) / (1.0 + np.abs(terms).sum() + abs(rhs))


# -- checkers -------------------------------------------------------------

def check_bc_feasible(point: SdrPoint, q: int, tol: float = DEFAULT_TOL, bounds=None) -> FeasibilityReport:
    lo, hi = bounds if bounds is not None else default_bounds(q)
    d = np.diag(point.s_mat)
    bound = max(0.0, float(np.max(lo - d)), float(np.max(d - hi))) / (1.0 + hi)
    return _report(_psd_violation(point.s_mat, point.s_vec), 0.0, bound, tol)


def check_pi_feasible(point: SdrPoint, roots: RootSet | None = None, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """PI feasibility; ``roots=None`` means the 16-QAM quadratic form."""
    aux = point.aux
    if not isinstance(aux, PiAux):
        raise MissingAux("point has no (U, u)")
    n = point.s_vec.size
    ds = np.diag(point.s_mat)
    psd = max(_psd_violation(point.s_mat, point.s_vec), _psd_violation(aux.u_mat, aux.u_vec))
    du = np.diag(aux.u_mat)
    eq = 0.0
    if roots is None:
        if aux.u_vec.size != n:
            raise ValueError("16-QAM aux must have size N")
        p = poly_coeffs(ROOTS_16)
        for i in range(n):
            eq = max(eq, _row_violation([ds[i], -aux.u_vec[i]]),
                     _row_violation([p[0], p[1] * aux.u_vec[i], p[2] * du[i]]))
    else:
        if aux.u_vec.size != 2 * n:
            raise ValueError("64-QAM aux must have size 2N")
        p = roots.p
        u1, u2 = aux.u_vec[:n], aux.u_vec[n:]
        d12 = np.diag(aux.u_mat[:n, n:])
        for i in range(n):
            eq = max(eq, _row_violation([ds[i], -u1[i]]), _row_violation([du[i], -u2[i]]),
                     _row_violation([p[0], p[1] * u1[i], p[2] * du[i], p[3] * d12[i], p[4] * du[n + i]]))
    return _report(psd, eq, 0.0, tol)


def check_va_feasible(point: SdrPoint, q: int, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """B >= bb', d(B) = 1, and (S, s) consistent with (W B W', W b)."""
    aux = point.aux
    if not isinstance(aux, VaAux):
        raise MissingAux("point has no (B, b)")
    n = point.s_vec.size
    w = va_weight_matrix(n, q)
    eq = float(np.max(np.abs(np.diag(aux.b_mat) - 1.0)))
    scale = 1.0 + np.abs(point.s_mat).max()
    eq = max(eq, float(np.abs(w @ aux.b_mat @ w.T - point.s_mat).max()) / scale,
             float(np.abs(w @ aux.b_vec - point.s_vec).max()) / scale)
    return _report(_psd_violation(aux.b_mat, aux.b_vec), eq, 0.0, tol)


def _require(report: FeasibilityReport, what: str):
    if not report.feasible:
        raise InfeasibleInput(f"{what} input infeasible: {report}")


# -- 16-QAM PI <-> BC -----------------------------------------------------

def bc_to_pi16(s_mat, s_vec, tol: float = DEFAULT_TOL) -> PiAux:
    """u = d(S), U = uu' + D(w) with w_i = -(S_ii - 1)(S_ii - 9)."""
    _require(check_bc_feasible(SdrPoint(s_mat, s_vec), 2, tol), "BC")
    u = np.diag(s_mat).copy()
    w = np.maximum(-(u - 1.0) * (u - 9.0), 0.0)
    return PiAux(np.outer(u, u) + np.diag(w), u)


def pi_to_bc(point: SdrPoint, roots: RootSet | None = None, tol: float = DEFAULT_TOL) -> SdrPoint:
    _require(check_pi_feasible(point, roots, tol), "PI")
    return SdrPoint(point.s_mat, point.s_vec)


# -- BC <-> VA ------------------------------------------------------------

def orthogonal_unit(z) -> np.ndarray:
    """Unit vector orthogonal to z from the basis direction where |z| is smallest."""
    z = np.asarray(z, dtype=float)
    k = int(np.argmin(np.abs(z)))
    e = np.zeros_like(z)
    e[k] = 1.0
    nz2 = z @ z
    if nz2 > 0:
        e -= (z[k] / nz2) * z
    return e / np.linalg.norm(e)


def lemma1_decompose(z, alpha: float, beta: float, tol: float = 1e-9, z_perp=None):
    """Split z = alpha u + beta v with unit u and v.

    Needs beta - alpha <= ||z|| <= beta + alpha; norms within ``tol`` outside
    the interval are clamped to it. ``z_perp`` overrides the default unit
    vector orthogonal to z.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise DimensionTooSmall("z must have at least two entries")
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    lo, hi = abs(beta - alpha), beta + alpha
    nz = float(np.linalg.norm(z))
    if nz < lo - tol or nz > hi + tol:
        raise NormOutOfRange(f"||z|| = {nz} outside [{lo}, {hi}]")
    t = min(max(nz, lo), hi)
    perp = orthogonal_unit(z) if z_perp is None else np.asarray(z_perp, dtype=float)
    if t == 0.0:
        # only when alpha == beta: any unit u works
        u = perp
    else:
        theta = (t * t - (beta * beta - alpha * alpha)) / (2 * alpha * t)
        theta = min(max(theta, -1.0), 1.0)
        direction = z / nz if nz > 0 else orthogonal_unit(perp)
        u = theta * direction + np.sqrt(1.0 - theta * theta) * perp
    v = (z - alpha * u) / beta
    return u, v


def bc_to_va(s_mat, s_vec, q: int, tol: float = DEFAULT_TOL, rng=None) -> VaAux:
    """Build (B, b) with d(B) = 1 and (W B W', W b) = (S, s).

    ``rng`` (a numpy Generator) replaces the deterministic orthogonal
    direction by a random one, exposing the non-uniqueness of (B, b).
    """
    _require(check_bc_feasible(SdrPoint(s_mat, s_vec), q, tol), "BC")
    n = s_vec.size
    if q == 1:
        return VaAux(np.array(s_mat, dtype=float), np.array(s_vec, dtype=float))
    x = np.empty((n + 1, n + 1))
    x[:n, :n], x[:n, n], x[n, :n], x[n, n] = s_mat, s_vec, s_vec, 1.0
    k = q * n
    z = np.zeros((k + 1, n + 1))
    z[:n + 1] = sqrt_factor(x, tol=max(tol, 1e-8))
    r = np.zeros((k + 1, k + 1))
    alpha, beta = 2.0 ** (q - 1) - 1, 2.0 ** (q - 1)
    # norms may exceed the bounds by ~tol relative to the largest level
    slack = tol * (1 + (2 ** q - 1) ** 2)
    for i in range(n):
        perp = None
        if rng is not None:
            # draw inside the rows spanned by the factor so that b moves too
            g = np.zeros(k + 1)
            g[:n + 1] = rng.standard_normal(n + 1)
            zi = z[:, i]
            g -= (g @ zi) / max(zi @ zi, 1e-300) * zi
            perp = g / np.linalg.norm(g)
        u, v = lemma1_decompose(z[:, i], alpha, beta, tol=slack, z_perp=perp)
        for j in range(q - 1):
            r[:, i + j * n] = u
        r[:, i + (q - 1) * n] = v
    r[:, k] = z[:, n]
    y = r.T @ r
    return VaAux(y[:k, :k], y[:k, k].copy())


def va_to_bc(b_mat, b_vec, q: int, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    n = b_vec.size // q
    w = va_weight_matrix(n, q)
    s_mat, s_vec = w @ b_mat @ w.T, w @ b_vec
    _require(check_va_feasible(SdrPoint(s_mat, s_vec, VaAux(b_mat, b_vec)), q, tol), "VA")
    return s_mat, s_vec


# -- 64-QAM PI, alternate form, moments -----------------------------------

def hankel3(v) -> np.ndarray:
    """Hank((1, v1, v2, v3, v4)) as a 3x3 matrix."""
    v1, v2, v3, v4 = v
    return np.array([[1.0, v1, v2], [v1, v2, v3], [v2, v3, v4]])


def pi64_to_alternate(point: SdrPoint, roots: RootSet = CANONICAL_ROOTS_64, tol: float = DEFAULT_TOL):
    """Per-coordinate 3x3 moment matrices [[1, u1, u2], [u1, U11, U12], [u2, U12, U22]]."""
    _require(check_pi_feasible(point, roots, tol), "PI-64")
    n = point.s_vec.size
    u, um = point.aux.u_vec, point.aux.u_mat
    out = []
    for i in range(n):
        idx = [i, n + i]
        v = np.empty((3, 3))
        v[0, 0] = 1.0
        v[0, 1:] = v[1:, 0] = u[idx]
        v[1:, 1:] = um[np.ix_(idx, idx)]
        out.append(v)
    return out


def check_alternate(vs, s_mat, roots: RootSet, tol: float = DEFAULT_TOL):
    """Raise InfeasibleInput unless each V_i is a feasible moment matrix tied to S_ii."""
    p = roots.p
    ds = np.diag(s_mat)
    for i, v in enumerate(vs):
        scale = 1.0 + np.trace(v)
        if abs(v[0, 0] - 1.0) > tol or abs(v[1, 1] - v[0, 2]) > tol * scale:
            raise InfeasibleInput(f"V_{i} is not Hankel with unit corner")
        if _row_violation([ds[i], -v[0, 1]]) > tol:
            raise InfeasibleInput(f"V_{i} does not match S_ii")
        if _row_violation([p[0], p[1] * v[0, 1], p[2] * v[0, 2], p[3] * v[1, 2], p[4] * v[2, 2]]) > tol:
            raise InfeasibleInput(f"V_{i} violates the root polynomial")
        if -min_eig(v) > tol * scale:
            raise InfeasibleInput(f"V_{i} is not PSD")
        schur = v[1:, 1:] - np.outer(v[0, 1:], v[0, 1:])
        if -min_eig(schur) > tol * scale:
            raise InfeasibleInput(f"Schur block of V_{i} is not PSD")


def alternate_to_pi64(vs, s_mat, s_vec, roots: RootSet = CANONICAL_ROOTS_64, tol: float = DEFAULT_TOL) -> PiAux:
    """Assemble (U, u) from the moment matrices; off-diagonal blocks come from u1, u2 outer products."""
    check_alternate(vs, s_mat, roots, tol)
    if _psd_violation(s_mat, s_vec) > tol:
        raise InfeasibleInput("S - ss' is not PSD")
    vv = np.array([[v[0, 1], v[0, 2], v[1, 2], v[2, 2]] for v in vs])
    u1 = vv[:, 0]
    u2 = vv[:, 1]
    u11 = np.diag(vv[:, 1]) - np.diag(u1 * u1) + np.outer(u1, u1)
    u12 = np.diag(vv[:, 2]) - np.diag(u1 * u2) + np.outer(u1, u2)
    u22 = np.diag(vv[:, 3]) - np.diag(u2 * u2) + np.outer(u2, u2)
    u_mat = np.block([[u11, u12], [u12.T, u22]])
    return PiAux(0.5 * (u_mat + u_mat.T), np.concatenate([u1, u2]))


def bc_to_pi64(s_mat, s_vec, roots: RootSet = CANONICAL_ROOTS_64, tol: float = DEFAULT_TOL) -> PiAux:
    """Mix the moment vectors of the two roots bracketing each S_ii, then assemble (U, u)."""
    r = np.array(roots.r)
    _require(check_bc_feasible(SdrPoint(s_mat, s_vec), 3, tol, bounds=(r[0], r[3])), "BC")
    vs = []
    for d in np.clip(np.diag(s_mat), r[0], r[3]):
        k = min(int(np.searchsorted(r, d, side="right")), 3)
        lo, hi = r[k - 1], r[k]
        t = (hi - d) / (hi - lo)
        vs.append(t * moment_matrix(lo) + (1 - t) * moment_matrix(hi))
    # clipping above can leave S_ii a hair away from v1; match it exactly
    for v, d in zip(vs, np.diag(s_mat)):
        v[0, 1] = v[1, 0] = d
    return alternate_to_pi64(vs, s_mat, s_vec, roots, tol)


def moment_matrix(r: float) -> np.ndarray:
    """a a' with a = (1, r, r^2)."""
    a = np.array([1.0, r, r * r])
    return np.outer(a, a)


def hankel_to_theta(v, roots: RootSet = CANONICAL_ROOTS_64, tol: float = 1e-8) -> np.ndarray:
    """Weights theta with V = sum theta_l a_l a_l' for a Hankel moment matrix.

    ``v`` is either the 3x3 matrix or the vector (v1, v2, v3, v4). Rows
    v_k = sum theta_l r_l^k, k = 1..4, are solved on roots scaled to [0, 1];
    the unit-sum row and the matrix identity are verified afterwards.
    """
    v = np.asarray(v, dtype=float)
    if v.shape == (3, 3):
        v = np.array([v[0, 1], v[0, 2], v[1, 2], v[2, 2]])
    r = np.array(roots.r)
    p = roots.p
    terms = np.concatenate([[p[0]], p[1:] * v])
    if _row_violation(terms) > tol:
        raise InfeasibleInput(f"polynomial constraint violated by {_row_violation(terms):.3g}")
    scale = r[3]
    rho = r / scale
    k = np.arange(1, 5)
    vand = rho[None, :] ** k[:, None]
    theta = np.linalg.solve(vand, v / scale ** k)
    if abs(theta.sum() - 1.0) > tol:
        raise InfeasibleInput(f"sum(theta) = {theta.sum()!r}")
    recon = sum(t * moment_matrix(ri) for t, ri in zip(theta, r))
    if np.abs(recon - hankel3(v)).max() > tol * (1 + np.abs(hankel3(v)).max()):
        raise InfeasibleInput("Vandermonde residual too large")
    return theta


# -- the interval D -------------------------------------------------------

def roots_condition(roots: RootSet) -> bool:
    r1, r2, r3, r4 = roots.r
    lhs = np.sqrt(r4 - r1)
    return bool(lhs <= min(np.sqrt(r3 - r1) + np.sqrt(r2 - r1), np.sqrt(r4 - r2) + np.sqrt(r4 - r3)))


def lower_end_is_r1(roots: RootSet) -> bool:
    """Closed-form test for L = r1 in terms of u_j = r_{j+1}/r1 - 1."""
    r1 = roots.r[0]
    u1, u2, u3 = (rj / r1 - 1 for rj in roots.r[1:])
    return bool((np.sqrt(u1) - np.sqrt(u2)) ** 2 <= u3 <= (np.sqrt(u1) + np.sqrt(u2)) ** 2)


def upper_end_is_r4(roots: RootSet) -> bool:
    """Closed-form test for U = r4 in terms of v_i = 1 - r_i/r4."""
    r4 = roots.r[3]
    v1, v2, v3 = (1 - ri / r4 for ri in roots.r[:3])
    return bool((np.sqrt(v2) - np.sqrt(v3)) ** 2 <= v1 <= (np.sqrt(v2) + np.sqrt(v3)) ** 2)


@dataclass(frozen=True)
class RootAnalysis:
    roots: RootSet
    p: np.ndarray
    condition_holds: bool
    d_interval: tuple[float, float]
    lower_closed_form: bool
    upper_closed_form: bool

    def interval_is_full(self, tol: float = 1e-4) -> bool:
        """[L, U] equals [r1, r4] up to an absolute tol."""
        r = self.roots.r
        return abs(self.d_interval[0] - r[0]) <= tol and abs(self.d_interval[1] - r[3]) <= tol

    def agrees(self, tol: float = 1e-4) -> bool:
        return self.interval_is_full(tol) == self.condition_holds


def _extreme_first_moment(rho, sign: float, opts: SolverOptions) -> float:
    """min sign*v1 over PSD Hank((1, v)) obeying the root polynomial (any real roots)."""
    p = poly_coeffs(rho)
    pb = ProblemBuilder(ConeStructure((3,), 0))
    c = np.zeros((3, 3))
    c[0, 1] = c[1, 0] = 0.5 * sign
    pb.objective(0, c)
    pb.add_constraint({(0, 0, 0): 1.0}, 1.0)
    pb.add_constraint({(0, 1, 1): 1.0, (0, 0, 2): -1.0}, 0.0)
    pb.add_constraint({(0, 0, 1): p[1], (0, 0, 2): p[2], (0, 1, 2): p[3], (0, 2, 2): p[4]}, -p[0])
    sol = solve(pb.build(), opts)
    if sol.status is not Status.OPTIMAL:
        raise RuntimeError(f"interval program failed: {sol.status.value} {sol.message}")
    return float(sol.x_psd[0][0, 1])


def compute_d_interval(roots: RootSet, opts: SolverOptions | None = None) -> RootAnalysis:
    """Numerically compute D = [L, U] by two 3x3 SDPs.

    The roots are first mapped affinely onto [-1, 1]. Hankel moment
    matrices transform by a triangular congruence under such a map, so the
    interval maps the same way and is mapped back at the end.
    """
    opts = opts or SolverOptions()
    r = np.array(roots.r)
    mid, half = 0.5 * (r[0] + r[3]), 0.5 * (r[3] - r[0])
    rho = (r - mid) / half
    lo = float(mid + half * _extreme_first_moment(rho, 1.0, opts))
    hi = float(mid + half * _extreme_first_moment(rho, -1.0, opts))
    return RootAnalysis(roots, roots.p, roots_condition(roots), (lo, hi),
                        lower_end_is_r1(roots), upper_end_is_r4(roots))
