"""Compile the BC, PI and VA semidefinite relaxations into ConeProblems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Instance, va_weight_matrix
from .sdp import ConeProblem, ConeSolution, ConeStructure, ProblemBuilder, SolverOptions, solve


@dataclass(frozen=True)
class PiAux:
    u_mat: np.ndarray
    u_vec: np.ndarray


@dataclass(frozen=True)
class VaAux:
    b_mat: np.ndarray
    b_vec: np.ndarray


@dataclass(frozen=True)
class SdrPoint:
    s_mat: np.ndarray
    s_vec: np.ndarray
    aux: PiAux | VaAux | None = None

    def lifted(self) -> np.ndarray:
        """The bordered matrix [[S, s], [s', 1]]."""
        return bordered(self.s_mat, self.s_vec)


def bordered(mat, vec) -> np.ndarray:
    n = vec.shape[0]
    x = np.empty((n + 1, n + 1))
    x[:n, :n] = mat
    x[:n, n] = vec
    x[n, :n] = vec
    x[n, n] = 1.0
    return x


def poly_coeffs(roots) -> np.ndarray:
    """Ascending coefficients p with prod(u - r_i) = sum_l p_l u^(l-1); monic."""
    r = np.asarray(roots, dtype=float)
    if np.unique(r).size != r.size:
        raise ValueError("roots must be distinct")
    return np.poly(r)[::-1].copy()


@dataclass(frozen=True)
class RootSet:
    r: tuple[float, float, float, float]

    def __post_init__(self):
        r = tuple(float(v) for v in self.r)
        if len(r) != 4 or not (0 < r[0] < r[1] < r[2] < r[3]):
            raise ValueError("need four increasing positive roots")
        object.__setattr__(self, "r", r)

    @property
    def p(self) -> np.ndarray:
        return poly_coeffs(self.r)


CANONICAL_ROOTS_64 = RootSet((1.0, 9.0, 25.0, 49.0))


@dataclass
class Relaxation:
    """A compiled relaxation: the cone problem plus what is needed to read it back."""

    kind: str  # "bc", "pi16", "pi64", "va"
    instance: Instance
    problem: ConeProblem
    q: int
    bounds: tuple[float, float] | None = None
    roots: RootSet | None = None
    scales: tuple[float, float] = (1.0, 1.0)
    meta: dict = field(default_factory=dict)

    def solve(self, opts: SolverOptions | None = None) -> ConeSolution:
        return solve(self.problem, opts)


def _objective_matrix(gram, hty):
    n = hty.shape[0]
    c = np.zeros((n + 1, n + 1))
    c[:n, :n] = gram
    c[:n, n] = -hty
    c[n, :n] = -hty
    return c


def objective_f(instance: Instance, point: SdrPoint) -> float:
    """tr(H'H S) - 2 s'H'y + ||y||^2."""
    n = instance.n
    if point.s_mat.shape != (n, n) or point.s_vec.shape != (n,):
        raise ValueError("point dimension does not match the instance")
    return float(np.vdot(instance.gram, point.s_mat) - 2 * point.s_vec @ instance.hty + instance.y_norm2)


def default_bounds(q: int) -> tuple[float, float]:
    return 1.0, float((2 ** q - 1) ** 2)


def build_bc_sdr(instance: Instance, bounds=None) -> Relaxation:
    n = instance.n
    lo, hi = bounds if bounds is not None else default_bounds(instance.q)
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    pb = ProblemBuilder(ConeStructure((n + 1,), 2 * n))
    pb.objective(0, _objective_matrix(instance.gram, instance.hty))
    pb.constant_term = instance.y_norm2
    pb.add_constraint({(0, n, n): 1.0}, 1.0)
    for i in range(n):
        pb.add_constraint({(0, i, i): 1.0, ("lin", i): -1.0}, lo)
        pb.add_constraint({(0, i, i): 1.0, ("lin", n + i): 1.0}, hi)
    return Relaxation("bc", instance, pb.build(), instance.q, bounds=(float(lo), float(hi)))


def build_pi_sdr_16(instance: Instance) -> Relaxation:
    if instance.q != 2:
        raise ValueError("the 16-QAM PI-SDR needs q = 2")
    n = instance.n
    pb = ProblemBuilder(ConeStructure((n + 1, n + 1), 0))
    pb.objective(0, _objective_matrix(instance.gram, instance.hty))
    pb.constant_term = instance.y_norm2
    pb.add_constraint({(0, n, n): 1.0}, 1.0)
    pb.add_constraint({(1, n, n): 1.0}, 1.0)
    for i in range(n):
        # d(S) = u
        pb.add_constraint({(0, i, i): 1.0, (1, i, n): -1.0}, 0.0)
        # d(U) - 10 u + 9 = 0
        pb.add_constraint({(1, i, i): 1.0, (1, i, n): -10.0}, -9.0)
    return Relaxation("pi16", instance, pb.build(), 2, roots=None)


def build_pi_sdr_64(instance: Instance, roots: RootSet = CANONICAL_ROOTS_64) -> Relaxation:
    """64-QAM PI-SDR with arbitrary roots.

    The U block is stored as D [[U, u], [u', 1]] D with
    D = diag(I/r4, I/r4^2, 1), which keeps its entries O(1).
    """
    n = instance.n
    p = roots.p
    d1 = 1.0 / roots.r[3]
    d2 = d1 * d1
    pb = ProblemBuilder(ConeStructure((n + 1, 2 * n + 1), 0))
    pb.objective(0, _objective_matrix(instance.gram, instance.hty))
    pb.constant_term = instance.y_norm2
    c = 2 * n
    pb.add_constraint({(0, n, n): 1.0}, 1.0)
    pb.add_constraint({(1, c, c): 1.0}, 1.0)
    for i in range(n):
        # d(S) = u1
        pb.add_constraint({(0, i, i): 1.0, (1, i, c): -1.0 / d1}, 0.0)
        # d(U11) = u2, multiplied through by d1^2
        pb.add_constraint({(1, i, i): 1.0, (1, n + i, c): -d1 * d1 / d2}, 0.0)
        # p1 + p2 u1 + p3 d(U11) + p4 d(U12) + p5 d(U22) = 0
        pb.add_constraint({
            (1, i, c): p[1] / d1,
            (1, i, i): p[2] / d1 ** 2,
            (1, i, n + i): p[3] / (d1 * d2),
            (1, n + i, n + i): p[4] / d2 ** 2,
        }, -p[0])
    return Relaxation("pi64", instance, pb.build(), instance.q, roots=roots, scales=(d1, d2))


def build_va_sdr(instance: Instance, q: int | None = None) -> Relaxation:
    q = instance.q if q is None else q
    n = instance.n
    w = va_weight_matrix(n, q)
    k = q * n
    pb = ProblemBuilder(ConeStructure((k + 1,), 0))
    pb.objective(0, _objective_matrix(w.T @ instance.gram @ w, w.T @ instance.hty))
    pb.constant_term = instance.y_norm2
    pb.add_constraint({(0, k, k): 1.0}, 1.0)
    for i in range(k):
        pb.add_constraint({(0, i, i): 1.0}, 1.0)
    return Relaxation("va", instance, pb.build(), q)


def build(kind: str, instance: Instance, roots: RootSet | None = None) -> Relaxation:
    """Dispatch on a relaxation label: bc, pi (16 or 64 by q), pi16, pi64, va."""
    if kind == "bc":
        return build_bc_sdr(instance)
    if kind == "va":
        return build_va_sdr(instance)
    if kind == "pi":
        kind = {2: "pi16", 3: "pi64"}.get(instance.q, "")
        if not kind:
            raise ValueError(f"PI-SDR is not defined for q = {instance.q}")
    if kind == "pi16":
        return build_pi_sdr_16(instance)
    if kind == "pi64":
        return build_pi_sdr_64(instance, roots or CANONICAL_ROOTS_64)
    raise ValueError(f"unknown relaxation {kind!r}")


def extract_point(solution: ConeSolution, relax: Relaxation) -> SdrPoint:
    """Read (S, s) and the auxiliary variables out of a solver result."""
    n = relax.instance.n
    x0 = solution.x_psd[0]
    if relax.kind == "va":
        k = relax.q * n
        b_mat = 0.5 * (x0[:k, :k] + x0[:k, :k].T)
        b_vec = x0[:k, k].copy()
        w = va_weight_matrix(n, relax.q)
        return SdrPoint(w @ b_mat @ w.T, w @ b_vec, VaAux(b_mat, b_vec))
    s_mat = 0.5 * (x0[:n, :n] + x0[:n, :n].T)
    s_vec = x0[:n, n].copy()
    if relax.kind == "bc":
        return SdrPoint(s_mat, s_vec)
    x1 = solution.x_psd[1]
    if relax.kind == "pi16":
        u_mat = 0.5 * (x1[:n, :n] + x1[:n, :n].T)
        return SdrPoint(s_mat, s_vec, PiAux(u_mat, x1[:n, n].copy()))
    d1, d2 = relax.scales
    dinv = np.concatenate([np.full(n, 1 / d1), np.full(n, 1 / d2)])
    u_mat = dinv[:, None] * x1[:2 * n, :2 * n] * dinv[None, :]
    u_mat = 0.5 * (u_mat + u_mat.T)
    u_vec = dinv * x1[:2 * n, 2 * n]
    return SdrPoint(s_mat, s_vec, PiAux(u_mat, u_vec))
