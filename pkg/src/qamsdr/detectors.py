"""Symbol decisions from relaxation points, plus ZF, exhaustive ML and sphere decoding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Instance, dec, enumerate_symbols, levels, va_weight_matrix
from .relaxations import SdrPoint

ML_CAP = 2 ** 20


class RankDeficient(ValueError):
    pass


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Decision:
    s_hat: np.ndarray
    objective: float
    method: str


def _decide(instance: Instance, s_hat, method: str) -> Decision:
    s_hat = np.asarray(s_hat, dtype=float)
    return Decision(s_hat, instance.ml_objective(s_hat), method)


def simple_rounding(point: SdrPoint, instance: Instance, method: str = "simple") -> Decision:
    return _decide(instance, dec(point.s_vec, instance.q), method)


def va_rounding_i(b_vec, instance: Instance) -> Decision:
    """Round every bit to its sign (0 -> +1), then recombine."""
    n, q = instance.n, instance.q
    b_vec = np.asarray(b_vec, dtype=float)
    if b_vec.shape != (q * n,):
        raise ValueError(f"expected {q * n} bit variables")
    bits = np.where(b_vec >= 0, 1.0, -1.0)
    return _decide(instance, va_weight_matrix(n, q) @ bits, "va1")


def va_rounding_ii(b_vec, instance: Instance) -> Decision:
    """Recombine the relaxed bits first, then take the nearest level."""
    n, q = instance.n, instance.q
    b_vec = np.asarray(b_vec, dtype=float)
    if b_vec.shape != (q * n,):
        raise ValueError(f"expected {q * n} bit variables")
    return _decide(instance, dec(va_weight_matrix(n, q) @ b_vec, q), "va")


def gaussian_randomized_rounding(point: SdrPoint, instance: Instance, count: int = 100, seed=None,
                                 tol: float = 1e-6, method: str = "rand") -> Decision:
    """Best of dec(s) and ``count`` rounded draws from N(s, S - ss')."""
    q = instance.q
    s = point.s_vec
    cov = point.s_mat - np.outer(s, s)
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    if w[0] < -tol * (1 + abs(np.trace(point.s_mat))):
        raise ValueError(f"covariance has eigenvalue {w[0]:.3e}")
    root = v * np.sqrt(np.clip(w, 0.0, None))
    cands = [dec(s, q)]
    if count > 0:
        g = np.random.default_rng(seed).standard_normal((count, s.size))
        cands.extend(dec(s[None, :] + g @ root.T, q))
    cands = np.asarray(cands)
    res = instance.y[None, :] - cands @ instance.h.T
    k = int(np.argmin(np.einsum("ij,ij->i", res, res)))
    return _decide(instance, cands[k], method)


def _check_rank(h):
    if np.linalg.matrix_rank(h) < h.shape[1]:
        raise RankDeficient("channel matrix must have full column rank")


def zf_detect(instance: Instance) -> Decision:
    _check_rank(instance.h)
    x = np.linalg.lstsq(instance.h, instance.y, rcond=None)[0]
    return _decide(instance, dec(x, instance.q), "zf")


def ml_exhaustive(instance: Instance, cap: int = ML_CAP, chunk: int = 1 << 14) -> Decision:
    """Brute-force ML; ties go to the lexicographically first candidate."""
    n, q = instance.n, instance.q
    lv = levels(q)
    total = lv.size ** n
    if total > cap:
        raise EnumerationTooLarge(f"{total} candidates exceed the cap of {cap}")
    if total <= chunk:
        cands = enumerate_symbols(n, q)
        res = instance.y[None, :] - cands @ instance.h.T
        k = int(np.argmin(np.einsum("ij,ij->i", res, res)))
        return _decide(instance, cands[k], "ml")
    powers = lv.size ** np.arange(n - 1, -1, -1)
    best_val, best_s = np.inf, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        cands = lv[(idx[:, None] // powers[None, :]) % lv.size]
        res = instance.y[None, :] - cands @ instance.h.T
        vals = np.einsum("ij,ij->i", res, res)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_s = vals[k], cands[k]
    return _decide(instance, best_s, "ml")


def sphere_decode(instance: Instance, radius2: float | None = None) -> Decision:
    """Exact ML by depth-first Schnorr-Euchner search over the QR-reduced lattice.

    The default squared radius is the ZF decision's objective inflated by
    1e-9, so the search always has at least one leaf.
    """
    h, y, q = instance.h, instance.y, instance.q
    _check_rank(h)
    n = h.shape[1]
    qm, r = np.linalg.qr(h)
    z = qm.T @ y
    outside = max(float(y @ y - z @ z), 0.0)
    if radius2 is None:
        radius2 = zf_detect(instance).objective * (1 + 1e-9) + 1e-12
    lv = levels(q)
    best = [radius2 - outside, None]
    s = np.zeros(n)

    def search(k, dist):
        c = (z[k] - r[k, k + 1:] @ s[k + 1:]) / r[k, k]
        # nearest-first order; stable sort keeps the ascending level order on ties
        for lvl in lv[np.argsort(np.abs(lv - c), kind="stable")]:
            d = dist + (r[k, k] * (c - lvl)) ** 2
            if d >= best[0]:
                break
            s[k] = lvl
            if k == 0:
                best[0], best[1] = d, s.copy()
            else:
                search(k - 1, d)

    search(n - 1, 0.0)
    if best[1] is None:
        # radius too small for any lattice point: fall back to ZF
        return zf_detect(instance)
    return _decide(instance, best[1], "sd")


def symbol_error_count(s_hat, s_true) -> tuple[int, int]:
    """(complex symbol errors, vector error flag) for stacked [real; imag] vectors."""
    s_hat, s_true = np.asarray(s_hat), np.asarray(s_true)
    if s_hat.shape != s_true.shape or s_hat.size % 2:
        raise ValueError("need equal, even-length vectors")
    half = s_hat.size // 2
    wrong = s_hat != s_true
    per_symbol = wrong[:half] | wrong[half:]
    errs = int(per_symbol.sum())
    return errs, int(errs > 0)
