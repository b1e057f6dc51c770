"""Complex and real-valued MIMO models, 4^q-QAM levels, and symbol decisions."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


def levels(q: int) -> np.ndarray:
    """Sorted per-dimension levels {±1, ±3, ..., ±(2^q - 1)}."""
    if q < 1:
        raise ValueError("q must be >= 1")
    pos = np.arange(1, 2 ** q, 2, dtype=float)
    return np.concatenate([-pos[::-1], pos])


@dataclass(frozen=True)
class Constellation:
    q: int

    @cached_property
    def levels(self) -> np.ndarray:
        return levels(self.q)

    @property
    def per_dim_energy(self) -> float:
        return (4 ** self.q - 1) / 3

    @property
    def symbol_energy(self) -> float:
        """E|s|^2 of a complex 4^q-QAM symbol."""
        return 2 * self.per_dim_energy

    @property
    def max_level(self) -> int:
        return 2 ** self.q - 1


@dataclass(frozen=True, eq=False)
class ComplexInstance:
    h_tilde: np.ndarray
    y_tilde: np.ndarray
    s_tilde: np.ndarray
    q: int
    noise_var: float = 0.0

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h_tilde, dtype=complex))
        object.__setattr__(self, "h_tilde", h)
        object.__setattr__(self, "y_tilde", np.asarray(self.y_tilde, dtype=complex).reshape(h.shape[0]))
        object.__setattr__(self, "s_tilde", np.asarray(self.s_tilde, dtype=complex).reshape(h.shape[1]))
        if self.q < 1 or min(h.shape) < 1:
            raise ValueError("need q >= 1 and a nonempty channel")
        lv = set(levels(self.q).tolist())
        parts = np.concatenate([self.s_tilde.real, self.s_tilde.imag])
        if not all(p in lv for p in parts.tolist()):
            raise ValueError(f"symbols must have components in L({self.q})")

    @property
    def m_tilde(self) -> int:
        return self.h_tilde.shape[0]

    @property
    def n_tilde(self) -> int:
        return self.h_tilde.shape[1]


@dataclass(frozen=True, eq=False)
class Instance:
    """Real-valued detection problem y = H s + noise."""

    h: np.ndarray
    y: np.ndarray
    s_true: np.ndarray
    q: int

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(h.shape[0]))
        object.__setattr__(self, "s_true", np.asarray(self.s_true, dtype=float).reshape(h.shape[1]))

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @cached_property
    def gram(self) -> np.ndarray:
        return self.h.T @ self.h

    @cached_property
    def hty(self) -> np.ndarray:
        return self.h.T @ self.y

    @cached_property
    def y_norm2(self) -> float:
        return float(self.y @ self.y)

    def ml_objective(self, s) -> float:
        r = self.y - self.h @ np.asarray(s, dtype=float)
        return float(r @ r)


def complex_to_real(ci: ComplexInstance) -> Instance:
    h = ci.h_tilde
    hr = np.block([[h.real, -h.imag], [h.imag, h.real]])
    y = np.concatenate([ci.y_tilde.real, ci.y_tilde.imag])
    s = np.concatenate([ci.s_tilde.real, ci.s_tilde.imag])
    return Instance(hr, y, s, ci.q)


def noise_variance(q: int, snr_db: float) -> float:
    """Per-complex-entry noise variance for a received SNR per symbol (unit-variance channel)."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return Constellation(q).symbol_energy / 10 ** (snr_db / 10)


def generate_instance(m_tilde: int, n_tilde: int, q: int, snr_db: float, seed) -> ComplexInstance:
    """Draw an i.i.d. Rayleigh channel, uniform 4^q-QAM symbols and AWGN.

    ``seed`` is anything accepted by ``numpy.random.default_rng``; ``snr_db=inf``
    disables the noise.
    """
    if min(m_tilde, n_tilde, q) < 1:
        raise ValueError("m_tilde, n_tilde, q must be >= 1")
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal((m_tilde, n_tilde)) + 1j * rng.standard_normal((m_tilde, n_tilde))) / np.sqrt(2)
    lv = levels(q)
    s = lv[rng.integers(0, lv.size, n_tilde)] + 1j * lv[rng.integers(0, lv.size, n_tilde)]
    sigma2 = noise_variance(q, snr_db)
    v = (rng.standard_normal(m_tilde) + 1j * rng.standard_normal(m_tilde)) * np.sqrt(sigma2 / 2)
    y = h @ s
    if sigma2 > 0:
        y = y + v
    return ComplexInstance(h, y, s, q, sigma2)


def dec(x, q: int) -> np.ndarray:
    """Nearest level in L(q), elementwise; midpoints go to the smaller magnitude."""
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    mag = np.clip(2 * np.ceil(a / 2) - 1, 1, 2 ** q - 1)
    return np.where(x >= 0, mag, -mag)


def va_weight_matrix(n: int, q: int) -> np.ndarray:
    """W = [I, 2I, 4I, ..., 2^(q-1) I] of shape (n, q n)."""
    if n < 1 or q < 1:
        raise ValueError("n and q must be >= 1")
    return np.hstack([2.0 ** j * np.eye(n) for j in range(q)])


def bits_to_symbols(b, n: int, q: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (q * n,):
        raise ValueError(f"expected {q * n} bits, got shape {b.shape}")
    return b.reshape(q, n).T @ (2.0 ** np.arange(q))


def symbols_to_bits(s, q: int) -> np.ndarray:
    """Unique antipodal decomposition s = sum_j 2^j b_j, stacked as [b_1; ...; b_q]."""
    r = np.asarray(s, dtype=float).copy()
    bits = np.empty((q, r.size))
    for j in range(q - 1, -1, -1):
        bj = np.where(r >= 0, 1.0, -1.0)
        bits[j] = bj
        r -= 2.0 ** j * bj
    if np.any(r != 0):
        raise ValueError("input is not in L(q)")
    return bits.ravel()


def enumerate_symbols(n: int, q: int):
    """All vectors of L(q)^n in lexicographic order, as an (|L|^n, n) array."""
    return np.array(list(itertools.product(levels(q), repeat=n)), dtype=float).reshape(-1, n)


# -- instance files ---------------------------------------------------------

def instance_to_dict(ci: ComplexInstance) -> dict:
    return {
        "m_tilde": ci.m_tilde, "n_tilde": ci.n_tilde, "q": ci.q,
        "h_real": ci.h_tilde.real.tolist(), "h_imag": ci.h_tilde.imag.tolist(),
        "y_real": ci.y_tilde.real.tolist(), "y_imag": ci.y_tilde.imag.tolist(),
        "s_real": ci.s_tilde.real.tolist(), "s_imag": ci.s_tilde.imag.tolist(),
        "noise_var": ci.noise_var,
    }


def instance_from_dict(d: dict) -> ComplexInstance:
    mt, nt = int(d["m_tilde"]), int(d["n_tilde"])
    h = np.array(d["h_real"], dtype=float) + 1j * np.array(d["h_imag"], dtype=float)
    if h.shape != (mt, nt):
        raise ValueError(f"channel shape {h.shape} does not match ({mt}, {nt})")
    y = np.array(d["y_real"], dtype=float) + 1j * np.array(d["y_imag"], dtype=float)
    s = np.array(d["s_real"], dtype=float) + 1j * np.array(d["s_imag"], dtype=float)
    if y.shape != (mt,) or s.shape != (nt,):
        raise ValueError("vector lengths do not match m_tilde / n_tilde")
    return ComplexInstance(h, y, s, int(d["q"]), float(d.get("noise_var", 0.0)))


def dump_instance(ci: ComplexInstance) -> str:
    return json.dumps(instance_to_dict(ci), indent=2)


def load_instance(text: str) -> ComplexInstance:
    """Parse an instance file; JSON syntax errors carry line/column info."""
    return instance_from_dict(json.loads(text))
