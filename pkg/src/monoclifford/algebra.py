"""Complexified Clifford algebra Cl(0, n) with dense blade storage.

Blades are addressed by bitmask: bit ``j`` set means ``e_{j+1}`` is a factor,
index 0 is the unit ``e_0 = 1``.  Generators square to ``-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_DIM = 8


def grade(mask: int) -> int:
    return bin(mask).count("1")


def blade_sign(a: int, b: int) -> int:
    """Sign of ``e_A e_B`` relative to the canonical blade ``e_{A xor B}``.

    Counts the transpositions needed to merge the two ordered index lists and
    adds one factor ``-1`` for every generator the blades share.
    """
    swaps = 0
    x = a >> 1
    while x:
        swaps += grade(x & b)
        x >>= 1
    swaps += grade(a & b)
    return -1 if swaps & 1 else 1


@lru_cache(maxsize=None)
def sign_table(dim: int) -> np.ndarray:
    size = 1 << dim
    table = np.empty((size, size), dtype=np.int8)
    for a in range(size):
        for b in range(size):
            table[a, b] = blade_sign(a, b)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def grades(dim: int) -> np.ndarray:
    g = np.array([grade(m) for m in range(1 << dim)])
    g.setflags(write=False)
    return g


@lru_cache(maxsize=None)
def bar_signs(dim: int) -> np.ndarray:
    """Signs ``(-1)^{k(k+1)/2}`` of the main involution, per blade."""
    g = grades(dim)
    s = np.where((g * (g + 1) // 2) % 2 == 0, 1.0, -1.0)
    s.setflags(write=False)
    return s


def vector_blade(j: int) -> int:
    """Bitmask of the generator ``e_j`` (1-based)."""
    return 1 << (j - 1)


def paravector_blades(dim: int) -> tuple[int, ...]:
    return (0,) + tuple(vector_blade(j) for j in range(1, dim + 1))


def left_mult_matrix(dim: int, coeffs: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L @ v.coeffs == (a * v).coeffs`` for ``a`` given by ``coeffs``."""
    signs = sign_table(dim)
    size = 1 << dim
    idx = np.arange(size)
    mat = np.zeros((size, size), dtype=complex)
    for a in np.flatnonzero(coeffs):
        mat[idx ^ a, idx] += signs[a, idx] * coeffs[a]
    return mat


def apply_left_blade(dim: int, blade: int, values: np.ndarray) -> np.ndarray:
    """Left-multiply an array of multivectors (last axis = blades) by ``e_blade``."""
    size = 1 << dim
    idx = np.arange(size)
    signs = sign_table(dim)[blade, idx]
    out = np.empty_like(values)
    out[..., idx ^ blade] = values[..., idx] * signs
    return out


def batch_product(dim: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Geometric product of two stacks of coefficient arrays (broadcast on leading axes)."""
    size = 1 << dim
    signs = sign_table(dim)
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.zeros(shape + (size,), dtype=complex)
    idx = np.arange(size)
    for i in range(size):
        ai = a[..., i : i + 1]
        out[..., i ^ idx] += ai * (signs[i, idx] * b)
    return out


@dataclass(frozen=True, eq=False)
class Multivector:
    """Element ``sum_I c_I e_I`` of the complexified algebra."""

    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {self.dim}")
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        if c.size != 1 << self.dim:
            raise ValueError(f"expected {1 << self.dim} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, dim: int) -> "Multivector":
        return cls(dim, np.zeros(1 << dim))

    @classmethod
    def scalar(cls, dim: int, value: complex) -> "Multivector":
        c = np.zeros(1 << dim, dtype=complex)
        c[0] = value
        return cls(dim, c)

    @classmethod
    def blade(cls, dim: int, mask: int, value: complex = 1.0) -> "Multivector":
        c = np.zeros(1 << dim, dtype=complex)
        c[mask] = value
        return cls(dim, c)

    @classmethod
    def e(cls, dim: int, *indices: int) -> "Multivector":
        """Product ``e_{i1} e_{i2} ...`` of generators (1-based, any order)."""
        out = cls.scalar(dim, 1.0)
        for j in indices:
            out = out * cls.blade(dim, vector_blade(j))
        return out

    @classmethod
    def vector(cls, values: Sequence[complex]) -> "Multivector":
        dim = len(values)
        c = np.zeros(1 << dim, dtype=complex)
        for j, v in enumerate(values, start=1):
            c[vector_blade(j)] = v
        return cls(dim, c)

    def __add__(self, other):
        other = _coerce(other, self.dim)
        _check_dims(self, other)
        return Multivector(self.dim, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other, self.dim)
        _check_dims(self, other)
        return Multivector(self.dim, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        return _coerce(other, self.dim) - self

    def __neg__(self):
        return Multivector(self.dim, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        return Multivector(self.dim, self.coeffs * other)

    def __rmul__(self, other):
        return Multivector(self.dim, other * self.coeffs)

    def __truediv__(self, other):
        return Multivector(self.dim, self.coeffs / other)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other = _coerce(other, self.dim)
        return self.dim == other.dim and np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol)

    def grade_part(self, k: int) -> "Multivector":
        return Multivector(self.dim, np.where(grades(self.dim) == k, self.coeffs, 0))

    def __repr__(self):
        terms = []
        for mask in np.flatnonzero(self.coeffs):
            label = "1" if mask == 0 else "e" + "".join(
                str(j + 1) for j in range(self.dim) if mask >> j & 1
            )
            terms.append(f"{self.coeffs[mask]:.6g}*{label}")
        return f"Multivector(dim={self.dim}, " + (" + ".join(terms) or "0") + ")"


def _coerce(x, dim: int) -> Multivector:
    if isinstance(x, Multivector):
        return x
    return Multivector.scalar(dim, x)


def _check_dims(a: Multivector, b: Multivector) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    _check_dims(a, b)
    return Multivector(a.dim, batch_product(a.dim, a.coeffs, b.coeffs))


def main_involution(a: Multivector) -> Multivector:
    """``bar(a) = sum_I a_I bar(e_I)``, an anti-automorphism."""
    return Multivector(a.dim, a.coeffs * bar_signs(a.dim))


def tilde_involution(c: Multivector) -> Multivector:
    return Multivector(c.dim, np.conj(c.coeffs) * bar_signs(c.dim))


def scalar_part_P(c: Multivector) -> Multivector:
    return Multivector.scalar(c.dim, c.coeffs[0])


def complement_Q(c: Multivector) -> Multivector:
    out = c.coeffs.copy()
    out[0] = 0
    return Multivector(c.dim, out)


def re_part(c: Multivector) -> float:
    return float(c.coeffs[0].real)


def scalar_product(u: Multivector, v: Multivector) -> float:
    """Real scalar product ``[u, v] = Re(tilde(u) v)``."""
    _check_dims(u, v)
    # tilde(e_I) e_I = 1 for every blade, so only matching blades contribute
    return float(np.sum((np.conj(u.coeffs) * v.coeffs).real))


def norm(c: Multivector) -> float:
    return float(np.sqrt(np.sum(np.abs(c.coeffs) ** 2)))


@dataclass(frozen=True)
class Paravector:
    """Real paravector ``a0 + sum_j a_j e_j``."""

    a0: float
    aj: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "aj", tuple(float(x) for x in self.aj))
        if not all(np.isfinite([self.a0, *self.aj])):
            raise ValueError("paravector components must be finite")

    @property
    def dim(self) -> int:
        return len(self.aj)

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.aj)

    @classmethod
    def zero(cls, dim: int) -> "Paravector":
        return cls(0.0, (0.0,) * dim)

    def is_zero(self) -> bool:
        return self.a0 == 0 and not any(self.aj)

    def to_multivector(self) -> Multivector:
        c = np.zeros(1 << self.dim, dtype=complex)
        c[0] = self.a0
        for j, v in enumerate(self.aj, start=1):
            c[vector_blade(j)] = v
        return Multivector(self.dim, c)

    @classmethod
    def from_multivector(cls, m: Multivector, atol: float = 0.0) -> "Paravector":
        c = m.coeffs
        if np.any(np.abs(c.imag) > atol):
            raise ValueError("not a paravector: imaginary coefficients present")
        if np.any(np.abs(c[grades(m.dim) >= 2]) > atol):
            raise ValueError("not a paravector: components of grade >= 2 present")
        return cls(c[0].real, tuple(c[vector_blade(j)].real for j in range(1, m.dim + 1)))
