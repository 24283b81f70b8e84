#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
二能级精确线性代数
态矢量、Pauli 代数、Cayley-Klein 幺正矩阵以及 Pauli 指数的闭式表达

约定：基矢 |+> = (1, 0)，|-> = (0, 1)；
幺正矩阵 U = [[A, B], [-B*, A*]]，|A|^2 + |B|^2 = 1。
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from error_handler import ValidationError

UNIMODULAR_TOL = 1e-10


@dataclass(frozen=True)
class StateVector:
    """二分量复波函数"""
    c_plus: complex
    c_minus: complex

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2)

    def normalized(self) -> 'StateVector':
        n = self.norm
        if n == 0.0:
            raise ValidationError("零向量无法归一化", "psi", self)
        return StateVector(self.c_plus / n, self.c_minus / n)

    def to_array(self) -> np.ndarray:
        return np.array([self.c_plus, self.c_minus], dtype=complex)

    @classmethod
    def from_array(cls, values) -> 'StateVector':
        return cls(complex(values[0]), complex(values[1]))

    def overlap(self, other: 'StateVector') -> complex:
        """<self|other>"""
        return self.c_plus.conjugate() * other.c_plus + self.c_minus.conjugate() * other.c_minus


PLUS = StateVector(1.0 + 0j, 0j)
MINUS = StateVector(0j, 1.0 + 0j)


@dataclass(frozen=True)
class Unitary2:
    """Cayley-Klein 形式的 SU(2) 传播子"""
    A: complex
    B: complex

    @classmethod
    def identity(cls) -> 'Unitary2':
        return cls(1.0 + 0j, 0j)

    @property
    def det(self) -> float:
        return abs(self.A) ** 2 + abs(self.B) ** 2

    def is_unimodular(self, tol: float = UNIMODULAR_TOL) -> bool:
        return abs(self.det - 1.0) <= tol

    def inverse(self) -> 'Unitary2':
        return Unitary2(self.A.conjugate(), -self.B)

    def matrix(self) -> np.ndarray:
        return np.array([[self.A, self.B],
                         [-self.B.conjugate(), self.A.conjugate()]], dtype=complex)

    @classmethod
    def from_matrix(cls, m) -> 'Unitary2':
        return cls(complex(m[0][0]), complex(m[0][1]))

    def max_abs_diff(self, other: 'Unitary2') -> float:
        return max(abs(self.A - other.A), abs(self.B - other.B))


@dataclass(frozen=True)
class PauliVector:
    """厄米矩阵 n0*1 + n1*σ1 + n2*σ2 + n3*σ3"""
    n0: float
    n1: float
    n2: float
    n3: float

    @property
    def magnitude(self) -> float:
        """|n|，只计 Pauli 部分"""
        return math.sqrt(self.n1 ** 2 + self.n2 ** 2 + self.n3 ** 2)

    def matrix(self) -> np.ndarray:
        return np.array([[self.n0 + self.n3, self.n1 - 1j * self.n2],
                         [self.n1 + 1j * self.n2, self.n0 - self.n3]], dtype=complex)

    def scaled(self, factor: float) -> 'PauliVector':
        return PauliVector(self.n0 * factor, self.n1 * factor, self.n2 * factor, self.n3 * factor)

    def __add__(self, other: 'PauliVector') -> 'PauliVector':
        return PauliVector(self.n0 + other.n0, self.n1 + other.n1,
                           self.n2 + other.n2, self.n3 + other.n3)


def trace_inner(p: PauliVector, q: PauliVector) -> float:
    """Hilbert-Schmidt 内积 tr(P†Q) = 2(p0 q0 + p·q)"""
    return 2.0 * (p.n0 * q.n0 + p.n1 * q.n1 + p.n2 * q.n2 + p.n3 * q.n3)


def apply(U: Unitary2, psi: StateVector) -> StateVector:
    """矩阵作用于态矢量"""
    return StateVector(
        U.A * psi.c_plus + U.B * psi.c_minus,
        -U.B.conjugate() * psi.c_plus + U.A.conjugate() * psi.c_minus,
    )


def compose(U2: Unitary2, U1: Unitary2) -> Unitary2:
    """矩阵乘积 U2·U1"""
    return Unitary2(
        U2.A * U1.A - U2.B * U1.B.conjugate(),
        U2.A * U1.B + U2.B * U1.A.conjugate(),
    )


def pauli_exp(n: PauliVector) -> Unitary2:
    """exp(-i n·σ) = cos|n|·1 - i sin|n| (n̂·σ)"""
    if n.n0 != 0.0:
        raise ValidationError("pauli_exp 要求 n0 = 0", "n0", n.n0)

    r = n.magnitude
    if r < 1e-6:
        sinc = 1.0 - r * r / 6.0 + r ** 4 / 120.0
    else:
        sinc = math.sin(r) / r
    cos_r = math.cos(r)

    A = complex(cos_r, -sinc * n.n3)
    B = complex(-sinc * n.n2, -sinc * n.n1)
    return Unitary2(A, B)


def sigma_phi(phi: float) -> PauliVector:
    """σ_φ = σ1 cosφ + σ2 sinφ"""
    return PauliVector(0.0, math.cos(phi), math.sin(phi), 0.0)


def kick(phi: float) -> Unitary2:
    """δ 脉冲对应的瞬时幺正 K(φ) = exp(-i(π/2)σ_φ) = -iσ_φ"""
    return pauli_exp(sigma_phi(phi).scaled(math.pi / 2))


def real_eigenbasis(h3, h1) -> Tuple[np.ndarray, np.ndarray]:
    """h3·σ3 + h1·σ1 的实本征矢（基态、激发态），支持数组输入

    返回形状 (2, ...) 的数组；θ = atan2(h1, h3)，
    激发态 (cos θ/2, sin θ/2)，基态 (-sin θ/2, cos θ/2)。
    """
    half = 0.5 * np.arctan2(h1, h3)
    c, s = np.cos(half), np.sin(half)
    ground = np.stack([-s, c])
    excited = np.stack([c, s])
    return ground, excited


if __name__ == '__main__':
    print("=== Pauli 代数模块测试 ===")
    K = kick(0.0)
    print(f"K(0) = {K}")
    U = pauli_exp(PauliVector(0.0, 0.3, -0.2, 0.9))
    print(f"U·U⁻¹ = {compose(U, U.inverse())}, det = {U.det:.15f}")
    print(f"apply(K, |->) = {apply(K, MINUS)}")
