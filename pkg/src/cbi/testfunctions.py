"""Twice continuously differentiable compactly supported test functions.

Generator evaluation needs C^2 functions with compact support and exact
derivatives. The built-in family consists of radial smooth bumps

    f(x) = a * exp( -1 / (1 - |(x - x0)/R|^2) )   for |x - x0| < R,
    f(x) = 0                                       otherwise,

plus (affine polynomial) x bump products; both carry analytic gradients
and Hessians. Evaluations outside the support are valid and return 0, so
jump displacements x + z may leave the support freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Treat 1 - s below this as outside: exp(-1/(1-s)) already underflowed to 0
# there, and the (1-s)^-4 Hessian factors would otherwise overflow.
_EDGE = 1e-8


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A C^2 function R_+^d -> R vanishing outside {|x| <= support_radius},
    bundled with its analytic gradient and Hessian."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    support_radius: float

    __test__ = False  # not a pytest collection target


def bump(center, radius: float, amplitude: float = 1.0) -> TestFunction:
    """Radial smooth bump of the given amplitude on the ball |x - center| < radius."""
    x0 = np.atleast_1d(np.asarray(center, dtype=float))
    R = float(radius)
    if R <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    a = float(amplitude)
    d = len(x0)

    def _s(x: np.ndarray) -> float:
        u = (np.atleast_1d(np.asarray(x, dtype=float)) - x0) / R
        return float(u @ u)

    def value(x) -> float:
        s = _s(x)
        if s >= 1.0 - _EDGE:
            return 0.0
        return a * np.exp(-1.0 / (1.0 - s))

    def gradient(x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = _s(x)
        if s >= 1.0 - _EDGE:
            return np.zeros(d)
        g = a * np.exp(-1.0 / (1.0 - s))
        gp = -g / (1.0 - s) ** 2          # d/ds of a*exp(-1/(1-s))
        return gp * (2.0 / R**2) * (x - x0)

    def hessian(x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = _s(x)
        if s >= 1.0 - _EDGE:
            return np.zeros((d, d))
        g = a * np.exp(-1.0 / (1.0 - s))
        gp = -g / (1.0 - s) ** 2
        gpp = g * (2.0 * s - 1.0) / (1.0 - s) ** 4
        u = (2.0 / R**2) * (x - x0)
        return gpp * np.outer(u, u) + gp * (2.0 / R**2) * np.eye(d)

    return TestFunction(value=value, gradient=gradient, hessian=hessian,
                        support_radius=float(np.linalg.norm(x0)) + R)


def linear_bump(center, radius: float, slope, offset: float = 1.0) -> TestFunction:
    """(offset + <slope, x>) times a bump; still C^2 with compact support."""
    base = bump(center, radius)
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    d = len(slope)

    def value(x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (offset + float(slope @ x)) * base.value(x)

    def gradient(x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = offset + float(slope @ x)
        return slope * base.value(x) + p * base.gradient(x)

    def hessian(x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = offset + float(slope @ x)
        bg = base.gradient(x)
        return np.outer(slope, bg) + np.outer(bg, slope) + p * base.hessian(x)

    return TestFunction(value=value, gradient=gradient, hessian=hessian,
                        support_radius=base.support_radius)


def scaled_argument(f: TestFunction, n: float) -> TestFunction:
    """f_n(x) = f(x / n); gradient scales by 1/n, Hessian by 1/n^2."""
    n = float(n)
    if n <= 0:
        raise ValueError(f"scale must be positive, got {n}")
    return TestFunction(
        value=lambda x: f.value(np.asarray(x, dtype=float) / n),
        gradient=lambda x: f.gradient(np.asarray(x, dtype=float) / n) / n,
        hessian=lambda x: f.hessian(np.asarray(x, dtype=float) / n) / n**2,
        support_radius=n * f.support_radius,
    )
