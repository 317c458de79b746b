"""Shifted Chebyshev expansions of spectral multipliers on ``[0, lambda_max]``.

An expansion with coefficients ``c_0 .. c_M`` and half-width ``alpha`` stands
for ``c_0/2 + sum_k c_k T_k((x - alpha) / alpha)``. The halving of ``c_0`` is
applied in exactly one place, :func:`series_weights`; every evaluator (scalar,
centralized, per-node) goes through it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_MIN_QUAD_POINTS = 64


@dataclass(frozen=True)
class Multiplier:
    """A named scalar spectral function ``g: [0, lambda_max] -> R``."""

    func: Callable[[np.ndarray], np.ndarray]
    name: str = "g"

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class ChebExpansion:
    alpha: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.ndim != 1:
            raise ValueError("coeffs must be one-dimensional")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if len(c) < 2:
            raise ValueError("expansion order must be at least 1")
        c.setflags(write=False)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lambda_max(self) -> float:
        return 2.0 * self.alpha

    def __call__(self, x):
        return eval_expansion(self, x)

    def __add__(self, other: "ChebExpansion") -> "ChebExpansion":
        _check_alpha(self, other)
        n = max(len(self.coeffs), len(other.coeffs))
        c = np.zeros(n)
        c[: len(self.coeffs)] += self.coeffs
        c[: len(other.coeffs)] += other.coeffs
        return ChebExpansion(self.alpha, c)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "m": self.order, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ChebExpansion":
        e = cls(data["alpha"], data["coeffs"])
        if "m" in data and int(data["m"]) != e.order:
            raise ValueError(f"order field {data['m']} disagrees with {e.order} coefficients")
        return e

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChebExpansion":
        return cls.from_dict(json.loads(text))


def _check_alpha(a: ChebExpansion, b: ChebExpansion) -> None:
    if a.alpha != b.alpha:
        raise ValueError(f"alpha mismatch: {a.alpha} != {b.alpha}")


def series_weights(coeffs) -> np.ndarray:
    """Weights multiplying ``T_0, T_1, ...``: the coefficients with ``c_0`` halved.

    Accepts a single coefficient vector or a stack of them (last axis = k).
    """
    w = np.array(coeffs, dtype=np.float64)
    w[..., 0] *= 0.5
    return w


def cheb_coeffs(
    g: Callable,
    order: int,
    lambda_max: float,
    quad_points: int | None = None,
) -> ChebExpansion:
    """Chebyshev coefficients of ``g`` on ``[0, lambda_max]`` by Gauss quadrature.

    Uses nodes ``theta_p = pi (p + 1/2) / P`` so that
    ``c_k = (2/P) sum_p cos(k theta_p) g(alpha (cos theta_p + 1))``.
    ``P`` defaults to ``max(order + 1, 64)``.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    if quad_points is None:
        quad_points = max(order + 1, DEFAULT_MIN_QUAD_POINTS)
    if quad_points < order + 1:
        raise ValueError(f"quad_points={quad_points} must be >= order + 1 = {order + 1}")
    alpha = lambda_max / 2.0
    theta = np.pi * (np.arange(quad_points) + 0.5) / quad_points
    vals = np.asarray(g(alpha * (np.cos(theta) + 1.0)), dtype=np.float64)
    vals = np.broadcast_to(vals, theta.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier returned non-finite values on [0, lambda_max]")
    k = np.arange(order + 1)
    coeffs = (2.0 / quad_points) * (np.cos(np.outer(k, theta)) @ vals)
    return ChebExpansion(alpha, coeffs)


def shifted_chebyshev(k_max: int, x, alpha: float) -> np.ndarray:
    """Rows ``T_0(x) .. T_{k_max}(x)`` of the shifted polynomials."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((k_max + 1,) + x.shape)
    out[0] = 1.0
    if k_max >= 1:
        out[1] = (x - alpha) / alpha
    for k in range(2, k_max + 1):
        out[k] = (2.0 / alpha) * (x - alpha) * out[k - 1] - out[k - 2]
    return out


def eval_expansion(e: ChebExpansion, x):
    """Evaluate the truncated series at ``x`` (no clamping to the domain)."""
    t = shifted_chebyshev(e.order, x, e.alpha)
    res = np.tensordot(series_weights(e.coeffs), t, axes=(0, 0))
    return float(res) if np.ndim(res) == 0 else res


def product_coeffs(a: ChebExpansion, b: ChebExpansion) -> ChebExpansion:
    """Expansion of the pointwise product of two truncated series.

    Exact as polynomials, via ``T_i T_j = (T_{i+j} + T_{|i-j|}) / 2``.
    The result has order ``a.order + b.order``.
    """
    _check_alpha(a, b)
    wa = series_weights(a.coeffs)
    wb = series_weights(b.coeffs)
    prod = np.zeros(a.order + b.order + 1)
    for i, x in enumerate(wa):
        for j, y in enumerate(wb):
            h = 0.5 * x * y
            prod[i + j] += h
            prod[abs(i - j)] += h
    prod[0] *= 2.0
    return ChebExpansion(a.alpha, prod)


def multiplier_heat(t: float) -> Multiplier:
    if not t > 0:
        raise ValueError("t must be positive")
    return Multiplier(lambda x: np.exp(-t * x), name=f"heat(t={t:g})")


def multiplier_tikhonov(tau: float, r: int = 1) -> Multiplier:
    """``tau / (tau + 2 x^r)``: the closed-form smoothness-regularized denoiser."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if int(r) != r or r < 1:
        raise ValueError("r must be an integer >= 1")
    r = int(r)
    return Multiplier(lambda x: tau / (tau + 2.0 * x**r), name=f"tikhonov(tau={tau:g},r={r})")


def multiplier_constant(value: float = 1.0) -> Multiplier:
    return Multiplier(lambda x: np.full(np.shape(x), float(value)), name=f"const({value:g})")


def wavelet_scales(num_scales: int, lambda_max: float) -> np.ndarray:
    """Log-spaced scales from ``2`` down to ``2 / lambda_max``."""
    if num_scales < 1:
        raise ValueError("num_scales must be >= 1")
    if num_scales == 1:
        return np.array([2.0])
    return np.geomspace(2.0, 2.0 / lambda_max, num_scales)


def bandpass_kernel(x):
    """``x exp(1 - x)``: zero at the origin, peak 1 at ``x = 1``, decays at infinity."""
    x = np.asarray(x, dtype=np.float64)
    return x * np.exp(1.0 - x)


def sgwt_kernels(num_scales: int, lambda_max: float) -> list[Multiplier]:
    """Low-pass kernel followed by ``num_scales`` band-pass wavelet kernels.

    ``h(x) = exp(-(x / (0.3 lambda_max))^4)`` and ``g_j(x) = g(t_j x)`` with
    ``g = bandpass_kernel`` and ``t_j`` from :func:`wavelet_scales`.
    """
    scales = wavelet_scales(num_scales, lambda_max)
    width = 0.3 * lambda_max
    kernels = [Multiplier(lambda x: np.exp(-((x / width) ** 4)), name="lowpass")]
    for j, t in enumerate(scales, start=1):
        kernels.append(
            Multiplier(lambda x, t=float(t): bandpass_kernel(t * x), name=f"wavelet{j}(t={t:.4g})")
        )
    return kernels


def sup_error(e: ChebExpansion, g: Callable, num_points: int = 4001) -> float:
    """Max ``|e(x) - g(x)|`` over a uniform grid of ``[0, lambda_max]``."""
    x = np.linspace(0.0, e.lambda_max, num_points)
    return float(np.max(np.abs(eval_expansion(e, x) - np.asarray(g(x)))))
