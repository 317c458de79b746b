"""Centralized unions of graph Fourier multipliers, exact and Chebyshev-approximate.

Stacked outputs are flat vectors of length ``eta * N`` in block (j-major)
order: block ``j`` holds the response to multiplier ``j`` at indices
``j*N .. (j+1)*N - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .chebyshev import (
    ChebExpansion,
    Multiplier,
    cheb_coeffs,
    eval_expansion,
    product_coeffs,
    series_weights,
)
from .graph import Laplacian, Spectrum, WeightedGraph, gft, lambda_max_bound


@dataclass(frozen=True)
class MultiplierUnion:
    multipliers: tuple[Multiplier, ...]

    def __init__(self, multipliers: Sequence[Multiplier]):
        ms = tuple(multipliers)
        if not ms:
            raise ValueError("a union needs at least one multiplier")
        object.__setattr__(self, "multipliers", ms)

    @property
    def eta(self) -> int:
        return len(self.multipliers)


@dataclass(frozen=True, eq=False)
class ChebOperator:
    """Truncated Chebyshev approximations of every multiplier in a union."""

    expansions: tuple[ChebExpansion, ...]

    def __init__(self, expansions: Sequence[ChebExpansion]):
        exps = tuple(expansions)
        if not exps:
            raise ValueError("ChebOperator needs at least one expansion")
        if any(e.alpha != exps[0].alpha for e in exps):
            raise ValueError("all expansions must share alpha")
        if any(e.order != exps[0].order for e in exps):
            raise ValueError("all expansions must share the order M")
        object.__setattr__(self, "expansions", exps)

    @classmethod
    def from_multipliers(
        cls,
        multipliers: Sequence[Multiplier] | MultiplierUnion,
        order: int,
        lambda_max: float,
        quad_points: int | None = None,
    ) -> "ChebOperator":
        if isinstance(multipliers, MultiplierUnion):
            multipliers = multipliers.multipliers
        return cls([cheb_coeffs(g, order, lambda_max, quad_points) for g in multipliers])

    @classmethod
    def for_graph(
        cls,
        g: WeightedGraph,
        multipliers: Sequence[Multiplier] | MultiplierUnion,
        order: int,
        quad_points: int | None = None,
    ) -> "ChebOperator":
        """Operator whose half-width comes from the edge-degree upper bound."""
        return cls.from_multipliers(multipliers, order, lambda_max_bound(g), quad_points)

    @property
    def alpha(self) -> float:
        return self.expansions[0].alpha

    @property
    def order(self) -> int:
        return self.expansions[0].order

    @property
    def eta(self) -> int:
        return len(self.expansions)

    @cached_property
    def coeffs(self) -> np.ndarray:
        """``(eta, M+1)`` coefficient matrix."""
        c = np.stack([e.coeffs for e in self.expansions])
        c.setflags(write=False)
        return c

    def to_dict(self) -> dict:
        return {"expansions": [e.to_dict() for e in self.expansions]}

    @classmethod
    def from_dict(cls, data: dict) -> "ChebOperator":
        return cls([ChebExpansion.from_dict(d) for d in data["expansions"]])


def split_blocks(a, eta: int) -> np.ndarray:
    """View a stacked ``eta * N`` vector as an ``(eta, N)`` array."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or len(a) % eta:
        raise ValueError(f"stacked length {a.shape} is not a multiple of eta={eta}")
    return a.reshape(eta, -1)


def apply_exact(union: MultiplierUnion | Sequence[Multiplier], s: Spectrum, f) -> np.ndarray:
    """Exact union response through the full eigendecomposition (oracle)."""
    if not isinstance(union, MultiplierUnion):
        union = MultiplierUnion(union)
    fhat = gft(s, f)
    blocks = [s.eigenvectors @ (np.asarray(g(s.eigenvalues)) * fhat) for g in union.multipliers]
    return np.concatenate(blocks)


def cheb_recurrence_apply(lap: Laplacian, alpha: float, f, order: int) -> np.ndarray:
    """Stack ``[T_0(L) f, ..., T_M(L) f]`` computed by the three-term recurrence.

    ``f`` may be a single signal of shape ``(N,)`` or several signals as the
    columns of an ``(N, w)`` array; the result has shape ``(M+1,) + f.shape``.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != lap.n:
        raise ValueError(f"signal length {f.shape[0]} does not match N={lap.n}")
    mat = lap.matrix
    out = np.empty((order + 1,) + f.shape)
    out[0] = f
    if order >= 1:
        out[1] = (mat @ f - alpha * f) / alpha
    for k in range(2, order + 1):
        prev = out[k - 1]
        out[k] = (2.0 / alpha) * (mat @ prev - alpha * prev) - out[k - 2]
    return out


def apply_cheb(op: ChebOperator, lap: Laplacian, f) -> np.ndarray:
    """Approximate union response; one recurrence pass serves every multiplier."""
    t = cheb_recurrence_apply(lap, op.alpha, f, op.order)
    return (series_weights(op.coeffs) @ t).ravel()


def apply_cheb_adjoint(op: ChebOperator, lap: Laplacian, a) -> np.ndarray:
    """Adjoint applied to stacked coefficients: sum over blocks of each block's filter."""
    blocks = split_blocks(a, op.eta)
    if blocks.shape[1] != lap.n:
        raise ValueError(f"stacked length {len(a)} != eta * N = {op.eta * lap.n}")
    w = series_weights(op.coeffs)
    out = np.zeros(lap.n)
    for j in range(op.eta):
        t = cheb_recurrence_apply(lap, op.alpha, blocks[j], op.order)
        out += w[j] @ t
    return out


def gram_expansion(op: ChebOperator) -> ChebExpansion:
    """Order-2M expansion of ``sum_j g~_j(x)^2``, the symbol of the Gram operator."""
    total = product_coeffs(op.expansions[0], op.expansions[0])
    for e in op.expansions[1:]:
        total = total + product_coeffs(e, e)
    return total


def apply_cheb_gram(op: ChebOperator, lap: Laplacian, f) -> np.ndarray:
    d = gram_expansion(op)
    t = cheb_recurrence_apply(lap, d.alpha, f, d.order)
    return series_weights(d.coeffs) @ t


def operator_norm_bound(op: ChebOperator, num_points: int = 4097) -> float:
    """Upper bound on the squared operator norm, ``sup_x sum_j g~_j(x)^2`` on ``[0, 2 alpha]``.

    A dense grid scan, refined by a bounded local maximization around the best
    grid points so off-grid peaks between samples are not missed.
    """
    d = gram_expansion(op)
    lo, hi = 0.0, 2.0 * op.alpha
    x = np.linspace(lo, hi, num_points)
    vals = eval_expansion(d, x)
    best = float(np.max(vals))
    h = x[1] - x[0]
    for i in np.argsort(vals)[-5:]:
        a, b = max(lo, x[i] - h), min(hi, x[i] + h)
        res = minimize_scalar(
            lambda z: -eval_expansion(d, z), bounds=(a, b), method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best
