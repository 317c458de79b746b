"""End-to-end distributed tasks: smoothing, Tikhonov denoising, label
propagation, and wavelet-sparse denoising by iterative soft thresholding."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .chebyshev import multiplier_heat, multiplier_tikhonov, sgwt_kernels
from .distsim import RoundTrace, run_adjoint, run_forward
from .graph import (
    WeightedGraph,
    laplacian,
    lambda_max_bound,
    sample_connected_geometric_graph,
    spectrum,
)
from .operators import ChebOperator, apply_exact, operator_norm_bound

DEFAULT_ORDER = 20
DEFAULT_STEP_FRACTION = 1.9


def heat_operator(g: WeightedGraph, t: float, order: int = DEFAULT_ORDER) -> ChebOperator:
    return ChebOperator.for_graph(g, [multiplier_heat(t)], order)


def tikhonov_operator(g: WeightedGraph, tau: float, r: int = 1, order: int = DEFAULT_ORDER) -> ChebOperator:
    return ChebOperator.for_graph(g, [multiplier_tikhonov(tau, r)], order)


def wavelet_operator(g: WeightedGraph, num_scales: int, order: int = DEFAULT_ORDER) -> ChebOperator:
    """Low-pass plus ``num_scales`` wavelet kernels, sized to the degree bound."""
    return ChebOperator.for_graph(g, sgwt_kernels(num_scales, lambda_max_bound(g)), order)


def smooth_heat(
    g: WeightedGraph, y, t: float = 1.0, order: int = DEFAULT_ORDER,
    ledger: str = "counts", return_trace: bool = False,
):
    """Distributed heat-kernel smoothing ``exp(-t L) y``."""
    out, trace = run_forward(g, heat_operator(g, t, order), y, ledger=ledger)
    return (out, trace) if return_trace else out


def denoise_tikhonov(
    g: WeightedGraph, y, tau: float = 1.0, r: int = 1, order: int = DEFAULT_ORDER,
    ledger: str = "counts", return_trace: bool = False,
):
    """Distributed minimizer of ``tau/2 ||f - y||^2 + f^T L^r f``.

    Applies the multiplier ``tau / (tau + 2 lambda^r)`` through its order-``order``
    Chebyshev approximation.
    """
    out, trace = run_forward(g, tikhonov_operator(g, tau, r, order), y, ledger=ledger)
    return (out, trace) if return_trace else out


def denoise_tikhonov_exact(g: WeightedGraph, y, tau: float = 1.0, r: int = 1) -> np.ndarray:
    """Exact Tikhonov denoiser via the dense eigendecomposition (oracle)."""
    return apply_exact([multiplier_tikhonov(tau, r)], spectrum(laplacian(g)), y)


def classify_semisupervised(
    g: WeightedGraph, labels, tau: float = 1.0, r: int = 1, order: int = DEFAULT_ORDER,
) -> np.ndarray:
    """Binary labels from a partially labeled signal.

    ``labels`` holds +1/-1 for known nodes and 0 for unknown ones. Each node
    takes +1 where its filtered score is ``>= 0`` and -1 otherwise.
    """
    y = np.asarray(labels, dtype=np.float64)
    if not np.all(np.isin(y, (-1.0, 0.0, 1.0))):
        raise ValueError("labels must be -1, 0 (unknown) or +1")
    if not np.any(y):
        raise ValueError("at least one node must carry a label")
    return labels_from_scores(denoise_tikhonov(g, y, tau, r, order))


def labels_from_scores(scores) -> np.ndarray:
    """+1 where the score is nonnegative, -1 elsewhere (ties go to +1)."""
    return np.where(np.asarray(scores) >= 0, 1, -1)


def soft_threshold(z, threshold):
    """Shrinkage: 0 where ``|z| <= threshold``, else ``z - sign(z) threshold``."""
    thr = np.asarray(threshold, dtype=np.float64)
    if np.any(thr < 0):
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=np.float64)
    out = np.where(np.abs(z) <= thr, 0.0, z - np.sign(z) * thr)
    return float(out) if out.ndim == 0 else out


@dataclass
class IstaState:
    coeffs: np.ndarray
    step: float
    mu: np.ndarray
    objective: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    trace: RoundTrace | None = None
    operator: ChebOperator | None = None


def wavelet_denoise_ista(
    g: WeightedGraph,
    y,
    num_scales: int = 4,
    order: int = DEFAULT_ORDER,
    mu=1.0,
    max_iters: int = 500,
    tol: float = 1e-6,
    step: float | None = None,
    ledger: str = "counts",
) -> tuple[np.ndarray, IstaState]:
    """Weighted-lasso denoising in the approximate wavelet domain, fully distributed.

    Solves ``argmin_a 1/2 ||y - W~* a||^2 + sum_i mu_i |a_i|`` by iterative soft
    thresholding from ``a = 0``. ``W~ y`` is computed once; each iteration runs
    the distributed adjoint followed by the distributed forward transform to
    get ``W~ W~* a``. Stops after ``max_iters`` or when the relative change of
    the iterate drops below ``tol``. Returns ``W~* a`` and the final state;
    ``state.objective[i]`` is the lasso objective at the ``i``-th iterate.
    """
    y = np.asarray(y, dtype=np.float64)
    op = wavelet_operator(g, num_scales, order)
    size = op.eta * g.num_vertices
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (size,)).copy()
    if np.any(mu < 0):
        raise ValueError("mu must be nonnegative")
    norm2 = operator_norm_bound(op)
    if step is None:
        step = DEFAULT_STEP_FRACTION / norm2
    if not 0 < step < 2.0 / norm2:
        raise ValueError(f"step {step} violates 0 < step < 2/||W||^2 = {2.0 / norm2}")

    trace = RoundTrace(mode=ledger)
    wy, tr = run_forward(g, op, y, ledger=ledger)
    trace.extend(tr)
    state = IstaState(coeffs=np.zeros(size), step=step, mu=mu, trace=trace, operator=op)

    def record(synth, a):
        val = 0.5 * float(np.sum((y - synth) ** 2)) + float(np.sum(mu * np.abs(a)))
        if not math.isfinite(val):
            raise FloatingPointError(f"non-finite objective at iteration {state.iterations}")
        state.objective.append(val)

    a = state.coeffs
    for _ in range(max_iters):
        synth, tr = run_adjoint(g, op, a, ledger=ledger)
        trace.extend(tr)
        record(synth, a)
        wwa, tr = run_forward(g, op, synth, ledger=ledger)
        trace.extend(tr)
        new = soft_threshold(a + step * (wy - wwa), mu * step)
        scale = max(np.linalg.norm(a), np.linalg.norm(new))
        change = np.linalg.norm(new - a) / scale if scale > 0 else 0.0
        a = new
        state.iterations += 1
        if change < tol:
            state.converged = True
            break

    out, tr = run_adjoint(g, op, a, ledger=ledger)
    trace.extend(tr)
    state.coeffs = a
    record(out, a)
    return out, state


def paraboloid_signal(positions) -> np.ndarray:
    """Smooth test signal ``x^2 + y^2 - 1`` at each sensor position."""
    p = np.asarray(positions, dtype=np.float64)
    return p[:, 0] ** 2 + p[:, 1] ** 2 - 1.0


@dataclass
class DenoiseConfig:
    n: int = 500
    sigma: float = 0.074
    kappa: float = 0.6
    noise_std: float = 0.5
    tau: float = 1.0
    r: int = 1
    order: int = DEFAULT_ORDER
    trials: int = 100
    seed: int = 0
    max_tries: int = 1000
    threshold: str = "weight"
    prng: str = "PCG64"
    workers: int = 1

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not hasattr(np.random, self.prng):
            raise ValueError(f"unknown bit generator {self.prng!r}")

    def trial_seeds(self) -> list[int]:
        ss = np.random.SeedSequence(self.seed)
        return [int(s) for s in ss.generate_state(self.trials, dtype=np.uint64)]


@dataclass
class TrialResult:
    trial: int
    seed: int
    mse_noisy: float
    mse_denoised: float
    num_edges: int
    resamples: int
    messages: int


@dataclass
class DenoiseReport:
    config: DenoiseConfig
    results: list[TrialResult]

    @property
    def trials(self) -> int:
        return len(self.results)

    @property
    def seeds(self) -> list[int]:
        return [t.seed for t in self.results]

    @property
    def mse_noisy(self) -> float:
        return float(np.mean([t.mse_noisy for t in self.results]))

    @property
    def mse_denoised(self) -> float:
        return float(np.mean([t.mse_denoised for t in self.results]))

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "trials": self.trials,
            "mse_noisy": self.mse_noisy,
            "mse_denoised": self.mse_denoised,
            "std_mse_denoised": float(np.std([t.mse_denoised for t in self.results])),
            "seeds": self.seeds,
            "per_trial": [asdict(t) for t in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "seed", "mse_noisy", "mse_denoised"])
        for t in self.results:
            w.writerow([t.trial, t.seed, repr(t.mse_noisy), repr(t.mse_denoised)])
        return buf.getvalue()


def run_denoising_trial(config: DenoiseConfig, trial: int, seed: int) -> TrialResult:
    bitgen = getattr(np.random, config.prng)(seed)
    rng = np.random.Generator(bitgen)
    g, rejected = sample_connected_geometric_graph(
        config.n, config.sigma, config.kappa, rng, config.max_tries, config.threshold
    )
    f0 = paraboloid_signal(g.positions)
    y = f0 + config.noise_std * rng.standard_normal(config.n)
    fhat, trace = denoise_tikhonov(g, y, config.tau, config.r, config.order, return_trace=True)
    return TrialResult(
        trial=trial,
        seed=seed,
        mse_noisy=float(np.mean((y - f0) ** 2)),
        mse_denoised=float(np.mean((fhat - f0) ** 2)),
        num_edges=g.num_edges,
        resamples=rejected,
        messages=trace.total_messages,
    )


def run_denoising_experiment(config: DenoiseConfig | None = None) -> DenoiseReport:
    """Repeat the random-network Tikhonov denoising experiment.

    Each trial draws its own positions, graph (redrawn while disconnected) and
    noise from an independent seed, so results do not depend on ``workers``.
    """
    config = config or DenoiseConfig()
    config.validate()
    seeds = config.trial_seeds()
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            results = list(ex.map(run_denoising_trial, [config] * len(seeds), range(len(seeds)), seeds))
    else:
        results = [run_denoising_trial(config, i, s) for i, s in enumerate(seeds)]
    return DenoiseReport(config=config, results=results)
