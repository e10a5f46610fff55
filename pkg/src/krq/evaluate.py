"""Relative L2 error against exact/oracle solutions, plus projection grids.

The error statistic is sqrt(sum (pred - u*)^2 / sum u*^2) over i.i.d. uniform
evaluation points on the domain.  Heat instances use the closed-form
solution; Black-Scholes instances use a simulation oracle whose values are
cached to disk, since the oracle dominates runtime.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lds, nn, problems
from .hashing import hash_to_int

DEFAULT_ORACLE_LOG2 = 18
_ORACLE_REPLICATES = 8


class DegenerateSolutionError(RuntimeError):
    """The exact solution is identically zero on the sample; ratio undefined."""


@dataclass
class EvalReport:
    rel_l2: float
    m: int
    seed: int
    oracle_std_error: float | None = None
    grid: np.ndarray | None = None


def cache_dir() -> Path:
    return Path(os.environ.get("KRQ_CACHE_DIR", "~/.cache/krq")).expanduser()


def _eval_points(problem: problems.ProblemSpec, m: int, seed: int) -> np.ndarray:
    spec = lds.SamplerSpec("iid", problem.d, seed)
    u = lds.generate(spec, m).values
    return problem.a + (problem.b - problem.a) * u


def _oracle_request_key(problem, x, n, seed) -> str:
    h = hashlib.sha256()
    h.update(json.dumps({
        "problem": problem.name, "d": problem.d, "a": problem.a, "b": problem.b,
        "T": problem.T, "strike": problem.payoff.strike, "rate": problem.payoff.rate,
        "n": n, "seed": seed,
    }, sort_keys=True).encode())
    h.update(np.ascontiguousarray(x).tobytes())
    return h.hexdigest()[:24]


def _geometric_oracle(problem: problems.ProblemSpec, x: np.ndarray, n: int,
                      seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Oracle values u*(T, x_i) for a batch of points, with per-point std errors.

    The terminal state factorizes as S_T = x * G with G independent of x, so
    one factor matrix per scramble replicate serves every evaluation point.
    """
    sigma = np.asarray(problem.sigma, dtype=np.float64)
    mu = np.asarray(problem.mu, dtype=np.float64)
    drift = (mu - 0.5 * np.sum(sigma * sigma, axis=1)) * problem.T
    n_rep = n // _ORACLE_REPLICATES
    disc = math.exp(-problem.payoff.rate * problem.T)
    strike = problem.payoff.strike
    rep_means = np.zeros((_ORACLE_REPLICATES, x.shape[0]))
    chunk = max(1, (1 << 23) // n_rep)
    for r in range(_ORACLE_REPLICATES):
        spec = lds.SamplerSpec("owen", problem.d, hash_to_int(seed, 0xB5, r))
        u = lds.generate(spec, n_rep).values
        z = math.sqrt(problem.T) * lds.inverse_normal_cdf(u)
        G = np.exp(drift + z @ sigma.T)  # (n_rep, d)
        for lo in range(0, x.shape[0], chunk):
            xs = x[lo : lo + chunk]
            low = xs[:, 0:1] * G[None, :, 0]
            for j in range(1, problem.d):
                np.minimum(low, xs[:, j : j + 1] * G[None, :, j], out=low)
            rep_means[r, lo : lo + xs.shape[0]] = (
                disc * np.maximum(0.0, strike - low)
            ).mean(axis=1)
    values = rep_means.mean(axis=0)
    stderr = rep_means.std(axis=0, ddof=1) / math.sqrt(_ORACLE_REPLICATES)
    return values, stderr


def exact_values(problem: problems.ProblemSpec, x: np.ndarray,
                 oracle_n: int = 1 << DEFAULT_ORACLE_LOG2, seed: int = 0,
                 use_cache: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """u*(T, x): closed form for heat, cached simulation oracle for geometric."""
    if problem.case == "constant":
        return problems.heat_exact(problem.T, x), None
    if problem.case != "geometric":
        raise ValueError("no exact/oracle solution for this problem case")
    key = _oracle_request_key(problem, x, oracle_n, seed)
    cache = cache_dir() / f"oracle_{key}.npz"
    if use_cache and cache.exists():
        data = np.load(cache)
        return data["values"], data["stderr"]
    values, stderr = _geometric_oracle(problem, x, oracle_n, seed)
    if use_cache:
        cache.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache.with_suffix(".tmp.npz")
        np.savez(tmp, values=values, stderr=stderr)
        os.replace(tmp, cache)
    return values, stderr


def relative_l2(params: nn.NetworkParams, problem: problems.ProblemSpec,
                m: int, seed: int,
                oracle_n: int = 1 << DEFAULT_ORACLE_LOG2,
                use_cache: bool = True) -> EvalReport:
    """Estimate the relative L2 error on m i.i.d. domain points keyed by seed."""
    if m < 1:
        raise ValueError("m must be >= 1")
    x = _eval_points(problem, m, seed)
    pred, _ = nn.forward(params, x, mode="eval")
    exact, stderr = exact_values(problem, x, oracle_n=oracle_n, seed=seed,
                                 use_cache=use_cache)
    denom = float(np.sum(exact * exact))
    if denom == 0.0:
        raise DegenerateSolutionError("exact solution vanishes on every sample")
    rel = math.sqrt(float(np.sum((pred - exact) ** 2)) / denom)
    return EvalReport(
        rel_l2=rel, m=m, seed=seed,
        oracle_std_error=None if stderr is None else float(stderr.mean()),
    )


def projection_grid(params: nn.NetworkParams, problem: problems.ProblemSpec,
                    fixed: dict, resolution: int = 50,
                    oracle_n: int = 1 << DEFAULT_ORACLE_LOG2, seed: int = 0,
                    use_cache: bool = True) -> EvalReport:
    """Evaluate prediction vs exact on a 2-D uniform grid projection.

    `fixed` assigns values to all but exactly two coordinates; the free pair
    sweeps a resolution x resolution grid over [a, b]^2.  Grid rows are
    (x_free1, x_free2, prediction, exact, rel_err).
    """
    free = [j for j in range(problem.d) if j not in fixed]
    if len(free) != 2:
        raise ValueError(f"need exactly 2 free coordinates, got {len(free)}")
    axis = np.linspace(problem.a, problem.b, resolution)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    x = np.empty((resolution * resolution, problem.d))
    for j, val in fixed.items():
        if not problem.a <= val <= problem.b:
            raise ValueError(f"fixed coordinate {j} outside the domain")
        x[:, j] = val
    x[:, free[0]] = g1.ravel()
    x[:, free[1]] = g2.ravel()
    pred, _ = nn.forward(params, x, mode="eval")
    exact, stderr = exact_values(problem, x, oracle_n=oracle_n, seed=seed,
                                 use_cache=use_cache)
    scale = np.where(np.abs(exact) > 0, np.abs(exact), 1.0)
    rel_err = np.abs(pred - exact) / scale
    grid = np.column_stack([x[:, free[0]], x[:, free[1]], pred, exact, rel_err])
    denom = float(np.sum(exact * exact))
    if denom == 0.0:
        raise DegenerateSolutionError("exact solution vanishes on the grid")
    rel = math.sqrt(float(np.sum((pred - exact) ** 2)) / denom)
    return EvalReport(
        rel_l2=rel, m=resolution * resolution, seed=seed,
        oracle_std_error=None if stderr is None else float(stderr.mean()),
        grid=grid,
    )
