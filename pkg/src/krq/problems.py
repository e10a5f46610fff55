"""PDE problem instances and the label maps that turn uniforms into data.

Each problem couples a domain [a,b]^d, a horizon T, a drift/diffusion case
(constant, geometric, or affine with Euler stepping) and a payoff.  The label
map F sends a uniform point in (0,1)^(d+D) to a training pair (x, y), where
x lives on the domain and y is the payoff of a simulated terminal SDE state.
Closed-form and simulation oracles for the two built-in instances live here
as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lds
from .hashing import hash_to_int

CASES = ("constant", "geometric", "affine_euler")


@dataclass(frozen=True)
class Payoff:
    """Payoff kind plus the rainbow-put constants (unused for paraboloid)."""

    kind: str  # "paraboloid" | "rainbow_put"
    strike: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("paraboloid", "rainbow_put"):
            raise ValueError(f"unknown payoff {self.kind!r}")


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset, the building block of case (iii) coefficients."""

    matrix: np.ndarray
    offset: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T + self.offset


@dataclass(frozen=True)
class ProblemSpec:
    """One linear Kolmogorov PDE instance.

    For cases "constant" and "geometric", `mu` is the d-vector of drift
    constants and `sigma` the d x d diffusion matrix.  For "affine_euler",
    `mu` is an AffineMap and `sigma` a tuple of d AffineMaps giving the
    column actions x -> sigma(x)[:, j]; `euler_steps` is the step count M.
    """

    name: str
    d: int
    a: float
    b: float
    T: float
    case: str
    mu: object
    sigma: object
    payoff: Payoff
    euler_steps: int | None = None

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown drift/diffusion case {self.case!r}")
        if not self.a < self.b:
            raise ValueError("need a < b")
        if self.case == "affine_euler" and (self.euler_steps or 0) < 1:
            raise ValueError("affine_euler needs euler_steps >= 1")

    @property
    def label_dim(self) -> int:
        """Dimension D of the Gaussian input block."""
        if self.case == "affine_euler":
            return self.euler_steps * self.d
        return self.d

    @property
    def input_dim(self) -> int:
        """Total uniform dimension d + D consumed per sample."""
        return self.d + self.label_dim


@dataclass(frozen=True)
class LabeledBatch:
    """Training pairs (x, y) plus the uniform points they came from."""

    x: np.ndarray
    y: np.ndarray
    u: lds.PointSet


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

def paraboloid(s: np.ndarray) -> np.ndarray:
    return np.sum(s * s, axis=-1)


def rainbow_put_payoff(s, strike: float, rate: float, T: float):
    """Discounted rainbow European put: exp(-rate*T) * max(0, K - min_i s_i)."""
    s = np.asarray(s, dtype=np.float64)
    low = np.min(s, axis=-1)
    val = math.exp(-rate * T) * np.maximum(0.0, strike - low)
    return float(val) if val.ndim == 0 else val


def apply_payoff(payoff: Payoff, s: np.ndarray, T: float) -> np.ndarray:
    if payoff.kind == "paraboloid":
        return paraboloid(s)
    return rainbow_put_payoff(s, payoff.strike, payoff.rate, T)


# ---------------------------------------------------------------------------
# Label maps F
# ---------------------------------------------------------------------------

def _as_batch(u: np.ndarray, expected: int) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim == 1
    if single:
        u = u[None, :]
    if u.shape[1] != expected:
        raise ValueError(f"expected {expected} uniform coordinates, got {u.shape[1]}")
    return u, single


def _x_block(u: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    return spec.a + (spec.b - spec.a) * u[:, : spec.d]


def map_heat(u, spec: ProblemSpec):
    """Case (i): S_T = mu*T + x + sigma B_T with B_T = sqrt(T) Phi^-1(u_2)."""
    if spec.case != "constant":
        raise ValueError("map_heat requires the constant-coefficient case")
    u, single = _as_batch(u, 2 * spec.d)
    x = _x_block(u, spec)
    z = math.sqrt(spec.T) * lds.inverse_normal_cdf(u[:, spec.d :])
    s = spec.mu * spec.T + x + z @ np.asarray(spec.sigma).T
    y = apply_payoff(spec.payoff, s, spec.T)
    return (x[0], float(y[0])) if single else (x, y)


def map_gbm(u, spec: ProblemSpec):
    """Case (ii): componentwise geometric Brownian terminal state."""
    if spec.case != "geometric":
        raise ValueError("map_gbm requires the geometric case")
    u, single = _as_batch(u, 2 * spec.d)
    x = _x_block(u, spec)
    sigma = np.asarray(spec.sigma, dtype=np.float64)
    mu = np.asarray(spec.mu, dtype=np.float64)
    z = math.sqrt(spec.T) * lds.inverse_normal_cdf(u[:, spec.d :])
    row_sq = np.sum(sigma * sigma, axis=1)
    expo = (mu - 0.5 * row_sq) * spec.T + z @ sigma.T
    s = x * np.exp(expo)
    y = apply_payoff(spec.payoff, s, spec.T)
    return (x[0], float(y[0])) if single else (x, y)


def map_euler(u, spec: ProblemSpec):
    """Case (iii): M steps of the Euler recursion with affine coefficients."""
    if spec.case != "affine_euler":
        raise ValueError("map_euler requires the affine_euler case")
    M = spec.euler_steps
    u, single = _as_batch(u, spec.d + M * spec.d)
    x = _x_block(u, spec)
    dt = spec.T / M
    z = math.sqrt(dt) * lds.inverse_normal_cdf(u[:, spec.d :])
    s = x
    for m in range(M):
        zm = z[:, m * spec.d : (m + 1) * spec.d]
        incr = spec.mu(s) * dt
        for j, col in enumerate(spec.sigma):
            incr = incr + col(s) * zm[:, j : j + 1]
        s = s + incr
    y = apply_payoff(spec.payoff, s, spec.T)
    return (x[0], float(y[0])) if single else (x, y)


_MAPS = {"constant": map_heat, "geometric": map_gbm, "affine_euler": map_euler}


def labels(spec: ProblemSpec, points: lds.PointSet) -> LabeledBatch:
    """Shared x/y construction: every sampler feeds through this one path."""
    x, y = _MAPS[spec.case](points.values, spec)
    return LabeledBatch(x=x, y=y, u=points)


# ---------------------------------------------------------------------------
# Exact / oracle solutions
# ---------------------------------------------------------------------------

def heat_exact(t: float, x) -> np.ndarray | float:
    """Paraboloid heat solution ||x||^2 + 2 d t."""
    x = np.asarray(x, dtype=np.float64)
    val = np.sum(x * x, axis=-1) + 2.0 * x.shape[-1] * t
    return float(val) if val.ndim == 0 else val


def cholesky(Q: np.ndarray) -> np.ndarray:
    """Lower-triangular C with C C^T = Q; raises on non-positive-definite Q."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Q must be square")
    if not np.allclose(Q, Q.T, atol=1e-12):
        raise ValueError("Q must be symmetric")
    try:
        return np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"matrix is not positive definite: {exc}") from exc


def correlation_matrix(d: int) -> np.ndarray:
    """Unit diagonal, all off-diagonal entries 1/2."""
    Q = np.full((d, d), 0.5)
    np.fill_diagonal(Q, 1.0)
    return Q


def bs_sigma(d: int) -> np.ndarray:
    """diag(beta) @ chol(Q) with beta_i = 0.1 + i/(2d), Q the 0.5-correlation."""
    beta = 0.1 + np.arange(1, d + 1) / (2.0 * d)
    return beta[:, None] * cholesky(correlation_matrix(d))


def bs_put_1d(x: float, strike: float, r: float, sigma: float, T: float) -> float:
    """Closed-form Black-Scholes European put (validation oracle)."""
    if x <= 0 or sigma <= 0 or T <= 0:
        raise ValueError("bs_put_1d needs x > 0, sigma > 0, T > 0")
    sqT = sigma * math.sqrt(T)
    d1 = (math.log(x / strike) + (r + 0.5 * sigma * sigma) * T) / sqT
    d2 = d1 - sqT
    Phi = lds.normal_cdf
    return strike * math.exp(-r * T) * Phi(-d2) - x * Phi(-d1)


def bs_oracle(
    x,
    spec: ProblemSpec,
    n: int,
    sampler: lds.SamplerSpec,
    replicates: int = 8,
) -> tuple[float, float]:
    """Feynman-Kac estimate of the solution at a fixed spatial point.

    Simulates n terminal geometric states started at `x` and averages the
    payoff.  The standard error comes from the sample variance for iid
    sampling and from the spread across independent scramblings for net
    methods (n is then split into `replicates` equal power-of-2 blocks).
    """
    if spec.case != "geometric":
        raise ValueError("bs_oracle requires a geometric-case problem")
    x = np.asarray(x, dtype=np.float64)
    sigma = np.asarray(spec.sigma, dtype=np.float64)
    mu = np.asarray(spec.mu, dtype=np.float64)
    row_sq = np.sum(sigma * sigma, axis=1)
    drift = (mu - 0.5 * row_sq) * spec.T

    def payoff_of(unit_block: np.ndarray) -> np.ndarray:
        z = math.sqrt(spec.T) * lds.inverse_normal_cdf(unit_block)
        s = x[None, :] * np.exp(drift + z @ sigma.T)
        return apply_payoff(spec.payoff, s, spec.T)

    if sampler.method == "iid":
        pts = lds.generate(lds.SamplerSpec("iid", spec.d, sampler.seed), n)
        vals = payoff_of(pts.values)
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    else:
        if n % replicates:
            raise ValueError("n must be divisible by the replicate count")
        means = []
        for r in range(replicates):
            sub = lds.SamplerSpec(sampler.method, spec.d, hash_to_int(sampler.seed, r))
            pts = lds.generate(sub, n // replicates)
            means.append(payoff_of(pts.values).mean())
        means = np.asarray(means)
        est = float(means.mean())
        se = float(means.std(ddof=1) / math.sqrt(replicates))
    return est, se


# ---------------------------------------------------------------------------
# Built-in instances and JSON configuration
# ---------------------------------------------------------------------------

def heat_problem(d: int) -> ProblemSpec:
    """Paraboloid heat equation on [0,1]^d, horizon 1, diffusion sqrt(2) I."""
    return ProblemSpec(
        name=f"heat_d{d}",
        d=d,
        a=0.0,
        b=1.0,
        T=1.0,
        case="constant",
        mu=np.zeros(d),
        sigma=math.sqrt(2.0) * np.eye(d),
        payoff=Payoff("paraboloid"),
    )


def bs_problem(d: int) -> ProblemSpec:
    """Rainbow-put Black-Scholes instance on [4.5,5.5]^d with correlated noise."""
    rate = -0.05
    return ProblemSpec(
        name=f"bs_d{d}",
        d=d,
        a=4.5,
        b=5.5,
        T=1.0,
        case="geometric",
        mu=np.full(d, rate),
        sigma=bs_sigma(d),
        payoff=Payoff("rainbow_put", strike=5.5, rate=rate),
    )


def builtin_problem(name: str, d: int | None = None) -> ProblemSpec:
    """Resolve "heat"/"bs" (with explicit d) or "heat_d5"-style names."""
    base = name
    if "_d" in name:
        base, _, dim = name.rpartition("_d")
        if dim.isdigit():
            d = int(dim)
        else:
            base = name
    if d is None:
        d = 5
    if base == "heat":
        return heat_problem(d)
    if base == "bs":
        return bs_problem(d)
    raise KeyError(f"unknown problem {name!r}")


def problem_from_json(obj: dict) -> ProblemSpec:
    """Build a ProblemSpec from the JSON configuration object."""
    name = obj["name"]
    if set(obj) <= {"name", "d"}:
        return builtin_problem(name, obj.get("d"))
    payoff_obj = obj["payoff"]
    payoff = Payoff(
        payoff_obj["kind"],
        strike=float(payoff_obj.get("strike", 0.0)),
        rate=float(payoff_obj.get("rate", 0.0)),
    )
    d = int(obj["d"])
    case = obj["case"]
    if case in ("constant", "geometric"):
        mu = np.asarray(obj.get("mu", np.zeros(d)), dtype=np.float64)
        sigma = np.asarray(obj["sigma"], dtype=np.float64)
        if sigma.shape != (d, d):
            raise ValueError("sigma must be a d x d matrix")
        return ProblemSpec(
            name=name, d=d, a=float(obj["a"]), b=float(obj["b"]), T=float(obj["T"]),
            case=case, mu=mu, sigma=sigma, payoff=payoff,
        )
    mu = AffineMap(
        matrix=np.asarray(obj["mu"]["matrix"], dtype=np.float64),
        offset=np.asarray(obj["mu"]["offset"], dtype=np.float64),
    )
    sigma = tuple(
        AffineMap(
            matrix=np.asarray(col["matrix"], dtype=np.float64),
            offset=np.asarray(col["offset"], dtype=np.float64),
        )
        for col in obj["sigma"]
    )
    return ProblemSpec(
        name=name, d=d, a=float(obj["a"]), b=float(obj["b"]), T=float(obj["T"]),
        case=case, mu=mu, sigma=sigma, payoff=payoff,
        euler_steps=int(obj["M"]),
    )


def geometric_as_euler(spec: ProblemSpec, steps: int) -> ProblemSpec:
    """Recast a geometric-case instance as affine_euler with M steps.

    mu(x) = diag(mu_bar) x and sigma(x) column j = diag(sigma_bar[:, j]) x.
    """
    if spec.case != "geometric":
        raise ValueError("need a geometric-case instance")
    sigma = np.asarray(spec.sigma, dtype=np.float64)
    mu_map = AffineMap(matrix=np.diag(np.asarray(spec.mu)), offset=np.zeros(spec.d))
    cols = tuple(
        AffineMap(matrix=np.diag(sigma[:, j]), offset=np.zeros(spec.d))
        for j in range(spec.d)
    )
    return ProblemSpec(
        name=f"{spec.name}_euler{steps}", d=spec.d, a=spec.a, b=spec.b, T=spec.T,
        case="affine_euler", mu=mu_map, sigma=cols, payoff=spec.payoff,
        euler_steps=steps,
    )


def constant_as_euler(spec: ProblemSpec, steps: int) -> ProblemSpec:
    """Recast a constant-case instance as affine_euler (Euler is exact here)."""
    if spec.case != "constant":
        raise ValueError("need a constant-case instance")
    sigma = np.asarray(spec.sigma, dtype=np.float64)
    zero = np.zeros((spec.d, spec.d))
    mu_map = AffineMap(matrix=zero, offset=np.asarray(spec.mu, dtype=np.float64))
    cols = tuple(
        AffineMap(matrix=zero, offset=sigma[:, j]) for j in range(spec.d)
    )
    return ProblemSpec(
        name=f"{spec.name}_euler{steps}", d=spec.d, a=spec.a, b=spec.b, T=spec.T,
        case="affine_euler", mu=mu_map, sigma=cols, payoff=spec.payoff,
        euler_steps=steps,
    )
