"""The ERM training loop: fresh batch, empirical risk, backprop, AdamW step.

Per iteration a new batch of uniforms is drawn from the configured sampler,
mapped to (x, y) pairs through the problem's label map, and one optimizer
step is taken.  The loop is deterministic given the seed triple, and logs
loss/lr every iteration plus a relative-L2 snapshot on a fixed cadence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import lds, nn, problems
from .hashing import hash_to_int

RQMC_MODES = ("rescramble_each_batch", "sequential_stream")
_METHOD_ALIASES = {"mc": "iid", "rqmc": "owen"}


class SequenceExhaustedError(RuntimeError):
    """Sequential RQMC mode ran past the 2^32 points of one scrambled stream."""


@dataclass(frozen=True)
class Seeds:
    net: int = 0
    data: int = 0
    eval: int = 9001


@dataclass(frozen=True)
class TrainingConfig:
    problem: problems.ProblemSpec
    method: str = "owen"
    batch_log2: int = 10
    iterations: int = 32000
    rqmc_mode: str = "rescramble_each_batch"
    batch_norm: bool = True
    lr: float = 1e-2
    lr_decay_ratio: float = 0.4
    lr_patience: int = 4000
    min_lr: float = 1e-6
    weight_decay: float = 0.01
    eval_every: int = 500
    eval_m_log2: int = 16
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        method = _METHOD_ALIASES.get(self.method, self.method)
        if method != self.method:
            object.__setattr__(self, "method", method)
        if self.method not in lds.METHODS:
            raise ValueError(f"unknown sampling method {self.method!r}")
        if self.rqmc_mode not in RQMC_MODES:
            raise ValueError(f"unknown rqmc_mode {self.rqmc_mode!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @property
    def batch_size(self) -> int:
        return 1 << self.batch_log2


@dataclass
class RunLog:
    """Per-iteration records plus periodic relative-L2 snapshots."""

    iterations: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    lrs: list = field(default_factory=list)
    eval_iterations: list = field(default_factory=list)
    eval_rel_l2: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def log_rows(self):
        return zip(self.iterations, self.losses, self.lrs)

    def eval_rows(self):
        return zip(self.eval_iterations, self.eval_rel_l2)


def make_batch(config: TrainingConfig, iteration: int) -> problems.LabeledBatch:
    """Draw the batch for one iteration, keyed so reruns are bit-identical.

    iid and rescramble modes key a fresh stream/scramble by
    hash(data seed, iteration) over indices 0..n-1; sequential mode keeps one
    scrambled sequence and consumes consecutive index blocks.
    """
    n = config.batch_size
    s = config.problem.input_dim
    if config.method == "iid" or config.rqmc_mode == "rescramble_each_batch":
        seed = hash_to_int(config.seeds.data, iteration)
        spec = lds.SamplerSpec(config.method, s, seed)
        points = lds.generate(spec, n)
    else:
        start = iteration * n
        if start + n > lds.MAX_INDEX:
            raise SequenceExhaustedError(
                f"sequential stream exhausted at iteration {iteration} "
                f"(would need indices up to {start + n})"
            )
        spec = lds.SamplerSpec(config.method, s, config.seeds.data)
        points = lds.generate(spec, n, start_index=start)
    return problems.labels(config.problem, points)


def empirical_risk(params: nn.NetworkParams, batch: problems.LabeledBatch,
                   mode: str = "train") -> float:
    """Mean squared residual of the network over a labeled batch."""
    pred, _ = nn.forward(params, batch.x, mode=mode)
    resid = pred - batch.y
    return float(resid @ resid) / batch.y.shape[0]


def network_spec_for(config: TrainingConfig) -> nn.NetworkSpec:
    return nn.table1_spec(config.problem.d, batch_norm=config.batch_norm,
                          seed=config.seeds.net)


def train(config: TrainingConfig, eval_fn=None, progress=None):
    """Run the full loop; returns (params, RunLog).

    The periodic snapshot is the relative L2 error at the config's eval seed
    (closed form for heat, cached simulation oracle for Black-Scholes);
    pass `eval_fn(params) -> float` to track something else.
    """
    from . import evaluate  # local import; evaluate depends on this module's types

    params = nn.xavier_init(network_spec_for(config))
    hyper = nn.AdamHyper(lr=config.lr, weight_decay=config.weight_decay)
    schedule = nn.PlateauSchedule(
        ratio=config.lr_decay_ratio,
        patience=config.lr_patience,
        min_lr=config.min_lr,
    )
    state = nn.init_optimizer(params, hyper)
    if eval_fn is None:
        def eval_fn(p):
            report = evaluate.relative_l2(
                p, config.problem, m=1 << config.eval_m_log2, seed=config.seeds.eval
            )
            return report.rel_l2

    log = RunLog()
    started = time.time()
    for it in range(config.iterations):
        batch = make_batch(config, it)
        pred, cache = nn.forward(params, batch.x, mode="train")
        resid = pred - batch.y
        loss = float(resid @ resid) / batch.y.shape[0]
        if not np.isfinite(loss):
            raise nn.TrainingDivergedError(
                f"non-finite training loss at iteration {it + 1}"
            )
        grads = nn.backward(params, cache, resid)
        adam_lr_before = state.lr
        nn.adamw_step(params, grads, state, hyper)
        nn.plateau_lr(state, loss, schedule)
        log.iterations.append(it + 1)
        log.losses.append(loss)
        log.lrs.append(adam_lr_before)
        if config.eval_every and (it + 1) % config.eval_every == 0:
            log.eval_iterations.append(it + 1)
            log.eval_rel_l2.append(eval_fn(params))
        if progress:
            progress(it + 1, loss, state.lr)
    if not log.eval_iterations or log.eval_iterations[-1] != config.iterations:
        log.eval_iterations.append(config.iterations)
        log.eval_rel_l2.append(eval_fn(params))
    log.summary = {
        "method": config.method,
        "batch_size": config.batch_size,
        "seed": config.seeds.data,
        "final_rel_l2": log.eval_rel_l2[-1],
        "wall_time_s": time.time() - started,
        "bn_eval_mode": "running_stats",  # snapshots use eval-mode batch norm
    }
    return params, log


def with_seeds(config: TrainingConfig, seed: int) -> TrainingConfig:
    """Derive the paired-run seed triple used by seed sweeps."""
    return replace(config, seeds=Seeds(net=seed, data=seed, eval=config.seeds.eval))
