"""Built-in training configurations.

The four full presets replicate the published training settings (32000
iterations, patience 4000, decay ratio 0.4 for heat and 0.25 for the
Black-Scholes model, width 4 x dim, depth 6, batch norm, AdamW at lr 1e-2
with weight decay 0.01).  The *_desk variants scale the iteration budget to
8000 with the patience scaled proportionally, and evaluate on 2^14 points,
sized for acceptance runs.
"""

from __future__ import annotations

from . import problems
from .train import Seeds, TrainingConfig

_FULL = dict(iterations=32000, lr_patience=4000, eval_m_log2=16)
_DESK = dict(iterations=8000, lr_patience=1000, eval_m_log2=14)


def _heat(d, scale):
    return TrainingConfig(
        problem=problems.heat_problem(d),
        method="owen",
        batch_log2=10,
        lr_decay_ratio=0.4,
        **scale,
    )


def _bs(d, scale):
    return TrainingConfig(
        problem=problems.bs_problem(d),
        method="owen",
        batch_log2=12,
        lr_decay_ratio=0.25,
        **scale,
    )


def preset(name: str) -> TrainingConfig:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(_PRESETS))}"
        ) from None


def preset_names():
    return sorted(_PRESETS)


_PRESETS = {
    "heat_d5": lambda: _heat(5, _FULL),
    "heat_d20": lambda: _heat(20, _FULL),
    "bs_d5": lambda: _bs(5, _FULL),
    "bs_d20": lambda: _bs(20, _FULL),
    "heat_d5_desk": lambda: _heat(5, _DESK),
    "heat_d20_desk": lambda: _heat(20, _DESK),
    "bs_d5_desk": lambda: _bs(5, _DESK),
    "bs_d20_desk": lambda: _bs(20, _DESK),
}


def config_to_json(config: TrainingConfig) -> dict:
    problem = config.problem
    if problem.name in ("heat_d5", "heat_d20", "bs_d5", "bs_d20") or (
        problem.name.startswith(("heat_d", "bs_d"))
        and problem.name.rpartition("_d")[2].isdigit()
    ):
        prob_obj = {"name": problem.name}
    else:
        raise ValueError("only built-in problems serialize to preset JSON")
    return {
        "problem": prob_obj,
        "method": config.method,
        "batch_log2": config.batch_log2,
        "iterations": config.iterations,
        "rqmc_mode": config.rqmc_mode,
        "batch_norm": config.batch_norm,
        "lr": config.lr,
        "lr_decay_ratio": config.lr_decay_ratio,
        "lr_patience": config.lr_patience,
        "min_lr": config.min_lr,
        "weight_decay": config.weight_decay,
        "eval_every": config.eval_every,
        "eval_m_log2": config.eval_m_log2,
        "seeds": {
            "net": config.seeds.net,
            "data": config.seeds.data,
            "eval": config.seeds.eval,
        },
    }


def config_from_json(obj: dict) -> TrainingConfig:
    prob = obj["problem"]
    if isinstance(prob, str):
        problem = problems.builtin_problem(prob)
    else:
        problem = problems.problem_from_json(prob)
    seeds = obj.get("seeds", {})
    return TrainingConfig(
        problem=problem,
        method=obj.get("method", "owen"),
        batch_log2=int(obj.get("batch_log2", 10)),
        iterations=int(obj.get("iterations", 32000)),
        rqmc_mode=obj.get("rqmc_mode", "rescramble_each_batch"),
        batch_norm=bool(obj.get("batch_norm", True)),
        lr=float(obj.get("lr", 1e-2)),
        lr_decay_ratio=float(obj.get("lr_decay_ratio", 0.4)),
        lr_patience=int(obj.get("lr_patience", 4000)),
        min_lr=float(obj.get("min_lr", 1e-6)),
        weight_decay=float(obj.get("weight_decay", 0.01)),
        eval_every=int(obj.get("eval_every", 500)),
        eval_m_log2=int(obj.get("eval_m_log2", 16)),
        seeds=Seeds(
            net=int(seeds.get("net", 0)),
            data=int(seeds.get("data", 0)),
            eval=int(seeds.get("eval", 9001)),
        ),
    )
