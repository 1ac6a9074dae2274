"""Continual-training loop with worst-case memory evolution, plus the
fine-tuning and iid-offline reference regimes.

Per incoming batch: sample a replay minibatch, evolve it for T steps (WGF
methods), take one SGD step on the summed replay + incoming loss, then
offer the incoming samples to the reservoir.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .evaluate import accuracy
from .evolution import EvolutionConfig, evolve
from .memory import MemoryBuffer
from .nnet import Batch, Mlp, loss_grads, sgd_step
from .stream import ConfigError, Sample, StreamData

METHODS = ("FineTune", "ER", "ER_WGF_LD", "ER_WGF_SVGD", "ER_WGF_HMC", "IidOffline")
_EVOLVER = {"ER_WGF_LD": "LD", "ER_WGF_SVGD": "SVGD", "ER_WGF_HMC": "HMC"}


@dataclass
class TrainConfig:
    method: str = "ER"
    lr: float = 0.05
    memory_capacity: int = 200
    replay_batch: int | None = None      # None: match the incoming batch size
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    epochs: int = 5                      # IidOffline only
    seed: int = 0
    eval_every: int = 100

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.lr <= 0 or self.memory_capacity < 0 or self.eval_every < 1:
            raise ConfigError("lr must be > 0, memory_capacity >= 0, eval_every >= 1")
        if self.replay_batch is not None and self.replay_batch < 1:
            raise ConfigError("replay_batch must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        self.evolution.validate()


@dataclass
class MetricsRow:
    step: int
    method: str
    seed: int
    task_accs: list[float]
    avg_acc: float
    wall_ms: float


@dataclass
class RunMetrics:
    rows: list[MetricsRow] = field(default_factory=list)

    @property
    def final_avg_acc(self) -> float:
        return self.rows[-1].avg_acc

    @property
    def final_wall_ms(self) -> float:
        return self.rows[-1].wall_ms


def _rngs(seed) -> tuple[np.random.Generator, ...]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return tuple(np.random.default_rng(c) for c in ss.spawn(3))


def _record(metrics, step, cfg, model, stream, seed_label, start):
    task_accs, avg = accuracy(model, stream.test_sets)
    metrics.rows.append(MetricsRow(
        step=step, method=cfg.method, seed=seed_label, task_accs=task_accs,
        avg_acc=avg, wall_ms=(time.perf_counter() - start) * 1e3))


def run_continual(stream: StreamData, model: Mlp, cfg: TrainConfig,
                  on_step=None) -> tuple[Mlp, RunMetrics]:
    """Single pass over the stream; returns the trained model and metrics.

    Latent task ids are never read. A fixed seed gives a bit-identical
    trajectory (wall-time columns aside), and the reduction chain holds:
    WGF with T=0 == ER, ER with capacity 0 == FineTune.
    """
    cfg.validate()
    if cfg.method == "IidOffline":
        raise ConfigError("use run_iid_offline for the IidOffline method")
    if stream.dim != model.in_dim or stream.num_classes > model.out_dim:
        raise ConfigError(
            f"model ({model.in_dim} -> {model.out_dim}) does not fit stream "
            f"(dim {stream.dim}, {stream.num_classes} classes)")

    rng_reservoir, rng_replay, rng_evolve = _rngs(cfg.seed)
    buffer = MemoryBuffer(cfg.memory_capacity, rng_reservoir)
    replay_on = cfg.method != "FineTune"
    evo_method = _EVOLVER.get(cfg.method)
    seed_label = cfg.seed if isinstance(cfg.seed, int) else -1

    metrics = RunMetrics()
    start = time.perf_counter()
    for k, incoming in enumerate(stream.batches, start=1):
        new_batch = Batch(inputs=incoming.inputs, labels=incoming.labels)
        grad = loss_grads(model, new_batch).param_grad
        if replay_on and len(buffer) > 0:
            b = cfg.replay_batch if cfg.replay_batch is not None else len(incoming)
            replay = buffer.sample_minibatch(b, rng_replay)
            if evo_method is not None and cfg.evolution.steps > 0:
                evo_cfg = cfg.evolution
                if evo_cfg.method != evo_method:
                    evo_cfg = EvolutionConfig(**{**evo_cfg.__dict__, "method": evo_method})
                replay = evolve(model, replay, evo_cfg, rng_evolve)
            grad = grad + loss_grads(model, replay).param_grad
        model = sgd_step(model, grad, cfg.lr)
        if replay_on:
            for i in range(len(incoming)):
                task = int(incoming.tasks[i]) if incoming.tasks is not None else -1
                buffer.update(Sample(x=incoming.inputs[i].copy(),
                                     y=int(incoming.labels[i]), task=task))
        if on_step is not None:
            on_step(k, model)
        if k % cfg.eval_every == 0:
            _record(metrics, k, cfg, model, stream, seed_label, start)
    if not metrics.rows or metrics.rows[-1].step != len(stream.batches):
        _record(metrics, len(stream.batches), cfg, model, stream, seed_label, start)
    return model, metrics


def run_iid_offline(stream: StreamData, model: Mlp, cfg: TrainConfig) -> tuple[Mlp, RunMetrics]:
    """Multi-epoch shuffled training on the pooled stream data (upper bound)."""
    cfg.validate()
    X = np.concatenate([b.inputs for b in stream.batches])
    y = np.concatenate([b.labels for b in stream.batches])
    bsize = len(stream.batches[0])
    ss = cfg.seed if isinstance(cfg.seed, np.random.SeedSequence) \
        else np.random.SeedSequence(cfg.seed)
    rng = np.random.default_rng(ss)
    seed_label = cfg.seed if isinstance(cfg.seed, int) else -1

    metrics = RunMetrics()
    start = time.perf_counter()
    step = 0
    if cfg.epochs == 0:
        _record(metrics, 0, cfg, model, stream, seed_label, start)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        for i in range(0, len(y), bsize):
            idx = order[i:i + bsize]
            grad = loss_grads(model, Batch(inputs=X[idx], labels=y[idx])).param_grad
            model = sgd_step(model, grad, cfg.lr)
            step += 1
        _record(metrics, step, cfg, model, stream, seed_label, start)
    return model, metrics
