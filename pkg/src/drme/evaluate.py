"""Clean accuracy and PGD l-inf adversarial evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nnet import Batch, Mlp, forward, loss_grads


@dataclass
class AttackConfig:
    epsilons: list[float] = field(default_factory=lambda: [i / 255 for i in range(1, 11)])
    steps: int = 20
    step_size: float = 2 / 255
    random_start: bool = False
    clamp: tuple[float, float] | None = None

    def validate(self):
        if any(e < 0 for e in self.epsilons):
            raise ValueError("epsilons must be nonnegative")
        if self.steps < 1 or self.step_size <= 0:
            raise ValueError("steps must be >= 1 and step_size > 0")


def accuracy(model: Mlp, test_sets) -> tuple[list[float], float]:
    """Per-task argmax accuracy and its unweighted mean over tasks."""
    if not test_sets:
        raise ValueError("empty test set")
    per_task = []
    for X, y in test_sets:
        if len(y) == 0:
            raise ValueError("empty test set")
        preds = forward(model, X).argmax(axis=1)
        per_task.append(float(np.mean(preds == y)))
    return per_task, float(np.mean(per_task))


def pgd_perturb(model: Mlp, X: np.ndarray, y: np.ndarray, eps: float,
                cfg: AttackConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Untargeted sign-gradient PGD within the l-inf ball of radius eps.

    Every output coordinate obeys both the eps-ball around the clean input
    and the domain clamp exactly; the clean inputs are never mutated.
    """
    cfg.validate()
    X0 = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if cfg.random_start and eps > 0:
        if rng is None:
            rng = np.random.default_rng()
        x = X0 + rng.uniform(-eps, eps, size=X0.shape)
    else:
        x = X0.copy()
    lo, hi = X0 - eps, X0 + eps
    for _ in range(cfg.steps):
        g = loss_grads(model, Batch(inputs=x, labels=y)).input_grads
        x = x + cfg.step_size * np.sign(g)
        np.clip(x, lo, hi, out=x)
        if cfg.clamp is not None:
            np.clip(x, cfg.clamp[0], cfg.clamp[1], out=x)
    return x


def pgd_attack(model: Mlp, X: np.ndarray, y: np.ndarray, cfg: AttackConfig,
               rng: np.random.Generator | None = None) -> dict[float, float]:
    """Robust accuracy under the attack, per epsilon budget."""
    robust = {}
    for eps in cfg.epsilons:
        x_adv = pgd_perturb(model, X, y, eps, cfg, rng)
        preds = forward(model, x_adv).argmax(axis=1)
        robust[eps] = float(np.mean(preds == y))
    return robust
