"""Analytic-target sanity checks for the three particle flows.

Each check runs a flow against the standalone quadratic energy
U(x) = |x|^2 / 2 (stationary law: standard normal) and compares long-run
position moments against it. Used by the CLI `sanity` subcommand and the
acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolution import EvolutionConfig, ParticleState, step_hmc, step_ld, step_svgd


def quadratic_grad(positions: np.ndarray) -> np.ndarray:
    return positions


@dataclass
class MomentCheck:
    method: str
    mean_abs: float        # max |mean| over coordinates
    variance: float        # mean per-coordinate variance
    mean_tol: float
    var_lo: float
    var_hi: float

    @property
    def passed(self) -> bool:
        return (self.mean_abs < self.mean_tol
                and self.var_lo <= self.variance <= self.var_hi)

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"{self.method}: max|mean|={self.mean_abs:.4f} "
                f"(tol {self.mean_tol}), var={self.variance:.4f} "
                f"(band [{self.var_lo}, {self.var_hi}]) -> {status}")


def _pooled_moments(history: list[np.ndarray]) -> tuple[float, float]:
    pooled = np.concatenate(history, axis=0)
    mean_abs = float(np.max(np.abs(pooled.mean(axis=0))))
    variance = float(pooled.var(axis=0).mean())
    return mean_abs, variance


def check_ld(seed: int = 0, n: int = 2000, d: int = 2, steps: int = 5000,
             alpha: float = 0.01, window: int = 1000) -> MomentCheck:
    rng = np.random.default_rng(np.random.SeedSequence([7, seed]))
    cfg = EvolutionConfig(method="LD", alpha=alpha, steps=steps, beta=0.0)
    state = ParticleState(positions=rng.normal(0, 2.0, size=(n, d)),
                          labels=np.zeros(n, dtype=np.int64))
    history = []
    for t in range(steps):
        state = step_ld(state, quadratic_grad, cfg, rng)
        if t >= steps - window and t % 10 == 0:
            history.append(state.positions.copy())
    mean_abs, variance = _pooled_moments(history)
    return MomentCheck("ld", mean_abs, variance, 0.05, 0.9, 1.1)


def check_hmc(seed: int = 0, n: int = 2000, d: int = 2, steps: int = 5000,
              alpha: float = 0.01, tau: float = 0.1,
              window: int = 1000) -> MomentCheck:
    rng = np.random.default_rng(np.random.SeedSequence([8, seed]))
    cfg = EvolutionConfig(method="HMC", alpha=alpha, steps=steps, beta=0.0, tau=tau)
    state = ParticleState(positions=rng.normal(0, 2.0, size=(n, d)),
                          labels=np.zeros(n, dtype=np.int64),
                          momenta=np.zeros((n, d)))
    history = []
    for t in range(steps):
        state = step_hmc(state, quadratic_grad, cfg, rng)
        if t >= steps - window and t % 10 == 0:
            history.append(state.positions.copy())
    mean_abs, variance = _pooled_moments(history)
    return MomentCheck("hmc", mean_abs, variance, 0.05, 0.9, 1.1)


def check_svgd(seed: int = 0, n: int = 100, d: int = 2, steps: int = 3000,
               alpha: float = 0.5) -> MomentCheck:
    rng = np.random.default_rng(np.random.SeedSequence([9, seed]))
    cfg = EvolutionConfig(method="SVGD", alpha=alpha, steps=steps, beta=0.0,
                          kernel_sigma="median")
    state = ParticleState(positions=rng.normal(0, 2.0, size=(n, d)),
                          labels=np.zeros(n, dtype=np.int64))
    for _ in range(steps):
        state = step_svgd(state, quadratic_grad, cfg)
    mean_abs = float(np.max(np.abs(state.positions.mean(axis=0))))
    variance = float(state.positions.var(axis=0).mean())
    return MomentCheck("svgd", mean_abs, variance, 0.05, 0.85, 1.15)


CHECKS = {"ld": check_ld, "svgd": check_svgd, "hmc": check_hmc}


def run_sanity(methods=None, seed: int = 0) -> list[MomentCheck]:
    names = list(CHECKS) if not methods else list(methods)
    for name in names:
        if name not in CHECKS:
            raise ValueError(f"unknown method {name!r}")
    return [CHECKS[name](seed=seed) for name in names]
