"""Worst-case memory evolution: energy gradient and the three particle flows.

The evolved minibatch drifts toward higher training loss (energy descent on
U = -L - beta * grad-dot term), with Langevin noise, SVGD kernel repulsion,
or Hamiltonian momentum supplying diversity. Each stepper takes a gradient
callable so the same dynamics run against a model-backed energy or a
standalone analytic one (sanity checks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .nnet import Batch, Mlp, ShapeError, input_grads, loss_grads, mixed_grad_fd

METHODS = ("LD", "SVGD", "HMC")


@dataclass
class EvolutionConfig:
    method: str = "LD"
    alpha: float = 0.01
    steps: int = 5
    beta: float = 0.003
    tau: float = 0.1
    kernel_sigma: float | str = "median"   # positive float or "median"
    fd_eps: float = 1e-3
    clamp: tuple[float, float] | None = None

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown evolution method {self.method!r}")
        if self.alpha < 0 or self.steps < 0 or self.beta < 0 or self.fd_eps <= 0:
            raise ValueError("alpha, steps, beta must be >= 0 and fd_eps > 0")
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")
        if isinstance(self.kernel_sigma, str):
            if self.kernel_sigma != "median":
                raise ValueError("kernel_sigma must be positive or 'median'")
        elif self.kernel_sigma <= 0:
            raise ValueError("kernel_sigma must be positive or 'median'")
        if self.clamp is not None and self.clamp[0] > self.clamp[1]:
            raise ValueError("clamp lower bound exceeds upper bound")


@dataclass
class ParticleState:
    """Evolving copies of a memory minibatch; momenta only under HMC."""

    positions: np.ndarray
    labels: np.ndarray
    momenta: np.ndarray | None = None


def gaussian_kernel(xi: np.ndarray, xj: np.ndarray, sigma: float):
    """k(xi, xj) = exp(-|xi-xj|^2 / 2 sigma^2) and its gradient w.r.t. xj."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    diff = np.asarray(xi, float) - np.asarray(xj, float)
    k = float(np.exp(-np.dot(diff, diff) / (2.0 * sigma * sigma)))
    return k, k * diff / (sigma * sigma)


def median_bandwidth(positions: np.ndarray) -> float:
    """sigma^2 = median pairwise sqdist / (2 ln(n+1)), floored at 1e-6."""
    n = positions.shape[0]
    med = _core.median_sqdist(np.ascontiguousarray(positions, dtype=np.float64))
    sig2 = med / (2.0 * np.log(n + 1.0))
    return float(np.sqrt(max(sig2, 1e-6)))


def energy_grad(model: Mlp, positions: np.ndarray, labels: np.ndarray,
                anchor: Batch | None, beta: float, fd_eps: float) -> np.ndarray:
    """grad_x U for a particle batch.

    U = -L(theta, x, y) - beta * grad_theta L(theta, x, y) . v with v the
    mean parameter gradient over the raw anchor minibatch; the dot-product
    part is finite-differenced.
    """
    batch = Batch(inputs=positions, labels=labels)
    bundle = loss_grads(model, batch)
    out = -bundle.input_grads
    if beta > 0:
        if anchor is None or len(anchor) == 0:
            raise ValueError("beta > 0 needs a nonempty anchor batch")
        v = loss_grads(model, anchor).param_grad
        out = out - beta * mixed_grad_fd(model, batch, v, fd_eps)
    return out


def make_energy_grad_fn(model: Mlp, anchor: Batch, cfg: EvolutionConfig):
    """Per-particle energy-gradient closure for the evolution dynamics.

    The particle update treats U as a per-datapoint energy, so rows carry
    per-example loss gradients (n times the mean-loss rows that
    ``energy_grad`` reports). The anchor direction is computed once and
    held fixed across the evolution steps.
    """
    v = loss_grads(model, anchor).param_grad if cfg.beta > 0 else None
    norm = float(np.linalg.norm(v)) if v is not None else 0.0
    if norm > 0.0:
        # theta +/- eps vhat is fixed across the T steps; build both
        # perturbed models once instead of inside every gradient call
        theta = model.flat_params()
        vhat = v / norm
        m_plus = model.with_params(theta + cfg.fd_eps * vhat)
        m_minus = model.with_params(theta - cfg.fd_eps * vhat)

    def grad_u(positions: np.ndarray) -> np.ndarray:
        batch = Batch(inputs=positions, labels=anchor.labels)
        out = -input_grads(model, batch)
        if norm > 0.0:
            mixed = (input_grads(m_plus, batch) - input_grads(m_minus, batch)) \
                * (norm / (2.0 * cfg.fd_eps))
            out = out - cfg.beta * mixed
        return len(batch) * out

    return grad_u


def _clamped(positions: np.ndarray, cfg: EvolutionConfig) -> np.ndarray:
    if cfg.clamp is None:
        return positions
    return np.clip(positions, cfg.clamp[0], cfg.clamp[1])


def step_ld(state: ParticleState, grad_u, cfg: EvolutionConfig,
            rng: np.random.Generator) -> ParticleState:
    """Langevin update: x <- x - alpha grad_x U + sqrt(2 alpha) * xi."""
    noise = rng.standard_normal(state.positions.shape)
    x = state.positions - cfg.alpha * grad_u(state.positions) \
        + np.sqrt(2.0 * cfg.alpha) * noise
    return ParticleState(positions=_clamped(x, cfg), labels=state.labels)


def step_svgd(state: ParticleState, grad_u, cfg: EvolutionConfig) -> ParticleState:
    """Deterministic kernelized update: smoothed gradient descent on U plus
    kernel repulsion, averaged over particles."""
    X = np.ascontiguousarray(state.positions, dtype=np.float64)
    if isinstance(cfg.kernel_sigma, str):
        sigma = median_bandwidth(X)
    else:
        sigma = float(cfg.kernel_sigma)
    G = np.ascontiguousarray(grad_u(X), dtype=np.float64)
    x = X - cfg.alpha * _core.svgd_direction(X, G, sigma)
    return ParticleState(positions=_clamped(x, cfg), labels=state.labels)


def step_hmc(state: ParticleState, grad_u, cfg: EvolutionConfig,
             rng: np.random.Generator) -> ParticleState:
    """Hamiltonian update: x <- x + v, then
    v <- v - alpha grad_x U(x) - tau v + sqrt(2 tau alpha) * xi,
    with the gradient taken at the updated position."""
    if state.momenta is None:
        raise ShapeError("HMC state needs momenta")
    noise = rng.standard_normal(state.positions.shape)
    x = _clamped(state.positions + state.momenta, cfg)
    v = state.momenta - cfg.alpha * grad_u(x) - cfg.tau * state.momenta \
        + np.sqrt(2.0 * cfg.tau * cfg.alpha) * noise
    return ParticleState(positions=x, labels=state.labels, momenta=v)


def evolve(model: Mlp, batch: Batch, cfg: EvolutionConfig,
           rng: np.random.Generator) -> Batch:
    """Run cfg.steps evolution steps on a fresh copy of the minibatch.

    The raw batch anchors the gradient dot-product term; momenta (HMC) start
    at zero each invocation. Returns the evolved batch; the raw data is
    left untouched.
    """
    cfg.validate()
    if cfg.steps == 0 or len(batch) == 0:
        return batch
    grad_u = make_energy_grad_fn(model, batch, cfg)
    state = ParticleState(
        positions=batch.inputs.copy(),
        labels=batch.labels.copy(),
        momenta=np.zeros_like(batch.inputs) if cfg.method == "HMC" else None,
    )
    for _ in range(cfg.steps):
        if cfg.method == "LD":
            state = step_ld(state, grad_u, cfg, rng)
        elif cfg.method == "SVGD":
            state = step_svgd(state, grad_u, cfg)
        else:
            state = step_hmc(state, grad_u, cfg, rng)
    return Batch(inputs=state.positions, labels=state.labels, tasks=batch.tasks)
