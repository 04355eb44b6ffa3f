"""Training loop: Adam with a cyclic learning rate over full-batch jets."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .features import (DomainScales, PdeSpec, build_theta, composite_loss_and_bar,
                       physical_u_t, relative_error, solve_parameters, total_loss)
from .sampling import SampleSet
from .siren import SirenNet, forward_jet_with_cache, jet_backward

DIVERGENCE_LIMIT = 1e8


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    base_lr: float | None = None       # defaults to 0.1 * learning_rate
    max_lr: float | None = None        # defaults to 10 * learning_rate
    step_size_up: int = 1000
    lr_mode: str = "exp_range"
    gamma: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    max_iter: int = 1000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    solve_p: bool = True               # False: p trained by gradient alongside the net
    batch_size: int | None = None      # None: full batch

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.lr_mode not in ("triangular", "exp_range"):
            raise ValueError(f"unknown lr_mode {self.lr_mode!r}")
        if self.resolved_base_lr >= self.resolved_max_lr:
            raise ValueError("base_lr must be below max_lr")
        if not 0.0 < self.gamma <= 1.0:  # keeps the schedule within [base, max]
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")

    @property
    def resolved_base_lr(self) -> float:
        return 0.1 * self.learning_rate if self.base_lr is None else self.base_lr

    @property
    def resolved_max_lr(self) -> float:
        return 10.0 * self.learning_rate if self.max_lr is None else self.max_lr


@dataclass
class TrainResult:
    p_trajectory: np.ndarray   # (iterations, n_terms)
    loss_history: np.ndarray   # (iterations, 3): mse, deri, total
    lr_history: np.ndarray     # (iterations,)
    final_p: np.ndarray
    wall_time: float
    iterations: int
    diverged: bool = False


def cyclic_lr(iteration: int, cfg: TrainConfig) -> float:
    """Triangular wave between base_lr and max_lr, half-period step_size_up;
    exp_range mode shrinks the amplitude by gamma**iteration."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    base, top = cfg.resolved_base_lr, cfg.resolved_max_lr
    cycle = np.floor(1.0 + iteration / (2.0 * cfg.step_size_up))
    pos = np.abs(iteration / cfg.step_size_up - 2.0 * cycle + 1.0)
    scale = cfg.gamma ** iteration if cfg.lr_mode == "exp_range" else 1.0
    return float(base + (top - base) * max(0.0, 1.0 - pos) * scale)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at adam step {state.step}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


def _net_params(net: SirenNet) -> list[np.ndarray]:
    out = []
    for w, b in zip(net.weights, net.biases):
        out.extend((w, b))
    return out


def _grad_list(grad) -> list[np.ndarray]:
    out = []
    for dw, db in zip(grad.d_weights, grad.d_biases):
        out.extend((dw, db))
    return out


def train(net: SirenNet, samples: SampleSet, spec: PdeSpec, scales: DomainScales,
          cfg: TrainConfig) -> TrainResult:
    """Fit the network to the samples and recover the coefficient vector.

    Each iteration evaluates exact jets on the batch, assembles the
    feature library and the time derivative, recovers p by the QR solve
    (held constant while differentiating), and takes one Adam step on the
    weighted sum of the data-fit and residual losses. The network is
    updated in place.
    """
    if len(samples) == 0:
        raise ValueError("empty sample set")
    order = spec.max_x_order
    t_all, x_all, u_all = samples.t_norm, samples.x_norm, samples.u
    rng = np.random.default_rng(cfg.seed)

    params = _net_params(net)
    state = AdamState.like(params)
    p_vec = np.zeros(len(spec.terms))
    p_state = AdamState.like([p_vec]) if not cfg.solve_p else None

    p_rows, loss_rows, lrs = [], [], []
    diverged = False
    started = time.perf_counter()
    for it in range(cfg.max_iter):
        if cfg.batch_size is not None and cfg.batch_size < len(samples):
            idx = rng.choice(len(samples), cfg.batch_size, replace=False)
            t, x, u_data = t_all[idx], x_all[idx], u_all[idx]
        else:
            t, x, u_data = t_all, x_all, u_all

        jets, cache = forward_jet_with_cache(net, t, x, max_x_order=order)
        theta = build_theta(jets, spec, scales)
        u_t = physical_u_t(jets, scales)
        if cfg.solve_p:
            p_vec = solve_parameters(theta, u_t)
        mse, deri, bar = composite_loss_and_bar(
            jets, u_data, theta, u_t, spec, scales, p_vec, cfg.mu1, cfg.mu2)
        total = total_loss(mse, deri, cfg.mu1, cfg.mu2)

        lr = cyclic_lr(it, cfg)
        p_rows.append(np.array(p_vec, dtype=float))
        loss_rows.append((mse, deri, total))
        lrs.append(lr)
        if not np.isfinite(total) or abs(total) > DIVERGENCE_LIMIT:
            diverged = True
            break

        grads = jet_backward(net, cache, bar)
        adam_step(params, _grad_list(grads), state, lr,
                  cfg.beta1, cfg.beta2, cfg.adam_eps)
        if not cfg.solve_p:
            p_grad = -(2.0 * cfg.mu2 / len(u_t)) * theta.T @ (u_t - theta @ p_vec)
            adam_step([p_vec], [p_grad], p_state, lr,
                      cfg.beta1, cfg.beta2, cfg.adam_eps)

    wall = time.perf_counter() - started
    trajectory = np.array(p_rows)
    return TrainResult(
        p_trajectory=trajectory,
        loss_history=np.array(loss_rows),
        lr_history=np.array(lrs),
        final_p=trajectory[-1].copy(),
        wall_time=wall,
        iterations=trajectory.shape[0],
        diverged=diverged,
    )


# ---------------------------------------------------------------------------
# result export

def write_trajectory_csv(result: TrainResult, path) -> None:
    n_terms = result.p_trajectory.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "lr", "mse", "deri", "total"]
                        + [f"p{i + 1}" for i in range(n_terms)])
        for i in range(result.iterations):
            writer.writerow(
                [i, "%.17g" % result.lr_history[i]]
                + ["%.17g" % v for v in result.loss_history[i]]
                + ["%.17g" % v for v in result.p_trajectory[i]])


def summary_dict(result: TrainResult, spec: PdeSpec | None = None) -> dict:
    out = {
        "final_p": [float(v) for v in result.final_p],
        "iterations": result.iterations,
        "diverged": result.diverged,
        "wall_time_s": result.wall_time,
    }
    if spec is not None and spec.true_p is not None:
        errs = relative_error(spec.true_p, result.final_p)
        out["rel_errors"] = [None if np.isnan(e) else float(e) for e in errs]
        out["term_labels"] = list(spec.labels)
    return out
