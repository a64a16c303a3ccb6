"""Per-subdomain network training on the interior PDE residual.

The training loss is the mean squared residual of the equation with the
combination coefficients pinned to one, so the summed basis output is driven
toward a particular solution of the PDE and the individual basis functions
adapt to the operator.  Gradients with respect to the weights are exact:
the loss contains input derivatives of the network, so the backward pass
walks the forward derivative propagation in reverse.

Training different subdomains shares no state and may run concurrently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .geometry import PointSet, SubdomainSpec
from .network import LayerState, NetworkParams, _alpha_to_key, _split_orders, forward_states
from .problems import ProblemSpec

Array = NDArray[np.float64]


class TrainingError(RuntimeError):
    """Raised when the loss becomes non-finite; carries the epoch index."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainingConfig:
    """Optimizer settings and the relative-reduction stopping rule."""

    learning_rate: float = 0.001
    max_epochs: int = 5000
    rel_tol: float = 1e-3
    seed: int = 202
    epochs_zero: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")


def _summed_output(state: LayerState, orders):
    """Solution value/derivatives with unit coefficients (row sums over basis)."""
    u = state.z.sum(axis=1)
    derivs = {}
    for alpha in orders:
        key = _alpha_to_key(alpha)
        block = state.d1[key] if isinstance(key, int) else state.d2[key]
        derivs[alpha] = block.sum(axis=1)
    return u, derivs


def _forward_residual(
    params: NetworkParams,
    problem: ProblemSpec,
    subdomain: SubdomainSpec,
    points: Array,
    subspace_activation: str,
):
    orders = problem.operator_orders()
    first_axes, second_keys = _split_orders(orders, params.input_dim)
    states = forward_states(params, subdomain, points, first_axes, second_keys, subspace_activation)
    u, derivs = _summed_output(states[-1], orders)
    r = problem.residual(points, u, derivs)
    return states, u, derivs, r, first_axes, second_keys


def residual_loss(
    params: NetworkParams,
    problem: ProblemSpec,
    subdomain: SubdomainSpec,
    points: PointSet | Array,
    subspace_activation: str = "tanh",
) -> float:
    """Mean squared PDE residual over the point set, coefficients == 1."""
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    if pts.shape[0] == 0:
        raise ValueError("residual loss needs a nonempty point set")
    _, _, _, r, _, _ = _forward_residual(params, problem, subdomain, pts, subspace_activation)
    return float(np.mean(r * r))


def _backward(
    params: NetworkParams,
    states: list[LayerState],
    g_z: Array,
    g_d1: dict[int, Array],
    g_d2: dict[tuple[int, int], Array],
    first_axes: Sequence[int],
    second_keys: Sequence[tuple[int, int]],
) -> list[tuple[Array, Array]]:
    """Reverse pass through the derivative-propagating forward computation."""
    grads: list[tuple[Array, Array]] = [None] * params.num_layers  # type: ignore[list-item]
    for l in range(params.num_layers - 1, -1, -1):
        W = params.weights[l]
        out = states[l + 1]
        inp = states[l]
        if out.pre is not None:  # tanh layer
            s_val = out.z
            s1 = 1.0 - s_val * s_val
            s2 = -2.0 * s_val * s1
            s3 = s1 * (6.0 * s_val * s_val - 2.0)
            da = out.pre_d1
            d2a = out.pre_d2
            a_bar = g_z * s1
            da_bar = {s: g_d1[s] * s1 for s in first_axes}
            d2a_bar = {}
            for key in second_keys:
                u, v = key
                g = g_d2[key]
                a_bar += g * (s3 * da[u] * da[v] + s2 * d2a[key])
                da_bar[u] = da_bar[u] + g * s2 * da[v]
                da_bar[v] = da_bar[v] + g * s2 * da[u]
                d2a_bar[key] = g * s1
            for s in first_axes:
                a_bar += g_d1[s] * s2 * da[s]
        else:  # affine subspace layer
            a_bar = g_z
            da_bar = dict(g_d1)
            d2a_bar = dict(g_d2)

        W_grad = a_bar.T @ inp.z
        for s in first_axes:
            W_grad += da_bar[s].T @ inp.d1[s]
        for key in second_keys:
            W_grad += d2a_bar[key].T @ inp.d2[key]
        b_grad = a_bar.sum(axis=0)
        grads[l] = (W_grad, b_grad)

        if l > 0:
            g_z = a_bar @ W
            g_d1 = {s: da_bar[s] @ W for s in first_axes}
            g_d2 = {key: d2a_bar[key] @ W for key in second_keys}
    return grads


def _loss_and_gradient(
    params: NetworkParams,
    problem: ProblemSpec,
    subdomain: SubdomainSpec,
    points: Array,
    subspace_activation: str,
) -> tuple[float, list[tuple[Array, Array]]]:
    states, u, derivs, r, first_axes, second_keys = _forward_residual(
        params, problem, subdomain, points, subspace_activation
    )
    n, m = states[-1].z.shape
    loss = float(np.mean(r * r))

    weights = problem.residual_weights(points, u, derivs)
    r_bar = (2.0 / n) * r
    zero = (0,) * params.input_dim

    ones = np.ones((1, m))
    g_z = (r_bar * weights[zero])[:, None] * ones
    g_d1 = {s: np.zeros((n, m)) for s in first_axes}
    g_d2 = {key: np.zeros((n, m)) for key in second_keys}
    for alpha, w in weights.items():
        if sum(alpha) == 0:
            continue
        key = _alpha_to_key(alpha)
        seed = (r_bar * w)[:, None] * ones
        if isinstance(key, int):
            g_d1[key] += seed
        else:
            g_d2[key] += seed

    grads = _backward(params, states, g_z, g_d1, g_d2, first_axes, second_keys)
    return loss, grads


def loss_gradient(
    params: NetworkParams,
    problem: ProblemSpec,
    subdomain: SubdomainSpec,
    points: PointSet | Array,
    subspace_activation: str = "tanh",
) -> list[tuple[Array, Array]]:
    """Exact gradient of `residual_loss` for every weight matrix and bias."""
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    if pts.shape[0] == 0:
        raise ValueError("gradient needs a nonempty point set")
    _, grads = _loss_and_gradient(params, problem, subdomain, pts, subspace_activation)
    return grads


class _Adam:
    """Standard Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, shapes, learning_rate: float):
        self.lr = learning_rate
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.eps = 1e-8
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, values: list[Array], grads: list[Array]) -> list[Array]:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        out = []
        for i, (x, g) in enumerate(zip(values, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            out.append(x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def _flatten(params: NetworkParams) -> list[Array]:
    out = []
    for W, b in zip(params.weights, params.biases):
        out.append(W)
        out.append(b)
    return out


def _unflatten(values: list[Array]) -> NetworkParams:
    weights = tuple(values[0::2])
    biases = tuple(values[1::2])
    return NetworkParams(weights=weights, biases=biases)


def train_subdomain(
    params: NetworkParams,
    problem: ProblemSpec,
    subdomain: SubdomainSpec,
    points: PointSet | Array,
    config: TrainingConfig,
    subspace_activation: str = "tanh",
    log_path=None,
) -> tuple[NetworkParams, int, float]:
    """Full-batch Adam on the residual loss with the relative stopping rule.

    Stops once loss / initial_loss <= rel_tol or after max_epochs steps;
    with ``epochs_zero`` the input parameters pass through untouched
    (random-feature mode).  Returns (params, epochs_used, final_rel_loss).
    """
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    if config.epochs_zero or config.max_epochs == 0:
        return params, 0, 1.0

    log_rows: list[tuple[int, float]] | None = [] if log_path is not None else None

    def log(epoch: int, loss: float) -> None:
        if log_rows is not None:
            log_rows.append((epoch, loss))

    def flush_log() -> None:
        if log_rows is None:
            return
        with open(log_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for epoch, loss in log_rows:
                writer.writerow([epoch, f"{loss:.16e}"])

    values = _flatten(params)
    adam = _Adam([v.shape for v in values], config.learning_rate)

    initial_loss: float | None = None
    try:
        # The fused pass at each epoch evaluates the loss *before* that
        # epoch's step, which is exactly the post-step loss of the previous
        # epoch; the stopping rule is checked there so each epoch costs a
        # single forward+backward sweep.
        for epoch in range(1, config.max_epochs + 1):
            try:
                current = _unflatten(values)
            except ValueError:
                raise TrainingError(epoch - 1, float("nan")) from None
            loss, grads = _loss_and_gradient(current, problem, subdomain, pts, subspace_activation)
            if not np.isfinite(loss):
                raise TrainingError(epoch - 1, loss)
            if initial_loss is None:
                initial_loss = loss
                log(0, loss)
                if loss == 0.0:
                    return current, 0, 0.0
            else:
                log(epoch - 1, loss)
                if loss / initial_loss <= config.rel_tol:
                    return current, epoch - 1, loss / initial_loss
            flat_grads = []
            for W_g, b_g in grads:
                flat_grads.append(W_g)
                flat_grads.append(b_g)
            values = adam.step(values, flat_grads)

        try:
            final = _unflatten(values)
        except ValueError:
            raise TrainingError(config.max_epochs, float("nan")) from None
        loss = residual_loss(final, problem, subdomain, pts, subspace_activation)
        if not np.isfinite(loss):
            raise TrainingError(config.max_epochs, loss)
        log(config.max_epochs, loss)
        if initial_loss is None or initial_loss == 0.0:
            return final, config.max_epochs, 0.0
        return final, config.max_epochs, loss / initial_loss
    finally:
        flush_log()
