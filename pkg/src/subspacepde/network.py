"""Per-subdomain subspace networks with exact input-derivative propagation.

A network maps a point of the subdomain, normalized to [-1, 1]^dim, through
tanh hidden layers into a final layer of M basis-function values.  First and
second input derivatives of every basis function are propagated analytically
layer by layer (forward mode), never by numerical differencing, so assembled
matrix entries are accurate to machine precision.

The approximate solution on a subdomain is a linear combination of the basis
values with externally determined coefficients; `eval_solution` applies that
contraction to values and derivative blocks alike.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .geometry import CONTAINMENT_TOL, SubdomainSpec

Array = NDArray[np.float64]

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture of one subdomain network.

    ``subspace_dim`` is the number of basis functions emitted by the final
    layer; ``init_range`` is the half-width of the uniform initialization
    used by the untrained (random-feature) modes.  The final layer applies
    tanh by default; set ``subspace_activation="affine"`` to emit the raw
    affine map instead.
    """

    input_dim: int
    hidden_widths: tuple[int, ...] = ()
    subspace_dim: int = 100
    output_dim: int = 1
    activation: str = "tanh"
    init_range: float = 1.0
    subspace_activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.subspace_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim, subspace_dim and output_dim must be >= 1")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be >= 1")
        if self.activation != "tanh":
            raise ValueError("only tanh hidden activations are supported")
        if self.subspace_activation not in ("tanh", "affine"):
            raise ValueError("subspace_activation must be 'tanh' or 'affine'")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, self.subspace_dim)


@dataclass(frozen=True)
class NetworkParams:
    """Weights and biases for the hidden layers plus the subspace layer.

    ``weights[l]`` has shape (width_out, width_in); treated as immutable
    after construction.
    """

    weights: tuple[Array, ...]
    biases: tuple[Array, ...]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up")
        if not self.weights:
            raise ValueError("a network needs at least the subspace layer")
        prev_out = None
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
                raise ValueError("layer shapes are inconsistent")
            if prev_out is not None and W.shape[1] != prev_out:
                raise ValueError("layer shapes are inconsistent")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise ValueError("parameters must be finite")
            prev_out = W.shape[0]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def subspace_dim(self) -> int:
        return self.weights[-1].shape[0]

    def to_json_dict(self) -> dict:
        return {
            "layers": [
                {"weights": W.tolist(), "bias": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ]
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "NetworkParams":
        weights = tuple(np.asarray(layer["weights"], dtype=float) for layer in doc["layers"])
        biases = tuple(np.asarray(layer["bias"], dtype=float) for layer in doc["layers"])
        return NetworkParams(weights=weights, biases=biases)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @staticmethod
    def load(path) -> "NetworkParams":
        with open(path, "r", encoding="utf-8") as fh:
            return NetworkParams.from_json_dict(json.load(fh))


def init_params(config: NetworkConfig, mode: str = "glorot", seed: int = 0) -> NetworkParams:
    """Draw network parameters deterministically from the seed.

    ``glorot`` is the trained-mode fan-scaled family: weights and biases
    from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).  The classic fan_in+fan_out
    scaling with zero biases leaves the basis span too smooth to carry
    boundary-layer modes, so the fan_in form (the usual linear-layer
    default in deep-learning frameworks) is used instead.  ``uniform_range``
    draws every entry from U(-init_range, init_range), the random-feature
    convention of the untrained modes.
    """
    rng = np.random.default_rng(seed)
    sizes = config.layer_sizes
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if mode == "glorot":
            r = 1.0 / np.sqrt(fan_in)
        elif mode == "uniform_range":
            r = config.init_range
        else:
            raise ValueError(f"unknown init mode {mode!r}")
        W = rng.uniform(-r, r, size=(fan_out, fan_in))
        b = rng.uniform(-r, r, size=fan_out)
        weights.append(W)
        biases.append(b)
    return NetworkParams(weights=tuple(weights), biases=tuple(biases))


def normalize(points: Array, subdomain: SubdomainSpec, tol: float = CONTAINMENT_TOL) -> tuple[Array, Array]:
    """Map points into [-1, 1]^dim and return the per-axis chain factors.

    The chain factor 2 / (b - a) per axis converts derivatives with respect
    to the normalized coordinate into physical-coordinate derivatives.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo = np.array([b[0] for b in subdomain.bounds])
    hi = np.array([b[1] for b in subdomain.bounds])
    widths = hi - lo
    if np.any(widths <= 0):
        raise ValueError("subdomain has a zero-width axis")
    if np.any(pts < lo - tol) or np.any(pts > hi + tol):
        raise ValueError("point lies outside the subdomain")
    z = 2.0 * (pts - lo) / widths - 1.0
    np.clip(z, -1.0, 1.0, out=z)
    return z, 2.0 / widths


def _split_orders(orders: Iterable[MultiIndex], dim: int) -> tuple[list[int], list[MultiIndex]]:
    """Derivative channels needed to honour the requested multi-indices.

    Returns (first-order axes, second-order keys); second-order keys are
    either a pure axis (s, s) or a mixed pair (s, r) with s < r.  Pure
    second derivatives need the matching first derivative for the chain
    rule, so those axes are added to the first-order set.
    """
    first: set[int] = set()
    second: set[tuple[int, int]] = set()
    for alpha in orders:
        if len(alpha) != dim:
            raise ValueError(f"multi-index {alpha} does not match input dimension {dim}")
        total = sum(alpha)
        if total == 0:
            continue
        if any(a < 0 or a > 2 for a in alpha) or total > 2:
            raise ValueError(f"unsupported derivative multi-index {alpha}")
        nz = [s for s, a in enumerate(alpha) if a > 0]
        if total == 1:
            first.add(nz[0])
        elif len(nz) == 1:
            second.add((nz[0], nz[0]))
            first.add(nz[0])
        else:
            second.add((nz[0], nz[1]))
            first.update(nz)
    return sorted(first), sorted(second)


@dataclass
class LayerState:
    """Primal value and derivative channels after one layer.

    ``pre`` is the affine pre-activation (None for the normalization layer
    and for an affine subspace layer, where it equals ``z``).
    """

    z: Array
    d1: dict[int, Array]
    d2: dict[tuple[int, int], Array]
    pre: Array | None = None
    pre_d1: dict[int, Array] = field(default_factory=dict)
    pre_d2: dict[tuple[int, int], Array] = field(default_factory=dict)


def forward_states(
    params: NetworkParams,
    subdomain: SubdomainSpec,
    points: Array,
    first_axes: Sequence[int],
    second_keys: Sequence[tuple[int, int]],
    subspace_activation: str = "tanh",
) -> list[LayerState]:
    """Run the network, propagating value and derivative channels.

    Returns one state per layer, starting with the normalized input.  The
    training gradient re-walks these states in reverse, so everything a
    backward pass needs is kept.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != params.input_dim:
        raise ValueError("points do not match the network input dimension")
    z, chain = normalize(pts, subdomain)
    n, dim = z.shape

    d1 = {s: np.tile(chain[s] * np.eye(dim)[s], (n, 1)) for s in first_axes}
    d2 = {key: np.zeros((n, dim)) for key in second_keys}
    states = [LayerState(z=z, d1=d1, d2=d2)]

    num_layers = params.num_layers
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        prev = states[-1]
        a = prev.z @ W.T + b
        da = {s: prev.d1[s] @ W.T for s in first_axes}
        d2a = {key: prev.d2[key] @ W.T for key in second_keys}
        is_last = l == num_layers - 1
        if is_last and subspace_activation == "affine":
            states.append(LayerState(z=a, d1=da, d2=d2a, pre=None))
            continue
        s_val = np.tanh(a)
        s1 = 1.0 - s_val * s_val
        s2 = -2.0 * s_val * s1
        new_d1 = {s: s1 * da[s] for s in first_axes}
        new_d2 = {}
        for key in second_keys:
            u, v = key
            new_d2[key] = s2 * da[u] * da[v] + s1 * d2a[key]
        states.append(
            LayerState(z=s_val, d1=new_d1, d2=new_d2, pre=a, pre_d1=da, pre_d2=d2a)
        )
    return states


@dataclass
class BasisEval:
    """Basis values and requested input derivatives at a batch of points.

    ``derivs`` maps a derivative multi-index to an (n, M) array; the zero
    multi-index resolves to ``values``.
    """

    values: Array
    derivs: dict[MultiIndex, Array]

    @property
    def num_points(self) -> int:
        return self.values.shape[0]

    @property
    def num_basis(self) -> int:
        return self.values.shape[1]

    def deriv(self, alpha: MultiIndex) -> Array:
        if sum(alpha) == 0:
            return self.values
        try:
            return self.derivs[tuple(alpha)]
        except KeyError:
            raise KeyError(f"derivative {alpha} was not requested from eval_basis") from None


def _alpha_to_key(alpha: MultiIndex) -> int | tuple[int, int]:
    nz = [s for s, a in enumerate(alpha) if a > 0]
    total = sum(alpha)
    if total == 1:
        return nz[0]
    if len(nz) == 1:
        return (nz[0], nz[0])
    return (nz[0], nz[1])


def eval_basis(
    params: NetworkParams,
    subdomain: SubdomainSpec,
    points: Array,
    orders: Iterable[MultiIndex] = (),
    subspace_activation: str = "tanh",
) -> BasisEval:
    """Evaluate basis functions and the requested derivatives at points."""
    orders = [tuple(a) for a in orders]
    first_axes, second_keys = _split_orders(orders, params.input_dim)
    states = forward_states(params, subdomain, points, first_axes, second_keys, subspace_activation)
    out = states[-1]
    derivs: dict[MultiIndex, Array] = {}
    for alpha in orders:
        if sum(alpha) == 0:
            continue
        key = _alpha_to_key(alpha)
        derivs[alpha] = out.d1[key] if isinstance(key, int) else out.d2[key]
    return BasisEval(values=out.z, derivs=derivs)


@dataclass(frozen=True)
class CoefficientVector:
    """Stacked per-subdomain coefficient blocks, subdomain order.

    ``block_size`` is the basis count M (times the component count for
    multi-component outputs).
    """

    values: Array
    block_size: int

    def __post_init__(self) -> None:
        if self.values.shape[0] % self.block_size != 0:
            raise ValueError("coefficient length is not a whole number of blocks")

    @property
    def num_blocks(self) -> int:
        return self.values.shape[0] // self.block_size

    def block(self, subdomain: int) -> Array:
        if not 0 <= subdomain < self.num_blocks:
            raise IndexError(f"subdomain id {subdomain} out of range")
        off = subdomain * self.block_size
        return self.values[off : off + self.block_size]


def eval_solution(basis: BasisEval, beta: Array) -> tuple[Array, dict[MultiIndex, Array]]:
    """Contract basis values and derivative blocks with coefficients.

    ``beta`` has shape (M,) for scalar problems or (M, s) for s components;
    the same contraction applies to each derivative block by linearity.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] != basis.num_basis:
        raise ValueError(
            f"coefficient block has {beta.shape[0]} rows but the basis has {basis.num_basis}"
        )
    value = basis.values @ beta
    derivs = {alpha: block @ beta for alpha, block in basis.derivs.items()}
    return value, derivs
