"""Minimal dense-network kernel in float64 numpy.

Every forward op has an exact backward counterpart.  Gradients returned by the
loss helpers already carry the ``1/batch`` factor of the mean, so layer
backward passes never divide by the batch size again.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionError, StateError, ValidationError

LOG_EPS = 1e-12
MODES = ("train", "infer")

# Largest float64 strictly below 1; keeps tanh/sigmoid outputs inside the open interval.
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")


def as_mat(x) -> np.ndarray:
    """Coerce to a 2-D float64 array; 1-D input becomes a single row."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass
class DenseParams:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator, scheme: str = "xavier") -> "DenseParams":
        if scheme == "he":
            limit = np.sqrt(6.0 / n_in)
        elif scheme == "xavier":
            limit = np.sqrt(6.0 / (n_in + n_out))
        else:
            raise ConfigError(f"unknown init scheme {scheme!r}")
        return cls(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out))


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.9

    @classmethod
    def init(cls, n: int, eps: float = 1e-5, momentum: float = 0.9) -> "BatchNormParams":
        if not 0.0 < momentum < 1.0:
            raise ConfigError(f"BN momentum must lie in (0, 1), got {momentum}")
        return cls(np.ones(n), np.zeros(n), np.zeros(n), np.ones(n), eps, momentum)


@dataclass(frozen=True)
class DropoutSpec:
    keep_prob: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigError(f"keep_prob must lie in (0, 1], got {self.keep_prob}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.0005
    beta1: float = 0.5
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **hyper) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **hyper)


# ---------------------------------------------------------------------------
# elementary ops
# ---------------------------------------------------------------------------


def dense_forward(x: np.ndarray, p: DenseParams) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != p.W.shape[1]:
        raise DimensionError(f"input of shape {x.shape} does not match weight of shape {p.W.shape}")
    return x @ p.W.T + p.b


def dense_backward(dy: np.ndarray, x: np.ndarray, p: DenseParams):
    """Return ``(dx, dW, db)``."""
    return dy @ p.W, dy.T @ x, dy.sum(axis=0)


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dy * (x > 0.0)


def tanh_forward(x: np.ndarray) -> np.ndarray:
    return np.clip(np.tanh(x), -_BELOW_ONE, _BELOW_ONE)


def tanh_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dy * (1.0 - y * y)


def sigmoid_forward(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(s, np.finfo(np.float64).tiny, _BELOW_ONE)


def softmax_forward(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    x = as_mat(x)
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(dy: np.ndarray, p: np.ndarray) -> np.ndarray:
    return p * (dy - np.sum(dy * p, axis=1, keepdims=True))


def batchnorm_forward(x: np.ndarray, p: BatchNormParams, mode: str = "train", update_running: bool = True):
    """Normalize each column; train mode uses batch statistics.

    Returns ``(y, cache)``.  Running statistics are replaced (not mutated in
    place) when ``update_running`` is set, so earlier snapshots stay valid.
    """
    _check_mode(mode)
    if x.shape[1] != p.gamma.shape[0]:
        raise DimensionError(f"input of shape {x.shape} does not match BN width {p.gamma.shape[0]}")
    if mode == "train":
        if x.shape[0] < 2:
            raise ValidationError("batch normalization in train mode needs a batch of at least 2 rows")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        if update_running:
            p.running_mean = p.momentum * p.running_mean + (1.0 - p.momentum) * mu
            p.running_var = p.momentum * p.running_var + (1.0 - p.momentum) * var
    else:
        mu, var = p.running_mean, p.running_var
    inv_std = 1.0 / np.sqrt(var + p.eps)
    x_hat = (x - mu) * inv_std
    return p.gamma * x_hat + p.beta, (mode, x_hat, inv_std)


def batchnorm_backward(dy: np.ndarray, cache, p: BatchNormParams):
    """Return ``(dx, dgamma, dbeta)``."""
    mode, x_hat, inv_std = cache
    dgamma = np.sum(dy * x_hat, axis=0)
    dbeta = dy.sum(axis=0)
    dx_hat = dy * p.gamma
    if mode == "infer":
        return dx_hat * inv_std, dgamma, dbeta
    n = dy.shape[0]
    dx = (inv_std / n) * (n * dx_hat - dx_hat.sum(axis=0) - x_hat * np.sum(dx_hat * x_hat, axis=0))
    return dx, dgamma, dbeta


def dropout_forward(x: np.ndarray, s: DropoutSpec, mode: str = "train", rng: np.random.Generator | None = None):
    """Inverted dropout. Returns ``(y, mask)``; mask is None when it acts as the identity."""
    _check_mode(mode)
    if mode == "infer" or s.keep_prob == 1.0:
        return x, None
    if rng is None:
        raise ConfigError("dropout in train mode needs a random generator")
    mask = (rng.random(x.shape) < s.keep_prob) / s.keep_prob
    return x * mask, mask


def dropout_backward(dy: np.ndarray, mask) -> np.ndarray:
    return dy if mask is None else dy * mask


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def check_one_hot(y: np.ndarray, what: str = "label") -> None:
    y = np.asarray(y)
    if y.ndim != 2:
        raise ValidationError(f"{what} matrix must be 2-D, got shape {y.shape}")
    binary = np.all((y == 0.0) | (y == 1.0), axis=1)
    single = y.sum(axis=1) == 1.0
    bad = np.flatnonzero(~(binary & single))
    if bad.size:
        raise ValidationError(f"{what} row {int(bad[0])} is not one-hot: {y[bad[0]].tolist()}")


def cross_entropy(p: np.ndarray, y: np.ndarray) -> float:
    """Mean over rows of ``-sum_j y_j log p_j`` with the log clamped at 1e-12."""
    p, y = as_mat(p), as_mat(y)
    if p.shape != y.shape:
        raise DimensionError(f"prediction shape {p.shape} != label shape {y.shape}")
    check_one_hot(y)
    return float(-np.mean(np.sum(y * np.log(np.maximum(p, LOG_EPS)), axis=1)))


def softmax_cross_entropy_grad(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of ``cross_entropy(softmax(logits), y)`` with respect to the logits."""
    g = (p - y) / p.shape[0]
    clamped = np.sum(p * y, axis=1) < LOG_EPS
    g[clamped] = 0.0
    return g


def _clamp_prob(d) -> np.ndarray:
    return np.clip(np.asarray(d, dtype=np.float64).ravel(), LOG_EPS, 1.0 - LOG_EPS)


def adversarial_losses(d_real, d_fake) -> tuple[float, float]:
    """Source-discrimination cost and its negation ``(J_S, J_G)``."""
    r, f = _clamp_prob(d_real), _clamp_prob(d_fake)
    j_s = float(-0.5 * np.mean(np.log(r)) - 0.5 * np.mean(np.log(1.0 - f)))
    return j_s, -j_s


def adversarial_grads(d_real, d_fake) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``J_S`` with respect to the sigmoid logits of the real and fake batches."""
    r = np.asarray(d_real, dtype=np.float64).ravel()
    f = np.asarray(d_fake, dtype=np.float64).ravel()
    g_r = -0.5 * (1.0 - r) / r.size
    g_f = 0.5 * f / f.size
    g_r[(r < LOG_EPS) | (r > 1.0 - LOG_EPS)] = 0.0
    g_f[(f < LOG_EPS) | (f > 1.0 - LOG_EPS)] = 0.0
    return g_r, g_f


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


def adam_step(params: np.ndarray, grads: np.ndarray, s: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update on flat buffers. Inputs are not modified."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != s.m.shape:
        raise DimensionError(
            f"parameter length {params.shape}, gradient length {grads.shape} and "
            f"moment length {s.m.shape} must match"
        )
    t = s.t + 1
    m = s.beta1 * s.m + (1.0 - s.beta1) * grads
    v = s.beta2 * s.v + (1.0 - s.beta2) * grads * grads
    m_hat = m / (1.0 - s.beta1**t)
    v_hat = v / (1.0 - s.beta2**t)
    new = params - s.lr * m_hat / (np.sqrt(v_hat) + s.eps_hat)
    return new, AdamState(m, v, t, s.lr, s.beta1, s.beta2, s.eps_hat)


# ---------------------------------------------------------------------------
# layered network
# ---------------------------------------------------------------------------

ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass
class Layer:
    """Affine map plus optional BN, activation and output dropout.

    ``bn_position`` is ``"pre"`` (BN on the layer input, before the affine
    map) or ``"post"`` (BN on the affine output, before the nonlinearity).
    """

    dense: DenseParams
    activation: str = "relu"
    bn: BatchNormParams | None = None
    bn_position: str | None = None
    dropout: DropoutSpec | None = None
    bn_allowed: bool = True

    @property
    def n_in(self) -> int:
        return self.dense.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.dense.W.shape[0]


@dataclass
class ForwardCache:
    owner: int
    version: int
    mode: str
    inputs: list = field(default_factory=list)
    layer_caches: list = field(default_factory=list)
    outputs: list = field(default_factory=list)


class Network:
    """Feed-forward stack of :class:`Layer` records."""

    def __init__(self, layers: Sequence[Layer], pa: bool = False, bn_eps: float = 1e-5, bn_momentum: float = 0.9):
        for layer in layers:
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {layer.activation!r}")
        for a, b in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise DimensionError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")
        self.layers = list(layers)
        self.bn_eps = bn_eps
        self.bn_momentum = bn_momentum
        self.pa = pa
        # Bumped by every parameter update; stale caches are detected against it.
        self.version = 0

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def trained(self) -> bool:
        return self.version > 0

    # -- forward / backward -------------------------------------------------

    def forward(self, x, mode: str = "train", rng: np.random.Generator | None = None, update_running: bool = True):
        """Return ``(output, cache)``; the output is the last layer's activation."""
        _check_mode(mode)
        h = as_mat(x)
        if h.shape[1] != self.layers[0].n_in:
            raise DimensionError(f"network expects {self.layers[0].n_in} input columns, got shape {h.shape}")
        cache = ForwardCache(id(self), self.version, mode)
        for layer in self.layers:
            lc = {}
            if layer.bn is not None and layer.bn_position == "pre":
                h, lc["bn"] = batchnorm_forward(h, layer.bn, mode, update_running)
            cache.inputs.append(h)
            a = dense_forward(h, layer.dense)
            if layer.bn is not None and layer.bn_position == "post":
                a, lc["bn"] = batchnorm_forward(a, layer.bn, mode, update_running)
            lc["pre_act"] = a
            if layer.activation == "relu":
                o = relu_forward(a)
            elif layer.activation == "tanh":
                o = tanh_forward(a)
            else:
                o = a
            lc["act"] = o
            if layer.dropout is not None:
                o, lc["mask"] = dropout_forward(o, layer.dropout, mode, rng)
            cache.layer_caches.append(lc)
            cache.outputs.append(o)
            h = o
        return h, cache

    def backward(self, cache: ForwardCache, grad_out, tap_grads: dict[int, np.ndarray] | None = None):
        """Reverse pass.

        ``grad_out`` is the gradient with respect to the network output;
        ``tap_grads`` optionally adds gradients at intermediate layer outputs.
        Returns ``(grads, dx)`` with ``grads`` aligned to :meth:`parameters`.
        """
        if cache.owner != id(self) or cache.version != self.version or len(cache.layer_caches) != len(self.layers):
            raise StateError("forward cache does not belong to this network state (stale or mismatched)")
        tap_grads = tap_grads or {}
        g = as_mat(grad_out)
        per_layer = []
        for i in range(len(self.layers) - 1, -1, -1):
            layer, lc = self.layers[i], cache.layer_caches[i]
            if i in tap_grads:
                g = g + tap_grads[i]
            if layer.dropout is not None:
                g = dropout_backward(g, lc["mask"])
            if layer.activation == "relu":
                g = relu_backward(g, lc["pre_act"])
            elif layer.activation == "tanh":
                g = tanh_backward(g, lc["act"])
            bn_grads = []
            if layer.bn is not None and layer.bn_position == "post":
                g, dgamma, dbeta = batchnorm_backward(g, lc["bn"], layer.bn)
                bn_grads = [dgamma, dbeta]
            g, dW, db = dense_backward(g, cache.inputs[i], layer.dense)
            if layer.bn is not None and layer.bn_position == "pre":
                g, dgamma, dbeta = batchnorm_backward(g, lc["bn"], layer.bn)
                bn_grads = [dgamma, dbeta]
            per_layer.append([dW, db] + bn_grads)
        grads = [a for layer_grads in reversed(per_layer) for a in layer_grads]
        return grads, g

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.dense.W, layer.dense.b]
            if layer.bn is not None:
                out += [layer.bn.gamma, layer.bn.beta]
        return out

    def parameter_names(self) -> list[str]:
        out = []
        for i, layer in enumerate(self.layers):
            out += [f"{i}/W", f"{i}/b"]
            if layer.bn is not None:
                out += [f"{i}/gamma", f"{i}/beta"]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        if flat.size != self.n_params():
            raise DimensionError(f"flat vector of length {flat.size} for {self.n_params()} parameters")
        pos = 0
        for layer in self.layers:
            layer.dense.W = flat[pos : pos + layer.dense.W.size].reshape(layer.dense.W.shape).copy()
            pos += layer.dense.W.size
            layer.dense.b = flat[pos : pos + layer.n_out].copy()
            pos += layer.n_out
            if layer.bn is not None:
                n = layer.bn.gamma.size
                layer.bn.gamma = flat[pos : pos + n].copy()
                layer.bn.beta = flat[pos + n : pos + 2 * n].copy()
                pos += 2 * n
        self.version += 1

    def state_arrays(self) -> dict[str, np.ndarray]:
        """All parameters plus BN running statistics, keyed by name."""
        out = dict(zip(self.parameter_names(), self.parameters()))
        for i, layer in enumerate(self.layers):
            if layer.bn is not None:
                out[f"{i}/running_mean"] = layer.bn.running_mean
                out[f"{i}/running_var"] = layer.bn.running_var
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        expected = self.state_arrays()
        if set(arrays) != set(expected):
            raise DimensionError(f"state keys {sorted(arrays)} do not match network keys {sorted(expected)}")
        for i, layer in enumerate(self.layers):
            for attr in ("W", "b"):
                setattr(layer.dense, attr, _checked(arrays[f"{i}/{attr}"], getattr(layer.dense, attr)))
            if layer.bn is not None:
                for attr in ("gamma", "beta", "running_mean", "running_var"):
                    setattr(layer.bn, attr, _checked(arrays[f"{i}/{attr}"], getattr(layer.bn, attr)))
        self.version += 1

    def copy(self) -> "Network":
        return copy.deepcopy(self)


def _checked(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    new = np.array(new, dtype=np.float64)
    if new.shape != old.shape:
        raise DimensionError(f"array of shape {new.shape} cannot replace shape {old.shape}")
    return new


def _place_bn(net: Network) -> None:
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        layer.bn, layer.bn_position = None, None
        if not layer.bn_allowed:
            continue
        if net.pa:
            layer.bn = BatchNormParams.init(layer.n_in, net.bn_eps, net.bn_momentum)
            layer.bn_position = "pre"
        elif i != last:
            layer.bn = BatchNormParams.init(layer.n_out, net.bn_eps, net.bn_momentum)
            layer.bn_position = "post"


def build_mlp(
    widths: Sequence[int],
    activations: Sequence[str],
    rng: np.random.Generator,
    pa: bool = True,
    no_bn: Sequence[int] = (),
    dropout: dict[int, DropoutSpec] | None = None,
    bn_eps: float = 1e-5,
    bn_momentum: float = 0.9,
) -> Network:
    """Build a dense stack.

    With ``pa`` every layer standardizes its input (pre-activation BN);
    without it every hidden layer normalizes its affine output. Layers listed
    in ``no_bn`` never receive BN; ``dropout`` maps layer index to a spec
    applied to that layer's activated output.
    """
    if len(activations) != len(widths) - 1:
        raise ConfigError(f"{len(widths) - 1} layers need as many activations, got {len(activations)}")
    dropout = dropout or {}
    layers = []
    for i, (n_in, n_out, act) in enumerate(zip(widths[:-1], widths[1:], activations)):
        scheme = "he" if act == "relu" else "xavier"
        layers.append(
            Layer(
                DenseParams.init(n_in, n_out, rng, scheme),
                activation=act,
                dropout=dropout.get(i),
                bn_allowed=i not in no_bn,
            )
        )
    net = Network(layers, pa=pa, bn_eps=bn_eps, bn_momentum=bn_momentum)
    _place_bn(net)
    return net


def set_pa_mode(net: Network, on: bool) -> Network:
    """Switch BN placement between pre- and post-activation on an untrained network."""
    if net.trained:
        raise StateError("cannot change BN placement after the network has been trained")
    net.pa = bool(on)
    _place_bn(net)
    return net


class Adam:
    """Adam optimizer bound to one network's flat parameter vector."""

    def __init__(self, net: Network, lr: float = 0.0005, beta1: float = 0.5, beta2: float = 0.999, eps_hat: float = 1e-8):
        self.net = net
        self.state = AdamState.zeros(net.n_params(), lr=lr, beta1=beta1, beta2=beta2, eps_hat=eps_hat)

    def step(self, grads: Sequence[np.ndarray]) -> None:
        flat_grads = np.concatenate([g.ravel() for g in grads])
        new, self.state = adam_step(self.net.get_flat(), flat_grads, self.state)
        self.net.set_flat(new)
