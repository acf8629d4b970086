"""Fully-connected surrogate ``u ~ NN(x, t)``: training, persistence, meta-data.

Inputs are mapped affinely to [-1, 1] per axis and the output is
de-standardized, so the raw network only ever sees O(1) quantities.  Both
affine maps are folded into the derivative jets by seeding the series with
the physical-unit slope.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StructuralError, TrainingError
from .series import SUPPORTED_ACTIVATIONS, derivative_jets

log = logging.getLogger(__name__)


def _act(name, z):
    if name == "sin":
        return np.sin(z)
    return np.tanh(z)


def _act_grad(name, z, a):
    if name == "sin":
        return np.cos(z)
    return 1.0 - a * a


@dataclass
class SurrogateNet:
    layer_sizes: list
    activation: str
    weights: list
    biases: list
    x_center: float = 0.0
    x_scale: float = 1.0
    t_center: float = 0.0
    t_scale: float = 1.0
    u_shift: float = 0.0
    u_scale: float = 1.0

    def __post_init__(self):
        self.validate()

    @classmethod
    def create(cls, hidden, activation="sin", seed=0, x_range=(-1.0, 1.0),
               t_range=(-1.0, 1.0), u_shift=0.0, u_scale=1.0):
        """Fresh network with ``hidden`` neurons per hidden layer.

        Weights are uniform on ``[-sqrt(3/fan_in), sqrt(3/fan_in)]``, biases
        likewise, drawn from a seeded generator.
        """
        sizes = [2, *hidden, 1]
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(3.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-limit, limit, size=fan_out) if fan_out > 1
                          else np.zeros(fan_out))
        x_center, x_scale = _center_scale(x_range)
        t_center, t_scale = _center_scale(t_range)
        return cls(sizes, activation, weights, biases, x_center, x_scale,
                   t_center, t_scale, float(u_shift), float(u_scale))

    def validate(self):
        sizes = list(self.layer_sizes)
        if len(sizes) < 2 or sizes[0] != 2 or sizes[-1] != 1:
            raise StructuralError(f"layer sizes must run from 2 to 1, got {sizes}")
        if any(s <= 0 for s in sizes):
            raise StructuralError("layer sizes must be positive")
        if self.activation not in SUPPORTED_ACTIVATIONS:
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise StructuralError("one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if np.shape(w) != (sizes[i], sizes[i + 1]) or np.shape(b) != (sizes[i + 1],):
                raise StructuralError(f"layer {i} parameter shapes do not chain")

    def normalize_inputs(self, x, t):
        return (x - self.x_center) / self.x_scale, (t - self.t_center) / self.t_scale

    def forward(self, x, t):
        """Evaluate the surrogate; scalars in, scalar out, arrays in, arrays out."""
        scalar = np.ndim(x) == 0 and np.ndim(t) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xi, ti = self.normalize_inputs(x, t)
        h = np.stack([xi, ti], axis=-1)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = _act(self.activation, h)
        u = h[..., 0] * self.u_scale + self.u_shift
        return float(u[0]) if scalar else u

    __call__ = forward

    # -- training internals; these work on normalized inputs and targets --

    def _params(self):
        return [*self.weights, *self.biases]

    def _set_params(self, params):
        n = len(self.weights)
        self.weights = [p.copy() for p in params[:n]]
        self.biases = [p.copy() for p in params[n:]]

    def loss_and_grad(self, inputs, targets):
        """Mean squared error on normalized data and its parameter gradients."""
        acts, pre = [inputs], []
        h = inputs
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = _act(self.activation, z) if i < last else z
            acts.append(h)
        resid = h[:, 0] - targets
        n = targets.shape[0]
        loss = float(resid @ resid) / n
        delta = (2.0 / n) * resid[:, None]
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for i in range(last, -1, -1):
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * _act_grad(
                    self.activation, pre[i - 1], acts[i]
                )
        return loss, [*gw, *gb]

    def to_dict(self):
        return {
            "layer_sizes": [int(s) for s in self.layer_sizes],
            "activation": self.activation,
            "weights": [np.asarray(w).ravel().tolist() for w in self.weights],
            "biases": [np.asarray(b).tolist() for b in self.biases],
            "normalization": {
                "x_center": self.x_center, "x_scale": self.x_scale,
                "t_center": self.t_center, "t_scale": self.t_scale,
                "u_shift": self.u_shift, "u_scale": self.u_scale,
            },
        }

    @classmethod
    def from_dict(cls, d):
        sizes = d["layer_sizes"]
        weights = [np.array(w, dtype=float).reshape(sizes[i], sizes[i + 1])
                   for i, w in enumerate(d["weights"])]
        biases = [np.array(b, dtype=float) for b in d["biases"]]
        return cls(list(sizes), d["activation"], weights, biases, **d["normalization"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def copy(self):
        return SurrogateNet.from_dict(self.to_dict())


def _center_scale(bounds):
    lo, hi = float(bounds[0]), float(bounds[1])
    if hi <= lo:
        raise ConfigurationError(f"empty normalization range {bounds}")
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 30000
    batch_size: int = 256
    validation_fraction: float = 0.2
    patience: int = 500
    seed: int = 0
    # multiplicative learning-rate decay applied once per epoch
    lr_decay: float = 1.0
    min_learning_rate: float = 0.0
    # optional full-batch L-BFGS polish after the Adam phase
    lbfgs_iters: int = 0

    def validate(self):
        if self.learning_rate <= 0 or self.max_epochs < 0 or self.batch_size <= 0:
            raise ConfigurationError("learning rate, epochs and batch size must be positive")
        if not 0 < self.validation_fraction < 1:
            raise ConfigurationError("validation fraction must lie in (0, 1)")
        if self.patience <= 0:
            raise ConfigurationError("patience must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ConfigurationError("lr_decay must lie in (0, 1]")


@dataclass
class TrainResult:
    net: SurrogateNet
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_loss(self):
        return self.val_loss[self.best_epoch] if self.val_loss else math.nan


def train(net: SurrogateNet, samples, cfg: TrainConfig) -> TrainResult:
    """Fit ``net`` to ``(x, t, u)`` rows with mini-batch Adam and early stopping.

    Losses are mean squared errors in physical units of u.  The parameters of
    the epoch with the lowest validation loss are returned.
    """
    cfg.validate()
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 3 or samples.shape[0] < 2:
        raise StructuralError("training needs at least two (x, t, u) rows")
    net = net.copy()
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(samples.shape[0])
    n_val = max(1, int(round(cfg.validation_fraction * samples.shape[0])))
    val, trn = samples[order[:n_val]], samples[order[n_val:]]
    if trn.shape[0] == 0:
        trn = val

    def prepare(rows):
        xi, ti = net.normalize_inputs(rows[:, 0], rows[:, 1])
        return np.column_stack([xi, ti]), (rows[:, 2] - net.u_shift) / net.u_scale

    x_trn, y_trn = prepare(trn)
    x_val, y_val = prepare(val)
    to_phys = net.u_scale**2

    params = net._params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    lr = cfg.learning_rate

    result = TrainResult(net)
    best_val, best_params, stale = math.inf, [p.copy() for p in params], 0
    n_trn = x_trn.shape[0]
    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(n_trn)
        for start in range(0, n_trn, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            _, grads = net.loss_and_grad(x_trn[idx], y_trn[idx])
            step += 1
            corr1 = 1 - beta1**step
            corr2 = 1 - beta2**step
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g * g
                p -= lr * (mi / corr1) / (np.sqrt(vi / corr2) + eps)
        train_loss = _mse(net, x_trn, y_trn) * to_phys
        val_loss = _mse(net, x_val, y_val) * to_phys
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        result.train_loss.append(train_loss)
        result.val_loss.append(val_loss)
        if val_loss < best_val:
            best_val, stale = val_loss, 0
            best_params = [p.copy() for p in params]
            result.best_epoch = epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, result.best_epoch)
                break
        lr = max(lr * cfg.lr_decay, cfg.min_learning_rate)

    net._set_params(best_params)
    if cfg.lbfgs_iters > 0:
        _lbfgs_polish(net, x_trn, y_trn, x_val, y_val, cfg.lbfgs_iters, result, to_phys)
    result.net = net
    return result


def _mse(net, inputs, targets):
    h = inputs
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = _act(net.activation, h)
    r = h[:, 0] - targets
    return float(r @ r) / targets.shape[0]


def _lbfgs_polish(net, x_trn, y_trn, x_val, y_val, iters, result, to_phys):
    from scipy.optimize import minimize

    shapes = [p.shape for p in net._params()]
    sizes = [int(np.prod(s)) for s in shapes]

    def unpack(theta):
        out, pos = [], 0
        for shape, size in zip(shapes, sizes):
            out.append(theta[pos : pos + size].reshape(shape))
            pos += size
        return out

    def objective(theta):
        net._set_params(unpack(theta))
        loss, grads = net.loss_and_grad(x_trn, y_trn)
        return loss, np.concatenate([g.ravel() for g in grads])

    start = np.concatenate([p.ravel() for p in net._params()])
    before = _mse(net, x_val, y_val)
    res = minimize(objective, start, jac=True, method="L-BFGS-B",
                   options={"maxiter": iters, "gtol": 0.0, "ftol": 0.0})
    net._set_params(unpack(res.x))
    after = _mse(net, x_val, y_val)
    if not math.isfinite(after) or after > before:
        net._set_params(unpack(start))
        after = before
    result.train_loss.append(_mse(net, x_trn, y_trn) * to_phys)
    result.val_loss.append(after * to_phys)
    if after * to_phys <= result.val_loss[result.best_epoch]:
        result.best_epoch = len(result.val_loss) - 1


@dataclass
class MetaGridSpec:
    """Tensor grid of collocation points; ``*_endpoint`` includes the upper bound."""

    x_min: float
    x_max: float
    n_x: int
    t_min: float
    t_max: float
    n_t: int
    x_endpoint: bool = True
    t_endpoint: bool = True

    def axes(self):
        if self.n_x <= 0 or self.n_t <= 0:
            raise StructuralError("meta-data grid must have at least one node per axis")
        x = np.linspace(self.x_min, self.x_max, self.n_x, endpoint=self.x_endpoint)
        t = np.linspace(self.t_min, self.t_max, self.n_t, endpoint=self.t_endpoint)
        return x, t


SPATIAL_NAMES = ("u", "u_x", "u_xx", "u_xxx", "u_xxxx")
TEMPORAL_NAMES = ("u", "u_t", "u_tt")


@dataclass
class MetaDataset:
    """Collocation points with pure x- and t-derivative columns.

    ``spatial[:, k]`` is d^k u/dx^k and ``temporal[:, k]`` is d^k u/dt^k.
    """

    points: np.ndarray
    spatial: np.ndarray
    temporal: np.ndarray

    def __post_init__(self):
        if self.spatial.shape[0] != self.points.shape[0] or \
                self.temporal.shape[0] != self.points.shape[0]:
            raise StructuralError("jet arrays must have one row per point")

    def __len__(self):
        return self.points.shape[0]

    @property
    def max_spatial_order(self):
        return self.spatial.shape[1] - 1

    @property
    def max_temporal_order(self):
        return self.temporal.shape[1] - 1

    def jets(self):
        """One row per point: u, u_x, ..., then u_t, u_tt, ..."""
        return np.column_stack([self.spatial, self.temporal[:, 1:]])

    def column_names(self):
        names = [SPATIAL_NAMES[k] if k < len(SPATIAL_NAMES) else f"u_{'x' * k}"
                 for k in range(self.spatial.shape[1])]
        names += [f"u_{'t' * k}" for k in range(1, self.temporal.shape[1])]
        return names

    def subset(self, idx):
        return MetaDataset(self.points[idx], self.spatial[idx], self.temporal[idx])

    def save(self, path):
        np.savez(path, points=self.points, spatial=self.spatial, temporal=self.temporal)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            return cls(data["points"], data["spatial"], data["temporal"])


def generate_meta_data(net: SurrogateNet, grid: MetaGridSpec, x_order=4, t_order=2,
                       chunk=20000) -> MetaDataset:
    """Evaluate derivative jets of ``net`` at every node of ``grid``."""
    x, t = grid.axes()
    xx, tt = np.meshgrid(x, t, indexing="ij")
    xs, ts = xx.ravel(), tt.ravel()
    spatial = np.empty((xs.size, x_order + 1))
    temporal = np.empty((xs.size, t_order + 1))
    for start in range(0, xs.size, chunk):
        sl = slice(start, start + chunk)
        spatial[sl] = derivative_jets(net, xs[sl], ts[sl], "x", x_order).T
        temporal[sl] = derivative_jets(net, xs[sl], ts[sl], "t", t_order).T
    return MetaDataset(np.column_stack([xs, ts]), spatial, temporal)
