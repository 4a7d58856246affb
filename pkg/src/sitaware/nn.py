"""Small fully connected regression networks.

Each layer is stored as a ``(fan_in + 1, fan_out)`` matrix whose row 0
holds the intercepts.  Hidden units are logistic; the output head is
affine (``output_linear=True``) or logistic.  Training minimizes
``E = 0.5 * sum((yhat - y)**2)`` with full-batch resilient propagation
(weight backtracking variant) and stops once the largest absolute partial
derivative drops below ``threshold``.

The flat parameter order used everywhere (initialization, training,
``result_matrix``) is: layers in order, each layer flattened column-major,
i.e. per destination neuron the intercept followed by its incoming weights.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    SchemaError,
    ShapeError,
    TrainingDivergedError,
    UnsupportedModeError,
)

ALGORITHMS = ("rprop+", "backprop")

# resilient propagation constants
STEP_INIT = 0.1
STEP_GROW = 1.2
STEP_SHRINK = 0.5
STEP_MIN = 1e-6
STEP_MAX = 50.0


@dataclass(frozen=True)
class NetConfig:
    n_inputs: int
    hidden_sizes: tuple = ()
    n_outputs: int = 1
    output_linear: bool = True
    threshold: float = 0.01
    step_max: int = 100000
    seed: int = 42
    algorithm: str = "rprop+"
    learning_rate: float = 0.01
    hidden_activation: str = field(default="logistic")

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        sizes = self.layer_sizes
        if any(s < 1 for s in sizes):
            raise ShapeError(f"all layer sizes must be >= 1, got {sizes}")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.step_max < 1:
            raise ValueError("step_max must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.hidden_activation != "logistic":
            raise UnsupportedModeError("only logistic hidden units are supported")

    @property
    def layer_sizes(self):
        return (self.n_inputs, *self.hidden_sizes, self.n_outputs)

    @property
    def shapes(self):
        s = self.layer_sizes
        return [(a + 1, b) for a, b in zip(s[:-1], s[1:])]

    @property
    def parameter_count(self):
        return sum(r * c for r, c in self.shapes)

    def to_dict(self):
        return {
            "n_inputs": self.n_inputs,
            "hidden_sizes": list(self.hidden_sizes),
            "n_outputs": self.n_outputs,
            "hidden_activation": self.hidden_activation,
            "output_linear": self.output_linear,
            "threshold": self.threshold,
            "step_max": self.step_max,
            "seed": self.seed,
            "algorithm": self.algorithm,
            "learning_rate": self.learning_rate,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


def parameter_count(n_inputs, hidden_sizes, n_outputs=1):
    sizes = (n_inputs, *hidden_sizes, n_outputs)
    return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))


def _views(flat, shapes):
    out, i = [], 0
    for r, c in shapes:
        out.append(flat[i : i + r * c].reshape((r, c), order="F"))
        i += r * c
    return out


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple
    config: NetConfig

    def __post_init__(self):
        layers = tuple(np.array(w, dtype=float) for w in self.layers)
        expected = self.config.shapes
        got = [w.shape for w in layers]
        if got != expected:
            raise ShapeError(f"layer shapes {got} do not chain as {expected}")
        for w in layers:
            w.setflags(write=False)
        object.__setattr__(self, "layers", layers)

    @property
    def parameter_count(self):
        return sum(w.size for w in self.layers)

    def flat(self):
        return np.concatenate([w.ravel(order="F") for w in self.layers])

    @classmethod
    def from_flat(cls, config, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.size != config.parameter_count:
            raise ShapeError(f"need {config.parameter_count} parameters, got {flat.size}")
        return cls(tuple(v.copy() for v in _views(flat, config.shapes)), config)


def init_network(config):
    """Standard normal weights and intercepts from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    return Network.from_flat(config, rng.standard_normal(config.parameter_count))


def _logistic(z):
    # tanh form avoids exp overflow; exact 0.5 at z == 0
    return 0.5 + 0.5 * np.tanh(0.5 * z)


def _activations(layers, X, output_linear):
    acts = [X]
    last = len(layers) - 1
    for i, W in enumerate(layers):
        z = acts[-1] @ W[1:] + W[0]
        acts.append(z if (i == last and output_linear) else _logistic(z))
    return acts


def _as_batch(X, p):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != p:
        raise ShapeError(f"expected {p} inputs, got {X.shape[1]}")
    return X


def forward(network, x):
    """Network output for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != network.config.n_inputs:
        raise ShapeError(f"expected {network.config.n_inputs} inputs, got shape {x.shape}")
    return _activations(network.layers, x.reshape(1, -1), network.config.output_linear)[-1][0]


def predict(network, X):
    X = _as_batch(X, network.config.n_inputs)
    return _activations(network.layers, X, network.config.output_linear)[-1]


def _targets(network, data):
    if data.y is None:
        raise SchemaError("dataset has no target column")
    X = _as_batch(data.X, network.config.n_inputs)
    Y = np.asarray(data.y, dtype=float).reshape(X.shape[0], -1)
    if Y.shape[1] != network.config.n_outputs:
        raise ShapeError(f"target has {Y.shape[1]} columns, network {network.config.n_outputs}")
    return X, Y


def _loss_grad(layers, grads, X, Y, output_linear):
    """Fill ``grads`` in place with dE/dW; return E."""
    acts = _activations(layers, X, output_linear)
    resid = acts[-1] - Y
    loss = 0.5 * float(np.sum(resid * resid))
    delta = resid if output_linear else resid * acts[-1] * (1.0 - acts[-1])
    for i in range(len(layers) - 1, -1, -1):
        a = acts[i]
        grads[i][1:] = a.T @ delta
        grads[i][0] = delta.sum(axis=0)
        if i:
            delta = (delta @ layers[i][1:].T) * a * (1.0 - a)
    return loss


def loss_sse(network, data):
    X, Y = _targets(network, data)
    r = predict(network, X) - Y
    return 0.5 * float(np.sum(r * r))


def gradients(network, data):
    """Exact dE/dW, shaped like ``network.layers``."""
    X, Y = _targets(network, data)
    grads = [np.zeros_like(w) for w in network.layers]
    _loss_grad(network.layers, grads, X, Y, network.config.output_linear)
    return grads


@dataclass(frozen=True, eq=False)
class TrainResult:
    network: Network
    error: float
    reached_threshold: float
    steps: int
    converged: bool
    initial_error: float = float("nan")

    def stats(self):
        return {
            "error": self.error,
            "reached_threshold": self.reached_threshold,
            "steps": self.steps,
            "converged": self.converged,
            "seed": self.network.config.seed,
        }


def train(config, data):
    """Fit a freshly initialized network to ``data``.

    ``steps`` counts gradient evaluations, the one at the initial weights
    included, so a run with ``step_max=1`` performs no update.
    """
    # overflow surfaces as a non-finite loss and is reported as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        return _fit(config, data)


def _fit(config, data):
    net0 = init_network(config)
    X, Y = _targets(net0, data)
    shapes = config.shapes
    w = net0.flat()
    g = np.zeros_like(w)
    W = _views(w, shapes)
    G = _views(g, shapes)
    lin = config.output_linear

    loss = _loss_grad(W, G, X, Y, lin)
    if not np.isfinite(loss):
        raise TrainingDivergedError(1)
    initial = loss
    reached = float(np.max(np.abs(g)))
    step = 1

    if config.algorithm == "rprop+":
        rate = np.full_like(w, STEP_INIT)
        prev_sign = np.zeros_like(w)
        while step < config.step_max and not reached < config.threshold:
            sign = np.sign(g)
            agree = prev_sign * sign
            neg = agree < 0
            old_rate = rate
            rate = np.where(
                agree > 0,
                np.minimum(rate * STEP_GROW, STEP_MAX),
                np.where(neg, np.maximum(rate * STEP_SHRINK, STEP_MIN), rate),
            )
            # on a sign flip, undo the previous move instead of stepping
            w += np.where(neg, prev_sign * old_rate, -sign * rate)
            prev_sign = np.where(neg, 0.0, sign)
            loss = _loss_grad(W, G, X, Y, lin)
            step += 1
            if not np.isfinite(loss):
                raise TrainingDivergedError(step)
            reached = float(np.max(np.abs(g)))
    else:
        lr = config.learning_rate
        while step < config.step_max and not reached < config.threshold:
            w -= lr * g
            loss = _loss_grad(W, G, X, Y, lin)
            step += 1
            if not np.isfinite(loss):
                raise TrainingDivergedError(step)
            reached = float(np.max(np.abs(g)))

    return TrainResult(
        network=Network.from_flat(config, w),
        error=float(loss),
        reached_threshold=reached,
        steps=step,
        converged=bool(reached < config.threshold),
        initial_error=float(initial),
    )


def generalized_weights(network, data):
    """Per-observation sensitivities d yhat_i / d x_ij, shape (n, n_inputs)."""
    cfg = network.config
    if not cfg.output_linear or cfg.n_outputs != 1:
        raise UnsupportedModeError("generalized weights need a single linear output")
    X = _as_batch(data.X, cfg.n_inputs)
    acts = _activations(network.layers, X, True)
    g = np.ones((X.shape[0], 1))
    for i in range(len(network.layers) - 1, -1, -1):
        g = g @ network.layers[i][1:].T
        if i:
            g = g * acts[i] * (1.0 - acts[i])
    return g


def result_matrix(result):
    head = [float(result.error), float(result.reached_threshold), float(result.steps)]
    return np.concatenate([head, result.network.flat()])


def network_from_result_matrix(config, vector):
    vector = np.asarray(vector, dtype=float)
    return Network.from_flat(config, vector[3:])


def weight_names(config, feature_names=None, target_names=None):
    """Labels for the flat parameter vector, e.g. ``x1.to.1layhid2``."""
    inputs = list(feature_names or [f"x{i + 1}" for i in range(config.n_inputs)])
    outputs = list(target_names or [f"y{i + 1}" if config.n_outputs > 1 else "Y" for i in range(config.n_outputs)])
    hidden = [[f"{l + 1}layhid{j + 1}" for j in range(h)] for l, h in enumerate(config.hidden_sizes)]
    units = [inputs, *hidden, outputs]
    names = []
    for src, dst in zip(units[:-1], units[1:]):
        for d in dst:
            names.append(f"Intercept.to.{d}")
            names.extend(f"{s}.to.{d}" for s in src)
    return names


def model_to_dict(result, feature_names=None, target_name=None):
    net = result.network
    return {
        "config": net.config.to_dict(),
        "feature_names": list(feature_names) if feature_names else None,
        "target_name": target_name,
        "layers": [w.tolist() for w in net.layers],
        "train_stats": result.stats(),
    }


def model_from_dict(obj):
    config = NetConfig.from_dict(obj["config"])
    net = Network(tuple(np.array(w, dtype=float) for w in obj["layers"]), config)
    s = obj.get("train_stats", {})
    result = TrainResult(
        net,
        float(s.get("error", float("nan"))),
        float(s.get("reached_threshold", float("nan"))),
        int(s.get("steps", 0)),
        bool(s.get("converged", False)),
    )
    return result, obj.get("feature_names"), obj.get("target_name")


def with_seed(config, seed):
    return replace(config, seed=int(seed))
