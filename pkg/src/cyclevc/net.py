"""Minimal feed-forward network engine.

Hand-rolled on purpose: generators, discriminators, and the baseline
regressors all share this one architecture family (sigmoid hidden layers,
linear output), and training needs exact parameter gradients plus the
gradient with respect to the input batch so losses can chain through a
second network (discriminator behind a generator, generator behind a
generator).

Mlp values are treated as immutable; apply_update returns fresh parameter
arrays rather than mutating in place.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatchError, FormatError, NonFiniteError


@dataclass(frozen=True)
class Mlp:
    """Layer widths plus per-layer weight matrices and bias vectors.

    weights[l] has shape (layer_dims[l+1], layer_dims[l]); forward computes
    a @ W.T + b per layer, sigmoid on hidden layers, linear output.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    hidden_activation: str = "sigmoid"
    output_activation: str = "linear"

    def __post_init__(self) -> None:
        if len(self.layer_dims) < 2:
            raise ValueError("an Mlp needs at least input and output widths")
        if any(d < 1 for d in self.layer_dims):
            raise ValueError(f"layer widths must be >= 1, got {self.layer_dims}")
        if self.hidden_activation != "sigmoid" or self.output_activation != "linear":
            raise ValueError("supported activations: sigmoid hidden, linear output")
        n = len(self.layer_dims) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise DimensionMismatchError(
                f"expected {n} weight/bias pairs, got {len(self.weights)}/{len(self.biases)}"
            )
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[layer + 1], self.layer_dims[layer])
            if w.shape != want:
                raise DimensionMismatchError(
                    f"weight {layer} has shape {w.shape}, expected {want}"
                )
            if b.shape != (self.layer_dims[layer + 1],):
                raise DimensionMismatchError(
                    f"bias {layer} has shape {b.shape}, expected ({self.layer_dims[layer + 1]},)"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NonFiniteError(f"layer {layer} parameters are not finite")

    @property
    def d_in(self) -> int:
        return self.layer_dims[0]

    @property
    def d_out(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Gradients:
    """Parameter gradients, shape-congruent with the owning Mlp."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(
            weights=tuple(a + b for a, b in zip(self.weights, other.weights)),
            biases=tuple(a + b for a, b in zip(self.biases, other.biases)),
        )

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            weights=tuple(factor * w for w in self.weights),
            biases=tuple(factor * b for b in self.biases),
        )

    def flat(self) -> np.ndarray:
        """All entries as one vector (weights then biases, layer order)."""
        parts = [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        return np.concatenate(parts)


@dataclass(frozen=True)
class ForwardCache:
    """Per-layer post-activations from one forward call (index 0 = input)."""

    activations: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class OptimizerState:
    """Adam or plain SGD state for one Mlp."""

    method: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m_weights: tuple[np.ndarray, ...] = ()
    m_biases: tuple[np.ndarray, ...] = ()
    v_weights: tuple[np.ndarray, ...] = ()
    v_biases: tuple[np.ndarray, ...] = ()
    step_count: int = 0

    def __post_init__(self) -> None:
        if self.method not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.step_count < 0:
            raise ValueError("step_count must be >= 0")


def init_optimizer(net: Mlp, method: str = "adam", learning_rate: float = 0.001,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8) -> OptimizerState:
    zeros_w = tuple(np.zeros_like(w) for w in net.weights)
    zeros_b = tuple(np.zeros_like(b) for b in net.biases)
    return OptimizerState(
        method=method, learning_rate=learning_rate,
        beta1=beta1, beta2=beta2, epsilon=epsilon,
        m_weights=zeros_w, m_biases=zeros_b,
        v_weights=zeros_w, v_biases=zeros_b,
    )


def init_mlp(layer_dims, seed: int) -> Mlp:
    """Seeded Glorot-uniform weights (plus/minus sqrt(6/(fan_in+fan_out))),
    zero biases. The same seed always produces bit-identical parameters."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError(f"need at least 2 layer widths, got {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer widths must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_dims=dims, weights=tuple(weights), biases=tuple(biases))


def forward(net: Mlp, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run a B x d_in batch through the net; also return the activation
    cache that backward needs."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.d_in:
        raise DimensionMismatchError(
            f"batch must be B x {net.d_in}, got shape {batch.shape}"
        )
    acts = [batch]
    a = batch
    last = net.n_layers - 1
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        a = z if layer == last else expit(z)
        acts.append(a)
    return a, ForwardCache(activations=tuple(acts))


def backward(
    net: Mlp, cache: ForwardCache, output_gradient: np.ndarray
) -> tuple[Gradients, np.ndarray]:
    """Exact backprop given d(loss)/d(output).

    Returns the parameter gradients and the gradient with respect to the
    input batch, which lets callers chain losses through stacked networks.
    """
    if len(cache.activations) != net.n_layers + 1:
        raise DimensionMismatchError(
            f"cache holds {len(cache.activations) - 1} layers, net has {net.n_layers}"
        )
    for layer, a in enumerate(cache.activations):
        if a.shape[1] != net.layer_dims[layer]:
            raise DimensionMismatchError(
                f"cache activation {layer} has width {a.shape[1]}, "
                f"net expects {net.layer_dims[layer]}"
            )
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.shape != cache.activations[-1].shape:
        raise DimensionMismatchError(
            f"output_gradient shape {g.shape} does not match "
            f"output shape {cache.activations[-1].shape}"
        )
    grad_w: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    last = net.n_layers - 1
    for layer in range(last, -1, -1):
        a_out = cache.activations[layer + 1]
        # Output layer is linear; hidden layers need sigmoid' = a(1-a).
        gz = g if layer == last else g * a_out * (1.0 - a_out)
        grad_w[layer] = gz.T @ cache.activations[layer]
        grad_b[layer] = gz.sum(axis=0)
        g = gz @ net.weights[layer]
    return Gradients(weights=tuple(grad_w), biases=tuple(grad_b)), g


def apply_update(
    net: Mlp, grads: Gradients, opt: OptimizerState
) -> tuple[Mlp, OptimizerState]:
    """One optimizer step; returns the updated Mlp and state.

    Raises NonFiniteError on NaN/inf gradients so a diverged training run
    aborts instead of silently corrupting the model.
    """
    if len(grads.weights) != net.n_layers or len(grads.biases) != net.n_layers:
        raise DimensionMismatchError("gradient layer count does not match net")
    for layer, (gw, gb) in enumerate(zip(grads.weights, grads.biases)):
        if gw.shape != net.weights[layer].shape or gb.shape != net.biases[layer].shape:
            raise DimensionMismatchError(f"gradient {layer} shape mismatch")
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise NonFiniteError(f"non-finite gradient in layer {layer}")

    lr = opt.learning_rate
    if opt.method == "sgd":
        new_w = tuple(w - lr * gw for w, gw in zip(net.weights, grads.weights))
        new_b = tuple(b - lr * gb for b, gb in zip(net.biases, grads.biases))
        return replace(net, weights=new_w, biases=new_b), opt

    t = opt.step_count + 1
    bc1 = 1.0 - opt.beta1**t
    bc2 = 1.0 - opt.beta2**t

    def adam(p, g, m, v):
        m = opt.beta1 * m + (1.0 - opt.beta1) * g
        v = opt.beta2 * v + (1.0 - opt.beta2) * g * g
        p = p - lr * (m / bc1) / (np.sqrt(v / bc2) + opt.epsilon)
        return p, m, v

    new_w, new_mw, new_vw = [], [], []
    for p, g, m, v in zip(net.weights, grads.weights, opt.m_weights, opt.v_weights):
        p, m, v = adam(p, g, m, v)
        new_w.append(p)
        new_mw.append(m)
        new_vw.append(v)
    new_b, new_mb, new_vb = [], [], []
    for p, g, m, v in zip(net.biases, grads.biases, opt.m_biases, opt.v_biases):
        p, m, v = adam(p, g, m, v)
        new_b.append(p)
        new_mb.append(m)
        new_vb.append(v)
    return (
        replace(net, weights=tuple(new_w), biases=tuple(new_b)),
        replace(
            opt,
            m_weights=tuple(new_mw), m_biases=tuple(new_mb),
            v_weights=tuple(new_vw), v_biases=tuple(new_vb),
            step_count=t,
        ),
    )


# ---------------------------------------------------------------------------
# Persistence: versioned text document, full-precision decimals
# ---------------------------------------------------------------------------

_MODEL_MAGIC = "MLP1"


def save_mlp(path, net: Mlp) -> None:
    """Write a text document that reloads to bit-identical parameters.

    repr() of a Python float is the shortest decimal that round-trips the
    exact 64-bit value, so no precision is lost.
    """
    lines = [
        _MODEL_MAGIC,
        "layer_dims " + " ".join(str(d) for d in net.layer_dims),
        f"hidden_activation {net.hidden_activation}",
        f"output_activation {net.output_activation}",
    ]
    for layer in range(net.n_layers):
        w = net.weights[layer]
        lines.append(f"weight {layer} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
        b = net.biases[layer]
        lines.append(f"bias {layer} {b.shape[0]}")
        lines.append(" ".join(repr(float(v)) for v in b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_mlp(path) -> Mlp:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MODEL_MAGIC:
        raise FormatError(f"{path}: not a {_MODEL_MAGIC} model file")
    try:
        fields = dict(line.split(" ", 1) for line in lines[1:4])
        dims = tuple(int(d) for d in fields["layer_dims"].split())
        hidden = fields["hidden_activation"]
        output = fields["output_activation"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model header") from exc

    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    pos = 4
    try:
        for layer in range(len(dims) - 1):
            tag, idx, rows, cols = lines[pos].split()
            if tag != "weight" or int(idx) != layer:
                raise FormatError(f"{path}: expected 'weight {layer}' at line {pos + 1}")
            rows, cols = int(rows), int(cols)
            block = lines[pos + 1 : pos + 1 + rows]
            weights.append(
                np.array([[float(v) for v in row.split()] for row in block])
            )
            pos += 1 + rows
            tag, idx, n = lines[pos].split()
            if tag != "bias" or int(idx) != layer:
                raise FormatError(f"{path}: expected 'bias {layer}' at line {pos + 1}")
            biases.append(np.array([float(v) for v in lines[pos + 1].split()]))
            pos += 2
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model body") from exc
    return Mlp(
        layer_dims=dims,
        weights=tuple(weights),
        biases=tuple(biases),
        hidden_activation=hidden,
        output_activation=output,
    )
