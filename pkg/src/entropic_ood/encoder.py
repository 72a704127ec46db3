"""Feed-forward feature extractor and Nesterov SGD."""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ContractError, NumericalError, ShapeError

ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}


@dataclass(frozen=True)
class EncoderSpec:
    input_dim: int
    hidden_dims: tuple = ()
    feature_dim: int = 16
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.feature_dim)
        if any(d < 1 for d in dims):
            raise ContractError(f"all encoder dims must be >= 1, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {self.activation!r}")

    @property
    def layer_dims(self):
        dims = (self.input_dim, *self.hidden_dims, self.feature_dim)
        return list(zip(dims[:-1], dims[1:]))

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "feature_dim": self.feature_dim,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["input_dim"], tuple(d.get("hidden_dims", ())), d["feature_dim"], d.get("activation", "relu"))


def init_encoder(spec, rng):
    """Glorot-uniform weights (stored ``fan_in x fan_out``) and zero biases.

    Returns an ordered dict-like mapping ``{"enc.0.w": ..., "enc.0.b": ...}``.
    """
    params = {}
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"enc.{i}.w"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"enc.{i}.b"] = np.zeros((1, fan_out))
    return params


def encoder_forward(spec, params, x, tape):
    """Run the encoder on ``x`` (a Var or array). ``params`` maps names to Vars."""
    x = tape.lift(x)
    if x.shape[1] != spec.input_dim:
        raise ShapeError(f"encoder expects {spec.input_dim} input columns, got {x.shape[1]}")
    act = ACTIVATIONS[spec.activation]
    h = x
    n_layers = len(spec.layer_dims)
    for i in range(n_layers):
        h = h @ params[f"enc.{i}.w"] + params[f"enc.{i}.b"]
        if i < n_layers - 1:
            h = act(h)
    return h


@dataclass
class OptimizerState:
    learning_rate: float = 0.1
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 1e-4
    milestones: tuple = ()
    decay_factor: float = 10.0
    no_decay: frozenset = frozenset({"head.distance_scale"})
    velocity: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "nesterov": self.nesterov,
            "weight_decay": self.weight_decay,
            "milestones": list(self.milestones),
            "decay_factor": self.decay_factor,
            "no_decay": sorted(self.no_decay),
            "velocity": {k: v.tolist() for k, v in self.velocity.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            learning_rate=d["learning_rate"],
            momentum=d["momentum"],
            nesterov=d["nesterov"],
            weight_decay=d["weight_decay"],
            milestones=tuple(d.get("milestones", ())),
            decay_factor=d.get("decay_factor", 10.0),
            no_decay=frozenset(d.get("no_decay", ("head.distance_scale",))),
            velocity={k: np.array(v, dtype=np.float64) for k, v in d.get("velocity", {}).items()},
        )


def lr_at_epoch(state, epoch):
    """Initial rate divided by ``decay_factor`` once per milestone already reached."""
    passed = sum(1 for m in state.milestones if epoch >= m)
    return state.learning_rate / state.decay_factor**passed


def sgd_step(state, params, grads, lr=None):
    """One SGD update, in place on ``params``; returns ``params``.

    With Nesterov momentum ``mu``::

        d = g + wd * p
        v <- mu * v - lr * d
        p <- p + mu * v - lr * d

    Without Nesterov the last line is ``p <- p + v``. Parameters listed in
    ``state.no_decay`` skip weight decay.
    """
    lr = state.learning_rate if lr is None else lr
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name}")
        d = g if name in state.no_decay else g + state.weight_decay * p
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
        v = state.momentum * v - lr * d
        state.velocity[name] = v
        if state.nesterov:
            p += state.momentum * v - lr * d
        else:
            p += v
    return params
