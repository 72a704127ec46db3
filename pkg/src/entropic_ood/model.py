"""Encoder + head bundle and its JSON checkpoint format."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import numeric
from .calibration import CalibrationResult
from .encoder import EncoderSpec, OptimizerState, encoder_forward, init_encoder
from .heads import HeadParams, LossConfig, head_logits, inference_logits, init_head

CHECKPOINT_FORMAT = "entropic-ood-checkpoint/1"


@dataclass
class Model:
    spec: EncoderSpec
    loss_config: LossConfig
    num_classes: int
    params: dict
    optimizer_state: OptimizerState = None
    epoch: int = 0
    calibration: CalibrationResult = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def create(cls, spec, loss_config, num_classes, seed):
        rng = np.random.default_rng(seed)
        params = init_encoder(spec, rng)
        params.update(init_head(loss_config.kind, num_classes, spec.feature_dim, rng).as_dict())
        return cls(spec, loss_config, num_classes, params)

    @property
    def kind(self):
        return self.loss_config.kind

    @property
    def head(self):
        return HeadParams.from_dict(self.params)

    def forward(self, tape, x):
        """Record a forward pass; returns ``(param_vars, features, logits)``."""
        pv = {k: tape.leaf(v, name=k) for k, v in self.params.items()}
        feats = encoder_forward(self.spec, pv, x, tape)
        logits = head_logits(self.kind, HeadParams.from_dict(pv), feats, tape)
        return pv, feats, logits

    def features(self, x):
        tape = ad.Tape()
        pv = {k: tape.constant(v) for k, v in self.params.items()}
        return encoder_forward(self.spec, pv, numeric.as_matrix(x, "inputs"), tape).value

    def logits(self, x, features=None):
        f = self.features(x) if features is None else features
        return head_logits(self.kind, self.head, f)

    def inference_logits(self, x, features=None):
        return inference_logits(self.kind, self.loss_config, self.logits(x, features))

    def predict_proba(self, x, features=None):
        """Inference probabilities: entropic scale removed, temperature applied."""
        return numeric.stable_softmax(self.inference_logits(x, features))

    def predict(self, x):
        return np.argmax(self.logits(x), axis=1)

    # -- checkpoint ---------------------------------------------------------

    def to_dict(self):
        return {
            "format": CHECKPOINT_FORMAT,
            "spec": self.spec.to_dict(),
            "loss_config": self.loss_config.to_dict(),
            "num_classes": self.num_classes,
            "params": {k: v.tolist() for k, v in self.params.items()},
            "optimizer_state": None if self.optimizer_state is None else self.optimizer_state.to_dict(),
            "epoch": self.epoch,
            "calibration": None if self.calibration is None else self.calibration.to_dict(),
            **self.extra,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"format", "spec", "loss_config", "num_classes", "params", "optimizer_state", "epoch", "calibration"}
        return cls(
            spec=EncoderSpec.from_dict(d["spec"]),
            loss_config=LossConfig.from_dict(d["loss_config"]),
            num_classes=d["num_classes"],
            params={k: np.array(v, dtype=np.float64) for k, v in d["params"].items()},
            optimizer_state=None if d.get("optimizer_state") is None else OptimizerState.from_dict(d["optimizer_state"]),
            epoch=d.get("epoch", 0),
            calibration=None if d.get("calibration") is None else CalibrationResult.from_dict(d["calibration"]),
            extra={k: v for k, v in d.items() if k not in known},
        )

    def save(self, path):
        # json writes floats with repr(), the shortest string that round-trips exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not an entropic-ood checkpoint")
        return cls.from_dict(d)
