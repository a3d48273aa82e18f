"""Model ladder: count baselines, bag-of-vectors and graph transformers."""

from __future__ import annotations

import json
from pathlib import Path

from ..chem import VOCAB
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from .bag import BagOfVectorsModel
from .base import Model, ModelError, NeuralModel
from .counting import OctetRuleUnigramModel, UnigramModel, mean_cross_entropy, tune_k
from .transformer import TransformerModel

COUNT_KINDS = ("unigram", "octet-unigram")
NEURAL_KINDS = ("bag-of-atoms", "bag-of-neighbors", "binary-transformer", "bond-transformer")
MODEL_KINDS = COUNT_KINDS + NEURAL_KINDS


def build_neural(kind: str, **config) -> NeuralModel:
    """Fresh neural model of ``kind``; ``config`` overrides the default sizes."""
    if kind in ("bag-of-atoms", "bag-of-neighbors"):
        config.setdefault("mode", kind.removeprefix("bag-of-"))
        return BagOfVectorsModel(**config)
    if kind in ("binary-transformer", "bond-transformer"):
        config.setdefault("edges", kind.removesuffix("-transformer"))
        return TransformerModel(**config)
    raise ModelError(f"unknown neural model kind {kind!r}")


def save_model(model: Model, path: str | Path) -> None:
    path = Path(path)
    if isinstance(model, NeuralModel):
        manifest = {"kind": model.kind, "config": model.config(), "vocabulary": list(VOCAB), "format": 1}
        save_checkpoint(path, manifest, model.state_dict())
    elif isinstance(model, (UnigramModel, OctetRuleUnigramModel)):
        path.write_text(json.dumps(model.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        raise ModelError(f"cannot serialise {type(model).__name__}")


def load_model(path: str | Path) -> Model:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open("rb") as fh:
        head = fh.read(2)
    if head == b"PK":
        manifest, params = load_checkpoint(path)
        if manifest.get("vocabulary") != list(VOCAB):
            raise ModelError("checkpoint vocabulary does not match this build")
        model = build_neural(manifest["kind"], **manifest["config"])
        model.load_state_dict(params)
        return model
    obj = json.loads(path.read_text(encoding="utf-8"))
    if obj.get("elements") != list(VOCAB[:-1]):
        raise ModelError("count model vocabulary does not match this build")
    if obj["kind"] == "unigram":
        return UnigramModel.from_json(obj)
    if obj["kind"] == "octet-unigram":
        return OctetRuleUnigramModel.from_json(obj)
    raise ModelError(f"unknown model kind {obj['kind']!r}")


__all__ = [
    "BagOfVectorsModel",
    "COUNT_KINDS",
    "MODEL_KINDS",
    "Model",
    "ModelError",
    "NEURAL_KINDS",
    "NeuralModel",
    "OctetRuleUnigramModel",
    "TransformerModel",
    "UnigramModel",
    "build_neural",
    "load_model",
    "mean_cross_entropy",
    "save_model",
    "tune_k",
]
