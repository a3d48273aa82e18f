"""Training loop for the neural models."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .chem import Molecule
from .corruption import CorruptionPolicy, build_eval_maskings, sample_corruption
from .metrics import evaluate
from .models import Model, NeuralModel, save_model
from .nn import Adam

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    n_corrupt: int = 1
    epsilon: float = 0.2
    seed: int = 0
    val_variants: int = 5
    checkpoint_every: int = 0  # epochs between snapshots; 0 disables

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.n_corrupt < 1 or self.val_variants < 1:
            raise ValueError("epochs, batch size, n_corrupt and val_variants must be positive")
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint cadence must be nonnegative")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_perplexity: float


@dataclass
class TrainResult:
    model: NeuralModel
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_perplexity"])
        for r in self.history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.val_perplexity)])
        return buf.getvalue()


def train(
    model: Model,
    train_set: Sequence[Molecule],
    val_set: Sequence[Molecule],
    cfg: TrainConfig = TrainConfig(),
    checkpoint_dir: str | Path | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Fit ``model`` by masked-atom cross-entropy; keeps the best-validation weights."""
    if not isinstance(model, NeuralModel):
        raise TypeError(f"{model.kind} is a count model; fit it in closed form")
    train_set = list(train_set)
    if not train_set:
        raise ValueError("empty training set")
    val_cms = build_eval_maskings(list(val_set), 1, cfg.val_variants, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters(), lr=cfg.lr)
    result = TrainResult(model)
    best_pp = math.inf
    best_state = model.state_dict()

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            cms = []
            for i in order[start : start + cfg.batch_size]:
                mol = train_set[i]
                policy = CorruptionPolicy(min(cfg.n_corrupt, mol.n_atoms), cfg.epsilon)
                cms.append(sample_corruption(mol, policy, rng))
            try:
                loss = model.loss(cms)
                loss.backward()
                opt.step()
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch}, batch starting {start}: {exc}") from exc
            losses.append(loss.item())
        pp = evaluate(model, val_cms).perplexity
        rec = EpochRecord(epoch, float(np.mean(losses)), pp)
        result.history.append(rec)
        log.info("epoch %d loss %.5f val-pp %.5f", epoch, rec.train_loss, pp)
        if on_epoch is not None:
            on_epoch(rec)
        if pp < best_pp:
            best_pp = pp
            best_state = model.state_dict()
            result.best_epoch = epoch
        if checkpoint_dir is not None and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_model(model, Path(checkpoint_dir) / f"epoch{epoch:04d}.ckpt")

    if result.best_epoch == 0:
        result.best_epoch = cfg.epochs
        best_state = model.state_dict()
    model.load_state_dict(best_state)
    return result
