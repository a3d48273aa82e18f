"""Shared model interface and batching of corrupted molecules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..chem import MASK_ID, N_ELEMENTS
from ..corruption import CorruptedMolecule
from ..nn import Parameter
from ..nn import tensor as T


class ModelError(RuntimeError):
    pass


class Model:
    """Maps corrupted molecules to one element distribution per masked atom.

    ``predict`` returns, for each input, an array of shape
    ``(len(cm.masked), N_ELEMENTS)`` whose rows follow ``cm.masked`` order.
    """

    kind: str = ""
    trainable = False

    def predict(self, cms: Sequence[CorruptedMolecule]) -> list[np.ndarray]:
        raise NotImplementedError

    def predict_one(self, cm: CorruptedMolecule) -> np.ndarray:
        return self.predict([cm])[0]


@dataclass
class Batch:
    atoms: np.ndarray       # (B, n) vocabulary ids, padding filled with MASK_ID
    bonds: np.ndarray       # (B, n, n) bond orders, zero in padding
    valid: np.ndarray       # (B, n) True for real atoms
    mol_index: np.ndarray   # (M,) batch row of each masked atom
    flat_index: np.ndarray  # (M,) row into the flattened (B * n) atom axis
    targets: np.ndarray     # (M,) true element ids
    counts: list[int]       # masked atoms per molecule

    @property
    def size(self) -> int:
        return int(self.atoms.shape[0])

    @property
    def width(self) -> int:
        return int(self.atoms.shape[1])


def collate(cms: Sequence[CorruptedMolecule]) -> Batch:
    if not cms:
        raise ValueError("empty batch")
    B = len(cms)
    n = max(cm.n_atoms for cm in cms)
    atoms = np.full((B, n), MASK_ID, dtype=np.int64)
    bonds = np.zeros((B, n, n), dtype=np.int64)
    valid = np.zeros((B, n), dtype=bool)
    mol_index, flat_index, targets, counts = [], [], [], []
    for b, cm in enumerate(cms):
        k = cm.n_atoms
        atoms[b, :k] = cm.base.atoms
        bonds[b, :k, :k] = cm.base.bonds
        valid[b, :k] = True
        for i, lab in zip(cm.masked, cm.labels):
            mol_index.append(b)
            flat_index.append(b * n + i)
            targets.append(lab)
        counts.append(len(cm.masked))
    return Batch(
        atoms, bonds, valid,
        np.asarray(mol_index, dtype=np.int64),
        np.asarray(flat_index, dtype=np.int64),
        np.asarray(targets, dtype=np.int64),
        counts,
    )


def split_rows(rows: np.ndarray, counts: Sequence[int]) -> list[np.ndarray]:
    return np.split(rows, np.cumsum(counts)[:-1])


class NeuralModel(Model):
    """Base for models built from :class:`~molmask.nn.Parameter` tensors."""

    trainable = True
    predict_batch_size = 64

    def __init__(self) -> None:
        self.params: dict[str, Parameter] = {}

    def add_param(self, name: str, value: np.ndarray) -> Parameter:
        p = Parameter(value, name)
        self.params[name] = p
        return p

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self.params):
            missing = set(self.params) ^ set(state)
            raise ModelError(f"checkpoint parameters do not match model: {sorted(missing)}")
        for k, v in state.items():
            if v.shape != self.params[k].shape:
                raise ModelError(f"shape mismatch for {k}: {v.shape} vs {self.params[k].shape}")
            self.params[k].data = np.array(v, dtype=np.float64)

    def config(self) -> dict:
        raise NotImplementedError

    def logits(self, batch: Batch) -> T.Tensor:
        """Unnormalised scores of shape ``(M, N_ELEMENTS)`` for the masked atoms."""
        raise NotImplementedError

    def loss(self, cms: Sequence[CorruptedMolecule]) -> T.Tensor:
        batch = collate(cms)
        return T.masked_cross_entropy(self.logits(batch), batch.targets)

    def predict(self, cms: Sequence[CorruptedMolecule]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        step = self.predict_batch_size
        for start in range(0, len(cms), step):
            batch = collate(cms[start : start + step])
            with T.no_grad():
                z = self.logits(batch).data
            z = z - z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            out.extend(split_rows(p, batch.counts))
        return out


def linear(x: T.Tensor, w: Parameter, b: Parameter | None = None) -> T.Tensor:
    y = T.matmul(x, w)
    return y if b is None else T.add(y, b)


def check_output_width(w: Parameter) -> None:
    if w.shape[-1] != N_ELEMENTS:
        raise ModelError("output projection must have one column per element")
