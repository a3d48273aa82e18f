"""Closed-form count models: unigram and the octet-rule unigram baseline."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..chem import ELEMENTS, N_ELEMENTS, VALENCE_BY_ID
from ..corruption import CorruptedMolecule, CorruptionPolicy, build_eval_maskings
from ..dataset import Dataset, element_counts
from .base import Model, ModelError

UNIFORM = np.full(N_ELEMENTS, 1.0 / N_ELEMENTS)


class UnigramModel(Model):
    kind = "unigram"

    def __init__(self, counts: np.ndarray | None = None):
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)

    @classmethod
    def fit(cls, train: Dataset) -> "UnigramModel":
        return cls(element_counts(train))

    @property
    def distribution(self) -> np.ndarray:
        if self.counts is None:
            raise ModelError("unigram model is not fitted")
        return self.counts / self.counts.sum()

    def predict(self, cms: Sequence[CorruptedMolecule]) -> list[np.ndarray]:
        p = self.distribution
        return [np.tile(p, (len(cm.masked), 1)) for cm in cms]

    def to_json(self) -> dict:
        return {"kind": self.kind, "elements": list(ELEMENTS), "counts": [int(c) for c in self.counts]}

    @classmethod
    def from_json(cls, obj: dict) -> "UnigramModel":
        return cls(np.asarray(obj["counts"], dtype=np.int64))


class OctetRuleUnigramModel(Model):
    """Unigram restricted to the valence group matching the masked atom's bond count.

    For a bond count ``b`` in 1..4 the probability of element ``a`` is
    proportional to ``count(a) * [valence(a) == b] + k``. Other bond counts,
    and groups with no training mass when ``k == 0``, get the uniform
    distribution.
    """

    kind = "octet-unigram"

    def __init__(self, counts: np.ndarray | None = None, k: float = 0.0):
        if k < 0:
            raise ValueError("smoothing constant k must be nonnegative")
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)
        self.k = float(k)

    @classmethod
    def fit(cls, train: Dataset, k: float = 0.0) -> "OctetRuleUnigramModel":
        return cls(element_counts(train), k)

    def conditional(self, b: int) -> np.ndarray:
        if self.counts is None:
            raise ModelError("octet-rule unigram model is not fitted")
        if not 1 <= b <= 4:
            return UNIFORM.copy()
        w = np.where(VALENCE_BY_ID == b, self.counts, 0).astype(np.float64) + self.k
        total = w.sum()
        if total == 0:
            return UNIFORM.copy()
        return w / total

    def conditional_table(self) -> np.ndarray:
        """Rows are bond counts 0..6."""
        return np.stack([self.conditional(b) for b in range(7)])

    def predict(self, cms: Sequence[CorruptedMolecule]) -> list[np.ndarray]:
        table = self.conditional_table()
        out = []
        for cm in cms:
            b = cm.base.bonds.sum(axis=1)[list(cm.masked)]
            out.append(np.stack([table[x] if x < 7 else UNIFORM for x in b]))
        return out

    def with_k(self, k: float) -> "OctetRuleUnigramModel":
        return OctetRuleUnigramModel(self.counts, k)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "elements": list(ELEMENTS),
            "counts": [int(c) for c in self.counts],
            "k": self.k,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OctetRuleUnigramModel":
        return cls(np.asarray(obj["counts"], dtype=np.int64), obj.get("k", 0.0))


def mean_cross_entropy(model: Model, cms: Sequence[CorruptedMolecule]) -> float:
    """Mean negative log-probability of the true labels (``inf`` on a zero)."""
    total = 0.0
    count = 0
    with np.errstate(divide="ignore"):
        for cm, p in zip(cms, model.predict(cms)):
            total -= np.log(p[np.arange(len(cm.labels)), list(cm.labels)]).sum()
            count += len(cm.labels)
    return float(total / count)


def k_grid(lo: float = 1e-2, hi: float = 1e5, points: int = 50) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), points)


def tune_k(
    model: OctetRuleUnigramModel,
    validation: Dataset | Sequence,
    policy: CorruptionPolicy = CorruptionPolicy(),
    grid: Sequence[float] | None = None,
    seed: int = 0,
) -> tuple[float, list[tuple[float, float]]]:
    """Pick the smoothing constant minimising validation cross-entropy.

    Returns the chosen ``k`` and the full ``(k, cross_entropy)`` table. Ties
    go to the smaller ``k``.
    """
    mols = list(validation)
    if not mols:
        raise ValueError("empty validation set")
    grid = sorted(k_grid() if grid is None else grid)
    cms = build_eval_maskings(mols, policy.n_corrupt, seed=seed)
    table = [(float(k), mean_cross_entropy(model.with_k(k), cms)) for k in grid]
    best_k, best_ce = table[0]
    for k, ce in table[1:]:
        if ce < best_ce:
            best_k, best_ce = k, ce
    return best_k, table
