"""Bag-of-vectors models over all atoms or over the masked atom's neighbours."""

from __future__ import annotations

import numpy as np

from ..chem import N_ELEMENTS, VOCAB
from ..nn import tensor as T
from ..nn.optim import uniform_init
from .base import Batch, NeuralModel, check_output_width, linear

MODES = ("atoms", "neighbors")


class BagOfVectorsModel(NeuralModel):
    """Sum of token embeddings fed through a relu network and a softmax head.

    In ``atoms`` mode the bag holds every token of the corrupted molecule
    (MASK included), so all masked atoms of a molecule share one prediction.
    In ``neighbors`` mode each masked atom gets the bag of its bonded
    neighbours; an atom without neighbours sees the zero vector.
    """

    def __init__(self, mode: str = "atoms", d_emb: int = 64, d_nn: int = 64, n_layers: int = 4, seed: int = 0):
        super().__init__()
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if n_layers < 1:
            raise ValueError("need at least one hidden layer")
        self.mode = mode
        self.d_emb, self.d_nn, self.n_layers, self.seed = d_emb, d_nn, n_layers, seed
        self.kind = f"bag-of-{mode}"
        rng = np.random.default_rng(seed)
        self.add_param("embedding", uniform_init(rng, (len(VOCAB), d_emb), d_emb))
        width = d_emb
        for i in range(n_layers):
            self.add_param(f"nn.{i}.weight", uniform_init(rng, (width, d_nn), width))
            self.add_param(f"nn.{i}.bias", np.zeros(d_nn))
            width = d_nn
        self.add_param("out.weight", uniform_init(rng, (d_nn, N_ELEMENTS), d_nn))
        check_output_width(self.params["out.weight"])

    def config(self) -> dict:
        return {"mode": self.mode, "d_emb": self.d_emb, "d_nn": self.d_nn, "n_layers": self.n_layers, "seed": self.seed}

    def bags(self, batch: Batch) -> T.Tensor:
        """Bag vectors of shape ``(M, d_emb)``, one per masked atom."""
        emb = T.embedding_lookup(self.params["embedding"], batch.atoms)  # (B, n, d)
        if self.mode == "atoms":
            pick = T.Tensor(batch.valid[:, None, :].astype(np.float64))
            bag = T.reshape(T.matmul(pick, emb), (batch.size, self.d_emb))
            return T.index_select(bag, batch.mol_index)
        adj = T.Tensor((batch.bonds > 0).astype(np.float64))
        bag = T.reshape(T.matmul(adj, emb), (batch.size * batch.width, self.d_emb))
        return T.index_select(bag, batch.flat_index)

    def logits(self, batch: Batch) -> T.Tensor:
        h = self.bags(batch)
        for i in range(self.n_layers):
            h = T.relu(linear(h, self.params[f"nn.{i}.weight"], self.params[f"nn.{i}.bias"]))
        return linear(h, self.params["out.weight"])
