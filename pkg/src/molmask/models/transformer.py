"""Graph transformer with bond-class embeddings on keys and values."""

from __future__ import annotations

import math

import numpy as np

from ..chem import N_ELEMENTS, VOCAB
from ..nn import tensor as T
from ..nn.optim import uniform_init
from .base import Batch, NeuralModel, check_output_width, linear

EDGE_MODES = {"binary": 2, "bond": 4}


class TransformerModel(NeuralModel):
    """Post-norm transformer whose attention spans every atom pair.

    Per head, with ``q = h W^Q``, ``k = h W^K``, ``v = h W^V``::

        score[i, j] = q_i . (k_j + eK[E_ij]) / sqrt(d_transform)
        out[i]      = sum_j softmax_j(score)[i, j] * (v_j + eV[E_ij])

    ``E`` is the bond-order matrix (``bond`` mode) or its 0/1 clamp
    (``binary`` mode). Class 0 ("no bond") has its own embedding because
    non-bonded pairs are attended too. Heads are concatenated and projected
    back to ``d_transform`` by ``W_multi``.
    """

    def __init__(
        self,
        edges: str = "bond",
        n_layers: int = 4,
        n_heads: int = 3,
        d_emb: int = 64,
        d_transform: int = 64,
        ffn_mult: int = 4,
        seed: int = 0,
    ):
        super().__init__()
        if edges not in EDGE_MODES:
            raise ValueError(f"edges must be one of {sorted(EDGE_MODES)}")
        if min(n_layers, n_heads, d_emb, d_transform, ffn_mult) < 1:
            raise ValueError("transformer sizes must be positive")
        self.edges = edges
        self.n_classes = EDGE_MODES[edges]
        self.n_layers, self.n_heads = n_layers, n_heads
        self.d_emb, self.d_transform, self.ffn_mult, self.seed = d_emb, d_transform, ffn_mult, seed
        self.kind = f"{edges}-transformer"

        rng = np.random.default_rng(seed)
        d, H = d_transform, n_heads
        self.add_param("atom_embedding", uniform_init(rng, (len(VOCAB), d_emb), d_emb))
        if d_emb != d:
            self.add_param("input.weight", uniform_init(rng, (d_emb, d), d_emb))
        for layer in range(n_layers):
            p = f"layer{layer}."
            for name in ("query", "key", "value"):
                self.add_param(p + name, uniform_init(rng, (d, H * d), d))
            self.add_param(p + "edge_key", uniform_init(rng, (self.n_classes, d), d))
            self.add_param(p + "edge_value", uniform_init(rng, (self.n_classes, d), d))
            self.add_param(p + "multi", uniform_init(rng, (H * d, d), H * d))
            self.add_param(p + "norm1.gain", np.ones(d))
            self.add_param(p + "norm1.bias", np.zeros(d))
            self.add_param(p + "ffn1.weight", uniform_init(rng, (d, ffn_mult * d), d))
            self.add_param(p + "ffn1.bias", np.zeros(ffn_mult * d))
            self.add_param(p + "ffn2.weight", uniform_init(rng, (ffn_mult * d, d), ffn_mult * d))
            self.add_param(p + "ffn2.bias", np.zeros(d))
            self.add_param(p + "norm2.gain", np.ones(d))
            self.add_param(p + "norm2.bias", np.zeros(d))
        self.add_param("out.weight", uniform_init(rng, (d, N_ELEMENTS), d))
        check_output_width(self.params["out.weight"])

    def config(self) -> dict:
        return {
            "edges": self.edges,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_emb": self.d_emb,
            "d_transform": self.d_transform,
            "ffn_mult": self.ffn_mult,
            "seed": self.seed,
        }

    def edge_classes(self, bonds: np.ndarray) -> np.ndarray:
        return np.minimum(bonds, 1) if self.edges == "binary" else bonds

    def _heads(self, x: T.Tensor, B: int, n: int) -> T.Tensor:
        # (B, n, H*d) -> (B, H, n, d)
        return T.transpose(T.reshape(x, (B, n, self.n_heads, self.d_transform)), (0, 2, 1, 3))

    def attention(self, h: T.Tensor, E: np.ndarray, key_mask: np.ndarray, layer: int) -> T.Tensor:
        P = self.params
        p = f"layer{layer}."
        B, n, d = h.shape
        q = self._heads(T.matmul(h, P[p + "query"]), B, n)
        k = self._heads(T.matmul(h, P[p + "key"]), B, n)
        v = self._heads(T.matmul(h, P[p + "value"]), B, n)
        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2)))
        edge_scores = T.class_gather(T.matmul(q, T.transpose(P[p + "edge_key"], (1, 0))), E)
        phi = T.scale(T.add(scores, edge_scores), 1.0 / math.sqrt(self.d_transform))
        alpha = T.softmax(phi, axis=-1, mask=key_mask)
        ctx = T.add(
            T.matmul(alpha, v),
            T.matmul(T.class_scatter(alpha, E, self.n_classes), P[p + "edge_value"]),
        )
        ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (B, n, self.n_heads * d))
        return T.matmul(ctx, P[p + "multi"])

    def _norm(self, x: T.Tensor, prefix: str) -> T.Tensor:
        return T.add(T.mul(T.layer_norm(x, axis=-1), self.params[prefix + ".gain"]), self.params[prefix + ".bias"])

    def encode(self, batch: Batch) -> T.Tensor:
        """Final hidden states ``h^L`` of shape ``(B, n, d_transform)``."""
        P = self.params
        h = T.embedding_lookup(P["atom_embedding"], batch.atoms)
        if "input.weight" in P:
            h = T.matmul(h, P["input.weight"])
        E = self.edge_classes(batch.bonds)
        key_mask = batch.valid[:, None, None, :]
        for layer in range(self.n_layers):
            p = f"layer{layer}."
            z = self._norm(T.add(h, self.attention(h, E, key_mask, layer)), p + "norm1")
            f = linear(T.relu(linear(z, P[p + "ffn1.weight"], P[p + "ffn1.bias"])), P[p + "ffn2.weight"], P[p + "ffn2.bias"])
            h = self._norm(T.add(z, f), p + "norm2")
        return h

    def logits(self, batch: Batch) -> T.Tensor:
        h = self.encode(batch)
        flat = T.reshape(h, (batch.size * batch.width, self.d_transform))
        return T.matmul(T.index_select(flat, batch.flat_index), self.params["out.weight"])
