"""Masking corruption and the epsilon-greedy corruption-count sampler."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chem import MASK_ID, Molecule


@dataclass(frozen=True, eq=False)
class CorruptedMolecule:
    base: Molecule
    masked: tuple[int, ...]
    labels: tuple[int, ...]

    @property
    def n_atoms(self) -> int:
        return self.base.n_atoms

    def restore(self) -> Molecule:
        atoms = self.base.atoms.copy()
        atoms[list(self.masked)] = self.labels
        return self.base.with_atoms(atoms)


@dataclass(frozen=True)
class CorruptionPolicy:
    n_corrupt: int = 1
    epsilon: float = 0.2

    def __post_init__(self) -> None:
        if self.n_corrupt < 1:
            raise ValueError("n_corrupt must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


def mask_atoms(mol: Molecule, indices: Sequence[int]) -> CorruptedMolecule:
    idx = tuple(sorted(int(i) for i in indices))
    if not idx:
        raise ValueError("empty mask index set")
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate mask indices")
    if idx[0] < 0 or idx[-1] >= mol.n_atoms:
        raise IndexError(f"mask index out of range for {mol.n_atoms} atoms")
    atoms = mol.atoms.copy()
    labels = tuple(int(a) for a in atoms[list(idx)])
    if MASK_ID in labels:
        raise ValueError("molecule is already masked at a requested index")
    atoms[list(idx)] = MASK_ID
    base = mol.with_atoms(atoms, allow_mask=True)
    return CorruptedMolecule(base, idx, labels)


def corruption_count_probs(n_atoms: int, policy: CorruptionPolicy) -> np.ndarray:
    """Probability of masking k atoms, for k = 1..n_atoms (index k-1)."""
    if policy.n_corrupt > n_atoms:
        raise ValueError(f"n_corrupt={policy.n_corrupt} exceeds molecule size {n_atoms}")
    p = np.full(n_atoms, policy.epsilon / n_atoms)
    p[policy.n_corrupt - 1] += 1.0 - policy.epsilon
    return p


def sample_corruption_count(n_atoms: int, policy: CorruptionPolicy, rng: np.random.Generator) -> int:
    if policy.n_corrupt > n_atoms:
        raise ValueError(f"n_corrupt={policy.n_corrupt} exceeds molecule size {n_atoms}")
    if rng.random() < policy.epsilon:
        return int(rng.integers(1, n_atoms + 1))
    return policy.n_corrupt


def sample_corruption(mol: Molecule, policy: CorruptionPolicy, rng: np.random.Generator) -> CorruptedMolecule:
    k = sample_corruption_count(mol.n_atoms, policy, rng)
    return mask_atoms(mol, rng.choice(mol.n_atoms, size=k, replace=False))


def enumerate_eval_maskings(
    mol: Molecule, n_corrupt: int, variants: int, rng: np.random.Generator
) -> list[CorruptedMolecule]:
    """Up to ``variants`` distinct maskings of exactly ``n_corrupt`` atoms."""
    n = mol.n_atoms
    if n_corrupt < 1 or n_corrupt > n:
        raise ValueError(f"n_corrupt={n_corrupt} invalid for molecule size {n}")
    if variants < 1:
        raise ValueError("variants must be positive")
    total = math.comb(n, n_corrupt)
    if total <= variants:
        sets = list(itertools.combinations(range(n), n_corrupt))
    else:
        seen: set[tuple[int, ...]] = set()
        sets = []
        while len(sets) < variants:
            s = tuple(sorted(int(i) for i in rng.choice(n, size=n_corrupt, replace=False)))
            if s not in seen:
                seen.add(s)
                sets.append(s)
    return [mask_atoms(mol, s) for s in sets]


def default_variants(n_corrupt: int) -> int:
    return 5 if n_corrupt == 1 else 1


def build_eval_maskings(
    mols: Sequence[Molecule], n_corrupt: int | str, variants: int | None = None, seed: int = 0
) -> list[CorruptedMolecule]:
    """Evaluation maskings for a whole set; ``n_corrupt`` is clamped to each size.

    ``n_corrupt="all"`` masks every atom.
    """
    if variants is None:
        variants = default_variants(n_corrupt) if n_corrupt != "all" else 1
    out: list[CorruptedMolecule] = []
    for i, mol in enumerate(mols):
        k = mol.n_atoms if n_corrupt == "all" else min(int(n_corrupt), mol.n_atoms)
        out.extend(enumerate_eval_maskings(mol, k, variants, np.random.default_rng([seed, i])))
    return out
