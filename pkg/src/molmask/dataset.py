"""Datasets, splits, element statistics and the synthetic molecule generator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .chem import ELEMENT_ID, ELEMENTS, VALENCE, Molecule, octet_check


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    molecules: tuple[Molecule, ...]
    name: str = "dataset"

    def __post_init__(self) -> None:
        object.__setattr__(self, "molecules", tuple(self.molecules))
        if not self.molecules:
            raise ValueError(f"dataset {self.name!r} is empty")

    def __len__(self) -> int:
        return len(self.molecules)

    def __iter__(self):
        return iter(self.molecules)

    def __getitem__(self, i: int) -> Molecule:
        return self.molecules[i]

    def octet_only(self) -> "Dataset":
        """Keep only molecules whose every atom satisfies its standard valence."""
        return Dataset([m for m in self.molecules if octet_check(m).all_satisfied], f"{self.name}-octet")


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.70
    validation: float = 0.15
    test: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train, self.validation, self.test)
        if not all(0.0 < f < 1.0 for f in fracs):
            raise ValueError("split fractions must lie in (0, 1)")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise ValueError(f"split fractions sum to {sum(fracs)}, not 1")


def split(ds: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset, Dataset]:
    n = len(ds)
    if n < 3:
        raise ValueError("need at least 3 molecules to split")
    n_val = round(spec.validation * n)
    n_test = round(spec.test * n)
    n_train = n - n_val - n_test
    perm = np.random.default_rng(spec.seed).permutation(n)
    mols = ds.molecules
    parts = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])
    names = ("train", "validation", "test")
    return tuple(Dataset([mols[i] for i in idx], f"{ds.name}-{nm}") for idx, nm in zip(parts, names))


def element_counts(ds: Dataset | Sequence[Molecule]) -> np.ndarray:
    counts = np.zeros(len(ELEMENTS), dtype=np.int64)
    for mol in ds:
        counts += np.bincount(mol.atoms, minlength=len(ELEMENTS))[: len(ELEMENTS)]
    return counts


def element_frequencies(ds: Dataset | Sequence[Molecule]) -> dict[str, float]:
    counts = element_counts(ds)
    total = counts.sum()
    if total == 0:
        raise ValueError("no atoms to count")
    return {sym: float(counts[i] / total) for i, sym in enumerate(ELEMENTS)}


def frequency_csv(ds: Dataset) -> str:
    counts = element_counts(ds)
    total = counts.sum()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["element", "count", "probability"])
    for i, sym in enumerate(ELEMENTS):
        w.writerow([sym, int(counts[i]), repr(float(counts[i] / total))])
    return buf.getvalue()


# --- synthetic generator ----------------------------------------------------

OCTET_WEIGHTS = {"C": 0.72, "N": 0.11, "O": 0.16, "F": 0.01}
EXTENDED_WEIGHTS = {
    "C": 0.66, "N": 0.11, "O": 0.12, "F": 0.03, "S": 0.03,
    "Cl": 0.02, "Br": 0.01, "P": 0.01, "I": 0.01,
}

# Non-octet centres and their fixed pendant oxygens: (element, total bond order,
# pendant bond orders). A pendant of order 1 is an oxygen carrying one bond.
MOTIFS: dict[str, tuple[str, int, tuple[int, ...]]] = {
    "N4": ("N", 4, (1,)),        # amine oxide N(+)-O(-)
    "S4": ("S", 4, (2, 1)),      # sulfinate S(=O)O(-)
    "S6": ("S", 6, (2, 2)),      # sulfone S(=O)(=O)
    "P5": ("P", 5, (2,)),        # phosphine oxide P=O
}
DEFAULT_MOTIF_WEIGHTS = {"N4": 0.02, "S4": 0.01, "S6": 0.01, "P5": 0.005}


@dataclass(frozen=True)
class GeneratorConfig:
    count: int = 2000
    min_heavy: int = 3
    max_heavy: int = 12
    element_weights: Mapping[str, float] = field(default_factory=lambda: dict(OCTET_WEIGHTS))
    mode: str = "octet"
    # extended mode: per-skeleton-slot weights of non-octet centres, on the
    # same scale as element_weights
    motif_weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_MOTIF_WEIGHTS))
    bond_order_weights: tuple[float, float, float] = (0.80, 0.15, 0.05)
    ring_probability: float = 0.3
    max_retries: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be positive")
        if not 1 <= self.min_heavy <= self.max_heavy:
            raise ValueError("heavy-atom range must satisfy 1 <= min <= max")
        if self.mode not in ("octet", "extended"):
            raise ValueError(f"unknown generator mode {self.mode!r}")
        for sym, w in self.element_weights.items():
            if sym not in VALENCE or sym == "H":
                raise ValueError(f"invalid heavy element {sym!r}")
            if w < 0:
                raise ValueError("element weights must be nonnegative")
        if sum(self.element_weights.values()) <= 0:
            raise ValueError("element weights are all zero")
        for key, w in self.motif_weights.items():
            if key not in MOTIFS or w < 0:
                raise ValueError(f"invalid motif weight {key}={w}")


def _slot_table(cfg: GeneratorConfig) -> tuple[list[tuple[str, int, tuple[int, ...]]], np.ndarray]:
    slots = [(sym, VALENCE[sym], ()) for sym in cfg.element_weights]
    weights = list(cfg.element_weights.values())
    if cfg.mode == "extended":
        for key, w in cfg.motif_weights.items():
            if w > 0:
                slots.append(MOTIFS[key])
                weights.append(w)
    p = np.asarray(weights, dtype=float)
    return slots, p / p.sum()


def _sample_order(rng: np.random.Generator, cap: int, weights: np.ndarray) -> int:
    w = weights[:cap]
    return int(rng.choice(cap, p=w / w.sum())) + 1


def _try_generate(rng: np.random.Generator, cfg: GeneratorConfig, slots, slot_p) -> Molecule | None:
    n_slots = int(rng.integers(cfg.min_heavy, cfg.max_heavy + 1))
    chosen = [slots[k] for k in rng.choice(len(slots), size=n_slots, p=slot_p)]
    bo_w = np.asarray(cfg.bond_order_weights, dtype=float)

    symbols = [c[0] for c in chosen]
    remaining = [c[1] for c in chosen]
    edges: dict[tuple[int, int], int] = {}

    def bond(i: int, j: int, order: int) -> None:
        edges[(min(i, j), max(i, j))] = order
        remaining[i] -= order
        remaining[j] -= order

    # pendant oxygens of motif centres; they are closed once attached
    for i, (_, _, pendants) in enumerate(chosen):
        for order in pendants:
            symbols.append("O")
            remaining.append(order)
            bond(i, len(symbols) - 1, order)

    # random spanning tree over the skeleton slots
    for k in range(1, n_slots):
        if remaining[k] < 1:
            return None
        hosts = [i for i in range(k) if remaining[i] >= 1]
        if not hosts:
            return None
        host = hosts[int(rng.integers(len(hosts)))]
        bond(host, k, _sample_order(rng, min(remaining[host], remaining[k], 3), bo_w))

    if n_slots > 2 and rng.random() < cfg.ring_probability:
        open_pairs = [
            (i, j)
            for i in range(n_slots)
            for j in range(i + 1, n_slots)
            if (i, j) not in edges and remaining[i] >= 1 and remaining[j] >= 1
        ]
        if open_pairs:
            i, j = open_pairs[int(rng.integers(len(open_pairs)))]
            bond(i, j, _sample_order(rng, min(remaining[i], remaining[j], 3), bo_w))

    for i in range(len(symbols)):
        for _ in range(remaining[i]):
            symbols.append("H")
            edges[(i, len(symbols) - 1)] = 1
        remaining[i] = 0

    n = len(symbols)
    if n == 1:
        return None
    bonds = np.zeros((n, n), dtype=np.int64)
    for (i, j), o in edges.items():
        bonds[i, j] = bonds[j, i] = o
    return Molecule(np.array([ELEMENT_ID[s] for s in symbols]), bonds)


def generate_molecule(cfg: GeneratorConfig, index: int) -> Molecule:
    """Generate molecule ``index`` from its own deterministic RNG stream."""
    rng = np.random.default_rng([cfg.seed, index])
    slots, slot_p = _slot_table(cfg)
    for _ in range(cfg.max_retries):
        mol = _try_generate(rng, cfg, slots, slot_p)
        if mol is not None:
            return mol.with_atoms(mol.atoms, source_id=f"syn-{cfg.seed}-{index}")
    raise GenerationError(
        f"could not build molecule {index} within {cfg.max_retries} retries; "
        "check heavy-atom range and element weights"
    )


def generate_synthetic(cfg: GeneratorConfig) -> Dataset:
    mols = [generate_molecule(cfg, i) for i in range(cfg.count)]
    return Dataset(mols, f"synthetic-{cfg.mode}-{cfg.seed}")


def motif_weights_for_four_bond_mix(
    element_weights: Mapping[str, float], c: float, n4: float, s4: float
) -> dict[str, float]:
    """Motif weights giving a target C : N(4) : S(4) mix among four-bond atoms."""
    if not math.isclose(c + n4 + s4, 1.0):
        raise ValueError("fractions must sum to 1")
    wc = element_weights.get("C", 0.0)
    if wc <= 0:
        raise ValueError("need carbon to anchor the mix")
    return {"N4": wc * n4 / c, "S4": wc * s4 / c, "S6": 0.0, "P5": 0.0}

