"""Molecular graph data model, element vocabulary and valence rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ELEMENTS: tuple[str, ...] = ("H", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I")
MASK = "<MASK>"
VOCAB: tuple[str, ...] = ELEMENTS + (MASK,)

N_ELEMENTS = len(ELEMENTS)
MASK_ID = N_ELEMENTS
ELEMENT_ID: dict[str, int] = {sym: i for i, sym in enumerate(VOCAB)}

# standard neutral covalent valence, indexed by element id
VALENCE: dict[str, int] = {
    "H": 1, "C": 4, "N": 3, "O": 2, "F": 1,
    "P": 3, "S": 2, "Cl": 1, "Br": 1, "I": 1,
}
VALENCE_BY_ID = np.array([VALENCE[s] for s in ELEMENTS], dtype=np.int64)


class ChemError(ValueError):
    """Raised for malformed molecules or unparsable input."""


def element_id(symbol: str) -> int:
    try:
        return ELEMENT_ID[symbol]
    except KeyError:
        raise ChemError(f"unknown element {symbol!r}") from None


def _is_connected(bonds: np.ndarray) -> bool:
    n = bonds.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(bonds[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


@dataclass(frozen=True, eq=False)
class Molecule:
    """Atoms as vocabulary ids plus a symmetric bond-order matrix.

    ``atoms`` may contain ``MASK_ID`` only when the molecule is the base of a
    corrupted molecule; use :meth:`from_symbols` for ordinary construction.
    """

    atoms: np.ndarray
    bonds: np.ndarray
    source_id: str | None = None
    _allow_mask: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=np.int64).copy()
        bonds = np.asarray(self.bonds, dtype=np.int64).copy()
        n = atoms.shape[0]
        if atoms.ndim != 1 or n < 1:
            raise ChemError("molecule needs at least one atom")
        if bonds.shape != (n, n):
            raise ChemError(f"bond matrix shape {bonds.shape} does not match {n} atoms")
        if atoms.min() < 0 or atoms.max() > MASK_ID:
            raise ChemError("atom id out of range")
        if not self._allow_mask and (atoms == MASK_ID).any():
            raise ChemError("MASK token in an uncorrupted molecule")
        if np.any(np.diag(bonds) != 0):
            raise ChemError("self-bond")
        if not np.array_equal(bonds, bonds.T):
            raise ChemError("bond matrix is not symmetric")
        if bonds.min() < 0 or bonds.max() > 3:
            raise ChemError("bond order outside 0..3")
        if not _is_connected(bonds):
            raise ChemError("molecule graph is disconnected")
        atoms.flags.writeable = False
        bonds.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "bonds", bonds)

    @classmethod
    def from_symbols(cls, symbols: Sequence[str], bonds, source_id: str | None = None) -> "Molecule":
        return cls(np.array([element_id(s) for s in symbols], dtype=np.int64), bonds, source_id)

    @classmethod
    def from_edges(
        cls, symbols: Sequence[str], edges: Iterable[tuple[int, int, int]], source_id: str | None = None
    ) -> "Molecule":
        n = len(symbols)
        bonds = np.zeros((n, n), dtype=np.int64)
        for i, j, order in edges:
            bonds[i, j] = bonds[j, i] = order
        return cls.from_symbols(symbols, bonds, source_id)

    @property
    def n_atoms(self) -> int:
        return int(self.atoms.shape[0])

    @property
    def symbols(self) -> list[str]:
        return [VOCAB[a] for a in self.atoms]

    def edges(self) -> list[tuple[int, int, int]]:
        iu, ju = np.nonzero(np.triu(self.bonds))
        return [(int(i), int(j), int(self.bonds[i, j])) for i, j in zip(iu, ju)]

    def bond_counts(self) -> np.ndarray:
        """Sum of incident bond orders for every atom."""
        return self.bonds.sum(axis=1)

    def with_atoms(self, atoms, allow_mask: bool = False, source_id: str | None = None) -> "Molecule":
        """Same bond matrix with new atom ids (and optionally a new id).

        Only the atom ids are re-checked; the bond matrix was validated when
        ``self`` was built and is shared read-only.
        """
        atoms = np.asarray(atoms, dtype=np.int64).copy()
        if atoms.shape != self.atoms.shape:
            raise ChemError(f"expected {self.n_atoms} atom ids, got shape {atoms.shape}")
        if atoms.min() < 0 or atoms.max() > MASK_ID:
            raise ChemError("atom id out of range")
        if not allow_mask and (atoms == MASK_ID).any():
            raise ChemError("MASK token in an uncorrupted molecule")
        atoms.flags.writeable = False
        new = object.__new__(Molecule)
        for name, value in (
            ("atoms", atoms),
            ("bonds", self.bonds),
            ("source_id", self.source_id if source_id is None else source_id),
            ("_allow_mask", allow_mask),
        ):
            object.__setattr__(new, name, value)
        return new

    def permute(self, perm: Sequence[int]) -> "Molecule":
        """Relabel atoms so that new atom ``k`` is old atom ``perm[k]``."""
        p = np.asarray(perm, dtype=np.int64)
        return Molecule(self.atoms[p], self.bonds[np.ix_(p, p)], self.source_id, self._allow_mask)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Molecule):
            return NotImplemented
        return (
            np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.bonds, other.bonds)
            and self.source_id == other.source_id
        )

    def __hash__(self) -> int:
        return hash((self.atoms.tobytes(), self.bonds.tobytes(), self.source_id))

    def __repr__(self) -> str:
        return f"Molecule({' '.join(self.symbols)}, {len(self.edges())} bonds)"


def covalent_bond_count(mol: Molecule, i: int) -> int:
    if not 0 <= i < mol.n_atoms:
        raise IndexError(f"atom index {i} out of range for {mol.n_atoms} atoms")
    return int(mol.bonds[i].sum())


@dataclass(frozen=True)
class OctetReport:
    satisfied: tuple[bool, ...]

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)

    @property
    def violations(self) -> list[int]:
        return [i for i, ok in enumerate(self.satisfied) if not ok]


def octet_check(mol: Molecule) -> OctetReport:
    if (mol.atoms == MASK_ID).any():
        raise ChemError("octet check on a masked molecule")
    expected = VALENCE_BY_ID[mol.atoms]
    return OctetReport(tuple(bool(x) for x in mol.bond_counts() == expected))
