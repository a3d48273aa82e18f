"""Reader and writer for the line-oriented MOLG molecule format.

A block looks like::

    atoms C H H H H
    bonds 0-1:1 0-2:1 0-3:1 0-4:1
    id methane

Blocks are separated by blank lines.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

import numpy as np

from .chem import ChemError, Molecule, element_id

_BOND_RE = re.compile(r"^(\d+)-(\d+):(\d+)$")


def parse_molg(text: str) -> Molecule:
    """Parse exactly one MOLG block."""
    mols = parse_molg_many(text)
    if len(mols) != 1:
        raise ChemError(f"expected one molecule block, found {len(mols)}")
    return mols[0]


def _parse_block(lines: list[str]) -> Molecule:
    atoms: list[str] | None = None
    bond_tokens: list[str] = []
    source_id = None
    for line in lines:
        key, _, rest = line.strip().partition(" ")
        if key == "atoms":
            atoms = rest.split()
        elif key == "bonds":
            bond_tokens = rest.split()
        elif key == "id":
            source_id = rest.strip()
        else:
            raise ChemError(f"unknown MOLG line {line!r}")
    if not atoms:
        raise ChemError("MOLG block without atoms line")
    ids = [element_id(s) for s in atoms]
    n = len(ids)
    bonds = np.zeros((n, n), dtype=np.int64)
    for tok in bond_tokens:
        m = _BOND_RE.match(tok)
        if m is None:
            raise ChemError(f"malformed bond {tok!r}")
        i, j, order = (int(g) for g in m.groups())
        if i >= n or j >= n:
            raise ChemError(f"bond {tok!r} index out of range for {n} atoms")
        if i == j:
            raise ChemError(f"self-bond {tok!r}")
        if not 1 <= order <= 3:
            raise ChemError(f"bond order {order} outside 1..3")
        if bonds[i, j] and bonds[i, j] != order:
            raise ChemError(f"conflicting duplicate bond {i}-{j}")
        bonds[i, j] = bonds[j, i] = order
    return Molecule(np.array(ids), bonds, source_id)


def parse_molg_many(text: str) -> list[Molecule]:
    mols = []
    block: list[str] = []
    for line in text.splitlines():
        if line.strip():
            block.append(line)
        elif block:
            mols.append(_parse_block(block))
            block = []
    if block:
        mols.append(_parse_block(block))
    return mols


def serialize_molg(mol: Molecule) -> str:
    bonds = " ".join(f"{i}-{j}:{b}" for i, j, b in mol.edges())
    lines = [f"atoms {' '.join(mol.symbols)}", f"bonds {bonds}".rstrip()]
    if mol.source_id is not None:
        lines.append(f"id {mol.source_id}")
    return "\n".join(lines) + "\n"


def serialize_molg_many(mols: Iterable[Molecule]) -> str:
    return "\n".join(serialize_molg(m) for m in mols)


def read_molg(path: str | Path) -> list[Molecule]:
    return parse_molg_many(Path(path).read_text(encoding="utf-8"))


def write_molg(path: str | Path, mols: Iterable[Molecule]) -> None:
    Path(path).write_text(serialize_molg_many(mols), encoding="utf-8", newline="\n")
