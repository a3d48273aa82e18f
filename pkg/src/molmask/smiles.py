"""Importer for a kekulized SMILES subset.

Supported: organic-subset atoms from the vocabulary, bracket atoms of the form
``[S]`` or ``[NH2]`` (element and hydrogen count only), ``-``/``=``/``#``
bonds, branches and ring closures (``1``..``9`` and ``%nn``). Implicit
hydrogens become explicit vertices. Anything else (aromatic atoms, charges,
isotopes, stereo, dot-disconnected parts) is rejected.
"""

from __future__ import annotations

import re

import numpy as np

from .chem import ELEMENT_ID, VALENCE, ChemError, Molecule

# higher valence states accepted when explicit bonds exceed the standard one
_EXTRA_VALENCES = {"P": (5,), "S": (4, 6)}
_BOND_ORDER = {"-": 1, "=": 2, "#": 3}
_BRACKET_RE = re.compile(r"^([A-Z][a-z]?)(?:H(\d?))?$")


class UnsupportedSmilesError(ChemError):
    pass


def _tokenize(s: str) -> list[tuple[str, str]]:
    tokens = []
    i = 0
    while i < len(s):
        c = s[i]
        if c == "[":
            end = s.find("]", i)
            if end < 0:
                raise ChemError(f"unclosed bracket at {i}")
            tokens.append(("bracket", s[i + 1 : end]))
            i = end + 1
        elif s.startswith(("Cl", "Br"), i):
            tokens.append(("atom", s[i : i + 2]))
            i += 2
        elif c in "CNOFPSI" or c == "H":
            tokens.append(("atom", c))
            i += 1
        elif c in _BOND_ORDER:
            tokens.append(("bond", c))
            i += 1
        elif c in "()":
            tokens.append((c, c))
            i += 1
        elif c.isdigit():
            tokens.append(("ring", c))
            i += 1
        elif c == "%" and s[i + 1 : i + 3].isdigit():
            tokens.append(("ring", s[i + 1 : i + 3]))
            i += 3
        elif c.islower():
            raise UnsupportedSmilesError(f"unsupported SMILES feature: aromatic atom {c!r} (kekulize first)")
        else:
            raise UnsupportedSmilesError(f"unsupported SMILES feature: {c!r} at position {i}")
    return tokens


def _bracket_atom(body: str) -> tuple[str, int]:
    m = _BRACKET_RE.match(body)
    if m is None or m.group(1) not in VALENCE:
        raise UnsupportedSmilesError(f"unsupported SMILES feature: bracket atom [{body}]")
    h = m.group(2)
    n_h = 0 if m.group(0) == m.group(1) else int(h or 1)
    return m.group(1), n_h


def parse_smiles_kekulized(s: str) -> Molecule:
    tokens = _tokenize(s.strip())
    if not tokens:
        raise ChemError("empty SMILES")
    symbols: list[str] = []
    explicit_h: list[int | None] = []  # None: fill implicit hydrogens
    edges: dict[tuple[int, int], int] = {}
    stack: list[int] = []
    rings: dict[str, tuple[int, int | None]] = {}
    prev: int | None = None
    pending: int | None = None

    def add_edge(i: int, j: int, order: int) -> None:
        key = (min(i, j), max(i, j))
        if i == j or key in edges:
            raise ChemError(f"invalid duplicate or self bond {i}-{j}")
        edges[key] = order

    for kind, tok in tokens:
        if kind in ("atom", "bracket"):
            if kind == "atom":
                sym, n_h = tok, None
            else:
                sym, n_h = _bracket_atom(tok)
            idx = len(symbols)
            symbols.append(sym)
            explicit_h.append(n_h)
            if prev is not None:
                add_edge(prev, idx, pending or 1)
            prev, pending = idx, None
        elif kind == "bond":
            if prev is None or pending is not None:
                raise ChemError(f"misplaced bond symbol {tok!r}")
            pending = _BOND_ORDER[tok]
        elif kind == "(":
            if prev is None:
                raise ChemError("branch before any atom")
            stack.append(prev)
        elif kind == ")":
            if not stack or pending is not None:
                raise ChemError("unbalanced branch")
            prev = stack.pop()
        elif kind == "ring":
            if prev is None:
                raise ChemError("ring bond before any atom")
            if tok in rings:
                j, order = rings.pop(tok)
                if order and pending and order != pending:
                    raise ChemError(f"conflicting ring bond orders for ring {tok}")
                add_edge(prev, j, pending or order or 1)
            else:
                rings[tok] = (prev, pending)
            pending = None
    if stack or rings or pending is not None:
        raise ChemError("unterminated branch, ring or bond")

    n_heavy = len(symbols)
    used = [0] * n_heavy
    for (i, j), order in edges.items():
        used[i] += order
        used[j] += order
    all_edges = [(i, j, o) for (i, j), o in edges.items()]
    for i in range(n_heavy):
        sym = symbols[i]
        n_h = explicit_h[i]
        if n_h is None:
            valence = VALENCE[sym]
            if used[i] > valence:
                higher = [v for v in _EXTRA_VALENCES.get(sym, ()) if v >= used[i]]
                if not higher:
                    raise ChemError(f"atom {i} ({sym}) exceeds its valence with {used[i]} bonds")
                valence = higher[0]
            n_h = valence - used[i]
        for _ in range(n_h):
            h = len(symbols)
            symbols.append("H")
            all_edges.append((i, h, 1))
    n = len(symbols)
    bonds = np.zeros((n, n), dtype=np.int64)
    for i, j, o in all_edges:
        bonds[i, j] = bonds[j, i] = o
    return Molecule(np.array([ELEMENT_ID[x] for x in symbols]), bonds, s)
