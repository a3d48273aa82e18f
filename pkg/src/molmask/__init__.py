"""Learning molecular structure rules by recovering masked atoms."""

import os as _os

_threads = _os.environ.get("MOLMASK_THREADS")
if _threads:
    # only effective when numpy has not been imported yet
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .chem import (  # noqa: E402
    ELEMENTS,
    MASK_ID,
    VALENCE,
    ChemError,
    Molecule,
    OctetReport,
    covalent_bond_count,
    octet_check,
)
from .corruption import (  # noqa: E402
    CorruptedMolecule,
    CorruptionPolicy,
    enumerate_eval_maskings,
    mask_atoms,
    sample_corruption,
)
from .dataset import Dataset, GeneratorConfig, SplitSpec, element_frequencies, generate_synthetic, split  # noqa: E402
from .molg import parse_molg, read_molg, serialize_molg, write_molg  # noqa: E402
from .smiles import parse_smiles_kekulized  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "ELEMENTS",
    "MASK_ID",
    "VALENCE",
    "ChemError",
    "CorruptedMolecule",
    "CorruptionPolicy",
    "Dataset",
    "GeneratorConfig",
    "Molecule",
    "OctetReport",
    "SplitSpec",
    "covalent_bond_count",
    "element_frequencies",
    "enumerate_eval_maskings",
    "generate_synthetic",
    "mask_atoms",
    "octet_check",
    "parse_molg",
    "parse_smiles_kekulized",
    "read_molg",
    "sample_corruption",
    "serialize_molg",
    "split",
    "write_molg",
]
