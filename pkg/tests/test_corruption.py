import numpy as np
import pytest

from molmask.chem import MASK_ID
from molmask.corruption import (
    CorruptionPolicy,
    build_eval_maskings,
    corruption_count_probs,
    enumerate_eval_maskings,
    mask_atoms,
    sample_corruption,
    sample_corruption_count,
)
from molmask.smiles import parse_smiles_kekulized


def test_mask_and_restore():
    m = parse_smiles_kekulized("CCO")
    cm = mask_atoms(m, [2, 0])
    assert cm.masked == (0, 2)
    assert cm.labels == (m.atoms[0], m.atoms[2])
    assert cm.base.atoms[0] == MASK_ID and cm.base.atoms[2] == MASK_ID
    assert cm.restore() == m
    assert np.array_equal(cm.base.bonds, m.bonds)


@pytest.mark.parametrize("idx,exc", [([], ValueError), ([1, 1], ValueError), ([99], IndexError), ([-1], IndexError)])
def test_mask_errors(idx, exc):
    with pytest.raises(exc):
        mask_atoms(parse_smiles_kekulized("CO"), idx)


def test_count_probabilities():
    p = corruption_count_probs(10, CorruptionPolicy(1, 0.2))
    assert p.sum() == pytest.approx(1.0)
    assert p[0] == pytest.approx(0.82)
    assert np.allclose(p[1:], 0.02)
    with pytest.raises(ValueError):
        corruption_count_probs(3, CorruptionPolicy(4, 0.2))


def test_epsilon_zero_is_fixed():
    rng = np.random.default_rng(0)
    assert {sample_corruption_count(12, CorruptionPolicy(3, 0.0), rng) for _ in range(200)} == {3}


def test_sample_corruption_masks_k_distinct_atoms():
    m = parse_smiles_kekulized("CC(=O)NC")
    rng = np.random.default_rng(4)
    for _ in range(100):
        cm = sample_corruption(m, CorruptionPolicy(2, 0.5), rng)
        assert len(set(cm.masked)) == len(cm.masked) >= 1
        assert (cm.base.atoms == MASK_ID).sum() == len(cm.masked)


def test_eval_maskings_enumerate_small_cases():
    m = parse_smiles_kekulized("O")  # 3 atoms
    cms = enumerate_eval_maskings(m, 1, 5, np.random.default_rng(0))
    assert [c.masked for c in cms] == [(0,), (1,), (2,)]
    cms = enumerate_eval_maskings(m, 2, 2, np.random.default_rng(0))
    assert len({c.masked for c in cms}) == 2


def test_build_eval_maskings_clamps_and_all():
    mols = [parse_smiles_kekulized(s) for s in ("O", "CC")]
    big = build_eval_maskings(mols, 5)
    assert [len(c.masked) for c in big] == [3, 5]
    full = build_eval_maskings(mols, "all")
    assert [c.masked for c in full] == [tuple(range(3)), tuple(range(8))]
    assert build_eval_maskings(mols, 1, seed=1)[0].masked == build_eval_maskings(mols, 1, seed=1)[0].masked
    # default: every atom once, capped at five variants
    assert len(build_eval_maskings(mols, 1)) == 3 + 5


def test_policy_validation():
    with pytest.raises(ValueError):
        CorruptionPolicy(0)
    with pytest.raises(ValueError):
        CorruptionPolicy(1, 1.5)


def test_epsilon_greedy_buckets_within_three_sigma():
    n_draws, n_atoms = 100_000, 10
    rng = np.random.default_rng(2024)
    policy = CorruptionPolicy(1, 0.2)
    draws = np.array([sample_corruption_count(n_atoms, policy, rng) for _ in range(n_draws)])
    freq = np.bincount(draws, minlength=n_atoms + 1)[1:] / n_draws
    expected = np.array([0.82] + [0.02] * 9)
    sigma = np.sqrt(expected * (1 - expected) / n_draws)
    assert np.all(np.abs(freq - expected) <= 3 * sigma), (freq, expected)
