import math

import numpy as np
import pytest

from molmask.chem import ELEMENT_ID, N_ELEMENTS
from molmask.corruption import build_eval_maskings, mask_atoms
from molmask.metrics import MetricsReport, evaluate, f1_scores, octet_correct, report_csv, sweep_csv, sweep_masks
from molmask.models import Model, UnigramModel
from molmask.smiles import parse_smiles_kekulized


class Oracle(Model):
    kind = "oracle"

    def predict(self, cms):
        out = []
        for cm in cms:
            p = np.zeros((len(cm.labels), N_ELEMENTS))
            p[np.arange(len(cm.labels)), list(cm.labels)] = 1.0
            out.append(p)
        return out


class Fixed(Model):
    kind = "fixed"

    def __init__(self, dist):
        self.dist = np.asarray(dist, dtype=float)

    def predict(self, cms):
        return [np.tile(self.dist, (len(cm.labels), 1)) for cm in cms]


def test_octet_correct_cases():
    hf = parse_smiles_kekulized("CF")
    h = hf.symbols.index("H")
    assert octet_correct(ELEMENT_ID["F"], hf, h)
    assert not octet_correct(ELEMENT_ID["N"], hf, 0)
    sulfone = parse_smiles_kekulized("CS(=O)(=O)C")
    s = sulfone.symbols.index("S")
    assert octet_correct(ELEMENT_ID["S"], sulfone, s)
    assert not octet_correct(ELEMENT_ID["C"], sulfone, s)


def test_perfect_oracle(small_dataset):
    rep = evaluate(Oracle(), build_eval_maskings(list(small_dataset), 2))
    assert rep.perplexity == 1.0
    d = rep.as_dict()
    for key in MetricsReport.SCALED:
        assert d[key] == 100.0


def test_uniform_over_five_has_perplexity_five(small_dataset):
    dist = np.zeros(N_ELEMENTS)
    dist[:5] = 0.2
    rep = evaluate(Fixed(dist), build_eval_maskings(list(small_dataset), 1))
    assert rep.perplexity == pytest.approx(5.0, rel=1e-12)


def test_majority_two_class_f1():
    conf = np.zeros((N_ELEMENTS, N_ELEMENTS), dtype=np.int64)
    conf[0, 0] = 50
    conf[1, 0] = 50
    micro, macro, precision, recall = f1_scores(conf)
    assert micro == pytest.approx(0.5, abs=1e-15)
    assert macro == pytest.approx(1 / 3, abs=1e-15)
    assert precision[0] == 0.5 and recall[0] == 1.0


def test_zero_probability_gives_infinite_perplexity():
    dist = np.zeros(N_ELEMENTS)
    dist[1] = 1.0  # always carbon
    cms = [mask_atoms(parse_smiles_kekulized("CO"), range(3))]
    rep = evaluate(Fixed(dist), cms)
    assert math.isinf(rep.perplexity)
    assert rep.as_dict()["perplexity"] == "inf"


def test_identities_and_confusion_partition(small_dataset):
    uni = UnigramModel.fit(small_dataset)
    for level in (1, 3, "all"):
        rep = evaluate(uni, build_eval_maskings(list(small_dataset), level))
        assert abs(rep.sample_f1_micro - rep.sample_accuracy) <= 1e-12
        assert abs(rep.octet_f1_micro - rep.octet_accuracy) <= 1e-12
        assert rep.octet_accuracy >= rep.sample_accuracy
        assert rep.perplexity >= 1.0
        total = sum(c.counts for c in rep.confusion_by_bonds.values())
        assert np.array_equal(total, rep.confusion.counts)
        assert rep.confusion.counts.sum() == rep.n_masked


def test_unigram_sweep_is_flat(small_dataset):
    uni = UnigramModel.fit(small_dataset)
    rows = sweep_masks(uni, list(small_dataset), [1, "all"])
    (_, one), (_, full) = rows
    assert one.sample_accuracy == pytest.approx(full.sample_accuracy, abs=0.03)
    assert one.perplexity == pytest.approx(full.perplexity, rel=0.05)
    text = sweep_csv(rows)
    assert text.splitlines()[0].startswith("n_corrupt,sample_accuracy")
    assert text.splitlines()[2].startswith("all,")


def test_single_level_sweep_equals_evaluate(small_dataset):
    uni = UnigramModel.fit(small_dataset)
    mols = list(small_dataset)
    (_, rep), = sweep_masks(uni, mols, [1], seed=4)
    assert rep.as_dict() == evaluate(uni, build_eval_maskings(mols, 1, seed=4)).as_dict()


def test_report_csv_layout(small_dataset):
    rep = evaluate(UnigramModel.fit(small_dataset), build_eval_maskings(list(small_dataset), 1))
    lines = report_csv(rep, "unigram").splitlines()
    assert lines[0] == "metric,name,value,stddev"
    assert lines[1].startswith("sample_accuracy,unigram,")
    assert lines[1].endswith(",")


def test_bad_prediction_shape():
    class Broken(Model):
        kind = "broken"

        def predict(self, cms):
            return [np.ones((1, 3))]

    with pytest.raises(ValueError):
        evaluate(Broken(), [mask_atoms(parse_smiles_kekulized("C"), [0, 1])])
    with pytest.raises(ValueError):
        evaluate(Oracle(), [])
