"""Octet/sample accuracy, F1, perplexity and confusion matrices."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .chem import ELEMENTS, N_ELEMENTS, VALENCE_BY_ID, Molecule, covalent_bond_count
from .corruption import CorruptedMolecule, build_eval_maskings
from .models.base import Model


def octet_correct(predicted: int, mol: Molecule, i: int) -> bool:
    """Exact match, or the predicted element's valence equals atom ``i``'s bond count."""
    return bool(predicted == mol.atoms[i] or VALENCE_BY_ID[predicted] == covalent_bond_count(mol, i))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (true, predicted)
    bond_count: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *ELEMENTS])
        for sym, row in zip(ELEMENTS, self.counts):
            w.writerow([sym, *(int(x) for x in row)])
        return buf.getvalue()


def f1_scores(conf: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Micro F1, macro F1 and per-class precision/recall from a confusion matrix.

    Macro F1 averages over classes that occur among the true labels; a class
    with no predictions has precision 0.
    """
    tp = np.diag(conf).astype(np.float64)
    support = conf.sum(axis=1).astype(np.float64)
    predicted = conf.sum(axis=0).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    present = support > 0
    macro = float(f1[present].mean()) if present.any() else 0.0
    micro_p = tp.sum() / predicted.sum()
    micro_r = tp.sum() / support.sum()
    micro = float(2 * micro_p * micro_r / (micro_p + micro_r)) if micro_p + micro_r > 0 else 0.0
    return micro, macro, precision, recall


@dataclass
class MetricsReport:
    """Fractions in [0, 1]; :meth:`as_dict` scales accuracies and F1 by 100."""

    sample_accuracy: float
    octet_accuracy: float
    sample_f1_micro: float
    sample_f1_macro: float
    octet_f1_micro: float
    octet_f1_macro: float
    perplexity: float
    n_masked: int
    n_maskings: int
    precision: list[float] = field(default_factory=list)
    recall: list[float] = field(default_factory=list)
    confusion: ConfusionMatrix | None = field(default=None, repr=False)
    confusion_by_bonds: dict[int, ConfusionMatrix] = field(default_factory=dict, repr=False)

    SCALED = (
        "sample_accuracy", "octet_accuracy", "sample_f1_micro",
        "sample_f1_macro", "octet_f1_micro", "octet_f1_macro",
    )

    def as_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("confusion", "confusion_by_bonds")}
        for k in self.SCALED:
            out[k] = 100.0 * out[k]
        out["perplexity"] = self.perplexity if math.isfinite(self.perplexity) else "inf"
        out["precision"] = dict(zip(ELEMENTS, self.precision))
        out["recall"] = dict(zip(ELEMENTS, self.recall))
        return out

    def flat_rows(self, name: str) -> list[tuple[str, str, float, str]]:
        d = self.as_dict()
        rows = [(k, name, d[k], "") for k in (*self.SCALED, "perplexity", "n_masked", "n_maskings")]
        return rows


def evaluate(model: Model, maskings: Sequence[CorruptedMolecule]) -> MetricsReport:
    if not maskings:
        raise ValueError("nothing to evaluate")
    preds = model.predict(maskings)
    sample_conf = np.zeros((N_ELEMENTS, N_ELEMENTS), dtype=np.int64)
    octet_conf = np.zeros_like(sample_conf)
    by_bonds: dict[int, np.ndarray] = {}
    log_p = 0.0
    n = 0
    for cm, p in zip(maskings, preds):
        p = np.asarray(p)
        if p.shape != (len(cm.masked), N_ELEMENTS):
            raise ValueError(f"model returned shape {p.shape} for {len(cm.masked)} masked atoms")
        bond_counts = cm.base.bonds.sum(axis=1)
        for row, i, true in zip(p, cm.masked, cm.labels):
            guess = int(np.argmax(row))
            b = int(bond_counts[i])
            sample_conf[true, guess] += 1
            ok = guess == true or VALENCE_BY_ID[guess] == b
            octet_conf[true, true if ok else guess] += 1
            by_bonds.setdefault(b, np.zeros_like(sample_conf))[true, guess] += 1
            pt = row[true]
            log_p += math.log(pt) if pt > 0 else -math.inf
            n += 1
    s_micro, s_macro, prec, rec = f1_scores(sample_conf)
    o_micro, o_macro, _, _ = f1_scores(octet_conf)
    return MetricsReport(
        sample_accuracy=float(np.trace(sample_conf) / n),
        octet_accuracy=float(np.trace(octet_conf) / n),
        sample_f1_micro=s_micro,
        sample_f1_macro=s_macro,
        octet_f1_micro=o_micro,
        octet_f1_macro=o_macro,
        perplexity=math.exp(-log_p / n) if math.isfinite(log_p) else math.inf,
        n_masked=n,
        n_maskings=len(maskings),
        precision=[float(x) for x in prec],
        recall=[float(x) for x in rec],
        confusion=ConfusionMatrix(sample_conf),
        confusion_by_bonds={b: ConfusionMatrix(c, b) for b, c in sorted(by_bonds.items())},
    )


def sweep_masks(
    model: Model,
    mols: Sequence[Molecule],
    n_corrupt_list: Sequence[int | str],
    variants: int | None = None,
    seed: int = 0,
) -> list[tuple[int | str, MetricsReport]]:
    """One evaluation per masking level; ``"all"`` masks every atom."""
    return [(k, evaluate(model, build_eval_maskings(mols, k, variants, seed))) for k in n_corrupt_list]


def sweep_csv(rows: Sequence[tuple[int | str, MetricsReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = [*MetricsReport.SCALED, "perplexity", "n_masked"]
    w.writerow(["n_corrupt", *cols])
    for k, rep in rows:
        d = rep.as_dict()
        w.writerow([k, *(d[c] for c in cols)])
    return buf.getvalue()


def report_csv(report: MetricsReport, name: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "name", "value", "stddev"])
    w.writerows(report.flat_rows(name))
    return buf.getvalue()
