"""Command-line front end: ``molmask <command> [options]``.

Every command reads an optional JSON ``--config`` whose keys mirror the long
flags (dashes become underscores); flags given on the command line win.
Unknown keys are rejected. The resolved configuration is written to
``<out>/config.json``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .chem import ELEMENTS, ChemError
from .corruption import build_eval_maskings, mask_atoms
from .dataset import (
    EXTENDED_WEIGHTS,
    OCTET_WEIGHTS,
    Dataset,
    GenerationError,
    GeneratorConfig,
    SplitSpec,
    frequency_csv,
    generate_synthetic,
    split,
)
from .metrics import evaluate, report_csv, sweep_csv, sweep_masks
from .models import (
    COUNT_KINDS,
    MODEL_KINDS,
    NEURAL_KINDS,
    ModelError,
    OctetRuleUnigramModel,
    UnigramModel,
    build_neural,
    load_model,
    save_model,
    tune_k,
)
from .models.counting import k_grid
from .molg import read_molg, write_molg
from .smiles import parse_smiles_kekulized
from .training import TrainConfig, TrainingError, train


class UsageError(Exception):
    pass


COMMON = {
    "seed": 0,
    "out": "out",
    "data": None,
    "model": None,
    "n_corrupt": 1,
    "epsilon": 0.2,
    "variants": None,
    "split_fractions": [0.70, 0.15, 0.15],
    "split_seed": 0,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "generate": {
        "count": 2000,
        "mode": "octet",
        "min_heavy": 3,
        "max_heavy": 12,
        "element_weights": None,
        "motif_weights": None,
        "ring_probability": 0.3,
    },
    "fit": {"k": 0.0, "tune_k": False, "k_grid": [1e-2, 1e5, 50]},
    "train": {
        "epochs": 50,
        "batch_size": 32,
        "lr": 1e-3,
        "checkpoint_every": 0,
        "model_config": {},
    },
    "eval": {"checkpoint": None, "split": "test"},
    "sweep": {"checkpoint": None, "split": "test", "n_corrupt_list": "1,5,all"},
    "confusion": {"checkpoint": None, "split": "test"},
    "predict": {"checkpoint": None, "smiles": None, "index": 0, "split": "all", "mask": "0"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code 1 on usage errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--data", default=S, help="MOLG dataset path")
    p.add_argument("--model", choices=MODEL_KINDS, default=S)
    p.add_argument("--n-corrupt", type=int, default=S)
    p.add_argument("--epsilon", type=float, default=S)
    p.add_argument("--variants", type=int, default=S)
    p.add_argument("--split-seed", type=int, default=S)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="molmask", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic MOLG dataset")
    _add_common(g)
    g.add_argument("--count", type=int, default=S)
    g.add_argument("--mode", choices=("octet", "extended"), default=S)
    g.add_argument("--min-heavy", type=int, default=S)
    g.add_argument("--max-heavy", type=int, default=S)

    f = sub.add_parser("fit", help="fit a count model on the train split")
    _add_common(f)
    f.add_argument("--k", type=float, default=S)
    f.add_argument("--tune-k", action="store_true", default=S)

    t = sub.add_parser("train", help="train a neural model")
    _add_common(t)
    t.add_argument("--epochs", type=int, default=S)
    t.add_argument("--batch-size", type=int, default=S)
    t.add_argument("--lr", type=float, default=S)
    t.add_argument("--checkpoint-every", type=int, default=S)

    for name, helptext in (
        ("eval", "evaluate a model"),
        ("sweep", "evaluate across masking levels"),
        ("confusion", "confusion matrices by bond count"),
        ("predict", "per-atom distributions for one molecule"),
    ):
        c = sub.add_parser(name, help=helptext)
        _add_common(c)
        c.add_argument("--checkpoint", default=S, help="trained model file")
        c.add_argument("--split", choices=("train", "validation", "test", "all"), default=S)
        if name == "sweep":
            c.add_argument("--n-corrupt-list", default=S, help='comma list, e.g. "1,5,all"')
        if name == "predict":
            c.add_argument("--smiles", default=S)
            c.add_argument("--index", type=int, default=S, help="molecule index within --data/--split")
            c.add_argument("--mask", default=S, help="comma list of atom indices to mask")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict[str, Any]:
    cfg = {**COMMON, **DEFAULTS[command]}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {unknown}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in cfg:
            cfg[key] = value
    return cfg


def _echo_config(cfg: dict[str, Any]) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def _load_splits(cfg: dict[str, Any]) -> tuple[Dataset, Dataset, Dataset, Dataset]:
    if not cfg["data"]:
        raise UsageError("--data is required")
    path = Path(cfg["data"])
    if not path.exists():
        raise UsageError(f"dataset not found: {path}")
    ds = Dataset(read_molg(path), path.stem)
    fr = cfg["split_fractions"]
    tr, va, te = split(ds, SplitSpec(fr[0], fr[1], fr[2], cfg["split_seed"]))
    return ds, tr, va, te


def _pick_split(cfg: dict[str, Any]) -> Dataset:
    ds, tr, va, te = _load_splits(cfg)
    return {"all": ds, "train": tr, "validation": va, "test": te}[cfg["split"]]


def _load_checkpoint(cfg: dict[str, Any]):
    if not cfg["checkpoint"]:
        raise UsageError("--checkpoint is required")
    try:
        return load_model(cfg["checkpoint"])
    except FileNotFoundError as exc:
        raise UsageError(f"model file not found: {exc}") from exc


def cmd_generate(cfg: dict[str, Any]) -> int:
    out = _echo_config(cfg)
    weights = cfg["element_weights"] or (EXTENDED_WEIGHTS if cfg["mode"] == "extended" else OCTET_WEIGHTS)
    kwargs = dict(
        count=cfg["count"],
        min_heavy=cfg["min_heavy"],
        max_heavy=cfg["max_heavy"],
        element_weights=weights,
        mode=cfg["mode"],
        ring_probability=cfg["ring_probability"],
        seed=cfg["seed"],
    )
    if cfg["motif_weights"] is not None:
        kwargs["motif_weights"] = cfg["motif_weights"]
    try:
        gen = GeneratorConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = generate_synthetic(gen)
    write_molg(out / "dataset.molg", ds)
    (out / "element_frequencies.csv").write_text(frequency_csv(ds), encoding="utf-8")
    print(f"wrote {len(ds)} molecules to {out / 'dataset.molg'}")
    return 0


def cmd_fit(cfg: dict[str, Any]) -> int:
    kind = cfg["model"] or "octet-unigram"
    if kind not in COUNT_KINDS:
        raise UsageError(f"fit handles {COUNT_KINDS}; use train for {kind}")
    out = _echo_config(cfg)
    _, tr, va, _ = _load_splits(cfg)
    if kind == "unigram":
        model = UnigramModel.fit(tr)
    else:
        model = OctetRuleUnigramModel.fit(tr, cfg["k"])
        if cfg["tune_k"]:
            from .corruption import CorruptionPolicy

            lo, hi, pts = cfg["k_grid"]
            best, table = tune_k(model, va, CorruptionPolicy(cfg["n_corrupt"], cfg["epsilon"]),
                                 k_grid(lo, hi, int(pts)), seed=cfg["seed"])
            model = model.with_k(best)
            rows = ["k,val_cross_entropy"] + [f"{k!r},{ce!r}" for k, ce in table]
            (out / "k_grid.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
            print(f"selected k={best:g}")
    save_model(model, out / "model.json")
    print(f"wrote {out / 'model.json'}")
    return 0


def cmd_train(cfg: dict[str, Any]) -> int:
    kind = cfg["model"]
    if kind not in NEURAL_KINDS:
        raise UsageError(f"train needs --model in {NEURAL_KINDS}; count models use fit")
    out = _echo_config(cfg)
    _, tr, va, _ = _load_splits(cfg)
    mc = dict(cfg["model_config"])
    mc.setdefault("seed", cfg["seed"])
    try:
        model = build_neural(kind, **mc)
        tc = TrainConfig(
            epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"],
            n_corrupt=cfg["n_corrupt"], epsilon=cfg["epsilon"], seed=cfg["seed"],
            val_variants=cfg["variants"] or 5, checkpoint_every=cfg["checkpoint_every"],
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    result = train(model, tr, va, tc, checkpoint_dir=out)
    save_model(result.model, out / "model.ckpt")
    (out / "history.csv").write_text(result.history_csv(), encoding="utf-8")
    print(f"best epoch {result.best_epoch}; wrote {out / 'model.ckpt'}")
    return 0


def _maskings(cfg: dict[str, Any], mols) -> list:
    return build_eval_maskings(list(mols), cfg["n_corrupt"], cfg["variants"], seed=cfg["seed"])


def cmd_eval(cfg: dict[str, Any]) -> int:
    out = _echo_config(cfg)
    model = _load_checkpoint(cfg)
    rep = evaluate(model, _maskings(cfg, _pick_split(cfg)))
    (out / "report.json").write_text(json.dumps({"model": model.kind, **rep.as_dict()}, indent=2) + "\n", encoding="utf-8")
    (out / "report.csv").write_text(report_csv(rep, model.kind), encoding="utf-8")
    print(json.dumps({"model": model.kind, **{k: rep.as_dict()[k] for k in (*rep.SCALED, "perplexity")}}, indent=2))
    return 0


def _parse_levels(text: str) -> list[int | str]:
    levels: list[int | str] = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if tok == "all":
            levels.append("all")
        elif tok.isdigit() and int(tok) > 0:
            levels.append(int(tok))
        else:
            raise UsageError(f"bad masking level {tok!r}")
    return levels


def cmd_sweep(cfg: dict[str, Any]) -> int:
    out = _echo_config(cfg)
    model = _load_checkpoint(cfg)
    rows = sweep_masks(model, list(_pick_split(cfg)), _parse_levels(cfg["n_corrupt_list"]), cfg["variants"], cfg["seed"])
    text = sweep_csv(rows)
    (out / "sweep.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_confusion(cfg: dict[str, Any]) -> int:
    out = _echo_config(cfg)
    model = _load_checkpoint(cfg)
    rep = evaluate(model, _maskings(cfg, _pick_split(cfg)))
    (out / "confusion_all.csv").write_text(rep.confusion.to_csv(), encoding="utf-8")
    for b, cm in rep.confusion_by_bonds.items():
        (out / f"confusion_b{b}.csv").write_text(cm.to_csv(), encoding="utf-8")
    print(f"wrote confusion matrices for bond counts {sorted(rep.confusion_by_bonds)}")
    return 0


def cmd_predict(cfg: dict[str, Any]) -> int:
    out = _echo_config(cfg)
    model = _load_checkpoint(cfg)
    if cfg["smiles"]:
        mol = parse_smiles_kekulized(cfg["smiles"])
    else:
        mols = _pick_split(cfg)
        if not 0 <= cfg["index"] < len(mols):
            raise UsageError(f"--index {cfg['index']} out of range for {len(mols)} molecules")
        mol = mols[cfg["index"]]
    try:
        idx = [int(x) for x in str(cfg["mask"]).split(",")]
        cm = mask_atoms(mol, idx)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"bad --mask: {exc}") from exc
    probs = model.predict_one(cm)
    result = []
    for i, true, row in zip(cm.masked, cm.labels, probs):
        order = np.argsort(-row, kind="stable")
        ranked = [(ELEMENTS[j], float(row[j])) for j in order]
        result.append({"atom": i, "true": ELEMENTS[true], "distribution": ranked})
        print(f"atom {i} (true {ELEMENTS[true]}): " + "  ".join(f"{s} {p:.4f}" for s, p in ranked))
    (out / "prediction.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "confusion": cmd_confusion,
    "predict": cmd_predict,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"molmask {args.command}: {exc}", file=sys.stderr)
        return 1
    except (GenerationError, TrainingError, FloatingPointError, ModelError, ChemError, ValueError) as exc:
        print(f"molmask {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
