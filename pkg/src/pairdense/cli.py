"""``pairdense`` command line: synth, split, train, evaluate, predict, gradcheck."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import checks, gnn, hopi
from .evaluation import config_digest, evaluate
from .protein_graph import DatasetSplit, load_dataset, save_complex, split_dataset, synth_complex
from .training import (SamplingConfig, TrainConfig, load_model, model_config_for, train)
from .model import PairDenseModel


class CliError(Exception):
    def __init__(self, field, message):
        self.field = field
        super().__init__(message)


def _emit(obj):
    print(json.dumps(obj, sort_keys=True), flush=True)


def _resolved(command, **cfg):
    _emit({"command": command, "resolved_config": cfg})


def read_config(path) -> dict:
    """JSON object or ``key = value`` lines; values are parsed as JSON when possible."""
    p = Path(path)
    if not p.exists():
        raise CliError("--config", f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise CliError("--config", "JSON config must be an object")
        return obj
    except json.JSONDecodeError:
        pass
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("--config", f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


FLAG_TO_FIELD = {
    "seed": "seed", "gnn": "gnn_variant", "layers": "gnn_layers", "blocks": "blocks",
    "channels": "channels", "combine": "combine", "pn_ratio": "pn_ratio",
    "inprotein_ratio": "inprotein_ratio", "epochs": "epochs", "lr": "lr",
    "batch_size": "batch_size", "dropout": "dropout", "weight_decay": "weight_decay",
}


def build_configs(args):
    raw = read_config(args.config) if args.config else {}
    for flag, field_name in FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[field_name] = value
    train_fields = {f.name for f in fields(TrainConfig)}
    samp_fields = {"pn_ratio", "inprotein_ratio"}
    unknown = set(raw) - train_fields - samp_fields
    if unknown:
        raise CliError("--config", f"unknown config fields {sorted(unknown)}")
    try:
        tcfg = TrainConfig(**{k: v for k, v in raw.items() if k in train_fields})
        scfg = SamplingConfig(seed=tcfg.seed, **{k: v for k, v in raw.items() if k in samp_fields})
    except (TypeError, ValueError) as exc:
        raise CliError("--config", str(exc)) from None
    return tcfg, scfg


def _load_data(args):
    if not args.data or not Path(args.data).is_dir():
        raise CliError("--data", f"dataset directory not found: {args.data}")
    data = load_dataset(args.data)
    if not data:
        raise CliError("--data", f"no complex files in {args.data}")
    return data


def _load_split(args, data):
    path = args.split or (Path(args.data) / "split.json")
    if not Path(path).exists():
        if args.split:
            raise CliError("--split", f"split file not found: {path}")
        return None
    split = DatasetSplit.from_json(json.loads(Path(path).read_text()))
    missing = [i for i in split.train + split.validation + split.test if i not in data]
    if missing:
        raise CliError("--split", f"ids not in dataset: {missing[:5]}")
    return split


def cmd_synth(args):
    out = Path(args.out)
    _resolved("synth", complexes=args.complexes, seed=args.seed, out=str(out),
              min_residues=args.min_residues, max_residues=args.max_residues, d=args.d, k=args.k,
              radius=args.radius)
    if args.complexes < 1:
        raise CliError("--complexes", "must be >= 1")
    if args.min_residues > args.max_residues or args.min_residues < 2 * (args.k + 1):
        raise CliError("--min-residues", "need 2*(k+1) <= min-residues <= max-residues")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    written = 0
    attempt = 0
    while written < args.complexes:
        total = int(rng.integers(args.min_residues, args.max_residues + 1))
        n_l = int(rng.integers(total * 2 // 5, total * 3 // 5 + 1))
        cid = f"synth_{args.seed}_{written:03d}"
        sub_seed = int(rng.integers(1 << 31))
        attempt += 1
        try:
            c = synth_complex(sub_seed, n_l, total - n_l, d=args.d, k=args.k,
                              contact_radius=args.radius, complex_id=cid)
        except ValueError:
            if attempt > 20 * args.complexes:
                raise CliError("--radius", "too many complexes without positives; enlarge --radius")
            continue
        save_complex(c, out / f"{cid}.json")
        written += 1
    _emit({"written": written, "out": str(out)})


def cmd_split(args):
    data = _load_data(args)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    _resolved("split", data=args.data, seed=args.seed, ratios=ratios)
    try:
        split = split_dataset(sorted(data), ratios, seed=args.seed)
    except ValueError as exc:
        raise CliError("--ratios", str(exc)) from None
    out = Path(args.out) if args.out else Path(args.data) / "split.json"
    out.write_text(json.dumps(split.to_json(), indent=1), encoding="utf-8")
    _emit({"split": str(out), "sizes": [len(split.train), len(split.validation), len(split.test)]})


def cmd_train(args):
    data = _load_data(args)
    split = _load_split(args, data)
    tcfg, scfg = build_configs(args)
    train_ids = split.train if split else sorted(data)
    val_ids = split.validation if split else []
    if not train_ids:
        raise CliError("--split", "no training complexes")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "model.ckpt"
    _resolved("train", train=asdict(tcfg), sampling=asdict(scfg), data=args.data,
              n_train=len(train_ids), n_val=len(val_ids), checkpoint=str(ckpt))
    first = data[train_ids[0]]
    mode = hopi.JOINT if scfg.inprotein_ratio is not None else hopi.CROSS
    model = PairDenseModel(model_config_for(tcfg, first.ligand.d, first.ligand.d_e, mode), seed=tcfg.seed)
    result = train([data[i] for i in train_ids], model, tcfg, scfg,
                   val_set=[data[i] for i in val_ids], metrics_path=out / "metrics.jsonl",
                   checkpoint_path=ckpt, progress=_emit if args.verbose else None)
    _emit({"checkpoint": str(ckpt), "metrics": str(out / "metrics.jsonl"),
           "best_epoch": result.best_epoch, "best_val_medauc": result.best_val_medauc})


def _subset(args, data):
    split = _load_split(args, data)
    if split is None or args.subset == "all":
        return sorted(data)
    return getattr(split, args.subset)


def _load_ckpt(args):
    if not args.checkpoint or not Path(args.checkpoint).exists():
        raise CliError("--checkpoint", f"checkpoint not found: {args.checkpoint}")
    return load_model(args.checkpoint)


def cmd_evaluate(args):
    data = _load_data(args)
    model = _load_ckpt(args)
    ids = _subset(args, data)
    digest = config_digest(model.config.to_json())
    _resolved("evaluate", data=args.data, checkpoint=args.checkpoint, subset=args.subset,
              n_complexes=len(ids), seed=args.seed, model=model.config.to_json())
    report = evaluate(model, [data[i] for i in ids], config_digest=digest, roc_dump=args.roc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=1), encoding="utf-8")
    _emit({"report": str(out), "medauc": report["medauc"]})


def cmd_predict(args):
    data = _load_data(args)
    model = _load_ckpt(args)
    ids = _subset(args, data)
    _resolved("predict", data=args.data, checkpoint=args.checkpoint, subset=args.subset,
              n_complexes=len(ids), seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cid in ids:
        c = data[cid]
        pred = model.predict(c)
        record = {"complex_id": cid, "n_l": c.n_l, "n_r": c.n_r,
                  "logits": pred.logits.ravel().tolist(),
                  "labels": c.cross_label_map().ravel().astype(int).tolist()}
        (out / f"{cid}.pred.json").write_text(json.dumps(record), encoding="utf-8")
    _emit({"predictions": str(out), "count": len(ids)})


def cmd_gradcheck(args):
    _resolved("gradcheck", seed=args.seed, step=args.step)
    rows = checks.run_all(seed=args.seed, step=args.step)
    print(checks.format_table(rows), flush=True)
    failed = [r.name for r in rows if not r.passed]
    _emit({"checks": len(rows), "failed": failed})
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="pairdense", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--config")
        sp.add_argument("--verbose", action="store_true")
        if data:
            sp.add_argument("--data")
            sp.add_argument("--split")

    s = sub.add_parser("synth", help="generate a synthetic dataset directory")
    common(s, data=False)
    s.add_argument("--complexes", type=int, default=20)
    s.add_argument("--out", required=True)
    s.add_argument("--min-residues", type=int, default=40)
    s.add_argument("--max-residues", type=int, default=80)
    s.add_argument("--d", type=int, default=8)
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--radius", type=float, default=1.2)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", help="write a train/validation/test manifest")
    common(s)
    s.add_argument("--ratios", default="0.6,0.2,0.2")
    s.add_argument("--out")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train a model, write checkpoint and metrics log")
    common(s)
    s.add_argument("--out", default="run")
    s.add_argument("--checkpoint")
    s.add_argument("--gnn", choices=gnn.VARIANTS)
    s.add_argument("--layers", type=int)
    s.add_argument("--blocks", type=int)
    s.add_argument("--channels", type=int)
    s.add_argument("--combine", choices=(hopi.CONCAT, hopi.SUM))
    s.add_argument("--pn-ratio", type=float)
    s.add_argument("--inprotein-ratio", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--dropout", type=float)
    s.add_argument("--weight-decay", type=float)
    s.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "score a checkpoint (AUC, MedAUC)"),
                                 ("predict", cmd_predict, "dump per-complex prediction maps")):
        s = sub.add_parser(name, help=helptext)
        common(s)
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--subset", choices=("train", "validation", "test", "all"), default="test")
        s.add_argument("--out", required=True)
        if name == "evaluate":
            s.add_argument("--roc", action="store_true", help="include ROC points per complex")
        s.set_defaults(func=func)

    s = sub.add_parser("gradcheck", help="finite-difference check of every differentiable piece")
    common(s, data=False)
    s.add_argument("--step", type=float, default=1e-5)
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command != "train" and args.seed is None:
        args.seed = 0  # train resolves its seed from config, then flag
    try:
        if args.command != "train" and args.config:
            read_config(args.config)
        return args.func(args) or 0
    except CliError as exc:
        print(json.dumps({"error": str(exc), "field": exc.field}), file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(json.dumps({"error": str(exc), "field": None, "type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
