"""Command-line pipelines: gen, train, adapt, eval, score, roc.

Output files depend only on the config, the input files and the seed.
Wall-clock timings are printed to stdout and never written to files.
Exit codes: 0 ok, 2 config error, 3 I/O or input-format error, 4 numerical
or pipeline failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import config as config_mod
from . import embedder as emb
from .cplfpa import adapt
from .dataset import features_and_labels, generate_synthetic, load_csv, save_csv
from .errors import GlrtmlError, InvalidConfig, IoFailure, NumericalError, ParseFailure
from .persist import ModelFile, load_model, save_model
from .retrieval import cosine_score_matrix, evaluate, relevance_matrix, roc_curve, score_matrix
from .trainer import train

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("gen", "train", "adapt", "eval", "score", "roc")
PARTS = ("train", "query", "gallery")


def _makedirs(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {path}: {exc}") from exc


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _write_rows(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _split_path(cfg, domain, part):
    return os.path.join(cfg.io.data_dir, f"{domain}_{part}.csv")


def _load_part(cfg, domain, part):
    return load_csv(_split_path(cfg, domain, part))


def cmd_gen(cfg, out):
    source, target = generate_synthetic(cfg.synth_config())
    _makedirs(out)
    written = []
    for domain, split in (("source", source), ("target", target)):
        for part, instances in split.parts().items():
            path = os.path.join(out, f"{domain}_{part}.csv")
            save_csv(instances, path)
            written.append(path)
    for path in written:
        print(path)


def cmd_train(cfg, out):
    x, y = features_and_labels(_load_part(cfg, "source", "train"))
    if len(x) == 0:
        raise InvalidConfig("source_train.csv holds no instances")
    tcfg = cfg.train_config()
    start = time.perf_counter()
    report = train(x, y, tcfg)
    elapsed = time.perf_counter() - start
    _makedirs(out)
    meta = {"variant": tcfg.variant, "seed": cfg.seed, "classes": np.unique(y[y >= 0]).tolist()}
    save_model(os.path.join(out, "model.json"), ModelFile(report.params, report.model, meta))
    lines = [json.dumps({k: v for k, v in r.to_dict(timing=False).items() if k != "model_summary"},
                        sort_keys=True) for r in report.epochs]
    _write_text(os.path.join(out, "train_log.jsonl"), "".join(line + "\n" for line in lines))
    print(f"trained {len(report.epochs)} epochs in {elapsed:.2f} s -> {os.path.join(out, 'model.json')}")


def cmd_adapt(cfg, out):
    mf = load_model(cfg.io.model)
    feats = [features_and_labels(_load_part(cfg, "target", p))[0] for p in PARTS]
    target = np.concatenate([f for f in feats if len(f)])
    acfg = cfg.adapt_config()
    result = adapt(mf.params, target, acfg)
    _makedirs(out)
    meta = dict(mf.meta, adapted=True, adapt_k=acfg.k)
    save_model(os.path.join(out, "adapted_model.json"), ModelFile(mf.params, result.model, meta))
    lab = result.labeling
    _write_json(os.path.join(out, "adapt_report.json"), {
        "k": lab.k, "inertia": lab.inertia, "iterations": lab.iterations,
        "cluster_sizes": np.bincount(lab.assignments, minlength=lab.k).tolist(),
        "n_targets": int(len(target)), "parameters_updated": result.parameters_updated})
    print(json.dumps({k: round(v, 3) for k, v in result.timing.items()}, sort_keys=True))


def _eval_inputs(cfg):
    mf = load_model(cfg.io.model)
    query = _load_part(cfg, cfg.eval.domain, "query")
    gallery = _load_part(cfg, cfg.eval.domain, "gallery")
    (xq, yq), (xg, yg) = features_and_labels(query), features_and_labels(gallery)
    q_ids, g_ids = [x.id for x in query], [x.id for x in gallery]
    eq, eg = emb.embed(mf.params, xq), emb.embed(mf.params, xg)
    if cfg.eval.metric == "cosine":
        scores = cosine_score_matrix(eq, eg)
    else:
        scores = score_matrix(mf.model, eq, eg)
    return scores, yq, yg, q_ids, g_ids


def _tag(cfg):
    return f"{cfg.eval.domain}_{cfg.eval.metric}"


def cmd_eval(cfg, out):
    scores, yq, yg, _, _ = _eval_inputs(cfg)
    m = evaluate(scores, yq, yg, tuple(cfg.eval.k_list))
    _makedirs(out)
    report = m.to_dict()
    report.update(model=cfg.io.model, domain=cfg.eval.domain, metric=cfg.eval.metric)
    _write_json(os.path.join(out, f"metrics_{_tag(cfg)}.json"), report)
    line = " ".join(f"R@{k}={m.recall_at_k[k]:.4f} P@{k}={m.precision_at_k[k]:.4f}" for k in cfg.eval.k_list)
    print(f"{_tag(cfg)} mAP={m.map:.4f} {line}")


def cmd_score(cfg, out):
    scores, _, _, q_ids, g_ids = _eval_inputs(cfg)
    _makedirs(out)
    rows = [[qid] + [repr(float(v)) for v in row] for qid, row in zip(q_ids, scores)]
    path = os.path.join(out, f"scores_{_tag(cfg)}.csv")
    _write_rows(path, ["query_id"] + g_ids, rows)
    print(path)


def cmd_roc(cfg, out):
    scores, yq, yg, _, _ = _eval_inputs(cfg)
    rel = relevance_matrix(yq, yg)
    curve = roc_curve(scores[rel], scores[~rel], cfg.roc.grid_size)
    _makedirs(out)
    rows = [[repr(float(t)), repr(float(f)), repr(float(d))]
            for t, f, d in zip(curve.thresholds, curve.p_fa, curve.p_d)]
    _write_rows(os.path.join(out, f"roc_{_tag(cfg)}.csv"), ["threshold", "p_fa", "p_d"], rows)
    for p in cfg.roc.p_fa:
        print(f"{_tag(cfg)} P_D@P_FA={p:g}: {curve.pd_at(p):.4f}")


HANDLERS = {"gen": cmd_gen, "train": cmd_train, "adapt": cmd_adapt, "eval": cmd_eval,
            "score": cmd_score, "roc": cmd_roc}


def build_parser():
    p = argparse.ArgumentParser(prog="glrtml", description="GLRT metric learning pipelines")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML run config (defaults apply when omitted)")
    p.add_argument("--out", help="output directory (gen: data directory)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--variant", choices=("mg", "gmm"), help="overrides train.variant")
    p.add_argument("--metric", choices=("glrt", "cosine"), help="overrides eval.metric")
    p.add_argument("--emit-effective-config", action="store_true",
                   help="print the fully resolved config and exit")
    return p


def resolve_config(args):
    cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.variant is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, variant=args.variant))
    if args.metric is not None:
        cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, metric=args.metric))
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.emit_effective_config:
            sys.stdout.write(config_mod.dumps(cfg))
            return EXIT_OK
        out = args.out or (cfg.io.data_dir if args.command == "gen" else cfg.io.out_dir)
        HANDLERS[args.command](cfg, out)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoFailure, ParseFailure, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, GlrtmlError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
