"""Command-line entry point.

Subcommands: gen-data, train, eval, gradcheck, toy2d, margin-sweep.
Every command is deterministic given its config (the seed lives in the
config, overridable with --seed), and exit codes form a stable contract:
0 success, 1 check failure, 2 invalid input, 3 numerical abort.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import (
    config as config_mod,
    dataset as dataset_mod,
    evaluation,
    gradcheck as gradcheck_mod,
    model as model_mod,
    trainer as trainer_mod,
)
from .errors import ConfigError, DimensionMismatch, MetricLabError, NonFiniteLoss

_D_MAX = float(np.expm1(4.0))


def _load_cfg(args):
    return config_mod.load_run_config(
        path=args.config,
        overrides=args.set or (),
        seed=args.seed,
        out_dir=getattr(args, "out", None),
    )


def _obtain_dataset(cfg):
    """Dataset for commands that can fall back to in-memory generation:
    load dataset_path when set, otherwise generate from the data section."""
    if cfg.dataset_path:
        return dataset_mod.load_csv(cfg.dataset_path)
    return dataset_mod.generate_synthetic(cfg.synthetic_spec)


def _embed_dataset(net, ds):
    return dataset_mod.LabeledDataset(
        features=model_mod.forward(net, ds.features),
        labels=ds.labels,
        ids=ds.ids,
    )


def _cmc_at(report, rank):
    return float(report.cmc[min(rank, len(report.cmc)) - 1])


def cmd_gen_data(args):
    cfg = _load_cfg(args)
    out_path = args.out or cfg.dataset_path or "dataset.csv"
    ds = dataset_mod.generate_synthetic(cfg.synthetic_spec)
    dataset_mod.save_csv(ds, out_path)
    print("wrote %s: %d rows, %d classes" % (out_path, len(ds), ds.n_classes))
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    if not cfg.dataset_path:
        raise ConfigError("dataset_path is not set; run gen-data first")
    ds = dataset_mod.load_csv(cfg.dataset_path)
    os.makedirs(cfg.out_dir, exist_ok=True)

    net, classifier, log = trainer_mod.train(ds, cfg.train)

    ckpt_path = os.path.join(cfg.out_dir, "checkpoint.json")
    metrics_path = os.path.join(cfg.out_dir, "metrics.jsonl")
    emb_path = os.path.join(cfg.out_dir, "embeddings.csv")
    model_mod.save_checkpoint(ckpt_path, net, classifier)
    log.dump_jsonl(metrics_path)
    dataset_mod.save_csv(_embed_dataset(net, ds), emb_path, prefix="e")

    final = log.epochs()[-1]
    print("trained %s (+dsam)" % cfg.train.base if cfg.train.use_dsam
          else "trained %s" % cfg.train.base)
    print("final epoch mean loss %.6f, mean intraclass angle %.4f rad"
          % (final["mean_loss"], final["mean_intraclass_angle"]))
    print("wrote %s, %s, %s" % (ckpt_path, metrics_path, emb_path))
    return 0


def cmd_eval(args):
    net, _ = model_mod.load_checkpoint(args.checkpoint)
    ds = dataset_mod.load_csv(args.dataset)
    if ds.features.shape[1] != net.widths[0]:
        raise DimensionMismatch(
            "dataset width %d does not match model input width %d"
            % (ds.features.shape[1], net.widths[0])
        )
    emb_ds = _embed_dataset(net, ds)
    if args.self_retrieval:
        query, gallery = emb_ds, emb_ds
    else:
        query, gallery = dataset_mod.query_gallery_split(
            emb_ds, args.queries_per_class, args.seed if args.seed is not None else 0
        )
    report = evaluation.evaluate(query, gallery, args.max_rank)

    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    report.dump_json(report_path)
    print("mAP=%.6f cmc1=%.6f cmc5=%.6f (queries=%d gallery=%d skipped=%d)"
          % (report.map, _cmc_at(report, 1), _cmc_at(report, 5),
             report.n_queries, report.n_gallery, report.skipped_queries))
    print("wrote %s" % report_path)
    return 0


def cmd_gradcheck(args):
    results = gradcheck_mod.run_all(
        seed=args.seed if args.seed is not None else 0,
        tol=args.tolerance,
        n_instances=args.instances,
    )
    width = max(len(name) for name, _, _ in results)
    all_ok = True
    for name, worst, ok in results:
        print("%-*s  worst rel err %.3e  %s"
              % (width, name, worst, "PASS" if ok else "FAIL"))
        all_ok = all_ok and ok
    if not all_ok:
        bad = max((r for r in results if not r[2]), key=lambda r: r[1])
        print("FAILED: %s at %.3e exceeds tolerance %g"
              % (bad[0], bad[1], args.tolerance))
        return 1
    print("all gradient checks passed at tolerance %g" % args.tolerance)
    return 0


_TOY2D_RUNS = [
    ("softmax", "softmax", False),
    ("softmax_dsam", "softmax", True),
    ("angular", "angular-margin", False),
    ("angular_dsam", "angular-margin", True),
]


def cmd_toy2d(args):
    cfg = _load_cfg(args)
    if cfg.train.embedding_dim != 2:
        raise ConfigError("toy2d requires embedding_dim = 2 (got %d)"
                          % cfg.train.embedding_dim)
    if cfg.synthetic_spec.n_classes < 8:
        raise ConfigError("toy2d requires >= 8 classes (got %d)"
                          % cfg.synthetic_spec.n_classes)
    ds = _obtain_dataset(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    summary = {"runs": {}, "labels": [int(v) for v in ds.labels]}
    reference_spread = None
    for name, base, use_dsam in _TOY2D_RUNS:
        train_cfg = dataclasses.replace(cfg.train, base=base, use_dsam=use_dsam)
        net, _, _ = trainer_mod.train(ds, train_cfg)
        emb_ds = _embed_dataset(net, ds)
        path = os.path.join(cfg.out_dir, "emb_%s.csv" % name)
        dataset_mod.save_csv(emb_ds, path, prefix="e")

        diag = evaluation.margin_diagnostics(
            emb_ds.features, ds.labels, cfg.dsam,
            reference_spread=reference_spread,
        )
        if name == "softmax":
            reference_spread = diag.mean_intraclass_angle
        # angle coordinate of each 2-D embedding: the normalized-space view
        angles = np.arctan2(emb_ds.features[:, 1], emb_ds.features[:, 0])
        summary["runs"][name] = {
            "embeddings_csv": os.path.basename(path),
            "diagnostics": diag.as_dict(),
            "angles": [float(a) for a in angles],
        }
        print("%-13s mean intra %.4f  min inter %.4f  satisfied %.3f"
              % (name, diag.mean_intraclass_angle, diag.min_interclass_angle,
                 diag.margin_satisfaction))

    diag_path = os.path.join(cfg.out_dir, "toy2d_diagnostics.json")
    with open(diag_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print("wrote %s" % diag_path)
    return 0


def cmd_margin_sweep(args):
    cfg = _load_cfg(args)
    try:
        margins = [float(tok) for tok in args.margins.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError("--margins must be a comma-separated float list")
    if not margins:
        raise ConfigError("--margins is empty")
    for m in margins:
        if not 0.0 < m < _D_MAX:
            raise ConfigError("margin %g outside (0, %.6f)" % (m, _D_MAX))

    ds = _obtain_dataset(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for m in margins:
        train_cfg = dataclasses.replace(
            cfg.train,
            use_dsam=True,
            dsam=dataclasses.replace(cfg.dsam, m_neg=m),
        )
        try:
            net, _, _ = trainer_mod.train(ds, train_cfg)
            emb_ds = _embed_dataset(net, ds)
            query, gallery = dataset_mod.query_gallery_split(
                emb_ds, cfg.queries_per_class, cfg.seed
            )
            report = evaluation.evaluate(query, gallery, cfg.max_rank)
            rows.append((m, report.map, _cmc_at(report, 1), _cmc_at(report, 5),
                         "ok"))
        except MetricLabError as exc:
            rows.append((m, None, None, None, "failed: %s" % exc))

    table_path = os.path.join(cfg.out_dir, "margin_sweep.csv")
    with open(table_path, "w") as fh:
        fh.write("m_neg,map,cmc1,cmc5,status\n")
        for m, mp, c1, c5, status in rows:
            cells = [repr(m)]
            cells += ["" if v is None else repr(v) for v in (mp, c1, c5)]
            cells.append(status)
            fh.write(",".join(cells) + "\n")

    print("m_neg    mAP       cmc1      cmc5      status")
    for m, mp, c1, c5, status in rows:
        if mp is None:
            print("%-8g %-9s %-9s %-9s %s" % (m, "-", "-", "-", status))
        else:
            print("%-8g %-9.6f %-9.6f %-9.6f %s" % (m, mp, c1, c5, status))
    print("wrote %s" % table_path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metriclab",
        description="Metric-learning laboratory: synthetic data, losses "
                    "with analytic gradients, PK training, and retrieval "
                    "evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output directory"):
        p.add_argument("--config", help="JSON run config path")
        p.add_argument("--out", help=out_help)
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config field, e.g. train.lr=0.02")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    common(p, out_help="output CSV path (default: config dataset_path)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model per the config")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="retrieval evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="dataset CSV to embed")
    p.add_argument("--out", default=".", help="directory for report.json")
    p.add_argument("--seed", type=int, help="split seed (default 0)")
    p.add_argument("--queries-per-class", type=int, default=20)
    p.add_argument("--max-rank", type=int, default=50)
    p.add_argument("--self-retrieval", action="store_true",
                   help="rank the full set against itself (oracle mode)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient table")
    p.add_argument("--seed", type=int, help="instance seed (default 0)")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--instances", type=int, default=20,
                   help="random instances per loss")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("toy2d", help="four-run 2-D embedding comparison")
    common(p)
    p.set_defaults(func=cmd_toy2d)

    p = sub.add_parser("margin-sweep", help="train+eval across hinge margins")
    common(p)
    p.add_argument("--margins", required=True,
                   help="comma-separated margin list, e.g. 0.7,0.8,0.9")
    p.set_defaults(func=cmd_margin_sweep)
    return parser


def entrypoint(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        step = " at step %s" % exc.step if exc.step is not None else ""
        print("numerical abort%s: %s" % (step, exc), file=sys.stderr)
        return 3
    except MetricLabError as exc:
        line = getattr(exc, "line", None)
        where = " (line %s)" % line if line is not None else ""
        print("error%s: %s" % (where, exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(entrypoint())
