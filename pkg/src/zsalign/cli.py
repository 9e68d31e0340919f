"""Command-line surface: synth / train / eval / gradcheck / ablate.

All commands are driven by a JSON config; command-line flags override
config fields (flags > file > defaults). Exit codes: 0 success, 1
usage/config error, 2 runtime or numerical error.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .data import (SynthConfig, load_dataset, minmax_features, save_dataset,
                   synth_generate)
from .evaluation import (EvalCounts, czsl_eval, encode_test_features,
                         gzsl_eval)
from .gradcheck import run_gradcheck
from .model import Architecture, Model, load_checkpoint, save_checkpoint
from .rng import Rng
from .training import (AblationFlags, TrainSchedule, TrainingDivergence, fit,
                       write_curves)


class ConfigError(ValueError):
    pass


def load_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            cfg = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _take(cfg, key, cls):
    sub = cfg.get(key, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"config field '{key}' must be an object")
    valid = set(cls.__dataclass_fields__)
    unknown = set(sub) - valid
    if unknown:
        raise ConfigError(f"unknown field '{sorted(unknown)[0]}' in '{key}'")
    return cls(**sub)


def resolve_dataset(cfg, seed):
    has_path = "dataset" in cfg
    has_synth = "synth" in cfg
    if has_path == has_synth:
        raise ConfigError(
            "config must name exactly one dataset source: 'dataset' or 'synth'")
    if has_path:
        ds = load_dataset(cfg["dataset"])
    else:
        synth = _take(cfg, "synth", SynthConfig)
        if "seed" not in cfg.get("synth", {}):
            synth.seed = seed
        ds = synth_generate(synth)
    if cfg.get("minmax", False):
        ds = minmax_features(ds)
    return ds


def config_hash(cfg):
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode("utf-8")).hexdigest()


def write_manifest(out, cfg, seed):
    doc = {
        "config_hash": config_hash(cfg),
        "seed": seed,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)


def build_model(cfg, ds, seed):
    overrides = cfg.get("model", {})
    valid = set(Architecture.__dataclass_fields__)
    unknown = set(overrides) - valid
    if unknown:
        raise ConfigError(f"unknown field '{sorted(unknown)[0]}' in 'model'")
    arch = Architecture(visual_dim=ds.visual_dim, attr_dim=ds.attr_dim,
                        n_seen_classes=len(ds.seen_classes), **{
                            k: v for k, v in overrides.items()
                            if k not in ("visual_dim", "attr_dim",
                                         "n_seen_classes")})
    return Model(arch, Rng(seed).spawn(1)[0])


def _eval_counts(cfg):
    ev = cfg.get("eval", {})
    czsl = EvalCounts(unseen=int(ev.get("czsl_unseen", 200)), seen=0)
    gzsl = EvalCounts(unseen=int(ev.get("gzsl_unseen", 400)),
                      seen=int(ev.get("gzsl_seen", 200)))
    return czsl, gzsl, bool(ev.get("use_mean", False))


# ---- commands ------------------------------------------------------------

def cmd_synth(cfg, seed, out):
    os.makedirs(out, exist_ok=True)
    synth = _take(cfg, "synth", SynthConfig)
    if "seed" not in cfg.get("synth", {}):
        synth.seed = seed
    ds = synth_generate(synth)
    target = os.path.join(out, "dataset")
    save_dataset(ds, target)
    print(f"wrote dataset to {target}: {ds.n_samples} samples, "
          f"{ds.n_classes} classes ({len(ds.seen_classes)} seen / "
          f"{len(ds.unseen_classes)} unseen), visual_dim {ds.visual_dim}, "
          f"attr_dim {ds.attr_dim}")
    return 0


def _train_one(cfg, ds, seed, flags):
    sched = _take(cfg, "schedule", TrainSchedule)
    model = build_model(cfg, ds, seed)
    curves = fit(model, ds, sched, Rng(seed).spawn(2)[1], flags)
    return model, curves


def cmd_train(cfg, seed, out):
    os.makedirs(out, exist_ok=True)
    ds = resolve_dataset(cfg, seed)
    flags = _take(cfg, "ablation", AblationFlags)
    model, curves = _train_one(cfg, ds, seed, flags)
    save_checkpoint(model, os.path.join(out, "checkpoint.bin"))
    write_curves(curves, os.path.join(out, "curves.csv"))
    write_manifest(out, cfg, seed)
    if curves:
        last = curves[-1]
        print(f"trained {len(curves)} epochs; final rec {last['rec']:.4f}, "
              f"cls {last['cls']:.4f}")
    print(f"artifacts in {out}")
    return 0


def cmd_eval(cfg, seed, out, checkpoint):
    os.makedirs(out, exist_ok=True)
    ds = resolve_dataset(cfg, seed)
    model = load_checkpoint(checkpoint)
    if model.arch.visual_dim != ds.visual_dim:
        raise ConfigError(
            f"checkpoint visual_dim {model.arch.visual_dim} does not match "
            f"dataset visual_dim {ds.visual_dim}")
    if model.arch.attr_dim != ds.attr_dim:
        raise ConfigError(
            f"checkpoint attr_dim {model.arch.attr_dim} does not match "
            f"dataset attr_dim {ds.attr_dim}")
    czsl_counts, gzsl_counts, use_mean = _eval_counts(cfg)
    rng = Rng(seed)
    r_czsl, r_gzsl, r_dump = rng.spawn(3)
    rep_c = czsl_eval(model, ds, czsl_counts, r_czsl, seed=seed,
                      use_mean=use_mean)
    rep_g = gzsl_eval(model, ds, gzsl_counts, r_gzsl, seed=seed,
                      use_mean=use_mean)
    for name, rep in (("metrics_czsl.json", rep_c), ("metrics_gzsl.json",
                                                     rep_g)):
        with open(os.path.join(out, name), "w", encoding="utf-8") as f:
            f.write(rep.to_json() + "\n")
    _dump_latents(model, ds, r_dump, os.path.join(out, "latents.csv"))
    print(f"CZSL acc {rep_c.acc:.2f} | GZSL U {rep_g.u:.2f} S {rep_g.s:.2f} "
          f"H {rep_g.h:.2f}")
    print(f"reports in {out}")
    return 0


def _dump_latents(model, ds, rng, path):
    """Raw latent embeddings of all test samples, for external plotting."""
    idx = np.concatenate([ds.test_seen_idx, ds.test_unseen_idx])
    z = encode_test_features(model, ds.features[idx], rng)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        dims = ",".join(f"z{j}" for j in range(z.shape[1]))
        f.write(f"sample,class,{dims}\n")
        for i, sample in enumerate(idx):
            vals = ",".join(f"{v:.6f}" for v in z[i])
            f.write(f"{int(sample)},{int(ds.labels[sample])},{vals}\n")


def cmd_gradcheck(cfg, seed, out):
    results = run_gradcheck(seed=seed)
    width = max(len(n) for n, _, _ in results)
    ok = True
    for name, err, passed in results:
        ok &= passed
        print(f"{name:<{width}}  rel_err {err:.3e}  "
              f"{'pass' if passed else 'FAIL'}")
    return 0 if ok else 2


ABLATION_VARIANTS = (
    ("full", AblationFlags()),
    ("no_sa", AblationFlags(disable_sa=True)),
    ("no_da_icoral", AblationFlags(disable_da_icoral=True)),
    ("no_icoral", AblationFlags(disable_icoral=True)),
)


def cmd_ablate(cfg, seed, out):
    os.makedirs(out, exist_ok=True)
    seeds = cfg.get("seeds", [seed + i for i in range(5)])
    czsl_counts, gzsl_counts, use_mean = _eval_counts(cfg)
    rows = []
    for name, flags in ABLATION_VARIANTS:
        for s in seeds:
            ds = resolve_dataset(cfg, s)
            model, _ = _train_one(cfg, ds, s, flags)
            rng = Rng(s + 1_000_003)
            r_c, r_g = rng.spawn(2)
            rep_c = czsl_eval(model, ds, czsl_counts, r_c, seed=s,
                              use_mean=use_mean)
            rep_g = gzsl_eval(model, ds, gzsl_counts, r_g, seed=s,
                              use_mean=use_mean)
            rows.append((name, s, rep_g.u, rep_g.s, rep_g.h, rep_c.acc))
            print(f"{name} seed {s}: U {rep_g.u:.2f} S {rep_g.s:.2f} "
                  f"H {rep_g.h:.2f} Acc {rep_c.acc:.2f}")
    path = os.path.join(out, "ablation.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("variant,seed,u,s,h,acc\n")
        for name, s, u, sv, h, acc in rows:
            f.write(f"{name},{s},{u:.2f},{sv:.2f},{h:.2f},{acc:.2f}\n")
        for name, _ in ABLATION_VARIANTS:
            sub = [r for r in rows if r[0] == name]
            mean = [float(np.mean([r[i] for r in sub])) for i in (2, 3, 4, 5)]
            f.write(f"{name},mean,{mean[0]:.2f},{mean[1]:.2f},"
                    f"{mean[2]:.2f},{mean[3]:.2f}\n")
    print(f"ablation table in {path}")
    return 0


# ---- entry point ---------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="zsalign",
        description="Cross-modal zero-shot learning with structure-then-"
                    "distribution alignment")
    sub = parser.add_subparsers(dest="command", required=True)
    for verb in ("synth", "train", "eval", "gradcheck", "ablate"):
        p = sub.add_parser(verb)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        if verb == "eval":
            p.add_argument("--checkpoint", required=True)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out = args.out if args.out is not None else cfg.get("out", "runs/out")
        if args.command == "synth":
            return cmd_synth(cfg, seed, out)
        if args.command == "train":
            return cmd_train(cfg, seed, out)
        if args.command == "eval":
            return cmd_eval(cfg, seed, out, args.checkpoint)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, seed, out)
        if args.command == "ablate":
            return cmd_ablate(cfg, seed, out)
        return 1
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (ValueError, TrainingDivergence, RuntimeError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
