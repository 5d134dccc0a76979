"""Command-line interface: ``relfb <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import frontend as fe
from . import ndcore as nd
from .classifier import JointModel, TrainingDiverged, evaluate, train_joint
from .config import RunConfig, load_config, save_config, tiny_config
from .dataio import (
    ManifestError,
    _synth_clip,
    fold_split,
    gen_synthetic,
    load_clips,
    load_manifest,
    read_params,
    read_wav,
    write_features,
    write_params,
)
from .ndcore import ConfigError, ContractError

log = logging.getLogger("relfb")

GRADCHECK_TOL = 1e-4
GRADCHECK_DELTA = 1e-5


class UsageError(Exception):
    """Bad invocation or configuration (exit code 2)."""


# -- helpers --------------------------------------------------------------------


def _config(path) -> RunConfig:
    try:
        return load_config(path)
    except ConfigError as e:
        raise UsageError(str(e)) from None


def _model_config(cfg: RunConfig, n_classes: int):
    try:
        return cfg.model_config(n_classes)
    except (ConfigError, ContractError) as e:
        raise UsageError(str(e)) from None


def _manifest(cfg: RunConfig):
    path = cfg["data.manifest"]
    if not path or not Path(path).is_file():
        raise UsageError(f"manifest not found: {path or '(data.manifest unset)'}")
    try:
        return load_manifest(path)
    except ManifestError as e:
        raise UsageError(str(e)) from None


def _check_rate(clips, cfg: RunConfig) -> None:
    for c in clips:
        if c.sample_rate != cfg["frame.sample_rate"]:
            raise UsageError(f"{c.source}: sample rate {c.sample_rate} Hz, config expects "
                             f"{cfg['frame.sample_rate']} Hz (no resampling)")


def _model_from_params(cfg: RunConfig, params_path) -> JointModel:
    state = read_params(params_path)
    n_classes = state["backend.out.b"].shape[0]
    model = JointModel(_model_config(cfg, n_classes), seed=cfg["seed"])
    try:
        model.load_state(state)
    except ContractError as e:
        raise UsageError(f"{params_path}: {e}") from None
    return model


def model_state(model: JointModel) -> dict[str, np.ndarray]:
    state = model.state()
    state["meta.sample_rate"] = np.array([float(model.cfg.sample_rate)])
    return state


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


# -- commands -------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    try:
        manifest = gen_synthetic(args.out, args.seed, args.n_per_class, args.sample_rate, args.duration,
                                 force=args.force)
    except FileExistsError as e:
        print(f"error: {e} (use --force)", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest)} clips and manifest.csv to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args.config)
    manifest = _manifest(cfg)
    vocab = manifest.labels
    train_m, test_m = fold_split(manifest, cfg["data.test_fold"])
    model = JointModel(_model_config(cfg, len(vocab)), seed=cfg["seed"])
    train_clips, test_clips = load_clips(train_m), load_clips(test_m)
    _check_rate(train_clips + test_clips, cfg)
    train_x = [model.prepare(c.samples) for c in train_clips]
    test_x = [model.prepare(c.samples) for c in test_clips]
    run = cfg.train_run()
    try:
        result = train_joint(model, train_x, train_m.class_index(vocab), run, test_x, test_m.class_index(vocab),
                             waveforms=[c.samples for c in train_clips])
    except (TrainingDiverged, nd.NonFiniteGradientError) as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return 1

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # absolute manifest path so the echoed config reruns from anywhere
    save_config(out / "config.txt", cfg.with_overrides({"data.manifest": str(Path(cfg["data.manifest"]).resolve())}))
    write_params(out / "params.bin", model_state(model))
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "lr", "loss", "train_acc", "val_acc"])
        for m in result.metrics:
            w.writerow([m.epoch, _fmt(m.lr), _fmt(m.loss), _fmt(m.train_acc), _fmt(m.val_acc)])
    if result.mu_trajectory:
        sr = model.cfg.sample_rate
        with open(out / "mu_trajectory.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "filter", "mu", "center_hz"])
            for epoch, mu in enumerate(result.mu_trajectory):
                for i, v in enumerate(mu):
                    w.writerow([epoch, i, _fmt(v), _fmt(v * sr)])
    print(f"trained {run.epochs} epochs; outputs in {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args.config)
    manifest = _manifest(cfg)
    vocab = manifest.labels
    model = _model_from_params(cfg, args.params)
    if model.cfg.backend.n_classes != len(vocab):
        raise UsageError(f"parameters are for {model.cfg.backend.n_classes} classes, manifest has {len(vocab)}")
    try:
        _, test_m = fold_split(manifest, args.test_fold)
    except ManifestError as e:
        raise UsageError(str(e)) from None
    clips = load_clips(test_m)
    _check_rate(clips, cfg)
    res = evaluate(model, [model.prepare(c.samples) for c in clips], test_m.class_index(vocab), cfg.plan())
    print(f"macro accuracy: {100 * res.macro:.2f}%  (overall {100 * res.overall:.2f}%, n={len(clips)})")
    width = max(len(v) for v in vocab)
    for i, label in enumerate(vocab):
        acc = res.per_class[i]
        shown = "   n/a" if np.isnan(acc) else f"{100 * acc:6.2f}"
        print(f"  {label:<{width}}  {shown}%  (n={res.counts[i]})")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class", "label", "n", "accuracy"])
            for i, label in enumerate(vocab):
                w.writerow([i, label, int(res.counts[i]), _fmt(res.per_class[i])])
            w.writerow(["macro", "", int(res.counts.sum()), _fmt(res.macro)])
    return 0


def cmd_extract(args) -> int:
    cfg = _config(args.config)
    model = _model_from_params(cfg, args.params)
    clip = read_wav(args.input)
    _check_rate([clip], cfg)
    inputs = nd.Tensor(model.prepare(clip.samples)[None])
    x, masks = model.representation(inputs)
    stack = nd.minmax_scale(fe.delta_stack(x, model.cfg.delta_window)).data[0]
    write_features(args.out, stack)
    if args.dump_masks:
        d = Path(args.dump_masks)
        d.mkdir(parents=True, exist_ok=True)
        for i, m in enumerate(masks):
            np.savetxt(d / f"mask_head{i}.csv", m.data[0], delimiter=",", fmt="%.17g")
        print(f"wrote {len(masks)} mask file(s) to {d}")
    print(f"wrote features {stack.shape} to {args.out}")
    return 0


def cmd_inspect_filters(args) -> int:
    state = read_params(args.params)
    sr = args.sample_rate or float(state.get("meta.sample_rate", [16000.0])[0])
    if "frontend.mu" in state:
        mu = state["frontend.mu"]
    elif "frontend.f_low" in state:
        mu = 0.5 * (state["frontend.f_low"] + state["frontend.f_high"])
    else:
        print("error: parameter file has no learnable filterbank", file=sys.stderr)
        return 1
    order = fe.band_order(mu)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["filter", "mu", "center_hz"])
        for i in order:
            w.writerow([int(i), _fmt(mu[i]), _fmt(mu[i] * sr)])
    print(f"wrote {mu.size} filter centres to {args.out}")
    return 0


def gradcheck_problem(cfg: RunConfig, n_classes: int = 3, n_clips: int = 2):
    """Model, loss closure and parameters for a full-pipeline gradient check."""
    mcfg = _model_config(cfg, n_classes)
    model = JointModel(mcfg, seed=cfg["seed"])
    rng = np.random.default_rng(cfg["seed"])
    T = 12
    while True:
        crop = model.crop_length(T, cfg.plan())
        try:
            model.backend.check_input(mcfg.F, crop)
            break
        except ContractError:
            T += 4
    n = mcfg.S + mcfg.hop * (T - 1)
    labels = ["low_tone", "high_tone", "up_chirp", "am_tone"]
    waves = [_synth_clip(labels[i % len(labels)], rng, mcfg.sample_rate, n) for i in range(n_clips)]
    inputs = np.stack([model.prepare(w) for w in waves])
    plan = cfg.plan()
    draw = model.sample_draw(n_clips, model.n_frames(inputs[0]), plan, rng)
    target = np.eye(n_classes)[np.arange(n_clips) % n_classes]
    if draw.partner is not None:
        target = draw.lam * target + (1 - draw.lam) * target[draw.partner]
    params = model.trainable()

    def loss_fn():
        return nd.softmax_cross_entropy(model.logits(inputs, plan, draw), target)

    return model, loss_fn, params


def cmd_gradcheck(args) -> int:
    cfg = _config(args.config) if args.config else RunConfig()
    if args.tiny:
        cfg = tiny_config(cfg)
    if args.corrupt_grad:
        fe._grad_corruption = 1.5
    try:
        start = time.perf_counter()
        _, loss_fn, params = gradcheck_problem(cfg)
        report = nd.finite_diff_gradcheck(loss_fn, params, GRADCHECK_DELTA, GRADCHECK_TOL)
        elapsed = time.perf_counter() - start
    finally:
        fe._grad_corruption = 1.0
    groups: dict[str, float] = {}
    for name, err in report.errors.items():
        group = name.split(".")[0]
        groups[group] = max(groups.get(group, 0.0), err)
    for name, err in report.errors.items():
        print(f"  {name:<28} {err:.3e}")
    for group, err in groups.items():
        print(f"{group:<10} worst relative error {err:.3e}  {'ok' if err < GRADCHECK_TOL else 'FAIL'}")
    print(f"gradcheck {'passed' if report.passed else 'FAILED'} in {elapsed:.1f} s (tol {GRADCHECK_TOL:g})")
    return 0 if report.passed else 1


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relfb", description="Learnable filterbank + relevance weighting toolkit.")
    p.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write the synthetic six-class dataset")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--n-per-class", type=int, default=120)
    g.add_argument("--sample-rate", type=int, default=16000)
    g.add_argument("--duration", type=float, default=1.0)
    g.add_argument("--force", action="store_true", help="overwrite an existing dataset")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train the joint model")
    t.add_argument("--config", required=True)
    t.add_argument("--out-dir", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate trained parameters on a fold")
    e.add_argument("--config", required=True)
    e.add_argument("--params", required=True)
    e.add_argument("--test-fold", type=int, required=True)
    e.add_argument("--csv", help="also write per-class accuracy CSV here")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("extract", help="write the enhanced representation of one WAV")
    x.add_argument("--config", required=True)
    x.add_argument("--params", required=True)
    x.add_argument("--in", dest="input", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--dump-masks", metavar="DIR", help="write one relevance-mask CSV per head")
    x.set_defaults(func=cmd_extract)

    f = sub.add_parser("inspect-filters", help="CSV of filter centre frequencies")
    f.add_argument("--params", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--sample-rate", type=float, help="override the rate stored in the parameter file")
    f.set_defaults(func=cmd_inspect_filters)

    c = sub.add_parser("gradcheck", help="finite-difference check of the full pipeline")
    c.add_argument("--config")
    c.add_argument("--tiny", action="store_true", help="F=8, k=65, S=256, c=2, hidden=5, 2 heads")
    c.add_argument("--corrupt-grad", action="store_true", help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
