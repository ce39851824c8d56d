"""Command-line entry point: ``lacgan {gen-data,train,eval,gradcheck,compare}``.

Exit codes: 0 success, 1 gradient check failed, 2 configuration error,
3 data or file error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .data import TRAINABLE, corpus_statistics, generate_separable, generate_synthetic, load_jsonl, save_jsonl, split_dataset
from .errors import CheckpointError, ConfigError, DataError, NumericalError, ValidationError
from .gradcheck import TOLERANCE, run_all
from .model import METHODS
from .train import TrainConfig, Trainer, compare_methods, evaluate, model_from_checkpoint, prepare_data

log = logging.getLogger("lacgan")

EXIT_OK, EXIT_GRADCHECK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3, 4


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_props(text: str) -> dict[str, float]:
    """``"0.4,0.2,0.2,0.2"`` (N, M0, M1, M2 order) or ``"N=0.4,M0=0.2,..."``."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if all("=" in p for p in parts):
            return {k.strip(): float(v) for k, v in (p.split("=", 1) for p in parts)}
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"cannot parse class proportions {text!r}") from None
    if len(values) != len(TRAINABLE):
        raise ConfigError(f"--props needs {len(TRAINABLE)} values (N, M0, M1, M2), got {len(values)}")
    return {c.value: v for c, v in zip(TRAINABLE, values)}


def parse_overrides(pairs) -> dict:
    """Flat ``key=value`` strings typed against the TrainConfig fields."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    defaults = TrainConfig()
    out = {}
    for pair in pairs:
        line = pair.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        kind = type(getattr(defaults, key))
        try:
            out[key] = _parse_bool(value) if kind is bool else kind(value)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    return out


def read_config_file(path) -> dict:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_overrides(lines)


def _load_samples(path):
    try:
        return load_jsonl(path)
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    overrides = {"n": args.n, "seed": args.seed}
    if args.separable:
        samples = generate_separable(n=args.n, seed=args.seed)
    else:
        if args.props:
            overrides["class_props"] = parse_props(args.props)
        if args.n_excluded is not None:
            overrides["n_excluded"] = args.n_excluded
        elif args.n != 896:
            overrides["n_excluded"] = 0
        samples = generate_synthetic(**overrides)
    out = Path(args.out)
    try:
        save_jsonl(samples, out)
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc.strerror}") from None
    stats = corpus_statistics(samples)
    print(f"{'Data set size (all categories)':<36}{stats['size']:>10}")
    print(f"{'Number of unique words':<36}{stats['unique_words']:>10}")
    print(f"{'Average words per situation':<36}{stats['avg_words_per_situation']:>10.1f}")
    trainable = [s for s in samples if s.label in TRAINABLE]
    if len(trainable) >= 10:
        split = split_dataset(samples, 0)
        print(f"{'Train / validation / test':<36}{len(split.train):>4} / {len(split.validation)} / {len(split.test)}")
    return EXIT_OK


def _read_manifest(path) -> dict:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
        manifest["config"], manifest["inputs"]["data"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    return manifest


def _resolve_config(args, manifest: dict | None) -> TrainConfig:
    """Manifest < config file < --set < explicit flags."""
    values = {}
    if manifest:
        values.update(manifest["config"])
    if args.config:
        values.update(read_config_file(args.config))
    values.update(parse_overrides(args.set or []))
    for flag in ("method", "pa", "seed", "epochs"):
        v = getattr(args, flag)
        if v is not None:
            values[flag] = v
    return TrainConfig.from_dict(values)


def cmd_train(args) -> int:
    manifest = _read_manifest(args.manifest) if args.manifest else None
    if args.data:
        data_path = Path(args.data)
    elif manifest:
        data_path = Path(manifest["inputs"]["data"]["path"])
    else:
        raise ConfigError("--data is required (or --manifest naming it)")
    samples = _load_samples(data_path)
    digest = sha256_file(data_path)
    if manifest and digest != manifest["inputs"]["data"]["sha256"]:
        raise DataError(f"data file {data_path} does not match the manifest digest")

    if args.resume:
        ckpt = load_checkpoint(args.resume)
        config = TrainConfig.from_dict(ckpt.config)
        if args.epochs is not None:
            config = dataclasses.replace(config, epochs=args.epochs)
    else:
        config = _resolve_config(args, manifest)
    data = prepare_data(samples, config.split_seed, config.embed_seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.resume:
        trainer = Trainer.from_checkpoint(ckpt, data)
        trainer.config = config
    else:
        trainer = Trainer(config, data)

    t0 = time.perf_counter()
    last_path = out / "last.ckpt"
    while not trainer.done:
        rec = trainer.step_epoch()
        if args.save_every and trainer.epoch % args.save_every == 0:
            save_checkpoint(trainer.checkpoint(), last_path)
        if trainer.epoch % 25 == 0 or trainer.done:
            log.info("epoch %d train %.3f val %.3f", rec["epoch"], rec["train_acc"], rec["val_acc"])

    test_acc = evaluate(trainer.best_model(), *data.test)
    metrics = trainer.metrics(test_acc)
    save_checkpoint(trainer.checkpoint(), last_path)
    save_checkpoint(trainer.best_checkpoint(test_acc), out / "best.ckpt")
    with open(out / "metrics.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in metrics.history:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        fh.write(json.dumps(metrics.summary(), sort_keys=True) + "\n")
    artifacts = {name: str((out / name).resolve()) for name in ("best.ckpt", "last.ckpt", "metrics.jsonl")}
    manifest = {
        "tool": "lacgan",
        "version": __version__,
        "command": "train",
        "seed": config.seed,
        "config": config.to_dict(),
        "inputs": {"data": {"path": str(data_path.resolve()), "sha256": digest}},
        "artifacts": {name: {"path": p, "sha256": sha256_file(p)} for name, p in artifacts.items()},
    }
    if args.resume:
        manifest["inputs"]["resume"] = {"path": str(Path(args.resume).resolve()), "sha256": sha256_file(args.resume)}
    _write_json(out / "manifest.json", manifest)
    print(json.dumps({**metrics.summary(), "method": config.method, "pa": config.pa, "seconds": round(time.perf_counter() - t0, 2)}, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    config = TrainConfig.from_dict(ckpt.config)
    data = prepare_data(_load_samples(args.data), config.split_seed, config.embed_seed)
    section = "model" if ckpt.kind == "train" and args.which == "last" else "best"
    model = model_from_checkpoint(ckpt, section)
    X, Y = data[args.split]
    acc = evaluate(model, X, Y)
    print(repr(acc))
    report = {
        "checkpoint": str(args.checkpoint),
        "checkpoint_kind": ckpt.kind,
        "method": ckpt.method,
        "pa": config.pa,
        "epoch": ckpt.epoch,
        "split": args.split,
        "n": int(len(X)),
        "correct": int(round(acc * len(X))),
        "accuracy": acc,
    }
    if args.report:
        _write_json(Path(args.report), report)
    else:
        print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seeds = [args.seed] if args.seed is not None else [0, 1, 2, 3, 4]
    t0 = time.perf_counter()
    reports = run_all(seeds, n_entries=args.entries, perturb=args.perturb)
    worst: dict[str, tuple[float, str, str]] = {}
    for r in reports:
        net = r.name.split("(")[0]
        layer, err = r.worst
        if net not in worst or err > worst[net][0]:
            worst[net] = (err, layer, r.name)
    overall = max(w[0] for w in worst.values())
    ok = overall < TOLERANCE
    for net in ("E", "G", "D"):
        err, name, where = worst[net]
        layer, param = name.split("/")
        print(f"{net}: worst relative error {err:.3e} in layer {layer} parameter {param} ({where})")
    print(f"max relative error {overall:.3e} over seeds {seeds} (tolerance {TOLERANCE:g}): {'PASS' if ok else 'FAIL'}")
    log.info("gradcheck took %.1f s", time.perf_counter() - t0)
    return EXIT_OK if ok else EXIT_GRADCHECK


def cmd_compare(args) -> int:
    samples = _load_samples(args.data)
    base = TrainConfig.from_dict({**TrainConfig().to_dict(), **parse_overrides(args.set or [])})
    if args.epochs is not None:
        base = dataclasses.replace(base, epochs=args.epochs)
    data = prepare_data(samples, base.split_seed, base.embed_seed)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    t0 = time.perf_counter()
    report = compare_methods(data, seeds, base, jobs=args.jobs)
    print(report.format())
    if args.out:
        _write_json(Path(args.out), {**report.to_dict(), "seconds": round(time.perf_counter() - t0, 2), "config": base.to_dict()})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lacgan", description="LAC-GAN classifier: data, training, evaluation and checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic JSONL corpus and print its statistics")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=896)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--props", help="class shares for N,M0,M1,M2, e.g. 0.25,0.25,0.25,0.25")
    g.add_argument("--n-excluded", type=int, help="E1/E2/O records (default 223 for n=896, else 0)")
    g.add_argument("--separable", action="store_true", help="toy corpus with class-exclusive vocabularies")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="fit one method and write checkpoints, metrics and a manifest")
    t.add_argument("--data")
    t.add_argument("--method", choices=METHODS)
    t.add_argument("--pa", type=_bool_arg, metavar="{true,false}")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="flat key=value file")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field (repeatable)")
    t.add_argument("--manifest", help="re-run the configuration recorded in a manifest.json")
    t.add_argument("--resume", help="continue from a last.ckpt")
    t.add_argument("--save-every", type=int, default=0, metavar="N", help="also write last.ckpt every N epochs")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="accuracy of a checkpoint on one split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=("train", "validation", "test"), default="test")
    e.add_argument("--which", choices=("best", "last"), default="best", help="model inside a training-state checkpoint")
    e.add_argument("--report", help="write the JSON report here instead of stdout")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("gradcheck", help="finite-difference check of every backward pass")
    c.add_argument("--seed", type=int, help="single seed (default: seeds 0-4)")
    c.add_argument("--entries", type=int, default=6, help="entries sampled per parameter array")
    c.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_gradcheck)

    m = sub.add_parser("compare", help="all four methods over several seeds")
    m.add_argument("--data", required=True)
    m.add_argument("--seeds", default="0,1,2")
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("--epochs", type=int)
    m.add_argument("--set", action="append", metavar="KEY=VALUE")
    m.add_argument("--out", help="write the JSON report here")
    m.set_defaults(func=cmd_compare)
    return p


def _bool_arg(text: str) -> bool:
    try:
        return _parse_bool(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"lacgan: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"lacgan: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ValidationError, CheckpointError, OSError) as exc:
        print(f"lacgan: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
