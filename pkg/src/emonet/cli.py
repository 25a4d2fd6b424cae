"""Command-line entry point: synth, prepare, train, powell-train, search, eval.

Exit status is 0 on success, 1 for invalid input (bad flags, malformed files)
and 2 for runtime failures such as a diverged training run.
"""
from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import dataset as dsmod
from .dataset import CategoryScheme
from .evaluation import evaluate
from .network import load_model, save_model
from .optim import powell_train
from .search import SearchSpace, load_best, parse_sizes, save_records, search
from .synth import SynthConfig, default_templates, generate, load_templates
from .training import HyperParams, TrainingDiverged, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _range(text: str) -> tuple[float, float, float]:
    """``lo:hi:step`` or a single value."""
    parts = [float(p) for p in text.split(":")]
    if len(parts) == 1:
        return (parts[0], parts[0], 1.0)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}")
    return tuple(parts)


def _sizes(text: str) -> tuple[int, ...]:
    try:
        return parse_sizes(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _existing(text: str) -> Path:
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emonet", description=__doc__.splitlines()[0])
    parser.add_argument("--no-timestamp", action="store_true", help="suppress the timestamp line")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic MU sequences")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--templates", type=_existing, help="label,mu1..mu12 per line")
    p.add_argument("--sequences-per-emotion", type=int, default=10)
    p.add_argument("--frames", type=int, default=20, help="frames per sequence")
    p.add_argument("--neutral-prefix", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.1, help="Gaussian noise std")

    p = sub.add_parser("prepare", help="peak frames, neutral exclusion, split, balancing")
    p.add_argument("--in", dest="inp", required=True, type=_existing)
    p.add_argument("--out", required=True, help="output (training side when splitting)")
    p.add_argument("--test-out", help="write a held-out split here")
    p.add_argument("--split-fraction", type=float, default=0.7)
    p.add_argument("--split-by", choices=("sequence", "frame"), default="sequence")
    p.add_argument("--peak-frames", action="store_true")
    p.add_argument("--neutral-count", type=int, default=3)
    p.add_argument("--peak-count", type=int, default=3)
    p.add_argument("--exclude-neutral", action="store_true")
    p.add_argument("--balance", action="store_true", help="sort and balance (training side)")
    p.add_argument("--seed", type=int, default=0)

    def add_net_flags(p):
        p.add_argument("--data", required=True, type=_existing)
        p.add_argument("--model-out", required=True)
        p.add_argument("--categories", default="auto",
                       help="seven, six, four, vs:<emotion>, a comma list, or auto (labels present)")
        p.add_argument("--hidden", type=_sizes, default=(10,), help="e.g. 10 or 29x28")
        p.add_argument("--sigma", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", action="store_true")

    p = sub.add_parser("train", help="momentum back-propagation")
    add_net_flags(p)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--lambda", dest="momentum", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--weight-clip", type=float)
    p.add_argument("--params-from", type=_existing, help="take sigma/alpha/lambda/sizes from a records file")
    p.add_argument("--shuffle", action="store_true", help="present patterns in a seeded random order")

    p = sub.add_parser("powell-train", help="minimize total error with Powell's method")
    add_net_flags(p)
    p.add_argument("--random-directions", action="store_true")
    p.add_argument("--warm-start", type=_existing, help="start from this model")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--ftol", type=float, default=1e-8)

    p = sub.add_parser("search", help="grid search over sigma, alpha, lambda, sizes")
    p.add_argument("--train", required=True, type=_existing)
    p.add_argument("--validation", required=True, type=_existing)
    p.add_argument("--records", required=True, help="append improvements to this file")
    p.add_argument("--model-out", help="retrain and save the winner")
    p.add_argument("--categories", default="auto")
    p.add_argument("--sigma", type=_range, default=(1.0, 1.0, 1.0), help="lo:hi:step")
    p.add_argument("--alpha", type=_range, default=(0.3, 0.3, 1.0))
    p.add_argument("--lambda", dest="momentum", type=_range, default=(0.5, 0.5, 1.0))
    p.add_argument("--hidden", type=_sizes, action="append", help="repeatable")
    p.add_argument("--patience-turns", type=int)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--median-window", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="confusion table and average rate")
    p.add_argument("--model", required=True, type=_existing)
    p.add_argument("--data", required=True, type=_existing)
    p.add_argument("--median-window", type=int)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--csv", help="also write the counts as CSV")
    return parser


def _scheme(text: str, data: dsmod.Dataset) -> CategoryScheme:
    if text == "auto":
        return CategoryScheme.from_labels(f.label for f in data)
    return CategoryScheme.parse(text)


def _scheme_meta(scheme: CategoryScheme) -> dict[str, str]:
    mapping = ";".join(f"{e.name.lower()}={i}" for e, i in sorted(scheme.mapping.items()))
    return {"categories": ",".join(n.replace(" ", "_") for n in scheme.names), "mapping": mapping}


def _scheme_from_meta(meta: dict[str, str]) -> CategoryScheme:
    if "categories" not in meta or "mapping" not in meta:
        raise ValueError("model file lacks category metadata")
    names = tuple(n.replace("_", " ") for n in meta["categories"].split(","))
    mapping = {}
    for item in meta["mapping"].split(";"):
        label, _, idx = item.partition("=")
        mapping[dsmod.Emotion.parse(label)] = int(idx)
    return CategoryScheme(names, mapping)


def _stamp(args, out):
    if not args.no_timestamp:
        print(f"# {datetime.now(timezone.utc).isoformat(timespec='seconds')}", file=out)


def cmd_synth(args, out):
    templates = load_templates(args.templates) if args.templates else default_templates()
    cfg = SynthConfig(args.frames, args.neutral_prefix, args.noise, args.sequences_per_emotion, args.seed)
    ds = generate(templates, cfg)
    dsmod.save(ds, args.out)
    print(f"wrote {len(ds)} frames in {len(ds.sequence_ids())} sequences to {args.out}", file=out)


def cmd_prepare(args, out):
    ds = dsmod.load(args.inp)
    if args.peak_frames:
        ds = dsmod.take_peak_frames(ds, args.neutral_count, args.peak_count)
    if args.exclude_neutral:
        ds = dsmod.exclude_neutral(ds)
    test = None
    if args.test_out:
        ds, test = dsmod.split(ds, args.split_fraction, args.split_by, args.seed)
    if args.balance:
        ds = dsmod.sort_and_balance(ds, args.seed)
    dsmod.save(ds, args.out)
    counts = ", ".join(f"{e.name.lower()}={n}" for e, n in ds.class_counts().items())
    print(f"wrote {len(ds)} frames to {args.out} ({counts})", file=out)
    if test is not None:
        dsmod.save(test, args.test_out)
        print(f"wrote {len(test)} frames to {args.test_out}", file=out)


def cmd_train(args, out):
    data = dsmod.load(args.data)
    scheme = _scheme(args.categories, data)
    data = scheme.restrict(data)
    if args.shuffle:
        data = dsmod.shuffle(data, args.seed)
    if args.params_from:
        best = load_best(args.params_from)
        sizes, sigma, alpha, momentum = best.hidden_sizes, best.sigma, best.alpha, best.momentum
    else:
        sizes, sigma, alpha, momentum = args.hidden, args.sigma, args.alpha, args.momentum
    hp = HyperParams(alpha=alpha, momentum=momentum, sigma=sigma, hidden_sizes=sizes,
                     max_epochs=args.epochs, patience=args.patience,
                     weight_clip=args.weight_clip, seed=args.seed)
    X, T = dsmod.to_training_pairs(data, scheme)
    _stamp(args, out)
    result = train(X, T, hp)
    if args.trace:
        print("epoch,train_accuracy", file=out)
        for line in result.trace_lines():
            print(line, file=out)
    net = result.network
    net.meta.update(_scheme_meta(scheme))
    save_model(net, args.model_out)
    print(f"best epoch {result.best_epoch} of {result.epochs}, "
          f"train accuracy {result.accuracy_trace[result.best_epoch - 1] * 100:.2f}%", file=out)


def cmd_powell_train(args, out):
    data = dsmod.load(args.data)
    start = load_model(args.warm_start) if args.warm_start else None
    if start is not None and args.categories == "auto" and "categories" in start.meta:
        scheme = _scheme_from_meta(start.meta)
    else:
        scheme = _scheme(args.categories, data)
    data = scheme.restrict(data)
    hp = HyperParams(sigma=start.sigma if start else args.sigma,
                     hidden_sizes=start.hidden_sizes if start else args.hidden, seed=args.seed)
    X, T = dsmod.to_training_pairs(data, scheme)
    _stamp(args, out)
    result = powell_train(X, T, hp, start=start, random_init_directions=args.random_directions,
                          ftol=args.ftol, max_iters=args.max_iters)
    if args.trace:
        print("evaluation_count,best_value", file=out)
        for line in result.trace_lines():
            print(line, file=out)
    net = result.network
    net.meta.update(_scheme_meta(scheme))
    save_model(net, args.model_out)
    print(f"error {result.start_value:.6g} -> {result.final_value:.6g} after "
          f"{result.evaluations} evaluations, train accuracy {result.accuracy * 100:.2f}%", file=out)


def cmd_search(args, out):
    train_set = dsmod.load(args.train)
    validation = dsmod.load(args.validation)
    scheme = _scheme(args.categories, train_set)
    train_set, validation = scheme.restrict(train_set), scheme.restrict(validation)
    space = SearchSpace(
        sigma_range=args.sigma,
        alpha_range=args.alpha,
        lambda_range=args.momentum,
        hidden_size_candidates=tuple(args.hidden or [(10,)]),
        patience_turns=args.patience_turns,
        epochs=args.epochs,
    )
    _stamp(args, out)
    result = search(space, train_set, validation, scheme, seed=args.seed,
                    median_window=args.median_window, workers=args.workers,
                    timestamps=not args.no_timestamp)
    save_records(result.records, args.records)
    print(f"evaluated {result.evaluated} combinations, {len(result.skipped)} diverged", file=out)
    if result.best is None:
        raise RuntimeError("every combination diverged")
    hp = result.best.hyperparams
    print(f"best: sigma={hp.sigma} alpha={hp.alpha} lambda={hp.momentum} "
          f"hidden={'x'.join(map(str, hp.hidden_sizes))} train={result.best.train_rate * 100:.2f}% "
          f"validation={result.best.test_rate * 100:.2f}%", file=out)
    if args.model_out:
        X, T = dsmod.to_training_pairs(train_set, scheme)
        net = train(X, T, hp).network
        net.meta.update(_scheme_meta(scheme))
        save_model(net, args.model_out)


def cmd_eval(args, out):
    net = load_model(args.model)
    scheme = _scheme_from_meta(net.meta)
    data = scheme.restrict(dsmod.load(args.data))
    ev = evaluate(net, data, scheme, median_window=args.median_window, normalize=not args.no_normalize)
    print(ev.matrix.format_table(), file=out)
    print(f"average rate: {ev.average_rate * 100:.2f}%", file=out)
    print(f"frame accuracy: {ev.accuracy * 100:.2f}% ({ev.matrix.total} frames)", file=out)
    if args.csv:
        Path(args.csv).write_text(ev.matrix.to_csv())


COMMANDS = {
    "synth": cmd_synth,
    "prepare": cmd_prepare,
    "train": cmd_train,
    "powell-train": cmd_powell_train,
    "search": cmd_search,
    "eval": cmd_eval,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return 1
    try:
        COMMANDS[args.command](args, out)
    except (ValueError, OSError) as exc:
        print(f"emonet {args.command}: {exc}", file=err)
        return 1
    except (TrainingDiverged, RuntimeError) as exc:
        print(f"emonet {args.command}: {exc}", file=err)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
