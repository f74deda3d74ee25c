"""Command-line entry point.

Subcommands: gen, train, predict, explain, verify, report, render.
Exit codes: 0 success, 1 usage error, 2 data/model error, 3 internal
invariant violation. All randomness flows from --seed through named
sub-seed derivation, so identical invocations write identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench, hier, render
from .errors import HexplainError, InternalInvariantError
from .hier import (
    HX_FORMAL,
    METHODS,
    ExplanationReport,
    PipelineModel,
    explain_hierarchical,
    predict,
    read_report,
    summarize,
    verify_minimality,
    write_report,
)
from .nn import TrainConfig, accuracy, load_model, save_model, train
from .tasks import TaskSpec, decision_class_count

DEFAULT_EPS = {"lex": 0.3, "regex": 0.3, "pacman": 0.2}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="hexplain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate seeded instance files")
    gen.add_argument("--task", required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--glyph-size", type=int, default=None)
    gen.add_argument("--jitter", type=float, default=bench.DEFAULT_JITTER)
    gen.add_argument("--noise", type=float, default=bench.DEFAULT_NOISE)
    gen.add_argument("--allow-duplicates", action="store_true")

    tr = sub.add_parser("train", help="train and save a model")
    tr.add_argument("--task", required=True)
    tr.add_argument("--seed", type=int, required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--count", type=int, default=2000)
    tr.add_argument("--epochs", type=int, default=60)
    tr.add_argument("--learning-rate", type=float, default=0.3)
    tr.add_argument("--batch-size", type=int, default=32)
    tr.add_argument("--hidden", default=None, help="comma-separated layer sizes")
    tr.add_argument("--glyph-size", type=int, default=None)
    tr.add_argument("--jitter", type=float, default=bench.DEFAULT_JITTER)
    tr.add_argument("--noise", type=float, default=bench.DEFAULT_NOISE)
    tr.add_argument(
        "--whole",
        action="store_true",
        help="train the whole-image baseline over flattened instances",
    )

    pr = sub.add_parser("predict", help="run the pipeline on an instance")
    pr.add_argument("--model", required=True)
    pr.add_argument("--instance", required=True)

    ex = sub.add_parser("explain", help="write an explanation report and masks")
    ex.add_argument("--method", choices=METHODS, default=HX_FORMAL)
    ex.add_argument("--eps", type=float, default=None)
    ex.add_argument("--model", required=True)
    ex.add_argument("--instance", required=True, help="instance file or directory")
    ex.add_argument("--out", required=True)
    ex.add_argument("--tau", type=float, default=0.9)
    ex.add_argument("--nsamples", type=int, default=hier.DEFAULT_SHAP_SAMPLES)
    ex.add_argument("--delta-min", type=float, default=1e-3)
    ex.add_argument("--max-boxes", type=int, default=400000)
    ex.add_argument("--nn-model", default=None)
    ex.add_argument("--parallel", type=int, default=None)

    ve = sub.add_parser("verify", help="certify a report's minimality")
    ve.add_argument("--model", required=True)
    ve.add_argument("--instance", required=True)
    ve.add_argument("--report", required=True)
    ve.add_argument("--levels", type=int, default=3)

    re_ = sub.add_parser("report", help="summarize a directory of reports")
    re_.add_argument("--dir", required=True)
    re_.add_argument("--json-out", default=None)

    rn = sub.add_parser("render", help="render an instance (optionally masked)")
    rn.add_argument("--instance", required=True)
    rn.add_argument("--out", required=True)
    rn.add_argument("--report", default=None)

    return parser


def _parallelism(flag_value: int | None) -> int:
    if flag_value is not None:
        return max(1, flag_value)
    env = os.environ.get("HEXPLAIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"HEXPLAIN_THREADS must be an integer, got {env!r}")
    return 1


def _cmd_gen(args) -> int:
    task = TaskSpec.from_string(args.task)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    instances = bench.gen_benchmark(
        task,
        args.count,
        args.seed,
        glyph_size=args.glyph_size,
        jitter=args.jitter,
        noise=args.noise,
        unique=not args.allow_duplicates,
    )
    for index, instance in enumerate(instances):
        bench.write_instance(instance, out / f"instance_{index:04d}.json")
    print(f"wrote {len(instances)} instances to {out}")
    return 0


def _cmd_train(args) -> int:
    task = TaskSpec.from_string(args.task)
    if args.whole:
        dataset = bench.gen_whole_image_dataset(
            task,
            args.count,
            args.seed,
            glyph_size=args.glyph_size,
            jitter=args.jitter,
            noise=args.noise,
        )
        hidden = _parse_hidden(args.hidden, default=(32,))
        num_classes = decision_class_count(task)
    else:
        kind = "cells" if task.kind == "pacman" else "digits"
        dataset = bench.gen_dataset(
            kind,
            args.count,
            args.seed,
            glyph_size=args.glyph_size,
            jitter=args.jitter,
            noise=args.noise,
        )
        hidden = _parse_hidden(
            args.hidden, default=(128,) if task.kind == "pacman" else (10, 10)
        )
        num_classes = task.num_classes
    config = TrainConfig(args.learning_rate, args.epochs, args.batch_size, args.seed)
    model = train(dataset, config, hidden=hidden, num_classes=num_classes)
    save_model(model, args.out)
    print(f"trained on {len(dataset)} examples, accuracy {accuracy(model, dataset):.4f}")
    return 0


def _parse_hidden(text: str | None, default: tuple[int, ...]) -> tuple[int, ...]:
    if text is None:
        return default
    if not text.strip():
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"--hidden expects comma-separated integers, got {text!r}")


def _load_pipeline(model_path, task: TaskSpec) -> PipelineModel:
    return PipelineModel(load_model(model_path), task)


def _cmd_predict(args) -> int:
    instance = bench.read_instance(args.instance)
    pipeline = _load_pipeline(args.model, instance.task)
    decision, labels = predict(pipeline, instance)
    names = instance.task.label_names
    print(f"labels: {' '.join(names[v] for v in labels)}")
    print(f"decision: {_format_decision(decision)}")
    return 0


def _format_decision(decision) -> str:
    if isinstance(decision, bool):
        return "true" if decision else "false"
    if decision == float("inf"):
        return "unreachable"
    return str(int(decision))


def _instance_paths(path_text: str) -> list[Path]:
    path = Path(path_text)
    if path.is_dir():
        return sorted(path.glob("*.json"))
    return [path]


def _cmd_explain(args) -> int:
    paths = _instance_paths(args.instance)
    if not paths:
        raise HexplainError(f"no instance files under {args.instance}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(args.model)
    nn_model = load_model(args.nn_model) if args.nn_model else None
    workers = _parallelism(args.parallel)

    def explain_path(path: Path) -> ExplanationReport:
        instance = bench.read_instance(path)
        pipeline = PipelineModel(model, instance.task)
        eps = args.eps
        if eps is None and args.method == HX_FORMAL:
            eps = DEFAULT_EPS[instance.task.kind]
        report = explain_hierarchical(
            pipeline,
            instance,
            args.method,
            eps=eps,
            tau=args.tau,
            nsamples=args.nsamples,
            resolution=args.delta_min,
            max_boxes=args.max_boxes,
            nn_model=nn_model,
        )
        stem = path.stem
        # Reports are written with timings dropped so identical invocations
        # stay byte-identical; wall times go to the console instead.
        stable = ExplanationReport(
            task=report.task,
            method=report.method,
            eps=report.eps,
            decision=report.decision,
            labels=report.labels,
            symbolic_set=report.symbolic_set,
            per_input=report.per_input,
            features_per_input=report.features_per_input,
            unknown_kept=report.unknown_kept,
            timings={},
        )
        write_report(stable, out / f"{stem}.report.json")
        for j in report.symbolic_set:
            masked = render.mask_overlay(instance.images[j], report.per_input[j])
            render.write_netpbm(masked, out / f"{stem}.mask_input{j}.pgm")
        render.write_netpbm(
            render.tile_explanation(instance, report.per_input),
            out / f"{stem}.tiled.pgm",
        )
        return report

    if workers > 1 and len(paths) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(explain_path, paths))
    else:
        reports = [explain_path(path) for path in paths]

    for path, report in zip(paths, reports):
        print(
            f"{path.name}: decision={_format_decision(report.decision)} "
            f"|Y|={len(report.symbolic_set)} union={report.union_size} "
            f"unknown={report.unknown_kept} time={report.timings['total']:.2f}s"
        )
    return 0


def _cmd_verify(args) -> int:
    instance = bench.read_instance(args.instance)
    pipeline = _load_pipeline(args.model, instance.task)
    report = read_report(args.report)
    certified = verify_minimality(pipeline, instance, report, levels=args.levels)
    print(f"certified: {'true' if certified else 'false'}")
    return 0


def _cmd_report(args) -> int:
    directory = Path(args.dir)
    reports = [read_report(path) for path in sorted(directory.glob("*.report.json"))]
    if not reports:
        raise HexplainError(f"no report files under {directory}")
    table = summarize(reports)
    print(table.render())
    if args.json_out:
        payload = json.dumps({"rows": list(table.rows)}, indent=2) + "\n"
        Path(args.json_out).write_text(payload, encoding="ascii")
    return 0


def _cmd_render(args) -> int:
    instance = bench.read_instance(args.instance)
    if args.report:
        report = read_report(args.report)
        image = render.tile_explanation(instance, report.per_input)
    else:
        image = render.tile_instance(instance)
    render.write_netpbm(image, args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "explain": _cmd_explain,
    "verify": _cmd_verify,
    "report": _cmd_report,
    "render": _cmd_render,
}


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as error:
        print(f"usage error: {error}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except InternalInvariantError as error:
        print(f"internal invariant violation: {error}", file=sys.stderr)
        return 3
    except HexplainError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    except OSError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
