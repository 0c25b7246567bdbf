"""Command line entry point: csatml <subcommand> ..."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from . import plotting, sim
from .config import ExperimentConfig, load_config
from .csat import MLClassifier, events_to_jsonl, parse_samples, run_online
from .dataprep import build_dataset, read_dataset, write_dataset
from .models import build_model, train

log = logging.getLogger("csatml")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train = replace(cfg.train, seed=args.seed)
    return cfg


def cmd_simulate(args) -> None:
    cfg = _config(args)
    if not cfg.scenarios:
        raise ValueError("config has no scenarios to simulate")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traces = []
    for i, sc in enumerate(cfg.scenarios):
        trace = sim.simulate_trace(sc)
        path = out / f"trace_{i}_ap{sc.ap_count}.csv"
        sim.write_trace(trace, path)
        traces.append(trace)
        print(path)
    plotting.plot_traces(traces, out / "traces.png")


def cmd_prepare(args) -> None:
    cfg = _config(args)
    traces = [sim.read_trace(p) for p in args.traces]
    w = args.w or int(cfg.dataset["w"])
    k = len({t.label for t in traces})
    ds = build_dataset(traces, w, k, seed=cfg.seed,
                       max_chunks_per_class=cfg.dataset["max_chunks_per_class"])
    write_dataset(ds, args.out)
    print(f"{len(ds.train_y)} train / {len(ds.test_y)} test chunks, w={w}, k={k}, "
          f"mu={ds.stats.mu:.4f} sigma={ds.stats.sigma:.4f}")


def cmd_train(args) -> None:
    cfg = _config(args)
    ds = read_dataset(args.dataset)
    model = build_model(cfg.model_spec(ds.w, ds.k), seed=cfg.seed)
    report = train(model, ds, cfg.train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train_report.csv").write_text(report.to_csv())
    ex.save_model(out / "model.ckpt", model, ds, cfg.train)
    if report.best_state is not None:
        best = build_model(model.spec, seed=cfg.seed)
        best.load_state(report.best_state)
        ex.save_model(out / "model_best.ckpt", best, ds, cfg.train)
    plotting.plot_training(report, out / "training.png")
    print(f"final test accuracy {report.final_test_accuracy:.4f} after "
          f"{len(report.history)} epochs")


def cmd_eval(args) -> None:
    ds = read_dataset(args.dataset)
    model, _, _ = ex.load_model(args.model)
    text = ex.eval_csv(ex.eval_rows(model, ds))
    _emit(text, args.out)


def cmd_sweep(args) -> None:
    cfg = _config(args)
    s = cfg.sweep
    widths = ex.validate_widths(s["widths"])
    traces = ex.sweep_traces(int(s["k"]), float(s["duration"]), cfg.seed)
    rows = ex.run_sweep(widths, traces, int(s["k"]), cfg.train, s["max_chunks_per_class"],
                        cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(ex.sweep_csv(rows))
    plotting.plot_sweep(rows, out / "sweep.png")
    print(ex.sweep_csv(rows), end="")


def cmd_compare(args) -> None:
    cfg = _config(args)
    c = cfg.compare
    ac_file = args.ac or c["ac_file"]
    ac = ex.read_ac_results(ac_file) if ac_file else None
    rows, report, _ = ex.run_comparison(float(c["duration"]), int(c["w"]), cfg.train, cfg.seed,
                                        c["max_chunks_per_class"], ac, c["realtime_duration"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.csv").write_text(ex.comparison_csv(rows))
    (out / "train_report.csv").write_text(report.to_csv())
    plotting.plot_comparison(rows, out / "comparison.png")
    print(ex.comparison_csv(rows), end="")


def cmd_online(args) -> None:
    cfg = _config(args)
    model, stats, classes = ex.load_model(args.model)
    clf = MLClassifier(model, stats, classes)
    o = cfg.online
    src = sys.stdin if args.input == "-" else open(args.input)
    try:
        events = run_online(parse_samples(src), clf, model.spec.w, args.sample_rate,
                            int(o["initial"]), o["duty"], int(o["queue_size"]))
        for line in events_to_jsonl(events):
            print(line, flush=True)
    finally:
        if src is not sys.stdin:
            src.close()


def cmd_pipeline(args) -> None:
    cfg = _config(args)
    if not cfg.scenarios:
        raise ValueError("config has no scenarios for the pipeline")
    paths = ex.run_pipeline(args.out, cfg.scenarios, int(cfg.dataset["w"]), cfg.train,
                            cfg.model["family"], cfg.seed, cfg.dataset["max_chunks_per_class"])
    for name, path in paths.items():
        print(f"{name}: {path}")


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csatml", description="Wi-Fi AP counting for LTE-U CSAT.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, config=True):
        sp = sub.add_parser(name, help=help_)
        if config:
            sp.add_argument("--config", help="YAML experiment config")
            sp.add_argument("--seed", type=int, help="override the config's master seed")
        sp.set_defaults(func=func)
        return sp

    sp = add("simulate", cmd_simulate, "simulate energy traces for the configured scenarios")
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("prepare", cmd_prepare, "chunk, split and normalize traces into dataset files")
    sp.add_argument("traces", nargs="+", help="trace CSV files")
    sp.add_argument("--w", type=int, help="chunk width (overrides dataset.w)")
    sp.add_argument("--out", required=True, help="dataset prefix")

    sp = add("train", cmd_train, "train a classifier on a dataset")
    sp.add_argument("--dataset", required=True, help="dataset prefix")
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("eval", cmd_eval, "ML and ED metrics on a dataset's test half", config=False)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", help="CSV path (default: stdout)")

    sp = add("sweep", cmd_sweep, "accuracy against chunk width")
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("compare", cmd_compare, "ED / AC / ML comparison over Cases A-C, LOS and NLOS")
    sp.add_argument("--ac", help="CSV of external AC results")
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("online", cmd_online, "run the CSAT controller over a sample stream")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", default="-", help="one dBm value per line ('-' = stdin)")
    sp.add_argument("--sample-rate", type=float, default=sim.DEFAULT_SAMPLE_RATE)

    sp = add("pipeline", cmd_pipeline, "simulate, prepare, train and eval in one go")
    sp.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"csatml {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
