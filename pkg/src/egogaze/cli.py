"""Command-line interface.

Exit codes: 0 success, 1 runtime error, 2 usage error. Flag values override
config-file values, which override built-in defaults (pass a JSON mapping of
flag destinations via --config). EGOGAZE_SEED overrides the default seed.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, baselines, bottomup, experiments, metrics, regression
from .cues import augment
from .core import (
    DEFAULT_GRID_SIZE,
    DEFAULT_KERNEL_SIGMA,
    DEFAULT_KERNEL_WIDTH,
    FixationRecord,
    FixationTrace,
    build_targets,
    gaussian_kernel,
)
from .errors import EgogazeError
from .io import (
    load_feature_matrix,
    load_fixation_log,
    load_map,
    read_pgm,
    save_map,
)
from .recurrent import GruGazePredictor, load_gru_model, save_gru_model
from .regression import LinearGazeRegressor, load_linear_model, save_linear_model
from .report import (
    svg_bar_chart,
    svg_heat_grid,
    svg_line_chart,
    write_csv,
    write_manifest,
    write_text,
)
from .selftest import run_selftest


def _default_seed():
    try:
        return int(os.environ.get("EGOGAZE_SEED", "0"))
    except ValueError:
        return 0


def _load_map_dir(directory):
    directory = Path(directory)
    paths = sorted(directory.glob("*.bin"))
    if not paths:
        raise EgogazeError(f"no .bin map files in {directory}")
    maps = np.stack([load_map(p) for p in paths])
    return maps


def _load_frames(directory):
    directory = Path(directory)
    paths = sorted(directory.glob("*.pgm"))
    if not paths:
        raise EgogazeError(f"no .pgm frames in {directory}")
    return [read_pgm(p).astype(float) for p in paths]


def _write_map_series(out_dir, prefix, maps):
    out_dir = Path(out_dir)
    for i, grid in enumerate(maps):
        save_map(out_dir / f"{prefix}_{i:06d}.bin", grid)


def _parse_seq_specs(specs, what="features:trace"):
    """Parse repeated ``id=PATH_A:PATH_B`` arguments."""
    out = []
    for spec in specs:
        try:
            seq_id, rest = spec.split("=", 1)
            path_a, path_b = rest.rsplit(":", 1)
        except ValueError:
            raise EgogazeError(
                f"bad --seq value {spec!r}, expected id={what}"
            ) from None
        out.append((seq_id, Path(path_a), Path(path_b)))
    return out


def _config_as_dict(namespace, keys):
    return {key: getattr(namespace, key) for key in keys if hasattr(namespace, key)}


# ---------------------------------------------------------------- commands


def cmd_baselines(args):
    out = Path(args.out)
    kernel = gaussian_kernel(args.kernel_width, args.kernel_sigma)
    if args.kind == "gauss":
        save_map(out / "gauss.bin", baselines.central_gaussian(args.k, args.sigma_frac))
    elif args.kind == "afm":
        if not args.fix:
            raise EgogazeError("--kind afm requires at least one --fix trace")
        traces = [load_fixation_log(p) for p in args.fix]
        model = baselines.AverageFixationMap(
            k=args.k, kernel_width=args.kernel_width, kernel_sigma=args.kernel_sigma
        ).fit(traces)
        save_map(out / "afm.bin", model.map_)
    else:  # fom
        if len(args.fix or []) != 1:
            raise EgogazeError("--kind fom requires exactly one --fix trace")
        trace = load_fixation_log(args.fix[0])
        maps = baselines.fixation_oracle_maps(trace, k=args.k, kernel=kernel)
        _write_map_series(out, "fom", maps)
    write_manifest(out / "manifest.json", "baselines",
                   _config_as_dict(args, ["kind", "k", "kernel_width", "kernel_sigma",
                                          "sigma_frac"]), args.seed)
    return 0


def cmd_cues(args):
    out = Path(args.out)
    frames = _load_frames(args.frames)
    stack = bottomup.build_cue_stack(frames, k=args.k, n_jobs=args.jobs)
    for name in stack.names:
        _write_map_series(out / name, name, stack.cue(name))
    from .io import save_feature_matrix

    save_feature_matrix(out / "cue_features.bin", stack.feature_matrix())
    write_manifest(out / "manifest.json", "cues",
                   _config_as_dict(args, ["frames", "k", "jobs"]), args.seed)
    return 0


def cmd_fit_regression(args):
    features = load_feature_matrix(args.features)
    trace = load_fixation_log(args.fix)
    targets = build_targets(trace, k=args.k,
                            kernel=gaussian_kernel(args.kernel_width, args.kernel_sigma))
    model = LinearGazeRegressor(ridge=args.ridge, sv_cutoff=args.sv_cutoff)
    model.fit(features.data, targets)
    save_linear_model(model, args.out)
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "fit-regression",
                   _config_as_dict(args, ["k", "ridge", "sv_cutoff", "kernel_width",
                                          "kernel_sigma"]), args.seed)
    print(f"fit: rank={model.rank_} residual={model.residual_norm_:.6g}")
    return 0


def _augment_maps(maps, mp_path, weight):
    """Mix manipulation-point maps (file or per-frame directory) into
    prediction maps."""
    mp_path = Path(mp_path)
    if mp_path.is_file():
        mp_maps = np.repeat(load_map(mp_path)[None], len(maps), axis=0)
    else:
        mp_maps = _load_map_dir(mp_path)
        if mp_maps.shape[0] != len(maps):
            raise EgogazeError(
                f"{mp_maps.shape[0]} MP maps for {len(maps)} prediction maps"
            )
    return np.stack([augment(m, mp, weight=weight) for m, mp in zip(maps, mp_maps)])


def cmd_predict(args):
    model = load_linear_model(args.model)
    features = load_feature_matrix(args.features)
    maps = model.predict(features.data)
    if args.augment_mp:
        maps = _augment_maps(maps, args.augment_mp, args.mp_weight)
    _write_map_series(args.out, "pred", maps)
    write_manifest(Path(args.out) / "manifest.json", "predict",
                   {"model": str(args.model), "augment_mp": args.augment_mp,
                    "mp_weight": args.mp_weight}, args.seed)
    return 0


def cmd_train_gru(args):
    features = load_feature_matrix(args.features)
    trace = load_fixation_log(args.fix)
    model = GruGazePredictor(
        k=args.k, hidden_size=args.hidden, n_layers=args.layers,
        learning_rate=args.lr, epochs=args.epochs, bptt_window=args.window,
        seed=args.seed, standardize=args.standardize,
    ).fit(features, trace)
    save_gru_model(model, args.out)
    write_manifest(Path(args.out).with_suffix(".manifest.json"), "train-gru",
                   _config_as_dict(args, ["k", "hidden", "layers", "lr", "epochs",
                                          "window", "standardize"]), args.seed)
    print(f"trained {args.epochs} epochs; "
          f"loss {model.loss_curve_[0]:.4f} -> {model.loss_curve_[-1]:.4f}")
    return 0


def cmd_predict_gru(args):
    model = load_gru_model(args.model)
    features = load_feature_matrix(args.features)
    maps = model.predict_proba(features)
    if args.augment_mp:
        maps = _augment_maps(maps, args.augment_mp, args.mp_weight)
    _write_map_series(args.out, "pred", maps)
    write_manifest(Path(args.out) / "manifest.json", "predict-gru",
                   {"model": str(args.model), "augment_mp": args.augment_mp,
                    "mp_weight": args.mp_weight}, args.seed)
    return 0


def cmd_eval(args):
    trace = load_fixation_log(args.fix)
    pred = Path(args.pred)
    maps = load_map(pred) if pred.is_file() else _load_map_dir(pred)
    report = metrics.evaluate(maps, trace)
    out = Path(args.out)
    metrics.write_report_csv(report, out / "eval.csv")
    metrics.write_report_json(report, out / "summary.json")
    write_manifest(out / "manifest.json", "eval",
                   {"pred": str(args.pred), "fix": str(args.fix)}, args.seed)
    print(f"NSS {report.nss_mean:.4f}  AUC {report.auc_mean:.4f}  "
          f"frames {report.frames_scored}")
    return 0


def cmd_combine(args):
    names = [name.strip() for name in args.cues.split(",") if name.strip()]
    if not names:
        raise EgogazeError("--cues must name at least one map stream")
    root = Path(args.maps_root)
    trace = load_fixation_log(args.fix)
    streams = {name: _load_map_dir(root / name) for name in names}
    model = regression.combine_cues(streams, trace, ridge=args.ridge)
    out = Path(args.out)
    save_linear_model(model, out / "combined_model.bin")

    names_order, rows, k = regression.stack_map_streams(streams)
    combined_maps = model.predict(rows)
    table = []
    for name in names_order:
        report = metrics.evaluate(streams[name], trace)
        table.append((name, report.nss_mean, report.auc_mean))
    combined_report = metrics.evaluate(combined_maps, trace)
    table.append(("combined", combined_report.nss_mean, combined_report.auc_mean))
    write_csv(out / "scores.csv", ["model", "nss", "auc"],
              [[name, repr(nss_v), repr(auc_v)] for name, nss_v, auc_v in table])
    write_text(out / "scores.svg",
               svg_bar_chart([row[0] for row in table], [row[2] for row in table],
                             title="AUC by model"))
    write_manifest(out / "manifest.json", "combine",
                   {"cues": names, "ridge": args.ridge}, args.seed)
    print("\n".join(f"{name}: NSS {nss_v:.4f} AUC {auc_v:.4f}"
                    for name, nss_v, auc_v in table))
    return 0


def _regression_train_eval(k, ridge):
    def train(payload):
        features, trace = payload
        targets = build_targets(trace, k=k)
        return LinearGazeRegressor(ridge=ridge).fit(features.data, targets)

    def evaluate_fn(model, payload):
        features, trace = payload
        report = metrics.evaluate(model.predict(features.data), trace)
        return report.nss_mean, report.auc_mean

    return train, evaluate_fn


def _afm_train_eval(k):
    def train(payload):
        _, trace = payload
        return baselines.AverageFixationMap(k=k).fit(trace)

    def evaluate_fn(model, payload):
        _, trace = payload
        report = metrics.evaluate(model.map_, trace)
        return report.nss_mean, report.auc_mean

    return train, evaluate_fn


def cmd_transfer(args):
    specs = _parse_seq_specs(args.seq)
    if len(specs) < 2:
        raise EgogazeError("transfer needs at least two --seq entries")
    sequences = []
    for seq_id, features_path, trace_path in specs:
        features = load_feature_matrix(features_path)
        trace = load_fixation_log(trace_path, sequence_id=seq_id)
        sequences.append((seq_id, (features, trace)))
    if args.model == "afm":
        train, evaluate_fn = _afm_train_eval(args.k)
    else:
        train, evaluate_fn = _regression_train_eval(args.k, args.ridge)
    matrix = experiments.transfer_matrix(sequences, train, evaluate_fn)
    out = Path(args.out)
    experiments.write_confusion_csv(matrix, out / "transfer_nss.csv", which="nss")
    experiments.write_confusion_csv(matrix, out / "transfer_auc.csv", which="auc")
    write_text(out / "transfer_nss.svg",
               svg_heat_grid(matrix.nss, matrix.ids, matrix.ids, title="Transfer NSS"))
    write_text(out / "transfer_auc.svg",
               svg_heat_grid(matrix.auc, matrix.ids, matrix.ids, title="Transfer AUC"))
    write_manifest(out / "manifest.json", "transfer",
                   {"model": args.model, "k": args.k, "ridge": args.ridge,
                    "sequences": [seq_id for seq_id, _ in sequences]}, args.seed)
    return 0


def cmd_ablate(args):
    out = Path(args.out)
    if args.mode == "subjects":
        if len(args.fix or []) < 2:
            raise EgogazeError("--mode subjects needs two or more id=PATH --fix entries")
        traces = {}
        for spec in args.fix:
            try:
                subject, path = spec.split("=", 1)
            except ValueError:
                raise EgogazeError(f"bad --fix value {spec!r}, expected id=PATH") from None
            traces[subject] = load_fixation_log(path, subject_id=subject)
        train = lambda subset: baselines.AverageFixationMap(k=args.k).fit(subset)
        evaluate_fn = lambda model, held: float(
            np.mean([metrics.evaluate(model.map_, t).nss_mean for t in held])
        )
        curve = experiments.subject_ablation(traces, train, evaluate_fn)
        experiments.write_subject_ablation_csv(curve, out / "ablation_subjects.csv")
        xs = [i for i, _, _, _ in curve]
        ys = [mean for _, mean, _, _ in curve]
        write_text(out / "ablation_subjects.svg",
                   svg_line_chart({"nss": (xs, ys)}, title="Subject ablation",
                                  x_label="training subjects", y_label="mean NSS"))
    else:
        train_trace = load_fixation_log(args.train_fix)
        test_trace = load_fixation_log(args.test_fix)

        def train(indices):
            records = tuple(
                FixationRecord(j, train_trace.records[i].x, train_trace.records[i].y,
                               train_trace.records[i].valid)
                for j, i in enumerate(indices)
            )
            return baselines.AverageFixationMap(k=args.k).fit(
                FixationTrace(train_trace.sequence_id, train_trace.subject_id, records)
            )

        evaluate_fn = lambda model: metrics.evaluate(model.map_, test_trace).nss_mean
        curve = experiments.frame_ablation(len(train_trace), train, evaluate_fn,
                                           step=args.step, runs=args.runs,
                                           seed=args.seed)
        experiments.write_frame_ablation_csv(curve, out / "ablation_frames.csv")
        xs = [b for b, _, _ in curve]
        ys = [mean for _, mean, _ in curve]
        write_text(out / "ablation_frames.svg",
                   svg_line_chart({"nss": (xs, ys)}, title="Frame ablation",
                                  x_label="training frames", y_label="mean NSS"))
    write_manifest(out / "manifest.json", "ablate",
                   _config_as_dict(args, ["mode", "k", "step", "runs"]), args.seed)
    return 0


def cmd_activity(args):
    specs = _parse_seq_specs(args.seq, what="mapsdir:trace")
    if len(specs) < 2:
        raise EgogazeError("activity needs at least two --seq entries")
    sequences = []
    for seq_id, maps_dir, trace_path in specs:
        maps = _load_map_dir(maps_dir)
        trace = load_fixation_log(trace_path, sequence_id=seq_id)
        sequences.append((maps, trace))
    window_sizes = [int(w) for w in args.windows.split(",") if w.strip()]
    curves = experiments.activity_curves(sequences, window_sizes, count=args.count,
                                         seed=args.seed)
    out = Path(args.out)
    experiments.write_activity_csv(curves, out / "activity_accuracy.csv")
    series = {kind: ([w for w, _ in pts], [acc for _, acc in pts])
              for kind, pts in curves.items()}
    write_text(out / "activity_accuracy.svg",
               svg_line_chart(series, title="Activity decoding",
                              x_label="window size", y_label="accuracy"))
    write_manifest(out / "manifest.json", "activity",
                   {"windows": window_sizes, "count": args.count}, args.seed)
    return 0


def cmd_selftest(args):
    results = run_selftest(args.out, seed=args.seed)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} criterion {result.criterion}: {result.name} ({result.details})")
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------- parser


def build_parser(config=None):
    parser = argparse.ArgumentParser(
        prog="egogaze",
        description="Gaze-prediction toolkit for egocentric video.",
        epilog="Option precedence: command-line flags > --config JSON file > defaults. "
               "EGOGAZE_SEED sets the default --seed.",
    )
    parser.add_argument("--version", action="version", version=f"egogaze {__version__}")
    parser.add_argument("--config", default=None,
                        help="JSON file of default option values (by destination name)")
    sub = parser.add_subparsers(dest="command", required=True)

    subparsers = []

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=_default_seed())
        p.add_argument("--k", type=int, default=DEFAULT_GRID_SIZE)
        subparsers.append(p)
        return p

    p = add("baselines", cmd_baselines, help="spatial-bias predictor maps")
    p.add_argument("--kind", choices=["gauss", "afm", "fom"], required=True)
    p.add_argument("--fix", action="append", help="fixation log CSV (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--kernel-width", type=int, default=DEFAULT_KERNEL_WIDTH)
    p.add_argument("--kernel-sigma", type=float, default=DEFAULT_KERNEL_SIGMA)
    p.add_argument("--sigma-frac", type=float, default=baselines.DEFAULT_SIGMA_FRAC)

    p = add("cues", cmd_cues, help="bottom-up cue maps from frames")
    p.add_argument("--frames", required=True, help="directory of P5 .pgm frames")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = add("fit-regression", cmd_fit_regression, help="least-squares gaze regression")
    p.add_argument("--features", required=True)
    p.add_argument("--fix", required=True)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--sv-cutoff", type=float, default=regression.DEFAULT_SV_CUTOFF)
    p.add_argument("--kernel-width", type=int, default=DEFAULT_KERNEL_WIDTH)
    p.add_argument("--kernel-sigma", type=float, default=DEFAULT_KERNEL_SIGMA)
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, help="prediction maps from a linear model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--augment-mp", default=None,
                   help="manipulation-point map file or per-frame map directory")
    p.add_argument("--mp-weight", type=float, default=1.0,
                   help="MP weight in the augmented sum (1.0 = equal weights)")
    p.add_argument("--out", required=True)

    p = add("train-gru", cmd_train_gru, help="train the recurrent predictor")
    p.add_argument("--features", required=True)
    p.add_argument("--fix", required=True)
    p.add_argument("--hidden", type=int, default=20)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--window", type=int, default=6)
    p.add_argument("--standardize", action="store_true",
                   help="z-score feature columns at ingest")
    p.add_argument("--out", required=True)

    p = add("predict-gru", cmd_predict_gru, help="probability maps from a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--augment-mp", default=None,
                   help="manipulation-point map file or per-frame map directory")
    p.add_argument("--mp-weight", type=float, default=1.0,
                   help="MP weight in the augmented sum (1.0 = equal weights)")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, help="NSS/AUC of prediction maps against a trace")
    p.add_argument("--pred", required=True, help="map file or directory of maps")
    p.add_argument("--fix", required=True)
    p.add_argument("--out", required=True)

    p = add("combine", cmd_combine, help="regression-combined cue model")
    p.add_argument("--cues", required=True, help="comma-separated stream names")
    p.add_argument("--maps-root", required=True,
                   help="directory holding one map subdirectory per stream")
    p.add_argument("--fix", required=True)
    p.add_argument("--ridge", type=float, default=regression.DEFAULT_CUE_RIDGE)
    p.add_argument("--out", required=True)

    p = add("transfer", cmd_transfer, help="cross-sequence confusion matrices")
    p.add_argument("--seq", action="append", required=True,
                   help="id=features.bin:trace.csv (repeatable)")
    p.add_argument("--model", choices=["afm", "regression"], default="regression")
    p.add_argument("--ridge", type=float, default=regression.DEFAULT_CUE_RIDGE)
    p.add_argument("--out", required=True)

    p = add("ablate", cmd_ablate, help="subject- or frame-count ablations")
    p.add_argument("--mode", choices=["subjects", "frames"], required=True)
    p.add_argument("--fix", action="append", help="subjects mode: id=PATH (repeatable)")
    p.add_argument("--train-fix", help="frames mode: training trace")
    p.add_argument("--test-fix", help="frames mode: evaluation trace")
    p.add_argument("--step", type=int, default=1000)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--out", required=True)

    p = add("activity", cmd_activity, help="activity decoding from gaze windows")
    p.add_argument("--seq", action="append", required=True,
                   help="id=mapsdir:trace.csv (repeatable)")
    p.add_argument("--windows", default="4,8,16", help="comma-separated window sizes")
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--out", required=True)

    p = add("selftest", cmd_selftest,
            help="run the oracle/property acceptance suite on synthetic data")
    p.add_argument("--out", required=True)

    if config:
        # subparsers parse into their own namespace, so config-file defaults
        # must be installed on every subparser after its options exist
        for p in subparsers:
            p.set_defaults(**config)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    defaults = None
    if known.config:
        try:
            defaults = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"egogaze: cannot read config {known.config}: {exc}", file=sys.stderr)
            return 2
        if not isinstance(defaults, dict):
            print("egogaze: config file must hold a JSON object", file=sys.stderr)
            return 2

    parser = build_parser(config=defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EgogazeError as exc:
        print(f"egogaze: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, IndexError) as exc:
        print(f"egogaze: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
