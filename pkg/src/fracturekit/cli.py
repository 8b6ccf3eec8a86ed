"""Operator entry point: preprocess, synth, split, train, eval, explain,
inspect, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
All training defaults match the documented configuration (Adam, lr 0.0005,
batch 32, 40 epochs, patience 10), so `train` with no overrides runs it.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data as data_mod
from . import metrics as metrics_mod
from . import model as model_mod
from . import training as training_mod
from .errors import FractureKitError, InvalidArgumentError
from .gradcam import grad_cam, overlay
from .imaging import decode_image, encode_pgm, encode_png, resize_bilinear, to_grayscale
from .preprocess import CannyConfig, ClaheConfig, run_pipeline


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _build_parser() -> _Parser:
    p = _Parser(prog="fracturekit", description=__doc__)
    p.add_argument("--seed", type=int, default=0, help="global RNG seed")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    pp = sub.add_parser("preprocess", help="run CLAHE/Otsu/Canny on an image")
    pp.add_argument("input")
    pp.add_argument("--out", required=True, help="output directory")
    pp.add_argument("--tiles", type=_int_list, default=[8, 8], metavar="R,C")
    pp.add_argument("--clip", type=float, default=2.0)
    pp.add_argument("--low-frac", type=float, default=0.10)
    pp.add_argument("--high-frac", type=float, default=0.20)

    sy = sub.add_parser("synth", help="generate a synthetic dataset")
    sy.add_argument("--out", required=True)
    sy.add_argument("--n-per-class", type=int, default=100)
    sy.add_argument("--size", type=int, default=64)

    sp = sub.add_parser("split", help="stratified 70-15-15 split")
    sp.add_argument("--counts", type=_int_list, default=None, metavar="N0,N1",
                    help="print split counts for the given class sizes")
    sp.add_argument("--data", help="dataset directory to split")
    sp.add_argument("--out", help="manifest CSV path")
    sp.add_argument("--ratios", type=str, default="0.70,0.15,0.15")

    tr = sub.add_parser("train", help="train a model")
    tr.add_argument("--data", help="dataset directory")
    tr.add_argument("--synth", type=int, default=None, metavar="N",
                    help="train on N synthetic samples per class instead")
    tr.add_argument("--arch", choices=["toy", "vgg19"], default="toy")
    tr.add_argument("--channels", type=_int_list, default=[8, 16, 32])
    tr.add_argument("--head", type=_int_list, default=[64])
    tr.add_argument("--lr", type=float, default=0.0005)
    tr.add_argument("--batch-size", type=int, default=32)
    tr.add_argument("--epochs", type=int, default=40)
    tr.add_argument("--patience", type=int, default=10)
    tr.add_argument("--out", required=True, help="model file path")
    tr.add_argument("--history", help="history CSV path")

    ev = sub.add_parser("eval", help="evaluate a model on a dataset")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", help="dataset directory")
    ev.add_argument("--synth", type=int, default=None, metavar="N")
    ev.add_argument("--report", help="metric report JSON path")
    ev.add_argument("--roc-csv", help="ROC points CSV path")

    ex = sub.add_parser("explain", help="write Grad-CAM overlays")
    ex.add_argument("--model", required=True)
    ex.add_argument("inputs", nargs="+")
    ex.add_argument("--out", required=True, help="output directory")
    ex.add_argument("--alpha", type=float, default=0.5)

    ins = sub.add_parser("inspect", help="print per-layer parameter counts")
    ins.add_argument("--arch", choices=["toy", "vgg19"], default="vgg19")
    ins.add_argument("--channels", type=_int_list, default=[8, 16, 32])
    ins.add_argument("--head", type=_int_list, default=[64])

    sv = sub.add_parser("serve", help="run the inference HTTP service")
    sv.add_argument("--model")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.add_argument("--upload-limit", type=int, default=10 * 1024 * 1024)
    sv.add_argument("--cors-origin", default="*")
    return p


def _load_dataset(args) -> data_mod.LabeledDataset:
    if getattr(args, "synth", None) is not None:
        cfg = data_mod.SyntheticConfig(seed=args.seed)
        return data_mod.generate_synthetic(cfg, args.synth)
    if getattr(args, "data", None):
        return data_mod.load_directory(args.data)
    raise UsageError("provide --data DIR or --synth N")


def _build_arch(args) -> model_mod.ArchitectureSpec:
    if args.arch == "vgg19":
        return model_mod.build_vgg19_modified(args.head)
    return model_mod.build_toy(args.channels, args.head)


def _cmd_preprocess(args) -> int:
    with open(args.input, "rb") as f:
        img = decode_image(f.read())
    clahe_cfg = ClaheConfig(tile_rows=args.tiles[0], tile_cols=args.tiles[1],
                            clip_factor=args.clip)
    canny_cfg = CannyConfig(low_frac=args.low_frac, high_frac=args.high_frac)
    pipe = run_pipeline(img, clahe_cfg, canny_cfg)
    os.makedirs(args.out, exist_ok=True)
    panels = {"original": to_grayscale(img), "enhanced": pipe.enhanced,
              "mask": pipe.mask, "edges": pipe.edges}
    for name, grid in panels.items():
        with open(os.path.join(args.out, f"{name}.png"), "wb") as f:
            f.write(encode_png(grid.pixels))
    triptych = np.concatenate([pipe.enhanced.pixels, pipe.mask.pixels,
                               pipe.edges.pixels], axis=1)
    with open(os.path.join(args.out, "triptych.png"), "wb") as f:
        f.write(encode_png(triptych))
    if pipe.degenerate_mask:
        print("warning: uniform image, Otsu threshold undefined; mask is empty")
    print(f"wrote {len(panels) + 1} panels to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    cfg = data_mod.SyntheticConfig(size=args.size, seed=args.seed)
    ds = data_mod.generate_synthetic(cfg, args.n_per_class)
    rows = []
    for cls_name in data_mod.CLASS_NAMES:
        os.makedirs(os.path.join(args.out, cls_name), exist_ok=True)
    counters = [0, 0]
    for s in ds.samples:
        name = f"{counters[s.label]:05d}.pgm"
        counters[s.label] += 1
        path = os.path.join(args.out, data_mod.CLASS_NAMES[s.label], name)
        with open(path, "wb") as f:
            f.write(encode_pgm(s.image))
        if s.crack_box:
            rows.append(f"{path},{','.join(map(str, s.crack_box))}")
    with open(os.path.join(args.out, "crack_boxes.csv"), "w") as f:
        f.write("path,x0,y0,x1,y1\n" + "\n".join(rows) + "\n")
    print(f"wrote {len(ds)} images to {args.out}")
    return 0


def _cmd_split(args) -> int:
    ratios = [float(t) for t in args.ratios.split(",")]
    sr = data_mod.SplitRatios(*ratios)
    if args.counts is not None:
        print("split,fractured,not fractured")
        cells = [data_mod.split_counts(n, sr) for n in args.counts]
        for i, name in enumerate(("train", "val", "test")):
            print(f"{name},{','.join(str(c[i]) for c in cells)}")
        return 0
    ds = _load_dataset(args)
    splits = data_mod.stratified_split(ds, sr, seed=args.seed)
    if args.out:
        data_mod.write_split_manifest(args.out, splits)
        print(f"wrote manifest to {args.out}")
    for name, part in zip(("train", "val", "test"), splits):
        print(f"{name}: {part.class_counts()}")
    return 0


def _cmd_train(args) -> int:
    ds = _load_dataset(args)
    spec = _build_arch(args)
    size = spec.input_shape[1]
    splits = data_mod.stratified_split(ds, seed=args.seed)
    x_tr, y_tr = training_mod.dataset_tensors(splits[0], size)
    x_va, y_va = training_mod.dataset_tensors(splits[1], size)
    params = model_mod.init_params(spec, seed=args.seed)
    cfg = training_mod.TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                                   max_epochs=args.epochs, patience=args.patience,
                                   seed=args.seed)
    params, history = training_mod.train(params, x_tr, y_tr, x_va, y_va, cfg,
                                         verbose=args.verbose)
    model_mod.save_model(params, args.out)
    if args.history:
        history.write_csv(args.history)
    best = history.best_epoch
    print(f"trained {len(history)} epochs (best {best}, "
          f"early stop: {history.stopped_early}); model -> {args.out}")
    return 0


def _scores_and_labels(params, ds, size):
    x, y = training_mod.dataset_tensors(ds, size)
    layers = model_mod.build_layers(params)
    probs = []
    for idx in data_mod.batches(len(x), 32):
        out = x[idx]
        for layer in layers:
            out = layer.forward(out)
        from .nn import softmax
        probs.append(softmax(out.astype(np.float64)))
    probs = np.concatenate(probs)
    return y, probs


def _cmd_eval(args) -> int:
    params = model_mod.load_model(args.model)
    ds = _load_dataset(args)
    y, probs = _scores_and_labels(params, ds, params.spec.input_shape[1])
    preds = np.argmax(probs, axis=1)
    cm = metrics_mod.confusion(y, preds)
    s = metrics_mod.summary(cm)
    roc = metrics_mod.roc_auc(y, probs[:, 0])
    print(metrics_mod.report_table(cm, s, roc.auc))
    if args.report:
        with open(args.report, "w") as f:
            f.write(metrics_mod.report_json(cm, s, roc.auc))
    if args.roc_csv:
        roc.write_csv(args.roc_csv)
    return 0


def _cmd_explain(args) -> int:
    params = model_mod.load_model(args.model)
    size = params.spec.input_shape[1]
    os.makedirs(args.out, exist_ok=True)
    for path in args.inputs:
        with open(path, "rb") as f:
            img = decode_image(f.read())
        pipe = run_pipeline(img, size=size)
        _, probs, _ = model_mod.forward(params, pipe.model_input)
        cls = int(np.argmax(probs))
        hm = grad_cam(params, pipe.model_input, cls)
        base = resize_bilinear(pipe.enhanced, size, size)
        out = overlay(hm, base, args.alpha)
        name = os.path.splitext(os.path.basename(path))[0] + "_gradcam.png"
        with open(os.path.join(args.out, name), "wb") as f:
            f.write(encode_png(out.pixels))
        print(f"{path}: {model_mod.CLASS_NAMES[cls]} "
              f"({probs[cls]:.4f}) -> {name}")
    return 0


def _cmd_inspect(args) -> int:
    spec = _build_arch(args)
    total = 0
    for desc, n in model_mod.layer_parameter_counts(spec):
        print(f"{desc:12s} {n:>12,d}")
        total += n
    print(f"{'total':12s} {total:>12,d}")
    assert total == model_mod.count_parameters(spec)
    return 0


def _cmd_serve(args) -> int:
    from .service import serve
    serve(args.model, host=args.host, port=args.port,
          upload_limit=args.upload_limit, cors_origin=args.cors_origin)
    return 0


_COMMANDS = {
    "preprocess": _cmd_preprocess, "synth": _cmd_synth, "split": _cmd_split,
    "train": _cmd_train, "eval": _cmd_eval, "explain": _cmd_explain,
    "inspect": _cmd_inspect, "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help exits 0
        return int(exc.code or 0)
    except (FileNotFoundError, FractureKitError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
