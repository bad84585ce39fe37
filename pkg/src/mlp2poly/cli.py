"""``mlp2poly`` command line: generate, train, extract, predict, compare, report, inspect.

Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 resource ceiling.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .combinatorics import DEFAULT_PARTITION_CEILING, PartitionCeilingError
from .network import column_norms, forward, load_network, save_network
from .polynomial import (
    Polynomial,
    atomic_write_text,
    eval_poly,
    format_label,
    save_polynomial,
    top_n_coefficients,
)
from .trainer import (
    CONSTRAINTS,
    LOSSES,
    OPTIMIZERS,
    DatasetSpec,
    TrainConfig,
    TrainingDivergedError,
    TrainingError,
    gen_poly_data,
    parse_architecture,
    scale_to_unit,
    train,
    train_test_split,
)
from .transform import DEFAULT_MAX_ORDER, DEFAULT_TAYLOR_ORDER, TransformConfig, transform

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_CEILING = 4

TRAIN_FRACTION = 0.75


# ---------------------------------------------------------------- file helpers


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV (a header row is required)")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        M = np.array([[float(v) for v in r] for r in body], dtype=np.float64).reshape(len(body), -1)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if body and M.shape[1] != len(header):
        raise ValueError(f"{path}: {M.shape[1]} columns but header has {len(header)}")
    return header, M


def write_csv(path, header: list[str], rows: np.ndarray) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row.tolist()])
    atomic_write_text(path, buf.getvalue())


def dataset_header(data: DatasetSpec) -> list[str]:
    xs = [f"x{i + 1}" for i in range(data.p)]
    c = data.Y.shape[1]
    return xs + (["y"] if c == 1 else [f"y{j + 1}" for j in range(c)])


def write_dataset(path, data: DatasetSpec) -> None:
    rows = np.hstack([data.X, data.Y.astype(np.float64)])
    write_csv(path, dataset_header(data), rows)


def load_polynomial_any(path) -> Polynomial:
    """Load a polynomial file, or the final polynomial of a layered file."""
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(obj, list):
        if not obj:
            raise ValueError(f"{path}: empty layered polynomial file")
        obj = obj[-1]["output"]
    return Polynomial.from_dict(obj)


def features_for(M: np.ndarray, p: int, path) -> np.ndarray:
    if M.shape[1] < p:
        raise ValueError(f"{path}: need at least {p} feature columns, found {M.shape[1]}")
    return M[:, :p]


# ---------------------------------------------------------------- comparison


@dataclass
class CompareReport:
    """Network-versus-polynomial agreement on one dataset.

    ``r_squared`` treats the network output as the reference and is pooled
    over channels; per-channel values are listed when there is more than
    one. Classification adds argmax agreement and a confusion matrix whose
    rows are network classes and columns polynomial classes.
    """

    n_test: int
    r_squared: float
    mae: float
    max_abs_diff: float
    per_channel: list[dict] = field(default_factory=list)
    agreement: float | None = None
    confusion: list[list[int]] | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.agreement is None:
            del out["agreement"], out["confusion"]
        if not self.per_channel:
            del out["per_channel"]
        return out

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _r_squared(ref: np.ndarray, pred: np.ndarray) -> float:
    ss_tot = float(np.sum((ref - ref.mean(axis=0)) ** 2))
    ss_res = float(np.sum((ref - pred) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else float("nan")
    return 1.0 - ss_res / ss_tot


def compare_predictions(reference: np.ndarray, candidate: np.ndarray, classification: bool = False) -> CompareReport:
    ref = np.asarray(reference, dtype=np.float64)
    cand = np.asarray(candidate, dtype=np.float64)
    if ref.shape != cand.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {cand.shape}")
    diff = np.abs(ref - cand)
    report = CompareReport(
        n_test=ref.shape[0],
        r_squared=_r_squared(ref, cand),
        mae=float(diff.mean()) if diff.size else 0.0,
        max_abs_diff=float(diff.max()) if diff.size else 0.0,
    )
    c = ref.shape[1]
    if c > 1:
        report.per_channel = [
            {
                "channel": j,
                "r_squared": _r_squared(ref[:, j], cand[:, j]),
                "mae": float(diff[:, j].mean()),
                "max_abs_diff": float(diff[:, j].max()),
            }
            for j in range(c)
        ]
    if classification:
        a, b = ref.argmax(axis=1), cand.argmax(axis=1)
        confusion = np.zeros((c, c), dtype=np.int64)
        np.add.at(confusion, (a, b), 1)
        report.agreement = float(np.mean(a == b)) if len(a) else 1.0
        report.confusion = confusion.tolist()
    return report


def softmax_argmax(Y: np.ndarray) -> np.ndarray:
    Z = Y - Y.max(axis=1, keepdims=True)
    P = np.exp(Z)
    P /= P.sum(axis=1, keepdims=True)
    return P.argmax(axis=1)


# ---------------------------------------------------------------- subcommands


def cmd_generate(args) -> int:
    poly = load_polynomial_any(args.poly_file)
    if args.n < 1:
        raise ValueError("--n must be at least 1")
    if args.noise_sd < 0:
        raise ValueError("--noise-sd must be non-negative")
    data = gen_poly_data(poly, args.n, args.noise_sd, args.seed)
    if args.scale:
        data = scale_to_unit(data)
    out = Path(args.out)
    write_dataset(out, data)
    if args.split:
        tr, te = train_test_split(data, TRAIN_FRACTION, args.seed)
        write_dataset(out.with_name(f"{out.stem}_train{out.suffix}"), tr)
        write_dataset(out.with_name(f"{out.stem}_test{out.suffix}"), te)
    print(f"wrote {data.n} rows ({data.p} features) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    architecture = parse_architecture(args.arch)
    _, M = read_csv(args.data_csv)
    n_resp = args.n_responses
    if M.shape[1] <= n_resp:
        raise ValueError(f"{args.data_csv}: need feature columns before {n_resp} response column(s)")
    X, Y = M[:, :-n_resp], M[:, -n_resp:]
    integral = bool(np.all(Y == np.round(Y)))
    data = DatasetSpec(X, Y, classification=args.loss == "softmax_cross_entropy" and integral)
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        optimizer=args.optimizer,
        loss=args.loss,
        constraint=args.constraint,
        seed=args.seed,
        validation_split=args.validation_split,
    )
    net, history = train(data, architecture, config)
    save_network(net, args.out)
    hist_path = args.history or str(Path(args.out).with_suffix(".history.csv"))
    atomic_write_text(hist_path, history.to_csv())
    final = history.train_loss[-1] if history.train_loss else float("nan")
    print(f"trained {'-'.join(map(str, [net.n_inputs] + net.widths))} network; final train loss {final:.6g}")
    return EXIT_OK


def order_summary(poly: Polynomial) -> list[tuple[int, int]]:
    """Term counts by order, with the intercept counted in order 1."""
    counts = poly.order_counts()
    merged = dict(counts)
    if 0 in merged:
        merged[1] = merged.get(1, 0) + merged.pop(0)
    return sorted(merged.items())


def cmd_extract(args) -> int:
    net = load_network(args.network_file)
    orders = args.taylor_order
    config = TransformConfig(
        max_order=args.max_order,
        taylor_orders=orders[0] if len(orders) == 1 else tuple(orders),
        keep_layers=args.keep_layers,
        partition_ceiling=args.partition_ceiling,
    )
    result = transform(net, config)
    if args.keep_layers:
        payload = [
            {"layer": l, "input": entry.input.to_dict(), "output": entry.output.to_dict()}
            for l, entry in enumerate(result, start=1)
        ]
        atomic_write_text(args.out, json.dumps(payload))
        final = result[-1].output
    else:
        save_polynomial(result, args.out)
        final = result
    print(f"{len(final.labels)} labels, {final.n_channels} channel(s)")
    for order, count in order_summary(final):
        print(f"order {order}: {count}")
    return EXIT_OK


def cmd_predict(args) -> int:
    poly = load_polynomial_any(args.poly_file)
    _, M = read_csv(args.data_csv)
    Y = eval_poly(poly, features_for(M, poly.p, args.data_csv))
    if args.postprocess == "softmax_argmax":
        write_csv(args.out, ["class"], softmax_argmax(Y).reshape(-1, 1))
    else:
        c = Y.shape[1]
        write_csv(args.out, ["y"] if c == 1 else [f"y{j + 1}" for j in range(c)], Y)
    print(f"wrote {Y.shape[0]} predictions to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    net = load_network(args.network_file)
    poly = load_polynomial_any(args.poly_file)
    if poly.p != net.n_inputs:
        raise ValueError(f"polynomial has {poly.p} inputs, network has {net.n_inputs}")
    if poly.n_channels != net.n_outputs:
        raise ValueError(f"polynomial has {poly.n_channels} channels, network has {net.n_outputs} outputs")
    _, M = read_csv(args.data_csv)
    X = features_for(M, net.n_inputs, args.data_csv)
    report = compare_predictions(forward(net, X), eval_poly(poly, X), args.classification)
    text = report.to_text()
    if args.out:
        atomic_write_text(args.out, text + "\n")
    print(text)
    return EXIT_OK


def cmd_report(args) -> int:
    poly = load_polynomial_any(args.poly_file)
    ranked = top_n_coefficients(poly, args.n)
    lines = []
    rows = []
    for j, terms in enumerate(ranked):
        lines.append(f"channel {j}")
        for rank, (lab, value) in enumerate(terms, start=1):
            sign = "+" if value >= 0 else "-"
            lines.append(f"  {rank:>3}  {format_label(lab):<20} {value: .6g}  {sign}")
            rows.append([j, rank, format_label(lab), repr(value), sign])
    print("\n".join(lines))
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["channel", "rank", "label", "value", "sign"])
        writer.writerows(rows)
        atomic_write_text(args.csv, buf.getvalue())
    return EXIT_OK


def cmd_inspect(args) -> int:
    net = load_network(args.network_file)
    for l, layer in enumerate(net.layers, start=1):
        norms = column_norms(layer, args.norm)
        bounded = bool(np.all(norms <= 1 + 1e-9))
        print(
            f"layer {l}: {layer.activation.value} weights {layer.weights.shape[0]}x{layer.weights.shape[1]} "
            f"max {args.norm} column norm {norms.max():.6g} all<=1 {bounded}"
        )
        if args.verbose_norms:
            print("  " + " ".join(f"{v:.6g}" for v in norms))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlp2poly", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthetic data from a polynomial")
    g.add_argument("poly_file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--noise-sd", type=float, default=0.0)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--scale", action="store_true", help="map every column to [-1, 1]")
    g.add_argument("--split", action="store_true", help="also write <out>_train and <out>_test at 0.75/0.25")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a constrained MLP")
    t.add_argument("data_csv")
    t.add_argument("arch", help="e.g. 50:tanh,100:tanh,50:tanh,1:linear")
    t.add_argument("--out", required=True, help="network file")
    t.add_argument("--history", help="history CSV (default: <out>.history.csv)")
    t.add_argument("--n-responses", type=int, default=1)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--learning-rate", type=float, default=1e-3)
    t.add_argument("--optimizer", choices=OPTIMIZERS, default="adam")
    t.add_argument("--loss", choices=LOSSES, default="mse")
    t.add_argument("--constraint", choices=CONSTRAINTS, default="l1_norm")
    t.add_argument("--validation-split", type=float, default=0.0)
    t.add_argument("--seed", type=int, required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("extract", help="polynomial from a network")
    e.add_argument("network_file")
    e.add_argument("--out", required=True)
    e.add_argument("--max-order", type=int, default=DEFAULT_MAX_ORDER)
    e.add_argument(
        "--taylor-order", type=int, nargs="+", default=[DEFAULT_TAYLOR_ORDER],
        help="one order for all nonlinear layers, or one per nonlinear layer",
    )
    e.add_argument("--keep-layers", action="store_true")
    e.add_argument("--partition-ceiling", type=int, default=DEFAULT_PARTITION_CEILING,
                   help="abort (exit 4) if the partition cache would exceed this many partitions")
    e.set_defaults(func=cmd_extract)

    pr = sub.add_parser("predict", help="evaluate a polynomial on a CSV")
    pr.add_argument("poly_file")
    pr.add_argument("data_csv")
    pr.add_argument("--out", required=True)
    pr.add_argument("--postprocess", choices=["none", "softmax_argmax"], default="none")
    pr.set_defaults(func=cmd_predict)

    c = sub.add_parser("compare", help="network versus polynomial on a CSV")
    c.add_argument("network_file")
    c.add_argument("poly_file")
    c.add_argument("data_csv")
    c.add_argument("--classification", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("report", help="largest coefficients per channel")
    r.add_argument("poly_file")
    r.add_argument("--n", type=int, default=10)
    r.add_argument("--csv")
    r.set_defaults(func=cmd_report)

    i = sub.add_parser("inspect", help="layer shapes and column norms")
    i.add_argument("network_file")
    i.add_argument("--norm", choices=["l1", "l2"], default="l1")
    i.add_argument("--verbose-norms", action="store_true", help="print every column norm")
    i.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PartitionCeilingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CEILING
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
