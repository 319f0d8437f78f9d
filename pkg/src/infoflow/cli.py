"""Command-line front end.

Binds NPY tensors and run manifests to the analysis operations and writes
CSV or JSON results. All randomness (pair sampling, permutation draws)
flows from --seed, so repeated runs with identical inputs and flags produce
byte-identical outputs. Errors are emitted as one JSON record on stderr
with a nonzero exit status; saturation diagnostics appear as
"warning: ..." lines on stderr.
"""

import argparse
import csv
import dataclasses
import io
import json
import sys

from .chains import (
    dpi_error,
    dpi_forward,
    group_joint_gram,
    ip_trajectory,
    load_batch_grams,
)
from .entropy import (
    EntropyConfig,
    SaturationError,
    joint_entropy,
    matrix_entropy,
    mmi,
    saturation_check,
)
from .gram import KernelSpec, gram, label_gram
from .pid import PairSamplingPolicy, layer_pid
from .selection import PermutationTestConfig, select_filter_count
from .tensorio import (
    ManifestError,
    TensorFormatError,
    load_batch,
    load_manifest,
    read_tensor,
)


class CliError(Exception):
    """User-facing failure with a stable error code."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse usage failures also become machine-readable records.
    def error(self, message):
        _emit_error("usage", message)
        raise SystemExit(2)


def _emit_error(code, message):
    json.dump({"error": code, "message": str(message)}, sys.stderr)
    sys.stderr.write("\n")


def _warn(message):
    sys.stderr.write(f"warning: {message}\n")


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def _write_csv(header, rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def _write_output(args, header, rows, json_obj):
    buf = io.StringIO()
    if args.format == "csv":
        _write_csv(header, rows, buf)
    else:
        json.dump(json_obj, buf, indent=2)
        buf.write("\n")
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)


def _entropy_config(args):
    return EntropyConfig(alpha=args.alpha)


def _tensor_kernel(args):
    """Kernel for tensors fed directly via --input/--inputs/--reference."""
    if args.kernel == "delta":
        return KernelSpec.label_delta()
    if args.sigma is not None:
        if args.h_given:
            raise CliError("conflicting-bandwidth", "--sigma conflicts with --h")
        return KernelSpec.rbf_fixed(args.sigma)
    return KernelSpec.rbf_silverman(args.h)


def _forward_kernel(args):
    if args.sigma is not None:
        if args.h_given:
            raise CliError("conflicting-bandwidth", "--sigma conflicts with --h")
        return KernelSpec.rbf_fixed(args.sigma)
    return KernelSpec.rbf_silverman(args.h)


def _error_kernel(args):
    return KernelSpec.rbf_silverman(args.h_error)


def _pair_policy(args, channels):
    if args.pairs == "random":
        return PairSamplingPolicy.random(k=args.pair_count, seed=args.seed)
    if args.pairs == "exhaustive":
        return PairSamplingPolicy.exhaustive()
    return PairSamplingPolicy.default(channels, seed=args.seed)


def _check_saturation(grams, label, cfg):
    if len(grams) < 2:
        return
    result = saturation_check(grams, cfg.saturation_epsilon)
    if result.saturated:
        _warn(
            f"saturated Hadamard chain at {label}: mean off-diagonal "
            f"{result.off_diag_mean!r} below {result.threshold!r}"
        )


def _read_gram(path, kernel):
    mat = read_tensor(path)
    return mat, gram(mat, kernel)


# --- commands -------------------------------------------------------------


def _cmd_entropy(args):
    cfg = _entropy_config(args)
    kernel = _tensor_kernel(args)
    mat, A = _read_gram(args.input, kernel)
    n, d = mat.shape
    sigma = kernel.resolve_sigma(n, d) if kernel.family == "rbf" else None
    value = matrix_entropy(A, cfg)
    header = ["input", "n", "d", "kernel", "sigma", "alpha", "bits"]
    rows = [[args.input, n, d, kernel.family, sigma, args.alpha, value.bits]]
    obj = {
        "command": "entropy",
        "input": args.input,
        "n": n,
        "d": d,
        "kernel": kernel.family,
        "sigma": sigma,
        "alpha": args.alpha,
        "bits": value.bits,
    }
    _write_output(args, header, rows, obj)


def _cmd_joint_entropy(args):
    cfg = _entropy_config(args)
    kernel = _tensor_kernel(args)
    grams = [_read_gram(p, kernel)[1] for p in args.inputs]
    _check_saturation(grams, "joint-entropy inputs", cfg)
    value = joint_entropy(grams, cfg)
    header = ["inputs", "n", "count", "alpha", "bits"]
    rows = [[";".join(args.inputs), value.n, len(grams), args.alpha, value.bits]]
    obj = {
        "command": "joint-entropy",
        "inputs": list(args.inputs),
        "n": value.n,
        "count": len(grams),
        "alpha": args.alpha,
        "bits": value.bits,
    }
    _write_output(args, header, rows, obj)


def _cmd_mmi(args):
    cfg = _entropy_config(args)
    ref_kernel = (
        KernelSpec.label_delta() if args.reference_kernel == "delta" else _forward_kernel(args)
    )
    in_kernel = _tensor_kernel(args)
    _, B = _read_gram(args.reference, ref_kernel)
    grams = [_read_gram(p, in_kernel)[1] for p in args.inputs]
    _check_saturation(grams, "mmi inputs", cfg)
    value = mmi(B, grams, cfg)
    header = ["reference", "inputs", "n", "count", "alpha", "bits", "negative_flag"]
    rows = [[
        args.reference,
        ";".join(args.inputs),
        value.n,
        len(grams),
        args.alpha,
        value.bits,
        value.negative_flag,
    ]]
    obj = {
        "command": "mmi",
        "reference": args.reference,
        "inputs": list(args.inputs),
        "n": value.n,
        "count": len(grams),
        "alpha": args.alpha,
        "bits": value.bits,
        "negative_flag": value.negative_flag,
    }
    _write_output(args, header, rows, obj)


def _chain_for_batch(args, manifest, ei, bi, cfg):
    grams = load_batch_grams(
        manifest, ei, bi, forward_kernel=_forward_kernel(args), error_kernel=_error_kernel(args)
    )
    if args.direction == "forward":
        for group in grams.layer_groups:
            _check_saturation(group.grams, f"layer {group.name}", cfg)
        return dpi_forward(grams.input_gram, grams.layer_groups, cfg)
    if not grams.error_groups:
        return None
    if len(grams.error_groups) < 3:
        raise CliError(
            "short-error-chain",
            "error-chain audit needs the output error plus at least two more signals",
        )
    delta_out = group_joint_gram(grams.error_groups[0])
    return dpi_error(delta_out, grams.error_groups[1:], cfg)


def _cmd_dpi_check(args):
    cfg = _entropy_config(args)
    manifest = load_manifest(args.manifest)
    rows = []
    reports = []
    for ei, epoch_entry in enumerate(manifest.epochs):
        for bi in range(len(epoch_entry.batches)):
            report = _chain_for_batch(args, manifest, ei, bi, cfg)
            if report is None:
                _warn(f"epoch {epoch_entry.epoch} batch {bi}: no error signals, skipped")
                continue
            # A row is flagged when its value increased over its predecessor.
            violated = {second for _, second in report.violations}
            for pos, (layer, bits) in enumerate(report.values, start=1):
                rows.append([
                    epoch_entry.epoch,
                    bi,
                    report.direction,
                    pos,
                    layer,
                    bits,
                    pos in violated,
                    report.violation_fraction,
                ])
            reports.append({
                "epoch": epoch_entry.epoch,
                "batch": bi,
                "direction": report.direction,
                "values": [{"layer": l, "bits": b} for l, b in report.values],
                "violations": [list(v) for v in report.violations],
                "violation_fraction": report.violation_fraction,
            })
    header = [
        "epoch", "batch", "direction", "position", "layer", "bits",
        "violation", "violation_fraction",
    ]
    obj = {"command": "dpi-check", "direction": args.direction, "reports": reports}
    _write_output(args, header, rows, obj)


def _cmd_pid(args):
    cfg = _entropy_config(args)
    manifest = load_manifest(args.manifest)
    wanted = set(args.layer) if args.layer else None
    rows = []
    reports = []
    seen = set()
    for ei, epoch_entry in enumerate(manifest.epochs):
        for bi in range(len(epoch_entry.batches)):
            grams = load_batch_grams(manifest, ei, bi, forward_kernel=_forward_kernel(args))
            for group in grams.layer_groups:
                if wanted is not None and group.name not in wanted:
                    continue
                if len(group.grams) < 2:
                    if wanted is not None:
                        raise CliError(
                            "no-pairs", f"layer {group.name!r} has no feature-map pairs"
                        )
                    continue
                seen.add(group.name)
                _check_saturation(group.grams, f"layer {group.name}", cfg)
                policy = _pair_policy(args, len(group.grams))
                report = layer_pid(
                    grams.input_gram, group.grams, policy, cfg, layer=group.name
                )
                rows.append([
                    epoch_entry.epoch, bi, report.layer,
                    report.pairs_evaluated, report.pairs_skipped,
                    report.tradeoff_bits, report.nonredundant_bits,
                    report.tradeoff_pct, report.nonredundant_pct,
                ])
                entry = dataclasses.asdict(report)
                entry["epoch"] = epoch_entry.epoch
                entry["batch"] = bi
                reports.append(entry)
    if wanted is not None:
        missing = wanted - seen
        if missing:
            raise CliError("unknown-layer", f"layers not in manifest: {sorted(missing)}")
    header = [
        "epoch", "batch", "layer", "pairs_evaluated", "pairs_skipped",
        "tradeoff_bits", "nonredundant_bits", "tradeoff_pct", "nonredundant_pct",
    ]
    obj = {"command": "pid", "reports": reports}
    _write_output(args, header, rows, obj)


def _cmd_ip_trajectory(args):
    cfg = _entropy_config(args)
    manifest = load_manifest(args.manifest)
    policy = None
    if args.pairs is not None:
        # A shared explicit policy only works when every selected layer has
        # enough channels; per-layer defaults otherwise.
        policy = _pair_policy(args, 0) if args.pairs == "random" else PairSamplingPolicy.exhaustive()
    trajectory = ip_trajectory(
        manifest,
        plane=args.plane,
        layers=args.layer if args.layer else None,
        cfg=cfg,
        policy=policy,
        forward_kernel=_forward_kernel(args),
        seed=args.seed,
    )
    for skip in trajectory.skipped:
        _warn(f"epoch {skip.epoch}: layer {skip.layer!r} skipped ({skip.reason})")
    header = ["epoch", "layer", "plane", "x_bits", "y_bits"]
    rows = [
        [p.epoch, p.layer, p.plane, p.x_bits, p.y_bits] for p in trajectory.points
    ]
    obj = {
        "command": "ip-trajectory",
        "plane": args.plane,
        "points": [dataclasses.asdict(p) for p in trajectory.points],
        "skipped": [dataclasses.asdict(s) for s in trajectory.skipped],
    }
    _write_output(args, header, rows, obj)


def _conv_layer_grams(args, manifest, cfg):
    input_snap, labels_snap, layers, _ = load_batch(manifest, args.epoch, args.batch)
    target = None
    for snap in layers:
        if snap.name == args.layer_name:
            target = snap
            break
    if target is None:
        raise CliError("unknown-layer", f"layer {args.layer_name!r} not in manifest")
    kernel = _forward_kernel(args)
    B = gram(input_snap.matrices[0], kernel)
    Ay = label_gram(labels_snap.matrices[0][:, 0])
    filter_grams = [gram(m, kernel) for m in target.matrices]
    return B, Ay, target, filter_grams, kernel


def _cmd_cmi_select(args):
    cfg = _entropy_config(args)
    manifest = load_manifest(args.manifest)
    _, Ay, target, filter_grams, kernel = _conv_layer_grams(args, manifest, cfg)
    test = PermutationTestConfig(P=args.P, significance=args.significance, seed=args.seed)
    filters = list(zip(filter_grams, target.matrices))
    result = select_filter_count(filters, Ay, order="mi", cfg=cfg, test=test, kernel=kernel)
    header = ["step", "candidate", "observed_bits", "p_value", "decision", "selected_count"]
    rows = []
    for step, trace in enumerate(result.trace):
        last = step == len(result.trace) - 1
        rows.append([
            step,
            trace.candidate,
            trace.observed_bits,
            trace.p_value,
            trace.decision,
            result.selected_count if last else None,
        ])
    obj = {
        "command": "cmi-select",
        "layer": args.layer_name,
        "epoch": args.epoch,
        "batch": args.batch,
        "P": args.P,
        "significance": args.significance,
        "seed": args.seed,
        "decision": result.decision,
        "selected_count": result.selected_count,
        "p_value": result.p_value,
        "trace": [dataclasses.asdict(t) for t in result.trace],
    }
    _write_output(args, header, rows, obj)


def _cmd_ib_score(args):
    cfg = _entropy_config(args)
    manifest = load_manifest(args.manifest)
    B, Ay, target, filter_grams, _ = _conv_layer_grams(args, manifest, cfg)
    scored = []
    for idx, Ai in enumerate(filter_grams):
        i_xt = mmi(B, [Ai], cfg).bits
        i_ty = mmi(Ay, [Ai], cfg).bits
        scored.append((idx, i_xt, i_ty, i_xt - args.beta * i_ty))
    by_score = sorted(range(len(scored)), key=lambda i: (scored[i][3], i))
    ranks = {flt: rank for rank, flt in enumerate(by_score)}
    header = ["filter", "i_xt_bits", "i_ty_bits", "score_bits", "importance_rank"]
    rows = [
        [idx, i_xt, i_ty, score, ranks[idx]] for idx, i_xt, i_ty, score in scored
    ]
    obj = {
        "command": "ib-score",
        "layer": args.layer_name,
        "epoch": args.epoch,
        "batch": args.batch,
        "beta": args.beta,
        "filters": [
            {
                "filter": idx,
                "i_xt_bits": i_xt,
                "i_ty_bits": i_ty,
                "score_bits": score,
                "importance_rank": ranks[idx],
            }
            for idx, i_xt, i_ty, score in scored
        ],
    }
    _write_output(args, header, rows, obj)


# --- argument wiring ------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--alpha", type=float, default=1.01, help="entropy order (default 1.01)")
    parser.add_argument(
        "--kernel", choices=["rbf", "delta"], default="rbf",
        help="kernel for tensor inputs (default rbf)",
    )
    parser.add_argument(
        "--h", type=float, default=5.0, dest="h",
        help="Silverman multiplier for activation/input Grams (default 5)",
    )
    parser.add_argument(
        "--h-error", type=float, default=0.1,
        help="Silverman multiplier for error-signal Grams (default 0.1)",
    )
    parser.add_argument("--sigma", type=float, default=None, help="fixed RBF bandwidth (overrides the Silverman rule; conflicts with an explicit --h)")
    parser.add_argument(
        "--pairs", choices=["exhaustive", "random"], default=None,
        help="pair sampling policy (default: exhaustive up to 64 channels)",
    )
    parser.add_argument(
        "--pair-count", type=int, default=2016,
        help="pairs drawn when --pairs random (default 2016)",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument("--P", type=int, default=100, help="permutation count (default 100)")
    parser.add_argument(
        "--significance", type=float, default=0.05,
        help="permutation-test significance level (default 0.05)",
    )
    parser.add_argument("--beta", type=float, default=2.0, help="bottleneck trade-off weight (default 2)")
    parser.add_argument("--format", choices=["csv", "json"], default="csv", help="output format")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")


def build_parser():
    parser = _Parser(
        prog="infoflow",
        description=(
            "Gram-spectrum entropy, mutual-information and information-flow "
            "audits over NPY activation dumps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "entropy", help="entropy of one tensor",
        description="CSV columns: input,n,d,kernel,sigma,alpha,bits",
    )
    p.add_argument("--input", required=True, help="NPY tensor")
    _add_common(p)
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser(
        "joint-entropy", help="joint entropy of several tensors",
        description="CSV columns: inputs,n,count,alpha,bits",
    )
    p.add_argument("--inputs", nargs="+", required=True, help="NPY tensors")
    _add_common(p)
    p.set_defaults(func=_cmd_joint_entropy)

    p = sub.add_parser(
        "mmi", help="multivariate mutual information",
        description="CSV columns: reference,inputs,n,count,alpha,bits,negative_flag",
    )
    p.add_argument("--reference", required=True, help="reference tensor (e.g. input batch or labels)")
    p.add_argument(
        "--reference-kernel", choices=["rbf", "delta"], default="rbf",
        help="kernel for the reference tensor",
    )
    p.add_argument("--inputs", nargs="+", required=True, help="NPY tensors forming the group")
    _add_common(p)
    p.set_defaults(func=_cmd_mmi)

    p = sub.add_parser(
        "dpi-check", help="data-processing-inequality audit over a run",
        description=(
            "CSV columns: epoch,batch,direction,position,layer,bits,violation,"
            "violation_fraction"
        ),
    )
    p.add_argument("--manifest", required=True, help="run manifest.json")
    p.add_argument("--direction", choices=["forward", "error"], required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_dpi_check)

    p = sub.add_parser(
        "pid", help="pairwise redundancy/synergy quantities per conv layer",
        description=(
            "CSV columns: epoch,batch,layer,pairs_evaluated,pairs_skipped,"
            "tradeoff_bits,nonredundant_bits,tradeoff_pct,nonredundant_pct"
        ),
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--layer", action="append", help="restrict to these layers (repeatable)")
    _add_common(p)
    p.set_defaults(func=_cmd_pid)

    p = sub.add_parser(
        "ip-trajectory", help="information-plane trajectory per epoch and layer",
        description="CSV columns: epoch,layer,plane,x_bits,y_bits",
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--plane", choices=["ip", "mip"], default="ip")
    p.add_argument("--layer", action="append", help="restrict to these layers (repeatable)")
    _add_common(p)
    p.set_defaults(func=_cmd_ip_trajectory)

    p = sub.add_parser(
        "cmi-select", help="filter-count selection by CMI permutation test",
        description=(
            "CSV columns: step,candidate,observed_bits,p_value,decision,"
            "selected_count (filled on the stopping row)"
        ),
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--layer", dest="layer_name", required=True, help="conv layer to analyze")
    p.add_argument("--epoch", type=int, default=0, help="epoch index (position, default 0)")
    p.add_argument("--batch", type=int, default=0, help="batch index (position, default 0)")
    _add_common(p)
    p.set_defaults(func=_cmd_cmi_select)

    p = sub.add_parser(
        "ib-score", help="bottleneck importance score per filter",
        description="CSV columns: filter,i_xt_bits,i_ty_bits,score_bits,importance_rank",
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--layer", dest="layer_name", required=True, help="conv layer to score")
    p.add_argument("--epoch", type=int, default=0)
    p.add_argument("--batch", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_ib_score)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.h_given = any(a == "--h" or a.startswith("--h=") for a in argv)
    try:
        args.func(args)
    except CliError as exc:
        _emit_error(exc.code, exc)
        return 1
    except (TensorFormatError, ManifestError) as exc:
        _emit_error("input", exc)
        return 1
    except SaturationError as exc:
        _emit_error("saturation", exc)
        return 1
    except (ValueError, OSError) as exc:
        _emit_error("invalid", exc)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
