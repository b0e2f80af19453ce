"""Command-line entry point: ``toih <subcommand> [flags]``.

Exit codes: 0 success, 1 validation or acceptance failure, 2 I/O or usage error.
"""
import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from toih.datamodel import (
    BehaviorProfile,
    JoinError,
    SchemaError,
    iter_validate,
    join,
    parse_records,
    parse_samples,
    sample_from_dict,
    serialize_records,
    serialize_samples,
    synthesize_responses,
    synthesize_samples,
)
from toih.metrics import full_report
from toih.moe import CONFLICTS, EXPERTS, ConflictSpec, ModelConfig, MoEParams, forward, init_params, synth_features, synth_query
from toih.numerics import grad_check
from toih.seeding import derive_seed
from toih.training import LossWeights, TrainConfig, evaluate_router, gen_synthetic_dataset, loss_tape, train, write_history

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
MAX_SHOWN_ERRORS = 20

# toy preset: the library default lr (1e-5) barely moves a randomly
# initialised desk-scale model in 200 steps
TOY_LR = 3e-3
TOY_THRESHOLDS = {"classifier_accuracy": 0.90, "dominant_expert_agreement": 0.80, "max_expert_share": 0.60}

log = logging.getLogger("toih")


class UsageError(Exception):
    pass


def _read(path):
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise IOError(f"cannot read {path}: {e.strerror or e}") from None


def _write(path, text):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise IOError(f"output directory does not exist: {parent}")
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def _emit(text, out):
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def _model_config(args, **defaults):
    kw = dict(defaults)
    for flag, field in (("d", "d"), ("k", "k_select"), ("insert_layer", "insert_layer"), ("depth", "depth"),
                        ("n_patches", "n_patches"), ("expert_hidden", "expert_hidden")):
        v = getattr(args, flag, None)
        if v is not None:
            kw[field] = v
    try:
        return ModelConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _weights(args):
    try:
        return LossWeights(args.lambda_cls, args.lambda_sft, args.lambda_aux)
    except ValueError as e:
        raise UsageError(str(e)) from None


# -- subcommands --------------------------------------------------------------

def cmd_validate(args):
    text = _read(args.samples)
    errors, n_ok = [], 0
    for _, item in iter_validate(text, sample_from_dict):
        if isinstance(item, SchemaError):
            errors.append(item)
        else:
            n_ok += 1
    if errors:
        for e in errors[:MAX_SHOWN_ERRORS]:
            print(e, file=sys.stderr)
        if len(errors) > MAX_SHOWN_ERRORS:
            print(f"... {len(errors) - MAX_SHOWN_ERRORS} more", file=sys.stderr)
        print(f"{len(errors)} invalid, {n_ok} valid samples")
        return EXIT_FAIL
    print(f"{n_ok} samples OK")
    return EXIT_OK


def cmd_make_samples(args):
    samples = synthesize_samples(args.n_groups, derive_seed(args.seed, "samples"))
    _emit(serialize_samples(samples), args.out)
    return EXIT_OK


def cmd_simulate(args):
    samples = parse_samples(_read(args.samples))
    try:
        profile = BehaviorProfile.uniform(args.p_correct, args.p_halluc, with_probs=args.with_probs)
    except ValueError as e:
        raise UsageError(str(e)) from None
    records = synthesize_responses(samples, profile, derive_seed(args.seed, "simulator"), model_id=args.model_id)
    _emit(serialize_records(records), args.out)
    return EXIT_OK


def cmd_eval(args):
    samples = parse_samples(_read(args.samples))
    records = parse_records(_read(args.responses))
    model_id = args.model_id
    if model_id is None:
        ids = sorted({r.model_id for r in records})
        if len(ids) > 1:
            raise UsageError(f"responses hold several models ({', '.join(ids)}); pass --model-id")
        model_id = ids[0] if ids else "unknown"
    evaluated, coverage = join(samples, records, model_id)
    if not evaluated:
        log.warning("no responses for model %r; every metric is undefined", model_id)
    elif coverage.n_missing:
        log.warning("%d of %d samples have no response", coverage.n_missing, coverage.n_samples)
    report = full_report(evaluated)
    text = report.to_table(model_id) if args.format == "table" else report.to_json()
    _emit(text, args.out)
    return EXIT_OK


def demo_summary(config, params, conflict, intensity, seed):
    """Run one synthetic input through the router and summarise the trace."""
    spec = ConflictSpec(conflict, intensity)
    rng = np.random.default_rng(derive_seed(seed, "demo"))
    answer = int(rng.integers(4))
    f_vis, f_ocr = synth_features(config, derive_seed(seed, "demo-features"), spec, answer=answer)
    query = synth_query(config, derive_seed(seed, "demo-query"))
    res = forward(config, params, f_vis, f_ocr, query)
    z = res.pooled_video_logits.value
    cls_dist = np.exp(z - z.max())
    cls_dist /= cls_dist.sum()
    trace = res.trace
    patch_c = trace.consistency[0:3 * len(res.selected):3]
    return {
        "conflict": spec.dimension,
        "intensity": spec.intensity,
        "selected_patches": res.selected,
        "tokens": len(trace),
        "patch_consistency": [float(x) for x in patch_c],
        "all_consistent": bool(np.all(trace.consistency == 1.0)),
        "gate_only": trace.gate_only,
        "classifier_distribution": dict(zip(EXPERTS, (float(x) for x in cls_dist))),
        "expert_counts": dict(zip(EXPERTS, (int(x) for x in trace.counts))),
        "expert_shares": dict(zip(EXPERTS, (float(x) for x in trace.shares))),
        "answer_distribution": dict(zip("ABCD", (float(x) for x in _softmax(res.option_logits.value)))),
    }


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def _render_demo(s):
    lines = [
        f"conflict: {s['conflict']} (intensity {s['intensity']:.2f})",
        f"tokens: {s['tokens']}  selected patches: {s['selected_patches']}",
        "patch consistency: " + " ".join(f"{c:.3f}" for c in s["patch_consistency"]),
        f"all consistent (c == 1): {'yes' if s['all_consistent'] else 'no'}",
        f"gate-only routing: {'yes' if s['gate_only'] else 'no'}",
        "",
        f"{'dimension':<10} {'classifier':>10} {'expert share':>13}",
    ]
    for e in EXPERTS:
        lines.append(f"{e:<10} {s['classifier_distribution'][e]:>10.3f} {s['expert_shares'][e]:>13.3f}")
    return "\n".join(lines) + "\n"


def cmd_moe_demo(args):
    if args.checkpoint:
        try:
            params = MoEParams.from_checkpoint(_read(args.checkpoint))
        except (ValueError, KeyError) as e:
            raise UsageError(f"bad checkpoint {args.checkpoint}: {e}") from None
        config = params.config
    else:
        config = _model_config(args, seed=derive_seed(args.seed, "init"))
        params = init_params(config)
    summary = demo_summary(config, params, args.conflict, args.intensity, args.seed)
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n" if args.format == "json" else _render_demo(summary)
    _emit(text, args.out)
    return EXIT_OK


def toy_run(args):
    """Dataset, training and held-out evaluation for ``train-toy``."""
    config = _model_config(args, seed=derive_seed(args.seed, "init"))
    weights = _weights(args)
    steps = args.steps
    if steps < 0:
        raise UsageError("--steps must be >= 0")
    per_epoch = math.ceil(args.n_train / args.batch_size)
    try:
        tc = TrainConfig(
            lr=args.lr,
            epochs=max(1, math.ceil(steps / per_epoch)),
            warmup_steps=args.warmup,
            seed=derive_seed(args.seed, "shuffle"),
            batch_size=args.batch_size,
            max_steps=steps,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    data = gen_synthetic_dataset(args.n_train, config, derive_seed(args.seed, "dataset"), intensity=args.intensity)
    heldout = gen_synthetic_dataset(args.n_heldout, config, derive_seed(args.seed, "heldout"), intensity=args.intensity)
    params, history = train(tc, config, data, weights)
    ev = evaluate_router(config, params, heldout)
    checks = {
        "classifier_accuracy": ev.classifier_accuracy >= TOY_THRESHOLDS["classifier_accuracy"],
        "dominant_expert_agreement": ev.dominant_expert_agreement >= TOY_THRESHOLDS["dominant_expert_agreement"],
        "max_expert_share": ev.max_expert_share <= TOY_THRESHOLDS["max_expert_share"],
    }
    report = {
        "model_config": config.to_dict(),
        "train_config": tc.to_dict(),
        "loss_weights": {"lambda_cls": weights.lambda_cls, "lambda_sft": weights.lambda_sft, "lambda_aux": weights.lambda_aux},
        "n_train": args.n_train,
        "n_heldout": args.n_heldout,
        "steps": len(history),
        "first_total": history[0]["total"] if history else None,
        "last": history[-1] if history else None,
        "heldout": ev.to_dict(),
        "thresholds": TOY_THRESHOLDS,
        "checks": checks,
        "passed": all(checks.values()),
    }
    return params, history, report


def cmd_train_toy(args):
    out = args.out
    if os.path.exists(out) and not os.path.isdir(out):
        raise IOError(f"--out must be a directory: {out}")
    os.makedirs(out, exist_ok=True)
    params, history, report = toy_run(args)
    params.save(os.path.join(out, "checkpoint.json"))
    write_history(history, os.path.join(out, "history.jsonl"))
    _write(os.path.join(out, "report.json"), json.dumps(report, indent=2, sort_keys=True) + "\n")
    ev = report["heldout"]
    print(f"trained {report['steps']} steps -> {out}")
    print(f"classifier accuracy      {ev['classifier_accuracy']:.3f}")
    print(f"dominant-expert agreement {ev['dominant_expert_agreement']:.3f}")
    print(f"max expert share         {ev['max_expert_share']:.3f}")
    if args.check and not report["passed"]:
        failed = [k for k, ok in report["checks"].items() if not ok]
        print(f"acceptance thresholds not met: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_gradcheck(args):
    config = _model_config(
        args, d=8, n_patches=6, k_select=3, depth=4, n_query_tokens=3, expert_hidden=8,
        seed=derive_seed(args.seed, "init"),
    )
    params = init_params(config)
    examples = gen_synthetic_dataset(args.n_examples, config, derive_seed(args.seed, "dataset"))
    tape = loss_tape(config, params, examples, _weights(args))
    t0 = time.perf_counter()
    try:
        report = grad_check(tape, step=args.h, tol_abs=args.tol_abs, tol_rel=args.tol_rel, corrupt=args.corrupt_group)
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None
    elapsed = time.perf_counter() - t0
    print(f"tokens per example: {config.n_tokens}  step h={args.h:g}  entries: {report.n_entries}")
    print(f"{'group':<22} {'worst mixed error':>18}  status")
    for group, err in report.by_group().items():
        print(f"{group:<22} {err:>18.3e}  {'ok' if err < report.tol_rel else 'FAIL'}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: worst {report.max_error:.3e} (tolerance {report.tol_rel:g}) in {elapsed:.1f}s")
    if not report.passed:
        print("failing groups: " + ", ".join(report.failing_groups()), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _probability(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _add_model_flags(p):
    p.add_argument("--d", type=int, help="embedding width")
    p.add_argument("--k", type=int, help="number of selected patches")
    p.add_argument("--insert-layer", type=int, help="backbone layer after which the expert layer sits")
    p.add_argument("--depth", type=int, help="stand-in backbone depth")


def _add_loss_flags(p):
    p.add_argument("--lambda-cls", type=float, default=1.1)
    p.add_argument("--lambda-sft", type=float, default=1.0)
    p.add_argument("--lambda-aux", type=float, default=0.01)


def build_parser():
    parser = argparse.ArgumentParser(prog="toih", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a samples file against the schema")
    p.add_argument("--samples", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("make-samples", help="write a synthetic benchmark corpus")
    p.add_argument("--n-groups", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    p.set_defaults(func=cmd_make_samples)

    p = sub.add_parser("simulate", help="synthesise model responses for a samples file")
    p.add_argument("--samples", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--model-id", default="simulated")
    p.add_argument("--p-correct", type=_probability, default=0.7)
    p.add_argument("--p-halluc", type=_probability, default=0.0)
    p.add_argument("--with-probs", action="store_true", help="also emit per-option probabilities")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="compute the metric report")
    p.add_argument("--samples", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--model-id")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("moe-demo", help="route one synthetic input and print the trace summary")
    p.add_argument("--checkpoint")
    p.add_argument("--conflict", choices=CONFLICTS, default="none")
    p.add_argument("--intensity", type=_probability, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    _add_model_flags(p)
    p.set_defaults(func=cmd_moe_demo)

    p = sub.add_parser("train-toy", help="train on synthetic conflicts; write checkpoint, history and report")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=TOY_LR)
    p.add_argument("--warmup", type=int, default=80)
    p.add_argument("--batch-size", type=int, default=5)
    p.add_argument("--n-train", type=int, default=500)
    p.add_argument("--n-heldout", type=int, default=200)
    p.add_argument("--intensity", type=_probability, default=1.0)
    p.add_argument("--check", action="store_true", help="exit 1 if the held-out thresholds are not met")
    _add_model_flags(p)
    _add_loss_flags(p)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("gradcheck", help="finite-difference check of the training loss gradient")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--h", type=float, default=1e-5, help="central difference step")
    p.add_argument("--tol-abs", type=float, default=1e-6)
    p.add_argument("--tol-rel", type=float, default=1e-4)
    p.add_argument("--n-examples", type=int, default=2)
    p.add_argument("--corrupt-group", help=argparse.SUPPRESS)
    _add_model_flags(p)
    _add_loss_flags(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (IOError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (SchemaError, JoinError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
