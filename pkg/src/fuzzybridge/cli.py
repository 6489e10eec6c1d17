"""Command-line surface: gen, train, predict, eval, convert, verify, inspect.

Exit codes: 0 success, 2 invalid arguments, 3 data errors (unreadable or
malformed CSV/model files), 4 numerical failures and violated conversion
constraints (the offending constraint or rule is named in the message).

Every flag can also come from a key=value config file passed with --config;
explicit flags win. FUZZY_BRIDGE_SEED provides the default --seed.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import anfis, cart, moe, rbfn, stacking, verify
from .data import DataSpec, Dataset, generate, load_csv, save_csv, split
from .errors import ConstraintError, DataError, NumericalError
from .membership import Gaussian, SigmoidUp, gaussian_grid
from .model import Affine, Constant, TSKModel, mse
from .moe import MoEModel
from .rbfn import RBFNModel
from .cart import FuzzyRegressionTree, RegressionTree, extract_crisp_rules
from .stacking import StackModel
from .serialize import dump_model, load_model

METHODS = ("anfis", "moe", "cart", "fuzzy-cart", "stack", "nozaki", "local-rules")
FAMILIES = ("tsk", "rbfn", "moe", "fuzzy-cart")


def _default_seed() -> int:
    try:
        return int(os.environ.get("FUZZY_BRIDGE_SEED", "0"))
    except ValueError:
        return 0


def _add_common(p, data=False, model=False, out=False):
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="random seed (default: FUZZY_BRIDGE_SEED or 0)")
    p.add_argument("--format", choices=("json", "text"), default="text",
                   help="output format for reports")
    p.add_argument("--config", type=str, default=None,
                   help="key=value file of defaults; explicit flags win")
    if data:
        p.add_argument("--data", required=True, help="CSV file (last column = target)")
    if model:
        p.add_argument("--model", required=True, help="model JSON file")
    if out:
        p.add_argument("--out", required=True, help="output path")


def build_parser():
    parser = argparse.ArgumentParser(prog="fuzzybridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    registry = {}

    p = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    p.add_argument("--generator", required=True,
                   choices=("sinc2d", "friedman1", "piecewise_linear", "step"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--ranges", type=str, default=None,
                   help="per-feature lo:hi pairs, comma separated")
    _add_common(p, out=True)
    p.set_defaults(handler=cmd_gen)
    registry["gen"] = p

    p = sub.add_parser("train", help="fit a model and write model + metrics JSON")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--grid", type=int, default=None,
                   help="membership functions per input (grid init / nozaki)")
    p.add_argument("--clusters", type=int, default=None,
                   help="cluster-init rule count (anfis, local-rules)")
    p.add_argument("--experts", type=int, default=4, help="mixture size (moe)")
    p.add_argument("--loss", choices=moe.LOSS_KINDS, default="coupled")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="hybrid-loss trade-off weight")
    p.add_argument("--lambda-sweep", type=str, default=None,
                   help="comma-separated lambdas; sweep results land in metrics")
    p.add_argument("--max-leaves", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--steepness", type=float, default=None,
                   help="fixed sigmoid steepness for fuzzy-cart (default: gap policy)")
    p.add_argument("--bases", type=int, default=8, help="stack ensemble size")
    p.add_argument("--adaptive", action="store_true",
                   help="train input-dependent stacking gates")
    p.add_argument("--nozaki-alpha", type=float, default=1.0,
                   help="firing sharpening exponent for grid-cell consequents")
    p.add_argument("--test-fraction", type=float, default=0.0)
    _add_common(p, data=True, out=True)
    p.set_defaults(handler=cmd_train)
    registry["train"] = p

    p = sub.add_parser("predict", help="predict targets for a CSV of inputs")
    p.add_argument("--out", default=None, help="write predictions here (default: stdout)")
    _add_common(p, data=True, model=True)
    p.set_defaults(handler=cmd_predict)
    registry["predict"] = p

    p = sub.add_parser("eval", help="mean squared error of a model on a dataset")
    p.add_argument("--out", default=None, help="write metrics here (default: stdout)")
    _add_common(p, data=True, model=True)
    p.set_defaults(handler=cmd_eval)
    registry["eval"] = p

    p = sub.add_parser("convert", help="convert a model between equivalent families")
    p.add_argument("--from", dest="src", required=True, choices=FAMILIES)
    p.add_argument("--to", dest="dst", required=True, choices=("tsk", "rbfn", "moe"))
    p.add_argument("--generalized", action="store_true",
                   help="tsk->rbfn: allow affine consequents, per-feature widths, feature subsets")
    p.add_argument("--upgrade-affine", action="store_true",
                   help="fuzzy-cart->tsk: make leaf constants zero-slope affine consequents")
    _add_common(p, model=True, out=True)
    p.set_defaults(handler=cmd_convert)
    registry["convert"] = p

    p = sub.add_parser("verify", help="run a randomized verification suite")
    p.add_argument("--suite", required=True, choices=sorted(verify.SUITES))
    p.add_argument("--trials", type=int, default=1000,
                   help="random inputs per check (gradients: /50 models)")
    p.add_argument("--tol", type=float, default=None,
                   help="pass threshold (default: 1e-10; gradients 1e-4)")
    p.add_argument("--model", default=None,
                   help="also pair-check this model file against its converts")
    _add_common(p)
    p.set_defaults(handler=cmd_verify)
    registry["verify"] = p

    p = sub.add_parser("inspect", help="print a human-readable rule listing")
    _add_common(p, model=True)
    p.set_defaults(handler=cmd_inspect)
    registry["inspect"] = p

    return parser, registry


def _parse_with_config(parser, registry, argv):
    args = parser.parse_args(argv)
    config_path = getattr(args, "config", None)
    if not config_path:
        return args
    subparser = registry[args.command]
    overrides = {}
    actions = {}
    for action in subparser._actions:
        actions[action.dest] = action
        for opt in action.option_strings:
            actions[opt.lstrip("-").replace("-", "_")] = action
    try:
        with open(config_path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{config_path}:{line_no}: expected key=value")
                key, value = (part.strip() for part in line.split("=", 1))
                dest_key = key.replace("-", "_")
                if dest_key not in actions:
                    parser.error(f"unknown config key {key!r} for command {args.command!r}")
                action = actions[dest_key]
                if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                    overrides[action.dest] = value.lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    overrides[action.dest] = action.type(value)
                else:
                    overrides[action.dest] = value
    except OSError as exc:
        raise DataError(f"cannot read config file {config_path}: {exc}") from exc
    subparser.set_defaults(**overrides)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# handlers

def _emit(args, payload: dict, text_lines):
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        for line in text_lines:
            print(line)


def _parse_ranges(text):
    if text is None:
        return None
    pairs = []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        pairs.append((float(lo), float(hi)))
    return tuple(pairs)


def cmd_gen(args) -> int:
    spec = DataSpec(args.generator, args.n, noise_sd=args.noise_sd, seed=args.seed,
                    ranges=_parse_ranges(args.ranges))
    dataset = generate(spec)
    save_csv(dataset, args.out)
    _emit(args, {"path": args.out, "n": dataset.n_examples, "d": dataset.input_dim},
          [f"wrote {dataset.n_examples} x {dataset.input_dim} dataset to {args.out}"])
    return 0


def _data_ranges(dataset: Dataset):
    lo = dataset.inputs.min(axis=0)
    hi = dataset.inputs.max(axis=0)
    ranges = []
    for a, b in zip(lo, hi):
        if a == b:  # degenerate feature; widen so grids stay valid
            a, b = a - 0.5, b + 0.5
        ranges.append((float(a), float(b)))
    return ranges


def _train_paths(out):
    p = Path(out)
    return p, p.with_name(p.stem + ".metrics.json"), p.with_name(p.stem + ".history.jsonl")


def cmd_train(args) -> int:
    dataset = load_csv(args.data)
    if not 0.0 <= args.test_fraction < 1.0:
        raise ValueError("--test-fraction must be in [0, 1)")
    if args.test_fraction > 0:
        train_set, test_set = split(dataset, args.test_fraction, args.seed)
    else:
        train_set, test_set = dataset, None
    model_path, metrics_path, history_path = _train_paths(args.out)
    config = anfis.TrainConfig(epochs=args.epochs, learning_rate=args.learning_rate,
                               ridge_jitter=args.ridge, seed=args.seed)
    metrics = {"method": args.method, "seed": args.seed}
    history = None

    if args.method == "anfis":
        if args.clusters is not None:
            init = anfis.cluster_init(train_set, args.clusters, args.seed)
        else:
            p = args.grid if args.grid is not None else 2
            init = anfis.grid_init(train_set.input_dim, p, _data_ranges(train_set),
                                   dataset=train_set)
        model, history = anfis.hybrid_train(init, train_set, config, test_set)
        if history.records:
            train_mse = history.final_train_mse()
        else:
            train_mse = mse(model.batch_predict(train_set), train_set.targets)
        metrics |= {"n_rules": model.n_rules, "epochs": args.epochs, "train_mse": train_mse}
    elif args.method == "moe":
        init = moe.tsk_to_moe(anfis.cluster_init(train_set, args.experts, args.seed))
        model, history = moe.train_moe(init, train_set, args.loss, args.lam, config, test_set)
        metrics |= {
            "n_experts": model.n_experts,
            "loss": args.loss,
            "lambda": args.lam,
            "train_mse": mse(model.batch_predict(train_set), train_set.targets),
        }
        if args.lambda_sweep:
            sweep = []
            for lam in (float(tok) for tok in args.lambda_sweep.split(",")):
                swept, _ = moe.train_moe(init, train_set, "hybrid", lam, config, test_set)
                sweep.append({
                    "lambda": lam,
                    "final_train_mse": mse(swept.batch_predict(train_set), train_set.targets),
                    "final_test_mse": (
                        mse(swept.batch_predict(test_set), test_set.targets)
                        if test_set is not None else None
                    ),
                    "expert_usage_entropy": moe.expert_usage_entropy(swept, train_set),
                })
            metrics["lambda_sweep"] = sweep
    elif args.method in ("cart", "fuzzy-cart"):
        tree = cart.fit_tree(train_set, args.max_leaves, args.min_leaf)
        if args.method == "fuzzy-cart":
            model = cart.fuzzify_tree(tree, steepness=args.steepness,
                                      feature_ranges=_data_ranges(train_set))
        else:
            model = tree
        metrics |= {
            "n_leaves": model.n_leaves,
            "train_mse": mse(model.batch_predict(train_set), train_set.targets),
        }
    elif args.method == "stack":
        bases = stacking.fit_bases(train_set, args.bases, args.seed, args.ridge)
        if args.adaptive:
            model = stacking.fit_adaptive_stack(bases, train_set, config)
        else:
            model = stacking.fit_constant_stack(bases, train_set, args.ridge)
        metrics |= stacking.stack_report(model, train_set, test_set)
    elif args.method == "nozaki":
        p = args.grid if args.grid is not None else 3
        grid = [gaussian_grid(lo, hi, p) for lo, hi in _data_ranges(train_set)]
        model, flagged = stacking.nozaki_fit(train_set, grid, args.nozaki_alpha)
        metrics |= {
            "n_rules": model.n_rules,
            "alpha": args.nozaki_alpha,
            "empty_cells": flagged,
            "train_mse": mse(model.batch_predict(train_set), train_set.targets),
        }
    else:  # local-rules
        k = args.clusters if args.clusters is not None else 4
        antecedents = [r.antecedent for r in anfis.cluster_init(train_set, k, args.seed).rules]
        model = stacking.local_rule_fit(train_set, antecedents)
        metrics |= {
            "n_rules": model.n_rules,
            "train_mse": mse(model.batch_predict(train_set), train_set.targets),
        }

    if test_set is not None and test_set.n_examples and "stack_test_mse" not in metrics:
        metrics["test_mse"] = mse(model.batch_predict(test_set), test_set.targets)
    dump_model(model, model_path)
    metrics_path.write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
    if history is not None:
        history_path.write_text(history.to_jsonl(), encoding="utf-8")
    _emit(args, {"model": str(model_path), "metrics": metrics},
          [f"wrote {model_path}", f"train_mse: {metrics.get('train_mse', metrics.get('stack_train_mse'))}"])
    return 0


def _check_dims(model, dataset):
    d = getattr(model, "input_dim")
    if dataset.input_dim != d:
        raise DataError(
            f"data has {dataset.input_dim} features but the model expects {d}"
        )


def cmd_predict(args) -> int:
    model = load_model(args.model)
    dataset = load_csv(args.data)
    _check_dims(model, dataset)
    preds = model.batch_predict(dataset.inputs)
    payload = [float(v) for v in preds]
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        _emit(args, {"out": args.out, "n": len(payload)}, [f"wrote {len(payload)} predictions to {args.out}"])
    elif args.format == "json":
        print(json.dumps(payload))
    else:
        for v in payload:
            print(v)
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    dataset = load_csv(args.data)
    _check_dims(model, dataset)
    metrics = {
        "mse": mse(model.batch_predict(dataset.inputs), dataset.targets),
        "n_examples": dataset.n_examples,
    }
    if args.out:
        Path(args.out).write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
    _emit(args, metrics, [f"mse: {metrics['mse']:.6g} on {metrics['n_examples']} examples"])
    return 0


_FAMILY_TYPES = {
    "tsk": TSKModel,
    "rbfn": RBFNModel,
    "moe": MoEModel,
    "fuzzy-cart": FuzzyRegressionTree,
}


def cmd_convert(args) -> int:
    model = load_model(args.model)
    expected = _FAMILY_TYPES[args.src]
    if not isinstance(model, expected):
        raise DataError(
            f"{args.model} holds a {type(model).__name__}, not the declared --from {args.src}"
        )
    if args.src == "tsk" and args.dst == "rbfn":
        converted = (rbfn.tsk_to_rbfn_generalized if args.generalized else rbfn.tsk_to_rbfn)(model)
    elif args.src == "rbfn" and args.dst == "tsk":
        converted = rbfn.rbfn_to_tsk(model)
    elif args.src == "tsk" and args.dst == "moe":
        converted = moe.tsk_to_moe(model)
    elif args.src == "moe" and args.dst == "tsk":
        converted = moe.moe_to_tsk(model)
    elif args.src == "fuzzy-cart" and args.dst == "tsk":
        converted = cart.fuzzy_tree_to_tsk(model, upgrade_affine=args.upgrade_affine)
    else:
        raise ValueError(f"no converter from {args.src} to {args.dst}")
    dump_model(converted, args.out)
    _emit(args, {"out": args.out, "family": args.dst}, [f"wrote {args.dst} model to {args.out}"])
    return 0


def cmd_verify(args) -> int:
    tol = args.tol if args.tol is not None else (1e-4 if args.suite == "gradients" else 1e-10)
    if args.model:
        load_model(args.model)  # surfaces corrupt files with exit 3
    results = verify.run_suite(args.suite, args.trials, tol, args.seed)
    payload = {"suite": args.suite, "tol": tol, "checks": [r.as_dict() for r in results],
               "pass": all(r.passed for r in results)}
    lines = [
        f"{'PASS' if r.passed else 'FAIL'} {r.name}: max deviation {r.max_deviation:.3e} "
        f"(tol {r.tol:.1e})"
        for r in results
    ]
    _emit(args, payload, lines)
    if not payload["pass"]:
        failing = ", ".join(r.name for r in results if not r.passed)
        print(f"verification failed: {failing}", file=sys.stderr)
        return 4
    return 0


def _format_mf(feature, mf) -> str:
    if isinstance(mf, Gaussian):
        return f"x{feature} ~ gauss(c={mf.center:.4g}, w={mf.width:.4g})"
    if isinstance(mf, SigmoidUp):
        return f"x{feature} >~ {mf.threshold:.4g} (a={mf.steepness:.4g})"
    return f"x{feature} <~ {mf.threshold:.4g} (a={mf.steepness:.4g})"


def _format_consequent(consequent) -> str:
    if isinstance(consequent, Constant):
        return f"y = {consequent.value:.4g}"
    terms = []
    for i, s in enumerate(consequent.slopes):
        if s != 0.0:
            terms.append(f"{s:.4g}*x{i}")
    terms.append(f"{consequent.intercept:.4g}")
    return "y = " + " + ".join(terms).replace("+ -", "- ")


def _inspect_lines(model):
    if isinstance(model, TSKModel):
        lines = []
        for rule in model.rules:
            if rule.antecedent.clauses:
                ant = " AND ".join(_format_mf(c.feature, c.mf) for c in rule.antecedent.clauses)
            else:
                ant = "TRUE"
            lines.append(f"IF {ant} THEN {_format_consequent(rule.consequent)}")
        return lines
    if isinstance(model, RegressionTree):
        lines = []
        for rule in extract_crisp_rules(model):
            if rule.tests:
                ant = " AND ".join(f"x{f} {op} {t:.4g}" for f, op, t in rule.tests)
            else:
                ant = "TRUE"
            lines.append(f"IF {ant} THEN {_format_consequent(rule.consequent)}")
        return lines
    if isinstance(model, FuzzyRegressionTree):
        return _inspect_lines(cart.fuzzy_tree_to_tsk(model))
    if isinstance(model, RBFNModel):
        lines = []
        for k, u in enumerate(model.units):
            spot = ", ".join(
                f"x{f}={c:.4g}" for f, c in zip(u.features, u.centers)
            ) or "anywhere"
            lines.append(f"unit {k}: centered at ({spot}) -> {_format_consequent(u.output)}")
        return lines
    if isinstance(model, MoEModel):
        lines = []
        for k, (e, g) in enumerate(zip(model.experts, model.gates)):
            if isinstance(g, moe.QuadraticGate):
                gate = "gate gauss at (" + ", ".join(f"{c:.4g}" for c in g.centers) + ")"
            else:
                gate = "gate affine (" + ", ".join(f"{w:.4g}" for w in g.weights) + f"; b={g.bias:.4g})"
            lines.append(f"expert {k}: {gate} -> {_format_consequent(e)}")
        return lines
    if isinstance(model, StackModel):
        lines = [
            f"base {k} (seed {b.seed}): {_format_consequent(Affine(b.coeffs, b.intercept))}"
            for k, b in enumerate(model.bases)
        ]
        if isinstance(model.combiner, stacking.ConstantWeights):
            w = ", ".join(f"{v:.4g}" for v in model.combiner.weights)
            lines.append(f"combiner: constant weights [{w}] + {model.combiner.intercept:.4g}")
        else:
            lines.append(f"combiner: adaptive softmax over {len(model.combiner.gates)} affine gates")
        return lines
    raise DataError(f"cannot inspect a {type(model).__name__}")


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    lines = _inspect_lines(model)
    _emit(args, {"rules": lines}, lines)
    return 0


def main(argv=None) -> int:
    parser, registry = build_parser()
    try:
        args = _parse_with_config(parser, registry, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    try:
        return args.handler(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConstraintError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
