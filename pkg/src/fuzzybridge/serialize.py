"""JSON serialization for every model family.

Floats are emitted with Python's shortest round-trip repr, so a dump/load
cycle is value-exact for all parameters. Documents carry a "family" tag;
a tag-less document with a "rules" key is accepted as a rule model.
"""

import json

from .cart import FuzzyRegressionTree, Internal, Leaf, RegressionTree
from .errors import DataError
from .membership import Gaussian, SigmoidDown, SigmoidUp
from .model import Affine, Antecedent, Clause, Constant, Rule, TSKModel
from .moe import AffineGate, MoEModel, QuadraticGate
from .rbfn import RBFNModel, RBFUnit
from .stacking import AdaptiveGates, BaseModel, ConstantWeights, StackModel


def mf_to_dict(mf) -> dict:
    if isinstance(mf, Gaussian):
        return {"kind": "gaussian", "params": {"center": mf.center, "width": mf.width}}
    if isinstance(mf, SigmoidUp):
        return {
            "kind": "sigmoid_up",
            "params": {"steepness": mf.steepness, "threshold": mf.threshold},
        }
    if isinstance(mf, SigmoidDown):
        return {
            "kind": "sigmoid_down",
            "params": {"steepness": mf.steepness, "threshold": mf.threshold},
        }
    raise TypeError(f"unsupported membership function {type(mf).__name__}")


def mf_from_dict(d):
    kind, params = d["kind"], d["params"]
    if kind == "gaussian":
        return Gaussian(params["center"], params["width"])
    if kind == "sigmoid_up":
        return SigmoidUp(params["steepness"], params["threshold"])
    if kind == "sigmoid_down":
        return SigmoidDown(params["steepness"], params["threshold"])
    raise DataError(f"unknown membership kind {kind!r}")


def consequent_to_dict(c) -> dict:
    if isinstance(c, Constant):
        return {"kind": "constant", "params": {"value": c.value}}
    if isinstance(c, Affine):
        return {"kind": "affine", "params": {"slopes": list(c.slopes), "intercept": c.intercept}}
    raise TypeError(f"unsupported consequent {type(c).__name__}")


def consequent_from_dict(d):
    kind, params = d["kind"], d["params"]
    if kind == "constant":
        return Constant(params["value"])
    if kind == "affine":
        return Affine(tuple(params["slopes"]), params["intercept"])
    raise DataError(f"unknown consequent kind {kind!r}")


def _tsk_to_dict(model: TSKModel) -> dict:
    return {
        "family": "tsk",
        "input_dim": model.input_dim,
        "aggregation": model.aggregation,
        "rules": [
            {
                "clauses": [
                    {"feature": c.feature, **mf_to_dict(c.mf)} for c in rule.antecedent.clauses
                ],
                "consequent": consequent_to_dict(rule.consequent),
            }
            for rule in model.rules
        ],
    }


def _tsk_from_dict(d) -> TSKModel:
    rules = []
    for rd in d["rules"]:
        clauses = tuple(
            Clause(cd["feature"], mf_from_dict(cd)) for cd in rd["clauses"]
        )
        feats = [c.feature for c in clauses]
        ant = Antecedent(clauses, repeated_ok=len(set(feats)) != len(feats))
        rules.append(Rule(ant, consequent_from_dict(rd["consequent"])))
    return TSKModel(d["input_dim"], tuple(rules), d.get("aggregation", "weighted_average"))


def _rbfn_to_dict(model: RBFNModel) -> dict:
    units = []
    for u in model.units:
        units.append(
            {
                "features": list(u.features),
                "centers": list(u.centers),
                "width_sq": u.width_sq if u.shared_width else list(u.width_sq),
                "output": consequent_to_dict(u.output),
            }
        )
    return {
        "family": "rbfn",
        "input_dim": model.input_dim,
        "normalized": model.normalized,
        "units": units,
    }


def _rbfn_from_dict(d) -> RBFNModel:
    units = []
    for ud in d["units"]:
        ws = ud["width_sq"]
        units.append(
            RBFUnit(
                tuple(ud["features"]),
                tuple(ud["centers"]),
                ws if isinstance(ws, (int, float)) else tuple(ws),
                consequent_from_dict(ud["output"]),
            )
        )
    return RBFNModel(d["input_dim"], tuple(units), d["normalized"])


def _gate_to_dict(gate) -> dict:
    if isinstance(gate, QuadraticGate):
        return {
            "kind": "quadratic_diag",
            "params": {"centers": list(gate.centers), "widths": list(gate.widths)},
        }
    return {"kind": "affine", "params": {"weights": list(gate.weights), "bias": gate.bias}}


def _gate_from_dict(d):
    kind, params = d["kind"], d["params"]
    if kind == "quadratic_diag":
        return QuadraticGate(tuple(params["centers"]), tuple(params["widths"]))
    if kind == "affine":
        return AffineGate(tuple(params["weights"]), params["bias"])
    raise DataError(f"unknown gate kind {kind!r}")


def _moe_to_dict(model: MoEModel) -> dict:
    return {
        "family": "moe",
        "input_dim": model.input_dim,
        "experts": [consequent_to_dict(e) for e in model.experts],
        "gates": [_gate_to_dict(g) for g in model.gates],
    }


def _moe_from_dict(d) -> MoEModel:
    return MoEModel(
        d["input_dim"],
        tuple(consequent_from_dict(e) for e in d["experts"]),
        tuple(_gate_from_dict(g) for g in d["gates"]),
    )


def _node_to_dict(node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": consequent_to_dict(node.consequent)}
    out = {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }
    if node.alpha is not None:
        out["alpha"] = node.alpha
    return out


def _node_from_dict(d):
    if "leaf" in d:
        return Leaf(consequent_from_dict(d["leaf"]))
    return Internal(
        d["feature"],
        d["threshold"],
        _node_from_dict(d["left"]),
        _node_from_dict(d["right"]),
        d.get("alpha"),
    )


def _tree_to_dict(tree) -> dict:
    family = "fuzzy_tree" if isinstance(tree, FuzzyRegressionTree) else "tree"
    return {"family": family, "input_dim": tree.input_dim, "root": _node_to_dict(tree.root)}


def _stack_to_dict(model: StackModel) -> dict:
    if isinstance(model.combiner, ConstantWeights):
        combiner = {
            "kind": "constant",
            "weights": list(model.combiner.weights),
            "intercept": model.combiner.intercept,
        }
    else:
        combiner = {
            "kind": "adaptive",
            "gates": [{"weights": list(g.weights), "bias": g.bias} for g in model.combiner.gates],
        }
    return {
        "family": "stack",
        "input_dim": model.input_dim,
        "bases": [
            {"coeffs": list(b.coeffs), "intercept": b.intercept, "seed": b.seed, "ridge": b.ridge}
            for b in model.bases
        ],
        "combiner": combiner,
    }


def _stack_from_dict(d) -> StackModel:
    bases = tuple(
        BaseModel(tuple(bd["coeffs"]), bd["intercept"], bd["seed"], bd["ridge"])
        for bd in d["bases"]
    )
    cd = d["combiner"]
    if cd["kind"] == "constant":
        combiner = ConstantWeights(tuple(cd["weights"]), cd["intercept"])
    elif cd["kind"] == "adaptive":
        combiner = AdaptiveGates(
            tuple(AffineGate(tuple(g["weights"]), g["bias"]) for g in cd["gates"])
        )
    else:
        raise DataError(f"unknown combiner kind {cd['kind']!r}")
    return StackModel(d["input_dim"], bases, combiner)


def model_to_dict(model) -> dict:
    if isinstance(model, TSKModel):
        return _tsk_to_dict(model)
    if isinstance(model, RBFNModel):
        return _rbfn_to_dict(model)
    if isinstance(model, MoEModel):
        return _moe_to_dict(model)
    if isinstance(model, (RegressionTree, FuzzyRegressionTree)):
        return _tree_to_dict(model)
    if isinstance(model, StackModel):
        return _stack_to_dict(model)
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d) -> object:
    try:
        family = d.get("family") or ("tsk" if "rules" in d else None)
        if family == "tsk":
            return _tsk_from_dict(d)
        if family == "rbfn":
            return _rbfn_from_dict(d)
        if family == "moe":
            return _moe_from_dict(d)
        if family == "tree":
            return RegressionTree(d["input_dim"], _node_from_dict(d["root"]))
        if family == "fuzzy_tree":
            return FuzzyRegressionTree(d["input_dim"], _node_from_dict(d["root"]))
        if family == "stack":
            return _stack_from_dict(d)
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model document: {exc}") from exc
    raise DataError(f"unknown model family {d.get('family')!r}")


def dump_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a JSON object at the top level")
    return model_from_dict(doc)
