"""Model files: the native JSON schema and LightGBM dumps.

Native schema::

    {"dimensionality": 2, "link": "identity", "tau": 0.0, "base_score": 0.0,
     "trees": [{"feature": 0, "threshold": 10.0,
                "left": {"score": 0.2}, "right": {"score": 0.6}}]}
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .errors import InputError
from .model import Ensemble, InverseLink, Leaf, Split


def node_to_dict(node):
    if isinstance(node, Leaf):
        return {"score": node.score}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": node_to_dict(node.left),
        "right": node_to_dict(node.right),
    }


def node_from_dict(obj, path="tree"):
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected an object, got {type(obj).__name__}")
    if "score" in obj:
        return Leaf(float(obj["score"]))
    try:
        return Split(
            int(obj["feature"]),
            float(obj["threshold"]),
            node_from_dict(obj["left"], path + ".left"),
            node_from_dict(obj["right"], path + ".right"),
        )
    except KeyError as e:
        raise InputError(f"{path}: missing field {e.args[0]!r}") from None


def ensemble_to_dict(ens: Ensemble) -> dict:
    return {
        "dimensionality": ens.n_features,
        "link": ens.link.value,
        "tau": ens.tau,
        "base_score": ens.base_score,
        "trees": [node_to_dict(t.root) for t in ens.trees],
    }


def ensemble_from_dict(obj: dict) -> Ensemble:
    try:
        trees = [node_from_dict(t, f"trees[{i}]") for i, t in enumerate(obj["trees"])]
        return Ensemble(
            trees,
            int(obj["dimensionality"]),
            InverseLink(obj.get("link", "identity")),
            float(obj.get("tau", 0.0)),
            float(obj.get("base_score", 0.0)),
        )
    except KeyError as e:
        raise InputError(f"model file missing field {e.args[0]!r}") from None
    except ValueError as e:
        if isinstance(e, InputError):
            raise
        raise InputError(str(e)) from None


def dumps(ens: Ensemble) -> str:
    return json.dumps(ensemble_to_dict(ens), indent=1) + "\n"


def loads(text: str) -> Ensemble:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"model is not valid JSON: {e}") from None
    if "tree_info" in obj:
        return load_lightgbm_json(obj)
    return ensemble_from_dict(obj)


def save_model(ens: Ensemble, path) -> None:
    Path(path).write_text(dumps(ens))


def load_model(path, link=None, tau=None) -> Ensemble:
    """Load a native JSON model or a LightGBM text/JSON dump.

    ``link`` and ``tau`` override the values stored in (or defaulted for) a
    LightGBM dump; they are ignored for native files unless given.
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read model {path}: {e}") from None
    if text.lstrip().startswith("{"):
        ens = loads(text)
    else:
        ens = load_lightgbm_text(text)
    if link is not None or tau is not None:
        ens = Ensemble(ens.trees, ens.n_features,
                       InverseLink(link) if link is not None else ens.link,
                       ens.tau if tau is None else tau, ens.base_score)
    return ens


# -- LightGBM --------------------------------------------------------------

def _lgb_build(split_feature, threshold, left_child, right_child, leaf_value, decision_type):
    """Rebuild a nested tree from LightGBM's array encoding.

    Child indices >= 0 are internal nodes; negative ones encode leaf ``~c``.
    """
    def build(c):
        if c < 0:
            return Leaf(float(leaf_value[~c]))
        if decision_type is not None and int(decision_type[c]) & 1:
            raise InputError("categorical splits are not supported")
        return Split(int(split_feature[c]), float(threshold[c]),
                     build(int(left_child[c])), build(int(right_child[c])))

    if not split_feature:
        return Leaf(float(leaf_value[0]))
    return build(0)


def load_lightgbm_text(text: str, link="logistic", tau=0.5) -> Ensemble:
    """Parse the plain-text model written by ``Booster.save_model``."""
    header = {}
    blocks = re.split(r"^Tree=\d+\s*$", text, flags=re.M)
    for line in blocks[0].splitlines():
        if "=" in line:
            key, _, val = line.partition("=")
            header[key.strip()] = val.strip()
    if "max_feature_idx" not in header:
        raise InputError("not a LightGBM model dump: max_feature_idx missing")
    if int(header.get("num_tree_per_iteration", "1")) != 1:
        raise InputError("multi-class LightGBM models are not supported")
    trees = []
    for block in blocks[1:]:
        fields = {}
        for line in block.splitlines():
            if line.startswith("end of trees"):
                break
            if "=" in line:
                key, _, val = line.partition("=")
                fields[key.strip()] = val.split()
        if "leaf_value" not in fields:
            continue
        trees.append(_lgb_build(
            [int(v) for v in fields.get("split_feature", [])],
            [float(v) for v in fields.get("threshold", [])],
            [int(v) for v in fields.get("left_child", [])],
            [int(v) for v in fields.get("right_child", [])],
            [float(v) for v in fields["leaf_value"]],
            [int(v) for v in fields["decision_type"]] if "decision_type" in fields else None,
        ))
    if not trees:
        raise InputError("LightGBM dump contains no trees")
    return Ensemble(trees, int(header["max_feature_idx"]) + 1, InverseLink(link), tau)


def _lgb_json_node(node):
    if "leaf_value" in node and "split_feature" not in node:
        return Leaf(float(node["leaf_value"]))
    if node.get("decision_type", "<=") != "<=":
        raise InputError(f"unsupported decision type {node['decision_type']!r}")
    return Split(int(node["split_feature"]), float(node["threshold"]),
                 _lgb_json_node(node["left_child"]), _lgb_json_node(node["right_child"]))


def load_lightgbm_json(obj: dict, link="logistic", tau=0.5) -> Ensemble:
    """Parse the output of ``Booster.dump_model`` (``tree_info[*].tree_structure``)."""
    if obj.get("num_tree_per_iteration", 1) != 1:
        raise InputError("multi-class LightGBM models are not supported")
    trees = [_lgb_json_node(t["tree_structure"]) for t in obj["tree_info"]]
    return Ensemble(trees, int(obj["max_feature_idx"]) + 1, InverseLink(link), tau)

