"""
JSON model files ("trust-model/1").

Floats are written with Python's shortest round-trip repr, so every stored
real reads back bit-identical. Non-finite values are stored as strings.
"""
import json
import logging
from pathlib import Path
from typing import Dict, Mapping, Union

from src.data.dataset import ImputationStats, Schema
from src.errors import ModelFormatError
from src.robust.ood import OodStats
from src.tree.model import Leaf, Node, TrainConfig, TrustModel, json_float, rule_from_dict

logger = logging.getLogger(__name__)

FORMAT_VERSION = "trust-model/1"


def _node_to_dict(node: Node) -> Dict:
    payload = {"id": node.node_id, "depth": node.depth, "n": node.n_rows}
    if node.is_leaf:
        payload["leaf"] = node.leaf.to_dict()
    else:
        payload["rule"] = node.rule.to_dict()
        payload["left"] = _node_to_dict(node.left)
        payload["right"] = _node_to_dict(node.right)
    return payload


def _node_from_dict(payload: Mapping) -> Node:
    node = Node(int(payload["id"]), int(payload["depth"]), int(payload["n"]))
    if "rule" in payload:
        node.rule = rule_from_dict(payload["rule"])
        node.left = _node_from_dict(payload["left"])
        node.right = _node_from_dict(payload["right"])
    else:
        node.leaf = Leaf.from_dict(payload["leaf"])
    return node


def model_to_dict(model: TrustModel) -> Dict:
    return {
        "format": FORMAT_VERSION,
        "schema": model.schema.to_dict(),
        "imputation": model.imputation.to_dict(),
        "config": model.config.to_dict(),
        "t": json_float(model.t),
        "n_train": model.n_train,
        "root_model": model.root_model,
        "ood": model.ood_stats.to_dict(),
        "tree": _node_to_dict(model.root),
    }


def model_from_dict(payload: Mapping) -> TrustModel:
    if not isinstance(payload, Mapping) or payload.get("format") != FORMAT_VERSION:
        found = payload.get("format") if isinstance(payload, Mapping) else type(payload).__name__
        raise ModelFormatError(f"Unsupported model format: {found!r} (expected {FORMAT_VERSION!r})")
    try:
        return TrustModel(
            root=_node_from_dict(payload["tree"]),
            schema=Schema.from_dict(payload["schema"]),
            imputation=ImputationStats.from_dict(payload["imputation"]),
            ood_stats=OodStats.from_dict(payload["ood"]),
            config=TrainConfig.model_validate(payload["config"]),
            t=float(payload["t"]),
            n_train=int(payload.get("n_train", 0)),
            root_model=payload.get("root_model", "relaxed_lasso"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"Corrupt model payload: {exc}") from exc


def save_model(model: TrustModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model), indent=1, allow_nan=False) + "\n", encoding="utf-8")
    logger.info("Saved model to %s", path)
    return path


def load_model(path: Union[str, Path]) -> TrustModel:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"Model file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path} is not a JSON model file: {exc}") from exc
    return model_from_dict(payload)
