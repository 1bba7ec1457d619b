"""
Constraint-aware chat prompts built from a local explanation.
"""
from dataclasses import dataclass
from typing import Dict, List

from src.explain.local import LocalExplanation
from src.explain.render import path_conditions
from src.tree.model import TrustModel

DEFAULT_PERSONA = "linear model tree expert"
SAME_LEAF_INSTRUCTION = (
    "Any suggested feature change must keep the instance in the same leaf: "
    "every hard constraint listed above must still hold after the change."
)
ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"Unknown chat role: {self.role!r}")
        if not self.content:
            raise ValueError("Chat message content must not be empty")

    def to_dict(self) -> Dict[str, str]:
        return {"role": self.role, "content": self.content}


def _value(value) -> str:
    if value is None:
        return "missing"
    return f"{value:.6g}" if isinstance(value, float) else str(value)


def build_prompt(expl: LocalExplanation, model: TrustModel, persona: str = DEFAULT_PERSONA) -> List[ChatMessage]:
    """One system message: the persona first, then the constraints, the leaf model and the row."""
    lines = [
        f"{persona}. You answer questions about a single prediction of a linear model tree, "
        "a decision tree whose leaves hold sparse linear regression models.",
        "",
        "Hard constraints (split conditions on the row's root-to-leaf path):",
    ]
    constraints = path_conditions(expl.path)
    lines.extend(f"- {text}" for text in constraints)
    if not constraints:
        lines.append("- none (the tree is a single leaf)")

    fit = model.node(expl.leaf_id).leaf.fit
    lines += ["", f"Leaf {expl.leaf_id} linear model: intercept {fit.intercept:.6g}"]
    for row in expl.leaf_coefficients:
        note = "" if row.p_value is None else f" (approximate p-value {row.p_value:.3g})"
        lines.append(f"- {row.name}: coefficient {row.estimate:.6g}{note}")
    if not expl.leaf_coefficients:
        lines.append("- no active features (constant prediction)")

    lines += ["", f"Row {expl.row_index} feature values:"]
    lines.extend(f"- {name} = {_value(value)}" for name, value in zip(expl.feature_names, expl.row_values))
    lines += [
        "",
        f"Predicted {model.target_name}: {expl.prediction:.6g}",
        "",
        SAME_LEAF_INSTRUCTION,
    ]
    return [ChatMessage("system", "\n".join(lines))]
