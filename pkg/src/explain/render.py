"""
Human-readable tree diagrams, split-condition wording and explanation reports.

Conditions are worded relative to what the ancestors already imply: a
categorical split lists the smaller of its level set and the complement
within the levels still reachable at the node, presence clauses are
dropped once an ancestor has established that the feature is present, and a
threshold is printed only when it tightens the interval the ancestors leave
for that feature.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Tuple

from src.explain.local import LocalExplanation
from src.explain.svg import new_figure, svg_document
from src.tree.model import (
    LEFT,
    RIGHT,
    CategoricalSplit,
    MissingOnlySplit,
    MissingOrBelowSplit,
    Node,
    NotMissingAndBelowSplit,
    NumericSplit,
    SplitRule,
    TrustModel,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureKnowledge:
    """``low < value <= high`` holds for every present value reaching the node."""

    present: Optional[bool] = None
    levels: Optional[FrozenSet[str]] = None
    low: float = -math.inf
    high: float = math.inf

    def narrowed(self, threshold: float, left: bool) -> "FeatureKnowledge":
        if left:
            return replace(self, high=min(self.high, threshold))
        return replace(self, low=max(self.low, threshold))

    def implies(self, threshold: float, left: bool) -> bool:
        return self.high <= threshold if left else self.low >= threshold

    def excludes(self, threshold: float, left: bool) -> bool:
        return self.low >= threshold if left else self.high <= threshold


@dataclass(frozen=True)
class PathKnowledge:
    """What the ancestors of a node imply about each feature."""

    features: Dict[int, FeatureKnowledge] = field(default_factory=dict)

    def get(self, feature: int) -> FeatureKnowledge:
        return self.features.get(feature, FeatureKnowledge())

    def after(self, rule: SplitRule, branch: str) -> "PathKnowledge":
        known = self.get(rule.feature)
        left = branch == LEFT
        if isinstance(rule, MissingOnlySplit):
            known = replace(known, present=not left)
        elif isinstance(rule, CategoricalSplit):
            side = rule.left_levels if left else rule.right_levels
            known = replace(known, levels=frozenset(side))
        else:
            # both branches of a threshold split bound the present values
            known = known.narrowed(rule.threshold, left)
            if isinstance(rule, NotMissingAndBelowSplit) and left:
                known = replace(known, present=True)
            elif isinstance(rule, MissingOrBelowSplit) and not left:
                known = replace(known, present=True)
        return PathKnowledge({**self.features, rule.feature: known})


def _number(value: float) -> str:
    return f"{value:.6g}"


def _bound(rule: SplitRule, left: bool) -> str:
    return f"{rule.name} ≤ {_number(rule.threshold)}" if left else f"{rule.name} > {_number(rule.threshold)}"


def _level_set(levels) -> str:
    return "{" + ", ".join(levels) + "}"


def condition_text(rule: SplitRule, branch: str, knowledge: Optional[PathKnowledge] = None) -> Optional[str]:
    """Wording of the condition for taking ``branch``; None when the ancestors already imply it."""
    knowledge = knowledge or PathKnowledge()
    known = knowledge.get(rule.feature)
    name = rule.name
    left = branch == LEFT

    if isinstance(rule, MissingOnlySplit):
        if known.present is not None:
            return None
        return f"{name} is missing" if left else f"{name} is present"

    if isinstance(rule, NumericSplit):
        return None if known.implies(rule.threshold, left) else _bound(rule, left)

    if isinstance(rule, (NotMissingAndBelowSplit, MissingOrBelowSplit)):
        if known.present is False:
            return None
        implied = known.implies(rule.threshold, left)
        if known.present:
            return None if implied else _bound(rule, left)
        # present side: left for NotMissingAndBelow, right for MissingOrBelow
        if left == isinstance(rule, NotMissingAndBelowSplit):
            return f"{name} is present" if implied else f"{name} is present and {_bound(rule, left)}"
        if implied:
            return None
        if known.excludes(rule.threshold, left):
            return f"{name} is missing"
        return f"{name} is missing or {_bound(rule, left)}"

    if isinstance(rule, CategoricalSplit):
        reachable = set(rule.left_levels) | set(rule.right_levels)
        if known.levels is not None:
            reachable &= known.levels
        ordered = [level for level in rule.left_levels + rule.right_levels if level in reachable]
        side = set(rule.left_levels if left else rule.right_levels)
        chosen = [level for level in ordered if level in side]
        complement = [level for level in ordered if level not in side]
        if len(chosen) <= len(complement):
            return f"{name} in {_level_set(chosen)}"
        return f"{name} not in {_level_set(complement)}"

    raise TypeError(f"Unknown split rule {type(rule).__name__}")


def path_conditions(steps) -> List[str]:
    """Condition wording for every step of a root-to-leaf path, implied ones omitted."""
    knowledge = PathKnowledge()
    conditions = []
    for step in steps:
        text = condition_text(step.rule, step.branch, knowledge)
        if text is not None:
            conditions.append(text)
        knowledge = knowledge.after(step.rule, step.branch)
    return conditions


def node_label(node: Node) -> str:
    if node.is_leaf:
        stats = node.leaf.stats
        active = int((node.leaf.fit.coefficients != 0).sum())
        return f"leaf {node.node_id} (n={node.n_rows}, active={active}, mean={stats.y_mean:.6g})"
    return f"node {node.node_id} (n={node.n_rows})"


def edges(model: TrustModel) -> List[Tuple[Node, Node, str]]:
    """(parent, child, condition) for every edge, depth first, left before right."""
    out: List[Tuple[Node, Node, str]] = []

    def visit(node: Node, knowledge: PathKnowledge) -> None:
        if node.is_leaf:
            return
        for branch, child in ((LEFT, node.left), (RIGHT, node.right)):
            text = condition_text(node.rule, branch, knowledge)
            out.append((node, child, text if text is not None else "(always)"))
            visit(child, knowledge.after(node.rule, branch))

    visit(model.root, PathKnowledge())
    return out


def render_text(model: TrustModel) -> str:
    lines = [node_label(model.root)]
    conditions = {child.node_id: text for _, child, text in edges(model)}

    def visit(node: Node, prefix: str) -> None:
        if node.is_leaf:
            return
        for last, child in ((False, node.left), (True, node.right)):
            lines.append(f"{prefix}{'└── ' if last else '├── '}{conditions[child.node_id]}: {node_label(child)}")
            visit(child, prefix + ("    " if last else "│   "))

    visit(model.root, "")
    return "\n".join(lines) + "\n"


def _layout(model: TrustModel) -> Dict[int, Tuple[float, float]]:
    """Leaves spaced evenly in in-order; parents centered over their children."""
    positions: Dict[int, Tuple[float, float]] = {}
    counter = iter(range(model.leaf_count))

    def place(node: Node) -> float:
        if node.is_leaf:
            x = float(next(counter))
        else:
            x = (place(node.left) + place(node.right)) / 2.0
        positions[node.node_id] = (x, -float(node.depth))
        return x

    place(model.root)
    return positions


def tree_svg(model: TrustModel) -> str:
    positions = _layout(model)
    fig, ax = new_figure(max(4.0, 2.6 * model.leaf_count), max(2.0, 1.8 * (model.depth + 1)))
    for parent, child, text in edges(model):
        (x0, y0), (x1, y1) = positions[parent.node_id], positions[child.node_id]
        ax.plot([x0, x1], [y0, y1], color="0.5", linewidth=1.0, zorder=1)
        ax.text((x0 + x1) / 2.0, (y0 + y1) / 2.0, text, fontsize=7, ha="center", va="center",
                bbox={"boxstyle": "round,pad=0.2", "fc": "white", "ec": "none"}, zorder=2)
    for node in model.root.walk():
        x, y = positions[node.node_id]
        face = "#e8f1fa" if node.is_leaf else "#f4f4f4"
        ax.text(x, y, node_label(node).replace(" (", "\n("), fontsize=8, ha="center", va="center",
                bbox={"boxstyle": "round,pad=0.4", "fc": face, "ec": "0.3"}, zorder=3)
    ax.set_xlim(-0.8, model.leaf_count - 0.2)
    ax.set_ylim(-model.depth - 0.6, 0.6)
    ax.set_axis_off()
    return svg_document(fig)


def render_tree(model: TrustModel, fmt: str = "text") -> str:
    """The tree as a text outline or an SVG document."""
    if fmt == "text":
        return render_text(model)
    if fmt == "svg":
        return tree_svg(model)
    raise ValueError(f"Unknown tree format: {fmt!r} (expected 'text' or 'svg')")


def explanation_report(expl: LocalExplanation, model: TrustModel) -> str:
    """Plain-text local explanation document."""
    lines = [f"Local explanation for row {expl.row_index}", ""]
    lines.append(f"Prediction: {expl.prediction:.6g} (leaf model output {expl.raw_prediction:.6g}, truncation t={model.t})")
    lines.append(f"Leaf: {expl.leaf_id}")
    lines.append("")
    lines.append("Root-to-leaf path:")
    conditions = path_conditions(expl.path)
    lines.extend(f"  {k + 1}. {text}" for k, text in enumerate(conditions))
    if not conditions:
        lines.append("  (root is a leaf)")
    lines.append("")
    lines.append("Leaf coefficients (approximate p-values, no selection correction):")
    for row in expl.leaf_coefficients:
        p_value = "n/a" if row.p_value is None else f"{row.p_value:.4g}"
        lines.append(f"  {row.name:<24} {row.estimate:>14.6g}   p={p_value}")
    if not expl.leaf_coefficients:
        lines.append("  (intercept only)")
    if expl.p_value_flag != "ok":
        lines.append(f"  p-value note: {expl.p_value_flag}")
    lines.append("")
    lines.append(f"SHAP attributions (base {expl.shap.base:.6g}):")
    for name, value in zip(expl.shap.names, expl.shap.attributions):
        if value != 0.0:
            lines.append(f"  {name:<24} {value:>+14.6g}")
    lines.append("")
    lines.append(f"Highest prediction: row {expl.extremes.highest_row} ({expl.extremes.highest_prediction:.6g})")
    lines.append(f"Lowest prediction: row {expl.extremes.lowest_row} ({expl.extremes.lowest_prediction:.6g})")
    lines.append("")
    lines.append("Summary:")
    lines.append(expl.summary_text)
    return "\n".join(lines) + "\n"
