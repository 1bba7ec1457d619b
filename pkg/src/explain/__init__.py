from src.explain.ale import AleCurve, ale_curve
from src.explain.importance import (
    FeatureImportance,
    ImportanceConfig,
    ImportanceReport,
    KendallTau,
    NullBand,
    contaminate_response,
    debias_scores,
    ghost_column,
    ghost_importance,
    ghost_scores,
    kendall_tau,
    null_band,
)
from src.explain.local import LocalExplanation, ShapValues, local_explanation, shap_linear, summarize
from src.explain.plots import ale_plot, importance_plot, importance_plot_frame, path_plot
from src.explain.render import condition_text, explanation_report, path_conditions, render_tree
from src.linmod.inference import leaf_pvalues
