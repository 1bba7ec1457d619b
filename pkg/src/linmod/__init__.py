from src.linmod.cv import CvChoice, cv_elastic_net, cv_relaxed_lasso
from src.linmod.inference import LeafPValues, leaf_pvalues
from src.linmod.solvers import (
    LinearFit,
    StandardizedProblem,
    coordinate_descent,
    fit_elastic_net,
    fit_ols,
    fit_relaxed_lasso,
    intercept_only,
    lambda_grid,
    lasso_path,
    penalized_objective,
)
