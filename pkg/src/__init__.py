# TRUST: linear model trees with robustness and explanation tooling
