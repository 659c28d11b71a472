"""l1-penalized quasi-likelihood and robust estimation."""

import json as _json

try:  # installed wheel layout: extension lives inside the package
    from . import _qlasso as _backend
except ImportError:  # in-tree builds put the module on sys.path directly
    import _qlasso as _backend

CompatibilityResult = _backend.CompatibilityResult
Family = _backend.Family
FitResult = _backend.FitResult
__version__ = _backend.__version__

make_family = _backend.make_family
loss = _backend.loss
loss_derivative = _backend.loss_derivative
regret = _backend.regret
average_regret = _backend.average_regret
condition_constants = _backend.condition_constants
compatibility_constant = _backend.compatibility_constant
restricted_eigenvalue = _backend.restricted_eigenvalue
effective_sparsity = _backend.effective_sparsity
weighted_gram = _backend.weighted_gram
irrepresentable_theta = _backend.irrepresentable_theta
gram_sup_distance = _backend.gram_sup_distance
fit = _backend.fit
kkt_residual = _backend.kkt_residual
restricted_fit = _backend.restricted_fit
soft_threshold_fit = _backend.soft_threshold_fit
lambda_max = _backend.lambda_max
tuning_levels = _backend.tuning_levels
example_sec4 = _backend.example_sec4


def simulate(config, include_records=False):
    """Run a Monte-Carlo scenario from a config dict; returns a dict."""
    return _json.loads(_backend.simulate(_json.dumps(config), include_records))
