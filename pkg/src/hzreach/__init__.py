"""Hybrid-zonotope reachability analysis for ReLU networks."""

from .intervals import Interval
from .sets import (EmptySetError, HybridZonotope, cartesian_product,
                   generalized_intersection, union)
from .model import (AvgPool, Conv, FullyConnected, MaxPool, MaxoutGroup,
                    ModelError, Network, infer, load_model, save_model)
from .lowering import lower_network
from .optim import (BudgetExceededError, LinearProgram, MixedBinaryProgram,
                    OptimError, OptResult, lp_solve, milp_optimize)
from .bounds import (LayerBounds, LinearBoundPair, crown_bounds,
                     exact_hull_bounds, ibp_bounds)
from .reduction import (ReductionReport, error_size, neuron_scores,
                        reduce_layer, reduce_network, removal_error,
                        select_neurons)
from .reach import (ReachConfig, ReachResult, layer_graph, reach_cnn,
                    reach_ffnn, relu_graph_1d, witness_residuals)
from .verify import (AttackSpec, Verdict, VerificationReport, brighten,
                     output_ranges, run_campaign, verify_classification)

__version__ = "0.1.0"

__all__ = [
    "Interval", "HybridZonotope", "EmptySetError", "cartesian_product",
    "generalized_intersection", "union",
    "AvgPool", "Conv", "FullyConnected", "MaxPool", "MaxoutGroup",
    "ModelError", "Network", "infer", "load_model", "save_model",
    "lower_network",
    "BudgetExceededError", "LinearProgram", "MixedBinaryProgram",
    "OptimError", "OptResult", "lp_solve", "milp_optimize",
    "LayerBounds", "LinearBoundPair", "crown_bounds", "exact_hull_bounds",
    "ibp_bounds",
    "ReductionReport", "error_size", "neuron_scores", "reduce_layer",
    "reduce_network", "removal_error", "select_neurons",
    "ReachConfig", "ReachResult", "layer_graph", "reach_cnn", "reach_ffnn",
    "relu_graph_1d",
    "witness_residuals",
    "AttackSpec", "Verdict", "VerificationReport", "brighten",
    "output_ranges", "run_campaign", "verify_classification",
]
