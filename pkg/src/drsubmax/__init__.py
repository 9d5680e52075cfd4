"""Online maximization of non-monotone DR-submodular functions.

Engines cover three feasible-region regimes: any down-closed convex body
(conditional-gradient steps driven by lifted vee-learning oracles), the full
hypercube (binary lifting to online discrete submodular maximization), and
general convex bodies (conditional gradient with shrinking harmonic steps).
"""

__version__ = "0.1.0"

from .bodies import ConvexBody, GeometryError, ProjectionConvergenceError
from .functions import (DRFunction, SumFunction, dr_check, grad_check,
                        smoothed_value_and_gradient, smoothing_radius, estimate_params)
from .instances import (BatchSampler, Graph, LinearFunction, QuadraticFunction,
                        RevenueFunction, gen_random_graph, gen_random_quadratic,
                        load_edge_list, noisy_gradient, two_vertex_revenue)
from .lift import (LiftedBody, UnaryLattice, VeeOracle, caratheodory_decompose,
                   caratheodory_round, default_granularity)
from .hypercube import (BaselineDiscreteOracle, BinaryLattice, DiscreteOracle,
                        HypercubeEngine, SetFunctionView, double_greedy,
                        submodularity_bruteforce)
from .mfw import (GradientAverager, MetaFrankWolfeDownClosed, MetaFrankWolfeGeneral,
                  StepSchedule, doubling_run, momentum_weights, KAPPA)
from .oracles import (FollowPerturbedLeader, LinearOracle, OnlineGradientAscent,
                      ProtocolError, make_linear_oracle, olo_regret)
from .rng import make_rng, split

__all__ = [name for name in dir() if not name.startswith("_")]
