"""Power allocation for multi-beam GEO satellite downlinks.

Balances the number of users whose throughput demand is met against the
total delivered throughput, with a model-based set-expansion solver, a
learned surrogate and a Monte Carlo benchmark harness.
"""

from .allocators import (ALLOCATORS, AllocationResult, demand_constrained_reallocate,
                         equal_power, joint_optimize, satisset_optimize, sum_opt,
                         sum_rate_allocate, waterfill)
from .errors import (ConvergenceError, CorruptModelError, DegenerateChannelError,
                     DivergenceError, InvalidConfigurationError, MbhtsError, NumericRangeError,
                     ReallocationInfeasibleError, SingularChannelError)
from .feasibility import FeasibilityReport, assess, check_feasibility, spectral_radius
from .link_metrics import DemandProfile, rates, satisfied_set, sinr_all, sum_throughput
from .precoding import coupling_matrix, make_precoder, rzf_precoder, zf_precoder
from .scenario import ChannelMatrix, SystemParams, UserLayout, draw_channel

__version__ = "0.1.0"
