"""Polar codes built from per-channel kernels, with channel binning,
successive-cancellation decoding and random-code converse tools."""

from .channel import (BmsChannel, BscMixture, arikan_pair, bec, bhattacharyya, bit_channels,
                      bsc, degrade_bin, entropy, to_mixture, upgrade_bin)
from .codec import encode, local_kernel_llr, sc_decode
from .construct import (ConstructionPlan, SelectorParams, build_plan, pi_perm,
                        potential_trace, select_good_indices, tau, tau_inv)
from .converse import (GeneratorMatrix, arikan_bit_identity_check, bit_entropy_exact,
                       sharp_transition_scan, shifted_weight_distribution, typicality_stats)
from .errors import (BudgetError, ChannelError, PlanError, PolarMixError,
                     SearchExhaustedError, SymmetryError)
from .kernel import (Kernel, SearchPolicy, SearchReport, arikan_kernel, is_invertible,
                     kernel_search, random_kernel)
from .sim import SimConfig, SimReport, sample_output, simulate

__version__ = "0.1.0"
