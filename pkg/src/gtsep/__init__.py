"""Separate decoding of items for noiseless and noisy group testing."""
from .bounds import (achievability_coeff, converse_coeff, density_tail_exact,
                     density_tail_mc, figure1_curves, joint_optimum_coeff,
                     joint_partial_coeff, pe_lower_bound_item, pe_upper_bound_exact,
                     psi_bernstein, psi_noiseless, write_curves_csv)
from .channel import (channel_marginals, info_density_table, info_stats,
                      mutual_information_entropies, nu_symm)
from .decoders import (SeparateDecoderConfig, decode, decode_comp, decode_dd,
                       decode_ncomp, decode_separate, decode_separate_item,
                       default_gamma)
from .exceptions import DimensionError, ParameterError
from .model import (NoiseChannel, Observations, ProblemInstance, RecoveryCriterion,
                    TestDesign, TestMatrix, generate_test_matrix, run_tests,
                    sample_defective_set)
from .sim import (DecoderSpec, ExperimentConfig, nerr_sweep, run_comparison,
                  run_experiment, run_trial)

__version__ = "0.1.0"
