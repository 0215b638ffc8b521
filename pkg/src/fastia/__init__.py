"""Fast hypermutation operators, Opt-IA and a scaling harness for pseudo-Boolean search."""
from .core import BitString, EvaluationLedger, Individual, RandomSource, flip_bit, hamming, sample_flip_order
from .distributions import (ConfigError, build_parabolic, build_powerlaw_rate, build_symmetric_powerlaw,
                            build_uniform_tail, sample_size)
from .operators import MutationOutcome, OperatorConfig, OperatorKind
from .algorithms import AgeingConfig, RunConfig, RunRecord, run, run_one_plus_one, run_opt_ia
from .problems import make_problem

__version__ = "0.1.0"
