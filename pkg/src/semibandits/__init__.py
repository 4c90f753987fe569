"""Combinatorial semi-bandit toolkit: fast capped-simplex Bregman projection,
OSMD and contextual FTRL engines, synthetic environments, and a benchmark
harness."""

from .model import (ActionVector, Context, MeanAction, ProblemConfig,
                    make_exact, split_rng, load_config, save_config)
from .regularizer import (RegularizerSpec, f_value, f_prime, f_prime_inverse,
                          lipschitz_constant, neg_shannon, quadratic,
                          tsallis_half, from_name)
from .projection import (offsets, initial_bracket, residual, bisect_project,
                         approx_oracle_project, reference_project,
                         newton_baseline, project_offsets, bisection_steps,
                         subproblem_objective)
from .sampling import (Decomposition, decompose, sample_action,
                       mix_exploration, build_exploration_set)
from .engine_osmd import (OsmdState, osmd_init, importance_weighted,
                          osmd_round, osmd_update, run_osmd,
                          default_learning_rate)
from .engine_contextual import (ScheduleState, schedule_init, schedule_step,
                                schedule_params, ftrl_mean_action,
                                mgr_estimate, theta_tilde, run_contextual,
                                PrecisionEstimate, CumulativeLoss)
from .environment import (EnvSpec, SyntheticEnv, make_env_spec,
                          sample_context, sample_contexts, gen_losses,
                          optimal_action, pseudo_regret, delta_min)
from .records import RunRecord, BenchRecord

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
