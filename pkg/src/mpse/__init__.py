"""Markov perfect Stackelberg equilibria of two-player games with private Markov types."""

from .backward import BackwardResult, TooManyFailures, backward_recursion, stage_sweep
from .belief import (BeliefPair, DegenerateObservation, PrescriptionPair, joint_oracle_update,
                     prior_pair, update_pair, update_player)
from .estimator import MPSESolver
from .forward import (EpisodeTrace, StrategyEvaluator, construct_strategy, exact_values,
                      follower_deviation_values, monte_carlo_value, simulate_episode)
from .game import (GameSpec, ParseError, SpecValidationError, dump_spec, example_security_game,
                   load_spec, parse_spec, save_spec, validate_spec)
from .grid import BeliefGrid, SimplexGrid, build_grid, interpolate_table, interpolate_value
from .infinite import IHSolution, convergence_report, solve_ih
from .io import load_tables, save_tables
from .oracle import brute_force_stackelberg_t1, cross_check
from .prescription import enumerate_grid, is_pure, lattice_size
from .stage import (FunctionContinuation, NoStageEquilibrium, StageSearch, StageSolution,
                    TableContinuation, ZeroContinuation, follower_best_response,
                    leader_stage_objective, follower_stage_objective, solve_stage)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
