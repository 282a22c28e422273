"""Budget-limited worker selection: context-partitioned bandit policies,
bounded-knapsack baselines, and a reproducible benchmark harness."""

__version__ = "0.1.0"

from .model import (Allocation, PolicyView, RunResult, StepRecord,
                    TaskInstance, WorkerSpec, allocation_value,
                    validate_instance)
from .knapsack import (DensityOrder, FractionalAllocation, brute_force_bkp,
                       density_greedy, density_order, round_down, solve_fbkp)
from .partition import (CubeStats, PartitionGrid, choose_granularity,
                        cube_index, holder_delta, ucb_index,
                        update_cube_stats)
from .environment import (ContextTrace, CoordinateMeanMap,
                          GaussianDistanceBatteryMap, MuMap, RewardModel,
                          eval_mu_map, gen_drift_trace, gen_synthetic,
                          load_worker_trace, make_mu_map, sample_reward)
from .policies import (CawsPolicy, EpsilonFirstPolicy, OraclePolicy, Policy,
                       RandomPolicy, bkube_init, caws_init,
                       epsilon_first_policy, make_policy, oracle_policy,
                       random_policy)
from .evaluation import (BoundInputs, ExperimentConfig, baseline_allocation,
                         bound_for_instance, delta_min, empirical_regret,
                         episode_seed, run_episode, run_sweep, theorem1_bound)
