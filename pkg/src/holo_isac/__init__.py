"""Near-field holographic MIMO rate-splitting NOMA + sensing toolkit.

Library layout:

* geometry / channel: planar-array steering vectors, multipath user channels,
  bistatic sensing channels.
* impairments: mutual coupling, phase noise, I/Q imbalance, CSI error.
* rates: RS-NOMA interference, rates, and common-capacity allocation.
* sensing: echo SINR, detection probability, Fisher information, CRLBs.
* objective: composite objective, constraint audits, closed-form bounds.
* optimizers: HAO-SCA block-coordinate ascent, E-WMMSE, FP baseline.
* stats: t/F distributions, tests, effect sizes, confidence intervals.
* experiments / records: seeded Monte Carlo driver and result files.
* config / cli: scenario configs, presets, and the batch front end.
"""

from .geometry import (ArrayGeometry, array_response, element_distance,
                       fresnel_distance, steering_derivative)
from .channel import (PathComponent, PathSampler, SensingChannelMatrix,
                      SensingTarget, UserChannel, condition_number,
                      free_space_beta, generate_user_channel, sensing_channel,
                      spatial_correlation)
from .impairments import (ImpairmentChain, PhaseNoiseState, apply_impairments,
                          coupling_matrix, effective_channel, inject_csi_error,
                          iq_coefficients, irr_db, phase_noise_from_dbc,
                          phase_noise_init, phase_noise_step, solve_iq_for_irr)
from .rates import (Grouping, RateBreakdown, RsNomaSolution, common_interference,
                    common_rate, conventional_noma_view, default_grouping,
                    group_common_allocation, private_interference, private_rate,
                    rate_breakdown, sum_rate, user_total_rate)
from .sensing import (SensingEvaluation, crlb_closed_form, crlb_lower_bound,
                      crlb_sinr_form, detection_probability, evaluate_sensing,
                      fisher_information, q_function, q_inverse, sensing_sinr,
                      total_covariance)
from .objective import (ConstraintReport, ObjectiveComponents, ObjectiveWeights,
                        QosLimits, check_constraints, composite_objective,
                        critical_correlation, energy_efficiency, jain_fairness,
                        rs_gain_lower_bound, sensing_utility,
                        sum_rate_upper_bound)
from .optimizers import (ConvergenceTrace, OptimizerConfig, adaptive_weights,
                         beamforming_update, fp_auxiliary, init_hao_sca,
                         power_update, rho_update, run_e_wmmse, run_fp,
                         run_hao_sca, sca_surrogate_gamma)
from .stats import (StatTestResult, bonferroni, cohens_d, f_cdf, mean_ci,
                    one_way_anova, paired_t_test, t_cdf, t_quantile,
                    welch_t_test)
from .config import (ALGORITHM_NAMES, PRESET_NAMES, ScenarioConfig,
                     dbm_to_watts, parse_config, parse_config_text,
                     preset_config, watts_to_dbm)
from .experiments import (ExperimentPlan, TrialResult, apply_sweep,
                          generate_trial_data, make_plan, run_experiment,
                          solve_instance)
from .records import (read_records, merge_records, write_csv, write_plot_data,
                      write_records, write_stats_report)
from .cli import main as cli_main

__version__ = "0.1.0"
