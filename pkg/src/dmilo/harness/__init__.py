from ._registry import available_plugins, solver_class, writer_class, solver_from_config
from ._experiment import run_experiment, run_trial, make_trial_problem, add_sparse_spike, summarize, \
    write_results, derive_seed, trial_seed, ExperimentResult, TrialProblem, SUMMARY_METRICS, RESULTS_CSV, \
    RESULTS_JSON
from ._ablate import ablate, parse_value, parse_values, ABLATION_JSON
from ._report import report, report_rows, format_table, load_results, check_consistency, problem_hash, \
    REPORT_COLUMNS
