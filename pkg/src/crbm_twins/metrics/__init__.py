"""Model-selection metrics and goodness-of-fit analyses for digital twins."""
from .adversary import adversary_auc, cv_auc, visit_features
from .calibration import ks_normal_distance, phi_calibration, phi_values
from .clinical import RELAPSE_MONTHS, edss_change, edss_from_arrays, relapse_auc, t_cdw, t_edss, truncate_to_duration
from .report import evaluate, selection_metrics, write_report
from .selection import MetricReport, is_clinical, minimax_select, rank_matrix
from .stats import (auc, autocorrelation, autocov_r2, lag_autocov, moments_per_visit, pool_twins, t_statistic,
                    theil_sen, weighted_ls)
