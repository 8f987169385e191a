"""Schemas, tidy-data ingestion, normalizing transforms, triplets and synthetic cohorts."""
from .arrays import CohortArrays, cohort_arrays
from .normalize import Normalizers, decode_array, decode_value, fit_normalizers, forward_array, transform
from .records import SubjectRecord, bin_visits, load_tidy, observation_mask, records_to_raw, validate_record, write_tidy
from .schema import KFSS_COMPONENTS, MS_TYPES, CohortSchema, VariableSpec, load_schema, ms_schema, save_schema
from .synth import (SynthConfig, SynthTruth, SynthVariable, ar2_stationary_variance, expected_baseline_mean,
                    simulate_twins, synth_cohort, synth_schema)
from .triplets import Encoder, Triplet, build_triplets, split_counts, split_dataset, stack_triplets

__all__ = [
    "CohortArrays", "CohortSchema", "Encoder", "KFSS_COMPONENTS", "MS_TYPES", "Normalizers", "SubjectRecord",
    "SynthConfig", "SynthTruth", "SynthVariable", "Triplet", "VariableSpec", "ar2_stationary_variance",
    "bin_visits", "build_triplets", "cohort_arrays", "decode_array", "decode_value", "expected_baseline_mean",
    "fit_normalizers", "forward_array", "load_schema", "load_tidy", "ms_schema", "observation_mask",
    "records_to_raw", "save_schema", "simulate_twins", "split_counts", "split_dataset", "stack_triplets",
    "synth_cohort", "synth_schema", "transform", "validate_record", "write_tidy",
]
