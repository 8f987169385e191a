import numpy as np
import pytest

from crbm_twins.errors import ConfigError, DomainError
from crbm_twins.ms_domain import (KFSS_NAMES, EdssTrajectory, ambulation_from_edss, cdw_array, cdw_label,
                                  edss_array, edss_change_18m, edss_total, edss_validation_report)


@pytest.mark.parametrize("edss,amb", [(0.0, 0), (4.0, 0), (4.5, 0), (5.0, 1), (6.0, 3), (7.5, 6), (10.0, 11)])
def test_ambulation_map(edss, amb):
    assert ambulation_from_edss(edss) == amb


@pytest.mark.parametrize("bad", [-0.5, 10.5, 4.2, float("nan")])
def test_ambulation_rejects_off_grid(bad):
    with pytest.raises(DomainError):
        ambulation_from_edss(bad)


def test_edss_total_ambulation_dominates():
    assert edss_total([0] * 7, 3) == 6.0
    assert edss_total([5, 5, 5, 5, 5, 5, 5], 1) == 5.0


def test_edss_total_kfss_patterns():
    assert edss_total([0] * 7, 0) == 0.0
    assert edss_total([1, 0, 0, 0, 0, 0, 0], 0) == 1.0
    assert edss_total([1, 1, 0, 0, 0, 0, 0], 0) == 1.5
    assert edss_total([2, 0, 0, 0, 0, 0, 0], 0) == 2.0
    assert edss_total([3, 0, 0, 0, 0, 0, 0], 0) == 3.0
    assert edss_total([4, 0, 0, 0, 0, 0, 0], 0) == 4.0
    assert edss_total([5, 0, 0, 0, 0, 0, 0], 0) == 4.5
    assert edss_total(dict.fromkeys(KFSS_NAMES, 2), 0) == 4.0


def test_edss_total_missing_and_domain():
    assert edss_total([0, None, 0, 0, 0, 0, 0], 0) is None
    assert edss_total([0] * 7, None) is None
    assert edss_total([0, None, 0, 0, 0, 0, 0], 2) == 5.5   # KFSS irrelevant above 4.5
    with pytest.raises(DomainError):
        edss_total([0] * 7, 12)
    with pytest.raises(DomainError):
        edss_total([7, 0, 0, 0, 0, 0, 0], 0)
    with pytest.raises(DomainError):
        edss_total([0] * 6, 0)


def test_edss_array_matches_scalar():
    rng = np.random.default_rng(0)
    maxima = np.array([6, 5, 5, 5, 6, 6, 6])
    kfss = rng.integers(0, maxima + 1, size=(3000, 7)).astype(float)
    amb = np.where(rng.random(3000) < 0.6, 0, rng.integers(0, 12, 3000)).astype(float)
    kfss[rng.random((3000, 7)) < 0.03] = np.nan
    amb[rng.random(3000) < 0.03] = np.nan
    vec = edss_array(kfss, amb)
    for i in range(3000):
        k = [None if np.isnan(x) else x for x in kfss[i]]
        s = edss_total(k, None if np.isnan(amb[i]) else amb[i])
        assert (np.isnan(vec[i]) and s is None) or vec[i] == s


def traj(values, step=3):
    return EdssTrajectory.from_mapping({step * i: v for i, v in enumerate(values)})


def test_edss_change_18m():
    assert edss_change_18m(traj([2.0, 2, 2, 2, 2, 2, 3.5])) == 1.5
    assert edss_change_18m(traj([2.0, 2, 2, 2, 2, 2, None])) is None


def test_cdw_hand_trajectories():
    # +1 sustained at 3 and 9 months: 6-month window confirmed in year one
    up = [2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]
    assert cdw_label(traj(up), "a").value is True
    assert cdw_label(traj(up), "b").value is True
    # a single 3-month excursion confirms only the 3-month definition
    blip = [2.0, 2.0, 3.0, 3.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]
    assert cdw_label(traj(blip), "b").value is True
    assert cdw_label(traj(blip), "a").value is False
    assert cdw_label(traj(blip), "c").value is False
    # worsening that starts after month 12 is outside the 1-year definition
    late = [2.0] * 6 + [3.0] * 7
    assert cdw_label(traj(late), "a").value is False
    assert cdw_label(traj(late), "c").value is True
    # flat trajectory
    flat = [2.0] * 13
    for v in "abc":
        lab = cdw_label(traj(flat), v)
        assert lab.computable and lab.value is False


def test_cdw_half_point_threshold_above_six():
    high = [6.5, 7.0, 7.0, 7.0, 6.5, 6.5, 6.5, 6.5, 6.5]
    assert cdw_label(traj(high), "a").value is True
    at_six = [6.0, 6.5, 6.5, 6.5, 6.0, 6.0, 6.0, 6.0, 6.0]
    assert cdw_label(traj(at_six), "a").value is False


def test_cdw_missing_visits():
    gap = [2.0, None, None, None, None, None, None, None, None]
    lab = cdw_label(traj(gap), "a")
    assert not lab.computable and lab.value is None
    assert not cdw_label(traj([None, 3.0, 3.0, 3.0]), "a").computable
    # a missing visit does not block a refutation
    assert cdw_label(traj([2.0, None, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]), "a").value is False
    with pytest.raises(ConfigError):
        cdw_label(traj(gap), "d")


def test_cdw_array_matches_scalar():
    rng = np.random.default_rng(1)
    E = np.clip(np.round(2 * (rng.uniform(0, 8, (5000, 1)) + rng.choice([0, 0, 0.5, 1.0, 1.5], (5000, 11)))) / 2,
                0, 10)
    E[rng.random((5000, 11)) < 0.08] = np.nan
    for v in "abc":
        vec = cdw_array(E, v)
        for i in range(5000):
            lab = cdw_label(traj([None if np.isnan(x) else x for x in E[i]]), v)
            want = np.nan if not lab.computable else float(lab.value)
            assert (np.isnan(vec[i]) and np.isnan(want)) or vec[i] == want


def test_edss_validation_report_counts_disagreements():
    rows = [(2.0, [2, 0, 0, 0, 0, 0, 0]), (3.0, [2, 0, 0, 0, 0, 0, 0]), (6.0, [0] * 7), (None, [0] * 7)]
    rep = edss_validation_report(rows)
    assert rep["n_compared"] == 2 and rep["n_disagree"] == 1
