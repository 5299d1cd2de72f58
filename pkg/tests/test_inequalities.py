import math

import numpy as np
import pytest

from spinlsi.inequalities import (check_field_monotonicity, check_fkg,
                                  check_pf_chain, check_theorem, field_battery)
from spinlsi.model import ModelSpec, build_coupling


def test_field_battery_deterministic_and_shaped():
    a = field_battery(4, 200, seed=5)
    b = field_battery(4, 200, seed=5)
    assert np.array_equal(a, b)
    assert a.shape == (200, 4)
    assert np.array_equal(a[0], np.zeros(4))       # zero field first
    assert a[3].max() == 50.0                       # axis spikes present
    c = field_battery(4, 200, seed=6)
    assert not np.array_equal(a, c)


def test_fkg_zero_temperature_diagonal(path2):
    rep = check_fkg(path2, 0.0, count=300, seed=0)
    assert rep.passed
    assert rep.worst_slack >= -1e-12


def test_fkg_two_site_closed_form(path2):
    a = -path2.matrix[0, 1]
    rep = check_fkg(path2, 0.9, count=300, seed=0)
    assert rep.passed
    # the zero-field sample is in the battery; its off-diagonal is tanh(ta) > 0
    from spinlsi.exact import truncated_correlation
    sig = truncated_correlation(path2, 0.9)
    assert sig[0, 1] == pytest.approx(math.tanh(0.9 * a), abs=1e-12)


def test_monotonicity_single_site_closed_form(single_site):
    # n = 1: Sigma_t(f) = sech^2(f) <= 1 = Sigma_t(0)
    rep = check_field_monotonicity(single_site, 0.7, count=200, seed=1)
    assert rep.passed


def test_monotonicity_equality_at_zero_field(path3):
    rep = check_field_monotonicity(path3, 0.5, count=50, seed=2)
    assert rep.passed
    assert rep.worst_slack >= -1e-12


def test_pf_chain_two_site_constant_rows(path2):
    rep = check_pf_chain(path2, 0.8, count=200, seed=3)
    assert rep.passed
    from spinlsi.exact import susceptibility, truncated_correlation
    a = -path2.matrix[0, 1]
    sig0 = truncated_correlation(path2, 0.8)
    radius0 = float(np.max(np.abs(np.linalg.eigvalsh(sig0))))
    assert radius0 == pytest.approx(1 + math.tanh(0.8 * a), abs=1e-12)
    assert radius0 == pytest.approx(susceptibility(path2, 0.8), abs=1e-12)


def test_pf_chain_random_tree():
    tree = build_coupling(ModelSpec("custom", {"matrix": [
        [0, -1, -1, 0], [-1, 0, 0, -1], [-1, 0, 0, 0], [0, -1, 0, 0]]}))
    for t in (0.1, 0.6, 1.2):
        rep = check_pf_chain(tree, t, count=500, seed=4)
        assert rep.passed, rep.to_dict()


def test_battery_zero_violations(battery):
    for label, A in battery:
        if A.n > 4:
            continue
        for t in (0.0, 0.5, 1.5):
            for check in (check_fkg, check_field_monotonicity, check_pf_chain):
                rep = check(A, t, count=400, seed=7, model=label)
                assert rep.passed, (label, t, rep.to_dict())


def test_reports_bit_identical_for_same_seed(cycle3):
    a = check_fkg(cycle3, 0.6, count=500, seed=11, model="cycle3")
    b = check_fkg(cycle3, 0.6, count=500, seed=11, model="cycle3")
    assert a.to_dict() == b.to_dict()


def test_check_theorem_small_battery(cycle3):
    out = check_theorem(cycle3, [0.0, 0.2], field_count=4, restarts=1,
                        iters=120, seed=7, model="cycle3")
    assert out.passed
    for row in out.rows:
        assert row["best_ratio"] <= row["bound_upper"] + 1e-8
        assert row["tightness_gap"] >= -1e-8
    # beta = 0 is tight: the bound is exactly 1/2 and candidates approach it
    first = out.rows[0]
    assert first["bound_upper"] == 0.5
    assert first["tightness_gap"] < 1e-3
