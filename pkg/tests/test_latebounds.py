"""Complier-mass gap regimes, threshold scans, and interval bound estimators."""

import numpy as np
import pytest

from partialid.datamodel import Sample
from partialid.errors import ConfigError, WeakIdentificationError
from partialid.latebounds import (DeltaEstimate, estimate_bounds,
                                  estimate_delta, estimate_threshold,
                                  bound_variance, _scan_threshold)
from partialid.latepoint import TrimmedSet, estimate_late
from partialid.sets import IntervalUnion
from partialid.simplex import solve_lp


def gap_population():
    """40-observation population with a hand-computed bound oracle.

    Equal instrument arms (20/20).  Trimmed sets [2, 5] for d=1 and [0, 1]
    for d=0.  Complier masses 0.3 (d=1) and 0.4 (d=0), so the gap is -0.1.
    The pointwise-minimum sub-density on the d=1 side has mass 0.1 at y=2
    (opposite arm inside the set) and 0.1 at y=7 (own arm outside), making
    both threshold scans hit the target exactly.
    """
    rows = []
    rows += [(3, 1, 1)] * 4 + [(4, 1, 1)] * 4 + [(7, 1, 1)] * 2
    rows += [(2, 1, 0)] * 2 + [(6, 1, 0)] * 9
    rows += [(0, 0, 0)] * 5 + [(1, 0, 0)] * 4
    rows += [(1, 0, 1)] * 1 + [(6, 0, 1)] * 9
    y, d, z = map(np.array, zip(*rows))
    sample = Sample(y=y.astype(float), d=d, z=z)
    set1 = TrimmedSet(IntervalUnion([(2.0, 5.0)]), 0.0)
    set0 = TrimmedSet(IntervalUnion([(0.0, 1.0)]), 0.0)
    return sample, set1, set0


class TestDelta:
    def test_gap_and_regime(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.01)
        assert de.delta == pytest.approx(-0.1)
        assert de.regime == "below"
        assert de.mass1 == pytest.approx(0.3)
        assert de.mass0 == pytest.approx(0.4)

    def test_point_regime_inside_kappa(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.5)
        assert de.regime == "point"

    def test_above_regime_via_swap(self):
        s, set1, set0 = gap_population()
        swapped = Sample(y=s.y, d=1 - s.d, z=1 - s.z)
        de = estimate_delta(swapped, set0, set1, kappa=0.01)
        assert de.regime == "above"
        assert de.delta == pytest.approx(0.1)

    def test_near_boundary_flag(self):
        s, set1, set0 = gap_population()
        assert estimate_delta(s, set1, set0, kappa=0.09).near_boundary
        assert not estimate_delta(s, set1, set0, kappa=0.01).near_boundary

    def test_kappa_must_be_positive(self):
        s, set1, set0 = gap_population()
        with pytest.raises(ConfigError):
            estimate_delta(s, set1, set0, kappa=0.0)


class TestThresholdScan:
    def test_low_direction_exact_hit(self):
        y = np.array([1.0, 2.0, 3.0])
        contrib = np.array([0.2, 0.3, 0.5])
        t, multiple, saturated = _scan_threshold(y, contrib, 0.5, "low")
        assert t == 2.0 and not multiple and not saturated

    def test_high_direction(self):
        y = np.array([1.0, 2.0, 3.0])
        contrib = np.array([0.2, 0.3, 0.5])
        t, multiple, saturated = _scan_threshold(y, contrib, 0.5, "high")
        assert t == 3.0 and not saturated

    def test_saturated_flag(self):
        y = np.array([1.0, 2.0])
        t, _, saturated = _scan_threshold(y, np.array([0.1, 0.1]), 5.0, "low")
        assert saturated and t == 2.0

    def test_empty_cut_candidate(self):
        # target zero: t = -inf achieves it exactly
        y = np.array([1.0, 2.0])
        t, _, _ = _scan_threshold(y, np.array([0.3, 0.3]), 0.0, "low")
        assert t == -np.inf

    def test_grid_search_agreement(self):
        # brute-force minimisation over all support cuts agrees within one
        # support point
        rng = np.random.default_rng(5)
        y = np.round(rng.uniform(0, 10, 60), 1)
        contrib = rng.uniform(0, 0.05, 60)
        target = 0.6
        t, _, _ = _scan_threshold(y, contrib, target, "low")
        support = np.unique(y)
        crits = [(np.sum(contrib[y <= c]) - target) ** 2 for c in support]
        brute = support[int(np.argmin(crits))]
        pos_t = np.searchsorted(support, t)
        pos_b = np.searchsorted(support, brute)
        assert abs(pos_t - pos_b) <= 1


class TestBoundsOracle:
    def test_hand_computed_bounds(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.01)
        be = estimate_bounds(s, set1, set0, de)
        assert be.regime == "below"
        assert be.lower == pytest.approx(3.125, abs=1e-12)
        assert be.upper == pytest.approx(4.375, abs=1e-12)
        assert be.t_lower == 2.0

    def test_lp_cross_check(self):
        # reallocating gap mass within the pointwise-minimum capacities is a
        # transportation LP; its optima must reproduce the corrections
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.01)
        be = estimate_bounds(s, set1, set0, de)
        # capacities: y=2 carries 0.1, y=7 carries 0.1
        ys = np.array([2.0, 7.0])
        cap = np.array([0.1, 0.1])
        gap = abs(de.delta)
        # minimise / maximise sum(y * nu) s.t. 0 <= nu <= cap, sum(nu) = gap
        a_eq = np.array([[1.0, 1.0]])
        a_ub = np.eye(2)
        lo_val, lo_x = solve_lp(ys, a_eq, np.array([gap]), a_ub, cap)
        hi_val, hi_x = solve_lp(-ys, a_eq, np.array([gap]), a_ub, cap)
        base1 = 1.2   # trimmed treated contrast mean
        base0 = 0.15  # trimmed control contrast mean
        denom = 0.4
        assert be.lower == pytest.approx((base1 + lo_val - base0) / denom,
                                         abs=1e-9)
        assert be.upper == pytest.approx((base1 - hi_val - base0) / denom,
                                         abs=1e-9)

    def test_point_regime_collapses_to_point(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.5)
        be = estimate_bounds(s, set1, set0, de)
        point = estimate_late(s, set1, set0).point
        assert be.lower == be.upper == pytest.approx(point)

    def test_lower_not_above_upper(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.01)
        be = estimate_bounds(s, set1, set0, de)
        assert be.lower <= be.upper

    def test_above_regime_negates_swapped_bounds(self):
        # flipping both treatment and instrument negates the estimand, so
        # the bounds swap and change sign
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.01)
        be = estimate_bounds(s, set1, set0, de)
        flipped = Sample(y=s.y, d=1 - s.d, z=1 - s.z)
        de_f = estimate_delta(flipped, set0, set1, kappa=0.01)
        be_f = estimate_bounds(flipped, set0, set1, de_f)
        assert be_f.regime == "above"
        assert be_f.lower == pytest.approx(-be.upper, abs=1e-12)
        assert be_f.upper == pytest.approx(-be.lower, abs=1e-12)

    def test_weak_identification(self):
        s, set1, set0 = gap_population()
        empty = TrimmedSet(IntervalUnion([(100.0, 101.0)]), 0.0)
        de = DeltaEstimate(delta=-0.5, kappa=0.01, regime="below",
                           mass1=0.0, mass0=0.0, near_boundary=False)
        with pytest.raises(WeakIdentificationError):
            estimate_bounds(s, empty, empty, de)


class TestBoundVariance:
    def test_runs_and_reports_components(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.01)
        sig, comp = bound_variance(s, set1, set0, de, t=2.0, which="lower",
                                   h=0.5)
        assert sig > 0
        assert comp["M1"].shape == (4, 7)
        assert comp["Sigma"].shape == (7, 7)

    def test_point_regime_rejected(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.5)
        with pytest.raises(ConfigError):
            bound_variance(s, set1, set0, de, t=2.0, which="lower")

    def test_full_bounds_with_variance_and_ci(self):
        s, set1, set0 = gap_population()
        de = estimate_delta(s, set1, set0, kappa=0.01)
        be = estimate_bounds(s, set1, set0, de, compute_variance=True, h=0.5)
        assert be.sigma_lower > 0 and be.sigma_upper > 0
        lo, hi = be.ci(0.05)
        assert lo < be.lower and hi > be.upper
