"""Interval bounds for the LATE under the fully independent-instrument
extension: the complier-mass gap Delta, the kappa_n regime switch, the
minimal-distance threshold estimators, the three-term bound estimators, and
their plug-in asymptotic variances.

When the estimated complier masses differ beyond kappa_n, mass equal to the
gap is reallocated on the smaller side: the bound numerator keeps the
trimmed-set contrast away from the threshold and tops it up with the
pointwise-minimum sub-density below (lower) or above (upper) the threshold.
The Delta > kappa_n regime is generated from the Delta < -kappa_n code path
by swapping the roles of (D, Z, trimmed set) and flipping which side of the
difference carries the correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, WeakIdentificationError
from .datamodel import Sample
from .density import Kernel, cell_sum
from .latepoint import DEFAULT_MIN_MASS, TrimmedSet, _weights, estimate_late

#: density floor below which the threshold-variance correction is flagged
DENSITY_FLOOR = 1e-6


@dataclass(frozen=True)
class DeltaEstimate:
    """Estimated complier-mass gap and the regime it selects."""

    delta: float
    kappa: float
    regime: str  # 'below' (delta < -kappa), 'point', 'above' (delta > kappa)
    mass1: float
    mass0: float
    near_boundary: bool

    def to_jsonable(self):
        return {
            "delta": self.delta,
            "kappa": self.kappa,
            "regime": self.regime,
            "complier_mass_d1": self.mass1,
            "complier_mass_d0": self.mass0,
            "near_boundary": self.near_boundary,
        }


@dataclass(frozen=True)
class BoundEstimate:
    """Lower/upper bound estimates with thresholds and per-bound errors."""

    lower: float
    upper: float
    regime: str
    n: int
    t_lower: Optional[float] = None  # threshold accumulating mass from below
    t_upper: Optional[float] = None  # threshold accumulating mass from above
    sigma_lower: Optional[float] = None
    sigma_upper: Optional[float] = None
    flags: tuple = field(default_factory=tuple)

    def ci(self, alpha):
        """Bound-wise normal interval: lower bound minus its margin up to
        upper bound plus its margin."""
        zq = norm.ppf(1.0 - alpha / 2.0)
        lo = self.lower - (0 if self.sigma_lower is None else zq * self.sigma_lower / np.sqrt(self.n))
        hi = self.upper + (0 if self.sigma_upper is None else zq * self.sigma_upper / np.sqrt(self.n))
        return lo, hi

    def to_jsonable(self):
        out = {
            "lower": self.lower,
            "upper": self.upper,
            "regime": self.regime,
            "n": self.n,
        }
        for key in ("t_lower", "t_upper", "sigma_lower", "sigma_upper"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def estimate_delta(sample: Sample, set1: TrimmedSet, set0: TrimmedSet,
                   kappa) -> DeltaEstimate:
    """Difference of the two estimated complier masses and its regime."""
    if kappa <= 0:
        raise ConfigError("kappa must be positive")
    _, _, w1, w0 = _weights(sample)
    mass1 = float(np.mean(w1 * set1.contains(sample.y)))
    mass0 = float(np.mean(w0 * set0.contains(sample.y)))
    delta = mass1 - mass0
    if delta < -kappa:
        regime = "below"
    elif delta > kappa:
        regime = "above"
    else:
        regime = "point"
    return DeltaEstimate(
        delta=delta, kappa=float(kappa), regime=regime,
        mass1=mass1, mass0=mass0,
        near_boundary=bool(0.5 * kappa <= abs(delta) <= 2.0 * kappa),
    )


def _min_pair_weights(sample: Sample, set1: TrimmedSet, set0: TrimmedSet, side_d):
    """Per-observation weights estimating the pointwise minimum of the two
    sub-densities on the corrected side.

    On the trimmed set the own-arm sub-density is the larger one, so the
    minimum is estimated from the opposite arm there and from the own arm on
    the complement.
    """
    m1, m0, _, _ = _weights(sample)
    if side_d == 1:
        inset = set1.contains(sample.y)
        own = ((sample.d == 1) & (sample.z == 1)).astype(float) / m1
        other = ((sample.d == 1) & (sample.z == 0)).astype(float) / m0
    else:
        inset = set0.contains(sample.y)
        own = ((sample.d == 0) & (sample.z == 0)).astype(float) / m0
        other = ((sample.d == 0) & (sample.z == 1)).astype(float) / m1
    return other * inset + own * (~inset)


def _scan_threshold(y, contrib, target, direction):
    """Smallest minimiser of (cumulative(contrib) - target)^2 over the order
    statistics of y (plus the empty cut).

    ``direction`` 'low' accumulates mass over {Y <= t}; 'high' over
    {Y >= t}.  Returns (t, multiplicity_flag, saturated_flag).
    """
    order = np.argsort(y, kind="stable")
    ys = y[order]
    cs = contrib[order]
    uniq, idx = np.unique(ys, return_index=True)
    if direction == "low":
        cum = np.cumsum(cs)
        ends = np.append(idx[1:] - 1, ys.size - 1)
        masses = np.concatenate(([0.0], cum[ends]))  # t = -inf, then each y
        cands = np.concatenate(([-np.inf], uniq))
    else:
        cum = np.cumsum(cs[::-1])[::-1]
        masses = np.concatenate((cum[idx], [0.0]))  # each y, then t = +inf
        cands = np.concatenate((uniq, [np.inf]))
    crit = (masses - target) ** 2
    best = crit.min()
    hits = np.flatnonzero(np.isclose(crit, best, rtol=0.0, atol=1e-15))
    t = float(cands[hits[0]])
    multiple = hits.size > 1
    saturated = masses.max() < target
    return t, multiple, saturated


def estimate_threshold(sample: Sample, set1: TrimmedSet, set0: TrimmedSet,
                       delta: DeltaEstimate, side):
    """Minimal-distance threshold estimate for the requested side.

    ``side='lower'`` accumulates correction mass from below the threshold
    (smallest outcomes first); ``side='upper'`` accumulates from above.
    Ties resolve to the smallest minimiser; non-unique minima beyond ties
    are flagged.
    """
    if delta.regime == "point":
        raise ConfigError("thresholds are undefined in the point regime")
    if side not in ("lower", "upper"):
        raise ConfigError("side must be 'lower' or 'upper'")
    side_d = 1 if delta.regime == "below" else 0
    contrib = _min_pair_weights(sample, set1, set0, side_d) / sample.n
    direction = "low" if side == "lower" else "high"
    return _scan_threshold(sample.y, contrib, abs(delta.delta), direction)


def _corrected_numerator(sample, set1, set0, side_d, t, direction):
    """Trimmed-set contrast mean plus the minimum-density correction mass
    collected below (direction 'low') or above ('high') the threshold."""
    m1, m0, w1, w0 = _weights(sample)
    y = sample.y
    if side_d == 1:
        base = float(np.mean(y * w1 * set1.contains(y)))
    else:
        base = float(np.mean(y * w0 * set0.contains(y)))
    minw = _min_pair_weights(sample, set1, set0, side_d)
    cut = (y <= t) if direction == "low" else (y >= t)
    corr = float(np.mean(y * minw * cut))
    return base + corr


def estimate_bounds(sample: Sample, set1: TrimmedSet, set0: TrimmedSet,
                    delta: DeltaEstimate, min_mass=DEFAULT_MIN_MASS,
                    compute_variance=False, kernel: Kernel = None,
                    h=None) -> BoundEstimate:
    """Bound point estimates for the resolved regime.

    In the point regime both bounds equal the point estimator.  Otherwise
    the corrected side's complier mean is evaluated with the gap mass
    collected at the low or high end, and both ratios share the larger
    complier mass as denominator.
    """
    flags = []
    if delta.near_boundary:
        flags.append("delta_near_regime_boundary")
    if delta.regime == "point":
        point = estimate_late(sample, set1, set0, min_mass=min_mass)
        sig = None
        if compute_variance:
            from .latepoint import late_variance
            sig, _ = late_variance(sample, set1, set0, min_mass=min_mass)
        return BoundEstimate(
            lower=point.point, upper=point.point, regime="point",
            n=sample.n, sigma_lower=sig, sigma_upper=sig, flags=tuple(flags),
        )

    denom = max(delta.mass1, delta.mass0)
    if denom < min_mass:
        raise WeakIdentificationError(
            f"larger complier mass {denom:.3g} below floor", mass=denom)

    t_lower, mult_lo, sat_lo = estimate_threshold(sample, set1, set0, delta, "lower")
    t_upper, mult_hi, sat_hi = estimate_threshold(sample, set1, set0, delta, "upper")
    if mult_lo or mult_hi:
        flags.append("threshold_minimizer_not_unique")
    if sat_lo or sat_hi:
        flags.append("threshold_saturated")

    m1, m0, w1, w0 = _weights(sample)
    y = sample.y
    base1 = float(np.mean(y * w1 * set1.contains(y)))
    base0 = float(np.mean(y * w0 * set0.contains(y)))

    if delta.regime == "below":
        # d=1 complier mean is corrected; low correction gives the lower bound
        lower = (_corrected_numerator(sample, set1, set0, 1, t_lower, "low") - base0) / denom
        upper = (_corrected_numerator(sample, set1, set0, 1, t_upper, "high") - base0) / denom
    else:
        # d=0 complier mean is corrected; high correction gives the lower bound
        lower = (base1 - _corrected_numerator(sample, set1, set0, 0, t_upper, "high")) / denom
        upper = (base1 - _corrected_numerator(sample, set1, set0, 0, t_lower, "low")) / denom

    sig_lo = sig_hi = None
    if compute_variance:
        t_for_lo = t_lower if delta.regime == "below" else t_upper
        t_for_hi = t_upper if delta.regime == "below" else t_lower
        sig_lo, comp_lo = bound_variance(sample, set1, set0, delta, t_for_lo,
                                         "lower", kernel=kernel, h=h)
        sig_hi, comp_hi = bound_variance(sample, set1, set0, delta, t_for_hi,
                                         "upper", kernel=kernel, h=h)
        if comp_lo["unstable"] or comp_hi["unstable"]:
            flags.append("variance_unstable_low_density_at_threshold")

    return BoundEstimate(
        lower=lower, upper=upper, regime=delta.regime, n=sample.n,
        t_lower=t_lower, t_upper=t_upper,
        sigma_lower=sig_lo, sigma_upper=sig_hi, flags=tuple(flags),
    )


def _arm_deriv(A, B, m1, m0):
    """d/dm1 of A/m1 + B/m0 with m0 = 1 - m1 (A, B are raw z-part means)."""
    return -A / m1 ** 2 + B / m0 ** 2


def bound_variance(sample: Sample, set1: TrimmedSet, set0: TrimmedSet,
                   delta: DeltaEstimate, t, which,
                   kernel: Kernel = None, h=None):
    """Plug-in standard deviation of sqrt(n) times one bound estimate.

    ``which`` is 'lower' or 'upper'.  The variance composes a fixed-threshold
    Jacobian (M1), a threshold-estimation correction (M2, scaled by the
    reciprocal of the minimum sub-density at the threshold), and the final
    ratio gradient (Gamma) around the covariance (Sigma) of the per
    observation influence basis:

        sigma^2 = Gamma (M1 + M2) Sigma (M1 + M2)' Gamma'

    Returns ``(sigma, components)`` where components include the matrices
    and an ``unstable`` flag set when the sub-density at the threshold falls
    below 1e-6.
    """
    if delta.regime == "point":
        raise ConfigError("bound variance is only defined in a bound regime")
    if which not in ("lower", "upper"):
        raise ConfigError("which must be 'lower' or 'upper'")
    kernel = kernel or Kernel()
    if h is None:
        h = sample.n ** (-1.0 / 5.0)

    side_d = 1 if delta.regime == "below" else 0
    # low-end correction serves the lower bound on the d=1 side but the
    # upper bound on the d=0 side
    if (delta.regime == "below") == (which == "lower"):
        direction = "low"
    else:
        direction = "high"

    m1, m0, w1, w0 = _weights(sample)
    y = sample.y
    n = sample.n
    in1 = set1.contains(y)
    in0 = set0.contains(y)
    d1z1 = ((sample.d == 1) & (sample.z == 1)).astype(float)
    d1z0 = ((sample.d == 1) & (sample.z == 0)).astype(float)
    d0z0 = ((sample.d == 0) & (sample.z == 0)).astype(float)
    d0z1 = ((sample.d == 0) & (sample.z == 1)).astype(float)

    cut = (y <= t) if direction == "low" else (y >= t)
    minw = _min_pair_weights(sample, set1, set0, side_d)

    if side_d == 1:
        base_core = y * w1 * in1
        other_core = y * w0 * in0
        den_side = float(np.mean(w1 * in1))
        base_z1_raw, base_z0_raw = y * d1z1 * in1, -(y * d1z0 * in1)
        corr_z1_raw = y * d1z1 * (~in1) * cut
        corr_z0_raw = y * d1z0 * in1 * cut
        g_z1_raw = d1z1 * (~in1) * cut
        g_z0_raw = d1z0 * in1 * cut
        other_z1_raw, other_z0_raw = -(y * d0z1 * in0), y * d0z0 * in0
        den1_z1_raw, den1_z0_raw = d1z1 * in1, -(d1z0 * in1)
        den0_z1_raw, den0_z0_raw = -(d0z1 * in0), d0z0 * in0
    else:
        base_core = y * w0 * in0
        other_core = y * w1 * in1
        den_side = float(np.mean(w0 * in0))
        base_z1_raw, base_z0_raw = -(y * d0z1 * in0), y * d0z0 * in0
        corr_z1_raw = y * d0z1 * in0 * cut
        corr_z0_raw = y * d0z0 * (~in0) * cut
        g_z1_raw = d0z1 * in0 * cut
        g_z0_raw = d0z0 * (~in0) * cut
        other_z1_raw, other_z0_raw = y * d1z1 * in1, -(y * d1z0 * in1)
        den1_z1_raw, den1_z0_raw = d1z1 * in1, -(d1z0 * in1)
        den0_z1_raw, den0_z0_raw = -(d0z1 * in0), d0z0 * in0

    corr_core = y * minw * cut
    g_core = minw * cut

    # influence basis: T-cores, denominators, criterion core, arm indicator
    U = np.column_stack([
        base_core,              # 0: corrected-side contrast mean
        corr_core,              # 1: correction mass (with Y)
        other_core,             # 2: uncorrected-side contrast mean
        w1 * in1,               # 3: complier mass d=1
        w0 * in0,               # 4: complier mass d=0
        g_core,                 # 5: criterion mass at the threshold
        (sample.z == 1).astype(float),  # 6: arm frequency
    ])
    Sigma = np.cov(U, rowvar=False, ddof=0)

    def deriv(z1_raw, z0_raw):
        return _arm_deriv(float(np.mean(z1_raw)), float(np.mean(z0_raw)), m1, m0)

    e = np.eye(7)
    w_base = e[0] + deriv(base_z1_raw, base_z0_raw) * e[6]
    w_corr_fixed_t = e[1] + deriv(corr_z1_raw, corr_z0_raw) * e[6]
    w_other = e[2] + deriv(other_z1_raw, other_z0_raw) * e[6]
    w_den1 = e[3] + deriv(den1_z1_raw, den1_z0_raw) * e[6]
    w_den0 = e[4] + deriv(den0_z1_raw, den0_z0_raw) * e[6]
    w_g = e[5] + deriv(g_z1_raw, g_z0_raw) * e[6]

    # sub-density levels at the threshold (own arm and opposite arm)
    zs = (1, 0) if side_d == 1 else (0, 1)
    own_dens = float(cell_sum(sample, kernel, h, [t], d=side_d, z=zs[0])[0])
    opp_dens = float(cell_sum(sample, kernel, h, [t], d=side_d, z=zs[1])[0])
    t_in = bool((set1 if side_d == 1 else set0).contains(np.array([t]))[0])
    min_dens = opp_dens if t_in else own_dens
    unstable = min_dens < DENSITY_FLOOR
    g_slope = max(min_dens, DENSITY_FLOOR)
    if direction == "high":
        g_slope = -g_slope

    # threshold influence: criterion solves g(t) = |delta|
    sgn = -1.0 if delta.regime == "below" else 1.0
    w_absdelta = sgn * (w_den1 - w_den0)
    w_t = (w_absdelta - w_g) / g_slope
    # correction term's threshold sensitivity: d/dt of the collected mass
    bt = t * min_dens if direction == "low" else -t * min_dens

    denom = max(delta.mass1, delta.mass0)
    w_denom = w_den1 if delta.mass1 >= delta.mass0 else w_den0

    corr_val = float(np.mean(corr_core))
    numerator = float(np.mean(base_core)) + corr_val - float(np.mean(other_core))
    if side_d == 0:
        # the corrected side is subtracted: L = (other - base - corr)/denom
        numerator = float(np.mean(other_core)) - float(np.mean(base_core)) - corr_val
    L = numerator / denom

    sign_corr = 1.0 if side_d == 1 else -1.0
    M1 = np.vstack([sign_corr * w_base, sign_corr * w_corr_fixed_t,
                    -sign_corr * w_other, w_denom])
    M2 = np.zeros_like(M1)
    M2[1] = sign_corr * bt * w_t
    Gamma = np.array([1.0 / denom, 1.0 / denom, 1.0 / denom, -L / denom])

    var = float(Gamma @ (M1 + M2) @ Sigma @ (M1 + M2).T @ Gamma)
    sigma = float(np.sqrt(max(var, 0.0)))
    components = {
        "Gamma": Gamma, "M1": M1, "M2": M2, "Sigma": Sigma,
        "unstable": unstable, "min_density_at_t": min_dens,
        "den_side": den_side,
    }
    return sigma, components
