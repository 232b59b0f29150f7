"""Point-identified local average treatment effect under the relaxed
monotonicity extensions: diagnostics for the testable density implication,
trimmed-set estimation, the two-ratio point estimator, its plug-in
asymptotic variance, and confidence intervals (single tail condition or the
conservative union over all sixteen tail conditions)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, WeakIdentificationError
from .datamodel import Sample
from .density import DensityEstimate
from .sets import IntervalUnion, superlevel_set

#: identification floor for estimated complier masses
DEFAULT_MIN_MASS = 1e-4


@dataclass(frozen=True)
class TailSpec:
    """Assumed sign of the density differences outside the trimming band.

    Each flag states whether the corresponding tail belongs to the outcome
    region: ``upper1`` is Y_1 on [M_u, inf), ``lower1`` is Y_1 on
    (-inf, M_l], and similarly for d=0.  All sixteen combinations are valid.
    """

    upper1: bool = False
    lower1: bool = False
    upper0: bool = False
    lower0: bool = False

    @classmethod
    def all_specs(cls):
        return [cls(*flags) for flags in itertools.product((False, True), repeat=4)]

    @classmethod
    def sec33(cls):
        """Tails used by the built-in coverage design: d=1 tails empty,
        d=0 takes both tails."""
        return cls(upper1=False, lower1=False, upper0=True, lower0=True)

    def tail_set(self, d, band):
        m_l, m_u = band
        pieces = []
        if (self.upper1 if d == 1 else self.upper0):
            pieces.append((m_u, np.inf))
        if (self.lower1 if d == 1 else self.lower0):
            pieces.append((-np.inf, m_l))
        return IntervalUnion(pieces)

    def to_jsonable(self):
        return {"upper1": self.upper1, "lower1": self.lower1,
                "upper0": self.upper0, "lower0": self.lower0}

    @classmethod
    def from_string(cls, text):
        """Parse e.g. ``u1,l0`` (flags present = tail included)."""
        flags = {"u1": False, "l1": False, "u0": False, "l0": False}
        text = text.strip()
        if text and text != "none":
            for token in text.split(","):
                token = token.strip().lower()
                if token not in flags:
                    raise ConfigError(f"unknown tail token {token!r}; use u1,l1,u0,l0 or 'none'")
                flags[token] = True
        return cls(upper1=flags["u1"], lower1=flags["l1"],
                   upper0=flags["u0"], lower0=flags["l0"])


@dataclass(frozen=True)
class TrimmedSet:
    """Estimated outcome region for one treatment arm: the super-level set
    of the density difference inside the band, unioned with the assumed
    tails."""

    region: IntervalUnion
    b: float

    def contains(self, y):
        return self.region.contains(y)


def check_iam_implication(est: DensityEstimate, b_n=0.0):
    """Diagnostic for the density form of the testable implication.

    Passes iff both density differences are everywhere >= -b_n on the grid.
    Violation masses integrate the negative parts over the grid.
    """
    neg1 = np.maximum(-est.f1, 0.0)
    neg0 = np.maximum(-est.f0, 0.0)
    return {
        "passes": bool(est.f1.min() >= -b_n and est.f0.min() >= -b_n),
        "violation_mass_1": float(np.trapezoid(neg1, est.grid)),
        "violation_mass_0": float(np.trapezoid(neg0, est.grid)),
    }


def estimate_trimmed_sets(est: DensityEstimate, tails: TailSpec, b_n, band,
                          threshold_scale="absolute"):
    """Extract the trimmed outcome regions for d=1 and d=0.

    With ``threshold_scale="absolute"`` the level applied to each signed
    density difference is ``b_n`` itself.  With ``"relative"`` the level for
    treatment state d is ``b_n`` times the peak of the estimated difference
    for that state, which makes the trimming fraction comparable across
    designs whose density scales differ.
    """
    if b_n <= 0:
        raise ConfigError("trimming level b_n must be positive")
    if threshold_scale not in ("absolute", "relative"):
        raise ConfigError(
            f"threshold_scale must be 'absolute' or 'relative', got {threshold_scale!r}")
    m_l, m_u = band
    if threshold_scale == "relative":
        lev1 = b_n * float(np.max(est.f1))
        lev0 = b_n * float(np.max(est.f0))
        if lev1 <= 0 or lev0 <= 0:
            raise WeakIdentificationError(
                "estimated density difference is nowhere positive",
                mass=float(min(np.max(est.f1), np.max(est.f0))))
    else:
        lev1 = lev0 = float(b_n)
    core1 = superlevel_set(est.grid, est.f1, lev1, m_l, m_u)
    core0 = superlevel_set(est.grid, est.f0, lev0, m_l, m_u)
    set1 = TrimmedSet(core1.union(tails.tail_set(1, band)), b=lev1)
    set0 = TrimmedSet(core0.union(tails.tail_set(0, band)), b=lev0)
    return set1, set0


@dataclass(frozen=True)
class LateEstimate:
    """Point estimate with the two estimated complier masses, the plug-in
    standard error (if computed), and the confidence interval."""

    point: float
    mass1: float  # P(Y_1, 1) - Q(Y_1, 1)
    mass0: float  # Q(Y_0, 0) - P(Y_0, 0)
    n: int
    sigma: Optional[float] = None
    ci: Optional[tuple] = None
    alpha: Optional[float] = None
    tails: Optional[TailSpec] = None

    def to_jsonable(self):
        out = {
            "estimate": self.point,
            "complier_mass_d1": self.mass1,
            "complier_mass_d0": self.mass0,
            "n": self.n,
        }
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.ci is not None:
            out["ci"] = [self.ci[0], self.ci[1]]
            out["alpha"] = self.alpha
        if self.tails is not None:
            out["tails"] = self.tails.to_jsonable()
        return out


def _weights(sample: Sample):
    """Per-observation instrument-arm weights and the complier contrast
    weights w1, w0 using estimated arm probabilities."""
    m1 = float(np.mean(sample.z == 1))
    m0 = 1.0 - m1
    d1z1 = ((sample.d == 1) & (sample.z == 1)).astype(float)
    d1z0 = ((sample.d == 1) & (sample.z == 0)).astype(float)
    d0z0 = ((sample.d == 0) & (sample.z == 0)).astype(float)
    d0z1 = ((sample.d == 0) & (sample.z == 1)).astype(float)
    w1 = d1z1 / m1 - d1z0 / m0
    w0 = d0z0 / m0 - d0z1 / m1
    return m1, m0, w1, w0


def estimate_late(sample: Sample, set1: TrimmedSet, set0: TrimmedSet,
                  min_mass=DEFAULT_MIN_MASS) -> LateEstimate:
    """Two-ratio point estimator over the trimmed regions.

    Numerators are sample means of Y times the instrument-arm contrast of
    treatment-cell indicators inside the region; denominators are the same
    means without Y (the estimated complier masses).
    """
    _, _, w1, w0 = _weights(sample)
    in1 = set1.contains(sample.y).astype(float)
    in0 = set0.contains(sample.y).astype(float)
    num1 = float(np.mean(sample.y * w1 * in1))
    den1 = float(np.mean(w1 * in1))
    num0 = float(np.mean(sample.y * w0 * in0))
    den0 = float(np.mean(w0 * in0))
    for label, mass in (("d=1", den1), ("d=0", den0)):
        if mass < min_mass:
            raise WeakIdentificationError(
                f"estimated complier mass for {label} is {mass:.3g} < {min_mass:g}",
                mass=mass,
            )
    point = num1 / den1 - num0 / den0
    return LateEstimate(point=point, mass1=den1, mass0=den0, n=sample.n)


def late_variance(sample: Sample, set1: TrimmedSet, set0: TrimmedSet,
                  min_mass=DEFAULT_MIN_MASS, method="outcome"):
    """Plug-in delta-method standard deviation of sqrt(n) times the
    estimator, with its component matrices.

    The estimator is pi1/pi3 - pi2/pi4 where each pi is a ratio-weighted
    sample mean depending on the two arm frequencies.  Sigma is the sample
    covariance of the six-dimensional influence vector (the two arm
    indicators and the four core means); D rescales the arm coordinates;
    Gamma stacks the 2x4 block of arm derivatives over a 4x4 identity;
    Pi is the gradient of the two-ratio map.

    ``method`` selects the arm-derivative block.  ``"outcome"`` (default)
    fills all four columns with outcome-weighted cross moments; in
    simulations it is mildly conservative for the mass coordinates.
    ``"gradient"`` uses the exact analytic derivative of each coordinate
    with respect to the instrument-arm frequency, whose indicator-only
    moments enter the mass columns; it tracks the empirical sampling
    variance most closely.

    Returns ``(sigma, components)`` with components a dict of Pi, Gamma, D,
    Sigma and the pi vector.
    """
    if method not in ("outcome", "gradient"):
        raise ConfigError(
            f"variance method must be 'outcome' or 'gradient', got {method!r}")
    m1, m0, w1, w0 = _weights(sample)
    y = sample.y
    in1 = set1.contains(y).astype(float)
    in0 = set0.contains(y).astype(float)

    v3 = y * w1 * in1
    v4 = y * w0 * in0
    v5 = w1 * in1
    v6 = w0 * in0
    pi = np.array([v3.mean(), v4.mean(), v5.mean(), v6.mean()])
    if pi[2] < min_mass or pi[3] < min_mass:
        raise WeakIdentificationError(
            "complier mass below identification floor in variance step",
            mass=float(min(pi[2], pi[3])),
        )

    z1 = (sample.z == 1).astype(float)
    z0 = 1.0 - z1
    V = np.column_stack([z1, z0, v3, v4, v5, v6])
    Sigma = np.cov(V, rowvar=False, ddof=0)

    D = np.diag([-1.0 / m1 ** 2, -1.0 / m0 ** 2, 1.0, 1.0, 1.0, 1.0])

    d1z1 = (sample.d == 1) & (sample.z == 1)
    d1z0 = (sample.d == 1) & (sample.z == 0)
    d0z0 = (sample.d == 0) & (sample.z == 0)
    d0z1 = (sample.d == 0) & (sample.z == 1)
    a1 = float(np.mean(y * d1z1 * in1))  # E[Y 1(D=1,Z=1) 1(Y in Y1)]
    a2 = float(np.mean(y * d1z0 * in1))
    b1 = float(np.mean(y * d0z0 * in0))
    b2 = float(np.mean(y * d0z1 * in0))
    c1 = float(np.mean(d1z1 * in1))
    c2 = float(np.mean(d1z0 * in1))
    e1 = float(np.mean(d0z0 * in0))
    e2 = float(np.mean(d0z1 * in0))
    if method == "outcome":
        # outcome-weighted cross moments in every column, own-arm
        # region for the opposite-arm entries
        g2 = float(np.mean(y * d1z0 * in0))
        g4 = float(np.mean(y * d0z1 * in1))
        gamma_star = np.array([
            [a1, b1, a1, b1],   # Z=1 arm row
            [g2, g4, g2, g4],   # Z=0 arm row
        ])
    else:
        # arm-derivative block: column j gives the moments whose rescaled
        # arm deviations reproduce d pi_j / d (arm frequency)
        gamma_star = np.array([
            [a1, -b2, c1, -e2],   # Z=1 arm row
            [-a2, b1, -c2, e1],   # Z=0 arm row
        ])
    Gamma = np.vstack([gamma_star, np.eye(4)])

    Pi = np.array([1.0 / pi[2], -1.0 / pi[3],
                   -pi[0] / pi[2] ** 2, pi[1] / pi[3] ** 2])

    var = float(Pi @ Gamma.T @ D.T @ Sigma @ D @ Gamma @ Pi)
    sigma = float(np.sqrt(max(var, 0.0)))
    components = {"Pi": Pi, "Gamma": Gamma, "D": D, "Sigma": Sigma, "pi": pi}
    return sigma, components


def known_tail_estimate(sample: Sample, est: DensityEstimate, tails: TailSpec,
                        b_n, band, alpha=0.05,
                        min_mass=DEFAULT_MIN_MASS,
                        threshold_scale="absolute",
                        variance_method="outcome") -> LateEstimate:
    """Point estimate plus the centred normal confidence interval for one
    fixed tail condition."""
    set1, set0 = estimate_trimmed_sets(est, tails, b_n, band,
                                       threshold_scale=threshold_scale)
    base = estimate_late(sample, set1, set0, min_mass=min_mass)
    sigma, _ = late_variance(sample, set1, set0, min_mass=min_mass,
                             method=variance_method)
    zq = norm.ppf(1.0 - alpha / 2.0)
    half = zq * sigma / np.sqrt(sample.n)
    return LateEstimate(
        point=base.point, mass1=base.mass1, mass0=base.mass0, n=base.n,
        sigma=sigma, ci=(base.point - half, base.point + half), alpha=alpha,
        tails=tails,
    )


def conservative_union_ci(sample: Sample, est: DensityEstimate, b_n, band,
                          alpha=0.05, min_mass=DEFAULT_MIN_MASS,
                          threshold_scale="absolute",
                          variance_method="outcome"):
    """Convex hull of the sixteen known-tail confidence intervals.

    Tail conditions that trigger weak-identification errors are skipped;
    if all sixteen fail, the weak-identification error is re-raised.
    """
    members = []
    skipped = 0
    last_error = None
    for tails in TailSpec.all_specs():
        try:
            members.append(known_tail_estimate(
                sample, est, tails, b_n, band, alpha=alpha, min_mass=min_mass,
                threshold_scale=threshold_scale,
                variance_method=variance_method))
        except WeakIdentificationError as exc:
            skipped += 1
            last_error = exc
    if not members:
        raise WeakIdentificationError(
            "all 16 tail conditions are infeasible", mass=last_error.mass)
    lo = min(m.ci[0] for m in members)
    hi = max(m.ci[1] for m in members)
    return {
        "ci": (lo, hi),
        "feasible": len(members),
        "skipped": skipped,
        "members": members,
    }


def wald_estimate(sample: Sample):
    """Classical instrument ratio (difference of arm means of Y over the
    difference of arm means of D), for comparison columns in reports."""
    z1 = sample.z == 1
    dy = float(sample.y[z1].mean() - sample.y[~z1].mean())
    dd = float(sample.d[z1].mean() - sample.d[~z1].mean())
    if abs(dd) < 1e-12:
        raise WeakIdentificationError("no first stage: arm treatment rates equal", mass=dd)
    return dy / dd
