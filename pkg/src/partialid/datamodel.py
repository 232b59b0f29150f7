"""Core data containers: samples, empirical conditional measures, and run
configuration shared by all estimation modules."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DataError
from .sets import IntervalUnion


@dataclass(frozen=True)
class Sample:
    """n observations of (outcome ``y`` real, treatment ``d`` binary,
    instrument ``z`` binary)."""

    y: np.ndarray
    d: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d)
        z = np.asarray(self.z)
        if not (y.ndim == d.ndim == z.ndim == 1):
            raise DataError("y, d, z must be one-dimensional")
        if not (y.size == d.size == z.size):
            raise DataError("y, d, z must have equal length")
        if y.size < 1:
            raise DataError("sample must contain at least one observation")
        if not np.isfinite(y).all():
            raise DataError("y contains non-finite values")
        for name, arr in (("d", d), ("z", z)):
            if not np.isin(arr, (0, 1)).all():
                raise DataError(f"{name} must contain only 0 or 1")
        if not (np.any(z == 1) and np.any(z == 0)):
            raise DataError("both instrument arms (z=0 and z=1) must be present")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d.astype(np.int8))
        object.__setattr__(self, "z", z.astype(np.int8))

    @property
    def n(self):
        return self.y.size

    def pr_z1(self):
        return float(np.mean(self.z == 1))


@dataclass(frozen=True)
class EmpiricalPQ:
    """Empirical conditional measures of (Y, D) given the instrument arm.

    The P side conditions on Z=1, the Q side on Z=0.  Each (d, z) cell holds
    the sorted outcomes observed in that cell; masses are relative to the
    size of the z-arm, so the masses within an arm sum to one.
    """

    pr_z1: float
    pr_z0: float
    n_z1: int
    n_z0: int
    cells: dict  # (d, z) -> sorted 1-d array of outcomes

    def arm_size(self, z):
        return self.n_z1 if z == 1 else self.n_z0

    def mass(self, region: IntervalUnion, d, z):
        """Pr(Y in region, D=d | Z=z), empirically."""
        ys = self.cells[(d, z)]
        if ys.size == 0:
            return 0.0
        return float(np.count_nonzero(region.contains(ys))) / self.arm_size(z)

    def cdf(self, y, d, z):
        """Pr(Y <= y, D=d | Z=z), right-continuous step function."""
        ys = self.cells[(d, z)]
        return float(np.searchsorted(ys, y, side="right")) / self.arm_size(z)

    def p(self, region, d):
        return self.mass(region, d, 1)

    def q(self, region, d):
        return self.mass(region, d, 0)


def build_empirical(sample: Sample) -> EmpiricalPQ:
    """Build the empirical conditional measures from a sample."""
    n_z1 = int(np.count_nonzero(sample.z == 1))
    n_z0 = sample.n - n_z1
    if n_z1 == 0 or n_z0 == 0:
        raise ConfigError("degenerate instrument: one z-arm is empty")
    cells = {}
    for d in (0, 1):
        for z in (0, 1):
            mask = (sample.d == d) & (sample.z == z)
            cells[(d, z)] = np.sort(sample.y[mask])
    return EmpiricalPQ(
        pr_z1=n_z1 / sample.n,
        pr_z0=n_z0 / sample.n,
        n_z1=n_z1,
        n_z0=n_z0,
        cells=cells,
    )


def theorem_bandwidth(n):
    """Rate-based bandwidth h_n = n^{-1/5} (default for simulations)."""
    return float(n) ** (-1.0 / 5.0)


def theorem_trimming(n):
    """Rate-based trimming level b_n = n^{-1/4} / log n."""
    return float(n) ** (-1.0 / 4.0) / math.log(n)


def default_threshold(n):
    """Regime-switch threshold kappa_n = log n / sqrt(n)."""
    return math.log(n) / math.sqrt(n)


@dataclass(frozen=True)
class RunConfig:
    """Tuning rules (closures over n) plus their values at the sample size.

    Storing both lets simulation sweeps across n reuse one config while
    single-sample runs read the evaluated values directly.
    """

    bandwidth_rule: Callable[[int], float]
    trimming_rule: Callable[[int], float]
    threshold_rule: Callable[[int], float]
    band: tuple
    alpha: float = 0.05
    n_boot: int = 500
    seed: int = 0
    h: float = 0.0
    b: float = 0.0
    kappa: float = 0.0
    tails: Optional[object] = None  # TailSpec, when selected from data
    threshold_scale: str = "absolute"  # how b is applied to the densities
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        m_l, m_u = self.band
        if not m_l < m_u:
            raise ConfigError("band must satisfy M_l < M_u")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if self.threshold_scale not in ("absolute", "relative"):
            raise ConfigError(
                "threshold_scale must be 'absolute' or 'relative', got "
                f"{self.threshold_scale!r}")
        if self.n_boot < 1:
            raise ConfigError("bootstrap count must be >= 1")
        for label, rule in (
            ("bandwidth", self.bandwidth_rule),
            ("trimming", self.trimming_rule),
        ):
            for n in (2, 1000):
                if rule(n) <= 0:
                    raise ConfigError(f"{label} rule must be positive at n={n}")

    @classmethod
    def from_rules(cls, n, bandwidth_rule, trimming_rule, threshold_rule, band,
                   alpha=0.05, n_boot=500, seed=0, tails=None,
                   threshold_scale="absolute", notes=()):
        return cls(
            bandwidth_rule=bandwidth_rule,
            trimming_rule=trimming_rule,
            threshold_rule=threshold_rule,
            band=tuple(band),
            alpha=alpha,
            n_boot=n_boot,
            seed=seed,
            h=float(bandwidth_rule(n)),
            b=float(trimming_rule(n)),
            kappa=float(threshold_rule(n)),
            tails=tails,
            threshold_scale=threshold_scale,
            notes=tuple(notes),
        )

    def to_jsonable(self):
        out = {
            "band": [self.band[0], self.band[1]],
            "alpha": self.alpha,
            "n_boot": self.n_boot,
            "seed": self.seed,
            "h": self.h,
            "b": self.b,
            "kappa": self.kappa,
            "threshold_scale": self.threshold_scale,
        }
        if self.tails is not None:
            out["tails"] = self.tails.to_jsonable()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def default_simulation_config(n, band, alpha=0.05, seed=0, tails=None):
    """Rate-rule configuration used by the simulation harness.

    The trimming level is applied relative to the per-state peak of the
    estimated density difference, so one b works across designs whose
    density scales differ.
    """
    return RunConfig.from_rules(
        n,
        bandwidth_rule=theorem_bandwidth,
        trimming_rule=theorem_trimming,
        threshold_rule=default_threshold,
        band=band,
        alpha=alpha,
        seed=seed,
        tails=tails,
        threshold_scale="relative",
    )


def default_empirical_config(sample: Sample, alpha=0.05, seed=0) -> RunConfig:
    """Data-driven configuration for empirical (CSV) runs.

    Rules: h = sd(Y) log(n) / (2 n^{1/5}); b = n^{-1/4} times the average
    estimated density-difference level at the observations; the trimming
    band is the empirical 1%/99% quantile range of Y; tail signs are chosen
    by comparing weighted conditional tail variances across instrument arms.

    Requires n >= 20; the rules are unreliable below that.
    """
    from .density import Kernel, estimate_density_diff  # local: avoid cycle
    from .latepoint import TailSpec

    n = sample.n
    if n < 20:
        raise ConfigError(f"need n >= 20 for the data-driven rules, got n={n}")
    sd = float(np.std(sample.y, ddof=1))
    if sd <= 0:
        raise ConfigError("outcome is constant: bandwidth rule gives h = 0")

    def bandwidth_rule(m, _sd=sd):
        return _sd * math.log(m) / (2.0 * m ** (1.0 / 5.0))

    h = bandwidth_rule(n)
    m_l = float(np.quantile(sample.y, 0.01))
    m_u = float(np.quantile(sample.y, 0.99))
    if m_l >= m_u:
        raise ConfigError("degenerate 1%/99% quantile band")

    emp = build_empirical(sample)
    kernel = Kernel()
    est = estimate_density_diff(emp, sample, kernel, h, np.sort(sample.y))
    density_level = float(np.mean(est.f1 + est.f0))

    def trimming_rule(m, _lvl=density_level):
        val = m ** (-1.0 / 4.0) * _lvl
        return val if val > 0 else m ** (-1.0 / 4.0) / math.log(m)

    notes = []
    if density_level <= 0:
        notes.append("average density level non-positive; fell back to the rate rule for b")

    tails = TailSpec(
        upper1=_tail_flag(sample, d=1, upper=True),
        lower1=_tail_flag(sample, d=1, upper=False),
        upper0=_tail_flag(sample, d=0, upper=True),
        lower0=_tail_flag(sample, d=0, upper=False),
    )

    return RunConfig.from_rules(
        n,
        bandwidth_rule=bandwidth_rule,
        trimming_rule=trimming_rule,
        threshold_rule=default_threshold,
        band=(m_l, m_u),
        alpha=alpha,
        seed=seed,
        tails=tails,
        notes=notes,
    )


def _tail_variance(sample, d, z, upper):
    """Empirical variance of Y in the (D=d, Z=z) cell restricted to its own
    upper (lower) decile, times the squared conditional treatment share."""
    arm = sample.z == z
    cell = (sample.d == d) & arm
    n_arm = int(np.count_nonzero(arm))
    n_cell = int(np.count_nonzero(cell))
    if n_arm == 0 or n_cell < 2:
        return 0.0
    ys = sample.y[cell]
    cut = np.quantile(ys, 0.9 if upper else 0.1)
    tail = ys[ys >= cut] if upper else ys[ys <= cut]
    if tail.size < 2:
        return 0.0
    share = n_cell / n_arm
    return float(np.var(tail, ddof=1)) * share ** 2


def _tail_flag(sample, d, upper):
    """Tail set present iff the own-arm weighted tail variance dominates."""
    own = _tail_variance(sample, d=d, z=d, upper=upper)
    other = _tail_variance(sample, d=d, z=1 - d, upper=upper)
    return own >= other


def load_sample_csv(path) -> Sample:
    """Read a `y,d,z` CSV into a Sample, with per-row validation."""
    ys, ds, zs = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty")
        if [c.strip().lower() for c in header] != ["y", "d", "z"]:
            raise DataError(f"{path}: expected header 'y,d,z', got {header!r}")
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DataError(f"{path}, row {i}: expected 3 columns, got {len(row)}")
            try:
                y = float(row[0])
            except ValueError:
                raise DataError(f"{path}, row {i}: non-numeric outcome {row[0]!r}")
            d, z = row[1].strip(), row[2].strip()
            if d not in ("0", "1"):
                raise DataError(f"{path}, row {i}: treatment must be 0 or 1, got {d!r}")
            if z not in ("0", "1"):
                raise DataError(f"{path}, row {i}: instrument must be 0 or 1, got {z!r}")
            ys.append(y)
            ds.append(int(d))
            zs.append(int(z))
    if not ys:
        raise DataError(f"{path}: no data rows")
    try:
        return Sample(np.array(ys), np.array(ds), np.array(zs))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_intervals_csv(path):
    """Read a `y_l,y_u` CSV into a pair of arrays, with validation."""
    lows, highs = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty")
        if [c.strip().lower() for c in header] != ["y_l", "y_u"]:
            raise DataError(f"{path}: expected header 'y_l,y_u', got {header!r}")
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}, row {i}: expected 2 columns, got {len(row)}")
            try:
                lo, hi = float(row[0]), float(row[1])
            except ValueError:
                raise DataError(f"{path}, row {i}: non-numeric cell")
            if lo > hi:
                raise DataError(f"{path}, row {i}: y_l > y_u")
            lows.append(lo)
            highs.append(hi)
    if not lows:
        raise DataError(f"{path}: no data rows")
    return np.array(lows), np.array(highs)
