"""Binary-outcome self-selection model with an encouragement instrument.

Agents observe both potential outcomes and, absent encouragement, pick the
better one; encouragement (Z=1) may distort choices, and the minimal total
probability of strictly inefficient choices consistent with the data is a
point-identified efficiency-loss measure.  The joint distribution of
(potential outcomes, choice, instrument) lives in a polyhedron of 16 cell
masses; sharp bounds on Pr(Y(1)=1 | Z=z) come out of linear programs over
that polyhedron and admit closed forms.

Cell masses are C[d, y, k, z] = Pr(Y(1)=y, Y(0)=k, D=d, Z=z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InternalConsistencyError
from .simplex import InfeasibleError, solve_lp

_ATOL = 1e-9


def _cell_index(d, y, k, z):
    """Flat position of C[d, y, k, z] in the 16-vector (C-contiguous)."""
    return int(np.ravel_multi_index((d, y, k, z), (2, 2, 2, 2)))


@dataclass(frozen=True)
class RoyDistribution:
    """Observed joint distribution of (Y, D, Z), all binary.

    ``p[y, d, z]`` is Pr(Y=y, D=d, Z=z); entries are nonnegative and sum to
    one, and both instrument arms must have positive probability.
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2, 2):
            raise DataError("p must have shape (2, 2, 2) indexed [y, d, z]")
        if (p < -_ATOL).any():
            raise DataError("cell probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-8:
            raise DataError("cell probabilities must sum to one")
        object.__setattr__(self, "p", np.clip(p, 0.0, None))
        if self.pr_z(0) <= 0 or self.pr_z(1) <= 0:
            raise DataError("both instrument arms need positive probability")

    @classmethod
    def from_sample(cls, y, d, z):
        """Empirical cell frequencies from binary data vectors."""
        y = np.asarray(y, dtype=int)
        d = np.asarray(d, dtype=int)
        z = np.asarray(z, dtype=int)
        if y.shape != d.shape or y.shape != z.shape or y.ndim != 1 or y.size == 0:
            raise DataError("y, d, z must be equal-length nonempty vectors")
        for name, v in (("y", y), ("d", d), ("z", z)):
            if not np.isin(v, (0, 1)).all():
                raise DataError(f"{name} must be binary")
        p = np.zeros((2, 2, 2))
        np.add.at(p, (y, d, z), 1.0)
        return cls(p / y.size)

    def pr_z(self, z):
        return float(self.p[:, :, z].sum())

    def pr_y_given_z(self, y, z):
        return float(self.p[y, :, z].sum()) / self.pr_z(z)

    def to_jsonable(self):
        return {
            f"pr_y{y}_d{d}_z{z}": float(self.p[y, d, z])
            for y in (0, 1) for d in (0, 1) for z in (0, 1)
        }


def check_roy_refutable(dist: RoyDistribution):
    """Test whether the data refute fully efficient selection.

    Efficient selection forces the fraction of zero outcomes not to rise
    under encouragement, so the model is refuted exactly when
    Pr(Y=0 | Z=1) > Pr(Y=0 | Z=0).  Returns a dict with the verdict and the
    slack Pr(Y=0|Z=0) - Pr(Y=0|Z=1) (negative means refuted).
    """
    slack = dist.pr_y_given_z(0, 0) - dist.pr_y_given_z(0, 1)
    return {"refuted": bool(slack < 0), "slack": float(slack)}


def min_efficiency_loss(dist: RoyDistribution):
    """Smallest total probability of strictly inefficient choices
    compatible with the observed distribution (joint scale, i.e. a mass of
    (Y, D, Z) cells, not conditional on Z=1)."""
    pz1, pz0 = dist.pr_z(1), dist.pr_z(0)
    py0z1 = float(dist.p[0, :, 1].sum())
    py0z0 = float(dist.p[0, :, 0].sum())
    return max(0.0, py0z1 - py0z0 * pz1 / pz0)


def build_polyhedron(dist: RoyDistribution):
    """Constraint system over the 16 cell masses C[d, y, k, z].

    Returns ``(A_eq, b_eq, A_ub, b_ub)`` encoding: matching of each observed
    (Y, D, Z) cell; efficiency at Z=0 (no strictly dominated choice has
    mass); the minimal-loss equality at Z=1; and the two stochastic
    dominance comparisons of best and worst potential outcomes across
    instrument arms.  Nonnegativity is implicit in the LP solver.
    """
    pz1, pz0 = dist.pr_z(1), dist.pr_z(0)
    A_eq, b_eq = [], []

    def row(entries):
        a = np.zeros(16)
        for pos, coef in entries:
            a[pos] += coef
        return a

    # observational matching: the chosen potential outcome equals Y
    for z in (0, 1):
        for yobs in (0, 1):
            A_eq.append(row([(_cell_index(1, yobs, k, z), 1.0) for k in (0, 1)]))
            b_eq.append(float(dist.p[yobs, 1, z]))
            A_eq.append(row([(_cell_index(0, y, yobs, z), 1.0) for y in (0, 1)]))
            b_eq.append(float(dist.p[yobs, 0, z]))

    # no inefficient choice without encouragement
    A_eq.append(row([(_cell_index(1, 0, 1, 0), 1.0)]))
    b_eq.append(0.0)
    A_eq.append(row([(_cell_index(0, 1, 0, 0), 1.0)]))
    b_eq.append(0.0)

    # encouragement induces exactly the minimal inefficient mass
    A_eq.append(row([(_cell_index(0, 1, 0, 1), 1.0),
                     (_cell_index(1, 0, 1, 1), 1.0)]))
    b_eq.append(min_efficiency_loss(dist))

    A_ub, b_ub = [], []
    # best outcome no more likely without encouragement
    A_ub.append(row([(_cell_index(d, 1, 1, 0), 1.0 / pz0) for d in (0, 1)]
                    + [(_cell_index(d, 1, 1, 1), -1.0 / pz1) for d in (0, 1)]))
    b_ub.append(0.0)
    # worst outcome no more likely with encouragement
    A_ub.append(row([(_cell_index(d, 0, 0, 1), 1.0 / pz1) for d in (0, 1)]
                    + [(_cell_index(d, 0, 0, 0), -1.0 / pz0) for d in (0, 1)]))
    b_ub.append(0.0)

    return np.array(A_eq), np.array(b_eq), np.array(A_ub), np.array(b_ub)


def optimize_functional(dist: RoyDistribution, c, sense="min"):
    """Optimise a linear functional ``c @ C`` of the 16 cell masses over the
    model polyhedron.  Returns ``(value, C)`` with C shaped (2, 2, 2, 2)."""
    c = np.asarray(c, dtype=float)
    if c.shape != (16,) and c.shape != (2, 2, 2, 2):
        raise DataError("c must have 16 entries")
    c = c.reshape(16)
    if sense not in ("min", "max"):
        raise DataError("sense must be 'min' or 'max'")
    A_eq, b_eq, A_ub, b_ub = build_polyhedron(dist)
    sgn = 1.0 if sense == "min" else -1.0
    value, x = solve_lp(sgn * c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
    return sgn * value, x.reshape(2, 2, 2, 2)


def _objective_vector(z):
    """Coefficients of Pr(Y(1)=1, Z=z) as a functional of the cell masses."""
    c = np.zeros(16)
    for d in (0, 1):
        for k in (0, 1):
            c[_cell_index(d, 1, k, z)] = 1.0
    return c


def _closed_form_bounds(dist: RoyDistribution):
    p = dist.p
    pz1, pz0 = dist.pr_z(1), dist.pr_z(0)
    m_el = min_efficiency_loss(dist)
    l0 = float(p[1, 1, 0]) / pz0
    u0 = (float(p[1, 1, 0]) + min(float(p[1, 0, 0]),
                                  pz0 / pz1 * float(p[1, :, 1].sum()))) / pz0
    l1 = (float(p[1, 1, 1]) + max(0.0, m_el - float(p[0, 1, 1]))) / pz1
    u1 = (float(p[1, :, 1].sum()) + m_el) / pz1
    return {0: (l0, u0), 1: (l1, u1)}


def potential_outcome_bounds(dist: RoyDistribution, verify=True):
    """Sharp bounds on Pr(Y(1)=1 | Z=z) for z in {0, 1}.

    Closed-form expressions are evaluated and, when ``verify`` is set,
    cross-checked against the linear programs over the model polyhedron;
    a discrepancy beyond 1e-9 raises :class:`InternalConsistencyError`.
    Returns ``{"z0": (lo, hi), "z1": (lo, hi), "min_efficiency_loss": m}``.
    """
    closed = _closed_form_bounds(dist)
    if verify:
        for z in (0, 1):
            c = _objective_vector(z)
            pz = dist.pr_z(z)
            try:
                lo_lp, _ = optimize_functional(dist, c, "min")
                hi_lp, _ = optimize_functional(dist, c, "max")
            except InfeasibleError as exc:
                raise InternalConsistencyError(
                    "model polyhedron unexpectedly empty") from exc
            lo_lp /= pz
            hi_lp /= pz
            lo_cf, hi_cf = closed[z]
            if abs(lo_lp - lo_cf) > _ATOL or abs(hi_lp - hi_cf) > _ATOL:
                raise InternalConsistencyError(
                    f"closed-form bounds for z={z} disagree with the linear "
                    f"program: ({lo_cf:.12f}, {hi_cf:.12f}) vs "
                    f"({lo_lp:.12f}, {hi_lp:.12f})")
    return {
        "z0": closed[0],
        "z1": closed[1],
        "min_efficiency_loss": min_efficiency_loss(dist),
    }
