"""Conditional failure-probability curves from failure samples.

The Bayes identity pf(x) = f(x | F) / f(x) * pf turns the marginal
failure-sample density into the conditional failure probability, so the
whole curve is a post-processing step: no further model evaluations.

The conditional density comes from a Gaussian kernel density estimate.
By default samples are mapped through z = Phi^{-1}(F(x)) first and the
density is carried back with the change-of-variables Jacobian, which
keeps kernel mass inside bounded supports; ``identity`` fits in physical
space instead.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import special
from .errors import CurvePointWarning, DegenerateSampleError, DomainError

TRANSFORM_STANDARD_NORMAL = "marginal-standard-normal"
TRANSFORM_IDENTITY = "identity"

DENSITY_FLOOR = 1e-300
KDE_CHUNK = 512


def silverman_bandwidth(values):
    """1.06 min(sd, iqr/1.34) n^(-1/5)."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    sd = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75.0, 25.0])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0.0:
        raise DegenerateSampleError("sample has zero spread")
    return 1.06 * spread * n ** (-0.2)


@dataclass(frozen=True)
class KdeModel:
    """Gaussian KDE of failure-sample values for one input."""

    points: np.ndarray = field(repr=False)
    bandwidth: float
    transform: str
    marginal: object

    def density_transformed(self, t):
        """Density in the fitting space (z or x depending on transform)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        h = self.bandwidth
        norm = len(self.points) * h * math.sqrt(2.0 * math.pi)
        with np.errstate(under="ignore"):
            for start in range(0, len(t), KDE_CHUNK):
                block = t[start:start + KDE_CHUNK, None]
                d = (block - self.points[None, :]) / h
                out[start:start + KDE_CHUNK] = np.exp(-0.5 * d * d).sum(axis=1) / norm
        return out

    def density_physical(self, x):
        """Estimated conditional density of the input itself."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.transform == TRANSFORM_IDENTITY:
            return self.density_transformed(x)
        lo, hi = self.marginal.support
        inside = (x > lo) & (x < hi)
        out = np.zeros_like(x)
        if inside.any():
            z = self.marginal.to_standard_normal(x[inside])
            jac = self.marginal.pdf(x[inside]) / special.std_normal_pdf(z)
            out[inside] = self.density_transformed(z) * jac
        return out


def kde_fit(values, marginal, transform=TRANSFORM_STANDARD_NORMAL):
    """Fit the conditional-density KDE for one input's failure values."""
    values = np.asarray(values, dtype=float)
    if len(values) < 20:
        raise DomainError("need at least 20 failure values for a density fit")
    if transform == TRANSFORM_STANDARD_NORMAL:
        pts = np.asarray(marginal.to_standard_normal(values), dtype=float)
    elif transform == TRANSFORM_IDENTITY:
        pts = values.copy()
    else:
        raise DomainError(f"unknown transform mode {transform!r}")
    return KdeModel(points=pts, bandwidth=silverman_bandwidth(pts),
                    transform=transform, marginal=marginal)


@dataclass(frozen=True)
class ConditionalPfCurve:
    """pf(x_i) on a grid, with the densities that produced it."""

    input_index: int
    grid: np.ndarray
    pf_values: np.ndarray
    source: str                      # analytic | form | kde
    pf_uncond: float
    density_prior: np.ndarray = field(repr=False, default=None)
    density_conditional: np.ndarray = field(repr=False, default=None)
    clip_fraction: float = 0.0
    n_failure_samples: int = 0
    ess: float = float("nan")

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if np.any(np.diff(g) <= 0.0):
            raise DomainError("curve grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "pf_values",
                           np.asarray(self.pf_values, dtype=float))


def default_grid(marginal, n=512, p_lo=1e-6, p_hi=None):
    """Uniform grid spanning the [p_lo, 1-p_lo] quantile range."""
    if p_hi is None:
        p_hi = 1.0 - p_lo
    return np.linspace(marginal.inv_cdf(p_lo), marginal.inv_cdf(p_hi), n)


def effective_sample_size(values):
    """Autocorrelation-based ESS; equals n for independent input."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    v = v - v.mean()
    var = float(v @ v) / n
    if var <= 0.0:
        return float(n)
    s = 0.0
    for lag in range(1, min(n - 1, 200)):
        rho = float(v[:-lag] @ v[lag:]) / ((n - lag) * var)
        if rho <= 0.05:
            break
        s += rho
    return n / (1.0 + 2.0 * s)


def conditional_pf_from_failure_samples(marginal, i, failure_values, pf_hat,
                                        grid=None,
                                        transform=TRANSFORM_STANDARD_NORMAL):
    """Estimate pf(x_i) on a grid from one input's failure-sample values.

    Values are clipped to [0, 1]; the clipped fraction is recorded on the
    curve. Grid points where the prior density underflows are dropped
    with a warning (identity mode only; the transformed fit cannot leak
    mass outside the support).
    """
    if not 0.0 < pf_hat < 1.0:
        raise DomainError("pf_hat must lie in (0, 1)")
    if grid is None:
        grid = default_grid(marginal)
    grid = np.asarray(grid, dtype=float)
    model = kde_fit(failure_values, marginal, transform)

    prior = np.asarray(marginal.pdf(grid), dtype=float)
    keep = prior > DENSITY_FLOOR
    if not keep.all():
        warnings.warn(
            f"input {i}: dropped {int(np.count_nonzero(~keep))} grid point(s) "
            "with underflowing prior density", CurvePointWarning, stacklevel=2)
        grid = grid[keep]
        prior = prior[keep]

    if transform == TRANSFORM_STANDARD_NORMAL:
        # ratio f(x|F)/f(x) collapses to f_Z(z)/phi(z): one KDE pass, no Jacobian
        z = np.asarray(marginal.to_standard_normal(grid), dtype=float)
        cond_z = model.density_transformed(z)
        raw = pf_hat * cond_z / special.std_normal_pdf(z)
        cond = cond_z * prior / special.std_normal_pdf(z)
    else:
        cond = model.density_transformed(grid)
        raw = pf_hat * cond / prior

    pf = np.clip(raw, 0.0, 1.0)
    clip_fraction = float(np.mean(raw > 1.0))
    return ConditionalPfCurve(
        input_index=i, grid=grid, pf_values=pf, source="kde",
        pf_uncond=float(pf_hat), density_prior=prior,
        density_conditional=cond, clip_fraction=clip_fraction,
        n_failure_samples=len(np.asarray(failure_values)),
        ess=effective_sample_size(failure_values))


def curve_from_function(marginal, i, pf_of_x, pf_uncond, grid=None,
                        source="analytic"):
    """Wrap a vectorized pf(x_i) callable as a curve on the default grid."""
    if grid is None:
        grid = default_grid(marginal)
    grid = np.asarray(grid, dtype=float)
    return ConditionalPfCurve(
        input_index=i, grid=grid,
        pf_values=np.asarray(pf_of_x(grid), dtype=float), source=source,
        pf_uncond=float(pf_uncond),
        density_prior=np.asarray(marginal.pdf(grid), dtype=float))


def write_curve_csv(path, curve):
    """CSV export: x, pf, density_prior, density_conditional."""
    prior = (curve.density_prior if curve.density_prior is not None
             else np.full_like(curve.grid, np.nan))
    cond = (curve.density_conditional if curve.density_conditional is not None
            else np.full_like(curve.grid, np.nan))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "pf", "density_prior", "density_conditional"])
        for xv, pv, dp, dc in zip(curve.grid, curve.pf_values, prior, cond):
            writer.writerow([repr(float(xv)), repr(float(pv)),
                             repr(float(dp)), repr(float(dc))])
