"""Monte Carlo checks of the analytic bounds.

Sup-error trials each draw from their own stream ``(seed, i)``; the cheaper
small-``D`` experiments share one stream per block of ``CHUNK`` trials (see
:func:`trial_normals`). Work is split into fixed-size chunks whose results
are concatenated in trial order, so outputs are identical for any number of
worker processes.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import bounds
from ._parallel import parallel_map
from .core import (
    certified_sup_error,
    default_grid_points,
    gaussian_kernel,
    standard_normal,
)
from .errors import DomainError, InvalidArgument, PreconditionError
from .special import reg_lower_inc_gamma, reg_upper_inc_gamma

CHUNK = 500
Z95 = 1.959963984540054
# E|alpha| + max|k'| for alpha ~ N(0, 1); sizes grids for a target pad
TYPICAL_LIPSCHITZ = math.sqrt(2.0 / math.pi) + math.exp(-0.5)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    sup_value: float
    exceeded: bool


@dataclass(frozen=True)
class ProbabilityEstimate:
    trials: int
    failures: int
    p_hat: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float


def wilson_interval(failures, trials, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= failures <= trials:
        raise InvalidArgument(f"need 0 <= failures <= trials, trials >= 1; got {failures}, {trials}")
    p = failures / trials
    z2 = z * z
    centre = (p + z2 / (2 * trials)) / (1 + z2 / trials)
    half = z / (1 + z2 / trials) * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    return max(0.0, centre - half), min(1.0, centre + half)


def proportion(failures, trials):
    lo, hi = wilson_interval(failures, trials)
    p = failures / trials
    return ProbabilityEstimate(trials, failures, p, min(lo, p), max(hi, p))


def _chunks(trials):
    return [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]


def trial_normals(seed, start, stop, size):
    """Rows ``start..stop-1`` of ``size`` normals each, for small-``size`` trials.

    Trial ``i`` is row ``i % CHUNK`` of stream ``i // CHUNK``, one generator
    per block instead of per trial. The draws of a trial depend only on
    ``(seed, i)``.
    """
    out = np.empty((stop - start, size))
    i = start
    while i < stop:
        block, offset = divmod(i, CHUNK)
        take = min(CHUNK - offset, stop - i)
        draws = standard_normal(seed, block, (offset + take) * size)
        out[i - start:i - start + take] = draws[offset * size:].reshape(take, size)
        i += take
    return out


def mc_grid_points(R, epsilon, pad_fraction=0.25):
    """Grid size whose Lipschitz pad is about ``pad_fraction * epsilon``.

    Never more than the library default for ``R``.
    """
    step = 2.0 * pad_fraction * epsilon / TYPICAL_LIPSCHITZ
    return int(min(default_grid_points(R), max(2, math.ceil(R / step) + 1)))


def _sup_chunk(R, D, grid_points, seed, start, stop):
    return np.array([
        certified_sup_error(standard_normal(seed, i, D), R, grid_points).sup_value
        for i in range(start, stop)
    ])


def certified_sups(R, D, trials, seed, grid_points=None, jobs=1):
    """Certified ``sup |f|`` of each trial, in trial order."""
    if trials < 1 or D < 1 or not R > 0:
        raise InvalidArgument(f"need R > 0, D >= 1, trials >= 1; got {R!r}, {D!r}, {trials!r}")
    if grid_points is None:
        grid_points = default_grid_points(R)
    parts = parallel_map(
        _sup_chunk, [(R, D, grid_points, seed, a, b) for a, b in _chunks(trials)], jobs
    )
    return np.concatenate(parts)


def trial_records(R, D, epsilon, trials, seed, grid_points=None, jobs=1):
    sups = certified_sups(R, D, trials, seed, grid_points, jobs)
    return [TrialRecord(i, seed, float(v), bool(v >= epsilon)) for i, v in enumerate(sups)]


def estimate_error_probability(R, D, epsilon, trials, seed, grid_points=None, jobs=1):
    """Fraction of trials whose certified sup error reaches ``epsilon``.

    The grid defaults to :func:`mc_grid_points`. Counting on the certified
    value can only over-count failures.
    """
    if not epsilon > 0:
        raise InvalidArgument(f"epsilon must be positive, got {epsilon!r}")
    if epsilon > 2.0:
        # |f| <= 2 everywhere
        return proportion(0, trials)
    if grid_points is None:
        grid_points = mc_grid_points(R, epsilon)
    sups = certified_sups(R, D, trials, seed, grid_points, jobs)
    return proportion(int(np.count_nonzero(sups >= epsilon)), trials)


def mean_and_stderr(values):
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, math.inf
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate_expected_sup(R, D, trials, seed, grid_points=None, jobs=1):
    """Sample mean and standard error of the certified sup error."""
    return mean_and_stderr(certified_sups(R, D, trials, seed, grid_points, jobs))


# --- Lipschitz variance ----------------------------------------------------

@dataclass(frozen=True)
class LipschitzCheck:
    max_variance: float
    argmax_r: float
    stderr: float
    cap: float

    @property
    def within_cap(self):
        return self.max_variance <= self.cap + 4.0 * self.stderr


def _derivative_chunk(D, r, seed, start, stop):
    a = trial_normals(seed, start, stop, D)
    # d/dr mean cos(alpha r) = -mean(alpha sin(alpha r)); rows = trials
    return np.stack([-(a * np.sin(a * ri)).mean(axis=1) for ri in r], axis=1)


def check_lipschitz_variance(D, R, r_grid, trials, seed, jobs=1):
    """Largest empirical ``Var[s'(r)]`` over ``r_grid`` radii in ``[0, R]``.

    The analytic cap is ``1/D``.
    """
    if D < 1 or r_grid < 2 or trials < 2:
        raise InvalidArgument(f"need D >= 1, r_grid >= 2, trials >= 2; got {D}, {r_grid}, {trials}")
    r = np.linspace(0.0, R, r_grid)
    parts = parallel_map(
        _derivative_chunk, [(D, r, seed, a, b) for a, b in _chunks(trials)], jobs
    )
    ds = np.concatenate(parts, axis=0)
    centred = ds - ds.mean(axis=0)
    var = (centred ** 2).sum(axis=0) / (trials - 1)
    m4 = (centred ** 4).mean(axis=0)
    j = int(np.argmax(var))
    se = math.sqrt(max(m4[j] - var[j] ** 2, 0.0) / trials)
    return LipschitzCheck(float(var[j]), float(r[j]), se, 1.0 / D)


# --- the parameter identity ------------------------------------------------

@dataclass(frozen=True)
class ParameterIdentity:
    estimate: float
    target: float
    pre_root_mean: float
    pre_root_target: float
    stderr: float


def parameter_identity(r, D, trials, seed):
    """Check ``(E cos(sum_i alpha_i))^(1/D) = exp(-r^2/2)`` for ``alpha_i ~ N(0, r^2)``.

    Restricted to ``D r^2 <= 8`` so the pre-root mean, ``exp(-D r^2 / 2)``,
    stays above the Monte Carlo noise floor.
    """
    if not r >= 0:
        raise InvalidArgument(f"r must be nonnegative, got {r!r}")
    if D * r * r > 8.0:
        raise PreconditionError(
            f"D*r^2 = {D * r * r!r} > 8: the target exp(-D r^2/2) = {math.exp(-D * r * r / 2):.3g} "
            "is below the Monte Carlo noise floor"
        )
    target = math.exp(-0.5 * r * r)
    pre_target = math.exp(-0.5 * D * r * r)
    vals = np.cos(r * trial_normals(seed, 0, trials, D).sum(axis=1))
    mean, se = mean_and_stderr(vals)
    est = mean ** (1.0 / D) if mean > 0 else math.nan
    return ParameterIdentity(est, target, mean, pre_target, se)


# --- two-point laboratory --------------------------------------------------

def _check_variances(s1, s2):
    if not (s1 > 0 and s2 > 0):
        raise DomainError(f"variances must be positive, got {s1!r}, {s2!r}")


def crossing_radius_sq(s1, s2, D):
    """Squared radius where the two centred isotropic densities are equal."""
    return D * math.log(s2 / s1) / (1.0 / s1 - 1.0 / s2)


def affinity_closed(sigma1_sq, sigma2_sq, D):
    """``int min(p1, p2)`` for ``N(0, s1 I_D)`` and ``N(0, s2 I_D)``.

    With ``s1 < s2`` the smaller density is ``p2`` inside the crossing sphere
    and ``p1`` outside, giving two chi-square probabilities.
    """
    s1, s2 = float(sigma1_sq), float(sigma2_sq)
    _check_variances(s1, s2)
    if s1 == s2:
        return 1.0
    if s1 > s2:
        s1, s2 = s2, s1
    c = crossing_radius_sq(s1, s2, D)
    return reg_lower_inc_gamma(D / 2.0, c / (2.0 * s2)) + reg_upper_inc_gamma(D / 2.0, c / (2.0 * s1))


def _log_ratio(sq_norm, s1, s2, D):
    # log p1(x) - log p2(x)
    return -0.5 * D * math.log(s1 / s2) - 0.5 * sq_norm * (1.0 / s1 - 1.0 / s2)


def _sq_norms(seed, index, n, D, scale_sq):
    x = standard_normal(seed, index, n * D).reshape(n, D)
    return scale_sq * (x * x).sum(axis=1)


def affinity_mc(sigma1_sq, sigma2_sq, D, samples, seed):
    """Importance estimate ``E_{P2}[min(1, p1/p2)]`` of the affinity."""
    s1, s2 = float(sigma1_sq), float(sigma2_sq)
    _check_variances(s1, s2)
    vals = np.minimum(1.0, np.exp(_log_ratio(_sq_norms(seed, 0, samples, D, s2), s1, s2, D)))
    return MCEstimate(*mean_and_stderr(vals))


def threshold_test_error(sigma1_sq, sigma2_sq, D, samples, seed, log_threshold=0.0):
    """Error sum ``P1(psi = 1) + P2(psi = 0)`` of a likelihood-ratio test.

    ``psi(x) = 1`` when ``log p1(x) - log p2(x) < log_threshold``; threshold
    0 is the Neyman-Pearson test. Samples for a given seed are shared across
    thresholds.
    """
    s1, s2 = float(sigma1_sq), float(sigma2_sq)
    _check_variances(s1, s2)
    lr1 = _log_ratio(_sq_norms(seed, 1, samples, D, s1), s1, s2, D)
    lr2 = _log_ratio(_sq_norms(seed, 2, samples, D, s2), s1, s2, D)
    p1 = np.count_nonzero(lr1 < log_threshold) / samples
    p2 = np.count_nonzero(lr2 >= log_threshold) / samples
    se = math.sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / samples)
    return MCEstimate(p1 + p2, se)


def neyman_pearson_error(sigma1_sq, sigma2_sq, D, samples, seed):
    return threshold_test_error(sigma1_sq, sigma2_sq, D, samples, seed, 0.0)


@dataclass(frozen=True)
class TwoPointPair:
    sigma1_sq: float
    sigma2_sq: float
    kl: float
    affinity: float
    k1: float
    k2: float


def two_point_pair(sigma1_sq, sigma2_sq, D):
    s1, s2 = float(sigma1_sq), float(sigma2_sq)
    _check_variances(s1, s2)
    return TwoPointPair(
        s1, s2,
        kl=bounds.kl_scaled_isotropic(s1 / s2, D),
        affinity=affinity_closed(s1, s2, D),
        k1=math.exp(-s1 / 2.0),
        k2=math.exp(-s2 / 2.0),
    )


@dataclass(frozen=True)
class LeCamReport:
    R: float
    D: int
    pair: TwoPointPair
    floor: float
    intermediate: float
    empirical: float
    stderr: float
    empirical_delta1: float
    stderr_delta1: float

    @property
    def passed(self):
        return self.floor <= self.empirical + 3.0 * self.stderr


def _abs_error_chunk(r, D, seed, start, stop):
    a = trial_normals(seed, start, stop, D)
    return np.abs(np.cos(a * r).mean(axis=1) - gaussian_kernel(r))


def expected_abs_error(r, D, trials, seed, jobs=1):
    """Mean and stderr of ``|s(r) - k(r)|`` for the cosine-mean estimator."""
    parts = parallel_map(_abs_error_chunk, [(r, D, seed, a, b) for a, b in _chunks(trials)], jobs)
    return mean_and_stderr(np.concatenate(parts))


def lecam_floor_experiment(R, D, trials, seed, jobs=1):
    """Two-point floor against the standard estimator's measured risk.

    The pair is the maximizing one for ``R``. ``intermediate`` is the Le Cam
    value before the KL step, ``|k1 - k2| / 4 * affinity``.
    """
    lc = bounds.lecam_constants(R)
    pair = two_point_pair(lc.delta1_norm ** 2, lc.delta2_norm ** 2, D)
    floor = bounds.lower_bound_expected(R, D)
    inter = abs(pair.k1 - pair.k2) / 4.0 * pair.affinity
    emp2, se2 = expected_abs_error(lc.delta2_norm, D, trials, seed, jobs)
    emp1, se1 = expected_abs_error(lc.delta1_norm, D, trials, seed ^ 0x5A5A5A5A, jobs)
    return LeCamReport(R, D, pair, floor, inter, emp2, se2, emp1, se1)
