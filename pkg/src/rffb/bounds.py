"""Closed-form error-probability bounds for Gaussian-kernel RFF.

Upper bounds (the dimension-free form and three prior-work forms),
the two-point lower bounds, the expected-supremum bound and the feature-count
and epsilon inversions built on them. Bounds are returned unclipped.
"""

import math
from dataclasses import dataclass

from .errors import DomainError, InvalidArgument, PreconditionError
from .special import gamma_fn, lambert_w0

LOG_27_OVER_4 = math.log(27.0 / 4.0)


@dataclass(frozen=True)
class BoundQuery:
    """Parameters of a bound evaluation.

    ``sigma_p`` defaults to ``sqrt(d)``, the value of ``E|omega|^2`` under
    ``N(0, I_d)``. ``D = 0`` is accepted so prior-work prefactors can be read
    off directly.
    """

    R: float
    D: int
    epsilon: float
    d: int = 1
    delta: float = 0.05
    tau: float = 0.0
    sigma_p: float = None

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidArgument(f"R must be positive, got {self.R!r}")
        if int(self.D) != self.D or self.D < 0:
            raise InvalidArgument(f"D must be a nonnegative integer, got {self.D!r}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidArgument(f"d must be a positive integer, got {self.d!r}")
        if not self.epsilon > 0:
            raise InvalidArgument(f"epsilon must be positive, got {self.epsilon!r}")
        if not 0 < self.delta < 1:
            raise InvalidArgument(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.tau >= 0:
            raise InvalidArgument(f"tau must be nonnegative, got {self.tau!r}")
        object.__setattr__(self, "D", int(self.D))
        object.__setattr__(self, "d", int(self.d))
        if self.sigma_p is None:
            object.__setattr__(self, "sigma_p", math.sqrt(self.d))
        elif not self.sigma_p >= 0:
            raise InvalidArgument(f"sigma_p must be nonnegative, got {self.sigma_p!r}")


# --- dimension-free upper bound -------------------------------------------

def log_thm1(R, D, epsilon):
    """Natural log of the dimension-free bound; finite where the value underflows."""
    if D == 0:
        return math.inf
    return (math.log(3.0) + (2.0 / 3.0) * math.log(R) - math.log(D) / 3.0
            - (2.0 / 3.0) * math.log(epsilon) - D * epsilon * epsilon / 12.0)


def thm1(R, D, epsilon):
    """``3 R^(2/3) / (D^(1/3) eps^(2/3)) * exp(-D eps^2 / 12)``."""
    if D == 0:
        return math.inf
    return 3.0 * (R * R / (D * epsilon * epsilon)) ** (1.0 / 3.0) * math.exp(-D * epsilon * epsilon / 12.0)


def bound_thm1(q):
    return thm1(q.R, q.D, q.epsilon)


@dataclass(frozen=True)
class BoundDiagnostics:
    """The segment count ``T`` minimizing the two-term union bound, and the terms."""

    optimal_T: float
    term_variance: float
    term_hoeffding: float

    @property
    def total(self):
        return self.term_variance + self.term_hoeffding


def two_term_bound(R, D, epsilon, T):
    """Markov term on the Lipschitz constant plus Hoeffding over ``T`` centers."""
    x = D * epsilon * epsilon
    return R * R / (T * T * x) + 2.0 * T * math.exp(-x / 8.0)


def thm1_diagnostics(q):
    x = q.D * q.epsilon * q.epsilon
    T = (q.R * q.R / x) ** (1.0 / 3.0) * math.exp(x / 24.0)
    return BoundDiagnostics(
        optimal_T=T,
        term_variance=q.R * q.R / (T * T * x),
        term_hoeffding=2.0 * T * math.exp(-x / 8.0),
    )


def epsilon_at_confidence_thm1(R, D, tau):
    """Error level reached with probability at least ``1 - exp(-tau)``.

    Only conservative when ``D * eps^2 >= 4/e``: at the returned epsilon the
    bound equals ``(4 / (D eps^2))^(1/3) * exp(-1/3) * exp(-tau)``.
    """
    if not R > 0 or D < 1 or not tau >= 0:
        raise InvalidArgument(f"need R > 0, D >= 1, tau >= 0; got R={R!r}, D={D!r}, tau={tau!r}")
    radicand = 8.0 * math.log(R) + 12.0 * tau + 4.0 * LOG_27_OVER_4 + 4.0
    if radicand < 0:
        raise DomainError(f"negative radicand {radicand!r} (R={R!r} is too small)")
    return math.sqrt(radicand) / math.sqrt(D)


def epsilon_at_confidence_sriperumbudur(R, D, tau, d=1, sigma_p=None):
    """Sriperumbudur-Szabo error level at confidence ``1 - exp(-tau)``."""
    if sigma_p is None:
        sigma_p = math.sqrt(d)
    log_r = math.log(2.0 * R + 1.0)
    num = (math.sqrt(2048.0 * d * log_r)
           + math.sqrt(2048.0 * d * math.log(sigma_p + 1.0))
           + math.sqrt(512.0 * d / log_r)
           + math.sqrt(2.0 * tau))
    return num / math.sqrt(D)


# --- prior-work upper bounds -----------------------------------------------

def _log_prior(q, prefactor, rate):
    scale = q.sigma_p * q.R / q.epsilon
    if scale == 0:
        return -math.inf
    return math.log(prefactor) + 2.0 * math.log(scale) - q.D * q.epsilon ** 2 / (rate * (q.d + 2))


def bound_rahimi(q):
    """``256 (sigma_p R / eps)^2 exp(-D eps^2 / (4 (d + 2)))``."""
    return 256.0 * (q.sigma_p * q.R / q.epsilon) ** 2 * math.exp(-q.D * q.epsilon ** 2 / (4.0 * (q.d + 2)))


def bound_sutherland(q):
    """``66 (sigma_p R / eps)^2 exp(-D eps^2 / (8 (d + 2)))``.

    ``D`` is taken literally. Sutherland-Schneider count the sin and cos of a
    frequency as two features, so with ``D`` frequencies their own statement
    corresponds to ``D_here = 2 D``.
    """
    return 66.0 * (q.sigma_p * q.R / q.epsilon) ** 2 * math.exp(-q.D * q.epsilon ** 2 / (8.0 * (q.d + 2)))


@dataclass(frozen=True)
class LogValue:
    log_value: float
    value: float


def bound_sriperumbudur(q):
    """``((sigma_p + 1)(2R + 1))^(1024 d) exp(-D eps^2 / 2 + 256 d / log(2R + 1))``.

    Evaluated in log space; ``value`` is ``inf`` when it overflows.
    """
    log_r = math.log(2.0 * q.R + 1.0)
    if not log_r > 0:
        raise DomainError(f"need log(2R + 1) > 0, got R={q.R!r}")
    lv = (1024.0 * q.d * (math.log(q.sigma_p + 1.0) + log_r)
          - q.D * q.epsilon ** 2 / 2.0 + 256.0 * q.d / log_r)
    return LogValue(lv, math.exp(lv) if lv < 709.0 else math.inf)


# --- two-point lower bounds ------------------------------------------------

@dataclass(frozen=True)
class LeCamConstants:
    """``gamma = -W(-e^-2)``, ``R*`` and the maximizing pair for a domain radius.

    ``delta2_norm = min(R, R*)`` and ``delta1_norm = sqrt(gamma) * delta2_norm``.
    """

    gamma: float
    r_star: float
    delta1_norm: float
    delta2_norm: float

    @property
    def rho(self):
        return (self.delta1_norm / self.delta2_norm) ** 2


GAMMA = -lambert_w0(-math.exp(-2.0))
R_STAR = math.sqrt(-2.0 / (1.0 - GAMMA) * math.log(GAMMA))


def lecam_constants(R=math.inf):
    r2 = min(float(R), R_STAR)
    if not r2 > 0:
        raise InvalidArgument(f"R must be positive, got {R!r}")
    return LeCamConstants(GAMMA, R_STAR, math.sqrt(GAMMA) * r2, r2)


def g_of_R(R):
    """Kernel gap of the maximizing pair; constant for ``R >= R*``."""
    if not R > 0:
        raise InvalidArgument(f"R must be positive, got {R!r}")
    r = min(float(R), R_STAR)
    return math.exp(-GAMMA * r * r / 2.0) - math.exp(-r * r / 2.0)


def lower_bound_expected(R, D):
    """Minimax floor on the expected error: ``g(R) / 8 * exp(-D / 2)``."""
    return g_of_R(R) / 8.0 * math.exp(-D / 2.0)


def lower_bound_probability(R, D, epsilon):
    """Minimax floor on the error probability: ``(g(R) - eps) / 8 * exp(-D / 2)``.

    Requires ``g(R) >= 3 eps``.
    """
    g = g_of_R(R)
    if not g >= 3.0 * epsilon:
        raise PreconditionError(
            f"need g(R) >= 3*epsilon, i.e. epsilon <= {g / 3.0!r} for R={R!r}; got epsilon={epsilon!r}"
        )
    return (g - epsilon) / 8.0 * math.exp(-D / 2.0)


def lower_bound_probability_proof_chain(R, D, epsilon):
    """The same floor with the 1/48 constant the derivation actually reaches."""
    return max(0.0, g_of_R(R) - epsilon) / 48.0 * math.exp(-D / 2.0)


def kl_scaled_isotropic(rho, D):
    """``KL(N(0, s1 I_D) || N(0, s2 I_D))`` for variance ratio ``rho = s1 / s2``."""
    if not rho > 0:
        raise InvalidArgument(f"rho must be positive, got {rho!r}")
    return D / 2.0 * (rho - math.log(rho) - 1.0)


# --- expected supremum -----------------------------------------------------

EXPECTED_SUP_CONSTANT = 3.0 ** (1.0 / 6.0) * gamma_fn(1.0 / 6.0) / 2.0 ** (2.0 / 3.0)


def expected_sup_bound(R, D):
    """``3^(1/6) Gamma(1/6) R^(2/3) / (2^(2/3) sqrt(D))``."""
    return EXPECTED_SUP_CONSTANT * R ** (2.0 / 3.0) / math.sqrt(D)


# --- inversions and downstream budgets -------------------------------------

def _within(R, D, epsilon, delta):
    # linear comparison matches what callers evaluate; log form once it underflows
    v = thm1(R, D, epsilon)
    if v > 0.0:
        return v <= delta
    return log_thm1(R, D, epsilon) <= math.log(delta)


def invert_bound_for_D(R, epsilon, delta):
    """Smallest ``D`` with ``thm1(R, D, epsilon) <= delta``."""
    if not (R > 0 and epsilon > 0 and 0 < delta < 1):
        raise InvalidArgument(f"need R > 0, epsilon > 0, 0 < delta < 1; got {R!r}, {epsilon!r}, {delta!r}")
    if _within(R, 1, epsilon, delta):
        return 1
    lo, hi = 1, 2
    while not _within(R, hi, epsilon, delta):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _within(R, mid, epsilon, delta):
            hi = mid
        else:
            lo = mid
    return hi


def krr_threshold(lam, m, epsilon):
    """Kernel-error level that keeps the KRR prediction error below ``epsilon``."""
    return lam * lam * epsilon / ((lam + 1.0) * m)


def krr_required_features(lam, m, epsilon, delta, R):
    if not (lam > 0 and m > 0 and epsilon > 0):
        raise InvalidArgument(f"need lambda, m, epsilon > 0; got {lam!r}, {m!r}, {epsilon!r}")
    return invert_bound_for_D(R, krr_threshold(lam, m, epsilon), delta)


def svm_error_propagation(C0, n, epsilon):
    """``sqrt(2) C0 (n + sqrt n)^(1/4) eps^(1/4) + C0 (n + sqrt n)^(1/2) eps^(1/2)``."""
    if not epsilon >= 0:
        raise InvalidArgument(f"epsilon must be nonnegative, got {epsilon!r}")
    a = n + math.sqrt(n)
    return math.sqrt(2.0) * C0 * (a * epsilon) ** 0.25 + C0 * math.sqrt(a * epsilon)


def epsilon_for_bound(R, D, delta):
    """Smallest ``epsilon`` with ``thm1(R, D, epsilon) <= delta``, to 1e-13 relative."""
    if not (R > 0 and D >= 1 and 0 < delta < 1):
        raise InvalidArgument(f"need R > 0, D >= 1, 0 < delta < 1; got {R!r}, {D!r}, {delta!r}")
    hi = 1.0
    while not _within(R, D, hi, delta):
        hi *= 2.0
    lo = hi / 2.0
    while _within(R, D, lo, delta):
        lo /= 2.0
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if _within(R, D, mid, delta):
            hi = mid
        else:
            lo = mid
    return hi


def svm_epsilon_budget(R, D, delta):
    """Kernel accuracy guaranteed with probability ``1 - delta`` by ``D`` features."""
    return epsilon_for_bound(R, D, delta)


def svm_epsilon_theta_form(R, D, delta):
    """``sqrt(W(R^2 / delta^3) / D)``: the order-of-magnitude form, constant 1."""
    return math.sqrt(lambert_w0(R * R / delta ** 3) / D)


# --- comparison table ------------------------------------------------------

@dataclass(frozen=True)
class BoundRow:
    name: str
    side: str  # "upper" or "lower"
    value: float
    log_value: float


def _log(v):
    return math.log(v) if v > 0 else -math.inf


def compare_bounds(q):
    """All upper bounds plus the lower bounds that apply at ``q``.

    The probability floor is omitted when ``g(R) < 3 epsilon``.
    """
    rows = [
        BoundRow("thm1", "upper", bound_thm1(q), log_thm1(q.R, q.D, q.epsilon)),
    ]
    rows.append(BoundRow("rahimi", "upper", bound_rahimi(q), _log_prior(q, 256.0, 4.0)))
    rows.append(BoundRow("sutherland", "upper", bound_sutherland(q), _log_prior(q, 66.0, 8.0)))
    s = bound_sriperumbudur(q)
    rows.append(BoundRow("sriperumbudur", "upper", s.value, s.log_value))
    le = lower_bound_expected(q.R, q.D)
    rows.append(BoundRow("lower_expected", "lower", le, _log(le)))
    if g_of_R(q.R) >= 3.0 * q.epsilon:
        lp = lower_bound_probability(q.R, q.D, q.epsilon)
        rows.append(BoundRow("lower_prob", "lower", lp, _log(lp)))
    return rows


def tightest_upper(rows):
    """Name of the smallest upper bound, compared in log space."""
    upper = [r for r in rows if r.side == "upper"]
    return min(upper, key=lambda r: r.log_value).name
