"""Random Fourier features for the Gaussian kernel.

Frequency sampling, the cos/sin feature map, the kernel estimator and a
certified evaluation of the worst-case radial error on ``[0, R]``.

Randomness comes from Philox streams keyed by ``(seed, stream_index)``. The
draws of one stream do not depend on any other stream, so trial ``i`` of an
experiment produces the same numbers whether it runs first, last, serially
or in a worker process.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import InvalidArgument

try:
    import finufft
except ImportError:  # pragma: no cover - exercised only without the wheel
    finufft = None

UINT64_MASK = (1 << 64) - 1
_LIP_GAUSSIAN = math.exp(-0.5)  # max_r |d/dr exp(-r^2/2)|, attained at r = 1


def _check_uint64(seed, name="seed"):
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise InvalidArgument(f"{name} must be an integer, got {seed!r}")
    seed = int(seed)
    if seed < 0 or seed > UINT64_MASK:
        raise InvalidArgument(f"{name} must fit in 64 unsigned bits, got {seed}")
    return seed


def stream(seed, index=0):
    """Independent generator for stream ``index`` under master ``seed``."""
    seed = _check_uint64(seed)
    index = _check_uint64(index, "index")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | index))


def standard_normal(seed, index, size):
    """Standard normal draws by inverse CDF of 52-bit uniforms.

    Uniforms are the midpoints ``(k + 1/2) / 2**52`` so they never hit 0 or 1.
    """
    bits = stream(seed, index).integers(0, 1 << 52, size=size, dtype=np.int64)
    u = (bits.astype(np.float64) + 0.5) * 2.0 ** -52
    return ndtri(u)


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FrequencyBasis:
    """The frequencies ``omega_1..omega_D`` of one RFF instance.

    ``frequencies`` has shape ``(D, d)``. ``seed`` is ``None`` for bases built
    from explicit arrays.
    """

    frequencies: np.ndarray
    seed: int = None
    d: int = field(init=False)
    D: int = field(init=False)

    def __post_init__(self):
        w = _readonly(self.frequencies)
        if w.ndim == 1:
            w = _readonly(w.reshape(-1, 1))
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise InvalidArgument(f"frequencies must be a non-empty (D, d) array, got shape {w.shape}")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "D", w.shape[0])
        object.__setattr__(self, "d", w.shape[1])
        if self.seed is not None:
            object.__setattr__(self, "seed", _check_uint64(self.seed))


def _check_count(value, name):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise InvalidArgument(f"{name} must be >= 1, got {value}")
    return int(value)


def sample_frequencies(d, D, seed):
    """Draw ``D`` i.i.d. ``N(0, I_d)`` frequency vectors from stream 0 of ``seed``."""
    d = _check_count(d, "d")
    D = _check_count(D, "D")
    seed = _check_uint64(seed)
    w = standard_normal(seed, 0, D * d).reshape(D, d)
    return FrequencyBasis(w, seed)


@dataclass(frozen=True)
class FeatureVector:
    """``z(x)``: ``2D`` entries, cos/sin pairs scaled by ``1/sqrt(D)``."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))

    def __len__(self):
        return self.values.size


def _as_points(x, basis, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != basis.d:
        raise InvalidArgument(f"{name} must be a vector of length d={basis.d}, got shape {x.shape}")
    return x


def feature_map(x, basis):
    x = _as_points(x, basis)
    proj = basis.frequencies @ x
    z = np.empty(2 * basis.D)
    z[0::2] = np.cos(proj)
    z[1::2] = np.sin(proj)
    return FeatureVector(z / math.sqrt(basis.D))


def feature_matrix(X, basis):
    """Row-wise ``z(x)`` for an ``(n, d)`` array, shape ``(n, 2D)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != basis.d:
        raise InvalidArgument(f"points must have d={basis.d} columns, got {X.shape[1]}")
    proj = X @ basis.frequencies.T
    Z = np.empty((X.shape[0], 2 * basis.D))
    Z[:, 0::2] = np.cos(proj)
    Z[:, 1::2] = np.sin(proj)
    return Z / math.sqrt(basis.D)


def approx_kernel(x, y, basis):
    """RFF estimate ``<z(x), z(y)>`` of the Gaussian kernel."""
    zx = feature_map(_as_points(x, basis), basis).values
    zy = feature_map(_as_points(y, basis, "y"), basis).values
    return float(np.clip(zx @ zy, -1.0, 1.0))


def approx_gram(X, Y, basis):
    return feature_matrix(X, basis) @ feature_matrix(Y, basis).T


def gaussian_kernel(r):
    r = float(r)
    if not r >= 0.0:
        raise InvalidArgument(f"radius must be nonnegative, got {r!r}")
    return math.exp(-0.5 * r * r)


def gaussian_gram(X, Y):
    """Exact Gaussian kernel matrix ``exp(-|x - y|^2 / 2)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.exp(-0.5 * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class RadialProjection:
    """Scalar draws ``alpha`` and a radius ``0 <= r <= R``."""

    alphas: np.ndarray
    r: float
    R: float

    def __post_init__(self):
        a = _readonly(self.alphas).ravel()
        if a.size < 1:
            raise InvalidArgument("alphas must be non-empty")
        object.__setattr__(self, "alphas", a)
        if not (0.0 <= self.r <= self.R):
            raise InvalidArgument(f"need 0 <= r <= R, got r={self.r!r}, R={self.R!r}")


def radial_error(proj):
    """``f(r) = mean(cos(alpha * r)) - exp(-r^2/2)``, always within ``[-2, 2]``."""
    if proj.r == 0.0:
        return 0.0
    return float(np.mean(np.cos(proj.alphas * proj.r))) - gaussian_kernel(proj.r)


def cosine_mean_grid(alphas, step, count):
    """``mean_i cos(alpha_i * j * step)`` for ``j = 0 .. count-1``.

    Small problems are evaluated directly. Larger ones go through a type-1
    nonuniform FFT (single-threaded, so the result does not depend on the
    machine's thread count), or the blocked evaluator when finufft is absent.
    """
    a = np.asarray(alphas, dtype=np.float64).ravel()
    if count * a.size <= 65536:
        return np.cos(np.outer(np.arange(count) * step, a)).mean(axis=1)
    if finufft is None:
        return cosine_mean_grid_blocked(a, step, count)
    x = a * step
    if np.abs(x).max() >= 3.0 * math.pi:
        x = np.remainder(x + math.pi, 2.0 * math.pi) - math.pi
    plan = _nufft_plan(2 * count)
    plan.setpts(np.ascontiguousarray(x))
    f = plan.execute(np.ones(a.size, dtype=np.complex128))
    return f[:count].real / a.size


@functools.lru_cache(maxsize=8)
def _nufft_plan(n_modes):
    # planning is a large share of one small transform; reuse per process
    return finufft.Plan(1, (n_modes,), eps=1e-14, isign=1, modeord=1, nthreads=1)


def cosine_mean_grid_blocked(alphas, step, count):
    """Pure numpy variant of :func:`cosine_mean_grid`.

    Grid index ``j = a*B + b`` is split into an outer block (exact cos/sin)
    and an inner offset (running complex products), so the ``D x count`` work
    becomes one real matrix product.
    """
    a = np.asarray(alphas, dtype=np.float64).ravel()
    D = a.size
    B = max(2, int(math.ceil(math.sqrt(3.0 * count))))
    A = -(-count // B)
    inner = np.empty((D, B), dtype=np.complex128)
    inner[:, 0] = 1.0
    inner[:, 1:] = np.exp(1j * a * step)[:, None]
    np.cumprod(inner, axis=1, out=inner)
    outer_angle = np.outer(a, np.arange(A) * (B * step))
    left = np.concatenate([np.cos(outer_angle), -np.sin(outer_angle)], axis=0)
    right = np.concatenate([inner.real, inner.imag], axis=0)
    s = (left.T @ right).ravel()[:count]
    return s / D


def default_grid_points(R):
    return 4096 * max(1, math.ceil(R))


def lipschitz_cap(alphas):
    """Per-realization bound on ``|f'(r)|``: ``mean|alpha| + exp(-1/2)``."""
    return float(np.mean(np.abs(alphas))) + _LIP_GAUSSIAN


@dataclass(frozen=True)
class SupErrorResult:
    sup_value: float
    argmax_r: float
    grid_step: float
    lipschitz_cap: float
    certified_pad: float

    @property
    def grid_max(self):
        return self.sup_value - self.certified_pad


def certified_sup_error(alphas, R, grid_points=None):
    """Upper bound on ``sup_{0<=r<=R} |f(r)|`` from a grid plus Lipschitz pad.

    ``|f|`` is evaluated on ``grid_points`` uniform nodes; every point of
    ``[0, R]`` lies within half a step of a node, so adding
    ``lipschitz_cap * step / 2`` gives a bound that holds for this draw.
    """
    R = float(R)
    if not R > 0.0:
        raise InvalidArgument(f"R must be positive, got {R!r}")
    if grid_points is None:
        grid_points = default_grid_points(R)
    if isinstance(grid_points, bool) or int(grid_points) != grid_points or grid_points < 2:
        raise InvalidArgument(f"grid_points must be an integer >= 2, got {grid_points!r}")
    grid_points = int(grid_points)
    a = np.asarray(alphas, dtype=np.float64).ravel()
    if a.size < 1:
        raise InvalidArgument("alphas must be non-empty")

    step = R / (grid_points - 1)
    r = np.arange(grid_points) * step
    err = np.abs(cosine_mean_grid(a, step, grid_points) - np.exp(-0.5 * r * r))
    err[0] = 0.0  # s(0) = k(0) = 1 exactly
    j = int(np.argmax(err))
    cap = lipschitz_cap(a)
    pad = cap * step / 2.0
    return SupErrorResult(
        sup_value=float(err[j]) + pad,
        argmax_r=float(r[j]),
        grid_step=step,
        lipschitz_cap=cap,
        certified_pad=pad,
    )
