"""Model parameters and the expansion coefficients of a coherent field over the
n-photon squeezed coherent basis.

The coefficient of basis state n is

    b_n = <n| D(-alpha) S(-zeta) D(beta) |0>
        = exp(i Im(gamma alpha*)) sum_l <n|D(delta)|2l> <2l|S(-zeta)|0>,

with gamma = beta cosh r + beta* e^{i phi} sinh r and delta = gamma - alpha.
The displacement matrix elements are the terminating polynomial
F(l, n; |delta|^2) in scaled form, and the squeeze elements are
sqrt(sech r) sqrt((2l)!) / (2^l l!) (e^{i phi} tanh r)^l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import gammaln

from . import _mutations, kernels
from .errors import ConvergenceError, DomainError
from .specfun import scaled_hyp_poly_table

TWO_PI = 2.0 * math.pi
ALIGN_TOL = 1e-12
DEGENERATE_DELTA = 1e-8

SOURCE_ALIGNED = "analytic_aligned"
SOURCE_GENERAL = "analytic_general"
SOURCE_ORACLE = "oracle_matrix"
SOURCES = (SOURCE_ALIGNED, SOURCE_GENERAL, SOURCE_ORACLE)

SERIES_REL_TOL = 1e-12
SERIES_ABS_FLOOR = 1e-30
SERIES_MAX_TERMS = 20000
ROW_CHUNK = 256


def _reduce_phase(x: float) -> float:
    y = math.fmod(float(x), TWO_PI)
    if y < 0:
        y += TWO_PI
    return 0.0 if y >= TWO_PI else y


def _phase_distance(x: float, y: float) -> float:
    d = math.fmod(abs(x - y), TWO_PI)
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters, with hbar = 1 and time measured as lambda * t.

    ``a``/``theta``: magnitude and phase of the B-operator displacement alpha.
    ``r``/``phi``: squeeze magnitude and phase of zeta.
    ``b``/``chi``: magnitude and phase of the initial coherent amplitude beta.
    ``lam``: coupling; ``delta``: detuning.
    """

    a: float = 0.0
    theta: float = 0.0
    r: float = 0.0
    phi: float = 0.0
    b: float = 0.0
    chi: float = 0.0
    lam: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("a", "theta", "r", "phi", "b", "chi", "lam", "delta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        for name in ("a", "b", "r"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.lam > 0:
            raise DomainError(f"lam must be > 0, got {self.lam}")
        for name in ("theta", "phi", "chi"):
            object.__setattr__(self, name, _reduce_phase(getattr(self, name)))

    @classmethod
    def aligned(cls, a: float = 0.0, b: float = 0.0, r: float = 0.0, chi: float = 0.0, **kw) -> ModelParams:
        """Parameters with theta = chi and phi = 2 chi."""
        return cls(a=a, theta=chi, r=r, phi=2.0 * chi, b=b, chi=chi, **kw)

    @property
    def alpha(self) -> complex:
        return self.a * complex(math.cos(self.theta), math.sin(self.theta))

    @property
    def zeta(self) -> complex:
        return self.r * complex(math.cos(self.phi), math.sin(self.phi))

    @property
    def beta(self) -> complex:
        return self.b * complex(math.cos(self.chi), math.sin(self.chi))

    @property
    def phase_aligned(self) -> bool:
        """phi = 2 chi and alpha has phase chi (theta is moot when a = 0)."""
        if _phase_distance(self.phi, 2.0 * self.chi) > ALIGN_TOL:
            return False
        return self.a == 0.0 or _phase_distance(self.theta, self.chi) <= ALIGN_TOL

    def replace(self, **changes) -> ModelParams:
        d = self.as_dict()
        d.update(changes)
        return ModelParams(**d)

    def as_dict(self) -> dict[str, float]:
        return {
            "a": self.a,
            "theta": self.theta,
            "r": self.r,
            "phi": self.phi,
            "b": self.b,
            "chi": self.chi,
            "lam": self.lam,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class AmplitudeSeries:
    """Coefficients b_0..b_{n_max} with bookkeeping for the discarded tail."""

    n_max: int
    coefficients: np.ndarray
    tail_mass: float
    source: str
    diagnostics: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise DomainError(f"unknown source tag {self.source!r}")
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size != self.n_max + 1:
            raise DomainError("coefficients must be a vector of length n_max + 1")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        if self.tail_mass < 0:
            raise DomainError(f"tail_mass must be >= 0, got {self.tail_mass}")

    @property
    def weights(self) -> np.ndarray:
        return self.coefficients.real**2 + self.coefficients.imag**2

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @classmethod
    def single(cls, n: int, value: complex = 1.0) -> AmplitudeSeries:
        """A series with one nonzero coefficient, handy for Rabi checks."""
        c = np.zeros(n + 1, complex)
        c[n] = value
        return cls(n, c, 0.0, SOURCE_ALIGNED, {"synthetic": True})


def gamma_param(b: float, chi: float, r: float, phi: float) -> complex:
    """gamma = beta cosh r + beta* e^{i phi} sinh r, beta = b e^{i chi}."""
    if b < 0 or r < 0:
        raise DomainError("b and r must be nonnegative")
    beta = b * complex(math.cos(chi), math.sin(chi))
    sh = _mutations.sinh_sign() * math.sinh(r)
    return beta * math.cosh(r) + beta.conjugate() * complex(math.cos(phi), math.sin(phi)) * sh


# ---------------------------------------------------------------------------
# l-series machinery
# ---------------------------------------------------------------------------


def _squeeze_log_weights(r: float, l_max: int) -> np.ndarray:
    """log of sqrt(sech r) sqrt((2l)!) / (2^l l!) tanh^l r for l = 0..l_max."""
    ls = np.arange(l_max + 1, dtype=float)
    half_log_sech = -0.5 * math.log(math.cosh(r))
    out = half_log_sech + 0.5 * gammaln(2 * ls + 1) - ls * math.log(2.0) - gammaln(ls + 1)
    if r == 0.0:
        out[1:] = -np.inf
    else:
        out += ls * math.log(math.tanh(r))
    return out


def _squeeze_tail_bound(r: float, l_max: int) -> float:
    """Upper bound on sum_{l > l_max} of the squeeze weights (each |<n|D|2l>| <= 1)."""
    if r == 0.0:
        return 0.0
    t = math.tanh(r)
    # sqrt((2l)!)/(2^l l!) <= 1, so the weights are bounded by a geometric series
    return math.sqrt(1.0 / math.cosh(r)) * t ** (l_max + 1) / (1.0 - t)


def _choose_l_max(r: float, target: float, cap: int) -> int:
    if r == 0.0:
        return 0
    t = math.tanh(r)
    if t >= 1.0:
        return cap
    pre = math.sqrt(1.0 / math.cosh(r)) / (1.0 - t)
    need = math.log(target / pre) / math.log(t) if pre > target else 0.0
    return int(min(cap, max(1, math.ceil(need))))


@dataclass
class _RowBlock:
    values: np.ndarray
    used: np.ndarray
    tail: np.ndarray
    converged: np.ndarray


def _displaced_squeezed_rows(
    x: float,
    psi: float,
    phi: float,
    r: float,
    n_lo: int,
    n_hi: int,
    rel_tol: float,
    abs_floor: float,
    max_terms: int,
) -> _RowBlock:
    """<n|D(delta)S(-zeta)|0> for n = n_lo..n_hi, delta = sqrt(x) e^{i psi}."""
    l_max = _choose_l_max(r, rel_tol * abs_floor, max_terms - 1)
    sign, logm = scaled_hyp_poly_table(x, n_lo, n_hi, l_max)
    logw = _squeeze_log_weights(r, l_max)
    tail_bound = _squeeze_tail_bound(r, l_max)
    re, im, used, tail, conv = kernels.row_series_sums(
        sign, logm, logw, phi - 2.0 * psi, rel_tol, abs_floor, tail_bound, rel_tol * abs_floor
    )
    ns = np.arange(n_lo, n_hi + 1)
    vals = (re + 1j * im) * np.exp(1j * ns * psi)
    return _RowBlock(vals, np.asarray(used), np.asarray(tail), np.asarray(conv, bool))


def _squeezed_vacuum_rows(r: float, phi: float, n_lo: int, n_hi: int) -> np.ndarray:
    """<n|S(-zeta)|0>: nonzero on even n only."""
    ns = np.arange(n_lo, n_hi + 1)
    out = np.zeros(ns.size, complex)
    even = ns % 2 == 0
    ls = ns[even] // 2
    if r == 0.0:
        out[even] = np.where(ls == 0, 1.0, 0.0)
        return out
    logw = (
        -0.5 * math.log(math.cosh(r))
        + 0.5 * gammaln(2 * ls + 1.0)
        - ls * math.log(2.0)
        - gammaln(ls + 1.0)
        + ls * math.log(math.tanh(r))
    )
    out[even] = np.exp(logw) * np.exp(1j * ls * phi)
    return out


def _raise_unconverged(block: _RowBlock, n_lo: int) -> None:
    bad = np.nonzero(~block.converged)[0]
    if bad.size:
        k = int(bad[0])
        raise ConvergenceError(
            f"l-series for b_{n_lo + k} did not converge",
            n=n_lo + k,
            terms_used=int(block.used[k]),
            tail_estimate=float(block.tail[k]),
            partial=complex(block.values[k]),
            failed_rows=int(bad.size),
        )


def _aligned_rows(params: ModelParams, n_lo: int, n_hi: int, rel_tol, abs_floor, max_terms) -> _RowBlock:
    s = params.b * math.exp(params.r) - params.a
    ns = np.arange(n_lo, n_hi + 1)
    chi_phase = np.ones(ns.size, complex)
    if not _mutations.active("drop_chi_phase"):
        chi_phase = np.exp(1j * ns * params.chi)
    if abs(s) < DEGENERATE_DELTA:
        # (e^{i phi} tanh r)^{n/2} with phi = 2 chi carries e^{i chi n}
        vals = _squeezed_vacuum_rows(params.r, 0.0, n_lo, n_hi) * chi_phase
        k = ns.size
        return _RowBlock(vals, np.ones(k, np.int64), np.zeros(k), np.ones(k, bool))
    block = _displaced_squeezed_rows(s * s, 0.0 if s > 0 else math.pi, 0.0, params.r, n_lo, n_hi, rel_tol, abs_floor, max_terms)
    block.values = block.values * chi_phase
    return block


def _general_rows(params: ModelParams, n_lo: int, n_hi: int, rel_tol, abs_floor, max_terms) -> _RowBlock:
    alpha = params.alpha
    gamma = gamma_param(params.b, params.chi, params.r, params.phi)
    d = gamma - alpha
    prefactor = np.exp(1j * (gamma * alpha.conjugate()).imag)
    if abs(d) < DEGENERATE_DELTA:
        vals = prefactor * _squeezed_vacuum_rows(params.r, params.phi, n_lo, n_hi)
        k = vals.size
        return _RowBlock(vals, np.ones(k, np.int64), np.zeros(k), np.ones(k, bool))
    block = _displaced_squeezed_rows(
        abs(d) ** 2, math.atan2(d.imag, d.real), params.phi, params.r, n_lo, n_hi, rel_tol, abs_floor, max_terms
    )
    block.values = prefactor * block.values
    return block


def bn_aligned(params: ModelParams, n: int, rel_tol: float = SERIES_REL_TOL, abs_floor: float = SERIES_ABS_FLOOR,
               max_terms: int = SERIES_MAX_TERMS) -> complex:
    """Closed-form b_n for phase-aligned parameters.

    Uses s = b e^r - a as the real displacement and attaches e^{i chi n}.
    """
    if not params.phase_aligned:
        raise DomainError("bn_aligned requires phi = 2 chi and theta = chi; use bn_general")
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    block = _aligned_rows(params, n, n, rel_tol, abs_floor, max_terms)
    _raise_unconverged(block, n)
    return complex(block.values[0])


def bn_general(params: ModelParams, n: int, rel_tol: float = SERIES_REL_TOL, abs_floor: float = SERIES_ABS_FLOOR,
               max_terms: int = SERIES_MAX_TERMS) -> complex:
    """Closed-form b_n for arbitrary phases."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    block = _general_rows(params, n, n, rel_tol, abs_floor, max_terms)
    _raise_unconverged(block, n)
    return complex(block.values[0])


def bn_array(params: ModelParams, n_max: int, method: str = "auto", rel_tol: float = SERIES_REL_TOL,
             abs_floor: float = SERIES_ABS_FLOOR, max_terms: int = SERIES_MAX_TERMS) -> tuple[np.ndarray, dict]:
    """b_0..b_{n_max} in one pass. ``method`` is "aligned", "general" or "auto"."""
    if method == "auto":
        method = "aligned" if params.phase_aligned else "general"
    if method == "aligned" and not params.phase_aligned:
        raise DomainError("aligned method requires phase-aligned parameters")
    rows = _aligned_rows if method == "aligned" else _general_rows
    vals = np.empty(n_max + 1, complex)
    max_used = 0
    max_tail = 0.0
    for lo in range(0, n_max + 1, ROW_CHUNK):
        hi = min(n_max, lo + ROW_CHUNK - 1)
        block = rows(params, lo, hi, rel_tol, abs_floor, max_terms)
        _raise_unconverged(block, lo)
        vals[lo : hi + 1] = block.values
        max_used = max(max_used, int(block.used.max()))
        max_tail = max(max_tail, float(block.tail.max()))
    return vals, {"method": method, "max_terms_used": max_used, "max_tail_estimate": max_tail}


def _photon_scale(params: ModelParams) -> tuple[float, float]:
    """Rough mean and spread of the photon-number distribution of the coefficients."""
    d = gamma_param(params.b, params.chi, params.r, params.phi) - params.alpha
    sh2 = math.sinh(params.r) ** 2
    mean = abs(d) ** 2 + sh2
    var = abs(d) ** 2 * math.exp(2 * params.r) + 2.0 * sh2 * (sh2 + 1.0)
    return mean, math.sqrt(var)


def build_series(params: ModelParams, tail_target: float = 1e-8, n_cap: int = 4096,
                 method: str = "auto", rel_tol: float = SERIES_REL_TOL) -> AmplitudeSeries:
    """Coefficient vector truncated where 1 - sum |b_n|^2 first drops below ``tail_target``.

    Rows beyond n_max are still computed until the remaining mass is negligible
    so that ``tail_mass`` is a measured sum, not the complement of the head.
    """
    if not 0 < tail_target <= 1e-3:
        raise DomainError(f"tail_target must lie in (0, 1e-3], got {tail_target}")
    if method == "auto":
        method = "aligned" if params.phase_aligned else "general"
    rows = _aligned_rows if method == "aligned" else _general_rows
    if method == "aligned" and not params.phase_aligned:
        raise DomainError("aligned method requires phase-aligned parameters")

    hard_cap = n_cap + 1024
    mean, spread = _photon_scale(params)
    guess = int(min(hard_cap, max(ROW_CHUNK, mean + 12 * spread + 32)))
    chunks = []
    max_used = 0
    max_tail = 0.0
    lo = 0
    stop_mass = min(tail_target * 1e-3, 1e-12)
    while True:
        hi = min(hard_cap, lo + ROW_CHUNK - 1)
        block = rows(params, lo, hi, rel_tol, SERIES_ABS_FLOOR, SERIES_MAX_TERMS)
        _raise_unconverged(block, lo)
        chunks.append(block.values)
        max_used = max(max_used, int(block.used.max()))
        max_tail = max(max_tail, float(block.tail.max()))
        lo = hi + 1
        vals = np.concatenate(chunks)
        w = vals.real**2 + vals.imag**2
        remaining = 1.0 - math.fsum(w)
        last = math.fsum(w[-ROW_CHUNK // 4 :])
        if lo >= guess and remaining < stop_mass and last < stop_mass:
            break
        if lo > hard_cap:
            break

    cum = np.cumsum(w)
    hit = np.nonzero(1.0 - cum < tail_target)[0]
    total = math.fsum(w)
    if hit.size == 0 or hit[0] > n_cap:
        raise ConvergenceError(
            f"coefficient mass did not reach 1 - {tail_target:g} within n <= {n_cap}",
            achieved_mass=float(cum[min(n_cap, cum.size - 1)]),
            n_cap=n_cap,
            tail_target=tail_target,
        )
    n_max = int(hit[0])
    tail_mass = math.fsum(w[n_max + 1 :])
    diagnostics = {
        "method": method,
        "max_terms_used": max_used,
        "max_tail_estimate": max_tail,
        "rows_computed": int(w.size),
        "head_mass": math.fsum(w[: n_max + 1]),
        "total_mass": total,
        "tail_target": tail_target,
    }
    if abs(total - 1.0) > 1e-6:
        raise ConvergenceError(
            "computed coefficients do not sum to unit mass",
            total_mass=total,
            rows_computed=int(w.size),
        )
    source = SOURCE_ALIGNED if method == "aligned" else SOURCE_GENERAL
    return AmplitudeSeries(n_max, vals[: n_max + 1], tail_mass, source, diagnostics)
