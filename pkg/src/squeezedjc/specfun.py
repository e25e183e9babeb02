"""Scalar kernels: log-factorials, signed log-space values, the terminating
polynomial F(l, n; x2), and compensated series summation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from . import kernels
from .errors import DomainError

Number = Union[float, complex]

_EXACT_FACTORIAL_MAX = 1000


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as sign and natural log of its magnitude.

    Zero is ``sign == 0`` with ``log_magnitude == -inf``.
    """

    sign: int
    log_magnitude: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise DomainError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0 and self.log_magnitude != -math.inf:
            raise DomainError("zero must carry log_magnitude = -inf")
        if self.sign != 0 and not math.isfinite(self.log_magnitude):
            raise DomainError("nonzero value needs a finite log_magnitude")

    @classmethod
    def zero(cls) -> SignedLogValue:
        return cls(0, -math.inf)

    @classmethod
    def from_real(cls, x: float) -> SignedLogValue:
        if x == 0:
            return cls.zero()
        if not math.isfinite(x):
            raise DomainError(f"cannot represent non-finite value {x!r}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, sign: int, log_magnitude: float) -> SignedLogValue:
        if sign == 0 or log_magnitude == -math.inf:
            return cls.zero()
        return cls(int(sign), float(log_magnitude))

    def to_real(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def __neg__(self) -> SignedLogValue:
        return SignedLogValue(-self.sign, self.log_magnitude)

    def __mul__(self, other: SignedLogValue) -> SignedLogValue:
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    def __truediv__(self, other: SignedLogValue) -> SignedLogValue:
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        if self.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_magnitude - other.log_magnitude)

    def __add__(self, other: SignedLogValue) -> SignedLogValue:
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log_magnitude >= other.log_magnitude else (other, self)
        d = lo.log_magnitude - hi.log_magnitude
        if hi.sign == lo.sign:
            return SignedLogValue(hi.sign, hi.log_magnitude + math.log1p(math.exp(d)))
        if d == 0.0:
            return SignedLogValue.zero()
        return SignedLogValue(hi.sign, hi.log_magnitude + math.log(-math.expm1(d)))

    def __sub__(self, other: SignedLogValue) -> SignedLogValue:
        return self + (-other)

    def pow(self, k: int) -> SignedLogValue:
        if k == 0:
            return SignedLogValue(1, 0.0)
        if self.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign**k if k > 0 else self.sign, k * self.log_magnitude)


@dataclass(frozen=True)
class SeriesResult:
    value: Number
    terms_used: int
    tail_estimate: float
    converged: bool


def log_factorial(n: int) -> float:
    """ln(n!), exact-integer based up to 1000 and lgamma beyond."""
    if isinstance(n, (bool, np.bool_)) or int(n) != n:
        raise DomainError(f"log_factorial needs an integer, got {n!r}")
    n = int(n)
    if n < 0:
        raise DomainError(f"log_factorial needs n >= 0, got {n}")
    if n < 2:
        return 0.0
    if n <= _EXACT_FACTORIAL_MAX:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1.0)


def _check_poly_args(l: int, n: int, x2: float) -> None:
    if l < 0 or n < 0:
        raise DomainError(f"l and n must be nonnegative, got l={l}, n={n}")
    if not x2 > 0:
        raise DomainError(f"x2 must be positive, got {x2!r}")


def hyp_poly_log_terms(l: int, n: int, x2: float) -> list[SignedLogValue]:
    """Terms of F(l, n; x2) as signed log values, j = 0..min(2l, n)."""
    _check_poly_args(l, n, x2)
    m = 2 * l
    lx = math.log(x2)
    base = log_factorial(m) + log_factorial(n)
    out = []
    for j in range(min(m, n) + 1):
        lg = base - log_factorial(m - j) - log_factorial(n - j) - log_factorial(j) - j * lx
        out.append(SignedLogValue(-1 if j % 2 else 1, lg))
    return out


def hyp_poly(l: int, n: int, x2: float) -> float:
    """Explicit terminating sum

        F(l, n; x2) = sum_{j=0}^{min(2l, n)} (2l)! n! / ((2l-j)! (n-j)! j!) * (-1/x2)**j

    Each term is assembled in log space and converted to a float only when
    accumulated. The sum can cancel catastrophically when 2l and n are both
    large relative to x2; use ``scaled_hyp_poly_table`` there.
    """
    terms = hyp_poly_log_terms(l, n, x2)
    return math.fsum(t.to_real() for t in terms)


def scaled_hyp_poly_table(x2: float, n_lo: int, n_hi: int, l_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log-magnitude of exp(-x2/2) x2**((n+2l)/2) F(l, n; x2) / sqrt(n! (2l)!).

    Rows are n = n_lo..n_hi, columns l = 0..l_max. The scaled quantity is a
    displacement matrix element and so lies in [-1, 1]; it is evaluated by a
    three-term recurrence that is stable in both index directions.
    """
    if not x2 > 0:
        raise DomainError(f"x2 must be positive, got {x2!r}")
    if n_lo < 0 or n_hi < n_lo or l_max < 0:
        raise DomainError(f"bad table bounds n=[{n_lo}, {n_hi}], l_max={l_max}")
    return kernels.poly_log_table(float(x2), int(n_lo), int(n_hi), int(l_max))


def hyp_poly_stable(l: int, n: int, x2: float) -> SignedLogValue:
    """F(l, n; x2) recovered from the scaled recurrence, in log form."""
    _check_poly_args(l, n, x2)
    sign, logm = scaled_hyp_poly_table(x2, n, n, l)
    s = int(sign[0, l])
    if s == 0:
        return SignedLogValue.zero()
    unscale = 0.5 * x2 - 0.5 * (n + 2 * l) * math.log(x2) + 0.5 * (log_factorial(n) + log_factorial(2 * l))
    return SignedLogValue(s, float(logm[0, l]) + unscale)


def compensated_sum(
    terms: Iterable[Number],
    rel_tol: float = 1e-12,
    abs_floor: float = 1e-300,
    max_terms: int = 20000,
) -> SeriesResult:
    """Neumaier-compensated sum with a three-small-terms stopping rule.

    The rule arms once |partial sum| reaches ``abs_floor`` and declares
    convergence after three consecutive terms each below
    ``rel_tol * max(|partial sum|, abs_floor)``. A finite iterable that runs
    out counts as converged with zero tail. Hitting ``max_terms`` first gives
    ``converged=False`` and the partial value.
    """
    if not rel_tol > 0:
        raise DomainError(f"rel_tol must be positive, got {rel_tol}")
    if max_terms < 1:
        raise DomainError(f"max_terms must be >= 1, got {max_terms}")

    s_re = c_re = s_im = c_im = 0.0
    is_complex = False
    armed = False
    recent: list[float] = []
    used = 0
    it = iter(terms)
    for term in it:
        if isinstance(term, complex) or np.iscomplexobj(term):
            is_complex = True
            tr, ti = float(np.real(term)), float(np.imag(term))
        else:
            tr, ti = float(term), 0.0
        used += 1
        t = s_re + tr
        c_re += (s_re - t) + tr if abs(s_re) >= abs(tr) else (tr - t) + s_re
        s_re = t
        t = s_im + ti
        c_im += (s_im - t) + ti if abs(s_im) >= abs(ti) else (ti - t) + s_im
        s_im = t

        mag = math.hypot(tr, ti)
        acc = math.hypot(s_re + c_re, s_im + c_im)
        if not armed and acc >= abs_floor:
            armed = True
        thresh = rel_tol * max(acc, abs_floor)
        if armed and mag < thresh:
            recent.append(mag)
            if len(recent) >= 3 and max(recent[-3:]) < thresh:
                return SeriesResult(_pack(s_re + c_re, s_im + c_im, is_complex), used, max(recent[-3:]), True)
        else:
            recent = []
        if used >= max_terms:
            break
    else:
        return SeriesResult(_pack(s_re + c_re, s_im + c_im, is_complex), used, 0.0, True)

    # max_terms reached; a finite iterable that ends exactly here still converged
    sentinel = object()
    if next(it, sentinel) is sentinel:
        return SeriesResult(_pack(s_re + c_re, s_im + c_im, is_complex), used, 0.0, True)
    return SeriesResult(_pack(s_re + c_re, s_im + c_im, is_complex), used, mag, False)


def _pack(re: float, im: float, is_complex: bool) -> Number:
    return complex(re, im) if is_complex else re
