"""Dense truncated-Fock-space operators used as an independent reference.

Exponentials are built at a buffer dimension N_b and compared on the
top-left retained block. Two exponential methods are available:

* ``"spectral"`` (default): D(alpha) and S(zeta) are unitarily equivalent to
  exp(-i c T) with T a real symmetric tridiagonal matrix (a + a^dag, or one
  parity block of a^2 + a^dag^2). T is diagonalised once per dimension and
  cached, so applying the operator to a block of vectors is a pair of real
  matrix products.
* ``"pade"``: ``scipy.linalg.expm`` of the dense generator.

Edge contamination is tracked as the probability mass that reaches the top
``edge_width`` levels of the buffer; below ``edge_tol`` the retained entries
are insensitive to the truncation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
import scipy.linalg

from . import _mutations
from .errors import DomainError, TruncationError, TruncationWarning
from .states import SOURCE_ORACLE, AmplitudeSeries, gamma_param

CERT_TOL = 1e-10
EDGE_TOL = 1e-18
MAX_BUFFER = 8192


def edge_width(dim: int) -> int:
    """Rows/columns treated as truncation edge: max(32, dim // 8)."""
    return max(32, dim // 8)


@dataclass(frozen=True)
class TruncationSpec:
    retained: int = 512
    buffer: int | None = None

    def __post_init__(self):
        if self.retained < 1:
            raise DomainError(f"retained must be >= 1, got {self.retained}")
        if self.buffer is None:
            object.__setattr__(self, "buffer", self.retained + max(128, self.retained // 4))
        if self.buffer <= self.retained:
            raise DomainError(f"buffer ({self.buffer}) must exceed retained ({self.retained})")

    def with_buffer(self, buffer: int) -> TruncationSpec:
        return TruncationSpec(self.retained, buffer)


@dataclass(frozen=True)
class FockMatrix:
    """Operator at buffer dimension; ``block`` is the retained top-left corner.

    ``deviation`` is sqrt of the largest edge-band mass over retained columns
    (zero for exactly banded operators such as ladder operators).
    """

    entries: np.ndarray
    retained: int
    deviation: float = 0.0
    certified: bool = True
    label: str = ""

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def block(self) -> np.ndarray:
        return self.entries[: self.retained, : self.retained]

    def interior(self) -> np.ndarray:
        w = edge_width(self.retained)
        k = max(0, self.retained - w)
        return self.entries[:k, :k]

    def dagger(self) -> FockMatrix:
        return FockMatrix(self.entries.conj().T, self.retained, self.deviation, self.certified, self.label + "^dag")

    def __matmul__(self, other):
        if isinstance(other, FockMatrix):
            return FockMatrix(
                self.entries @ other.entries,
                min(self.retained, other.retained),
                max(self.deviation, other.deviation),
                self.certified and other.certified,
                f"{self.label}*{other.label}",
            )
        if isinstance(other, FockVector):
            return FockVector(self.entries @ other.amplitudes)
        return self.entries @ other


@dataclass(frozen=True)
class FockVector:
    amplitudes: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: FockVector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


# ---------------------------------------------------------------------------
# spectral machinery
# ---------------------------------------------------------------------------


@lru_cache(maxsize=6)
def _position_eigen(nb: int):
    off = np.sqrt(np.arange(1, nb, dtype=float))
    return scipy.linalg.eigh_tridiagonal(np.zeros(nb), off)


@lru_cache(maxsize=12)
def _pair_eigen(nb: int, parity: int):
    ns = np.arange(parity, nb, 2, dtype=float)
    if ns.size == 1:
        return np.zeros(1), np.ones((1, 1))
    off = np.sqrt((ns[:-1] + 1.0) * (ns[:-1] + 2.0))
    return scipy.linalg.eigh_tridiagonal(np.zeros(ns.size), off)


def _as_block(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        return x[:, None], True
    return x, False


def apply_displacement(x: np.ndarray, alpha: complex, nb: int | None = None) -> np.ndarray:
    """D(alpha) x for a vector or a block of column vectors, truncated at len(x)."""
    y, flat = _as_block(x)
    nb = y.shape[0] if nb is None else nb
    if y.shape[0] != nb:
        raise DomainError("vector length must equal the buffer dimension")
    alpha = complex(alpha)
    if alpha != 0:
        mag = abs(alpha)
        ang = math.atan2(alpha.imag, alpha.real)
        u = np.exp(1j * np.arange(nb) * (ang + 0.5 * math.pi))[:, None]
        lam, v = _position_eigen(nb)
        y = u.conj() * y
        y = v @ (np.exp(-1j * mag * lam)[:, None] * (v.T @ y))
        y = u * y
    else:
        y = y.copy()
    return y[:, 0] if flat else y


def apply_squeeze(x: np.ndarray, zeta: complex, nb: int | None = None) -> np.ndarray:
    """S(zeta) x with S(zeta) = exp(-zeta/2 a^dag^2 + zeta*/2 a^2)."""
    y, flat = _as_block(x)
    nb = y.shape[0] if nb is None else nb
    if y.shape[0] != nb:
        raise DomainError("vector length must equal the buffer dimension")
    zeta = complex(zeta)
    r = abs(zeta)
    if r == 0:
        out = y.copy()
        return out[:, 0] if flat else out
    ang = math.atan2(zeta.imag, zeta.real)
    u = np.exp(1j * np.arange(nb) * (0.5 * ang - 0.25 * math.pi))[:, None]
    y = u.conj() * y
    out = np.empty_like(y)
    for parity in (0, 1):
        idx = slice(parity, nb, 2)
        lam, v = _pair_eigen(nb, parity)
        out[idx] = v @ (np.exp(-0.5j * r * lam)[:, None] * (v.T @ y[idx]))
    out = u * out
    return out[:, 0] if flat else out


def edge_mass(x: np.ndarray, width: int | None = None) -> float:
    """Largest probability mass in the top ``width`` levels over the columns of x."""
    y, _ = _as_block(x)
    w = edge_width(y.shape[0]) if width is None else width
    band = y[-w:]
    return float(np.max(np.sum(band.real**2 + band.imag**2, axis=0)))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def ladder_ops(spec: TruncationSpec) -> tuple[FockMatrix, FockMatrix]:
    nb = spec.buffer
    a = np.zeros((nb, nb), complex)
    k = np.arange(1, nb)
    a[k - 1, k] = np.sqrt(k)
    return FockMatrix(a, spec.retained, label="a"), FockMatrix(a.conj().T.copy(), spec.retained, label="a^dag")


def _certify(entries: np.ndarray, spec: TruncationSpec, label: str, what: str) -> FockMatrix:
    dev = math.sqrt(edge_mass(entries[:, : spec.retained]))
    ok = dev < CERT_TOL
    if not ok:
        warnings.warn(
            f"{what} not certified at buffer {spec.buffer}: edge deviation {dev:.3g} >= {CERT_TOL:g}",
            TruncationWarning,
            stacklevel=3,
        )
    return FockMatrix(entries, spec.retained, dev, ok, label)


def _generator_displacement(alpha: complex, nb: int) -> np.ndarray:
    k = np.arange(1, nb)
    g = np.zeros((nb, nb), complex)
    g[k, k - 1] = alpha * np.sqrt(k)
    g[k - 1, k] = -np.conj(alpha) * np.sqrt(k)
    return g


def _generator_squeeze(zeta: complex, nb: int) -> np.ndarray:
    k = np.arange(nb - 2)
    c = np.sqrt((k + 1.0) * (k + 2.0))
    g = np.zeros((nb, nb), complex)
    g[k + 2, k] = -0.5 * zeta * c
    g[k, k + 2] = 0.5 * np.conj(zeta) * c
    return g


def displacement(alpha: complex, spec: TruncationSpec, method: str = "spectral") -> FockMatrix:
    """D(alpha) = exp(alpha a^dag - alpha* a) at buffer dimension."""
    alpha = complex(alpha)
    nb = spec.buffer
    if abs(alpha) ** 2 > spec.retained / 4:
        warnings.warn(f"|alpha|^2 = {abs(alpha)**2:.3g} exceeds retained/4", TruncationWarning, stacklevel=2)
    if method == "spectral":
        m = apply_displacement(np.eye(nb, dtype=complex), alpha, nb)
    elif method == "pade":
        m = scipy.linalg.expm(_generator_displacement(alpha, nb))
    else:
        raise DomainError(f"unknown method {method!r}")
    return _certify(m, spec, f"D({alpha:.6g})", "displacement")


def squeeze(zeta: complex, spec: TruncationSpec, method: str = "spectral") -> FockMatrix:
    """S(zeta) = exp(-zeta/2 a^dag^2 + zeta*/2 a^2) at buffer dimension."""
    zeta = complex(zeta)
    nb = spec.buffer
    if math.exp(2 * abs(zeta)) > spec.retained / 4:
        warnings.warn(f"e^(2r) = {math.exp(2 * abs(zeta)):.3g} exceeds retained/4", TruncationWarning, stacklevel=2)
    if method == "spectral":
        m = apply_squeeze(np.eye(nb, dtype=complex), zeta, nb)
    elif method == "pade":
        m = scipy.linalg.expm(_generator_squeeze(zeta, nb))
    else:
        raise DomainError(f"unknown method {method!r}")
    return _certify(m, spec, f"S({zeta:.6g})", "squeeze")


def bogoliubov_ops(alpha: complex, zeta: complex, spec: TruncationSpec) -> tuple[FockMatrix, FockMatrix]:
    """B = cosh r a + e^{i phi} sinh r a^dag - alpha, and its adjoint."""
    zeta = complex(zeta)
    r = abs(zeta)
    ephi = zeta / r if r > 0 else 1.0
    a, ad = ladder_ops(spec)
    sh = _mutations.sinh_sign() * math.sinh(r)
    bm = math.cosh(r) * a.entries + ephi * sh * ad.entries - complex(alpha) * np.eye(spec.buffer)
    return FockMatrix(bm, spec.retained, label="B"), FockMatrix(bm.conj().T.copy(), spec.retained, label="B^dag")


def bogoliubov_conjugation(alpha: complex, zeta: complex, spec: TruncationSpec) -> FockMatrix:
    """S(zeta) D(alpha) a D(-alpha) S(-zeta), the cross-check form of B."""
    nb = spec.buffer
    a, _ = ladder_ops(spec)
    x = apply_squeeze(np.eye(nb, dtype=complex), -complex(zeta), nb)
    x = apply_displacement(x, -complex(alpha), nb)
    x = apply_displacement(a.entries @ x, complex(alpha), nb)
    left = apply_squeeze(x, complex(zeta), nb)
    return FockMatrix(left, spec.retained, label="SDaD'S'")


def basis_state(alpha: complex, zeta: complex, n: int, spec: TruncationSpec, norm_tol: float = 1e-8) -> FockVector:
    """S(zeta) D(alpha) |n> at buffer dimension."""
    nb = spec.buffer
    if not 0 <= n < spec.retained:
        raise DomainError(f"n must lie in [0, {spec.retained}), got {n}")
    v = np.zeros(nb, complex)
    v[n] = 1.0
    v = apply_squeeze(apply_displacement(v, complex(alpha), nb), complex(zeta), nb)
    em = edge_mass(v)
    head = float(np.sum(np.abs(v[: spec.retained]) ** 2))
    if abs(1.0 - head) > norm_tol or em > norm_tol**2:
        raise TruncationError(
            f"state |zeta, alpha, {n}> does not fit retained dimension {spec.retained}",
            retained_norm2=head,
            edge_mass=em,
        )
    return FockVector(v, {"edge_mass": em})


def bn_numeric(
    alpha: complex,
    zeta: complex,
    beta: complex,
    spec: TruncationSpec,
    edge_tol: float = EDGE_TOL,
    max_buffer: int = MAX_BUFFER,
) -> AmplitudeSeries:
    """b_n = <n| D(-alpha) S(-zeta) D(beta) |0> for n < retained.

    The buffer doubles until every intermediate state keeps its edge-band
    mass below ``edge_tol``.
    """
    nb = spec.buffer
    while True:
        v = np.zeros(nb, complex)
        v[0] = 1.0
        v = apply_displacement(v, complex(beta), nb)
        e1 = edge_mass(v)
        v = apply_squeeze(v, -complex(zeta), nb)
        e2 = edge_mass(v)
        v = apply_displacement(v, -complex(alpha), nb)
        e3 = edge_mass(v)
        worst = max(e1, e2, e3)
        if worst <= edge_tol or nb * 2 > max_buffer:
            break
        nb *= 2
    certified = worst <= edge_tol
    if not certified:
        warnings.warn(
            f"oracle coefficients not certified: edge mass {worst:.3g} at buffer {nb}",
            TruncationWarning,
            stacklevel=2,
        )
    w = np.abs(v) ** 2
    tail = math.fsum(w[spec.retained :])
    return AmplitudeSeries(
        spec.retained - 1,
        v[: spec.retained],
        tail,
        SOURCE_ORACLE,
        {"buffer_used": nb, "edge_mass": worst, "certified": certified, "total_norm2": math.fsum(w)},
    )


# ---------------------------------------------------------------------------
# identity residuals (retained interior block, column-block evaluation)
# ---------------------------------------------------------------------------


def _interior(spec: TruncationSpec) -> int:
    return max(1, spec.retained - edge_width(spec.retained))


def _unit_columns(nb: int, k: int) -> np.ndarray:
    return np.eye(nb, k, dtype=complex)


def reorder_squeeze_displacement_residual(beta: complex, zeta: complex, spec: TruncationSpec) -> dict:
    """max |S(-zeta) D(beta) - D(gamma) S(-zeta)| over the interior block.

    gamma comes from ``states.gamma_param``.
    """
    nb = spec.buffer
    k = _interior(spec)
    beta = complex(beta)
    zeta = complex(zeta)
    r = abs(zeta)
    phi = math.atan2(zeta.imag, zeta.real) if r > 0 else 0.0
    gamma = gamma_param(abs(beta), math.atan2(beta.imag, beta.real), r, phi)
    e = _unit_columns(nb, k)
    d1 = apply_displacement(e, beta, nb)
    lhs = apply_squeeze(d1, -zeta, nb)
    s1 = apply_squeeze(e, -zeta, nb)
    rhs = apply_displacement(s1, gamma, nb)
    em = max(edge_mass(d1), edge_mass(lhs), edge_mass(s1), edge_mass(rhs))
    res = float(np.max(np.abs(lhs[:k] - rhs[:k])))
    return {"residual": res, "edge_mass": em, "gamma": gamma}


def displacement_composition_residual(alpha: complex, gamma: complex, spec: TruncationSpec) -> dict:
    """max |D(-alpha) D(gamma) - e^{-(alpha gamma* - gamma alpha*)/2} D(gamma - alpha)| on the interior."""
    nb = spec.buffer
    k = _interior(spec)
    alpha = complex(alpha)
    gamma = complex(gamma)
    e = _unit_columns(nb, k)
    d1 = apply_displacement(e, gamma, nb)
    lhs = apply_displacement(d1, -alpha, nb)
    expo = -(alpha * gamma.conjugate() - gamma * alpha.conjugate()) / 2
    phase = np.exp(expo)
    rhs = phase * apply_displacement(e, gamma - alpha, nb)
    em = max(edge_mass(d1), edge_mass(lhs), edge_mass(rhs))
    res = float(np.max(np.abs(lhs[:k] - rhs[:k])))
    return {"residual": res, "edge_mass": em, "phase_modulus_error": abs(abs(phase) - 1.0), "exponent_real": expo.real}


def ladder_residual(alpha: complex, zeta: complex, n_max: int, spec: TruncationSpec) -> dict:
    """max over n <= n_max of |B|n'> - sqrt(n)|(n-1)'>| and |B^dag|n'> - sqrt(n+1)|(n+1)'>|."""
    b, bd = bogoliubov_ops(alpha, zeta, spec)
    states = [basis_state(alpha, zeta, n, spec).amplitudes for n in range(n_max + 2)]
    worst_lo = 0.0
    worst_hi = 0.0
    for n in range(n_max + 1):
        v = b.entries @ states[n]
        want = math.sqrt(n) * states[n - 1] if n > 0 else 0.0
        worst_lo = max(worst_lo, float(np.linalg.norm(v - want)))
        v = bd.entries @ states[n]
        worst_hi = max(worst_hi, float(np.linalg.norm(v - math.sqrt(n + 1) * states[n + 1])))
    return {"residual": max(worst_lo, worst_hi), "lowering": worst_lo, "raising": worst_hi}


def commutator_residual(alpha: complex, zeta: complex, spec: TruncationSpec) -> float:
    """max |[B, B^dag] - I| on the interior block."""
    b, bd = bogoliubov_ops(alpha, zeta, spec)
    c = b.entries @ bd.entries - bd.entries @ b.entries
    k = _interior(spec)
    return float(np.max(np.abs(c[:k, :k] - np.eye(k))))


def orthonormality_residual(alpha: complex, zeta: complex, n_max: int, spec: TruncationSpec) -> float:
    vs = np.stack([basis_state(alpha, zeta, n, spec).amplitudes for n in range(n_max + 1)], axis=1)
    g = vs.conj().T @ vs
    return float(np.max(np.abs(g - np.eye(n_max + 1))))
