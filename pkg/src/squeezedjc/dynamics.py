"""Atom-field time evolution.

Times are dimensionless ``lambda * t`` throughout; the physical time for a
grid value tau is tau / lambda.

Atomic index 1 is the ground state and 2 the excited state. In the
squeezed-coherent basis the Hamiltonian only couples (1, n) with (2, n-1), so
each doublet is a two-level system with Rabi frequency
Omega_n = sqrt(delta^2 + 4 lambda^2 n).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gammaln

from . import _mutations, kernels
from .errors import DomainError, TruncationError, TruncationWarning
from .fock_oracle import FockMatrix, TruncationSpec, apply_displacement
from .states import AmplitudeSeries, ModelParams

B_BASIS = "B_basis"
A_BASIS = "a_basis"

STEP = 1e-3
EDGE_FRACTION = 0.10
EDGE_TOL = 1e-8
MAX_RETAINED = 2048
PROB_SLACK = 1e-12
MIN_AVERAGE_WINDOW = 10.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class JointState:
    """Amplitudes on {ground, excited} x photon number.

    In the B basis ``c2[m]`` is the excited amplitude with m = n - 1 quanta in
    the B mode, so ``len(c2) == n_max``. In the a basis both arrays share
    the Fock index.
    """

    basis: str
    n_max: int
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        if self.basis not in (B_BASIS, A_BASIS):
            raise DomainError(f"unknown basis {self.basis!r}")
        want2 = self.n_max if self.basis == B_BASIS else self.n_max + 1
        if len(self.c1) != self.n_max + 1 or len(self.c2) != want2:
            raise DomainError("amplitude array lengths do not match n_max and basis")

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.c1) ** 2) + np.sum(np.abs(self.c2) ** 2))

    @property
    def ground_population(self) -> float:
        return float(np.sum(np.abs(self.c1) ** 2))

    def excitation_number(self) -> float:
        """<N> = sum n |c1_n|^2 + sum (m + 1) |c2_m|^2 (B basis)."""
        if self.basis != B_BASIS:
            raise DomainError("excitation number is defined in the B basis")
        n = np.arange(self.n_max + 1)
        m = np.arange(self.n_max)
        return float(np.sum(n * np.abs(self.c1) ** 2) + np.sum((m + 1) * np.abs(self.c2) ** 2))


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, float)
        v = np.asarray(self.values, float)
        if t.ndim != 1 or t.shape != v.shape:
            raise DomainError("times and values must be 1-D arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise DomainError("times must be strictly increasing")
        if v.size and (v.min() < -PROB_SLACK or v.max() > 1 + PROB_SLACK):
            raise DomainError(f"probabilities outside [0, 1]: min {v.min()!r}, max {v.max()!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def _grid(t_grid: Sequence[float]) -> np.ndarray:
    t = np.asarray(t_grid, float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("t_grid must be a non-empty 1-D array")
    if t[0] < 0:
        raise DomainError("t_grid must be nonnegative")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise DomainError("t_grid must be strictly increasing")
    return t


def rabi_freq(n, lam: float, delta: float):
    """Omega(n) = sqrt(delta^2 + 4 lambda^2 n)."""
    if np.any(np.asarray(n) < 0):
        raise DomainError("n must be >= 0")
    if not lam > 0:
        raise DomainError("lambda must be > 0")
    out = np.sqrt(delta * delta + 4.0 * lam * lam * np.asarray(n, float))
    return float(out) if np.ndim(out) == 0 else out


def amplitudes_analytic(series: AmplitudeSeries, lam: float, delta: float, t: float) -> JointState:
    """Exact B-basis amplitudes at lambda * t = ``t`` from ground-state initial conditions."""
    if t < 0:
        raise DomainError("t must be >= 0")
    b = series.coefficients
    n = np.arange(series.n_max + 1)
    om = rabi_freq(n, lam, delta) / lam
    half = 0.5 * om * t
    safe = np.where(om > 0, om, 1.0)
    ratio = np.where(om > 0, (delta / lam) / safe, 0.0)
    c1 = b * (np.cos(half) + 1j * ratio * np.sin(half))
    c2_full = -b * np.where(om > 0, 2.0 * np.sqrt(n) / safe, 0.0) * np.sin(half)
    if series.n_max >= 0 and om[0] == 0:
        c1[0] = b[0]
    return JointState(B_BASIS, series.n_max, c1, c2_full[1:].copy())


def _doublet_weights(weights: np.ndarray, lam: float, delta: float):
    n = np.arange(weights.size)
    om = rabi_freq(n, lam, delta) / lam
    safe = np.where(om > 0, om, 1.0)
    kappa = np.where(om > 0, 4.0 * n / (safe * safe), 0.0)
    return om, kappa


def ground_prob(series: AmplitudeSeries, lam: float, t_grid, delta: float = 0.0) -> TimeSeries:
    """P(t) = sum_n |b_n|^2 [1 - kappa_n (1 - cos Omega_n t) / 2].

    At resonance kappa_n = 1 for n >= 1 and this is
    (1/2) sum |b_n|^2 [1 + cos(2 lambda sqrt(n) t)].
    """
    t = _grid(t_grid)
    w = series.weights
    om, kappa = _doublet_weights(w, lam, delta)
    vals = kernels.ground_population(np.ascontiguousarray(w), om, kappa, t)
    meta = {"tail_mass": series.tail_mass, "n_max": series.n_max, "source": series.source, "delta": delta}
    return TimeSeries(t, np.clip(vals, 0.0, 1.0), meta)


def poisson_weights(b: float, tol: float = 1e-17) -> np.ndarray:
    """e^{-b^2} b^{2n} / n! truncated once the remaining mass is below ``tol``."""
    if b < 0:
        raise DomainError("b must be >= 0")
    if b == 0:
        return np.ones(1)
    mu = b * b
    n_hi = int(mu + 14.0 * math.sqrt(mu) + 40)
    n = np.arange(n_hi + 1)
    w = np.exp(n * math.log(mu) - mu - gammaln(n + 1.0))
    cum = np.cumsum(w)
    last = int(np.nonzero(1.0 - cum < tol)[0][0]) if np.any(1.0 - cum < tol) else n_hi
    return w[: max(last, int(mu)) + 1]


def ground_prob_jcm(b: float, lam: float, t_grid, delta: float = 0.0) -> TimeSeries:
    """Revival curve for an ordinary coherent field of amplitude b."""
    t = _grid(t_grid)
    w = poisson_weights(b)
    om, kappa = _doublet_weights(w, lam, delta)
    vals = kernels.ground_population(w, om, kappa, t)
    return TimeSeries(t, np.clip(vals, 0.0, 1.0), {"b": b, "n_terms": int(w.size), "delta": delta})


# ---------------------------------------------------------------------------
# direct integration in the photon-number basis
# ---------------------------------------------------------------------------


def hamiltonian_coefficients(params: ModelParams, form: str = "expanded") -> tuple[float, complex, complex, complex]:
    """(hd, p, q, s) such that
        (H psi)_2 = hd c2 + p c1 + q a c1 + s a^dag c1
        (H psi)_1 = -hd c1 + p* c2 + q* a^dag c2 + s* a c2.
    """
    lam = params.lam
    hd = 0.5 * params.delta
    if form == "expanded":
        sh = _mutations.sinh_sign() * math.sinh(params.r)
        ephi = complex(math.cos(params.phi), math.sin(params.phi))
        return hd, 1j * lam * params.alpha, -1j * lam * math.cosh(params.r), -1j * lam * sh * ephi
    if form == "ultrastrong":
        if params.a != 0.0 or abs(params.phi - math.pi) > 1e-12:
            raise DomainError("the ultrastrong form assumes alpha = 0 and phi = pi")
        g = 0.5 * math.exp(params.r)
        return hd, 0j, -1j * lam * g, 1j * lam * g
    raise DomainError(f"unknown Hamiltonian form {form!r}")


def hamiltonian_matrix(params: ModelParams, spec: TruncationSpec, form: str = "expanded") -> FockMatrix:
    """Dense 2N x 2N Hamiltonian; index = atom * N + n with atom 0 = ground."""
    n_dim = spec.retained
    hd, p, q, s = hamiltonian_coefficients(params, form)
    h = np.zeros((2 * n_dim, 2 * n_dim), complex)
    g = np.arange(n_dim)
    e = n_dim + g
    h[g, g] = -hd
    h[e, e] = hd
    h[e, g] = p
    k = np.arange(n_dim - 1)
    sq = np.sqrt(k + 1.0)
    h[e[k], g[k + 1]] = q * sq  # a c1
    h[e[k + 1], g[k]] = s * sq  # a^dag c1
    # every coupling set above sits below the diagonal; mirror it
    h = h + np.tril(h, -1).conj().T
    return FockMatrix(h, 2 * n_dim, label=f"H[{form}]")


def coherent_vector(beta: complex, n_dim: int, pad: int = 128) -> np.ndarray:
    """Fock amplitudes of D(beta)|0>, computed at n_dim + pad and truncated."""
    v = np.zeros(n_dim + pad, complex)
    v[0] = 1.0
    return apply_displacement(v, complex(beta))[:n_dim]


def _segments(t: np.ndarray, lam: float, step: float):
    """Integer step counts and step sizes (physical time) joining 0 and the grid points."""
    pts = np.concatenate(([0.0], t)) if t[0] > 0 else t
    dt = np.diff(pts)
    steps = np.maximum(1, np.ceil(dt / step - 1e-9)).astype(np.int64)
    hs = dt / steps / lam
    return steps, hs, t[0] > 0


def _propagate(c1, c2, coeffs, steps, hs, edge_start, edge_tol, chunk: int = 64):
    """Run the RK4 kernel in chunks, stopping early on an edge breach."""
    hd, p, q, s = coeffs
    pops = [np.array([np.sum(np.abs(c1) ** 2)])]
    norms = [np.array([pops[0][0] + np.sum(np.abs(c2) ** 2)])]
    edges = [np.array([np.sum(np.abs(c1[edge_start:]) ** 2) + np.sum(np.abs(c2[edge_start:]) ** 2)])]
    for i in range(0, len(steps), chunk):
        pop, nrm, edg = kernels.rk4_propagate(
            c1, c2, float(hd), complex(p), complex(q), complex(s), steps[i : i + chunk], hs[i : i + chunk], edge_start
        )
        pops.append(pop[1:])
        norms.append(nrm[1:])
        edges.append(edg[1:])
        if edg.max() > edge_tol:
            return None, float(edg.max())
    return (np.concatenate(pops), np.concatenate(norms), np.concatenate(edges)), None


def evolve(
    params: ModelParams,
    spec: TruncationSpec,
    t_grid,
    form: str = "expanded",
    step: float = STEP,
    edge_tol: float = EDGE_TOL,
    max_retained: int = MAX_RETAINED,
) -> TimeSeries:
    """Ground-state probability from direct RK4 integration in the Fock basis.

    The field starts in D(beta)|0> and the atom in the ground state. ``step``
    is lambda * dt. When the top 10% of Fock levels collect more than
    ``edge_tol`` population the dimension doubles and the run restarts.
    """
    t = _grid(t_grid)
    coeffs = hamiltonian_coefficients(params, form)
    steps, hs, skip_first = _segments(t, params.lam, step)
    n_dim = spec.retained
    history = []
    while True:
        c1 = np.ascontiguousarray(coherent_vector(params.beta, n_dim))
        c2 = np.zeros(n_dim, complex)
        edge_start = n_dim - max(1, int(round(EDGE_FRACTION * n_dim)))
        out, breach = _propagate(c1, c2, coeffs, steps, hs, edge_start, edge_tol)
        if out is not None:
            break
        history.append({"retained": n_dim, "edge_population": breach})
        if n_dim * 2 > max_retained:
            raise TruncationError(
                f"state reached the Fock ceiling at retained dimension {n_dim}",
                retained=n_dim,
                edge_population=breach,
                escalations=history,
            )
        warnings.warn(
            f"edge population {breach:.3g} at dimension {n_dim}; doubling",
            TruncationWarning,
            stacklevel=2,
        )
        n_dim *= 2
    pop, nrm, edg = out
    if skip_first:
        pop, nrm, edg = pop[1:], nrm[1:], edg[1:]
    t_span = max(t[-1], 1e-300)
    drift = float(np.max(np.abs(nrm - nrm[0])))
    meta = {
        "form": form,
        "retained_used": n_dim,
        "escalations": history,
        "initial_norm": float(nrm[0]),
        "max_norm_drift": drift,
        "norm_drift_per_unit_time": drift / t_span,
        "max_edge_population": float(edg.max()),
        "step": step,
    }
    return TimeSeries(t, np.clip(pop, 0.0, 1.0), meta)


def _check_recursion_regime(params: ModelParams) -> None:
    if params.a != 0 or abs(params.phi - math.pi) > 1e-12 or params.delta != 0:
        raise DomainError("the recursion holds for alpha = 0, phi = pi and zero detuning")
    if abs(params.r - math.log(2.0)) > 1e-12:
        raise DomainError("the recursion is stated for r = ln 2")


def recursion_rhs(c: np.ndarray, lam: float) -> np.ndarray:
    """lam^2 [-(2n+1) c_n + sqrt((n+1)(n+2)) c_{n+2} + sqrt(n(n-1)) c_{n-2}]."""
    n = np.arange(c.size, dtype=float)
    out = -(2 * n + 1) * c
    out[:-2] += np.sqrt((n[:-2] + 1) * (n[:-2] + 2)) * c[2:]
    out[2:] += np.sqrt(n[2:] * (n[2:] - 1)) * c[:-2]
    return lam * lam * out


def nonrwa_residual(params: ModelParams, spec: TruncationSpec, t_grid, dt_inner: float = 1e-3) -> dict:
    """Largest mismatch between centred second differences of the amplitudes
    and the three-term recursion, over n <= 0.8 N and the sampled times."""
    _check_recursion_regime(params)
    t = _grid(t_grid)
    if t[0] < dt_inner:
        raise DomainError("sample times must exceed dt_inner")
    lam = params.lam
    coeffs = hamiltonian_coefficients(params, "ultrastrong")
    n_dim = spec.retained
    c1 = np.ascontiguousarray(coherent_vector(params.beta, n_dim))
    c2 = np.zeros(n_dim, complex)
    n_keep = int(0.8 * n_dim) + 1
    edge_start = n_dim - max(1, int(round(EDGE_FRACTION * n_dim)))
    h = dt_inner / lam
    now = 0.0
    worst = 0.0
    worst_edge = 0.0
    for tau in t:
        target = tau - dt_inner
        nsteps = int(round((target - now) / dt_inner))
        if nsteps > 0:
            _, _, e = kernels.rk4_propagate(c1, c2, *map(_scalar, coeffs), np.array([nsteps]), np.array([h]), edge_start)
            worst_edge = max(worst_edge, float(e.max()))
        now += nsteps * dt_inner
        snaps = [(c1.copy(), c2.copy())]
        for _ in range(2):
            _, _, e = kernels.rk4_propagate(c1, c2, *map(_scalar, coeffs), np.array([1]), np.array([h]), edge_start)
            worst_edge = max(worst_edge, float(e.max()))
            snaps.append((c1.copy(), c2.copy()))
        now += 2 * dt_inner
        for idx in (0, 1):
            lo, mid, hi = (s[idx] for s in snaps)
            lhs = (hi - 2 * mid + lo) / (h * h)
            res = np.abs(lhs - recursion_rhs(mid, lam))[:n_keep]
            worst = max(worst, float(res.max()))
    if worst_edge > EDGE_TOL:
        raise TruncationError("recursion check reached the Fock ceiling", edge_population=worst_edge, retained=n_dim)
    return {"residual": worst, "dt_inner": dt_inner, "retained": n_dim, "max_edge_population": worst_edge}


def _scalar(x):
    return float(x) if isinstance(x, float) else complex(x)


def evolve_ultrastrong(params: ModelParams, t_grid, grid_points: int | None = None) -> TimeSeries:
    """Ground-state probability under the ultrastrong-limit Hamiltonian, exactly.

    That Hamiltonian is (delta/2) sigma_3 + sqrt(2) lambda g p sigma_x with
    g = e^r / 2 and p the momentum quadrature, so each momentum slice is an
    independent two-level system. The coherent initial field has the Gaussian
    momentum density pi^{-1/2} exp(-(p - sqrt(2) Im beta)^2), integrated here
    on a uniform grid fine enough to resolve the fastest slice over the run.
    """
    if params.a != 0.0 or abs(params.phi - math.pi) > 1e-12:
        raise DomainError("the ultrastrong form assumes alpha = 0 and phi = pi")
    t = _grid(t_grid)
    lam = params.lam
    g = 0.5 * math.exp(params.r)
    p0 = math.sqrt(2.0) * params.beta.imag
    half_width = 8.5
    # d(Omega t)/dp never exceeds 2 sqrt(2) g t
    k_max = 2.0 * math.sqrt(2.0) * g * t[-1]
    if grid_points is None:
        dy = 2.0 * math.pi / (2.0 * (k_max + 40.0))
        grid_points = int(math.ceil(2 * half_width / dy)) + 1
    p = np.linspace(p0 - half_width, p0 + half_width, grid_points)
    dens = np.exp(-((p - p0) ** 2)) / math.sqrt(math.pi)
    w = dens * (p[1] - p[0])
    v = math.sqrt(2.0) * g * p
    dl = params.delta / lam
    om = np.sqrt(dl * dl + 4.0 * v * v)
    safe = np.where(om > 0, om, 1.0)
    kappa = np.where(om > 0, 4.0 * v * v / (safe * safe), 0.0)
    vals = kernels.ground_population(w, om, kappa, t)
    meta = {"form": "ultrastrong", "method": "momentum_quadrature", "grid_points": grid_points, "weight_sum": float(w.sum())}
    return TimeSeries(t, np.clip(vals, 0.0, 1.0), meta)


def longtime_average(series: TimeSeries, window: tuple[float, float], min_width: float = MIN_AVERAGE_WINDOW) -> float:
    """Trapezoidal mean of P over ``window``; the window must span ``min_width``."""
    lo, hi = window
    if hi - lo < min_width:
        raise DomainError(f"window width {hi - lo:g} is below the minimum {min_width:g}")
    t = series.times
    if lo < t[0] - 1e-12 or hi > t[-1] + 1e-12:
        raise DomainError("window lies outside the series range")
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 2:
        raise DomainError("window contains fewer than two samples")
    ts = t[sel]
    return float(trapezoid(series.values[sel], ts) / (ts[-1] - ts[0]))
