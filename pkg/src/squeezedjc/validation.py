"""Invariant checks run by ``squeezedjc validate``.

Each check returns a residual and a tolerance; the report maps check names to
``{"pass": bool, "residual": float | None, "tolerance": float}``.
"""

from __future__ import annotations

import math
import time
import warnings
from typing import Callable

import numpy as np

from . import fock_oracle as fo
from .dynamics import evolve, ground_prob, ground_prob_jcm, nonrwa_residual
from .errors import SqueezedJCError, TruncationWarning
from .states import ModelParams, bn_array, build_series

# (a, b, r, chi) sets with aligned phases
CAPTION_SETS = {
    "a10_b2_r0.1": (10.0, 2.0, 0.1, 0.0),
    "a0_b5_r0.9": (0.0, 5.0, 0.9, 0.0),
    "a15_b5_r0": (15.0, 5.0, 0.0, 0.0),
}
WIDE_SET = (0.0, 1.0, 2.3, 0.0)
PHASED_SET = {"a3_b2_r0.3_chi0.7": (3.0, 2.0, 0.3, 0.7)}
FAST_SETS = {"a15_b5_r0": (15.0, 5.0, 0.0, 0.0), "a0_b2_r0": (0.0, 2.0, 0.0, 0.0), "a1_b2_r0_chi0.7": (1.0, 2.0, 0.0, 0.7)}

SUITES = ("default", "fast")


def _params(entry) -> ModelParams:
    a, b, r, chi = entry
    return ModelParams.aligned(a=a, b=b, r=r, chi=chi)


def check_coefficients(entry, retained: int = 512) -> tuple[float, float]:
    p = _params(entry)
    oracle = fo.bn_numeric(p.alpha, p.zeta, p.beta, fo.TruncationSpec(retained))
    analytic, _ = bn_array(p, retained - 1, method="aligned")
    return float(np.max(np.abs(analytic - oracle.coefficients))), 1e-7


def check_normalization(entry) -> tuple[float, float]:
    s = build_series(_params(entry))
    return abs(s.mass + s.tail_mass - 1.0), 1e-6


def check_phase_marginal(entry, chis=(0.0, 1.0, 2.0), n_max: int = 200) -> tuple[float, float]:
    a, b, r, _ = entry
    mags = [np.abs(bn_array(_params((a, b, r, c)), n_max, method="aligned")[0]) for c in chis]
    return float(max(np.max(np.abs(m - mags[0])) for m in mags[1:])), 1e-12


def check_reorder_identity(b_values=(0.0, 1.0, 2.5, 5.0), r_values=(0.0, 0.5, 1.0),
                           phases=(0.0, math.pi / 2, math.pi)) -> tuple[float, float]:
    spec = fo.TruncationSpec(64, 512)
    worst = 0.0
    for b in b_values:
        for r in r_values:
            for phi in phases:
                for chi in phases:
                    d = fo.reorder_squeeze_displacement_residual(b * np.exp(1j * chi), r * np.exp(1j * phi), spec)
                    worst = max(worst, d["residual"])
    return worst, 1e-8


def check_composition_identity(mags=(0.0, 2.0, 5.0), phases=(0.0, math.pi / 2, math.pi)) -> tuple[float, float]:
    spec = fo.TruncationSpec(64, 512)
    worst = 0.0
    for am in mags:
        for gm in mags:
            for pa in phases:
                for pg in phases:
                    d = fo.displacement_composition_residual(am * np.exp(1j * pa), gm * np.exp(1j * pg), spec)
                    worst = max(worst, d["residual"], d["phase_modulus_error"] * 1e6)
    return worst, 1e-8


def check_ladder(cases=((0.0, 0.5), (3.0, 1.0), (2.0, 0.0)), phase: float = 0.7, n_max: int = 20) -> tuple[float, float]:
    spec = fo.TruncationSpec(512, 1024)
    worst = 0.0
    for am, r in cases:
        d = fo.ladder_residual(am * np.exp(1j * phase), r * np.exp(2j * phase), n_max, spec)
        worst = max(worst, d["residual"])
    return worst, 1e-8


def check_commutator(cases=((1.0 + 0.5j, 0.7 * np.exp(1j)), (3.0, 1.0))) -> tuple[float, float]:
    spec = fo.TruncationSpec(256)
    return max(fo.commutator_residual(a, z, spec) for a, z in cases), 1e-8


def check_bogoliubov_forms(cases=((1.0 + 0.5j, 0.7 * np.exp(1j)), (2.0, 0.5))) -> tuple[float, float]:
    spec = fo.TruncationSpec(64, 512)
    worst = 0.0
    k = spec.retained - fo.edge_width(spec.retained)
    for a, z in cases:
        lin, _ = fo.bogoliubov_ops(a, z, spec)
        conj = fo.bogoliubov_conjugation(a, z, spec)
        worst = max(worst, float(np.max(np.abs(lin.entries[:k, :k] - conj.entries[:k, :k]))))
    return worst, 1e-9


def check_route(entry, t_max: float = 30.0, t_steps: int = 3001) -> tuple[float, float]:
    p = _params(entry)
    t = np.linspace(0.0, t_max, t_steps)
    e = evolve(p, fo.TruncationSpec(512), t)
    g = ground_prob(build_series(p), p.lam, t)
    return float(np.max(np.abs(e.values - g.values))), 1e-5


def check_route_jcm(b: float = 2.0, t_max: float = 30.0, t_steps: int = 3001) -> tuple[float, float]:
    p = ModelParams(b=b)
    t = np.linspace(0.0, t_max, t_steps)
    e = evolve(p, fo.TruncationSpec(256), t)
    j = ground_prob_jcm(b, 1.0, t)
    return float(np.max(np.abs(e.values - j.values))), 1e-6


def check_recursion() -> tuple[float, float]:
    p = ModelParams(r=math.log(2.0), phi=math.pi, b=1.0)
    d = nonrwa_residual(p, fo.TruncationSpec(128), [0.5, 1.0, 1.5, 2.0], 1e-3)
    return d["residual"], 1e-4


def check_recursion_order() -> tuple[float, float]:
    """|ratio - 4| of residuals at dt and dt/2; passes when the ratio is in [3.5, 4.5]."""
    p = ModelParams(r=math.log(2.0), phi=math.pi, b=1.0)
    t = [0.5, 1.0, 1.5, 2.0]
    r1 = nonrwa_residual(p, fo.TruncationSpec(128), t, 1e-3)["residual"]
    r2 = nonrwa_residual(p, fo.TruncationSpec(128), t, 5e-4)["residual"]
    return abs(r1 / r2 - 4.0), 0.5


def _suite(name: str) -> dict[str, Callable[[], tuple[float, float]]]:
    checks: dict[str, Callable[[], tuple[float, float]]] = {}
    if name == "fast":
        for label, entry in FAST_SETS.items():
            checks[f"coefficients_vs_oracle[{label}]"] = lambda e=entry: check_coefficients(e, 256)
            checks[f"normalization[{label}]"] = lambda e=entry: check_normalization(e)
        checks["displacement_composition_identity"] = check_composition_identity
        checks["ladder_relations[r0]"] = lambda: check_ladder(cases=((2.0, 0.0),))
        checks["commutator_interior[r0]"] = lambda: check_commutator(cases=((2.0, 0.0),))
        checks["route_equivalence[jcm_b2]"] = lambda: check_route_jcm(t_max=15.0, t_steps=1501)
        return checks
    if name != "default":
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    sets = {**CAPTION_SETS, **PHASED_SET}
    for label, entry in sets.items():
        checks[f"coefficients_vs_oracle[{label}]"] = lambda e=entry: check_coefficients(e)
    checks["coefficients_vs_oracle[a0_b1_r2.3]"] = lambda: check_coefficients(WIDE_SET, 1024)
    for label, entry in {**sets, "a0_b2_r0": (0.0, 2.0, 0.0, 0.0)}.items():
        checks[f"normalization[{label}]"] = lambda e=entry: check_normalization(e)
    checks["phase_marginal[a3_b2_r0.3]"] = lambda: check_phase_marginal((3.0, 2.0, 0.3, 0.0))
    checks["squeeze_displacement_reordering"] = check_reorder_identity
    checks["displacement_composition_identity"] = check_composition_identity
    checks["ladder_relations"] = check_ladder
    checks["commutator_interior"] = check_commutator
    checks["bogoliubov_linear_vs_conjugation"] = check_bogoliubov_forms
    checks["route_equivalence[a10_b2_r0.1]"] = lambda: check_route(CAPTION_SETS["a10_b2_r0.1"])
    checks["route_equivalence[a0_b5_r0.9]"] = lambda: check_route(CAPTION_SETS["a0_b5_r0.9"])
    checks["route_equivalence[jcm_b2]"] = check_route_jcm
    checks["recursion_residual"] = check_recursion
    checks["recursion_second_order"] = check_recursion_order
    return checks


def run_checks(suite: str = "default", only: list[str] | None = None) -> dict[str, dict]:
    """Run a suite; exceptions inside a check mark it failed with residual None."""
    report: dict[str, dict] = {}
    for name, fn in _suite(suite).items():
        if only and not any(tag in name for tag in only):
            continue
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                residual, tol = fn()
            ok = bool(np.isfinite(residual) and residual < tol)
            entry = {"pass": ok, "residual": float(residual), "tolerance": float(tol)}
        except (SqueezedJCError, ValueError, FloatingPointError) as exc:
            entry = {"pass": False, "residual": None, "tolerance": None, "error": f"{type(exc).__name__}: {exc}"}
        entry["seconds"] = round(time.perf_counter() - t0, 3)
        report[name] = entry
    return report


def all_passed(report: dict[str, dict]) -> bool:
    return all(v["pass"] for v in report.values())
