"""Bundled scenario library and experiment runners.

Each scenario is a fully explicit JSON-able configuration (matrices in the
exchange format, permutations as integer arrays); builders construct the
algebra, dynamics and observable from it, and a runner per experiment kind
produces the report dictionary plus a deterministic CSV table.

Finite-dimensional substitutions are made explicit here rather than hidden:
trace-preserving *-automorphisms of the full matrix algebra are inner and
never ergodic for n >= 2, so ergodic homomorphism scenarios live on the
diagonal subalgebra via permutations (the classical model embedded on the
diagonal), while ergodic non-homomorphism scenarios use mixed-unitary
channels; genuinely continuous spectral measures do not exist here and are
shadowed by atom spreading or geometric correlation decay.  Every report
carries the relevant note in its header.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    AlgebraCtx, Operator, Projection, absval, lp_norm, operator_from_json,
    operator_to_json, trace,
)
from .averages import uniform_grid
from .dynamics import (
    Dynamics, KrausChannel, PermutationConjugation, dynamics_from_json,
    superoperator, validate,
)
from .errors import ConfigError, HypothesisViolation, NumericalFailure
from .experiments import (
    ergodic_deviation, find_witness, log_spaced_grid, mean_ergodic_check,
    theorem6_experiment, weak_mixing_experiment, ww_verdict,
)
from .sampling import rng, random_hermitian
from .spectral import correlation, eigen_split, spectral_measure, wiener_criterion
from .vandercorput import random_vdc_suite

__all__ = [
    "SCENARIOS",
    "bundled_config",
    "bundled_names",
    "list_rows",
    "build_context",
    "build_dynamics",
    "build_observable",
    "run_scenario",
    "RunResult",
]


# ---------------------------------------------------------------------------
# qubit helpers for the channel scenarios
# ---------------------------------------------------------------------------

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULIS = (_SX, _SY, _SZ)


def _qubit_rotation(axis, angle) -> np.ndarray:
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    ns = ax[0] * _SX + ax[1] * _SY + ax[2] * _SZ
    return np.cos(angle / 2) * np.eye(2, dtype=complex) - 1j * np.sin(angle / 2) * ns


def _bloch_matrix(weights, unitaries) -> np.ndarray:
    m = np.zeros((3, 3))
    for j in range(3):
        out = sum(w * (u.conj().T @ _PAULIS[j] @ u) for w, u in zip(weights, unitaries))
        for i in range(3):
            m[i, j] = (np.trace(_PAULIS[i] @ out) / 2).real
    return m


def _cycle_perm(n: int):
    return [(i + 1) % n for i in range(n)]


def _tensor_shift_perm(sites: int, local_dim: int = 2):
    """Cyclic shift of tensor factors on a register of `sites` qudits:
    output digit j is input digit (j-1) mod sites."""
    n = local_dim ** sites
    perm = []
    for i in range(n):
        digits = [(i // local_dim ** j) % local_dim for j in range(sites)]
        out = [digits[(j - 1) % sites] for j in range(sites)]
        perm.append(sum(d * local_dim ** j for j, d in enumerate(out)))
    return perm


def _op_json(mat: np.ndarray) -> dict:
    return operator_to_json(Operator(AlgebraCtx(mat.shape[0]), mat))


# channel constants (spectra verified in the test suite):
#   weak-mixing channel: non-unit spectrum of modulus <= 0.454, so the
#   resolvent stays O(1) on the whole weight grid;
#   slow-spectator channel: two conjugations by the same rotation angle
#   about slightly tilted axes leave one near-unit mode (gap ~ 4.8e-5)
#   whose left eigenvector the observable avoids, so the averages settle
#   at the O(1/n) rate while the budget is set by the tiny gap.
_WEAKMIX_TERMS = [
    (0.40, ((1.0, 1.0, 1.0), 1.9)),
    (0.35, ((1.0, -0.6, 0.3), 2.5)),
    (0.25, ((0.2, 1.0, -0.8), 1.3)),
]
_SPECTATOR_BETA = 0.008
_SPECTATOR_ANGLE = 2 * math.pi / 3


def _weakmix_dynamics_json():
    return {
        "kind": "kraus",
        "terms": [
            {"weight": w, "u": _op_json(_qubit_rotation(axis, angle))}
            for w, (axis, angle) in _WEAKMIX_TERMS
        ],
    }


def _spectator_channel():
    b = _SPECTATOR_BETA
    u1 = _qubit_rotation((math.sin(b), 0.0, math.cos(b)), _SPECTATOR_ANGLE)
    u2 = _qubit_rotation((-math.sin(b), 0.0, math.cos(b)), _SPECTATOR_ANGLE)
    return (0.5, 0.5), (u1, u2)


def _spectator_observable() -> np.ndarray:
    """Unit-L2 Hermitian whose Bloch vector is orthogonal to the left
    eigenvector of the near-unit mode (the resolvent pole closest to 1)."""
    weights, us = _spectator_channel()
    m = _bloch_matrix(weights, us)
    evals, vl = np.linalg.eig(m.T)
    slow = int(np.argmin(np.abs(1.0 - evals)))
    w = np.real(vl[:, slow])
    w = w / np.linalg.norm(w)
    x = np.array([1.0, 0.0, 0.0])
    x = x - (x @ w) * w
    x = x / np.linalg.norm(x)
    return x[0] * _SX + x[1] * _SY + x[2] * _SZ


# ---------------------------------------------------------------------------
# bundled scenarios
# ---------------------------------------------------------------------------

def bundled_config(name: str) -> dict:
    """Fully explicit configuration of a bundled scenario."""
    if name not in _BUILDERS:
        raise ConfigError(f"unknown bundled scenario {name!r}")
    return _BUILDERS[name]()


def bundled_names():
    return sorted(_BUILDERS)


def _cfg_classical_q12():
    return {
        "version": 1,
        "name": "classical-q12",
        "algebra": {"dim": 12, "tol": 1e-10},
        "dynamics": {"kind": "permutation", "perm": _cycle_perm(12)},
        "observable": {
            "generator": "diagonal_indicator", "index": 0, "seed": 0,
            "mean_zero": True, "normalize": {"norm": "l2", "value": 1.0},
        },
        "experiment": "theorem6",
        "params": {
            "N": 600, "m_sweep": [0, 4, 16, 64],
            "n_sweep": [12, 60, 150, 300, 450, 600],
            "lambda_grid_size": 1024, "eps": 0.1,
        },
        "notes": "12-cycle on the diagonal subalgebra: the classical ergodic "
                 "rotation model embedded on the diagonal; fully atomic spectrum.",
    }


def _cfg_tensorshift_4q():
    return {
        "version": 1,
        "name": "tensorshift-4q",
        "algebra": {"dim": 16, "tol": 1e-10},
        "dynamics": {"kind": "permutation", "perm": _tensor_shift_perm(4)},
        "observable": {
            "generator": "site_z", "site": 0, "sites": 4, "seed": 0,
            "mean_zero": False, "normalize": {"norm": "l2", "value": 1.0},
        },
        "experiment": "theorem6",
        "params": {
            "N": 200, "m_sweep": [0, 4, 16, 64],
            "n_sweep": [4, 20, 50, 100, 150, 200],
            "lambda_grid_size": 1024, "eps": 0.6,
        },
        "notes": "cyclic tensor-factor shift on four qubits with a single-site "
                 "traceless observable; the averaged shifted products are not "
                 "scalar on the full algebra, so the bound chain runs under a "
                 "scalarizing compression whose trace defect is reported.",
    }


def _cfg_channel_weakmix():
    return {
        "version": 1,
        "name": "channel-weakmix",
        "algebra": {"dim": 2, "tol": 1e-10},
        "dynamics": _weakmix_dynamics_json(),
        "observable": {
            "generator": "traceless_random", "seed": 11,
            "mean_zero": True, "normalize": {"norm": "l2", "value": 0.002},
        },
        "experiment": "weakmix",
        "params": {
            "N": 10000, "lambda_grid_size": 1024,
            "assert_nonunit_final": 1e-5, "assert_lambda1_dist": 1e-6,
        },
        "notes": "primitive mixed-unitary qubit channel, weakly mixing; the "
                 "averages decay at the Cesaro O(1/n) rate, so the absolute "
                 "targets fix the observable scale (0.002) rather than the "
                 "unit normalization used elsewhere.",
    }


def _cfg_channel_ergodic():
    weights, us = _spectator_channel()
    return {
        "version": 1,
        "name": "channel-ergodic",
        "algebra": {"dim": 2, "tol": 1e-10},
        "dynamics": {
            "kind": "kraus",
            "terms": [{"weight": w, "u": _op_json(u)} for w, u in zip(weights, us)],
        },
        "observable": {
            "generator": "explicit", "matrix": _op_json(_spectator_observable()),
            "seed": 0, "mean_zero": False, "normalize": {"norm": "l2", "value": 1.0},
        },
        "experiment": "ergodic",
        "params": {"budget_factor": 10.0, "target": 1e-6, "points": 40},
        "notes": "primitive qubit channel with a spectator mode: the gap is set "
                 "by a near-unit eigenvalue whose left eigenvector the "
                 "observable avoids, so the mean ergodic deviation reaches the "
                 "target inside the mixing-time budget (implied constant ~2).",
    }


def _cfg_ergodic_q12():
    return {
        "version": 1,
        "name": "ergodic-q12",
        "algebra": {"dim": 12, "tol": 1e-10},
        "dynamics": {"kind": "permutation", "perm": _cycle_perm(12)},
        "observable": {
            "generator": "diagonal_random", "seed": 3,
            "mean_zero": False, "normalize": {"norm": "l2", "value": 1.0},
        },
        "experiment": "ergodic",
        "params": {"N": 72, "points": 24, "scope": "diagonal",
                   "exact_multiples": [12, 24, 36], "exact_tol": 1e-13},
        "notes": "q-cycle on the diagonal: ergodic on the commutative scenario "
                 "algebra (single cycle), with exact equality of the averages "
                 "at full periods.",
    }


def _cfg_vdc_fuzz():
    return {
        "version": 1,
        "name": "vdc-fuzz-1000",
        "algebra": {"dim": 6, "tol": 1e-10},
        "dynamics": {"kind": "permutation", "perm": _cycle_perm(6)},
        "observable": {"generator": "random_hermitian", "seed": 1,
                       "mean_zero": False, "normalize": None},
        "experiment": "vdc",
        "params": {"count": 1000, "max_dim": 6, "max_n": 8, "seed": 20250810,
                   "gap_tol": 1e-9, "norm_tol": 1e-9},
        "notes": "randomized certificate suite over all admissible windows; "
                 "dynamics/observable fields are unused placeholders.",
    }


def _cfg_witness_q12():
    return {
        "version": 1,
        "name": "witness-q12",
        "algebra": {"dim": 12, "tol": 1e-10},
        "dynamics": {"kind": "permutation", "perm": _cycle_perm(12)},
        "observable": {"generator": "diagonal_indicator", "index": 0, "seed": 0,
                       "mean_zero": False, "normalize": None},
        "experiment": "witness",
        "params": {"gammas": [0.1, 0.01], "eps": 0.3, "delta_per_gamma": 5.0,
                   "N": 240, "lambda_grid_size": 1024},
        "notes": "diagonal dynamics keep everything diagonal, so the optimal "
                 "witnesses are computable by exhaustive enumeration and the "
                 "constructed ones are checked against them.",
    }


def _cfg_spectral_m2():
    return {
        "version": 1,
        "name": "spectral-m2",
        "algebra": {"dim": 2, "tol": 1e-10},
        "dynamics": {"kind": "unitary",
                     "u": _op_json(np.diag([1.0, np.exp(2j * np.pi * 0.237)]))},
        "observable": {"generator": "random_hermitian", "seed": 5,
                       "mean_zero": False, "normalize": {"norm": "l2", "value": 1.0}},
        "experiment": "spectral",
        "params": {"check_lags": 64, "reconstruction_tol": 1e-9, "wiener_m": 512},
        "notes": "diagonal-unitary conjugation on M_2: four explicit atoms.",
    }


def _cfg_spectral_m4():
    gen = rng(17)
    a = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
    q, r = np.linalg.qr(a)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return {
        "version": 1,
        "name": "spectral-m4",
        "algebra": {"dim": 4, "tol": 1e-10},
        "dynamics": {"kind": "unitary", "u": _op_json(q)},
        "observable": {"generator": "random_hermitian", "seed": 23,
                       "mean_zero": False, "normalize": {"norm": "l2", "value": 1.0}},
        "experiment": "spectral",
        "params": {"check_lags": 64, "reconstruction_tol": 1e-9, "wiener_m": 512},
        "notes": "Haar-unitary conjugation on M_4: sixteen generic atoms.",
    }


def _cfg_ww_qubit_kraus():
    return {
        "version": 1,
        "name": "ww-qubit-kraus",
        "algebra": {"dim": 2, "tol": 1e-10},
        "dynamics": _weakmix_dynamics_json(),
        "observable": {"generator": "traceless_random", "seed": 7,
                       "mean_zero": True, "normalize": {"norm": "l2", "value": 0.005}},
        "experiment": "ww",
        "params": {"N": 20000, "lambda_grid_size": 256, "eps": 0.1,
                   "mode": "bilateral", "assert_all_converged": True},
        "notes": "primitive channel, traceless observable: every weighted "
                 "average converges to zero at the Cesaro rate.",
    }


def _cfg_validate_channel():
    return {
        "version": 1,
        "name": "validate-qubit-channel",
        "algebra": {"dim": 2, "tol": 1e-10},
        "dynamics": _weakmix_dynamics_json(),
        "observable": {"generator": "random_hermitian", "seed": 2,
                       "mean_zero": False, "normalize": {"norm": "l2", "value": 1.0}},
        "experiment": "validate",
        "params": {"samples": 24, "seed": 9},
        "notes": "hypothesis checks for the mixed-unitary channel: trace "
                 "preservation, positivity, contraction; ergodic but not a "
                 "homomorphism.",
    }


_BUILDERS = {
    "classical-q12": _cfg_classical_q12,
    "tensorshift-4q": _cfg_tensorshift_4q,
    "channel-weakmix": _cfg_channel_weakmix,
    "channel-ergodic": _cfg_channel_ergodic,
    "ergodic-q12": _cfg_ergodic_q12,
    "vdc-fuzz-1000": _cfg_vdc_fuzz,
    "witness-q12": _cfg_witness_q12,
    "spectral-m2": _cfg_spectral_m2,
    "spectral-m4": _cfg_spectral_m4,
    "ww-qubit-kraus": _cfg_ww_qubit_kraus,
    "validate-qubit-channel": _cfg_validate_channel,
}

_FEATURES = {
    "classical-q12": ("uniform bound chain on the embedded classical cycle", "~15 s"),
    "tensorshift-4q": ("bound chain under a scalarizing compression", "~10 s"),
    "channel-weakmix": ("weak-mixing dichotomy of weighted averages", "~10 s"),
    "channel-ergodic": ("mean ergodic convergence at the gap budget", "~2 s"),
    "ergodic-q12": ("exact periodic mean ergodic equality", "~1 s"),
    "vdc-fuzz-1000": ("randomized operator inequality certificates", "~5 s"),
    "witness-q12": ("equicontinuity witness vs exhaustive oracle", "~20 s"),
    "spectral-m2": ("atomic measure reconstruction, 2x2", "~1 s"),
    "spectral-m4": ("atomic measure reconstruction, 4x4", "~1 s"),
    "ww-qubit-kraus": ("per-weight convergence verdicts on a channel", "~5 s"),
    "validate-qubit-channel": ("dynamics hypothesis validation", "~1 s"),
}


def list_rows():
    """(name, feature exercised, expected runtime) for every bundled scenario."""
    return [(n, _FEATURES[n][0], _FEATURES[n][1]) for n in bundled_names()]


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_context(cfg: dict) -> AlgebraCtx:
    alg = cfg.get("algebra", {})
    try:
        return AlgebraCtx(int(alg["dim"]), float(alg.get("tol", 1e-10)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad algebra block: {exc}") from exc


def build_dynamics(cfg: dict, ctx: AlgebraCtx) -> Dynamics:
    try:
        return dynamics_from_json(cfg["dynamics"], ctx)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad dynamics block: {exc}") from exc


def build_observable(cfg: dict, ctx: AlgebraCtx, seed_override=None) -> Operator:
    obs = cfg.get("observable", {})
    gen_kind = obs.get("generator")
    seed = int(obs.get("seed", 0)) if seed_override is None else int(seed_override)
    g = rng(seed)
    if gen_kind == "explicit":
        x = operator_from_json(obs["matrix"], ctx)
    elif gen_kind == "random_hermitian":
        x = random_hermitian(ctx, g)
    elif gen_kind == "traceless_random":
        x = random_hermitian(ctx, g)
        x = x - trace(x) * ctx.identity()
    elif gen_kind == "diagonal_indicator":
        x = ctx.matrix_unit(int(obs["index"]), int(obs["index"]))
    elif gen_kind == "diagonal_random":
        x = ctx.diag(g.standard_normal(ctx.dim))
    elif gen_kind == "matrix_unit":
        x = ctx.matrix_unit(int(obs["i"]), int(obs["j"]))
    elif gen_kind == "site_z":
        sites = int(obs["sites"])
        site = int(obs["site"])
        if ctx.dim != 2 ** sites:
            raise ConfigError("site_z needs dim = 2^sites")
        vals = [(-1.0) ** ((i >> site) & 1) for i in range(ctx.dim)]
        x = ctx.diag(vals)
    else:
        raise ConfigError(f"unknown observable generator {gen_kind!r}")
    if obs.get("mean_zero"):
        x = x - trace(x) * ctx.identity()
    norm_spec = obs.get("normalize")
    if norm_spec:
        kind, value = norm_spec["norm"], float(norm_spec["value"])
        cur = {"l1": lambda: lp_norm(x, 1), "l2": lambda: lp_norm(x, 2),
               "linf": lambda: lp_norm(x, math.inf)}.get(kind)
        if cur is None:
            raise ConfigError(f"unknown normalization {kind!r}")
        c = cur()
        if c == 0:
            raise ConfigError("cannot normalize the zero observable")
        x = x * (value / c)
    return x


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    name: str
    experiment: str
    ok: bool
    report: dict
    table_header: list
    table_rows: list
    notes: str = ""
    runtime_s: float = 0.0


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _per_lambda_rows(report):
    rows = []
    for v in report.per_lambda:
        rows.append((repr(v.angle), repr(v.cauchy_tail), v.verdict,
                     repr(v.final_one_sided), repr(v.final_bilateral),
                     repr(v.limit_scalar.real), repr(v.limit_scalar.imag),
                     repr(v.limit_scalar_residual)))
    return ["angle", "cauchy_tail", "verdict", "final_one_sided",
            "final_bilateral", "limit_re", "limit_im", "scalar_residual"], rows


def _ww_report_json(cfg, conv, mode, eps, vdc_chain=()):
    witness = conv.witness.to_json() if conv.witness is not None else None
    tau_p_perp = conv.witness.eps_achieved if conv.witness is not None else 0.0
    return {
        "scenario": cfg["name"],
        "mode": mode,
        "eps": eps,
        "tau_p_perp": tau_p_perp,
        "uniform_tail": conv.uniform_tail,
        "lipschitz_slack": conv.lipschitz_slack,
        "per_lambda": [v.to_json() for v in conv.per_lambda],
        "witness": witness,
        "vdc_chain": [p.to_json() for p in vdc_chain],
        "notes": list(conv.notes) + [cfg.get("notes", "")],
    }


def _run_validate(cfg, ctx, d, x, params, seed_override):
    rep = validate(d, samples=int(params.get("samples", 16)),
                   seed=int(params.get("seed", 0)))
    ok = rep.trace_preserving and rep.positive_on_samples and rep.contraction_inf
    rows = sorted((k, _fmt(v)) for k, v in rep.to_json().items()
                  if not isinstance(v, list))
    report = {"scenario": cfg["name"], "validate": rep.to_json(),
              "notes": [cfg.get("notes", "")]}
    return report, ["key", "value"], rows, ok


def _run_vdc(cfg, ctx, d, x, params, seed_override):
    if "n" in params and "m" in params:
        if int(params["m"]) > int(params["n"]) - 1:
            raise ConfigError("vdc requires 0 <= m <= n-1")
    seed = int(params.get("seed", 0)) if seed_override is None else int(seed_override)
    gap_tol = float(params.get("gap_tol", 1e-9))
    norm_tol = float(params.get("norm_tol", 1e-9))
    rows = []
    ok = True
    worst_gap, worst_excess = 0.0, -math.inf
    count = 0
    for idx, cert in random_vdc_suite(int(params.get("count", 100)),
                                      int(params.get("max_dim", 6)),
                                      int(params.get("max_n", 8)), seed):
        rel = cert.gap_min_eig / max(1.0, cert.gap_norm)
        excess = cert.lhs_norm - cert.rhs_norm_bound
        ok &= rel >= -gap_tol and excess <= norm_tol
        worst_gap = min(worst_gap, rel)
        worst_excess = max(worst_excess, excess)
        rows.append((idx,) + cert.csv_row())
        count += 1
    report = {"scenario": cfg["name"], "instances": count, "seed": seed,
              "worst_relative_gap": worst_gap, "worst_norm_excess": worst_excess,
              "ok": ok, "notes": [cfg.get("notes", "")]}
    header = ["instance", "n", "m", "dim", "gap_min_eig", "lhs", "rhs", "seed"]
    return report, header, rows, ok


def _run_spectral(cfg, ctx, d, x, params, seed_override):
    basis = eigen_split(d)
    meas = spectral_measure(d, x, basis=basis,
                            check_lags=int(params.get("check_lags", 64)))
    wm = int(params.get("wiener_m", 256))
    corr = correlation(d, x, L=wm)
    w_val = wiener_criterion(corr, wm)
    atom_sq = sum(m * m for _, m in meas.atoms)
    tol = float(params.get("reconstruction_tol", 1e-9))
    ok = meas.gamma_check_error <= tol
    rows = [("atom", repr(a), repr(m), "") for a, m in meas.atoms]
    rows += [("gamma", str(l), repr(corr.value(l).real), repr(corr.value(l).imag))
             for l in range(0, min(wm, 64) + 1)]
    rows += [("wiener", str(wm), repr(w_val), repr(atom_sq))]
    report = {"scenario": cfg["name"], "measure": meas.to_json(),
              "wiener_m": wm, "wiener_value": w_val,
              "sum_atom_masses_sq": atom_sq,
              "reconstruction_tol": tol, "ok": ok,
              "eigenbasis_complete": basis.complete,
              "notes": [cfg.get("notes", ""),
                        basis.warning or "eigen basis complete"]}
    return report, ["kind", "key", "value1", "value2"], rows, ok


def _run_witness(cfg, ctx, d, x, params, seed_override):
    angles = uniform_grid(int(params.get("lambda_grid_size", 1024)))
    n_hor = int(params.get("N", 240))
    eps = float(params.get("eps", 0.3))
    rows = []
    entries = []
    ok = True
    for gamma in params.get("gammas", [0.1]):
        x_g = x * (float(gamma) / lp_norm(absval(x), 1))
        w = find_witness(d, x_g, eps_budget=eps,
                         delta_target=float(params.get("delta_per_gamma", 5.0)) * float(gamma),
                         N=n_hor, angles=angles)
        entries.append({"gamma": gamma, **w.to_json()})
        rows.append((repr(float(gamma)), repr(w.eps_achieved), repr(w.delta_achieved),
                     w.method, str(w.feasible)))
        ok &= w.delta_achieved <= w.delta_requested + ctx.tol
    report = {"scenario": cfg["name"], "eps": eps, "witnesses": entries,
              "ok": ok, "notes": [cfg.get("notes", "")]}
    header = ["gamma", "eps_achieved", "delta_achieved", "method", "feasible"]
    return report, header, rows, ok


def _run_ww(cfg, ctx, d, x, params, seed_override):
    angles = uniform_grid(int(params.get("lambda_grid_size", 256)))
    conv = ww_verdict(d, x, eps=float(params.get("eps", 0.1)),
                      N=int(params.get("N", 1000)), angles=angles,
                      mode=params.get("mode", "bilateral"))
    ok = True
    if params.get("assert_all_converged"):
        ok = conv.all_converged
    header, rows = _per_lambda_rows(conv)
    report = _ww_report_json(cfg, conv, conv.mode, float(params.get("eps", 0.1)))
    report["ok"] = ok
    return report, header, rows, ok


def _run_weakmix(cfg, ctx, d, x, params, seed_override):
    angles = uniform_grid(int(params.get("lambda_grid_size", 1024)))
    rep = validate(d)
    conv = weak_mixing_experiment(d, x, N=int(params.get("N", 10000)),
                                  angles=angles, report=rep)
    nonunit_tol = params.get("assert_nonunit_final")
    lam1_tol = params.get("assert_lambda1_dist")
    ok = True
    if nonunit_tol is not None:
        ok &= conv.uniform_tail <= float(nonunit_tol)
    if lam1_tol is not None:
        ok &= conv.extras["lambda1_limit_dist_inf"] <= float(lam1_tol)
    header, rows = _per_lambda_rows(conv)
    report = _ww_report_json(cfg, conv, "bilateral", 0.0)
    report["lambda1_limit_dist_inf"] = conv.extras["lambda1_limit_dist_inf"]
    report["max_nonunit_final"] = conv.uniform_tail
    report["spectral_gap"] = rep.spectral_gap
    report["ok"] = ok
    return report, header, rows, ok


def _run_theorem6(cfg, ctx, d, x, params, seed_override):
    angles = uniform_grid(int(params.get("lambda_grid_size", 1024)))
    t6 = theorem6_experiment(
        d, x, eps=float(params.get("eps", 0.1)), N=int(params.get("N", 600)),
        m_sweep=params.get("m_sweep", [0, 4, 16, 64]), angles=angles,
        n_sweep=params.get("n_sweep"))
    ok = t6.chain_holds and t6.verdict in ("bWW", "bWW+WW")
    header = ["n", "m", "uniform_sup_sq", "bound", "bound_predicted", "term0"]
    rows = [(p.n, p.m, repr(p.uniform_sup_sq), repr(p.bound),
             repr(p.bound_predicted), repr(p.term0)) for p in t6.chain]
    report = _ww_report_json(cfg, t6.convergence, t6.verdict,
                             float(params.get("eps", 0.1)), vdc_chain=t6.chain)
    report["tau_p_perp"] = t6.tau_p_perp
    report["projection_method"] = t6.projection_method
    report["closed_form_deviation"] = t6.closed_form_deviation
    report["uniform_sup_sq_final"] = t6.uniform_sup_sq_final
    report["chain_holds"] = t6.chain_holds
    report["verdict"] = t6.verdict
    report["ok"] = ok
    return report, header, rows, ok


def _diagonal_fixed_dim(d) -> int:
    """Fixed-space dimension of the dynamics restricted to diagonals."""
    n = d.ctx.dim
    dm = np.empty((n, n))
    unit = np.zeros((n, n), dtype=complex)
    for j in range(n):
        unit[j, j] = 1.0
        dm[:, j] = np.real(np.diagonal(d.apply_mat(unit)))
        unit[j, j] = 0.0
    sv = np.linalg.svd(dm - np.eye(n), compute_uv=False)
    return int(np.count_nonzero(sv <= 1e-8 * max(1.0, sv.max())))


def _run_ergodic(cfg, ctx, d, x, params, seed_override):
    scope = params.get("scope", "full")
    rep = validate(d)
    notes = [cfg.get("notes", "")]
    if scope == "diagonal":
        if np.abs(x.mat - np.diag(np.diagonal(x.mat))).max() > ctx.tol:
            raise HypothesisViolation("diagonal scope requires a diagonal observable")
        if _diagonal_fixed_dim(d) != 1:
            raise HypothesisViolation("dynamics is not ergodic on the diagonal subalgebra")
        notes.append("ergodicity certified on the diagonal (commutative) scenario algebra")
        n_hor = int(params.get("N", 100))
        grid = log_spaced_grid(n_hor, int(params.get("points", 24)))
        curve = [ergodic_deviation(d, x, n) for n in grid]
    else:
        if params.get("budget_factor") is not None:
            gap = rep.spectral_gap
            if gap is None or gap <= 0:
                raise HypothesisViolation("no spectral gap: cannot set a mixing budget")
            target = float(params.get("target", 1e-6))
            n_hor = int(math.floor(float(params["budget_factor"]) / gap * math.log(1.0 / target)))
            notes.append(f"horizon from gap {gap:.3e} and budget factor "
                         f"{params['budget_factor']}: N = {n_hor}")
        else:
            n_hor = int(params.get("N", 1000))
        grid, curve = mean_ergodic_check(d, x, n_hor, report=rep,
                                         points=int(params.get("points", 40)))

    ok = True
    extras = {}
    if params.get("target") is not None:
        final = curve[-1]
        ok &= final <= float(params["target"])
        extras["final_deviation"] = final
        extras["target"] = float(params["target"])
    for mult in params.get("exact_multiples", []):
        dev = ergodic_deviation(d, x, int(mult))
        extras.setdefault("exact_multiples", []).append([int(mult), dev])
        ok &= dev <= float(params.get("exact_tol", 1e-13))
    rows = [(n, repr(v)) for n, v in zip(grid, curve)]
    report = {"scenario": cfg["name"], "scope": scope,
              "spectral_gap": rep.spectral_gap, "curve_n": list(grid),
              "ok": ok, "notes": notes, **extras}
    return report, ["n", "deviation_l2"], rows, ok


_RUNNERS = {
    "validate": _run_validate,
    "vdc": _run_vdc,
    "spectral": _run_spectral,
    "witness": _run_witness,
    "ww": _run_ww,
    "weakmix": _run_weakmix,
    "theorem6": _run_theorem6,
    "ergodic": _run_ergodic,
}


def run_scenario(cfg: dict, seed_override=None, strict=False) -> RunResult:
    """Build the scenario and dispatch to its experiment runner."""
    experiment = cfg.get("experiment")
    if experiment not in _RUNNERS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    ctx = build_context(cfg)
    d = build_dynamics(cfg, ctx)
    x = build_observable(cfg, ctx, seed_override=seed_override)
    params = dict(cfg.get("params", {}))
    t0 = time.perf_counter()
    report, header, rows, ok = _RUNNERS[experiment](cfg, ctx, d, x, params, seed_override)
    if strict and report.get("notes"):
        report["strict"] = True
    report.setdefault("ok", ok)
    return RunResult(name=cfg["name"], experiment=experiment, ok=ok,
                     report=report, table_header=header, table_rows=rows,
                     notes=cfg.get("notes", ""),
                     runtime_s=time.perf_counter() - t0)
