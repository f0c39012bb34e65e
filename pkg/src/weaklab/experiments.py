"""Report builders shared by the command line and the tests.

Each builder returns plain data (dicts, tables) plus a list of ``Check``
records.  A failed check is an invariant violation; ``observations`` carry
measured trends that are reported but never gate the exit code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import clifford, lattice, linops, weakpair, wick
from .config import ExperimentConfig

log = logging.getLogger("weaklab")

ROUNDTRIP_RTOL = 1e-13
AN_NORM_SLACK = 1e-9
DOUBLING_RTOL = 1e-9
#: Largest operator dimension for which matrix files are emitted.
EMIT_MAX_DIM = 1024


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool

    @classmethod
    def at_most(cls, name, value, limit):
        value = float(value)
        return cls(name, value, float(limit), bool(value <= limit))

    def as_dict(self):
        return {"name": self.name, "value": self.value, "limit": self.limit, "passed": self.passed}


def all_passed(checks) -> bool:
    return all(c.passed for c in checks)


def knobs(cfg: ExperimentConfig | None = None) -> dict:
    """Every numeric decision the reports depend on."""
    out = {
        "hermitian_rtol": linops.HERMITIAN_RTOL,
        "singular_rtol": linops.SINGULAR_RTOL,
        "resolvent_residual_tol": linops.RESOLVENT_RESIDUAL_TOL,
        "pd_rtol": linops.PD_RTOL,
        "clifford_relation_tol": clifford.RELATION_TOL,
        "gamma1_prefactor": clifford.GAMMA1_PREFACTOR_CONVENTION,
        "identity_tol": lattice.IDENTITY_TOL,
        "stencil_tol": lattice.STENCIL_TOL,
        "max_operator_dim": lattice.MAX_OPERATOR_DIM,
        "roundtrip_rtol": ROUNDTRIP_RTOL,
        "an_norm_slack": AN_NORM_SLACK,
        "doubling_rtol": DOUBLING_RTOL,
        "lambda_grid": "i * lambda0 * 2^k, k = 0..grid_count-1, both signs",
        "lambda0_rule": "2 (1 + sqrt(C)), doubled until every grid resolvent is invertible",
        "mu_default": "2 i lambda0",
        "fit_window": "last half of the grid",
        "test_vectors": {
            "random": weakpair.NUM_RANDOM_TEST_VECTORS,
            "extreme_G_eigenvectors": weakpair.NUM_EXTREME_TEST_VECTORS,
        },
        "proxy_head": wick.PROXY_HEAD,
        "emit_max_dim": EMIT_MAX_DIM,
    }
    if cfg is not None:
        out["grid_count"] = cfg.grid_count
        out["lambda0_setting"] = cfg.lambda0
    return out


# -- gamma ----------------------------------------------------------------------------


def gamma_report(n: int, n1: int | None = None, frame=None):
    rep = clifford.gamma_matrices(n)
    res = clifford.relation_residuals(rep)
    checks = [Check.at_most(f"clifford_{k}", v, clifford.RELATION_TOL) for k, v in sorted(res.items())]
    out = {"n": n, "dim": rep.dim, "relation_residuals": res}
    matrices = {f"gamma_{j + 1}": g for j, g in enumerate(rep.gammas)}
    if n1 is not None:
        split = clifford.SignatureSplit.of(n, n1)
        G1 = clifford.fundamental_symmetry(rep, split, frame)
        sym = clifford.symmetry_residuals(G1)
        checks += [Check.at_most(f"gamma1_{k}", v, clifford.RELATION_TOL) for k, v in sorted(sym.items())]
        try:
            signs = clifford.conjugation_signs(rep, split, frame)
            checks.append(Check("conjugation_signs", 0.0, 0.0, True))
        except clifford.SignMismatch as exc:
            log.error("%s", exc)
            signs = None
            checks.append(Check("conjugation_signs", 1.0, 0.0, False))
        out.update(n1=n1, symmetry_residuals=sym, conjugation_signs=signs)
        matrices["gamma1"] = G1
    return out, matrices, checks


# -- lattice --------------------------------------------------------------------------


def lattice_row(model: lattice.TorusModel):
    """Measurements for one refinement level plus the invariant checks they feed."""
    lat = model.lattice
    res = model.identity_residuals()
    D1, D2 = model.dense("D1"), model.dense("D2")
    X = model.anticomm
    norm_anticomm = linops.op_norm(linops.symmetrize(X.toarray()))
    pair = weakpair.OperatorPair(D1, D2, weakpair.ANTICOMMUTATOR)
    C = weakpair.condition1_constant(pair)
    C_old = weakpair.old_constant(pair)
    A1, A2 = lattice.split_first_order(X, model)
    split_res = (A1 + A2 - X).norm_bound()
    K1 = lattice.relative_bound_norm(A1.toarray(), D1)
    K2 = lattice.relative_bound_norm(A2.toarray(), D2)
    K = K1 + K2
    row = {
        "N": lat.N,
        "dim": model.dim,
        "norm_anticomm": norm_anticomm,
        "C_combined": C,
        "C_old": C_old,
        "K_split": K,
        "bound_3K2_ok": bool(C <= 3 * K * K),
    }
    detail = {
        **row,
        "K1": K1,
        "K2": K2,
        "split_residual": split_res,
        "identity_residuals": res,
    }
    tag = f"N{lat.N}"
    checks = [Check(f"{tag}_sum_exact", 0.0 if res["sum_exact"] else 1.0, 0.0, bool(res["sum_exact"]))]
    for k, v in sorted(res.items()):
        if k != "sum_exact":
            checks.append(Check.at_most(f"{tag}_{k}", v, lattice.IDENTITY_TOL))
    checks.append(Check.at_most(f"{tag}_split_residual", split_res, lattice.STENCIL_TOL))
    checks.append(Check(f"{tag}_bound_3K2", C, 3 * K * K, bool(C <= 3 * K * K)))
    if model.frame.alpha == 0.0 or model.frame.rot_plane is None:
        checks.append(Check.at_most(f"{tag}_constant_frame_anticomm", norm_anticomm, lattice.IDENTITY_TOL))
    return row, detail, checks


LATTICE_COLUMNS = ("N", "dim", "norm_anticomm", "C_combined", "C_old", "K_split", "bound_3K2_ok")


def lattice_trends(rows) -> dict:
    """Refinement trends of the constants; reported, never gating."""
    if not rows:
        return {}
    C0 = rows[0]["C_combined"]
    c_ratio = [r["C_combined"] / C0 if C0 else float("nan") for r in rows]
    old_growth = [b["C_old"] / a["C_old"] if a["C_old"] else float("nan") for a, b in zip(rows, rows[1:])]
    norm_growth = [b["norm_anticomm"] / a["norm_anticomm"] if a["norm_anticomm"] else float("nan")
                   for a, b in zip(rows, rows[1:])]
    return {
        "C_combined_ratio_to_first": c_ratio,
        "C_old_growth_per_doubling": old_growth,
        "norm_anticomm_growth_per_doubling": norm_growth,
    }


def build_models(cfg: ExperimentConfig):
    frame = cfg.frame()
    for lat in cfg.lattices():
        log.info("building lattice model N=%d", lat.N)
        yield lattice.build_model(lat, frame)


def lattice_report(cfg: ExperimentConfig, models=None):
    models = list(build_models(cfg)) if models is None else models
    rows, details, checks = [], [], []
    for m in models:
        log.info("lattice report N=%d (dim %d)", m.lattice.N, m.dim)
        row, detail, ch = lattice_row(m)
        rows.append(row)
        details.append(detail)
        checks += ch
    return rows, {"levels": details, "observations": lattice_trends(rows)}, checks


# -- weak pairs ------------------------------------------------------------------------


def _suffix(sign):
    return "plus" if sign > 0 else "minus"


def weakpair_report(pair: weakpair.OperatorPair, seed: int, lambda0="auto", grid_count=11, mu=None):
    """All weak-pair diagnostics for one pair; returns ``(summary, tables, checks)``.

    Anticommutator-kind pairs get the resolvent approximation tables directly
    and the resolvent suite on their doubled pair.
    """
    lam0, mu_val, C = weakpair.choose_lambda0(pair, grid_count, lambda0, mu)
    C_old = weakpair.old_constant(pair)
    tables, checks = {}, []
    summary = {
        "kind": pair.kind,
        "dim": pair.dim,
        "seed": seed,
        "C": C,
        "C_old": C_old,
        "lambda0": lam0,
        "mu": mu_val,
        "grid_count": grid_count,
        "rates": {},
        "bounds": {},
    }
    target = pair
    if pair.kind == weakpair.ANTICOMMUTATOR:
        target = weakpair.double(pair)
        C_double = weakpair.condition1_constant(target)
        summary["C_doubled"] = C_double
        checks.append(Check.at_most("doubling_preserves_C", abs(C_double - C), DOUBLING_RTOL * (1 + C)))
        for sign in (1, -1):
            grid = weakpair.lambda_grid(lam0, grid_count, sign)
            t = weakpair.resolvent_approx_table(pair, mu_val, grid)
            tables[f"{t.name}_{_suffix(sign)}"] = t
    xi = weakpair.test_vectors(target, np.random.default_rng(seed))
    for sign in (1, -1):
        rep = weakpair.resolvent_suite(target, xi, lam0, mu_val, grid_count, sign)
        sfx = _suffix(sign)
        for t in rep.tables():
            tables[f"{t.name}_{sfx}"] = t
        summary["bounds"][f"uniform_bound_{sfx}"] = {
            "sup_S": rep.uniform.sup_S,
            "sup_T": rep.uniform.sup_T,
            "upper_half_ratio_S": rep.uniform.ratio_S,
            "upper_half_ratio_T": rep.uniform.ratio_T,
        }
        for t in rep.mixed:
            summary["bounds"][f"{t.name}_{sfx}_uniform"] = t.metadata["uniform_bound"]
        an_norm = float(np.max(rep.An[1].values))
        checks.append(Check.at_most(f"An_norm_{sfx}", an_norm, 1 + AN_NORM_SLACK))
    for name, t in sorted(tables.items()):
        summary["rates"][name] = t.fitted_rate
    summary["tables"] = {name: {"first": t.first, "last": t.last} for name, t in sorted(tables.items())}
    return summary, tables, checks


# -- wick -----------------------------------------------------------------------------------


def _phase_functions(dim):
    return [np.exp(2j * np.pi * np.arange(dim) / dim)]


def wick_report(D, model=None):
    """Round trips, anticommutation constant, commutator norms and compactness proxy for ``D``."""
    D = linops._square(D, "D")
    q = wick.wick_rotate(D)
    fwd = wick.roundtrip_residual(D)
    rev = wick.roundtrip_residual_pair(q.Dplus, q.Dminus)
    scale = 1 + linops.op_norm(D)
    if model is None:
        funcs = _phase_functions(D.shape[0])
        fdesc = ["exp(2 pi i k / dim) on the diagonal"]
    else:
        funcs = [lambda x: np.exp(1j * x[0])]
        fdesc = ["exp(i x_1)"]
    rep = wick.check_indefinite_module(D, funcs, model)
    out = {
        "residual_forward": fwd,
        "residual_reverse": rev,
        "ImD_norm": linops.op_norm(q.ImD),
        "functions": fdesc,
        **rep.summary(),
    }
    checks = [
        Check.at_most("roundtrip_forward", fwd, ROUNDTRIP_RTOL * scale),
        Check.at_most("roundtrip_reverse", rev, ROUNDTRIP_RTOL * scale),
    ]
    return out, rep, checks


def wick_lattice_report(cfg: ExperimentConfig, models=None):
    models = list(build_models(cfg)) if models is None else models
    levels, checks, heads = [], [], []
    for m in models:
        log.info("wick report N=%d", m.lattice.N)
        D = wick.lattice_indefinite_operator(m)
        out, rep, ch = wick_report(D, m)
        pair_rep = wick.check_pair(0.5 * (m.dense("D1") + m.dense("D2")), 0.5 * (m.dense("D1") - m.dense("D2")))
        out["N"] = m.lattice.N
        out["pair_check"] = pair_rep.summary()
        levels.append(out)
        checks += [Check(f"N{m.lattice.N}_{c.name}", c.value, c.limit, c.passed) for c in ch]
        heads.append(rep.proxy_eigs[: wick.PROXY_HEAD])
    drift = [float(np.max(np.abs(b / a - 1))) for a, b in zip(heads, heads[1:])]
    return {"levels": levels, "observations": {"proxy_head_relative_drift": drift}}, checks
