"""Falsification-style validators for the operator and source hypotheses.

Every experiment runs these first.  Checks are numeric, sampled, and
deterministic under a seed; almost-everywhere statements are tested at
every quadrature point of the supplied sampling.  A failing check always
carries a witness.  These are falsification checks, not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import AnalyticFieldSpec, Grid, integrate, sample_jet
from .operators import ExponentField, OperatorFamily
from .sources import SourceFamily

SAMPLED_X_NOTE = "almost-everywhere claims are checked at every sampled x"

# Strictness margin, relative to the local magnitude of the compared values.
# An absolute margin would misclassify profiles that vanish superlinearly
# near s = 0, where genuine strict increments are far below 1e-12.
STRICT_MARGIN = 1e-12
DECAY_BOUND = 1e-8


def _margins(mat: np.ndarray) -> np.ndarray:
    return STRICT_MARGIN * np.maximum(np.abs(mat[:, :-1]), np.abs(mat[:, 1:]))


@dataclass
class CheckResult:
    status: str  # "pass" | "fail" | "not-checked"
    worst: float = 0.0
    witness: tuple | None = None
    note: str = ""

    def to_jsonable(self) -> dict:
        return {
            "status": self.status,
            "worst": self.worst,
            "witness": list(self.witness) if self.witness is not None else None,
            "note": self.note,
        }


@dataclass
class HypothesisReport:
    checks: dict = field(default_factory=dict)
    samples: int = 0
    seed: int = 0
    note: str = SAMPLED_X_NOTE

    def passed(self, *names) -> bool:
        names = names or tuple(self.checks)
        return all(self.checks[n].status == "pass" for n in names)

    def merge(self, other: "HypothesisReport") -> "HypothesisReport":
        merged = dict(self.checks)
        merged.update(other.checks)
        return HypothesisReport(checks=merged, samples=self.samples, seed=self.seed)

    def to_jsonable(self) -> dict:
        return {
            "note": self.note,
            "samples": self.samples,
            "seed": self.seed,
            "checks": {k: v.to_jsonable() for k, v in self.checks.items()},
        }


def _log_ladder(rng, samples, lo=1e-6, hi=1e3):
    return np.sort(np.exp(rng.uniform(np.log(lo), np.log(hi), size=samples)))


def _ladder_matrix(fam_or_src, values, ladder):
    """Evaluate a per-point map on a shared s-ladder; returns (npoints, len(ladder))."""
    npts = fam_or_src.npoints
    pts = np.repeat(np.arange(npts), ladder.size)
    s = np.tile(ladder, npts)
    return values(s, pts).reshape(npts, ladder.size)


def _strict_increase_check(mat, ladder, label):
    diffs = np.diff(mat, axis=1)
    margins = _margins(mat)
    slack = diffs - margins
    worst = float(slack.min())
    i, j = np.unravel_index(np.argmin(slack), slack.shape)
    witness = (int(i), float(ladder[j]), float(ladder[j + 1]))
    if worst > 0.0:
        return CheckResult("pass", float(diffs.min()), None)
    if float((diffs + margins).min()) >= 0.0:
        return CheckResult("fail", float(diffs.min()), witness, note=f"{label} non-strict")
    return CheckResult("fail", float(diffs.min()), witness)


def check_limit_monotone(fam: OperatorFamily, samples: int = 64,
                         seed: int = 0) -> HypothesisReport:
    """H4 (profile vanishes at 0) and H5 (profile strictly increasing)."""
    rng = np.random.default_rng(seed)
    rep = HypothesisReport(samples=samples, seed=seed)

    decay = _ladder_matrix(fam, fam.phi, 2.0 ** -np.arange(1, 41, dtype=float))
    final = decay[:, -1]
    worst = float(final.max())
    if worst < DECAY_BOUND:
        rep.checks["H4"] = CheckResult("pass", worst, None,
                                       note="limit tested along s = 2^-k, k <= 40")
    else:
        i = int(np.argmax(final))
        rep.checks["H4"] = CheckResult("fail", worst, (i, 2.0**-40))

    ladder = _log_ladder(rng, samples)
    mat = _ladder_matrix(fam, fam.phi, ladder)
    rep.checks["H5"] = _strict_increase_check(mat, ladder, "H5")
    return rep


def check_growth(fam: OperatorFamily, a_bound, b_bound: float,
                 samples: int = 64, seed: int = 0) -> HypothesisReport:
    """H6: Phi(x, s) <= a(x) + b s^(p(x)-1) on a ladder reaching s = 1e3."""
    if b_bound < 0.0:
        raise ValueError("b_bound must be nonnegative")
    a_arr = np.full(fam.npoints, float(a_bound)) if np.isscalar(a_bound) \
        else np.asarray(a_bound, dtype=float)
    if a_arr.min() < 0.0:
        raise ValueError("a_bound must be nonnegative")
    rng = np.random.default_rng(seed)
    ladder = _log_ladder(rng, samples)
    phi = _ladder_matrix(fam, fam.phi, ladder)
    p = fam.exponent.values[:, None]
    bound = a_arr[:, None] + b_bound * ladder[None, :] ** (p - 1.0)
    viol = (phi - bound) / np.maximum(1.0, bound)
    worst = float(viol.max())
    rep = HypothesisReport(samples=samples, seed=seed)
    if worst <= STRICT_MARGIN:
        rep.checks["H6"] = CheckResult("pass", worst, None)
    else:
        i, j = np.unravel_index(np.argmax(viol), viol.shape)
        rep.checks["H6"] = CheckResult("fail", worst, (int(i), float(ladder[j])))
    return rep


def check_monotone_ratio(fam: OperatorFamily, r: float, strict: bool,
                         samples: int = 64, seed: int = 0) -> HypothesisReport:
    """H7 / H7': monotonicity of s -> Phi(x, s)/s^(r-1) on log ladders."""
    if r < 1.0:
        raise ValueError("r must be at least 1")
    rng = np.random.default_rng(seed)
    ladder = _log_ladder(rng, samples)
    mat = _ladder_matrix(fam, fam.phi, ladder) / ladder[None, :] ** (r - 1.0)
    rep = HypothesisReport(samples=samples, seed=seed)
    name = "H7'" if strict else "H7"
    if strict:
        rep.checks[name] = _strict_increase_check(mat, ladder, name)
        return rep
    diffs = np.diff(mat, axis=1)
    margins = _margins(mat)
    worst = float(diffs.min())
    if float((diffs + margins).min()) >= 0.0:
        note = "non-strict" if float((diffs - margins).min()) <= 0.0 else ""
        rep.checks[name] = CheckResult("pass", worst, None, note=note)
    else:
        j2 = np.argmin(diffs + margins)
        i, j = np.unravel_index(j2, diffs.shape)
        rep.checks[name] = CheckResult("fail", worst,
                                       (int(i), float(ladder[j]), float(ladder[j + 1])))
    return rep


def check_coercivity(fam: OperatorFamily, mode: str, trial_fields, grid: Grid,
                     d0: float = 0.0, d0_tilde: float = 0.0,
                     c1: float = 0.0, c2: float = 0.0) -> HypothesisReport:
    """H8-style energy lower bounds over a set of trial jet fields.

    Mode "pX" tests  integral A(x, |grad v|) >= d0 |grad v|_p(x) - d0_tilde;
    mode "alpha" replaces the exponent by the family's certified order.
    """
    if mode not in ("pX", "alpha"):
        raise ValueError("mode must be 'pX' or 'alpha'")
    if min(d0, d0_tilde, c1, c2) < 0.0:
        raise ValueError("constants must be nonnegative")
    trial_fields = list(trial_fields)
    worst = np.inf
    witness = None
    for k, v in enumerate(trial_fields):
        norms = v.grad_norms()
        lhs = integrate(fam.A_batch(norms), grid)
        if mode == "pX":
            rhs = d0 * integrate(norms ** fam.exponent.values, grid) - d0_tilde
        else:
            rhs = c1 * integrate(norms ** fam.r_order, grid) - c2
        margin = (lhs - rhs) / (1.0 + abs(lhs))
        if margin < worst:
            worst = float(margin)
            witness = (k,)
    name = "H8-pX" if mode == "pX" else "H8-alpha"
    rep = HypothesisReport(samples=len(trial_fields), seed=0)
    if worst >= -1e-10:
        rep.checks[name] = CheckResult("pass", worst, None)
    else:
        rep.checks[name] = CheckResult("fail", worst, witness)
    return rep


def check_source_hypotheses(src: SourceFamily, samples: int = 64,
                            seed: int = 0) -> HypothesisReport:
    """H11 (signs at 0 and 1), H12 (shifted monotonicity, Lipschitz), H13/H13'."""
    rng = np.random.default_rng(seed)
    rep = HypothesisReport(samples=samples, seed=seed)
    npts = src.npoints

    f0 = src.f_vals(np.zeros(npts))
    f1 = src.f_vals(np.ones(npts))
    worst = float(max(-f0.min(), f1.max()))
    if f0.min() >= -STRICT_MARGIN and f1.max() <= STRICT_MARGIN:
        rep.checks["H11"] = CheckResult("pass", worst, None)
    else:
        i = int(np.argmax(np.maximum(-f0, f1)))
        rep.checks["H11"] = CheckResult("fail", worst, (i, 0.0 if -f0[i] > f1[i] else 1.0))

    ladder = np.sort(rng.uniform(0.0, 1.0, size=samples))
    shifted = _ladder_matrix(src, src.f_vals, ladder) + src.lambda0 * ladder[None, :]
    rep.checks["H12-monotone"] = _strict_increase_check(shifted, ladder, "H12")

    s1 = rng.uniform(0.0, 1.0, size=samples * npts)
    s2 = rng.uniform(0.0, 1.0, size=samples * npts)
    pts = np.tile(np.arange(npts), samples)
    lip = np.abs(src.f_vals(s1, pts) - src.f_vals(s2, pts)) - src.gamma * np.abs(s1 - s2)
    worst = float(lip.max())
    if worst <= STRICT_MARGIN:
        rep.checks["H12-lipschitz"] = CheckResult("pass", worst, None)
    else:
        i = int(np.argmax(lip))
        rep.checks["H12-lipschitz"] = CheckResult("fail", worst,
                                                  (int(pts[i]), float(s1[i]), float(s2[i])))

    s_lad = _log_ladder(rng, samples, lo=1e-6, hi=1.0)
    ratio = _ladder_matrix(src, src.f_vals, s_lad ** (1.0 / src.alpha)) \
        / s_lad[None, :] ** ((src.alpha - 1.0) / src.alpha)
    diffs = np.diff(ratio, axis=1)
    margins = _margins(ratio)
    worst = float(diffs.max())
    i, j = np.unravel_index(np.argmax(diffs - margins), diffs.shape)
    witness = (int(i), float(s_lad[j]), float(s_lad[j + 1]))
    if float((diffs - margins).max()) <= 0.0:
        note = "non-strict" if float((diffs + margins).max()) >= 0.0 else ""
        rep.checks["H13"] = CheckResult("pass", worst, None, note=note)
    else:
        rep.checks["H13"] = CheckResult("fail", worst, witness)
    if float((diffs + margins).max()) < 0.0:
        rep.checks["H13'"] = CheckResult("pass", worst, None)
    else:
        rep.checks["H13'"] = CheckResult("fail", worst, witness,
                                         note="ratio not strictly decreasing")
    return rep


def check_exponent(p: ExponentField, dim: int) -> HypothesisReport:
    """H2 bookkeeping: bounds are enforced, regularity cannot be sampled."""
    rep = HypothesisReport(samples=p.values.shape[0], seed=0)
    rep.checks["H2-bounds"] = CheckResult("pass", 0.0, None,
                                          note=f"p- = {p.p_minus}, p+ = {p.p_plus}")
    flag = p.meets_embedding_bound(dim)
    rep.checks["H2-embedding"] = CheckResult(
        "pass" if flag else "fail",
        2.0 * dim / (dim + 2.0) - p.p_minus, None,
        note="informational flag p- >= 2N/(N+2), never enforced")
    rep.checks["H2-log-holder"] = CheckResult(
        "not-checked", 0.0, None,
        note="regularity of a numerically supplied exponent is not machine-checkable")
    return rep


def default_trial_fields(grid: Grid, seed: int = 0):
    """Trial jets for coercivity checks, including a steep field."""
    slope = np.zeros(grid.dim)
    slope[0] = 1.0
    steep = slope * 100.0
    specs = [
        AnalyticFieldSpec("constant", {"c": 1.0}),
        AnalyticFieldSpec("affine", {"a0": 1.0, "a1": slope}),
        AnalyticFieldSpec("exp-linear", {"k": np.full(grid.dim, 1.5)}),
        AnalyticFieldSpec("noisy-image", {"seed": seed, "base": 1.0, "amp": 0.5}),
        AnalyticFieldSpec("affine", {"a0": 1.0, "a1": steep}),
    ]
    return [sample_jet(s, grid) for s in specs]
