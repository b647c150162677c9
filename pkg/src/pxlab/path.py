"""Hidden convexity along segments w_theta = theta w1 + (1-theta) w2.

Although the energy is nonconvex in U, the reparameterized functional
J(w) = energy(w^(1/alpha)) is convex along straight segments between
positive fields with bounded ratios.  This module carries the segment
bounds, the derivative field gamma_theta, and the scan of
beta(theta) = J(w_theta) together with its derivative and convexity
checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, JetField, alpha_root_jet, integrate, jet_linear
from .operators import OperatorFamily
from .sources import SourceFamily

RATIO_CAP = 1e6
BOUND_SLACK = 1e-12
FD_STEP = 1e-4


@dataclass(frozen=True)
class PathContext:
    """Segment data for two positive jet fields with bounded ratios.

    M is the sampled maximum of both ratio fields and theta0 = 1/(2(M-1))
    (infinite for identical fields); the admissible parameter interval is
    the open (-theta0, 1 + theta0).  M is a sampled stand-in for the
    essential supremum.
    """

    w1: JetField = field(repr=False)
    w2: JetField = field(repr=False)
    alpha: float = 0.0
    M: float = 1.0
    theta0: float = np.inf

    @property
    def theta_lo(self) -> float:
        return -self.theta0

    @property
    def theta_hi(self) -> float:
        return 1.0 + self.theta0


@dataclass
class BetaScan:
    thetas: np.ndarray
    beta: np.ndarray
    beta_prime: np.ndarray
    beta_at_0: float
    beta_at_1: float
    cor64_gap: np.ndarray
    min_beta_prime_step: float
    fd_max_rel_err: float
    strict_gap_ok: bool | None

    def csv_rows(self):
        for k in range(self.thetas.size):
            yield (self.thetas[k], self.beta[k], self.beta_prime[k], self.cor64_gap[k])


def make_path(w1: JetField, w2: JetField, alpha: float) -> PathContext:
    """Build the segment context; rejects nonpositive fields and sampled
    ratio maxima above 1e6 (a blow-up signals fields vanishing somewhere)."""
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (1, 2], got {alpha}")
    v1, v2 = w1.values, w2.values
    if v1.min() <= 0.0 or v2.min() <= 0.0:
        raise ValueError("fields must be positive at every quadrature point")
    M = float(max(np.max(v1 / v2), np.max(v2 / v1)))
    if M > RATIO_CAP:
        raise ValueError(f"sampled ratio bound {M} exceeds the cap {RATIO_CAP}")
    theta0 = np.inf if M <= 1.0 else 1.0 / (2.0 * (M - 1.0))
    return PathContext(w1=w1, w2=w2, alpha=float(alpha), M=M, theta0=theta0)


def path_jets(ctx: PathContext, theta: float) -> tuple:
    """The segment jet w_theta and the derivative field gamma_theta.

    gamma_theta = (1/alpha) (w1 - w2) / w_theta^((alpha-1)/alpha) with the
    product/chain-rule gradient.  The segment bounds
    min(w1,w2)/2 <= w_theta <= 3 max(w1,w2)/2 and
    2/(3M) <= w1/w_theta, w2/w_theta <= 2M are verified on every call.
    """
    if not ctx.theta_lo < theta < ctx.theta_hi:
        raise ValueError(f"theta={theta} outside ({ctx.theta_lo}, {ctx.theta_hi})")
    alpha = ctx.alpha
    w_theta = jet_linear(theta, ctx.w1, 1.0 - theta, ctx.w2)
    v = w_theta.values
    vmin = np.minimum(ctx.w1.values, ctx.w2.values)
    vmax = np.maximum(ctx.w1.values, ctx.w2.values)
    if np.any(v < 0.5 * vmin * (1.0 - BOUND_SLACK)) \
            or np.any(v > 1.5 * vmax * (1.0 + BOUND_SLACK)):
        raise RuntimeError("segment bound violated; fields are inconsistent")
    for w in (ctx.w1.values, ctx.w2.values):
        ratio = w / v
        if ratio.min() < 2.0 / (3.0 * ctx.M) * (1.0 - BOUND_SLACK) \
                or ratio.max() > 2.0 * ctx.M * (1.0 + BOUND_SLACK):
            raise RuntimeError("ratio bound violated; fields are inconsistent")

    diff_v = ctx.w1.values - ctx.w2.values
    diff_g = ctx.w1.grads - ctx.w2.grads
    gamma_v = (1.0 / alpha) * diff_v / v ** ((alpha - 1.0) / alpha)
    gamma_g = (1.0 / alpha) * diff_g / (v ** (1.0 - 1.0 / alpha))[:, None] \
        + (1.0 / alpha) * (1.0 / alpha - 1.0) \
        * (diff_v / v ** (2.0 - 1.0 / alpha))[:, None] * w_theta.grads
    return w_theta, JetField(gamma_v, gamma_g)


def energy_J(fam: OperatorFamily, src: SourceFamily, w: JetField,
             grid: Grid) -> float:
    """J(w): the energy of the alpha-root field u = w^(1/alpha)."""
    u = alpha_root_jet(w, src.alpha)
    grad_term = integrate(fam.A_batch(u.grad_norms()), grid)
    source_term = integrate(src.Fbar_vals(u.values), grid)
    return grad_term - source_term


def default_thetas(ctx: PathContext, count: int = 41, margin: float = 1e-3) -> np.ndarray:
    lo = max(ctx.theta_lo + margin, -0.45)
    hi = min(ctx.theta_hi - margin, 1.45)
    return np.linspace(lo, hi, count)


def beta_scan(ctx: PathContext, fam: OperatorFamily, src: SourceFamily,
              grid: Grid, thetas=None) -> BetaScan:
    """Scan beta(theta) = J(w_theta) and its derivative along the segment.

    The derivative uses the directional form
        beta'(theta) = int a(x, grad u_theta) . grad gamma_theta
                     - int fbar(x, u_theta) gamma_theta
    with u_theta = w_theta^(1/alpha), and is cross-validated against
    centered differences of beta (one-sided at the scan endpoints).
    Secant gaps for the convex-combination inequality are emitted for
    every theta; on [0, 1] they are the convexity certificate.
    """
    if abs(fam.r_order - ctx.alpha) > 1e-12:
        raise ValueError("operator ratio order must be certified at r = alpha")
    if abs(src.alpha - ctx.alpha) > 1e-12:
        raise ValueError("source alpha must match the path alpha")
    thetas = default_thetas(ctx) if thetas is None else np.asarray(thetas, dtype=float)
    if np.any(np.diff(thetas) <= 0.0):
        raise ValueError("thetas must be strictly increasing")
    if thetas[0] <= ctx.theta_lo or thetas[-1] >= ctx.theta_hi:
        raise ValueError("thetas leave the admissible interval")

    def beta_at(t: float) -> float:
        w_t, _ = path_jets(ctx, t)
        return energy_J(fam, src, w_t, grid)

    def beta_prime_at(t: float) -> float:
        w_t, gamma = path_jets(ctx, t)
        u = alpha_root_jet(w_t, ctx.alpha)
        flux = fam.a_batch(u.grads)
        grad_term = integrate(np.sum(flux * gamma.grads, axis=1), grid)
        src_term = integrate(src.fbar_vals(u.values) * gamma.values, grid)
        return grad_term - src_term

    beta = np.array([beta_at(t) for t in thetas])
    bprime = np.array([beta_prime_at(t) for t in thetas])

    fd_err = 0.0
    for k, t in enumerate(thetas):
        # keep the stencil strictly inside the admissible interval
        h = min(FD_STEP, 0.25 * (t - ctx.theta_lo), 0.25 * (ctx.theta_hi - t))
        if k == 0:
            fd = (-3.0 * beta[0] + 4.0 * beta_at(t + h) - beta_at(t + 2 * h)) / (2 * h)
        elif k == thetas.size - 1:
            fd = (3.0 * beta[-1] - 4.0 * beta_at(t - h) + beta_at(t - 2 * h)) / (2 * h)
        else:
            fd = (beta_at(t + h) - beta_at(t - h)) / (2 * h)
        fd_err = max(fd_err, abs(fd - bprime[k]) / (1.0 + abs(bprime[k])))

    beta0 = beta_at(0.0)
    beta1 = beta_at(1.0)
    cor_gap = thetas * beta1 + (1.0 - thetas) * beta0 - beta

    strict_ok = None
    differ = float(np.max(np.abs(ctx.w1.values - ctx.w2.values))) > 0.0
    if src.strict13_flag and differ:
        interior = (thetas > 0.0) & (thetas < 1.0)
        strict_ok = bool(np.all(cor_gap[interior] > 0.0))

    return BetaScan(
        thetas=thetas,
        beta=beta,
        beta_prime=bprime,
        beta_at_0=beta0,
        beta_at_1=beta1,
        cor64_gap=cor_gap,
        min_beta_prime_step=float(np.diff(bprime).min()) if thetas.size > 1 else 0.0,
        fd_max_rel_err=float(fd_err),
        strict_gap_ok=strict_ok,
    )


def assert_admissible_jet(w: JetField, alpha: float) -> None:
    """Positivity plus a finite alpha-root jet; raises when either fails."""
    if w.values.min() <= 0.0:
        raise ValueError("field must be positive")
    alpha_root_jet(w, alpha)
