"""Source families f(x, s) on [0, 1] and their globally Lipschitz extension.

The extension (fbar, Fbar) prolongs a source beyond [0, 1] so that the
unconstrained energy minimization is equivalent to the box-constrained
problem: fbar decays linearly with slope gamma outside the unit interval
and Fbar is its C^1 antiderivative with Fbar(x, 0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SourceFamily:
    """Per-quadrature-point source f(x, s) with primitive and extension.

    Attributes
    ----------
    gamma : float
        Lipschitz constant of f(x, .) on [0, 1].
    lambda0 : float
        Constant above gamma making s -> f(x, s) + lambda0 s strictly increasing.
    alpha : float
        Root order used by the concavity-type ratio checks, in (1, 2].
    strict13_flag : bool
        Whether the ratio f(x, s^(1/alpha)) / s^((alpha-1)/alpha) is claimed
        strictly decreasing; requires alpha < 2.
    """

    def __init__(self, kind, npoints, gamma, lambda0, alpha, strict13_flag, params):
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if lambda0 <= gamma:
            raise ValueError("lambda0 must exceed gamma")
        if not 1.0 < alpha <= 2.0:
            raise ValueError(f"alpha must lie in (1, 2], got {alpha}")
        if strict13_flag and alpha >= 2.0:
            raise ValueError("a strict ratio claim requires alpha < 2")
        self.kind = kind
        self.npoints = int(npoints)
        self.gamma = float(gamma)
        self.lambda0 = float(lambda0)
        self.alpha = float(alpha)
        self.strict13_flag = bool(strict13_flag)
        self.params = dict(params)

    # -- on [0, 1] --------------------------------------------------------

    def f_vals(self, s, points=None):
        s, idx = self._align(s, points)
        return self._f(s, idx)

    def F_vals(self, s, points=None):
        s, idx = self._align(s, points)
        return self._F(s, idx)

    # -- extension to the real line ---------------------------------------

    def fbar_vals(self, s, points=None):
        s, idx = self._align(s, points)
        mid = np.clip(s, 0.0, 1.0)
        f0 = self._f(np.zeros_like(s), idx)
        f1 = self._f(np.ones_like(s), idx)
        below = f0 + self.gamma * s
        above = f1 - self.gamma * (s - 1.0)
        return np.where(s < 0.0, below, np.where(s <= 1.0, self._f(mid, idx), above))

    def Fbar_vals(self, s, points=None):
        s, idx = self._align(s, points)
        mid = np.clip(s, 0.0, 1.0)
        f0 = self._f(np.zeros_like(s), idx)
        f1 = self._f(np.ones_like(s), idx)
        F1 = self._F(np.ones_like(s), idx)
        below = f0 * s + 0.5 * self.gamma * s * s
        above = F1 + f1 * (s - 1.0) - 0.5 * self.gamma * (s - 1.0) ** 2
        return np.where(s < 0.0, below, np.where(s <= 1.0, self._F(mid, idx), above))

    def _align(self, s, points):
        s = np.asarray(s, dtype=float)
        idx = np.arange(self.npoints) if points is None else np.asarray(points)
        return np.broadcast_arrays(s, idx)

    def _f(self, s, idx):
        raise NotImplementedError

    def _F(self, s, idx):
        raise NotImplementedError


def extend_source(src: SourceFamily, point: int, s: float) -> dict:
    """The extension pair (fbar, Fbar) at one point; s may be any real."""
    pts = np.asarray([point])
    sv = np.asarray([float(s)])
    return {
        "fbar": float(src.fbar_vals(sv, points=pts)[0]),
        "Fbar": float(src.Fbar_vals(sv, points=pts)[0]),
    }


class PowerSource(SourceFamily):
    """f(x, s) = -r1(x) s^q1(x) - r2(x) s^q2(x) with nonnegative coefficients."""

    def __init__(self, r1, r2, q1, q2, alpha):
        npts = r1.shape[0]
        gamma = float(r1.max() * q1.max() + r2.max() * q2.max())
        if gamma == 0.0:
            gamma = 1.0  # any positive constant bounds the zero source
        strict = bool(alpha < 2.0 and np.min(r1 + r2) > 0.0)
        super().__init__(
            kind="power", npoints=npts, gamma=gamma, lambda0=gamma + 1.0,
            alpha=alpha, strict13_flag=strict,
            params={"r1": r1, "r2": r2, "q1": q1, "q2": q2},
        )
        self.r1, self.r2, self.q1, self.q2 = r1, r2, q1, q2

    def _f(self, s, idx):
        return -self.r1[idx] * s ** self.q1[idx] - self.r2[idx] * s ** self.q2[idx]

    def _F(self, s, idx):
        q1, q2 = self.q1[idx], self.q2[idx]
        return (-self.r1[idx] * s ** (q1 + 1.0) / (q1 + 1.0)
                - self.r2[idx] * s ** (q2 + 1.0) / (q2 + 1.0))


class FidelitySource(SourceFamily):
    """Data-fidelity source f(x, s) = mu (g(x) - s) pulling toward g."""

    def __init__(self, g, mu, alpha):
        super().__init__(
            kind="fidelity", npoints=g.shape[0], gamma=float(mu),
            lambda0=float(mu) + 1.0, alpha=alpha, strict13_flag=True,
            params={"mu": float(mu)},
        )
        self.g = g
        self.mu = float(mu)

    def _f(self, s, idx):
        return self.mu * (self.g[idx] - s)

    def _F(self, s, idx):
        return self.mu * (self.g[idx] * s - 0.5 * s * s)


def make_power_source(r1, r2, q1, q2, npoints: int | None = None,
                      alpha: float = 1.5) -> SourceFamily:
    """Negative power-law source with the closed-form Lipschitz bound.

    gamma is the product bound max(r1) max(q1) + max(r2) max(q2) and
    lambda0 = gamma + 1.  Coefficients r may vanish; exponents q must be >= 1.
    """
    arrs = []
    for name, v in (("r1", r1), ("r2", r2), ("q1", q1), ("q2", q2)):
        v = np.asarray(v, dtype=float)
        if v.ndim == 0:
            if npoints is None:
                raise ValueError("npoints required with scalar coefficients")
            v = np.full(npoints, float(v))
        arrs.append(v)
    r1, r2, q1, q2 = arrs
    if npoints is None:
        npoints = r1.shape[0]
    if any(a.shape != (npoints,) for a in arrs):
        raise ValueError("coefficient arrays must share the point count")
    if r1.min() < 0.0 or r2.min() < 0.0:
        raise ValueError("coefficients r1, r2 must be nonnegative")
    if q1.min() < 1.0 or q2.min() < 1.0:
        raise ValueError("exponents q1, q2 must be at least 1")
    return PowerSource(r1, r2, q1, q2, float(alpha))


def make_fidelity_source(g, mu: float, alpha: float) -> SourceFamily:
    """Fidelity source toward data g in [0, 1]; gamma = mu, lambda0 = mu + 1.

    The strict ratio flag is set for alpha in (1, 2); callers should confirm
    it through the hypothesis validators before relying on it.
    """
    g = np.asarray(g, dtype=float).ravel()
    if g.min() < 0.0 or g.max() > 1.0:
        raise ValueError("data g must take values in [0, 1]")
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    return FidelitySource(g, mu, alpha)


def make_zero_source(npoints: int, alpha: float = 1.5) -> SourceFamily:
    """The zero source; gamma = 1 is a valid (if slack) Lipschitz bound."""
    z = np.zeros(npoints)
    o = np.ones(npoints)
    return PowerSource(z, z, o, o, float(alpha))


# ---------------------------------------------------------------------------
# structural properties of the extension
# ---------------------------------------------------------------------------

@dataclass
class SourcePropsReport:
    lipschitz_ok: bool
    monotone_ok: bool
    convex_ok: bool
    ratio_ok: bool
    strict_convex_ok: bool
    strict_ratio_ok: bool
    worst: dict
    seed: int

    def all_nonstrict_pass(self) -> bool:
        return self.lipschitz_ok and self.monotone_ok and self.convex_ok and self.ratio_ok


def check_source_props(src: SourceFamily, lambda_bar: float,
                       samples: int = 64, seed: int = 0) -> SourcePropsReport:
    """Sampled verification of the extension's structure.

    Checks, at every point: (1) fbar is gamma-Lipschitz on random pairs;
    (2) s -> fbar + lambda_bar s is strictly increasing; (3) the map
    s -> -Fbar(x, s^(1/alpha)) has nonnegative second differences and the
    ratio fbar(x, s^(1/alpha)) / s^((alpha-1)/alpha) is nonincreasing;
    (4) the strict variants of (3) with margin 1e-12.
    """
    if lambda_bar <= src.gamma:
        raise ValueError("lambda_bar must exceed gamma")
    rng = np.random.default_rng(seed)
    npts = src.npoints
    alpha = src.alpha

    pts = np.repeat(np.arange(npts), samples)
    s1 = np.tile(rng.uniform(-3.0, 4.0, size=samples), npts)
    s2 = np.tile(rng.uniform(-3.0, 4.0, size=samples), npts)
    lip = np.abs(src.fbar_vals(s1, pts) - src.fbar_vals(s2, pts)) \
        - src.gamma * np.abs(s1 - s2)
    lip_worst = float(lip.max())

    ladder = np.sort(rng.uniform(-3.0, 4.0, size=samples))
    pts_l = np.repeat(np.arange(npts), samples)
    lad = np.tile(ladder, npts)
    incr = (src.fbar_vals(lad, pts_l) + lambda_bar * lad).reshape(npts, samples)
    mono_worst = float(np.diff(incr, axis=1).min())

    # uniform ladder on [0, 4] crosses into the extension branch past s = 1
    s_lad = np.linspace(0.0, 4.0, samples)
    pts_m = np.repeat(np.arange(npts), samples)
    s_m = np.tile(s_lad, npts)
    neg_comp = (-src.Fbar_vals(s_m ** (1.0 / alpha), pts_m)).reshape(npts, samples)
    second = np.diff(neg_comp, n=2, axis=1)
    convex_worst = float(second.min())

    s_pos = s_lad[1:]
    pts_r = np.repeat(np.arange(npts), samples - 1)
    s_r = np.tile(s_pos, npts)
    ratio = (src.fbar_vals(s_r ** (1.0 / alpha), pts_r)
             / s_r ** ((alpha - 1.0) / alpha)).reshape(npts, samples - 1)
    ratio_worst = float(np.diff(ratio, axis=1).max())

    return SourcePropsReport(
        lipschitz_ok=lip_worst <= 1e-12,
        monotone_ok=mono_worst > 1e-12,
        convex_ok=convex_worst >= -1e-10,
        ratio_ok=ratio_worst <= 1e-12,
        strict_convex_ok=convex_worst > 1e-12,
        strict_ratio_ok=ratio_worst < -1e-12,
        worst={
            "lipschitz": lip_worst,
            "monotone_min_step": mono_worst,
            "convex_min_second_diff": convex_worst,
            "ratio_max_step": ratio_worst,
        },
        seed=seed,
    )
