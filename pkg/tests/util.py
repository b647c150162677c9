"""Shared builders for the test suite."""

import numpy as np

from pxlab import (AnalyticFieldSpec, build_grid, exponent_field,
                   make_fidelity_source, make_image_operator, make_multiphase,
                   make_power_source, make_zero_source, sample_jet)


def single_phase(grid, p=2.0, alpha=None):
    pf = exponent_field(grid, p)
    return make_multiphase([pf], [1.0], alpha=alpha)


def two_phase(grid, p1=2.0, p2=3.0, alpha=1.5):
    return make_multiphase(
        [exponent_field(grid, p1), exponent_field(grid, p2)], [1.0, 1.0], alpha=alpha)


def image_op(grid, p=2.0, eps=0.5, delta=1.0, alpha=1.5):
    return make_image_operator(exponent_field(grid, p), eps, delta, alpha)


def power_src(npoints, r1=1.0, q1=1.0, r2=0.0, q2=1.0, alpha=1.5):
    return make_power_source(r1, r2, q1, q2, npoints=npoints, alpha=alpha)


def fidelity_src(npoints, g=0.5, mu=1.0, alpha=1.5):
    g_arr = np.full(npoints, g) if np.isscalar(g) else np.asarray(g)
    return make_fidelity_source(g_arr, mu, alpha)


def zero_src(npoints, alpha=1.5):
    return make_zero_source(npoints, alpha=alpha)


POSITIVE_SPECS = [
    AnalyticFieldSpec("constant", {"c": 1.3}),
    AnalyticFieldSpec("quadratic-bump", {"base": 0.8, "amp": 1.2}),
    AnalyticFieldSpec("exp-linear", {"k": 0.9}),
    AnalyticFieldSpec("noisy-image", {"seed": 11, "base": 1.2, "amp": 0.6}),
    AnalyticFieldSpec("affine", {"a0": 0.7, "a1": 0.9}),
]


def random_positive_jet(rng, grid):
    """A random strictly positive catalog jet on the grid."""
    kind = rng.integers(0, 4)
    if kind == 0:
        spec = AnalyticFieldSpec("constant", {"c": rng.uniform(0.5, 2.0)})
    elif kind == 1:
        spec = AnalyticFieldSpec("quadratic-bump", {
            "base": rng.uniform(0.4, 1.0), "amp": rng.uniform(0.2, 1.5)})
    elif kind == 2:
        k = rng.uniform(-1.2, 1.2, size=grid.dim)
        spec = AnalyticFieldSpec("exp-linear", {"k": k, "scale": rng.uniform(0.5, 1.5)})
    else:
        spec = AnalyticFieldSpec("noisy-image", {
            "seed": int(rng.integers(0, 2**31)),
            "base": rng.uniform(0.9, 1.5), "amp": rng.uniform(0.2, 0.7)})
    return sample_jet(spec, grid)


def grid_1d(n=64, extent=1.0):
    return build_grid(1, n, extent)


def grid_2d(n=8, extent=1.0):
    return build_grid(2, n, extent)
