"""Structured box grids, midpoint quadrature, and jet-field sampling.

The domain is a box [0, L1] (1D) or [0, L1] x [0, L2] (2D) split into n
cells per axis.  Quadrature points sit at cell centers with cell volumes
as weights, so pointwise inequalities at the quadrature points integrate
to inequalities between the quadrature sums (all weights positive).

Nodal functions (class:`GridFunction`) live on the same cell-center
lattice; their stencil gradient uses centered differences with reflected
ghost cells, which bakes in the homogeneous Neumann condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CATALOG_NAMES = (
    "constant",
    "affine",
    "exp-linear",
    "quadratic-bump",
    "abs-kink",
    "ex51-pair",
    "ex52-pair",
    "noisy-image",
)


@dataclass(frozen=True)
class Grid:
    """Structured box grid with midpoint quadrature.

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    extent : tuple of float
        Axis lengths; the domain is the box [0, extent[0]] x ... .
    n : tuple of int
        Cells per axis (>= 3 each).
    h : tuple of float
        Cell spacing per axis.
    quad_points : ndarray, shape (nq, dim)
        Cell centers, C-ordered over axis indices.
    quad_weights : ndarray, shape (nq,)
        Cell volumes; positive, summing to the box volume.
    """

    dim: int
    extent: tuple
    n: tuple
    h: tuple
    quad_points: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)

    @property
    def npoints(self) -> int:
        return self.quad_points.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def shape(self) -> tuple:
        return self.n


@dataclass
class JetField:
    """Per-quadrature-point samples (value, gradient) of a scalar field."""

    values: np.ndarray
    grads: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.grads = np.asarray(self.grads, dtype=float)
        if self.grads.ndim != 2 or self.grads.shape[0] != self.values.shape[0]:
            raise ValueError(
                f"grads shape {self.grads.shape} inconsistent with "
                f"{self.values.shape[0]} values"
            )
        if not np.all(np.isfinite(self.values)) or not np.all(np.isfinite(self.grads)):
            raise ValueError("jet field contains non-finite entries")

    @property
    def npoints(self) -> int:
        return self.values.shape[0]

    def grad_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.grads * self.grads, axis=1))


@dataclass
class GridFunction:
    """Nodal scalar values on the cell-center lattice of a grid."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function contains non-finite values")

    def check_admissible(self, tol: float = 0.0) -> None:
        """Raise unless 0 <= U <= 1 at every node (admissible-state flag)."""
        lo = float(self.values.min())
        hi = float(self.values.max())
        if lo < -tol or hi > 1.0 + tol:
            raise ValueError(f"values outside [0, 1]: min={lo}, max={hi}")


@dataclass(frozen=True)
class AnalyticFieldSpec:
    """A named entry of the closed-form field catalog plus its parameters."""

    name: str
    params: dict = field(default_factory=dict)


def build_grid(dim: int, n, extent=1.0) -> Grid:
    """Build a box grid with midpoint quadrature.

    Parameters
    ----------
    dim : int
        1 or 2.
    n : int or sequence of int
        Cells per axis; at least 3 per axis.
    extent : float or sequence of float
        Axis lengths; all positive.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    ns = tuple(int(v) for v in (n if np.iterable(n) else (n,) * dim))
    exts = tuple(float(v) for v in (extent if np.iterable(extent) else (extent,) * dim))
    if len(ns) != dim or len(exts) != dim:
        raise ValueError("n and extent must match dim")
    if any(v < 3 for v in ns):
        raise ValueError(f"need at least 3 cells per axis, got {ns}")
    if any(v <= 0.0 for v in exts):
        raise ValueError(f"extent must be positive, got {exts}")

    hs = tuple(L / m for L, m in zip(exts, ns))
    axes = [(np.arange(m) + 0.5) * h for m, h in zip(ns, hs)]
    if dim == 1:
        points = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        points = np.column_stack([gx.ravel(), gy.ravel()])
    weights = np.full(points.shape[0], float(np.prod(hs)))
    return Grid(dim=dim, extent=exts, n=ns, h=hs, quad_points=points, quad_weights=weights)


def integrate(values, grid: Grid) -> float:
    """Quadrature sum over the grid; exact accumulation in ascending point order."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.npoints,):
        raise ValueError(f"expected {grid.npoints} values, got shape {values.shape}")
    return math.fsum(grid.quad_weights * values)


def discrete_gradient(u, grid: Grid) -> JetField:
    """Stencil gradient of a nodal function at the cell centers.

    Centered differences across neighboring cells; at boundary cells the
    missing neighbor is the reflected ghost (equal to the boundary cell
    itself), realizing the zero-flux condition.  Exact for affine data at
    interior cells; the boundary value is biased toward 0, so the L1 error
    against a smooth field decays like O(h) under refinement.
    """
    vals = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
    if vals.shape != grid.n:
        vals = vals.reshape(grid.n)
    grads = np.empty((grid.npoints, grid.dim))
    for axis in range(grid.dim):
        grads[:, axis] = _centered_diff(vals, grid.h[axis], axis).ravel()
    return JetField(values=vals.ravel().copy(), grads=grads)


def _centered_diff(vals: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(vals, axis, 0)
    g = np.empty_like(v)
    g[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    g[0] = (v[1] - v[0]) / (2.0 * h)
    g[-1] = (v[-1] - v[-2]) / (2.0 * h)
    return np.moveaxis(g, 0, axis)


def _centered_diff_adjoint(cell: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Adjoint of :func:`_centered_diff` with respect to the plain dot product."""
    v = np.moveaxis(cell, axis, 0)
    r = np.zeros_like(v)
    w = 1.0 / (2.0 * h)
    r[2:] += v[1:-1] * w
    r[:-2] -= v[1:-1] * w
    r[1] += v[0] * w
    r[0] -= v[0] * w
    r[-1] += v[-1] * w
    r[-2] -= v[-1] * w
    return np.moveaxis(r, 0, axis)


def jet_linear(a: float, w1: JetField, b: float, w2: JetField) -> JetField:
    """The jet of a*w1 + b*w2."""
    return JetField(a * w1.values + b * w2.values, a * w1.grads + b * w2.grads)


def alpha_root_jet(w: JetField, alpha: float) -> JetField:
    """Jet of w**(1/alpha) for a positive field, by the chain rule."""
    if np.any(w.values <= 0.0):
        raise ValueError("alpha-root jet needs a strictly positive field")
    root = w.values ** (1.0 / alpha)
    grads = (1.0 / alpha) * (w.values ** (1.0 / alpha - 1.0))[:, None] * w.grads
    return JetField(root, grads)


def sample_jet(spec: AnalyticFieldSpec, grid: Grid) -> JetField:
    """Evaluate a catalog field and its exact gradient at the quadrature points."""
    if spec.name not in CATALOG_NAMES:
        raise ValueError(f"unknown catalog name {spec.name!r}")
    x = grid.quad_points
    p = spec.params
    if spec.name == "constant":
        c = float(p["c"])
        return JetField(np.full(grid.npoints, c), np.zeros_like(x))
    if spec.name == "affine":
        a0 = float(p.get("a0", 0.0))
        a1 = np.broadcast_to(np.atleast_1d(np.asarray(p["a1"], dtype=float)), (grid.dim,))
        vals = a0 + x @ a1
        return JetField(vals, np.broadcast_to(a1, x.shape).copy())
    if spec.name == "exp-linear":
        k = np.broadcast_to(np.atleast_1d(np.asarray(p["k"], dtype=float)), (grid.dim,))
        scale = float(p.get("scale", 1.0))
        vals = scale * np.exp(x @ k)
        return JetField(vals, vals[:, None] * k)
    if spec.name == "quadratic-bump":
        base = float(p.get("base", 1.0))
        amp = float(p.get("amp", 1.0))
        # product of per-axis parabolas 4*t*(L-t)/L^2, peaking at 1 mid-axis
        fac = np.empty((grid.npoints, grid.dim))
        dfac = np.empty((grid.npoints, grid.dim))
        for ax, L in enumerate(grid.extent):
            t = x[:, ax]
            fac[:, ax] = 4.0 * t * (L - t) / L**2
            dfac[:, ax] = 4.0 * (L - 2.0 * t) / L**2
        prod = np.prod(fac, axis=1)
        vals = base + amp * prod
        grads = np.empty_like(fac)
        for ax in range(grid.dim):
            others = np.prod(np.delete(fac, ax, axis=1), axis=1) if grid.dim > 1 else 1.0
            grads[:, ax] = amp * dfac[:, ax] * others
        return JetField(vals, grads)
    if spec.name == "abs-kink":
        _require_1d(grid, spec.name)
        c = float(p.get("c", grid.extent[0] / 2.0))
        t = x[:, 0] - c
        if np.any(t == 0.0):
            raise ValueError("grid places a quadrature point at the kink")
        return JetField(np.abs(t), np.sign(t)[:, None])
    if spec.name in ("ex51-pair", "ex52-pair"):
        return _counterexample_member(spec, grid)
    if spec.name == "noisy-image":
        return _noisy_image(spec, grid)
    raise AssertionError("unreachable")


def _require_1d(grid: Grid, name: str) -> None:
    if grid.dim != 1:
        raise ValueError(f"catalog entry {name!r} is one-dimensional")


def _counterexample_member(spec: AnalyticFieldSpec, grid: Grid) -> JetField:
    """Members of the kinked pairs on (-1, 1), via centered coordinates t = x - L/2.

    Member 1 is |t|; member 2 is t for t >= 0 and -2t for t < 0.  The
    ex52 variant multiplies both by the bump exp(1/(t^2-1)), which decays
    to zero at t = +-1.
    """
    _require_1d(grid, spec.name)
    member = int(spec.params["member"])
    if member not in (1, 2):
        raise ValueError("member must be 1 or 2")
    L = grid.extent[0]
    t = grid.quad_points[:, 0] - L / 2.0
    if np.any(t == 0.0):
        raise ValueError("grid places a quadrature point at the kink t=0")
    if member == 1:
        vals = np.abs(t)
        dvals = np.sign(t)
    else:
        vals = np.where(t >= 0.0, t, -2.0 * t)
        dvals = np.where(t >= 0.0, 1.0, -2.0)
    if spec.name == "ex51-pair":
        return JetField(vals, dvals[:, None])
    if np.any(np.abs(np.abs(t) - 1.0) < 1e-14):
        raise ValueError("grid places a quadrature point at t=+-1")
    if np.any(np.abs(t) >= 1.0):
        raise ValueError("ex52-pair needs the centered domain inside (-1, 1)")
    eta = np.exp(1.0 / (t * t - 1.0))
    deta = eta * (-2.0 * t) / (t * t - 1.0) ** 2
    return JetField(vals * eta, (dvals * eta + vals * deta)[:, None])


def _noisy_image(spec: AnalyticFieldSpec, grid: Grid) -> JetField:
    """Seeded trigonometric polynomial: noisy-looking but smooth with exact jets."""
    p = spec.params
    seed = int(p.get("seed", 0))
    base = float(p.get("base", 0.5))
    amp = float(p.get("amp", 0.3))
    modes = int(p.get("modes", 4))
    rng = np.random.default_rng(seed)
    kvecs = rng.integers(1, 4, size=(modes, grid.dim)).astype(float)
    coeffs = rng.uniform(-1.0, 1.0, size=modes)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=modes)
    norm = np.sum(np.abs(coeffs))
    x = grid.quad_points
    scale = 2.0 * np.pi / np.asarray(grid.extent)
    vals = np.full(grid.npoints, base)
    grads = np.zeros_like(x)
    for m in range(modes):
        k = kvecs[m] * scale
        arg = x @ k + phases[m]
        vals += (amp / norm) * coeffs[m] * np.cos(arg)
        grads += (-amp / norm) * coeffs[m] * np.sin(arg)[:, None] * k
    return JetField(vals, grads)
