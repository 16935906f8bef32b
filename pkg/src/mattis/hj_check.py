"""Hamilton-Jacobi consistency checks on the finite-dimensional projection.

Below the contraction threshold the solution g(t, y; x) of

    d_t g = xi(grad_y g),   g(0, y; x) = phi(y; x)

is recovered two independent ways: along characteristics (probe: the
forward map X, its inverse Z obtained by Picard iteration, and the value
transport U), and by an explicit monotone Lax-Friedrichs marching scheme
on a diagonal grid.  Agreement of the two routes, plus a direct residual
check of the PDE by finite differences in t, is the verification target.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ._gh import DEFAULT_ORDER
from .errors import CapabilityError, NonConvergenceError, ValidationError
from .model_core import (
    ModelSpec,
    SymMatrix,
    as_matrix,
    sym_part,
    t_star_lower_bound,
)
from .rs_core import g_value_batch, g_value_full, grad_phi, phi_batch, solve_rs_fixed_point


@dataclass(frozen=True)
class CharProbe:
    """One characteristic-structure probe at a base point (t, y, x)."""

    t: float
    y: SymMatrix
    x: tuple[float, ...]
    X_val: SymMatrix
    Z_val: SymMatrix
    U_val: float
    residual: float
    invertibility_gap: float


def characteristics_probe(
    model: ModelSpec,
    t: float,
    y,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = 1e-12,
    max_iter: int = 50_000,
) -> CharProbe:
    """Probe X, Z, U at (t, y, x) and compare U(t, Z(t, y)) with g(t, y; x).

    X(t, y) = y - t grad xi(grad phi(y; x)); Z solves the inverse relation
    z = y + t grad xi(grad phi(z; x)) by Picard iteration (a contraction
    with factor t / t* below the threshold); U(t, q) = phi(q)
    - t theta(grad phi(q)).  The residual must vanish since both routes
    compute the same value function.
    """
    if t < 0:
        raise ValidationError("t must be nonnegative")
    y = sym_part(as_matrix(y))
    x = np.asarray(x, dtype=float)
    gy, _ = grad_phi(model, y, x, order=order)
    x_val = y - t * model.xi.grad_sym(gy)

    # Inverse flow: Picard on w -> y + t grad xi(grad phi(w; x)).
    w = y.copy()
    contraction = 0.0
    prev = None
    converged = False
    for _ in range(max_iter):
        gw, _ = grad_phi(model, w, x, order=order)
        w_new = y + t * model.xi.grad_sym(gw)
        res = float(np.abs(w_new - w).max())
        if prev is not None and prev > 1e-13:
            contraction = max(contraction, res / prev)
        prev = res
        w = w_new
        if res <= tol:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(
            f"inverse-flow iteration did not reach {tol:.1e} (t={t}, threshold "
            f"{t_star_lower_bound(model):.6g})"
        )

    gz, _ = grad_phi(model, w, x, order=order)
    vals, _, _ = phi_batch(model, w[None], x[None], order=order)
    u_val = float(vals[0]) - t * float(model.xi.theta(gz))
    g, _ = g_value(model, t, y, x, order=order)
    return CharProbe(
        t=float(t),
        y=SymMatrix.from_array(y),
        x=tuple(float(v) for v in x),
        X_val=SymMatrix.from_array(x_val),
        Z_val=SymMatrix.from_array(w),
        U_val=u_val,
        residual=abs(u_val - g),
        invertibility_gap=1.0 - contraction,
    )


def g_value(model, t, y, x, order=DEFAULT_ORDER):
    g, z, _ = g_value_full(model, t, y, x, order=order, allow_uncertified=True)
    return g, z


def pde_residual(
    model: ModelSpec,
    t: float,
    y,
    x,
    dt: float = 1e-3,
    order: int = DEFAULT_ORDER,
) -> float:
    """|d_t g - xi(grad_y g)| via centered differences in t at (t, y, x)."""
    if t - dt < 0:
        raise ValidationError("need t - dt >= 0 for the centered difference")
    y = as_matrix(y)
    x = np.asarray(x, dtype=float)
    g_plus, _, _ = g_value_full(model, t + dt, y, x, order=order, allow_uncertified=True)
    g_minus, _, _ = g_value_full(model, t - dt, y, x, order=order, allow_uncertified=True)
    _, z, _ = g_value_full(model, t, y, x, order=order, allow_uncertified=True)
    dgdt = (g_plus - g_minus) / (2 * dt)
    return abs(dgdt - float(model.xi.value(z)))


# ---------------------------------------------------------------------------
# monotone grid solver on the diagonal section
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid over a box of diagonal y-coordinates."""

    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    num: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.mins) == len(self.maxs) == len(self.num)):
            raise ValidationError("grid mins/maxs/num must have equal lengths")
        if any(n < 3 for n in self.num):
            raise ValidationError("grids need at least 3 points per axis")
        if any(lo < 0 for lo in self.mins):
            raise ValidationError("diagonal grid must sit inside the PSD cone (mins >= 0)")
        if any(hi <= lo for lo, hi in zip(self.mins, self.maxs)):
            raise ValidationError("grid maxs must exceed mins")

    @property
    def ndim(self) -> int:
        return len(self.num)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.mins, self.maxs, self.num)]

    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for lo, hi, n in zip(self.mins, self.maxs, self.num)])

    def mesh(self) -> np.ndarray:
        """(n1, ..., nd, d) array of node coordinates."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(grids, axis=-1)


@dataclass(frozen=True)
class GridField:
    """Time slices of the marching scheme plus the run's stability record."""

    spec: GridSpec
    times: np.ndarray
    slices: np.ndarray  # (n_times, n1, ..., nd)
    viscosity: np.ndarray  # sigma_d
    dt: float
    cfl: float

    @property
    def final(self) -> np.ndarray:
        return self.slices[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        axes = self.spec.mesh().reshape(-1, self.spec.ndim)
        cols = [f"y{d + 1}" for d in range(self.spec.ndim)]
        cols += [f"g_t{idx}" for idx in range(len(self.times))]
        buf.write(",".join(cols) + "\n")
        flat = self.slices.reshape(len(self.times), -1)
        for row in range(axes.shape[0]):
            vals = [f"{v:.17g}" for v in axes[row]]
            vals += [f"{flat[s, row]:.17g}" for s in range(len(self.times))]
            buf.write(",".join(vals) + "\n")
        return buf.getvalue()


def _diag_to_matrices(points: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(points.shape[:-1] + (dim, dim))
    for d in range(dim):
        out[..., d, d] = points[..., d]
    return out


def _hamiltonian(model: ModelSpec, grads: np.ndarray) -> np.ndarray:
    """xi evaluated on diagonal gradient vectors (..., D)."""
    return np.asarray(model.xi.value(_diag_to_matrices(grads, model.spin_dim)))


def diagonal_gradient_bound(model: ModelSpec) -> np.ndarray:
    """Upper bound on |d xi / d a_dd| over gradients with entries in [0, 1].

    Attained gradients of g are PSD with entries bounded by 1, so the unit
    box is a safe hull for the viscosity coefficients.
    """
    b = model.xi.grad_entry_bound_on_box(1.0)
    return np.diag(b).copy()


def grid_viscosity_solve(
    model: ModelSpec,
    grid: GridSpec,
    T: float,
    x,
    order: int = DEFAULT_ORDER,
    cfl: float = 0.9,
    viscosity: np.ndarray | None = None,
) -> GridField:
    """Explicit Lax-Friedrichs marching for d_t g = xi(grad g) on the grid.

    Initial slice g(0, .) = phi(diag(y); x).  The scheme is monotone under
    the recorded CFL condition; box boundaries use first-order one-sided
    extrapolation, so comparisons should stay away from the inflow margin.
    """
    if model.mode == "vector" and not model.xi.is_diagonal_only():
        raise CapabilityError("the grid solver runs on diagonal sections; xi must be diagonal-only")
    if grid.ndim != model.spin_dim:
        raise ValidationError(f"grid dimension {grid.ndim} != spin/species dimension {model.spin_dim}")
    if T <= 0:
        raise ValidationError("T must be positive")
    x = np.asarray(x, dtype=float)

    sigma = np.asarray(viscosity, dtype=float) if viscosity is not None else diagonal_gradient_bound(model)
    if np.any(sigma < 0) or sigma.shape != (grid.ndim,):
        raise ValidationError("viscosity must be a nonnegative vector, one entry per axis")
    h = grid.spacing()
    rate = float(np.sum(sigma / h))
    if rate <= 0:
        n_steps = 1
    else:
        n_steps = max(1, int(np.ceil(T * rate / cfl)))
    dt = T / n_steps
    if dt * rate > 1.0 + 1e-12:
        raise ValidationError(f"CFL violation: dt * sum(sigma/h) = {dt * rate:.3f} > 1")

    mesh = grid.mesh()
    pts = mesh.reshape(-1, grid.ndim)
    y0 = _diag_to_matrices(pts, model.spin_dim)
    vals, _, _ = phi_batch(model, y0, np.broadcast_to(x, (pts.shape[0], x.size)), order=order)
    g = vals.reshape(mesh.shape[:-1])

    slices = [g.copy()]
    for _ in range(n_steps):
        g = _lf_step(model, g, h, dt, sigma)
        slices.append(g.copy())
    times = np.linspace(0.0, T, n_steps + 1)
    return GridField(
        spec=grid,
        times=times,
        slices=np.stack(slices),
        viscosity=sigma,
        dt=dt,
        cfl=dt * rate,
    )


def _pad_linear(g: np.ndarray, axis: int) -> np.ndarray:
    """Ghost layer by first-order one-sided extrapolation on both ends."""
    lo = 2.0 * np.take(g, 0, axis=axis) - np.take(g, 1, axis=axis)
    hi = 2.0 * np.take(g, -1, axis=axis) - np.take(g, -2, axis=axis)
    return np.concatenate(
        [np.expand_dims(lo, axis), g, np.expand_dims(hi, axis)], axis=axis
    )


def _lf_step(model: ModelSpec, g: np.ndarray, h: np.ndarray, dt: float, sigma: np.ndarray) -> np.ndarray:
    ndim = g.ndim
    centered = np.empty(g.shape + (ndim,))
    diffusion = np.zeros_like(g)
    for d in range(ndim):
        gp = _pad_linear(g, d)
        fwd = (np.take(gp, range(2, gp.shape[d]), axis=d) - g) / h[d]
        bwd = (g - np.take(gp, range(0, gp.shape[d] - 2), axis=d)) / h[d]
        centered[..., d] = 0.5 * (fwd + bwd)
        diffusion += 0.5 * sigma[d] * h[d] * (fwd - bwd) / h[d]
    ham = _hamiltonian(model, centered)
    return g + dt * (ham + diffusion)


def characteristic_reference(
    model: ModelSpec,
    grid: GridSpec,
    t: float,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = 1e-10,
) -> np.ndarray:
    """g(t, diag(y); x) on all grid nodes via the batched fixed point."""
    x = np.asarray(x, dtype=float)
    pts = grid.mesh().reshape(-1, grid.ndim)
    y = _diag_to_matrices(pts, model.spin_dim)
    g, _, _ = g_value_batch(
        model, t, y, np.broadcast_to(x, (pts.shape[0], x.size)), order=order, tol=tol
    )
    return g.reshape(grid.mesh().shape[:-1])


def comparison_margin(field: GridField) -> float:
    """Width of the boundary strip excluded from grid-vs-characteristics
    comparisons: the numerical domain of dependence spreads one cell per
    axis per step, plus two safety cells."""
    n_steps = len(field.times) - 1
    return float(np.max((n_steps + 2) * field.spec.spacing()))


def interior_mask(grid: GridSpec, margin: float) -> np.ndarray:
    mesh = grid.mesh()
    mask = np.ones(mesh.shape[:-1], dtype=bool)
    for d in range(grid.ndim):
        c = mesh[..., d]
        mask &= (c >= grid.mins[d] + margin) & (c <= grid.maxs[d] - margin)
    return mask


def compare_with_characteristics(
    model: ModelSpec,
    field: GridField,
    x,
    order: int = DEFAULT_ORDER,
    margin: float | None = None,
    reference: np.ndarray | None = None,
) -> dict:
    """Max abs difference between the final grid slice and the
    characteristic solution over interior nodes.

    Unless a precomputed full-grid reference is supplied, the fixed points
    are solved only on the interior comparison nodes.
    """
    if margin is None:
        margin = comparison_margin(field)
    mask = interior_mask(field.spec, margin)
    if not mask.any():
        raise ValidationError("comparison margin leaves no interior nodes")
    if reference is None:
        x = np.asarray(x, dtype=float)
        pts = field.spec.mesh()[mask]
        ymats = _diag_to_matrices(pts, model.spin_dim)
        ref_vals, _, _ = g_value_batch(
            model,
            float(field.times[-1]),
            ymats,
            np.broadcast_to(x, (pts.shape[0], x.size)),
            order=order,
        )
        diff = np.abs(field.final[mask] - ref_vals)
    else:
        diff = np.abs(field.final - reference)[mask]
    return {
        "max_abs_diff": float(diff.max()),
        "mean_abs_diff": float(diff.mean()),
        "margin": float(margin),
        "n_interior": int(mask.sum()),
        "dt": field.dt,
        "cfl": field.cfl,
    }
