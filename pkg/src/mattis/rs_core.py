"""Replica-symmetric functional, its gradients, and the matrix fixed point.

phi(y; x) = -E log int exp(sqrt(2y) eta . tau - y . tau tau^T + x . h(tau, chi)) dP1(tau)

with eta a standard Gaussian vector and the expectation over eta (by
tensorized Gauss-Hermite quadrature) and chi (exact weighted sum).  The
value g(t, y; x) of the finite-dimensional projection is obtained from the
unique PSD solution z of

    z = grad_y phi(y + t grad xi(z); x)

via g = phi(y + t grad xi(z); x) - t theta(z), valid below the certified
contraction threshold.

All evaluators are batched over leading axes of (y, x); scalar wrappers
sit on top.  Sums are numpy reductions (pairwise), so results are
deterministic for a fixed quadrature order regardless of threading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._gh import DEFAULT_ORDER, gh_nodes
from .errors import NonConvergenceError, ValidationError
from .model_core import (
    ModelSpec,
    PSD_EIG_TOL,
    SymMatrix,
    as_matrix,
    min_eigenvalue,
    psd_sqrt,
    sym_part,
    t_star_lower_bound,
)

RS_FIXED_POINT_TOL = 1e-10
RS_MAX_ITER = 10_000

# Elements per exponent tensor chunk; keeps peak memory near 128 MB.
_CHUNK_ELEMENTS = 16_000_000


@dataclass(frozen=True)
class RsFixedPointResult:
    """Converged point of the replica-symmetric fixed-point map."""

    z: SymMatrix
    iterations: int
    final_residual: float
    contraction_estimate: float
    certified: bool
    trace: tuple[float, ...] = ()

    @property
    def z_array(self) -> np.ndarray:
        return self.z.array


# ---------------------------------------------------------------------------
# batched evaluators
# ---------------------------------------------------------------------------


class _VectorEvaluator:
    """phi and its gradients for vector-mode models, batched over (y, x)."""

    def __init__(self, model: ModelSpec, order: int):
        self.model = model
        self.order = int(order)
        self.atoms = model.spin_measure.atoms  # (J, D)
        self.log_w = np.log(model.spin_measure.weights)  # (J,)
        self.self_overlap = np.einsum("ja,jb->jab", self.atoms, self.atoms)
        self.pattern_w = model.pattern_measure.weights  # (K,)
        self.h = model.mattis_table  # (J, K, d)
        self.nodes, self.node_w = gh_nodes(model.spin_dim, self.order)

    def __call__(
        self,
        y: np.ndarray,
        x: np.ndarray,
        need_grads: bool = False,
        need_grad_x: bool | None = None,
    ):
        """y: (B, D, D) PSD, x: (B, d).  Returns (phi, grad_y, grad_x)."""
        if need_grad_x is None:
            need_grad_x = need_grads
        B = y.shape[0]
        n, K, J = self.nodes.shape[0], self.pattern_w.shape[0], self.atoms.shape[0]
        d = self.h.shape[2]
        phi = np.empty(B)
        gy = np.empty((B, y.shape[1], y.shape[2])) if need_grads else None
        gx = np.empty((B, d)) if need_grad_x else None
        chunk = max(1, _CHUNK_ELEMENTS // max(n * K * J, 1))
        for lo in range(0, B, chunk):
            hi = min(B, lo + chunk)
            self._block(y[lo:hi], x[lo:hi], phi[lo:hi],
                        gy[lo:hi] if need_grads else None,
                        gx[lo:hi] if need_grad_x else None)
        return phi, gy, gx

    def _block(self, y, x, phi_out, gy_out, gx_out):
        roots = psd_sqrt(2.0 * y, floor_tol=1e-9)  # (B, D, D)
        u = np.matmul(roots, self.atoms.T)  # (B, D, J): columns are sqrt(2y) tau_j
        fields = np.matmul(self.nodes, u)  # (B, n, J)
        quad = -np.einsum("bde,jde->bj", y, self.self_overlap)  # (B, J)
        xh = np.einsum("bd,jkd->bkj", x, self.h)  # (B, K, J)
        expo = (
            fields[:, :, None, :]
            + quad[:, None, None, :]
            + xh[:, None, :, :]
            + self.log_w[None, None, None, :]
        )  # (B, n, K, J)
        # A cheap exponent bound lets us skip the max-shift passes; the
        # shifted path stays available for extreme inputs.
        node_norm = float(np.linalg.norm(self.nodes, axis=1).max())
        bound = (
            node_norm * float(np.linalg.norm(u, axis=1).max())
            + float(np.abs(quad).max())
            + float(np.abs(xh).max())
            + float(np.abs(self.log_w).max())
        )
        if bound < 600.0:
            ez = np.exp(expo)
            z = ez.sum(axis=-1)
            logz = np.log(z)
        else:
            mx = expo.max(axis=-1, keepdims=True)
            ez = np.exp(expo - mx)
            z = ez.sum(axis=-1)
            logz = np.log(z) + mx[..., 0]
        mean_over_chi = logz @ self.pattern_w  # (B, n)
        phi_out[...] = -(mean_over_chi @ self.node_w)
        if gy_out is None and gx_out is None:
            return
        B, n, K, J = ez.shape
        p = ez / z[..., None]  # Gibbs weights (B, n, K, J)
        w_nk = (self.node_w[:, None] * self.pattern_w[None, :]).reshape(-1)  # (n*K,)
        if gy_out is not None:
            tmean = np.matmul(p.reshape(B, n * K, J), self.atoms)  # (B, n*K, D)
            gy_out[...] = np.matmul(
                tmean.transpose(0, 2, 1), tmean * w_nk[None, :, None]
            )
        if gx_out is not None:
            acc = np.zeros((B, self.h.shape[2]))
            for k in range(K):
                hk = np.matmul(p[:, :, k, :].reshape(B * n, J), self.h[:, k, :])
                hk = hk.reshape(B, n, -1)
                acc += self.pattern_w[k] * np.einsum("n,bnd->bd", self.node_w, hk)
            gx_out[...] = -acc


class _MultitypeEvaluator:
    """Species-weighted sum of scalar evaluators for multitype models."""

    def __init__(self, model: ModelSpec, order: int):
        self.model = model
        self.order = int(order)
        self.parts = []
        for s, sl in zip(model.species, model.species_slices()):
            sub = _ScalarSpecies(s, order)
            self.parts.append((s.weight, sl, sub))

    def __call__(
        self,
        y: np.ndarray,
        x: np.ndarray,
        need_grads: bool = False,
        need_grad_x: bool | None = None,
    ):
        if need_grad_x is None:
            need_grad_x = need_grads
        B, S = y.shape[0], y.shape[1]
        off = y.copy()
        idx = np.arange(S)
        off[:, idx, idx] = 0.0
        if np.abs(off).max() > 1e-9:
            raise ValidationError("multitype models take diagonal y / diagonal paths")
        phi = np.zeros(B)
        gy = np.zeros((B, S, S)) if need_grads else None
        gx = np.zeros((B, self.model.mattis_dim)) if need_grad_x else None
        for s_idx, (lam, sl, sub) in enumerate(self.parts):
            ys = y[:, s_idx, s_idx]
            xs = x[:, sl]
            val, dys, dxs = sub(ys, xs, need_grads, need_grad_x)
            phi += lam * val
            if need_grads:
                gy[:, s_idx, s_idx] = lam * dys
            if need_grad_x:
                gx[:, sl] = lam * dxs
        return phi, gy, gx


class _ScalarSpecies:
    """phi_s for one scalar species: 1-d quadrature, exact atom sums."""

    def __init__(self, species, order: int):
        self.atoms = species.spin_measure.atoms[:, 0]  # (J,)
        self.log_w = np.log(species.spin_measure.weights)
        self.pattern_w = species.pattern_measure.weights
        self.h = species.mattis_table  # (J, K, d_s)
        nodes, weights = gh_nodes(1, order)
        self.nodes = nodes[:, 0]
        self.node_w = weights

    def __call__(self, ys: np.ndarray, xs: np.ndarray, need_grads: bool, need_grad_x: bool = True):
        if np.any(ys < -PSD_EIG_TOL):
            raise ValidationError("species y values must be nonnegative")
        ys = np.clip(ys, 0.0, None)
        fields = np.sqrt(2.0 * ys)[:, None, None] * (
            self.nodes[None, :, None] * self.atoms[None, None, :]
        )  # (B, n, J)
        quad = -ys[:, None] * self.atoms[None, :] ** 2  # (B, J)
        xh = np.einsum("bd,jkd->bkj", xs, self.h)  # (B, K, J)
        expo = (
            fields[:, :, None, :]
            + quad[:, None, None, :]
            + xh[:, None, :, :]
            + self.log_w[None, None, None, :]
        )
        mx = expo.max(axis=-1, keepdims=True)
        ez = np.exp(expo - mx)
        z = ez.sum(axis=-1)
        logz = np.log(z) + mx[..., 0]
        phi = -((logz @ self.pattern_w) @ self.node_w)
        if not need_grads and not need_grad_x:
            return phi, None, None
        p = ez / z[..., None]
        w_nk = self.node_w[None, :, None] * self.pattern_w[None, None, :]
        dy = None
        if need_grads:
            tmean = np.einsum("bnkj,j->bnk", p, self.atoms)
            dy = np.einsum("bnk,bnk,bnk->b", w_nk, tmean, tmean)
        dx = None
        if need_grad_x:
            dx = -np.einsum("bnk,bnkj,jkd->bd", w_nk, p, self.h)
        return phi, dy, dx


def _evaluator(model: ModelSpec, order: int):
    if order < 2:
        raise ValidationError(f"quadrature order must be >= 2, got {order}")
    if model.mode == "vector":
        return _VectorEvaluator(model, order)
    return _MultitypeEvaluator(model, order)


def _check_psd_batch(y: np.ndarray):
    vals = np.linalg.eigvalsh(sym_part(y))
    worst = float(vals.min())
    if worst < -PSD_EIG_TOL:
        raise ValidationError(f"y must be PSD: min eigenvalue {worst:.3e}")


def _prep_inputs(model: ModelSpec, y, x) -> tuple[np.ndarray, np.ndarray]:
    y = as_matrix(y)
    if y.ndim == 2:
        y = y[None]
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if y.shape[1:] != (model.spin_dim, model.spin_dim):
        raise ValidationError(f"y must be {model.spin_dim}x{model.spin_dim}")
    if x.shape[1] != model.mattis_dim:
        raise ValidationError(f"x must have dimension {model.mattis_dim}")
    _check_psd_batch(y)
    return sym_part(y), x


# ---------------------------------------------------------------------------
# public evaluation API
# ---------------------------------------------------------------------------


def phi(model: ModelSpec, y, x, order: int = DEFAULT_ORDER) -> float:
    """Replica-symmetric functional phi(y; x)."""
    yb, xb = _prep_inputs(model, y, x)
    val, _, _ = _evaluator(model, order)(yb, xb)
    return float(val[0])


def grad_phi(model: ModelSpec, y, x, order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """(grad_y phi, grad_x phi).

    grad_y phi = E[<tau> <tau>^T] (Gibbs bracket at each quadrature node);
    grad_x phi = -E[<h>].  Both are analytic, not finite differences.
    """
    yb, xb = _prep_inputs(model, y, x)
    _, gy, gx = _evaluator(model, order)(yb, xb, need_grads=True)
    return gy[0], gx[0]


def phi_batch(model: ModelSpec, y, x, order: int = DEFAULT_ORDER, need_grads: bool = False):
    """Batched (phi, grad_y, grad_x) over leading axis of y (B,D,D), x (B,d)."""
    yb, xb = _prep_inputs(model, y, x)
    return _evaluator(model, order)(yb, xb, need_grads=need_grads)


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------


def _solve_batch(
    model: ModelSpec,
    t: float,
    y: np.ndarray,
    x: np.ndarray,
    order: int,
    tol: float,
    max_iter: int,
    z0: np.ndarray | None,
    damping: float,
    record_trace: bool,
):
    """Picard iteration z <- grad_y phi(y + t grad xi(z); x), batched.

    Returns (z, iterations, contraction, final_residual, traces).
    """
    ev = _evaluator(model, order)
    B = y.shape[0]
    if z0 is None:
        _, z, _ = ev(y, x, need_grads=True, need_grad_x=False)
    else:
        z = np.broadcast_to(as_matrix(z0), y.shape).copy()
    active = np.ones(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    contraction = np.zeros(B)
    prev_res = np.full(B, np.nan)
    final_res = np.zeros(B)
    traces = [[] for _ in range(B)] if record_trace else None

    for it in range(1, max_iter + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        shifted = y[idx] + t * model.xi.grad_sym(z[idx])
        _, znew, _ = ev(shifted, x[idx], need_grads=True, need_grad_x=False)
        res = np.abs(znew - z[idx]).max(axis=(-2, -1))
        ratio_ok = prev_res[idx] > 1e-12
        ratios = np.where(ratio_ok & (prev_res[idx] > 0), res / np.where(prev_res[idx] > 0, prev_res[idx], 1.0), 0.0)
        contraction[idx] = np.maximum(contraction[idx], ratios)
        if damping > 0:
            z[idx] = (1.0 - damping) * znew + damping * z[idx]
        else:
            z[idx] = znew
        prev_res[idx] = res
        iters[idx] = it
        if record_trace:
            for b, r in zip(idx, res):
                traces[b].append(float(r))
        done = res <= tol
        final_res[idx[done]] = res[done]
        active[idx[done]] = False

    if active.any():
        bad = int(np.nonzero(active)[0][0])
        raise NonConvergenceError(
            f"fixed point did not reach residual {tol:.1e} in {max_iter} iterations "
            f"(last residual {prev_res[bad]:.3e})",
            trace=traces[bad] if record_trace else list(prev_res[active]),
        )
    return z, iters, contraction, final_res, traces


def solve_rs_fixed_point(
    model: ModelSpec,
    t: float,
    y,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = RS_FIXED_POINT_TOL,
    max_iter: int = RS_MAX_ITER,
    z0=None,
    damping: float = 0.0,
    allow_uncertified: bool = False,
) -> RsFixedPointResult:
    """Solve z = grad_y phi(y + t grad xi(z); x) by plain Picard iteration.

    For t below the certified contraction threshold the map is a contraction
    and no damping is needed; pass allow_uncertified=True (optionally with
    damping) to try beyond it, in which case the result carries
    certified=False.
    """
    if t < 0:
        raise ValidationError("t must be nonnegative")
    certified = t < t_star_lower_bound(model)
    if not certified and not allow_uncertified:
        raise ValidationError(
            f"t={t} is not below the certified threshold "
            f"{t_star_lower_bound(model):.6g}; pass allow_uncertified=True to override"
        )
    yb, xb = _prep_inputs(model, y, x)
    z0b = None if z0 is None else as_matrix(z0)[None]
    z, iters, contraction, final_res, traces = _solve_batch(
        model, t, yb, xb, order, tol, max_iter, z0b, damping, record_trace=True
    )
    # Residual of the returned point under one more application of the map.
    ev = _evaluator(model, order)
    shifted = yb + t * model.xi.grad_sym(z)
    _, zmap, _ = ev(shifted, xb, need_grads=True, need_grad_x=False)
    final = float(np.abs(zmap - z).max())
    return RsFixedPointResult(
        z=SymMatrix.from_array(z[0]),
        iterations=int(iters[0]),
        final_residual=final,
        contraction_estimate=float(contraction[0]),
        certified=certified,
        trace=tuple(traces[0]),
    )


def g_value(
    model: ModelSpec,
    t: float,
    y,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = RS_FIXED_POINT_TOL,
    z0=None,
    allow_uncertified: bool = False,
) -> tuple[float, np.ndarray]:
    """g(t, y; x) = phi(y + t grad xi(z); x) - t theta(z) and grad_y g = z."""
    g, z, _ = g_value_full(model, t, y, x, order=order, tol=tol, z0=z0,
                           allow_uncertified=allow_uncertified)
    return g, z


def g_value_full(
    model: ModelSpec,
    t: float,
    y,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = RS_FIXED_POINT_TOL,
    z0=None,
    allow_uncertified: bool = False,
) -> tuple[float, np.ndarray, np.ndarray]:
    """(g, z, grad_x g); grad_x g = grad_x phi at the shifted base point."""
    res = solve_rs_fixed_point(
        model, t, y, x, order=order, tol=tol, z0=z0, allow_uncertified=allow_uncertified
    )
    z = res.z_array
    yb, xb = _prep_inputs(model, y, x)
    shifted = yb + t * model.xi.grad_sym(z[None])
    ev = _evaluator(model, order)
    val, _, gx = ev(shifted, xb, need_grads=True)
    g = float(val[0]) - t * float(model.xi.theta(z))
    return g, z, gx[0]


def g_value_batch(
    model: ModelSpec,
    t: float,
    y,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = RS_FIXED_POINT_TOL,
    max_iter: int = RS_MAX_ITER,
    z0=None,
    need_grad_x: bool = False,
):
    """Batched g over rows of (y, x): returns (g, z, grad_x or None).

    Used by the grid cross-checks; certification is the caller's concern.
    """
    yb, xb = _prep_inputs(model, y, x)
    z0b = None if z0 is None else as_matrix(z0)
    if z0b is not None and z0b.ndim == 2:
        z0b = z0b[None]
    z, _, _, _, _ = _solve_batch(
        model, t, yb, xb, order, tol, max_iter, z0b, damping=0.0, record_trace=False
    )
    ev = _evaluator(model, order)
    shifted = yb + t * model.xi.grad_sym(z)
    val, _, gx = ev(shifted, xb, need_grads=False, need_grad_x=need_grad_x)
    g = val - t * np.atleast_1d(model.xi.theta(z))
    return g, z, (gx if need_grad_x else None)
