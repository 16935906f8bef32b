"""Cascade functional for piecewise-constant paths and its path fixed point.

psi(q; x) is the hierarchical-field functional driven by a probability
cascade with uniformly distributed overlap.  For a path with jumps at
s_1 < ... < s_k and levels M_0..M_k it is computed by the discrete
recursion with Gaussian increments delta_0 = M_0, delta_l = M_l - M_{l-1}:

    Y = log sum_j w_j exp(sqrt(2) sum_l (sqrt(delta_l) eta_l) . tau_j
                          - M_k . tau_j tau_j^T + x . h(tau_j, chi))
    Y <- (1/s_l) log E_{eta_l} exp(s_l Y)        for l = k, ..., 1
    psi = -E_{eta_0, chi}[Y]

For k = 0 this reduces exactly to the replica-symmetric functional.  The
recursion is gated by two independent checks in the test suite: agreement
with phi at k = 0 and agreement with the truncated Poisson-Dirichlet
Monte Carlo realization at k >= 1.

The path gradient is computed by finite differences with respect to the
path increments along a PSD direction frame.  Differencing increments
(rather than levels) keeps every forward step inside the monotone cone,
so one-sided second-order formulas remain available on the cone boundary;
central differences with one Richardson step are used whenever the
backward step is feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._gh import DEFAULT_ORDER, gh_nodes
from .errors import (
    CapabilityError,
    NonConvergenceError,
    NumericalQualityError,
    ValidationError,
)
from .model_core import (
    ModelSpec,
    PiecewisePath,
    SpeciesSpec,
    min_eigenvalue,
    path_integral_theta,
    psd_frame,
    psd_project,
    psd_sqrt,
    shifted_path,
    t_star_lower_bound,
)

PATH_FIXED_POINT_TOL = 1e-8
PATH_MAX_ITER = 5_000
DEFAULT_MAX_JUMPS = 3
GRAD_FD_STEP = 1e-4
CONE_VIOLATION_TOL = 1e-6

_LEVEL_CAP_ELEMENTS = 2**28  # recursion cost guard: order**(D*(k+1))


@dataclass(frozen=True)
class PathFixedPointResult:
    """Converged path fixed point p = grad_q psi(q + t grad xi(p); x)."""

    p: PiecewisePath
    iterations: int
    final_residual: float
    contraction_estimate: float
    certified: bool
    trace: tuple[float, ...] = ()


@dataclass(frozen=True)
class RpcEstimate:
    """Monte Carlo estimate of psi from a truncated weight cascade."""

    value: float
    stderr: float
    n_samples: int
    seed: int


# ---------------------------------------------------------------------------
# recursion contexts
# ---------------------------------------------------------------------------


class _CascadeCtx:
    """Per-(sub)model data consumed by the recursion: atoms, weights,
    pattern atoms/weights, and the magnetization table."""

    def __init__(self, atoms, weights, pattern_weights, h_table):
        self.atoms = np.atleast_2d(np.asarray(atoms, dtype=float))  # (J, D)
        self.log_w = np.log(np.asarray(weights, dtype=float))
        self.pattern_w = np.asarray(pattern_weights, dtype=float)  # (K,)
        self.h = np.asarray(h_table, dtype=float)  # (J, K, d)
        self.self_overlap = np.einsum("ja,jb->jab", self.atoms, self.atoms)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


def _vector_ctx(model: ModelSpec) -> _CascadeCtx:
    return _CascadeCtx(
        model.spin_measure.atoms,
        model.spin_measure.weights,
        model.pattern_measure.weights,
        model.mattis_table,
    )


def _species_ctx(species: SpeciesSpec) -> _CascadeCtx:
    return _CascadeCtx(
        species.spin_measure.atoms,
        species.spin_measure.weights,
        species.pattern_measure.weights,
        species.mattis_table,
    )


def _check_capacity(ctx: _CascadeCtx, k: int, order: int, max_jumps: int):
    if k > max_jumps:
        raise CapabilityError(
            f"path has {k} jumps; recursion cost grows as order**(D*(k+1)) and the "
            f"configured maximum is {max_jumps} jumps"
        )
    if float(order) ** (ctx.dim * (k + 1)) > _LEVEL_CAP_ELEMENTS:
        raise CapabilityError(
            f"recursion size order**(D*(k+1)) = {order}**{ctx.dim * (k + 1)} exceeds the "
            "capacity budget; lower the quadrature order or the number of jumps"
        )


def _cascade_value(
    ctx: _CascadeCtx,
    breaks: np.ndarray,
    levels: np.ndarray,
    x: np.ndarray,
    order: int,
    need_grad_x: bool = False,
):
    """Value (and optionally d/dx) of the recursion for one canonical path.

    levels: (k+1, D, D) with PSD increments up to a 1e-9 eigenvalue floor.
    Returns (psi, grad_x or None).
    """
    D = ctx.dim
    k = len(breaks)
    nodes, node_w = gh_nodes(D, order)
    incs = np.empty_like(levels)
    incs[0] = levels[0]
    if k:
        incs[1:] = levels[1:] - levels[:-1]
    roots = psd_sqrt(incs, floor_tol=1e-9)  # (k+1, D, D)
    # Per-level field factors exp(F_l) with a global shift for stability.
    fields, shifts = [], []
    for l in range(k + 1):
        f = math.sqrt(2.0) * np.einsum("ne,ef,jf->nj", nodes, roots[l], ctx.atoms)
        m = float(f.max()) if f.size else 0.0
        fields.append(np.exp(f - m))
        shifts.append(m)
    zetas = np.asarray(breaks, dtype=float)

    psi_total = 0.0
    grad_total = np.zeros(ctx.h.shape[2]) if need_grad_x else None
    quad = -np.einsum("ab,jab->j", levels[-1], ctx.self_overlap)
    for kk, v_chi in enumerate(ctx.pattern_w):
        c = quad + ctx.h[:, kk, :] @ x + ctx.log_w
        mc = float(c.max())
        ec = np.exp(c - mc)
        shift = sum(shifts) + mc
        if need_grad_x:
            val, grad = _reduce_with_grad(fields, ec, ctx.h[:, kk, :], zetas, node_w)
            grad_total += v_chi * grad
        else:
            val = _reduce(fields, ec, zetas, node_w)
        psi_total += v_chi * (val + shift)
    psi_val = -psi_total
    return (psi_val, (-grad_total if need_grad_x else None))


def _reduce(fields, ec, zetas, node_w) -> float:
    """Collapse the level tensor from the innermost Gaussian outward."""
    k = len(fields) - 1
    if k == 0:
        s = fields[0] @ ec  # (n,)
        return float(node_w @ np.log(s))
    if k == 1:
        s = (fields[0] * ec[None, :]) @ fields[1].T  # (n0, n1)
        y1 = _pow_reduce(np.log(s), zetas[0], node_w, axis=1)
        return float(node_w @ y1)
    if k == 2:
        n = fields[1].shape[0]
        logt = np.empty((fields[0].shape[0], n))
        for i1 in range(n):
            s = (fields[0] * (fields[1][i1] * ec)[None, :]) @ fields[2].T
            logt[:, i1] = _pow_reduce(np.log(s), zetas[1], node_w, axis=1)
        y1 = _pow_reduce(logt, zetas[0], node_w, axis=1)
        return float(node_w @ y1)
    if k == 3:
        n1, n2 = fields[1].shape[0], fields[2].shape[0]
        logt1 = np.empty((fields[0].shape[0], n1))
        for i1 in range(n1):
            logt2 = np.empty((fields[0].shape[0], n2))
            for i2 in range(n2):
                s = (fields[0] * (fields[1][i1] * fields[2][i2] * ec)[None, :]) @ fields[3].T
                logt2[:, i2] = _pow_reduce(np.log(s), zetas[2], node_w, axis=1)
            logt1[:, i1] = _pow_reduce(logt2, zetas[1], node_w, axis=1)
        y1 = _pow_reduce(logt1, zetas[0], node_w, axis=1)
        return float(node_w @ y1)
    raise CapabilityError(f"recursion with {k} jumps is not supported")


def _pow_reduce(logvals: np.ndarray, zeta: float, node_w: np.ndarray, axis: int) -> np.ndarray:
    """(1/zeta) log sum_i w_i exp(zeta * logvals_i) along the given axis."""
    scaled = zeta * logvals + np.log(node_w)
    m = scaled.max(axis=axis, keepdims=True)
    out = (np.log(np.exp(scaled - m).sum(axis=axis)) + np.squeeze(m, axis=axis)) / zeta
    return out


def _reduce_with_grad(fields, ec, h_chi, zetas, node_w):
    """Like _reduce but also propagates d/dx of the value.

    h_chi: (J, d) magnetization values for the current pattern atom.
    """
    k = len(fields) - 1
    d = h_chi.shape[1]
    if k == 0:
        s = fields[0] @ ec
        g = (fields[0] * ec[None, :]) @ h_chi / s[:, None]
        return float(node_w @ np.log(s)), node_w @ g
    if k == 1:
        wec = fields[0] * ec[None, :]
        s = wec @ fields[1].T  # (n0, n1)
        logs = np.log(s)
        numer = np.einsum("qj,ij,jd->qid", wec, fields[1], h_chi)
        g = numer / s[..., None]  # (n0, n1, d)
        y1, g1 = _pow_reduce_grad(logs, g, zetas[0], node_w)
        return float(node_w @ y1), node_w @ g1
    if k == 2:
        n1 = fields[1].shape[0]
        logt = np.empty((fields[0].shape[0], n1))
        gt = np.empty((fields[0].shape[0], n1, d))
        for i1 in range(n1):
            wec = fields[0] * (fields[1][i1] * ec)[None, :]
            s = wec @ fields[2].T
            logs = np.log(s)
            numer = np.einsum("qj,ij,jd->qid", wec, fields[2], h_chi)
            g = numer / s[..., None]
            logt[:, i1], gt[:, i1, :] = _pow_reduce_grad(logs, g, zetas[1], node_w)
        y1, g1 = _pow_reduce_grad(logt, gt, zetas[0], node_w)
        return float(node_w @ y1), node_w @ g1
    raise CapabilityError("analytic d/dx is supported up to 2 jumps; use more samples or fewer levels")


def _pow_reduce_grad(logvals, grads, zeta, node_w):
    """_pow_reduce along the last value axis plus gradient propagation."""
    scaled = zeta * logvals + np.log(node_w)
    m = scaled.max(axis=1, keepdims=True)
    e = np.exp(scaled - m)
    tot = e.sum(axis=1)
    out = (np.log(tot) + m[:, 0]) / zeta
    p = e / tot[:, None]
    gout = np.einsum("qi,qid->qd", p, grads)
    return out, gout


# ---------------------------------------------------------------------------
# psi and its x-gradient
# ---------------------------------------------------------------------------


def _validate_path_input(model: ModelSpec, q: PiecewisePath):
    if q.dim != model.spin_dim:
        raise ValidationError(f"path dimension {q.dim} != spin_dim {model.spin_dim}")
    if model.mode == "multitype":
        off = q.values.copy()
        idx = np.arange(q.dim)
        off[:, idx, idx] = 0.0
        if np.abs(off).max() > 1e-9:
            raise ValidationError("multitype paths must be diagonal")


def psi(
    model: ModelSpec,
    q: PiecewisePath,
    x,
    order: int = DEFAULT_ORDER,
    max_jumps: int = DEFAULT_MAX_JUMPS,
) -> float:
    """Cascade functional psi(q; x) for a piecewise-constant path."""
    val, _ = psi_with_grad_x(model, q, x, order=order, max_jumps=max_jumps, need_grad_x=False)
    return val


def psi_with_grad_x(
    model: ModelSpec,
    q: PiecewisePath,
    x,
    order: int = DEFAULT_ORDER,
    max_jumps: int = DEFAULT_MAX_JUMPS,
    need_grad_x: bool = True,
) -> tuple[float, np.ndarray | None]:
    """psi and (optionally) its analytic x-gradient -E<h>."""
    _validate_path_input(model, q)
    x = np.asarray(x, dtype=float)
    if x.shape != (model.mattis_dim,):
        raise ValidationError(f"x must have shape ({model.mattis_dim},)")
    qc, _ = q.canonical()
    if model.mode == "vector":
        ctx = _vector_ctx(model)
        _check_capacity(ctx, qc.n_jumps, order, max_jumps)
        return _cascade_value(ctx, qc.breakpoints, qc.values, x, order, need_grad_x)
    total = 0.0
    grad = np.zeros(model.mattis_dim) if need_grad_x else None
    for s_idx, (species, sl) in enumerate(zip(model.species, model.species_slices())):
        ctx = _species_ctx(species)
        _check_capacity(ctx, qc.n_jumps, order, max_jumps)
        levels = qc.values[:, s_idx, s_idx][:, None, None]
        val, gx = _cascade_value(ctx, qc.breakpoints, levels, x[sl], order, need_grad_x)
        total += species.weight * val
        if need_grad_x:
            grad[sl] = species.weight * gx
    return total, grad


# ---------------------------------------------------------------------------
# path gradient by increment finite differences
# ---------------------------------------------------------------------------


def _fd_directions(model: ModelSpec) -> list[np.ndarray]:
    if model.mode == "vector":
        return psd_frame(model.spin_dim)
    out = []
    for s in range(model.spin_dim):
        e = np.zeros((model.spin_dim, model.spin_dim))
        e[s, s] = 1.0
        out.append(e)
    return out


def grad_q_psi(
    model: ModelSpec,
    q: PiecewisePath,
    x,
    order: int = DEFAULT_ORDER,
    eps: float = GRAD_FD_STEP,
    max_jumps: int = DEFAULT_MAX_JUMPS,
    cone_tol: float = CONE_VIOLATION_TOL,
) -> PiecewisePath:
    """Path gradient of psi, on the same breakpoints as q.

    Level values are recovered from derivatives with respect to the path
    increments (each level perturbation touches exactly one increment), and
    the output is projected onto the monotone PSD cone; violations beyond
    cone_tol raise with diagnostics.  Equal input levels are collapsed first
    and re-expanded afterwards, so exactly-redundant jumps yield exactly
    equal output levels.
    """
    _validate_path_input(model, q)
    x = np.asarray(x, dtype=float)
    qc, mapping = q.canonical()
    k = qc.n_jumps
    lens = qc.interval_lengths()
    incs = qc.increments()
    dirs = _fd_directions(model)
    D = model.spin_dim

    def psi_of_incs(new_incs: np.ndarray) -> float:
        levels = np.cumsum(new_incs, axis=0)
        return psi_with_grad_x(
            model,
            PiecewisePath(qc.breakpoints, levels, validate=False),
            x,
            order=order,
            max_jumps=max_jumps,
            need_grad_x=False,
        )[0]

    psi0: float | None = None
    H = np.zeros((k + 1, D, D))
    pairings = np.zeros((k + 1, len(dirs)))
    for l in range(k + 1):
        for di, direction in enumerate(dirs):
            def at(step: float) -> float:
                nonlocal psi0
                if step == 0.0:
                    if psi0 is None:
                        psi0 = psi_of_incs(incs)
                    return psi0
                pert = incs.copy()
                pert[l] = pert[l] + step * direction
                return psi_of_incs(pert)

            backward_ok = min_eigenvalue(incs[l] - eps * direction) >= -1e-13
            if backward_ok:
                d_full = (at(eps) - at(-eps)) / (2 * eps)
                d_half = (at(eps / 2) - at(-eps / 2)) / eps
                deriv = (4.0 * d_half - d_full) / 3.0
            else:
                deriv = (-3.0 * at(0.0) + 4.0 * at(eps / 2) - at(eps)) / eps
            pairings[l, di] = deriv

    for l in range(k + 1):
        H[l] = _matrix_from_pairings(model, dirs, pairings[l])

    G = np.empty_like(H)
    G[k] = H[k] / lens[k]
    for l in range(k - 1, -1, -1):
        G[l] = (H[l] - H[l + 1]) / lens[l]

    G = _project_to_cone(G, cone_tol)
    return PiecewisePath(q.breakpoints, G[mapping], validate=False)


def _matrix_from_pairings(model: ModelSpec, dirs, vals) -> np.ndarray:
    """Invert deriv = H . E over the direction frame to recover H."""
    D = model.spin_dim
    H = np.zeros((D, D))
    if model.mode == "multitype":
        for s in range(D):
            H[s, s] = vals[s]
        return H
    for a in range(D):
        H[a, a] = vals[a]
    idx = D
    for a in range(D):
        for b in range(a + 1, D):
            hab = 0.5 * (vals[idx] - H[a, a] - H[b, b])
            H[a, b] = hab
            H[b, a] = hab
            idx += 1
    return H


def _project_to_cone(G: np.ndarray, cone_tol: float) -> np.ndarray:
    """Clamp a level stack onto {monotone, PSD}; fail loudly past cone_tol."""
    viol = max(0.0, -min_eigenvalue(G[0]))
    for l in range(1, G.shape[0]):
        viol = max(viol, -min_eigenvalue(G[l] - G[l - 1]))
    if viol > cone_tol:
        raise NumericalQualityError(
            f"gradient path violates the monotone PSD cone by {viol:.3e} (> {cone_tol:.1e})",
            diagnostics={"violation": viol, "levels": G.tolist()},
        )
    out = np.empty_like(G)
    out[0] = psd_project(G[0])
    for l in range(1, G.shape[0]):
        out[l] = out[l - 1] + psd_project(G[l] - out[l - 1])
    return out


# ---------------------------------------------------------------------------
# path fixed point and the enriched value
# ---------------------------------------------------------------------------


def solve_path_fixed_point(
    model: ModelSpec,
    t: float,
    q: PiecewisePath,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = PATH_FIXED_POINT_TOL,
    max_iter: int = PATH_MAX_ITER,
    p0: PiecewisePath | None = None,
    max_jumps: int = DEFAULT_MAX_JUMPS,
    allow_uncertified: bool = False,
) -> PathFixedPointResult:
    """Picard iteration for p = grad_q psi(q + t grad xi(p); x).

    Iterates on paths sharing q's breakpoints: the gradient path jumps
    exactly where its argument jumps, so the breakpoint set is closed under
    the map.  Seeded with p0 = grad_q psi(q; x).
    """
    if t < 0:
        raise ValidationError("t must be nonnegative")
    certified = t < t_star_lower_bound(model)
    if not certified and not allow_uncertified:
        raise ValidationError(
            f"t={t} is not below the certified threshold "
            f"{t_star_lower_bound(model):.6g}; pass allow_uncertified=True to override"
        )
    _validate_path_input(model, q)
    p = p0 if p0 is not None else grad_q_psi(model, q, x, order=order, max_jumps=max_jumps)
    if not p.same_grid(q):
        p = p.expand_to(PiecewisePath.merged_grid(p, q))
        q = q.expand_to(p.breakpoints)
    trace: list[float] = []
    contraction = 0.0
    prev_res = None
    for it in range(1, max_iter + 1):
        arg = shifted_path(q, t, p, model.xi)
        pnew = grad_q_psi(model, arg, x, order=order, max_jumps=max_jumps)
        res = float(np.abs(pnew.values - p.values).max())
        trace.append(res)
        if prev_res is not None and prev_res > 1e-12:
            contraction = max(contraction, res / prev_res)
        prev_res = res
        p = pnew
        if res <= tol:
            return PathFixedPointResult(
                p=p,
                iterations=it,
                final_residual=res,
                contraction_estimate=contraction,
                certified=certified,
                trace=tuple(trace),
            )
    raise NonConvergenceError(
        f"path fixed point did not reach residual {tol:.1e} in {max_iter} iterations",
        trace=trace,
    )


def f_value(
    model: ModelSpec,
    t: float,
    q: PiecewisePath,
    x,
    order: int = DEFAULT_ORDER,
    tol: float = PATH_FIXED_POINT_TOL,
    max_jumps: int = DEFAULT_MAX_JUMPS,
    allow_uncertified: bool = False,
    fixed_point: PathFixedPointResult | None = None,
) -> float:
    """Enriched limit value f(t, q; x) = psi(q + t grad xi(p); x) - t int theta(p)."""
    if fixed_point is None:
        fixed_point = solve_path_fixed_point(
            model, t, q, x, order=order, tol=tol, max_jumps=max_jumps,
            allow_uncertified=allow_uncertified,
        )
    p = fixed_point.p
    arg = shifted_path(q, t, p, model.xi)
    val = psi(model, arg, x, order=order, max_jumps=max_jumps)
    return val - t * path_integral_theta(p, model.xi)


# ---------------------------------------------------------------------------
# Monte Carlo realization of the cascade average
# ---------------------------------------------------------------------------


def _pd_log_weights(rng, zeta: float, n_atoms: int) -> np.ndarray:
    """Log weights of the top-n atoms of a Poisson-Dirichlet(zeta) cascade level.

    Decreasing enumeration of the Poisson process via unit-exponential
    arrival times: u_a = Gamma_a^(-1/zeta); normalization happens later in
    log space over the truncated set.
    """
    gammas = np.cumsum(rng.exponential(size=n_atoms))
    return -np.log(gammas) / zeta


def rpc_mc_estimate(
    model: ModelSpec,
    q: PiecewisePath,
    x,
    seed: int,
    n_samples: int,
    truncation: int = 2000,
    max_leaves: int = 10_000_000,
) -> RpcEstimate:
    """Monte Carlo estimate of psi(q; x) from truncated weight cascades.

    Independent of the recursion: per sample, Poisson-Dirichlet weights are
    drawn at every jump parameter s_l, Gaussian fields with the increment
    covariances attach to the tree, and the sample value is
    -log of the weighted atom sum.  Deterministic per seed via per-sample
    counter-based streams; stderr is the jackknife estimate (for the plain
    mean this equals the usual standard error).
    """
    _validate_path_input(model, q)
    x = np.asarray(x, dtype=float)
    if q.n_jumps < 1:
        raise ValidationError("the MC oracle needs at least one jump; use phi for constant paths")
    if n_samples < 100:
        raise ValidationError("rpc_mc_estimate needs at least 100 samples")
    if truncation**q.n_jumps > max_leaves:
        raise CapabilityError(
            f"truncated cascade has {truncation}**{q.n_jumps} leaves; beyond the budget"
        )
    if model.mode == "vector":
        values = _mc_samples_vector(_vector_ctx(model), q, x, seed, n_samples, truncation)
    else:
        parts = []
        for s_idx, (species, sl) in enumerate(zip(model.species, model.species_slices())):
            levels = q.values[:, s_idx, s_idx][:, None, None]
            qs = PiecewisePath(q.breakpoints, levels, validate=False)
            vals = _mc_samples_vector(
                _species_ctx(species), qs, x[sl], seed + 7919 * (s_idx + 1), n_samples, truncation
            )
            parts.append(species.weight * vals)
        values = np.sum(parts, axis=0)
    mean = float(values.mean())
    n = values.size
    jack = (values.sum() - values) / (n - 1)
    stderr = float(np.sqrt((n - 1) / n * ((jack - jack.mean()) ** 2).sum()))
    return RpcEstimate(value=mean, stderr=stderr, n_samples=n, seed=int(seed))


def _mc_samples_vector(
    ctx: _CascadeCtx, q: PiecewisePath, x: np.ndarray, seed: int, n_samples: int, truncation: int
) -> np.ndarray:
    D = ctx.dim
    incs = q.increments()
    roots = psd_sqrt(incs, floor_tol=1e-9)
    zetas = q.breakpoints
    k = q.n_jumps
    quad = -np.einsum("ab,jab->j", q.right_limit, ctx.self_overlap)
    pattern_cdf = np.cumsum(ctx.pattern_w)
    out = np.empty(n_samples)
    for i in range(n_samples):
        rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), i]))
        # leaf log-weights of the nested cascade
        logw = _pd_log_weights(rng, float(zetas[0]), truncation)
        for l in range(1, k):
            child = np.stack(
                [_pd_log_weights(rng, float(zetas[l]), truncation) for _ in range(logw.size)]
            )
            logw = (logw[:, None] + child).ravel()
        logw = logw - _logsumexp(logw)
        # Gaussian tree fields: root level 0 is shared by all leaves.
        field = (roots[0] @ rng.standard_normal(D))[None, :]
        reps = 1
        for l in range(1, k + 1):
            reps *= truncation
            draws = rng.standard_normal((reps, D)) @ roots[l].T
            field = np.repeat(field, truncation, axis=0)[: draws.shape[0]] + draws
        kk = int(np.searchsorted(pattern_cdf, rng.uniform()))
        expo = math.sqrt(2.0) * field @ ctx.atoms.T + (quad + ctx.h[:, kk, :] @ x + ctx.log_w)[None, :]
        log_i = _logsumexp(expo, axis=1)
        out[i] = -_logsumexp(logw + log_i)
    return out


def _logsumexp(a: np.ndarray, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out if axis is not None else float(out)
