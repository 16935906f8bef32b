"""Legendre duality: convex dual f*, inf-sup limit free energy, rate
functions, the cumulant generating function, and the standard-model wrapper.

All large-deviation quantities reduce to the concave maximization

    f*(t, q; m) = sup_x { x . m + f(t, q; x) }

(f is concave and C^1 in x below the contraction threshold) together with
an outer minimization over magnetizations m restricted to the convex hull
of attainable generalized-spin values.  The rate function of the mean
magnetization under the G-tilted Gibbs measure is

    I_G(m) = -G(m) + f*(t, q; m) + sup_m' { G(m') - f*(t, q; m') }.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize as sciopt

from ._gh import DEFAULT_ORDER
from .cascade import psi_with_grad_x, solve_path_fixed_point
from .errors import NonConvergenceError, NumericalQualityError, ValidationError
from .model_core import (
    DiscreteMeasure,
    ModelSpec,
    PiecewisePath,
    SpeciesSpec,
    path_integral_theta,
    shifted_path,
    t_star_lower_bound,
)
from .rs_core import g_value_full

HULL_DILATION = 1e-6
FSTAR_GRAD_TOL = 1e-9
SIMPLEX_TOL = 1e-7


# ---------------------------------------------------------------------------
# Mattis-term descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyTerm:
    coef: float
    powers: tuple[int, ...]


@dataclass(frozen=True)
class NormTerm:
    weight: float
    p: float


@dataclass(frozen=True)
class GDescriptor:
    """Continuous Mattis interaction G from a small expression grammar:
    constant + linear + polynomial terms + p-norm terms.

    Keeps run configurations serializable; the limit formulas hold for any
    continuous G, the grammar is just the evaluable family the CLI offers.
    """

    dim: int
    const: float = 0.0
    linear: tuple[float, ...] = ()
    poly: tuple[PolyTerm, ...] = ()
    norms: tuple[NormTerm, ...] = ()

    def __post_init__(self):
        if self.linear and len(self.linear) != self.dim:
            raise ValidationError("linear coefficients must match the descriptor dimension")
        for t in self.poly:
            if len(t.powers) != self.dim or any(e < 0 for e in t.powers):
                raise ValidationError("poly powers must be nonnegative and match the dimension")
        for n in self.norms:
            if n.p < 1:
                raise ValidationError("norm exponents must satisfy p >= 1")

    @classmethod
    def zero(cls, dim: int) -> "GDescriptor":
        return cls(dim=dim)

    @classmethod
    def linear_of(cls, coeffs) -> "GDescriptor":
        coeffs = tuple(float(c) for c in np.atleast_1d(coeffs))
        return cls(dim=len(coeffs), linear=coeffs)

    def value(self, m) -> np.ndarray | float:
        m = np.asarray(m, dtype=float)
        scalar = m.ndim == 1
        mm = np.atleast_2d(m)
        out = np.full(mm.shape[0], self.const)
        if self.linear:
            out = out + mm @ np.asarray(self.linear)
        for t in self.poly:
            term = np.full(mm.shape[0], t.coef)
            for d, e in enumerate(t.powers):
                if e:
                    term = term * mm[:, d] ** e
            out = out + term
        for n in self.norms:
            out = out + n.weight * np.linalg.norm(mm, ord=n.p, axis=1)
        return float(out[0]) if scalar else out

    def shifted(self, c: float) -> "GDescriptor":
        return replace(self, const=self.const + c)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "const": float(self.const),
            "linear": [float(c) for c in self.linear],
            "poly": [{"coef": float(t.coef), "powers": list(t.powers)} for t in self.poly],
            "norms": [{"weight": float(n.weight), "p": float(n.p)} for n in self.norms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GDescriptor":
        return cls(
            dim=int(d["dim"]),
            const=float(d.get("const", 0.0)),
            linear=tuple(float(c) for c in d.get("linear", [])),
            poly=tuple(
                PolyTerm(coef=float(t["coef"]), powers=tuple(int(e) for e in t["powers"]))
                for t in d.get("poly", [])
            ),
            norms=tuple(
                NormTerm(weight=float(n["weight"]), p=float(n["p"])) for n in d.get("norms", [])
            ),
        )


# ---------------------------------------------------------------------------
# attainable-magnetization hull
# ---------------------------------------------------------------------------


def hull_distance(model: ModelSpec, m) -> float:
    """sup-norm distance from m to the hull of attainable magnetizations."""
    pts = model.magnetization_hull_points()
    m = np.asarray(m, dtype=float)
    n, d = pts.shape
    # variables: (lambda_1..lambda_n, s); minimize s subject to
    # -s <= (pts^T lambda - m)_i <= s, sum lambda = 1, lambda >= 0.
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.zeros((2 * d, n + 1))
    b_ub = np.zeros(2 * d)
    a_ub[:d, :n] = pts.T
    a_ub[:d, -1] = -1.0
    b_ub[:d] = m
    a_ub[d:, :n] = -pts.T
    a_ub[d:, -1] = -1.0
    b_ub[d:] = -m
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    res = sciopt.linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
        bounds=[(0, None)] * n + [(0, None)], method="highs",
    )
    if not res.success:
        raise NumericalQualityError(f"hull membership LP failed: {res.message}")
    return float(res.fun)


def hull_bounding_box(model: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    pts = model.magnetization_hull_points()
    return pts.min(axis=0), pts.max(axis=0)


# ---------------------------------------------------------------------------
# f(t, q; x) dispatch with warm starts
# ---------------------------------------------------------------------------


class _FEvaluator:
    """f(t, q; x) and grad_x f, dispatching to the replica-symmetric route
    for constant paths and the cascade route otherwise.

    grad_x f is grad_x of the base functional at the shifted argument
    (envelope identity at the fixed point), so no optimization-path
    differentiation is needed.  Warm starts for the inner fixed points are
    kept across calls.
    """

    def __init__(self, model: ModelSpec, t: float, q: PiecewisePath,
                 order: int = DEFAULT_ORDER, allow_uncertified: bool = False):
        if t < 0:
            raise ValidationError("t must be nonnegative")
        if not allow_uncertified and t >= t_star_lower_bound(model):
            raise ValidationError(
                f"t={t} is not below the certified threshold {t_star_lower_bound(model):.6g}"
            )
        self.model = model
        self.t = float(t)
        self.q = q
        self.order = order
        self.allow_uncertified = allow_uncertified
        self.constant = q.is_constant(tol=0.0)
        self._warm_z = None
        self._warm_p = None
        self.n_evals = 0

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        self.n_evals += 1
        x = np.asarray(x, dtype=float)
        if self.constant:
            g, z, gx = g_value_full(
                self.model, self.t, self.q.values[0], x,
                order=self.order, z0=self._warm_z, allow_uncertified=self.allow_uncertified,
            )
            self._warm_z = z
            return g, gx
        fp = solve_path_fixed_point(
            self.model, self.t, self.q, x, order=self.order,
            p0=self._warm_p, allow_uncertified=self.allow_uncertified,
        )
        self._warm_p = fp.p
        arg = shifted_path(self.q, self.t, fp.p, self.model.xi)
        val, gx = psi_with_grad_x(self.model, arg, x, order=self.order)
        f = val - self.t * path_integral_theta(fp.p, self.model.xi)
        return f, gx


# ---------------------------------------------------------------------------
# convex dual f*
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FStarResult:
    value: float
    argmax_x: np.ndarray | None
    finite: bool
    grad_norm: float
    iterations: int


def f_star(
    model: ModelSpec,
    t: float,
    q: PiecewisePath,
    m,
    order: int = DEFAULT_ORDER,
    grad_tol: float = FSTAR_GRAD_TOL,
    max_iter: int = 2000,
    x0=None,
    evaluator: _FEvaluator | None = None,
    allow_uncertified: bool = False,
) -> FStarResult:
    """f*(t, q; m) = sup_x { x . m + f(t, q; x) } by gradient ascent.

    The objective is concave and C^1 with ascent direction m + grad_x f;
    Barzilai-Borwein steps with Armijo backtracking.  Outside the dilated
    hull of attainable magnetizations the dual is +inf (flagged, not
    raised).
    """
    m = np.asarray(m, dtype=float)
    if hull_distance(model, m) > HULL_DILATION:
        return FStarResult(value=math.inf, argmax_x=None, finite=False,
                           grad_norm=math.nan, iterations=0)
    ev = evaluator if evaluator is not None else _FEvaluator(
        model, t, q, order=order, allow_uncertified=allow_uncertified
    )
    x = np.zeros(model.mattis_dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    f, gx = ev(x)
    obj = float(m @ x + f)
    grad = m + gx
    # Per-coordinate secant steps: near the hull boundary single coordinates
    # saturate exponentially and need steps many orders of magnitude larger
    # than the smooth ones; a scalar step stalls there.
    steps = np.ones(m.size)
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= grad_tol:
            return FStarResult(value=obj, argmax_x=x, finite=True,
                               grad_norm=gnorm, iterations=it - 1)
        direction = steps * grad
        slope = float(grad @ direction)
        # First trial never moves any coordinate by more than 10: the
        # secant steps from a saturated phase can be absurd after a warm
        # restart.  The slack term keeps Armijo decidable at the float
        # noise floor of the objective.
        trial = min(1.0, 10.0 / max(float(np.abs(direction).max()), 1e-30))
        noise = 1e-14 * (1.0 + abs(obj))
        accepted = False
        for _ in range(60):
            xn = x + trial * direction
            fn, gxn = ev(xn)
            objn = float(m @ xn + fn)
            if objn >= obj + 1e-4 * trial * slope - noise:
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            raise NumericalQualityError(
                "line search failed in the concave dual ascent",
                diagnostics={"m": m.tolist(), "x": x.tolist(), "grad_norm": gnorm},
            )
        gradn = m + gxn
        s = xn - x
        dg = gradn - grad
        with np.errstate(divide="ignore", invalid="ignore"):
            secant = np.where(s * dg < 0, -s / np.where(dg != 0, dg, 1.0), 2.0 * steps)
        steps = np.clip(np.abs(secant), 1e-8, 1e12)
        x, obj, grad = xn, objn, gradn
    raise NonConvergenceError(
        f"dual ascent did not reach gradient norm {grad_tol:.1e} in {max_iter} iterations",
        trace=[float(np.linalg.norm(grad))],
    )


# ---------------------------------------------------------------------------
# inf-sup limit free energy and rate functions
# ---------------------------------------------------------------------------


def _minimize_over_hull(
    model: ModelSpec,
    objective,
    coarse: int = 9,
) -> tuple[float, np.ndarray]:
    """Coarse hull-box scan followed by Nelder-Mead refinement."""
    lo, hi = hull_bounding_box(model)
    axes = [np.linspace(lo[d], hi[d], coarse) for d in range(len(lo))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    best_val, best_m = math.inf, None
    for m in mesh:
        v = objective(m)
        if v < best_val:
            best_val, best_m = v, m
    if best_m is None or not np.isfinite(best_val):
        raise ValidationError("no finite objective value on the magnetization hull")
    spacing = (hi - lo) / (coarse - 1)
    res = sciopt.minimize(
        objective,
        best_m,
        method="Nelder-Mead",
        bounds=sciopt.Bounds(lo, hi),
        options={
            "xatol": SIMPLEX_TOL,
            "fatol": 1e-12,
            "maxiter": 4000,
            "initial_simplex": _initial_simplex(best_m, 0.5 * spacing, lo, hi),
        },
    )
    m_opt = res.x
    v_opt = float(objective(m_opt))
    if v_opt > best_val:
        m_opt, v_opt = best_m, best_val
    return v_opt, np.asarray(m_opt, dtype=float)


def _initial_simplex(center, spread, lo, hi):
    d = center.size
    simplex = np.tile(center, (d + 1, 1))
    for i in range(d):
        simplex[i + 1, i] = np.clip(center[i] + max(spread[i], 1e-3), lo[i], hi[i])
    return simplex


class _DualCache:
    """f*(m) evaluations sharing one evaluator and warm-started argmaxes."""

    def __init__(self, model, t, q, order, allow_uncertified):
        self.model = model
        self.t = t
        self.q = q
        self.order = order
        self.ev = _FEvaluator(model, t, q, order=order, allow_uncertified=allow_uncertified)
        self.last_x = None

    def __call__(self, m) -> FStarResult:
        res = f_star(
            self.model, self.t, self.q, m, order=self.order,
            x0=self.last_x, evaluator=self.ev,
        )
        if res.finite:
            self.last_x = res.argmax_x
        return res


def limit_free_energy(
    model: ModelSpec,
    t: float,
    q: PiecewisePath,
    G: GDescriptor,
    order: int = DEFAULT_ORDER,
    coarse: int = 9,
    allow_uncertified: bool = False,
) -> tuple[float, np.ndarray]:
    """lim_N mean free energy = inf_m { f*(t, q; m) - G(m) }.

    Returns the value and the minimizing magnetization.
    """
    if G.dim != model.mattis_dim:
        raise ValidationError("G descriptor dimension must match the magnetization dimension")
    dual = _DualCache(model, t, q, order, allow_uncertified)

    def objective(m):
        res = dual(m)
        return res.value - float(G.value(np.asarray(m, dtype=float))) if res.finite else 1e30

    return _minimize_over_hull(model, objective, coarse=coarse)


@dataclass(frozen=True)
class RateTable:
    """Rate-function values on a magnetization grid.

    The minimizer row is appended to the grid, so min(rate) is zero by
    construction up to optimizer tolerance; rate >= 0 everywhere is a real
    check of the normalizing constant.
    """

    ms: np.ndarray  # (n, d)
    f_star_values: np.ndarray  # (n,)
    argmax_x: np.ndarray  # (n, d), nan where infinite
    rates: np.ndarray  # (n,)
    minimizer: np.ndarray  # (d,)
    limit_value: float
    normalization: float  # sup_m' { G(m') - f*(m') }

    def to_dict(self) -> dict:
        return {
            "minimizer": self.minimizer.tolist(),
            "limit_value": self.limit_value,
            "normalization": self.normalization,
            "rows": [
                {
                    "m": self.ms[i].tolist(),
                    "f_star": _json_float(self.f_star_values[i]),
                    "argmax_x": None if np.any(np.isnan(self.argmax_x[i])) else self.argmax_x[i].tolist(),
                    "rate": _json_float(self.rates[i]),
                }
                for i in range(self.ms.shape[0])
            ],
        }


def _json_float(v: float):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def rate_function(
    model: ModelSpec,
    t: float,
    q: PiecewisePath,
    G: GDescriptor,
    m_grid,
    order: int = DEFAULT_ORDER,
    allow_uncertified: bool = False,
) -> RateTable:
    """I_G on the supplied magnetization grid plus the minimizer row."""
    if G.dim != model.mattis_dim:
        raise ValidationError("G descriptor dimension must match the magnetization dimension")
    m_grid = np.atleast_2d(np.asarray(m_grid, dtype=float))
    dual = _DualCache(model, t, q, order, allow_uncertified)

    def objective(m):
        res = dual(m)
        return res.value - float(G.value(np.asarray(m, dtype=float))) if res.finite else 1e30

    limit_value, m_star = _minimize_over_hull(model, objective)
    res_star = dual(m_star)
    norm_const = float(G.value(m_star)) - res_star.value  # sup_m { G - f* }

    ms = np.vstack([m_grid, m_star[None]])
    n = ms.shape[0]
    fs = np.empty(n)
    ax = np.full((n, model.mattis_dim), np.nan)
    rates = np.empty(n)
    for i in range(n):
        res = dual(ms[i])
        if res.finite:
            fs[i] = res.value
            ax[i] = res.argmax_x
            rates[i] = -float(G.value(ms[i])) + res.value + norm_const
        else:
            fs[i] = math.inf
            rates[i] = math.inf
    return RateTable(
        ms=ms,
        f_star_values=fs,
        argmax_x=ax,
        rates=rates,
        minimizer=m_star,
        limit_value=limit_value,
        normalization=norm_const,
    )


def cgf_lambda(
    model: ModelSpec,
    t: float,
    q: PiecewisePath,
    y,
    base_x=None,
    order: int = DEFAULT_ORDER,
    allow_uncertified: bool = False,
) -> float:
    """Limit cumulant generating function of the mean magnetization.

    Under the Gibbs measure with linear tilt base_x (zero for the plain
    measure): Lambda(y) = -f(t, q; base_x + y) + f(t, q; base_x).
    """
    y = np.asarray(y, dtype=float)
    x0 = np.zeros(model.mattis_dim) if base_x is None else np.asarray(base_x, dtype=float)
    ev = _FEvaluator(model, t, q, order=order, allow_uncertified=allow_uncertified)
    f_tilt, _ = ev(x0 + y)
    f_base, _ = ev(x0)
    return -f_tilt + f_base


# ---------------------------------------------------------------------------
# standard-model wrapper
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StandardizedModel:
    """A concrete model (coupling beta, Mattis term G) expressed through the
    enriched free energy at t = beta^2 / 2 and the zero path.

    When every spin atom shares the same self-overlap diagonal and xi only
    reads the diagonal, the xi-correction is the constant
    (beta^2/2) xi(rbar) and the reported free energy subtracts it back.
    Otherwise the magnetization is extended with the self-overlap entries
    and G grows the matching polynomial term.
    """

    base: ModelSpec
    beta: float
    G: GDescriptor
    t: float
    q: PiecewisePath
    constant_self_overlap: bool
    shift_constant: float
    enriched: ModelSpec
    enriched_G: GDescriptor

    def limit_free_energy(
        self, order: int = DEFAULT_ORDER, coarse: int = 9
    ) -> tuple[float, np.ndarray]:
        """Limit of the standard free energy (corrections removed)."""
        value, m_star = limit_free_energy(
            self.enriched, self.t, self.q, self.enriched_G, order=order, coarse=coarse
        )
        if not self.constant_self_overlap:
            m_star = m_star[_base_coordinate_positions(self.base)]
        return value - self.shift_constant, m_star


def _self_overlap_diag_constant(model: ModelSpec) -> tuple[bool, np.ndarray | None]:
    if model.mode == "vector":
        diags = model.spin_measure.atoms**2
        first = diags[0]
        if np.abs(diags - first).max() <= 1e-12:
            return True, first
        return False, None
    rbar = np.empty(model.spin_dim)
    for s_idx, s in enumerate(model.species):
        sq = s.spin_measure.atoms[:, 0] ** 2
        if np.abs(sq - sq[0]).max() > 1e-12:
            return False, None
        rbar[s_idx] = s.weight * sq[0]
    return True, rbar


def _sym_pack_order(dim: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(dim) for b in range(a, dim)]


def _base_coordinate_positions(base: ModelSpec) -> list[int]:
    """Position of each base magnetization coordinate in the extended one."""
    if base.mode == "vector":
        return list(range(base.mattis_dim))
    pos, start = [], 0
    for s in base.species:
        pos.extend(range(start, start + s.mattis_dim))
        start += s.mattis_dim + 1
    return pos


def _overlap_positions(base: ModelSpec, enriched_dim: int) -> dict[tuple[int, int], int]:
    """Position of each packed self-overlap coordinate in the extended
    magnetization vector."""
    if base.mode == "vector":
        pack = _sym_pack_order(base.spin_dim)
        return {c: base.mattis_dim + i for i, c in enumerate(pack)}
    # multitype: each species block grows by one trailing tau^2 coordinate.
    pos, start = {}, 0
    for s_idx, s in enumerate(base.species):
        pos[(s_idx, s_idx)] = start + s.mattis_dim
        start += s.mattis_dim + 1
    return pos


def _xi_as_poly_terms(base: ModelSpec, scale: float, enriched_dim: int) -> tuple[PolyTerm, ...]:
    """xi as polynomial terms over the packed self-overlap coordinates of
    the extended magnetization."""
    pos = _overlap_positions(base, enriched_dim)
    terms = []
    for term in base.xi.terms:
        powers = [0] * enriched_dim
        for i, j, e in term.nonzero():
            key = (min(i, j), max(i, j))
            powers[pos[key]] += e
        terms.append(PolyTerm(coef=scale * term.coef, powers=tuple(powers)))
    return tuple(terms)


def standardize_model(base: ModelSpec, beta: float, G: GDescriptor) -> StandardizedModel:
    """Wrap a model at coupling beta with Mattis term G.

    The standard Hamiltonian beta H_N + N G(m_N) corresponds to the
    enriched one at t = beta^2/2, q = 0 with the xi-correction absorbed
    into the Mattis term.
    """
    if beta < 0:
        raise ValidationError("beta must be nonnegative")
    if G.dim != base.mattis_dim:
        raise ValidationError("G descriptor dimension must match the magnetization dimension")
    t = 0.5 * beta * beta
    q = PiecewisePath.zero(base.spin_dim)
    const, rbar = _self_overlap_diag_constant(base)
    diagonal_ok = base.xi.is_diagonal_only()
    if const and diagonal_ok:
        rbar_mat = np.diag(rbar)
        shift = t * float(base.xi.value(rbar_mat))
        return StandardizedModel(
            base=base, beta=float(beta), G=G, t=t, q=q,
            constant_self_overlap=True, shift_constant=shift,
            enriched=base, enriched_G=G,
        )
    if G.norms:
        raise ValidationError(
            "norm terms cannot be extended to the enlarged magnetization; "
            "use polynomial G for non-constant self-overlap models"
        )
    enriched = _extend_with_self_overlap(base)
    base_pos = _base_coordinate_positions(base)
    linear = [0.0] * enriched.mattis_dim
    for i, c in enumerate(G.linear):
        linear[base_pos[i]] = float(c)
    poly = []
    for p in G.poly:
        powers = [0] * enriched.mattis_dim
        for i, e in enumerate(p.powers):
            powers[base_pos[i]] = int(e)
        poly.append(PolyTerm(coef=p.coef, powers=tuple(powers)))
    g_ext = GDescriptor(
        dim=enriched.mattis_dim,
        const=G.const,
        linear=tuple(linear) if G.linear else (),
        poly=tuple(poly) + _xi_as_poly_terms(base, t, enriched.mattis_dim),
        norms=(),
    )
    return StandardizedModel(
        base=base, beta=float(beta), G=G, t=t, q=q,
        constant_self_overlap=False, shift_constant=0.0,
        enriched=enriched, enriched_G=g_ext,
    )


def _extend_with_self_overlap(model: ModelSpec) -> ModelSpec:
    """h~(tau, chi) = (h(tau, chi), packed tau tau^T)."""
    if model.mode == "vector":
        pack = _sym_pack_order(model.spin_dim)
        J, K, d = model.mattis_table.shape
        extra = np.empty((J, len(pack)))
        for j, tau in enumerate(model.spin_measure.atoms):
            extra[j] = [tau[a] * tau[b] for a, b in pack]
        table = np.concatenate(
            [model.mattis_table, np.repeat(extra[:, None, :], K, axis=1)], axis=2
        )
        return ModelSpec(
            spin_dim=model.spin_dim,
            mattis_dim=d + len(pack),
            pattern_dim=model.pattern_dim,
            xi=model.xi,
            spin_measure=model.spin_measure,
            pattern_measure=model.pattern_measure,
            mattis_table=table,
            name=model.name + "+selfoverlap",
        )
    new_species = []
    for s in model.species:
        sq = s.spin_measure.atoms[:, 0:1] ** 2  # (J, 1)
        Ks = s.mattis_table.shape[1]
        table = np.concatenate(
            [s.mattis_table, np.repeat(sq[:, None, :], Ks, axis=1)], axis=2
        )
        new_species.append(SpeciesSpec(
            weight=s.weight,
            spin_measure=s.spin_measure,
            pattern_measure=s.pattern_measure,
            mattis_table=table,
        ))
    return ModelSpec(
        spin_dim=model.spin_dim,
        mattis_dim=model.mattis_dim + len(new_species),
        pattern_dim=model.pattern_dim,
        xi=model.xi,
        mode="multitype",
        species=tuple(new_species),
        name=model.name + "+selfoverlap",
    )
