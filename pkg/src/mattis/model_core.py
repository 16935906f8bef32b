"""Model specification, interaction-polynomial calculus, and path algebra.

A model instance bundles the single-spin measure, the quenched-pattern
measure, the magnetization map h, and the interaction polynomial xi whose
value on normalized overlap matrices fixes the covariance of the Gaussian
energy.  Everything downstream (replica-symmetric functionals, cascade
functionals, oracles) consumes this one object.

All measures are finite and discrete, so every expectation in the package
is a finite sum and the brute-force oracles can be exact.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CapabilityError, ModelWarning, ValidationError

# Eigenvalue tolerance below which a symmetric matrix still counts as PSD.
PSD_EIG_TOL = 1e-10

# Lipschitz constant of the path-gradient map of the cascade functional;
# enters the certified contraction threshold as 1/(16 * Lip(grad xi)).
GRADIENT_LIPSCHITZ_CONSTANT = 16.0


# ---------------------------------------------------------------------------
# symmetric matrices
# ---------------------------------------------------------------------------


def sym_part(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(sym_part(a)).min())


def is_psd(a: np.ndarray, tol: float = PSD_EIG_TOL) -> bool:
    return min_eigenvalue(a) >= -tol


def psd_sqrt(a: np.ndarray, floor_tol: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-floor_tol, 0) are clamped to zero; anything lower is a
    genuine violation and is rejected.  Batched over leading dimensions.
    """
    a = sym_part(a)
    vals, vecs = np.linalg.eigh(a)
    if vals.min() < -floor_tol:
        raise ValidationError(
            f"matrix is not PSD within tolerance: min eigenvalue {vals.min():.3e}"
        )
    vals = np.clip(vals, 0.0, None)
    root = np.sqrt(vals)
    return np.einsum("...ij,...j,...kj->...ik", vecs, root, vecs)


def psd_project(a: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) PSD matrix: clip negative eigenvalues at zero."""
    vals, vecs = np.linalg.eigh(sym_part(a))
    vals = np.clip(vals, 0.0, None)
    return np.einsum("...ij,...j,...kj->...ik", vecs, vals, vecs)


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric D x D matrix with exact-by-storage symmetry.

    Only the upper triangle is stored; the full matrix is reconstructed on
    demand, so the symmetric invariant cannot drift.
    """

    dim: int
    upper: tuple[float, ...]

    SYM_TOL = 1e-9

    @classmethod
    def from_array(cls, a, tol: float | None = None) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {a.shape}")
        tol = cls.SYM_TOL if tol is None else tol
        asym = np.abs(a - a.T).max() if a.size else 0.0
        if asym > tol:
            raise ValidationError(f"matrix is not symmetric: |a - a^T|_max = {asym:.3e}")
        s = sym_part(a)
        iu = np.triu_indices(a.shape[0])
        return cls(dim=a.shape[0], upper=tuple(float(v) for v in s[iu]))

    @classmethod
    def zeros(cls, dim: int) -> "SymMatrix":
        n = dim * (dim + 1) // 2
        return cls(dim=dim, upper=(0.0,) * n)

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls.from_array(np.eye(dim))

    @cached_property
    def array(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim))
        iu = np.triu_indices(self.dim)
        m[iu] = self.upper
        m = m + m.T - np.diag(np.diag(m))
        m.setflags(write=False)
        return m

    def __array__(self, dtype=None):
        return np.asarray(self.array, dtype=dtype)

    def is_psd(self, tol: float = PSD_EIG_TOL) -> bool:
        return is_psd(self.array, tol)

    def min_eigenvalue(self) -> float:
        return min_eigenvalue(self.array)


def as_matrix(a) -> np.ndarray:
    """Coerce a SymMatrix or array-like to a writable float ndarray."""
    if isinstance(a, SymMatrix):
        return np.array(a.array, dtype=float)
    return np.array(a, dtype=float)


def sym_basis(dim: int) -> list[np.ndarray]:
    """Orthogonal-ish basis E_ab of S^dim: E_aa = e_a e_a^T and, for a<b,
    E_ab with ones at (a,b) and (b,a)."""
    out = []
    for a in range(dim):
        for b in range(a, dim):
            e = np.zeros((dim, dim))
            e[a, b] = 1.0
            e[b, a] = 1.0
            out.append(e)
    return out


def psd_frame(dim: int) -> list[np.ndarray]:
    """PSD spanning frame of S^dim: e_a e_a^T and (e_a+e_b)(e_a+e_b)^T, a<b.

    Every element is PSD, which keeps one-sided finite differences feasible
    at the boundary of the PSD cone.
    """
    out = []
    for a in range(dim):
        v = np.zeros(dim)
        v[a] = 1.0
        out.append(np.outer(v, v))
    for a in range(dim):
        for b in range(a + 1, dim):
            v = np.zeros(dim)
            v[a] = 1.0
            v[b] = 1.0
            out.append(np.outer(v, v))
    return out


# ---------------------------------------------------------------------------
# interaction polynomial
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class XiTerm:
    """One monomial c * prod a_ij^e_ij of the interaction polynomial."""

    coef: float
    powers: tuple[tuple[int, ...], ...]

    def nonzero(self) -> list[tuple[int, int, int]]:
        out = []
        for i, row in enumerate(self.powers):
            for j, e in enumerate(row):
                if e:
                    out.append((i, j, e))
        return out

    @property
    def degree(self) -> int:
        return sum(e for row in self.powers for e in row)


@dataclass(frozen=True)
class XiPoly:
    """Interaction function xi as an explicit finite monomial list.

    Storing monomials (rather than a callback) gives exact gradients, an
    analytic Lipschitz bound for the contraction threshold, and lets the
    oracle check realizability term by term.
    """

    dim: int
    terms: tuple[XiTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if not math.isfinite(t.coef):
                raise ValidationError("xi coefficients must be finite")
            if len(t.powers) != self.dim or any(len(r) != self.dim for r in t.powers):
                raise ValidationError("xi term powers must be a dim x dim table")
            if any(e < 0 for row in t.powers for e in row):
                raise ValidationError("xi exponents must be nonnegative")

    @classmethod
    def from_entries(cls, dim: int, terms: list[tuple[float, dict[tuple[int, int], int]]]) -> "XiPoly":
        built = []
        for coef, powmap in terms:
            powers = [[0] * dim for _ in range(dim)]
            for (i, j), e in powmap.items():
                powers[i][j] = int(e)
            built.append(XiTerm(coef=float(coef), powers=tuple(tuple(r) for r in powers)))
        return cls(dim=dim, terms=tuple(built))

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    def is_diagonal_only(self) -> bool:
        return all(i == j for t in self.terms for i, j, _ in t.nonzero())

    def value(self, a) -> np.ndarray | float:
        """xi(a); batched over leading dimensions of a (..., D, D)."""
        a = np.asarray(a, dtype=float)
        scalar = a.ndim == 2
        out = np.zeros(a.shape[:-2])
        for t in self.terms:
            term = np.full(a.shape[:-2], t.coef)
            for i, j, e in t.nonzero():
                term = term * a[..., i, j] ** e
            out = out + term
        return float(out) if scalar else out

    def grad(self, a) -> np.ndarray:
        """Entrywise gradient d xi / d a_ij; batched like value()."""
        a = np.asarray(a, dtype=float)
        g = np.zeros(a.shape if a.ndim >= 2 else (self.dim, self.dim))
        for t in self.terms:
            nz = t.nonzero()
            for idx, (i, j, e) in enumerate(nz):
                part = np.full(a.shape[:-2], t.coef * e)
                part = part * a[..., i, j] ** (e - 1)
                for k, (i2, j2, e2) in enumerate(nz):
                    if k != idx:
                        part = part * a[..., i2, j2] ** e2
                g[..., i, j] += part
        return g

    def theta(self, a) -> np.ndarray | float:
        """theta(a) = a . grad xi(a) - xi(a)."""
        a = np.asarray(a, dtype=float)
        scalar = a.ndim == 2
        val = self.value(a)
        g = self.grad(a)
        th = np.einsum("...ij,...ij->...", a, g) - val
        return float(th) if scalar else th

    def grad_sym(self, a) -> np.ndarray:
        """Gradient as an element of S^D (directional derivative within S^D)."""
        return sym_part(self.grad(a))

    def hessian_at(self, a: np.ndarray, coords: list[tuple[int, int]]) -> np.ndarray:
        """Dense Hessian of xi restricted to the given entry coordinates."""
        a = np.asarray(a, dtype=float)
        n = len(coords)
        pos = {c: k for k, c in enumerate(coords)}
        h = np.zeros((n, n))
        for t in self.terms:
            nz = t.nonzero()
            for ia, (i1, j1, e1) in enumerate(nz):
                for ib, (i2, j2, e2) in enumerate(nz):
                    c1, c2 = (i1, j1), (i2, j2)
                    if c1 not in pos or c2 not in pos:
                        continue
                    if ia == ib:
                        if e1 < 2:
                            continue
                        part = t.coef * e1 * (e1 - 1) * a[i1, j1] ** (e1 - 2)
                        for k, (i3, j3, e3) in enumerate(nz):
                            if k != ia:
                                part *= a[i3, j3] ** e3
                        h[pos[c1], pos[c1]] += part
                    else:
                        part = t.coef * e1 * e2
                        part *= a[i1, j1] ** (e1 - 1) * a[i2, j2] ** (e2 - 1)
                        for k, (i3, j3, e3) in enumerate(nz):
                            if k not in (ia, ib):
                                part *= a[i3, j3] ** e3
                        h[pos[c1], pos[c2]] += part
        return h

    def grad_entry_bound_on_box(self, radius: float = 1.0) -> np.ndarray:
        """Entrywise upper bound on |d xi / d a_ij| over |a_kl| <= radius."""
        b = np.zeros((self.dim, self.dim))
        for t in self.terms:
            nz = t.nonzero()
            for idx, (i, j, e) in enumerate(nz):
                part = abs(t.coef) * e * radius ** (e - 1)
                for k, (_, _, e2) in enumerate(nz):
                    if k != idx:
                        part *= radius**e2
                b[i, j] += part
        return b


def xi_eval_suite(xi: XiPoly, a) -> tuple[float, np.ndarray, float]:
    """Evaluate (xi(a), grad xi(a), theta(a)) in one pass."""
    a = as_matrix(a)
    val = xi.value(a)
    g = xi.grad(a)
    th = float(np.sum(a * g) - val)
    return float(val), g, th


def _xi_coords(xi: XiPoly, diagonal_only: bool) -> list[tuple[int, int]]:
    if diagonal_only:
        return [(i, i) for i in range(xi.dim)]
    return [(i, j) for i in range(xi.dim) for j in range(xi.dim)]


def grad_xi_lipschitz_bound(xi: XiPoly, diagonal_only: bool = False) -> float:
    """Certified upper bound on Lip(grad xi) over the unit ball of overlaps.

    For polynomials of degree <= 2 the Hessian is constant and the bound is
    its exact spectral norm.  For higher degrees each monomial's Hessian is
    bounded entrywise on the |a_ij| <= 1 box (which contains the Frobenius
    unit ball) and the spectral norm of the bound matrix is used.
    """
    coords = _xi_coords(xi, diagonal_only)
    if xi.degree <= 1 or not xi.terms:
        return 0.0
    if xi.degree <= 2:
        h = xi.hessian_at(np.zeros((xi.dim, xi.dim)), coords)
        return float(np.linalg.norm(h, 2))
    n = len(coords)
    pos = {c: k for k, c in enumerate(coords)}
    bound = np.zeros((n, n))
    for t in xi.terms:
        nz = t.nonzero()
        for ia, (i1, j1, e1) in enumerate(nz):
            for ib, (i2, j2, e2) in enumerate(nz):
                c1, c2 = (i1, j1), (i2, j2)
                if c1 not in pos or c2 not in pos:
                    continue
                if ia == ib:
                    if e1 >= 2:
                        bound[pos[c1], pos[c1]] += abs(t.coef) * e1 * (e1 - 1)
                else:
                    bound[pos[c1], pos[c2]] += abs(t.coef) * e1 * e2
    return float(np.linalg.norm(bound, 2))


def sampled_grad_xi_lipschitz(
    xi: XiPoly, diagonal_only: bool = False, n_samples: int = 512, seed: int = 0
) -> float:
    """Empirical max of the Hessian spectral norm over the unit ball.

    A diagnostic lower envelope of the true Lipschitz constant; never used
    as a correctness gate.
    """
    coords = _xi_coords(xi, diagonal_only)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_samples):
        a = rng.standard_normal((xi.dim, xi.dim))
        nrm = np.linalg.norm(a)
        if nrm > 0:
            a *= rng.uniform() ** (1.0 / max(len(coords), 1)) / nrm
        h = xi.hessian_at(a, coords)
        best = max(best, float(np.linalg.norm(h, 2)))
    return best


# ---------------------------------------------------------------------------
# piecewise-constant paths
# ---------------------------------------------------------------------------


class PiecewisePath:
    """Monotone piecewise-constant cadlag path [0,1) -> PSD matrices.

    Value is ``values[l]`` on [s_l, s_{l+1}) with s_0 = 0 and s_{k+1} = 1;
    the right limit at 1 is the last level.  Monotonicity means PSD
    increments between consecutive levels.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints, values, validate: bool = True):
        bp = np.atleast_1d(np.asarray(breakpoints, dtype=float))
        if bp.size == 0:
            bp = bp.reshape(0)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 2:
            vals = vals[None]
        if vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
            raise ValidationError(f"path values must be (k+1, D, D), got {vals.shape}")
        if vals.shape[0] != bp.size + 1:
            raise ValidationError(
                f"path needs {bp.size + 1} levels for {bp.size} breakpoints, got {vals.shape[0]}"
            )
        vals = sym_part(vals)
        if validate:
            if bp.size and (bp[0] <= 0.0 or bp[-1] >= 1.0 or np.any(np.diff(bp) <= 0)):
                raise ValidationError("breakpoints must be strictly increasing in (0,1)")
            if min_eigenvalue(vals[0]) < -PSD_EIG_TOL:
                raise ValidationError("initial path level must be PSD")
            for l in range(1, vals.shape[0]):
                gap = min_eigenvalue(vals[l] - vals[l - 1])
                if gap < -PSD_EIG_TOL:
                    raise ValidationError(
                        f"path is not monotone: increment {l} has min eigenvalue {gap:.3e}"
                    )
        bp.setflags(write=False)
        vals.setflags(write=False)
        self.breakpoints = bp
        self.values = vals

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, y, dim: int | None = None) -> "PiecewisePath":
        y = as_matrix(y)
        if y.ndim == 0:
            if dim is None:
                raise ValidationError("dim required for scalar constant path")
            y = float(y) * np.eye(dim)
        return cls(np.empty(0), y[None])

    @classmethod
    def zero(cls, dim: int) -> "PiecewisePath":
        return cls.constant(np.zeros((dim, dim)))

    # -- basic queries -----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def n_jumps(self) -> int:
        return len(self.breakpoints)

    @property
    def n_levels(self) -> int:
        return self.values.shape[0]

    def is_constant(self, tol: float = 0.0) -> bool:
        if self.n_levels == 1:
            return True
        gaps = np.abs(self.values[1:] - self.values[:-1]).max(axis=(-1, -2))
        return bool(np.all(gaps <= tol))

    @property
    def right_limit(self) -> np.ndarray:
        return self.values[-1]

    def interval_lengths(self) -> np.ndarray:
        edges = np.concatenate(([0.0], self.breakpoints, [1.0]))
        return np.diff(edges)

    def value_at(self, s: float) -> np.ndarray:
        if not 0.0 <= s < 1.0:
            raise ValidationError("path is defined on [0,1)")
        idx = int(np.searchsorted(self.breakpoints, s, side="right"))
        return self.values[idx]

    def increments(self) -> np.ndarray:
        """(k+1, D, D): first level, then consecutive differences."""
        out = np.empty_like(self.values)
        out[0] = self.values[0]
        if self.n_levels > 1:
            out[1:] = self.values[1:] - self.values[:-1]
        return out

    def sup_norm(self) -> float:
        return float(np.linalg.norm(self.values, axis=(-2, -1)).max())

    # -- algebra -----------------------------------------------------------

    def with_values(self, values, validate: bool = True) -> "PiecewisePath":
        return PiecewisePath(self.breakpoints, values, validate=validate)

    def same_grid(self, other: "PiecewisePath") -> bool:
        return self.breakpoints.shape == other.breakpoints.shape and np.array_equal(
            self.breakpoints, other.breakpoints
        )

    def expand_to(self, breakpoints) -> "PiecewisePath":
        """Refine onto a superset of breakpoints without changing values."""
        bp = np.atleast_1d(np.asarray(breakpoints, dtype=float))
        idx = np.searchsorted(self.breakpoints, bp, side="right")
        vals = np.concatenate([self.values[:1], self.values[idx]], axis=0)
        return PiecewisePath(bp, vals, validate=False)

    @staticmethod
    def merged_grid(a: "PiecewisePath", b: "PiecewisePath") -> np.ndarray:
        return np.unique(np.concatenate([a.breakpoints, b.breakpoints]))

    def distance_sup(self, other: "PiecewisePath") -> float:
        grid = self.merged_grid(self, other)
        va = self.expand_to(grid).values
        vb = other.expand_to(grid).values
        return float(np.abs(va - vb).max())

    def distance_l1(self, other: "PiecewisePath") -> float:
        grid = self.merged_grid(self, other)
        pa, pb = self.expand_to(grid), other.expand_to(grid)
        lens = pa.interval_lengths()
        diff = np.linalg.norm(pa.values - pb.values, axis=(-2, -1))
        return float(np.sum(lens * diff))

    def l1_norm(self) -> float:
        lens = self.interval_lengths()
        return float(np.sum(lens * np.linalg.norm(self.values, axis=(-2, -1))))

    def canonical(self, tol: float = 1e-12) -> tuple["PiecewisePath", np.ndarray]:
        """Drop breakpoints whose increment vanishes (within tol).

        Returns the reduced path and, for each original level, the index of
        the surviving level it maps to; the cascade recursion and its
        gradient are exactly invariant under this reduction.
        """
        keep = [0]
        mapping = np.zeros(self.n_levels, dtype=int)
        for l in range(1, self.n_levels):
            if np.abs(self.values[l] - self.values[keep[-1]]).max() > tol:
                keep.append(l)
            mapping[l] = len(keep) - 1
        if len(keep) == self.n_levels:
            return self, np.arange(self.n_levels)
        bp = self.breakpoints[[k - 1 for k in keep[1:]]]
        return PiecewisePath(bp, self.values[keep], validate=False), mapping

    def to_dict(self) -> dict:
        return {
            "breakpoints": [float(s) for s in self.breakpoints],
            "values": [[[float(v) for v in row] for row in m] for m in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePath":
        return cls(d["breakpoints"], np.asarray(d["values"], dtype=float))

    def __repr__(self):
        return f"PiecewisePath(jumps={self.n_jumps}, dim={self.dim})"


def path_integral_theta(p: PiecewisePath, xi: XiPoly) -> float:
    """int_0^1 theta(p(u)) du, exact for piecewise-constant paths."""
    lens = p.interval_lengths()
    th = xi.theta(p.values)
    return float(np.sum(lens * np.atleast_1d(th)))


def shifted_path(q: PiecewisePath, t: float, p: PiecewisePath, xi: XiPoly) -> PiecewisePath:
    """The path u -> q(u) + t * grad xi(p(u)) on the merged breakpoint grid."""
    grid = PiecewisePath.merged_grid(q, p)
    qe, pe = q.expand_to(grid), p.expand_to(grid)
    vals = qe.values + t * xi.grad_sym(pe.values)
    return PiecewisePath(grid, vals, validate=False)


# ---------------------------------------------------------------------------
# discrete measures and the model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite discrete measure: atoms (n, dim) with positive weights (n,)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.shape[0] != weights.shape[0]:
            raise ValidationError("measure atoms and weights must align")
        if np.any(weights <= 0):
            raise ValidationError("measure weights must be positive")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(weights)):
            raise ValidationError("measure atoms and weights must be finite")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def to_dict(self) -> dict:
        return {
            "atoms": [[float(v) for v in a] for a in self.atoms],
            "weights": [float(w) for w in self.weights],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        return cls(np.asarray(d["atoms"], dtype=float), np.asarray(d["weights"], dtype=float))


@dataclass(frozen=True)
class SpeciesSpec:
    """One scalar species of a multi-type model: weight, scalar spin measure,
    pattern measure, and its block of the magnetization map."""

    weight: float
    spin_measure: DiscreteMeasure
    pattern_measure: DiscreteMeasure
    mattis_table: np.ndarray  # (n_spin_atoms, n_pattern_atoms, d_s)

    def __post_init__(self):
        table = np.asarray(self.mattis_table, dtype=float)
        if table.ndim != 3:
            raise ValidationError("species mattis_table must be (spin, pattern, d_s)")
        table.setflags(write=False)
        object.__setattr__(self, "mattis_table", table)
        if self.weight < 0:
            raise ValidationError("species weights must be nonnegative")
        if self.spin_measure.dim != 1:
            raise ValidationError("species spins are scalar")
        if np.abs(self.spin_measure.atoms).max() > 1.0 + 1e-12:
            raise ValidationError("species spin atoms must lie in [-1, 1]")

    @property
    def mattis_dim(self) -> int:
        return self.mattis_table.shape[2]

    def to_dict(self) -> dict:
        return {
            "weight": float(self.weight),
            "spin_measure": self.spin_measure.to_dict(),
            "pattern_measure": self.pattern_measure.to_dict(),
            "mattis_table": np.asarray(self.mattis_table).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpeciesSpec":
        return cls(
            weight=float(d["weight"]),
            spin_measure=DiscreteMeasure.from_dict(d["spin_measure"]),
            pattern_measure=DiscreteMeasure.from_dict(d["pattern_measure"]),
            mattis_table=np.asarray(d["mattis_table"], dtype=float),
        )


@dataclass(frozen=True)
class ModelSpec:
    """Full description of a model instance.

    mode "vector": one D-dimensional spin per site, xi over D x D overlaps.
    mode "multitype": |S| scalar species with weights; paths and overlap
    matrices are diagonal and xi depends on the diagonal only.
    """

    spin_dim: int
    mattis_dim: int
    pattern_dim: int
    xi: XiPoly
    mode: str = "vector"
    spin_measure: DiscreteMeasure | None = None
    pattern_measure: DiscreteMeasure | None = None
    mattis_table: np.ndarray | None = None  # (n_spin, n_pattern, d)
    species: tuple[SpeciesSpec, ...] = ()
    name: str = "model"

    def __post_init__(self):
        if self.mode not in ("vector", "multitype"):
            raise ValidationError(f"unknown model mode {self.mode!r}")
        if self.xi.dim != self.spin_dim:
            raise ValidationError("xi dimension must match spin_dim")
        if self.mode == "vector":
            self._validate_vector()
        else:
            self._validate_multitype()

    def _validate_vector(self):
        if self.spin_measure is None or self.pattern_measure is None or self.mattis_table is None:
            raise ValidationError("vector models need spin_measure, pattern_measure, mattis_table")
        table = np.asarray(self.mattis_table, dtype=float)
        table.setflags(write=False)
        object.__setattr__(self, "mattis_table", table)
        if self.spin_measure.dim != self.spin_dim:
            raise ValidationError("spin atoms must have dimension spin_dim")
        if self.pattern_measure.dim != self.pattern_dim:
            raise ValidationError("pattern atoms must have dimension pattern_dim")
        # Coordinate-wise bound: overlap matrices then have entries in [-1,1],
        # which is the domain on which the gradient bounds are certified.
        if np.abs(self.spin_measure.atoms).max() > 1.0 + 1e-12:
            raise ValidationError("spin atom coordinates must lie in [-1, 1]")
        if abs(self.pattern_measure.total_mass() - 1.0) > 1e-12:
            raise ValidationError("pattern weights must sum to 1 within 1e-12")
        expected = (self.spin_measure.n_atoms, self.pattern_measure.n_atoms, self.mattis_dim)
        if table.shape != expected:
            raise ValidationError(f"mattis_table shape {table.shape} != {expected}")
        if not np.all(np.isfinite(table)):
            raise ValidationError("mattis_table must be finite")
        rank = np.linalg.matrix_rank(self.spin_measure.atoms)
        if rank < self.spin_dim:
            warnings.warn(
                "spin atoms do not span R^D; degenerate model kept for testing",
                ModelWarning,
                stacklevel=3,
            )

    def _validate_multitype(self):
        if not self.species:
            raise ValidationError("multitype models need at least one species")
        if len(self.species) != self.spin_dim:
            raise ValidationError("multitype spin_dim must equal the number of species")
        total = sum(s.weight for s in self.species)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError("species weights must sum to 1 within 1e-12")
        if sum(s.mattis_dim for s in self.species) != self.mattis_dim:
            raise ValidationError("mattis_dim must equal the sum of species block sizes")
        if not self.xi.is_diagonal_only():
            raise ValidationError("multitype xi may only use diagonal overlap entries")
        for s in self.species:
            if abs(s.pattern_measure.total_mass() - 1.0) > 1e-12:
                raise ValidationError("species pattern weights must sum to 1 within 1e-12")
            if np.abs(s.spin_measure.atoms).max() <= 1e-15:
                warnings.warn(
                    "species spin support reduces to {0}; degenerate model kept",
                    ModelWarning,
                    stacklevel=3,
                )

    # -- derived quantities --------------------------------------------------

    @property
    def h_inf(self) -> float:
        """max |h| over atom pairs (Euclidean norm of the generalized spin)."""
        if self.mode == "vector":
            return float(np.linalg.norm(self.mattis_table, axis=2).max())
        return max(float(np.linalg.norm(s.mattis_table, axis=2).max()) for s in self.species)

    @property
    def species_weights(self) -> np.ndarray:
        if self.mode != "multitype":
            raise ValidationError("species_weights only defined for multitype models")
        return np.array([s.weight for s in self.species])

    def species_slices(self) -> list[slice]:
        """Slices of the concatenated magnetization vector, one per species."""
        out, start = [], 0
        for s in self.species:
            out.append(slice(start, start + s.mattis_dim))
            start += s.mattis_dim
        return out

    def mattis_atom_values(self) -> np.ndarray:
        """All attainable generalized-spin values h(tau_j, chi_k), stacked.

        For multitype models each species contributes its block embedded in
        the full R^d with zeros elsewhere, scaled by nothing: the attainable
        per-site values; the magnetization hull is the weighted average of
        per-species hulls.
        """
        if self.mode == "vector":
            table = self.mattis_table
            return table.reshape(-1, self.mattis_dim)
        rows = []
        for s, sl in zip(self.species, self.species_slices()):
            block = s.mattis_table.reshape(-1, s.mattis_dim)
            emb = np.zeros((block.shape[0], self.mattis_dim))
            emb[:, sl] = block
            rows.append(emb)
        return np.concatenate(rows, axis=0)

    def magnetization_hull_points(self) -> np.ndarray:
        """Vertex candidates of the attainable-mean-magnetization hull."""
        if self.mode == "vector":
            return self.mattis_atom_values()
        # m = sum_s lambda_s * (average of species-s values): the hull is the
        # Minkowski sum of the scaled per-species hulls.
        pts = np.zeros((1, self.mattis_dim))
        for s, sl in zip(self.species, self.species_slices()):
            block = s.weight * s.mattis_table.reshape(-1, s.mattis_dim)
            new = []
            for p in pts:
                for b in block:
                    q = p.copy()
                    q[sl] += b
                    new.append(q)
            pts = np.unique(np.round(np.asarray(new), 14), axis=0)
        return pts

    def self_overlap_matrices(self) -> np.ndarray:
        """tau tau^T for every spin atom (vector mode)."""
        if self.mode != "vector":
            raise ValidationError("self_overlap_matrices requires a vector model")
        t = self.spin_measure.atoms
        return np.einsum("ji,jk->jik", t, t)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "mode": self.mode,
            "spin_dim": self.spin_dim,
            "mattis_dim": self.mattis_dim,
            "pattern_dim": self.pattern_dim,
            "xi": {
                "dim": self.xi.dim,
                "terms": [
                    {"coef": float(t.coef), "powers": [list(r) for r in t.powers]}
                    for t in self.xi.terms
                ],
            },
        }
        if self.mode == "vector":
            d["spin_measure"] = self.spin_measure.to_dict()
            d["pattern_measure"] = self.pattern_measure.to_dict()
            d["mattis_table"] = np.asarray(self.mattis_table).tolist()
        else:
            d["species"] = [s.to_dict() for s in self.species]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        xi = XiPoly(
            dim=int(d["xi"]["dim"]),
            terms=tuple(
                XiTerm(coef=float(t["coef"]), powers=tuple(tuple(int(e) for e in r) for r in t["powers"]))
                for t in d["xi"]["terms"]
            ),
        )
        mode = d.get("mode", "vector")
        if mode == "vector":
            return cls(
                spin_dim=int(d["spin_dim"]),
                mattis_dim=int(d["mattis_dim"]),
                pattern_dim=int(d["pattern_dim"]),
                xi=xi,
                mode=mode,
                spin_measure=DiscreteMeasure.from_dict(d["spin_measure"]),
                pattern_measure=DiscreteMeasure.from_dict(d["pattern_measure"]),
                mattis_table=np.asarray(d["mattis_table"], dtype=float),
                name=d.get("name", "model"),
            )
        return cls(
            spin_dim=int(d["spin_dim"]),
            mattis_dim=int(d["mattis_dim"]),
            pattern_dim=int(d["pattern_dim"]),
            xi=xi,
            mode=mode,
            species=tuple(SpeciesSpec.from_dict(s) for s in d.get("species", [])),
            name=d.get("name", "model"),
        )


def canonical_json(obj) -> str:
    """Canonical JSON text: sorted keys, minimal separators, repr floats.

    Python's json round-trips floats exactly (shortest-repr), so rational
    inputs survive to_dict -> dumps -> loads -> from_dict bit-exactly.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def model_to_json(model: ModelSpec) -> str:
    return canonical_json(model.to_dict())


def model_from_json(text: str) -> ModelSpec:
    return ModelSpec.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# contraction threshold
# ---------------------------------------------------------------------------


def t_star_lower_bound(model: ModelSpec) -> float:
    """Certified lower bound on the contraction threshold t*.

    Returns 1 / (16 * K) where K upper-bounds Lip(grad xi) on the unit ball
    of overlaps (multitype models use the per-species box).  If xi is at
    most linear, K = 0 and +inf is returned, meaning "no constraint".
    """
    k = grad_xi_lipschitz_bound(model.xi, diagonal_only=(model.mode == "multitype"))
    if k == 0.0:
        return math.inf
    return 1.0 / (GRADIENT_LIPSCHITZ_CONSTANT * k)


def beta_star_lower_bound(model: ModelSpec) -> float:
    """beta* >= sqrt(2 t*) for the standard coupling t = beta^2 / 2."""
    t = t_star_lower_bound(model)
    return math.inf if math.isinf(t) else math.sqrt(2.0 * t)


def empirical_t_star_estimate(model: ModelSpec, n_samples: int = 2048, seed: int = 0) -> float:
    """Opt-in diagnostic: 1/(16 K_sampled) with K_sampled from dense Hessian
    sampling.  Upper envelope of the certified bound; never a gate."""
    k = sampled_grad_xi_lipschitz(
        model.xi, diagonal_only=(model.mode == "multitype"), n_samples=n_samples, seed=seed
    )
    if k == 0.0:
        return math.inf
    return 1.0 / (GRADIENT_LIPSCHITZ_CONSTANT * k)


# ---------------------------------------------------------------------------
# reference model builders
# ---------------------------------------------------------------------------


def rbm_model() -> ModelSpec:
    """Bipartite +-1 model with planted Bernoulli patterns.

    D = 2 spins per site, xi(a) = a11 * a22, h(tau, chi) = (tau1 chi1,
    tau2 chi2), uniform measures on {-1, 1}^2 for spins and patterns.
    """
    corners = np.array([[s1, s2] for s1 in (-1.0, 1.0) for s2 in (-1.0, 1.0)])
    spin = DiscreteMeasure(corners, np.full(4, 0.25))
    pattern = DiscreteMeasure(corners, np.full(4, 0.25))
    table = np.empty((4, 4, 2))
    for j, tau in enumerate(corners):
        for k, chi in enumerate(corners):
            table[j, k] = (tau[0] * chi[0], tau[1] * chi[1])
    xi = XiPoly.from_entries(2, [(1.0, {(0, 0): 1, (1, 1): 1})])
    return ModelSpec(
        spin_dim=2,
        mattis_dim=2,
        pattern_dim=2,
        xi=xi,
        spin_measure=spin,
        pattern_measure=pattern,
        mattis_table=table,
        name="rbm",
    )


def scalar_pspin_model(p: int = 2, coef: float = 1.0) -> ModelSpec:
    """D = 1 +-1 model with xi(a) = coef * a^p and h(tau, chi) = tau * chi."""
    if p < 1 or coef < 0:
        raise CapabilityError("scalar p-spin builder needs p >= 1 and coef >= 0")
    spin = DiscreteMeasure(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))
    pattern = DiscreteMeasure(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))
    table = np.empty((2, 2, 1))
    for j, tau in enumerate((-1.0, 1.0)):
        for k, chi in enumerate((-1.0, 1.0)):
            table[j, k, 0] = tau * chi
    xi = XiPoly.from_entries(1, [(coef, {(0, 0): p})])
    return ModelSpec(
        spin_dim=1,
        mattis_dim=1,
        pattern_dim=1,
        xi=xi,
        spin_measure=spin,
        pattern_measure=pattern,
        mattis_table=table,
        name=f"pspin{p}",
    )
