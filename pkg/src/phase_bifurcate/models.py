"""Spatial discretization and the three steady-state models.

All models live on the interval [-1, 1], discretized with ``n_cells`` equal
cells (so ``n_cells + 1`` vertex unknowns) and homogeneous Neumann boundary
conditions imposed through ghost values.  A steady state is a vector ``phi``
of nodal values; each model exposes

- ``residual(state, params)``  -- the nonlinear map whose zeros are steady
  states,
- ``jacobian(state, params)``  -- its dense derivative,
- ``param_derivative(state, params)`` -- derivative with respect to the
  model's active continuation parameter,
- ``trivial_branches(params)`` -- the spatially constant solution families.

The models:

``AllenCahn``
    -lap(phi) + (phi^3 - phi)/eps^2, continued in the interface width eps.
``CahnHilliardSteady``
    The same operator shifted by a constant chemical potential mu0 (the
    spatially reduced steady Cahn-Hilliard problem); continued in eps or mu0.
``OhtaKawasaki``
    eps*lap(phi) - (36/eps)*W'(phi) - gamma*G(phi) with the double well
    W = 18*(phi^2 - phi)^2 pinned between 0 and 1 and the nonlocal zero-mean
    inverse Laplacian G; continued in the nonlocal strength gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np

from .linalg import lu_factor, lu_solve

__all__ = [
    "GridSpec",
    "ModelParams",
    "GhostClosure",
    "laplacian_matrix",
    "laplacian_apply",
    "AllenCahn",
    "CahnHilliardSteady",
    "OhtaKawasaki",
    "CubicRoots",
    "ch_trivial_roots",
    "TrivialBranch",
    "GreenOperator",
    "green_operator",
    "poisson_neumann_solve",
    "model_by_kind",
    "ac_residual",
    "ac_jacobian",
    "ch_residual",
    "acok_residual",
    "acok_jacobian",
    "param_derivative",
]

#: Valid ghost-value closures for the Neumann boundary.  "symmetric" reflects
#: across both end nodes (second-order); "onesided-right" copies the last
#: interior value on the right (first-order) and exists as a deliberate
#: consistency-degradation hook for the verification command.
GhostClosure = ("symmetric", "onesided-right")


@dataclass(frozen=True)
class GridSpec:
    """Uniform vertex-centered grid on [-1, 1] with ``n_cells`` cells."""

    n_cells: int

    def __post_init__(self):
        if not isinstance(self.n_cells, int):
            raise TypeError("n_cells must be an int")
        if self.n_cells < 4 or self.n_cells % 2 != 0:
            raise ValueError(f"n_cells must be an even integer >= 4, got {self.n_cells}")

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def h(self) -> float:
        return 2.0 / self.n_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        # (2i - N)/N instead of -1 + i*h: this form is *bitwise* antisymmetric
        # under i -> N - i, which the reflection/negation symmetry guarantees
        # of the models rely on.
        i = np.arange(self.n_nodes, dtype=float)
        x = (2.0 * i - self.n_cells) / self.n_cells
        x.setflags(write=False)
        return x

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Composite trapezoid quadrature weights (h/2, h, ..., h, h/2)."""
        w = np.full(self.n_nodes, self.h)
        w[0] = 0.5 * self.h
        w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w


def _check_closure(closure: str) -> str:
    if closure not in GhostClosure:
        raise ValueError(f"unknown ghost closure {closure!r}; expected one of {GhostClosure}")
    return closure


def laplacian_apply(state: np.ndarray, grid: GridSpec, closure: str = "symmetric") -> np.ndarray:
    """Second-difference Laplacian with Neumann ghost closure, applied to a vector."""
    _check_closure(closure)
    phi = np.asarray(state, dtype=float)
    if phi.shape != (grid.n_nodes,):
        raise ValueError(f"state must have shape ({grid.n_nodes},), got {phi.shape}")
    out = np.empty_like(phi)
    out[1:-1] = phi[2:] + phi[:-2] - 2.0 * phi[1:-1]
    out[0] = 2.0 * (phi[1] - phi[0])
    if closure == "symmetric":
        out[-1] = 2.0 * (phi[-2] - phi[-1])
    else:  # onesided-right: ghost phi_{N+1} = phi_N
        out[-1] = phi[-2] - phi[-1]
    return out / (grid.h * grid.h)


@lru_cache(maxsize=32)
def laplacian_matrix(grid: GridSpec, closure: str = "symmetric") -> np.ndarray:
    """Dense matrix of ``laplacian_apply`` (n_nodes x n_nodes, read-only, cached)."""
    _check_closure(closure)
    n = grid.n_nodes
    inv_h2 = 1.0 / (grid.h * grid.h)
    m = np.zeros((n, n))
    idx = np.arange(n)
    m[idx, idx] = -2.0 * inv_h2
    m[idx[:-1], idx[:-1] + 1] = inv_h2
    m[idx[1:], idx[1:] - 1] = inv_h2
    m[0, 1] = 2.0 * inv_h2
    if closure == "symmetric":
        m[-1, -2] = 2.0 * inv_h2
    else:
        m[-1, -2] = inv_h2
        m[-1, -1] = -inv_h2
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class ModelParams:
    """Parameter bundle shared by all models.

    epsilon: interface width (> 0).
    mu0: constant chemical-potential offset (Cahn-Hilliard only).
    gamma: nonlocal interaction strength (Ohta-Kawasaki only).
    """

    epsilon: float
    mu0: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "mu0", "gamma"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class TrivialBranch:
    """A spatially constant solution family, parameterized by the active parameter.

    ``value_of(params)`` returns the constant; ``state_of(params)`` the nodal
    vector.  ``bifurcating`` records whether linearization around the branch
    can lose definiteness inside the standard parameter windows (used for
    reporting; the detector itself scans every branch and trusts only
    determinant signs).
    """

    label: str
    bifurcating: bool
    value_of: Callable[[ModelParams], float]

    def state_of(self, params: ModelParams, grid: GridSpec) -> np.ndarray:
        return np.full(grid.n_nodes, self.value_of(params))


class CubicRoots:
    """Real roots of the constant-state cubic, sorted ascending.

    ``middle_index`` is the position of the middle root when three distinct
    real roots exist, else None (double/single root cases).
    """

    __slots__ = ("values", "middle_index")

    def __init__(self, values, middle_index):
        self.values = tuple(float(v) for v in values)
        self.middle_index: Optional[int] = middle_index

    def __repr__(self):
        return f"CubicRoots(values={self.values}, middle_index={self.middle_index})"


def _polish_root(c: float, x: float) -> float:
    # A couple of Newton steps on f(x) = x^3 - x - c; the trig closed form is
    # already accurate to ~1e-15, this just pins the residual to rounding.
    for _ in range(4):
        f = x * x * x - x - c
        df = 3.0 * x * x - 1.0
        if f == 0.0 or df == 0.0:
            break
        step = f / df
        x -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def ch_trivial_roots(params: ModelParams) -> CubicRoots:
    """Real solutions of ``phi^3 - phi = mu0 * epsilon^2``, ascending.

    Three distinct real roots exist iff ``4 - 27 c^2 > 0`` with
    ``c = mu0 * epsilon^2`` (i.e. |c| < 2/(3*sqrt(3)) ~ 0.3849); the middle
    one then carries all bifurcations and is flagged via ``middle_index``.
    At the discriminant boundary the double root is reported once and
    ``middle_index`` is None.
    """
    c = float(params.mu0) * float(params.epsilon) ** 2
    disc = 4.0 - 27.0 * c * c
    if c == 0.0:
        return CubicRoots((-1.0, 0.0, 1.0), 1)
    if disc > 1e-12:
        # Three real roots via the trigonometric form for the depressed cubic.
        theta = math.acos(0.5 * c * math.sqrt(27.0))
        r = 2.0 / math.sqrt(3.0)
        roots = sorted(_polish_root(c, r * math.cos(theta / 3.0 - 2.0 * math.pi * k / 3.0)) for k in range(3))
        return CubicRoots(roots, 1)
    if disc < -1e-12:
        # One real root (Cardano, numerically stable branch).
        s = math.copysign(1.0, c)
        ac = abs(c)
        u = (27.0 * ac + math.sqrt(729.0 * ac * ac - 108.0)) / 2.0
        t = u ** (1.0 / 3.0)
        root = s * (t + 3.0 / t) / 3.0
        return CubicRoots((_polish_root(c, root),), None)
    # Discriminant boundary: a double root and a simple root.
    s = math.copysign(1.0, c)
    double = -s / math.sqrt(3.0)
    simple = 2.0 * s / math.sqrt(3.0)
    return CubicRoots(tuple(sorted((_polish_root(c, double), _polish_root(c, simple)))), None)


def _cube(phi: np.ndarray) -> np.ndarray:
    # phi*phi*phi rather than phi**3: exact sign symmetry under negation.
    return phi * phi * phi


class _ModelBase:
    kind = "?"
    active_parameter = "?"

    def __init__(self, grid: GridSpec, closure: str = "symmetric"):
        self.grid = grid
        self.closure = _check_closure(closure)
        self._lap = laplacian_matrix(grid, closure)

    def with_param(self, params: ModelParams, value: float) -> ModelParams:
        """Copy of ``params`` with the active continuation parameter replaced."""
        kw = {"epsilon": params.epsilon, "mu0": params.mu0, "gamma": params.gamma}
        kw[self.active_parameter] = float(value)
        return ModelParams(**kw)

    def active_value(self, params: ModelParams) -> float:
        return getattr(params, self.active_parameter)

    def _require_state(self, state) -> np.ndarray:
        phi = np.asarray(state, dtype=float)
        if phi.shape != (self.grid.n_nodes,):
            raise ValueError(f"state must have shape ({self.grid.n_nodes},), got {phi.shape}")
        return phi


class AllenCahn(_ModelBase):
    """Steady Allen-Cahn operator, continued in the interface width epsilon."""

    kind = "ac"
    active_parameter = "epsilon"

    def residual(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        inv_e2 = 1.0 / (params.epsilon * params.epsilon)
        return -laplacian_apply(phi, self.grid, self.closure) + inv_e2 * (_cube(phi) - phi)

    def jacobian(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        inv_e2 = 1.0 / (params.epsilon * params.epsilon)
        j = -self._lap
        idx = np.arange(self.grid.n_nodes)
        j[idx, idx] += inv_e2 * (3.0 * phi * phi - 1.0)
        return j

    def param_derivative(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        return (-2.0 / params.epsilon**3) * (_cube(phi) - phi)

    def trivial_branches(self, params: ModelParams) -> list[TrivialBranch]:
        return [
            TrivialBranch("phi=-1", False, lambda p: -1.0),
            TrivialBranch("phi=0", True, lambda p: 0.0),
            TrivialBranch("phi=+1", False, lambda p: 1.0),
        ]

    def trivial_states(self, params: ModelParams) -> list[np.ndarray]:
        return [b.state_of(params, self.grid) for b in self.trivial_branches(params)]


class CahnHilliardSteady(_ModelBase):
    """Spatially reduced steady Cahn-Hilliard: Allen-Cahn shifted by mu0.

    The active continuation parameter is selectable ("epsilon" or "mu0");
    the Jacobian does not depend on mu0, so the linearization (and therefore
    bifurcation structure) matches Allen-Cahn around the corresponding
    constant state.
    """

    kind = "ch"

    def __init__(self, grid: GridSpec, closure: str = "symmetric", active_parameter: str = "epsilon"):
        super().__init__(grid, closure)
        if active_parameter not in ("epsilon", "mu0"):
            raise ValueError(f"active_parameter must be 'epsilon' or 'mu0', got {active_parameter!r}")
        self.active_parameter = active_parameter

    def residual(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        inv_e2 = 1.0 / (params.epsilon * params.epsilon)
        out = -laplacian_apply(phi, self.grid, self.closure) + inv_e2 * (_cube(phi) - phi)
        if params.mu0 != 0.0:
            out -= params.mu0
        return out

    def jacobian(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        inv_e2 = 1.0 / (params.epsilon * params.epsilon)
        j = -self._lap
        idx = np.arange(self.grid.n_nodes)
        j[idx, idx] += inv_e2 * (3.0 * phi * phi - 1.0)
        return j

    def param_derivative(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        if self.active_parameter == "epsilon":
            return (-2.0 / params.epsilon**3) * (_cube(phi) - phi)
        return np.full(self.grid.n_nodes, -1.0)

    def trivial_branches(self, params: ModelParams) -> list[TrivialBranch]:
        roots = ch_trivial_roots(params)
        if roots.middle_index is None:
            raise ValueError(
                "constant-state cubic does not have three distinct real roots at "
                f"mu0={params.mu0}, epsilon={params.epsilon} (|mu0*eps^2| >= 2/(3*sqrt(3))); "
                "trivial branches are only defined inside the three-root window"
            )

        def root_fn(position: int) -> Callable[[ModelParams], float]:
            def value(p: ModelParams) -> float:
                r = ch_trivial_roots(p)
                if r.middle_index is None:
                    raise ValueError(
                        f"left the three-real-root window at mu0={p.mu0}, epsilon={p.epsilon}"
                    )
                return r.values[position]

            return value

        if params.mu0 == 0.0:
            # Roots are exactly -1, 0, +1 for every epsilon; use the same
            # labels as the plain double-well model so diagrams coincide
            # byte-for-byte in the degenerate case.
            labels = ("phi=-1", "phi=0", "phi=+1")
        else:
            labels = ("lowest-root", "middle-root", "highest-root")
        return [TrivialBranch(labels[i], i == roots.middle_index, root_fn(i)) for i in range(3)]

    def trivial_states(self, params: ModelParams) -> list[np.ndarray]:
        return [b.state_of(params, self.grid) for b in self.trivial_branches(params)]


@dataclass(frozen=True)
class GreenOperator:
    """Dense zero-mean inverse Neumann Laplacian on the grid.

    ``matrix @ phi`` approximates the solution u of ``-u'' = phi - mean(phi)``
    with zero-flux boundaries and zero trapezoidal mean.  ``h_profile`` is the
    kernel's diagonal-shift profile x^2/2 - 5/6 evaluated at the nodes (handy
    for closed-form cross-checks), and ``quadrature_weights`` the trapezoid
    weights used to build the matrix.
    """

    matrix: np.ndarray
    h_profile: np.ndarray
    quadrature_weights: np.ndarray


@lru_cache(maxsize=8)
def green_operator(grid: GridSpec) -> GreenOperator:
    """Assemble the dense nonlocal operator by trapezoid collocation.

    Construction: with kernel G(x,y) = |x-y|/2 and weights w,

        u(x_i) = c * Htilde_i - sum_j G_ij w_j phi_j + (1/|O|) * sum_j (w G w)_j phi_j

    where c = (w.phi)/2 is the mean of phi, Htilde = (Gw) - (w.Gw)/2 comes
    from integrating the kernel, and the last term fixes the additive
    constant so the output has zero trapezoidal mean.  Constants are
    annihilated by construction; a final rank-one correction removes the
    O(1e-16) rounding residue so that ``matrix @ ones`` vanishes to ~1e-30.
    """
    x = grid.nodes
    w = grid.trapezoid_weights
    n = grid.n_nodes
    g = 0.5 * np.abs(x[:, None] - x[None, :])
    gw = g @ w  # row integrals of the kernel: (x^2 + 1)/2 exactly for this kernel
    wgw = float(w @ gw)  # double integral: 4/3
    h_profile = gw - wgw  # x^2/2 - 5/6 profile
    h_tilde = gw - 0.5 * wgw  # zero-mean variant: x^2/2 - 1/6

    matrix = (
        0.5 * np.outer(h_tilde, w)
        - g * w[None, :]
        + 0.5 * np.outer(np.ones(n), gw * w)
    )
    # Exact constant annihilation: distribute each row's residual row-sum.
    matrix -= np.outer(matrix @ np.ones(n), np.full(n, 1.0 / n))

    matrix.setflags(write=False)
    hp = h_profile.copy()
    hp.setflags(write=False)
    return GreenOperator(matrix=matrix, h_profile=hp, quadrature_weights=w)


def poisson_neumann_solve(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Solve the discrete Neumann problem ``u'' = f`` with zero-mean data.

    Uses the same folded second-difference operator as the models, bordered
    by the trapezoid-mean constraint to pin the additive constant, so the
    result is directly comparable with ``green_operator`` applied to ``-f``.

    Raises ``ValueError`` ("Neumann problem unsolvable") when the trapezoidal
    mean of ``f`` exceeds 1e-10 in magnitude, since no solution exists then.
    """
    rhs = np.asarray(f, dtype=float)
    if rhs.shape != (grid.n_nodes,):
        raise ValueError(f"f must have shape ({grid.n_nodes},), got {rhs.shape}")
    w = grid.trapezoid_weights
    mean = float(w @ rhs) / 2.0
    if abs(mean) > 1e-10:
        raise ValueError(f"Neumann problem unsolvable: right-hand side has mean {mean:.3e} (|mean| > 1e-10)")
    n = grid.n_nodes
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = laplacian_matrix(grid)
    bordered[:n, n] = 1.0
    bordered[n, :n] = w
    full_rhs = np.zeros(n + 1)
    full_rhs[:n] = rhs
    sol = lu_solve(lu_factor(bordered), full_rhs)
    return sol[:n]


class OhtaKawasaki(_ModelBase):
    """Steady Allen-Cahn/Ohta-Kawasaki operator, continued in gamma.

    Residual: eps*lap(phi) - (36/eps) * (2 phi^3 - 3 phi^2 + phi) - gamma*G(phi)
    with the double well W(phi) = 18*(phi^2 - phi)^2 (wells at 0 and 1) and
    the zero-mean nonlocal operator G.  Note the leading Laplacian enters
    with a +eps factor (gradient-flow sign), unlike the eps^2-divided
    Allen-Cahn form.
    """

    kind = "acok"
    active_parameter = "gamma"

    def __init__(self, grid: GridSpec, closure: str = "symmetric"):
        super().__init__(grid, closure)
        self.green = green_operator(grid)

    def residual(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        eps = params.epsilon
        well = 36.0 * (2.0 * _cube(phi) - 3.0 * (phi * phi) + phi)
        return eps * laplacian_apply(phi, self.grid, self.closure) - well / eps - params.gamma * (
            self.green.matrix @ phi
        )

    def jacobian(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        eps = params.epsilon
        j = eps * self._lap - params.gamma * self.green.matrix
        idx = np.arange(self.grid.n_nodes)
        j[idx, idx] -= (36.0 / eps) * (6.0 * phi * phi - 6.0 * phi + 1.0)
        return j

    def param_derivative(self, state, params: ModelParams) -> np.ndarray:
        phi = self._require_state(state)
        return -(self.green.matrix @ phi)

    def trivial_branches(self, params: ModelParams) -> list[TrivialBranch]:
        return [
            TrivialBranch("phi=0", False, lambda p: 0.0),
            TrivialBranch("phi=1/2", True, lambda p: 0.5),
            TrivialBranch("phi=1", False, lambda p: 1.0),
        ]

    def trivial_states(self, params: ModelParams) -> list[np.ndarray]:
        return [b.state_of(params, self.grid) for b in self.trivial_branches(params)]


def model_by_kind(kind: str, grid: GridSpec, closure: str = "symmetric", **kwargs):
    """Factory keyed by the short model names used throughout the CLI."""
    table = {"ac": AllenCahn, "ch": CahnHilliardSteady, "acok": OhtaKawasaki}
    if kind not in table:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(table)}")
    return table[kind](grid, closure=closure, **kwargs)


# ---------------------------------------------------------------------------
# Function-style entry points.  The classes above are what the continuation
# engine drives (they cache the assembled operators); these free functions
# are the same operations in oracle-friendly form for tests and scripts.
# ---------------------------------------------------------------------------


def ac_residual(state, params: ModelParams, grid: GridSpec, closure: str = "symmetric") -> np.ndarray:
    phi = np.asarray(state, dtype=float)
    inv_e2 = 1.0 / (params.epsilon * params.epsilon)
    return -laplacian_apply(phi, grid, closure) + inv_e2 * (_cube(phi) - phi)


def ac_jacobian(state, params: ModelParams, grid: GridSpec, closure: str = "symmetric") -> np.ndarray:
    return AllenCahn(grid, closure).jacobian(state, params)


def ch_residual(state, params: ModelParams, grid: GridSpec, closure: str = "symmetric") -> np.ndarray:
    out = ac_residual(state, params, grid, closure)
    if params.mu0 != 0.0:
        out -= params.mu0
    return out


def acok_residual(
    state, params: ModelParams, grid: GridSpec, gop: GreenOperator | None = None, closure: str = "symmetric"
) -> np.ndarray:
    phi = np.asarray(state, dtype=float)
    if gop is None:
        gop = green_operator(grid)
    eps = params.epsilon
    well = 36.0 * (2.0 * _cube(phi) - 3.0 * (phi * phi) + phi)
    return eps * laplacian_apply(phi, grid, closure) - well / eps - params.gamma * (gop.matrix @ phi)


def acok_jacobian(
    state, params: ModelParams, grid: GridSpec, gop: GreenOperator | None = None, closure: str = "symmetric"
) -> np.ndarray:
    phi = np.asarray(state, dtype=float)
    if gop is None:
        gop = green_operator(grid)
    eps = params.epsilon
    j = eps * laplacian_matrix(grid, closure) - params.gamma * gop.matrix
    idx = np.arange(grid.n_nodes)
    j[idx, idx] -= (36.0 / eps) * (6.0 * phi * phi - 6.0 * phi + 1.0)
    return j


def param_derivative(model, state, params: ModelParams) -> np.ndarray:
    """Derivative of the model residual in its active continuation parameter."""
    return model.param_derivative(state, params)
