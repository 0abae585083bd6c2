"""Linear and mixed-binary optimization backing the exact set queries.

All programs are box-bounded (hybrid zonotope factor spaces are compact), so
unboundedness cannot occur. Binary variables live natively in {-1, +1},
matching the binary factors of the set representation; the 0/1 re-encoding
needed by the MIP backend is internal to ``milp_optimize``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sciopt

#: Maximum number of binaries the exhaustive strategy will accept.
DEFAULT_ENUMERATE_BUDGET = 20


class OptimError(Exception):
    pass


class BudgetExceededError(OptimError):
    """Too many binaries for the exhaustive strategy."""


@dataclass
class LinearProgram:
    """minimize objective @ x  s.t.  eq_matrix @ x = eq_rhs,  lower <= x <= upper."""

    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        try:
            self.eq_matrix = np.asarray(self.eq_matrix, dtype=float).reshape(
                self.eq_rhs.shape[0], n)
        except ValueError:
            raise ValueError("eq_matrix / eq_rhs row mismatch") from None
        self.lower = np.asarray(self.lower, dtype=float).reshape(n)
        self.upper = np.asarray(self.upper, dtype=float).reshape(n)
        if self.eq_matrix.shape[0] != self.eq_rhs.shape[0]:
            raise ValueError("eq_matrix / eq_rhs row mismatch")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("all variables must be box-bounded")
        if np.any(self.lower > self.upper):
            raise ValueError("lower > upper")

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]


@dataclass
class MixedBinaryProgram:
    """A LinearProgram plus an index set of variables restricted to {-1, +1}."""

    lp: LinearProgram
    binary_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.binary_idx = np.asarray(self.binary_idx, dtype=int).reshape(-1)
        if self.binary_idx.size and (
            self.binary_idx.min() < 0 or self.binary_idx.max() >= self.lp.num_vars
        ):
            raise ValueError("binary index out of range")


@dataclass
class OptResult:
    status: str  # "optimal" | "infeasible"
    value: float | None = None
    x: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def lp_solve(p: LinearProgram) -> OptResult:
    """Solve a box-bounded LP with equality constraints.

    Returns the optimum within ~1e-9 relative on well-conditioned inputs;
    infeasibility is signaled via the result status.
    """
    if p.num_vars == 0:
        # degenerate program over an empty variable space: feasible iff the
        # (constant) equality system holds, with objective value zero
        if np.all(np.abs(p.eq_rhs) <= 1e-12):
            return OptResult("optimal", 0.0, np.zeros(0))
        return OptResult("infeasible")
    a_eq = p.eq_matrix if p.eq_matrix.shape[0] else None
    b_eq = p.eq_rhs if p.eq_rhs.shape[0] else None
    res = sciopt.linprog(
        p.objective,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=np.column_stack([p.lower, p.upper]),
        method="highs",
    )
    if res.status == 2:
        return OptResult("infeasible")
    if res.status != 0:
        raise OptimError(f"LP solver failure: {res.message}")
    return OptResult("optimal", float(res.fun), np.asarray(res.x, dtype=float))


def _solve_with_fixed_binaries(p: MixedBinaryProgram, pattern: np.ndarray) -> OptResult:
    lower = p.lp.lower.copy()
    upper = p.lp.upper.copy()
    lower[p.binary_idx] = pattern
    upper[p.binary_idx] = pattern
    return lp_solve(LinearProgram(p.lp.objective, p.lp.eq_matrix, p.lp.eq_rhs, lower, upper))


def _milp_enumerate(p: MixedBinaryProgram, budget: int) -> OptResult:
    nb = p.binary_idx.size
    if nb > budget:
        raise BudgetExceededError(
            f"{nb} binaries exceed the enumeration budget of {budget}; "
            "use strategy='branch_and_bound'"
        )
    best = OptResult("infeasible")
    for bits in itertools.product((-1.0, 1.0), repeat=nb):
        res = _solve_with_fixed_binaries(p, np.array(bits))
        if res.optimal and (not best.optimal or res.value < best.value):
            best = res
    return best


def _milp_highs(p: MixedBinaryProgram) -> OptResult:
    # Re-encode xi_b = 2*y - 1 with y in {0,1} for the HiGHS MIP backend.
    n = p.lp.num_vars
    bmask = np.zeros(n, dtype=bool)
    bmask[p.binary_idx] = True

    c = p.lp.objective.copy()
    a = p.lp.eq_matrix.copy()
    rhs = p.lp.eq_rhs.copy()
    lower = p.lp.lower.copy()
    upper = p.lp.upper.copy()

    obj_offset = -float(np.sum(c[bmask]))
    if a.shape[0]:
        rhs = rhs + a[:, bmask].sum(axis=1)
        a[:, bmask] *= 2.0
    c_enc = c.copy()
    c_enc[bmask] *= 2.0
    lower[bmask] = 0.0
    upper[bmask] = 1.0
    integrality = np.where(bmask, 1, 0)

    constraints = []
    if a.shape[0]:
        constraints.append(sciopt.LinearConstraint(a, rhs, rhs))
    res = sciopt.milp(
        c_enc,
        constraints=constraints,
        bounds=sciopt.Bounds(lower, upper),
        integrality=integrality,
        options={"mip_rel_gap": 0.0},
    )
    if res.status == 2:
        return OptResult("infeasible")
    if res.status != 0 or res.x is None:
        raise OptimError(f"MILP solver failure: {res.message}")
    x = np.asarray(res.x, dtype=float)
    x[bmask] = np.where(x[bmask] >= 0.5, 1.0, -1.0)
    return OptResult("optimal", float(res.fun) + obj_offset, x)


def milp_optimize(
    p: MixedBinaryProgram,
    strategy: str = "branch_and_bound",
    enumerate_budget: int = DEFAULT_ENUMERATE_BUDGET,
) -> OptResult:
    """Exact minimum over all feasible binary assignments.

    ``enumerate`` solves one LP per binary pattern (capped by the budget);
    ``branch_and_bound`` delegates to the HiGHS branch-and-bound MIP solver
    with a zero optimality gap. Both strategies return identical optima.
    """
    if p.binary_idx.size == 0:
        return lp_solve(p.lp)
    if strategy == "enumerate":
        return _milp_enumerate(p, enumerate_budget)
    if strategy == "branch_and_bound":
        return _milp_highs(p)
    raise ValueError(f"unknown strategy {strategy!r}")


def dump_lp_text(p: LinearProgram) -> str:
    """Debug dump in a minimal LP-text style."""
    lines = ["min " + " + ".join(f"{ci:.17g} x{i}" for i, ci in enumerate(p.objective))]
    for row, r in zip(p.eq_matrix, p.eq_rhs):
        lines.append(" + ".join(f"{v:.17g} x{i}" for i, v in enumerate(row)) + f" = {r:.17g}")
    for i, (lo, hi) in enumerate(zip(p.lower, p.upper)):
        lines.append(f"{lo:.17g} <= x{i} <= {hi:.17g}")
    return "\n".join(lines)
