"""Hybrid zonotopes and their closed set operations.

A hybrid zonotope is the set of points ``Gc @ xc + Gb @ xb + c`` with
continuous factors ``xc`` in the unit hypercube, binary factors ``xb`` in
{-1, +1}^nb, subject to ``Ac @ xc + Ab @ xb = b``. It represents non-convex
unions of polytopes and is closed under all the operations used by the
reachability engine. Values are immutable after construction.

Exact queries (membership, emptiness, support) are decided by the embedded
mixed-binary optimizer in :mod:`hzreach.optim`.
"""

from __future__ import annotations

import json

import numpy as np

from .intervals import Interval
from .optim import LinearProgram, MixedBinaryProgram, OptResult, lp_solve, milp_optimize

#: Absolute residual below which an equality constraint counts as satisfied.
FEASIBILITY_TOL = 1e-8


class EmptySetError(Exception):
    """Raised when a query requires a nonempty set."""


class HybridZonotope:
    __slots__ = ("center", "cont_gens", "bin_gens", "con_cont", "con_bin", "con_rhs")

    def __init__(self, center, cont_gens=None, bin_gens=None,
                 con_cont=None, con_bin=None, con_rhs=None):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        n = center.shape[0]

        def block(m, rows, cols_hint):
            if m is None:
                return np.zeros((rows, cols_hint))
            m = np.asarray(m, dtype=float)
            if m.ndim != 2:
                m = m.reshape(rows, -1)
            return m

        cont_gens = block(cont_gens, n, 0)
        bin_gens = block(bin_gens, n, 0)
        ng, nb = cont_gens.shape[1], bin_gens.shape[1]
        con_rhs = (np.zeros(0) if con_rhs is None
                   else np.atleast_1d(np.asarray(con_rhs, dtype=float)))
        nc = con_rhs.shape[0]
        con_cont = block(con_cont, nc, ng)
        con_bin = block(con_bin, nc, nb)

        if cont_gens.shape != (n, ng) or bin_gens.shape != (n, nb):
            raise ValueError("generator block has wrong number of rows")
        if con_cont.shape != (nc, ng) or con_bin.shape != (nc, nb):
            raise ValueError("constraint block shape mismatch")

        self.center = center
        self.cont_gens = cont_gens
        self.bin_gens = bin_gens
        self.con_cont = con_cont
        self.con_bin = con_bin
        self.con_rhs = con_rhs
        for a in (center, cont_gens, bin_gens, con_cont, con_bin, con_rhs):
            a.setflags(write=False)

    # ------------------------------------------------------------------ basics

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def ng(self) -> int:
        return self.cont_gens.shape[1]

    @property
    def nb(self) -> int:
        return self.bin_gens.shape[1]

    @property
    def nc(self) -> int:
        return self.con_rhs.shape[0]

    def __repr__(self):
        return (f"HybridZonotope(dim={self.dim}, ng={self.ng}, "
                f"nb={self.nb}, nc={self.nc})")

    @classmethod
    def singleton(cls, x) -> "HybridZonotope":
        return cls(np.asarray(x, dtype=float))

    @classmethod
    def from_interval(cls, box: Interval) -> "HybridZonotope":
        """Axis-aligned box; one generator per nonzero-width coordinate."""
        rad = box.rad
        nz = np.flatnonzero(rad > 0.0)
        gc = np.zeros((box.dim, nz.size))
        gc[nz, np.arange(nz.size)] = rad[nz]
        return cls(box.mid, gc)

    def point_from_factors(self, xc, xb=None) -> np.ndarray:
        xc = np.asarray(xc, dtype=float).reshape(self.ng)
        x = self.center + self.cont_gens @ xc
        if self.nb:
            x = x + self.bin_gens @ np.asarray(xb, dtype=float).reshape(self.nb)
        return x

    # -------------------------------------------------------------- operations

    def affine_map(self, R, t=None) -> "HybridZonotope":
        """Exact image {R x + t : x in Z}."""
        R = np.asarray(R, dtype=float)
        if R.ndim != 2 or R.shape[1] != self.dim:
            raise ValueError(f"map has {R.shape} but set has dimension {self.dim}")
        c = R @ self.center
        if t is not None:
            c = c + np.asarray(t, dtype=float)
        return HybridZonotope(c, R @ self.cont_gens, R @ self.bin_gens,
                              self.con_cont, self.con_bin, self.con_rhs)

    def minkowski_sum_box(self, box: Interval) -> "HybridZonotope":
        """Exact Minkowski sum with an axis-aligned box.

        Appends one continuous generator per nonzero-width coordinate and
        shifts the center by the box midpoints.
        """
        if box.dim != self.dim:
            raise ValueError("box dimension mismatch")
        rad = box.rad
        nz = np.flatnonzero(rad > 0.0)
        new = np.zeros((self.dim, nz.size))
        new[nz, np.arange(nz.size)] = rad[nz]
        return HybridZonotope(
            self.center + box.mid,
            np.hstack([self.cont_gens, new]),
            self.bin_gens,
            np.hstack([self.con_cont, np.zeros((self.nc, nz.size))]),
            self.con_bin,
            self.con_rhs,
        )

    # ---------------------------------------------------------- exact queries

    def _factor_program(self, objective_c, objective_b) -> MixedBinaryProgram:
        ng, nb = self.ng, self.nb
        obj = np.concatenate([objective_c, objective_b])
        eq = np.hstack([self.con_cont, self.con_bin]) if self.nc else np.zeros((0, ng + nb))
        lower = -np.ones(ng + nb)
        upper = np.ones(ng + nb)
        lp = LinearProgram(obj, eq, self.con_rhs, lower, upper)
        return MixedBinaryProgram(lp, np.arange(ng, ng + nb))

    def support(self, d, strategy: str = "branch_and_bound") -> float:
        """max over x in Z of d @ x, exact via mixed-binary optimization."""
        d = np.asarray(d, dtype=float).reshape(self.dim)
        p = self._factor_program(-(d @ self.cont_gens), -(d @ self.bin_gens))
        res = milp_optimize(p, strategy=strategy)
        if not res.optimal:
            raise EmptySetError("support of an empty hybrid zonotope")
        return float(d @ self.center) - res.value

    def support_relaxed(self, d) -> float:
        """Upper bound on the support: binaries relaxed to [-1, 1] (one LP)."""
        d = np.asarray(d, dtype=float).reshape(self.dim)
        p = self._factor_program(-(d @ self.cont_gens), -(d @ self.bin_gens))
        res = lp_solve(p.lp)
        if not res.optimal:
            raise EmptySetError("support of an empty hybrid zonotope")
        return float(d @ self.center) - res.value

    def interval_hull(self, strategy: str = "branch_and_bound") -> Interval:
        """Tightest axis-aligned box containing Z (2n support queries)."""
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        e = np.zeros(self.dim)
        for i in range(self.dim):
            e[i] = 1.0
            hi[i] = self.support(e, strategy)
            e[i] = -1.0
            lo[i] = -self.support(e, strategy)
            e[i] = 0.0
        return Interval(np.minimum(lo, hi), np.maximum(lo, hi))

    def interval_hull_relaxed(self) -> Interval:
        """Cheap outer box from the LP relaxation (always contains the hull)."""
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        e = np.zeros(self.dim)
        for i in range(self.dim):
            e[i] = 1.0
            hi[i] = self.support_relaxed(e)
            e[i] = -1.0
            lo[i] = -self.support_relaxed(e)
            e[i] = 0.0
        return Interval(np.minimum(lo, hi), np.maximum(lo, hi))

    def _min_residual(self, rows: np.ndarray, rhs: np.ndarray) -> float:
        """Minimum L-inf residual of ``rows @ [xc; xb] = rhs`` over the factor box.

        Each |row @ xi - r| <= t pair is encoded with bounded slacks so the
        program is always feasible; the optimum is the best achievable residual.
        """
        ng, nb = self.ng, self.nb
        m = rows.shape[0]
        if m == 0:
            return 0.0
        row_reach = np.sum(np.abs(rows), axis=1)
        tmax = float(np.max(row_reach + np.abs(rhs))) + 1.0
        smax = 2.0 * tmax + float(np.max(row_reach + np.abs(rhs)))
        # variables: [xc, xb, t, s(2m)]
        nv = ng + nb + 1 + 2 * m
        obj = np.zeros(nv)
        obj[ng + nb] = 1.0
        eq = np.zeros((2 * m, nv))
        eq[:m, : ng + nb] = rows
        eq[m:, : ng + nb] = -rows
        eq[:, ng + nb] = -1.0
        eq[: 2 * m, ng + nb + 1:] = np.eye(2 * m)
        erhs = np.concatenate([rhs, -rhs])
        lower = np.concatenate([-np.ones(ng + nb), [0.0], np.zeros(2 * m)])
        upper = np.concatenate([np.ones(ng + nb), [tmax], np.full(2 * m, smax)])
        p = MixedBinaryProgram(LinearProgram(obj, eq, erhs, lower, upper),
                               np.arange(ng, ng + nb))
        res = milp_optimize(p)
        if not res.optimal:  # pragma: no cover - slacks make the program feasible
            raise RuntimeError("residual program reported infeasible")
        return res.value

    def contains_point(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        x = np.asarray(x, dtype=float).reshape(self.dim)
        rows = np.vstack([
            np.hstack([self.cont_gens, self.bin_gens]),
            np.hstack([self.con_cont, self.con_bin]),
        ])
        rhs = np.concatenate([x - self.center, self.con_rhs])
        return self._min_residual(rows, rhs) <= tol

    def is_empty(self, tol: float = FEASIBILITY_TOL) -> bool:
        if self.nc == 0:
            return False
        rows = np.hstack([self.con_cont, self.con_bin])
        return self._min_residual(rows, self.con_rhs) > tol

    # -------------------------------------------------------------- sampling

    def _feasible_bin_patterns(self, rng: np.random.Generator, want: int):
        if self.nb == 0:
            return [np.zeros(0)]
        patterns = []
        seen = set()
        if self.nb <= 10:
            candidates = [np.array(bits, dtype=float)
                          for bits in np.ndindex(*(2,) * self.nb)]
            rng.shuffle(candidates)
            for bits in candidates:
                pat = 2.0 * bits - 1.0
                if self._slice_vertex(pat, rng) is not None:
                    patterns.append(pat)
                if len(patterns) >= want:
                    break
        else:
            for _ in range(4 * want):
                d = rng.standard_normal(self.ng + self.nb)
                res = milp_optimize(self._factor_program(d[: self.ng], d[self.ng:]))
                if res.optimal:
                    pat = res.x[self.ng:]
                    key = tuple(pat > 0)
                    if key not in seen:
                        seen.add(key)
                        patterns.append(pat)
                if len(patterns) >= want:
                    break
        return patterns

    def _slice_vertex(self, pattern, rng) -> np.ndarray | None:
        """Random vertex of the continuous slice for a fixed binary pattern."""
        obj = rng.standard_normal(self.ng)
        eq = self.con_cont if self.nc else np.zeros((0, self.ng))
        rhs = self.con_rhs - (self.con_bin @ pattern if self.nc else 0.0)
        res = lp_solve(LinearProgram(obj, eq, np.atleast_1d(rhs) if self.nc else np.zeros(0),
                                     -np.ones(self.ng), np.ones(self.ng)))
        return res.x if res.optimal else None

    def sample_points(self, k: int, seed: int = 0) -> list[np.ndarray]:
        """k members of Z: pick a feasible binary pattern, then sample the slice."""
        if k == 0:
            return []
        rng = np.random.default_rng(seed)
        patterns = self._feasible_bin_patterns(rng, want=min(8, max(1, k)))
        if not patterns:
            raise EmptySetError("cannot sample an empty hybrid zonotope")
        out = []
        for _ in range(k):
            pat = patterns[rng.integers(len(patterns))]
            v1 = self._slice_vertex(pat, rng)
            v2 = self._slice_vertex(pat, rng)
            if v1 is None or v2 is None:  # pragma: no cover - pattern was vetted
                raise EmptySetError("continuous slice unexpectedly empty")
            w = rng.uniform()
            xc = w * v1 + (1 - w) * v2
            out.append(self.point_from_factors(xc, pat))
        return out

    # ---------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "Gc": _encode_matrix(self.cont_gens),
            "Gb": _encode_matrix(self.bin_gens),
            "Ac": _encode_matrix(self.con_cont),
            "Ab": _encode_matrix(self.con_bin),
            "b": self.con_rhs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HybridZonotope":
        return cls(
            np.asarray(d["center"], dtype=float),
            _decode_matrix(d["Gc"]),
            _decode_matrix(d["Gb"]),
            _decode_matrix(d["Ac"]),
            _decode_matrix(d["Ab"]),
            np.asarray(d["b"], dtype=float),
        )

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path) -> "HybridZonotope":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _encode_matrix(m: np.ndarray):
    size = m.size
    if size > 64 and np.count_nonzero(m) < 0.25 * size:
        r, c = np.nonzero(m)
        return {"shape": list(m.shape), "rows": r.tolist(), "cols": c.tolist(),
                "vals": m[r, c].tolist()}
    return {"shape": list(m.shape), "dense": m.tolist()}


def _decode_matrix(d) -> np.ndarray:
    shape = tuple(d["shape"])
    if "dense" in d:
        return np.asarray(d["dense"], dtype=float).reshape(shape)
    m = np.zeros(shape)
    m[np.asarray(d["rows"], dtype=int), np.asarray(d["cols"], dtype=int)] = d["vals"]
    return m


# ------------------------------------------------------------------ binary ops

def cartesian_product(z1: HybridZonotope, z2: HybridZonotope) -> HybridZonotope:
    """Block-diagonal composition; membership iff both projections are members."""
    n1, n2 = z1.dim, z2.dim

    def stack(a, b):
        return np.block([
            [a, np.zeros((a.shape[0], b.shape[1]))],
            [np.zeros((b.shape[0], a.shape[1])), b],
        ])

    return HybridZonotope(
        np.concatenate([z1.center, z2.center]),
        stack(z1.cont_gens, z2.cont_gens),
        stack(z1.bin_gens, z2.bin_gens),
        stack(z1.con_cont, z2.con_cont),
        stack(z1.con_bin, z2.con_bin),
        np.concatenate([z1.con_rhs, z2.con_rhs]),
    )


def generalized_intersection(z1: HybridZonotope, z2: HybridZonotope,
                             R=None) -> HybridZonotope:
    """Points x of z1 with R x in z2; R defaults to identity."""
    if R is None:
        R = np.eye(z1.dim)
    R = np.asarray(R, dtype=float)
    if R.shape != (z2.dim, z1.dim):
        raise ValueError(f"R must map R^{z1.dim} to R^{z2.dim}, got {R.shape}")
    nc1, nc2 = z1.nc, z2.nc
    # coupling rows: R (G1 xi1 + c1) = G2 xi2 + c2
    cc = np.block([
        [z1.con_cont, np.zeros((nc1, z2.ng))],
        [np.zeros((nc2, z1.ng)), z2.con_cont],
        [R @ z1.cont_gens, -z2.cont_gens],
    ])
    cb = np.block([
        [z1.con_bin, np.zeros((nc1, z2.nb))],
        [np.zeros((nc2, z1.nb)), z2.con_bin],
        [R @ z1.bin_gens, -z2.bin_gens],
    ])
    rhs = np.concatenate([z1.con_rhs, z2.con_rhs, z2.center - R @ z1.center])
    return HybridZonotope(
        z1.center,
        np.hstack([z1.cont_gens, np.zeros((z1.dim, z2.ng))]),
        np.hstack([z1.bin_gens, np.zeros((z1.dim, z2.nb))]),
        cc, cb, rhs,
    )


def union(z1: HybridZonotope, z2: HybridZonotope) -> HybridZonotope:
    """Exact union of two hybrid zonotopes.

    One selector binary q activates either operand: the inactive operand's
    continuous factors are pinned to zero and its binary factors to +1 via
    slack-encoded inequalities, and its generator contribution cancels
    against a compensating binary column, following the closed-form
    mixed-logic union construction for this set class.
    """
    if z1.dim != z2.dim:
        raise ValueError("union operands must share a dimension")
    n = z1.dim
    g1, b1n, c1n = z1.ng, z1.nb, z1.nc
    g2, b2n, c2n = z2.ng, z2.nb, z2.nc

    gb1_sum = z1.bin_gens.sum(axis=1)
    gb2_sum = z2.bin_gens.sum(axis=1)
    ab1_sum = z1.con_bin.sum(axis=1)
    ab2_sum = z2.con_bin.sum(axis=1)

    center = 0.5 * (z1.center + z2.center - gb1_sum - gb2_sum)
    q_col = 0.5 * (z1.center - z2.center + gb1_sum - gb2_sum)

    ns = 2 * g1 + 2 * g2 + b1n + b2n  # slack generators
    cont = np.hstack([z1.cont_gens, z2.cont_gens, np.zeros((n, ns))])
    bins = np.hstack([z1.bin_gens, z2.bin_gens, q_col.reshape(n, 1)])

    nc = c1n + c2n + ns
    ngt = g1 + g2 + ns
    nbt = b1n + b2n + 1
    ac = np.zeros((nc, ngt))
    ab = np.zeros((nc, nbt))
    rhs = np.zeros(nc)

    r = 0
    # operand constraints, active when selected, vacuous at the pinned point
    if c1n:
        ac[r:r + c1n, :g1] = z1.con_cont
        ab[r:r + c1n, :b1n] = z1.con_bin
        ab[r:r + c1n, -1] = -0.5 * (z1.con_rhs - ab1_sum)
        rhs[r:r + c1n] = 0.5 * (z1.con_rhs + ab1_sum)
        r += c1n
    if c2n:
        ac[r:r + c2n, g1:g1 + g2] = z2.con_cont
        ab[r:r + c2n, b1n:b1n + b2n] = z2.con_bin
        ab[r:r + c2n, -1] = 0.5 * (z2.con_rhs - ab2_sum)
        rhs[r:r + c2n] = 0.5 * (z2.con_rhs + ab2_sum)
        r += c2n

    s = g1 + g2  # next free slack column

    def pin_cont(col, q_sign):
        # |xi_col| <= (1 +- q)/2 as two slack rows
        nonlocal r, s
        for sgn in (1.0, -1.0):
            ac[r, col] = sgn
            ac[r, s] = 1.0
            ab[r, -1] = -0.5 * q_sign
            rhs[r] = -0.5
            r += 1
            s += 1

    def pin_bin(col, q_sign):
        # xi_col >= -(q_sign * q): forces +1 when deselected, free otherwise
        nonlocal r, s
        ab[r, col] = 1.0
        ab[r, -1] = q_sign
        ac[r, s] = -1.0
        rhs[r] = 1.0
        r += 1
        s += 1

    for j in range(g1):
        pin_cont(j, q_sign=1.0)
    for j in range(g2):
        pin_cont(g1 + j, q_sign=-1.0)
    for j in range(b1n):
        pin_bin(j, q_sign=1.0)
    for j in range(b2n):
        pin_bin(b1n + j, q_sign=-1.0)

    return HybridZonotope(center, cont, bins, ac, ab, rhs)
