"""Hybrid-zonotope reachability for ReLU networks.

The engine pushes a hybrid zonotope through an FFNN layer by layer. Each
ReLU layer is handled by intersecting the current pre-activation set with a
set-valued graph of the activation function built neuron by neuron from
interval bounds. Unstable neurons are encoded either exactly (one binary
factor selecting the active branch) or by their convex hull, governed by
the relaxation parameter gamma; low-impact neurons can be removed
beforehand with their effect absorbed into interval biases.

Every run on a box input also produces a witness plan: a record of the
factor columns appended at each step, from which explicit factor
assignments for any concrete execution of the original network can be
reconstructed. Membership of many samples in the output set can then be
checked by plain residual evaluation instead of per-point optimization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import crown_bounds
from .intervals import Interval
from .lowering import lower_network
from .model import FullyConnected, ModelError, Network
from .optim import DEFAULT_ENUMERATE_BUDGET
from .reduction import removal_error, select_neurons, neuron_scores
from .sets import FEASIBILITY_TOL, HybridZonotope, generalized_intersection

#: Pre-activation widths below this are treated as stable neurons.
DEGENERATE_WIDTH = 1e-12

#: ReLU graph cases.
CASE_POS = "pos"        # always-active neuron: graph is the segment x = z
CASE_NEG = "neg"        # always-inactive neuron: graph is the segment x = 0
CASE_EXACT = "exact"    # unstable neuron, both branches kept via one binary
CASE_HULL = "hull"      # unstable neuron, convex-hull (triangle) relaxation


@dataclass
class ReachConfig:
    rho: object = 0.0            # scalar or per-hidden-layer removal threshold
    gamma: float = 0.0           # 0 = fully exact, 1 = fully relaxed
    bound_method: str = "ibp"    # "ibp" | "crown" | "exact_hull"
    strategy: str = "branch_and_bound"
    enumerate_budget: int = DEFAULT_ENUMERATE_BUDGET

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.bound_method not in ("ibp", "crown", "exact_hull"):
            raise ValueError(f"unknown bound method {self.bound_method!r}")
        if self.strategy not in ("branch_and_bound", "enumerate"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


def relu_graph_1d(alpha: float, beta: float, gamma: float
                  ) -> tuple[HybridZonotope, str]:
    """Set of pairs (z, relu(z)) for z in [alpha, beta], possibly relaxed.

    Stable neurons yield a segment. An unstable neuron is kept exact when
    both branch-length ratios |alpha|/beta and beta/|alpha| strictly exceed
    gamma, and is otherwise replaced by the triangle spanned by
    (alpha, 0), (0, 0) and (beta, beta).
    """
    alpha, beta = float(alpha), float(beta)
    if beta < alpha:
        raise ValueError("empty pre-activation interval")
    mid, half = 0.5 * (alpha + beta), 0.5 * (beta - alpha)
    if beta <= 0.0 or (beta - alpha < DEGENERATE_WIDTH and mid < 0.0):
        return HybridZonotope([mid, 0.0], [[half], [0.0]]), CASE_NEG
    if alpha >= 0.0 or beta - alpha < DEGENERATE_WIDTH:
        return HybridZonotope([mid, mid], [[half], [half]]), CASE_POS
    if -alpha / beta > gamma and beta / -alpha > gamma:
        return HybridZonotope(
            [mid, 0.5 * beta],
            [[0.5 * beta, 0.5 * alpha, 0.0, 0.0],
             [0.5 * beta, 0.0, 0.0, 0.0]],
            [[0.0], [0.0]],
            [[1.0, 0.0, 1.0, 0.0],
             [0.0, 1.0, 0.0, 1.0]],
            [[-1.0], [1.0]],
            [-1.0, -1.0],
        ), CASE_EXACT
    # triangle as a constrained simplex over its three vertices
    return HybridZonotope(
        [mid, 0.5 * beta],
        [[0.5 * alpha, 0.0, 0.5 * beta],
         [0.0, 0.0, 0.5 * beta]],
        None,
        [[1.0, 1.0, 1.0]],
        None,
        [-1.0],
    ), CASE_HULL


def _stack_graphs(graphs: list[HybridZonotope]) -> HybridZonotope:
    """Compose per-neuron graphs into one set over ([z_1..z_m], [x_1..x_m])."""
    m = len(graphs)
    ng = sum(g.ng for g in graphs)
    nb = sum(g.nb for g in graphs)
    nc = sum(g.nc for g in graphs)
    center = np.zeros(2 * m)
    gc = np.zeros((2 * m, ng))
    gb = np.zeros((2 * m, nb))
    ac = np.zeros((nc, ng))
    ab = np.zeros((nc, nb))
    rhs = np.zeros(nc)
    og = ob = oc = 0
    for i, g in enumerate(graphs):
        rows = (i, m + i)
        center[list(rows)] = g.center
        gc[list(rows), og:og + g.ng] = g.cont_gens
        gb[list(rows), ob:ob + g.nb] = g.bin_gens
        ac[oc:oc + g.nc, og:og + g.ng] = g.con_cont
        ab[oc:oc + g.nc, ob:ob + g.nb] = g.con_bin
        rhs[oc:oc + g.nc] = g.con_rhs
        og += g.ng
        ob += g.nb
        oc += g.nc
    return HybridZonotope(center, gc, gb, ac, ab, rhs)


def layer_graph(z: HybridZonotope, j: Interval, gamma: float,
                check_bounds: bool = True,
                strategy: str = "branch_and_bound") -> HybridZonotope:
    """Graph set over (z, relu(z)) for z in the set, constrained to ``j``.

    Returns a set in R^{2n} whose first n coordinates are the inputs and
    last n the ReLU outputs. ``j`` must cover the interval hull of ``z``;
    with ``check_bounds`` this is verified exactly (one pair of
    mixed-binary programs per coordinate).
    """
    n = z.dim
    if j.dim != n:
        raise ValueError("bounds dimension mismatch")
    if check_bounds:
        hull = z.interval_hull(strategy)
        if not j.contains_interval(hull, FEASIBILITY_TOL):
            raise ValueError("bounds do not cover the set's interval hull")
    graphs = [relu_graph_1d(j.lo[i], j.hi[i], gamma)[0] for i in range(n)]
    h = _stack_graphs(graphs)
    return generalized_intersection(h, z, np.hstack([np.eye(n), np.zeros((n, n))]))


# ------------------------------------------------------------------- witnesses

def _graph_factors(case: str, alpha: float, beta: float, z: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Factor assignments putting each (z, relu(z)) on the graph set."""
    s = z.shape[0]
    width = beta - alpha
    if case in (CASE_POS, CASE_NEG):
        f = ((2.0 * z - alpha - beta) / width if width >= DEGENERATE_WIDTH
             else np.zeros(s))
        return f.reshape(s, 1), np.zeros((s, 0))
    pos = z >= 0.0
    if case == CASE_EXACT:
        xi1 = np.where(pos, 2.0 * z / beta - 1.0, -1.0)
        xi2 = np.where(pos, -1.0, 2.0 * z / alpha - 1.0)
        xi3 = np.where(pos, -xi1, -1.0)
        xi4 = np.where(pos, -1.0, -xi2)
        xb = np.where(pos, 1.0, -1.0)
        return np.column_stack([xi1, xi2, xi3, xi4]), xb.reshape(s, 1)
    if case == CASE_HULL:
        lam1 = np.where(pos, 0.0, z / alpha)
        lam3 = np.where(pos, z / beta, 0.0)
        lam2 = 1.0 - lam1 - lam3
        return 2.0 * np.column_stack([lam1, lam2, lam3]) - 1.0, np.zeros((s, 0))
    raise ValueError(f"unknown graph case {case!r}")


@dataclass
class _LayerPlan:
    removed_prev: np.ndarray        # neurons removed from the previous layer
    bias_mid: np.ndarray
    bias_rad: np.ndarray
    bias_gen_coords: np.ndarray     # bias coords that appended a generator
    kept: np.ndarray                # surviving neurons of this layer
    cases: list | None              # (case, alpha, beta) per kept neuron, or None


@dataclass
class WitnessPlan:
    """Recipe for reconstructing output-set factors of concrete executions."""
    input_mid: np.ndarray
    input_rad: np.ndarray
    input_gen_coords: np.ndarray
    layers: list = field(default_factory=list)


def witness_residuals(net: Network, plan: WitnessPlan, out_set: HybridZonotope,
                      x_batch: np.ndarray) -> np.ndarray:
    """Max residual per sample of the reconstructed factor assignments.

    Runs the original network on every row of ``x_batch``, rebuilds the
    factor vectors prescribed by the plan, and evaluates how far the
    resulting points fall from reproducing the network outputs while
    satisfying the set's equality constraints. Small residuals certify
    membership of the outputs in ``out_set``.
    """
    x_batch = np.asarray(x_batch, dtype=float)
    s = x_batch.shape[0]
    # forward trace with point biases
    pre = []
    post = [x_batch]
    cur = x_batch
    for layer in net.layers:
        if np.any(layer.bias.lo != layer.bias.hi):
            raise ModelError("witness evaluation requires point biases")
        z = cur @ layer.weights_dense().T + layer.bias.lo
        pre.append(z)
        cur = np.maximum(z, 0.0) if layer.activation == "relu" else z
        post.append(cur)
    y = cur

    coords = plan.input_gen_coords
    xc = (x_batch[:, coords] - plan.input_mid[coords]) / plan.input_rad[coords]
    xb = np.zeros((s, 0))
    for k, lp in enumerate(plan.layers):
        layer = net.layers[k]
        if lp.bias_gen_coords.size:
            w_rm = layer.weights_dense()[:, lp.removed_prev]
            actual = layer.bias.lo + post[k][:, lp.removed_prev] @ w_rm.T
            cds = lp.bias_gen_coords
            bias_f = (actual[:, cds] - lp.bias_mid[cds]) / lp.bias_rad[cds]
        else:
            bias_f = np.zeros((s, 0))
        if lp.cases is None:
            xc = np.hstack([xc, bias_f])
            continue
        gparts, bparts = [], []
        for (case, a, b), j in zip(lp.cases, lp.kept):
            gc, gb = _graph_factors(case, a, b, pre[k][:, j])
            gparts.append(gc)
            bparts.append(gb)
        xc = np.hstack(gparts + [xc, bias_f])
        xb = np.hstack(bparts + [xb])
    xc = np.clip(xc, -1.0, 1.0)

    r1 = xc @ out_set.cont_gens.T + xb @ out_set.bin_gens.T + out_set.center - y
    r2 = xc @ out_set.con_cont.T + xb @ out_set.con_bin.T - out_set.con_rhs
    res = np.abs(r1).max(axis=1)
    if out_set.nc:
        res = np.maximum(res, np.abs(r2).max(axis=1))
    return res


# ---------------------------------------------------------------------- engine

@dataclass
class ReachResult:
    output_set: HybridZonotope
    config: ReachConfig
    stats: list = field(default_factory=list)
    bounds: list = field(default_factory=list)      # J used per layer (or None)
    witness: WitnessPlan | None = None
    provenance: dict | None = None                  # set for lowered CNNs
    runtime: float = 0.0

    @property
    def complexity(self) -> dict:
        z = self.output_set
        return {"ng": z.ng, "nb": z.nb, "nc": z.nc}


def _rho_for(rho, k: int, num_hidden: int) -> float:
    if np.isscalar(rho):
        return float(rho)
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if rho.size != num_hidden:
        raise ValueError(f"expected {num_hidden} per-layer thresholds, got {rho.size}")
    return float(rho[k])


def _case_counts(cases) -> dict:
    out = {CASE_POS: 0, CASE_NEG: 0, CASE_EXACT: 0, CASE_HULL: 0}
    for case, _, _ in cases:
        out[case] += 1
    return out


def _run(net: Network, z0: HybridZonotope, box0: Interval, cfg: ReachConfig,
         want_witness: bool, stop_at_last_pre: bool = False):
    layers = net.layers
    num = len(layers)
    z = z0
    box_post = box0
    processed: list[FullyConnected] = []
    eps_pending: Interval | None = None
    removed_last = np.zeros(0, dtype=int)
    plan = WitnessPlan(box0.mid, box0.rad, np.flatnonzero(box0.rad > 0.0))
    stats: list[dict] = []
    bounds_used: list = []

    for k, layer in enumerate(layers):
        w = layer.weights_dense()
        if removed_last.size:
            kept_prev = np.setdiff1d(np.arange(w.shape[1]), removed_last)
            w_red = w[:, kept_prev]
        else:
            w_red = w
        v_int = layer.bias if eps_pending is None else layer.bias + eps_pending

        z = z.affine_map(w_red).minkowski_sum_box(v_int)
        pre_box = box_post.matmul(w_red) + v_int
        is_last = k == num - 1

        if stop_at_last_pre and is_last:
            return z, stats, bounds_used, plan

        if layer.activation == "identity":
            processed.append(FullyConnected(w_red, v_int, "identity"))
            plan.layers.append(_LayerPlan(
                removed_last, v_int.mid, v_int.rad,
                np.flatnonzero(v_int.rad > 0.0),
                np.arange(w.shape[0]), None))
            box_post = pre_box
            removed_last = np.zeros(0, dtype=int)
            eps_pending = None
            stats.append({"layer": k, "activation": "identity", "removed": 0,
                          "ng": z.ng, "nb": z.nb, "nc": z.nc})
            bounds_used.append(None)
            continue

        j_used = _layer_bounds(z, pre_box, processed, w_red, v_int, box0, cfg)
        bounds_used.append(j_used)

        # low-impact neuron removal (never on the output layer)
        removed = np.zeros(0, dtype=int)
        eps_next: Interval | None = None
        if not is_last:
            rho_k = _rho_for(cfg.rho, k, num - 1)
            if rho_k > 0.0:
                w_next = layers[k + 1].weights_dense()
                post_j = j_used.relu()
                removed = select_neurons(w_next, post_j, rho_k)
                if removed.size == w.shape[0] and removed.size:
                    scores = neuron_scores(w_next, post_j)
                    removed = np.delete(removed, int(np.argmax(scores[removed])))
                if removed.size:
                    eps_next = removal_error(w_next, post_j, removed)
        kept = np.setdiff1d(np.arange(w.shape[0]), removed)
        if removed.size:
            sel = np.zeros((kept.size, w.shape[0]))
            sel[np.arange(kept.size), kept] = 1.0
            z = z.affine_map(sel)
        j_kept = j_used[kept]

        graphs, cases = [], []
        for i, jdx in enumerate(kept):
            g, case = relu_graph_1d(j_kept.lo[i], j_kept.hi[i], cfg.gamma)
            graphs.append(g)
            cases.append((case, float(j_kept.lo[i]), float(j_kept.hi[i])))
        h = _stack_graphs(graphs)
        m = kept.size
        r_pre = np.hstack([np.eye(m), np.zeros((m, m))])
        coupled = generalized_intersection(h, z, r_pre)
        z = coupled.affine_map(np.hstack([np.zeros((m, m)), np.eye(m)]))

        processed.append(FullyConnected(w_red[kept, :], v_int[kept], "relu"))
        plan.layers.append(_LayerPlan(
            removed_last, v_int.mid, v_int.rad,
            np.flatnonzero(v_int.rad > 0.0), kept, cases))
        box_post = j_kept.relu()
        removed_last = removed
        eps_pending = eps_next
        entry = {"layer": k, "activation": "relu", "removed": int(removed.size),
                 "ng": z.ng, "nb": z.nb, "nc": z.nc}
        entry.update(_case_counts(cases))
        stats.append(entry)

    return z, stats, bounds_used, (plan if want_witness else None)


def _layer_bounds(z_pre: HybridZonotope, pre_box: Interval,
                  processed: list[FullyConnected], w_red, v_int,
                  box0: Interval, cfg: ReachConfig) -> Interval:
    """Interval covering the current pre-activation set (and function values)."""
    if cfg.bound_method == "ibp":
        return pre_box
    if cfg.bound_method == "exact_hull":
        return z_pre.interval_hull(cfg.strategy)
    # crown: tighten with backward linear relaxation on the reduced prefix,
    # then widen back out to cover relaxation slack already present in the set
    prefix = Network(processed + [FullyConnected(w_red, v_int, "identity")],
                     (box0.dim,))
    crown_j = crown_bounds(prefix, box0)[-1].pre.intersect(pre_box)
    set_box = z_pre.interval_hull_relaxed().intersect(pre_box)
    return crown_j.hull_union(set_box)


def reach_ffnn(net: Network, input_set, config: ReachConfig | None = None
               ) -> ReachResult:
    """Reachable output set of a fully-connected ReLU network.

    ``input_set`` may be an :class:`Interval` box (enables witness
    reconstruction) or an arbitrary :class:`HybridZonotope`.
    """
    cfg = config or ReachConfig()
    if not net.is_ffnn():
        raise ModelError("reach_ffnn expects a fully-connected network; "
                         "lower the model first")
    if isinstance(input_set, Interval):
        box0 = input_set
        z0 = HybridZonotope.from_interval(input_set)
        want_witness = True
    else:
        z0 = input_set
        box0 = z0.interval_hull_relaxed()
        want_witness = False
    t0 = time.perf_counter()
    z, stats, bounds_used, plan = _run(net, z0, box0, cfg, want_witness)
    return ReachResult(z, cfg, stats, bounds_used, plan,
                       runtime=time.perf_counter() - t0)


def propagate_preactivation(net: Network, input_set, config: ReachConfig
                            ) -> HybridZonotope:
    """Set of pre-activations of the network's final layer."""
    if isinstance(input_set, Interval):
        z0 = HybridZonotope.from_interval(input_set)
        box0 = input_set
    else:
        z0 = input_set
        box0 = z0.interval_hull_relaxed()
    z, _, _, _ = _run(net, z0, box0, config, want_witness=False,
                      stop_at_last_pre=True)
    return z


def reach_cnn(net: Network, input_set, config: ReachConfig | None = None
              ) -> ReachResult:
    """Reachable set of a CNN: lower to fully-connected form, then propagate."""
    lowered, provenance = lower_network(net)
    result = reach_ffnn(lowered, input_set, config)
    result.provenance = provenance
    return result
