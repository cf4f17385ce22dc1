"""Distances between distributions: earth mover's distance, total variation,
squared Euclidean error.

EMD is exact optimal transport.  On the line it reduces to the integral of
the absolute CDF difference; on planar grids it is solved as a transportation
problem by successive shortest paths with potentials, and the result is
certified by checking complementary slackness of the final duals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Distribution, LinearAlphabet, PlanarAlphabet
from .errors import AlphabetMismatchError, LengthMismatchError, SolverNonConvergenceError

# Complementary-slackness residual accepted as an optimality certificate.
CERT_TOL = 1e-7


@dataclass(frozen=True)
class MetricValue:
    """A named metric outcome; units follow the alphabet (years, km) for EMD
    and are dimensionless otherwise."""

    name: str
    value: float
    units: str = ""


def tv(p: Distribution, q: Distribution) -> float:
    """Total variation distance, half the L1 difference."""
    if p.alphabet != q.alphabet:
        raise AlphabetMismatchError("distributions are over different alphabets")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def l2sq(v, theta) -> float:
    """Squared Euclidean error between a vector (possibly not a distribution)
    and a reference distribution or vector."""
    a = v.probs if isinstance(v, Distribution) else np.asarray(v, dtype=float)
    b = theta.probs if isinstance(theta, Distribution) else np.asarray(theta, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatchError("vectors differ in length")
    return float(((a - b) ** 2).sum())


def emd_1d(p: Distribution, q: Distribution) -> float:
    """Exact optimal transport on the line: sum over adjacent value pairs of
    |CDF_p - CDF_q| times the gap between them."""
    if p.alphabet != q.alphabet:
        raise AlphabetMismatchError("distributions are over different alphabets")
    if not isinstance(p.alphabet, LinearAlphabet):
        raise AlphabetMismatchError("emd_1d requires a linear alphabet")
    vals = np.asarray(p.alphabet.values, dtype=float)
    gaps = np.diff(vals)
    cdf_diff = np.cumsum(p.probs - q.probs)[:-1]
    return float(np.abs(cdf_diff) @ gaps)


def emd_planar(p: Distribution, q: Distribution) -> float:
    """Exact optimal transport between grid distributions with Euclidean
    ground distance between cell centers."""
    if p.alphabet != q.alphabet:
        raise AlphabetMismatchError("distributions are over different alphabets")
    if not isinstance(p.alphabet, PlanarAlphabet):
        raise AlphabetMismatchError("emd_planar requires a planar alphabet")
    centers = p.alphabet.centers_array()
    si = np.flatnonzero(p.probs > 0)
    di = np.flatnonzero(q.probs > 0)
    supply = p.probs[si] / p.probs[si].sum()
    demand = q.probs[di] / q.probs[di].sum()
    diff = centers[si][:, None, :] - centers[di][None, :, :]
    cost = np.sqrt((diff ** 2).sum(axis=2))
    _, total = min_cost_transport(cost, supply, demand)
    return total


def emd(p: Distribution, q: Distribution) -> float:
    """Dispatch EMD on the alphabet type."""
    if isinstance(p.alphabet, PlanarAlphabet):
        return emd_planar(p, q)
    return emd_1d(p, q)


def metric_value(name: str, estimate: Distribution, truth: Distribution) -> MetricValue:
    if name == "emd":
        units = "km" if isinstance(truth.alphabet, PlanarAlphabet) else "alphabet units"
        return MetricValue("emd", emd(estimate, truth), units)
    if name == "tv":
        return MetricValue("tv", tv(estimate, truth))
    if name == "l2sq":
        return MetricValue("l2sq", l2sq(estimate, truth))
    raise ValueError(f"unknown metric {name!r}")


# ---------------------------------------------------------------------------
# Transportation solver
# ---------------------------------------------------------------------------

def min_cost_transport(cost, supply, demand, cert_tol: float = CERT_TOL):
    """Solve the balanced transportation problem exactly.

    Successive shortest augmenting paths with node potentials (Dijkstra on
    reduced costs).  Returns ``(flow, total_cost)``; raises
    SolverNonConvergenceError when the dual certificate fails.
    """
    cost = np.asarray(cost, dtype=float)
    supply = np.asarray(supply, dtype=float).copy()
    demand = np.asarray(demand, dtype=float).copy()
    ns, nd = cost.shape
    if supply.shape != (ns,) or demand.shape != (nd,):
        raise LengthMismatchError("supply/demand lengths must match the cost matrix")
    total_supply = supply.sum()
    if abs(total_supply - demand.sum()) > 1e-9 * max(1.0, total_supply):
        raise ValueError("supply and demand must balance")
    demand *= total_supply / demand.sum()

    flow = np.zeros((ns, nd))
    rem_s = supply.copy()
    rem_d = demand.copy()
    # Node potentials phi; the reduced cost of supply->demand is
    # c_ij + phi_i - phi_j, kept non-negative so Dijkstra applies.
    pot_s = np.zeros(ns)
    pot_d = cost.min(axis=0).copy()

    # Each augmentation saturates a supply or a demand node, or exhausts a
    # reverse edge; this cap is far beyond what balanced instances need.
    max_augment = 4 * (ns + nd) * max(ns, nd)
    eps_mass = 1e-15 * max(1.0, total_supply)

    for _ in range(max_augment):
        if rem_s.sum() <= eps_mass:
            break
        dist_s = np.where(rem_s > eps_mass, 0.0, np.inf)
        dist_d = np.full(nd, np.inf)
        done_s = np.zeros(ns, dtype=bool)
        done_d = np.zeros(nd, dtype=bool)
        parent_d = np.full(nd, -1, dtype=np.int64)  # demand j reached from supply
        parent_s = np.full(ns, -1, dtype=np.int64)  # supply i reached from demand
        target = -1
        while True:
            ms = np.inf if done_s.all() else np.min(np.where(done_s, np.inf, dist_s))
            md = np.inf if done_d.all() else np.min(np.where(done_d, np.inf, dist_d))
            if not np.isfinite(min(ms, md)):
                break
            if md <= ms:
                j = int(np.argmin(np.where(done_d, np.inf, dist_d)))
                if rem_d[j] > eps_mass:
                    target = j
                    break
                done_d[j] = True
                # residual reverse edges j -> i exist where flow is positive
                back = flow[:, j] > eps_mass
                if np.any(back):
                    rc = pot_d[j] - pot_s - cost[:, j]
                    cand = dist_d[j] + np.maximum(rc, 0.0)
                    upd = back & ~done_s & (cand < dist_s)
                    if np.any(upd):
                        dist_s[upd] = cand[upd]
                        parent_s[upd] = j
            else:
                i = int(np.argmin(np.where(done_s, np.inf, dist_s)))
                done_s[i] = True
                rc = cost[i] + pot_s[i] - pot_d
                cand = dist_s[i] + np.maximum(rc, 0.0)
                upd = ~done_d & (cand < dist_d)
                if np.any(upd):
                    dist_d[upd] = cand[upd]
                    parent_d[upd] = i
        if target < 0:
            raise SolverNonConvergenceError("no augmenting path found")

        # Update potentials by the (truncated) shortest-path distances.
        reach = dist_d[target]
        pot_s += np.minimum(dist_s, reach)
        pot_d += np.minimum(dist_d, reach)

        # Trace the alternating path back and find the bottleneck.
        path = []  # list of (i, j, forward?)
        j = target
        amount = rem_d[target]
        while True:
            i = int(parent_d[j])
            path.append((i, j, True))
            if dist_s[i] == 0.0 and rem_s[i] > eps_mass:
                amount = min(amount, rem_s[i])
                break
            jj = int(parent_s[i])
            path.append((i, jj, False))
            amount = min(amount, flow[i, jj])
            j = jj
        for i, j, forward in path:
            if forward:
                flow[i, j] += amount
            else:
                flow[i, j] -= amount
        src = path[-1][0]
        rem_s[src] -= amount
        rem_d[target] -= amount
    else:
        raise SolverNonConvergenceError("augmentation limit exceeded")

    if rem_s.sum() > 1e-9 * max(1.0, total_supply):
        raise SolverNonConvergenceError("could not route all mass")

    # Certificate: dual feasibility and complementary slackness, with the LP
    # duals read off the potentials as u = -phi_s, v = phi_d.
    reduced = cost + pot_s[:, None] - pot_d[None, :]
    if reduced.min() < -cert_tol:
        raise SolverNonConvergenceError(
            f"dual infeasibility {reduced.min():.3e} exceeds the certificate tolerance"
        )
    slack = np.abs(flow * reduced).max() if flow.size else 0.0
    if slack > cert_tol:
        raise SolverNonConvergenceError(
            f"complementary slackness residual {slack:.3e} exceeds the certificate tolerance"
        )
    return flow, float((flow * cost).sum())
