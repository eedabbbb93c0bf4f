"""Semidefinite relaxation of SINR-constrained power minimization.

Replacing every rank-one transmit covariance ``p_i u_i u_i^H`` by a free
Hermitian PSD matrix ``Q_i`` turns the SINR constraints into linear ones,

    h^H Q_i h - gamma * sum_{j in I(i,k)} h^H Q_j h >= gamma * sigma2,

with ``I(i,k)`` all other pairs (linear precoding) or the pairs encoded
after ``i`` (DPC). The relaxed optimum lower-bounds the power of any
beamforming solution. Complex blocks are solved through their real
symmetric embedding ``[[Re, -Im], [Im, Re]]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _sdp
from .core import Scenario, ValidationError, complex_from_embedding, dominant_eigpair
from .power_duality import InfeasibleError, build_coupling, min_power_downlink
from .precoding import check_order, check_weights, interference_mask, single_pair_capacity

RESIDUAL_TOL = 1e-7
EIG_FLOOR = -1e-9
MAX_DIM = 8
MAX_ORDER_ENUM = 4


@dataclass(frozen=True)
class SdpProblem:
    """Relaxed power-minimization instance; ``gamma[i, k]`` is the SINR target."""

    scenario: Scenario
    gamma: np.ndarray
    mode: str = "linear"
    order: Optional[tuple] = None

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        n = self.scenario.n_pairs
        if g.shape != (n, 2):
            raise ValidationError(f"gamma must have shape ({n}, 2), got {g.shape}")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValidationError("SINR targets must be finite and nonnegative")
        if self.mode not in ("linear", "dpc"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.mode == "dpc":
            if self.order is None:
                raise ValidationError("dpc mode needs an encoding order")
            object.__setattr__(self, "order", check_order(self.order, n))
        else:
            object.__setattr__(self, "order", None)
        if n > MAX_DIM or self.scenario.n_antennas > MAX_DIM:
            raise ValidationError(f"problem exceeds {MAX_DIM} pairs or antennas")
        object.__setattr__(self, "gamma", g)

    @property
    def n_pairs(self) -> int:
        return self.scenario.n_pairs

    @property
    def dim(self) -> int:
        return self.scenario.n_antennas

    def interference_sets(self) -> dict:
        """``{(i, k): [j, ...]}`` for every constraint with a positive target."""
        mask = interference_mask(self.n_pairs, self.order)
        return {(i, k): [int(j) for j in np.flatnonzero(mask[i])]
                for i in range(self.n_pairs) for k in range(2) if self.gamma[i, k] > 0}

    def constraint_values(self, Q) -> np.ndarray:
        """Left-hand side minus right-hand side of every constraint, shape ``(N, 2)``."""
        h = self.scenario.channels
        out = np.full((self.n_pairs, 2), np.inf)
        for (i, k), others in self.interference_sets().items():
            hv = h[i, k]
            val = lambda j: float(np.real(np.vdot(hv, Q[j] @ hv)))
            out[i, k] = val(i) - self.gamma[i, k] * (sum(val(j) for j in others)
                                                     + self.scenario.sigma2)
        return out


def build_sdp(scenario: Scenario, gamma, mode: str = "linear", order=None) -> SdpProblem:
    return SdpProblem(scenario, np.asarray(gamma, dtype=float), mode,
                      None if order is None else tuple(order))


@dataclass
class PsdSolution:
    problem: SdpProblem
    Q: list
    objective: float
    status: str
    residuals: dict
    iterations: int = 0
    embedding_asymmetry: float = 0.0
    certificate: dict = field(default_factory=dict)

    @property
    def ranks(self) -> list:
        out = []
        for q in self.Q:
            w = np.linalg.eigvalsh(q)
            out.append(int(np.sum(w > 1e-6 * max(1.0, w.max()))))
        return out

    @property
    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(q).min() for q in self.Q))

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "residuals": dict(self.residuals),
            "ranks": self.ranks if self.Q else [],
            "iterations": self.iterations,
            "certificate": dict(self.certificate),
        }


# ---------------------------------------------------------------------------
# Real embedding
# ---------------------------------------------------------------------------
def _gain_matrix(h: np.ndarray) -> np.ndarray:
    """Symmetric ``G`` with ``<G, embed(Q)> = h^H Q h`` for Hermitian ``Q``."""
    x = np.concatenate([h.real, h.imag])
    y = np.concatenate([-h.imag, h.real])
    return 0.5 * (np.outer(x, x) + np.outer(y, y))


def _constraint_rows(problem: SdpProblem):
    n, m2 = problem.n_pairs, 2 * problem.dim
    rows, rhs = [], []
    for (i, k), others in problem.interference_sets().items():
        G = _gain_matrix(problem.scenario.channels[i, k])
        blocks = np.zeros((n, m2, m2))
        blocks[i] = G
        for j in others:
            blocks[j] -= problem.gamma[i, k] * G
        rows.append(blocks)
        rhs.append(problem.gamma[i, k] * problem.scenario.sigma2)
    return rows, np.array(rhs)


def _rotation(m: int) -> np.ndarray:
    """Real form of multiplication by ``j``; the embedded data commute with it."""
    J = np.zeros((2 * m, 2 * m))
    J[:m, m:] = -np.eye(m)
    J[m:, :m] = np.eye(m)
    return J


def _main_data(problem: SdpProblem) -> _sdp.SdpData:
    """``min sum tr(X_i)/2`` s.t. ``a_m(X) - w_m = b_m``, rows scaled to unit norm."""
    rows, b = _constraint_rows(problem)
    n, m2, n_c = problem.n_pairs, 2 * problem.dim, len(rows)
    scale = np.array([1.0 / np.linalg.norm(r) for r in rows])
    A = [np.array([r[i] * s for r, s in zip(rows, scale)]) for i in range(n)]
    return _sdp.SdpData(C=[0.5 * np.eye(m2) for _ in range(n)], A=A, c=np.zeros(n_c),
                        A_lp=-np.diag(scale), b=b * scale)


def _phase1_data(problem: SdpProblem):
    """Normalized problem ``max t`` s.t. ``a_m(X) >= b_m t``, ``sum tr(X_i)/2 = 1``.

    The optimum ``t*`` is the reciprocal of the minimal power, and the
    primal is feasible for any instance. ``t = t_lo + tau`` with ``tau >= 0``
    and ``t_lo`` below the value at the trace-normalized identity.
    """
    rows, b = _constraint_rows(problem)
    n, m2, n_c = problem.n_pairs, 2 * problem.dim, len(rows)
    X0 = np.eye(m2) / (problem.dim * n)
    t0 = min(sum(np.sum(r[i] * X0) for i in range(n)) / bm for r, bm in zip(rows, b))
    t_lo = t0 - abs(t0) - 1.0 / (1.0 + b.max())
    scale = np.array([1.0 / np.sqrt(np.linalg.norm(r) ** 2 + bm ** 2) for r, bm in zip(rows, b)])
    A = [np.array([r[i] * s for r, s in zip(rows, scale)] + [0.5 * np.eye(m2)])
         for i in range(n)]
    # LP variables: tau, then one slack per constraint.
    A_lp = np.zeros((n_c + 1, n_c + 1))
    A_lp[:n_c, 0] = -b * scale
    A_lp[:n_c, 1:] = -np.diag(scale)
    c = np.zeros(n_c + 1)
    c[0] = -1.0
    rhs = np.concatenate([b * scale * t_lo, [1.0]])
    data = _sdp.SdpData(C=[np.zeros((m2, m2)) for _ in range(n)], A=A, c=c, A_lp=A_lp, b=rhs)
    return data, t_lo


def max_inverse_power(problem: SdpProblem):
    """Solve the normalized problem; returns ``(t_star, t_upper, ipm_result)``.

    ``t_upper`` is the dual bound, so ``t_upper <= 0`` certifies that no
    PSD matrices meet every constraint.
    """
    if not problem.interference_sets():
        return np.inf, np.inf, None
    data, t_lo = _phase1_data(problem)
    res = _sdp.solve(data, symmetry=[_rotation(problem.dim)] * problem.n_pairs)
    return t_lo - res.primal_objective, t_lo - res.dual_objective, res


def _feasibility_floor(problem: SdpProblem) -> float:
    norms2 = problem.scenario.norms2()
    targets = problem.gamma * problem.scenario.sigma2
    pos = targets > 0
    return 1e-9 * float(np.max(norms2[pos] / targets[pos]))


def sdp_solve(problem: SdpProblem) -> PsdSolution:
    """Minimal-trace relaxed covariances, or an infeasibility certificate."""
    n, m = problem.n_pairs, problem.dim
    if not problem.interference_sets():
        zeros = [np.zeros((m, m), dtype=complex) for _ in range(n)]
        res = {"primal": 0.0, "dual": 0.0, "complementarity": 0.0}
        return PsdSolution(problem, zeros, 0.0, "optimal", res)
    t_star, t_upper, p1 = max_inverse_power(problem)
    cert = {"t_star": t_star, "t_upper": t_upper}
    if p1.status != "optimal":
        return PsdSolution(problem, [], np.nan, "numerical-failure", p1.residuals,
                           p1.iterations, certificate=cert)
    if t_upper <= _feasibility_floor(problem):
        return PsdSolution(problem, [], np.inf, "infeasible", p1.residuals,
                           p1.iterations, certificate=cert)
    res = _sdp.solve(_main_data(problem), symmetry=[_rotation(m)] * n)
    Q = [complex_from_embedding(X) for X in res.X[:n]]
    asym = 0.0
    for X in res.X[:n]:
        half = m
        asym = max(asym, np.max(np.abs(X[:half, :half] - X[half:, half:])),
                   np.max(np.abs(X[:half, half:] + X[half:, :half])))
    status = res.status
    if status == "optimal" and max(res.residuals.values()) > RESIDUAL_TOL:
        status = "numerical-failure"
    objective = float(sum(np.trace(q).real for q in Q))
    return PsdSolution(problem, Q, objective, status, res.residuals, res.iterations,
                       float(asym), cert)


def power_lower_bound(scenario: Scenario, gamma) -> float:
    """``sum_i max_k gamma_ik sigma2 / |h_ik|^2``, a bound that ignores interference."""
    gamma = np.asarray(gamma, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        need = gamma * scenario.sigma2 / scenario.norms2()
    return float(np.sum(np.max(need, axis=1)))


def is_feasible(problem: SdpProblem, budget: float):
    """``(feasible, min_power)``: relaxed targets reachable with total power <= budget.

    Targets whose interference-free power bound already exceeds the budget
    are rejected without a solve; the bound is then returned as the power.
    """
    if not problem.interference_sets():
        return True, 0.0
    bound = power_lower_bound(problem.scenario, problem.gamma)
    if bound > budget * (1.0 + 1e-9):
        return False, bound
    t_star, t_upper, res = max_inverse_power(problem)
    if res.status != "optimal":
        raise RuntimeError(f"SDP feasibility solve failed ({res.status})")
    if t_upper <= _feasibility_floor(problem):
        return False, np.inf
    power = 1.0 / t_star
    return bool(power <= budget * (1.0 + 1e-9)), float(power)


# ---------------------------------------------------------------------------
# Rank-one extraction
# ---------------------------------------------------------------------------
@dataclass
class Rank1Result:
    beams: np.ndarray
    raw_powers: np.ndarray
    powers: Optional[np.ndarray]
    feasible: bool
    raw_total: float
    repaired_total: float
    raw_min_slack: float
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "raw_powers": self.raw_powers.tolist(),
            "powers": None if self.powers is None else self.powers.tolist(),
            "feasible": self.feasible,
            "raw_total": self.raw_total,
            "repaired_total": self.repaired_total,
            "raw_min_slack": self.raw_min_slack,
        }


def rank1_extract(sol: PsdSolution) -> Rank1Result:
    """Dominant-eigenvector beams, trace powers, then power repair.

    The repair recomputes the least powers meeting every target for the
    extracted beams; ``raw_*`` fields keep the unrepaired heuristic.
    """
    if sol.status != "optimal":
        raise ValidationError(f"cannot extract from a {sol.status} solution")
    prob = sol.problem
    n = prob.n_pairs
    beams, raw = [], []
    for q in sol.Q:
        if np.trace(q).real <= 0:
            beams.append(np.eye(prob.dim, dtype=complex)[0])
            raw.append(0.0)
            continue
        ep = dominant_eigpair(0.5 * (q + q.conj().T))
        beams.append(ep.eigenvector)
        raw.append(float(np.trace(q).real))
    beams = np.array(beams)
    raw = np.array(raw)
    Q_raw = [p * np.outer(u, u.conj()) for p, u in zip(raw, beams)]
    vals = prob.constraint_values(Q_raw)
    raw_slack = float(np.min(vals[np.isfinite(vals)])) if np.any(np.isfinite(vals)) else 0.0

    active = prob.gamma > 0
    gamma = np.where(active, prob.gamma, 0.0)
    served = np.any(active, axis=1)
    powers = np.zeros(n)
    feasible, note = True, ""
    if np.any(served):
        idx = np.flatnonzero(served)
        sub = Scenario(len(idx), prob.dim, prob.scenario.channels[idx],
                       prob.scenario.sigma2, prob.scenario.power_budget)
        sub_order = None
        if prob.order is not None:
            sub_order = [int(np.flatnonzero(idx == i)[0]) for i in prob.order if i in idx]
        # zero targets cannot enter the coupling system; use a vanishing one
        g_sub = np.maximum(gamma[idx], 1e-300)
        try:
            sys = build_coupling(sub, beams[idx], g_sub, sub_order)
            powers[idx] = min_power_downlink(sys).power
        except (InfeasibleError, ValidationError) as exc:
            feasible, note = False, str(exc)
    repaired = powers if feasible else None
    total = float(powers.sum()) if feasible else np.inf
    return Rank1Result(beams, raw, repaired, feasible, float(raw.sum()), total, raw_slack, note)


# ---------------------------------------------------------------------------
# Bisection over a common rate scale
# ---------------------------------------------------------------------------
@dataclass
class BisectionResult:
    R: float
    rates: np.ndarray
    order: Optional[tuple]
    iterations: int
    r_hi: float
    r_hi_initial: float
    eps: float
    min_power: float
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "rates": self.rates.tolist(),
            "order": None if self.order is None else list(self.order),
            "iterations": self.iterations,
            "r_hi": self.r_hi,
            "r_hi_initial": self.r_hi_initial,
            "eps": self.eps,
            "min_power": self.min_power,
            "trace": [{"R": r, "feasible": f} for r, f in self.trace],
        }


def targets_for_rate(mu, R: float) -> np.ndarray:
    """Per-node SINR targets ``2^(mu_i R) - 1`` for both nodes of each pair."""
    with np.errstate(over="ignore"):
        g = np.expm1(np.asarray(mu, dtype=float) * R * np.log(2.0))
    return np.column_stack([g, g])


def rate_upper_start(scenario: Scenario) -> float:
    """Twice the largest single-pair sum capacity under the full budget."""
    caps = [single_pair_capacity(scenario.channels[i, 0], scenario.channels[i, 1],
                                 scenario.power_budget / scenario.sigma2)
            for i in range(scenario.n_pairs)]
    return 2.0 * max(caps)


def _bisect_one(scenario, mu, mode, order, eps, r_hi0):
    def feasible(R):
        gamma = targets_for_rate(mu, R)
        bound = power_lower_bound(scenario, gamma)
        if not bound <= scenario.power_budget:  # also catches overflowing targets
            return False, bound
        return is_feasible(build_sdp(scenario, gamma, mode, order), scenario.power_budget)

    trace = []
    hi = r_hi0
    ok, _ = feasible(hi)
    trace.append((hi, ok))
    while ok:  # the starting bound was reachable after all; widen it
        hi *= 2.0
        ok, _ = feasible(hi)
        trace.append((hi, ok))
    hi_start = hi
    lo, lo_power = 0.0, 0.0
    it = 0
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        ok, power = feasible(mid)
        trace.append((mid, ok))
        it += 1
        if ok:
            lo, lo_power = mid, power
        else:
            hi = mid
    return lo, lo_power, it, hi_start, trace


def bisect_rate_region(scenario: Scenario, mu, mode: str = "dpc", order=None,
                       eps: float = 0.01) -> BisectionResult:
    """Largest rate scale ``R`` whose targets ``2^(mu_i R) - 1`` fit in the budget.

    Each pair's sum rate at the returned point is ``2 mu_i R``. For DPC
    without an explicit order, every order is tried (at most four pairs)
    and the best kept.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    mu = check_weights(mu)
    if mu.shape != (scenario.n_pairs,):
        raise ValidationError(f"expected {scenario.n_pairs} weights")
    r_hi0 = rate_upper_start(scenario)
    if mode == "dpc" and order is None:
        if scenario.n_pairs > MAX_ORDER_ENUM:
            raise ValidationError("pass an explicit order for more than four pairs")
        orders = list(itertools.permutations(range(scenario.n_pairs)))
    else:
        orders = [None if mode == "linear" else tuple(order)]
    best = None
    for od in orders:
        lo, power, it, hi_start, trace = _bisect_one(scenario, mu, mode, od, eps, r_hi0)
        if best is None or lo > best.R:
            best = BisectionResult(lo, 2.0 * mu * lo, od, it, hi_start, r_hi0, eps, power, trace)
    if best.R <= 0.0:
        raise InfeasibleError("no positive rate scale is feasible (degenerate geometry)")
    return best


def sdp_bisect_region(scenario: Scenario, mode: str = "dpc", mu_levels: int = 11,
                      eps: float = 0.01, order=None):
    """Region traced by bisection over a simplex grid of rate weights.

    Each point carries the rank-one beams and repaired powers extracted at
    its rate scale; points whose repair fails keep the raw trace powers.
    """
    from .rate_region import RateRegion, simplex_grid

    n, m = scenario.n_pairs, scenario.n_antennas
    weights = simplex_grid(n, mu_levels, 1.0)
    rates, beams, powers, orders, labels, repaired = [], [], [], [], [], []
    for mu in weights:
        mu = mu / mu.sum()
        res = bisect_rate_region(scenario, mu, mode, order, eps)
        prob = build_sdp(scenario, targets_for_rate(mu, res.R), mode, res.order)
        sol = sdp_solve(prob)
        if sol.status == "optimal":
            r1 = rank1_extract(sol)
            beams.append(r1.beams)
            powers.append(r1.powers if r1.feasible else r1.raw_powers)
            repaired.append(r1.feasible)
        else:
            beams.append(np.tile(np.eye(m, dtype=complex)[0], (n, 1)))
            powers.append(np.zeros(n))
            repaired.append(False)
        rates.append(res.rates)
        orders.append(res.order)
        labels.append("mu=" + ";".join(format(x, ".17g") for x in mu) + f"|R={res.R:.17g}")
    meta = {"mu_levels": mu_levels, "eps": eps, "method": "sdp-bisect",
            "closure": "origin+axis-feet", "repaired": repaired}
    return RateRegion("dpc" if mode == "dpc" else "linear", np.array(rates), np.array(powers),
                      orders, np.array(beams), None, meta, layout="list", labels=labels)


def bisection_iteration_bound(r_hi: float, eps: float) -> int:
    return int(math.ceil(math.log2(r_hi / eps)))
