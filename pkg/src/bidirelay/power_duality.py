"""Power minimization for fixed beams and the downlink / dual-uplink comparison.

For fixed beams the SINR targets of both nodes of every pair become the
linear constraint sets

    p >= D_k^-1 (G_k V_k p + sigma2 G_k 1),   k = 0, 1,

with cross gains ``V_k[i, j] = |h_(i,k)^H u_j|^2`` (zero diagonal), direct
gains ``D_k = diag(|h_(i,k)^H u_i|^2)`` and targets ``G_k``. The dual
uplink replaces ``V_k`` by its transpose. The smallest feasible vector is
the least fixed point of the element-wise maximum over both sets, reached
by monotone iteration from zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .core import Scenario, ValidationError
from .precoding import _beams, interference_mask

CONV_TOL = 1e-12
DIVERGENCE_CAP = 1e12
MAX_ITER = 200_000


class UnservableNodeError(ValidationError):
    def __init__(self, node):
        super().__init__(f"node {node} has zero direct gain and cannot be served")
        self.node = node


class InfeasibleError(RuntimeError):
    """SINR targets cannot be met; ``result`` carries the divergent iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class CouplingSystem:
    """Cross gains ``V[k]``, direct gains ``D[k]`` and targets ``gamma[k]`` per node set."""

    V: np.ndarray
    D: np.ndarray
    gamma: np.ndarray
    sigma2: float

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        D = np.array(self.D, dtype=float)
        G = np.array(self.gamma, dtype=float)
        if V.ndim != 3 or V.shape[1] != V.shape[2]:
            raise ValidationError(f"V must have shape (K, N, N), got {V.shape}")
        n_k, n = V.shape[:2]
        if D.shape != (n_k, n) or G.shape != (n_k, n):
            raise ValidationError("D and gamma must have shape (K, N) matching V")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(D)) and np.all(np.isfinite(G))):
            raise ValidationError("coupling data must be finite")
        if np.any(V < 0):
            raise ValidationError("cross gains must be nonnegative")
        if np.any(np.einsum("kii->ki", V) != 0):
            raise ValidationError("cross-gain matrices must have a zero diagonal")
        if np.any(D <= 0) or np.any(G <= 0):
            raise ValidationError("direct gains and SINR targets must be positive")
        if not self.sigma2 > 0:
            raise ValidationError("sigma2 must be positive")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "gamma", G)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n(self) -> int:
        return self.V.shape[1]

    def transposed(self) -> "CouplingSystem":
        return CouplingSystem(np.transpose(self.V, (0, 2, 1)), self.D, self.gamma, self.sigma2)

    def single(self, k: int) -> "CouplingSystem":
        """The system restricted to constraint set ``k``."""
        return CouplingSystem(self.V[k:k + 1], self.D[k:k + 1], self.gamma[k:k + 1], self.sigma2)

    def scaled_targets(self, factor: float) -> "CouplingSystem":
        return CouplingSystem(self.V, self.D, self.gamma * factor, self.sigma2)

    def interference_map(self, p: np.ndarray) -> np.ndarray:
        """Per-set right-hand sides, shape ``(K, N)``."""
        return self.gamma * (self.V @ p + self.sigma2) / self.D

    def slacks(self, p: np.ndarray) -> np.ndarray:
        return p[None, :] - self.interference_map(p)

    def spectral_radius(self, k: int) -> float:
        m = self.gamma[k][:, None] * self.V[k] / self.D[k][:, None]
        return float(np.max(np.abs(np.linalg.eigvals(m))))


@dataclass(frozen=True)
class MinPowerResult:
    power: np.ndarray
    total: float
    iterations: int
    converged: bool
    slacks: np.ndarray
    growth: float = 0.0
    polished: bool = False

    @property
    def max_violation(self) -> float:
        return float(max(0.0, -self.slacks.min()))

    def to_dict(self) -> dict:
        return {
            "power": self.power.tolist(),
            "total": self.total,
            "iterations": self.iterations,
            "converged": self.converged,
            "max_violation": self.max_violation,
            "growth": self.growth,
        }


def build_coupling(scenario: Scenario, U, gamma, order=None) -> CouplingSystem:
    """Coupling matrices induced by fixed beams.

    ``gamma`` has shape ``(n_pairs, 2)``. With a DPC ``order`` the cross
    gain from beam ``j`` to pair ``i`` is kept only when ``j`` is encoded
    after ``i``.
    """
    n = scenario.n_pairs
    g = scenario.gains(_beams(U))
    if g.shape[2] != n:
        raise ValidationError(f"expected {n} beams, got {g.shape[2]}")
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (n, 2):
        raise ValidationError(f"gamma must have shape ({n}, 2), got {gamma.shape}")
    direct = g[np.arange(n), :, np.arange(n)]  # (N, 2)
    for i, k in zip(*np.nonzero(direct <= 0)):
        raise UnservableNodeError((int(i), int(k)))
    mask = interference_mask(n, order)
    V = np.transpose(g, (1, 0, 2)) * mask[None, :, :]
    return CouplingSystem(V, direct.T, gamma.T, scenario.sigma2)


def _polish(sys: CouplingSystem, p: np.ndarray) -> Optional[np.ndarray]:
    """Solve the binding linear system exactly; ``None`` if it is not a fixed point."""
    rhs = sys.interference_map(p)
    kb = np.argmax(rhs, axis=0)
    idx = np.arange(sys.n)
    scale = sys.gamma[kb, idx] / sys.D[kb, idx]
    A = np.eye(sys.n) - scale[:, None] * sys.V[kb, idx, :]
    try:
        q = np.linalg.solve(A, sys.sigma2 * scale)
    except np.linalg.LinAlgError:
        return None
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        return None
    if np.max(np.abs(sys.interference_map(q).max(axis=0) - q)) > 1e-9 * (1.0 + q.max()):
        return None
    return q


def _min_power(sys: CouplingSystem) -> MinPowerResult:
    p, iters, status, growth = kernels.fixed_point_power(
        np.ascontiguousarray(sys.V), np.ascontiguousarray(sys.D),
        np.ascontiguousarray(sys.gamma), sys.sigma2, CONV_TOL, DIVERGENCE_CAP, MAX_ITER)
    p = np.asarray(p)
    if status != 0:
        res = MinPowerResult(p, float(p.sum()), int(iters), False, sys.slacks(p), float(growth))
        reason = "iterate diverged" if status == 1 else "iteration budget exhausted"
        raise InfeasibleError(
            f"SINR targets infeasible: {reason} after {iters} steps "
            f"(sup-norm growth ratio {growth:.6f})", res)
    polished = _polish(sys, p)
    if polished is not None:
        p = polished
    return MinPowerResult(p, float(p.sum()), int(iters), True, sys.slacks(p),
                          float(growth), polished is not None)


def min_power_downlink(sys: CouplingSystem) -> MinPowerResult:
    """Least total power meeting every downlink constraint set."""
    return _min_power(sys)


def min_power_uplink(sys: CouplingSystem) -> MinPowerResult:
    """Same problem with transposed cross gains (the dual uplink)."""
    return _min_power(sys.transposed())


@dataclass(frozen=True)
class DualityReport:
    dl_total: float
    ul_total: float
    gap: float
    per_k_dl_totals: tuple
    per_k_ul_totals: tuple
    downlink: MinPowerResult = field(repr=False)
    uplink: MinPowerResult = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "dl_total": self.dl_total,
            "ul_total": self.ul_total,
            "gap": self.gap,
            "per_k_dl_totals": list(self.per_k_dl_totals),
            "per_k_ul_totals": list(self.per_k_ul_totals),
            "dl_power": self.downlink.power.tolist(),
            "ul_power": self.uplink.power.tolist(),
            "iterations": {"downlink": self.downlink.iterations,
                           "uplink": self.uplink.iterations},
        }


def duality_check(sys: CouplingSystem) -> DualityReport:
    dl = min_power_downlink(sys)
    ul = min_power_uplink(sys)
    dl_k, ul_k = [], []
    for k in range(sys.V.shape[0]):
        single = sys.single(k)
        dl_k.append(min_power_downlink(single).total)
        ul_k.append(min_power_uplink(single).total)
    return DualityReport(dl.total, ul.total, ul.total - dl.total,
                         tuple(dl_k), tuple(ul_k), dl, ul)


def counterexample() -> CouplingSystem:
    """Two pairs, unit direct gains, unit targets on the first node set with a
    symmetric cross-gain matrix, unequal targets on the second set.

    Downlink minimum 115/19, uplink minimum 13.
    """
    V = np.array([[[0.0, 0.5], [0.5, 0.0]],
                  [[0.0, 0.2], [0.6, 0.0]]])
    D = np.ones((2, 2))
    gamma = np.array([[1.0, 1.0], [2.0, 1.0]])
    return CouplingSystem(V, D, gamma, 1.0)


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------
def system_to_dict(sys: CouplingSystem) -> dict:
    out = {"sigma2": sys.sigma2}
    for k in range(sys.V.shape[0]):
        out[f"V{k + 1}"] = sys.V[k].tolist()
        out[f"D{k + 1}"] = sys.D[k].tolist()
        out[f"gamma{k + 1}"] = sys.gamma[k].tolist()
    return out


def system_from_dict(obj: dict) -> CouplingSystem:
    try:
        V = [obj["V1"], obj["V2"]]
        D = [obj["D1"], obj["D2"]]
        G = [obj["gamma1"], obj["gamma2"]]
        sigma2 = obj["sigma2"]
    except KeyError as exc:
        raise ValidationError(f"instance file is missing field {exc.args[0]!r}") from exc
    return CouplingSystem(np.array(V, dtype=float), np.array(D, dtype=float),
                          np.array(G, dtype=float), float(sigma2))


def read_system(path) -> CouplingSystem:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return system_from_dict(obj)


def write_system(sys: CouplingSystem, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=2) + "\n")
