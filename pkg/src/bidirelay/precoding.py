"""Beamformer construction and SINR / rate evaluation.

Linear precoding treats every other pair's beam as noise. With dirty-paper
coding (DPC) under an encoding order ``order`` (``order[-1]`` is encoded
last), the pair at position ``pos`` only sees the beams of pairs at later
positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import UNIT_NORM_TOL, Scenario, ValidationError

_ORTH_TOL = 1e-14


def capacity(x):
    """``log2(1 + x)`` in bits per channel use."""
    return np.log1p(x) / np.log(2.0)


@dataclass(frozen=True)
class BeamformerSet:
    """Unit-norm beams (rows of ``vectors``) and the mixing weight of each pair.

    ``effective_noise[i, k]`` is the interference-plus-noise power seen by
    node ``(i, k)`` under the powers the set was built for, when known.
    """

    vectors: np.ndarray
    t: np.ndarray
    effective_noise: Optional[np.ndarray] = None

    def __post_init__(self):
        vec = np.atleast_2d(np.asarray(self.vectors, dtype=np.complex128))
        norms = np.linalg.norm(vec, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValidationError(f"beamformers must have unit norm, got norms {norms}")
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))

    def __len__(self):
        return self.vectors.shape[0]


@dataclass(frozen=True)
class PowerAllocation:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValidationError(f"powers must be a finite nonnegative vector, got {p}")
        object.__setattr__(self, "p", p)

    def total(self) -> float:
        return float(self.p.sum())

    def within(self, budget: float) -> bool:
        return self.total() <= budget + 1e-12


def as_powers(p, n: Optional[int] = None) -> np.ndarray:
    p = PowerAllocation(p).p
    if n is not None and p.shape[0] != n:
        raise ValidationError(f"expected {n} powers, got {p.shape[0]}")
    return p


def check_order(order: Sequence[int], n: int) -> tuple:
    order = tuple(int(x) for x in order)
    if sorted(order) != list(range(n)):
        raise ValidationError(f"{order} is not a permutation of range({n})")
    return order


def check_weights(mu, tol: float = 1e-12) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValidationError(f"rate weights must be nonnegative, got {mu}")
    if abs(mu.sum() - 1.0) > tol:
        raise ValidationError(f"rate weights must sum to 1, got {mu.sum()}")
    return mu


def single_pair_beamformer(h1: np.ndarray, h2: np.ndarray, t: float) -> np.ndarray:
    """Phase-aligned blend of the two maximum-ratio directions of a pair.

    ``t = 1`` points at node 1, ``t = 0`` at node 2. The second direction
    is rotated by ``exp(-j phi)``, ``phi = arg(g1^H g2)``, so the two add
    coherently; for orthogonal directions ``phi`` is taken as 0.
    """
    h1 = np.asarray(h1, dtype=np.complex128)
    h2 = np.asarray(h2, dtype=np.complex128)
    n1, n2 = np.linalg.norm(h1), np.linalg.norm(h2)
    if n1 == 0 or n2 == 0:
        raise ValidationError("channel vectors must be nonzero")
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"t must lie in [0, 1], got {t}")
    g1, g2 = h1 / n1, h2 / n2
    cross = np.vdot(g1, g2)
    phi = 0.0 if abs(cross) <= _ORTH_TOL else np.angle(cross)
    u = t * g1 + (1.0 - t) * np.exp(-1j * phi) * g2
    return u / np.linalg.norm(u)


# ---------------------------------------------------------------------------
# SINR and rates
# ---------------------------------------------------------------------------
def _beams(U) -> np.ndarray:
    return U.vectors if isinstance(U, BeamformerSet) else np.atleast_2d(U)


def interference_mask(n: int, order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Boolean ``mask[i, j]``: beam ``j`` interferes at the nodes of pair ``i``.

    Without an order every ``j != i`` interferes; with a DPC order only
    pairs encoded after ``i`` do.
    """
    if order is None:
        return ~np.eye(n, dtype=bool)
    order = check_order(order, n)
    pos = np.empty(n, dtype=int)
    pos[list(order)] = np.arange(n)
    return pos[None, :] > pos[:, None]


def sinr_table(scenario: Scenario, U, p, order=None) -> np.ndarray:
    """SINR of every node, shape ``(n_pairs, 2)``; DPC when ``order`` is given."""
    n = scenario.n_pairs
    p = as_powers(p, n)
    g = scenario.gains(_beams(U))
    mask = interference_mask(n, order)
    received = g * p[None, None, :]
    interf = np.einsum("ikj,ij->ik", received, mask.astype(float))
    own = received[np.arange(n), :, np.arange(n)]
    return own / (interf + scenario.sigma2)


def _validate_index(scenario, i, k):
    if not (0 <= i < scenario.n_pairs and k in (0, 1)):
        raise ValidationError(f"node ({i}, {k}) is out of range")


def linear_sinr(scenario: Scenario, U, p, i: int, k: int) -> float:
    _validate_index(scenario, i, k)
    return float(sinr_table(scenario, U, p)[i, k])


def dpc_sinr(scenario: Scenario, U, p, order, position: int, k: int) -> float:
    """SINR of node ``k`` of the pair encoded at ``position`` in ``order``."""
    order = check_order(order, scenario.n_pairs)
    _validate_index(scenario, position, k)
    return float(sinr_table(scenario, U, p, order)[order[position], k])


def pair_sum_rate(sinr1: float, sinr2: float) -> float:
    if sinr1 < 0 or sinr2 < 0:
        raise ValidationError("SINR values must be nonnegative")
    return float(capacity(sinr1) + capacity(sinr2))


def pair_rates(scenario: Scenario, U, p, order=None) -> np.ndarray:
    """Per-pair sum rates ``C(SINR_(i,1)) + C(SINR_(i,2))``."""
    return capacity(sinr_table(scenario, U, p, order)).sum(axis=1)


def weighted_single_pair_rate(scenario: Scenario, u, power: float,
                              mu1: float, mu2: float) -> float:
    """Weighted rate of a lone pair transmitting with the whole budget on ``u``."""
    if scenario.n_pairs != 1:
        raise ValidationError("weighted single-pair rate needs a one-pair scenario")
    if mu1 < 0 or mu2 < 0:
        raise ValidationError("weights must be nonnegative")
    g = scenario.gains(np.atleast_2d(u))[0, :, 0]
    snr = g * power / scenario.sigma2
    return float(mu1 * capacity(snr[0]) + mu2 * capacity(snr[1]))


# ---------------------------------------------------------------------------
# Beamformer construction
# ---------------------------------------------------------------------------
def _per_pair_t(t, n):
    t = np.broadcast_to(np.asarray(t, dtype=float), (n,)).copy()
    if np.any((t < 0) | (t > 1)):
        raise ValidationError(f"mixing weights must lie in [0, 1], got {t}")
    return t


def successive_dpc_beamformers(scenario: Scenario, order, p, t) -> BeamformerSet:
    """Build beams from the last-encoded pair backwards.

    Each pair's beam is the single-pair blend of its own channels; the
    effective noise of a pair's nodes accumulates the already-fixed beams
    of the pairs encoded after it.
    """
    n = scenario.n_pairs
    order = check_order(order, n)
    p = as_powers(p, n)
    t = _per_pair_t(t, n)
    h = scenario.channels
    beams = np.zeros((n, scenario.n_antennas), dtype=np.complex128)
    noise = np.zeros((n, 2))
    fixed = []
    for pos in range(n - 1, -1, -1):
        i = order[pos]
        for k in range(2):
            noise[i, k] = scenario.sigma2 + sum(
                p[j] * abs(np.vdot(h[i, k], beams[j])) ** 2 for j in fixed)
        beams[i] = single_pair_beamformer(h[i, 0], h[i, 1], t[i])
        fixed.append(i)
    return BeamformerSet(beams, t, noise)


def linear_beamformers(scenario: Scenario, p, t) -> BeamformerSet:
    """Single-pair blends for every pair, noise table with all-pairs interference."""
    n = scenario.n_pairs
    p = as_powers(p, n)
    t = _per_pair_t(t, n)
    h = scenario.channels
    beams = np.array([single_pair_beamformer(h[i, 0], h[i, 1], t[i]) for i in range(n)])
    noise = np.zeros((n, 2))
    for i in range(n):
        for k in range(2):
            noise[i, k] = scenario.sigma2 + sum(
                p[j] * abs(np.vdot(h[i, k], beams[j])) ** 2 for j in range(n) if j != i)
    return BeamformerSet(beams, t, noise)


def single_pair_boundary(h1, h2, snr: float, grid: int = 1001):
    """Node rates of a lone pair along the blend family, full power on each beam.

    Returns ``(t, rates)`` with ``rates[g] = (C(snr |h1^H u|^2), C(snr |h2^H u|^2))``
    for ``u = single_pair_beamformer(h1, h2, t[g])``.
    """
    t = np.linspace(0.0, 1.0, grid)
    beams = np.array([single_pair_beamformer(h1, h2, tt) for tt in t])
    g1 = np.abs(beams @ np.conj(h1)) ** 2
    g2 = np.abs(beams @ np.conj(h2)) ** 2
    return t, capacity(snr * np.column_stack([g1, g2]))


def single_pair_capacity(h1, h2, snr: float, grid: int = 1001) -> float:
    """Best sum rate of a lone pair over the blend family."""
    _, rates = single_pair_boundary(h1, h2, snr, grid)
    return float(rates.sum(axis=1).max())
