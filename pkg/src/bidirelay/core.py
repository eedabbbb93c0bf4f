"""Scenario model, seeded channel generation and Hermitian eigen kernels.

A scenario holds the broadcast-phase channels ``h_(i,k)`` from an
``n_antennas``-element relay to node ``k`` (0 or 1) of pair ``i``, stored as
a complex array of shape ``(n_pairs, 2, n_antennas)``. Pair and node
indices are zero-based throughout the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels

HERMITIAN_TOL = 1e-12
EIG_RESIDUAL_TOL = 1e-9
UNIT_NORM_TOL = 1e-12
MAX_EIG_DIM = 64

# Squared channel norms printed for the two-pair illustration scenario.
ILLUSTRATION_NORMS2 = ((3.28, 2.9), (1.77, 2.2))

_MASK64 = (1 << 64) - 1


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class ScenarioParseError(ValidationError):
    """Malformed scenario file; the message names the offending field or line."""


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------
def substream(seed: int, task: int = 0) -> np.random.Generator:
    """Counter-based generator for task ``task`` of a run seeded with ``seed``.

    The Philox key is ``seed XOR task`` so that data-parallel workers can
    rebuild their stream from the pair alone.
    """
    key = (int(seed) ^ int(task)) & _MASK64
    return np.random.Generator(np.random.Philox(key=key))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular CN(0, 1) samples via the polar Box-Muller transform.

    With ``u1, u2 ~ U(0, 1]`` the modulus ``sqrt(-ln u1)`` has an
    exponential squared magnitude of mean 1 and the phase ``2 pi u2`` is
    uniform, so real and imaginary parts are independent N(0, 1/2).
    Both uniforms of an entry are drawn together, so a draw of ``(n, ...)``
    starts with the draw of ``(m, ...)`` for ``m < n``.
    """
    shape = tuple(np.atleast_1d(shape))
    u = rng.random(shape + (2,))
    u1 = 1.0 - u[..., 0]
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u[..., 1])


def random_unit_vectors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Isotropic draws on the complex unit sphere, shape ``(count, dim)``."""
    z = complex_normal(rng, (count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Scenario:
    """Channels, noise power and relay power budget of one network instance."""

    n_pairs: int
    n_antennas: int
    channels: np.ndarray
    sigma2: float
    power_budget: float
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.n_pairs) < 1 or int(self.n_antennas) < 1:
            raise ValidationError("n_pairs and n_antennas must be positive")
        ch = np.array(self.channels, dtype=np.complex128)
        expected = (self.n_pairs, 2, self.n_antennas)
        if ch.shape != expected:
            raise ValidationError(f"channels have shape {ch.shape}, expected {expected}")
        if not np.all(np.isfinite(ch)):
            raise ValidationError("channels contain non-finite entries")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2}")
        if not (np.isfinite(self.power_budget) and self.power_budget > 0):
            raise ValidationError(f"power_budget must be positive, got {self.power_budget}")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "power_budget", float(self.power_budget))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.n_pairs == other.n_pairs
            and self.n_antennas == other.n_antennas
            and self.sigma2 == other.sigma2
            and self.power_budget == other.power_budget
            and self.seed == other.seed
            and np.array_equal(self.channels, other.channels)
        )

    __hash__ = None

    def channel(self, i: int, k: int) -> np.ndarray:
        return self.channels[i, k]

    def norms2(self) -> np.ndarray:
        """Squared channel norms, shape ``(n_pairs, 2)``."""
        return np.sum(np.abs(self.channels) ** 2, axis=-1)

    @property
    def antenna_mismatch(self) -> bool:
        """True when the relay antenna count differs from the pair count."""
        return self.n_antennas != self.n_pairs

    @property
    def snr_db(self) -> float:
        return 10.0 * np.log10(self.power_budget / self.sigma2)

    def with_power(self, power_budget: float, sigma2: Optional[float] = None) -> "Scenario":
        return Scenario(self.n_pairs, self.n_antennas, self.channels,
                        self.sigma2 if sigma2 is None else sigma2,
                        power_budget, self.seed, dict(self.meta))

    def gains(self, beams: np.ndarray) -> np.ndarray:
        """``|h_(i,k)^H u_j|^2`` for beams ``u_j`` (rows), shape ``(N, 2, N_beams)``."""
        return np.abs(np.einsum("ika,ja->ikj", self.channels.conj(), beams)) ** 2


def generate_channels(n_pairs: int, n_antennas: int, sigma2: float,
                      power_budget: float, seed: int) -> Scenario:
    """Draw i.i.d. CN(0, 1) channels; a pure function of its arguments."""
    if n_pairs < 1 or n_antennas < 1:
        raise ValidationError("n_pairs and n_antennas must be >= 1")
    rng = substream(seed)
    h = complex_normal(rng, (n_pairs, 2, n_antennas))
    meta = {"antenna_mismatch": n_antennas != n_pairs}
    return Scenario(n_pairs, n_antennas, h, sigma2, power_budget, int(seed), meta)


def illustration_scenario(snr_db: float = 3.0, seed: int = 0) -> Scenario:
    """Two-pair, two-antenna scenario with the published squared channel norms.

    Only the norms are published; the directions come from ``seed`` and
    are marked as such in ``meta``.
    """
    rng = substream(seed)
    z = complex_normal(rng, (2, 2, 2))
    norms2 = np.array(ILLUSTRATION_NORMS2)
    h = z / np.linalg.norm(z, axis=-1, keepdims=True) * np.sqrt(norms2)[..., None]
    meta = {"directions": "seeded, not published", "norms2": norms2.tolist()}
    return Scenario(2, 2, h, 1.0, 10.0 ** (snr_db / 10.0), int(seed), meta)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------
def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def scenario_to_json(s: Scenario, extra: Optional[dict] = None) -> str:
    """Serialize with 17 significant digits so that every double round-trips.

    ``extra`` entries are appended as further top-level keys (sorted JSON);
    the reader ignores keys it does not know.
    """
    pairs = []
    for i in range(s.n_pairs):
        nodes = []
        for k in range(2):
            entries = ", ".join(f"[{_fmt(z.real)}, {_fmt(z.imag)}]" for z in s.channels[i, k])
            nodes.append(f"[{entries}]")
        pairs.append("    [" + ", ".join(nodes) + "]")
    seed = "null" if s.seed is None else str(int(s.seed))
    lines = [
        "{",
        f'  "n_pairs": {s.n_pairs},',
        f'  "n_antennas": {s.n_antennas},',
        f'  "sigma2": {_fmt(s.sigma2)},',
        f'  "power_budget": {_fmt(s.power_budget)},',
        f'  "seed": {seed},',
        '  "channels": [',
        ",\n".join(pairs),
        "  ]" + ("," if extra else ""),
    ]
    if extra:
        items = [f"  {json.dumps(k)}: {json.dumps(v, sort_keys=True)}" for k, v in extra.items()]
        lines.append(",\n".join(items))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _require(obj, key, kind):
    if key not in obj:
        raise ScenarioParseError(f"missing field '{key}'")
    val = obj[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ScenarioParseError(f"field '{key}' must be an integer, got {val!r}")
    if kind is float and (isinstance(val, bool) or not isinstance(val, (int, float))):
        raise ScenarioParseError(f"field '{key}' must be a number, got {val!r}")
    return val


def scenario_from_json(text: str) -> Scenario:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ScenarioParseError("top level must be a JSON object")
    n_pairs = _require(obj, "n_pairs", int)
    n_ant = _require(obj, "n_antennas", int)
    sigma2 = float(_require(obj, "sigma2", float))
    power = float(_require(obj, "power_budget", float))
    seed = obj.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ScenarioParseError(f"field 'seed' must be an integer or null, got {seed!r}")
    raw = _require(obj, "channels", list)
    if len(raw) != n_pairs:
        raise ScenarioParseError(f"field 'channels' has {len(raw)} pairs, expected {n_pairs}")
    h = np.empty((n_pairs, 2, n_ant), dtype=np.complex128)
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ScenarioParseError(f"channels[{i}] must list exactly 2 nodes")
        for k, vec in enumerate(pair):
            if not isinstance(vec, list) or len(vec) != n_ant:
                raise ScenarioParseError(f"channels[{i}][{k}] must have {n_ant} entries")
            for a, entry in enumerate(vec):
                ok = (isinstance(entry, list) and len(entry) == 2
                      and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                              for x in entry))
                if not ok:
                    raise ScenarioParseError(f"channels[{i}][{k}][{a}] must be [re, im]")
                h[i, k, a] = complex(float(entry[0]), float(entry[1]))
    try:
        return Scenario(n_pairs, n_ant, h, sigma2, power, seed,
                        {"antenna_mismatch": n_ant != n_pairs})
    except ValidationError as exc:
        raise ScenarioParseError(str(exc)) from exc


def write_scenario(s: Scenario, path, extra: Optional[dict] = None) -> None:
    Path(path).write_text(scenario_to_json(s, extra))


def read_scenario(path) -> Scenario:
    return scenario_from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# Hermitian eigen-decomposition
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class EigPair:
    eigenvalue: float
    eigenvector: np.ndarray


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol * max(1.0, np.max(np.abs(m))):
        raise ValidationError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return m


def real_embedding(m: np.ndarray) -> np.ndarray:
    """Real symmetric ``[[Re, -Im], [Im, Re]]`` of a Hermitian matrix."""
    a, b = m.real, m.imag
    return np.block([[a, -b], [b, a]])


def complex_from_embedding(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`real_embedding`, averaging the redundant blocks.

    Any real symmetric ``x`` maps to a Hermitian matrix.
    """
    n = x.shape[0] // 2
    a = 0.5 * (x[:n, :n] + x[n:, n:])
    b = 0.5 * (x[n:, :n] - x[:n, n:])
    q = a + 1j * b
    return 0.5 * (q + q.conj().T)


def eigh_hermitian(m: np.ndarray):
    """All eigenpairs of a Hermitian matrix, eigenvalues descending.

    Uses cyclic Jacobi on the real embedding, whose spectrum is that of
    ``m`` with every eigenvalue doubled; one vector per pair is kept by
    Gram-Schmidt against the complex span of the ones already taken.
    """
    m = check_hermitian(m)
    n = m.shape[0]
    if n > MAX_EIG_DIM:
        raise ValidationError(f"dimension {n} exceeds {MAX_EIG_DIM}")
    w, v, _ = kernels.jacobi_eigh(np.ascontiguousarray(real_embedding(m)))
    order = np.argsort(-w, kind="stable")
    vals, vecs = [], []
    for idx in order:
        z = v[:n, idx] + 1j * v[n:, idx]
        for u in vecs:
            z = z - u * np.vdot(u, z)
        nz = np.linalg.norm(z)
        if nz < 1e-3:
            continue
        vecs.append(z / nz)
        vals.append(w[idx])
        if len(vecs) == n:
            break
    return np.array(vals), np.column_stack(vecs)


def _phase_normalize(z: np.ndarray) -> np.ndarray:
    mag = np.abs(z)
    lead = int(np.flatnonzero(mag >= mag.max() - UNIT_NORM_TOL)[0])
    return z * (np.conj(z[lead]) / mag[lead])


def dominant_eigpair(m: np.ndarray) -> EigPair:
    """Largest eigenvalue of a Hermitian matrix and a unit eigenvector.

    When the top eigenvalue is repeated, the candidate whose largest
    component sits at the lowest index wins. The returned vector is scaled
    so that this component is real and positive.
    """
    vals, vecs = eigh_hermitian(m)
    lam = vals[0]
    tie = np.flatnonzero(vals >= lam - EIG_RESIDUAL_TOL * (1.0 + abs(lam)))
    best, best_key = None, None
    for idx in tie:
        z = vecs[:, idx]
        mag = np.abs(z)
        lead = int(np.flatnonzero(mag >= mag.max() - UNIT_NORM_TOL)[0])
        key = (lead, -mag[lead])
        if best_key is None or key < best_key:
            best, best_key = z, key
    u = _phase_normalize(best)
    return EigPair(float(lam), u / np.linalg.norm(u))
