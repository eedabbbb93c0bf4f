"""Rate-region enumeration, hulls and region comparison.

A region is the set of per-pair sum-rate vectors reached by a family of
beams, power splits on the simplex ``sum p_i = P`` and, for DPC, encoding
orders. Hulls and areas use the two-pair projection (pairs 0 and 1). The
achievable region is closed under lowering any coordinate toward zero
(time sharing with silence), so area and containment use the hull of the
points together with the origin and their axis feet.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import Scenario, ValidationError, random_unit_vectors, substream
from .precoding import check_order, single_pair_beamformer

DEFAULT_T_GRID = 33
DEFAULT_POWER_GRID = 33
MAX_FULL_PERMUTATION = 6
HULL_SLACK = 1e-9


@dataclass(frozen=True)
class RatePoint:
    rates: np.ndarray
    strategy: str
    order: Optional[tuple]
    powers: np.ndarray
    t: Optional[np.ndarray] = None
    beams: Optional[np.ndarray] = None
    sample: Optional[int] = None


@dataclass
class RateRegion:
    """Points of a swept or sampled region.

    With the default ``"grid"`` layout point ``idx`` sits at ``(s, r, o) =
    unravel(idx, (n_beam_sets, n_powers, n_orders))``: beam set ``s`` (a
    t-tuple or a random draw), power split ``r`` and order ``o``. With
    ``"list"`` every array is indexed by the point itself.
    """

    strategy: str
    rates: np.ndarray  # (n_points, N)
    powers: np.ndarray  # (n_powers, N)
    orders: list
    beams: np.ndarray  # (n_beam_sets, N, M)
    t_values: Optional[np.ndarray] = None  # (n_beam_sets, N) for sweeps
    meta: dict = field(default_factory=dict)
    layout: str = "grid"
    labels: Optional[list] = None
    _hull: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return self.rates.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.rates.shape[1]

    @property
    def grid_shape(self):
        return (self.beams.shape[0], self.powers.shape[0], len(self.orders))

    def point(self, idx: int) -> RatePoint:
        if self.layout == "list":
            s = r = o = idx
        else:
            s, r, o = np.unravel_index(idx, self.grid_shape)
        return RatePoint(
            rates=self.rates[idx],
            strategy=self.strategy,
            order=self.orders[o],
            powers=self.powers[r],
            t=None if self.t_values is None else self.t_values[s],
            beams=self.beams[s],
            sample=None if self.t_values is not None else int(s),
        )

    def projection(self) -> np.ndarray:
        if self.n_pairs < 2:
            raise ValidationError("hulls need at least two pairs")
        return self.rates[:, :2]

    @property
    def hull(self) -> np.ndarray:
        """Counter-clockwise vertices of the closed two-pair region."""
        if self._hull is None:
            self._hull = comprehensive_hull(self.projection())
        return self._hull

    def area(self) -> float:
        return polygon_area(self.hull)

    def max_sum_rate(self) -> float:
        return float(self.rates.sum(axis=1).max())


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------
def simplex_grid(n: int, levels: int, total: float) -> np.ndarray:
    """All splits ``total * c / (levels - 1)`` with integer ``c >= 0`` summing to ``levels - 1``."""
    if levels < 2:
        raise ValidationError("power grid needs at least 2 levels")
    steps = levels - 1
    rows = [c for c in itertools.product(range(steps + 1), repeat=n - 1) if sum(c) <= steps]
    grid = np.array([list(c) + [steps - sum(c)] for c in rows], dtype=float)
    return total * grid / steps


def _resolve_orders(n, strategy, orders):
    if strategy == "linear":
        return [None]
    if strategy != "dpc":
        raise ValidationError(f"unknown strategy {strategy!r}")
    if orders is None:
        if n > MAX_FULL_PERMUTATION:
            raise ValidationError(
                f"full permutation sweep over {n} pairs is too large; pass explicit orders")
        return list(itertools.permutations(range(n)))
    return [check_order(o, n) for o in orders]


def _evaluate(scenario, beams, powers, orders, strategy, chunk=4096):
    """Rates for every (beam set, power, order), flattened in that nesting order."""
    n = scenario.n_pairs
    order_arr = np.array([o if o is not None else tuple(range(n)) for o in orders],
                         dtype=np.int64)
    out = []
    hc = scenario.channels.conj()
    for start in range(0, beams.shape[0], chunk):
        b = beams[start:start + chunk]
        gains = np.abs(np.einsum("ika,sja->sikj", hc, b)) ** 2
        rates = kernels.pair_rates(np.ascontiguousarray(gains), np.ascontiguousarray(powers),
                                   order_arr, scenario.sigma2, strategy == "dpc")
        out.append(np.asarray(rates).reshape(-1, n))
    return np.concatenate(out, axis=0)


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------
def sweep_region(scenario: Scenario, strategy: str = "dpc", t_grid: int = DEFAULT_T_GRID,
                 power_grid: int = DEFAULT_POWER_GRID,
                 orders: Optional[Sequence] = None) -> RateRegion:
    """Region of the single-pair blend beams over a grid of mixing weights and powers."""
    if t_grid < 2:
        raise ValidationError("t grid needs at least 2 points")
    n = scenario.n_pairs
    orders = _resolve_orders(n, strategy, orders)
    t = np.linspace(0.0, 1.0, t_grid)
    h = scenario.channels
    per_pair = np.array([[single_pair_beamformer(h[i, 0], h[i, 1], tt) for tt in t]
                         for i in range(n)])  # (N, T, M)
    idx = np.array(list(itertools.product(range(t_grid), repeat=n)))  # (S, N)
    beams = per_pair[np.arange(n)[None, :], idx]  # (S, N, M)
    powers = simplex_grid(n, power_grid, scenario.power_budget)
    rates = _evaluate(scenario, beams, powers, orders, strategy)
    meta = {"t_grid": t_grid, "power_grid": power_grid, "closure": "origin+axis-feet",
            "method": "single-pair"}
    return RateRegion(strategy, rates, powers, orders, beams, t[idx], meta)


def random_beam_region(scenario: Scenario, strategy: str = "dpc", n_samples: int = 10_000,
                       seed: int = 0, power_grid: int = DEFAULT_POWER_GRID,
                       orders: Optional[Sequence] = None,
                       beams: Optional[np.ndarray] = None) -> RateRegion:
    """Region of isotropic random beam sets, one unit beam per pair per sample.

    Sample ``s`` uses the same draws whatever ``n_samples`` is, so a longer
    run extends a shorter one with the same seed. Passing ``beams`` of
    shape ``(S, N, M)`` replaces the draws.
    """
    n, m = scenario.n_pairs, scenario.n_antennas
    orders = _resolve_orders(n, strategy, orders)
    if beams is None:
        if n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        beams = random_unit_vectors(substream(seed), n_samples * n, m).reshape(n_samples, n, m)
    else:
        beams = np.asarray(beams, dtype=np.complex128)
        if beams.ndim != 3 or beams.shape[1:] != (n, m):
            raise ValidationError(f"beams must have shape (S, {n}, {m})")
    powers = simplex_grid(n, power_grid, scenario.power_budget)
    rates = _evaluate(scenario, beams, powers, orders, strategy)
    meta = {"n_samples": beams.shape[0], "seed": seed, "power_grid": power_grid,
            "closure": "origin+axis-feet", "method": "random"}
    return RateRegion(strategy, rates, powers, orders, beams, None, meta)


# ---------------------------------------------------------------------------
# Hulls
# ---------------------------------------------------------------------------
def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points) -> np.ndarray:
    """Counter-clockwise hull vertices (monotone chain), collinear points dropped.

    The first vertex is the lexicographically smallest ``(x, y)``.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    P = [tuple(p) for p in pts]
    lower, upper = [], []
    for p in P:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(P):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) == 2 and np.allclose(hull[0], hull[1]):
        return hull[:1]
    return hull


def pareto_front(points) -> np.ndarray:
    """Points not weakly dominated in both coordinates, sorted by decreasing x."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    pts = pts[order]
    best_prev = np.concatenate([[-np.inf], np.maximum.accumulate(pts[:, 1])[:-1]])
    return pts[pts[:, 1] > best_prev]


def comprehensive_hull(points) -> np.ndarray:
    """Hull of the points, the origin and the axis feet of every point."""
    front = pareto_front(points)
    xmax = front[:, 0].max()
    ymax = front[:, 1].max()
    aug = np.vstack([front, [[0.0, 0.0], [xmax, 0.0], [0.0, ymax]]])
    return convex_hull_2d(aug)


def polygon_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def hull_violation(hull, points) -> float:
    """Largest distance by which any point lies outside a CCW hull (0 if inside)."""
    hull = np.asarray(hull, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(hull) < 3:
        raise ValidationError("containment needs a hull with positive area")
    a = hull
    b = np.roll(hull, -1, axis=0)
    edge = b - a
    length = np.linalg.norm(edge, axis=1)
    # signed distance to the left of every edge; outside means negative
    d = (edge[None, :, 0] * (pts[:, None, 1] - a[None, :, 1])
         - edge[None, :, 1] * (pts[:, None, 0] - a[None, :, 0])) / length[None, :]
    return float(max(0.0, -d.min()))


def region_contains(outer: RateRegion, inner: RateRegion, slack: float = HULL_SLACK) -> bool:
    return hull_violation(outer.hull, inner.hull) <= slack


def region_metrics(a: RateRegion, b: RateRegion) -> dict:
    if a.n_pairs != b.n_pairs or a.n_pairs < 2:
        raise ValidationError("regions must share a pair count of at least two")
    area_a, area_b = a.area(), b.area()
    return {
        "area_a": area_a,
        "area_b": area_b,
        "area_ratio": area_a / area_b if area_b > 0 else math.nan,
        "max_sum_rate_a": a.max_sum_rate(),
        "max_sum_rate_b": b.max_sum_rate(),
    }


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------
def _join(values, fmt="{:.17g}"):
    return ";".join(fmt.format(v) for v in values)


def write_region_csv(region: RateRegion, path, comment: Optional[str] = None) -> None:
    """One row per point; ``comment`` goes first as a ``#`` line when given."""
    n = region.n_pairs
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["strategy", "order", "t_params", "powers"]
                   + [f"R_pair_{i + 1}" for i in range(n)])
        for idx in range(len(region)):
            pt = region.point(idx)
            order = "" if pt.order is None else "-".join(str(i + 1) for i in pt.order)
            if region.labels is not None:
                tp = region.labels[idx]
            elif pt.t is not None:
                tp = _join(pt.t)
            else:
                tp = f"random:{pt.sample}"
            w.writerow([region.strategy, order, tp, _join(pt.powers)]
                       + [format(x, ".17g") for x in pt.rates])


def write_hull_csv(region: RateRegion, path, comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["hull_x", "hull_y"])
        for x, y in region.hull:
            w.writerow([format(x, ".17g"), format(y, ".17g")])


def read_region_csv(path) -> tuple:
    """Return ``(header, rows)`` of a region CSV with rates parsed as floats."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    header, body = rows[0], rows[1:]
    return header, [r[:4] + [float(x) for x in r[4:]] for r in body]


def _xml_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def write_svg(regions: Sequence[RateRegion], path, labels: Sequence[str] = (),
              title: str = "", max_points: int = 3000, comment: str = "") -> None:
    """Static scatter of each region's points with its hull polyline."""
    W, H, pad = 640, 480, 60
    xmax = max(r.hull[:, 0].max() for r in regions) * 1.05 or 1.0
    ymax = max(r.hull[:, 1].max() for r in regions) * 1.05 or 1.0
    sx = lambda x: pad + (W - 2 * pad) * x / xmax
    sy = lambda y: H - pad - (H - 2 * pad) * y / ymax
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">',
             f'<desc>{_xml_escape(comment)}</desc>',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{H - pad}" x2="{pad}" y2="{pad}" stroke="black"/>',
             f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="14">'
             'Sum-Rate Pair 1</text>',
             f'<text x="18" y="{H / 2}" text-anchor="middle" font-size="14" '
             f'transform="rotate(-90 18 {H / 2})">Sum-Rate Pair 2</text>']
    if title:
        parts.append(f'<text x="{W / 2}" y="25" text-anchor="middle" font-size="15">{title}</text>')
    for tick in range(6):
        x, y = xmax * tick / 5, ymax * tick / 5
        parts.append(f'<text x="{sx(x):.1f}" y="{H - pad + 18}" text-anchor="middle" '
                     f'font-size="11">{x:.2f}</text>')
        parts.append(f'<text x="{pad - 6}" y="{sy(y) + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{y:.2f}</text>')
    for ridx, region in enumerate(regions):
        color = _COLORS[ridx % len(_COLORS)]
        pts = region.projection()
        if len(pts) > max_points:
            pts = pts[np.linspace(0, len(pts) - 1, max_points).astype(int)]
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="1" '
                         f'fill="{color}" fill-opacity="0.3"/>')
        hull = np.vstack([region.hull, region.hull[:1]])
        poly = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in hull)
        parts.append(f'<polyline points="{poly}" fill="none" stroke="{color}" stroke-width="2"/>')
        label = labels[ridx] if ridx < len(labels) else f"{region.strategy} {region.meta.get('method', '')}"
        parts.append(f'<text x="{W - pad - 5}" y="{pad + 18 * ridx}" text-anchor="end" '
                     f'font-size="12" fill="{color}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
