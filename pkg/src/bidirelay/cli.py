"""Command-line front end.

Every file written by a command embeds the run configuration (including
the normalized argument list and the seed), so ``bidirelay rerun FILE``
reproduces it byte for byte when started from the same directory.
Timestamps only go to the optional ``--log`` sidecar.

Exit codes: 0 success, 2 infeasible, 3 invalid input, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (ILLUSTRATION_NORMS2, Scenario, ValidationError, generate_channels,
                   illustration_scenario, read_scenario, write_scenario)
from .power_duality import (CouplingSystem, InfeasibleError, build_coupling, counterexample,
                            duality_check, min_power_downlink, min_power_uplink, read_system)
from .precoding import linear_beamformers
from .rate_region import (random_beam_region, region_metrics, sweep_region, write_hull_csv,
                          write_region_csv, write_svg)
from .sdp_relax import build_sdp, rank1_extract, sdp_bisect_region, sdp_solve

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_SOLVER = 4

CONFIG_PREFIX = "bidirelay-config: "


class _Parser(argparse.ArgumentParser):
    """Usage errors are invalid input (exit 3), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    argv: list
    seed: int = 0
    scenario: Optional[str] = None
    pairs: Optional[int] = None
    antennas: Optional[int] = None
    snr_db: Optional[float] = None
    strategy: str = "dpc"
    beamformers: list = field(default_factory=list)
    t_grid: int = 21
    power_grid: int = 11
    samples: int = 1000
    mu_levels: int = 11
    eps: float = 0.01
    out: Optional[str] = None
    hull_out: Optional[str] = None
    format: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t_grid", "power_grid", "samples", "mu_levels"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name.replace('_', '-')} must be >= 1")
        for name in ("pairs", "antennas"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ValidationError(f"--{name} must be >= 1")
        if not self.eps > 0:
            raise ValidationError("--eps must be positive")

    @property
    def power(self) -> Optional[float]:
        """Budget for ``sigma2 = 1``."""
        return None if self.snr_db is None else float(10.0 ** (self.snr_db / 10.0))

    def to_dict(self) -> dict:
        return asdict(self)


def _config_line(cfg: RunConfig) -> str:
    return CONFIG_PREFIX + json.dumps(cfg.to_dict(), sort_keys=True)


def read_embedded_config(path) -> dict:
    """Recover the run configuration embedded in any output file."""
    text = Path(path).read_text()
    if CONFIG_PREFIX in text:
        start = text.index(CONFIG_PREFIX) + len(CONFIG_PREFIX)
        line = text[start:].splitlines()[0]
        if line.endswith("</desc>"):
            line = line[: -len("</desc>")]
        line = line.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
        return json.loads(line)
    obj = json.loads(text)
    if isinstance(obj, dict) and "config" in obj:
        return obj["config"]
    raise ValidationError(f"{path} carries no embedded run configuration")


def _dump_json(obj, path: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _finite(x):
    return x if np.isfinite(x) else None


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------
def _load_scenario(cfg: RunConfig) -> Scenario:
    if cfg.scenario:
        try:
            sc = read_scenario(cfg.scenario)
        except OSError as exc:
            raise ValidationError(f"cannot read scenario: {exc}") from exc
        if cfg.snr_db is not None:
            sc = sc.with_power(cfg.power, 1.0)
        return sc
    if cfg.pairs is None or cfg.antennas is None:
        raise ValidationError("give --scenario or both --pairs and --antennas")
    snr = 3.0 if cfg.snr_db is None else cfg.snr_db
    return generate_channels(cfg.pairs, cfg.antennas, 1.0, 10.0 ** (snr / 10.0), cfg.seed)


def _parse_floats(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise ValidationError(f"--{name} must be comma-separated numbers") from exc


def _parse_gamma(text: str, n: int) -> np.ndarray:
    vals = _parse_floats(text, "gamma")
    if vals.size == 1:
        return np.full((n, 2), vals[0])
    if vals.size == n:
        return np.column_stack([vals, vals])
    if vals.size == 2 * n:
        return vals.reshape(n, 2)
    raise ValidationError(f"--gamma needs 1, {n} or {2 * n} values, got {vals.size}")


def _parse_order(text: Optional[str], n: int):
    if text is None:
        return None
    try:
        order = [int(x) - 1 for x in text.split("-")]
    except ValueError as exc:
        raise ValidationError("--order must look like 2-1 (1-based pair indices)") from exc
    if sorted(order) != list(range(n)):
        raise ValidationError(f"--order must be a permutation of 1..{n}")
    return order


def _fixed_beam_system(cfg: RunConfig):
    """Coupling system of the single-pair blend beams for scenario + targets."""
    sc = _load_scenario(cfg)
    gamma = _parse_gamma(cfg.extra["gamma"], sc.n_pairs)
    order = _parse_order(cfg.extra.get("order"), sc.n_pairs)
    if cfg.strategy == "dpc" and order is None:
        order = list(range(sc.n_pairs))
    U = linear_beamformers(sc, np.ones(sc.n_pairs), cfg.extra["t"])
    return sc, build_coupling(sc, U, gamma, order if cfg.strategy == "dpc" else None)


def _load_system(cfg: RunConfig):
    if cfg.extra.get("builtin_counterexample"):
        return None, counterexample()
    if cfg.extra.get("instance"):
        try:
            return None, read_system(cfg.extra["instance"])
        except OSError as exc:
            raise ValidationError(f"cannot read instance: {exc}") from exc
    if cfg.extra.get("gamma") is None:
        raise ValidationError("give --builtin-counterexample, --instance, or a scenario with --gamma")
    return _fixed_beam_system(cfg)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def cmd_gen_scenario(cfg: RunConfig) -> int:
    snr = 3.0 if cfg.snr_db is None else cfg.snr_db
    if cfg.extra.get("illustration"):
        if (cfg.pairs, cfg.antennas) not in ((None, None), (2, 2)):
            raise ValidationError("the illustration scenario has 2 pairs and 2 antennas")
        sc = illustration_scenario(snr, cfg.seed)
    else:
        if cfg.pairs is None or cfg.antennas is None:
            raise ValidationError("--pairs and --antennas are required")
        sc = generate_channels(cfg.pairs, cfg.antennas, 1.0, 10.0 ** (snr / 10.0), cfg.seed)
    write_scenario(sc, cfg.out, {"config": cfg.to_dict()})
    norms = sc.norms2()
    for i in range(sc.n_pairs):
        for k in range(2):
            line = f"||h_({i + 1},{k + 1})||^2 = {norms[i, k]:.17g}"
            if cfg.extra.get("illustration"):
                line += f"  (published {ILLUSTRATION_NORMS2[i][k]})"
            print(line)
    return EXIT_OK


def _region(cfg: RunConfig, sc: Scenario, beamformer: str):
    if beamformer == "single-pair":
        return sweep_region(sc, cfg.strategy, cfg.t_grid, cfg.power_grid)
    if beamformer == "random":
        return random_beam_region(sc, cfg.strategy, cfg.samples, cfg.seed, cfg.power_grid)
    if beamformer == "sdp-bisect":
        if sc.n_pairs > 4 and cfg.strategy == "dpc":
            raise ValidationError("sdp-bisect with dpc supports at most 4 pairs")
        return sdp_bisect_region(sc, cfg.strategy, cfg.mu_levels, cfg.eps)
    raise ValidationError(f"unknown beamformer {beamformer!r}")


def _summary(name, region) -> dict:
    out = {"beamformer": name, "strategy": region.strategy, "n_points": len(region),
           "max_sum_rate": region.max_sum_rate()}
    if region.n_pairs >= 2:
        out["area"] = region.area()
        out["hull"] = region.hull.tolist()
    else:
        out["max_rate"] = float(region.rates[:, 0].max())
    return out


def cmd_rate_region(cfg: RunConfig) -> int:
    sc = _load_scenario(cfg)
    names = cfg.beamformers or ["single-pair"]
    regions = [_region(cfg, sc, b) for b in names]
    fmt = cfg.format or "csv"
    summaries = [_summary(b, r) for b, r in zip(names, regions)]
    report = {"config": cfg.to_dict(), "seed": cfg.seed, "snr_db": sc.snr_db,
              "regions": summaries}
    if len(regions) >= 2 and sc.n_pairs >= 2:
        m = region_metrics(regions[0], regions[1])
        report["metrics"] = {f"{names[0]}/{names[1]}": m}
    comment = _config_line(cfg)
    if fmt == "csv":
        _write_regions_csv(regions, cfg.out, comment)
    elif fmt == "json":
        _dump_json(report, cfg.out)
    elif fmt == "svg":
        if sc.n_pairs < 2:
            raise ValidationError("svg plots need at least two pairs")
        title = f"SNR = {sc.snr_db:.4g} dB, {cfg.strategy}"
        write_svg(regions, cfg.out, names, title, comment=comment)
    if cfg.hull_out:
        if sc.n_pairs < 2:
            raise ValidationError("hulls need at least two pairs")
        write_hull_csv(regions[0], cfg.hull_out, comment)
    if fmt != "json" or cfg.out:
        summary = {"regions": [{k: v for k, v in s.items() if k != "hull"} for s in summaries]}
        if "metrics" in report:
            summary["metrics"] = report["metrics"]
        _dump_json(summary, None)
    return EXIT_OK


def _write_regions_csv(regions, path, comment):
    if len(regions) == 1:
        write_region_csv(regions[0], path, comment)
        return
    # one file; rows of later regions follow without repeating the header
    parts = []
    for r in regions:
        write_region_csv(r, path)
        lines = Path(path).read_text().splitlines(keepends=True)
        parts.append(lines if not parts else lines[1:])
    Path(path).write_text(f"# {comment}\n" + "".join(line for p in parts for line in p))


def cmd_sdp_region(cfg: RunConfig) -> int:
    cfg.beamformers = ["sdp-bisect"]
    return cmd_rate_region(cfg)


def _infeasible_report(cfg, exc: InfeasibleError, label: str) -> dict:
    res = exc.result
    cert = {"reason": str(exc)}
    if res is not None:
        cert.update(iterations=res.iterations, growth=res.growth,
                    last_iterate=res.power.tolist(), last_total=_finite(res.total))
    return {"config": cfg.to_dict(), "seed": cfg.seed, "status": "infeasible",
            "stage": label, "certificate": cert}


def _spectral(sys_: CouplingSystem) -> list:
    return [sys_.spectral_radius(k) for k in range(sys_.V.shape[0])]


def cmd_power_min(cfg: RunConfig) -> int:
    method = cfg.extra.get("method", "fixed")
    if method == "sdp":
        return _power_min_sdp(cfg)
    sc, sys_ = _load_system(cfg)
    report = {"config": cfg.to_dict(), "seed": cfg.seed, "method": "fixed-beams",
              "spectral_radius": _spectral(sys_)}
    try:
        report["downlink"] = min_power_downlink(sys_).to_dict()
        report["uplink"] = min_power_uplink(sys_).to_dict()
    except InfeasibleError as exc:
        _dump_json(_infeasible_report(cfg, exc, "fixed-point"), cfg.out)
        return EXIT_INFEASIBLE
    if sc is not None:
        report["power_budget"] = sc.power_budget
        report["within_budget"] = report["downlink"]["total"] <= sc.power_budget
    report["status"] = "optimal"
    _dump_json(report, cfg.out)
    return EXIT_OK


def _power_min_sdp(cfg: RunConfig) -> int:
    if cfg.extra.get("gamma") is None:
        raise ValidationError("--method sdp needs a scenario and --gamma")
    sc = _load_scenario(cfg)
    gamma = _parse_gamma(cfg.extra["gamma"], sc.n_pairs)
    order = _parse_order(cfg.extra.get("order"), sc.n_pairs)
    if cfg.strategy == "dpc" and order is None:
        order = list(range(sc.n_pairs))
    prob = build_sdp(sc, gamma, cfg.strategy, order if cfg.strategy == "dpc" else None)
    sol = sdp_solve(prob)
    report = {"config": cfg.to_dict(), "seed": cfg.seed, "method": "sdp", "sdp": sol.to_dict()}
    if sol.status == "infeasible":
        report["status"] = "infeasible"
        _dump_json(report, cfg.out)
        return EXIT_INFEASIBLE
    if sol.status != "optimal":
        report["status"] = sol.status
        _dump_json(report, cfg.out)
        return EXIT_SOLVER
    r1 = rank1_extract(sol)
    report["rank1"] = r1.to_dict()
    report["rank1"]["repaired_total"] = _finite(r1.repaired_total)
    report["status"] = "optimal"
    report["power_budget"] = sc.power_budget
    _dump_json(report, cfg.out)
    return EXIT_OK


def cmd_duality_check(cfg: RunConfig) -> int:
    _, sys_ = _load_system(cfg)
    try:
        rep = duality_check(sys_)
    except InfeasibleError as exc:
        _dump_json(_infeasible_report(cfg, exc, "duality"), cfg.out)
        return EXIT_INFEASIBLE
    report = {"config": cfg.to_dict(), "seed": cfg.seed, "status": "optimal",
              "spectral_radius": _spectral(sys_)}
    report.update(rep.to_dict())
    _dump_json(report, cfg.out)
    return EXIT_OK


COMMANDS = {
    "gen-scenario": cmd_gen_scenario,
    "rate-region": cmd_rate_region,
    "sdp-region": cmd_sdp_region,
    "power-min": cmd_power_min,
    "duality-check": cmd_duality_check,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------
def _add_scenario_args(p, out_required=False):
    p.add_argument("--scenario", help="scenario JSON (from gen-scenario)")
    p.add_argument("--pairs", type=int, help="generate a scenario with this many pairs")
    p.add_argument("--antennas", type=int, help="relay antennas of a generated scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-db", type=float, help="sets P = 10^(SNR/10) with sigma2 = 1")
    p.add_argument("--out", required=out_required)
    p.add_argument("--log", help="sidecar log file (timestamps and runtime)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bidirelay", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-scenario", help="draw a random channel scenario")
    _add_scenario_args(p, out_required=True)
    p.add_argument("--illustration", action="store_true",
                   help="2x2 scenario with the published illustration norms")

    for name, help_ in (("rate-region", "sweep or sample a rate region"),
                        ("sdp-region", "rate region from relaxation plus bisection")):
        p = sub.add_parser(name, help=help_)
        _add_scenario_args(p, out_required=True)
        p.add_argument("--strategy", choices=("linear", "dpc"), default="dpc")
        if name == "rate-region":
            p.add_argument("--beamformer", action="append",
                           choices=("single-pair", "random", "sdp-bisect"),
                           help="repeat to overlay several runs (default single-pair)")
        p.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
        p.add_argument("--t-grid", type=int, default=21)
        p.add_argument("--power-grid", type=int, default=11)
        p.add_argument("--samples", type=int, default=1000)
        p.add_argument("--mu-levels", type=int, default=11)
        p.add_argument("--eps", type=float, default=0.01)
        p.add_argument("--hull-out", help="also write the first region's hull as CSV")

    for name, help_ in (("power-min", "minimum power for SINR targets"),
                        ("duality-check", "downlink vs dual uplink minimum power")):
        p = sub.add_parser(name, help=help_)
        _add_scenario_args(p)
        p.add_argument("--builtin-counterexample", action="store_true")
        p.add_argument("--instance", help="coupling instance JSON")
        p.add_argument("--gamma", help="SINR targets: one value, one per pair, or two per pair")
        p.add_argument("--t", type=float, default=0.5, help="blend weight of the fixed beams")
        p.add_argument("--strategy", choices=("linear", "dpc"), default="linear")
        p.add_argument("--order", help="DPC encoding order, e.g. 2-1")
        if name == "power-min":
            p.add_argument("--method", choices=("fixed", "sdp"), default="fixed")

    p = sub.add_parser("rerun", help="repeat the run embedded in an output file")
    p.add_argument("file")
    return parser


_CFG_FIELDS = ("seed", "scenario", "pairs", "antennas", "snr_db", "strategy", "t_grid",
               "power_grid", "samples", "mu_levels", "eps", "out", "hull_out", "format")


def _to_config(args, argv) -> RunConfig:
    ns = vars(args).copy()
    command = ns.pop("command")
    ns.pop("log", None)
    kw = {k: ns.pop(k) for k in _CFG_FIELDS if k in ns}
    beamformers = ns.pop("beamformer", None) or []
    return RunConfig(command, list(argv), beamformers=list(beamformers), extra=ns, **kw)


def _strip_log(argv):
    """The sidecar log is not part of the run; drop it from the stored arguments."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a == "--log":
            skip = True
        elif not a.startswith("--log="):
            out.append(a)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "rerun":
        try:
            cfg = read_embedded_config(args.file)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        return main(cfg["argv"])
    start = time.time()
    try:
        cfg = _to_config(args, _strip_log(argv))
        code = COMMANDS[args.command](cfg)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        code = EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        code = EXIT_INVALID
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    if getattr(args, "log", None):
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(start))
        with open(args.log, "a") as fh:
            fh.write(f"{stamp} {args.command} exit={code} "
                     f"elapsed={time.time() - start:.3f}s argv={json.dumps(argv)}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
