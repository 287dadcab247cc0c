"""Sweep orchestration: config handling, per-point pipelines, CSV output.

Every run is reproducible from (spec, seed): the pipeline derives all
sub-seeds from the point seed, and output files are written once per run
and merged in sorted key order, so repeated sweeps produce byte-identical
CSVs.
"""

from __future__ import annotations

import concurrent.futures
import configparser
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import geometry
from .engine import EngineConfig, RunMetrics, run, throughput_summary
from .errors import ConfigurationError, RoutingError
from .links import RadioParams, filter_model_params, make_link_model
from .routing import Route, build_route, pick_connections
from .scheduling import (
    DEFAULT_CONFLICT_MULTIPLIER,
    Schedule,
    build_conservative_schedule,
    build_schedule,
)
from .tessellation import (
    Deployment,
    Tessellation,
    build_tessellation,
    deploy,
    min_cell_occupancy,
    rho_for_n,
)
from .verification import (
    VerificationReport,
    check_consecutive_short_hops,
    check_hop_count,
    check_interferer_proximity,
    check_short_hops,
    check_sinr_bounded_fraction,
    compute_bounds,
    delivery_prediction,
)

CONNECTIONS_SCHEMA = "connections_v1"
SUMMARY_SCHEMA = "summary_v1"
_SEED_STRIDE = 1_000_003  # sub-seed separation between pipeline stages


@dataclass(frozen=True)
class ExperimentSpec:
    n_values: tuple[int, ...] = (250, 500, 1000, 2000, 4000)
    seeds: tuple[int, ...] = tuple(range(10))
    area_constant: float = 1.2
    radio: RadioParams = RadioParams()
    link_model_name: str = "logistic"
    link_model_params: tuple[tuple[str, float], ...] = ()
    schedule_regime: str = "fixed"
    schedule_delta: float = DEFAULT_CONFLICT_MULTIPLIER
    schedule_growth: str = "log"
    routing_strategy: str = "straight_line"
    relay_mode: str = "nearest_center"
    on_empty_cell: str = "reject_deployment"
    max_redeploys: int = 50
    engine: EngineConfig = EngineConfig()
    out_dir: str = "runs"
    workers: int = 1
    track_connections: int | None = None  # limit injected sources; None = all

    def link_model(self):
        return make_link_model(self.link_model_name, **dict(self.link_model_params))


def prepare_instance(
    n: int,
    seed: int,
    area_constant: float,
    on_empty_cell: str = "reject_deployment",
    max_redeploys: int = 50,
) -> tuple[Deployment, Tessellation]:
    """Deploy and tessellate; under ``reject_deployment`` resample the seed
    until no cell is empty (the large-n regime guarantees occupancy only with
    high probability, so desk-scale runs occasionally redraw)."""
    rho = rho_for_n(n, area_constant)
    attempts = max_redeploys if on_empty_cell == "reject_deployment" else 1
    for k in range(attempts):
        dep = deploy(n, seed + k * _SEED_STRIDE)
        tess = build_tessellation(dep, rho, seed + k * _SEED_STRIDE + 1)
        if min_cell_occupancy(tess, dep) > 0 or on_empty_cell != "reject_deployment":
            return dep, tess
    raise ConfigurationError(
        f"no fully occupied deployment in {max_redeploys} redraws at n={n}; "
        "raise area_constant or allow error_on_route"
    )


def make_schedule(spec: ExperimentSpec, tess: Tessellation, n: int, seed: int) -> Schedule:
    if spec.schedule_regime == "fixed":
        return build_schedule(tess, delta=spec.schedule_delta, seed=seed)
    if spec.schedule_regime == "conservative":
        return build_conservative_schedule(tess, n, spec.schedule_growth, seed=seed)
    raise ConfigurationError(f"unknown schedule regime {spec.schedule_regime!r}")


@dataclass
class PointResult:
    n: int
    seed: int
    rho_n: float
    num_cells: int
    schedule_length: int
    metrics: RunMetrics
    routes: list[Route]
    report: VerificationReport
    min_occupancy: int
    hard_invariants_ok: bool
    error: str | None = None


def run_point(spec: ExperimentSpec, n: int, seed: int) -> PointResult:
    dep, tess = prepare_instance(
        n, seed, spec.area_constant, spec.on_empty_cell, spec.max_redeploys
    )
    schedule = make_schedule(spec, tess, n, seed + 2 * _SEED_STRIDE)
    connections = pick_connections(dep, seed + 3 * _SEED_STRIDE)
    if spec.track_connections is not None:
        connections = connections[: spec.track_connections]
    routes = [
        build_route(
            c, dep, tess,
            strategy=spec.routing_strategy,
            seed=seed + 4 * _SEED_STRIDE + c.id,
            relay_mode=spec.relay_mode,
            on_empty_cell=spec.on_empty_cell,
        )
        for c in connections
    ]
    cfg = replace(spec.engine, seed=seed + 5 * _SEED_STRIDE)
    metrics = run(dep, tess, schedule, routes, spec.link_model(), spec.radio, cfg)

    report = VerificationReport()
    straight = spec.routing_strategy == "straight_line"
    bounds = compute_bounds(alpha=spec.radio.alpha, c1=schedule.num_colors - 1)
    for r in routes:
        if straight:
            report.records.append(check_hop_count(r, tess.rho_n))
            report.records.append(check_short_hops(r, tess.rho_n, bounds.t0))
        report.records.append(check_consecutive_short_hops(r, tess.rho_n))
    if metrics.saturated:
        report.extend(
            check_interferer_proximity(
                metrics, routes,
                m=bounds.m0 if straight else bounds.m0_arbitrary,
                schedule_length=schedule.num_colors,
                rho_n=tess.rho_n,
                use_path_length=not straight,
            )
        )
        report.extend(
            check_sinr_bounded_fraction(
                metrics, routes, bounds, tess.rho_n, arbitrary=not straight
            )
        )
    report.extend(delivery_prediction(metrics, routes, spec.link_model(), cfg.attempts_per_hop))

    hard_ids = {"hop_count", "consecutive_short_hops"}
    hard_ok = all(r.passed for r in report.records if r.check_id in hard_ids)
    return PointResult(
        n=n,
        seed=seed,
        rho_n=tess.rho_n,
        num_cells=tess.num_cells,
        schedule_length=schedule.num_colors,
        metrics=metrics,
        routes=routes,
        report=report,
        min_occupancy=min_cell_occupancy(tess, dep),
        hard_invariants_ok=hard_ok,
    )


def _run_point_task(args) -> PointResult:
    spec, n, seed = args
    try:
        return run_point(spec, n, seed)
    except (ConfigurationError, RoutingError) as exc:
        return PointResult(
            n=n, seed=seed, rho_n=float("nan"), num_cells=0, schedule_length=0,
            metrics=None, routes=[], report=VerificationReport(), min_occupancy=0,
            hard_invariants_ok=False, error=str(exc),
        )


def connection_rows(res: PointResult) -> list[str]:
    rows = []
    m = res.metrics
    delivery = m.delivery_probability()
    by_conn = {r.connection_id: r for r in res.routes}
    for k, cid in enumerate(m.connection_ids):
        r = by_conn[int(cid)]
        lam_i = float(m.injected[k]) / m.slots
        dp = float(delivery[k])
        rows.append(
            f"{res.n},{res.seed},{res.rho_n!r},{res.schedule_length},{int(cid)},"
            f"{r.length!r},{r.path_length!r},{r.hop_count},{lam_i!r},"
            f"{int(m.injected[k])},{int(m.delivered[k])},{int(m.dropped[k])},"
            f"{int(m.in_flight[k])},{'' if math.isnan(dp) else repr(float(dp))}"
        )
    return rows


def summary_row(res: PointResult, tess_summary) -> str:
    m = res.metrics
    mean_h = float(np.mean([r.hop_count for r in res.routes])) if res.routes else 0.0
    return (
        f"{res.n},{res.seed},{res.rho_n!r},{res.num_cells},{res.schedule_length},"
        f"{m.lambda_realized!r},{m.throughput!r},{int(m.injected.sum())},"
        f"{int(m.delivered.sum())},{int(m.dropped.sum())},{int(m.in_flight.sum())},"
        f"{res.min_occupancy},{mean_h!r},{tess_summary.injection_ceiling!r},"
        f"{tess_summary.occupancy_rate_bound!r},{int(res.hard_invariants_ok)}"
    )


def run_sweep(spec: ExperimentSpec) -> bool:
    """Run the grid; emit CSVs; True iff every hard invariant held everywhere."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = [(spec, n, seed) for n in spec.n_values for seed in spec.seeds]
    if spec.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_point_task, points))
    else:
        results = [_run_point_task(p) for p in points]
    results.sort(key=lambda r: (r.n, r.seed))

    conn_lines = [f"# schema={CONNECTIONS_SCHEMA}",
                  "n,seed,rho_n,K,conn_id,L,L_hat,H,lambda_i,injected,delivered,"
                  "dropped,in_flight,delivery_prob"]
    summary_lines = [f"# schema={SUMMARY_SCHEMA}",
                     "n,seed,rho_n,num_cells,K,lambda_n,Lambda_n,injected,delivered,"
                     "dropped,in_flight,min_occupancy,mean_H,injection_ceiling,"
                     "occupancy_rate_bound,hard_ok"]
    verif_lines = ["# schema=verification_v1",
                   "n,seed,check_id,connection_id,lhs,rhs,passed"]
    all_ok = True
    errors = []
    for res in results:
        if res.error is not None:
            all_ok = False
            errors.append(f"n={res.n} seed={res.seed}: {res.error}")
            continue
        ts = throughput_summary(res.metrics)
        conn_lines.extend(connection_rows(res))
        summary_lines.append(summary_row(res, ts))
        for rec in res.report.records:
            cid = "" if rec.connection_id is None else rec.connection_id
            verif_lines.append(
                f"{res.n},{res.seed},{rec.check_id},{cid},{rec.lhs!r},{rec.rhs!r},"
                f"{int(rec.passed)}"
            )
        if not res.hard_invariants_ok:
            all_ok = False
    (out / "connections.csv").write_text("\n".join(conn_lines) + "\n")
    (out / "summary.csv").write_text("\n".join(summary_lines) + "\n")
    (out / "verification.csv").write_text("\n".join(verif_lines) + "\n")
    if errors:
        (out / "errors.txt").write_text("\n".join(errors) + "\n")
    return all_ok


@dataclass(frozen=True)
class AppendixReport:
    records: list
    passed: bool


def verify_appendix(seed: int = 0, pairs: int = 1_000_000, grid: int = 1000) -> AppendixReport:
    """Closed-form checks: pair-distance expectation, distance law, cap sandwich."""
    from .verification import CheckRecord

    rng = np.random.default_rng(seed)
    a = geometry.random_point(rng, pairs)
    b = geometry.random_point(rng, pairs)
    dist = geometry.surface_distance(a, b)
    records = []
    for delta in (0.1, 0.5, 0.9, math.exp(-2.0 * math.sqrt(math.pi))):
        vals = delta**dist
        mc = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(pairs))
        closed = geometry.expected_delta_pow_L(delta)
        records.append(
            CheckRecord(
                check_id="pair_distance_expectation",
                connection_id=None,
                lhs=mc,
                rhs=closed,
                passed=bool(abs(mc - closed) <= 3.0 * se),
                detail=f"delta={delta!r} se={se!r}",
            )
        )
    ks = kolmogorov_statistic(dist)
    records.append(
        CheckRecord(
            check_id="distance_law_ks",
            connection_id=None,
            lhs=ks,
            rhs=0.002,
            passed=bool(ks < 0.002),
            detail=f"pairs={pairs}",
        )
    )
    rhos = np.linspace(geometry.MAX_DISTANCE / 2.0 / grid, geometry.MAX_DISTANCE / 2.0, grid)
    areas = geometry.cap_area(rhos)
    ok_lower = bool(np.all(math.pi * rhos**2 / 2.0 <= areas))
    ok_upper = bool(np.all(areas <= math.pi * rhos**2))
    records.append(
        CheckRecord(
            check_id="cap_area_sandwich",
            connection_id=None,
            lhs=float(ok_lower and ok_upper),
            rhs=1.0,
            passed=ok_lower and ok_upper,
            detail=f"grid={grid}",
        )
    )
    return AppendixReport(records=records, passed=all(r.passed for r in records))


def kolmogorov_statistic(distances: np.ndarray) -> float:
    """KS distance between the empirical distance CDF and the closed form."""
    x = np.sort(distances)
    cdf = geometry.distance_cdf(x)
    n = len(x)
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    return float(max(upper, lower))


# --- configuration file handling -------------------------------------------

def load_spec(path=None, overrides: list[str] | None = None) -> ExperimentSpec:
    """Build an ExperimentSpec from an INI file plus ``section.key=value`` overrides."""
    parser = configparser.ConfigParser()
    parser.read_dict(_DEFAULT_CONFIG)
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"config file not found: {path}")
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value: {item!r}")
        key, value = item.split("=", 1)
        section, option = key.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), option.strip(), value.strip())
    return _spec_from_parser(parser)


def _spec_from_parser(p: configparser.ConfigParser) -> ExperimentSpec:
    sweep = p["sweep"]
    radio = RadioParams(
        tx_power=p.getfloat("radio", "tx_power"),
        noise=p.getfloat("radio", "noise"),
        alpha=p.getfloat("radio", "alpha"),
    )
    lm_name = p.get("link_model", "name")
    lm_params = filter_model_params(
        lm_name, {k: float(v) for k, v in p["link_model"].items() if k != "name"}
    )
    lm_items = tuple(sorted(lm_params.items()))
    engine = EngineConfig(
        injection_rate=p.getfloat("engine", "injection_rate"),
        attempts_per_hop=p.getint("engine", "attempts_per_hop"),
        measure_slots=p.getint("engine", "measure_slots"),
        warmup_slots=p.getint("engine", "warmup_slots") if p.get("engine", "warmup_slots", fallback="") else None,
        traffic=p.get("engine", "traffic"),
        seed=p.getint("engine", "seed"),
        trace=p.getboolean("engine", "trace"),
    )
    seeds_raw = sweep.get("seeds")
    if "," in seeds_raw:
        seeds = tuple(int(s) for s in seeds_raw.split(","))
    else:
        seeds = tuple(range(int(seeds_raw)))
    track = sweep.get("track_connections", fallback="")
    return ExperimentSpec(
        n_values=tuple(int(s) for s in sweep.get("n").split(",")),
        seeds=seeds,
        area_constant=sweep.getfloat("area_constant"),
        radio=radio,
        link_model_name=lm_name,
        link_model_params=lm_items,
        schedule_regime=p.get("schedule", "regime"),
        schedule_delta=p.getfloat("schedule", "delta"),
        schedule_growth=p.get("schedule", "growth"),
        routing_strategy=p.get("routing", "strategy"),
        relay_mode=p.get("routing", "relay"),
        on_empty_cell=p.get("routing", "on_empty_cell"),
        engine=engine,
        out_dir=sweep.get("out"),
        workers=sweep.getint("workers"),
        track_connections=int(track) if track else None,
    )


def write_resolved_config(spec: ExperimentSpec, path) -> None:
    """Every run records the fully resolved configuration next to its outputs."""
    p = configparser.ConfigParser()
    p["sweep"] = {
        "n": ",".join(str(n) for n in spec.n_values),
        "seeds": ",".join(str(s) for s in spec.seeds),
        "area_constant": repr(spec.area_constant),
        "out": spec.out_dir,
        "workers": str(spec.workers),
        "track_connections": "" if spec.track_connections is None else str(spec.track_connections),
    }
    p["radio"] = {
        "tx_power": repr(spec.radio.tx_power),
        "noise": repr(spec.radio.noise),
        "alpha": repr(spec.radio.alpha),
    }
    p["link_model"] = {"name": spec.link_model_name} | {
        k: repr(v) for k, v in spec.link_model_params
    }
    p["schedule"] = {
        "regime": spec.schedule_regime,
        "delta": repr(spec.schedule_delta),
        "growth": spec.schedule_growth,
    }
    p["routing"] = {
        "strategy": spec.routing_strategy,
        "relay": spec.relay_mode,
        "on_empty_cell": spec.on_empty_cell,
    }
    p["engine"] = {
        "injection_rate": repr(spec.engine.injection_rate),
        "attempts_per_hop": str(spec.engine.attempts_per_hop),
        "measure_slots": str(spec.engine.measure_slots),
        "warmup_slots": "" if spec.engine.warmup_slots is None else str(spec.engine.warmup_slots),
        "traffic": spec.engine.traffic,
        "seed": str(spec.engine.seed),
        "trace": str(spec.engine.trace),
    }
    with open(path, "w") as fh:
        p.write(fh)


_DEFAULT_CONFIG = {
    "sweep": {
        "n": "250,500,1000,2000,4000",
        "seeds": "10",
        "area_constant": "1.2",
        "out": "runs",
        "workers": "1",
        "track_connections": "",
    },
    "radio": {"tx_power": "1.0", "noise": "1e-9", "alpha": "3.0"},
    "link_model": {"name": "logistic", "a": "1.0", "midpoint_db": "10.0"},
    "schedule": {"regime": "fixed", "delta": "12.0", "growth": "log"},
    "routing": {
        "strategy": "straight_line",
        "relay": "nearest_center",
        "on_empty_cell": "reject_deployment",
    },
    "engine": {
        "injection_rate": "0.002",
        "attempts_per_hop": "1",
        "measure_slots": "5000",
        "warmup_slots": "",
        "traffic": "bernoulli",
        "seed": "0",
        "trace": "False",
    },
}
