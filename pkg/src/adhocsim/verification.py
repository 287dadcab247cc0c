"""Empirical checkers for the hop-count, interference and throughput claims.

Every check records the two compared numbers, never just a boolean, and
checkers are side-effect-free over run measurements.

The hop-count and short-hop checks assert the finite-size forms of the
claims, which keep the endpoint-cell correction term ``8*rho_n`` that the
asymptotic statements drop: a source-destination pair closer than about
``0.2*rho_n`` still needs one hop, so the uncorrected upper bound
``16*L/(pi*rho)`` is violated with positive probability at any finite
scale.  Both forms are computed and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigurationError, SaturationError
from .engine import RunMetrics
from .links import LinkModel, hop_success_with_retries
from .routing import Route

DEFAULT_EPS = 1.0 / 32.0
ARBITRARY_EPS = 1.0 / 640.0
SHORT_HOP_W = 40
SHORT_HOP_T = 0.01


@dataclass(frozen=True)
class BoundSet:
    """Constants of the bounded-SINR hop-fraction argument.

    ``c1`` is never assumed: it is read off the built schedule as ``K - 1``
    since every inequality uses only ``1 + c1``.  ``m0_arbitrary`` is the
    interferer-distance constant of the arbitrary-routing variant (chosen
    from ``eps = 1/640``), and ``beta1`` is derived from it.
    """

    eps1: float
    eps2: float
    alpha: float
    c1: float
    t0: float
    m0: float
    beta0: float
    m0_arbitrary: float
    beta1: float
    c0: float | None = None  # needs phi(beta0); see throughput_ceilings


def short_hop_fraction(t: float) -> float:
    """Guaranteed long-hop fraction coefficient ``(1 - 16t/pi) / (8 - t)``."""
    return (1.0 - 16.0 * t / math.pi) / (8.0 - t)


def short_hop_threshold_root(eps1: float, tol: float = 1e-10) -> float:
    """Bisection solve of ``short_hop_fraction(t) == 1/8 - eps1`` on (0, pi/16)."""
    target = 0.125 - eps1
    lo, hi = 0.0, math.pi / 16.0
    f_lo = short_hop_fraction(1e-15) - target
    f_hi = -target
    if f_lo <= 0 or f_hi >= 0:
        raise ConfigurationError("no root in (0, pi/16); eps1 out of range")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if short_hop_fraction(mid) - target > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def compute_bounds(
    eps1: float = DEFAULT_EPS,
    eps2: float = DEFAULT_EPS,
    alpha: float = 3.0,
    c1: float = 0.0,
    phi_of_beta0: float | None = None,
) -> BoundSet:
    if eps1 + eps2 >= 0.125:
        raise ConfigurationError("eps1 + eps2 must stay below 1/8")
    if alpha <= 2:
        raise ConfigurationError("alpha must exceed 2")
    t0 = short_hop_threshold_root(eps1)
    m0 = 2.0 * (1.0 + c1) / eps2
    m0_arbitrary = 2.0 * (1.0 + c1) / ARBITRARY_EPS
    beta0 = ((m0 + 8.0) / t0) ** alpha
    beta1 = 100.0**alpha * (m0_arbitrary + 8.0) ** alpha
    c0 = None
    if phi_of_beta0 is not None:
        if not 0.0 < phi_of_beta0 < 1.0:
            raise ConfigurationError("phi(beta0) must lie in (0, 1)")
        c0 = 2.0**12 / math.log(phi_of_beta0) ** 2
    return BoundSet(
        eps1=eps1, eps2=eps2, alpha=alpha, c1=c1, t0=t0, m0=m0, beta0=beta0,
        m0_arbitrary=m0_arbitrary, beta1=beta1, c0=c0,
    )


@dataclass(frozen=True)
class CheckRecord:
    check_id: str
    connection_id: int | None
    lhs: float
    rhs: float
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    records: list[CheckRecord] = field(default_factory=list)

    def extend(self, records) -> None:
        self.records.extend(records)

    def pass_rate(self, check_id: str | None = None) -> float:
        recs = [
            r for r in self.records if check_id is None or r.check_id == check_id
        ]
        if not recs:
            return float("nan")
        return sum(r.passed for r in recs) / len(recs)

    def failures(self, check_id: str | None = None) -> list[CheckRecord]:
        return [
            r
            for r in self.records
            if not r.passed and (check_id is None or r.check_id == check_id)
        ]

    def all_passed(self) -> bool:
        return all(r.passed for r in self.records)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# schema=verification_v1\n")
            fh.write("check_id,connection_id,lhs,rhs,passed,detail\n")
            for r in self.records:
                cid = "" if r.connection_id is None else r.connection_id
                fh.write(f"{r.check_id},{cid},{r.lhs!r},{r.rhs!r},{int(r.passed)},{r.detail}\n")

    def write_text(self, path) -> None:
        ids = sorted({r.check_id for r in self.records})
        with open(path, "w") as fh:
            fh.write("# adhocsim verification report\n")
            for cid in ids:
                recs = [r for r in self.records if r.check_id == cid]
                rate = sum(r.passed for r in recs) / len(recs)
                fh.write(f"{cid}: {sum(r.passed for r in recs)}/{len(recs)} pass ({rate:.3f})\n")
                for r in recs:
                    if not r.passed:
                        fh.write(
                            f"  FAIL conn={r.connection_id} lhs={r.lhs!r} rhs={r.rhs!r} {r.detail}\n"
                        )


def hop_count_bounds(length: float, rho_n: float) -> tuple[float, float, float]:
    """(lower, asymptotic upper, endpoint-corrected upper) hop-count bounds."""
    lower = max(length / (8.0 * rho_n), 1.0)
    upper_asym = 16.0 * length / (math.pi * rho_n)
    upper = 16.0 * (length + 8.0 * rho_n) / (math.pi * rho_n)
    return lower, upper_asym, upper


def check_hop_count(route: Route, rho_n: float) -> CheckRecord:
    """Hop count against the geodesic-length bounds (straight-line routes)."""
    lower, upper_asym, upper = hop_count_bounds(route.length, rho_n)
    h = route.hop_count
    passed = lower <= h <= upper
    return CheckRecord(
        check_id="hop_count",
        connection_id=route.connection_id,
        lhs=float(h),
        rhs=upper,
        passed=bool(passed),
        detail=f"lower={lower!r} upper_asymptotic={upper_asym!r}",
    )


def short_hop_count(route: Route, rho_n: float, t: float) -> int:
    """Hops shorter than ``t * rho_n``."""
    return int(np.sum(route.hop_lengths < t * rho_n))


def check_short_hops(route: Route, rho_n: float, t: float) -> CheckRecord:
    """Long-hop count ``H - h`` against its guaranteed floor.

    The floor keeps the ``128 t / pi`` endpoint correction inherited from the
    corrected hop-count upper bound; the asymptotic floor is reported.
    """
    if not 0.0 < t < math.pi / 16.0:
        raise ConfigurationError("t must lie in (0, pi/16)")
    h_short = short_hop_count(route, rho_n, t)
    long_hops = route.hop_count - h_short
    ratio = route.length / rho_n
    floor_asym = ratio * short_hop_fraction(t)
    floor = (ratio * (1.0 - 16.0 * t / math.pi) - 128.0 * t / math.pi) / (8.0 - t)
    return CheckRecord(
        check_id="short_hops",
        connection_id=route.connection_id,
        lhs=float(long_hops),
        rhs=floor,
        passed=bool(long_hops >= floor),
        detail=f"t={t!r} h_short={h_short} floor_asymptotic={floor_asym!r}",
    )


def max_short_run(route: Route, rho_n: float, t: float = SHORT_HOP_T) -> int:
    """Longest run of consecutive hops of length ``t * rho_n`` or less."""
    best = run = 0
    for hop in route.hop_lengths:
        if hop <= t * rho_n:
            run += 1
            best = max(best, run)
        else:
            run = 0
    return best


def consecutive_short_hop_cell_bound(w: int = SHORT_HOP_W, t: float = SHORT_HOP_T) -> float:
    """Cells reachable by ``w`` hops of length <= ``t*rho_n``: ``2*(w*t + 4)**2``."""
    return 2.0 * (w * t + 4.0) ** 2


def check_consecutive_short_hops(
    route: Route, rho_n: float, w: int = SHORT_HOP_W, t: float = SHORT_HOP_T
) -> CheckRecord:
    """No ``w`` consecutive hops of length ``t * rho_n`` or less."""
    run = max_short_run(route, rho_n, t)
    return CheckRecord(
        check_id="consecutive_short_hops",
        connection_id=route.connection_id,
        lhs=float(run),
        rhs=float(w),
        passed=bool(run < w),
        detail=f"cell_bound={consecutive_short_hop_cell_bound(w, t)!r}",
    )


def _interior_hops(route: Route) -> range:
    """Hop indices excluding the source and destination hops."""
    return range(1, route.hop_count - 1)


def check_interferer_proximity(
    metrics: RunMetrics,
    routes: list[Route],
    m: float,
    schedule_length: int,
    rho_n: float,
    use_path_length: bool = False,
) -> list[CheckRecord]:
    """Count interior hops with no concurrent transmitter within ``(m+8)*rho_n``.

    Requires a saturated run (otherwise a silent cell would inflate the count
    for reasons unrelated to the claim).  The straight-line variant needs
    ``m > 9`` and compares against ``(L/rho) * 2K/m``; the arbitrary-routing
    variant needs ``m > 16`` and uses the traversed path length instead.
    """
    if not metrics.saturated:
        raise SaturationError("interferer-proximity counting needs a saturated trace")
    min_m = 16.0 if use_path_length else 9.0
    if m <= min_m:
        raise ConfigurationError(f"m must exceed {min_m} for this variant")
    radius = (m + 8.0) * rho_n
    records = []
    for route in routes:
        samples = metrics.hop_samples.get(route.connection_id)
        if samples is None:
            continue
        isolated = 0
        for hop in _interior_hops(route):
            near = samples[hop].nearest_interferer
            if near is None or near > radius:
                isolated += 1
        length = route.path_length if use_path_length else route.length
        bound = (length / rho_n) * 2.0 * schedule_length / m
        records.append(
            CheckRecord(
                check_id="interferer_proximity",
                connection_id=route.connection_id,
                lhs=float(isolated),
                rhs=bound,
                passed=bool(isolated <= bound),
                detail=f"m={m!r} radius={radius!r} interior_hops={max(route.hop_count - 2, 0)}",
            )
        )
    return records


def check_sinr_bounded_fraction(
    metrics: RunMetrics,
    routes: list[Route],
    bounds: BoundSet,
    rho_n: float,
    arbitrary: bool = False,
) -> list[CheckRecord]:
    """Interior hops with SINR below the ceiling, against the required count.

    Straight-line variant: at least ``L/(16*rho_n)`` hops at or below
    ``beta0``; arbitrary variant: at least ``Lhat/(640*rho_n)`` at or below
    ``beta1``.  A required count below one passes trivially.
    """
    if not metrics.saturated:
        raise SaturationError("bounded-SINR counting needs a saturated trace")
    ceiling = bounds.beta1 if arbitrary else bounds.beta0
    records = []
    for route in routes:
        samples = metrics.hop_samples.get(route.connection_id)
        if samples is None:
            continue
        count = sum(
            1 for hop in _interior_hops(route) if samples[hop].gamma <= ceiling
        )
        if arbitrary:
            required = route.path_length / (640.0 * rho_n)
        else:
            required = route.length / (16.0 * rho_n)
        passed = required < 1.0 or count >= required
        records.append(
            CheckRecord(
                check_id="sinr_bounded_fraction" + ("_arbitrary" if arbitrary else ""),
                connection_id=route.connection_id,
                lhs=float(count),
                rhs=required,
                passed=bool(passed),
                detail=f"ceiling={ceiling!r}",
            )
        )
    return records


@dataclass(frozen=True)
class CeilingReport:
    lambda_bound: float  # injection rate times the delivery-decay factor
    c0: float
    c0_over_n: float | None
    conservative_ceiling: float | None  # 1 / (n * rho_n * K), unit constant
    conservative_sqrt_form: float | None  # 1 / (K * sqrt(n * log n))
    occupancy_ceiling: float | None  # 4 / (pi * n * rho_n^2)


def throughput_ceilings(
    rho_n: float,
    schedule_length: int,
    injection_rate: float,
    phi_beta0: float,
    n: int | None = None,
) -> CeilingReport:
    if not 0.0 < phi_beta0 < 1.0:
        raise ConfigurationError("phi(beta0) must lie in (0, 1)")
    log_phi = math.log(phi_beta0)
    lambda_bound = injection_rate * 1024.0 * math.pi * rho_n**2 / log_phi**2
    c0 = 2.0**12 / log_phi**2
    if n is None:
        return CeilingReport(lambda_bound, c0, None, None, None, None)
    return CeilingReport(
        lambda_bound=lambda_bound,
        c0=c0,
        c0_over_n=c0 / n,
        conservative_ceiling=1.0 / (n * rho_n * schedule_length),
        conservative_sqrt_form=1.0 / (schedule_length * math.sqrt(n * math.log(n))),
        occupancy_ceiling=4.0 / (math.pi * n * rho_n**2),
    )


def delivery_decay_direct(injection_rate: float, rho_n: float, phi_beta0: float) -> float:
    """Delivery-rate bound via the closed-form pair-distance expectation."""
    delta = phi_beta0 ** (1.0 / (16.0 * rho_n))
    return injection_rate * geometry.expected_delta_pow_L(delta)


def delivery_decay_stepwise(injection_rate: float, rho_n: float, phi_beta0: float) -> float:
    """The same bound composed stepwise in terms of ``phi(beta0)`` directly."""
    log_phi = math.log(phi_beta0)
    num = 512.0 * math.pi * rho_n**2 * (
        1.0 + phi_beta0 ** (math.sqrt(math.pi) / (32.0 * rho_n))
    )
    den = 1024.0 * math.pi * rho_n**2 + log_phi**2
    return injection_rate * num / den


def delivery_prediction(
    metrics: RunMetrics, routes: list[Route], model: LinkModel, attempts: int
) -> list[CheckRecord]:
    """Measured delivery against the independent-hops product prediction.

    The prediction multiplies each hop's retry-budget success probability
    evaluated at the recorded per-attempt SINRs.  Both numbers are recorded
    with a three-standard-error binomial band; the schedule can correlate
    hops, so treat the band as a report, not an assertion, outside the cases
    where the per-hop probabilities are exact (constant-p, or a saturated
    fixed schedule where the per-hop SINR is stationary).
    """
    records = []
    for route in routes:
        cid = route.connection_id
        idx = np.flatnonzero(metrics.connection_ids == cid)
        if len(idx) == 0:
            continue
        k = int(idx[0])
        resolved = int(metrics.delivered[k] + metrics.dropped[k])
        if resolved == 0:
            continue
        sinr_lists = metrics.attempt_sinrs.get(cid)
        predicted = 1.0
        usable = True
        for hop in range(route.hop_count):
            gammas = sinr_lists[hop] if sinr_lists else []
            if not gammas:
                if getattr(model, "continuous", True):
                    usable = False
                    break
                gammas = [0.0]  # SINR-independent model
            predicted *= hop_success_with_retries(gammas, model, attempts)
        if not usable:
            continue
        measured = metrics.delivered[k] / resolved
        sigma = math.sqrt(max(predicted * (1.0 - predicted), 1e-12) / resolved)
        records.append(
            CheckRecord(
                check_id="delivery_prediction",
                connection_id=cid,
                lhs=float(measured),
                rhs=float(predicted),
                passed=bool(abs(measured - predicted) <= 3.0 * sigma),
                detail=f"resolved={resolved} sigma={sigma!r}",
            )
        )
    return records
