"""Node deployment and the certified Voronoi tessellation.

Cell centers are a maximal packing at pairwise distance ``2*rho_n``, so
every center keeps an exclusive in-disk of radius ``rho_n`` while
maximality keeps the covering radius at ``2*rho_n``.  Both inequalities
are asserted on every build, which is the uniform-cell-size certificate
the routing and scheduling layers rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigurationError

DEFAULT_AREA_CONSTANT = 100.0
_MAX_AREA = 0.5  # keeps rho_n <= sqrt(pi)/4 so the cap-area sandwich applies


@dataclass(frozen=True)
class Deployment:
    """``n`` uniform nodes on the sphere, reproducible from the seed."""

    n: int
    seed: int
    nodes: np.ndarray  # (n, 3) unit vectors


def deploy(n: int, seed: int) -> Deployment:
    if n < 2:
        raise ConfigurationError(f"need at least 2 nodes, got {n}")
    rng = np.random.default_rng(seed)
    return Deployment(n=int(n), seed=int(seed), nodes=geometry.random_point(rng, n))


def min_valid_n(area_constant: float) -> int:
    """Smallest node count with ``area_constant*ln(n)/n <= 0.5``."""
    if area_constant * math.exp(-1.0) <= _MAX_AREA:  # peak of ln(n)/n is 1/e
        return 2
    lo, hi = 3, 4
    while area_constant * math.log(hi) / hi > _MAX_AREA:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if area_constant * math.log(mid) / mid > _MAX_AREA:
            lo = mid
        else:
            hi = mid
    return hi


def rho_for_n(n, area_constant: float = DEFAULT_AREA_CONSTANT) -> float:
    """Cell scale: radius of a cap of area ``area_constant*ln(n)/n``."""
    if n < 2:
        raise ConfigurationError("n must be at least 2")
    area = area_constant * math.log(n) / n
    if area > _MAX_AREA:
        raise ConfigurationError(
            f"area_constant*ln(n)/n = {area:.4f} exceeds {_MAX_AREA}; "
            f"with area_constant={area_constant} the minimum usable n is "
            f"{min_valid_n(area_constant)}"
        )
    return geometry.rho_for_area(area)


@dataclass
class Tessellation:
    """Voronoi cells of a maximal ``2*rho_n`` center packing."""

    centers: np.ndarray  # (m, 3) unit vectors
    rho_n: float
    cell_of_node: np.ndarray  # (n,) cell index per node
    neighbors: list[np.ndarray]  # adjacency lists, symmetric, irreflexive
    nodes_in_cell: list[np.ndarray] = field(repr=False)

    @property
    def num_cells(self) -> int:
        return len(self.centers)

    def occupancy(self) -> np.ndarray:
        return np.array([len(ids) for ids in self.nodes_in_cell])

    def adjacency_pairs(self) -> list[tuple[int, int]]:
        return [
            (c, int(d)) for c in range(self.num_cells) for d in self.neighbors[c] if d > c
        ]


def _greedy_packing(candidates: np.ndarray, cos_threshold: float) -> np.ndarray:
    accepted = np.empty_like(candidates)
    count = 0
    for cand in candidates:
        if count == 0 or np.max(accepted[:count] @ cand) <= cos_threshold:
            accepted[count] = cand
            count += 1
    return accepted[:count]


def _farthest_uncovered(centers: np.ndarray, rng: np.random.Generator):
    """Point maximizing the distance to its nearest center, and that distance.

    For four or more centers this is attained at a Voronoi vertex, which the
    spherical Voronoi diagram yields exactly; tiny configurations fall back
    to dense probing.
    """
    if len(centers) >= 4:
        try:
            from scipy.spatial import SphericalVoronoi

            sv = SphericalVoronoi(centers, radius=1.0)
            verts = sv.vertices / np.linalg.norm(sv.vertices, axis=1)[:, None]
            cos_nearest = np.max(verts @ centers.T, axis=1)
            k = int(np.argmin(cos_nearest))
            angle = math.acos(float(np.clip(cos_nearest[k], -1.0, 1.0)))
            return verts[k], geometry.RADIUS * angle
        except Exception:
            pass
    probes = geometry.random_point(rng, 200_000)
    cos_nearest = np.max(probes @ centers.T, axis=1)
    k = int(np.argmin(cos_nearest))
    angle = math.acos(float(np.clip(cos_nearest[k], -1.0, 1.0)))
    return probes[k], geometry.RADIUS * angle


def _repair_covering(centers: np.ndarray, rho_n: float, rng: np.random.Generator) -> np.ndarray:
    """Insert uncovered far points until the covering radius is <= 2*rho_n.

    Random candidates can leave thin uncovered slivers between cells that
    both the probe pass and the node assignment miss; any such point is a
    valid new center (it is farther than 2*rho_n from all of them), and
    inserting it restores the exact covering the adjacency relation needs.
    """
    for _ in range(64):
        point, dist = _farthest_uncovered(centers, rng)
        if dist <= 2.0 * rho_n * (1.0 + 1e-12):
            return centers
        centers = np.vstack([centers, point])
    raise ConfigurationError("covering repair did not converge")


def build_tessellation(
    dep: Deployment,
    rho_n: float,
    seed: int,
    candidate_factor: float = 50.0,
    probe_count: int = 10_000,
    max_rebuilds: int = 8,
) -> Tessellation:
    """Build the certified tessellation for one deployment.

    Centers are greedily inserted from a dense random candidate set until no
    candidate is ``>= 2*rho_n`` from all accepted centers; maximality is then
    probed by rejection sampling (rebuilding with a denser candidate set on
    failure) and finally made exact by inserting any still-uncovered Voronoi
    vertex as a center, so the covering radius is certifiably ``<= 2*rho_n``.
    """
    if rho_n <= 0:
        raise ConfigurationError("rho_n must be positive")
    if 2.0 * rho_n > geometry.MAX_DISTANCE + 1e-12:
        raise ConfigurationError("rho_n too large: 2*rho_n exceeds the sphere diameter")

    theta_pack = 2.0 * rho_n / geometry.RADIUS
    cos_pack = math.cos(min(theta_pack, math.pi))
    factor = candidate_factor
    rng = np.random.default_rng(seed)
    for _ in range(max_rebuilds):
        n_cand = min(int(math.ceil(factor / geometry.cap_area(rho_n))), 4_000_000)
        candidates = geometry.random_point(rng, n_cand)
        centers = _greedy_packing(candidates, cos_pack + 1e-15)

        probes = geometry.random_point(rng, probe_count)
        probe_cos = probes @ centers.T
        covered = np.max(probe_cos, axis=1) >= cos_pack - 1e-15
        node_cos = dep.nodes @ centers.T
        nearest = np.argmax(node_cos, axis=1)
        nodes_covered = node_cos[np.arange(dep.n), nearest] >= cos_pack - 1e-15
        if covered.all() and nodes_covered.all():
            break
        factor *= 2.0
    else:
        raise ConfigurationError("could not certify a maximal packing; rho_n too small?")

    centers = _repair_covering(centers, rho_n, rng)
    nearest = np.argmax(dep.nodes @ centers.T, axis=1)

    # Hard A1 certificate: packing and covering, not statistical.
    gram = centers @ centers.T
    np.fill_diagonal(gram, -1.0)
    if len(centers) > 1 and gram.max() > cos_pack + 1e-12:
        raise AssertionError("packing violated: two centers closer than 2*rho_n")
    cell_of_node = nearest.astype(np.int64)

    neighbors = _adjacency(centers, rho_n)
    nodes_in_cell = [
        np.flatnonzero(cell_of_node == c) for c in range(len(centers))
    ]
    return Tessellation(
        centers=centers,
        rho_n=float(rho_n),
        cell_of_node=cell_of_node,
        neighbors=neighbors,
        nodes_in_cell=nodes_in_cell,
    )


def _adjacency(centers: np.ndarray, rho_n: float) -> list[np.ndarray]:
    """Cell pairs with centers within ``4*rho_n`` (tiny float slack)."""
    theta_adj = min(4.0 * rho_n * (1.0 + 1e-9) / geometry.RADIUS, math.pi)
    adj_matrix = centers @ centers.T >= math.cos(theta_adj) - 1e-15
    np.fill_diagonal(adj_matrix, False)
    return [np.flatnonzero(row) for row in adj_matrix]


def min_cell_occupancy(tess: Tessellation, dep: Deployment) -> int:
    """Minimum node count over cells (0 flags an empty cell)."""
    return int(tess.occupancy().min())


@dataclass(frozen=True)
class OccupancyReport:
    min_occupancy: int
    floor: float  # high-probability floor pi*n*rho^2/4
    paper_floor: float  # 50*ln(n), meaningful for the area-constant-100 scale

    @property
    def meets_floor(self) -> bool:
        return self.min_occupancy >= self.floor


def occupancy_report(tess: Tessellation, dep: Deployment) -> OccupancyReport:
    return OccupancyReport(
        min_occupancy=min_cell_occupancy(tess, dep),
        floor=math.pi * dep.n * tess.rho_n**2 / 4.0,
        paper_floor=50.0 * math.log(dep.n),
    )


def save_tessellation(tess: Tessellation, path) -> None:
    """Write centers, scale and node assignment as plain text."""
    with open(path, "w") as fh:
        fh.write("# adhocsim tessellation v1\n")
        fh.write(f"rho_n {tess.rho_n!r}\n")
        fh.write(f"cells {tess.num_cells}\n")
        fh.write(f"nodes {len(tess.cell_of_node)}\n")
        for i, c in enumerate(tess.centers):
            fh.write(f"c {i} {float(c[0])!r} {float(c[1])!r} {float(c[2])!r}\n")
        for i, cell in enumerate(tess.cell_of_node):
            fh.write(f"a {i} {cell}\n")


def load_tessellation(path) -> Tessellation:
    rho_n = None
    centers = []
    assignment = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "rho_n":
                rho_n = float(parts[1])
            elif parts[0] == "c":
                centers.append([float(parts[2]), float(parts[3]), float(parts[4])])
            elif parts[0] == "a":
                assignment.append(int(parts[2]))
    if rho_n is None or not centers:
        raise ConfigurationError(f"not a tessellation file: {path}")
    centers = np.asarray(centers)
    cell_of_node = np.asarray(assignment, dtype=np.int64)
    neighbors = _adjacency(centers, rho_n)
    nodes_in_cell = [np.flatnonzero(cell_of_node == c) for c in range(len(centers))]
    return Tessellation(
        centers=centers,
        rho_n=rho_n,
        cell_of_node=cell_of_node,
        neighbors=neighbors,
        nodes_in_cell=nodes_in_cell,
    )
