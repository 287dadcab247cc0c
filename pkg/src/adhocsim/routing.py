"""Route construction: great-circle cell routing plus arbitrary strategies.

A route visits a sequence of pairwise-distinct cells in which consecutive
cells are adjacent, and relays its packets along a node chain whose first
entry is the source and last entry is the destination; interior entries
are each cell's relay node.  Hop ``h`` transmits from ``relays[h]`` (a
node of ``cells[h]``) to ``relays[h+1]``.  A source and destination that
share a cell make a single intra-cell hop, so the hop count is always at
least one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigurationError, GeometryError, RoutingError
from .tessellation import Deployment, Tessellation

MAX_HOP_FACTOR = 8.0  # hop length never exceeds 8*rho_n under adjacency
STRATEGIES = ("straight_line", "shortest_cell_path", "random_walk_loop_erased")


@dataclass(frozen=True)
class Connection:
    """One source-destination pair and its geodesic length."""

    id: int
    source: int
    destination: int
    length: float

    def __post_init__(self):
        if self.source == self.destination:
            raise ConfigurationError("source and destination must differ")


@dataclass
class Route:
    connection_id: int
    cells: list[int]  # distinct cells crossed, in order
    relays: list[int]  # node chain, len = hop count + 1
    hop_lengths: np.ndarray
    length: float  # geodesic source-destination distance
    path_length: float = field(init=False)  # sum of hop lengths

    def __post_init__(self):
        self.path_length = float(np.sum(self.hop_lengths))

    @property
    def hop_count(self) -> int:
        return len(self.hop_lengths)

    def tx_cell(self, hop: int) -> int:
        """Cell whose slot carries hop ``hop`` (its transmitter's cell)."""
        return self.cells[min(hop, len(self.cells) - 1)]


def pick_connections(dep: Deployment, seed: int) -> list[Connection]:
    """One connection per node; destination uniform over the other nodes."""
    if dep.n < 2:
        raise ConfigurationError("need at least 2 nodes")
    rng = np.random.default_rng(seed)
    offsets = rng.integers(1, dep.n, size=dep.n)
    dests = (np.arange(dep.n) + offsets) % dep.n
    lengths = geometry.surface_distance(dep.nodes, dep.nodes[dests])
    return [
        Connection(id=i, source=i, destination=int(dests[i]), length=float(lengths[i]))
        for i in range(dep.n)
    ]


def cell_relay(
    tess: Tessellation,
    dep: Deployment,
    cell: int,
    mode: str = "nearest_center",
    rng: np.random.Generator | None = None,
) -> int:
    """Relay node of a cell: nearest to the center, or seeded-random."""
    ids = tess.nodes_in_cell[cell]
    if len(ids) == 0:
        raise RoutingError(f"cell {cell} has no nodes to relay through", cell=cell)
    if mode == "random":
        if rng is None:
            raise ConfigurationError("random relay mode needs an rng")
        return int(ids[rng.integers(len(ids))])
    if mode != "nearest_center":
        raise ConfigurationError(f"unknown relay mode {mode!r}")
    dots = dep.nodes[ids] @ tess.centers[cell]
    return int(ids[np.argmax(dots)])


def all_cell_relays(
    tess: Tessellation, dep: Deployment, mode: str = "nearest_center", seed: int = 0
) -> np.ndarray:
    """Relay node per cell; -1 marks an empty cell."""
    rng = np.random.default_rng(seed)
    relays = np.full(tess.num_cells, -1, dtype=np.int64)
    for c in range(tess.num_cells):
        if len(tess.nodes_in_cell[c]):
            relays[c] = cell_relay(tess, dep, c, mode=mode, rng=rng)
    return relays


def _crossed_cells(tess: Tessellation, a: np.ndarray, b: np.ndarray) -> list[int]:
    """Cells whose region the minor arc from a to b intersects, in order.

    Samples the arc at step ``rho_n/10`` and records nearest-center changes;
    if two consecutive recorded cells are not adjacent the step is halved and
    the walk redone, since a cell was skipped.
    """
    d = float(geometry.surface_distance(a, b))
    step = tess.rho_n / 10.0
    for _ in range(8):
        n_samples = max(int(math.ceil(d / step)) + 1, 2)
        pts = geometry.geodesic_arc(a, b, np.linspace(0.0, d, n_samples))
        nearest = np.argmax(pts @ tess.centers.T, axis=1)
        cells = [int(nearest[0])]
        for c in nearest[1:]:
            if c != cells[-1]:
                cells.append(int(c))
        ok = all(
            cells[i + 1] in set(tess.neighbors[cells[i]].tolist())
            for i in range(len(cells) - 1)
        )
        if ok:
            return cells
        step /= 2.0
    raise RoutingError("geodesic walk kept skipping cells at the finest step")


def _assemble(
    conn: Connection,
    cells: list[int],
    tess: Tessellation,
    dep: Deployment,
    relay_mode: str,
    rng: np.random.Generator | None,
    on_empty_cell: str,
) -> Route:
    if len(set(cells)) != len(cells):
        raise RoutingError("route revisits a cell")
    if len(cells) == 1:
        chain = [conn.source, conn.destination]
    else:
        chain = [conn.source]
        for c in cells[1:-1]:
            if len(tess.nodes_in_cell[c]) == 0:
                if on_empty_cell == "error_on_route":
                    raise RoutingError(f"route crosses empty cell {c}", cell=c)
                raise RoutingError(
                    f"route crosses empty cell {c} (deployment should have been "
                    "rejected under the reject_deployment policy)",
                    cell=c,
                )
            chain.append(cell_relay(tess, dep, c, mode=relay_mode, rng=rng))
        chain.append(conn.destination)
    hops = geometry.surface_distance(dep.nodes[chain[:-1]], dep.nodes[chain[1:]])
    hops = np.atleast_1d(hops)
    route = Route(
        connection_id=conn.id,
        cells=cells,
        relays=chain,
        hop_lengths=hops,
        length=conn.length,
    )
    _assert_route_invariants(route, tess)
    return route


def _assert_route_invariants(route: Route, tess: Tessellation) -> None:
    limit = MAX_HOP_FACTOR * tess.rho_n
    if np.any(route.hop_lengths > limit + 1e-12):
        raise AssertionError("hop longer than 8*rho_n")
    if route.path_length < route.length - 1e-9:
        raise AssertionError("total path length shorter than the geodesic")


def straight_line_route(
    conn: Connection,
    dep: Deployment,
    tess: Tessellation,
    relay_mode: str = "nearest_center",
    seed: int = 0,
    on_empty_cell: str = "reject_deployment",
) -> Route:
    """Route through every cell the source-destination geodesic crosses."""
    a, b = dep.nodes[conn.source], dep.nodes[conn.destination]
    if float(geometry.central_angle(a, b)) > math.pi - 1e-9:
        raise GeometryError("antipodal endpoints cannot be routed")
    cells = _crossed_cells(tess, a, b)
    rng = np.random.default_rng(seed) if relay_mode == "random" else None
    return _assemble(conn, cells, tess, dep, relay_mode, rng, on_empty_cell)


def _bfs_cells(tess: Tessellation, start: int, goal: int) -> list[int]:
    if start == goal:
        return [start]
    prev = {start: -1}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for d in tess.neighbors[c]:
            d = int(d)
            if d not in prev:
                prev[d] = c
                if d == goal:
                    path = [d]
                    while path[-1] != start:
                        path.append(prev[path[-1]])
                    return path[::-1]
                queue.append(d)
    raise RoutingError(f"no adjacency path from cell {start} to cell {goal}")


def _loop_erase(path: list[int]) -> list[int]:
    out: list[int] = []
    index: dict[int, int] = {}
    for c in path:
        if c in index:
            del_from = index[c] + 1
            for dropped in out[del_from:]:
                del index[dropped]
            out = out[:del_from]
        else:
            index[c] = len(out)
            out.append(c)
    return out


def _random_walk_cells(
    tess: Tessellation, start: int, goal: int, rng: np.random.Generator
) -> list[int]:
    max_steps = 60 * tess.num_cells + 100
    path = [start]
    c = start
    for _ in range(max_steps):
        if c == goal:
            return _loop_erase(path)
        nbrs = tess.neighbors[c]
        if len(nbrs) == 0:
            raise RoutingError(f"cell {c} has no neighbors")
        c = int(nbrs[rng.integers(len(nbrs))])
        path.append(c)
    raise RoutingError("random walk failed to reach the destination cell")


def _detour_cells(
    tess: Tessellation, start: int, goal: int, kappa: float, rng: np.random.Generator,
    dep: Deployment,
) -> list[int]:
    base = _bfs_cells(tess, start, goal)
    base_len = _cells_path_length(base, tess)
    for _ in range(40):
        w = int(rng.integers(tess.num_cells))
        if w == start or w == goal:
            continue
        try:
            cells = _loop_erase(_bfs_cells(tess, start, w) + _bfs_cells(tess, w, goal)[1:])
        except RoutingError:
            continue
        if _cells_path_length(cells, tess) <= kappa * base_len:
            return cells
    return base


def _cells_path_length(cells: list[int], tess: Tessellation) -> float:
    if len(cells) < 2:
        return 0.0
    centers = tess.centers[cells]
    return float(np.sum(geometry.surface_distance(centers[:-1], centers[1:])))


def arbitrary_route(
    conn: Connection,
    dep: Deployment,
    tess: Tessellation,
    strategy: str,
    seed: int = 0,
    relay_mode: str = "nearest_center",
    on_empty_cell: str = "reject_deployment",
) -> Route:
    """Route under the adjacency-hops / no-revisit constraints.

    Strategies: ``shortest_cell_path`` (BFS over cell adjacency),
    ``random_walk_loop_erased``, or ``detour:<kappa>`` which accepts a random
    waypoint only while the cell-path length stays within ``kappa`` times the
    BFS path length.
    """
    rng = np.random.default_rng(seed)
    start = int(tess.cell_of_node[conn.source])
    goal = int(tess.cell_of_node[conn.destination])
    if strategy == "shortest_cell_path":
        cells = _bfs_cells(tess, start, goal)
    elif strategy == "random_walk_loop_erased":
        cells = _random_walk_cells(tess, start, goal, rng)
    elif strategy.startswith("detour:"):
        kappa = float(strategy.split(":", 1)[1])
        if kappa < 1.0:
            raise ConfigurationError("detour factor must be at least 1")
        cells = _detour_cells(tess, start, goal, kappa, rng, dep)
    else:
        raise ConfigurationError(f"unknown routing strategy {strategy!r}")
    relay_rng = rng if relay_mode == "random" else None
    return _assemble(conn, cells, tess, dep, relay_mode, relay_rng, on_empty_cell)


def build_route(
    conn: Connection,
    dep: Deployment,
    tess: Tessellation,
    strategy: str = "straight_line",
    seed: int = 0,
    relay_mode: str = "nearest_center",
    on_empty_cell: str = "reject_deployment",
) -> Route:
    if strategy == "straight_line":
        return straight_line_route(
            conn, dep, tess, relay_mode=relay_mode, seed=seed, on_empty_cell=on_empty_cell
        )
    return arbitrary_route(
        conn, dep, tess, strategy, seed=seed, relay_mode=relay_mode,
        on_empty_cell=on_empty_cell,
    )


def write_routes(routes: list[Route], path) -> None:
    """Per-connection cell/relay/hop-length listing as plain text."""
    with open(path, "w") as fh:
        fh.write("# adhocsim routes v1\n")
        for r in sorted(routes, key=lambda r: r.connection_id):
            cells = ",".join(str(c) for c in r.cells)
            relays = ",".join(str(x) for x in r.relays)
            hops = ",".join(repr(float(h)) for h in r.hop_lengths)
            fh.write(
                f"route {r.connection_id} L={r.length!r} Lhat={r.path_length!r} "
                f"cells={cells} relays={relays} hops={hops}\n"
            )
