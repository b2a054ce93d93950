"""Seeded generator of graph-shaped tasks with a controlled number of plans."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ShieldError
from .strips import GroundAction, PlanningTask

MAX_RETRIES = 100


class GenerationError(ShieldError):
    stage = "benchgen"


@dataclass(frozen=True)
class BenchConfig:
    num_plans: int = 8
    min_len: int = 2
    max_len: int = 4
    share_fraction: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.num_plans < 1:
            raise ValueError("num_plans must be >= 1")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if not 0.0 <= self.share_fraction <= 1.0:
            raise ValueError("share_fraction must lie in [0, 1]")


def count_paths(num_nodes: int, edges: list[tuple[int, int]], source: int, sink: int) -> int:
    """Number of distinct source-to-sink paths in a DAG."""
    succ: dict[int, list[int]] = {}
    indeg = [0] * num_nodes
    for u, v in edges:
        succ.setdefault(u, []).append(v)
        indeg[v] += 1
    order = [u for u in range(num_nodes) if indeg[u] == 0]
    for u in order:  # Kahn's algorithm, appending as nodes free up
        for v in succ.get(u, ()):
            indeg[v] -= 1
            if indeg[v] == 0:
                order.append(v)
    if len(order) != num_nodes:
        raise GenerationError("generated graph has a cycle")
    ways = [0] * num_nodes
    ways[source] = 1
    for u in order:
        for v in succ.get(u, ()):
            ways[v] += ways[u]
    return ways[sink]


def _build(config: BenchConfig, rng: random.Random):
    # node 0 = source, node 1 = sink
    num_nodes = 2
    edges: list[tuple[int, int]] = []
    edge_set: set[tuple[int, int]] = set()
    paths: list[list[int]] = []

    def fresh():
        nonlocal num_nodes
        num_nodes += 1
        return num_nodes - 1

    def connect(u, v):
        if (u, v) not in edge_set:
            edge_set.add((u, v))
            edges.append((u, v))

    for _ in range(config.num_plans):
        length = rng.randint(config.min_len, config.max_len)
        nodes = [0]
        if paths and rng.random() < config.share_fraction:
            donor = paths[rng.randrange(len(paths))]
            # shared edges end at a node of the donor that is neither source nor sink,
            # and the new suffix needs at least one fresh node before the sink
            max_prefix = min(len(donor) - 2, length - 2)
            if max_prefix >= 1:
                k = rng.randint(1, max_prefix)
                nodes = donor[: k + 1]
        while len(nodes) < length:
            nodes.append(fresh())
        nodes.append(1)
        for u, v in zip(nodes, nodes[1:]):
            connect(u, v)
        paths.append(nodes)
    return num_nodes, edges, paths


def generate(config: BenchConfig) -> tuple[PlanningTask, int]:
    """Return a task whose simple plans are exactly the source-to-sink paths, and their count."""
    for attempt in range(MAX_RETRIES):
        rng = random.Random(f"{config.seed}:{attempt}")
        num_nodes, edges, _ = _build(config, rng)
        n_paths = count_paths(num_nodes, edges, 0, 1)
        if n_paths == config.num_plans:
            return _to_task(num_nodes, edges), n_paths
    raise GenerationError(f"could not build a graph with exactly {config.num_plans} paths "
                          f"in {MAX_RETRIES} attempts")


def _node_name(u: int) -> str:
    return {0: "source", 1: "sink"}.get(u, f"n{u - 1}")


def _to_task(num_nodes: int, edges: list[tuple[int, int]]) -> PlanningTask:
    fluents = tuple(f"at({_node_name(u)})" for u in range(num_nodes))
    actions = tuple(
        GroundAction(f"move({_node_name(u)} {_node_name(v)})", pre={u}, add={v}, delete={u})
        for u, v in sorted(edges)
    )
    return PlanningTask(fluents, actions, init={0}, goal={1})
