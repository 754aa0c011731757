"""Cluster model: nodes, container slots, heartbeats and responsiveness history."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


class Health(enum.Enum):
    HEALTHY = "healthy"
    SLOW = "slow"
    FAILED = "failed"


def estimate_next_loss(window: Sequence[float]) -> float:
    """Weighted estimate of the next unresponsive stretch from past ones.

    ``window`` is ordered oldest to newest. The newest entry gets weight
    ``2**L``, the oldest ``2**1``, and the result is normalised by the sum of
    the weights, so a constant history maps to itself.
    """
    n = len(window)
    if n == 0:
        raise ValueError("empty responsiveness window")
    num = 0.0
    den = 0.0
    # k = 1 is the newest sample R_n
    for k in range(1, n + 1):
        num += 2.0 ** (n + 1 - k) * window[n - k]
        den += 2.0 ** k
    return num / den


@dataclass
class ResponsivenessHistory:
    length: int = 4
    heartbeat_ms: int = 1000
    safety_factor: float = 1.5
    window: deque = field(default_factory=deque)
    estimated_next: Optional[float] = None
    fail_threshold: float = 0.0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("window length must be >= 1")
        self.window = deque(self.window, maxlen=self.length)
        if self.window:
            self._refresh()
        else:
            self.fail_threshold = 10.0 * self.heartbeat_ms

    def record(self, lost_ms: float) -> None:
        self.window.append(float(lost_ms))
        self._refresh()

    def _refresh(self) -> None:
        self.estimated_next = estimate_next_loss(list(self.window))
        self.fail_threshold = max(
            3.0 * self.heartbeat_ms, self.safety_factor * self.estimated_next
        )


def partition_neighborhoods(node_ids: Sequence[int], size: int) -> list[list[int]]:
    """Split nodes (ascending id) into consecutive groups of ``size``.

    A trailing group smaller than two is merged into the one before it.
    """
    if size < 2:
        raise ValueError("neighborhood size must be >= 2")
    ids = sorted(node_ids)
    if len(ids) < 2:
        return [ids] if ids else []
    groups = [ids[i:i + size] for i in range(0, len(ids), size)]
    if len(groups) > 1 and len(groups[-1]) < 2:
        tail = groups.pop()
        groups[-1].extend(tail)
    return groups


@dataclass
class HeartbeatReport:
    node_id: int
    at: int
    next_at: int
    lost_ms: Optional[int] = None


@dataclass
class NodeState:
    node_id: int
    container_slots: int
    history: ResponsivenessHistory
    health: Health = Health.HEALTHY
    slow_factor: float = 1.0
    last_heartbeat_at: int = 0
    running_attempts: set = field(default_factory=set)
    free_slots: list = field(default_factory=list)

    def __post_init__(self):
        if not self.free_slots:
            self.free_slots = list(range(self.container_slots))

    @property
    def failed(self) -> bool:
        return self.health is Health.FAILED

    @property
    def rate_factor(self) -> float:
        return self.slow_factor if self.health is Health.SLOW else 1.0


class Cluster:
    def __init__(
        self,
        num_nodes: int,
        slots_per_node: int,
        size_neighbor: int = 3,
        heartbeat_ms: int = 1000,
        window_length: int = 4,
        safety_factor: float = 1.5,
    ):
        self.heartbeat_ms = heartbeat_ms
        self.nodes = [
            NodeState(
                i,
                slots_per_node,
                ResponsivenessHistory(window_length, heartbeat_ms, safety_factor),
            )
            for i in range(num_nodes)
        ]
        self.neighborhoods = partition_neighborhoods(range(num_nodes), size_neighbor)
        self._hood_of = {}
        for idx, group in enumerate(self.neighborhoods):
            for n in group:
                self._hood_of[n] = idx

    def __len__(self) -> int:
        return len(self.nodes)

    def neighborhood(self, node_id: int) -> list[int]:
        return self.neighborhoods[self._hood_of[node_id]]

    def heartbeat_interval(self, node_id: int) -> int:
        node = self.nodes[node_id]
        return int(round(self.heartbeat_ms * node.rate_factor))

    def emit_heartbeat(self, node_id: int, now: int) -> Optional[HeartbeatReport]:
        """Register a heartbeat from ``node_id``; ``None`` if the node is down.

        A gap longer than one nominal interval since the previous heartbeat is
        treated as a resumed node and fed into its responsiveness history.
        """
        node = self.nodes[node_id]
        if node.failed:
            return None
        gap = now - node.last_heartbeat_at
        lost = None
        if gap > self.heartbeat_ms:
            lost = gap
            self.record_resumed_node(node_id, gap)
        node.last_heartbeat_at = now
        return HeartbeatReport(node_id, now, now + self.heartbeat_interval(node_id), lost)

    def record_resumed_node(self, node_id: int, lost_ms: float) -> ResponsivenessHistory:
        hist = self.nodes[node_id].history
        hist.record(lost_ms)
        return hist

    def free_slot_count(self, node_id: int) -> int:
        node = self.nodes[node_id]
        return 0 if node.failed else len(node.free_slots)

    def allocate_container(
        self,
        job_id: int,
        preferred_nodes: Iterable[int] = (),
        exclude: Iterable[int] = (),
        fallback: bool = True,
    ) -> Optional[tuple[int, int]]:
        """Grant a slot: first preferred node with room, else lowest node id.

        Failed nodes never receive containers since YARN only hands out
        containers on a NodeManager heartbeat.
        """
        banned = set(exclude)
        for n in preferred_nodes:
            if n in banned:
                continue
            if self.free_slot_count(n) > 0:
                return n, self._take(n)
        if not fallback:
            return None
        for node in self.nodes:
            if node.node_id in banned:
                continue
            if self.free_slot_count(node.node_id) > 0:
                return node.node_id, self._take(node.node_id)
        return None

    def _take(self, node_id: int) -> int:
        node = self.nodes[node_id]
        slot = min(node.free_slots)
        node.free_slots.remove(slot)
        return slot

    def release(self, node_id: int, slot: int, attempt_id: str) -> None:
        node = self.nodes[node_id]
        node.running_attempts.discard(attempt_id)
        if slot not in node.free_slots and slot < node.container_slots:
            node.free_slots.append(slot)

    def occupy(self, node_id: int, attempt_id: str) -> None:
        node = self.nodes[node_id]
        node.running_attempts.add(attempt_id)
        if len(node.running_attempts) > node.container_slots:
            raise RuntimeError(f"node {node_id} over-committed")

    def fail_node(self, node_id: int) -> bool:
        node = self.nodes[node_id]
        if node.failed:
            return False
        node.health = Health.FAILED
        return True

    def restore_node(self, node_id: int) -> None:
        """Bring a failed node back with every slot free."""
        node = self.nodes[node_id]
        node.health = Health.SLOW if node.slow_factor > 1.0 else Health.HEALTHY
        node.running_attempts.clear()
        node.free_slots = list(range(node.container_slots))

    def set_slow(self, node_id: int, factor: float) -> None:
        node = self.nodes[node_id]
        node.slow_factor = factor
        if not node.failed:
            node.health = Health.SLOW if factor > 1.0 else Health.HEALTHY
