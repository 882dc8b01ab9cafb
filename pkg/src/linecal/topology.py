"""Edge-based breadth-first search: a line visiting order in which every
line's from-bus has been calibrated before the line is estimated."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from linecal.exceptions import CalibrationError, UnreachableError
from linecal.network import NetworkModel, parallel_groups


@dataclass(frozen=True)
class PlanEntry:
    line: str
    from_bus: str
    to_bus: str
    level: int


@dataclass(frozen=True)
class VisitPlan:
    root: str
    entries: tuple[PlanEntry, ...]
    first_calibration: dict[str, str | None]  # bus -> line that first reached it

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def levels(self) -> dict[str, int]:
        return {e.line: e.level for e in self.entries}


def ebbfs(network: NetworkModel, root: str | None = None) -> VisitPlan:
    root = network.reference if root is None else str(root)
    if root not in network.buses:
        raise CalibrationError(f"root bus {root!r} not in network")
    adj = network.adjacency()

    # members of a parallel group sort next to the group's smallest id
    group_key = {lid: lid for lid in network.lines}
    for group in parallel_groups(network):
        for lid in group:
            group_key[lid] = group[0]

    def incident(bus: str) -> list[str]:
        return sorted(adj[bus], key=lambda lid: (group_key[lid], lid))

    queued: set[str] = set()
    queue: deque[tuple[str, str, int]] = deque()  # (line, from_bus, level)
    reached = {root: None}

    def enqueue_from(bus: str, level: int):
        for lid in incident(bus):
            if lid not in queued:
                queued.add(lid)
                queue.append((lid, bus, level))

    enqueue_from(root, 1)
    entries = []
    while queue:
        lid, frm, level = queue.popleft()
        to = network.lines[lid].other_end(frm)
        entries.append(PlanEntry(lid, frm, to, level))
        if to not in reached:
            reached[to] = lid
            enqueue_from(to, level + 1)

    missing = sorted(set(network.lines) - queued)
    if missing:
        raise UnreachableError(missing)
    return VisitPlan(root, tuple(entries), reached)
