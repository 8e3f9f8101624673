"""Future-event set with deterministic tie-breaking.

Events pop in lexicographic (time, priority, seq) order.  `seq` is assigned
at insertion and is strictly increasing, so two events scheduled for the
same instant at the same priority pop in insertion order, on every run.
Cancellation is lazy: a popped entry whose token was invalidated is skipped.
"""

from __future__ import annotations

import heapq
from typing import Any


class EventQueue:
    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int, Any]] = []
        self._seq = 0

    def push(self, time: float, payload: Any, priority: int = 0) -> None:
        heapq.heappush(self._heap, (time, priority, self._seq, payload))
        self._seq += 1

    def pop(self) -> tuple[float, Any]:
        time, _, _, payload = heapq.heappop(self._heap)
        return time, payload

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)
