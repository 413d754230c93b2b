"""Bounded replay cache shared by the report server and the caretaker."""

from __future__ import annotations

import threading
import time
from collections import OrderedDict
from typing import Callable, Iterable


class ReplayCache:
    """Remembers recently accepted freshness keys.

    Entries are evicted oldest-first once ``capacity`` is reached, or when
    older than ``max_age`` seconds if that is set. ``check_and_add`` is
    atomic so concurrent verifiers cannot both accept the same key.
    """

    def __init__(self, capacity: int = 100_000, max_age: float | None = None,
                 clock: Callable[[], float] = time.time) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.max_age = max_age
        self.clock = clock
        self._seen: OrderedDict[bytes, float] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._seen)

    def __contains__(self, key: bytes) -> bool:
        with self._lock:
            self._expire()
            return bytes(key) in self._seen

    def _expire(self) -> None:
        if self.max_age is None:
            return
        cutoff = self.clock() - self.max_age
        while self._seen:
            key, when = next(iter(self._seen.items()))
            if when >= cutoff:
                break
            self._seen.popitem(last=False)

    def _insert(self, key: bytes, when: float) -> None:
        self._seen[key] = when
        self._seen.move_to_end(key)
        while len(self._seen) > self.capacity:
            self._seen.popitem(last=False)

    def check_and_add(self, keys: Iterable[bytes]) -> bool:
        """Add all keys unless any was seen before (or repeats); True if added."""
        batch = [bytes(k) for k in keys]
        with self._lock:
            self._expire()
            if len(set(batch)) != len(batch) or any(k in self._seen for k in batch):
                return False
            now = self.clock()
            for k in batch:
                self._insert(k, now)
            return True

    def to_json(self) -> dict:
        return {"capacity": self.capacity, "max_age": self.max_age,
                "entries": [[k.hex(), t] for k, t in self._seen.items()]}

    @classmethod
    def from_json(cls, data: dict, clock: Callable[[], float] = time.time) -> ReplayCache:
        cache = cls(int(data.get("capacity", 100_000)), data.get("max_age"), clock)
        for key_hex, when in data.get("entries", []):
            cache._insert(bytes.fromhex(key_hex), float(when))
        return cache
