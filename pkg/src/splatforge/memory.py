"""Feature memory: ordered (pose, matching-feature) tuples with
nearest-pose queries.

Lookup is a linear scan over all entries — fine at interactive-session
scale; swap in a spatial index here if sessions ever grow past a few
thousand views.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MemoryOrderError
from .features import FeatureMap
from .geometry import Pose, pose_distance


@dataclass(frozen=True)
class MemoryEntry:
    pose: Pose
    features: FeatureMap
    step_index: int


@dataclass
class FeatureMemory:
    entries: list = field(default_factory=list)
    max_entries: int | None = None  # oldest-first eviction when set

    def __len__(self) -> int:
        return len(self.entries)

    def insert_entry(self, pose: Pose, features: FeatureMap, step_index: int) -> None:
        if self.entries and step_index <= self.entries[-1].step_index:
            raise MemoryOrderError(
                f"step_index {step_index} not greater than last "
                f"{self.entries[-1].step_index}")
        self.entries.append(MemoryEntry(pose, features, step_index))
        if self.max_entries is not None and len(self.entries) > self.max_entries:
            del self.entries[: len(self.entries) - self.max_entries]

    def query_nearest(self, pose: Pose, n_v: int,
                      rotation_weight: float = 1.0) -> list:
        """Up to n_v entries sorted by ascending pose distance.

        Distance ties go to the more recent entry. An empty memory
        returns an empty list (callers handle the bootstrap case).
        """
        if n_v < 1:
            raise ValueError(f"n_v must be >= 1, got {n_v}")
        ranked = sorted(
            self.entries,
            key=lambda e: (pose_distance(e.pose, pose, rotation_weight), -e.step_index),
        )
        return ranked[:n_v]
