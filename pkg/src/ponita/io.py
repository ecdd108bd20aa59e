"""Point-cloud JSON files and datasets of them.

A point cloud is stored as::

    {"positions": [[x, y, z], ...],
     "scalars": {"charge": [...], ...},      # [P] or [P, k]
     "vectors": {"velocity": [[...], ...]},  # [P, n]
     "edges": [[i, j], ...],                 # optional
     "targets": {"final_positions": ...}}    # optional

Python's float repr round-trips exactly, so writing and reading preserves
float64 values bit for bit. A dataset file holds ``{"meta": {...},
"samples": [cloud, ...]}``.
"""
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PointCloudFile:
    positions: np.ndarray
    scalars: dict = field(default_factory=dict)
    vectors: dict = field(default_factory=dict)
    edges: np.ndarray | None = None
    targets: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2:
            raise ValueError(f"positions must be [P, n], got {self.positions.shape}")
        P, n = self.positions.shape
        self.scalars = {k: np.asarray(v, dtype=np.float64) for k, v in self.scalars.items()}
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in self.vectors.items()}
        self.targets = {k: np.asarray(v, dtype=np.float64) for k, v in self.targets.items()}
        for k, v in self.scalars.items():
            if v.ndim not in (1, 2) or v.shape[0] != P:
                raise ValueError(f"scalar {k!r} must be [P] or [P, k] with P={P}, got {v.shape}")
        for k, v in self.vectors.items():
            if v.shape != (P, n):
                raise ValueError(f"vector {k!r} must be {(P, n)}, got {v.shape}")
        if self.edges is not None:
            e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
            if e.size and (e.min() < 0 or e.max() >= P):
                raise ValueError("edge index out of range")
            self.edges = e

    def to_dict(self):
        d = {
            "positions": self.positions.tolist(),
            "scalars": {k: v.tolist() for k, v in self.scalars.items()},
            "vectors": {k: v.tolist() for k, v in self.vectors.items()},
        }
        if self.edges is not None:
            d["edges"] = self.edges.tolist()
        if self.targets:
            d["targets"] = {k: v.tolist() for k, v in self.targets.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        missing = {"positions"} - set(d)
        if missing:
            raise ValueError(f"point cloud is missing keys {sorted(missing)}")
        return cls(
            positions=d["positions"],
            scalars=d.get("scalars", {}),
            vectors=d.get("vectors", {}),
            edges=d.get("edges"),
            targets=d.get("targets", {}),
        )

    def equals(self, other):
        """Exact structural equality."""
        def same(a, b):
            return a.keys() == b.keys() and all(
                a[k].shape == b[k].shape and np.array_equal(a[k], b[k]) for k in a)
        edges_equal = (self.edges is None and other.edges is None) or (
            self.edges is not None and other.edges is not None
            and np.array_equal(self.edges, other.edges))
        return (np.array_equal(self.positions, other.positions) and edges_equal
                and same(self.scalars, other.scalars) and same(self.vectors, other.vectors)
                and same(self.targets, other.targets))


def write_pointcloud(path, cloud):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cloud.to_dict(), fh)


def read_pointcloud(path):
    with open(path, encoding="utf-8") as fh:
        return PointCloudFile.from_dict(json.load(fh))


def write_dataset(path, samples, meta=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"meta": meta or {}, "samples": [s.to_dict() for s in samples]}, fh)


def read_dataset(path):
    """-> (samples, meta)."""
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    if not isinstance(blob, dict) or "samples" not in blob:
        raise ValueError(f"{path}: not a dataset file (missing 'samples')")
    return [PointCloudFile.from_dict(s) for s in blob["samples"]], blob.get("meta", {})
