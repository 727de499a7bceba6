"""Flow matrices from raw event records, plus synthetic stand-ins.

Call records aggregate to a calls matrix (share of calls from ``i`` that go
to ``j``).  Trajectory records aggregate to a mobility matrix by counting
transitions between consecutive observations of each user, staying put
included.
"""

from __future__ import annotations

import csv
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .core import FlowMatrix, largest_remainder


class IngestError(ValueError):
    pass


class CallAggregateRecord(NamedTuple):
    origin: int
    destination: int
    call_count: int


class TrajectoryRecord(NamedTuple):
    user: str
    timestamp: int
    location: int


def _check_id(value: int, n: int, record) -> None:
    if not 0 <= value < n:
        raise IngestError(f"subpopulation id {value} out of range [0, {n}) in record {tuple(record)}")


def build_calls_matrix(records: Iterable[CallAggregateRecord], n: int, labels=()) -> FlowMatrix:
    counts = np.zeros((n, n), dtype=np.int64)
    for rec in records:
        o, d, c = int(rec[0]), int(rec[1]), int(rec[2])
        _check_id(o, n, rec)
        _check_id(d, n, rec)
        if c < 0:
            raise IngestError(f"negative call count in record {tuple(rec)}")
        counts[o, d] += c
    return FlowMatrix.from_weights(counts, labels)


def transition_counts(
    records: Iterable[TrajectoryRecord], n: int, max_gap: Optional[int] = None
) -> np.ndarray:
    """Tally consecutive-record transitions per origin/destination pair.

    Records of different users may be interleaved; each user's own records
    must appear in strictly increasing timestamp order.  With ``max_gap``
    set, two records further apart than ``max_gap`` do not form a
    transition (the observation chain is broken).
    """
    counts = np.zeros((n, n), dtype=np.int64)
    last: dict = {}
    for rec in records:
        user, ts, loc = rec[0], int(rec[1]), int(rec[2])
        _check_id(loc, n, rec)
        prev = last.get(user)
        if prev is not None:
            pts, ploc = prev
            if ts <= pts:
                raise IngestError(
                    f"records of user {user!r} not strictly increasing in time ({pts} then {ts})"
                )
            if max_gap is None or ts - pts <= max_gap:
                counts[ploc, loc] += 1
        last[user] = (ts, loc)
    return counts


def build_mobility_matrix(
    records: Iterable[TrajectoryRecord], n: int, labels=(), max_gap: Optional[int] = None
) -> FlowMatrix:
    return FlowMatrix.from_weights(transition_counts(records, n, max_gap), labels)


SYNTH_KINDS = ("identity", "uniform", "hub", "diagonal-dominant")


def synth_matrix(kind: str, n: int, diag_weight: float = 0.9, rng_seed: int = 0) -> FlowMatrix:
    """Synthetic row-stochastic matrix.

    identity            no movement at all
    uniform             every entry 1/n
    diagonal-dominant   ``diag_weight`` on the diagonal; the rest split over
                        the other nodes by a seeded Dirichlet draw
    hub                 as diagonal-dominant, but half of every leaf's
                        outgoing mass goes to node 0 and node 0 spreads its
                        outgoing mass evenly over the leaves
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= diag_weight <= 1.0:
        raise ValueError("diag_weight must lie in [0, 1]")
    if kind == "identity":
        return FlowMatrix.identity(n)
    if kind == "uniform":
        return FlowMatrix(np.full((n, n), 1.0 / n))
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synthetic matrix kind {kind!r}")
    if n == 1:
        return FlowMatrix.identity(1)

    rng = np.random.default_rng(rng_seed)
    off = 1.0 - diag_weight
    w = np.zeros((n, n))
    for i in range(n):
        others = np.delete(np.arange(n), i)
        w[i, others] = off * rng.dirichlet(np.ones(n - 1))
    if kind == "hub":
        w[0, 1:] = off / (n - 1)
        w[1:] *= 0.5
        w[1:, 0] += off / 2
    np.fill_diagonal(w, diag_weight)
    return FlowMatrix.from_weights(w)


# ---------------------------------------------------------------------------
# Delimited-text record files
# ---------------------------------------------------------------------------

CALLS_HEADER = ("origin_id", "destination_id", "call_count")
TRAJECTORY_HEADER = ("user_id", "timestamp", "location_id")


def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(x.strip() for x in first) != header:
            raise IngestError(f"{path}: expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, [x.strip() for x in row]


def read_call_records(path) -> list[CallAggregateRecord]:
    out = []
    for lineno, (o, d, c) in _read_rows(path, CALLS_HEADER):
        try:
            out.append(CallAggregateRecord(int(o), int(d), int(c)))
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
    return out


def read_trajectory_records(path) -> list[TrajectoryRecord]:
    out = []
    for lineno, (u, t, loc) in _read_rows(path, TRAJECTORY_HEADER):
        try:
            out.append(TrajectoryRecord(u, int(t), int(loc)))
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
    return out


def infer_n(ids: Iterable[int]) -> int:
    ids = list(ids)
    return max(ids) + 1 if ids else 1


def synth_population(total: int, n: int, split: str = "equal", rng_seed: int = 0) -> np.ndarray:
    """Integer populations summing exactly to ``total``."""
    if split == "equal":
        weights = np.ones(n)
    elif split == "random":
        weights = np.random.default_rng(rng_seed).lognormal(0.0, 1.0, size=n)
    else:
        raise ValueError(f"unknown population split {split!r}")
    return largest_remainder(int(total), weights)

