"""Scan-protocol state machine: ten regions, two orthogonal views each.

Progression is fixed: anterior regions 1 and 2, an arc transit to the
lateral regions 3 and 4, the whole right lung before the left, then a
prone repositioning for region 5 on both sides.  A view only completes
when the recorder reports at least the full recording duration, so no
accepted event sequence can reach the complete phase with fewer than the
20 views.  advance() is a pure function of (state, event); replaying an
event log reproduces the final state exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ProtocolError, StateError

REGION_ORDER: tuple[tuple[int, str], ...] = (
    (1, "right"), (2, "right"), (3, "right"), (4, "right"),
    (1, "left"), (2, "left"), (3, "left"), (4, "left"),
    (5, "right"), (5, "left"),
)

VIEWS = ("perpendicular", "parallel")
EVENTS = frozenset({
    "contact_made", "features_found", "recording_done",
    "arc_transit_done", "reposition_confirmed", "abort",
})
MIN_RECORDING_S = 5.0


@dataclass(frozen=True)
class WorkflowEvent:
    kind: str
    t_s: float
    view: str | None = None
    duration_s: float | None = None
    reason: str | None = None
    region: int | None = None
    side: str | None = None


@dataclass(frozen=True)
class WorkflowState:
    phase: str = "setup"  # setup | scanning | reposition_prone | complete | aborted
    region_id: int = 1
    side: str = "right"
    substate: str = "approach"
    completed: frozenset = field(default_factory=frozenset)
    started_at: float = 0.0
    updated_at: float = -1.0
    abort_reason: str = ""

    @property
    def current(self) -> tuple[int, str]:
        return (self.region_id, self.side)


def _next_region(current: tuple[int, str]) -> tuple[int, str] | None:
    idx = REGION_ORDER.index(current)
    return REGION_ORDER[idx + 1] if idx + 1 < len(REGION_ORDER) else None


def _needs_arc(current: tuple[int, str], nxt: tuple[int, str]) -> bool:
    return current[0] == 2 and nxt[0] == 3 and current[1] == nxt[1]


def _reject(state: WorkflowState, event: WorkflowEvent, expected: list[str]):
    raise ProtocolError(
        f"event {event.kind!r} illegal in phase={state.phase} "
        f"substate={state.substate} at region {state.current}; "
        f"expected one of {expected}"
    )


def advance(state: WorkflowState, event: WorkflowEvent,
            free_scan: bool = False) -> WorkflowState:
    if event.kind not in EVENTS:
        raise ProtocolError(f"unknown workflow event {event.kind!r}")
    if event.t_s <= state.updated_at:
        raise ProtocolError(
            f"event timestamp {event.t_s} not after {state.updated_at}")
    if state.phase in ("complete", "aborted"):
        _reject(state, event, [])

    stamp = {"updated_at": event.t_s}
    if state.updated_at < 0:
        stamp["started_at"] = event.t_s

    if event.kind == "abort":
        return replace(state, phase="aborted",
                       abort_reason=event.reason or "operator abort", **stamp)

    if free_scan:
        return _advance_free(state, event, stamp)

    if state.phase == "setup":
        if event.kind == "contact_made":
            return replace(state, phase="scanning", substate="contact", **stamp)
        _reject(state, event, ["contact_made", "abort"])

    if state.phase == "reposition_prone":
        if event.kind == "reposition_confirmed":
            return replace(state, phase="scanning", region_id=5, side="right",
                           substate="approach", **stamp)
        _reject(state, event, ["reposition_confirmed", "abort"])

    # phase == scanning
    sub = state.substate
    if sub == "approach":
        if event.kind == "contact_made":
            return replace(state, substate="contact", **stamp)
        _reject(state, event, ["contact_made", "abort"])
    if sub in ("contact", "search"):
        if event.kind == "features_found":
            return replace(state, substate="record_perp", **stamp)
        _reject(state, event, ["features_found", "abort"])
    if sub in ("record_perp", "record_par"):
        want = "perpendicular" if sub == "record_perp" else "parallel"
        if event.kind != "recording_done":
            _reject(state, event, [f"recording_done({want})", "abort"])
        if event.view != want:
            raise ProtocolError(f"recording_done view {event.view!r}, expected {want!r}")
        if event.duration_s is None or event.duration_s < MIN_RECORDING_S:
            raise ProtocolError(
                f"recording of {event.duration_s} s is shorter than "
                f"{MIN_RECORDING_S} s")
        done = state.completed | {(state.region_id, state.side, want)}
        if sub == "record_perp":
            return replace(state, substate="record_par", completed=done, **stamp)
        # Second view closes out the region.
        if state.current == (4, "left"):
            return replace(state, phase="reposition_prone", completed=done,
                           region_id=5, side="right", substate="approach", **stamp)
        if state.current == (5, "left"):
            return replace(state, phase="complete", completed=done,
                           substate="region_done", **stamp)
        return replace(state, substate="region_done", completed=done, **stamp)
    if sub == "region_done":
        nxt = _next_region(state.current)
        assert nxt is not None  # terminal regions never land here
        if _needs_arc(state.current, nxt):
            if event.kind == "arc_transit_done":
                return replace(state, region_id=nxt[0], side=nxt[1],
                               substate="search", **stamp)
            _reject(state, event, ["arc_transit_done", "abort"])
        if event.kind == "contact_made":
            return replace(state, region_id=nxt[0], side=nxt[1],
                           substate="contact", **stamp)
        _reject(state, event, ["contact_made", "abort"])
    _reject(state, event, ["abort"])


def _advance_free(state: WorkflowState, event: WorkflowEvent, stamp: dict) -> WorkflowState:
    """Training mode: region order unenforced, sessions marked non-protocol."""
    if event.kind == "contact_made":
        region = event.region or state.region_id
        side = event.side or state.side
        return replace(state, phase="scanning", region_id=region, side=side,
                       substate="contact", **stamp)
    if event.kind == "arc_transit_done":
        region = event.region or state.region_id
        side = event.side or state.side
        return replace(state, phase="scanning", region_id=region, side=side,
                       substate="search", **stamp)
    if event.kind == "reposition_confirmed":
        return replace(state, **stamp)
    if event.kind == "features_found":
        if state.substate in ("contact", "search"):
            return replace(state, substate="record_perp", **stamp)
        _reject(state, event, ["contact_made"])
    if event.kind == "recording_done":
        if state.substate not in ("record_perp", "record_par"):
            _reject(state, event, ["features_found"])
        want = "perpendicular" if state.substate == "record_perp" else "parallel"
        if event.view != want or not event.duration_s or event.duration_s < MIN_RECORDING_S:
            raise ProtocolError("invalid recording_done in free scan")
        done = state.completed | {(state.region_id, state.side, want)}
        if state.substate == "record_perp":
            return replace(state, substate="record_par", completed=done, **stamp)
        phase = "complete" if len(done) >= 20 else "scanning"
        return replace(state, phase=phase, substate="region_done", completed=done, **stamp)
    _reject(state, event, sorted(EVENTS))


@dataclass(frozen=True)
class RecordingEntry:
    region: int
    side: str
    view: str
    first_seq: int
    last_seq: int
    duration_s: float
    mean_force_N: float
    max_force_N: float


def session_report(state: WorkflowState, index: list[RecordingEntry]) -> dict:
    if state.phase not in ("complete", "aborted"):
        raise StateError(f"report requested mid-session (phase {state.phase})")
    matrix = {}
    for region_id, side in REGION_ORDER:
        for view in VIEWS:
            matrix[f"{region_id}/{side}/{view}"] = (region_id, side, view) in state.completed
    per_region: dict = {}
    for entry in index:
        key = f"{entry.region}/{entry.side}"
        bucket = per_region.setdefault(key, {"mean_force_N": [], "max_force_N": 0.0})
        bucket["mean_force_N"].append(entry.mean_force_N)
        bucket["max_force_N"] = max(bucket["max_force_N"], entry.max_force_N)
    for bucket in per_region.values():
        forces = bucket.pop("mean_force_N")
        bucket["mean_force_N"] = sum(forces) / len(forces)
    duration = max(0.0, state.updated_at - state.started_at) if state.updated_at >= 0 else 0.0
    return {
        "phase": state.phase,
        "completed_views": len(state.completed),
        "completion_matrix": matrix,
        "per_region_force": per_region,
        "duration_s": duration,
        "abort_reason": state.abort_reason,
    }
