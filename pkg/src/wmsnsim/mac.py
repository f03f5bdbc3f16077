"""Reservation MAC building blocks.

Each frame is a reservation period (RP) of grid-scheduled control slots
followed by a contention-free period (CFP) of data slots. A station may
start a reservation procedure only in the RP slot derived from its grid
cell; one RP slot is wide enough for a full three-message establishment
(request, accept, reservation broadcast) or a two-message cancellation.
Data slots carry exactly one packet plus its acknowledgment.

Real-time reservations persist across frames until explicitly cancelled;
datagram (burst) reservations are valid for the current frame only and
are wiped at the frame boundary. Failed procedures back off a whole
number of frames, doubling the window per attempt.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .geometry import GridSpec, rp_slot_of
from .topology import Station


class NoFreeSlotsError(RuntimeError):
    """Raised when a request is built while the sender has no free slot."""


class DatagramCancelError(ValueError):
    """Raised on an attempt to cancel a datagram reservation; those simply
    expire with the frame."""


class MsgKind(str, Enum):
    CONNECT_REQUEST = "CR"
    CONNECT_ACCEPT = "CA"
    RESERVATION_BROADCAST = "SRB"
    CANCEL = "CC"
    CANCEL_ACK = "CC_ACK"


class ReservationKind(str, Enum):
    REAL_TIME = "real_time"
    DATAGRAM = "datagram"


@dataclass(frozen=True)
class FrameLayout:
    """Slot counts and slot durations of one frame."""

    rp_slots: int = 11
    cf_slots: int = 20
    rp_slot_len_ms: float = 0.2
    cf_slot_len_ms: float = 0.5

    def __post_init__(self):
        if self.rp_slots < 11:
            raise ValueError(f"rp_slots must be >= 11, got {self.rp_slots}")
        if self.cf_slots < 1:
            raise ValueError(f"cf_slots must be >= 1, got {self.cf_slots}")
        if self.rp_slot_len_ms <= 0.0 or self.cf_slot_len_ms <= 0.0:
            raise ValueError("slot lengths must be positive")

    @property
    def frame_len_ms(self) -> float:
        return self.rp_slots * self.rp_slot_len_ms + self.cf_slots * self.cf_slot_len_ms

    @property
    def total_slots(self) -> int:
        return self.rp_slots + self.cf_slots

    def frame_start_ms(self, frame: int) -> float:
        return frame * self.frame_len_ms

    def rp_slot_start_ms(self, frame: int, slot: int) -> float:
        return self.frame_start_ms(frame) + slot * self.rp_slot_len_ms

    def cf_slot_start_ms(self, frame: int, slot: int) -> float:
        return (
            self.frame_start_ms(frame)
            + self.rp_slots * self.rp_slot_len_ms
            + slot * self.cf_slot_len_ms
        )

    def cf_slot_end_ms(self, frame: int, slot: int) -> float:
        return self.cf_slot_start_ms(frame, slot) + self.cf_slot_len_ms


def my_rp_slot(station: Station, spec: GridSpec, slotting_enabled: bool = True) -> int:
    """RP slot a station may initiate in. With slotting disabled every
    station contends in slot 0 (the degraded configuration used to
    demonstrate what the schedule buys)."""
    if not slotting_enabled:
        return 0
    return rp_slot_of(station.grid, spec)


@dataclass(frozen=True)
class ReservationEntry:
    cf_slot: int
    tx: int
    rx: int
    kind: ReservationKind
    established_frame: int

    def __post_init__(self):
        if self.tx == self.rx:
            raise ValueError("reservation endpoints must differ")
        if self.cf_slot < 0:
            raise ValueError(f"bad cf_slot {self.cf_slot}")


class ReservationTable:
    """One station's view of the CFP schedule: at most one entry per slot."""

    def __init__(self, owner: int, cf_slots: int):
        self.owner = owner
        self.cf_slots = cf_slots
        self._entries: dict[int, ReservationEntry] = {}

    def get(self, slot: int) -> ReservationEntry | None:
        return self._entries.get(slot)

    def entries(self) -> list[ReservationEntry]:
        return [self._entries[s] for s in sorted(self._entries)]

    def insert(self, entry: ReservationEntry) -> ReservationEntry | None:
        """Install an entry; newest information wins. Returns the entry it
        displaced, if any (a displacement is a table inconsistency symptom
        the audits look for)."""
        if entry.cf_slot >= self.cf_slots:
            raise ValueError(f"cf_slot {entry.cf_slot} outside 0..{self.cf_slots - 1}")
        old = self._entries.get(entry.cf_slot)
        self._entries[entry.cf_slot] = entry
        return old

    def delete(self, slot: int) -> ReservationEntry | None:
        return self._entries.pop(slot, None)

    def free_slots(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.cf_slots) if s not in self._entries)

    def free_mask(self) -> int:
        mask = 0
        for s in range(self.cf_slots):
            if s not in self._entries:
                mask |= 1 << s
        return mask


def mask_to_slots(mask: int) -> tuple[int, ...]:
    out = []
    s = 0
    while mask >> s:
        if mask >> s & 1:
            out.append(s)
        s += 1
    return tuple(out)


def choose_grant(common_mask: int, kind: ReservationKind, requested: int) -> tuple[int, ...]:
    """Lowest-indexed slots out of the common free set: one slot for a
    real-time connection, min(requested, available) for a datagram burst.
    Empty tuple when nothing is common."""
    common = mask_to_slots(common_mask)
    if not common:
        return ()
    if kind is ReservationKind.REAL_TIME:
        return common[:1]
    return common[: max(1, min(requested, len(common)))]


@dataclass(frozen=True)
class ControlMessage:
    """One RP control message. dst None means broadcast. `peer` names the
    reservation counterpart on broadcast messages so hearers can build the
    entry (tx = src, rx = peer)."""

    kind: MsgKind
    src: int
    dst: int | None
    peer: int | None = None
    packet_length: int = 0
    free_mask: int = 0
    deadline_ms: float | None = None
    buffered_count: int = 0
    slots: tuple[int, ...] = ()
    entry_kind: ReservationKind | None = None


@dataclass(frozen=True)
class BackoffConfig:
    base_window: int = 2  # frames
    max_window: int = 32  # frames
    max_retries: int = 7

    def __post_init__(self):
        if self.base_window < 1 or self.max_window < self.base_window:
            raise ValueError("bad backoff window bounds")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class BackoffState:
    """Frame-granular binary exponential backoff. The attempt counter caps
    at max_retries, freezing the window; the request itself is never
    abandoned while its demand persists."""

    attempt: int = 0
    next_eligible_frame: int = 0

    def eligible(self, frame: int) -> bool:
        return frame >= self.next_eligible_frame

    def window(self, cfg: BackoffConfig) -> int:
        return min(cfg.base_window * (2 ** self.attempt), cfg.max_window)

    def register_failure(self, frame: int, rng: random.Random, cfg: BackoffConfig) -> int:
        """Record a failed attempt and draw the retry frame. Returns the
        frame the next attempt becomes eligible."""
        delay = 1 + rng.randrange(self.window(cfg))
        self.attempt = min(self.attempt + 1, cfg.max_retries)
        self.next_eligible_frame = frame + delay
        return self.next_eligible_frame

    def reset(self):
        self.attempt = 0
        self.next_eligible_frame = 0


@dataclass(frozen=True)
class MacConfig:
    slotting_enabled: bool = True
    backoff: BackoffConfig = field(default_factory=BackoffConfig)
    # micro-offset range used by same-grid carrier sensing inside an RP slot
    contention_window: int = 8

    def __post_init__(self):
        if self.contention_window < 2:
            raise ValueError("contention_window must be >= 2")


class StationMac:
    """Per-station reservation protocol state.

    Message construction and table updates live here; the engine owns
    timing, the shared medium, and queue contents.
    """

    def __init__(self, owner: int, cf_slots: int):
        self.owner = owner
        self.rt = ReservationTable(owner, cf_slots)

    # -- establishment -------------------------------------------------

    def build_request(
        self,
        peer: int,
        kind: ReservationKind,
        packet_length: int,
        deadline_ms: float | None = None,
        buffered_count: int = 0,
    ) -> ControlMessage:
        mask = self.rt.free_mask()
        if mask == 0:
            raise NoFreeSlotsError(f"station {self.owner} has no free CF slot")
        return ControlMessage(
            kind=MsgKind.CONNECT_REQUEST,
            src=self.owner,
            dst=peer,
            packet_length=packet_length,
            free_mask=mask,
            deadline_ms=deadline_ms,
            buffered_count=buffered_count,
            entry_kind=kind,
        )

    def answer_request(
        self, cr: ControlMessage, frame: int
    ) -> tuple[ControlMessage, list[ReservationEntry]] | None:
        """Receiver side: pick the grant from the common free slots and
        mark them. None means no common slot; the requester just times
        out, indistinguishable from a lost reply."""
        grant = choose_grant(
            cr.free_mask & self.rt.free_mask(), cr.entry_kind, cr.buffered_count
        )
        if not grant:
            return None
        entries = []
        for s in grant:
            e = ReservationEntry(
                cf_slot=s, tx=cr.src, rx=self.owner, kind=cr.entry_kind,
                established_frame=frame,
            )
            self.rt.insert(e)  # slots come from free_mask, nothing displaced
            entries.append(e)
        ca = ControlMessage(
            kind=MsgKind.CONNECT_ACCEPT,
            src=self.owner,
            dst=cr.src,
            slots=grant,
            entry_kind=cr.entry_kind,
        )
        return ca, entries

    def commit_grant(
        self, ca: ControlMessage, frame: int
    ) -> tuple[ControlMessage, list[ReservationEntry]]:
        """Initiator side, on accept: install the granted slots and build
        the reservation broadcast that tells the neighborhood."""
        entries = []
        for s in ca.slots:
            e = ReservationEntry(
                cf_slot=s, tx=self.owner, rx=ca.src, kind=ca.entry_kind,
                established_frame=frame,
            )
            self.rt.insert(e)  # granted out of our own advertised free set
            entries.append(e)
        srb = ControlMessage(
            kind=MsgKind.RESERVATION_BROADCAST,
            src=self.owner,
            dst=None,
            peer=ca.src,
            slots=ca.slots,
            entry_kind=ca.entry_kind,
        )
        return srb, entries

    def apply_broadcast(
        self, srb: ControlMessage, frame: int
    ) -> tuple[list[ReservationEntry], list[ReservationEntry]]:
        """Bystander side: record announced slots, newest news wins.

        Returns (inserted, displaced): entries that changed the table and
        any conflicting older entries they overwrote. The two handshake
        endpoints already hold their entries and see no change. A slot
        this station itself transmits or receives in is never displaced
        by hearsay: the foreign claim comes from a link far enough away
        to have missed our own broadcast, so both links can coexist and
        first-hand state stays authoritative until cancel or expiry.
        """
        inserted = []
        displaced = []
        for s in srb.slots:
            e = ReservationEntry(
                cf_slot=s, tx=srb.src, rx=srb.peer, kind=srb.entry_kind,
                established_frame=frame,
            )
            cur = self.rt.get(s)
            if cur and (cur.tx, cur.rx, cur.kind) == (e.tx, e.rx, e.kind):
                continue
            if cur and self.owner in (cur.tx, cur.rx):
                continue
            old = self.rt.insert(e)
            if old is not None:
                displaced.append(old)
            inserted.append(e)
        return inserted, displaced

    # -- cancellation ----------------------------------------------------

    def build_cancel(self, peer: int, slots: tuple[int, ...]) -> ControlMessage:
        for s in slots:
            e = self.rt.get(s)
            if e is None or e.tx != self.owner or e.rx != peer:
                raise ValueError(f"station {self.owner} holds no reservation at {s}")
            if e.kind is ReservationKind.DATAGRAM:
                raise DatagramCancelError("datagram reservations expire, not cancel")
        return ControlMessage(
            kind=MsgKind.CANCEL, src=self.owner, dst=peer, peer=peer, slots=slots
        )

    def answer_cancel(
        self, cc: ControlMessage
    ) -> tuple[ControlMessage, list[ReservationEntry]]:
        """Peer side: drop the entries and acknowledge. Idempotent, so a
        retried cancel after a lost ack is harmless."""
        removed = self.apply_cancel(cc.slots, tx=cc.src, rx=self.owner)
        ack = ControlMessage(
            kind=MsgKind.CANCEL_ACK, src=self.owner, dst=cc.src,
            peer=cc.src, slots=cc.slots,
        )
        return ack, removed

    def apply_cancel(
        self, slots: tuple[int, ...], tx: int, rx: int
    ) -> list[ReservationEntry]:
        """Remove entries matching a cancelled reservation. Used by both
        endpoints and by bystanders overhearing either cancel message."""
        removed = []
        for s in slots:
            e = self.rt.get(s)
            if e and e.tx == tx and e.rx == rx:
                self.rt.delete(s)
                removed.append(e)
        return removed

    # -- frame boundary --------------------------------------------------

    def end_of_frame_cleanup(self, frame: int) -> list[ReservationEntry]:
        """Datagram reservations are valid only for the frame that granted
        them; wipe them. Real-time entries stay."""
        removed = []
        for e in self.rt.entries():
            if e.kind is ReservationKind.DATAGRAM:
                self.rt.delete(e.cf_slot)
                removed.append(e)
        return removed
