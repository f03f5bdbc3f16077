"""Post-run trace auditing.

The auditor replays a simulation trace against the topology it ran on
and checks the protocol's correctness properties from the outside. It
shares no state with the engine: reservation tables are rebuilt purely
from rt_insert / rt_delete events, so any divergence between what the
engine did and what the protocol promises shows up as a violation.

Headline properties (these gate the process exit code):

  interferer_hop_bound    stations that garble each other's control
                          traffic are RF neighbors of neighbors, never
                          more than four hops apart
  control_collision_free  the grid schedule plus carrier sensing leaves
                          zero control collisions end to end
  table_agreement         after every completed handshake or cancel,
                          both endpoints and every station in their
                          common range agree on the affected slots

Supporting checks (reported, not gating):

  rp_slot_discipline      requests, cancels and reservation broadcasts
                          leave a station only in its own schedule slot
  rt_consistency          per frame, no station listens on a slot where
                          a second claimed transmitter could reach it
  datagram_expiry         no datagram reservation survives its frame
  realtime_persistence    real-time entries leave tables only by cancel
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .geometry import Sector, sector_contains
from .mac import my_rp_slot
from .topology import Network, common_range, rf_hop_distance

MAX_VIOLATIONS = 25  # kept per verdict; the count still reflects all


@dataclass
class Verdict:
    name: str
    passed: bool = True
    checked: int = 0
    violation_count: int = 0
    violations: list[dict] = field(default_factory=list)

    def flag(self, **detail):
        self.passed = False
        self.violation_count += 1
        if len(self.violations) < MAX_VIOLATIONS:
            self.violations.append(detail)


@dataclass
class AuditReport:
    interferer_hop_bound: Verdict
    control_collision_free: Verdict
    table_agreement: Verdict
    rp_slot_discipline: Verdict
    rt_consistency: Verdict
    datagram_expiry: Verdict
    realtime_persistence: Verdict
    control_collisions: int = 0
    data_collisions: int = 0

    @property
    def headline_passed(self) -> bool:
        return (
            self.interferer_hop_bound.passed
            and self.control_collision_free.passed
            and self.table_agreement.passed
        )

    @property
    def all_passed(self) -> bool:
        return self.headline_passed and (
            self.rp_slot_discipline.passed
            and self.rt_consistency.passed
            and self.datagram_expiry.passed
            and self.realtime_persistence.passed
        )

    def verdicts(self) -> list[Verdict]:
        return [
            self.interferer_hop_bound,
            self.control_collision_free,
            self.table_agreement,
            self.rp_slot_discipline,
            self.rt_consistency,
            self.datagram_expiry,
            self.realtime_persistence,
        ]


def run_audits(
    trace: list[dict],
    net: Network,
    rp_slot_map: dict[int, int] | None = None,
    slotting_enabled: bool = True,
    interference_multiplier: float = 1.0,
) -> AuditReport:
    chs = sorted(s.id for s in net.cluster_heads())
    ch_set = set(chs)
    if rp_slot_map is None:
        rp_slot_map = {
            sid: my_rp_slot(net.station(sid), net.grid_spec, slotting_enabled)
            for sid in chs
        }

    # independent recomputation of each laser's interference footprint
    interf: dict[int, frozenset[int]] = {}
    for sid in chs:
        s = net.station(sid)
        wide = Sector(
            apex=s.sector.apex,
            theta=s.sector.theta,
            alpha=s.sector.alpha,
            range=s.sector.range * interference_multiplier,
        )
        interf[sid] = frozenset(
            t
            for t in chs
            if t != sid and sector_contains(wide, net.station(t).position)
        )

    hop_bound = Verdict("interferer_hop_bound")
    collision_free = Verdict("control_collision_free")
    agreement = Verdict("table_agreement")
    discipline = Verdict("rp_slot_discipline")
    consistency = Verdict("rt_consistency")
    dg_expiry = Verdict("datagram_expiry")
    rt_persist = Verdict("realtime_persistence")
    control_collisions = 0
    data_collisions = 0

    hop_cache: dict[tuple[int, int], int | None] = {}

    def hops(a: int, b: int) -> int | None:
        key = (a, b) if a < b else (b, a)
        if key not in hop_cache:
            hop_cache[key] = rf_hop_distance(net, a, b)
        return hop_cache[key]

    agree_cache: dict[tuple[int, int], tuple[int, ...]] = {}

    def agreement_set(x: int, y: int) -> tuple[int, ...]:
        key = (x, y) if x < y else (y, x)
        if key not in agree_cache:
            members = {x, y} | (set(common_range(net, x, y)) & ch_set)
            agree_cache[key] = tuple(sorted(members))
        return agree_cache[key]

    # station -> cf slot -> (tx, rx, kind) as rebuilt from the trace
    tables: dict[int, dict[int, tuple[int, int, str]]] = {sid: {} for sid in chs}

    def check_frame_consistency(frame: int) -> None:
        # one pass over everything any station believes about this frame
        slots: set[int] = set()
        for sid in chs:
            slots.update(tables[sid])
        for slot in sorted(slots):
            consistency.checked += 1
            transmitters = [
                sid for sid in chs if tables[sid].get(slot, (None,))[0] == sid
            ]
            for sid in chs:
                ent = tables[sid].get(slot)
                if ent is None or ent[1] != sid:
                    continue
                expected = ent[0]
                for t in transmitters:
                    if t != expected and sid in interf[t]:
                        consistency.flag(
                            frame=frame, slot=slot, listener=sid,
                            expected=expected, interferer=t,
                        )

    def check_datagram_expiry(frame: int) -> None:
        for sid in chs:
            for slot, ent in sorted(tables[sid].items()):
                if ent[2] == "datagram":
                    dg_expiry.flag(frame=frame, station=sid, slot=slot, entry=list(ent))
        dg_expiry.checked += 1

    # (slot, tx, rx) -> endpoints whose table must still hold the entry;
    # an endpoint leaves the set the moment it deletes, so a completed
    # or half-finished cancellation stops obligating the parties that
    # already tore down
    obligations: dict[tuple[int, int, int], set[int]] = {}

    def check_realtime_persistence(frame: int) -> None:
        for (slot, tx, rx), members in sorted(obligations.items()):
            want = (tx, rx, "real_time")
            for sid in sorted(members):
                rt_persist.checked += 1
                if tables[sid].get(slot) != want:
                    rt_persist.flag(
                        frame=frame, station=sid, slot=slot,
                        expected=list(want),
                    )

    cur_frame = None
    for ev in trace:
        frame = ev["frame"]
        if cur_frame is None:
            cur_frame = frame
        elif frame != cur_frame:
            # all of cur_frame's events (cleanup included) are in; nothing
            # datagram may cross this boundary
            check_datagram_expiry(cur_frame)
            cur_frame = frame

        kind = ev["event"]
        st = ev["station"]
        d = ev["detail"]

        if kind == "rt_insert":
            tables[st][d["slot_index"]] = (d["tx"], d["rx"], d["kind"])

        elif kind == "rt_delete":
            # the persistence rule protects the reservation itself, so it
            # binds the two endpoint tables; a bystander's cached entry may
            # be displaced by fresher broadcasts (spatial slot reuse)
            if d["kind"] == "real_time" and st in (d["tx"], d["rx"]):
                rt_persist.checked += 1
                if d["reason"] != "cancel":
                    rt_persist.flag(
                        frame=frame, station=st, slot=d["slot_index"],
                        reason=d["reason"],
                    )
                held = obligations.get((d["slot_index"], d["tx"], d["rx"]))
                if held is not None:
                    held.discard(st)
                    if not held:
                        obligations.pop((d["slot_index"], d["tx"], d["rx"]))
            tables[st].pop(d["slot_index"], None)

        elif kind == "handshake_complete":
            x, y = st, d["peer"]
            if d["kind"] == "real_time":
                for slot in d["slots"]:
                    obligations[(slot, x, y)] = {x, y}
            want = (x, y, d["kind"])
            for member in agreement_set(x, y):
                for slot in d["slots"]:
                    agreement.checked += 1
                    got = tables[member].get(slot)
                    if got == want:
                        continue
                    # a listener already transmitting or receiving in the
                    # slot keeps its first-hand entry; the slot still reads
                    # busy in its table, which is all the broadcast must
                    # achieve for a station the new link could not hear
                    if got is not None and member in (got[0], got[1]):
                        continue
                    agreement.flag(
                        frame=frame, station=member, slot=slot,
                        expected=list(want),
                        found=None if got is None else list(got),
                    )

        elif kind == "cancel_complete":
            x, y = st, d["peer"]
            for member in agreement_set(x, y):
                for slot in d["slots"]:
                    agreement.checked += 1
                    got = tables[member].get(slot)
                    if got is not None and got[0] == x and got[1] == y:
                        agreement.flag(
                            frame=frame, station=member, slot=slot,
                            expected=None, found=list(got),
                        )

        elif kind == "control_tx":
            if d["kind"] in ("CR", "CC", "SRB"):
                discipline.checked += 1
                own = rp_slot_map.get(st)
                if ev["phase"] != "RP" or ev["slot"] != own:
                    discipline.flag(
                        frame=frame, station=st, kind=d["kind"],
                        slot=ev["slot"], own_slot=own,
                    )

        elif kind == "control_collision":
            control_collisions += 1
            collision_free.checked += 1
            collision_free.flag(frame=frame, station=st, senders=d["senders"])
            for a, b in combinations(sorted(d["senders"]), 2):
                hop_bound.checked += 1
                h = hops(a, b)
                if h is None or not (1 <= h <= 4):
                    hop_bound.flag(
                        frame=frame, receiver=st, pair=[a, b], hop_distance=h
                    )

        elif kind == "data_collision":
            data_collisions += 1

        elif kind == "frame_end":
            # tables still hold the frame's full schedule here; the
            # engine's cleanup deletes come after this marker
            check_frame_consistency(frame)
            check_realtime_persistence(frame)

    if cur_frame is not None:
        check_datagram_expiry(cur_frame)

    return AuditReport(
        interferer_hop_bound=hop_bound,
        control_collision_free=collision_free,
        table_agreement=agreement,
        rp_slot_discipline=discipline,
        rt_consistency=consistency,
        datagram_expiry=dg_expiry,
        realtime_persistence=rt_persist,
        control_collisions=control_collisions,
        data_collisions=data_collisions,
    )
