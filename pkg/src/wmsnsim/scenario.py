"""Scenario files: parsing, validation, and round-tripping.

A scenario is a JSON document describing the network, the frame
layout, the traffic, and any injected faults. Validation is strict and
total: unknown keys are rejected, and every problem in the file is
collected and reported in one pass rather than bailing at the first.

Error codes are stable strings so tools and tests can match on them
rather than on message wording.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .engine import ChannelConfig, EnergyCosts
from .geometry import GridSpec, Point, Sector
from .mac import BackoffConfig, FrameLayout, MacConfig, MsgKind
from .routing import ProgressMode, RouteConfig
from .topology import Network, Station, StationKind
from .traffic import SERVICE_CLASSES, Flow, ServiceMode

FAULT_KINDS = tuple(m.value for m in MsgKind)


@dataclass(frozen=True)
class Issue:
    code: str
    path: str
    message: str

    def __str__(self):
        return f"{self.code} at {self.path}: {self.message}"


class ScenarioError(ValueError):
    """Carries every validation issue found in a scenario."""

    def __init__(self, issues: list[Issue]):
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))


@dataclass(frozen=True)
class FaultSpec:
    """Suppress one station's control message of one kind in one frame."""

    kind: str
    frame: int
    sender: int


@dataclass
class Scenario:
    stations: tuple[Station, ...]
    grid: GridSpec
    layout: FrameLayout = field(default_factory=FrameLayout)
    flows: tuple[Flow, ...] = ()
    faults: tuple[FaultSpec, ...] = ()
    horizon_frames: int = 100
    routing: RouteConfig = field(default_factory=RouteConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    energy: EnergyCosts = field(default_factory=EnergyCosts)
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    @property
    def sink(self) -> int:
        for s in self.stations:
            if s.kind is StationKind.BASE_STATION:
                return s.id
        raise ValueError("scenario has no base station")

    def build_network(self) -> Network:
        return Network(self.stations, sink=self.sink, grid_spec=self.grid)


class _Reader:
    """One validation pass's shared state."""

    def __init__(self):
        self.issues: list[Issue] = []

    def flag(self, code: str, path: str, message: str) -> None:
        self.issues.append(Issue(code, path, message))

    def mapping(self, value, path: str, allowed: tuple[str, ...]) -> dict:
        if not isinstance(value, dict):
            self.flag("E_SCHEMA", path, f"expected an object, got {type(value).__name__}")
            return {}
        for k in sorted(value):
            if k not in allowed:
                self.flag("E_UNKNOWN_KEY", f"{path}.{k}", "unknown key")
        return value

    def num(self, d: dict, key: str, path: str, default=None, required=False):
        if key not in d:
            if required:
                self.flag("E_SCHEMA", f"{path}.{key}", "missing required key")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.flag("E_BAD_VALUE", f"{path}.{key}", f"expected a number, got {v!r}")
            return default
        return v

    def integer(
        self, d: dict, key: str, path: str, default=None, required=False,
        nullable=False,
    ):
        if key not in d:
            if required:
                self.flag("E_SCHEMA", f"{path}.{key}", "missing required key")
            return default
        v = d[key]
        if v is None and nullable:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.flag("E_BAD_VALUE", f"{path}.{key}", f"expected an integer, got {v!r}")
            return default
        if isinstance(v, float):
            if not v.is_integer():
                self.flag(
                    "E_BAD_VALUE", f"{path}.{key}", f"expected an integer, got {v!r}"
                )
                return default
            v = int(v)
        return v

    def text(self, d: dict, key: str, path: str, default=None, required=False):
        if key not in d:
            if required:
                self.flag("E_SCHEMA", f"{path}.{key}", "missing required key")
            return default
        v = d[key]
        if not isinstance(v, str):
            self.flag("E_BAD_VALUE", f"{path}.{key}", f"expected a string, got {v!r}")
            return default
        return v

    def boolean(self, d: dict, key: str, path: str, default=None):
        if key not in d:
            return default
        v = d[key]
        if not isinstance(v, bool):
            self.flag("E_BAD_VALUE", f"{path}.{key}", f"expected a boolean, got {v!r}")
            return default
        return v

    def point(self, d: dict, key: str, path: str):
        v = d.get(key)
        if (
            not isinstance(v, (list, tuple))
            or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)
        ):
            self.flag("E_SCHEMA", f"{path}.{key}", "expected [x, y] coordinates")
            return None
        return Point(float(v[0]), float(v[1]))


def _read_grid(r: _Reader, data: dict) -> GridSpec:
    d = r.mapping(
        data.get("grid", {}), "grid",
        ("cell_width", "cell_height", "origin", "rp_modulus"),
    )
    width = r.num(d, "cell_width", "grid", default=100.0)
    height = r.num(d, "cell_height", "grid", default=100.0)
    origin = Point(0.0, 0.0)
    if "origin" in d:
        origin = r.point(d, "origin", "grid") or origin
    modulus = r.integer(d, "rp_modulus", "grid", default=11)
    if modulus is not None and modulus < 11:
        r.flag("E_RP_MODULUS", "grid.rp_modulus", f"must be at least 11, got {modulus}")
        modulus = 11
    try:
        return GridSpec(
            cell_width=width, cell_height=height, origin=origin, rp_modulus=modulus
        )
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", "grid", str(exc))
        return GridSpec(cell_width=100.0, cell_height=100.0)


def _read_layout(r: _Reader, data: dict) -> FrameLayout:
    d = r.mapping(
        data.get("frame", {}), "frame",
        ("rp_slots", "cf_slots", "rp_slot_len_ms", "cf_slot_len_ms"),
    )
    kw = {}
    for key, conv in (
        ("rp_slots", r.integer),
        ("cf_slots", r.integer),
        ("rp_slot_len_ms", r.num),
        ("cf_slot_len_ms", r.num),
    ):
        v = conv(d, key, "frame")
        if v is not None:
            kw[key] = v
    try:
        return FrameLayout(**kw)
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", "frame", str(exc))
        return FrameLayout()


def _read_station(r: _Reader, item, path: str) -> Station | None:
    d = r.mapping(item, path, ("id", "kind", "position", "rf_range", "sector"))
    if not d:
        return None
    sid = r.integer(d, "id", path, required=True)
    kind_name = r.text(d, "kind", path, required=True)
    pos = r.point(d, "position", path)
    rf_range = r.num(d, "rf_range", path, default=0.0)
    if sid is None or kind_name is None or pos is None:
        return None
    try:
        kind = StationKind(kind_name)
    except ValueError:
        r.flag("E_BAD_KIND", f"{path}.kind", f"unknown station kind {kind_name!r}")
        return None

    sector = None
    if "sector" in d:
        if kind is not StationKind.CLUSTER_HEAD:
            r.flag(
                "E_SECTOR_FIELDS", f"{path}.sector",
                f"{kind.value} stations carry no steerable laser sector",
            )
        else:
            sd = r.mapping(d["sector"], f"{path}.sector", ("theta", "alpha", "range"))
            theta = r.num(sd, "theta", f"{path}.sector", required=True)
            alpha = r.num(sd, "alpha", f"{path}.sector", required=True)
            reach = r.num(sd, "range", f"{path}.sector", required=True)
            if None not in (theta, alpha, reach):
                try:
                    sector = Sector(apex=pos, theta=theta, alpha=alpha, range=reach)
                except (TypeError, ValueError) as exc:
                    r.flag("E_BAD_VALUE", f"{path}.sector", str(exc))
    if kind is StationKind.CLUSTER_HEAD and sector is None:
        r.flag("E_MISSING_SECTOR", path, "cluster heads need a sector")
        return None

    try:
        return Station(id=sid, kind=kind, position=pos, rf_range=rf_range, sector=sector)
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", path, str(exc))
        return None


def _read_flow(r: _Reader, item, path: str, stations: dict[int, Station]) -> Flow | None:
    d = r.mapping(
        item, path,
        (
            "id", "src", "dst", "class", "mode", "rate_bps", "packet_size_bits",
            "burst_length", "start_frame", "stop_frame",
        ),
    )
    if not d:
        return None
    fid = r.integer(d, "id", path, required=True)
    src = r.integer(d, "src", path, required=True)
    dst = r.integer(d, "dst", path, required=True)
    cls_name = r.text(d, "class", path, required=True)
    mode_name = r.text(d, "mode", path, default="none")
    rate = r.num(d, "rate_bps", path, required=True)
    size = r.integer(d, "packet_size_bits", path, default=1000)
    burst = r.integer(d, "burst_length", path, default=8)
    start = r.integer(d, "start_frame", path, default=0)
    stop = r.integer(d, "stop_frame", path, default=None, nullable=True)
    if None in (fid, src, dst, cls_name, rate):
        return None

    ok = True
    service = SERVICE_CLASSES.get(cls_name)
    if service is None:
        r.flag("E_UNKNOWN_CLASS", f"{path}.class", f"unknown service class {cls_name!r}")
        ok = False
    try:
        mode = ServiceMode(mode_name)
    except ValueError:
        r.flag("E_BAD_SERVICE_MODE", f"{path}.mode", f"unknown mode {mode_name!r}")
        ok = False

    for end, key in ((src, "src"), (dst, "dst")):
        if end not in stations:
            r.flag("E_UNKNOWN_STATION", f"{path}.{key}", f"no station with id {end}")
            ok = False
    if ok:
        if src == dst:
            r.flag("E_FLOW_ENDPOINTS", path, "src and dst must differ")
            ok = False
        else:
            if stations[src].kind is StationKind.BASE_STATION:
                r.flag("E_FLOW_ENDPOINTS", f"{path}.src", "base station cannot source a flow")
                ok = False
            if stations[dst].kind is StationKind.SENSOR_NODE:
                r.flag("E_FLOW_ENDPOINTS", f"{path}.dst", "sensors cannot terminate a flow")
                ok = False
    if service is not None and not (
        service.bandwidth_min <= rate <= service.bandwidth_max
    ):
        r.flag(
            "E_RATE_OUT_OF_CLASS", f"{path}.rate_bps",
            f"{rate} outside {service.name} range "
            f"[{service.bandwidth_min}, {service.bandwidth_max}]",
        )
        ok = False
    if service is not None and not service.real_time and mode is not ServiceMode.NONE:
        r.flag(
            "E_BAD_SERVICE_MODE", f"{path}.mode",
            f"{service.name} is not real-time; mode must be none",
        )
        ok = False
    if not ok:
        return None
    try:
        return Flow(
            id=fid, src=src, dst=dst, service=service, mode=mode, rate_bps=rate,
            packet_size_bits=size, burst_length=burst, start_frame=start,
            stop_frame=stop,
        )
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", path, str(exc))
        return None


def _read_fault(r: _Reader, item, path: str, stations: dict[int, Station]) -> FaultSpec | None:
    d = r.mapping(item, path, ("kind", "frame", "sender"))
    if not d:
        return None
    kind = r.text(d, "kind", path, required=True)
    frame = r.integer(d, "frame", path, required=True)
    sender = r.integer(d, "sender", path, required=True)
    if None in (kind, frame, sender):
        return None
    ok = True
    if kind not in FAULT_KINDS:
        r.flag(
            "E_BAD_FAULT_KIND", f"{path}.kind",
            f"{kind!r} is not one of {', '.join(FAULT_KINDS)}",
        )
        ok = False
    if frame < 0:
        r.flag("E_BAD_VALUE", f"{path}.frame", "frame must be >= 0")
        ok = False
    if sender not in stations:
        r.flag("E_UNKNOWN_STATION", f"{path}.sender", f"no station with id {sender}")
        ok = False
    return FaultSpec(kind=kind, frame=frame, sender=sender) if ok else None


def _read_routing(r: _Reader, data: dict) -> RouteConfig:
    d = r.mapping(
        data.get("routing", {}), "routing",
        ("progress_mode", "hop_budget", "max_paths", "deviation_mode", "deviation_angle"),
    )
    kw = {}
    mode_name = r.text(d, "progress_mode", "routing")
    if mode_name is not None:
        try:
            kw["progress_mode"] = ProgressMode(mode_name)
        except ValueError:
            r.flag(
                "E_BAD_VALUE", "routing.progress_mode",
                f"unknown progress mode {mode_name!r}",
            )
    v = r.integer(d, "hop_budget", "routing", nullable=True)
    if v is not None:
        kw["hop_budget"] = v
    for key, conv in (("max_paths", r.integer), ("deviation_angle", r.num)):
        v = conv(d, key, "routing")
        if v is not None:
            kw[key] = v
    v = r.boolean(d, "deviation_mode", "routing")
    if v is not None:
        kw["deviation_mode"] = v
    try:
        return RouteConfig(**kw)
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", "routing", str(exc))
        return RouteConfig()


def _read_mac(r: _Reader, data: dict) -> MacConfig:
    d = r.mapping(
        data.get("mac", {}), "mac",
        ("slotting_enabled", "contention_window", "backoff"),
    )
    kw = {}
    v = r.boolean(d, "slotting_enabled", "mac")
    if v is not None:
        kw["slotting_enabled"] = v
    v = r.integer(d, "contention_window", "mac")
    if v is not None:
        kw["contention_window"] = v
    if "backoff" in d:
        bd = r.mapping(d["backoff"], "mac.backoff", ("base_window", "max_window", "max_retries"))
        bkw = {}
        for key in ("base_window", "max_window", "max_retries"):
            bv = r.integer(bd, key, "mac.backoff")
            if bv is not None:
                bkw[key] = bv
        try:
            kw["backoff"] = BackoffConfig(**bkw)
        except (TypeError, ValueError) as exc:
            r.flag("E_BAD_VALUE", "mac.backoff", str(exc))
    try:
        return MacConfig(**kw)
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", "mac", str(exc))
        return MacConfig()


def _read_energy(r: _Reader, data: dict) -> EnergyCosts:
    d = r.mapping(data.get("energy", {}), "energy", ("tx", "rx", "idle", "sleep"))
    kw = {}
    for key in ("tx", "rx", "idle", "sleep"):
        v = r.num(d, key, "energy")
        if v is not None:
            kw[key] = v
    try:
        return EnergyCosts(**kw)
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", "energy", str(exc))
        return EnergyCosts()


def _read_channel(r: _Reader, data: dict) -> ChannelConfig:
    d = r.mapping(data.get("channel", {}), "channel", ("interference_multiplier",))
    kw = {}
    v = r.num(d, "interference_multiplier", "channel")
    if v is not None:
        kw["interference_multiplier"] = v
    try:
        return ChannelConfig(**kw)
    except (TypeError, ValueError) as exc:
        r.flag("E_BAD_VALUE", "channel", str(exc))
        return ChannelConfig()


_TOP_KEYS = (
    "stations", "grid", "frame", "flows", "faults", "horizon_frames",
    "routing", "mac", "energy", "channel",
)


def from_dict(data: dict) -> Scenario:
    """Validate and build a scenario; raises ScenarioError listing every
    problem found."""
    r = _Reader()
    data = r.mapping(data, "$", _TOP_KEYS)

    grid = _read_grid(r, data)
    layout = _read_layout(r, data)
    horizon = r.integer(data, "horizon_frames", "$", default=100)
    if horizon is not None and horizon < 1:
        r.flag("E_BAD_VALUE", "$.horizon_frames", "must be at least 1")
        horizon = 1

    raw_stations = data.get("stations")
    if not isinstance(raw_stations, list) or not raw_stations:
        r.flag("E_SCHEMA", "$.stations", "a non-empty station list is required")
        raw_stations = []
    stations: list[Station] = []
    by_id: dict[int, Station] = {}
    for i, item in enumerate(raw_stations):
        st = _read_station(r, item, f"stations[{i}]")
        if st is None:
            continue
        if st.id in by_id:
            r.flag("E_DUP_STATION", f"stations[{i}].id", f"duplicate station id {st.id}")
            continue
        by_id[st.id] = st
        stations.append(st)

    bases = [s for s in stations if s.kind is StationKind.BASE_STATION]
    if raw_stations and not bases:
        r.flag("E_NO_BASE_STATION", "$.stations", "exactly one base station is required")
    elif len(bases) > 1:
        r.flag(
            "E_MULTI_BASE_STATION", "$.stations",
            f"expected one base station, found {len(bases)}",
        )

    raw_flows = data.get("flows", [])
    if not isinstance(raw_flows, list):
        r.flag("E_SCHEMA", "$.flows", "expected a list")
        raw_flows = []
    flows: list[Flow] = []
    flow_ids: set[int] = set()
    for i, item in enumerate(raw_flows):
        fl = _read_flow(r, item, f"flows[{i}]", by_id)
        if fl is None:
            continue
        if fl.id in flow_ids:
            r.flag("E_DUP_FLOW", f"flows[{i}].id", f"duplicate flow id {fl.id}")
            continue
        flow_ids.add(fl.id)
        flows.append(fl)

    raw_faults = data.get("faults", [])
    if not isinstance(raw_faults, list):
        r.flag("E_SCHEMA", "$.faults", "expected a list")
        raw_faults = []
    faults = []
    for i, item in enumerate(raw_faults):
        fs = _read_fault(r, item, f"faults[{i}]", by_id)
        if fs is not None:
            faults.append(fs)

    routing = _read_routing(r, data)
    mac = _read_mac(r, data)
    energy = _read_energy(r, data)
    channel = _read_channel(r, data)

    if r.issues:
        raise ScenarioError(r.issues)

    return Scenario(
        stations=tuple(stations),
        grid=grid,
        layout=layout,
        flows=tuple(flows),
        faults=tuple(faults),
        horizon_frames=horizon,
        routing=routing,
        mac=mac,
        energy=energy,
        channel=channel,
    )


def parse_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError([Issue("E_PARSE", path, str(exc))]) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            [Issue("E_PARSE", f"{path}:{exc.lineno}:{exc.colno}", exc.msg)]
        ) from exc
    return from_dict(data)


def to_dict(sc: Scenario) -> dict:
    """Inverse of from_dict, suitable for json.dump."""
    out: dict = {
        "grid": {
            "cell_width": sc.grid.cell_width,
            "cell_height": sc.grid.cell_height,
            "origin": [sc.grid.origin.x, sc.grid.origin.y],
            "rp_modulus": sc.grid.rp_modulus,
        },
        "frame": {
            "rp_slots": sc.layout.rp_slots,
            "cf_slots": sc.layout.cf_slots,
            "rp_slot_len_ms": sc.layout.rp_slot_len_ms,
            "cf_slot_len_ms": sc.layout.cf_slot_len_ms,
        },
        "horizon_frames": sc.horizon_frames,
        "stations": [],
        "flows": [],
        "faults": [
            {"kind": f.kind, "frame": f.frame, "sender": f.sender} for f in sc.faults
        ],
        "routing": {
            "progress_mode": sc.routing.progress_mode.value,
            "hop_budget": sc.routing.hop_budget,
            "max_paths": sc.routing.max_paths,
            "deviation_mode": sc.routing.deviation_mode,
            "deviation_angle": sc.routing.deviation_angle,
        },
        "mac": {
            "slotting_enabled": sc.mac.slotting_enabled,
            "contention_window": sc.mac.contention_window,
            "backoff": {
                "base_window": sc.mac.backoff.base_window,
                "max_window": sc.mac.backoff.max_window,
                "max_retries": sc.mac.backoff.max_retries,
            },
        },
        "energy": {
            "tx": sc.energy.tx,
            "rx": sc.energy.rx,
            "idle": sc.energy.idle,
            "sleep": sc.energy.sleep,
        },
        "channel": {"interference_multiplier": sc.channel.interference_multiplier},
    }
    for s in sc.stations:
        d: dict = {
            "id": s.id,
            "kind": s.kind.value,
            "position": [s.position.x, s.position.y],
            "rf_range": s.rf_range,
        }
        if s.sector is not None:
            d["sector"] = {
                "theta": s.sector.theta,
                "alpha": s.sector.alpha,
                "range": s.sector.range,
            }
        out["stations"].append(d)
    for f in sc.flows:
        out["flows"].append(
            {
                "id": f.id,
                "src": f.src,
                "dst": f.dst,
                "class": f.service.name,
                "mode": f.mode.value,
                "rate_bps": f.rate_bps,
                "packet_size_bits": f.packet_size_bits,
                "burst_length": f.burst_length,
                "start_frame": f.start_frame,
                "stop_frame": f.stop_frame,
            }
        )
    return out
