"""Scenario builders shared across the test modules.

Each builder returns a plain JSON-shaped dict so tests can tweak any
field before handing it to from_dict().
"""

import math

HALF_PI = math.pi / 2.0


def ch(i, x, y, theta=0.0, alpha=HALF_PI, reach=150.0, rf=120.0):
    return {
        "id": i,
        "kind": "cluster_head",
        "position": [x, y],
        "rf_range": rf,
        "sector": {"theta": theta, "alpha": alpha, "range": reach},
    }


def bs(i, x, y):
    return {"id": i, "kind": "base_station", "position": [x, y], "rf_range": 0.0}


def flow(i, src, dst, cls="CBR", mode="bonded", rate=64000, size=1000, **kw):
    d = {
        "id": i, "src": src, "dst": dst, "class": cls, "mode": mode,
        "rate_bps": rate, "packet_size_bits": size,
    }
    d.update(kw)
    return d


def base(stations, flows=(), horizon=200, faults=(), **top):
    data = {
        "grid": {"cell_width": 100.0, "cell_height": 100.0, "rp_modulus": 11},
        "frame": {"rp_slots": 11, "cf_slots": 20},
        "horizon_frames": horizon,
        "stations": list(stations),
        "flows": list(flows),
        "faults": list(faults),
    }
    data.update(top)
    return data


def two_hop(horizon=200, stop_frame=None, faults=(), mode="bonded", rate=64000):
    """One CBR flow over CH 1 -> CH 2 -> base station 9, straight line."""
    f = flow(1, 1, 9, mode=mode, rate=rate)
    if stop_frame is not None:
        f["stop_frame"] = stop_frame
    stations = [ch(1, 50, 50), ch(2, 150, 50), bs(9, 250, 50)]
    return base(stations, [f], horizon=horizon, faults=faults)


def mixed_traffic(horizon=120):
    """Real-time, plain real-time, and datagram flows sharing one hop."""
    stations = [ch(1, 50, 50), ch(2, 150, 50), bs(9, 250, 50)]
    flows = [
        flow(1, 1, 9, cls="rtVBR", mode="bonded", rate=160000, size=2000),
        flow(2, 1, 9, cls="CBR", mode="none", rate=64000),
        flow(3, 1, 9, cls="ABR", mode="none", rate=1_000_000, size=4000,
             burst_length=8),
    ]
    return base(stations, flows, horizon=horizon)


def grid(n=5, flows=(), horizon=200, slotting=True, faults=(), rf=150.0):
    """n x n cluster heads at cell centers, base station east of the
    middle row. Station id is n*gy + gx; the base station is id 100.

    With rf 150 cells sharing a schedule slot sit at least
    sqrt(10)*100 ~ 316 apart, well past the interference radius, so
    compliant slotting cannot produce control collisions here.
    """
    stations = [
        ch(n * gy + gx, 50.0 + 100.0 * gx, 50.0 + 100.0 * gy, rf=rf)
        for gy in range(n)
        for gx in range(n)
    ]
    stations.append(bs(100, 50.0 + 100.0 * n, 50.0 + 100.0 * (n // 2)))
    data = base(stations, flows, horizon=horizon, faults=faults)
    if not slotting:
        data["mac"] = {"slotting_enabled": False}
    return data


def grid_flows(n=5, count=3, rate=64000):
    """CBR flows out of column 0, one per row starting at row 0."""
    return [
        flow(k + 1, n * k, 100, mode="bonded", rate=rate) for k in range(count)
    ]


def hidden_terminal(horizon=60):
    """a and b sit in distant cells that share RP slot 5 (3*3+2*1+5 = 16
    = 5 mod 11), both within decode range of r but hidden from each
    other. Their first requests go out in the same slot of the same
    frame and collide at r."""
    a_theta = math.atan2(50.0, 150.0)  # a aims at r
    b_theta = math.atan2(-50.0, -150.0)  # b aims back at r
    stations = [
        ch(1, 50, 50, theta=a_theta, reach=170, rf=170),
        ch(2, 350, 150, theta=b_theta, reach=170, rf=170),
        ch(3, 200, 100, theta=HALF_PI, reach=210, rf=170),
        bs(9, 200, 300),
    ]
    flows = [flow(1, 1, 9), flow(2, 2, 9)]
    return base(stations, flows, horizon=horizon)


def contention(horizon=50):
    """Two cluster heads in the same grid cell, both with traffic toward
    the same relay: carrier sensing and seeded backoff decide who goes
    first."""
    stations = [
        ch(1, 30, 50),
        ch(2, 70, 50),
        ch(3, 150, 50),
        bs(9, 250, 50),
    ]
    flows = [flow(1, 1, 9), flow(2, 2, 9)]
    return base(stations, flows, horizon=horizon)
