#!/usr/bin/env python3
"""Generate the bundled town-A calibration scenarios.

Frame convention: x to the east, y to the south (screen axes), heading measured
from +x towards +y. Run from the repository root:

    python3 scripts/gen_scenarios.py
"""
import json
import math
import os

LANE_WIDTH = 3.5
CURB_OFFSET = 5.0
ARC_STEP_DEG = 5.0
WAYPOINT_SPACING = 4.0


def line(a, b):
    return [list(a), list(b)]


def arc(center, radius, a0, a1):
    n = max(2, int(round(abs(a1 - a0) / ARC_STEP_DEG)) + 1)
    pts = []
    for i in range(n):
        a = math.radians(a0 + (a1 - a0) * i / (n - 1))
        pts.append([round(center[0] + radius * math.cos(a), 9),
                    round(center[1] + radius * math.sin(a), 9)])
    return pts


# Ring road 240 x 160 with 20 m corners, a north-south avenue at x = 120 and
# three 15 m connector arcs.
LANES = {
    "T": line((20, 0), (220, 0)),
    "C1": arc((220, 20), 20, -90, 0),
    "R": line((240, 20), (240, 140)),
    "C2": arc((220, 140), 20, 0, 90),
    "B": line((220, 160), (20, 160)),
    "C3": arc((20, 140), 20, 90, 180),
    "L": line((0, 140), (0, 20)),
    "C4": arc((20, 20), 20, 180, 270),
    "A": line((120, 15), (120, 145)),
    "K1": arc((105, 15), 15, -90, 0),
    "K2": arc((135, 15), 15, 270, 180),
    "K3": arc((135, 145), 15, 180, 90),
}


def piece(name, reverse=False):
    pts = [list(p) for p in LANES[name]]
    return pts[::-1] if reverse else pts


def clip(pts, start=None, end=None):
    """Cut a straight two-point piece to start/end points lying on it."""
    pts = [list(p) for p in pts]
    if start is not None:
        pts[0] = list(start)
    if end is not None:
        pts[-1] = list(end)
    return pts


def concat(*pieces):
    out = []
    for p in pieces:
        for q in p:
            if out and math.hypot(out[-1][0] - q[0], out[-1][1] - q[1]) < 1e-9:
                continue
            out.append(q)
    return out


def resample(poly, spacing):
    """Points every `spacing` metres of arc length, excluding the start, ending at the end."""
    seglens = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(poly, poly[1:])]
    total = sum(seglens)
    n = max(1, int(math.ceil(total / spacing)))
    step = total / n
    out = []
    for k in range(1, n + 1):
        s = k * step
        acc = 0.0
        for (a, b), l in zip(zip(poly, poly[1:]), seglens):
            if acc + l >= s - 1e-9:
                t = (s - acc) / l
                out.append([round(a[0] + t * (b[0] - a[0]), 6), round(a[1] + t * (b[1] - a[1]), 6)])
                break
            acc += l
    return out, total


def route(*pieces):
    return concat(*pieces)


MISSIONS = [
    route(clip(piece("T"), start=(30, 0)), piece("C1"), clip(piece("R"), end=(240, 100))),
    route(clip(piece("T"), start=(60, 0)), piece("C1"), piece("R"), piece("C2"), clip(piece("B"), end=(100, 160))),
    route(clip(piece("T", True), start=(200, 0)), piece("C4", True), piece("L", True), piece("C3", True), clip(piece("B", True), end=(80, 160))),
    route(line((40, 0), (105, 0)), piece("K1"), piece("A"), piece("K3"), line((135, 160), (200, 160))),
    route(line((200, 0), (135, 0)), piece("K2"), piece("A"), piece("K3"), line((135, 160), (220, 160)), piece("C2", True), clip(piece("R", True), end=(240, 60))),
    route(clip(piece("L"), start=(0, 120)), piece("C4"), clip(piece("T"), end=(180, 0))),
    route(clip(piece("B"), start=(200, 160)), piece("C3"), piece("L"), piece("C4"), clip(piece("T"), end=(60, 0))),
    route(clip(piece("R"), start=(240, 40)), piece("C2"), clip(piece("B"), end=(40, 160))),
    route(line((120, 130), (120, 15)), piece("K1", True), line((105, 0), (40, 0))),
    route(line((120, 140), (120, 15)), piece("K2", True), line((135, 0), (220, 0)), piece("C1"), clip(piece("R"), end=(240, 80))),
    route(line((200, 160), (135, 160)), piece("K3", True), piece("A", True), piece("K1", True), line((105, 0), (20, 0)), piece("C4", True), clip(piece("L", True), end=(0, 100))),
    route(clip(piece("T"), start=(30, 0)), piece("C1"), piece("R"), piece("C2"), piece("B"), piece("C3"), clip(piece("L"), end=(0, 80))),
    route(clip(piece("R", True), start=(240, 120)), piece("C1", True), clip(piece("T", True), end=(150, 0))),
    route(clip(piece("B"), start=(100, 160)), piece("C3"), clip(piece("L"), end=(0, 40))),
    route(clip(piece("L", True), start=(0, 60)), piece("C3", True), clip(piece("B", True), end=(110, 160))),
    route(clip(piece("T"), start=(140, 0)), piece("C1"), piece("R"), piece("C2"), clip(piece("B"), end=(150, 160))),
    route(line((210, 0), (135, 0)), piece("K2"), piece("A"), piece("K3"), line((135, 160), (180, 160))),
    route(clip(piece("B", True), start=(60, 160)), piece("C2", True), piece("R", True), piece("C1", True), clip(piece("T", True), end=(160, 0))),
    route(clip(piece("L"), start=(0, 130)), piece("C4"), line((20, 0), (105, 0)), piece("K1"), line((120, 15), (120, 120))),
    route(clip(piece("R", True), start=(240, 130)), piece("C1", True), line((220, 0), (135, 0)), piece("K2"), line((120, 15), (120, 110))),
]

ACTORS = [
    {
        "id": "ped-crossing",
        "kind": "pedestrian",
        "pose": {"x": 75.0, "y": -8.0, "heading": math.pi / 2},
        "radius": 0.3,
        "script": [
            {"frame": 300, "pose": {"x": 75.0, "y": -8.0, "heading": math.pi / 2}},
            {"frame": 480, "pose": {"x": 75.0, "y": 8.0, "heading": math.pi / 2}},
        ],
    },
    {
        "id": "ped-sidewalk",
        "kind": "pedestrian",
        "pose": {"x": 247.0, "y": 30.0, "heading": math.pi / 2},
        "radius": 0.3,
        "script": [{"frame": 1000, "pose": {"x": 247.0, "y": 130.0, "heading": math.pi / 2}}],
    },
    {
        "id": "parked-car",
        "kind": "vehicle",
        "pose": {"x": 170.0, "y": 163.8, "heading": math.pi},
        "radius": 1.0,
        "script": [],
    },
    {
        "id": "bollard",
        "kind": "static_obstacle",
        "pose": {"x": -6.5, "y": 80.0, "heading": 0.0},
        "radius": 0.5,
        "script": [],
    },
]

ORDER = ["T", "C1", "R", "C2", "B", "C3", "L", "C4", "A", "K1", "K2", "K3"]


def scenario(idx, poly):
    wps, length = resample(poly, WAYPOINT_SPACING)
    h = math.atan2(poly[1][1] - poly[0][1], poly[1][0] - poly[0][0])
    start = {"x": float(poly[0][0]), "y": float(poly[0][1]), "heading": h}
    return {
        "name": "town-A" if idx == 0 else f"town-A-{idx + 1:02d}",
        "tick_rate": 15,
        "weather": 0.0,
        "lanes": [
            {"id": name, "centerline": LANES[name], "lane_width": LANE_WIDTH, "curb_offset": CURB_OFFSET}
            for name in ORDER
        ],
        "actors": ACTORS,
        "ego": {"wheelbase": 2.7, "half_width": 1.0, "speed": 0.0},
        "mission": {
            "start": start,
            "waypoints": [{"x": p[0], "y": p[1]} for p in wps],
            "goal_radius": 2.0,
            "time_budget": float(math.ceil(length / 5.0 + 15.0)),
        },
    }


def main():
    out_dir = os.path.join("scenarios", "calibration")
    os.makedirs(out_dir, exist_ok=True)
    for i, poly in enumerate(MISSIONS):
        sc = scenario(i, poly)
        with open(os.path.join(out_dir, sc["name"] + ".json"), "w") as f:
            json.dump(sc, f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
