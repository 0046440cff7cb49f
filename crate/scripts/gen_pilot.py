"""Hand-set MLP that drives: steer from the goal bearing, throttle from speed,
brake from the forward rays. Same 36-16-8-3 shape as the reference network."""
import json
import math
import sys

DIMS = [36, 16, 8, 3]
CONE = range(13, 19)  # rays within about 15 degrees of straight ahead


def build(k_steer=3.0, a=3.65, b=15.0, e=6.0, c=10.0, d=5.0, s=1.0, d_brake=8.0):
    l0 = {"w": [[0.0] * 36 for _ in range(16)], "b": [0.0] * 16, "act": "tanh"}
    l0["w"][0][33] = 1.0  # bearing
    l0["w"][1][32] = 1.0  # speed / v_max
    # one unit per forward ray: near +1 when that ray is under d_brake, else -1
    for u, i in enumerate(CONE, start=2):
        l0["w"][u][i] = -s
        l0["b"][u] = s * d_brake
    l1 = {"w": [[0.0] * 16 for _ in range(8)], "b": [0.0] * 8, "act": "tanh"}
    l1["w"][0][0] = 1.0
    l1["w"][1][1] = 1.0
    for u in range(2, 2 + len(CONE)):
        l1["w"][2][u] = 1.0
    l1["b"][2] = float(len(CONE))  # 0 when every forward ray is clear
    l2 = {"w": [[0.0] * 8 for _ in range(3)], "b": [0.0, a, -d], "act": "id"}
    l2["w"][0][0] = k_steer
    l2["w"][1][1] = -b
    l2["w"][1][2] = -e
    l2["w"][2][2] = c
    return {"layers": [l0, l1, l2]}


if __name__ == "__main__":
    kw = {k: float(v) for k, v in (a.split("=") for a in sys.argv[1:])}
    with open("weights/pilot-mlp.json", "w") as f:
        json.dump(build(**kw), f, indent=1)
        f.write("\n")
