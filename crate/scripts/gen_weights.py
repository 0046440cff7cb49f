#!/usr/bin/env python3
"""Generate weights/ref-mlp.json and the reference fixtures computed from it.

The forward pass and the seeded Gaussian perturbation are recomputed here with
plain Python arithmetic (xoshiro256++ seeded through splitmix64, Box-Muller
normals) so the Rust side is checked against an independent implementation.

    python3 scripts/gen_weights.py
"""
import json
import math
import random

MASK = (1 << 64) - 1


def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK


class Xoshiro256pp:
    def __init__(self, seed):
        st = seed & MASK
        self.s = []
        for _ in range(4):
            st, v = splitmix64(st)
            self.s.append(v)

    def next_u64(self):
        s = self.s
        result = (rotl((s[0] + s[3]) & MASK, 23) + s[0]) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def uniform(self):
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self):
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def act(name, v):
    if name == "tanh":
        return [math.tanh(x) for x in v]
    if name == "relu":
        return [x if x > 0.0 else 0.0 for x in v]
    return list(v)


def forward(layers, x):
    for layer in layers:
        y = []
        for row, b in zip(layer["w"], layer["b"]):
            acc = 0.0
            for w, xi in zip(row, x):
                acc += w * xi
            y.append(acc + b)
        x = act(layer["act"], y)
    return x


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def main():
    rnd = random.Random(20180625)
    dims = [36, 16, 8, 3]
    acts = ["tanh", "tanh", "id"]
    layers = []
    for i, (n_in, n_out) in enumerate(zip(dims, dims[1:])):
        scale = 1.0 / math.sqrt(n_in)
        layers.append({
            "w": [[round(rnd.uniform(-scale, scale), 6) for _ in range(n_in)] for _ in range(n_out)],
            "b": [round(rnd.uniform(-0.1, 0.1), 6) for _ in range(n_out)],
            "act": acts[i],
        })
    with open("weights/ref-mlp.json", "w") as f:
        json.dump({"layers": layers}, f, indent=1)
        f.write("\n")

    # 32 ranges (m), speed / v_max, goal bearing (rad), goal distance / 100, weather.
    inp = [round(5.0 + 45.0 * abs(math.sin(0.37 * i)), 3) for i in range(32)]
    inp += [0.4, -0.25, 0.37, 0.1]
    y = forward(layers, inp)
    out = {"steer": math.tanh(y[0]), "throttle": sigmoid(y[1]), "brake": sigmoid(y[2])}
    with open("fixtures/ref-mlp-io.json", "w") as f:
        json.dump({"input": inp, "raw_output": y, "command": out}, f, indent=1)
        f.write("\n")

    # Gaussian sigma = 0.1 on every weight of layer 0, row-major, seed 7.
    seed = 7
    rng = Xoshiro256pp(seed)
    perturbed = [[w + 0.1 * rng.normal() for w in row] for row in layers[0]["w"]]
    with open("fixtures/ml-gaussian-layer0.json", "w") as f:
        json.dump({"seed": seed, "sigma": 0.1, "layer": 0, "w": perturbed}, f, indent=1)
        f.write("\n")

    # A short raw stream for the RNG cross-check.
    rng = Xoshiro256pp(42)
    stream = {"seed": 42, "u64": [str(rng.next_u64()) for _ in range(4)]}
    stream["uniform"] = [rng.uniform() for _ in range(4)]
    stream["normal"] = [rng.normal() for _ in range(4)]
    with open("fixtures/rng-stream.json", "w") as f:
        json.dump(stream, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
