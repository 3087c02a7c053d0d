#!/usr/bin/env python3
# Copyright 2026 The Ens2 Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the bundled demo datasets under data/demo/.

The files are checked in; this script only exists so they can be rebuilt.
"""

import csv
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "demo")


def write(name, header, rows):
    with open(os.path.join(OUT, name), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def fmt(x):
    return f"{x:.4f}"


def linear(rng, n):
    rows = []
    for _ in range(n):
        x = [rng.gauss(0, 1) for _ in range(4)]
        score = 1.2 * x[0] - 0.8 * x[1] + 0.5 * x[2] + rng.gauss(0, 0.6)
        y = "pos" if score > 0 else "neg"
        cells = [fmt(v) for v in x]
        if rng.random() < 0.05:
            cells[rng.randrange(4)] = ""
        rows.append(cells + [y])
    return rows


def xor(rng, n):
    rows = []
    for _ in range(n):
        a, b = rng.uniform(-1, 1), rng.uniform(-1, 1)
        n1, n2 = rng.gauss(0, 1), rng.gauss(0, 1)
        y = "same" if a * b > 0 else "diff"
        if rng.random() < 0.08:
            y = "diff" if y == "same" else "same"
        rows.append([fmt(a), fmt(b), fmt(n1), fmt(n2), y])
    return rows


COLORS = ["red", "green", "blue", "amber", "violet"]
SHAPES = ["disc", "cube", "cone"]


def noisy_cat(rng, n, unseen=False):
    rows = []
    for i in range(n):
        color = rng.choice(COLORS)
        shape = rng.choice(SHAPES)
        size = rng.uniform(0, 10)
        weight = size * 0.3 + rng.gauss(0, 1)
        base = {"red": 0, "green": 1, "blue": 2, "amber": 0, "violet": 1}[color]
        if size > 7:
            base = (base + 1) % 3
        if shape == "cone" and size < 2:
            base = 2
        if rng.random() < 0.15:
            base = rng.randrange(3)
        label = ["alpha", "beta", "gamma"][base]
        if unseen and i % 60 == 0:
            shape = "emu"
        cells = [color, shape, fmt(size), fmt(weight)]
        if rng.random() < 0.04:
            cells[0] = ""
        rows.append(cells + [label])
    return rows


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = random.Random(20260301)
    header = ["x1", "x2", "x3", "x4", "label"]
    write("linear_train.csv", header, linear(rng, 240))
    write("linear_test.csv", header, linear(rng, 240))
    header = ["a", "b", "noise1", "noise2", "label"]
    write("xor_train.csv", header, xor(rng, 240))
    write("xor_test.csv", header, xor(rng, 240))
    header = ["color", "shape", "size", "weight", "label"]
    write("noisy_cat_train.csv", header, noisy_cat(rng, 240))
    write("noisy_cat_test.csv", header, noisy_cat(rng, 240, unseen=True))


if __name__ == "__main__":
    main()
