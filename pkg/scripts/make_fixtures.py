#!/usr/bin/env python3
"""Regenerate the committed test fixtures (deterministic; safe to re-run).

Writes a small 2-layer MLP weights file, a reference output vector for the
zero input computed with plain Python arithmetic (independent of the
package's numpy forward pass), and a 10-image set with manifest.
"""

import json
import math
from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

MLP_SEED = 20240613
IMAGE_SEED = 913
H = W = 14
HIDDEN = 64
CLASSES = 10
N_IMAGES = 10


def pure_python_forward(layers, x):
    """Reference forward pass: nested lists, fsum, math.exp only."""
    z = list(x)
    for weights, bias, activation in layers:
        rows = len(bias)
        cols = len(z)
        z = [
            math.fsum(weights[r * cols + c] * z[c] for c in range(cols)) + bias[r]
            for r in range(rows)
        ]
        if activation == "relu":
            z = [max(0.0, v) for v in z]
        elif activation == "softmax":
            mx = max(z)
            e = [math.exp(v - mx) for v in z]
            s = math.fsum(e)
            z = [v / s for v in e]
    return z


def make_mlp():
    rng = np.random.default_rng(MLP_SEED)
    n = H * W
    w1 = rng.normal(0.0, 0.18, size=(HIDDEN, n))
    b1 = rng.normal(0.0, 0.05, size=HIDDEN)
    w2 = rng.normal(0.0, 0.45, size=(CLASSES, HIDDEN))
    b2 = rng.normal(0.0, 0.1, size=CLASSES)
    doc = {
        "input_shape": [H, W, 1],
        "layers": [
            {
                "rows": HIDDEN,
                "cols": n,
                "weights": w1.ravel().tolist(),
                "bias": b1.tolist(),
                "activation": "relu",
            },
            {
                "rows": CLASSES,
                "cols": HIDDEN,
                "weights": w2.ravel().tolist(),
                "bias": b2.tolist(),
                "activation": "softmax",
            },
        ],
    }
    path = FIXTURES / "mlp_14x14.json"
    path.write_text(json.dumps(doc))

    layers = [
        (doc["layers"][0]["weights"], doc["layers"][0]["bias"], "relu"),
        (doc["layers"][1]["weights"], doc["layers"][1]["bias"], "softmax"),
    ]
    ref = pure_python_forward(layers, [0.0] * n)
    (FIXTURES / "mlp_14x14_zero_ref.json").write_text(json.dumps({"probs": ref}))


def make_images():
    rng = np.random.default_rng(IMAGE_SEED)
    entries = []
    for k in range(N_IMAGES):
        data = rng.uniform(-0.45, 0.45, size=H * W).tolist()
        name = f"img{k:02d}.json"
        (FIXTURES / name).write_text(
            json.dumps({"shape": [H, W, 1], "data": data, "bounds": [-0.5, 0.5]})
        )
        entries.append({"id": f"img{k:02d}", "file": name, "label": k % CLASSES})
    (FIXTURES / "manifest.json").write_text(json.dumps({"images": entries}))


if __name__ == "__main__":
    FIXTURES.mkdir(parents=True, exist_ok=True)
    make_mlp()
    make_images()
    print(f"fixtures written to {FIXTURES}")
