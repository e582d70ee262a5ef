"""Train the toy bias-free MLP used by cmpswhe-inference and export test digits.

Data: scikit-learn's bundled 8x8 handwritten digits, upscaled to 28x28
(20x20 digit centred in a 4-pixel border). Writes

    crates/inference/data/mlp.txt        model file (float weights)
    crates/inference/data/digits/*.pgm   held-out test images, label in name

Usage: python3 tools/train_mlp.py [--n 2] [--degree 2] [--lo -4] [--hi 4]
"""

import argparse
import os

import numpy as np
import torch
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P
from PIL import Image
from sklearn.datasets import load_digits

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "crates", "inference", "data")
HIDDEN = 16
TEST = 200
NODES = 4096


def relu_fit(degree, lo, hi):
    """Chebyshev projection of max(0, x) on [lo, hi], power basis, lowest first."""
    j = np.arange(NODES)
    theta = (2 * j + 1) * np.pi / (2 * NODES)
    t = np.cos(theta)
    f = np.maximum(0.0, (t * (hi - lo) + hi + lo) / 2)
    c = np.array([2.0 / NODES * np.sum(f * np.cos(k * theta)) for k in range(degree + 1)])
    c[0] /= 2
    return C.Chebyshev(c, domain=[lo, hi]).convert(kind=P.Polynomial).coef


def upscale(img8):
    im = Image.fromarray((img8 * 255.0 / 16.0).astype(np.uint8))
    im = im.resize((20, 20), Image.BILINEAR)
    out = np.zeros((28, 28), dtype=np.uint8)
    out[4:24, 4:24] = np.asarray(im)
    return out


def poly(z, coef):
    acc = torch.zeros_like(z)
    for k in reversed(coef):
        acc = acc * z + float(k)
    return acc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--degree", type=int, default=2)
    ap.add_argument("--lo", type=float, default=-4.0)
    ap.add_argument("--hi", type=float, default=4.0)
    ap.add_argument("--epochs", type=int, default=400)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    torch.manual_seed(args.seed)
    digits = load_digits()
    order = rng.permutation(len(digits.target))
    images = np.stack([upscale(digits.images[i]) for i in order])
    labels = digits.target[order]
    x = torch.tensor(images.reshape(len(images), -1) / 255.0, dtype=torch.float32)
    y = torch.tensor(labels, dtype=torch.long)
    xtr, ytr, xte, yte = x[TEST:], y[TEST:], x[:TEST], y[:TEST]

    coef = relu_fit(args.degree, args.lo, args.hi)
    dims = [784, HIDDEN, HIDDEN, 10]
    ws = [torch.nn.Parameter(torch.randn(dims[i + 1], dims[i]) * (1.0 / np.sqrt(dims[i]))) for i in range(3)]
    opt = torch.optim.Adam(ws, lr=0.01)

    def forward(inp):
        h, pre = inp, []
        for i, w in enumerate(ws):
            z = h @ w.T
            if i < 2:
                pre.append(z)
                h = poly(z, coef)
            else:
                h = z
        return h, pre

    for epoch in range(args.epochs):
        out, pre = forward(xtr)
        loss = torch.nn.functional.cross_entropy(out, ytr)
        for z in pre:
            loss = loss + 0.1 * torch.relu(z.abs() - args.hi).pow(2).mean()
        opt.zero_grad()
        loss.backward()
        opt.step()

    with torch.no_grad():
        tr_acc = (forward(xtr)[0].argmax(1) == ytr).float().mean().item()
        te_acc = (forward(xte)[0].argmax(1) == yte).float().mean().item()
    print(f"train accuracy {tr_acc:.3f}, test accuracy {te_acc:.3f}")

    os.makedirs(os.path.join(ROOT, "digits"), exist_ok=True)
    with open(os.path.join(ROOT, "mlp.txt"), "w") as fh:
        fh.write("mlp v1\n")
        fh.write(f"n {args.n}\n")
        fh.write(f"activation {args.degree} {args.lo!r} {args.hi!r}\n")
        fh.write(f"layers {len(ws)}\n")
        for w in ws:
            rows, cols = w.shape
            fh.write(f"dense {rows} {cols}\n")
            for row in w.detach().numpy().astype(np.float64):
                fh.write(" ".join(repr(round(float(v), 6)) for v in row) + "\n")
    for i in range(TEST):
        name = os.path.join(ROOT, "digits", f"{i:03d}_{labels[i]}.pgm")
        Image.fromarray(images[i]).save(name)


if __name__ == "__main__":
    main()
