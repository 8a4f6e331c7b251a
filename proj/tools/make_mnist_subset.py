#!/usr/bin/env python3
"""Build IDX-format MNIST train/test files from the digits bundled in the
`mnist` npm package (10,000 samples stored as per-class JSON, pixel values
already divided by 255 and rounded to three decimals).

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist

The samples are shuffled with a fixed seed and split 6000 train / 4000 test.
Output files are gzip-compressed IDX, named like the official distribution.
"""
import argparse
import gzip
import json
import pathlib
import random
import struct

ROWS = COLS = 28


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=6000)
    ap.add_argument("--seed", type=int, default=20240101)
    args = ap.parse_args()

    samples = []
    for label in range(10):
        data = json.loads((pathlib.Path(args.digits_dir) / f"{label}.json").read_text())["data"]
        assert len(data) % (ROWS * COLS) == 0
        for off in range(0, len(data), ROWS * COLS):
            px = bytes(min(255, max(0, round(v * 255))) for v in data[off:off + ROWS * COLS])
            samples.append((px, label))

    random.Random(args.seed).shuffle(samples)
    splits = {"train": samples[:args.train], "t10k": samples[args.train:]}

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in splits.items():
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x00000803, (len(rows), ROWS, COLS),
                  b"".join(px for px, _ in rows))
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x00000801, (len(rows),),
                  bytes(lbl for _, lbl in rows))
        print(f"{name}: {len(rows)} samples")


if __name__ == "__main__":
    main()
