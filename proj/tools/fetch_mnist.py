#!/usr/bin/env python3
# Copyright 2026 The gpmeta Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes MNIST IDX files for the image-completion experiments.

With --source npm (the default) the digits come from the `mnist` npm package,
which ships 10,000 MNIST digits as JSON intensities rounded to 3 decimals. The
bytes are recovered as round(v * 255) and split 8,000 / 2,000 into the
train-* and t10k-* files, interleaved by class. With --source dir, existing
(optionally gzipped) IDX files are copied from a directory instead.
"""

import argparse
import gzip
import json
import pathlib
import shutil
import struct
import subprocess
import sys
import tarfile
import tempfile

SIDE = 28
PIXELS = SIDE * SIDE
FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def write_idx(path, dims, payload, type_code=0x08):
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBB", 0, 0, type_code, len(dims)))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def load_npm_digits(package, version):
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", f"{package}@{version}", "--silent"], cwd=tmp, check=True,
                       stdout=subprocess.DEVNULL)
        tarball = next(pathlib.Path(tmp).glob("*.tgz"))
        with tarfile.open(tarball) as tar:
            tar.extractall(tmp)
        digits = {}
        for label in range(10):
            path = pathlib.Path(tmp) / "package" / "src" / "digits" / f"{label}.json"
            values = json.loads(path.read_text())["data"]
            if len(values) % PIXELS:
                sys.exit(f"{path}: length {len(values)} is not a multiple of {PIXELS}")
            raw = bytes(min(255, max(0, round(v * 255))) for v in values)
            digits[label] = [raw[i:i + PIXELS] for i in range(0, len(raw), PIXELS)]
        return digits


def split(digits, test_every):
    # Round-robin over classes so both splits stay class-balanced.
    order = []
    longest = max(len(v) for v in digits.values())
    for i in range(longest):
        for label in range(10):
            if i < len(digits[label]):
                order.append((label, digits[label][i]))
    train = [item for k, item in enumerate(order) if k % test_every != test_every - 1]
    test = [item for k, item in enumerate(order) if k % test_every == test_every - 1]
    return train, test


def write_split(out, prefix, items):
    write_idx(out / f"{prefix}-images-idx3-ubyte", [len(items), SIDE, SIDE], b"".join(img for _, img in items))
    write_idx(out / f"{prefix}-labels-idx1-ubyte", [len(items)], bytes(label for label, _ in items))


def copy_dir(src, out):
    for name in FILES:
        plain, gz = src / name, src / (name + ".gz")
        if plain.exists():
            shutil.copyfile(plain, out / name)
        elif gz.exists():
            with gzip.open(gz, "rb") as fin, open(out / name, "wb") as fout:
                shutil.copyfileobj(fin, fout)
        else:
            sys.exit(f"missing {plain} (or .gz)")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="data/mnist", help="output directory (default: data/mnist)")
    ap.add_argument("--source", choices=["npm", "dir"], default="npm")
    ap.add_argument("--src-dir", help="directory holding the IDX files for --source dir")
    ap.add_argument("--package", default="mnist")
    ap.add_argument("--version", default="1.1.0")
    ap.add_argument("--test-every", type=int, default=5, help="every k-th digit goes to t10k-* (default 5)")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.source == "dir":
        if not args.src_dir:
            sys.exit("--source dir needs --src-dir")
        copy_dir(pathlib.Path(args.src_dir), out)
        print(f"copied IDX files to {out}")
        return
    train, test = split(load_npm_digits(args.package, args.version), args.test_every)
    write_split(out, "train", train)
    write_split(out, "t10k", test)
    print(f"wrote {len(train)} training and {len(test)} test images to {out}")


if __name__ == "__main__":
    main()
