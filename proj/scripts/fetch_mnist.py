#!/usr/bin/env python3
"""Fetch MNIST digits and write them as IDX files under data/mnist/.

Two sources:
  --idx-dir DIR   official *-ubyte(.gz) files already on disk; train and test
                  are concatenated (70,000 images).
  (default)       the npm package "mnist" (10,000 genuine digits, 1,000 per
                  class, pixel values stored as floats rounded to 3 places).
                  Fetched with `npm pack`, or read from --npm-dir.
"""

import argparse
import gzip
import json
import shutil
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def write_idx(out_dir, images, labels):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(out_dir / "labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} images to {out_dir}")


def from_npm(package_dir):
    images, labels = [], []
    for digit in range(10):
        data = json.loads((package_dir / "src" / "digits" / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            raise SystemExit(f"digit {digit}: unexpected length {len(data)}")
        for start in range(0, len(data), 784):
            images.append([min(255, max(0, round(v * 255))) for v in data[start:start + 784]])
            labels.append(digit)
    return images, labels


def npm_package(work):
    subprocess.run(["npm", "pack", "--quiet", "mnist@1.1.0"], cwd=work, check=True, stdout=subprocess.DEVNULL)
    tgz = next(Path(work).glob("mnist-*.tgz"))
    with tarfile.open(tgz) as tar:
        tar.extractall(work)
    return Path(work) / "package"


def read_official(path):
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def from_official(idx_dir):
    images, labels = [], []
    for prefix in ("train", "t10k"):
        img = next(idx_dir.glob(f"{prefix}-images*"))
        lab = next(idx_dir.glob(f"{prefix}-labels*"))
        raw = read_official(img)
        n = struct.unpack(">I", raw[4:8])[0]
        images += [raw[16 + i * 784:16 + (i + 1) * 784] for i in range(n)]
        labels += list(read_official(lab)[8:])
    return images, labels


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=ROOT / "data" / "mnist")
    ap.add_argument("--idx-dir", type=Path)
    ap.add_argument("--npm-dir", type=Path, help="already extracted npm package directory")
    args = ap.parse_args()

    if args.idx_dir:
        images, labels = from_official(args.idx_dir)
    elif args.npm_dir:
        images, labels = from_npm(args.npm_dir)
    else:
        work = tempfile.mkdtemp()
        try:
            images, labels = from_npm(npm_package(work))
        finally:
            shutil.rmtree(work, ignore_errors=True)
    write_idx(args.out, images, labels)


if __name__ == "__main__":
    main()
