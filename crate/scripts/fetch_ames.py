#!/usr/bin/env python3
"""Extract the Ames housing sale price / above-grade living area columns.

The De Cock Ames data ships inside the `rdatasets` wheel on PyPI
(`rdatasets/_data/openintro/ames.pkl.compress`, an xz-compressed pickled
DataFrame). This script downloads the wheel with pip (no install needed),
pulls out the two columns and writes a two-column CSV:

    price,area
    215000,1656
    ...

Usage: python3 scripts/fetch_ames.py [OUTPUT_CSV]
Default output: data/ames_price_area.csv
"""
import glob
import lzma
import os
import pickle
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "rdatasets/_data/openintro/ames.pkl.compress"


def main() -> int:
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join("data", "ames_price_area.csv")
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "rdatasets", "-d", tmp],
            check=True,
        )
        wheel = glob.glob(os.path.join(tmp, "rdatasets-*.whl"))[0]
        with zipfile.ZipFile(wheel) as zf:
            frame = pickle.loads(lzma.decompress(zf.read(MEMBER)))
    frame = frame[["price", "area"]].dropna()
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    frame.to_csv(out, index=False)
    print(f"wrote {len(frame)} rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
