#!/usr/bin/env python3
"""Download (or copy) a dataset file next to its manifest and pin its sha256.

    python3 scripts/fetch_datasets.py toms_hardware --url https://.../file.csv
    python3 scripts/fetch_datasets.py naval --url /path/to/local/data.txt

No URLs are built in; pass the location you obtained the data from. The file
is stored as ``datasets/<name>.csv`` and the manifest's ``sha256`` line is
rewritten so later loads detect drift.
"""

import argparse
import shutil
import sys
import urllib.request
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATASETS = ROOT / "datasets"


def fetch(name, location):
    manifest = DATASETS / f"{name}.manifest"
    if not manifest.exists():
        sys.exit(f"no manifest {manifest}")
    target = DATASETS / f"{name}.csv"
    if Path(location).exists():
        shutil.copyfile(location, target)
    else:
        with urllib.request.urlopen(location) as resp, open(target, "wb") as fh:
            shutil.copyfileobj(resp, fh)

    from amkl.data_io import file_sha256

    digest = file_sha256(target)
    lines = manifest.read_text().splitlines()
    lines = [f"sha256 = {digest}" if ln.split("=", 1)[0].strip() == "sha256" else ln for ln in lines]
    manifest.write_text("\n".join(lines) + "\n")
    print(f"{target} sha256={digest}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("name", help="manifest name under datasets/ (e.g. toms_hardware)")
    ap.add_argument("--url", required=True, help="http(s) URL or local path")
    args = ap.parse_args()
    fetch(args.name, args.url)


if __name__ == "__main__":
    main()
