"""Download the UCI Energy Efficiency data and store it as a plain CSV.

    python scripts/fetch_uci_energy.py [--out data/energy_efficiency.csv]

The archive ships an Excel sheet, so this helper needs ``pandas`` and
``openpyxl`` (``pip install pandas openpyxl``). The library itself only
reads the resulting CSV: 8 feature columns X1..X8, then targets Y1 (heating
load) and Y2 (cooling load), 768 rows.
"""

import argparse
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

URL = "https://archive.ics.uci.edu/static/public/242/energy+efficiency.zip"
COLUMNS = [f"X{i}" for i in range(1, 9)] + ["Y1", "Y2"]


def convert(excel, out: Path) -> int:
    import pandas as pd

    frame = pd.read_excel(excel).dropna(how="all").dropna(axis=1, how="all")
    frame = frame[COLUMNS]
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    return len(frame)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("data/energy_efficiency.csv"))
    parser.add_argument("--url", default=URL)
    parser.add_argument("--xlsx", type=Path, help="convert a local ENB2012_data.xlsx instead")
    args = parser.parse_args(argv)
    if args.xlsx is not None:
        n = convert(args.xlsx, args.out)
    else:
        with urllib.request.urlopen(args.url, timeout=60) as resp:
            archive = zipfile.ZipFile(io.BytesIO(resp.read()))
        name = next(n for n in archive.namelist() if n.lower().endswith(".xlsx"))
        n = convert(io.BytesIO(archive.read(name)), args.out)
    print(f"wrote {n} rows to {args.out}")
    if n != 768:
        print(f"warning: expected 768 rows, got {n}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
