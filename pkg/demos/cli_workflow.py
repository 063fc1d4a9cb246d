#!/usr/bin/env python3
"""The command-line workflow end to end, in a scratch directory.

Equivalent shell session::

    geostat synth --dataset skewed --n 400 --seed 1 --out field.csv
    geostat krige --input field.csv --out pred.csv
    geostat krige --input field.csv --config pred.json --out replay.csv
    geostat compare --task kriging --input field.csv
"""
import json
import tempfile
from pathlib import Path

from geostat.cli import main as geostat


def main():
    with tempfile.TemporaryDirectory() as td:
        d = Path(td)
        geostat(["synth", "--dataset", "skewed", "--n", "400", "--seed", "1", "--out", str(d / "field.csv")])
        geostat(["krige", "--input", str(d / "field.csv"), "--out", str(d / "pred.csv")])
        side = json.loads((d / "pred.json").read_text())
        print("variogram:", side["variogram"])
        print("test metrics:", {k: round(v, 4) for k, v in side["metrics"]["test"].items()
                                if isinstance(v, float)})

        # the sidecar records the full configuration, so it replays the run
        geostat(["krige", "--input", str(d / "field.csv"), "--config", str(d / "pred.json"),
                 "--out", str(d / "replay.csv")])
        same = (d / "pred.csv").read_bytes() == (d / "replay.csv").read_bytes()
        print("replay identical:", same, "\n")

        geostat(["compare", "--task", "kriging", "--input", str(d / "field.csv"),
                 "--out", str(d / "compare.csv")])


if __name__ == "__main__":
    main()
