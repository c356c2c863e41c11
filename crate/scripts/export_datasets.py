#!/usr/bin/env python3
"""Export METABRIC, SUPPORT and GBSG to the CSV layout read by `fedsurv`.

METABRIC and SUPPORT come from the `survival-datasets` wheel, which ships the
DeepSurv preprocessed releases as feather files. GBSG is rebuilt from the R
`survival` package tables bundled in the `rdatasets` wheel: node-positive
Rotterdam patients plus the GBSG trial, recurrence-free survival in months,
administratively censored at 84 months.

Usage: python3 scripts/export_datasets.py [OUT_DIR]   (default: data/)
Each CSV has feature columns x0..x{p-1}, then `duration` and `event`.
"""

import io
import lzma
import pickle
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import warnings

import pandas as pd

warnings.filterwarnings("ignore", category=DeprecationWarning)

DAYS_PER_MONTH = 30.4375
GBSG_HORIZON_MONTHS = 84.0


def fetch_wheel(name: str, dest: Path) -> Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", name, "-d", str(dest)],
        check=True,
    )
    return next(dest.glob(name.replace("-", "_") + "-*.whl"))


def read_member(wheel: Path, member: str) -> bytes:
    with zipfile.ZipFile(wheel) as z:
        return z.read(member)


def write(df: pd.DataFrame, path: Path) -> None:
    df = df.copy()
    df["event"] = df["event"].astype(int)
    df.to_csv(path, index=False, float_format="%.10g")
    print(f"{path}: {len(df)} rows, {df.shape[1] - 2} features, "
          f"{100 * (1 - df['event'].mean()):.1f}% censored, "
          f"last event {df.loc[df['event'] == 1, 'duration'].max():.2f}")


def deepsurv_release(wheel: Path, name: str) -> pd.DataFrame:
    df = pd.read_feather(io.BytesIO(read_member(wheel, f"survdata/{name}.feather")))
    feats = [c for c in df.columns if c.startswith("x")]
    return df[feats + ["duration", "event"]]


def r_table(wheel: Path, name: str) -> pd.DataFrame:
    raw = read_member(wheel, f"rdatasets/_data/survival/{name}.pkl.compress")
    return pickle.loads(lzma.decompress(raw))


def gbsg(wheel: Path) -> pd.DataFrame:
    rott = r_table(wheel, "rotterdam")
    rott = rott[rott["nodes"] > 0]
    size_cat = {"<=20": 0, "20-50": 1, ">50": 2}
    rott_df = pd.DataFrame({
        "x0": rott["hormon"],
        "x1": rott["size"].astype(str).map(size_cat),
        "x2": rott["meno"],
        "x3": rott["age"],
        "x4": rott["nodes"],
        "x5": rott["pgr"],
        "x6": rott["er"],
        "days": rott["rtime"].where(rott["recur"] == 1, rott["dtime"]),
        "event": ((rott["recur"] == 1) | (rott["death"] == 1)).astype(int),
    })
    trial = r_table(wheel, "gbsg")
    trial_df = pd.DataFrame({
        "x0": trial["hormon"],
        "x1": pd.cut(trial["size"], [-1, 20, 50, 10_000], labels=[0, 1, 2]).astype(int),
        "x2": trial["meno"],
        "x3": trial["age"],
        "x4": trial["nodes"],
        "x5": trial["pgr"],
        "x6": trial["er"],
        "days": trial["rfstime"],
        "event": trial["status"],
    })
    df = pd.concat([rott_df, trial_df], ignore_index=True)
    months = df["days"] / DAYS_PER_MONTH
    late = months > GBSG_HORIZON_MONTHS
    df["duration"] = months.clip(upper=GBSG_HORIZON_MONTHS)
    df.loc[late, "event"] = 0
    feats = [f"x{i}" for i in range(7)]
    return df[feats + ["duration", "event"]].astype({f: float for f in feats})


def main() -> None:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        survdata = fetch_wheel("survival-datasets", tmp)
        rdatasets = fetch_wheel("rdatasets", tmp)
        write(deepsurv_release(survdata, "metabric"), out / "metabric.csv")
        write(deepsurv_release(survdata, "support"), out / "support.csv")
        write(gbsg(rdatasets), out / "gbsg.csv")


if __name__ == "__main__":
    main()
