# The command line, end to end
#
# synth -> evaluate -> rank/top, driven through cdsal.cli.main so the demo
# runs without the console script on PATH.  Output lands in a temp dir.

# %%
import csv
import json
import tempfile
from pathlib import Path

from cdsal.cli import main

work = Path(tempfile.mkdtemp(prefix="cdsal-demo-"))
(work / "synth.json").write_text(json.dumps({
    "defaults": {"frame_count": 24},
    "sequences": [{"sequence_id": "left", "region_start": [90.0, 140.0]},
                  {"sequence_id": "right", "region_start": [260.0, 140.0]}],
}))
main(["synth", "--config", str(work / "synth.json"), "--out", str(work / "data"), "--seed", "10"])
print(sorted(p.name for p in (work / "data").iterdir()))

# %%
(work / "run.json").write_text(json.dumps({
    "manifest": "data/manifest.json",
    "models": ["gauss", "mvmag", "obdl", "gmc-mvmag"],
    "metrics": {"ids": ["auc", "auc_p", "nss", "pcc"], "bootstrap": 40, "seed": 1},
}))
code = main(["evaluate", "--config", str(work / "run.json"), "--out", str(work / "out")])
print("exit", code, sorted(p.name for p in (work / "out").iterdir()))

# %%
with open(work / "out" / "summary.csv", newline="") as fh:
    for r in csv.DictReader(fh):
        if r["sequence"] == "*" and r["metric"] == "auc_p":
            print(f"{r['model']:10s} {float(r['mean']):.3f} +/- {float(r['sem']):.3f}")

# %%
main(["top", "--summary", str(work / "out" / "summary.csv"), "--metric", "auc_p"])
print("plots in", work / "out" / "plots")
