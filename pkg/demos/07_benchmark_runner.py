"""Drive the benchmark runner from Python: run a config over seeds, compare
algorithm variants, and emit CSV traces plus a gnuplot script.
"""

import tempfile
from pathlib import Path

from neurocpd.bench import (
    RunConfig,
    compare,
    compare_table,
    emit_gnuplot,
    run,
)

workdir = Path(tempfile.mkdtemp(prefix="neurocpd_demo_"))
print(f"writing outputs under {workdir}\n")

base = {
    "problem": {"kind": "difficult9", "seed": 0},
    "rank": 10,
    "budget": {"iterations": 400},
    "seeds": [0, 1, 2],
    "output_dir": str(workdir),
}

records = run(RunConfig.from_dict({**base, "algorithm": "flow"}))
for record in records:
    print(f"flow seed {record.seed}: final rel error "
          f"{record.final_rel_error:.3e} ({record.termination})")

print("\nComparing three algorithms on the same seeds:")
cfgs = [
    RunConfig.from_dict({**base, "algorithm": algo, "label": algo})
    for algo in ("flow", "hals", "mur")
]
rows = compare(cfgs, seeds=[0, 1, 2])
print(compare_table(rows))

csvs = sorted(workdir.glob("flow_seed*.csv"))
emit_gnuplot(csvs, [p.stem for p in csvs], workdir / "curves.gp",
             title="convergence")
print(f"\ngnuplot script at {workdir / 'curves.gp'}")
print("run it with: gnuplot", workdir / "curves.gp")
