"""A small out-of-sample complexity sweep.

Runs the bundled ``demo.toml`` configuration (about five seconds) and prints
the Sharpe ratio and mean SDF return across complexity c = P / T for both
estimators, then the average basis-pursuit support size.

    python demos/02_complexity_sweep.py [out_dir]
"""

import sys
from importlib import resources

from sparsesdf.backtest import run_sweep, support_curve, write_sweep
from sparsesdf.config import load_config

path = resources.files("sparsesdf") / "configs" / "demo.toml"
cfg = load_config(str(path), threads=1)
panel = cfg.load_panel()
result = run_sweep(panel, cfg.sweep_config())

print(f"{'c':>6} {'P':>5} {'method':>13} {'mean':>9} {'sharpe':>8} {'hjd':>9}")
for s in result.summary:
    m = s["metrics"]
    print(f"{s['c']:6g} {s['P']:5d} {s['method']:>13} {m['mean']:9.4f} {m['sharpe']:8.4f} "
          f"{m['hjd']:9.4f}")

print("\nbasis-pursuit support size (mean over windows and draws)")
for row in support_curve(result):
    print(f"  c = {row['c']:g}: {row['mean']:.1f} (T = {cfg.sweep_config().T})")

if len(sys.argv) > 1:
    files = write_sweep(result, sys.argv[1])
    print(f"\nwrote {', '.join(files)} to {sys.argv[1]}")
