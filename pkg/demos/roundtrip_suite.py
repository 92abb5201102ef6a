"""The synthetic round trip across deformation families.

Run: python demos/roundtrip_suite.py [n]
"""
import sys
import time
from collections import Counter

from tablekit.pipeline import roundtrip_seed

n = int(sys.argv[1]) if len(sys.argv) > 1 else 40
t0 = time.perf_counter()
verdicts = [roundtrip_seed(seed) for seed in range(n)]
elapsed = time.perf_counter() - t0

ok = Counter(v.kind for v in verdicts if v.ok)
total = Counter(v.kind for v in verdicts)
for kind in sorted(total):
    print(f"{kind:12s} {ok[kind]:3d}/{total[kind]:<3d}")
print(f"{sum(ok.values())}/{n} tables exact, worst corner error "
      f"{max(v.max_corner_error for v in verdicts):.4f} px, {elapsed:.1f} s")
for v in verdicts:
    if not v.ok:
        print("failed:", v.seed, v.kind, v.error)
