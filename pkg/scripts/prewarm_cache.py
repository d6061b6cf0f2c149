"""Populate the batch cache used by tests/test_acceptance.py.

    python scripts/prewarm_cache.py [name ...]

Runs the named presets (default: all) sequentially and stores them under
$UNIDIFF_CACHE (default ./.unidiff_cache).
"""

import sys
import time

from unidiff import presets

names = sys.argv[1:] or list(presets.PRESETS)
for name in names:
    t0 = time.time()
    batch = presets.load(name)
    print(f"{name}: {batch.thetas.shape} in {time.time() - t0:.0f}s", flush=True)
