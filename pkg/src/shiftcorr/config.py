"""Runtime limits and cache location.

All limits can be overridden through environment variables so that the
same code runs on a laptop and on a bigger box.
"""

import os
from pathlib import Path

#: bytes the smallest-prime-factor table may occupy
SIEVE_MEMORY_BUDGET = int(os.environ.get("SHIFTCORR_SIEVE_BUDGET", 2 * 1024**3))

#: largest N for exact q-expansions via the Eisenstein product route
EISENSTEIN_MAX_N = int(os.environ.get("SHIFTCORR_EISENSTEIN_MAX_N", 2_000_000))

#: largest N for the eta-product route (Delta only); about 2 GB peak at 1e7
ETA_MAX_N = int(os.environ.get("SHIFTCORR_ETA_MAX_N", 20_000_000))

#: segment length of the segmented sieves
SEGMENT_LENGTH = 1 << 20


def cache_dir() -> Path:
    """Directory for cached coefficient tables (created on demand)."""
    root = os.environ.get("SHIFTCORR_CACHE")
    path = Path(root) if root else Path.home() / ".cache" / "shiftcorr"
    path.mkdir(parents=True, exist_ok=True)
    return path
