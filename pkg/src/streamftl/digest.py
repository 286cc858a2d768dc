"""Stable digest over observable device state.

Both the main engine and the brute-force oracle build the same snapshot
structure independently; this module only canonicalizes and hashes it.
Schema (all plain ints so json serialization is exact):

    {"blocks":   [[kind, erase_count, [page states], [lbas], [tokens]], ...]
     "mapping":  [[lba, block, offset, fa_flag], ...]   # mapped or flagged lbas, ascending
     "counters": [logical, physical, copybacks, erases,
                  trim_page_invalidations, trim_block_erases, sim_time_us]}

Equal digests imply equal observable states.
"""

from __future__ import annotations

import hashlib
import json


def state_digest(snapshot: dict) -> str:
    blob = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()
