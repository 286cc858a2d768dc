"""Pre-allocation instances: registry, range probing, append bookkeeping.

An instance binds a set of logical chunks to dedicated flash blocks with an
append pointer. The registry keeps a flat ordered interval index so a probe
is O(log n); the brute-force oracle answers the same question by scanning
every active instance, and the two must agree for every lba.
"""

from __future__ import annotations

from bisect import bisect_right, insort

from .errors import MalformedChunks, OverlapWithActiveInstance, UnknownInstance


class FaInstance:
    """Metadata for one active pre-allocated object.

    chunks are (lba_start, length) pairs, sorted, non-overlapping and
    non-adjacent. total_pages is the chunk total rounded up to a block
    multiple; dedicated_blocks holds exactly that many blocks.
    """

    __slots__ = ("instance_id", "chunks", "dedicated_blocks", "next_block_idx",
                 "next_page_offset", "pages_written", "chunk_pages", "total_pages")

    def __init__(self, instance_id: int, chunks: tuple, dedicated_blocks: list,
                 pages_per_block: int):
        self.instance_id = instance_id
        self.chunks = chunks
        self.dedicated_blocks = dedicated_blocks
        self.next_block_idx = 0
        self.next_page_offset = 0
        self.pages_written = 0
        self.chunk_pages = sum(length for _, length in chunks)
        self.total_pages = len(dedicated_blocks) * pages_per_block

    @property
    def filled(self) -> bool:
        return self.pages_written >= self.total_pages

    def covers(self, lba: int) -> bool:
        for start, length in self.chunks:
            if start <= lba < start + length:
                return True
        return False


def validate_chunks(chunks, logical_capacity: int) -> tuple:
    """Normalize and validate a chunk list: sorted, in range, pairwise
    disjoint and non-adjacent. Returns the sorted tuple."""
    if not chunks:
        raise MalformedChunks("empty chunk list")
    norm = []
    for item in chunks:
        try:
            start, length = int(item[0]), int(item[1])
        except (TypeError, ValueError, IndexError):
            raise MalformedChunks(f"bad chunk {item!r}") from None
        if length < 1:
            raise MalformedChunks(f"chunk length must be >= 1, got {length}")
        if start < 0 or start + length > logical_capacity:
            raise MalformedChunks(f"chunk ({start}, {length}) outside logical range")
        norm.append((start, length))
    norm.sort()
    for (s0, l0), (s1, _) in zip(norm, norm[1:]):
        if s1 < s0 + l0:
            raise MalformedChunks("chunks overlap")
        if s1 == s0 + l0:
            raise MalformedChunks("chunks are adjacent; merge them")
    return tuple(norm)


class FaRegistry:
    """Active-instance table plus an ordered interval index over all chunks."""

    def __init__(self):
        self.active: dict[int, FaInstance] = {}
        self.next_id = 1
        # parallel arrays sorted by interval start; intervals never overlap
        self._starts: list[int] = []
        self._ends: list[int] = []
        self._ids: list[int] = []

    def claim_id(self) -> int:
        iid = self.next_id
        self.next_id += 1  # ids never recycle within a run
        return iid

    def check_disjoint(self, chunks: tuple) -> None:
        for start, length in chunks:
            i = bisect_right(self._starts, start) - 1
            if i >= 0 and start < self._ends[i]:
                raise OverlapWithActiveInstance(f"lba {start} already covered")
            if i + 1 < len(self._starts) and self._starts[i + 1] < start + length:
                raise OverlapWithActiveInstance(
                    f"range ({start}, {length}) overlaps an active instance")

    def register(self, inst: FaInstance) -> None:
        for start, length in inst.chunks:
            i = bisect_right(self._starts, start)
            self._starts.insert(i, start)
            self._ends.insert(i, start + length)
            self._ids.insert(i, inst.instance_id)
        self.active[inst.instance_id] = inst

    def deregister(self, instance_id: int) -> FaInstance:
        inst = self.active.pop(instance_id, None)
        if inst is None:
            raise UnknownInstance(f"instance {instance_id} is not active")
        for pos in range(len(self._ids) - 1, -1, -1):
            if self._ids[pos] == instance_id:
                del self._starts[pos]
                del self._ends[pos]
                del self._ids[pos]
        return inst

    def probe(self, lba: int) -> int | None:
        i = bisect_right(self._starts, lba) - 1
        if i >= 0 and lba < self._ends[i]:
            return self._ids[i]
        return None

    def probe_scan(self, lba: int) -> int | None:
        """Reference linear scan over active instances (probe/scan equivalence)."""
        for iid in sorted(self.active):
            if self.active[iid].covers(lba):
                return iid
        return None

    def __len__(self) -> int:
        return len(self.active)
