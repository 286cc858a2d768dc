"""Raw flash geometry and the physical block/page state machine.

The media knows nothing about logical addresses beyond remembering, per
physical page, which lba and content token were programmed into it (the
reverse map GC needs for relocation). Pages within a block can only be
programmed append-only at write_ptr; reclaiming space always means erasing
a whole block. Content is a token (a monotone write sequence number), not
bytes: read-integrity checks need identity, not payloads.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BlockFull, EraseWithValidPages, FreeBlock, NotValid

# page states
CLEAN = 0
VALID = 1
INVALID = 2

# block kinds
KIND_FREE = 0
KIND_NORMAL = 1
KIND_FA = 2

KIND_NAMES = {KIND_FREE: "free", KIND_NORMAL: "normal", KIND_FA: "fa"}


@dataclass(frozen=True)
class Geometry:
    """Physical layout: blocks of append-only pages, grouped into channels.

    op_fraction is the over-provisioned share of total_blocks hidden from
    the logical capacity. Block b belongs to channel b % channels.
    """

    total_blocks: int = 128
    pages_per_block: int = 512
    page_size: int = 4096
    channels: int = 8
    op_fraction: float = 0.10

    def __post_init__(self):
        if self.total_blocks < 1 or self.pages_per_block < 1 or self.page_size < 1:
            raise ValueError("geometry dimensions must be positive")
        if not (0.0 <= self.op_fraction < 1.0):
            raise ValueError("op_fraction must be in [0, 1)")
        if self.channels < 1 or self.total_blocks % self.channels != 0:
            raise ValueError("channels must evenly divide total_blocks")

    @property
    def logical_blocks(self) -> int:
        return int(self.total_blocks * (1.0 - self.op_fraction))

    @property
    def logical_capacity_pages(self) -> int:
        return self.logical_blocks * self.pages_per_block

    @property
    def total_pages(self) -> int:
        return self.total_blocks * self.pages_per_block

    def channel_of(self, block_id: int) -> int:
        return block_id % self.channels


@dataclass(frozen=True)
class PhysPageAddr:
    block_id: int
    page_offset: int


class BlockState:
    """One erase block: append-only page array plus bookkeeping counters."""

    __slots__ = (
        "block_id",
        "kind",
        "fa_owner",
        "write_ptr",
        "page_states",
        "lbas",
        "tokens",
        "valid_count",
        "erase_count",
    )

    def __init__(self, block_id: int, pages_per_block: int):
        self.block_id = block_id
        self.kind = KIND_FREE
        self.fa_owner: int | None = None
        self.write_ptr = 0
        self.page_states = [CLEAN] * pages_per_block
        self.lbas = [-1] * pages_per_block  # reverse map offset -> lba
        self.tokens = [-1] * pages_per_block
        self.valid_count = 0
        self.erase_count = 0

    @property
    def invalid_count(self) -> int:
        # no holes: every page below write_ptr is Valid or Invalid
        return self.write_ptr - self.valid_count


class FlashMedia:
    """The array of blocks plus raw program/erase counters."""

    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        self.blocks = [BlockState(b, geometry.pages_per_block) for b in range(geometry.total_blocks)]
        self.programs_total = 0
        self.erases_total = 0

    def program_page(self, block_id: int, lba: int, token: int) -> PhysPageAddr:
        blk = self.blocks[block_id]
        if blk.write_ptr >= self.geometry.pages_per_block:
            raise BlockFull(f"block {block_id} is full")
        off = blk.write_ptr
        blk.page_states[off] = VALID
        blk.lbas[off] = lba
        blk.tokens[off] = token
        blk.write_ptr = off + 1
        blk.valid_count += 1
        self.programs_total += 1
        return PhysPageAddr(block_id, off)

    def erase_block(self, block_id: int) -> None:
        blk = self.blocks[block_id]
        if blk.valid_count > 0:
            raise EraseWithValidPages(f"block {block_id} still holds {blk.valid_count} valid pages")
        ppb = self.geometry.pages_per_block
        blk.page_states = [CLEAN] * ppb
        blk.lbas = [-1] * ppb
        blk.tokens = [-1] * ppb
        blk.write_ptr = 0
        blk.valid_count = 0
        blk.kind = KIND_FREE
        blk.fa_owner = None
        blk.erase_count += 1
        self.erases_total += 1

    def invalidate_page(self, block_id: int, page_offset: int) -> None:
        blk = self.blocks[block_id]
        if blk.page_states[page_offset] != VALID:
            raise NotValid(f"page ({block_id}, {page_offset}) is not valid")
        blk.page_states[page_offset] = INVALID
        blk.valid_count -= 1

    def block_utilization(self, block_id: int) -> float:
        blk = self.blocks[block_id]
        if blk.kind == KIND_FREE:
            raise FreeBlock(f"block {block_id} is free")
        return blk.valid_count / self.geometry.pages_per_block
