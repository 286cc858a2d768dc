"""Page-mapping FTL with two write paths.

The baseline path appends host pages to per-channel frontier blocks in
arrival order (stream-writes-by-time), striping one page per channel.
When the device runs pre-allocation, writes whose lba probes into an
active instance are appended to that instance's dedicated blocks instead,
so an object's pages land together regardless of how its writes were
split or interleaved on the way down.

Decision rules the brute-force oracle mirrors exactly:

* channel of block b = b % channels; page striping advances one global
  round-robin cursor per programmed page on the normal path
* claiming a frontier block prefers the lowest free id in the channel's
  group, then the lowest free id overall
* a non-GC claim first refills the free pool to the reserve threshold
  (2 + channels by default) by merging Normal victims; claims made for
  relocations skip the refill and may eat into the reserve
* victims minimize (valid_count, block_id) and need >= 1 invalid page;
  normal-write GC considers only Normal non-frontier blocks, securing
  clean blocks also considers orphan pre-allocated blocks; blocks of
  active instances are never victims
* relocations are re-programmed through the normal frontier path in
  ascending page-offset order, then the victim is erased
* every write programs the new copy first and only then invalidates the
  old one (reading the mapping after the program, since claiming the
  frontier block may have relocated the old copy), so a mid-command
  failure never loses the previous version; logical pages are counted as
  they program, keeping the conservation identity across partial failures
* trim invalidates and unmaps in ascending lba order; afterwards any
  touched pre-allocated block with no valid pages left and no active
  owner is erased straight back to the pool, lowest id first
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass

from .errors import (DeviceWedged, InsufficientSpace, NoVictim, OutOfRange,
                     Unmapped)
from .flash_media import (KIND_FA, KIND_FREE, KIND_NORMAL, VALID, FlashMedia,
                          Geometry, PhysPageAddr)
from .flashalloc import FaInstance, FaRegistry, validate_chunks
from .metrics import Counters, CostModel

VANILLA = "vanilla"
FLASHALLOC = "flashalloc"


@dataclass(frozen=True)
class WriteReceipt:
    programs: int
    copybacks_triggered: int


@dataclass(frozen=True)
class TrimReceipt:
    pages_invalidated: int
    blocks_erased: int


class Device:
    """Single-threaded command engine over one FlashMedia instance."""

    def __init__(self, geometry: Geometry, mode: str = VANILLA,
                 cost_model: CostModel | None = None,
                 reserve_blocks: int | None = None,
                 striping: bool = True):
        if mode not in (VANILLA, FLASHALLOC):
            raise ValueError(f"unknown mode {mode!r}")
        self.geometry = geometry
        self.mode = mode
        self.media = FlashMedia(geometry)
        self.counters = Counters()
        self.cost = cost_model or CostModel()
        self.striping = striping
        self.reserve = reserve_blocks if reserve_blocks is not None else 2 + geometry.channels

        cap = geometry.logical_capacity_pages
        self.map_blk = [-1] * cap  # lba -> block id, -1 if unmapped
        self.map_off = [0] * cap
        self.fa_flag = [False] * cap

        self.free_pool: list[int] = list(range(geometry.total_blocks))  # sorted
        n_frontiers = geometry.channels if striping else 1
        self.frontiers: list[int | None] = [None] * n_frontiers
        self._cursor = 0
        self._in_gc = False

        self.registry = FaRegistry() if mode == FLASHALLOC else None

    # ------------------------------------------------------------------
    # free pool and frontiers

    def _pop_free(self, prefer_channel: int | None) -> int:
        pool = self.free_pool
        if not pool:
            raise DeviceWedged("free pool empty and no reclaimable victim")
        if prefer_channel is not None:
            ch = self.geometry.channels
            for i, bid in enumerate(pool):
                if bid % ch == prefer_channel:
                    return pool.pop(i)
        return pool.pop(0)

    def _refill_reserve(self) -> None:
        while len(self.free_pool) < self.reserve:
            victim = self._find_victim(normal=True, fa_orphan=False)
            if victim is None:
                break
            self._merge_victim(victim)

    def _claim_frontier_block(self, channel: int) -> int:
        if not self._in_gc and len(self.free_pool) < self.reserve:
            self._in_gc = True
            try:
                self._refill_reserve()
            finally:
                self._in_gc = False
            # the refill's relocations may have opened this channel's
            # frontier already; claiming again would abandon it half-written
            bid = self.frontiers[channel]
            if bid is not None and \
                    self.media.blocks[bid].write_ptr < self.geometry.pages_per_block:
                return bid
        bid = self._pop_free(channel if self.striping else None)
        self.media.blocks[bid].kind = KIND_NORMAL
        return bid

    def _frontier_append(self, lba: int, token: int, copyback: bool) -> tuple[int, int]:
        """Program one page at the next normal frontier position."""
        if self.striping:
            channel = self._cursor % self.geometry.channels
            self._cursor += 1
        else:
            channel = 0
        ppb = self.geometry.pages_per_block
        bid = self.frontiers[channel]
        if bid is None or self.media.blocks[bid].write_ptr >= ppb:
            try:
                bid = self._claim_frontier_block(channel)
                self.frontiers[channel] = bid
            except DeviceWedged:
                # the device still has clean space if any other frontier is
                # open; only a device with no writable page is wedged
                bid = None
                for probe in range(1, len(self.frontiers)):
                    cand = self.frontiers[(channel + probe) % len(self.frontiers)]
                    if cand is not None and self.media.blocks[cand].write_ptr < ppb:
                        bid = cand
                        break
                if bid is None:
                    raise
        off = self.media.blocks[bid].write_ptr
        self.media.program_page(bid, lba, token)
        self.counters.physical_programs += 1
        if copyback:
            self.counters.copyback_programs += 1
            self.counters.sim_time_us += self.cost.read_us + self.cost.program_us
        else:
            self.counters.sim_time_us += self.cost.program_us
        return bid, off

    # ------------------------------------------------------------------
    # garbage collection

    def _find_victim(self, normal: bool, fa_orphan: bool) -> int | None:
        """Least-valid block of the requested classes with >= 1 invalid page,
        ties broken by lowest id. Active frontiers and blocks owned by an
        active instance are never eligible."""
        frontiers = self.frontiers
        registry = self.registry
        best = None
        best_valid = -1
        for blk in self.media.blocks:
            kind = blk.kind
            if kind == KIND_NORMAL:
                if not normal or blk.block_id in frontiers:
                    continue
            elif kind == KIND_FA:
                if not fa_orphan:
                    continue
                if registry is not None and blk.fa_owner in registry.active:
                    continue
            else:
                continue
            if blk.write_ptr - blk.valid_count < 1:
                continue
            if best is None or blk.valid_count < best_valid:
                best = blk.block_id
                best_valid = blk.valid_count
        return best

    def select_victim(self, kind_class: str) -> int:
        """kind_class is "normal" or "fa-eligible"."""
        if kind_class == "normal":
            victim = self._find_victim(normal=True, fa_orphan=False)
        elif kind_class == "fa-eligible":
            victim = self._find_victim(normal=False, fa_orphan=True)
        else:
            raise ValueError(f"unknown victim class {kind_class!r}")
        if victim is None:
            raise NoVictim(f"no {kind_class} victim with an invalid page")
        return victim

    def _merge_victim(self, block_id: int) -> int:
        """Relocate the victim's valid pages to the normal frontier, erase it,
        and return it to the pool. Returns the number of copybacks."""
        blk = self.media.blocks[block_id]
        moved = 0
        was_gc = self._in_gc
        self._in_gc = True
        try:
            for off in range(blk.write_ptr):
                if blk.page_states[off] != VALID:
                    continue
                lba = blk.lbas[off]
                new_bid, new_off = self._frontier_append(lba, blk.tokens[off], copyback=True)
                self.map_blk[lba] = new_bid
                self.map_off[lba] = new_off
                self.media.invalidate_page(block_id, off)
                moved += 1
        finally:
            self._in_gc = was_gc
        self.media.erase_block(block_id)
        self.counters.erases += 1
        self.counters.sim_time_us += self.cost.erase_us
        insort(self.free_pool, block_id)
        return moved

    def gc_for_normal_write(self) -> int:
        """One reclamation step: take a pool block if any, otherwise merge the
        best Normal victim and claim the erased victim itself."""
        if self.free_pool:
            return self._pop_free(None)
        victim = self._find_victim(normal=True, fa_orphan=False)
        if victim is None:
            raise DeviceWedged("free pool empty and no reclaimable victim")
        self._merge_victim(victim)
        self.free_pool.remove(victim)
        return victim

    def secure_clean_blocks(self, n: int) -> list[int]:
        """Produce n fully clean blocks, merging same-kind victims when the
        pool runs short. Orphan pre-allocated blocks are eligible alongside
        Normal ones; relocations always land on the Normal frontier."""
        if n < 1:
            raise ValueError("n must be >= 1")
        secured: list[int] = []
        while len(secured) < n:
            if self.free_pool:
                secured.append(self.free_pool.pop(0))
                continue
            victim = self._find_victim(normal=True, fa_orphan=True)
            if victim is None:
                for bid in secured:
                    insort(self.free_pool, bid)
                raise InsufficientSpace(
                    f"cannot produce {n} clean blocks: no invalid pages left to merge")
            self._merge_victim(victim)
        return secured

    # ------------------------------------------------------------------
    # host commands

    def _check_range(self, lba: int, length: int) -> None:
        if length < 1 or lba < 0 or lba + length > self.geometry.logical_capacity_pages:
            raise OutOfRange(f"range ({lba}, {length}) outside logical capacity")

    def host_write(self, lba_start: int, length: int, content_base: int) -> WriteReceipt:
        self._check_range(lba_start, length)
        copy0 = self.counters.copyback_programs
        registry = self.registry
        for i in range(length):
            lba = lba_start + i
            token = content_base + i
            inst_id = registry.probe(lba) if registry is not None and registry.active else None
            if inst_id is not None:
                self.fa_append(inst_id, lba, token)
            else:
                bid, off = self._frontier_append(lba, token, copyback=False)
                old_bid = self.map_blk[lba]  # claim-time GC may have moved it
                if old_bid >= 0:
                    self.media.invalidate_page(old_bid, self.map_off[lba])
                self.map_blk[lba] = bid
                self.map_off[lba] = off
                self.fa_flag[lba] = False
            self.counters.logical_pages_written += 1
        return WriteReceipt(programs=length,
                            copybacks_triggered=self.counters.copyback_programs - copy0)

    def host_read(self, lba: int) -> int:
        self._check_range(lba, 1)
        if self.map_blk[lba] < 0:
            raise Unmapped(f"lba {lba} is unmapped")
        self.counters.sim_time_us += self.cost.read_us
        blk = self.media.blocks[self.map_blk[lba]]
        return blk.tokens[self.map_off[lba]]

    def host_trim(self, lba_start: int, length: int) -> TrimReceipt:
        if length == 0:
            return TrimReceipt(0, 0)
        self._check_range(lba_start, length)
        registry = self.registry
        invalidated = 0
        touched_fa: set[int] = set()
        for lba in range(lba_start, lba_start + length):
            bid = self.map_blk[lba]
            if bid >= 0:
                self.media.invalidate_page(bid, self.map_off[lba])
                self.map_blk[lba] = -1
                invalidated += 1
                if self.media.blocks[bid].kind == KIND_FA:
                    touched_fa.add(bid)
            if self.fa_flag[lba]:
                covered = registry is not None and registry.probe(lba) is not None
                self.fa_flag[lba] = covered
        self.counters.trim_page_invalidations += invalidated
        erased = 0
        for bid in sorted(touched_fa):
            blk = self.media.blocks[bid]
            if blk.valid_count != 0 or blk.kind != KIND_FA:
                continue
            if registry is not None and blk.fa_owner in registry.active:
                continue  # an active instance may still append here
            self.media.erase_block(bid)
            self.counters.erases += 1
            self.counters.trim_block_erases += 1
            self.counters.sim_time_us += self.cost.erase_us
            insort(self.free_pool, bid)
            erased += 1
        return TrimReceipt(invalidated, erased)

    # ------------------------------------------------------------------
    # pre-allocation commands

    def flash_alloc(self, chunks) -> int:
        if self.registry is None:
            raise ValueError("device runs in vanilla mode")
        norm = validate_chunks(chunks, self.geometry.logical_capacity_pages)
        self.registry.check_disjoint(norm)
        total = sum(length for _, length in norm)
        ppb = self.geometry.pages_per_block
        n_blocks = -(-total // ppb)
        secured = self.secure_clean_blocks(n_blocks)
        ordered = self._stripe_order(secured)
        iid = self.registry.claim_id()
        for bid in ordered:
            blk = self.media.blocks[bid]
            blk.kind = KIND_FA
            blk.fa_owner = iid
        inst = FaInstance(iid, norm, ordered, ppb)
        self.registry.register(inst)
        for start, length in norm:
            for lba in range(start, start + length):
                self.fa_flag[lba] = True
        return iid

    def _stripe_order(self, block_ids: list[int]) -> list[int]:
        """Order blocks so consecutive entries cycle the channel groups."""
        ch = self.geometry.channels
        groups: dict[int, list[int]] = {}
        for bid in sorted(block_ids):
            groups.setdefault(bid % ch, []).append(bid)
        order: list[int] = []
        want = 0
        while len(order) < len(block_ids):
            for probe in range(ch):
                c = (want + probe) % ch
                if groups.get(c):
                    order.append(groups[c].pop(0))
                    want = c + 1
                    break
        return order

    def probe(self, lba: int) -> int | None:
        if self.registry is None:
            return None
        return self.registry.probe(lba)

    def fa_append(self, instance_id: int, lba: int, token: int) -> PhysPageAddr:
        inst = self.registry.active[instance_id]
        bid = inst.dedicated_blocks[inst.next_block_idx]
        ppa = self.media.program_page(bid, lba, token)
        self.counters.physical_programs += 1
        self.counters.sim_time_us += self.cost.program_us
        if self.map_blk[lba] >= 0:
            self.media.invalidate_page(self.map_blk[lba], self.map_off[lba])
        self.map_blk[lba] = ppa.block_id
        self.map_off[lba] = ppa.page_offset
        inst.next_page_offset += 1
        if inst.next_page_offset >= self.geometry.pages_per_block:
            inst.next_page_offset = 0
            inst.next_block_idx += 1
        inst.pages_written += 1
        if inst.filled:
            self.destruct_instance(instance_id)
        return ppa

    def destruct_instance(self, instance_id: int) -> None:
        if self.registry is None:
            raise ValueError("device runs in vanilla mode")
        inst = self.registry.deregister(instance_id)
        for start, length in inst.chunks:
            for lba in range(start, start + length):
                self.fa_flag[lba] = False
        # blocks keep their kind and residual valid pages until trimmed,
        # overwritten away, or merged as orphan victims

    # ------------------------------------------------------------------
    # snapshots and reports

    def region_report(self) -> dict[str, int]:
        fa = normal = free = 0
        for blk in self.media.blocks:
            if blk.kind == KIND_FA:
                fa += 1
            elif blk.kind == KIND_NORMAL:
                normal += 1
            else:
                free += 1
        return {"fa": fa, "normal": normal, "free": free}

    def snapshot(self) -> dict:
        """Canonical observable state (see digest.py for the schema)."""
        blocks = []
        for blk in self.media.blocks:
            blocks.append([blk.kind, blk.erase_count, list(blk.page_states),
                           list(blk.lbas), list(blk.tokens)])
        mapping = []
        for lba in range(self.geometry.logical_capacity_pages):
            if self.map_blk[lba] >= 0 or self.fa_flag[lba]:
                mapping.append([lba, self.map_blk[lba],
                                self.map_off[lba] if self.map_blk[lba] >= 0 else -1,
                                int(self.fa_flag[lba])])
        return {"blocks": blocks, "mapping": mapping,
                "counters": self.counters.snapshot()}
