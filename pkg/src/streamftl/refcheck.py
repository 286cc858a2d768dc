"""Brute-force reference device for equivalence checking.

This is a from-scratch second implementation of the same command
semantics, kept deliberately naive: linear scans instead of the interval
index, per-use page counting instead of incremental valid counters, a
plain set for the free pool. It shares no code with the main engine
except the geometry type and the digest function; the duplication is the
point. Decision rules (tie-breaks, frontier policy, reserve handling)
follow the list in ftl.py and must stay in lockstep with it.

replay() consumes the trace format and returns per-command outcomes plus
the final state digest so a harness can compare engines positionally.
"""

from __future__ import annotations

from .digest import state_digest
from .flash_media import Geometry

ST_CLEAN, ST_VALID, ST_INVALID = 0, 1, 2
K_FREE, K_NORMAL, K_FA = 0, 1, 2


class _Block:
    def __init__(self, bid: int, ppb: int):
        self.bid = bid
        self.kind = K_FREE
        self.owner = None
        self.pages = [[ST_CLEAN, -1, -1] for _ in range(ppb)]
        self.erases = 0

    def write_ptr(self) -> int:
        n = 0
        for st, _, _ in self.pages:
            if st != ST_CLEAN:
                n += 1
        return n

    def valid_count(self) -> int:
        n = 0
        for st, _, _ in self.pages:
            if st == ST_VALID:
                n += 1
        return n


class _Instance:
    def __init__(self, iid, chunks, blocks, ppb):
        self.iid = iid
        self.chunks = chunks
        self.blocks = blocks
        self.written = 0
        self.capacity = len(blocks) * ppb

    def covers(self, lba):
        for s, ln in self.chunks:
            if s <= lba < s + ln:
                return True
        return False


class SimFault(Exception):
    """Internal fault carrying the error name the main engine would raise."""

    def __init__(self, name):
        super().__init__(name)
        self.name = name


class NaiveDevice:
    def __init__(self, geometry: Geometry, mode: str = "vanilla",
                 reserve_blocks: int | None = None, striping: bool = True,
                 program_us: int = 600, read_us: int = 50, erase_us: int = 3000,
                 perturb_tie_break: bool = False):
        self.geo = geometry
        self.mode = mode
        self.striping = striping
        self.reserve = reserve_blocks if reserve_blocks is not None else 2 + geometry.channels
        self.program_us, self.read_us, self.erase_us = program_us, read_us, erase_us
        self.perturb_tie_break = perturb_tie_break

        self.blocks = [_Block(b, geometry.pages_per_block) for b in range(geometry.total_blocks)]
        self.mapping: dict[int, tuple[int, int]] = {}
        self.pool = set(range(geometry.total_blocks))
        self.frontiers = [None] * (geometry.channels if striping else 1)
        self.cursor = 0
        self.in_gc = False
        self.instances: dict[int, _Instance] = {}
        self.next_iid = 1

        # counters: logical, physical, copyback, erases, trim_inv, trim_blk, time
        self.c = [0, 0, 0, 0, 0, 0, 0]

    # -- pool ----------------------------------------------------------
    def _pop_free(self, prefer_channel):
        if not self.pool:
            raise SimFault("DeviceWedged")
        if prefer_channel is not None:
            same = [b for b in self.pool if b % self.geo.channels == prefer_channel]
            if same:
                bid = min(same)
                self.pool.remove(bid)
                return bid
        bid = min(self.pool)
        self.pool.remove(bid)
        return bid

    # -- gc ------------------------------------------------------------
    def _victim(self, allow_normal, allow_orphan):
        candidates = []
        for blk in self.blocks:
            if blk.kind == K_NORMAL:
                if not allow_normal or blk.bid in self.frontiers:
                    continue
            elif blk.kind == K_FA:
                if not allow_orphan or blk.owner in self.instances:
                    continue
            else:
                continue
            valid = blk.valid_count()
            if blk.write_ptr() - valid < 1:
                continue
            candidates.append((valid, blk.bid))
        if not candidates:
            return None
        if self.perturb_tie_break:
            # sentinel mode: break valid-count ties by highest id instead
            best_valid = min(v for v, _ in candidates)
            return max(b for v, b in candidates if v == best_valid)
        return min(candidates)[1]

    def _merge(self, bid):
        blk = self.blocks[bid]
        was = self.in_gc
        self.in_gc = True
        try:
            for off, page in enumerate(blk.pages):
                if page[0] != ST_VALID:
                    continue
                lba, token = page[1], page[2]
                nb, no = self._frontier_append(lba, token, copyback=True)
                self.mapping[lba] = (nb, no)
                page[0] = ST_INVALID
        finally:
            self.in_gc = was
        if blk.valid_count() != 0:
            raise SimFault("EraseWithValidPages")
        self._erase(blk)

    def _erase(self, blk):
        blk.pages = [[ST_CLEAN, -1, -1] for _ in range(self.geo.pages_per_block)]
        blk.kind = K_FREE
        blk.owner = None
        blk.erases += 1
        self.c[3] += 1
        self.c[6] += self.erase_us
        self.pool.add(blk.bid)

    def _refill(self):
        while len(self.pool) < self.reserve:
            v = self._victim(allow_normal=True, allow_orphan=False)
            if v is None:
                return
            self._merge(v)

    # -- frontier ------------------------------------------------------
    def _frontier_append(self, lba, token, copyback):
        if self.striping:
            channel = self.cursor % self.geo.channels
            self.cursor += 1
        else:
            channel = 0
        ppb = self.geo.pages_per_block
        bid = self.frontiers[channel]
        if bid is None or self.blocks[bid].write_ptr() >= ppb:
            try:
                refreshed = None
                if not self.in_gc and len(self.pool) < self.reserve:
                    self.in_gc = True
                    try:
                        self._refill()
                    finally:
                        self.in_gc = False
                    cand = self.frontiers[channel]
                    if cand is not None and self.blocks[cand].write_ptr() < ppb:
                        refreshed = cand  # relocations re-opened this channel
                if refreshed is not None:
                    bid = refreshed
                else:
                    bid = self._pop_free(channel if self.striping else None)
                    self.blocks[bid].kind = K_NORMAL
                    self.frontiers[channel] = bid
            except SimFault as fault:
                if fault.name != "DeviceWedged":
                    raise
                bid = None
                for probe in range(1, len(self.frontiers)):
                    cand = self.frontiers[(channel + probe) % len(self.frontiers)]
                    if cand is not None and self.blocks[cand].write_ptr() < ppb:
                        bid = cand
                        break
                if bid is None:
                    raise
        blk = self.blocks[bid]
        off = blk.write_ptr()
        blk.pages[off] = [ST_VALID, lba, token]
        self.c[1] += 1
        if copyback:
            self.c[2] += 1
            self.c[6] += self.read_us + self.program_us
        else:
            self.c[6] += self.program_us
        return bid, off

    # -- commands ------------------------------------------------------
    def _check_range(self, lba, length):
        if length < 1 or lba < 0 or lba + length > self.geo.logical_capacity_pages:
            raise SimFault("OutOfRange")

    def write(self, lba_start, length, base):
        self._check_range(lba_start, length)
        for i in range(length):
            lba = lba_start + i
            token = base + i
            inst = None
            for iid in sorted(self.instances):
                if self.instances[iid].covers(lba):
                    inst = self.instances[iid]
                    break
            if inst is not None:
                self._fa_append(inst, lba, token)
            else:
                loc = self._frontier_append(lba, token, copyback=False)
                old = self.mapping.get(lba)  # claim-time GC may have moved it
                if old is not None:
                    self.blocks[old[0]].pages[old[1]][0] = ST_INVALID
                self.mapping[lba] = loc
            self.c[0] += 1

    def _fa_append(self, inst, lba, token):
        done = inst.written
        ppb = self.geo.pages_per_block
        bid = inst.blocks[done // ppb]
        blk = self.blocks[bid]
        off = blk.write_ptr()
        blk.pages[off] = [ST_VALID, lba, token]
        self.c[1] += 1
        self.c[6] += self.program_us
        old = self.mapping.get(lba)
        if old is not None:
            self.blocks[old[0]].pages[old[1]][0] = ST_INVALID
        self.mapping[lba] = (bid, off)
        inst.written += 1
        if inst.written >= inst.capacity:
            del self.instances[inst.iid]

    def trim(self, lba_start, length):
        if length == 0:
            return
        self._check_range(lba_start, length)
        touched = set()
        for lba in range(lba_start, lba_start + length):
            loc = self.mapping.pop(lba, None)
            if loc is None:
                continue
            blk = self.blocks[loc[0]]
            blk.pages[loc[1]][0] = ST_INVALID
            self.c[4] += 1
            if blk.kind == K_FA:
                touched.add(loc[0])
        for bid in sorted(touched):
            blk = self.blocks[bid]
            if blk.kind == K_FA and blk.valid_count() == 0 and blk.owner not in self.instances:
                self._erase(blk)
                self.c[5] += 1

    def read(self, lba):
        self._check_range(lba, 1)
        loc = self.mapping.get(lba)
        if loc is None:
            raise SimFault("Unmapped")
        self.c[6] += self.read_us
        return self.blocks[loc[0]].pages[loc[1]][2]

    def flashalloc(self, chunks):
        if self.mode != "flashalloc":
            return
        if not chunks:
            raise SimFault("MalformedChunks")
        norm = []
        for pair in chunks:
            s, ln = int(pair[0]), int(pair[1])
            if ln < 1 or s < 0 or s + ln > self.geo.logical_capacity_pages:
                raise SimFault("MalformedChunks")
            norm.append((s, ln))
        norm.sort()
        # overlap or adjacency inside one command's list is a malformed call
        for (s0, l0), (s1, _) in zip(norm, norm[1:]):
            if s1 <= s0 + l0:
                raise SimFault("MalformedChunks")
        for s, ln in norm:
            for inst in self.instances.values():
                for es, eln in inst.chunks:
                    if s < es + eln and es < s + ln:
                        raise SimFault("OverlapWithActiveInstance")
        total = sum(ln for _, ln in norm)
        ppb = self.geo.pages_per_block
        need = (total + ppb - 1) // ppb
        secured = []
        while len(secured) < need:
            if self.pool:
                bid = min(self.pool)
                self.pool.remove(bid)
                secured.append(bid)
                continue
            v = self._victim(allow_normal=True, allow_orphan=True)
            if v is None:
                for bid in secured:
                    self.pool.add(bid)
                raise SimFault("InsufficientSpace")
            self._merge(v)
        ordered = self._stripe(secured)
        iid = self.next_iid
        self.next_iid += 1
        for bid in ordered:
            self.blocks[bid].kind = K_FA
            self.blocks[bid].owner = iid
        self.instances[iid] = _Instance(iid, tuple(norm), ordered, ppb)

    def _stripe(self, bids):
        ch = self.geo.channels
        remaining = sorted(bids)
        order = []
        want = 0
        while remaining:
            for probe in range(ch):
                c = (want + probe) % ch
                group = [b for b in remaining if b % ch == c]
                if group:
                    order.append(group[0])
                    remaining.remove(group[0])
                    want = c + 1
                    break
        return order

    # -- snapshot ------------------------------------------------------
    def snapshot(self) -> dict:
        blocks = []
        for blk in self.blocks:
            blocks.append([blk.kind, blk.erases,
                           [p[0] for p in blk.pages],
                           [p[1] for p in blk.pages],
                           [p[2] for p in blk.pages]])
        mapping = []
        for lba in range(self.geo.logical_capacity_pages):
            loc = self.mapping.get(lba)
            flag = False
            for inst in self.instances.values():
                if inst.covers(lba):
                    flag = True
                    break
            if loc is not None or flag:
                mapping.append([lba, loc[0] if loc else -1,
                                loc[1] if loc else -1, int(flag)])
        return {"blocks": blocks, "mapping": mapping, "counters": list(self.c)}

    def digest(self) -> str:
        return state_digest(self.snapshot())


def apply_command(device: NaiveDevice, cmd) -> str:
    """Apply one trace command; returns "ok" or "err:<Name>"."""
    try:
        if cmd.op == "write":
            device.write(cmd.lba, cmd.length, cmd.content_base)
        elif cmd.op == "trim":
            device.trim(cmd.lba, cmd.length)
        elif cmd.op == "flashalloc":
            device.flashalloc(cmd.chunks)
        else:
            raise SimFault("TraceParseError")
    except SimFault as exc:
        return f"err:{exc.name}"
    return "ok"


def replay(commands, geometry: Geometry, mode: str, reserve_blocks=None,
           striping: bool = True, perturb_tie_break: bool = False):
    """Replay a command stream; returns (outcomes, digest)."""
    dev = NaiveDevice(geometry, mode=mode, reserve_blocks=reserve_blocks,
                      striping=striping, perturb_tie_break=perturb_tie_break)
    outcomes = [apply_command(dev, cmd) for cmd in commands]
    return outcomes, dev.digest()
