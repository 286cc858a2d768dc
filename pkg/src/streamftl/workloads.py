"""Seeded workload generators for the four write-multiplexing scenarios.

Each generator is a pure function of (config, seed) producing a Program:
named writer streams plus a list of rounds. Within a round every stream's
events interleave chunk-by-chunk at the host model; between rounds the
driver drains completely. The barrier is what lets a later event depend on
an earlier one across streams (a compaction may only trim tables whose
writes already reached the device), while everything inside a round
multiplexes freely, which is the effect under study.

All generators honor two structural invariants: a trim range was fully
written earlier in program order, and a pre-allocated range is written
before the object's trim. In vanilla mode no pre-allocation events are
emitted (and the journal ring is not trimmed on wrap); everything else is
identical between modes.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .errors import ConfigInvalid, RegionOverlap
from .hostmodel import AllocOp, TrimOp, WriteOp

VANILLA = "vanilla"
FLASHALLOC = "flashalloc"


@dataclass
class Program:
    streams: list = field(default_factory=list)   # (stream_id, tenant_id)
    rounds: list = field(default_factory=list)    # [[(stream_id, op), ...], ...]
    regions: dict = field(default_factory=dict)   # tenant_id -> (base, pages)

    def digest(self) -> str:
        h = hashlib.sha256()
        for sid, tid in self.streams:
            h.update(f"S {sid} {tid}\n".encode())
        for tid, (base, pages) in sorted(self.regions.items()):
            h.update(f"R {tid} {base} {pages}\n".encode())
        for rnd in self.rounds:
            h.update(b"ROUND\n")
            for sid, op in rnd:
                if isinstance(op, WriteOp):
                    h.update(f"w {sid} {op.lba} {op.length}\n".encode())
                elif isinstance(op, TrimOp):
                    h.update(f"t {sid} {op.lba} {op.length}\n".encode())
                elif isinstance(op, AllocOp):
                    h.update(f"a {sid} {op.chunks}\n".encode())
        return h.hexdigest()

    def total_write_pages(self) -> int:
        return sum(op.length for rnd in self.rounds for _, op in rnd
                   if isinstance(op, WriteOp))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigInvalid(message)


def _check_mode(mode: str) -> None:
    _require(mode in (VANILLA, FLASHALLOC), f"unknown mode {mode!r}")


def _rng(seed, *salt) -> random.Random:
    return random.Random(":".join(str(x) for x in (seed,) + salt))


# ----------------------------------------------------------------------
# fio analog: independent writers randomly overwriting block-aligned units
# of their dedicated regions

@dataclass
class FioConfig:
    writers: int = 8
    region_pages: int = 7168          # per writer
    overwrite_unit: int = 512         # block-aligned
    total_logical_writes: int = 172032
    mode: str = VANILLA
    region_base: int = 0
    tenant_id: int = 0

    def validate(self) -> None:
        _check_mode(self.mode)
        _require(self.writers >= 1, "writers must be >= 1")
        _require(self.overwrite_unit >= 1, "overwrite_unit must be >= 1")
        _require(self.region_pages % self.overwrite_unit == 0,
                 "overwrite_unit must divide region_pages")
        _require(self.total_logical_writes >= 0, "total volume must be >= 0")


def gen_fio(cfg: FioConfig, seed: int) -> Program:
    cfg.validate()
    prog = Program()
    prog.regions[cfg.tenant_id] = (cfg.region_base, cfg.writers * cfg.region_pages)
    share = cfg.total_logical_writes // cfg.writers
    units_per_writer = -(-share // cfg.overwrite_unit) if share else 0
    n_units = cfg.region_pages // cfg.overwrite_unit
    rnd = []
    for w in range(cfg.writers):
        sid = f"fio{cfg.tenant_id}.w{w}"
        prog.streams.append((sid, cfg.tenant_id))
        base = cfg.region_base + w * cfg.region_pages
        r = _rng(seed, "fio", w)
        for _ in range(units_per_writer):
            unit = r.randrange(n_units)
            lba = base + unit * cfg.overwrite_unit
            if cfg.mode == FLASHALLOC:
                rnd.append((sid, AllocOp(((lba, cfg.overwrite_unit),))))
            rnd.append((sid, WriteOp(lba, cfg.overwrite_unit)))
    prog.rounds.append(rnd)
    return prog


# ----------------------------------------------------------------------
# leveled LSM analog: concurrent flush/compaction jobs over fixed-size
# tables, wholesale deletes, a dash of random metadata writes

@dataclass
class LsmConfig:
    tenants: int = 1
    compaction_streams: int = 4
    sstable_pages: int = 2048
    levels: int = 4
    level_fanout: int = 10
    metadata_write_fraction: float = 0.05
    fill_target: float = 0.90
    mode: str = VANILLA
    region_base: int = 0
    region_pages: int = 58880
    pages_per_block: int = 512
    metadata_region_pages: int = 1024
    volume_factor: float = 3.0
    overlap_cap: int = 3

    def validate(self) -> None:
        _check_mode(self.mode)
        _require(self.tenants >= 1, "tenants must be >= 1")
        _require(self.compaction_streams >= 1, "compaction_streams must be >= 1")
        _require(self.sstable_pages >= self.pages_per_block,
                 "sstable_pages must be at least one block")
        _require(self.sstable_pages % self.pages_per_block == 0,
                 "sstable_pages must be a block multiple")
        _require(self.levels >= 2, "levels must be >= 2")
        _require(self.level_fanout >= 2, "level_fanout must be >= 2")
        _require(0.0 <= self.metadata_write_fraction < 1.0, "metadata fraction in [0,1)")
        _require(0.0 < self.fill_target <= 1.0, "fill_target in (0,1]")
        _require(self.volume_factor > 0, "volume_factor must be positive")
        per_tenant = self.region_pages // self.tenants
        slots = (per_tenant - self.metadata_region_pages) // self.sstable_pages
        _require(slots >= self.overlap_cap + 2, "region too small for table arena")


class _LsmTenant:
    def __init__(self, cfg: LsmConfig, tenant: int, seed: int):
        self.cfg = cfg
        self.tenant = tenant
        per_tenant = cfg.region_pages // cfg.tenants
        self.base = cfg.region_base + tenant * per_tenant
        self.n_slots = (per_tenant - cfg.metadata_region_pages) // cfg.sstable_pages
        self.meta_base = self.base + self.n_slots * cfg.sstable_pages
        self.live_cap = min(int(cfg.fill_target * per_tenant / cfg.sstable_pages),
                            self.n_slots - 1)
        self.free_slots = list(range(self.n_slots))
        self.freed_next: list[int] = []
        self.levels: list[list[int]] = [[] for _ in range(cfg.levels)]
        self.rng = _rng(seed, "lsm", tenant)
        self.emitted = 0
        f = cfg.metadata_write_fraction
        self.meta_ratio = f / (1.0 - f) if f > 0 else 0.0
        self.meta_owed = 0.0
        self.job_counter = 0
        self.streams = [f"lsm{tenant}.s{j}" for j in range(cfg.compaction_streams)]
        self.meta_stream = f"lsm{tenant}.meta"
        self.jan_stream = f"lsm{tenant}.jan"
        fill_volume = self.live_cap * cfg.sstable_pages
        self.target = int(cfg.volume_factor * fill_volume)

    def slot_lba(self, slot: int) -> int:
        return self.base + slot * self.cfg.sstable_pages

    def busy(self) -> int:
        """Slots the device currently holds data for: written and not yet
        trimmed (slots freed this round stay busy until the round drains)."""
        return self.n_slots - len(self.free_slots)

    def _table_events(self, sid: str, slot: int, events: list) -> None:
        lba = self.slot_lba(slot)
        if self.cfg.mode == FLASHALLOC:
            events.append((sid, AllocOp(((lba, self.cfg.sstable_pages),))))
        events.append((sid, WriteOp(lba, self.cfg.sstable_pages)))
        self.emitted += self.cfg.sstable_pages
        self.meta_owed += self.cfg.sstable_pages * self.meta_ratio

    def round_events(self) -> list:
        cfg = self.cfg
        events: list = []
        if self.emitted >= self.target:
            return events
        # expiry: shed the oldest deep tables once the footprint hits the cap
        # (slots come back next round, after their trims drain)
        while self.busy() - len(self.freed_next) >= self.live_cap:
            for lvl in range(cfg.levels - 1, -1, -1):
                if self.levels[lvl]:
                    slot = self.levels[lvl].pop(0)
                    events.append((self.jan_stream,
                                   TrimOp(self.slot_lba(slot), cfg.sstable_pages)))
                    self.freed_next.append(slot)
                    break
            else:
                break
        staged: list[tuple[int, int]] = []  # (level, slot)
        jobs = 0
        # compactions, shallowest first, one per level per round; outputs are
        # written before the inputs are trimmed, so they must fit the cap too
        for lvl in range(cfg.levels - 1):
            if jobs >= cfg.compaction_streams:
                break
            if len(self.levels[lvl]) <= cfg.level_fanout ** lvl:
                continue
            room = self.live_cap - self.busy()
            if room < 1:
                break
            k = self.rng.randint(0, min(len(self.levels[lvl + 1]), cfg.overlap_cap,
                                        room - 1))
            victim = self.levels[lvl].pop(0)
            overlaps = [self.levels[lvl + 1].pop(0) for _ in range(k)]
            outputs = [self.free_slots.pop(0) for _ in range(min(k + 1, len(self.free_slots)))]
            sid = self.streams[self.job_counter % cfg.compaction_streams]
            self.job_counter += 1
            for slot in outputs:
                self._table_events(sid, slot, events)
                staged.append((lvl + 1, slot))
            for slot in [victim] + overlaps:
                events.append((sid, TrimOp(self.slot_lba(slot), cfg.sstable_pages)))
                self.freed_next.append(slot)
            jobs += 1
        # flushes fill the remaining job slots
        while (jobs < cfg.compaction_streams and self.emitted < self.target
               and self.busy() < self.live_cap and self.free_slots):
            slot = self.free_slots.pop(0)
            sid = self.streams[self.job_counter % cfg.compaction_streams]
            self.job_counter += 1
            self._table_events(sid, slot, events)
            staged.append((0, slot))
            jobs += 1
        # metadata tail: small random in-place writes, never pre-allocated
        n_meta = int(self.meta_owed)
        if n_meta > 0 and cfg.metadata_region_pages > 0:
            self.meta_owed -= n_meta
            for _ in range(n_meta):
                lba = self.meta_base + self.rng.randrange(cfg.metadata_region_pages)
                events.append((self.meta_stream, WriteOp(lba, 1)))
            self.emitted += n_meta
        for lvl, slot in staged:
            self.levels[lvl].append(slot)
        self.free_slots.extend(sorted(self.freed_next))
        self.freed_next = []
        return events


def gen_lsm(cfg: LsmConfig, seed: int) -> Program:
    cfg.validate()
    prog = Program()
    prog.regions[0] = (cfg.region_base, cfg.region_pages)
    tenants = [_LsmTenant(cfg, t, seed) for t in range(cfg.tenants)]
    for t in tenants:
        for sid in t.streams:
            prog.streams.append((sid, t.tenant))
        prog.streams.append((t.meta_stream, t.tenant))
        prog.streams.append((t.jan_stream, t.tenant))
    while True:
        rnd: list = []
        for t in tenants:
            rnd.extend(t.round_events())
        if not rnd:
            break
        prog.rounds.append(rnd)
    return prog


# ----------------------------------------------------------------------
# multi-head logging analog: hot/cold updates appended through several
# active segments, segment cleaning re-appends live pages then trims

@dataclass
class LogFsConfig:
    active_heads: int = 6
    segment_pages: int = 512
    hot_fraction: float = 0.2
    update_count: int = 60000
    occupancy: float = 0.78
    hot_traffic_share: float = 0.8
    mode: str = VANILLA
    region_base: int = 0
    region_pages: int = 58880
    round_updates: int = 256

    def validate(self) -> None:
        _check_mode(self.mode)
        _require(self.active_heads >= 1, "active_heads must be >= 1")
        _require(self.segment_pages >= 1, "segment_pages must be >= 1")
        _require(0.0 <= self.hot_fraction <= 1.0, "hot_fraction in [0,1]")
        _require(0.0 < self.occupancy < 1.0, "occupancy in (0,1)")
        _require(0.0 <= self.hot_traffic_share <= 1.0, "hot_traffic_share in [0,1]")
        _require(self.update_count >= 0, "update_count must be >= 0")
        _require(self.round_updates >= 1, "round_updates must be >= 1")
        n_segments = self.region_pages // self.segment_pages
        _require(n_segments >= 2 * self.active_heads + 4,
                 "region too small for the head count")


class _LogFs:
    """Generator-side file-system state: page locations, segments, heads."""

    def __init__(self, cfg: LogFsConfig, seed: int):
        self.cfg = cfg
        self.rng = _rng(seed, "logfs")
        self.n_segments = cfg.region_pages // cfg.segment_pages
        arena = self.n_segments * cfg.segment_pages
        self.clean_threshold = cfg.active_heads + 8
        # keep enough slack that cleaning always has room to proceed
        max_pages = (self.n_segments - cfg.active_heads
                     - self.clean_threshold - 2) * cfg.segment_pages
        self.n_pages = min(int(cfg.occupancy * arena), max_pages)
        self.n_hot = int(cfg.hot_fraction * self.n_pages)
        self.page_loc = [-1] * self.n_pages          # file page -> lba
        self.lba_page: dict[int, int] = {}           # live lba -> file page
        self.free_segments = list(range(self.n_segments))
        self.seg_live = [0] * self.n_segments
        self.active: list[int | None] = [None] * cfg.active_heads
        self.fill: list[int] = [0] * cfg.active_heads
        self.cleanable: list[int] = []
        self.pending_trims: list[int] = []

    def head_of(self, page: int) -> int:
        ch = self.cfg.active_heads
        hot_heads = max(1, ch // 2)
        if page < self.n_hot:
            return page % hot_heads
        if ch == hot_heads:
            return page % ch
        return hot_heads + page % (ch - hot_heads)

    def seg_base(self, seg: int) -> int:
        return self.cfg.region_base + seg * self.cfg.segment_pages

    def append(self, page: int, head: int, events_by_head: list) -> None:
        cfg = self.cfg
        if self.active[head] is None or self.fill[head] >= cfg.segment_pages:
            if self.active[head] is not None:
                self.cleanable.append(self.active[head])
            if not self.free_segments:
                raise ConfigInvalid("log arena exhausted; lower occupancy or round_updates")
            seg = self.free_segments.pop(0)
            self.active[head] = seg
            self.fill[head] = 0
            if cfg.mode == FLASHALLOC:
                events_by_head[head].append(
                    AllocOp(((self.seg_base(seg), cfg.segment_pages),)))
        seg = self.active[head]
        lba = self.seg_base(seg) + self.fill[head]
        self.fill[head] += 1
        old = self.page_loc[page]
        if old >= 0:
            old_seg = (old - cfg.region_base) // cfg.segment_pages
            self.seg_live[old_seg] -= 1
            del self.lba_page[old]
        self.page_loc[page] = lba
        self.lba_page[lba] = page
        self.seg_live[seg] += 1
        events_by_head[head].append(WriteOp(lba, 1))

    def clean_one(self, events_by_head: list) -> bool:
        """Re-append the fewest-live inactive segment's live pages; the trim
        lands in the next round, after the re-appends drained. Returns False
        when the remaining free-segment budget cannot absorb the re-appends."""
        if not self.cleanable:
            return False
        best = min(self.cleanable, key=lambda s: (self.seg_live[s], s))
        opens_needed = -(-self.seg_live[best] // self.cfg.segment_pages)
        if len(self.free_segments) < opens_needed + 2:
            return False
        self.cleanable.remove(best)
        base = self.seg_base(best)
        for off in range(self.cfg.segment_pages):
            page = self.lba_page.get(base + off)
            if page is not None:
                self.append(page, self.head_of(page), events_by_head)
        self.pending_trims.append(best)
        return True


def _coalesce(ops: list) -> list:
    """Merge runs of contiguous 1-page writes into multi-page writes."""
    out: list = []
    for op in ops:
        if (out and isinstance(op, WriteOp) and isinstance(out[-1], WriteOp)
                and out[-1].lba + out[-1].length == op.lba):
            out[-1] = WriteOp(out[-1].lba, out[-1].length + op.length)
        else:
            out.append(op)
    return out


def gen_logfs(cfg: LogFsConfig, seed: int) -> Program:
    cfg.validate()
    fs = _LogFs(cfg, seed)
    prog = Program()
    prog.regions[0] = (cfg.region_base, cfg.region_pages)
    head_streams = [f"logfs.h{h}" for h in range(cfg.active_heads)]
    jan = "logfs.jan"
    for sid in head_streams:
        prog.streams.append((sid, 0))
    prog.streams.append((jan, 0))

    def close_round(events_by_head, trims) -> list:
        rnd = []
        for seg in trims:
            rnd.append((jan, TrimOp(fs.seg_base(seg), cfg.segment_pages)))
            fs.seg_live[seg] = 0
            fs.free_segments.append(seg)
            fs.free_segments.sort()
        for h, ops in enumerate(events_by_head):
            for op in _coalesce(ops):
                rnd.append((head_streams[h], op))
        return rnd

    # initial fill: every file page written once through its head
    events_by_head: list = [[] for _ in range(cfg.active_heads)]
    for page in range(fs.n_pages):
        fs.append(page, fs.head_of(page), events_by_head)
    prog.rounds.append(close_round(events_by_head, []))

    done = 0
    while done < cfg.update_count:
        trims, fs.pending_trims = fs.pending_trims, []
        events_by_head = [[] for _ in range(cfg.active_heads)]
        batch = min(cfg.round_updates, cfg.update_count - done)
        for _ in range(batch):
            hot = fs.n_hot > 0 and fs.rng.random() < cfg.hot_traffic_share
            if hot:
                page = fs.rng.randrange(fs.n_hot)
            else:
                page = fs.n_hot + fs.rng.randrange(fs.n_pages - fs.n_hot) \
                    if fs.n_pages > fs.n_hot else fs.rng.randrange(fs.n_pages)
            fs.append(page, fs.head_of(page), events_by_head)
        done += batch
        # cleaning frees victims one round later (trim must trail the
        # re-appends), so stop before the in-round openings deplete the pool
        while len(fs.free_segments) < fs.clean_threshold and fs.cleanable:
            if not fs.clean_one(events_by_head):
                break
        prog.rounds.append(close_round(events_by_head, trims))
    if fs.pending_trims:
        prog.rounds.append(close_round([[] for _ in range(cfg.active_heads)],
                                       fs.pending_trims))
        fs.pending_trims = []
    return prog


# ----------------------------------------------------------------------
# cyclic journal analog: a tiny sequential ring reused forever, interleaved
# with uniform random writes against the main data region

@dataclass
class JournalConfig:
    journal_pages: int = 512
    batch_pages: int = 64
    tablespace_pages: int = 35840
    batches: int = 1200
    mode: str = VANILLA
    region_base: int = 0

    def validate(self) -> None:
        _check_mode(self.mode)
        _require(self.journal_pages >= 1, "journal_pages must be >= 1")
        _require(self.batch_pages >= 1, "batch_pages must be >= 1")
        _require(self.tablespace_pages >= 1, "tablespace_pages must be >= 1")
        _require(self.batches >= 0, "batches must be >= 0")

    @property
    def region_pages(self) -> int:
        return self.journal_pages + self.tablespace_pages


def gen_journal(cfg: JournalConfig, seed: int) -> Program:
    cfg.validate()
    prog = Program()
    prog.regions[0] = (cfg.region_base, cfg.region_pages)
    jstream, tstream = "journal.ring", "journal.table"
    prog.streams.append((jstream, 0))
    prog.streams.append((tstream, 0))
    rng = _rng(seed, "journal")
    ring = cfg.region_base
    table_base = cfg.region_base + cfg.journal_pages
    pos = 0
    fresh = True
    for _ in range(cfg.batches):
        rnd: list = []
        if fresh and cfg.mode == FLASHALLOC:
            rnd.append((jstream, AllocOp(((ring, cfg.journal_pages),))))
            fresh = False
        remaining = cfg.batch_pages
        while remaining > 0:
            span = min(remaining, cfg.journal_pages - pos)
            rnd.append((jstream, WriteOp(ring + pos, span)))
            pos += span
            remaining -= span
            if pos >= cfg.journal_pages:
                pos = 0
                if cfg.mode == FLASHALLOC:
                    rnd.append((jstream, TrimOp(ring, cfg.journal_pages)))
                    rnd.append((jstream, AllocOp(((ring, cfg.journal_pages),))))
        for _ in range(cfg.batch_pages):
            rnd.append((tstream, WriteOp(table_base + rng.randrange(cfg.tablespace_pages), 1)))
        prog.rounds.append(rnd)
    return prog


# ----------------------------------------------------------------------
# multi-tenant composition

def compose_tenants(programs: list[Program], tenant_ids: list[int] | None = None) -> Program:
    """Merge per-tenant programs: regions must be disjoint; stream ids get a
    per-tenant prefix. Rounds are paced by each tenant's write-volume
    fraction rather than round index, so tenants with different round sizes
    stay concurrent for the whole run (that concurrency is the scenario)."""
    if tenant_ids is None:
        tenant_ids = list(range(len(programs)))
    merged = Program()
    spans = []
    for prog, tid in zip(programs, tenant_ids):
        for _, (base, pages) in prog.regions.items():
            for b0, p0 in spans:
                if base < b0 + p0 and b0 < base + pages:
                    raise RegionOverlap(
                        f"tenant regions ({b0},{p0}) and ({base},{pages}) overlap")
            spans.append((base, pages))
            merged.regions[tid] = (base, pages)
        for sid, _ in prog.streams:
            merged.streams.append((f"T{tid}.{sid}", tid))

    def round_volume(rnd) -> int:
        return sum(op.length for _, op in rnd if isinstance(op, WriteOp))

    totals = [max(1, p.total_write_pages()) for p in programs]
    emitted = [0] * len(programs)
    cursors = [0] * len(programs)

    def take(i: int, into: list) -> None:
        rnd = programs[i].rounds[cursors[i]]
        cursors[i] += 1
        emitted[i] += round_volume(rnd)
        into.extend((f"T{tenant_ids[i]}.{sid}", op) for sid, op in rnd)

    while any(cursors[i] < len(p.rounds) for i, p in enumerate(programs)):
        live = [i for i, p in enumerate(programs) if cursors[i] < len(p.rounds)]
        slowest = min(live, key=lambda i: (emitted[i] / totals[i], i))
        rnd: list = []
        take(slowest, rnd)
        pace = emitted[slowest] / totals[slowest]
        for j in live:
            if j == slowest:
                continue
            while cursors[j] < len(programs[j].rounds) and emitted[j] / totals[j] < pace:
                take(j, rnd)
        merged.rounds.append(rnd)
    return merged
