"""Scenario configuration and the run/record/replay/check drivers.

A scenario config (JSON, schema_version 1) fully determines a run:

    {"schema_version": 1,
     "geometry": {"total_blocks": 128, "pages_per_block": 512,
                  "page_size": 4096, "channels": 8, "op_fraction": 0.1},
     "mode": "flashalloc",
     "seed": 42,
     "interleave": {"split_unit": 64, "policy": "round_robin"},
     "window_pages": null,
     "cost_model": {"read_us": 50, "program_us": 600, "erase_us": 3000},
     "reserve_blocks": null,
     "striping": true,
     "workload": {"kind": "fio", ...}}

Workload kinds: fio, lsm, logfs, journal, multi (a tenant list with region
shares). Omitted workload fields get geometry-derived defaults. Outputs per
run: one CSV row per metrics window (fixed column order), a JSON report,
and, unless disabled, matplotlib figures next to the CSV.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

from . import refcheck, workloads
from .digest import state_digest
from .errors import ConfigInvalid, SimulationError
from .flash_media import Geometry
from .ftl import FLASHALLOC, VANILLA, Device
from .hostmodel import Command, HostModel, InterleaveConfig
from .hostmodel import execute as dispatch_command
from .metrics import CSV_COLUMNS, CostModel, MetricsCollector, sample_to_row, \
    utilization_histogram
from .trace import TraceWriter, read_trace
from .workloads import FioConfig, JournalConfig, LogFsConfig, LsmConfig, \
    Program, compose_tenants, gen_fio, gen_journal, gen_lsm, gen_logfs

OUT_DIR_ENV = "STREAMFTL_OUT_DIR"

_TOP_KEYS = {"schema_version", "geometry", "mode", "seed", "interleave",
             "window_pages", "cost_model", "reserve_blocks", "striping",
             "workload", "name"}


@dataclass
class ScenarioConfig:
    geometry: Geometry
    mode: str = VANILLA
    seed: int = 0
    interleave: InterleaveConfig = dataclasses.field(default_factory=InterleaveConfig)
    window_pages: int | None = None
    cost_model: CostModel = dataclasses.field(default_factory=CostModel)
    reserve_blocks: int | None = None
    striping: bool = True
    workload: dict = dataclasses.field(default_factory=dict)
    name: str = "scenario"

    @property
    def effective_window(self) -> int:
        if self.window_pages:
            return self.window_pages
        return max(1, self.geometry.logical_capacity_pages // 64)


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    if raw.get("schema_version") != 1:
        raise ConfigInvalid("missing or unsupported schema_version (expected 1)")
    try:
        geometry = Geometry(**raw.get("geometry", {}))
        interleave = InterleaveConfig(seed=int(raw.get("seed", 0)),
                                      **raw.get("interleave", {}))
        cost = CostModel(**raw.get("cost_model", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from None
    mode = raw.get("mode", VANILLA)
    if mode not in (VANILLA, FLASHALLOC):
        raise ConfigInvalid(f"unknown mode {mode!r}")
    workload = raw.get("workload")
    if not isinstance(workload, dict) or "kind" not in workload:
        raise ConfigInvalid("workload object with a 'kind' is required")
    return ScenarioConfig(
        geometry=geometry, mode=mode, seed=int(raw.get("seed", 0)),
        interleave=interleave, window_pages=raw.get("window_pages"),
        cost_model=cost, reserve_blocks=raw.get("reserve_blocks"),
        striping=bool(raw.get("striping", True)), workload=dict(workload),
        name=str(raw.get("name", workload.get("kind", "scenario"))))


def config_from_file(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from None
    return config_from_dict(raw)


# ----------------------------------------------------------------------
# workload construction with geometry-derived defaults

def _fill_defaults(kind: str, spec: dict, cfg: ScenarioConfig,
                   region_base: int, region_pages: int) -> dict:
    geo = cfg.geometry
    ppb = geo.pages_per_block
    out = dict(spec)
    out.pop("kind", None)
    out.pop("share", None)
    out["mode"] = cfg.mode
    out.setdefault("region_base", region_base)
    if kind == "fio":
        writers = out.setdefault("writers", 8)
        if writers < 1:
            raise ConfigInvalid("writers must be >= 1")
        unit = out.setdefault("overwrite_unit", ppb)
        per_writer_blocks = (region_pages // writers) // unit
        out.setdefault("region_pages", per_writer_blocks * unit)
        out.setdefault("total_logical_writes", 3 * writers * out["region_pages"])
    elif kind == "lsm":
        out.setdefault("region_pages", region_pages)
        out.setdefault("pages_per_block", ppb)
        out.setdefault("sstable_pages", 4 * ppb)
        out.setdefault("metadata_region_pages", 2 * ppb)
    elif kind == "logfs":
        out.setdefault("region_pages", region_pages)
        out.setdefault("segment_pages", ppb)
        arena = (out["region_pages"] // out["segment_pages"]) * out["segment_pages"]
        occupancy = out.get("occupancy", LogFsConfig.occupancy)
        out.setdefault("update_count", int(1.5 * occupancy * arena))
    elif kind == "journal":
        out.setdefault("journal_pages", ppb)
        out.setdefault("tablespace_pages",
                       max(ppb, (region_pages - out["journal_pages"]) * 7 // 10))
        per_batch = 2 * out.setdefault("batch_pages", 64)
        out.setdefault("batches", max(0, 3 * region_pages // per_batch))
    else:
        raise ConfigInvalid(f"unknown workload kind {kind!r}")
    return out


_GENERATORS = {
    "fio": (FioConfig, gen_fio),
    "lsm": (LsmConfig, gen_lsm),
    "logfs": (LogFsConfig, gen_logfs),
    "journal": (JournalConfig, gen_journal),
}


def _build_single(kind: str, spec: dict, cfg: ScenarioConfig,
                  region_base: int, region_pages: int) -> Program:
    cls, gen = _GENERATORS[kind]
    filled = _fill_defaults(kind, spec, cfg, region_base, region_pages)
    try:
        wl_cfg = cls(**filled)
    except TypeError as exc:
        raise ConfigInvalid(f"bad {kind} workload: {exc}") from None
    return gen(wl_cfg, cfg.seed)


def build_program(cfg: ScenarioConfig) -> Program:
    capacity = cfg.geometry.logical_capacity_pages
    kind = cfg.workload.get("kind")
    if kind == "multi":
        tenants = cfg.workload.get("tenants")
        if not isinstance(tenants, list) or not tenants:
            raise ConfigInvalid("multi workload needs a non-empty tenants list")
        ppb = cfg.geometry.pages_per_block
        programs = []
        base = 0
        default_share = 1.0 / len(tenants)
        for spec in tenants:
            sub_kind = spec.get("kind")
            if sub_kind not in _GENERATORS:
                raise ConfigInvalid(f"unknown tenant kind {sub_kind!r}")
            share = float(spec.get("share", default_share))
            if not (0.0 < share <= 1.0):
                raise ConfigInvalid("tenant share must be in (0, 1]")
            pages = (int(share * capacity) // ppb) * ppb
            if base + pages > capacity:
                raise ConfigInvalid("tenant shares exceed the device")
            programs.append(_build_single(sub_kind, spec, cfg, base, pages))
            base += pages
        return compose_tenants(programs)
    if kind not in _GENERATORS:
        raise ConfigInvalid(f"unknown workload kind {kind!r}")
    return _build_single(kind, cfg.workload, cfg, 0, capacity)


# ----------------------------------------------------------------------
# drivers

@dataclass
class Report:
    name: str
    mode: str
    seed: int
    end_cumulative_waf: float
    total_copybacks: int
    total_erases: int
    logical_pages: int
    physical_pages: int
    sim_time_us: int
    throughput_proxy: float
    per_tenant_logical: dict
    state_digest: str
    csv_path: str | None = None
    figure_paths: list = dataclasses.field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


class ScenarioRunError(SimulationError):
    def __init__(self, seq: int, cause: SimulationError):
        super().__init__(f"command seq {seq}: {cause.__class__.__name__}: {cause}")
        self.seq = seq
        self.cause = cause


class _Session:
    """Shared run state: device, metrics, per-tenant accounting.

    Doubles as the device facade the host model drains into: each command
    passes through sink() (trace/accounting) and then the host_* methods,
    which wrap engine errors with the offending command seq."""

    def __init__(self, cfg: ScenarioConfig, writer=None):
        self.cfg = cfg
        self.device = Device(cfg.geometry, mode=cfg.mode, cost_model=cfg.cost_model,
                             reserve_blocks=cfg.reserve_blocks, striping=cfg.striping)
        self.metrics = MetricsCollector(self.device, cfg.effective_window)
        self.per_tenant: dict[int, int] = {}
        self.last_seq = 0
        self.writer = writer

    def sink(self, cmd: Command) -> None:
        self.last_seq = cmd.seq
        if cmd.op == "write":
            self.per_tenant[cmd.tenant_id] = \
                self.per_tenant.get(cmd.tenant_id, 0) + cmd.length
        if self.writer is not None:
            self.writer.write(cmd)

    def _guard(self, fn):
        try:
            fn()
        except SimulationError as exc:
            raise ScenarioRunError(self.last_seq, exc) from exc
        self.metrics.tick()

    def host_write(self, lba, length, base):
        self._guard(lambda: self.device.host_write(lba, length, base))

    def host_trim(self, lba, length):
        self._guard(lambda: self.device.host_trim(lba, length))

    def flash_alloc(self, chunks):
        if self.device.mode == VANILLA:
            return  # a conventional device has no pre-allocation command
        self._guard(lambda: self.device.flash_alloc(chunks))

    def execute(self, cmd: Command) -> None:
        self.sink(cmd)
        dispatch_command(self, cmd)

    def finish(self, name: str) -> Report:
        self.metrics.flush()
        c = self.device.counters
        waf = c.physical_programs / c.logical_pages_written if c.logical_pages_written else 0.0
        proxy = (c.logical_pages_written / (c.sim_time_us / 1_000_000.0)
                 if c.sim_time_us else 0.0)
        return Report(
            name=name, mode=self.cfg.mode, seed=self.cfg.seed,
            end_cumulative_waf=waf, total_copybacks=c.copyback_programs,
            total_erases=c.erases, logical_pages=c.logical_pages_written,
            physical_pages=c.physical_programs, sim_time_us=c.sim_time_us,
            throughput_proxy=proxy,
            per_tenant_logical={str(k): v for k, v in sorted(self.per_tenant.items())},
            state_digest=state_digest(self.device.snapshot()))


def run_scenario(cfg: ScenarioConfig, trace_path=None):
    """Execute a config end to end. Returns (report, samples, device)."""
    program = build_program(cfg)
    writer = None
    if trace_path is not None:
        writer = TraceWriter(trace_path, cfg.geometry, cfg.mode,
                             2 + cfg.geometry.channels if cfg.reserve_blocks is None
                             else cfg.reserve_blocks, cfg.striping)
    session = _Session(cfg, writer=writer)
    host = HostModel(cfg.interleave)
    for sid, tid in program.streams:
        host.add_stream(sid, tid)
    try:
        for rnd in program.rounds:
            for sid, op in rnd:
                host.submit(sid, op)
            host.drain(session, sink=session.sink)
    finally:
        if writer is not None:
            writer.close()
    report = session.finish(cfg.name)
    return report, session.metrics.samples, session.device


def replay_trace(trace_path, mode: str | None = None, name: str = "replay"):
    """Re-execute a recorded command stream. Returns (report, samples, device)."""
    header, commands = read_trace(trace_path)
    cfg = ScenarioConfig(geometry=header.geometry, mode=mode or header.mode,
                         reserve_blocks=header.reserve, striping=header.striping,
                         workload={"kind": "replay"}, name=name)
    session = _Session(cfg)
    for cmd in commands:
        session.execute(cmd)
    report = session.finish(name)
    return report, session.metrics.samples, session.device


def check_trace(trace_path, mode: str | None = None, perturb_tie_break: bool = False):
    """Replay through engine and oracle; returns (equal, engine_digest,
    oracle_digest, first_divergence). Outcomes are compared positionally."""
    header, commands = read_trace(trace_path)
    use_mode = mode or header.mode
    engine = Device(header.geometry, mode=use_mode,
                    reserve_blocks=header.reserve, striping=header.striping)
    engine_outcomes = []
    for cmd in commands:
        if cmd.op == "flashalloc" and use_mode == VANILLA:
            engine_outcomes.append("ok")
            continue
        try:
            execute(engine, cmd)
            engine_outcomes.append("ok")
        except SimulationError as exc:
            engine_outcomes.append(f"err:{exc.__class__.__name__}")
    oracle_outcomes, oracle_digest = refcheck.replay(
        commands, header.geometry, use_mode, reserve_blocks=header.reserve,
        striping=header.striping, perturb_tie_break=perturb_tie_break)
    engine_digest = state_digest(engine.snapshot())
    divergence = None
    for i, (a, b) in enumerate(zip(engine_outcomes, oracle_outcomes)):
        if a != b:
            divergence = (commands[i].seq, a, b)
            break
    equal = divergence is None and engine_digest == oracle_digest
    return equal, engine_digest, oracle_digest, divergence


# ----------------------------------------------------------------------
# outputs

def resolve_out_dir(explicit=None) -> str:
    out = explicit or os.environ.get(OUT_DIR_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def write_csv(samples, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for s in samples:
            fh.write(sample_to_row(s) + "\n")


def emit_outputs(report: Report, samples, device, out_dir, stem: str,
                 figures: bool = True) -> Report:
    out_dir = resolve_out_dir(out_dir)
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    write_csv(samples, csv_path)
    report.csv_path = csv_path
    if figures:
        from .plotting import render_report_figures
        hist = utilization_histogram(device, bins=10)
        report.figure_paths = render_report_figures(
            samples, hist, os.path.join(out_dir, stem))
    with open(os.path.join(out_dir, f"{stem}_report.json"), "w", encoding="ascii") as fh:
        fh.write(report.to_json() + "\n")
    return report
