"""Counters, windowed metric series, and derived statistics.

Windows close on logical write volume (default 1/64 of logical capacity),
not wall time, so series are deterministic and comparable across modes.
Simulated time comes from a fixed per-op cost model and feeds only the
throughput proxy; the defaults are typical MLC magnitudes, deliberately not
calibrated against any particular device.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DivByZeroGuard, EmptyWindow
from .flash_media import KIND_FREE


@dataclass
class CostModel:
    read_us: int = 50
    program_us: int = 600
    erase_us: int = 3000


@dataclass
class Counters:
    logical_pages_written: int = 0
    physical_programs: int = 0
    copyback_programs: int = 0
    erases: int = 0
    trim_page_invalidations: int = 0
    trim_block_erases: int = 0
    sim_time_us: int = 0

    def snapshot(self) -> list:
        return [self.logical_pages_written, self.physical_programs,
                self.copyback_programs, self.erases,
                self.trim_page_invalidations, self.trim_block_erases,
                self.sim_time_us]

    def waf(self) -> float:
        if self.logical_pages_written == 0:
            raise EmptyWindow("no logical writes yet")
        return self.physical_programs / self.logical_pages_written


def running_waf(window_logical: int, window_physical: int) -> float:
    if window_logical <= 0:
        raise EmptyWindow("window saw no logical writes")
    return window_physical / window_logical


def throughput_proxy(window_logical: int, window_time_us: int) -> float:
    if window_time_us <= 0:
        raise DivByZeroGuard("window simulated time is zero")
    return window_logical / (window_time_us / 1_000_000.0)


def utilization_histogram(device, bins: int) -> list[int]:
    """Counts of non-free blocks bucketed by valid-page ratio."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    counts = [0] * bins
    ppb = device.geometry.pages_per_block
    for blk in device.media.blocks:
        if blk.kind == KIND_FREE:
            continue
        u = blk.valid_count / ppb
        idx = min(int(u * bins), bins - 1)
        counts[idx] += 1
    return counts


def bimodality_mid_mass(device) -> float:
    """Fraction of non-free blocks with utilization strictly inside (0.2, 0.8).

    Low values mean blocks are either nearly full or nearly empty, the
    distribution a deathtime-coherent placement is expected to produce.
    """
    ppb = device.geometry.pages_per_block
    total = 0
    mid = 0
    for blk in device.media.blocks:
        if blk.kind == KIND_FREE:
            continue
        total += 1
        u = blk.valid_count / ppb
        if 0.2 < u < 0.8:
            mid += 1
    return mid / total if total else 0.0


@dataclass
class MetricSample:
    window: int
    logical_pages: int
    physical_pages: int
    copybacks: int
    running_waf: float
    cumulative_waf: float
    throughput_proxy: float
    fa_blocks: int
    normal_blocks: int
    free_blocks: int
    mid_mass: float


CSV_COLUMNS = ("window", "logical_pages", "physical_pages", "copybacks",
               "running_waf", "cumulative_waf", "throughput_proxy",
               "fa_blocks", "normal_blocks", "free_blocks", "mid_mass")


def sample_to_row(s: MetricSample) -> str:
    return ",".join([
        str(s.window), str(s.logical_pages), str(s.physical_pages), str(s.copybacks),
        f"{s.running_waf:.6f}", f"{s.cumulative_waf:.6f}", f"{s.throughput_proxy:.3f}",
        str(s.fa_blocks), str(s.normal_blocks), str(s.free_blocks), f"{s.mid_mass:.6f}",
    ])


class MetricsCollector:
    """Accumulates per-window samples from a device's counter stream.

    tick() is called after every device command; a window closes once its
    logical volume is reached. flush() closes a trailing partial window.
    """

    def __init__(self, device, window_pages: int):
        if window_pages < 1:
            raise ValueError("window_pages must be >= 1")
        self.device = device
        self.window_pages = window_pages
        self.samples: list[MetricSample] = []
        self._mark = device.counters.snapshot()

    def _close_window(self) -> None:
        c = self.device.counters
        prev = self._mark
        logical = c.logical_pages_written - prev[0]
        physical = c.physical_programs - prev[1]
        copybacks = c.copyback_programs - prev[2]
        time_us = c.sim_time_us - prev[6]
        regions = self.device.region_report()
        self.samples.append(MetricSample(
            window=len(self.samples),
            logical_pages=logical,
            physical_pages=physical,
            copybacks=copybacks,
            running_waf=running_waf(logical, physical),
            cumulative_waf=c.waf(),
            throughput_proxy=throughput_proxy(logical, time_us),
            fa_blocks=regions["fa"],
            normal_blocks=regions["normal"],
            free_blocks=regions["free"],
            mid_mass=bimodality_mid_mass(self.device),
        ))
        self._mark = c.snapshot()

    def tick(self) -> None:
        if self.device.counters.logical_pages_written - self._mark[0] >= self.window_pages:
            self._close_window()

    def flush(self) -> None:
        if self.device.counters.logical_pages_written - self._mark[0] > 0:
            self._close_window()
