"""Serializes concurrent host writers into the device command stream.

This is where multiplexing comes from: each scheduling pick issues one
split_unit-sized chunk of the head write of one stream, so concurrent
writers' chunks interleave at the device exactly like kernel-split
requests from concurrent threads do. Trims and pre-allocations issue
whole. The schedule is a pure function of (streams, policy, seed).

The one-chunk-per-pick rule is deliberately more aggressive than a real
kernel's splitting; it makes the baseline's object mixing reproducible at
desk scale.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .errors import UnknownStream

ROUND_ROBIN = "round_robin"
SEEDED_RANDOM = "seeded_random"


@dataclass(frozen=True)
class WriteOp:
    lba: int
    length: int


@dataclass(frozen=True)
class TrimOp:
    lba: int
    length: int


@dataclass(frozen=True)
class AllocOp:
    chunks: tuple


@dataclass(frozen=True)
class InterleaveConfig:
    split_unit: int = 64
    policy: str = ROUND_ROBIN
    seed: int = 0

    def __post_init__(self):
        if self.split_unit < 1:
            raise ValueError("split_unit must be >= 1")
        if self.policy not in (ROUND_ROBIN, SEEDED_RANDOM):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class Command:
    """One device command as issued (and as recorded in a trace)."""
    seq: int
    op: str  # write | trim | flashalloc
    stream_id: str
    tenant_id: int
    lba: int = 0
    length: int = 0
    content_base: int = 0
    chunks: tuple = ()


@dataclass
class WriterStream:
    stream_id: str
    tenant_id: int
    queue: deque = field(default_factory=deque)
    head_done: int = 0  # pages of the head write already issued


class HostModel:
    def __init__(self, interleave: InterleaveConfig | None = None):
        self.interleave = interleave or InterleaveConfig()
        self.streams: dict[str, WriterStream] = {}
        self._order: list[str] = []
        self._rr_next = 0
        self._rng = random.Random(self.interleave.seed)
        self._seq = 0
        self._next_token = 0

    def add_stream(self, stream_id: str, tenant_id: int = 0) -> None:
        if stream_id not in self.streams:
            self.streams[stream_id] = WriterStream(stream_id, tenant_id)
            self._order.append(stream_id)

    def submit(self, stream_id: str, op) -> None:
        stream = self.streams.get(stream_id)
        if stream is None:
            raise UnknownStream(f"stream {stream_id!r} was never added")
        stream.queue.append(op)

    def pending(self) -> int:
        return sum(len(s.queue) for s in self.streams.values())

    def _pick(self) -> WriterStream:
        nonempty = [sid for sid in self._order if self.streams[sid].queue]
        if self.interleave.policy == SEEDED_RANDOM:
            return self.streams[self._rng.choice(nonempty)]
        # round robin resumes from the cursor position, skipping empties
        n = len(self._order)
        for probe in range(n):
            sid = self._order[(self._rr_next + probe) % n]
            if self.streams[sid].queue:
                self._rr_next = (self._rr_next + probe + 1) % n
                return self.streams[sid]
        raise AssertionError("pick called with no pending ops")

    def _next_command(self) -> Command:
        stream = self._pick()
        op = stream.queue[0]
        self._seq += 1
        if isinstance(op, WriteOp):
            chunk = min(self.interleave.split_unit, op.length - stream.head_done)
            lba = op.lba + stream.head_done
            base = self._next_token
            self._next_token += chunk
            stream.head_done += chunk
            if stream.head_done >= op.length:
                stream.queue.popleft()
                stream.head_done = 0
            return Command(self._seq, "write", stream.stream_id, stream.tenant_id,
                           lba=lba, length=chunk, content_base=base)
        stream.queue.popleft()
        if isinstance(op, TrimOp):
            return Command(self._seq, "trim", stream.stream_id, stream.tenant_id,
                           lba=op.lba, length=op.length)
        if isinstance(op, AllocOp):
            return Command(self._seq, "flashalloc", stream.stream_id, stream.tenant_id,
                           chunks=op.chunks)
        raise TypeError(f"unknown op {op!r}")

    def drain(self, device, sink=None) -> int:
        """Issue commands until every stream is empty. `device` needs
        host_write/host_trim/flash_alloc; `sink(cmd)` sees each command
        before it executes (trace recording)."""
        issued = 0
        while any(s.queue for s in self.streams.values()):
            cmd = self._next_command()
            if sink is not None:
                sink(cmd)
            execute(device, cmd)
            issued += 1
        return issued


def execute(device, cmd: Command) -> None:
    if cmd.op == "write":
        device.host_write(cmd.lba, cmd.length, cmd.content_base)
    elif cmd.op == "trim":
        device.host_trim(cmd.lba, cmd.length)
    elif cmd.op == "flashalloc":
        device.flash_alloc(cmd.chunks)
    else:
        raise ValueError(f"unknown command op {cmd.op!r}")
