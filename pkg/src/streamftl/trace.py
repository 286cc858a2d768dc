"""Line-delimited trace format: one device command per line.

The trace records the already-interleaved device command sequence, so a
replay feeds the engine directly without re-running the host model. A
header line pins geometry and engine policy so traces are self-contained:

    #streamftl-trace v1 total_blocks=128 pages_per_block=512 page_size=4096 \
        channels=8 op_fraction=0.1 mode=flashalloc reserve=10 striping=1

    1 write stream=w0 tenant=0 lba=4096 len=64 base=0
    2 flashalloc stream=w1 tenant=0 chunks=512:512,2048:256
    3 trim stream=w1 tenant=0 lba=512 len=512

Textual and diffable on purpose; the oracle consumes the same format.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import TraceParseError
from .flash_media import Geometry
from .hostmodel import Command

HEADER_MAGIC = "#streamftl-trace v1"


@dataclass(frozen=True)
class TraceHeader:
    geometry: Geometry
    mode: str
    reserve: int
    striping: bool


def format_header(geometry: Geometry, mode: str, reserve: int, striping: bool) -> str:
    return (f"{HEADER_MAGIC} total_blocks={geometry.total_blocks} "
            f"pages_per_block={geometry.pages_per_block} page_size={geometry.page_size} "
            f"channels={geometry.channels} op_fraction={geometry.op_fraction!r} "
            f"mode={mode} reserve={reserve} striping={int(striping)}")


def format_command(cmd: Command) -> str:
    if cmd.op == "write":
        tail = f"lba={cmd.lba} len={cmd.length} base={cmd.content_base}"
    elif cmd.op == "trim":
        tail = f"lba={cmd.lba} len={cmd.length}"
    elif cmd.op == "flashalloc":
        tail = "chunks=" + ",".join(f"{s}:{ln}" for s, ln in cmd.chunks)
    else:
        raise ValueError(f"unknown op {cmd.op!r}")
    return f"{cmd.seq} {cmd.op} stream={cmd.stream_id} tenant={cmd.tenant_id} {tail}"


def _fields(parts: list[str], line_no: int) -> dict[str, str]:
    out = {}
    for part in parts:
        if "=" not in part:
            raise TraceParseError(line_no, f"expected key=value, got {part!r}")
        key, value = part.split("=", 1)
        out[key] = value
    return out


def parse_header(line: str, line_no: int = 1) -> TraceHeader:
    if not line.startswith(HEADER_MAGIC):
        raise TraceParseError(line_no, "missing trace header")
    kv = _fields(line[len(HEADER_MAGIC):].split(), line_no)
    try:
        geometry = Geometry(total_blocks=int(kv["total_blocks"]),
                            pages_per_block=int(kv["pages_per_block"]),
                            page_size=int(kv["page_size"]),
                            channels=int(kv["channels"]),
                            op_fraction=float(kv["op_fraction"]))
        return TraceHeader(geometry, kv["mode"], int(kv["reserve"]),
                           bool(int(kv["striping"])))
    except (KeyError, ValueError) as exc:
        raise TraceParseError(line_no, f"bad header: {exc}") from None


def parse_command(line: str, line_no: int, expect_seq: int) -> Command:
    parts = line.split()
    if len(parts) < 4:
        raise TraceParseError(line_no, "truncated record")
    try:
        seq = int(parts[0])
    except ValueError:
        raise TraceParseError(line_no, f"bad seq {parts[0]!r}") from None
    if seq != expect_seq:
        raise TraceParseError(line_no, f"seq {seq} out of order (expected {expect_seq})")
    op = parts[1]
    kv = _fields(parts[2:], line_no)
    try:
        stream = kv["stream"]
        tenant = int(kv["tenant"])
        if op == "write":
            return Command(seq, op, stream, tenant, lba=int(kv["lba"]),
                           length=int(kv["len"]), content_base=int(kv["base"]))
        if op == "trim":
            return Command(seq, op, stream, tenant, lba=int(kv["lba"]),
                           length=int(kv["len"]))
        if op == "flashalloc":
            chunks = []
            for piece in kv["chunks"].split(","):
                start, _, ln = piece.partition(":")
                chunks.append((int(start), int(ln)))
            return Command(seq, op, stream, tenant, chunks=tuple(chunks))
    except (KeyError, ValueError) as exc:
        raise TraceParseError(line_no, f"bad {op} record: {exc}") from None
    raise TraceParseError(line_no, f"unknown op {op!r}")


class TraceWriter:
    def __init__(self, path, geometry: Geometry, mode: str, reserve: int, striping: bool):
        self.path = path
        self._fh = open(path, "w", encoding="ascii")
        self._fh.write(format_header(geometry, mode, reserve, striping) + "\n")

    def write(self, cmd: Command) -> None:
        self._fh.write(format_command(cmd) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path) -> tuple[TraceHeader, list[Command]]:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceParseError(1, "empty trace file")
    header = parse_header(lines[0], 1)
    commands = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        commands.append(parse_command(line, line_no, expect_seq=len(commands) + 1))
    return header, commands
