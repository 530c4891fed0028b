"""Bit-exact servo bus codec, resynchronizing stream parser, and the
star-topology virtual bus with a wire-timing model.

Wire format (classic 1.0 framing)::

    0xFF 0xFF <id> <len> <instr/error> <params...> <checksum>

with ``len = param count + 2`` and ``checksum = ~(id + len + instr +
sum(params)) & 0xFF``.  Instruction and status frames share the layout; the
parser emits raw frames and the caller interprets the third byte according
to the transfer direction.

The timing model charges 10 wire bits per byte at the configured bit rate,
a fixed per-device turnaround before each response, and a fixed timeout for
absent devices.  Bulk reads send one request frame instead of N, which is
where the bus-cycle savings come from.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .dynamics_actuation import ServoParams, ServoState, rad_to_ticks, servo_step

PING = 0x01
READ = 0x02
WRITE = 0x03
SYNC_WRITE = 0x83
BULK_READ = 0x92

BROADCAST_ID = 0xFE
MAX_PARAMS = 250

# Register map (addresses shared by MX-series devices)
TORQUE_ENABLE = 24
P_GAIN = 28
GOAL_POSITION = 30  # 2 bytes, little-endian
PRESENT_POSITION = 36  # 2 bytes
PRESENT_SPEED = 38  # 2 bytes
REGISTER_TABLE_SIZE = 74

ERROR_RANGE = 0x08
ERROR_INSTRUCTION = 0x40

SPEED_UNIT_RAD_S = 0.01193805  # one raw speed unit (0.114 rpm)


class BusError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class InstructionPacket:
    id: int
    instruction: int
    params: bytes = b""

    def validate(self) -> None:
        if not 0 <= self.id <= BROADCAST_ID:
            raise BusError(f"id must lie in [0, 254], got {self.id}")
        if len(self.params) > MAX_PARAMS:
            raise BusError(f"at most {MAX_PARAMS} params fit one frame, got {len(self.params)}")
        if not 0 <= self.instruction <= 0xFF:
            raise BusError(f"instruction byte out of range: {self.instruction}")


@dataclass(frozen=True, slots=True)
class StatusPacket:
    id: int
    error: int = 0
    params: bytes = b""


@dataclass(frozen=True, slots=True)
class Diagnostic:
    kind: str  # garbage | bad_length | bad_checksum
    offset: int
    detail: str


def checksum(payload: bytes) -> int:
    """Bitwise complement of the low byte of the sum over id..params."""
    return (~sum(payload)) & 0xFF


def encode(p: InstructionPacket) -> bytes:
    p.validate()
    body = bytes([p.id, len(p.params) + 2, p.instruction]) + p.params
    return b"\xff\xff" + body + bytes([checksum(body)])


def encode_status(s: StatusPacket) -> bytes:
    return encode(InstructionPacket(s.id, s.error, s.params))


def decode_stream(buffer: bytes) -> tuple[list[InstructionPacket], int, list[Diagnostic]]:
    """Resynchronizing parse of arbitrary bytes.

    Returns (frames, consumed, diagnostics).  Garbage is skipped until the
    next 0xFF 0xFF header, frames with bad checksums are reported and
    skipped whole, and a partial trailing frame is never consumed.
    """
    packets: list[InstructionPacket] = []
    diagnostics: list[Diagnostic] = []
    i = 0
    n = len(buffer)
    garbage_start: int | None = None

    def flush_garbage(end: int) -> None:
        nonlocal garbage_start
        if garbage_start is not None:
            diagnostics.append(
                Diagnostic("garbage", garbage_start, f"skipped {end - garbage_start} bytes")
            )
            garbage_start = None

    while True:
        # Hunt for a frame header.
        while i + 1 < n and not (buffer[i] == 0xFF and buffer[i + 1] == 0xFF):
            if garbage_start is None:
                garbage_start = i
            i += 1
        if i + 3 >= n:
            break  # header or id/len not complete yet
        pkt_id = buffer[i + 2]
        if pkt_id == 0xFF:
            # Part of a longer 0xFF run; resynchronize one byte later.
            if garbage_start is None:
                garbage_start = i
            i += 1
            continue
        flush_garbage(i)
        length = buffer[i + 3]
        if length < 2 or length > MAX_PARAMS + 2:
            diagnostics.append(Diagnostic("bad_length", i, f"length byte {length} invalid"))
            i += 2
            continue
        end = i + 4 + length
        if end > n:
            break  # partial trailing frame
        body = bytes(buffer[i + 2 : end - 1])
        if checksum(body) != buffer[end - 1]:
            diagnostics.append(
                Diagnostic(
                    "bad_checksum",
                    i,
                    f"id {pkt_id} expected 0x{checksum(body):02X} got 0x{buffer[end - 1]:02X}",
                )
            )
            i = end
            continue
        packets.append(InstructionPacket(pkt_id, buffer[i + 4], bytes(buffer[i + 5 : end - 1])))
        i = end
    consumed = i if garbage_start is None else garbage_start
    return packets, consumed, diagnostics


def decode(data: bytes) -> InstructionPacket:
    """Decode exactly one well-formed frame."""
    packets, consumed, diagnostics = decode_stream(data)
    if diagnostics or len(packets) != 1 or consumed != len(data):
        raise BusError(f"expected exactly one clean frame, got {len(packets)} ({diagnostics})")
    return packets[0]


def as_status(p: InstructionPacket) -> StatusPacket:
    """Reinterpret a received frame as a status packet (device-to-host)."""
    return StatusPacket(id=p.id, error=p.instruction, params=p.params)


class StreamDecoder:
    """Incremental wrapper around decode_stream keeping the unconsumed tail."""

    def __init__(self) -> None:
        self.buffer = b""
        self.diagnostics: list[Diagnostic] = []

    def feed(self, chunk: bytes) -> list[InstructionPacket]:
        self.buffer += chunk
        packets, consumed, diags = decode_stream(self.buffer)
        self.buffer = self.buffer[consumed:]
        self.diagnostics.extend(diags)
        return packets


def _speed_register(velocity: float) -> int:
    raw = min(1023, int(round(abs(velocity) / SPEED_UNIT_RAD_S)))
    return raw | 0x400 if velocity < 0 else raw


class ServoDevice:
    """Register-level simulated servo backed by the actuator physics."""

    def __init__(self, dev_id: int, params: ServoParams, state: ServoState | None = None):
        if not 0 <= dev_id < BROADCAST_ID:
            raise BusError(f"device id must lie in [0, 253], got {dev_id}")
        self.id = dev_id
        self.params = params
        self.state = state or ServoState()
        self._table = bytearray(REGISTER_TABLE_SIZE)

    def step(self, load_torque: float, dt: float) -> None:
        self.state = servo_step(self.state, self.params, load_torque, dt)

    def _render_table(self) -> bytearray:
        t = bytearray(self._table)
        t[TORQUE_ENABLE] = 1 if self.state.torque_enabled else 0
        t[P_GAIN] = int(round(min(254, max(0, self.state.p_gain))))
        goal = self.state.goal_position & 0xFFFF
        t[GOAL_POSITION : GOAL_POSITION + 2] = goal.to_bytes(2, "little")
        pos = rad_to_ticks(self.state.position, self.params.ticks_per_rev)
        t[PRESENT_POSITION : PRESENT_POSITION + 2] = pos.to_bytes(2, "little")
        t[PRESENT_SPEED : PRESENT_SPEED + 2] = _speed_register(self.state.velocity).to_bytes(2, "little")
        return t

    def read(self, addr: int, length: int) -> tuple[int, bytes]:
        if addr < 0 or length < 0 or addr + length > REGISTER_TABLE_SIZE:
            return ERROR_RANGE, b""
        table = self._render_table()
        return 0, bytes(table[addr : addr + length])

    def write(self, addr: int, data: bytes) -> int:
        if addr < 0 or addr + len(data) > REGISTER_TABLE_SIZE:
            return ERROR_RANGE
        table = self._render_table()
        table[addr : addr + len(data)] = data
        self._table[addr : addr + len(data)] = data
        state = self.state
        if addr <= TORQUE_ENABLE < addr + len(data):
            state = _replace_state(state, torque_enabled=table[TORQUE_ENABLE] != 0)
        if addr <= P_GAIN < addr + len(data):
            state = _replace_state(state, p_gain=float(table[P_GAIN]))
        if addr < GOAL_POSITION + 2 and addr + len(data) > GOAL_POSITION:
            goal = int.from_bytes(table[GOAL_POSITION : GOAL_POSITION + 2], "little")
            state = _replace_state(state, goal_position=min(goal, self.params.ticks_per_rev - 1))
        self.state = state
        return 0

    def handle(self, p: InstructionPacket) -> StatusPacket | None:
        """Apply an instruction; broadcast frames never produce a response."""
        respond = p.id != BROADCAST_ID
        if p.instruction == PING:
            return StatusPacket(self.id) if respond else None
        if p.instruction == READ:
            if len(p.params) != 2:
                return StatusPacket(self.id, ERROR_INSTRUCTION) if respond else None
            error, data = self.read(p.params[0], p.params[1])
            return StatusPacket(self.id, error, data) if respond else None
        if p.instruction == WRITE:
            if len(p.params) < 1:
                return StatusPacket(self.id, ERROR_INSTRUCTION) if respond else None
            error = self.write(p.params[0], p.params[1:])
            return StatusPacket(self.id, error) if respond else None
        return StatusPacket(self.id, ERROR_INSTRUCTION) if respond else None


def _replace_state(state: ServoState, **kwargs) -> ServoState:
    return replace(state, **kwargs)


@dataclass(frozen=True, slots=True)
class TransactResult:
    statuses: tuple[StatusPacket, ...]
    elapsed: float
    timed_out: bool = False


@dataclass
class VirtualBus:
    """Single star-topology bus owned by the control loop."""

    bit_rate: float = 1_000_000.0  # wire bits per second
    bits_per_byte: float = 10.0
    turnaround: float = 20e-6  # per-device response latency, s
    timeout: float = 1e-3  # absent-device penalty, s
    devices: dict[int, ServoDevice] = field(default_factory=dict)
    transcript: list[tuple[float, str, bytes]] = field(default_factory=list)
    time_s: float = 0.0

    def attach(self, device: ServoDevice) -> None:
        if device.id in self.devices:
            raise BusError(f"duplicate device id {device.id}")
        self.devices[device.id] = device

    def wire_time(self, n_bytes: int) -> float:
        return n_bytes * self.bits_per_byte / self.bit_rate

    def _log(self, direction: str, data: bytes) -> None:
        self.transcript.append((self.time_s, direction, data))

    def transact(self, p: InstructionPacket) -> TransactResult:
        """One instruction on the wire plus any responses; advances bus time."""
        wire = encode(p)
        start = self.time_s
        self._log("TX", wire)
        self.time_s += self.wire_time(len(wire))

        if p.instruction == BULK_READ:
            statuses, timed_out = self._bulk_read_responses(p)
            return TransactResult(tuple(statuses), self.time_s - start, timed_out)

        if p.id == BROADCAST_ID:
            if p.instruction == SYNC_WRITE:
                self._apply_sync_write(p)
            else:
                for device in self.devices.values():
                    device.handle(p)
            return TransactResult((), self.time_s - start)

        device = self.devices.get(p.id)
        if device is None:
            self.time_s += self.timeout
            return TransactResult((), self.time_s - start, timed_out=True)
        status = device.handle(p)
        statuses: tuple[StatusPacket, ...] = ()
        if status is not None:
            reply = encode_status(status)
            self.time_s += self.turnaround
            self._log("RX", reply)
            self.time_s += self.wire_time(len(reply))
            statuses = (status,)
        return TransactResult(statuses, self.time_s - start)

    def _apply_sync_write(self, p: InstructionPacket) -> None:
        if len(p.params) < 2:
            return
        addr, block = p.params[0], p.params[1]
        i = 2
        while i + 1 + block <= len(p.params):
            dev_id = p.params[i]
            data = p.params[i + 1 : i + 1 + block]
            device = self.devices.get(dev_id)
            if device is not None:
                device.write(addr, data)
            i += 1 + block

    def _bulk_read_responses(self, p: InstructionPacket) -> tuple[list[StatusPacket], bool]:
        statuses: list[StatusPacket] = []
        timed_out = False
        params = p.params
        i = 1  # params[0] is the fixed 0x00
        while i + 3 <= len(params):
            length, dev_id, addr = params[i], params[i + 1], params[i + 2]
            i += 3
            device = self.devices.get(dev_id)
            if device is None:
                self.time_s += self.timeout
                timed_out = True
                continue
            error, data = device.read(addr, length)
            status = StatusPacket(dev_id, error, data)
            reply = encode_status(status)
            self.time_s += self.turnaround
            self._log("RX", reply)
            self.time_s += self.wire_time(len(reply))
            statuses.append(status)
        return statuses, timed_out


def bulk_read(
    bus: VirtualBus, requests: list[tuple[int, int, int]]
) -> tuple[dict[int, bytes | None], float]:
    """One BULK_READ transaction: requests are (id, addr, length) triples.

    Responses arrive in request order; a missing device contributes a
    timeout entry (None) without aborting the rest.
    """
    if not requests:
        return {}, 0.0
    ids = [r[0] for r in requests]
    if len(set(ids)) != len(ids):
        raise BusError("bulk read ids must be unique")
    params = bytes([0x00]) + b"".join(
        bytes([length, dev_id, addr]) for dev_id, addr, length in requests
    )
    result = bus.transact(InstructionPacket(BROADCAST_ID, BULK_READ, params))
    data: dict[int, bytes | None] = {dev_id: None for dev_id, _, _ in requests}
    for status in result.statuses:
        data[status.id] = status.params
    return data, result.elapsed


def transcript_lines(bus: VirtualBus) -> list[str]:
    """Hex-dump transcript: `t_us DIR bytes...`, one line per frame."""
    return [
        f"{t * 1e6:.1f} {direction} {' '.join(f'{b:02X}' for b in data)}"
        for t, direction, data in bus.transcript
    ]
