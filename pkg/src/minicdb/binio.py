"""Little-endian binary readers/writers shared by the container formats."""

from __future__ import annotations

import io
import struct


class FormatError(Exception):
    pass


class Packer:
    def __init__(self):
        self.buf = io.BytesIO()

    def u8(self, v: int) -> "Packer":
        self.buf.write(struct.pack("<B", v & 0xFF))
        return self

    def u32(self, v: int) -> "Packer":
        self.buf.write(struct.pack("<I", v & 0xFFFFFFFF))
        return self

    def i32(self, v: int) -> "Packer":
        self.buf.write(struct.pack("<i", v))
        return self

    def blob(self, data: bytes) -> "Packer":
        self.u32(len(data))
        self.buf.write(data)
        return self

    def text(self, s: str) -> "Packer":
        return self.blob(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return self.buf.getvalue()


class Unpacker:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self.take(4))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes")
