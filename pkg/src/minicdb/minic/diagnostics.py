from __future__ import annotations

from dataclasses import dataclass

from ..symtab import Coordinate


@dataclass(frozen=True)
class Diagnostic:
    coord: Coordinate
    message: str

    def __str__(self) -> str:
        return f"{self.coord.file}:{self.coord.y}.{self.coord.x}: {self.message}"


class CompileError(Exception):
    """Carries every diagnostic collected before compilation gave up."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
