"""Helpers for building debug sessions against in-memory targets."""

from __future__ import annotations

import io
from pathlib import Path

from minicdb.comm import InProcessChannel, TargetHost
from minicdb.image import save_image
from minicdb.linker import link
from minicdb.mcc import compile_source
from minicdb.nub import NubServer
from minicdb.sympickle import save_symfile
from minicdb.vm import TargetVM


def build_image(sources: dict[str, str], out_dir: Path, entry: str = "main",
                name: str = "t.nxe"):
    """Compile and link named sources, writing image and symbol files."""
    out_dir.mkdir(parents=True, exist_ok=True)
    objects = []
    for file, text in sources.items():
        om = compile_source(text, file)
        save_symfile(om.symmodule, out_dir / om.symfile_name)
        objects.append(om)
    image = link(objects, entry=entry)
    save_image(image, out_dir / name)
    return image, objects


def make_session(sources: dict[str, str], out_dir: Path, *, stdin: bytes = b"",
                 args=None, entry: str = "main"):
    """In-process debug session; returns (server, vm, image, objects)."""
    image, objects = build_image(sources, out_dir, entry=entry)
    vm = TargetVM(image, args or ["t"], stdin=io.BytesIO(stdin))
    channel = InProcessChannel(TargetHost(vm))
    server = NubServer(channel, image, out_dir)
    return server, vm, image, objects
