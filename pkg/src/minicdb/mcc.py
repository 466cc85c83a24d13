"""MiniC compiler driver: source file in, object module and symbol file out."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .codegen import ObjectModule, compile_unit, unit_name
from .minic import CompileError, analyze, parse, plan_stopping_points
from .objfile import save_object
from .sympickle import save_symfile


def compile_source(source: str, file: str, *, uname: int | None = None,
                   nonce: str = "", instrument: bool = True) -> ObjectModule:
    unit = parse(source, file)
    sem = analyze(unit)
    plan = plan_stopping_points(sem)
    if uname is None:
        uname = unit_name(file, source, nonce)
    return compile_unit(sem, plan, uname, instrument=instrument)


def compile_file(path: str | Path, out_dir: str | Path, *, nonce: str = "",
                 instrument: bool = True,
                 obj_name: str | None = None) -> tuple[Path, Path]:
    """Compile one file; returns (object path, symbol file path)."""
    path = Path(path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source = path.read_text()
    om = compile_source(source, path.name, nonce=nonce, instrument=instrument)
    obj_path = out_dir / (obj_name or (path.stem + ".obj"))
    sym_path = out_dir / om.symfile_name
    save_symfile(om.symmodule, sym_path)
    save_object(om, obj_path)
    return obj_path, sym_path


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcc", description="compile MiniC to an object module")
    parser.add_argument("source", help="input .c file")
    parser.add_argument("-o", "--output", help="output .obj path (default: <stem>.obj)")
    parser.add_argument("--no-instrument", action="store_true",
                        help="omit breakpoint checks and shadow-stack code")
    parser.add_argument("--nonce", default="",
                        help="extra salt folded into the unit name")
    args = parser.parse_args(argv)

    src = Path(args.source)
    if args.output:
        out = Path(args.output)
        out_dir, obj_name = out.parent, out.name
    else:
        out_dir, obj_name = Path("."), src.stem + ".obj"
    try:
        compile_file(src, out_dir, nonce=args.nonce,
                     instrument=not args.no_instrument, obj_name=obj_name)
    except CompileError as exc:
        for diag in exc.diagnostics:
            print(str(diag), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mcc: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
