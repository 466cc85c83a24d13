"""MiniC compiler, bytecode VM, and source-level debugger toolchain."""

__version__ = "0.1.0"
