"""MiniC front end: lexer, parser, type checker, stopping-point planner."""

from .diagnostics import CompileError, Diagnostic
from .lexer import lex
from .parser import parse
from .sema import analyze
from .stops import plan_stopping_points

__all__ = [
    "CompileError", "Diagnostic", "lex", "parse", "analyze",
    "plan_stopping_points",
]
