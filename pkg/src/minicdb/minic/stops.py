"""Stopping-point planner.

Walks a type-checked unit in source pre-order and assigns dense indices
to every place a breakpoint can sit: function-body entry, each full
expression statement, condition expressions, each for clause, right
operands of && and ||, return expressions, and empty statements.  Every
point records the last symbol visible there so the debugger can resolve
names when stopped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..symtab import Coordinate
from . import ast
from .sema import FuncInfo, SemSym, SemaUnit

ENTRY = "entry"
EXPR = "expr"
EXIT = "exit"          # reserved kind: compound exits carry no points here


@dataclass(frozen=True)
class StopPoint:
    index: int
    src: Coordinate
    kind: str
    tail: Optional[SemSym]
    func: Optional[SemSym]


@dataclass
class StopPlan:
    points: list[StopPoint]

    def __len__(self) -> int:
        return len(self.points)

    def by_coord(self) -> dict[tuple[int, int], StopPoint]:
        return {(p.src.y, p.src.x): p for p in self.points}


class _Planner:
    def __init__(self):
        self.points: list[StopPoint] = []
        self.seen: dict[tuple[int, int], Coordinate] = {}
        self.tail: Optional[SemSym] = None
        self.func: Optional[SemSym] = None

    def emit(self, src: Coordinate, kind: str) -> None:
        key = (src.y, src.x)
        if key in self.seen:
            raise AssertionError(f"two stopping points share {src}")
        self.seen[key] = src
        self.points.append(StopPoint(len(self.points), src, kind, self.tail, self.func))

    # Expressions own no stopping points of their own except the right
    # operands of short-circuit operators, which begin a distinct
    # evaluation step.
    def walk_expr(self, expr: ast.Expr) -> None:
        if isinstance(expr, ast.Binary):
            self.walk_expr(expr.left)
            if expr.op in ("&&", "||"):
                self.emit(expr.right.coord, EXPR)
            self.walk_expr(expr.right)
        elif isinstance(expr, ast.Assign):
            self.walk_expr(expr.target)
            self.walk_expr(expr.value)
        elif isinstance(expr, (ast.Unary, ast.Postfix)):
            self.walk_expr(expr.operand)
        elif isinstance(expr, ast.Call):
            for arg in expr.args:
                self.walk_expr(arg)
        elif isinstance(expr, ast.Index):
            self.walk_expr(expr.base)
            self.walk_expr(expr.index)
        elif isinstance(expr, ast.Member):
            self.walk_expr(expr.base)

    def point_expr(self, expr: ast.Expr) -> None:
        self.emit(expr.coord, EXPR)
        self.walk_expr(expr)

    def walk_stmt(self, stmt) -> None:
        if isinstance(stmt, ast.Block):
            saved = self.tail
            for inner in stmt.stmts:
                self.walk_stmt(inner)
            self.tail = saved
        elif isinstance(stmt, ast.DeclStmt):
            for decl in stmt.decls:
                if decl.sym is not None:
                    self.tail = decl.sym
        elif isinstance(stmt, ast.ExprStmt):
            self.point_expr(stmt.expr)
        elif isinstance(stmt, ast.EmptyStmt):
            self.emit(stmt.coord, EXPR)
        elif isinstance(stmt, ast.IfStmt):
            self.point_expr(stmt.cond)
            self.walk_stmt(stmt.then)
            if stmt.els is not None:
                self.walk_stmt(stmt.els)
        elif isinstance(stmt, ast.WhileStmt):
            self.point_expr(stmt.cond)
            self.walk_stmt(stmt.body)
        elif isinstance(stmt, ast.ForStmt):
            if stmt.init is not None:
                self.point_expr(stmt.init)
            if stmt.cond is not None:
                self.point_expr(stmt.cond)
            if stmt.step is not None:
                self.point_expr(stmt.step)
            self.walk_stmt(stmt.body)
        elif isinstance(stmt, ast.ReturnStmt):
            if stmt.expr is not None:
                self.point_expr(stmt.expr)
        else:
            raise AssertionError(f"unhandled statement {stmt!r}")

    def walk_function(self, info: FuncInfo) -> None:
        self.func = info.sym
        # With parameters bound, the entry tail is the last parameter; a
        # parameterless function sees the file-scope tail captured when
        # its body was checked.
        self.tail = info.entry_tail
        self.emit(info.node.body.coord, ENTRY)
        for stmt in info.node.body.stmts:
            self.walk_stmt(stmt)
        self.tail = None
        self.func = None


def plan_stopping_points(sema_unit: SemaUnit) -> StopPlan:
    planner = _Planner()
    for info in sema_unit.functions:
        planner.walk_function(info)
    return StopPlan(planner.points)
