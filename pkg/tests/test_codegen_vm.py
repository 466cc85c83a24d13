"""Object modules, the VM, and the debug instrumentation contracts."""

from __future__ import annotations

import io
import random
import struct
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from minicdb.codegen import SHADOW_IP, compile_unit, unit_name
from minicdb.image import DATA_BASE, SENTINEL, TOS_CELL, func_index
from minicdb.linker import link
from minicdb.mcc import compile_source
from minicdb.minic import analyze, parse, plan_stopping_points
from minicdb.objfile import dump_object, load_object
from minicdb.symtab import (
    GlobalSym, PointerType, StaticSym, find_spoints, visible_chain,
)
from minicdb.vm import FaultKind, SpaceError, TargetVM, VmError

from _proggen import random_program

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = sorted((FIXTURES / "corpus").glob("*.c"))
WF_SOURCE = (FIXTURES / "wf.c").read_text()

CORPUS_STDIN = {
    "echo_upper.c": b"Mixed CASE text 123!\nsecond line\n",
    "wordcount.c": b"the quick brown fox jumps\nover the lazy dog\n",
}


def build(source: str, file: str = "t.c", instrument: bool = True, **kw):
    om = compile_source(source, file, instrument=instrument, **kw)
    return om, link([om])


def run_image(img, stdin: bytes = b"", args=None):
    vm = TargetVM(img, args or ["t"], stdin=io.BytesIO(stdin))
    code = vm.run()
    return code, vm.stdout.getvalue(), vm


class TestSymfileEmission:
    def test_wf_globals_field_names_words(self):
        om = compile_source(WF_SOURCE, "wf.c")
        m = om.symmodule
        g = m.symbol(m.globals)
        assert g.id == "words" and isinstance(g, StaticSym)

    def test_wf_visible_chain_from_c(self):
        om = compile_source(WF_SOURCE, "wf.c")
        m = om.symmodule
        # stopping point 9 sits in getword after both locals
        tail = m.spoints[9].tail
        ids = [s.id for s in visible_chain(m, tail)]
        assert ids == ["c", "s", "buf", "words", "main", "tprint",
                       "getword", "isletter"]

    def test_entry_tail_is_buf_at_body_brace(self):
        om = compile_source(WF_SOURCE, "wf.c")
        m = om.symmodule
        entry = m.spoints[8]
        assert m.symbol(entry.tail).id == "buf"

    def test_types_deduplicated(self):
        src = "char *a; char *b; int f(char *p) { char *q; q = p; return 0; }"
        om = compile_source(src, "t.c")
        m = om.symmodule
        charp = [it.uid for it in m.items if isinstance(it.node, PointerType)]
        assert len(charp) == 1

    def test_vector_order_is_globals_chain(self):
        om = compile_source(WF_SOURCE, "wf.c")
        m = om.symmodule
        order = []
        sym = m.symbol(m.globals)
        while True:
            order.append(sym.id)
            if not sym.uplink:
                break
            sym = m.symbol(sym.uplink)
        assert order == ["words", "main", "tprint", "getword", "isletter"]
        indexed = {s.node.index: s.node.id for s in m.items
                   if isinstance(s.node, (StaticSym, GlobalSym))}
        assert indexed == {0: "words", 1: "main", 2: "tprint",
                           3: "getword", 4: "isletter"}

    def test_spoint_count_matches_plan(self):
        unit = parse(WF_SOURCE, "wf.c")
        sem = analyze(unit)
        plan = plan_stopping_points(sem)
        om = compile_unit(sem, plan, unit_name("wf.c", WF_SOURCE))
        assert om.spoint_count == len(plan.points) == len(om.symmodule.spoints)

    def test_object_roundtrip(self):
        om = compile_source(WF_SOURCE, "wf.c")
        back = load_object(dump_object(om))
        assert back.uname == om.uname
        assert back.code == om.code
        assert back.vector == om.vector
        assert back.exports == om.exports
        assert [f.name for f in back.functions] == [f.name for f in om.functions]


class TestVmBasics:
    def test_words_is_zero_after_static_init(self):
        om, img = build(WF_SOURCE, "wf.c")
        vm = TargetVM(img, ["wf"])
        m = om.symmodule
        words = next(it.node for it in m.items
                     if getattr(it.node, "id", None) == "words")
        # address vector: record for this unit starts at offset 0 of space 2
        count = struct.unpack_from("<I", vm.records, 4)[0]
        assert count == 5
        addr = struct.unpack_from("<I", vm.records, 8 + 4 * words.index)[0]
        assert vm.fetch(0, addr, 4) == b"\x00\x00\x00\x00"

    def test_record_space_starts_with_first_uname(self):
        om, img = build(WF_SOURCE, "wf.c")
        vm = TargetVM(img, ["wf"])
        assert struct.unpack_from("<I", vm.fetch(2, 0, 4))[0] == om.uname
        assert img.manifest[0][0] == om.uname

    def test_fetch_zero_bytes(self):
        _, img = build("int main(void) { return 0; }")
        vm = TargetVM(img)
        assert vm.fetch(0, DATA_BASE, 0) == b""

    def test_fetch_beyond_space_returns_nothing(self):
        _, img = build("int main(void) { return 0; }")
        vm = TargetVM(img)
        assert vm.fetch(0, img.mem_size + 10, 4) == b""
        assert vm.fetch(2, len(vm.records) + 1, 4) == b""

    def test_short_read_at_boundary(self):
        _, img = build("int main(void) { return 0; }")
        vm = TargetVM(img)
        got = vm.fetch(2, len(vm.records) - 2, 10)
        assert len(got) == 2

    def test_unknown_space_rejected(self):
        _, img = build("int main(void) { return 0; }")
        vm = TargetVM(img)
        with pytest.raises(SpaceError):
            vm.fetch(7, 0, 4)

    def test_space2_read_only(self):
        _, img = build("int main(void) { return 0; }")
        vm = TargetVM(img)
        with pytest.raises(SpaceError):
            vm.store(2, 0, b"\x01")

    def test_space_isolation(self):
        src = "int main(void) { int x; x = 1; return x; }"
        _, img = build(src)
        vm = TargetVM(img)
        before = bytes(vm.memory)
        vm.store(1, 0, b"\x01\x01")
        assert bytes(vm.memory) == before
        vm.store(0, DATA_BASE + 64, b"\xff" * 8)
        assert all(f in (0, 1) for f in vm.flags)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 4000), st.binary(min_size=0, max_size=64))
    def test_store_fetch_roundtrip(self, offset, data):
        _, img = build("int main(void) { return 0; }")
        vm = TargetVM(img)
        addr = DATA_BASE + 0x800 + offset
        wrote = vm.store(0, addr, data)
        assert wrote == len(data)
        assert vm.fetch(0, addr, len(data)) == data

    def test_resume_after_exit_errors(self):
        _, img = build("int main(void) { return 3; }")
        vm = TargetVM(img)
        ev = vm.resume()
        assert ev.kind == "exit" and ev.code == 3
        with pytest.raises(VmError):
            vm.resume()

    def test_exit_restores_tos(self):
        _, img = build(WF_SOURCE, "wf.c")
        vm = TargetVM(img, stdin=io.BytesIO(b"a b\n"))
        vm.run()
        assert vm.tos() == SENTINEL


class TestFaults:
    def test_divide_fault_at_containing_point(self):
        src = "int main(void) { int y; y = 0; return 1 / y; }\n"
        om, img = build(src)
        vm = TargetVM(img)
        ev = vm.resume()
        assert ev.kind == "fault" and ev.fault == FaultKind.DIVIDE
        # the return expression is the third stopping point (entry, y=0, ret)
        assert ev.spoint == 2
        assert ev.uname == om.uname

    def test_null_dereference_faults(self):
        src = "int main(void) { int *p; p = 0; return *p; }\n"
        _, img = build(src)
        vm = TargetVM(img)
        ev = vm.resume()
        assert ev.kind == "fault" and ev.fault == FaultKind.MEMORY

    def test_fault_then_resume_exits(self):
        src = "int main(void) { int y; y = 0; return 1 / y; }\n"
        _, img = build(src)
        vm = TargetVM(img)
        assert vm.resume().kind == "fault"
        ev = vm.resume()
        assert ev.kind == "exit" and ev.code == 128 + int(FaultKind.DIVIDE)

    def test_stack_exhaustion_faults(self):
        src = "static int f(int n) { return f(n + 1); }\nint main(void) { return f(0); }\n"
        _, img = build(src)
        vm = TargetVM(img)
        ev = vm.resume()
        assert ev.kind == "fault" and ev.fault == FaultKind.MEMORY


class TestTraps:
    def arm(self, vm, index):
        vm.store(1, index, b"\x01")

    def test_armed_flag_traps_before_expression(self):
        src = "int main(void) { int x; x = 1; x = 2; return x; }\n"
        om, img = build(src)
        vm = TargetVM(img)
        # points: 0 entry, 1 'x = 1', 2 'x = 2', 3 return
        self.arm(vm, 2)
        ev = vm.resume()
        assert ev.kind == "break" and ev.spoint == 2 and ev.uname == om.uname
        # stopped before 'x = 2': x still holds 1
        m = om.symmodule
        x = next(it.node for it in m.items if getattr(it.node, "id", None) == "x")
        assert struct.unpack("<i", vm.fetch(0, vm.fp + x.offset, 4))[0] == 1
        assert struct.unpack_from("<I", vm.memory, vm.fp + SHADOW_IP)[0] == 2
        ev = vm.resume()
        assert ev.kind == "exit" and ev.code == 2

    def test_unarmed_flag_never_stops(self):
        src = "int main(void) { int x; x = 1; x = 2; return x; }\n"
        _, img = build(src)
        vm = TargetVM(img)
        assert vm.resume().kind == "exit"

    def test_loop_point_stops_once_per_iteration(self):
        src = ("int main(void) { int i; int n; n = 0;\n"
               "for (i = 0; i < 5; i = i + 1)\n"
               "    n = n + i;\n"
               "return n; }\n")
        om, img = build(src)
        sem = analyze(parse(src, "t.c"))
        plan = plan_stopping_points(sem)
        body_idx = next(p.index for p in plan.points
                        if p.src.y == 3 and p.kind == "expr")
        vm = TargetVM(img)
        self.arm(vm, body_idx)
        stops = 0
        while True:
            ev = vm.resume()
            if ev.kind == "exit":
                break
            assert ev.spoint == body_idx
            stops += 1
        assert stops == 5 and ev.code == 10

    def test_short_circuit_rhs_trap_only_when_lhs_true(self):
        src = ("static int truth(int v) { return v; }\n"
               "int main(void) { int hits; int i; hits = 0;\n"
               "for (i = 0; i < 4; i = i + 1) {\n"
               "    if (truth(i > 1) && truth(1))\n"
               "        hits = hits + 1;\n"
               "}\n"
               "return hits; }\n")
        om, img = build(src)
        sem = analyze(parse(src, "t.c"))
        plan = plan_stopping_points(sem)
        line4 = [p for p in plan.points if p.src.y == 4]
        rhs_idx = max(line4, key=lambda p: p.src.x).index
        vm = TargetVM(img)
        self.arm(vm, rhs_idx)
        stops = 0
        while True:
            ev = vm.resume()
            if ev.kind == "exit":
                break
            stops += 1
        # i = 2 and i = 3 make the left side true
        assert stops == 2 and ev.code == 2

    def test_extraneous_trap_in_other_unit(self):
        # two units; the trap arrives regardless of which unit owns the
        # coordinate, because flags are shared by index
        a = "int helper(int x) { int t; t = x + 1; t = t * 2; return t; }\n"
        b = ("int helper(int x);\n"
             "int main(void) { int r; r = helper(3); r = r + 1; return r; }\n")
        om_a = compile_source(a, "a.c")
        om_b = compile_source(b, "b.c")
        img = link([om_a, om_b])
        vm = TargetVM(img)
        vm.store(1, 2, b"\x01")
        events = []
        while True:
            ev = vm.resume()
            if ev.kind == "exit":
                break
            events.append((ev.spoint, ev.uname))
        assert (2, om_a.uname) in events and (2, om_b.uname) in events


class TestTransparency:
    @pytest.mark.parametrize("path", CORPUS, ids=[p.name for p in CORPUS])
    def test_corpus_differential(self, path):
        source = path.read_text()
        stdin = CORPUS_STDIN.get(path.name, b"")
        _, img_on = build(source, path.name, instrument=True)
        _, img_off = build(source, path.name, instrument=False)
        code_on, out_on, vm_on = run_image(img_on, stdin)
        code_off, out_off, _ = run_image(img_off, stdin)
        assert out_on == out_off
        assert code_on == code_off
        assert vm_on.tos() == SENTINEL

    @pytest.mark.parametrize("seed", range(8))
    def test_random_program_differential(self, seed):
        source = random_program(random.Random(seed * 37 + 1))
        _, img_on = build(source, f"g{seed}.c", instrument=True)
        _, img_off = build(source, f"g{seed}.c", instrument=False)
        assert run_image(img_on)[:2] == run_image(img_off)[:2]

    def test_corpus_produces_output(self):
        # guard against a vacuous differential: the corpus must say something
        total = 0
        for path in CORPUS:
            _, img = build(path.read_text(), path.name)
            _, out, _ = run_image(img, CORPUS_STDIN.get(path.name, b""))
            total += len(out)
        assert total > 100


class TestLinkerBehavior:
    def test_undefined_symbol_names_referrer(self):
        src = "int missing(int x);\nint main(void) { return missing(1); }\n"
        om = compile_source(src, "user.c")
        with pytest.raises(Exception, match="missing.*user.c"):
            link([om])

    def test_duplicate_external_names_both_units(self):
        a = compile_source("int shared(void) { return 1; }\nint main(void) { return 0; }", "a.c")
        b = compile_source("int shared(void) { return 2; }", "b.c")
        with pytest.raises(Exception, match="a.c.*b.c"):
            link([a, b])

    def test_static_names_do_not_collide(self):
        a = compile_source("static int local(void) { return 1; }\n"
                           "int main(void) { return local(); }", "a.c")
        b = compile_source("static int local(void) { return 2; }\n"
                           "int use(void) { return local(); }", "b.c")
        img = link([a, b])
        assert run_image(img)[0] == 1

    def test_bpflags_is_max_spoint_count(self):
        a = compile_source("int main(void) { int x; x = 1; return x; }", "a.c")
        b = compile_source("int f(void) { int i; int n; n = 0;\n"
                           "for (i = 0; i < 3; i = i + 1) n = n + 1;\n"
                           "return n; }", "b.c")
        img = link([a, b])
        assert img.bpflags_len == max(a.spoint_count, b.spoint_count)

    def test_bpflags_random_links(self):
        rng = random.Random(5)
        for _ in range(5):
            oms = []
            for i in range(rng.randint(1, 4)):
                src = random_program(rng, nfuncs=rng.randint(1, 3))
                name = f"u{i}.c"
                om = compile_source(src, name, nonce=str(i))
                # strip main from all but the first unit by renaming
                oms.append(om)
            entry_unit = oms[0]
            img = link([entry_unit])
            assert img.bpflags_len == entry_unit.spoint_count

    def test_unit_name_collision_detected(self):
        a = compile_source("int main(void) { return 0; }", "a.c", uname=7)
        b = compile_source("int f(void) { return 0; }", "b.c", uname=7)
        with pytest.raises(Exception, match="collision"):
            link([a, b])

    def test_no_entry_image_runs_to_exit(self):
        om = compile_source("int f(void) { return 9; }", "lib.c")
        img = link([om], entry=None)
        code, out, _ = run_image(img)
        assert code == 0 and out == b""

    def test_link_order_does_not_change_resolution(self):
        a = compile_source("int callee(void) { return 5; }", "a.c")
        b = compile_source("int callee(void);\nint main(void) { return callee(); }", "b.c")
        assert run_image(link([a, b]))[0] == 5
        a2 = compile_source("int callee(void) { return 5; }", "a.c")
        b2 = compile_source("int callee(void);\nint main(void) { return callee(); }", "b.c")
        assert run_image(link([b2, a2]))[0] == 5

    def test_argv_passed_to_main(self):
        src = ("int main(int argc, char *argv[]) {\n"
               "    char *p;\n"
               "    p = argv[1];\n"
               "    while (*p != 0)\n"
               "        putchar(*p++);\n"
               "    putchar(10);\n"
               "    return argc;\n"
               "}\n")
        _, img = build(src)
        code, out, _ = run_image(img, args=["prog", "hello"])
        assert code == 2 and out == b"hello\n"
