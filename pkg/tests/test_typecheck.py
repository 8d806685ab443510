"""Typechecker behavior: leftover threading, strict linearity, promotion,
choice, application, recursion unfolding, and the minimality sweep."""

import pytest

from minsess.terms import (
    Abs,
    App,
    Branch,
    Inact,
    Input,
    Lit,
    Name,
    Output,
    Par,
    Res,
    Select,
    Var,
    encode_namepass,
    encode_nptype,
)
from minsess.types import (
    BOOL,
    INT,
    SEnd,
    SIn,
    SOut,
    SBra,
    SRec,
    SSel,
    SVar,
    TArrow,
    TChan,
    dual,
)
from minsess.typecheck import (
    TypeEnvs,
    check_minimal_typed,
    check_process,
    check_value,
)

END = SEnd()
UNIT_ARROW = TArrow((END,), shared=True)


def sname(base, index=None, dual_=False):
    return Name(base, index, dual_, "session")


def shname(base):
    return Name(base, None, False, "shared")


def ok(result):
    assert result.ok, result.first_error()
    return result


def bad(result, rule=None):
    assert not result.ok
    if rule is not None:
        assert any(d.rule == rule for d in result.diagnostics), result.diagnostics
    return result


BOOL_SINK = Abs(((Var("b"), BOOL),), Inact(), shared=False)  # (Bool) lin arrow
U_SINK = TArrow((BOOL,), shared=False)


class TestBasics:
    def test_inact_empty(self):
        ok(check_process(None, Inact()))

    def test_inact_weakens_end(self):
        envs = TypeEnvs(delta={sname("s"): END})
        ok(check_process(envs, Inact()))

    def test_inact_leftover_session(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SOut((U_SINK,), END)})
        bad(check_process(envs, Inact()), "leftover")
        res = check_process(envs, Inact(), require_consumed=False)
        assert res.ok and s in res.leftover.delta

    def test_unknown_subject(self):
        bad(check_process(None, Output(sname("s"), (Lit(True),), Inact())), "Subj")

    def test_send_then_end(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SOut((U_SINK,), END)})
        ok(check_process(envs, Output(s, (BOOL_SINK,), Inact())))

    def test_send_against_input_type(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SIn((U_SINK,), END)})
        bad(check_process(envs, Output(s, (BOOL_SINK,), Inact())), "Send")

    def test_send_payload_type_mismatch(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SOut((TArrow((INT,), False),), END)})
        bad(check_process(envs, Output(s, (BOOL_SINK,), Inact())), "Val")

    def test_first_order_payload_rejected(self):
        s, m = sname("s"), sname("m")
        envs = TypeEnvs(delta={s: SOut((U_SINK,), END), m: END})
        bad(check_process(envs, Output(s, (m,), Inact())), "Send")


class TestLinearity:
    def test_linear_binder_must_be_consumed(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SIn((U_SINK,), END)})
        bad(check_process(envs, Input(s, (Var("f"),), Inact())), "Rcv")

    def test_linear_binder_consumed_by_app(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SIn((U_SINK,), END)})
        p = Input(s, (Var("f"),), App(Var("f"), (Lit(True),)))
        ok(check_process(envs, p))

    def test_linear_value_single_use(self):
        s = sname("s")
        two = SOut((U_SINK,), SOut((U_SINK,), END))
        envs = TypeEnvs(lam={Var("f"): U_SINK}, delta={s: two})
        p = Output(s, (Var("f"),), Output(s, (Var("f"),), Inact()))
        bad(check_process(envs, p), "Var")

    def test_shared_value_contraction(self):
        s = sname("s")
        u = TArrow((BOOL,), shared=True)
        two = SOut((u,), SOut((u,), END))
        envs = TypeEnvs(gamma={Var("f"): u}, delta={s: two})
        p = Output(s, (Var("f"),), Output(s, (Var("f"),), Inact()))
        ok(check_process(envs, p))

    def test_unused_linear_env_value_is_leftover(self):
        envs = TypeEnvs(lam={Var("f"): U_SINK})
        bad(check_process(envs, Inact()), "leftover")


class TestAbstraction:
    def test_check_value_linear_abs(self):
        t, res = check_value(None, BOOL_SINK)
        ok(res)
        assert t == U_SINK

    def test_promotion_cannot_touch_sessions(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SOut((U_SINK,), END)})
        v = Abs(((Var("x"), END),), Output(s, (BOOL_SINK,), Inact()), shared=True)
        _, res = check_value(envs, v)
        bad(res, "Subj")

    def test_linear_abs_captures_sessions(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SOut((U_SINK,), END)})
        v = Abs(((Var("x"), END),), Output(s, (BOOL_SINK,), Inact()), shared=False)
        t, res = check_value(envs, v)
        ok(res)
        assert t == TArrow((END,), shared=False)
        assert s not in res.leftover.delta

    def test_linear_abs_must_finish_capture(self):
        s = sname("s")
        two = SOut((U_SINK,), SOut((U_SINK,), END))
        envs = TypeEnvs(delta={s: two})
        v = Abs(((Var("x"), END),), Output(s, (BOOL_SINK,), Inact()), shared=False)
        _, res = check_value(envs, v)
        bad(res, "Abs")

    def test_abs_session_param_driven_to_end(self):
        st = SOut((U_SINK,), END)
        good = Abs(((Var("x"), st),), Output(Var("x"), (BOOL_SINK,), Inact()))
        t, res = check_value(None, good)
        ok(res)
        assert t == TArrow((st,), shared=False)
        lazy = Abs(((Var("x"), st),), Inact())
        _, res = check_value(None, lazy)
        bad(res, "Abs")

    def test_eprom_shared_accepted_for_linear(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: SOut((U_SINK,), END)})
        shared_sink = Abs(((Var("b"), BOOL),), Inact(), shared=True)
        ok(check_process(envs, Output(s, (shared_sink,), Inact())))

    def test_linear_not_accepted_for_shared(self):
        s = sname("s")
        want_shared = TArrow((BOOL,), shared=True)
        envs = TypeEnvs(delta={s: SOut((want_shared,), END)})
        bad(check_process(envs, Output(s, (BOOL_SINK,), Inact())), "Val")


class TestParallel:
    def test_communicating_pair(self):
        s = sname("s")
        st = SOut((U_SINK,), END)
        p = Par(
            Output(s, (BOOL_SINK,), Inact()),
            Input(s.dualized(), (Var("f"),), App(Var("f"), (Lit(False),))),
        )
        ok(check_process(None, Res(s, st, p)))

    def test_endpoint_not_splittable(self):
        s = sname("s")
        two = SOut((U_SINK,), SOut((U_SINK,), END))
        envs = TypeEnvs(delta={s: two})
        p = Par(
            Output(s, (BOOL_SINK,), Inact()),
            Output(s, (BOOL_SINK,), Inact()),
        )
        bad(check_process(envs, p), "Par")

    def test_single_thread_must_finish(self):
        s = sname("s")
        two = SOut((U_SINK,), SOut((U_SINK,), END))
        envs = TypeEnvs(delta={s: two})
        bad(check_process(envs, Output(s, (BOOL_SINK,), Inact())))


class TestRestriction:
    def test_res_unused_end_ok(self):
        ok(check_process(None, Res(sname("s"), END, Inact())))

    def test_res_unused_live_type_rejected(self):
        st = SOut((U_SINK,), END)
        bad(check_process(None, Res(sname("s"), st, Inact())), "Res")

    def test_res_shadowing_restores_outer(self):
        s = sname("s")
        st = SOut((U_SINK,), END)
        inner = Res(
            s, st,
            Par(
                Output(s, (BOOL_SINK,), Inact()),
                Input(s.dualized(), (Var("f",),), App(Var("f"), (Lit(True),))),
            ),
        )
        outer_body = Par(inner, Output(s, (BOOL_SINK,), Inact()))
        envs = TypeEnvs(delta={s: st, s.dualized(): dual(st)})
        p = Par(outer_body, Input(s.dualized(), (Var("g"),), App(Var("g"), (Lit(True),))))
        ok(check_process(envs, p))

    def test_shared_restriction(self):
        a = shname("a")
        u = TArrow((BOOL,), shared=True)
        p = Res(
            a, TChan(u),
            Par(
                Output(a, (Abs(((Var("b"), BOOL),), Inact(), shared=True),), Inact()),
                Input(a, (Var("h"),), App(Var("h"), (Lit(True),))),
            ),
        )
        ok(check_process(None, p))

    def test_shared_input_linear_payload_consumed(self):
        a = shname("a")
        envs = TypeEnvs(gamma={a: TChan(U_SINK)})
        bad(check_process(envs, Input(a, (Var("f"),), Inact())), "Acc")


class TestChoice:
    ST = SBra((("go", SIn((U_SINK,), END)), ("quit", END)))

    def test_branch_ok(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: self.ST})
        p = Branch(
            s,
            (
                ("go", Input(s, (Var("f"),), App(Var("f"), (Lit(True),)))),
                ("quit", Inact()),
            ),
        )
        ok(check_process(envs, p))

    def test_branch_label_mismatch(self):
        s = sname("s")
        envs = TypeEnvs(delta={s: self.ST})
        bad(check_process(envs, Branch(s, (("go", Inact()),))), "Bra")

    def test_branch_unequal_consumption(self):
        s, r = sname("s"), sname("r")
        rt = SOut((U_SINK,), END)
        envs = TypeEnvs(delta={s: SBra((("a", END), ("b", END))), r: rt})
        p = Branch(
            s,
            (
                ("a", Output(r, (BOOL_SINK,), Inact())),
                ("b", Inact()),
            ),
        )
        bad(check_process(envs, p), "Bra")

    def test_select_ok_and_bad_label(self):
        s = sname("s")
        st = SSel((("add", SOut((U_SINK,), END)), ("sub", END)))
        envs = TypeEnvs(delta={s: st})
        ok(check_process(envs, Select(s, "add", Output(s, (BOOL_SINK,), Inact()))))
        bad(check_process(envs, Select(s, "mul", Inact())), "Sel")


class TestApplication:
    def test_literal_args(self):
        v = Abs(((Var("x"), INT), (Var("y"), INT)), Inact(), shared=True)
        ok(check_process(None, App(v, (Lit(16), Lit(26)))))
        bad(check_process(None, App(v, (Lit(16), Lit(True)))), "App")

    def test_session_arg_consumed_whole(self):
        s = sname("s")
        st = SOut((U_SINK,), END)
        v = Abs(((Var("x"), st),), Output(Var("x"), (BOOL_SINK,), Inact()))
        envs = TypeEnvs(delta={s: st})
        ok(check_process(envs, App(v, (s,))))

    def test_session_arg_type_must_match(self):
        s = sname("s")
        st = SOut((U_SINK,), END)
        v = Abs(((Var("x"), st),), Output(Var("x"), (BOOL_SINK,), Inact()))
        envs = TypeEnvs(delta={s: SOut((U_SINK,), SOut((U_SINK,), END))})
        bad(check_process(envs, App(v, (s,))), "App")

    def test_arity_mismatch(self):
        v = Abs(((Var("x"), INT),), Inact(), shared=True)
        bad(check_process(None, App(v, (Lit(1), Lit(2)))), "App")

    def test_apply_nonarrow(self):
        envs = TypeEnvs(gamma={Var("n"): INT})
        bad(check_process(envs, App(Var("n"), (Lit(1),))), "App")


class TestRecursion:
    def test_unfold_at_prefix_and_handoff(self):
        loop = SRec("t", SIn((U_SINK,), SOut((U_SINK,), SVar("t"))))
        s = sname("s")
        y = Var("y")
        p = Input(s, (Var("f"),), Output(s, (Var("f"),), App(y, (s,))))
        envs = TypeEnvs(lam={y: TArrow((loop,), shared=False)}, delta={s: loop})
        ok(check_process(envs, p))

    def test_unfinished_loop_rejected(self):
        loop = SRec("t", SIn((U_SINK,), SOut((U_SINK,), SVar("t"))))
        s = sname("s")
        p = Input(s, (Var("f"),), Output(s, (Var("f"),), Inact()))
        bad(check_process(TypeEnvs(delta={s: loop}), p))


class TestEncodedExample:
    # a channel name is delegated, then a boolean flows over it
    S_M0 = SOut((BOOL,), END)
    U_V0 = SOut((S_M0,), END)

    def build(self):
        m, u = sname("m"), sname("u")
        b, x = Var("b"), Var("x")
        source = Res(
            u,
            self.U_V0,
            Par(
                Output(u, (m,), Input(m.dualized(), (b,), Inact())),
                Input(u.dualized(), (x,), Output(x, (Lit(True),), Inact())),
            ),
        )
        return m, encode_namepass(
            source, {m: self.S_M0, Var("x"): self.S_M0, Var("b"): BOOL}
        )

    def test_encoded_delegation_typechecks(self):
        m, encoded = self.build()
        envs = TypeEnvs(
            delta={
                m: encode_nptype(self.S_M0),
                m.dualized(): encode_nptype(dual(self.S_M0)),
            }
        )
        ok(check_process(envs, encoded))

    def test_encoded_types_happen_to_be_minimal(self):
        m, encoded = self.build()
        envs = TypeEnvs(
            delta={
                m: encode_nptype(self.S_M0),
                m.dualized(): encode_nptype(dual(self.S_M0)),
            }
        )
        ok(check_minimal_typed(encoded, envs))


class TestMinimalSweep:
    def test_long_session_type_flagged(self):
        s = sname("s")
        eq = SIn((INT,), SIn((INT,), SOut((BOOL,), END)))
        p = Input(s, (Var("a"),), Input(s, (Var("b"),), Output(s, (Lit(True),), Inact())))
        envs = TypeEnvs(delta={s: eq})
        ok(check_process(envs, p))
        res = check_minimal_typed(p, TypeEnvs(delta={s: eq}))
        bad(res, "minimal")

    def test_minimal_chain(self):
        c = sname("#", 1)
        unit = Abs(((Var("x"), END),), Inact(), shared=True)
        p = Res(
            c,
            SIn((UNIT_ARROW,), END),
            Par(
                Output(c.dualized(), (unit,), Inact()),
                Input(c, (Var("z"),), Inact()),
            ),
        )
        ok(check_minimal_typed(p))
