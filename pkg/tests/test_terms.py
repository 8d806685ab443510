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
    Subst,
    TermError,
    Var,
    alpha_eq,
    encode_namepass,
    encode_nptype,
    free_names,
    free_vars,
    init_names,
    init_subst,
    is_prop,
    is_reserved,
    prop_name,
    rec_server_name,
    substitute,
)
from minsess.types import BOOL, INT, SEnd, SIn, SOut, TArrow

END = SEnd()
U_SH = TArrow((END,), shared=True)


def test_name_polarity():
    s = Name("s", 1)
    assert s.dualized() == Name("s", 1, True)
    assert s.dualized().dualized() == s
    a = Name("a", kind="shared")
    assert a.dualized() == a


def test_shared_names_reject_dual_flag():
    with pytest.raises(TermError):
        Name("a", None, True, "shared")


def test_reserved_names():
    c3 = prop_name(3)
    assert is_prop(c3) and is_reserved(c3)
    assert c3.index == 3
    assert is_reserved(rec_server_name(Name("a", 1, True)))
    assert rec_server_name(Name("a", 1, True)) == rec_server_name(Name("a", 7, True))
    assert rec_server_name(Name("a", 1, True)) != rec_server_name(Name("a", 1))


def test_free_vars_ordering():
    assert free_vars(Inact()) == []
    u, y = Name("u"), Var("y")
    assert free_vars(Output(u, (y,), Inact())) == [y]
    # first occurrence wins, preorder
    p = Par(Output(u, (Var("b"), Var("a")), Inact()), App(Var("a"), ()))
    assert free_vars(p) == [Var("b"), Var("a")]


def test_free_vars_closed_package():
    m1 = Name("m", 1)
    v = Abs(
        ((Var("z"), SIn((TArrow((SOut((U_SH,), END),), False),), END)),),
        Input(Var("z"), (Var("x"),), App(Var("x"), (m1,))),
        shared=False,
    )
    assert free_vars(v) == []
    assert free_names(v) == [m1]


def test_res_binds_both_polarities():
    s = Name("s")
    body = Par(Output(s, (Lit(True),), Inact()), Input(s.dualized(), (Var("b"),), Inact()))
    assert free_names(Res(s, SOut((BOOL,), END), body)) == []
    assert free_names(body) == [s, s.dualized()]


def test_init_names():
    a, b = Name("a", kind="shared"), Name("s")
    assert init_names([a, b, b.dualized()]) == [
        Name("a", 1, False, "shared"),
        Name("s", 1),
        Name("s", 1, True),
    ]
    assert init_names([]) == []
    with pytest.raises(TermError):
        init_names([Name("s", 2)])


def test_init_subst_polarity_preserving():
    s = Name("s")
    p = Par(Output(s, (Lit(1),), Inact()), Input(s.dualized(), (Var("x"),), Inact()))
    sigma = init_subst(p)
    got = substitute(p, sigma)
    assert free_names(got) == [Name("s", 1), Name("s", 1, True)]


def test_substitute_variable_for_value():
    x, u = Var("x"), Name("u", 1)
    v = Abs(((Var("z"), END),), Inact(), shared=False)
    assert substitute(App(x, (u,)), Subst.of_vars({x: v})) == App(v, (u,))


def test_substitute_index_shift():
    u1, u2 = Name("u", 1), Name("u", 2)
    p = Output(u1, (Var("y"),), Input(u1, (Var("z"),), Inact()))
    got = substitute(p, Subst.of_names({u1: u2}))
    assert got == Output(u2, (Var("y"),), Input(u2, (Var("z"),), Inact()))


def test_substitute_avoids_capture():
    x, y, u = Var("x"), Var("y"), Name("u", 1)
    # u?(y). x (y)  with x := y  must not capture the binder
    p = Input(u, (y,), App(x, (y,)))
    got = substitute(p, Subst.of_vars({x: y}))
    assert isinstance(got, Input)
    binder = got.binders[0]
    assert binder != y
    assert got.cont == App(y, (binder,))


def test_substitute_name_into_subject():
    x, u = Var("x"), Name("u", 1)
    p = Output(x, (Lit(0),), Inact())
    got = substitute(p, Subst.of_vars({x: u}))
    assert got == Output(u, (Lit(0),), Inact())


def test_substitute_rejects_name_in_payload():
    x, u = Var("x"), Name("u", 1)
    p = Output(Name("n", 1), (x,), Inact())
    with pytest.raises(TermError):
        substitute(p, Subst.of_vars({x: u}))


def test_rename_channel_covers_both_ends():
    s, t = Name("s"), Name("t")
    sigma = Subst.rename_channel(s, t)
    p = Par(Output(s, (Lit(1),), Inact()), Input(s.dualized(), (Var("x"),), Inact()))
    got = substitute(p, sigma)
    assert free_names(got) == [t, t.dualized()]


def test_alpha_eq_positive():
    s, t = Name("s"), Name("t")
    v = Abs(((Var("z"), END),), Inact(), shared=False)
    a = Res(s, SOut((U_SH,), END), Output(s, (v,), Inact()))
    b = Res(t, SOut((U_SH,), END), Output(t, (v,), Inact()))
    assert alpha_eq(a, b)
    lam1 = Abs(((Var("x"), END),), App(Var("x"), (Name("u", 1),)), shared=False)
    lam2 = Abs(((Var("y"), END),), App(Var("y"), (Name("u", 1),)), shared=False)
    assert alpha_eq(lam1, lam2)


def test_alpha_eq_negative():
    u = Name("u", 1)
    a = Input(u, (Var("x"),), Inact())
    b = Input(u, (Var("x"),), App(Var("x"), ()))
    assert not alpha_eq(a, b)
    # free/bound confusion must not be accepted
    assert not alpha_eq(
        Abs(((Var("x"), END),), App(Var("y"), ()), shared=False),
        Abs(((Var("y"), END),), App(Var("y"), ()), shared=False),
    )
    # literal kinds matter
    assert not alpha_eq(Lit(True), Lit(1))


def test_substitute_identity_is_alpha_id():
    u = Name("u", 1)
    p = Input(u, (Var("x"),), App(Var("x"), (u,)))
    assert alpha_eq(substitute(p, Subst()), p)


def test_encode_nptype():
    # sending a Bool-carrying channel becomes sending its package type
    np = SOut((SOut((BOOL,), END),), END)
    got = encode_nptype(np)
    inner = encode_nptype(SOut((BOOL,), END))
    package = TArrow((SIn((TArrow((inner,), False),), END),), False)
    assert got == SOut((package,), END)


def test_encode_namepass_inact():
    assert encode_namepass(Inact()) == Inact()


def test_encode_namepass_output_clause():
    n, m = Name("n"), Name("m")
    c_m = SOut((BOOL,), END)
    got = encode_namepass(Output(n, (m,), Inact()), {m: c_m})
    assert isinstance(got, Output) and got.subject == n
    (pkg,) = got.payload
    assert isinstance(pkg, Abs) and not pkg.shared
    z = pkg.params[0][0]
    inner = pkg.body
    assert isinstance(inner, Input) and inner.subject == z
    x = inner.binders[0]
    assert inner.cont == App(x, (m,))


def test_encode_namepass_input_clause():
    n, x = Name("n"), Var("x")
    c_x = SOut((BOOL,), END)
    got = encode_namepass(Input(n, (x,), Output(x, (Lit(True),), Inact())), {x: c_x})
    assert isinstance(got, Input) and got.subject == n
    y = got.binders[0]
    r = got.cont
    assert isinstance(r, Res)
    par = r.body
    assert isinstance(par, Par)
    assert par.left == App(y, (r.binder,))
    out = par.right
    assert isinstance(out, Output) and out.subject == r.binder.dualized()
    (consumer,) = out.payload
    assert isinstance(consumer, Abs)
    assert consumer.params[0][0] == x
    # the continuation was encoded recursively: the literal got packaged too
    assert isinstance(consumer.body, Output)
    assert isinstance(consumer.body.payload[0], Abs)


def test_encode_namepass_requires_types():
    n, m = Name("n"), Name("m")
    with pytest.raises(TermError):
        encode_namepass(Output(n, (m,), Inact()))


def test_branch_labels_unique():
    with pytest.raises(TermError):
        Branch(Name("u", 1), (("l", Inact()), ("l", Inact())))


def test_select_roundtrip_fields():
    p = Select(Name("u", 1), "go", Inact())
    assert p.label == "go"
