"""Reduction semantics over a normalized process soup.

A state is kept as a restriction prefix over a flat parallel composition:
top-level restrictions are hoisted (renaming on collision), nil components
dropped, dead restrictions erased, and components sorted by an
alpha-invariant type-erased key. Communication fires between complementary
top-level prefixes; beta fires on a top-level application whose head is an
abstraction. Restriction annotations advance along with the channel they
govern, so every intermediate state carries a well-formed session
environment for its restricted names.

The deterministic policy orders enabled redexes:
  1. reserved bookkeeping channels ("#..."), highest index first,
     index-free ones (recursion servers) ahead of all indexed ones;
  2. applications, leftmost component first;
  3. source-channel synchronizations, by subject then position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import terms as tm
from . import types as ty
from .terms import (
    Abs,
    App,
    Branch,
    Inact,
    Input,
    Lit,
    Name,
    NameSupply,
    Output,
    Par,
    Res,
    Select,
    Subst,
    Var,
    free_names,
    parallel,
    substitute,
    used_bases,
)
from .types import SBra, SIn, SOut, SRec, SSel, unfold_top


class SemanticsError(Exception):
    pass


# ---------------------------------------------------------------------------
# Normal form
# ---------------------------------------------------------------------------


def _positive(n: Name) -> Name:
    return n.dualized() if n.dual else n


def _max_reserved_index(p) -> int:
    best = 0
    for t in tm.iter_subterms(p):
        if isinstance(t, Name) and t.base == "#" and t.index:
            best = max(best, t.index)
        elif isinstance(t, (Output, Input, Select, Branch)):
            s = t.subject
            if isinstance(s, Name) and s.base == "#" and s.index:
                best = max(best, s.index)
    return best


def _flatten(p):
    """Hoist spine restrictions; returns (binders, components).

    A hoisted binder that collides with an already-claimed or free name is
    renamed throughout its scope (both polarities). Reserved bookkeeping
    names keep their reserved base and move to a fresh index instead.
    """
    free0 = set(free_names(p))
    taken: set[Name] = {_positive(n) for n in free0}
    supply = NameSupply(used_bases(p))
    next_reserved = [_max_reserved_index(p) + 1]
    binders: list[tuple[Name, object]] = []
    comps: list = []

    def claim(b: Name) -> Optional[Name]:
        if _positive(b) not in taken:
            return None
        if b.base == "#":
            idx = next_reserved[0]
            next_reserved[0] += 1
            return Name("#", idx, False, "session")
        base = supply.fresh(b.base)
        return Name(base, b.index, False, b.kind)

    def go(t) -> None:
        if isinstance(t, Inact):
            return
        if isinstance(t, Par):
            go(t.left)
            go(t.right)
            return
        if isinstance(t, Res):
            b, body = t.binder, t.body
            fresh = claim(b)
            if fresh is not None:
                body = substitute(body, Subst.rename_channel(b, fresh))
                b = fresh
            taken.add(_positive(b))
            binders.append((b, t.annot))
            go(body)
            return
        comps.append(t)

    go(p)
    return binders, comps


def _rebuild(binders, comps):
    body = parallel(list(comps)) if comps else Inact()
    for b, annot in reversed(binders):
        body = Res(b, annot, body)
    return body


def _serialize(t, nenv: dict, venv: dict, counter: list) -> str:
    """Alpha-invariant, type-erased rendering. Binders in nenv/venv are
    numbered by first registration; everything else prints literally."""

    def name(n: Name) -> str:
        pos = _positive(n)
        if pos in nenv:
            return f"n{nenv[pos]}" + ("~" if n.dual else "")
        return f"{n.base}.{n.index}.{n.kind}" + ("~" if n.dual else "")

    def bind_name(n: Name):
        prev = nenv.get(n, _ABSENT)
        counter[0] += 1
        nenv[n] = counter[0]
        return prev

    def unbind_name(n: Name, prev) -> None:
        if prev is _ABSENT:
            del nenv[n]
        else:
            nenv[n] = prev

    def bind_var(v: Var):
        prev = venv.get(v, _ABSENT)
        counter[0] += 1
        venv[v] = counter[0]
        return prev

    def unbind_var(v: Var, prev) -> None:
        if prev is _ABSENT:
            del venv[v]
        else:
            venv[v] = prev

    def val(v) -> str:
        if isinstance(v, Lit):
            return f"lit:{type(v.value).__name__}:{v.value!r}"
        if isinstance(v, Var):
            return f"v{venv[v]}" if v in venv else f"fv:{v.base}.{v.index}"
        if isinstance(v, Name):
            return name(v)
        if isinstance(v, Abs):
            prevs = [bind_var(x) for x, _ in v.params]
            body = go(v.body)
            head = ",".join(f"v{venv[x]}" for x, _ in v.params)
            for (x, _), prev in zip(reversed(v.params), reversed(prevs)):
                unbind_var(x, prev)
            tag = "un" if v.shared else "lin"
            return f"{tag}({head}){{{body}}}"
        raise SemanticsError(f"unknown value {v!r}")

    def subj(s) -> str:
        return name(s) if isinstance(s, Name) else val(s)

    def go(t) -> str:
        if isinstance(t, Inact):
            return "0"
        if isinstance(t, Output):
            ps = ",".join(val(v) for v in t.payload)
            return f"{subj(t.subject)}!({ps}).{go(t.cont)}"
        if isinstance(t, Input):
            prevs = [bind_var(x) for x in t.binders]
            body = go(t.cont)
            head = ",".join(f"v{venv[x]}" for x in t.binders)
            for x, prev in zip(reversed(t.binders), reversed(prevs)):
                unbind_var(x, prev)
            return f"{subj(t.subject)}?({head}).{body}"
        if isinstance(t, Select):
            return f"{subj(t.subject)}<{t.label}.{go(t.cont)}"
        if isinstance(t, Branch):
            inner = ";".join(f"{l}:{go(p)}" for l, p in t.branches)
            return f"{subj(t.subject)}>{{{inner}}}"
        if isinstance(t, App):
            args = ",".join(val(a) if not isinstance(a, Name) else name(a) for a in t.args)
            return f"app({val(t.fun)})({args})"
        if isinstance(t, Par):
            return f"({go(t.left)}|{go(t.right)})"
        if isinstance(t, Res):
            prev = bind_name(t.binder)
            body = go(t.body)
            head = f"n{nenv[t.binder]}"
            unbind_name(t.binder, prev)
            return f"nu {head}.({body})"
        raise SemanticsError(f"unknown process {t!r}")

    return go(t)


_ABSENT = object()


def _comp_sort_key(comp, hoisted: set) -> tuple:
    abstract = _serialize(comp, {n: 0 for n in hoisted}, {}, [0])
    literal = _serialize(comp, {}, {}, [0])
    return (abstract, literal)


def normalize(p):
    """Restriction-prefixed sorted soup; idempotent."""
    binders, comps = _flatten(p)
    comps = [c for c in comps if not isinstance(c, Inact)]
    used: set[Name] = set()
    for c in comps:
        used.update(_positive(n) for n in free_names(c))
    binders = [(b, a) for b, a in binders if b in used]
    hoisted = {b for b, _ in binders}
    comps.sort(key=lambda c: _comp_sort_key(c, hoisted))
    order: dict[Name, int] = {}
    for c in comps:
        for n in free_names(c):
            pos = _positive(n)
            if pos in hoisted and pos not in order:
                order[pos] = len(order)
    binders.sort(key=lambda ba: order.get(ba[0], len(order)))
    return _rebuild(binders, comps)


def canonical_key(p) -> str:
    return _serialize(normalize(p), {}, {}, [0])


def state_equal(p, q) -> bool:
    return canonical_key(p) == canonical_key(q)


# ---------------------------------------------------------------------------
# Redexes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Redex:
    kind: str  # "comm" | "select" | "beta"
    i: int
    j: Optional[int] = None
    subject: Optional[Name] = None
    label: Optional[str] = None


def _partner(out_subject: Name, in_subject: Name) -> bool:
    if out_subject.kind == "shared":
        return out_subject == in_subject
    return in_subject == out_subject.dualized()


def enabled(p) -> list[Redex]:
    _, comps = _flatten(normalize(p))
    return _enabled(comps)


def _enabled(comps) -> list[Redex]:
    out: list[Redex] = []
    for i, c in enumerate(comps):
        if isinstance(c, App) and isinstance(c.fun, Abs):
            out.append(Redex("beta", i))
        elif isinstance(c, Output) and isinstance(c.subject, Name):
            for j, d in enumerate(comps):
                if (
                    isinstance(d, Input)
                    and isinstance(d.subject, Name)
                    and _partner(c.subject, d.subject)
                    and len(c.payload) == len(d.binders)
                ):
                    out.append(Redex("comm", i, j, _positive(c.subject)))
        elif isinstance(c, Select) and isinstance(c.subject, Name):
            for j, d in enumerate(comps):
                if (
                    isinstance(d, Branch)
                    and isinstance(d.subject, Name)
                    and _partner(c.subject, d.subject)
                    and any(l == c.label for l, _ in d.branches)
                ):
                    out.append(Redex("select", i, j, _positive(c.subject), c.label))
    return out


_BIG = 10**9


def _det_rank(r: Redex) -> tuple:
    if r.kind == "beta":
        return (1, 0, r.i, -1)
    n = r.subject
    if tm.is_reserved(n):
        idx = n.index if n.index is not None else _BIG
        return (0, -idx, r.i, r.j)
    return (2, (n.base, n.index or 0, n.kind), r.i, r.j)


def _advance(annot, binder: Name, out_subject: Name, label: Optional[str]):
    """Move a restriction annotation along the action just performed on it.
    The annotation tracks the positive endpoint."""
    t = unfold_top(annot) if isinstance(annot, SRec) else annot
    sender_is_positive = _positive(out_subject) == binder and not out_subject.dual
    if label is None:
        if sender_is_positive and isinstance(t, SOut):
            return t.cont
        if not sender_is_positive and isinstance(t, SIn):
            return t.cont
        return annot
    branches = None
    if sender_is_positive and isinstance(t, SSel):
        branches = t.branches
    if not sender_is_positive and isinstance(t, SBra):
        branches = t.branches
    if branches is not None:
        for l, s in branches:
            if l == label:
                return s
    return annot


def apply_redex(p, r: Redex):
    binders, comps = _flatten(normalize(p))
    new = [c for k, c in enumerate(comps) if k not in (r.i, r.j)]
    if r.kind == "beta":
        a: App = comps[r.i]
        f: Abs = a.fun
        if len(f.params) != len(a.args):
            raise SemanticsError("application arity mismatch")
        sub = Subst.of_vars({x: v for (x, _), v in zip(f.params, a.args)})
        new.append(substitute(f.body, sub))
        return normalize(_rebuild(binders, new))
    out_c = comps[r.i]
    in_c = comps[r.j]
    if r.kind == "comm":
        sub = Subst.of_vars(dict(zip(in_c.binders, out_c.payload)))
        new.append(out_c.cont)
        new.append(substitute(in_c.cont, sub))
    else:
        new.append(out_c.cont)
        new.append(in_c.branch(r.label))
    if out_c.subject.kind == "session":
        pos = _positive(out_c.subject)
        binders = [
            (b, _advance(a, b, out_c.subject, r.label) if b == pos else a)
            for b, a in binders
        ]
    return normalize(_rebuild(binders, new))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


@dataclass
class Step:
    index: int
    kind: str
    subject: Optional[str]
    label: Optional[str]
    term: object


@dataclass
class Trace:
    initial: object
    steps: list
    final: object
    status: str  # "inert" | "stuck" | "fuel"

    def __len__(self) -> int:
        return len(self.steps)


def _terminal_status(p) -> str:
    _, comps = _flatten(p)
    for c in comps:
        if isinstance(c, Inact):
            continue
        if not isinstance(c, (Input, Output, Select, Branch)):
            return "stuck"
    return "inert"


def run(p, policy: str = "det", fuel: int = 200) -> Trace:
    """Execute to quiescence or fuel exhaustion. Policy "det" follows the
    documented priority order; "random" needs an rng in `policy` itself and
    is not provided here (explore() covers all interleavings instead)."""
    if policy != "det":
        raise SemanticsError(f"unknown policy {policy!r}")
    state = normalize(p)
    initial = state
    steps: list[Step] = []
    while len(steps) < fuel:
        rs = enabled(state)
        if not rs:
            return Trace(initial, steps, state, _terminal_status(state))
        r = min(rs, key=_det_rank)
        state = apply_redex(state, r)
        steps.append(
            Step(
                len(steps) + 1,
                r.kind,
                str(r.subject) if r.subject is not None else None,
                r.label,
                state,
            )
        )
    return Trace(initial, steps, state, "fuel")


@dataclass
class Exploration:
    states: dict
    depth: dict
    terminals: dict  # key -> "inert" | "stuck"
    truncated: bool
    edges: int = 0


def explore(p, fuel: int = 50, max_states: int = 50000) -> Exploration:
    """Breadth-first closure of the reachable state space up to `fuel`
    reduction steps, memoized on the canonical erased form."""
    s0 = normalize(p)
    k0 = canonical_key(s0)
    states = {k0: s0}
    depth = {k0: 0}
    terminals: dict = {}
    truncated = False
    frontier = [k0]
    edges = 0
    while frontier:
        nxt: list = []
        for k in frontier:
            s = states[k]
            d = depth[k]
            rs = enabled(s)
            if not rs:
                terminals[k] = _terminal_status(s)
                continue
            if d >= fuel:
                truncated = True
                continue
            for r in rs:
                t = apply_redex(s, r)
                edges += 1
                tk = canonical_key(t)
                if tk not in states:
                    if len(states) >= max_states:
                        truncated = True
                        continue
                    states[tk] = t
                    depth[tk] = d + 1
                    nxt.append(tk)
        frontier = nxt
    return Exploration(states, depth, terminals, truncated, edges)
