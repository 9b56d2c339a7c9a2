"""Reader and writer for the block-structured ``.cir`` text format.

The format is a small indentation-based subset in the style of::

    resources:
      m0:    { kind: Mutex }
      cv0:   { kind: Condvar, paired_with: m0 }
      ready: { kind: Var, type: Bool, init: false }
    protection:  ready: [m0]
    threads:
      worker:
        body:
        - { sid: w1, op: lock(m0),        next: w2 }
        - { sid: w2, op: wait(cv0, m0),   next: w3 }
        - { sid: w3, op: unlock(m0) }

The parser is strict on syntax (unknown operations, malformed lines and
literals are errors) and permissive on semantic links: dangling sids or
undefined resources are left for :func:`cvnverify.checker.check`.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import List, Optional

from .cir import (
    DATA_KINDS,
    FUNCTION_KINDS,
    OP_SIGNATURES,
    RESOURCE_KINDS,
    Branch,
    BusinessGoal,
    CirArtifact,
    FunctionDef,
    FunctionSummary,
    Next,
    Op,
    ResourceDecl,
    Return,
    Statement,
    Switch,
    build_thread_entry,
)
from .expr import (
    And,
    BinOp,
    Cmp,
    Concrete,
    ExprSyntaxError,
    Lit,
    Not,
    Or,
    Ref,
    format_expr,
    format_value,
    parse_condition,
    parse_expr,
    parse_literal,
)

log = logging.getLogger(__name__)

KNOWN_TOP_KEYS = ("resources", "protection", "threads", "functions", "summaries", "entry", "goals")


@dataclass(frozen=True)
class ParseError:
    code: str
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.code} {self.message}"


class CirParseError(ValueError):
    """Raised with every structural problem found in one document."""

    def __init__(self, errors: List[ParseError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class _Abort(Exception):
    pass


# ---------------------------------------------------------------------------
# Generic block/flow reader
# ---------------------------------------------------------------------------


@dataclass
class Scalar:
    text: str
    line: int
    col: int


@dataclass
class Mapping:
    items: list  # (key, node, line, col)
    line: int
    col: int

    def get(self, key):
        for k, node, _, _ in self.items:
            if k == key:
                return node
        return None

    def keys(self):
        return [k for k, _, _, _ in self.items]


@dataclass
class Sequence:
    items: list
    line: int
    col: int


_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_.]*)\s*:(?:\s+|$)")


def _balance(text: str) -> int:
    """Open-bracket depth at end of text; -1 if a string literal is unterminated."""
    depth = 0
    quoted = False
    escape = False
    for ch in text:
        if quoted:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                quoted = False
        elif ch == '"':
            quoted = True
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
    return -1 if quoted else depth


def split_top(text: str, sep: str = ",") -> List[tuple]:
    """Split on ``sep`` outside brackets and quotes; returns (piece, offset)."""
    out = []
    depth = 0
    quoted = False
    escape = False
    start = 0
    for i, ch in enumerate(text):
        if quoted:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                quoted = False
            continue
        if ch == '"':
            quoted = True
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == sep and depth == 0:
            out.append((text[start:i], start))
            start = i + 1
    out.append((text[start:], start))
    return out


class _Reader:
    def __init__(self, text: str, errors: list):
        self.errors = errors
        self.lines = []
        for no, raw in enumerate(text.splitlines(), 1):
            body = raw.rstrip()
            content = body.lstrip(" ")
            if not content or content.startswith("#"):
                continue
            if content.startswith("\t") or "\t" in body[: len(body) - len(content)]:
                self.fail(no, 1, "E000", "tab in indentation")
            self.lines.append((no, len(body) - len(content), content))

    def fail(self, line, col, code, msg):
        self.errors.append(ParseError(code, line, col, msg))
        raise _Abort()

    def read(self):
        if not self.lines:
            return Mapping([], 1, 1)
        no, ind, _ = self.lines[0]
        if ind != 0:
            self.fail(no, ind + 1, "E000", "document must start at column 1")
        node, i = self.mapping(0, 0)
        if i < len(self.lines):
            no, ind, _ = self.lines[i]
            self.fail(no, ind + 1, "E000", "unexpected indentation")
        return node

    def continue_value(self, text, i, line, col):
        while _balance(text) != 0:
            if i >= len(self.lines):
                self.fail(line, col, "E000", "unterminated bracket or string")
            text = text + " " + self.lines[i][2]
            i += 1
        return text, i

    def block(self, i, indent):
        content = self.lines[i][2]
        if content == "-" or content.startswith("- "):
            return self.seq(i, indent)
        return self.mapping(i, indent)

    def mapping(self, i, indent, first=None):
        items = []
        start = first[:2] if first else self.lines[i][:1] + (indent + 1,)
        pending = [first] if first else []
        while True:
            if pending:
                no, col, content = pending.pop()
            elif (
                i < len(self.lines)
                and self.lines[i][1] == indent
                and not (self.lines[i][2] == "-" or self.lines[i][2].startswith("- "))
            ):
                no, ind, content = self.lines[i]
                col = ind + 1
                i += 1
            else:
                break
            m = _KEY.match(content)
            if not m:
                self.fail(no, col, "E000", f"expected 'key:' but found {content!r}")
            key = m.group(1)
            rest = content[m.end():].strip()
            if rest:
                vcol = col + m.end()
                rest, i = self.continue_value(rest, i, no, vcol)
                node = parse_flow(rest, no, vcol, self)
            elif i < len(self.lines) and self.lines[i][1] > indent:
                node, i = self.block(i, self.lines[i][1])
            elif (
                i < len(self.lines)
                and self.lines[i][1] == indent
                and (self.lines[i][2] == "-" or self.lines[i][2].startswith("- "))
            ):
                node, i = self.seq(i, indent)
            else:
                node = None
            items.append((key, node, no, col))
        return Mapping(items, start[0], start[1]), i

    def seq(self, i, indent):
        items = []
        start = self.lines[i]
        while i < len(self.lines) and self.lines[i][1] == indent:
            no, ind, content = self.lines[i]
            if not (content == "-" or content.startswith("- ")):
                break
            i += 1
            rest = content[1:].lstrip()
            col = ind + 1 + len(content) - len(rest)
            if not rest:
                if i < len(self.lines) and self.lines[i][1] > indent:
                    node, i = self.block(i, self.lines[i][1])
                else:
                    node = None
            elif rest[0] not in "{[\"" and _KEY.match(rest):
                node, i = self.mapping(i, col - 1, first=(no, col, rest))
            else:
                rest, i = self.continue_value(rest, i, no, col)
                node = parse_flow(rest, no, col, self)
            items.append(node)
        return Sequence(items, start[0], start[1] + 1), i


def parse_flow(text: str, line: int, col: int, reader: _Reader):
    text = text.strip()
    if text.startswith("{"):
        if not text.endswith("}"):
            reader.fail(line, col, "E000", "malformed flow mapping")
        inner = text[1:-1]
        items = []
        if inner.strip():
            for piece, off in split_top(inner):
                pcol = col + 1 + off + len(piece) - len(piece.lstrip())
                parts = split_top(piece, ":")
                if len(parts) < 2 or not parts[0][0].strip():
                    reader.fail(line, pcol, "E000", f"expected 'key: value' in {piece.strip()!r}")
                key = parts[0][0].strip()
                value = piece[parts[1][1]:]
                vcol = col + 1 + off + parts[1][1]
                node = parse_flow(value, line, vcol, reader) if value.strip() else None
                items.append((key, node, line, pcol))
        return Mapping(items, line, col)
    if text.startswith("["):
        if not text.endswith("]"):
            reader.fail(line, col, "E000", "malformed flow sequence")
        inner = text[1:-1]
        items = []
        if inner.strip():
            for piece, off in split_top(inner):
                items.append(parse_flow(piece, line, col + 1 + off, reader))
        return Sequence(items, line, col)
    return Scalar(text, line, col)


# ---------------------------------------------------------------------------
# Interpretation into the domain model
# ---------------------------------------------------------------------------

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_OP = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$", re.S)


class _Builder:
    def __init__(self, errors):
        self.errors = errors

    def err(self, node_or_line, code, msg, col=None):
        if isinstance(node_or_line, (Scalar, Mapping, Sequence)):
            line, c = node_or_line.line, node_or_line.col
        else:
            line, c = node_or_line, col or 1
        self.errors.append(ParseError(code, line, c if col is None else col, msg))

    def scalar(self, node, what) -> Optional[str]:
        if not isinstance(node, Scalar):
            line = node.line if node is not None else 0
            self.err(line, "E000", f"{what}: expected a scalar")
            return None
        return node.text

    def name_list(self, node, what) -> tuple:
        if node is None:
            return ()
        if isinstance(node, Scalar):
            return (node.text,)
        if isinstance(node, Sequence):
            out = []
            for item in node.items:
                s = self.scalar(item, what)
                if s is not None:
                    out.append(s)
            return tuple(out)
        self.err(node, "E000", f"{what}: expected a list of names")
        return ()

    def literal(self, node, what) -> Optional[Concrete]:
        text = self.scalar(node, what)
        if text is None:
            return None
        try:
            return parse_literal(text)
        except ExprSyntaxError as exc:
            self.err(node, "E008", f"{what}: {exc}")
            return None

    # -- resources ------------------------------------------------------

    def resources(self, node):
        out = {}
        if node is None:
            return out
        if not isinstance(node, Mapping):
            self.err(node, "E000", "resources: expected a mapping")
            return out
        for name, spec, line, col in node.items:
            if name in out:
                self.err(line, "E103", f"duplicate resource name {name!r}", col)
                continue
            if not isinstance(spec, Mapping):
                self.err(line, "E000", f"resource {name!r}: expected '{{ kind: ... }}'", col)
                continue
            decl = self.resource(name, spec, line)
            if decl is not None:
                out[name] = decl
        return out

    def resource(self, name, spec: Mapping, line):
        kind_node = spec.get("kind")
        if kind_node is None:
            self.err(spec, "E001", f"resource {name!r} is missing 'kind'")
            return None
        kind = self.scalar(kind_node, "kind")
        if kind not in RESOURCE_KINDS:
            self.err(kind_node, "E002", f"unknown resource kind {kind!r}")
            return None
        allowed = {
            "Condvar": {"paired_with"},
            "Semaphore": {"count"},
            "Var": {"type", "init", "values"},
            "Atomic": {"type", "init", "values"},
        }.get(kind, set())
        for key in spec.keys():
            if key != "kind" and key not in allowed:
                self.err(spec, "E013", f"resource {name!r}: unexpected key {key!r} for {kind}")
        paired = count = rtype = init = None
        values = ()
        if kind == "Condvar":
            if spec.get("paired_with") is None:
                self.err(spec, "E001", f"condvar {name!r} is missing 'paired_with'")
            else:
                paired = self.scalar(spec.get("paired_with"), "paired_with")
        if kind == "Semaphore":
            c = self.literal(spec.get("count"), "count") if spec.get("count") is not None else None
            if c is None or c.type != "Int" or c.value < 0:
                self.err(spec, "E001", f"semaphore {name!r} needs 'count: n' with n >= 0")
            else:
                count = c.value
        if kind in DATA_KINDS:
            tnode, inode = spec.get("type"), spec.get("init")
            if tnode is None or inode is None:
                self.err(spec, "E001", f"{kind} {name!r} needs both 'type' and 'init'")
            else:
                rtype = self.scalar(tnode, "type")
                init = self.literal(inode, "init")
            values = self.name_list(spec.get("values"), "values")
        return ResourceDecl(name, kind, paired, count, rtype, init, values, line=line)

    # -- protection -----------------------------------------------------

    def protection(self, node, reader):
        out = {}
        if node is None:
            return out
        if isinstance(node, Scalar):
            # single-line form "protection:  ready: [m0]"
            try:
                node = parse_flow("{" + node.text + "}", node.line, node.col, reader)
            except _Abort:
                return out
        if not isinstance(node, Mapping):
            self.err(node, "E000", "protection: expected a mapping")
            return out
        for var, locks, line, col in node.items:
            if var in out:
                self.err(line, "E000", f"duplicate protection entry {var!r}", col)
            out[var] = self.name_list(locks, "protection")
        return out

    # -- functions ------------------------------------------------------

    def functions(self, node, threads: bool):
        out = {}
        if node is None:
            return out
        if not isinstance(node, Mapping):
            self.err(node, "E000", "expected a mapping of function names")
            return out
        for name, spec, line, col in node.items:
            if name in out:
                self.err(line, "E112", f"duplicate function name {name!r}", col)
                continue
            if not isinstance(spec, Mapping):
                self.err(line, "E000", f"function {name!r}: expected 'body:'", col)
                continue
            kind = "normal"
            if spec.get("kind") is not None:
                kind = self.scalar(spec.get("kind"), "kind")
                if kind not in FUNCTION_KINDS:
                    self.err(spec.get("kind"), "E000", f"unknown function kind {kind!r}")
                    kind = "normal"
            for key in spec.keys():
                if key not in ("kind", "body"):
                    self.err(spec, "E013", f"function {name!r}: unexpected key {key!r}")
            if "body" not in spec.keys():
                self.err(line, "E000", f"function {name!r} is missing 'body'", col)
            body_node = spec.get("body")
            body = []
            if body_node is not None:
                if not isinstance(body_node, Sequence):
                    self.err(body_node, "E000", f"function {name!r}: body must be a list")
                else:
                    for item in body_node.items:
                        st = self.statement(item)
                        if st is not None:
                            body.append(st)
            out[name] = FunctionDef(name, kind, tuple(body))
        return out

    def statement(self, node) -> Optional[Statement]:
        if not isinstance(node, Mapping):
            self.err(node if node is not None else 0, "E000", "statement must be '{ sid: ..., op: ... }'")
            return None
        keys = node.keys()
        for k in keys:
            if k not in ("sid", "op", "next", "branch", "switch"):
                self.err(node, "E013", f"unexpected statement key {k!r}")
        if "sid" not in keys:
            self.err(node, "E003", "statement is missing 'sid'")
            return None
        sid = self.scalar(node.get("sid"), "sid")
        if "op" not in keys:
            self.err(node, "E004", f"statement {sid!r} is missing 'op'")
            return None
        op = self.op(node.get("op"))
        transfers = [k for k in keys if k in ("next", "branch", "switch")]
        if len(transfers) > 1:
            self.err(node, "E013", f"statement {sid!r} has more than one transfer")
            return None
        transfer = None
        if transfers:
            transfer = self.transfer(transfers[0], node.get(transfers[0]), sid)
        if op is None or sid is None:
            return None
        return Statement(sid, op, transfer, line=node.line)

    def op(self, node) -> Optional[Op]:
        text = self.scalar(node, "op")
        if text is None:
            return None
        m = _OP.match(text)
        if not m:
            self.err(node, "E011", f"malformed operation {text!r}")
            return None
        name, argtext = m.group(1), m.group(2)
        if name not in OP_SIGNATURES:
            self.err(node, "E010", f"unknown operation {name!r}")
            return None
        sig = OP_SIGNATURES[name]
        pieces = [p.strip() for p, _ in split_top(argtext)] if argtext and argtext.strip() else []
        if len(pieces) != len(sig):
            self.err(node, "E011", f"{name} takes {len(sig)} argument(s), got {len(pieces)}")
            return None
        args = []
        for piece, kind in zip(pieces, sig):
            if kind == "n":
                if not _NAME.fullmatch(piece):
                    self.err(node, "E011", f"{name}: {piece!r} is not a name")
                    return None
                args.append(piece)
            else:
                try:
                    args.append(parse_expr(piece))
                except ExprSyntaxError as exc:
                    self.err(node, "E012", f"{name}: bad expression {piece!r}: {exc}")
                    return None
        return Op(name, tuple(args))

    def transfer(self, key, node, sid):
        if key == "next":
            target = self.scalar(node, "next")
            if target is None:
                return None
            return Return() if target == "return" else Next(target)
        if key == "branch":
            if not isinstance(node, Sequence) or len(node.items) != 3:
                self.err(node if node is not None else 0, "E000",
                         f"{sid}: branch must be [condition, then_sid, else_sid]")
                return None
            cond_text, then, orelse = (self.scalar(n, "branch") for n in node.items)
            if None in (cond_text, then, orelse):
                return None
            try:
                cond = parse_condition(cond_text)
            except ExprSyntaxError as exc:
                self.err(node.items[0], "E012", f"{sid}: bad condition {cond_text!r}: {exc}")
                return None
            return Branch(cond, then, orelse)
        # switch: [var, {literal: sid, ...}, default_sid]
        if (
            not isinstance(node, Sequence)
            or len(node.items) != 3
            or not isinstance(node.items[1], Mapping)
        ):
            self.err(node if node is not None else 0, "E000",
                     f"{sid}: switch must be [var, {{value: sid, ...}}, default_sid]")
            return None
        var = self.scalar(node.items[0], "switch")
        default = self.scalar(node.items[2], "switch")
        arms = []
        for lit_text, target, line, col in node.items[1].items:
            try:
                lit = parse_literal(lit_text)
            except ExprSyntaxError as exc:
                self.err(line, "E008", f"{sid}: bad switch arm {lit_text!r}: {exc}", col)
                return None
            arms.append((lit, self.scalar(target, "switch")))
        return Switch(var, tuple(arms), default)

    # -- summaries and goals -------------------------------------------

    def summaries(self, node):
        out = {}
        if node is None:
            return out
        if not isinstance(node, Mapping):
            self.err(node, "E000", "summaries: expected a mapping")
            return out
        for name, spec, line, col in node.items:
            if not isinstance(spec, Mapping):
                self.err(line, "E000", f"summary {name!r}: expected a mapping", col)
                continue
            for key in spec.keys():
                if key not in ("reads", "writes", "calls", "has_concurrency"):
                    self.err(spec, "E013", f"summary {name!r}: unexpected key {key!r}")
            hc = False
            if spec.get("has_concurrency") is not None:
                lit = self.literal(spec.get("has_concurrency"), "has_concurrency")
                if lit is None or lit.type != "Bool":
                    self.err(spec, "E008", "has_concurrency must be true or false")
                else:
                    hc = lit.value
            out[name] = FunctionSummary(
                self.name_list(spec.get("reads"), "reads"),
                self.name_list(spec.get("writes"), "writes"),
                self.name_list(spec.get("calls"), "calls"),
                hc,
            )
        return out

    def goals(self, node):
        out = []
        if node is None:
            return tuple(out)
        if not isinstance(node, Sequence):
            self.err(node, "E000", "goals: expected a list")
            return tuple(out)
        for item in node.items:
            if not isinstance(item, Mapping):
                self.err(item if item is not None else 0, "E000", "goal: expected a mapping")
                continue
            for key in item.keys():
                if key not in ("id", "desc", "completion", "availability", "variables"):
                    self.err(item, "E013", f"goal: unexpected key {key!r}")
            if item.get("id") is None:
                self.err(item, "E009", "goal is missing 'id'")
                continue
            gid = self.scalar(item.get("id"), "id")
            desc = ""
            if item.get("desc") is not None:
                text = self.scalar(item.get("desc"), "desc") or ""
                desc = _unquote(text)
            completion = self.pairs(item.get("completion"), "completed")
            availability = self.pairs(item.get("availability"), "available")
            variables = []
            vnode = item.get("variables")
            if vnode is not None:
                if not isinstance(vnode, Mapping):
                    self.err(vnode, "E000", "variables: expected a mapping")
                else:
                    for var, lit_node, _, _ in vnode.items:
                        lit = self.literal(lit_node, f"variables.{var}")
                        if lit is not None:
                            variables.append((var, lit))
            out.append(BusinessGoal(gid, desc, completion, availability, tuple(variables)))
        return tuple(out)

    def pairs(self, node, status):
        if node is None:
            return ()
        if not isinstance(node, Sequence):
            self.err(node, "E000", f"expected a list of [name, {status}]")
            return ()
        out = []
        for item in node.items:
            if (
                not isinstance(item, Sequence)
                or len(item.items) != 2
                or not all(isinstance(x, Scalar) for x in item.items)
                or item.items[1].text != status
            ):
                self.err(item if item is not None else node, "E000", f"expected [name, {status}]")
                continue
            out.append(item.items[0].text)
        return tuple(out)


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] == '"':
        inner = re.sub(r"\s+", " ", text[1:-1])
        return re.sub(r"\\(.)", r"\1", inner)
    return text


def _resolve_enums(node, data_names, enum_values):
    """Bare identifiers that are not variables but are declared enum values become literals."""
    if isinstance(node, Ref):
        if node.name not in data_names and node.name in enum_values:
            return Lit(Concrete("Enum", node.name))
        return node
    if isinstance(node, (BinOp, Cmp)):
        return type(node)(
            _resolve_enums(node.left, data_names, enum_values),
            node.op,
            _resolve_enums(node.right, data_names, enum_values),
        )
    if isinstance(node, (And, Or)):
        return type(node)(
            _resolve_enums(node.left, data_names, enum_values),
            _resolve_enums(node.right, data_names, enum_values),
        )
    if isinstance(node, Not):
        return Not(_resolve_enums(node.arg, data_names, enum_values))
    return node


def _resolve_statement(st: Statement, data_names, enum_values) -> Statement:
    from dataclasses import replace

    sig = OP_SIGNATURES[st.op.name]
    args = tuple(
        _resolve_enums(a, data_names, enum_values) if k == "e" else a
        for a, k in zip(st.op.args, sig)
    )
    transfer = st.transfer
    if isinstance(transfer, Branch):
        transfer = Branch(_resolve_enums(transfer.cond, data_names, enum_values),
                          transfer.then, transfer.orelse)
    return replace(st, op=Op(st.op.name, args), transfer=transfer)


def parse_cir(text: str, strict: bool = True) -> CirArtifact:
    """Parse a ``.cir`` document.

    Raises :class:`CirParseError` listing every structural problem.  With
    ``strict`` (the default) a duplicated sid is a hard ``E101`` error; the
    repair loop parses with ``strict=False`` so that the checker can report
    it and the auto-fixer can rename the duplicate.
    """
    errors: List[ParseError] = []
    try:
        reader = _Reader(text, errors)
        root = reader.read()
    except _Abort:
        raise CirParseError(errors) from None
    b = _Builder(errors)
    for key, _, line, col in root.items:
        if key not in KNOWN_TOP_KEYS:
            log.warning("line %d: ignoring unknown top-level key %r", line, key)
    keys = root.keys()
    for key in set(keys):
        if keys.count(key) > 1:
            b.err(1, "E000", f"top-level key {key!r} appears more than once")
    if "threads" in keys and "functions" in keys:
        b.err(1, "E013", "use either 'threads' or 'functions', not both")
    threads = "threads" in keys and "functions" not in keys
    try:
        resources = b.resources(root.get("resources"))
        protection = b.protection(root.get("protection"), reader)
        functions = b.functions(root.get("threads" if threads else "functions"), threads)
        summaries = b.summaries(root.get("summaries"))
        goals = b.goals(root.get("goals"))
    except _Abort:
        raise CirParseError(errors) from None
    entry = None
    if root.get("entry") is not None:
        entry = b.scalar(root.get("entry"), "entry")
        if threads:
            b.err(root.get("entry"), "E013", "'entry' is implied by 'threads'")

    data_names = {n for n, r in resources.items() if r.kind in DATA_KINDS}
    enum_values = {v for r in resources.values() for v in r.values}
    functions = {
        name: FunctionDef(
            fn.name, fn.kind,
            tuple(_resolve_statement(s, data_names, enum_values) for s in fn.body),
            fn.synthetic,
        )
        for name, fn in functions.items()
    }
    if threads and functions:
        main = build_thread_entry(list(functions), set(functions) | set(resources))
        functions = {**functions, main.name: main}
        entry = main.name

    if strict:
        seen = {}
        for fn in functions.values():
            for s in fn.body:
                if s.sid in seen:
                    errors.append(ParseError("E101", s.line, 1, f"duplicate sid {s.sid!r}"))
                seen[s.sid] = fn.name
    if errors:
        raise CirParseError(errors)
    return CirArtifact(resources, protection, functions, summaries, entry, goals, threads)


def load_cir(path, strict: bool = True) -> CirArtifact:
    with open(path, encoding="utf-8") as fh:
        return parse_cir(fh.read(), strict=strict)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _resource_flow(r: ResourceDecl) -> str:
    parts = [f"kind: {r.kind}"]
    if r.paired_with is not None:
        parts.append(f"paired_with: {r.paired_with}")
    if r.count is not None:
        parts.append(f"count: {r.count}")
    if r.type is not None:
        parts.append(f"type: {r.type}")
    if r.init is not None:
        parts.append(f"init: {format_value(r.init)}")
    if r.values:
        parts.append(f"values: [{', '.join(r.values)}]")
    return "{ " + ", ".join(parts) + " }"


def _transfer_text(t) -> Optional[str]:
    if t is None:
        return None
    if isinstance(t, Return):
        return "next: return"
    if isinstance(t, Next):
        return f"next: {t.sid}"
    if isinstance(t, Branch):
        return f"branch: [{format_expr(t.cond)}, {t.then}, {t.orelse}]"
    arms = ", ".join(f"{format_value(v)}: {s}" for v, s in t.arms)
    return f"switch: [{t.var}, {{{arms}}}, {t.default}]"


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_cir(artifact: CirArtifact) -> str:
    """Deterministic text form; ``parse_cir(serialize_cir(a)) == a``."""
    out = []
    if artifact.resources:
        out.append("resources:")
        width = max(len(n) for n in artifact.resources) + 2
        for name, r in artifact.resources.items():
            out.append(f"  {(name + ':').ljust(width)}{_resource_flow(r)}")
    if artifact.protection:
        entries = [f"{v}: [{', '.join(ls)}]" for v, ls in artifact.protection.items()]
        if len(entries) == 1:
            out.append(f"protection:  {entries[0]}")
        else:
            out.append("protection:")
            out.extend(f"  {e}" for e in entries)
    out.append("threads:" if artifact.threads else "functions:")
    for fn in artifact.functions.values():
        if fn.synthetic:
            continue
        out.append(f"  {fn.name}:")
        if fn.kind != "normal" or not artifact.threads:
            out.append(f"    kind: {fn.kind}")
        out.append("    body:")
        heads = [f"sid: {s.sid}, op: {s.op}" for s in fn.body]
        tails = [_transfer_text(s.transfer) for s in fn.body]
        width = max((len(h) for h, t in zip(heads, tails) if t), default=0) + 1
        for h, t in zip(heads, tails):
            if t:
                out.append(f"    - {{ {(h + ',').ljust(width)} {t} }}")
            else:
                out.append(f"    - {{ {h} }}")
    if artifact.summaries:
        out.append("summaries:")
        for name, s in artifact.summaries.items():
            hc = "true" if s.has_concurrency else "false"
            out.append(
                f"  {name}: {{ reads: [{', '.join(s.reads)}], writes: [{', '.join(s.writes)}], "
                f"calls: [{', '.join(s.calls)}], has_concurrency: {hc} }}"
            )
    if not artifact.threads and artifact.entry is not None:
        out.append(f"entry: {artifact.entry}")
    if artifact.goals:
        out.append("goals:")
        for g in artifact.goals:
            out.append(f"  - id: {g.id}")
            if g.description:
                out.append(f"    desc: {_quote(g.description)}")
            if g.completion:
                out.append("    completion:")
                out.extend(f"      - [{f}, completed]" for f in g.completion)
            if g.availability:
                out.append("    availability:")
                out.extend(f"      - [{r}, available]" for r in g.availability)
            if g.variables:
                out.append("    variables:")
                out.extend(f"      {v}: {format_value(lit)}" for v, lit in g.variables)
    return "\n".join(out) + "\n"
