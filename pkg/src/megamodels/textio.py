"""Textual concrete syntax for megamodels: the ``.mm`` file format.

One file holds any number of ``megamodel NAME { ... }`` blocks. Inside a
block, declarations come first by convention (models, then operations),
followed by transitions, but the parser accepts any order::

    megamodel SelfRepair {
      model ArchitecturalModel name "Architectural Model" : ReflectionModel;
      model Layer1 : ReflectionModel = megamodel Managed;
      initial Start;
      final Analyzed;
      op Update : Monitor behavior "update" {
        reads TGGRules;
        writes ArchitecturalModel;
        status done;
      }
      decision FurtherAnalysis;
      call Analyze = Analysis.Analyze map { OK -> ok, Failures -> failures };
      Start -> Update;
      Update.done -> CheckForFailures;
      FurtherAnalysis -> [count(CheckForFailures.no_failures) > 5] DeepAnalysis;
      FurtherAnalysis -> else Repair;
    }

``#`` starts a line comment. Identifiers are machine-friendly
(``[A-Za-z_][A-Za-z0-9_]*``); human-readable names go into the optional
``name "..."`` attribute. Parsing does not validate; run
``metamodel.validate`` separately.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import condlang
from .errors import ERR_DUP_NAME, ERR_SYNTAX, ParseError, SourceSpan
from .metamodel import (
    DecisionOp,
    FinalOp,
    InitialOp,
    MegamodelCall,
    MegamodelDef,
    ModelDecl,
    ModelOp,
    ModelUse,
    Operation,
    PayloadKind,
    Role,
    Transition,
    UseMode,
)

_PUNCT = ("->", "{", "}", "(", ")", ";", ":", ",", "=", ".", "[", "]")
_DECL_KEYWORDS = frozenset({"model", "initial", "final", "decision", "op", "call"})
_USE_KEYWORDS = {"reads": UseMode.READ, "writes": UseMode.WRITE, "annotates": UseMode.ANNOTATE}
_ROLES = {r.value: r for r in Role}

__all__ = ["SourceSpan", "parse_megamodel", "serialize"]


@dataclass
class _Token:
    kind: str  # "ident" | "string" | "punct" | "eof"
    value: str
    span: SourceSpan


class _Scanner:
    def __init__(self, text: str, filename: str):
        self.text = text
        self.file = filename
        self.pos = 0
        self.line = 1
        self.col = 1
        self._peeked: _Token | None = None

    def _span(self) -> SourceSpan:
        return SourceSpan(self.file, self.line, self.col)

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos >= len(self.text):
                return
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _skip_trivia(self) -> None:
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c in " \t\r\n":
                self._advance()
            elif c == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance()
            else:
                return

    def peek(self) -> _Token:
        if self._peeked is None:
            self._peeked = self._lex()
        return self._peeked

    def take(self) -> _Token:
        tok = self.peek()
        self._peeked = None
        return tok

    def _lex(self) -> _Token:
        self._skip_trivia()
        span = self._span()
        if self.pos >= len(self.text):
            return _Token("eof", "", span)
        c = self.text[self.pos]
        if c == '"':
            self._advance()
            chars: list[str] = []
            while self.pos < len(self.text) and self.text[self.pos] != '"':
                if self.text[self.pos] == "\n":
                    raise ParseError(ERR_SYNTAX, "unterminated string", span)
                chars.append(self.text[self.pos])
                self._advance()
            if self.pos >= len(self.text):
                raise ParseError(ERR_SYNTAX, "unterminated string", span)
            self._advance()
            return _Token("string", "".join(chars), span)
        if c.isalpha() or c == "_":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
                self._advance()
            return _Token("ident", self.text[start : self.pos], span)
        for p in _PUNCT:
            if self.text.startswith(p, self.pos):
                self._advance(len(p))
                return _Token("punct", p, span)
        raise ParseError(ERR_SYNTAX, f"unexpected character {c!r}", span)

    def raw_until_bracket(self) -> tuple[str, SourceSpan]:
        """Raw text up to the closing ``]`` of a condition (peek must be ``[``)."""
        self.expect_punct("[")
        self._skip_trivia()
        span = self._span()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] != "]":
            self._advance()
        if self.pos >= len(self.text):
            raise ParseError(ERR_SYNTAX, "unterminated condition", span)
        raw = self.text[start : self.pos]
        self._advance()  # consume "]"
        return raw, span

    # -- convenience --

    def expect_punct(self, value: str) -> _Token:
        tok = self.take()
        if tok.kind != "punct" or tok.value != value:
            raise ParseError(ERR_SYNTAX, f"expected {value!r}, got {tok.value or 'end of file'!r}", tok.span)
        return tok

    def expect_ident(self, what: str = "identifier") -> _Token:
        tok = self.take()
        if tok.kind != "ident":
            raise ParseError(ERR_SYNTAX, f"expected {what}, got {tok.value or 'end of file'!r}", tok.span)
        return tok

    def expect_keyword(self, word: str) -> _Token:
        tok = self.take()
        if tok.kind != "ident" or tok.value != word:
            raise ParseError(ERR_SYNTAX, f"expected {word!r}, got {tok.value or 'end of file'!r}", tok.span)
        return tok

    def expect_string(self, what: str) -> _Token:
        tok = self.take()
        if tok.kind != "string":
            raise ParseError(ERR_SYNTAX, f"expected {what} string, got {tok.value or 'end of file'!r}", tok.span)
        return tok

    def at_punct(self, value: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.value == value

    def at_ident(self, value: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.value == value


def _rebase(inner: SourceSpan | None, raw: str, base: SourceSpan) -> SourceSpan:
    """Map a position inside a condition string back into the file."""
    if inner is None:
        return base
    offset = inner.column - 1
    consumed = raw[:offset]
    lines = consumed.count("\n")
    if lines == 0:
        return SourceSpan(base.file, base.line, base.column + offset)
    return SourceSpan(base.file, base.line + lines, len(consumed) - consumed.rfind("\n"))


class _BlockParser:
    def __init__(self, scanner: _Scanner):
        self.s = scanner

    def parse_name_attr(self) -> str:
        if self.s.at_ident("name"):
            self.s.take()
            return self.s.expect_string("name").value
        return ""

    def parse_block(self) -> MegamodelDef:
        span = self.s.expect_keyword("megamodel").span
        name = self.s.expect_ident("megamodel name").value
        self.s.expect_punct("{")
        models: list[ModelDecl] = []
        operations: list[Operation] = []
        transitions: list[Transition] = []
        ids: dict[str, SourceSpan] = {}

        def declare(element_id: str, span: SourceSpan) -> None:
            if element_id in ids:
                raise ParseError(ERR_DUP_NAME, f"duplicate element id {element_id!r}", span)
            ids[element_id] = span

        while not self.s.at_punct("}"):
            tok = self.s.take()
            if tok.kind != "ident":
                raise ParseError(ERR_SYNTAX, f"expected a declaration or transition, got {tok.value!r}", tok.span)
            nxt = self.s.peek()
            is_transition = nxt.kind == "punct" and nxt.value in (".", "->")
            if is_transition:
                transitions.append(self.parse_transition(tok))
            elif tok.value == "model":
                decl = self.parse_model(tok.span)
                declare(decl.id, decl.span or tok.span)
                models.append(decl)
            elif tok.value in ("initial", "final", "decision"):
                op = self.parse_simple_op(tok.value, tok.span)
                declare(op.id, op.span or tok.span)
                operations.append(op)
            elif tok.value == "op":
                op = self.parse_model_op(tok.span)
                declare(op.id, op.span or tok.span)
                operations.append(op)
            elif tok.value == "call":
                op = self.parse_call(tok.span)
                declare(op.id, op.span or tok.span)
                operations.append(op)
            else:
                raise ParseError(ERR_SYNTAX, f"unknown declaration {tok.value!r}", tok.span)
        self.s.expect_punct("}")
        return MegamodelDef(name=name, models=models, operations=operations, transitions=transitions, span=span)

    def parse_model(self, span: SourceSpan) -> ModelDecl:
        ident = self.s.expect_ident("model id")
        name = self.parse_name_attr()
        stereotypes: list[str] = []
        payload_kind = PayloadKind.OPAQUE
        megamodel_ref: str | None = None
        if self.s.at_punct(":"):
            self.s.take()
            stereotypes.append(self.s.expect_ident("stereotype").value)
            while self.s.at_punct(","):
                self.s.take()
                stereotypes.append(self.s.expect_ident("stereotype").value)
        if self.s.at_punct("="):
            self.s.take()
            self.s.expect_keyword("megamodel")
            megamodel_ref = self.s.expect_ident("megamodel reference").value
            payload_kind = PayloadKind.MEGAMODEL
        self.s.expect_punct(";")
        return ModelDecl(
            ident.value,
            name=name,
            stereotypes=tuple(stereotypes),
            payload_kind=payload_kind,
            megamodel_ref=megamodel_ref,
            span=ident.span,
        )

    def parse_simple_op(self, kind: str, span: SourceSpan) -> Operation:
        ident = self.s.expect_ident(f"{kind} id")
        name = self.parse_name_attr()
        self.s.expect_punct(";")
        cls = {"initial": InitialOp, "final": FinalOp, "decision": DecisionOp}[kind]
        return cls(ident.value, name=name, span=ident.span)

    def parse_model_op(self, span: SourceSpan) -> ModelOp:
        ident = self.s.expect_ident("operation id")
        name = self.parse_name_attr()
        self.s.expect_punct(":")
        role_tok = self.s.expect_ident("role")
        role = _ROLES.get(role_tok.value)
        if role is None:
            raise ParseError(
                ERR_SYNTAX, f"unknown role {role_tok.value!r}, expected one of {sorted(_ROLES)}", role_tok.span
            )
        self.s.expect_keyword("behavior")
        behavior_key = self.s.expect_string("behavior key").value
        self.s.expect_punct("{")
        uses: list[ModelUse] = []
        statuses: list[str] = []
        while not self.s.at_punct("}"):
            clause = self.s.expect_ident("clause")
            if clause.value in _USE_KEYWORDS:
                mode = _USE_KEYWORDS[clause.value]
                uses.append(ModelUse(self.s.expect_ident("model id").value, mode))
                while self.s.at_punct(","):
                    self.s.take()
                    uses.append(ModelUse(self.s.expect_ident("model id").value, mode))
            elif clause.value == "status":
                statuses.append(self.s.expect_ident("status label").value)
                while self.s.at_punct(","):
                    self.s.take()
                    statuses.append(self.s.expect_ident("status label").value)
            else:
                raise ParseError(ERR_SYNTAX, f"unknown clause {clause.value!r}", clause.span)
            self.s.expect_punct(";")
        self.s.expect_punct("}")
        if self.s.at_punct(";"):
            self.s.take()
        return ModelOp(
            ident.value,
            name=name,
            span=ident.span,
            behavior_key=behavior_key,
            role=role,
            uses=tuple(uses),
            statuses=tuple(statuses),
        )

    def parse_call(self, span: SourceSpan) -> MegamodelCall:
        ident = self.s.expect_ident("call id")
        name = self.parse_name_attr()
        self.s.expect_punct("=")
        callee = self.s.expect_ident("callee megamodel").value
        self.s.expect_punct(".")
        entry = self.s.expect_ident("entry initial").value
        self.s.expect_keyword("map")
        self.s.expect_punct("{")
        mapping: dict[str, str] = {}
        while True:
            final_tok = self.s.expect_ident("callee final")
            self.s.expect_punct("->")
            status = self.s.expect_ident("status label").value
            if final_tok.value in mapping:
                raise ParseError(ERR_DUP_NAME, f"final {final_tok.value!r} mapped twice", final_tok.span)
            mapping[final_tok.value] = status
            if self.s.at_punct(","):
                self.s.take()
                continue
            break
        self.s.expect_punct("}")
        if self.s.at_punct(";"):
            self.s.take()
        return MegamodelCall(
            ident.value, name=name, span=ident.span, callee=callee, entry=entry, final_mapping=mapping
        )

    def parse_transition(self, source_tok: _Token) -> Transition:
        status: str | None = None
        if self.s.at_punct("."):
            self.s.take()
            status = self.s.expect_ident("status label").value
        self.s.expect_punct("->")
        condition: condlang.Expr | None = None
        is_default = False
        if self.s.at_punct("["):
            raw, cond_span = self.s.raw_until_bracket()
            try:
                condition = condlang.parse_condition(raw)
            except ParseError as exc:
                raise ParseError(exc.code, exc.raw_message, _rebase(exc.span, raw, cond_span)) from None
        elif self.s.at_ident("else"):
            self.s.take()
            is_default = True
        target = self.s.expect_ident("target operation").value
        self.s.expect_punct(";")
        return Transition(
            source=source_tok.value,
            target=target,
            status=status,
            condition=condition,
            is_default=is_default,
            span=source_tok.span,
        )


def parse_megamodel(text: str, filename: str = "<input>") -> list[MegamodelDef]:
    """Parse every ``megamodel`` block in ``text``; does not validate."""
    scanner = _Scanner(text, filename)
    parser = _BlockParser(scanner)
    defs: list[MegamodelDef] = []
    names: set[str] = set()
    while scanner.peek().kind != "eof":
        block = parser.parse_block()
        if block.name in names:
            raise ParseError(ERR_DUP_NAME, f"duplicate megamodel {block.name!r}", block.span)
        names.add(block.name)
        defs.append(block)
    return defs


def _name_attr(element_id: str, name: str) -> str:
    return f' name "{name}"' if name and name != element_id else ""


def _serialize_one(def_: MegamodelDef, out: list[str]) -> None:
    out.append(f"megamodel {def_.name} {{")
    for m in def_.models:
        line = f"  model {m.id}{_name_attr(m.id, m.name)}"
        if m.stereotypes:
            line += " : " + ", ".join(m.stereotypes)
        if m.payload_kind is PayloadKind.MEGAMODEL:
            line += f" = megamodel {m.megamodel_ref}"
        out.append(line + ";")
    for o in def_.operations:
        attr = _name_attr(o.id, o.name)
        if isinstance(o, InitialOp):
            out.append(f"  initial {o.id}{attr};")
        elif isinstance(o, FinalOp):
            out.append(f"  final {o.id}{attr};")
        elif isinstance(o, DecisionOp):
            out.append(f"  decision {o.id}{attr};")
        elif isinstance(o, ModelOp):
            out.append(f'  op {o.id}{attr} : {o.role.value} behavior "{o.behavior_key}" {{')
            for use in o.uses:
                out.append(f"    {use.mode.value} {use.model};")
            if o.statuses:
                out.append(f"    status {', '.join(o.statuses)};")
            out.append("  }")
        elif isinstance(o, MegamodelCall):
            entries = ", ".join(f"{final} -> {status}" for final, status in o.final_mapping.items())
            out.append(f"  call {o.id}{attr} = {o.callee}.{o.entry} map {{ {entries} }};")
    for t in def_.transitions:
        src = f"{t.source}.{t.status}" if t.status is not None else t.source
        if t.condition is not None:
            out.append(f"  {src} -> [{condlang.to_text(t.condition)}] {t.target};")
        elif t.is_default:
            out.append(f"  {src} -> else {t.target};")
        else:
            out.append(f"  {src} -> {t.target};")
    out.append("}")


def serialize(defs: list[MegamodelDef] | MegamodelDef) -> str:
    """Canonical text for megamodels: models, then operations, then
    transitions, each in declaration order. ``parse_megamodel`` of the
    result is structurally equal to the input.
    """
    if isinstance(defs, MegamodelDef):
        defs = [defs]
    out: list[str] = []
    for i, def_ in enumerate(defs):
        if i:
            out.append("")
        _serialize_one(def_, out)
    return "\n".join(out) + "\n" if out else ""
