"""Recursive-descent parser for the HDL subset.

Accepted per module: input/output/wire/reg declarations with [msb:0] widths,
continuous assigns, always @(posedge clk) and always @(*) blocks with
blocking/non-blocking assigns, if/else, case, module instantiation with named
port maps, and expressions over the operator subset (including ternary,
bit-select and part-select reads). Everything else is rejected with a
ParseError pointing at the offending token.
"""

from __future__ import annotations

from .errors import ParseError, UnresolvedIdentifier
from .hdl_ast import (
    AlwaysBlock,
    AlwaysTrigger,
    Assign,
    AssignStyle,
    Binary,
    BitSelect,
    Case,
    CaseArm,
    ContinuousAssign,
    Expr,
    If,
    InstanceDecl,
    ModuleAst,
    Num,
    PartSelect,
    Ref,
    SignalDecl,
    SignalKind,
    SourceLoc,
    Ternary,
    Unary,
    expr_signals,
    walk_stmts,
)
from .lexer import T, Token, parse_number, tokenize

CLOCK_NAME = "clk"
RESET_NAME = "rst"

_BINARY_LEVELS = [
    ["||"],
    ["&&"],
    ["|"],
    ["^"],
    ["&"],
    ["==", "!="],
    ["<", "<=", ">", ">="],
    ["<<", ">>"],
    ["+", "-"],
]


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.tokens = tokens
        self.file = file
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def cur(self) -> Token:
        return self.tokens[self.pos]

    def at(self, *kinds: T) -> bool:
        return self.cur().kind in kinds

    def eat(self, kind: T, what: str = "") -> Token:
        tok = self.cur()
        if tok.kind is not kind:
            expected = what or kind.name.lower()
            raise self.error(f"expected {expected}, got {tok.text!r}", tok)
        self.pos += 1
        return tok

    def eat_if(self, kind: T) -> Token | None:
        if self.cur().kind is kind:
            return self.eat(kind)
        return None

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.cur()
        return ParseError(message, self.file, tok.line, tok.col)

    def loc(self, tok: Token) -> SourceLoc:
        return SourceLoc(self.file, tok.line, tok.col)

    # -- top level ----------------------------------------------------------

    def parse_source(self) -> list[ModuleAst]:
        modules = []
        while not self.at(T.EOF):
            modules.append(self.parse_module())
        return modules

    def parse_module(self) -> ModuleAst:
        mod_tok = self.eat(T.MODULE, "'module'")
        name = self.eat(T.IDENT, "module name").text
        ports: list[SignalDecl] = []
        if self.eat_if(T.LPAREN):
            if not self.at(T.RPAREN):
                ports.append(self.parse_port_decl())
                while self.eat_if(T.COMMA):
                    ports.append(self.parse_port_decl())
            self.eat(T.RPAREN)
        self.eat(T.SEMI)

        decls: list[SignalDecl] = []
        items: list = []
        instances: list[InstanceDecl] = []
        while not self.at(T.ENDMODULE):
            if self.at(T.WIRE, T.REG):
                decls.extend(self.parse_net_decl())
            elif self.at(T.ASSIGN):
                items.append(self.parse_continuous_assign())
            elif self.at(T.ALWAYS):
                items.append(self.parse_always())
            elif self.at(T.IDENT):
                instances.append(self.parse_instance())
            elif self.at(T.INPUT, T.OUTPUT):
                raise self.error("port declarations must appear in the module header")
            else:
                raise self.error(f"unexpected {self.cur().text!r} in module body")
        self.eat(T.ENDMODULE)

        module = ModuleAst(
            name=name,
            ports=ports,
            decls=decls,
            items=items,
            instances=instances,
            loc=self.loc(mod_tok),
        )
        _check_module(module, self.file)
        return module

    def parse_port_decl(self) -> SignalDecl:
        tok = self.cur()
        if self.eat_if(T.INPUT):
            kind = SignalKind.INPUT
            is_reg = False
        elif self.eat_if(T.OUTPUT):
            kind = SignalKind.OUTPUT
            is_reg = bool(self.eat_if(T.REG))
        else:
            raise self.error("expected 'input' or 'output'")
        width = self.parse_width()
        name = self.eat(T.IDENT, "port name")
        return SignalDecl(name.text, kind, width, self.loc(name), is_reg=is_reg)

    def parse_width(self) -> int:
        if not self.eat_if(T.LBRACKET):
            return 1
        msb_tok = self.eat(T.NUMBER, "msb")
        msb, _, _ = parse_number(msb_tok, self.file)
        self.eat(T.COLON)
        lsb_tok = self.eat(T.NUMBER, "lsb")
        lsb, _, _ = parse_number(lsb_tok, self.file)
        if lsb != 0:
            raise self.error("only [msb:0] ranges are supported", lsb_tok)
        self.eat(T.RBRACKET)
        return msb + 1

    def parse_net_decl(self) -> list[SignalDecl]:
        if self.eat_if(T.WIRE):
            kind = SignalKind.WIRE
        else:
            self.eat(T.REG)
            kind = SignalKind.REG
        width = self.parse_width()
        is_reg = kind is SignalKind.REG
        decls = []
        name = self.eat(T.IDENT, "signal name")
        decls.append(SignalDecl(name.text, kind, width, self.loc(name), is_reg=is_reg))
        while self.eat_if(T.COMMA):
            name = self.eat(T.IDENT, "signal name")
            decls.append(SignalDecl(name.text, kind, width, self.loc(name), is_reg=is_reg))
        self.eat(T.SEMI)
        return decls

    def parse_continuous_assign(self) -> ContinuousAssign:
        tok = self.eat(T.ASSIGN)
        dest = self.eat(T.IDENT, "assignment target").text
        self.eat(T.EQ, "'='")
        expr = self.parse_expr()
        self.eat(T.SEMI)
        return ContinuousAssign(dest, expr, self.loc(tok))

    def parse_always(self) -> AlwaysBlock:
        tok = self.eat(T.ALWAYS)
        self.eat(T.AT, "'@'")
        self.eat(T.LPAREN)
        if self.eat_if(T.POSEDGE):
            clk = self.eat(T.IDENT, "clock name")
            if clk.text != CLOCK_NAME:
                raise self.error(
                    f"only 'posedge {CLOCK_NAME}' is supported as a trigger", clk
                )
            trigger = AlwaysTrigger.POSEDGE_CLOCK
        elif self.eat_if(T.STAR):
            trigger = AlwaysTrigger.COMBINATIONAL
        else:
            raise self.error("expected 'posedge clk' or '*' in sensitivity list")
        self.eat(T.RPAREN)
        body = self.parse_stmt_or_block()
        return AlwaysBlock(trigger, tuple(body), self.loc(tok))

    def parse_stmt_or_block(self) -> list:
        if self.eat_if(T.BEGIN):
            stmts = []
            while not self.at(T.END):
                stmts.append(self.parse_stmt())
            self.eat(T.END)
            return stmts
        return [self.parse_stmt()]

    def parse_stmt(self):
        tok = self.cur()
        if tok.kind is T.IF:
            self.eat(T.IF)
            self.eat(T.LPAREN)
            cond = self.parse_expr()
            self.eat(T.RPAREN)
            then = self.parse_stmt_or_block()
            other: list = []
            if self.eat_if(T.ELSE):
                other = self.parse_stmt_or_block()
            return If(cond, tuple(then), tuple(other), self.loc(tok))
        if tok.kind is T.CASE:
            return self.parse_case()
        if tok.kind is T.IDENT:
            dest = self.eat(T.IDENT)
            if self.eat_if(T.EQ):
                style = AssignStyle.BLOCKING
            elif self.eat_if(T.LE):
                style = AssignStyle.NON_BLOCKING
            else:
                raise self.error("expected '=' or '<=' after assignment target")
            expr = self.parse_expr()
            self.eat(T.SEMI)
            return Assign(dest.text, expr, style, self.loc(dest))
        raise self.error(f"unexpected {tok.text!r}; expected a statement")

    def parse_case(self) -> Case:
        tok = self.eat(T.CASE)
        self.eat(T.LPAREN)
        subject = self.parse_expr()
        self.eat(T.RPAREN)
        arms: list[CaseArm] = []
        default: list = []
        saw_default = False
        while not self.at(T.ENDCASE):
            if self.eat_if(T.DEFAULT):
                if saw_default:
                    raise self.error("duplicate default arm")
                saw_default = True
                self.eat(T.COLON)
                default = self.parse_stmt_or_block()
                continue
            label = self.eat(T.NUMBER, "case label")
            value, width, sized = parse_number(label, self.file)
            self.eat(T.COLON)
            body = self.parse_stmt_or_block()
            arms.append(
                CaseArm(Num(value, width, self.loc(label), sized), tuple(body), self.loc(label))
            )
        self.eat(T.ENDCASE)
        return Case(subject, tuple(arms), tuple(default), self.loc(tok))

    def parse_instance(self) -> InstanceDecl:
        mod_tok = self.eat(T.IDENT)
        inst_tok = self.eat(T.IDENT, "instance name")
        self.eat(T.LPAREN)
        port_map: list[tuple[str, Expr]] = []
        if not self.at(T.RPAREN):
            port_map.append(self.parse_port_binding())
            while self.eat_if(T.COMMA):
                port_map.append(self.parse_port_binding())
        self.eat(T.RPAREN)
        self.eat(T.SEMI)
        return InstanceDecl(inst_tok.text, mod_tok.text, tuple(port_map), self.loc(inst_tok))

    def parse_port_binding(self) -> tuple[str, Expr]:
        if not self.at(T.DOT):
            raise self.error("only named port maps (.port(expr)) are supported")
        self.eat(T.DOT)
        formal = self.eat(T.IDENT, "port name").text
        self.eat(T.LPAREN)
        actual = self.parse_expr()
        self.eat(T.RPAREN)
        return formal, actual

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> Expr:
        cond = self.parse_binary(0)
        if self.eat_if(T.QUESTION):
            q_loc = cond.loc
            then = self.parse_expr()
            self.eat(T.COLON)
            other = self.parse_expr()
            return Ternary(cond, then, other, q_loc)
        return cond

    def parse_binary(self, level: int) -> Expr:
        if level >= len(_BINARY_LEVELS):
            return self.parse_unary()
        ops = _BINARY_LEVELS[level]
        lhs = self.parse_binary(level + 1)
        while True:
            tok = self.cur()
            text = tok.text
            if tok.kind is T.LE:
                text = "<="
            elif tok.kind is not T.OP:
                break
            if text not in ops:
                break
            self.pos += 1
            rhs = self.parse_binary(level + 1)
            lhs = Binary(text, lhs, rhs, self.loc(tok))
        return lhs

    def parse_unary(self) -> Expr:
        tok = self.cur()
        if tok.kind is T.OP and tok.text in ("~", "!", "-"):
            self.pos += 1
            operand = self.parse_unary()
            return Unary(tok.text, operand, self.loc(tok))
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.cur()
        if tok.kind is T.NUMBER:
            self.pos += 1
            value, width, sized = parse_number(tok, self.file)
            return Num(value, width, self.loc(tok), sized)
        if tok.kind is T.LPAREN:
            self.eat(T.LPAREN)
            inner = self.parse_expr()
            self.eat(T.RPAREN)
            return inner
        if tok.kind is T.IDENT:
            self.pos += 1
            if self.eat_if(T.LBRACKET):
                first = self.parse_expr()
                if self.eat_if(T.COLON):
                    lsb_tok = self.eat(T.NUMBER, "part-select lsb")
                    lsb, _, _ = parse_number(lsb_tok, self.file)
                    self.eat(T.RBRACKET)
                    if not isinstance(first, Num):
                        raise self.error("part-select bounds must be literals", tok)
                    if first.value < lsb:
                        raise self.error("part-select msb below lsb", tok)
                    return PartSelect(tok.text, first.value, lsb, self.loc(tok))
                self.eat(T.RBRACKET)
                return BitSelect(tok.text, first, self.loc(tok))
            return Ref(tok.text, self.loc(tok))
        raise self.error(f"unexpected {tok.text!r} in expression")


def _check_module(m: ModuleAst, file: str) -> None:
    """Intra-module legality: unique names, resolvable refs, style rules."""
    names: dict[str, SignalDecl] = {}
    for decl in m.all_signals():
        if decl.name in names:
            raise ParseError(
                f"duplicate signal {decl.name!r} in module {m.name!r}",
                file, decl.loc.line, decl.loc.col,
            )
        if decl.width < 1:
            raise ParseError(
                f"width of {decl.name!r} must be >= 1",
                file, decl.loc.line, decl.loc.col,
            )
        names[decl.name] = decl
    instance_names = set()
    for inst in m.instances:
        if inst.instance_name in names or inst.instance_name in instance_names:
            raise ParseError(
                f"instance name {inst.instance_name!r} collides with another declaration",
                file, inst.loc.line, inst.loc.col,
            )
        instance_names.add(inst.instance_name)

    def check_refs(expr: Expr, ctx: str) -> None:
        for name in expr_signals(expr):
            if name not in names:
                raise UnresolvedIdentifier(
                    f"unknown signal {name!r} in {ctx}", file,
                    expr.loc.line, expr.loc.col,
                )
            if name == CLOCK_NAME:
                raise ParseError(
                    f"{CLOCK_NAME!r} is the clock and may not appear as an operand",
                    file, expr.loc.line, expr.loc.col,
                )

    def check_dest(dest: str, loc: SourceLoc, style: AssignStyle | None, in_posedge: bool) -> None:
        decl = names.get(dest)
        if decl is None:
            raise UnresolvedIdentifier(
                f"assignment to undeclared signal {dest!r}", file, loc.line, loc.col
            )
        if decl.kind is SignalKind.INPUT:
            raise ParseError(f"cannot assign to input {dest!r}", file, loc.line, loc.col)
        if style is None:  # continuous assign
            if decl.is_reg:
                raise ParseError(
                    f"continuous assign target {dest!r} must be a wire", file, loc.line, loc.col
                )
            return
        if not decl.is_reg:
            raise ParseError(
                f"procedural assignment target {dest!r} must be declared reg",
                file, loc.line, loc.col,
            )
        if style is AssignStyle.NON_BLOCKING and not in_posedge:
            raise ParseError(
                "non-blocking assignment outside a clocked block", file, loc.line, loc.col
            )

    for item in m.items:
        if isinstance(item, ContinuousAssign):
            check_dest(item.dest, item.loc, None, False)
            check_refs(item.expr, f"assign to {item.dest!r}")
        else:
            in_posedge = item.trigger is AlwaysTrigger.POSEDGE_CLOCK
            for stmt in walk_stmts(item.body):
                if isinstance(stmt, Assign):
                    check_dest(stmt.dest, stmt.loc, stmt.style, in_posedge)
                    check_refs(stmt.expr, f"assignment to {stmt.dest!r}")
                elif isinstance(stmt, If):
                    check_refs(stmt.cond, "if condition")
                elif isinstance(stmt, Case):
                    check_refs(stmt.subject, "case subject")

    for inst in m.instances:
        seen_formals = set()
        for formal, actual in inst.port_map:
            if formal in seen_formals:
                raise ParseError(
                    f"port {formal!r} bound twice on instance {inst.instance_name!r}",
                    file, inst.loc.line, inst.loc.col,
                )
            seen_formals.add(formal)
            if formal == CLOCK_NAME:
                if not (isinstance(actual, Ref) and actual.name == CLOCK_NAME):
                    raise ParseError(
                        f"clock port of {inst.instance_name!r} must be bound to {CLOCK_NAME!r}",
                        file, inst.loc.line, inst.loc.col,
                    )
                continue
            check_refs(actual, f"port map of instance {inst.instance_name!r}")


def parse_modules(text: str, file: str = "<input>") -> list[ModuleAst]:
    """Parse one source text into its module definitions."""
    tokens = tokenize(text, file)
    return _Parser(tokens, file).parse_source()


def parse_expression(text: str, file: str = "<expr>") -> Expr:
    """Parse a bare expression (rendered conditions round-trip through this)."""
    tokens = tokenize(text, file)
    p = _Parser(tokens, file)
    expr = p.parse_expr()
    if not p.at(T.EOF):
        raise p.error("trailing input after expression")
    return expr
