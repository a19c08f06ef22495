//! Recursive-descent parser for the kernel language.
//!
//! The grammar is a closed C subset: `param`/`int`/`float` declarations,
//! assignments, `if`/`else`, and canonical unit-stride `for` loops. A `x++`
//! inside a subscript is desugared into a use of `x` followed by
//! `x = x + 1` right after the enclosing statement. Everything else is
//! rejected with a positioned diagnostic.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::Diagnostic;

pub fn parse(src: &str) -> Result<Program, Vec<Diagnostic>> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, diags: Vec::new(), pending: Vec::new(), subscript_depth: 0 };
    let program = p.program();
    let mut diags = p.diags;
    if diags.is_empty() {
        super::validate::validate(&program, &mut diags);
    }
    if diags.is_empty() {
        Ok(program)
    } else {
        diags.sort_by_key(|d| d.span);
        Err(diags)
    }
}

const UNSUPPORTED_KEYWORDS: &[(&str, &str)] = &[
    ("while", "while-loop"),
    ("do", "do-while loop"),
    ("switch", "switch statement"),
    ("return", "return statement"),
    ("break", "break statement"),
    ("continue", "continue statement"),
    ("goto", "goto statement"),
    ("struct", "struct type"),
    ("double", "double type"),
    ("char", "char type"),
    ("long", "long type"),
    ("void", "void type / function definition"),
];

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    /// Post-increments found in the statement being parsed: (name, delta, span).
    pending: Vec<(String, i64, Span)>,
    subscript_depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        if self.peek() == &tok {
            Ok(self.advance().span)
        } else {
            Err(self.error_here(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn error_here(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::new(self.span(), msg)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.advance().span;
                Ok((s, span))
            }
            other => Err(self.error_here(format!("expected {what}, found {}", other.describe()))),
        }
    }

    /// Skips to just past the next `;` or balanced `{...}` block, or to an
    /// unopened `}` / end of file.
    fn recover(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::RBrace if depth == 0 => return,
                Tok::RBrace => {
                    self.advance();
                    depth -= 1;
                    if depth == 0 {
                        return;
                    }
                }
                Tok::LBrace => {
                    self.advance();
                    depth += 1;
                }
                Tok::Semi if depth == 0 => {
                    self.advance();
                    return;
                }
                _ => {
                    self.advance();
                }
            }
        }
    }

    fn program(&mut self) -> Program {
        let mut program = Program::default();
        while self.peek() != &Tok::Eof {
            let start = self.pos;
            let result = if self.is_keyword("param") {
                self.param_decl(&mut program)
            } else if self.is_keyword("int") || self.is_keyword("float") {
                self.var_decl(&mut program)
            } else {
                self.statement().map(|stmts| program.body.extend(stmts))
            };
            if let Err(d) = result {
                self.diags.push(d);
                self.recover();
                if self.peek() == &Tok::RBrace {
                    let span = self.advance().span;
                    self.diags.push(Diagnostic::new(span, "unmatched `}`"));
                }
            }
            if self.pos == start && self.peek() != &Tok::Eof {
                self.advance();
            }
        }
        program
    }

    fn param_decl(&mut self, program: &mut Program) -> PResult<()> {
        self.advance();
        loop {
            let (name, _) = self.ident("parameter name")?;
            program.params.push(name);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::Semi, "`;`")?;
        Ok(())
    }

    fn var_decl(&mut self, program: &mut Program) -> PResult<()> {
        let (kw, _) = self.ident("type")?;
        let elem = if kw == "float" { ElemType::Float } else { ElemType::Int };
        loop {
            if self.peek() == &Tok::Star {
                return Err(Diagnostic::new(self.span(), "unsupported construct: pointer"));
            }
            let (name, span) = self.ident("declared name")?;
            let mut extents = Vec::new();
            while self.eat(&Tok::LBracket) {
                extents.push(self.expr()?);
                self.expect(Tok::RBracket, "`]`")?;
            }
            if extents.is_empty() {
                if elem == ElemType::Float {
                    return Err(Diagnostic::new(span, "unsupported construct: float scalar"));
                }
                program.decls.push(Decl::Scalar { name, span });
            } else {
                if extents.len() > 2 {
                    return Err(Diagnostic::new(span, "arrays of rank greater than 2 are not supported"));
                }
                program.decls.push(Decl::Array { name, elem, extents, span });
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::Semi, "`;`")?;
        Ok(())
    }

    fn block_or_stmt(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat(&Tok::LBrace) {
            let mut out = Vec::new();
            while self.peek() != &Tok::RBrace {
                if self.peek() == &Tok::Eof {
                    return Err(self.error_here("expected `}`, found end of file"));
                }
                let start = self.pos;
                match self.statement() {
                    Ok(stmts) => out.extend(stmts),
                    Err(d) => {
                        self.diags.push(d);
                        self.recover();
                    }
                }
                if self.pos == start {
                    self.advance();
                }
            }
            self.advance();
            Ok(out)
        } else {
            self.statement()
        }
    }

    /// One source statement; may expand to several after desugaring.
    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let span = self.span();
        if let Tok::Ident(word) = self.peek().clone() {
            if let Some((_, what)) = UNSUPPORTED_KEYWORDS.iter().find(|(kw, _)| *kw == word) {
                return Err(self.error_here(format!("unsupported construct: {what}")));
            }
            match word.as_str() {
                "for" => return self.for_loop().map(|s| vec![s]),
                "if" => return self.if_stmt().map(|s| vec![s]),
                "int" | "float" | "param" => {
                    return Err(self.error_here("declarations are only allowed at the top level"))
                }
                "else" => return Err(self.error_here("`else` without a matching `if`")),
                _ => {}
            }
        }
        if self.peek() == &Tok::LBrace {
            return self.block_or_stmt();
        }
        if self.eat(&Tok::Semi) {
            return Ok(Vec::new());
        }
        self.pending.clear();
        let stmt = self.simple_statement(span)?;
        self.expect(Tok::Semi, "`;`")?;
        self.check_pending(&stmt)?;
        let mut out = vec![stmt];
        for (name, delta, span) in std::mem::take(&mut self.pending) {
            out.push(increment(&name, delta, span, AssignOrigin::PostIncrement));
        }
        Ok(out)
    }

    /// C leaves `a[x++] = x` undefined; require each incremented name to appear once.
    fn check_pending(&self, stmt: &Stmt) -> PResult<()> {
        for (name, _, span) in &self.pending {
            let mut count = 0;
            if let StmtKind::Assign { lhs, rhs, .. } = &stmt.kind {
                match lhs {
                    LValue::Scalar(n) if n == name => count += 1,
                    LValue::Scalar(_) => {}
                    LValue::ArrayElem { subs, .. } => {
                        for s in subs {
                            s.visit_names(&mut |n, arr| count += usize::from(!arr && n == name));
                        }
                    }
                }
                rhs.visit_names(&mut |n, arr| count += usize::from(!arr && n == name));
            }
            if count > 1 {
                return Err(Diagnostic::new(
                    *span,
                    format!("`{name}` is incremented and used again in the same statement"),
                ));
            }
        }
        Ok(())
    }

    /// Assignment, compound assignment, or `x++` / `++x` / `x--` statement.
    fn simple_statement(&mut self, span: Span) -> PResult<Stmt> {
        if matches!(self.peek(), Tok::PlusPlus | Tok::MinusMinus) {
            let delta = if self.advance().tok == Tok::PlusPlus { 1 } else { -1 };
            let (name, _) = self.ident("variable")?;
            return Ok(increment(&name, delta, span, AssignOrigin::Source));
        }
        if self.peek() == &Tok::Star {
            return Err(self.error_here("unsupported construct: pointer dereference"));
        }
        let (name, _) = self.ident("statement")?;
        if self.peek() == &Tok::LParen {
            return Err(Diagnostic::new(span, format!("unsupported construct: function call `{name}(...)`")));
        }
        if matches!(self.peek(), Tok::PlusPlus | Tok::MinusMinus) {
            let delta = if self.advance().tok == Tok::PlusPlus { 1 } else { -1 };
            return Ok(increment(&name, delta, span, AssignOrigin::Source));
        }
        let lhs = if self.peek() == &Tok::LBracket {
            let subs = self.subscripts()?;
            LValue::ArrayElem { array: name, subs }
        } else {
            LValue::Scalar(name)
        };
        let op = self.advance();
        let rhs = match op.tok {
            Tok::Assign => self.expr()?,
            Tok::PlusAssign | Tok::MinusAssign => {
                if !self.pending.is_empty() {
                    return Err(Diagnostic::new(op.span, "post-increment inside a compound assignment target"));
                }
                let bop = if op.tok == Tok::PlusAssign { BinOp::Add } else { BinOp::Sub };
                let value = self.expr()?;
                Expr::binary(bop, lvalue_expr(&lhs), value)
            }
            other => return Err(Diagnostic::new(op.span, format!("expected `=`, found {}", other.describe()))),
        };
        Ok(Stmt { kind: StmtKind::Assign { lhs, rhs, origin: AssignOrigin::Source }, span })
    }

    fn subscripts(&mut self) -> PResult<Vec<Expr>> {
        let mut subs = Vec::new();
        while self.eat(&Tok::LBracket) {
            self.subscript_depth += 1;
            let e = self.expr();
            self.subscript_depth -= 1;
            subs.push(e?);
            self.expect(Tok::RBracket, "`]`")?;
        }
        Ok(subs)
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let span = self.advance().span;
        self.expect(Tok::LParen, "`(`")?;
        let cond = self.cond()?;
        self.expect(Tok::RParen, "`)`")?;
        let then_body = self.block_or_stmt()?;
        let else_body = if self.is_keyword("else") {
            self.advance();
            self.block_or_stmt()?
        } else {
            Vec::new()
        };
        Ok(Stmt { kind: StmtKind::If { cond, then_body, else_body }, span })
    }

    fn cond(&mut self) -> PResult<Cond> {
        self.pending.clear();
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Other(s) if s == "&&" || s == "||" => {
                return Err(self.error_here(format!("unsupported construct: logical operator `{s}`")))
            }
            other => return Err(self.error_here(format!("expected a comparison operator, found {}", other.describe()))),
        };
        self.advance();
        let rhs = self.expr()?;
        if let Some((_, _, span)) = self.pending.first() {
            return Err(Diagnostic::new(*span, "post-increment inside a condition is not supported"));
        }
        Ok(Cond { op, lhs, rhs })
    }

    fn for_loop(&mut self) -> PResult<Stmt> {
        let span = self.advance().span;
        self.expect(Tok::LParen, "`(`")?;
        self.pending.clear();
        let (var, _) = self.ident("loop index")?;
        self.expect(Tok::Assign, "`=` (loop index must be initialized in the header)")?;
        let lower = self.expr()?;
        self.expect(Tok::Semi, "`;`")?;
        let (cvar, cspan) = self.ident("loop condition")?;
        if cvar != var {
            return Err(Diagnostic::new(cspan, format!("loop condition must test the loop index `{var}`")));
        }
        let cmp = match self.advance().tok {
            Tok::Lt => LoopCmp::Lt,
            Tok::Le => LoopCmp::Le,
            _ => {
                return Err(Diagnostic::new(
                    cspan,
                    "unsupported construct: loop condition must be `<` or `<=` (non-unit stride or reversed loop)",
                ))
            }
        };
        let upper = self.expr()?;
        self.expect(Tok::Semi, "`;`")?;
        self.step(&var)?;
        self.expect(Tok::RParen, "`)`")?;
        if let Some((_, _, s)) = self.pending.first() {
            return Err(Diagnostic::new(*s, "post-increment inside a loop header is not supported"));
        }
        let body = self.block_or_stmt()?;
        Ok(Stmt { kind: StmtKind::For(ForLoop { id: LoopId(span.line), var, lower, upper, cmp, body }), span })
    }

    /// Accepts `i++`, `++i`, `i += 1`, `i = i + 1`; anything else is a non-unit stride.
    fn step(&mut self, var: &str) -> PResult<()> {
        let span = self.span();
        let non_unit = |what: &str| Diagnostic::new(span, format!("unsupported construct: non-unit stride ({what})"));
        let ok = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::PlusPlus, Tok::Ident(v)) if v == var => {
                self.pos += 2;
                true
            }
            (Tok::Ident(v), Tok::PlusPlus) if v == var => {
                self.pos += 2;
                true
            }
            (Tok::Ident(v), Tok::PlusAssign) if v == var => {
                self.pos += 2;
                let e = self.expr()?;
                if e.const_value() != Some(1) {
                    return Err(non_unit("step must be +1"));
                }
                true
            }
            (Tok::Ident(v), Tok::Assign) if v == var => {
                self.pos += 2;
                let e = self.expr()?;
                let unit = matches!(&e, Expr::Binary { op: BinOp::Add, lhs, rhs }
                    if (**lhs == Expr::Var(var.to_string()) && rhs.const_value() == Some(1))
                        || (**rhs == Expr::Var(var.to_string()) && lhs.const_value() == Some(1)));
                if !unit {
                    return Err(non_unit("step must be +1"));
                }
                true
            }
            (Tok::Ident(v), Tok::MinusMinus) | (Tok::MinusMinus, Tok::Ident(v)) if v == var => {
                return Err(non_unit("decrementing loop"));
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(non_unit(&format!("loop step must increment `{var}` by one")))
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.advance();
                    let rhs = self.unary()?;
                    lhs = Expr::binary(BinOp::Mul, lhs, rhs);
                }
                Tok::Other(s) if s == "/" || s == "%" => {
                    return Err(self.error_here(format!("unsupported construct: operator `{s}`")))
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.advance();
                let e = self.unary()?;
                Ok(match e {
                    Expr::Int(v) => Expr::Int(-v),
                    e => Expr::Neg(Box::new(e)),
                })
            }
            Tok::Star => Err(self.error_here("unsupported construct: pointer dereference")),
            Tok::Other(s) if s == "&" => Err(self.error_here("unsupported construct: address-of operator")),
            Tok::Other(s) if s == "!" => Err(self.error_here("unsupported construct: logical negation")),
            Tok::PlusPlus | Tok::MinusMinus => {
                Err(self.error_here("unsupported construct: pre-increment inside an expression"))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some((_, what)) = UNSUPPORTED_KEYWORDS.iter().find(|(kw, _)| *kw == name) {
                    return Err(self.error_here(format!("unsupported construct: {what}")));
                }
                self.advance();
                if self.peek() == &Tok::LParen {
                    return Err(Diagnostic::new(span, format!("unsupported construct: function call `{name}(...)`")));
                }
                if self.peek() == &Tok::LBracket {
                    let subs = self.subscripts()?;
                    if matches!(self.peek(), Tok::PlusPlus | Tok::MinusMinus) {
                        return Err(self.error_here("unsupported construct: post-increment of an array element"));
                    }
                    return Ok(Expr::Index { array: name, subs });
                }
                if matches!(self.peek(), Tok::PlusPlus | Tok::MinusMinus) {
                    let t = self.advance();
                    if self.subscript_depth == 0 {
                        return Err(Diagnostic::new(
                            t.span,
                            "post-increment is only supported inside subscripts or as a statement",
                        ));
                    }
                    let delta = if t.tok == Tok::PlusPlus { 1 } else { -1 };
                    self.pending.push((name.clone(), delta, span));
                }
                Ok(Expr::Var(name))
            }
            Tok::Other(s) if s == "." || s == "->" => Err(self.error_here("unsupported construct: member access")),
            other => Err(self.error_here(format!("expected an expression, found {}", other.describe()))),
        }
    }
}

fn lvalue_expr(lv: &LValue) -> Expr {
    match lv {
        LValue::Scalar(n) => Expr::Var(n.clone()),
        LValue::ArrayElem { array, subs } => Expr::Index { array: array.clone(), subs: subs.clone() },
    }
}

fn increment(name: &str, delta: i64, span: Span, origin: AssignOrigin) -> Stmt {
    let op = if delta >= 0 { BinOp::Add } else { BinOp::Sub };
    Stmt {
        kind: StmtKind::Assign {
            lhs: LValue::Scalar(name.to_string()),
            rhs: Expr::binary(op, Expr::var(name), Expr::Int(delta.abs())),
            origin,
        },
        span,
    }
}
