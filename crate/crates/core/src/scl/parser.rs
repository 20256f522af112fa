use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::SyntaxError;

pub const KEYWORDS: &[&str] = &[
    "module", "instance", "bind", "ltl", "invariant", "in", "out", "signal", "var", "event",
    "process", "bool", "int", "enum", "if", "else", "while", "wait", "time", "change", "notify",
    "delta", "assert", "skip", "true", "false",
];

const LTL_OPERATORS: &[&str] = &["X", "F", "G", "U", "R"];

/// Parses SCL source text into a syntax tree.
pub fn parse(src: &str) -> Result<DesignAst, SyntaxError> {
    let mut p = Parser::new(lex(src)?);
    let ast = p.design()?;
    Ok(ast)
}

/// Parses a bare LTL formula (the body of an `ltl` block).
pub fn parse_ltl_text(src: &str) -> Result<LtlAst, SyntaxError> {
    let mut p = Parser::new(lex(src)?);
    let f = p.ltl()?;
    p.expect(Tok::Eof)?;
    Ok(f)
}

/// Parses a bare boolean expression (the body of an `invariant` block).
pub fn parse_expr_text(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(lex(src)?);
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, i: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let j = (self.i + n).min(self.toks.len() - 1);
        &self.toks[j].tok
    }

    fn span(&self) -> Span {
        Span(self.toks[self.i].pos)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, SyntaxError> {
        let t = &self.toks[self.i];
        Err(SyntaxError::Unexpected {
            pos: t.pos,
            found: t.tok.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if self.peek() == &tok {
            self.advance();
            Ok(())
        } else {
            self.error(&[&tok.to_string()])
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            self.error(&[&format!("`{kw}`")])
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn int(&mut self) -> Result<i64, SyntaxError> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Int(n) => {
                self.advance();
                Ok(if neg { -n } else { n })
            }
            _ => self.error(&["integer"]),
        }
    }

    fn design(&mut self) -> Result<DesignAst, SyntaxError> {
        let mut d = DesignAst::default();
        loop {
            let span = self.span();
            match self.peek() {
                Tok::Eof => return Ok(d),
                Tok::Ident(s) => match s.as_str() {
                    "module" => d.modules.push(self.module()?),
                    "instance" => {
                        self.advance();
                        let name = self.ident()?;
                        self.expect(Tok::Colon)?;
                        let module = self.ident()?;
                        self.expect(Tok::Semi)?;
                        d.instances.push(InstanceDecl { name, module, span });
                    }
                    "bind" => {
                        self.advance();
                        let from = self.port_ref()?;
                        self.expect(Tok::Arrow)?;
                        let to = self.port_ref()?;
                        self.expect(Tok::Semi)?;
                        d.binds.push(BindDecl { from, to, span });
                    }
                    "ltl" => {
                        self.advance();
                        let name = self.ident()?;
                        self.expect(Tok::LBrace)?;
                        let f = self.ltl()?;
                        self.expect(Tok::RBrace)?;
                        d.properties.push(PropertyDecl { name, kind: PropertyKind::Ltl(f), span });
                    }
                    "invariant" => {
                        self.advance();
                        let name = self.ident()?;
                        self.expect(Tok::LBrace)?;
                        let e = self.expr()?;
                        self.expect(Tok::RBrace)?;
                        d.properties.push(PropertyDecl {
                            name,
                            kind: PropertyKind::Invariant(e),
                            span,
                        });
                    }
                    _ => return self.error(&["`module`", "`instance`", "`bind`", "`ltl`", "`invariant`"]),
                },
                _ => return self.error(&["`module`", "`instance`", "`bind`", "`ltl`", "`invariant`"]),
            }
        }
    }

    fn port_ref(&mut self) -> Result<PortRef, SyntaxError> {
        let span = self.span();
        let instance = self.ident()?;
        self.expect(Tok::Dot)?;
        let port = self.ident()?;
        Ok(PortRef { instance, port, span })
    }

    fn module(&mut self) -> Result<ModuleDecl, SyntaxError> {
        let span = self.span();
        self.keyword("module")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut m = ModuleDecl {
            name,
            ports: vec![],
            signals: vec![],
            vars: vec![],
            events: vec![],
            processes: vec![],
            span,
        };
        loop {
            let span = self.span();
            let kw = match self.peek() {
                Tok::RBrace => {
                    self.advance();
                    return Ok(m);
                }
                Tok::Ident(s) => s.clone(),
                _ => return self.error(&MEMBER_START),
            };
            match kw.as_str() {
                "in" | "out" => {
                    self.advance();
                    let dir = if kw == "in" { Dir::In } else { Dir::Out };
                    let name = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let ty = self.ty()?;
                    self.expect(Tok::Semi)?;
                    m.ports.push(PortDecl { dir, name, ty, span });
                }
                "signal" | "var" => {
                    self.advance();
                    let name = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let ty = self.ty()?;
                    self.expect(Tok::Assign)?;
                    let init = self.literal()?;
                    self.expect(Tok::Semi)?;
                    let decl = StateDecl { name, ty, init, span };
                    if kw == "signal" {
                        m.signals.push(decl);
                    } else {
                        m.vars.push(decl);
                    }
                }
                "event" => {
                    self.advance();
                    let name = self.ident()?;
                    self.expect(Tok::Semi)?;
                    m.events.push(EventDecl { name, span });
                }
                "process" => {
                    self.advance();
                    let name = self.ident()?;
                    let body = self.block()?;
                    m.processes.push(ProcessDecl { name, body, span });
                }
                _ => return self.error(&MEMBER_START),
            }
        }
    }

    fn ty(&mut self) -> Result<TypeExpr, SyntaxError> {
        if self.is_kw("bool") {
            self.advance();
            Ok(TypeExpr::Bool)
        } else if self.is_kw("int") {
            self.advance();
            self.expect(Tok::LBracket)?;
            let lo = self.int()?;
            self.expect(Tok::DotDot)?;
            let hi = self.int()?;
            self.expect(Tok::RBracket)?;
            Ok(TypeExpr::Int { lo, hi })
        } else if self.is_kw("enum") {
            self.advance();
            self.expect(Tok::LBrace)?;
            let mut labels = vec![self.ident()?];
            while self.eat(&Tok::Comma) {
                labels.push(self.ident()?);
            }
            self.expect(Tok::RBrace)?;
            Ok(TypeExpr::Enum(labels))
        } else {
            self.error(&["`bool`", "`int`", "`enum`"])
        }
    }

    fn literal(&mut self) -> Result<Literal, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "true" => {
                self.advance();
                Ok(Literal::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.advance();
                Ok(Literal::Bool(false))
            }
            Tok::Int(_) | Tok::Minus => Ok(Literal::Int(self.int()?)),
            Tok::Ident(_) => Ok(Literal::Label(self.ident()?)),
            _ => self.error(&["literal"]),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let span = self.span();
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.error(&STMT_START),
        };
        let kind = match kw.as_str() {
            "if" => {
                self.advance();
                let cond = self.expr()?;
                let then_body = self.block()?;
                let else_body = if self.is_kw("else") {
                    self.advance();
                    Some(self.block()?)
                } else {
                    None
                };
                StmtKind::If { cond, then_body, else_body }
            }
            "while" => {
                self.advance();
                let cond = self.expr()?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            "wait" => {
                self.advance();
                self.expect(Tok::LParen)?;
                let w = if self.is_kw("time") {
                    self.advance();
                    WaitAst::Time(self.int()?)
                } else if self.is_kw("change") {
                    self.advance();
                    WaitAst::Change(self.ident()?)
                } else if self.is_kw("event") {
                    self.advance();
                    WaitAst::Event(self.ident()?)
                } else {
                    return self.error(&["`time`", "`change`", "`event`"]);
                };
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                StmtKind::Wait(w)
            }
            "notify" => {
                self.advance();
                self.expect(Tok::LParen)?;
                let event = self.ident()?;
                let when = if self.eat(&Tok::Comma) {
                    if self.is_kw("delta") {
                        self.advance();
                        NotifyAst::Delta
                    } else if self.is_kw("time") {
                        self.advance();
                        NotifyAst::Time(self.int()?)
                    } else {
                        return self.error(&["`delta`", "`time`"]);
                    }
                } else {
                    NotifyAst::Immediate
                };
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                StmtKind::Notify { event, when }
            }
            "assert" => {
                self.advance();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                StmtKind::Assert(e)
            }
            "skip" => {
                self.advance();
                self.expect(Tok::Semi)?;
                StmtKind::Skip
            }
            _ => {
                let target = match self.ident() {
                    Ok(t) => t,
                    Err(_) => return self.error(&STMT_START),
                };
                let write = match self.peek() {
                    Tok::Assign => false,
                    Tok::LtEq => true,
                    _ => return self.error(&["`=`", "`<=`"]),
                };
                self.advance();
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                if write {
                    StmtKind::Write { target, value }
                } else {
                    StmtKind::Assign { target, value }
                }
            }
        };
        Ok(Stmt { kind, span })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::LtEq => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::GtEq => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            _ => return None,
        })
    }

    /// Precedence climbing. Comparisons do not chain.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let span = self.span();
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
            if op.is_comparison() {
                if let Some(next) = self.binop() {
                    if next.is_comparison() && min_prec <= 3 {
                        return self.error(&["`)`", "`&&`", "`||`"]);
                    }
                }
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let span = self.span();
        if self.eat(&Tok::Bang) {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Not, Box::new(e)), span });
        }
        if self.eat(&Tok::Minus) {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Neg, Box::new(e)), span });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Int(n) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Int(n), span })
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                Ok(Expr { kind: ExprKind::Bool(s == "true"), span })
            }
            Tok::Ident(_) => {
                let name = self.name()?;
                Ok(Expr { kind: ExprKind::Name(name), span })
            }
            _ => self.error(&["expression"]),
        }
    }

    fn name(&mut self) -> Result<Vec<String>, SyntaxError> {
        let mut parts = vec![self.ident()?];
        if self.eat(&Tok::Dot) {
            parts.push(self.ident()?);
        }
        Ok(parts)
    }

    // LTL: `->` < `||` < `&&` < `U`/`R` < unary

    fn ltl(&mut self) -> Result<LtlAst, SyntaxError> {
        let lhs = self.ltl_or()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.ltl()?;
            return Ok(LtlAst::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn ltl_or(&mut self) -> Result<LtlAst, SyntaxError> {
        let mut lhs = self.ltl_and()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.ltl_and()?;
            lhs = LtlAst::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ltl_and(&mut self) -> Result<LtlAst, SyntaxError> {
        let mut lhs = self.ltl_until()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.ltl_until()?;
            lhs = LtlAst::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ltl_binary_op(&self) -> Option<&'static str> {
        match self.peek() {
            Tok::Ident(s) if s == "U" => Some("U"),
            Tok::Ident(s) if s == "R" => Some("R"),
            _ => None,
        }
    }

    fn ltl_until(&mut self) -> Result<LtlAst, SyntaxError> {
        let lhs = self.ltl_unary()?;
        if let Some(op) = self.ltl_binary_op() {
            self.advance();
            let rhs = self.ltl_until()?;
            return Ok(if op == "U" {
                LtlAst::Until(Box::new(lhs), Box::new(rhs))
            } else {
                LtlAst::Release(Box::new(lhs), Box::new(rhs))
            });
        }
        Ok(lhs)
    }

    fn ltl_unary(&mut self) -> Result<LtlAst, SyntaxError> {
        if self.eat(&Tok::Bang) {
            return Ok(LtlAst::Not(Box::new(self.ltl_unary()?)));
        }
        if let Tok::Ident(s) = self.peek() {
            if LTL_OPERATORS.contains(&s.as_str()) && self.peek_at(1) != &Tok::Dot {
                let op = s.clone();
                match op.as_str() {
                    "X" | "F" | "G" => {
                        self.advance();
                        let inner = Box::new(self.ltl_unary()?);
                        return Ok(match op.as_str() {
                            "X" => LtlAst::Next(inner),
                            "F" => LtlAst::Finally(inner),
                            _ => LtlAst::Globally(inner),
                        });
                    }
                    _ => return self.error(&["LTL operand"]),
                }
            }
        }
        self.ltl_primary()
    }

    fn ltl_primary(&mut self) -> Result<LtlAst, SyntaxError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                let f = self.ltl()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                Ok(LtlAst::Const(s == "true"))
            }
            Tok::Ident(_) => {
                let name = self.name()?;
                let op = match self.peek() {
                    Tok::EqEq => Some(CmpOp::Eq),
                    Tok::NotEq => Some(CmpOp::Ne),
                    Tok::Lt => Some(CmpOp::Lt),
                    Tok::LtEq => Some(CmpOp::Le),
                    Tok::Gt => Some(CmpOp::Gt),
                    Tok::GtEq => Some(CmpOp::Ge),
                    _ => None,
                };
                let cmp = match op {
                    Some(op) => {
                        self.advance();
                        Some((op, self.literal()?))
                    }
                    None => None,
                };
                Ok(LtlAst::Atom { name, cmp, span })
            }
            _ => self.error(&["LTL operand"]),
        }
    }
}

const MEMBER_START: [&str; 7] =
    ["`in`", "`out`", "`signal`", "`var`", "`event`", "`process`", "`}`"];
const STMT_START: [&str; 8] =
    ["identifier", "`if`", "`while`", "`wait`", "`notify`", "`assert`", "`skip`", "`}`"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_module_with_next_write() {
        let ast = parse("module M { signal s: bool = false; process P { s <= true; } }").unwrap();
        assert_eq!(ast.modules.len(), 1);
        let m = &ast.modules[0];
        assert_eq!(m.signals.len(), 1);
        assert_eq!(m.processes.len(), 1);
        assert_eq!(m.processes[0].body.len(), 1);
        assert!(matches!(m.processes[0].body[0].kind, StmtKind::Write { .. }));
    }

    #[test]
    fn empty_input_is_an_empty_design() {
        let ast = parse("").unwrap();
        assert_eq!(ast, DesignAst::default());
    }

    #[test]
    fn out_of_range_initialiser_is_syntactically_fine() {
        let ast = parse("module M { signal s: int[0..3] = 7; }").unwrap();
        assert_eq!(ast.modules[0].signals[0].init, Literal::Int(7));
    }

    #[test]
    fn syntax_error_carries_position_and_expectations() {
        let err = parse("module M {\n  signal s bool = false; }").unwrap_err();
        match err {
            SyntaxError::Unexpected { pos, expected, .. } => {
                assert_eq!(pos, Pos { line: 2, col: 12 });
                assert_eq!(expected, vec!["`:`".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ltl_until_is_right_associative() {
        let f = parse_ltl_text("p.a U p.b U p.c").unwrap();
        match f {
            LtlAst::Until(l, r) => {
                assert!(matches!(*l, LtlAst::Atom { .. }));
                assert!(matches!(*r, LtlAst::Until(..)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ltl_precedence_unary_then_until_then_and_then_or_then_implies() {
        let f = parse_ltl_text("a.x -> b.y || c.z && d.w U e.v").unwrap();
        let LtlAst::Implies(_, rhs) = f else { panic!() };
        let LtlAst::Or(_, rhs) = *rhs else { panic!() };
        let LtlAst::And(_, rhs) = *rhs else { panic!() };
        assert!(matches!(*rhs, LtlAst::Until(..)));
    }

    #[test]
    fn operator_letters_followed_by_dot_are_names() {
        let f = parse_ltl_text("G F.x").unwrap();
        let LtlAst::Globally(inner) = f else { panic!() };
        assert!(matches!(*inner, LtlAst::Atom { ref name, .. } if name == &vec!["F".to_string(), "x".to_string()]));
    }

    #[test]
    fn comparisons_do_not_chain() {
        assert!(parse_expr_text("a == b == c").is_err());
        assert!(parse_expr_text("(a == b) == c").is_ok());
    }
}
