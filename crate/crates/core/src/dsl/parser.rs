//! Recursive-descent parser for snippets. Host names are resolved here, so an
//! unknown host object, method or function is a parse error rather than a
//! runtime one.

use super::ast::*;
use super::lexer::{tokenize, tokenize_expr, Tok, Token};
use super::ParseError;

const KEYWORDS: [&str; 12] = [
    "if", "elif", "else", "for", "in", "and", "or", "not", "True", "False", "None", "pass",
];

/// Constructs that do not exist in the language.
const UNSUPPORTED: [&str; 20] = [
    "import", "from", "def", "class", "while", "return", "lambda", "with", "try", "except",
    "finally", "raise", "global", "nonlocal", "del", "yield", "async", "await", "assert", "is",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::syntax(line, col, msg)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn expect_op(&mut self, op: &str) -> Result<(), ParseError> {
        if self.is_op(op) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected '{op}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected '{kw}'")))
        }
    }

    fn check_unsupported(&self) -> Result<(), ParseError> {
        if let Tok::Name(n) = self.peek() {
            if UNSUPPORTED.contains(&n.as_str()) {
                return Err(self.error(format!("unsupported construct '{n}'")));
            }
        }
        Ok(())
    }

    fn variable_name(&mut self) -> Result<String, ParseError> {
        self.check_unsupported()?;
        match self.peek().clone() {
            Tok::Name(n) if HOST_OBJECTS.contains(&n.as_str()) || n == "retrieve" || n == "len" => {
                Err(ParseError::unknown_host(self.here(), format!("'{n}' is a reserved host name")))
            }
            Tok::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                self.advance();
                Ok(n)
            }
            _ => Err(self.error("expected a name")),
        }
    }

    fn script(&mut self) -> Result<Script, ParseError> {
        let mut statements = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Newline => {
                    self.advance();
                }
                Tok::Indent => {
                    let (line, col) = self.here();
                    return Err(ParseError::indentation(line, col, "unexpected indent"));
                }
                _ => statements.push(self.statement()?),
            }
        }
        Ok(Script { statements })
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        self.check_unsupported()?;
        let line = self.here().0;
        if self.is_kw("if") {
            self.advance();
            return self.if_rest(line);
        }
        if self.is_kw("for") {
            self.advance();
            let var = self.variable_name()?;
            self.expect_kw("in")?;
            let iter = self.expression()?;
            self.expect_op(":")?;
            let body = self.block()?;
            return Ok(Stmt {
                kind: StmtKind::For { var, iter, body },
                line,
            });
        }
        let stmt = self.simple()?;
        match self.peek() {
            Tok::Newline => {
                self.advance();
            }
            Tok::Eof | Tok::Dedent => {}
            _ => return Err(self.error("expected end of statement")),
        }
        Ok(stmt)
    }

    fn if_rest(&mut self, line: usize) -> Result<Stmt, ParseError> {
        let cond = self.expression()?;
        self.expect_op(":")?;
        let then = self.block()?;
        let otherwise = if self.is_kw("elif") {
            let l = self.here().0;
            self.advance();
            vec![self.if_rest(l)?]
        } else if self.is_kw("else") {
            self.advance();
            self.expect_op(":")?;
            self.block()?
        } else {
            Vec::new()
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then,
                otherwise,
            },
            line,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if !matches!(self.peek(), Tok::Newline) {
            // one simple statement on the header line
            let s = self.simple()?;
            match self.peek() {
                Tok::Newline => {
                    self.advance();
                }
                Tok::Eof | Tok::Dedent => {}
                _ => return Err(self.error("expected end of statement")),
            }
            return Ok(vec![s]);
        }
        self.advance();
        if !matches!(self.peek(), Tok::Indent) {
            let (line, col) = self.here();
            return Err(ParseError::indentation(line, col, "expected an indented block"));
        }
        self.advance();
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Tok::Dedent => {
                    self.advance();
                    break;
                }
                Tok::Eof => break,
                Tok::Newline => {
                    self.advance();
                }
                Tok::Indent => {
                    let (line, col) = self.here();
                    return Err(ParseError::indentation(line, col, "unexpected indent"));
                }
                _ => body.push(self.statement()?),
            }
        }
        Ok(body)
    }

    fn simple(&mut self) -> Result<Stmt, ParseError> {
        self.check_unsupported()?;
        let line = self.here().0;
        if self.is_kw("pass") {
            self.advance();
            return Ok(Stmt {
                kind: StmtKind::Pass,
                line,
            });
        }
        if matches!(self.peek(), Tok::Name(_)) && matches!(self.peek_at(1), Tok::Op("=")) {
            let name = self.variable_name()?;
            self.advance();
            let value = self.expression()?;
            return Ok(Stmt {
                kind: StmtKind::Assign(name, value),
                line,
            });
        }
        let e = self.expression()?;
        if self.is_op("=") {
            return Err(self.error("can only assign to a plain name"));
        }
        Ok(Stmt {
            kind: StmtKind::Expr(e),
            line,
        })
    }

    fn expression(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.is_kw("or") {
            self.advance();
            let right = self.and_expr()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.not_expr()?;
        while self.is_kw("and") {
            self.advance();
            let right = self.not_expr()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.is_kw("not") {
            self.advance();
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let left = self.sum()?;
        let op = match self.peek() {
            Tok::Op("==") => BinOp::Eq,
            Tok::Op("!=") => BinOp::Ne,
            Tok::Op("<") => BinOp::Lt,
            Tok::Op("<=") => BinOp::Le,
            Tok::Op(">") => BinOp::Gt,
            Tok::Op(">=") => BinOp::Ge,
            _ => return Ok(left),
        };
        self.advance();
        let right = self.sum()?;
        if matches!(self.peek(), Tok::Op("==" | "!=" | "<" | "<=" | ">" | ">=")) {
            return Err(self.error("chained comparisons are not supported"));
        }
        Ok(Expr::Binary(op, Box::new(left), Box::new(right)))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.term()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_op("-") {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.is_op("+") {
            self.advance();
            return self.unary();
        }
        let base = self.postfix()?;
        if self.is_op("**") {
            self.advance();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.is_op("[") {
            self.advance();
            let idx = self.expression()?;
            self.expect_op("]")?;
            e = Expr::Index(Box::new(e), Box::new(idx));
        }
        if self.is_op(".") {
            return Err(self.error("attribute access is only available on host objects"));
        }
        if self.is_op("(") {
            return Err(self.error("only host functions can be called"));
        }
        Ok(e)
    }

    fn call_args(&mut self, func: HostFn) -> Result<Expr, ParseError> {
        self.expect_op("(")?;
        let mut args = Vec::new();
        let mut kwargs: Vec<(String, Expr)> = Vec::new();
        while !self.is_op(")") {
            if let (Tok::Name(n), Tok::Op("=")) = (self.peek().clone(), self.peek_at(1).clone()) {
                self.advance();
                self.advance();
                if kwargs.iter().any(|(k, _)| *k == n) {
                    return Err(self.error(format!("duplicate keyword argument '{n}'")));
                }
                kwargs.push((n, self.expression()?));
            } else {
                if !kwargs.is_empty() {
                    return Err(self.error("positional argument follows keyword argument"));
                }
                args.push(self.expression()?);
            }
            if !self.is_op(",") {
                break;
            }
            self.advance();
        }
        self.expect_op(")")?;
        Ok(Expr::Call { func, args, kwargs })
    }

    fn strings(&mut self) -> Result<Expr, ParseError> {
        let mut parts: Vec<FPart> = Vec::new();
        let mut any_f = false;
        while let Tok::Str { text, fstring } = self.peek().clone() {
            let (line, col) = self.here();
            self.advance();
            if fstring {
                any_f = true;
                parts.extend(parse_fstring(&text, line, col)?);
            } else {
                parts.push(FPart::Text(text));
            }
        }
        // merge adjacent text parts
        let mut merged: Vec<FPart> = Vec::new();
        for p in parts {
            match (merged.last_mut(), p) {
                (Some(FPart::Text(a)), FPart::Text(b)) => a.push_str(&b),
                (_, p) => merged.push(p),
            }
        }
        if !any_f || merged.iter().all(|p| matches!(p, FPart::Text(_))) {
            let text = merged
                .into_iter()
                .map(|p| match p {
                    FPart::Text(t) => t,
                    FPart::Hole(_) => unreachable!(),
                })
                .collect();
            return Ok(Expr::Lit(Literal::Str(text)));
        }
        Ok(Expr::FStr(merged))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.check_unsupported()?;
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Lit(Literal::Int(i)))
            }
            Tok::Dec(d) => {
                self.advance();
                Ok(Expr::Lit(Literal::Dec(d)))
            }
            Tok::Str { .. } => self.strings(),
            Tok::Op("(") => {
                self.advance();
                let e = self.expression()?;
                self.expect_op(")")?;
                Ok(e)
            }
            Tok::Op("[") => {
                self.advance();
                let mut items = Vec::new();
                while !self.is_op("]") {
                    items.push(self.expression()?);
                    if !self.is_op(",") {
                        break;
                    }
                    self.advance();
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Name(n) => match n.as_str() {
                "True" => {
                    self.advance();
                    Ok(Expr::Lit(Literal::Bool(true)))
                }
                "False" => {
                    self.advance();
                    Ok(Expr::Lit(Literal::Bool(false)))
                }
                "None" => {
                    self.advance();
                    Ok(Expr::Lit(Literal::None))
                }
                "retrieve" | "len" => {
                    self.advance();
                    if !self.is_op("(") {
                        return Err(self.error(format!("'{n}' must be called")));
                    }
                    let f = if n == "retrieve" { HostFn::Retrieve } else { HostFn::Len };
                    self.call_args(f)
                }
                obj if HOST_OBJECTS.contains(&obj) => {
                    let here = self.here();
                    self.advance();
                    if !self.is_op(".") {
                        return Err(ParseError::unknown_host(
                            here,
                            format!("host object '{obj}' cannot be used as a value"),
                        ));
                    }
                    self.advance();
                    let attr = match self.advance() {
                        Tok::Name(a) => a,
                        _ => return Err(self.error("expected attribute name")),
                    };
                    if let Some(f) = resolve_method(obj, &attr) {
                        if !self.is_op("(") {
                            return Err(self.error(format!("'{obj}.{attr}' must be called")));
                        }
                        return self.call_args(f);
                    }
                    if let Some(a) = resolve_attr(obj, &attr) {
                        return Ok(Expr::Attr(a));
                    }
                    Err(ParseError::unknown_host(here, format!("unknown host name '{obj}.{attr}'")))
                }
                _ if KEYWORDS.contains(&n.as_str()) => Err(self.error(format!("unexpected '{n}'"))),
                _ => {
                    let here = self.here();
                    self.advance();
                    if self.is_op("(") {
                        return Err(ParseError::unknown_host(here, format!("unknown host function '{n}'")));
                    }
                    Ok(Expr::Name(n))
                }
            },
            Tok::Indent => Err(ParseError::indentation(self.here().0, self.here().1, "unexpected indent")),
            Tok::Eof => Err(self.error("unexpected end of input")),
            Tok::Newline => Err(self.error("unexpected end of line")),
            other => Err(self.error(format!("unexpected token {other:?}"))),
        }
    }
}

fn parse_fstring(text: &str, line: usize, col: usize) -> Result<Vec<FPart>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut parts = Vec::new();
    let mut buf = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '{' && chars.get(i + 1) == Some(&'{') {
            buf.push('{');
            i += 2;
            continue;
        }
        if c == '}' && chars.get(i + 1) == Some(&'}') {
            buf.push('}');
            i += 2;
            continue;
        }
        if c == '}' {
            return Err(ParseError::syntax(line, col, "single '}' in f-string"));
        }
        if c == '{' {
            let mut j = i + 1;
            let mut quote: Option<char> = None;
            while j < chars.len() {
                match (quote, chars[j]) {
                    (None, '\'' | '"') => quote = Some(chars[j]),
                    (Some(q), ch) if ch == q => quote = None,
                    (None, '}') => break,
                    _ => {}
                }
                j += 1;
            }
            if j >= chars.len() {
                return Err(ParseError::syntax(line, col, "unterminated '{' in f-string"));
            }
            let inner: String = chars[i + 1..j].iter().collect();
            if !buf.is_empty() {
                parts.push(FPart::Text(std::mem::take(&mut buf)));
            }
            let toks = tokenize_expr(&inner, line, col)?;
            let mut p = Parser { toks, pos: 0 };
            let e = p.expression()?;
            if !matches!(p.peek(), Tok::Eof) {
                return Err(ParseError::syntax(line, col, format!("invalid f-string hole {{{inner}}}")));
            }
            parts.push(FPart::Hole(e));
            i = j + 1;
            continue;
        }
        buf.push(c);
        i += 1;
    }
    if !buf.is_empty() {
        parts.push(FPart::Text(buf));
    }
    Ok(parts)
}

pub fn parse_script(text: &str) -> Result<Script, ParseError> {
    let toks = tokenize(text)?;
    Parser { toks, pos: 0 }.script()
}

#[cfg(test)]
mod tests {
    use super::super::ParseErrorKind;
    use super::*;

    #[test]
    fn single_call() {
        let s = parse_script("model.optimize()").unwrap();
        assert_eq!(s.statements.len(), 1);
        assert_eq!(s.host_calls(), vec![HostFn::ModelOptimize]);
    }

    #[test]
    fn if_else_arms() {
        let s = parse_script("if model.feasible:\n    plan.update()\nelse:\n    logger.log(\"no\")\n").unwrap();
        match &s.statements[0].kind {
            StmtKind::If { then, otherwise, .. } => {
                assert_eq!(then.len(), 1);
                assert_eq!(otherwise.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sandbox_rejections() {
        for (src, kind) in [
            ("import os", ParseErrorKind::Syntax),
            ("from os import path", ParseErrorKind::Syntax),
            ("open('x')", ParseErrorKind::UnknownHost),
            ("os.system('ls')", ParseErrorKind::Syntax),
            ("model.delete()", ParseErrorKind::UnknownHost),
            ("x = model", ParseErrorKind::UnknownHost),
            ("model = 3", ParseErrorKind::UnknownHost),
            ("def f():\n    pass\n", ParseErrorKind::Syntax),
            ("while True:\n    pass\n", ParseErrorKind::Syntax),
            ("x = y.__class__", ParseErrorKind::Syntax),
            ("model.optimize", ParseErrorKind::Syntax),
        ] {
            let err = parse_script(src).unwrap_err();
            assert_eq!(err.kind, kind, "{src}: {err}");
        }
    }

    #[test]
    fn fstring_holes() {
        let s = parse_script("logger.log(f\"Cost will be {model.objVal} ({{x}})\")").unwrap();
        let StmtKind::Expr(Expr::Call { args, .. }) = &s.statements[0].kind else {
            panic!()
        };
        assert_eq!(
            args[0],
            Expr::FStr(vec![
                FPart::Text("Cost will be ".into()),
                FPart::Hole(Expr::Attr(HostAttr::ModelObjVal)),
                FPart::Text(" ({x})".into()),
            ])
        );
    }

    #[test]
    fn implicit_concatenation() {
        let s = parse_script("logger.log(\"Sorry, impossible to \"\n    \"dock demand D.\")").unwrap();
        let StmtKind::Expr(Expr::Call { args, .. }) = &s.statements[0].kind else {
            panic!()
        };
        assert_eq!(args[0], Expr::Lit(Literal::Str("Sorry, impossible to dock demand D.".into())));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_script("x = 1\ny = (2 +\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        let err = parse_script("if x:\nlogger.log(1)\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Indentation);
        assert_eq!(err.line, 2);
        let err = parse_script("x = 1\n  y = 2\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Indentation);
    }
}
