//! Recursive-descent parser for the query subset:
//!
//! ```text
//! query     := SELECT item ("," item)* FROM ident [WHERE cond (AND cond)*] [";"]
//! item      := agg "(" (ident | "*") ")" | ident | "*"
//! cond      := operand op operand
//! operand   := ident | literal | NOW "(" ")" [("-" | "+") interval]
//! interval  := INTERVAL ("'" int unit "'" | int unit)
//! ```
//!
//! Keywords are case-insensitive.

use super::ast::*;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Dec(f64),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at token {token} (offset {offset}): {message}")]
pub struct SyntaxError {
    /// 1-based token index; one past the last token at end of input.
    pub token: usize,
    pub offset: usize,
    pub message: String,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let bytes: Vec<char> = text.chars().collect();
    let mut offsets = Vec::with_capacity(bytes.len() + 1);
    let mut acc = 0;
    for c in &bytes {
        offsets.push(acc);
        acc += c.len_utf8();
    }
    offsets.push(acc);

    let mut out = Vec::new();
    let mut i = 0;
    let err = |out: &Vec<Spanned>, at: usize, msg: &str| SyntaxError {
        token: out.len() + 1,
        offset: at,
        message: msg.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = offsets[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == '_') {
                j += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(bytes[i..j].iter().collect()),
                offset: start,
            });
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let mut is_dec = false;
            if j < bytes.len() && bytes[j] == '.' && j + 1 < bytes.len() && bytes[j + 1].is_ascii_digit() {
                is_dec = true;
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
            let s: String = bytes[i..j].iter().collect();
            let tok = if is_dec {
                Tok::Dec(s.parse().map_err(|_| err(&out, start, "bad number"))?)
            } else {
                Tok::Int(s.parse().map_err(|_| err(&out, start, "integer out of range"))?)
            };
            out.push(Spanned { tok, offset: start });
            i = j;
            continue;
        }
        if c == '\'' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                if j >= bytes.len() {
                    return Err(err(&out, start, "unterminated string literal"));
                }
                if bytes[j] == '\'' {
                    if j + 1 < bytes.len() && bytes[j + 1] == '\'' {
                        s.push('\'');
                        j += 2;
                        continue;
                    }
                    break;
                }
                s.push(bytes[j]);
                j += 1;
            }
            out.push(Spanned {
                tok: Tok::Str(s),
                offset: start,
            });
            i = j + 1;
            continue;
        }
        let two: String = bytes[i..(i + 2).min(bytes.len())].iter().collect();
        let sym = match two.as_str() {
            "!=" => Some("!="),
            "<>" => Some("!="),
            ">=" => Some(">="),
            "<=" => Some("<="),
            _ => None,
        };
        if let Some(s) = sym {
            out.push(Spanned {
                tok: Tok::Sym(s),
                offset: start,
            });
            i += 2;
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            ',' => ",",
            '*' => "*",
            ';' => ";",
            '=' => "=",
            '>' => ">",
            '<' => "<",
            '-' => "-",
            '+' => "+",
            _ => return Err(err(&out, start, &format!("unexpected character {c:?}"))),
        };
        out.push(Spanned {
            tok: Tok::Sym(sym),
            offset: start,
        });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            token: self.pos + 1,
            offset: self.toks.get(self.pos).map_or(self.end, |t| t.offset),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|t| &t.tok)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}")))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{s}'")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_reserved(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn query(&mut self) -> Result<Query, SyntaxError> {
        self.expect_kw("SELECT")?;
        let mut items = vec![self.item()?];
        while self.is_sym(",") {
            self.pos += 1;
            items.push(self.item()?);
        }
        self.expect_kw("FROM")?;
        let table = self.ident("table name")?;
        let mut conditions = Vec::new();
        if self.is_kw("WHERE") {
            self.pos += 1;
            conditions.push(self.condition()?);
            while self.is_kw("AND") {
                self.pos += 1;
                conditions.push(self.condition()?);
            }
        }
        if self.is_sym(";") {
            self.pos += 1;
        }
        if self.pos < self.toks.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(Query {
            items,
            table,
            conditions,
        })
    }

    fn item(&mut self) -> Result<SelectItem, SyntaxError> {
        if self.is_sym("*") {
            self.pos += 1;
            return Ok(SelectItem {
                aggregate: None,
                target: SelectTarget::Star,
            });
        }
        let agg = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Ident(name)), Some(Tok::Sym("("))) => match Aggregate::from_name(name) {
                Some(a) => Some(a),
                None => return Err(self.error(format!("unknown aggregate {name}"))),
            },
            _ => None,
        };
        match agg {
            Some(aggregate) => {
                self.pos += 2;
                let target = if self.is_sym("*") {
                    self.pos += 1;
                    SelectTarget::Star
                } else {
                    SelectTarget::Column(self.ident("column name")?)
                };
                if target == SelectTarget::Star && aggregate != Aggregate::Count {
                    return Err(self.error("only COUNT accepts *"));
                }
                self.expect_sym(")")?;
                Ok(SelectItem {
                    aggregate: Some(aggregate),
                    target,
                })
            }
            None => Ok(SelectItem {
                aggregate: None,
                target: SelectTarget::Column(self.ident("column name")?),
            }),
        }
    }

    fn condition(&mut self) -> Result<Condition, SyntaxError> {
        let left = self.operand()?;
        let op = match self.peek() {
            Some(Tok::Sym("=")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            _ => return Err(self.error("expected comparison operator")),
        };
        self.pos += 1;
        let right = self.operand()?;
        Ok(Condition { left, op, right })
    }

    fn operand(&mut self) -> Result<Operand, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("NOW") => {
                self.pos += 1;
                self.expect_sym("(")?;
                self.expect_sym(")")?;
                let sign = if self.is_sym("-") {
                    -1
                } else if self.is_sym("+") {
                    1
                } else {
                    return Ok(Operand::Now { offset: None });
                };
                self.pos += 1;
                let iv = self.interval()?;
                Ok(Operand::Now {
                    offset: Some((sign, iv)),
                })
            }
            Some(Tok::Ident(_)) => Ok(Operand::Column(self.ident("column name")?)),
            Some(Tok::Int(i)) => {
                self.pos += 1;
                Ok(Operand::Literal(Literal::Int(i)))
            }
            Some(Tok::Dec(d)) => {
                self.pos += 1;
                Ok(Operand::Literal(Literal::Dec(d)))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Operand::Literal(Literal::Str(s)))
            }
            Some(Tok::Sym("-")) => {
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Tok::Int(i)) => {
                        self.pos += 1;
                        Ok(Operand::Literal(Literal::Int(-i)))
                    }
                    Some(Tok::Dec(d)) => {
                        self.pos += 1;
                        Ok(Operand::Literal(Literal::Dec(-d)))
                    }
                    _ => Err(self.error("expected number after '-'")),
                }
            }
            _ => Err(self.error("expected column, literal or NOW()")),
        }
    }

    fn interval(&mut self) -> Result<Interval, SyntaxError> {
        self.expect_kw("INTERVAL")?;
        match self.peek().cloned() {
            Some(Tok::Str(s)) => {
                let parsed = parse_interval_text(&s).ok_or_else(|| {
                    self.error(format!("malformed interval '{s}'"))
                })?;
                self.pos += 1;
                Ok(parsed)
            }
            Some(Tok::Int(n)) => {
                self.pos += 1;
                let unit = match self.peek() {
                    Some(Tok::Ident(u)) => unit_from_name(u),
                    _ => None,
                }
                .ok_or_else(|| self.error("expected interval unit"))?;
                self.pos += 1;
                Ok(Interval { amount: n, unit })
            }
            _ => Err(self.error("expected interval amount")),
        }
    }
}

fn unit_from_name(s: &str) -> Option<IntervalUnit> {
    match s.to_ascii_lowercase().as_str() {
        "day" | "days" => Some(IntervalUnit::Day),
        "week" | "weeks" => Some(IntervalUnit::Week),
        _ => None,
    }
}

fn parse_interval_text(s: &str) -> Option<Interval> {
    let mut parts = s.split_whitespace();
    let amount: i64 = parts.next()?.parse().ok()?;
    let unit = unit_from_name(parts.next()?)?;
    if parts.next().is_some() {
        return None;
    }
    Some(Interval { amount, unit })
}

fn is_reserved(s: &str) -> bool {
    ["SELECT", "FROM", "WHERE", "AND", "INTERVAL", "NOW"]
        .iter()
        .any(|k| s.eq_ignore_ascii_case(k))
}

pub fn parse_query(text: &str) -> Result<Query, SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    p.query()
}
