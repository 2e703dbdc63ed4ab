//! Tokenizer for snippets. Produces indentation tokens the way an
//! off-side-rule language does; newlines inside brackets are ignored.

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Dec(f64),
    /// String literal body; `fstring` marks `{expr}` interpolation.
    Str { text: String, fstring: bool },
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const OPS2: [&str; 6] = ["==", "!=", ">=", "<=", "**", "//"];
const OPS1: &str = "+-*/%<>=()[],:.";

struct Lexer<'a> {
    src: &'a [char],
    i: usize,
    line: usize,
    col: usize,
    out: Vec<Token>,
    indents: Vec<usize>,
    depth: usize,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn peek(&self, n: usize) -> Option<char> {
        self.src.get(self.i + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src.get(self.i).copied()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, line: usize, col: usize) {
        self.out.push(Token { tok, line, col });
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError::syntax(line, col, msg)
    }

    /// Measures indentation at the start of a logical line and emits
    /// INDENT/DEDENT. Returns false when the line is blank or a comment.
    fn line_start(&mut self) -> Result<bool, ParseError> {
        let mut width = 0;
        while let Some(c) = self.peek(0) {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\r' | '\x0c' => {}
                _ => break,
            }
            self.bump();
        }
        match self.peek(0) {
            None => return Ok(false),
            Some('\n') => {
                self.bump();
                return Ok(false);
            }
            Some('#') => {
                while let Some(c) = self.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                if self.peek(0) == Some('\n') {
                    self.bump();
                }
                return Ok(false);
            }
            _ => {}
        }
        let top = *self.indents.last().unwrap();
        if width > top {
            self.indents.push(width);
            self.push(Tok::Indent, self.line, 1);
        } else if width < top {
            while width < *self.indents.last().unwrap() {
                self.indents.pop();
                self.push(Tok::Dedent, self.line, 1);
            }
            if width != *self.indents.last().unwrap() {
                return Err(ParseError::indentation(
                    self.line,
                    width + 1,
                    "unindent does not match any outer indentation level",
                ));
            }
        }
        Ok(true)
    }

    fn string(&mut self, fstring: bool) -> Result<(), ParseError> {
        let (line, col) = (self.line, self.col);
        let quote = self.bump().unwrap();
        let triple = self.peek(0) == Some(quote) && self.peek(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let mut text = String::new();
        loop {
            let Some(c) = self.peek(0) else {
                return Err(self.err(line, col, "unterminated string literal"));
            };
            if c == quote {
                if !triple {
                    self.bump();
                    break;
                }
                if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                    self.bump();
                    self.bump();
                    self.bump();
                    break;
                }
            }
            if c == '\n' && !triple {
                return Err(self.err(line, col, "unterminated string literal"));
            }
            if c == '\\' {
                self.bump();
                let Some(e) = self.bump() else {
                    return Err(self.err(line, col, "unterminated string literal"));
                };
                match e {
                    'n' => text.push('\n'),
                    't' => text.push('\t'),
                    '\\' => text.push('\\'),
                    '\'' => text.push('\''),
                    '"' => text.push('"'),
                    '\n' => {}
                    other => {
                        text.push('\\');
                        text.push(other);
                    }
                }
                continue;
            }
            text.push(c);
            self.bump();
        }
        self.push(Tok::Str { text, fstring }, line, col);
        Ok(())
    }

    fn number(&mut self) -> Result<(), ParseError> {
        let (line, col) = (self.line, self.col);
        let mut s = String::new();
        let mut dec = false;
        while let Some(c) = self.peek(0) {
            if c.is_ascii_digit() || c == '_' {
                if c != '_' {
                    s.push(c);
                }
            } else if c == '.' && !dec && self.peek(1).is_some_and(|d| d.is_ascii_digit()) {
                dec = true;
                s.push(c);
            } else {
                break;
            }
            self.bump();
        }
        let tok = if dec {
            Tok::Dec(s.parse().map_err(|_| self.err(line, col, "bad number"))?)
        } else {
            Tok::Int(s.parse().map_err(|_| self.err(line, col, "integer out of range"))?)
        };
        self.push(tok, line, col);
        Ok(())
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        loop {
            if self.at_line_start && self.depth == 0 {
                if self.peek(0).is_none() {
                    break;
                }
                if !self.line_start()? {
                    continue;
                }
                self.at_line_start = false;
            }
            let Some(c) = self.peek(0) else { break };
            let (line, col) = (self.line, self.col);
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(Tok::Newline, line, col);
                        self.at_line_start = true;
                    }
                }
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                '\\' if self.peek(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                }
                '"' | '\'' => self.string(false)?,
                'f' | 'F' if matches!(self.peek(1), Some('"' | '\'')) => {
                    self.bump();
                    self.string(true)?;
                    // report the f-string at the prefix position
                    if let Some(last) = self.out.last_mut() {
                        last.col = col;
                    }
                }
                c if c.is_ascii_digit() => self.number()?,
                c if c.is_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while let Some(c) = self.peek(0) {
                        if c.is_alphanumeric() || c == '_' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.push(Tok::Name(s), line, col);
                }
                _ => {
                    let two: String = [Some(c), self.peek(1)].iter().flatten().collect();
                    if let Some(op) = OPS2.iter().find(|o| **o == two) {
                        self.bump();
                        self.bump();
                        self.push(Tok::Op(op), line, col);
                        continue;
                    }
                    let Some(idx) = OPS1.find(c) else {
                        return Err(self.err(line, col, format!("unexpected character {c:?}")));
                    };
                    let op = &OPS1[idx..idx + c.len_utf8()];
                    self.bump();
                    match op {
                        "(" | "[" => self.depth += 1,
                        ")" | "]" => {
                            if self.depth == 0 {
                                return Err(self.err(line, col, format!("unmatched '{op}'")));
                            }
                            self.depth -= 1;
                        }
                        _ => {}
                    }
                    self.push(Tok::Op(op), line, col);
                }
            }
        }
        if self.depth > 0 {
            return Err(self.err(self.line, self.col, "unexpected end of input inside brackets"));
        }
        let (line, col) = (self.line, self.col);
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline)) {
            self.push(Tok::Newline, line, col);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, line, col);
        }
        self.push(Tok::Eof, line, col);
        Ok(self.out)
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    Lexer {
        src: &chars,
        i: 0,
        line: 1,
        col: 1,
        out: Vec::new(),
        indents: vec![0],
        depth: 0,
        at_line_start: true,
    }
    .run()
}

/// Tokenizes an f-string hole as if it were inside brackets.
pub fn tokenize_expr(text: &str, line: usize, col: usize) -> Result<Vec<Token>, ParseError> {
    let wrapped = format!("({text})");
    let mut toks = tokenize(&wrapped).map_err(|e| ParseError::syntax(line, col, e.message))?;
    // drop the wrapping parens and trailing NEWLINE/EOF, then re-append EOF
    toks.retain(|t| !matches!(t.tok, Tok::Newline | Tok::Eof));
    if toks.len() < 2 {
        return Err(ParseError::syntax(line, col, "empty expression in f-string"));
    }
    toks.remove(0);
    toks.pop();
    for t in &mut toks {
        t.line = line;
        t.col = col;
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(toks)
}
