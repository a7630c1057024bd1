//! Parser for the rule and fact files.
//!
//! ```text
//! rule    := [label ":"] body "=>" head "."
//! body    := literal ("&" literal)*
//! head    := literal ("," literal)*
//! literal := atom "(" term ("," term)* ")"
//! term    := atom | Variable | number | "quoted literal"
//! ```
//!
//! `%` starts a comment that runs to the end of the line. Unlabelled rules
//! are named `rule<N>` by position.

use super::{Const, EngineError, Fact, FactStore, Literal, Rule, RuleBase, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Amp,
    Arrow,
    Dot,
    Colon,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> EngineError {
    EngineError::Syntax { line, column, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Spanned>, EngineError> {
    let mut out = Vec::new();
    let mut anon = 0usize;
    for (li, line) in text.lines().enumerate() {
        let line_no = li + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: line_no, column });
            match c {
                '%' => break,
                c if c.is_whitespace() => i += 1,
                '(' => {
                    push(&mut out, Tok::LParen);
                    i += 1;
                }
                ')' => {
                    push(&mut out, Tok::RParen);
                    i += 1;
                }
                ',' => {
                    push(&mut out, Tok::Comma);
                    i += 1;
                }
                '&' => {
                    push(&mut out, Tok::Amp);
                    i += 1;
                }
                ':' => {
                    push(&mut out, Tok::Colon);
                    i += 1;
                }
                '=' if chars.get(i + 1) == Some(&'>') => {
                    push(&mut out, Tok::Arrow);
                    i += 2;
                }
                '.' if !chars.get(i + 1).is_some_and(char::is_ascii_digit) => {
                    push(&mut out, Tok::Dot);
                    i += 1;
                }
                '"' => {
                    let mut s = String::new();
                    i += 1;
                    let mut closed = false;
                    while i < chars.len() {
                        match chars[i] {
                            '"' => {
                                closed = true;
                                i += 1;
                                break;
                            }
                            '\\' if i + 1 < chars.len() => {
                                s.push(match chars[i + 1] {
                                    'n' => '\n',
                                    't' => '\t',
                                    other => other,
                                });
                                i += 2;
                            }
                            ch => {
                                s.push(ch);
                                i += 1;
                            }
                        }
                    }
                    if !closed {
                        return Err(syntax(line_no, column, "unterminated string literal"));
                    }
                    push(&mut out, Tok::Str(s));
                }
                c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) => {
                    let start = i;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                        i += 1;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                    push(&mut out, Tok::Number(chars[start..i].iter().collect()));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    let tok = if word == "_" {
                        anon += 1;
                        Tok::Var(format!("_G{anon}"))
                    } else if c.is_ascii_lowercase() {
                        Tok::Atom(word)
                    } else {
                        Tok::Var(word)
                    };
                    push(&mut out, tok);
                }
                other => return Err(syntax(line_no, column, format!("unexpected character {other:?}"))),
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    last: (usize, usize),
}

impl Parser {
    fn new(toks: Vec<Spanned>) -> Self {
        let last = toks.last().map(|t| (t.line, t.column + 1)).unwrap_or((1, 1));
        Parser { toks, pos: 0, last }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.column)).unwrap_or(self.last)
    }

    fn err(&self, message: impl Into<String>) -> EngineError {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), EngineError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected {what}, found {t:?}"))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn term(&mut self) -> Result<Term, EngineError> {
        let (line, column) = self.here();
        match self.next() {
            Some(Tok::Atom(a)) => Ok(Term::Const(Const::Atom(a))),
            Some(Tok::Var(v)) => Ok(Term::Var(v)),
            Some(Tok::Number(n)) => Ok(Term::Const(Const::Number(n))),
            Some(Tok::Str(s)) => Ok(Term::Const(Const::Str(s))),
            other => Err(syntax(line, column, format!("expected a term, found {other:?}"))),
        }
    }

    fn literal(&mut self) -> Result<Literal, EngineError> {
        let predicate = match self.peek() {
            Some(Tok::Atom(a)) => a.clone(),
            Some(t) => return Err(self.err(format!("expected a predicate name, found {t:?}"))),
            None => return Err(self.err("expected a predicate name, found end of input")),
        };
        self.pos += 1;
        self.expect(Tok::LParen, "'('")?;
        let mut args = vec![self.term()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(Literal { predicate, args })
    }

    fn rule(&mut self, index: usize) -> Result<Rule, EngineError> {
        let line = self.here().0;
        let mut id = format!("rule{index}");
        if let (Some(Tok::Atom(label)), Some(Tok::Colon)) = (self.peek().cloned(), self.toks.get(self.pos + 1).map(|s| &s.tok)) {
            id = label;
            self.pos += 2;
        }
        let mut body = vec![self.literal()?];
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            body.push(self.literal()?);
        }
        self.expect(Tok::Arrow, "'=>' or '&'")?;
        let mut head = vec![self.literal()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            head.push(self.literal()?);
        }
        self.expect(Tok::Dot, "'.' or ','")?;
        let rule = Rule { id, body, head, line };
        rule.check_safe()?;
        Ok(rule)
    }
}

/// Parse a rule file. Safety and per-predicate arity are checked here.
pub fn parse_rules(text: &str) -> Result<RuleBase, EngineError> {
    let mut p = Parser::new(lex(text)?);
    let mut rules: Vec<Rule> = Vec::new();
    while p.peek().is_some() {
        let r = p.rule(rules.len() + 1)?;
        if rules.iter().any(|o| o.id == r.id) {
            return Err(syntax(r.line, 1, format!("duplicate rule label {}", r.id)));
        }
        rules.push(r);
    }
    let rb = RuleBase::new(rules);
    rb.check_arities()?;
    Ok(rb)
}

fn ground(lit: Literal, p: &Parser) -> Result<Fact, EngineError> {
    let args = lit
        .args
        .into_iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c),
            Term::Var(v) => Err(p.err(format!("facts must be ground, found variable {v}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Fact { predicate: lit.predicate, args })
}

/// Parse one ground literal; a trailing `.` is optional.
pub fn parse_fact(text: &str) -> Result<Fact, EngineError> {
    let mut p = Parser::new(lex(text)?);
    let lit = p.literal()?;
    let fact = ground(lit, &p)?;
    if p.peek() == Some(&Tok::Dot) {
        p.pos += 1;
    }
    if p.peek().is_some() {
        return Err(p.err("unexpected input after fact"));
    }
    Ok(fact)
}

/// Parse a fact file: ground literals each terminated by `.`.
pub fn parse_facts(text: &str) -> Result<FactStore, EngineError> {
    let mut p = Parser::new(lex(text)?);
    let mut store = FactStore::new();
    while p.peek().is_some() {
        let lit = p.literal()?;
        let fact = ground(lit, &p)?;
        p.expect(Tok::Dot, "'.'")?;
        store.insert(fact)?;
    }
    Ok(store)
}
