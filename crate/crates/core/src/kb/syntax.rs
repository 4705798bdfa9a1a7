//! Text form of constraints: `var=value`, `!c`, `(c & c)`, `(c | c)`,
//! `true`, `false`.
//!
//! Printing is canonical and parsing inverts it exactly, including the
//! degenerate `(&)`, `(c &)` forms for empty and single-element lists.

use thiserror::Error;

use super::{Constraint, Schema};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

pub(crate) struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Cursor { text, pos: 0 }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    pub(crate) fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    pub(crate) fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    /// Keyword followed by a non-identifier character.
    pub(crate) fn eat_keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        if rest.starts_with(word) && !rest[word.len()..].starts_with(is_ident_char) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    pub(crate) fn ident(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest.find(|c: char| !is_ident_char(c)).unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("expected identifier"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    pub(crate) fn finish(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.pos == self.text.len() {
            Ok(())
        } else {
            Err(self.error("trailing input"))
        }
    }

    pub(crate) fn save(&self) -> usize {
        self.pos
    }

    pub(crate) fn restore(&mut self, pos: usize) {
        self.pos = pos;
    }
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

/// Parses a parenthesized n-ary list after the opening `(` has been eaten.
/// A single item without an operator is a plain grouping.
pub(crate) fn parse_list<T>(
    cur: &mut Cursor<'_>,
    mut item: impl FnMut(&mut Cursor<'_>) -> Result<T, ParseError>,
) -> Result<ListForm<T>, ParseError> {
    for (tok, op) in [("&", ListOp::And), ("|", ListOp::Or)] {
        let save = cur.save();
        if cur.eat(tok) {
            if cur.eat(")") {
                return Ok(ListForm::List(op, Vec::new()));
            }
            cur.restore(save);
        }
    }
    let first = item(cur)?;
    if cur.eat(")") {
        return Ok(ListForm::Group(first));
    }
    let op = if cur.eat("&") {
        ListOp::And
    } else if cur.eat("|") {
        ListOp::Or
    } else {
        return Err(cur.error("expected `&`, `|` or `)`"));
    };
    let tok = op.token();
    let mut items = vec![first];
    if cur.eat(")") {
        return Ok(ListForm::List(op, items));
    }
    loop {
        items.push(item(cur)?);
        if cur.eat(")") {
            return Ok(ListForm::List(op, items));
        }
        if !cur.eat(tok) {
            return Err(cur.error(format!("expected `{tok}` or `)` (mixed operators need parentheses)")));
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum ListOp {
    And,
    Or,
}

impl ListOp {
    fn token(self) -> &'static str {
        match self {
            ListOp::And => "&",
            ListOp::Or => "|",
        }
    }
}

pub(crate) enum ListForm<T> {
    Group(T),
    List(ListOp, Vec<T>),
}

pub(crate) fn render_list(out: &mut String, op: &str, items: &[impl Fn(&mut String)]) {
    out.push('(');
    match items.len() {
        0 => out.push_str(op),
        1 => {
            items[0](out);
            out.push(' ');
            out.push_str(op);
        }
        _ => {
            for (i, f) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                    out.push_str(op);
                    out.push(' ');
                }
                f(out);
            }
        }
    }
    out.push(')');
}

pub(crate) fn parse_constraint_at(schema: &Schema, cur: &mut Cursor<'_>) -> Result<Constraint, ParseError> {
    if cur.eat_keyword("true") {
        return Ok(Constraint::Top);
    }
    if cur.eat_keyword("false") {
        return Ok(Constraint::Bottom);
    }
    if cur.eat("!") {
        return Ok(Constraint::not(parse_constraint_at(schema, cur)?));
    }
    if cur.eat("(") {
        return Ok(match parse_list(cur, |c| parse_constraint_at(schema, c))? {
            ListForm::Group(c) => c,
            ListForm::List(ListOp::And, cs) => Constraint::And(cs),
            ListForm::List(ListOp::Or, cs) => Constraint::Or(cs),
        });
    }
    let start = cur.save();
    let var = cur.ident()?;
    cur.expect("=")?;
    let value = cur.ident()?;
    let Some(id) = schema.var(var) else {
        cur.restore(start);
        return Err(cur.error(format!("undeclared variable `{var}`")));
    };
    let Some(val) = schema.value_index(id, value) else {
        cur.restore(start);
        return Err(cur.error(format!("`{value}` is not in the domain of `{var}`")));
    };
    Ok(Constraint::Assign(id, val))
}

pub(crate) fn parse_constraint(schema: &Schema, text: &str) -> Result<Constraint, ParseError> {
    let mut cur = Cursor::new(text);
    let c = parse_constraint_at(schema, &mut cur)?;
    cur.finish()?;
    Ok(c)
}

pub(crate) fn write_constraint(schema: &Schema, c: &Constraint, out: &mut String) {
    match c {
        Constraint::Top => out.push_str("true"),
        Constraint::Bottom => out.push_str("false"),
        Constraint::Assign(v, val) => {
            let decl = schema.decl(*v);
            out.push_str(&decl.name);
            out.push('=');
            out.push_str(&decl.domain[*val as usize]);
        }
        Constraint::Not(inner) => {
            out.push('!');
            if let Constraint::Assign(..) = **inner {
                out.push('(');
                write_constraint(schema, inner, out);
                out.push(')');
            } else {
                write_constraint(schema, inner, out);
            }
        }
        Constraint::And(cs) | Constraint::Or(cs) => {
            let op = if matches!(c, Constraint::And(_)) { "&" } else { "|" };
            let items: Vec<_> = cs
                .iter()
                .map(|c| move |o: &mut String| write_constraint(schema, c, o))
                .collect();
            render_list(out, op, &items);
        }
    }
}

pub(crate) fn render_constraint(schema: &Schema, c: &Constraint) -> String {
    let mut out = String::new();
    write_constraint(schema, c, &mut out);
    out
}
