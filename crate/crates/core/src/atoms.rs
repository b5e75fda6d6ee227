//! Ground terms, atoms, and answer sets as printed by clingo.
//!
//! Covers the fragment clingo emits on model lines: symbolic constants,
//! integers (possibly negative), nested function terms, and quoted strings.
//! Printing an atom and reparsing it yields a structurally equal atom.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A ground term inside an atom argument list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// Symbolic constant, e.g. `table` or `sci_fi`.
    Symbol(String),
    Integer(i64),
    /// Compound term, e.g. `on(b1,table)`.
    Function(String, Vec<Term>),
    /// Double-quoted clingo string, stored unescaped.
    QuotedString(String),
}

/// A ground atom: predicate name plus ordered arguments.
///
/// A zero-arity atom prints as the bare predicate name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }
}

/// One answer set. Keeps clingo's printed order for display, but equality
/// is order-insensitive.
#[derive(Debug, Clone, Default)]
pub struct AtomSet {
    atoms: Vec<Atom>,
}

impl AtomSet {
    pub fn new(atoms: Vec<Atom>) -> Self {
        AtomSet { atoms }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Atom> {
        self.atoms.iter()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    fn sorted(&self) -> Vec<&Atom> {
        let mut v: Vec<&Atom> = self.atoms.iter().collect();
        v.sort();
        v
    }
}

impl PartialEq for AtomSet {
    fn eq(&self, other: &Self) -> bool {
        self.sorted() == other.sorted()
    }
}

impl Eq for AtomSet {}

impl FromIterator<Atom> for AtomSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        AtomSet {
            atoms: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Symbol(s) => f.write_str(s),
            Term::Integer(n) => write!(f, "{n}"),
            Term::Function(name, args) => {
                f.write_str(name)?;
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Term::QuotedString(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            f.write_str(&self.predicate)
        } else {
            write!(f, "{}", Term::Function(self.predicate.clone(), self.args.clone()))
        }
    }
}

impl fmt::Display for AtomSet {
    /// Space-separated, in stored (printed) order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Parse failure with the byte offset of the offending input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed atom at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Parser { input, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(c) if c.is_ascii_lowercase() => {}
            _ => return Err(self.err("expected a name starting with a lowercase letter")),
        }
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Ok(self.input[start..self.pos].to_string())
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            return Err(self.err("expected a digit"));
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        self.input[start..self.pos]
            .parse::<i64>()
            .map_err(|e| self.err(format!("integer out of range: {e}")))
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    other => {
                        return Err(self.err(format!("unsupported escape {other:?}")));
                    }
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some('"') => Ok(Term::QuotedString(self.quoted()?)),
            Some(c) if c == '-' || c.is_ascii_digit() => Ok(Term::Integer(self.integer()?)),
            Some(c) if c.is_ascii_lowercase() => {
                let name = self.name()?;
                if self.peek() == Some('(') {
                    let args = self.arg_list()?;
                    Ok(Term::Function(name, args))
                } else {
                    Ok(Term::Symbol(name))
                }
            }
            _ => Err(self.err("expected a term")),
        }
    }

    fn arg_list(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect('(')?;
        let mut args = vec![self.term()?];
        loop {
            match self.peek() {
                Some(',') => {
                    self.bump();
                    args.push(self.term()?);
                }
                Some(')') => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let predicate = self.name()?;
        let args = if self.peek() == Some('(') {
            self.arg_list()?
        } else {
            Vec::new()
        };
        Ok(Atom { predicate, args })
    }
}

/// Parse a single atom, requiring the whole input to be consumed.
pub fn parse_atom(input: &str) -> Result<Atom, ParseError> {
    let mut p = Parser::new(input.trim());
    let atom = p.atom()?;
    if p.pos != p.input.len() {
        return Err(p.err("trailing input after atom"));
    }
    Ok(atom)
}

/// Parse a whitespace-separated model line as printed by clingo.
///
/// An empty or all-whitespace line yields the empty answer set.
pub fn parse_answer_set(line: &str) -> Result<AtomSet, ParseError> {
    let mut p = Parser::new(line);
    let mut atoms = Vec::new();
    loop {
        p.skip_ws();
        if p.peek().is_none() {
            return Ok(AtomSet::new(atoms));
        }
        atoms.push(p.atom()?);
    }
}

impl FromStr for Atom {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_atom(s)
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_atom(&s).map_err(D::Error::custom)
    }
}

impl Serialize for AtomSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.atoms.iter())
    }
}

impl<'de> Deserialize<'de> for AtomSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let atoms = Vec::<Atom>::deserialize(deserializer)?;
        Ok(AtomSet::new(atoms))
    }
}
