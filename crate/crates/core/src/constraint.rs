//! Conjunctive constraints over marking features.
//!
//! ```text
//! expr    := atom ("and" atom)*
//! atom    := feature op const
//! feature := kind "(" place ["," attr] ["," agg] ")" | "ratio" "(" feature "," feature ")"
//! op      := "<=" | "<" | ">=" | ">" | "=="
//! const   := number | "true" | "false"
//! ```
//!
//! Keywords are case-insensitive. Identifiers may contain letters, digits and
//! `_ . -`; anything else must be double-quoted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Marking, Net, Token};
use crate::value::{AttrType, Time};

/// Value of `timeuntilnext` for a place without pending tokens.
pub const TIME_SENTINEL: f64 = 1e9;
/// Floor applied to ratio denominators.
pub const RATIO_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    Max,
    Min,
}

impl fmt::Display for Agg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Agg::Max => "max",
            Agg::Min => "min",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttrRef {
    pub place: String,
    pub attr: String,
    pub agg: Agg,
}

impl AttrRef {
    pub fn new(place: impl Into<String>, attr: impl Into<String>, agg: Agg) -> Self {
        AttrRef {
            place: place.into(),
            attr: attr.into(),
            agg,
        }
    }

    /// Tokens carrying a numeric reading of the attribute, paired with it.
    fn readings<'a>(&'a self, m: &'a Marking) -> impl Iterator<Item = (&'a Token, f64)> + 'a {
        m.tokens(&self.place)
            .iter()
            .filter_map(|t| t.attrs.get(&self.attr).and_then(|v| v.as_number()).map(|x| (t, x)))
    }

    fn extremum(&self, m: &Marking) -> Option<f64> {
        let it = self.readings(m).map(|(_, x)| x);
        match self.agg {
            Agg::Max => it.max_by(f64::total_cmp),
            Agg::Min => it.min_by(f64::total_cmp),
        }
    }

    /// Extremum over all tokens (enabled and pending); 0 when none qualifies.
    pub fn value(&self, m: &Marking) -> f64 {
        self.extremum(m).unwrap_or(0.0)
    }

    /// Whether a token attaining the extremum is time-enabled at `now`.
    pub fn enabled(&self, m: &Marking, now: Time) -> bool {
        match self.extremum(m) {
            Some(best) => self.readings(m).any(|(t, x)| x == best && t.is_enabled(now)),
            None => false,
        }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", Ident(&self.place), Ident(&self.attr), self.agg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    AttrVal(AttrRef),
    AttrEnabled(AttrRef),
    NrTokens(String),
    NrTokensEnabled(String),
    TimeUntilNext(String),
    Ratio(AttrRef, AttrRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Num(f64),
}

impl Scalar {
    pub fn as_f64(self) -> f64 {
        match self {
            Scalar::Num(x) => x,
            Scalar::Bool(b) => f64::from(u8::from(b)),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Num(x) => write!(f, "{x}"),
        }
    }
}

impl Feature {
    pub fn is_boolean(&self) -> bool {
        matches!(self, Feature::AttrEnabled(_))
    }

    pub fn eval(&self, m: &Marking, now: Time) -> Scalar {
        match self {
            Feature::AttrVal(r) => Scalar::Num(r.value(m)),
            Feature::AttrEnabled(r) => Scalar::Bool(r.enabled(m, now)),
            Feature::NrTokens(p) => Scalar::Num(m.tokens(p).len() as f64),
            Feature::NrTokensEnabled(p) => Scalar::Num(m.enabled(p, now).count() as f64),
            Feature::TimeUntilNext(p) => Scalar::Num(
                m.tokens(p)
                    .iter()
                    .filter(|t| t.available_at > now)
                    .map(|t| t.available_at - now)
                    .min_by(f64::total_cmp)
                    .unwrap_or(TIME_SENTINEL),
            ),
            Feature::Ratio(num, den) => Scalar::Num(num.value(m) / den.value(m).max(RATIO_EPSILON)),
        }
    }

    /// Places the feature reads.
    pub fn places(&self) -> Vec<&str> {
        match self {
            Feature::AttrVal(r) | Feature::AttrEnabled(r) => vec![&r.place],
            Feature::NrTokens(p) | Feature::NrTokensEnabled(p) | Feature::TimeUntilNext(p) => vec![p],
            Feature::Ratio(a, b) => vec![&a.place, &b.place],
        }
    }

    pub fn resolve(&self, net: &Net) -> Result<()> {
        let attr_ok = |r: &AttrRef| -> Result<()> {
            let place = net
                .place(&r.place)
                .ok_or_else(|| Error::Unresolved(format!("place `{}`", r.place)))?;
            match place.attr_type(&r.attr) {
                Some(AttrType::Number | AttrType::Boolean) => Ok(()),
                Some(AttrType::Text) => Err(Error::Unresolved(format!(
                    "attribute `{}` of `{}` is text, not numeric",
                    r.attr, r.place
                ))),
                None => Err(Error::Unresolved(format!("attribute `{}` of place `{}`", r.attr, r.place))),
            }
        };
        match self {
            Feature::AttrVal(r) | Feature::AttrEnabled(r) => attr_ok(r),
            Feature::Ratio(a, b) => attr_ok(a).and_then(|_| attr_ok(b)),
            Feature::NrTokens(p) | Feature::NrTokensEnabled(p) | Feature::TimeUntilNext(p) => net
                .place(p)
                .map(|_| ())
                .ok_or_else(|| Error::Unresolved(format!("place `{p}`"))),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::AttrVal(r) => write!(f, "attrval({r})"),
            Feature::AttrEnabled(r) => write!(f, "attrenabled({r})"),
            Feature::NrTokens(p) => write!(f, "nrtokens({})", Ident(p)),
            Feature::NrTokensEnabled(p) => write!(f, "nrtokensenabled({})", Ident(p)),
            Feature::TimeUntilNext(p) => write!(f, "timeuntilnext({})", Ident(p)),
            Feature::Ratio(a, b) => write!(f, "ratio(attrval({a}), attrval({b}))"),
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Feature> {
        let mut p = Parser::new(s);
        let f = p.feature()?;
        p.end()?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "==")]
    Eq,
}

impl Op {
    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Op::Le => lhs <= rhs,
            Op::Lt => lhs < rhs,
            Op::Ge => lhs >= rhs,
            Op::Gt => lhs > rhs,
            Op::Eq => lhs == rhs,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Le => "<=",
            Op::Lt => "<",
            Op::Ge => ">=",
            Op::Gt => ">",
            Op::Eq => "==",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub feature: Feature,
    pub op: Op,
    pub value: Scalar,
}

impl Atom {
    pub fn new(feature: Feature, op: Op, value: Scalar) -> Self {
        Atom { feature, op, value }
    }

    pub fn holds(&self, m: &Marking, now: Time) -> bool {
        self.holds_for(self.feature.eval(m, now))
    }

    /// Whether the atom holds when its feature takes the value `lhs`.
    pub fn holds_for(&self, lhs: Scalar) -> bool {
        match (lhs, self.value) {
            (Scalar::Bool(a), Scalar::Bool(b)) => a == b,
            (lhs, rhs) => self.op.apply(lhs.as_f64(), rhs.as_f64()),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.feature, self.op, self.value)
    }
}

/// Conjunction of atoms; the empty conjunction is true.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Constraint {
    pub atoms: Vec<Atom>,
}

impl Constraint {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Constraint { atoms }
    }

    pub fn eval(&self, m: &Marking, now: Time) -> bool {
        self.atoms.iter().all(|a| a.holds(m, now))
    }

    /// Conjunction of both constraints.
    pub fn and(mut self, other: &Constraint) -> Constraint {
        self.atoms.extend(other.atoms.iter().cloned());
        self
    }

    /// Checks that every referenced place and attribute exists in `net`.
    pub fn resolve(&self, net: &Net) -> Result<()> {
        self.atoms.iter().try_for_each(|a| a.feature.resolve(net))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Constraint> {
        let mut p = Parser::new(s);
        let c = p.expr()?;
        p.end()?;
        Ok(c)
    }
}

impl Serialize for Constraint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for Feature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

struct Ident<'a>(&'a str);

impl fmt::Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bare = !self.0.is_empty() && self.0.chars().all(is_ident_char) && !is_keyword(self.0);
        if bare {
            f.write_str(self.0)
        } else {
            write!(f, "\"{}\"", self.0.replace('\\', "\\\\").replace('"', "\\\""))
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn is_keyword(s: &str) -> bool {
    ["and", "true", "false"].iter().any(|k| s.eq_ignore_ascii_case(k))
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0 }
    }

    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::ConstraintSyntax {
            offset: at,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.err(self.pos, format!("expected `{tok}`"))
        }
    }

    fn end(&mut self) -> Result<()> {
        self.skip_ws();
        if self.rest().is_empty() {
            Ok(())
        } else {
            self.err(self.pos, "unexpected trailing input")
        }
    }

    /// Bare word or quoted string; returns (text, start offset).
    fn ident(&mut self) -> Result<(String, usize)> {
        self.skip_ws();
        let start = self.pos;
        let rest = self.rest();
        if let Some(body) = rest.strip_prefix('"') {
            let mut out = String::new();
            let mut chars = body.char_indices();
            while let Some((i, c)) = chars.next() {
                match c {
                    '"' => {
                        self.pos += i + 2;
                        return Ok((out, start));
                    }
                    '\\' => match chars.next() {
                        Some((_, e)) => out.push(e),
                        None => break,
                    },
                    c => out.push(c),
                }
            }
            return self.err(start, "unterminated quoted identifier");
        }
        let len = rest.find(|c: char| !is_ident_char(c)).unwrap_or(rest.len());
        if len == 0 {
            return self.err(start, "expected identifier");
        }
        self.pos += len;
        Ok((rest[..len].to_string(), start))
    }

    fn expr(&mut self) -> Result<Constraint> {
        let mut atoms = vec![self.atom()?];
        loop {
            self.skip_ws();
            let save = self.pos;
            let word_len = self.rest().find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(self.rest().len());
            if self.rest()[..word_len].eq_ignore_ascii_case("and") {
                self.pos += word_len;
                atoms.push(self.atom()?);
            } else {
                self.pos = save;
                return Ok(Constraint::new(atoms));
            }
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let feature = self.feature()?;
        self.skip_ws();
        let op_at = self.pos;
        let op = [("<=", Op::Le), (">=", Op::Ge), ("==", Op::Eq), ("<", Op::Lt), (">", Op::Gt)]
            .into_iter()
            .find(|(s, _)| self.rest().starts_with(s));
        let Some((text, op)) = op else {
            return self.err(op_at, "expected comparison operator");
        };
        self.pos += text.len();
        self.skip_ws();
        let value_at = self.pos;
        let value = self.scalar()?;
        match (feature.is_boolean(), value) {
            (true, Scalar::Bool(_)) if op == Op::Eq => {}
            (true, Scalar::Bool(_)) => return self.err(op_at, "boolean features only compare with `==`"),
            (true, Scalar::Num(_)) => return self.err(value_at, "boolean feature compared with a number"),
            (false, Scalar::Bool(_)) => return self.err(value_at, "numeric feature compared with a boolean"),
            (false, Scalar::Num(_)) => {}
        }
        Ok(Atom::new(feature, op, value))
    }

    fn scalar(&mut self) -> Result<Scalar> {
        self.skip_ws();
        let start = self.pos;
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+')))
            .unwrap_or(rest.len());
        let word = &rest[..len];
        if word.is_empty() {
            return self.err(start, "expected constant");
        }
        let value = if word.eq_ignore_ascii_case("true") {
            Scalar::Bool(true)
        } else if word.eq_ignore_ascii_case("false") {
            Scalar::Bool(false)
        } else {
            match word.parse::<f64>() {
                Ok(x) if x.is_finite() => Scalar::Num(x),
                _ => return self.err(start, format!("invalid constant `{word}`")),
            }
        };
        self.pos += len;
        Ok(value)
    }

    fn feature(&mut self) -> Result<Feature> {
        let (kind, at) = self.ident()?;
        let kind = kind.to_ascii_lowercase();
        self.expect("(")?;
        let f = match kind.as_str() {
            "attrval" | "attrenabled" => {
                let r = self.attr_args()?;
                if kind == "attrval" {
                    Feature::AttrVal(r)
                } else {
                    Feature::AttrEnabled(r)
                }
            }
            "nrtokens" | "nrtokensenabled" | "timeuntilnext" => {
                let (p, _) = self.ident()?;
                match kind.as_str() {
                    "nrtokens" => Feature::NrTokens(p),
                    "nrtokensenabled" => Feature::NrTokensEnabled(p),
                    _ => Feature::TimeUntilNext(p),
                }
            }
            "ratio" => {
                let a = self.attrval_arg()?;
                self.expect(",")?;
                let b = self.attrval_arg()?;
                Feature::Ratio(a, b)
            }
            _ => return self.err(at, format!("unknown feature kind `{kind}`")),
        };
        self.expect(")")?;
        Ok(f)
    }

    fn attrval_arg(&mut self) -> Result<AttrRef> {
        self.skip_ws();
        let at = self.pos;
        match self.feature()? {
            Feature::AttrVal(r) => Ok(r),
            _ => self.err(at, "ratio operands must be attrval features"),
        }
    }

    fn attr_args(&mut self) -> Result<AttrRef> {
        let (place, _) = self.ident()?;
        self.expect(",")?;
        let (attr, _) = self.ident()?;
        let agg = if self.eat(",") {
            let (a, at) = self.ident()?;
            match a.to_ascii_lowercase().as_str() {
                "max" => Agg::Max,
                "min" => Agg::Min,
                _ => return self.err(at, format!("unknown aggregate `{a}`")),
            }
        } else {
            Agg::Max
        };
        Ok(AttrRef::new(place, attr, agg))
    }
}
