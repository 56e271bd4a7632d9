use std::fmt;

use serde::{Deserialize, Serialize};

/// Model and log time, in abstract time units.
pub type Time = f64;

/// Data value carried by tokens and events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Value::Text(_) => None,
        }
    }

    pub fn attr_type(&self) -> AttrType {
        match self {
            Value::Bool(_) => AttrType::Boolean,
            Value::Number(_) => AttrType::Number,
            Value::Text(_) => AttrType::Text,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrType {
    Number,
    Boolean,
    Text,
}

impl AttrType {
    pub fn admits(self, value: &Value) -> bool {
        value.attr_type() == self
    }
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrType::Number => "number",
            AttrType::Boolean => "boolean",
            AttrType::Text => "text",
        })
    }
}
