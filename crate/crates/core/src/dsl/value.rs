use std::fmt::Write;

use chrono::NaiveDate;

use crate::query;

/// A runtime value inside a snippet.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Dec(f64),
    Str(String),
    Date(NaiveDate),
    List(Vec<Value>),
}

impl From<query::Value> for Value {
    fn from(v: query::Value) -> Self {
        match v {
            query::Value::Null => Value::None,
            query::Value::Int(i) => Value::Int(i),
            query::Value::Dec(d) => Value::Dec(d),
            query::Value::Str(s) => Value::Str(s),
            query::Value::Date(d) => Value::Date(d),
            query::Value::List(xs) => Value::List(xs.into_iter().map(Value::from).collect()),
        }
    }
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "None",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Dec(_) => "decimal",
            Value::Str(_) => "str",
            Value::Date(_) => "date",
            Value::List(_) => "list",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Dec(d) => *d != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::Date(_) => true,
            Value::List(xs) => !xs.is_empty(),
        }
    }

    /// A one-element list stands for its element in scalar positions.
    pub fn scalar(self) -> Value {
        match self {
            Value::List(mut xs) if xs.len() == 1 => xs.pop().unwrap(),
            other => other,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Dec(d) => Some(*d),
            _ => None,
        }
    }

    /// Rendering inside an interpolated string hole.
    pub fn render(&self) -> String {
        match self {
            Value::List(xs) if xs.len() == 1 => xs[0].render(),
            Value::Dec(d) => format_decimal(*d, false),
            other => other.render_plain(),
        }
    }

    /// Rendering of a value passed directly to `logger.log`: decimals keep at
    /// least one fractional digit.
    pub fn render_logged(&self) -> String {
        match self {
            Value::List(xs) if xs.len() == 1 => xs[0].render_logged(),
            Value::Dec(d) => format_decimal(*d, true),
            other => other.render_plain(),
        }
    }

    fn render_plain(&self) -> String {
        match self {
            Value::None => "None".into(),
            Value::Bool(true) => "True".into(),
            Value::Bool(false) => "False".into(),
            Value::Int(i) => i.to_string(),
            Value::Dec(d) => format_decimal(*d, false),
            Value::Str(s) => s.clone(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
            Value::List(xs) => {
                let mut out = String::from("[");
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    match x {
                        Value::Str(s) => write!(out, "'{s}'").unwrap(),
                        Value::Date(_) => write!(out, "'{}'", x.render_plain()).unwrap(),
                        Value::Dec(d) => out.push_str(&format_decimal(*d, true)),
                        other => out.push_str(&other.render_plain()),
                    }
                }
                out.push(']');
                out
            }
        }
    }
}

/// Minimal decimal digits, at most four after the point. With `keep_point`,
/// whole numbers still print one fractional digit (`40.0`).
pub fn format_decimal(d: f64, keep_point: bool) -> String {
    if d.is_nan() {
        return "nan".into();
    }
    if d.is_infinite() {
        return if d > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mut s = format!("{d:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".into();
    }
    if keep_point && !s.contains('.') {
        s.push_str(".0");
    }
    s
}
