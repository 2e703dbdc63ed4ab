use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// A value produced by the query engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Int(i64),
    Dec(f64),
    Str(String),
    Date(NaiveDate),
    List(Vec<Value>),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Dec(d) => Some(*d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Sum,
    Avg,
    Count,
    Min,
    Max,
    Stddev,
}

impl Aggregate {
    pub const ALL: [Aggregate; 6] = [
        Aggregate::Sum,
        Aggregate::Avg,
        Aggregate::Count,
        Aggregate::Min,
        Aggregate::Max,
        Aggregate::Stddev,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_uppercase().as_str() {
            "SUM" => Aggregate::Sum,
            "AVG" => Aggregate::Avg,
            "COUNT" => Aggregate::Count,
            "MIN" => Aggregate::Min,
            "MAX" => Aggregate::Max,
            "STDDEV" => Aggregate::Stddev,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Sum => "SUM",
            Aggregate::Avg => "AVG",
            Aggregate::Count => "COUNT",
            Aggregate::Min => "MIN",
            Aggregate::Max => "MAX",
            Aggregate::Stddev => "STDDEV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectTarget {
    Star,
    Column(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectItem {
    pub aggregate: Option<Aggregate>,
    pub target: SelectTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalUnit {
    Day,
    Week,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub amount: i64,
    pub unit: IntervalUnit,
}

impl Interval {
    pub fn days(&self) -> i64 {
        match self.unit {
            IntervalUnit::Day => self.amount,
            IntervalUnit::Week => 7 * self.amount,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Dec(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Column(String),
    Literal(Literal),
    /// `NOW()` shifted by a signed number of days.
    Now { offset: Option<(i8, Interval)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Le, CmpOp::Gt, CmpOp::Lt];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Ge => ord != Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Lt => ord == Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub left: Operand,
    pub op: CmpOp,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub items: Vec<SelectItem>,
    pub table: String,
    /// Conjunction.
    pub conditions: Vec<Condition>,
}

fn fmt_dec(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let target = match &self.target {
            SelectTarget::Star => "*",
            SelectTarget::Column(c) => c.as_str(),
        };
        match self.aggregate {
            Some(a) => write!(f, "{}({target})", a.name()),
            None => f.write_str(target),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) => f.write_str(c),
            Operand::Literal(Literal::Int(i)) => write!(f, "{i}"),
            Operand::Literal(Literal::Dec(d)) => f.write_str(&fmt_dec(*d)),
            Operand::Literal(Literal::Str(s)) => write!(f, "'{}'", s.replace('\'', "''")),
            Operand::Now { offset: None } => f.write_str("NOW()"),
            Operand::Now {
                offset: Some((sign, iv)),
            } => {
                let unit = match iv.unit {
                    IntervalUnit::Day => "DAY",
                    IntervalUnit::Week => "WEEK",
                };
                let s = if *sign < 0 { '-' } else { '+' };
                write!(f, "NOW() {s} INTERVAL {} {unit}", iv.amount)
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.items.iter().map(|i| i.to_string()).collect();
        write!(f, "SELECT {} FROM {}", items.join(", "), self.table)?;
        for (i, c) in self.conditions.iter().enumerate() {
            let kw = if i == 0 { "WHERE" } else { "AND" };
            write!(f, " {kw} {} {} {}", c.left, c.op.symbol(), c.right)?;
        }
        Ok(())
    }
}
