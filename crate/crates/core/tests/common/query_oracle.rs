//! Random single-table queries and a row-scan oracle for the query engine.

use chrono::{Duration, NaiveDate};
use fulfil_core::query::ast::Value;
use fulfil_core::query::store::{ColType, Table};
use fulfil_core::query::TableStore;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Row {
    pub date: NaiveDate,
    pub qty: Option<i64>,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, Copy)]
pub enum Op {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

impl Op {
    pub fn sym(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Ge => ">=",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Lt => "<",
        }
    }

    pub fn test<T: PartialOrd>(self, a: T, b: T) -> bool {
        match self {
            Op::Eq => a == b,
            Op::Ne => a != b,
            Op::Ge => a >= b,
            Op::Le => a <= b,
            Op::Gt => a > b,
            Op::Lt => a < b,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Cond {
    Qty(Op, i64),
    Window(Op, i64, bool),
    DateLit(Op, NaiveDate),
    Src(Op, String),
    CrossGeo,
}

#[derive(Debug, Clone)]
pub enum Select {
    Agg(&'static str),
    CountStar,
    Column(&'static str),
    TwoAggs,
    TwoColumns,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub rows: Vec<Row>,
    pub now: NaiveDate,
    pub select: Select,
    pub conds: Vec<Cond>,
}

pub const OPS: [Op; 6] = [Op::Eq, Op::Ne, Op::Ge, Op::Le, Op::Gt, Op::Lt];
pub const GEOS: [&str; 3] = ["US", "EU", "APAC"];

pub fn random_case(rng: &mut impl Rng) -> Case {
    let now = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
    let n = rng.random_range(0..25);
    let rows = (0..n)
        .map(|_| Row {
            date: now - Duration::days(rng.random_range(-10..80)),
            qty: if rng.random_bool(0.1) { None } else { Some(rng.random_range(0..20)) },
            src: GEOS[rng.random_range(0..3)].into(),
            dst: GEOS[rng.random_range(0..3)].into(),
        })
        .collect();
    let select = match rng.random_range(0..5) {
        0 => Select::Agg(["SUM", "AVG", "COUNT", "MIN", "MAX", "STDDEV"][rng.random_range(0..6)]),
        1 => Select::CountStar,
        2 => Select::Column(["quantity", "src_geo"][rng.random_range(0..2)]),
        3 => Select::TwoAggs,
        _ => Select::TwoColumns,
    };
    let conds = (0..rng.random_range(0..4))
        .map(|_| {
            let op = OPS[rng.random_range(0..6)];
            match rng.random_range(0..5) {
                0 => Cond::Qty(op, rng.random_range(0..20)),
                1 => Cond::Window(op, rng.random_range(0..12), rng.random_bool(0.5)),
                2 => Cond::DateLit(op, now - Duration::days(rng.random_range(0..80))),
                3 => Cond::Src(op, GEOS[rng.random_range(0..3)].into()),
                _ => Cond::CrossGeo,
            }
        })
        .collect();
    Case {
        rows,
        now,
        select,
        conds,
    }
}

pub fn query_text(c: &Case) -> String {
    let select = match &c.select {
        Select::Agg(a) => format!("{a}(quantity)"),
        Select::CountStar => "COUNT(*)".into(),
        Select::Column(col) => col.to_string(),
        Select::TwoAggs => "SUM(quantity), MAX(quantity)".into(),
        Select::TwoColumns => "src_geo, quantity".into(),
    };
    let conds: Vec<String> = c
        .conds
        .iter()
        .map(|cond| match cond {
            Cond::Qty(op, v) => format!("quantity {} {v}", op.sym()),
            Cond::Window(op, t, true) => format!("date {} NOW() - INTERVAL '{t} weeks'", op.sym()),
            Cond::Window(op, t, false) => format!("date {} NOW() - INTERVAL {t} WEEK", op.sym()),
            Cond::DateLit(op, d) => format!("date {} '{d}'", op.sym()),
            Cond::Src(op, g) => format!("src_geo {} '{g}'", op.sym()),
            Cond::CrossGeo => "src_geo != dest_geo".into(),
        })
        .collect();
    let mut q = format!("SELECT {select} FROM shipment");
    if !conds.is_empty() {
        q.push_str(" WHERE ");
        q.push_str(&conds.join(" AND "));
    }
    q
}

pub fn store_for(c: &Case) -> TableStore {
    let mut t = Table::new(&[
        ("date", ColType::Date),
        ("quantity", ColType::Int),
        ("src_geo", ColType::Str),
        ("dest_geo", ColType::Str),
        ("method", ColType::Str),
    ]);
    for r in &c.rows {
        t.rows.push(vec![
            Value::Date(r.date),
            r.qty.map_or(Value::Null, Value::Int),
            Value::Str(r.src.clone()),
            Value::Str(r.dst.clone()),
            Value::Str("ground".into()),
        ]);
    }
    TableStore::empty(c.now).with_table("shipment", t).unwrap()
}

/// Independent row scan.
pub fn oracle(c: &Case) -> Value {
    let keep: Vec<&Row> = c
        .rows
        .iter()
        .filter(|r| {
            c.conds.iter().all(|cond| match cond {
                Cond::Qty(op, v) => r.qty.is_some_and(|q| op.test(q, *v)),
                Cond::Window(op, t, _) => op.test(r.date, c.now - Duration::days(7 * t)),
                Cond::DateLit(op, d) => op.test(r.date, *d),
                Cond::Src(op, g) => op.test(&r.src, g),
                Cond::CrossGeo => r.src != r.dst,
            })
        })
        .collect();
    let qs: Vec<i64> = keep.iter().filter_map(|r| r.qty).collect();
    let agg = |name: &str| -> Value {
        if name == "COUNT" {
            return Value::Int(qs.len() as i64);
        }
        if qs.is_empty() {
            return Value::Null;
        }
        let n = qs.len() as f64;
        let mean = qs.iter().sum::<i64>() as f64 / n;
        match name {
            "SUM" => Value::Int(qs.iter().sum()),
            "AVG" => Value::Dec(mean),
            "MIN" => Value::Int(*qs.iter().min().unwrap()),
            "MAX" => Value::Int(*qs.iter().max().unwrap()),
            _ => Value::Dec((qs.iter().map(|&q| (q as f64 - mean).powi(2)).sum::<f64>() / n).sqrt()),
        }
    };
    match &c.select {
        Select::Agg(a) => agg(a),
        Select::CountStar => Value::Int(keep.len() as i64),
        Select::Column("quantity") => {
            Value::List(keep.iter().map(|r| r.qty.map_or(Value::Null, Value::Int)).collect())
        }
        Select::Column(_) => Value::List(keep.iter().map(|r| Value::Str(r.src.clone())).collect()),
        Select::TwoAggs => Value::List(vec![agg("SUM"), agg("MAX")]),
        Select::TwoColumns => Value::List(
            keep.iter()
                .map(|r| {
                    Value::List(vec![Value::Str(r.src.clone()), r.qty.map_or(Value::Null, Value::Int)])
                })
                .collect(),
        ),
    }
}

pub fn approx_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Dec(x), Value::Dec(y)) => (x - y).abs() <= 1e-9 * (1.0 + x.abs()),
        (Value::List(xs), Value::List(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| approx_eq(x, y)),
        _ => a == b,
    }
}
