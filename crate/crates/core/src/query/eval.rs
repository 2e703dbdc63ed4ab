use std::cmp::Ordering;

use chrono::{Duration, NaiveDate};

use super::ast::*;
use super::store::{Table, TableStore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("unknown column {column:?} in table {table:?}")]
    UnknownColumn { table: String, column: String },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unsupported select list: {0}")]
    Unsupported(String),
}

fn operand_value(op: &Operand, table: &Table, row: &[Value], now: NaiveDate) -> Value {
    match op {
        Operand::Column(c) => table
            .column_index(c)
            .map_or(Value::Null, |i| row[i].clone()),
        Operand::Literal(Literal::Int(i)) => Value::Int(*i),
        Operand::Literal(Literal::Dec(d)) => Value::Dec(*d),
        Operand::Literal(Literal::Str(s)) => Value::Str(s.clone()),
        Operand::Now { offset } => {
            let days = offset.map_or(0, |(sign, iv)| sign as i64 * iv.days());
            Value::Date(now + Duration::days(days))
        }
    }
}

fn as_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Three-valued comparison collapsed to bool: any null yields `Ok(None)`.
pub fn compare(a: &Value, b: &Value) -> Result<Option<Ordering>, EvalError> {
    let mismatch = || EvalError::TypeMismatch(format!("cannot compare {a:?} with {b:?}"));
    Ok(Some(match (a, b) {
        (Value::Null, _) | (_, Value::Null) => return Ok(None),
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Int(_) | Value::Dec(_), Value::Int(_) | Value::Dec(_)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            x.partial_cmp(&y).ok_or_else(mismatch)?
        }
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (Value::Date(x), Value::Str(y)) => x.cmp(&as_date(y).ok_or_else(mismatch)?),
        (Value::Str(x), Value::Date(y)) => as_date(x).ok_or_else(mismatch)?.cmp(y),
        _ => return Err(mismatch()),
    }))
}

fn check_columns(q: &Query, table: &Table) -> Result<(), EvalError> {
    let unknown = |c: &str| EvalError::UnknownColumn {
        table: q.table.clone(),
        column: c.to_string(),
    };
    for item in &q.items {
        if let SelectTarget::Column(c) = &item.target {
            table.column_index(c).ok_or_else(|| unknown(c))?;
        }
    }
    for cond in &q.conditions {
        for op in [&cond.left, &cond.right] {
            if let Operand::Column(c) = op {
                table.column_index(c).ok_or_else(|| unknown(c))?;
            }
        }
    }
    Ok(())
}

pub fn aggregate(agg: Aggregate, values: &[Value]) -> Result<Value, EvalError> {
    let present: Vec<&Value> = values.iter().filter(|v| !v.is_null()).collect();
    if agg == Aggregate::Count {
        return Ok(Value::Int(present.len() as i64));
    }
    if present.is_empty() {
        return Ok(Value::Null);
    }
    let numeric = || -> Result<Vec<f64>, EvalError> {
        present
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| EvalError::TypeMismatch(format!("{} over non-numeric {v:?}", agg.name())))
            })
            .collect()
    };
    Ok(match agg {
        Aggregate::Count => unreachable!(),
        Aggregate::Sum => {
            if present.iter().all(|v| matches!(v, Value::Int(_))) {
                let mut acc: i64 = 0;
                for v in &present {
                    if let Value::Int(i) = v {
                        acc = acc
                            .checked_add(*i)
                            .ok_or_else(|| EvalError::TypeMismatch("integer overflow in SUM".into()))?;
                    }
                }
                Value::Int(acc)
            } else {
                Value::Dec(numeric()?.iter().sum())
            }
        }
        Aggregate::Avg => {
            let xs = numeric()?;
            Value::Dec(xs.iter().sum::<f64>() / xs.len() as f64)
        }
        Aggregate::Stddev => {
            let xs = numeric()?;
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            Value::Dec(var.sqrt())
        }
        Aggregate::Min | Aggregate::Max => {
            let mut best = present[0];
            for v in &present[1..] {
                let ord = compare(v, best)?.unwrap_or(Ordering::Equal);
                let better = if agg == Aggregate::Min {
                    ord == Ordering::Less
                } else {
                    ord == Ordering::Greater
                };
                if better {
                    best = v;
                }
            }
            best.clone()
        }
    })
}

/// Filters rows by the conjunction and evaluates the select list.
///
/// A single aggregate yields a scalar; a single plain column yields a list of
/// values; several aggregates yield a list of scalars; several plain columns
/// (or `*`) yield a list of row lists.
pub fn eval_query(q: &Query, store: &TableStore) -> Result<Value, EvalError> {
    let table = store
        .table(&q.table)
        .ok_or_else(|| EvalError::UnknownTable(q.table.clone()))?;
    check_columns(q, table)?;

    let mut rows: Vec<&Vec<Value>> = Vec::new();
    'rows: for row in &table.rows {
        for c in &q.conditions {
            let l = operand_value(&c.left, table, row, store.now);
            let r = operand_value(&c.right, table, row, store.now);
            match compare(&l, &r)? {
                Some(ord) if c.op.holds(ord) => {}
                _ => continue 'rows,
            }
        }
        rows.push(row);
    }

    let n_agg = q.items.iter().filter(|i| i.aggregate.is_some()).count();
    if n_agg > 0 && n_agg < q.items.len() {
        return Err(EvalError::Unsupported(
            "cannot mix aggregates and plain columns without GROUP BY".into(),
        ));
    }

    if n_agg > 0 {
        let mut out = Vec::with_capacity(q.items.len());
        for item in &q.items {
            let agg = item.aggregate.unwrap();
            let values: Vec<Value> = match &item.target {
                SelectTarget::Star => rows.iter().map(|_| Value::Int(1)).collect(),
                SelectTarget::Column(c) => {
                    let i = table.column_index(c).unwrap();
                    rows.iter().map(|r| r[i].clone()).collect()
                }
            };
            out.push(aggregate(agg, &values)?);
        }
        return Ok(if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Value::List(out)
        });
    }

    let mut indices = Vec::new();
    for item in &q.items {
        match &item.target {
            SelectTarget::Star => indices.extend(0..table.columns.len()),
            SelectTarget::Column(c) => indices.push(table.column_index(c).unwrap()),
        }
    }
    if q.items.len() == 1 && indices.len() == 1 {
        let i = indices[0];
        return Ok(Value::List(rows.iter().map(|r| r[i].clone()).collect()));
    }
    Ok(Value::List(
        rows.iter()
            .map(|r| Value::List(indices.iter().map(|&i| r[i].clone()).collect()))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parser::parse_query;
    use crate::query::store::ColType;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn run(store: &TableStore, q: &str) -> Result<Value, EvalError> {
        eval_query(&parse_query(q).unwrap(), store)
    }

    fn shipments(rows: &[(&str, i64, &str, &str)]) -> TableStore {
        let mut t = Table::new(&[
            ("date", ColType::Date),
            ("quantity", ColType::Int),
            ("src_geo", ColType::Str),
            ("dest_geo", ColType::Str),
            ("method", ColType::Str),
        ]);
        for (d, q, s, dst) in rows {
            t.rows.push(vec![
                Value::Date(date(d)),
                Value::Int(*q),
                Value::Str(s.to_string()),
                Value::Str(dst.to_string()),
                Value::Str("ground".into()),
            ]);
        }
        TableStore::empty(date("2024-03-01")).with_table("shipment", t).unwrap()
    }

    #[test]
    fn stddev_is_population() {
        let vals: Vec<Value> = [2, 4, 4, 4, 5, 5, 7, 9].iter().map(|&v| Value::Int(v)).collect();
        assert_eq!(aggregate(Aggregate::Stddev, &vals).unwrap(), Value::Dec(2.0));
        let vals = vec![Value::Int(10); 3];
        assert_eq!(aggregate(Aggregate::Stddev, &vals).unwrap(), Value::Dec(0.0));
    }

    #[test]
    fn empty_aggregates() {
        for agg in Aggregate::ALL {
            let expected = if agg == Aggregate::Count { Value::Int(0) } else { Value::Null };
            assert_eq!(aggregate(agg, &[]).unwrap(), expected, "{agg:?}");
        }
    }

    #[test]
    fn cross_geo_sums() {
        let store = shipments(&[("2024-02-20", 4, "A", "B"), ("2024-02-25", 6, "A", "A")]);
        let total = run(&store, "SELECT SUM(quantity) FROM shipment WHERE date >= NOW() - INTERVAL '4 weeks'").unwrap();
        assert_eq!(total, Value::Int(10));
        let cross = run(
            &store,
            "SELECT SUM(quantity) FROM shipment WHERE date >= NOW() - INTERVAL '4 weeks' AND src_geo != dest_geo;",
        )
        .unwrap();
        assert_eq!(cross, Value::Int(4));
    }

    #[test]
    fn window_is_inclusive() {
        // now = 2024-03-01; 2 weeks back = 2024-02-16
        let store = shipments(&[("2024-02-16", 1, "A", "B"), ("2024-02-15", 2, "A", "B")]);
        let v = run(&store, "SELECT SUM(quantity) FROM shipment WHERE date >= NOW() - INTERVAL 2 WEEK").unwrap();
        assert_eq!(v, Value::Int(1));
    }

    #[test]
    fn empty_window_sum_is_null() {
        let store = shipments(&[]);
        let v = run(&store, "SELECT SUM(quantity) FROM shipment").unwrap();
        assert_eq!(v, Value::Null);
        let v = run(&store, "SELECT COUNT(*) FROM shipment").unwrap();
        assert_eq!(v, Value::Int(0));
    }

    #[test]
    fn plain_columns_and_rows() {
        let store = shipments(&[("2024-02-20", 4, "A", "B"), ("2024-02-25", 6, "A", "A")]);
        assert_eq!(
            run(&store, "SELECT quantity FROM shipment WHERE dest_geo = 'A'").unwrap(),
            Value::List(vec![Value::Int(6)])
        );
        assert_eq!(
            run(&store, "SELECT quantity, dest_geo FROM shipment WHERE quantity > 5").unwrap(),
            Value::List(vec![Value::List(vec![Value::Int(6), Value::Str("A".into())])])
        );
        assert_eq!(
            run(&store, "SELECT MIN(quantity), MAX(date) FROM shipment").unwrap(),
            Value::List(vec![Value::Int(4), Value::Date(date("2024-02-25"))])
        );
    }

    #[test]
    fn errors() {
        let store = shipments(&[("2024-02-20", 4, "A", "B")]);
        assert_eq!(
            run(&store, "SELECT id FROM warehouse"),
            Err(EvalError::UnknownTable("warehouse".into()))
        );
        assert!(matches!(
            run(&store, "SELECT SUM(weight) FROM shipment"),
            Err(EvalError::UnknownColumn { .. })
        ));
        assert!(matches!(
            run(&store, "SELECT quantity FROM shipment WHERE quantity = 'x'"),
            Err(EvalError::TypeMismatch(_))
        ));
        assert!(matches!(
            run(&store, "SELECT SUM(quantity), quantity FROM shipment"),
            Err(EvalError::Unsupported(_))
        ));
    }

    #[test]
    fn date_literal_against_date_column() {
        let store = shipments(&[("2024-02-20", 4, "A", "B"), ("2024-02-25", 6, "A", "A")]);
        assert_eq!(
            run(&store, "SELECT SUM(quantity) FROM shipment WHERE date > '2024-02-21'").unwrap(),
            Value::Int(6)
        );
    }
}
