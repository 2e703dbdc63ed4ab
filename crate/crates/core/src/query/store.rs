use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use super::ast::Value;
use crate::io::{read_csv, LoadError};
use crate::model::{Demand, Horizon, InventoryRecord, PlanningInstance, ShipmentRecord, Supplier};

pub const TABLE_NAMES: [&str; 4] = ["demand", "supplier", "inventory", "shipment"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColType {
    Int,
    Dec,
    Str,
    Date,
}

impl ColType {
    /// Null is accepted in every column.
    pub fn admits(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (_, Value::Null)
                | (ColType::Int, Value::Int(_))
                | (ColType::Dec, Value::Dec(_))
                | (ColType::Str, Value::Str(_))
                | (ColType::Date, Value::Date(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<(String, ColType)>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[(&str, ColType)]) -> Self {
        Table {
            columns: columns.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("row {row} of {table} does not match the schema")]
    Schema { table: String, row: usize },
}

/// Immutable in-memory tables plus the clock used by `NOW()`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableStore {
    tables: BTreeMap<String, Table>,
    pub now: NaiveDate,
}

fn demand_table(rows: &[Demand]) -> Table {
    let mut t = Table::new(&[
        ("id", ColType::Str),
        ("racks", ColType::Int),
        ("ideal_dock_week", ColType::Int),
        ("idd", ColType::Int),
        ("dest_geo", ColType::Str),
    ]);
    t.rows = rows
        .iter()
        .map(|d| {
            vec![
                Value::Str(d.id.clone()),
                Value::Int(d.racks as i64),
                Value::Int(d.ideal_dock_week as i64),
                Value::Int(d.ideal_dock_week as i64),
                Value::Str(d.dest_geo.clone()),
            ]
        })
        .collect();
    t
}

fn supplier_table(rows: &[Supplier]) -> Table {
    let mut t = Table::new(&[
        ("id", ColType::Str),
        ("region", ColType::Str),
        ("src_geo", ColType::Str),
    ]);
    t.rows = rows
        .iter()
        .map(|s| {
            vec![
                Value::Str(s.id.clone()),
                Value::Str(s.region.clone()),
                Value::Str(s.src_geo.clone()),
            ]
        })
        .collect();
    t
}

fn inventory_table(rows: &[InventoryRecord]) -> Table {
    let mut t = Table::new(&[
        ("supplier_id", ColType::Str),
        ("week", ColType::Int),
        ("quantity", ColType::Int),
        ("record_date", ColType::Date),
    ]);
    t.rows = rows
        .iter()
        .map(|r| {
            vec![
                Value::Str(r.supplier_id.clone()),
                Value::Int(r.week as i64),
                Value::Int(r.quantity),
                Value::Date(r.record_date),
            ]
        })
        .collect();
    t
}

fn shipment_table(rows: &[ShipmentRecord]) -> Table {
    let mut t = Table::new(&[
        ("date", ColType::Date),
        ("quantity", ColType::Int),
        ("src_geo", ColType::Str),
        ("dest_geo", ColType::Str),
        ("method", ColType::Str),
    ]);
    t.rows = rows
        .iter()
        .map(|s| {
            vec![
                Value::Date(s.date),
                Value::Int(s.quantity),
                Value::Str(s.src_geo.clone()),
                Value::Str(s.dest_geo.clone()),
                Value::Str(s.method.clone()),
            ]
        })
        .collect();
    t
}

impl TableStore {
    /// Empty store with the four standard tables.
    pub fn empty(now: NaiveDate) -> Self {
        Self::from_parts(&[], &[], &[], &[], now)
    }

    fn from_parts(
        demands: &[Demand],
        suppliers: &[Supplier],
        inventory: &[InventoryRecord],
        shipments: &[ShipmentRecord],
        now: NaiveDate,
    ) -> Self {
        let mut tables = BTreeMap::new();
        tables.insert("demand".to_string(), demand_table(demands));
        tables.insert("supplier".to_string(), supplier_table(suppliers));
        tables.insert("inventory".to_string(), inventory_table(inventory));
        tables.insert("shipment".to_string(), shipment_table(shipments));
        TableStore { tables, now }
    }

    pub fn from_instance(inst: &PlanningInstance) -> Self {
        Self::from_parts(
            &inst.demands,
            &inst.suppliers,
            &inst.inventory,
            &inst.shipments,
            inst.horizon.now(),
        )
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &Table)> {
        self.tables.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Replaces one of the standard tables. Rows must conform to the schema.
    pub fn with_table(mut self, name: &str, table: Table) -> Result<Self, StoreError> {
        if !TABLE_NAMES.contains(&name) {
            return Err(StoreError::UnknownTable(name.to_string()));
        }
        for (i, row) in table.rows.iter().enumerate() {
            let ok = row.len() == table.columns.len()
                && row.iter().zip(&table.columns).all(|(v, (_, t))| t.admits(v));
            if !ok {
                return Err(StoreError::Schema {
                    table: name.to_string(),
                    row: i,
                });
            }
        }
        self.tables.insert(name.to_string(), table);
        Ok(self)
    }
}

/// Loads the four query tables from an instance directory. `now` comes from
/// `horizon.json` unless overridden.
pub fn load_store(dir: impl AsRef<Path>, now_override: Option<NaiveDate>) -> Result<TableStore, LoadError> {
    let dir = dir.as_ref();
    let demands = read_csv::<Demand>(dir, "demand.csv")?;
    let suppliers = read_csv::<Supplier>(dir, "supplier.csv")?;
    let inventory = read_csv::<InventoryRecord>(dir, "inventory.csv")?;
    let shipments = read_csv::<ShipmentRecord>(dir, "shipment.csv")?;
    let now = match now_override {
        Some(d) => d,
        None => {
            let path = dir.join("horizon.json");
            if !path.exists() {
                return Err(LoadError::MissingFile(path));
            }
            let text = std::fs::read_to_string(&path).map_err(|source| LoadError::Io {
                path: path.clone(),
                source,
            })?;
            let h: Horizon = serde_json::from_str(&text).map_err(|e| LoadError::Json {
                file: "horizon.json".into(),
                message: e.to_string(),
            })?;
            h.now()
        }
    };
    Ok(TableStore::from_parts(&demands, &suppliers, &inventory, &shipments, now))
}
