//! Loading planning instances from a directory of CSV and JSON files.
//!
//! Layout: `demand.csv`, `supplier.csv`, `inventory.csv`, `shipment.csv`,
//! `methods.csv`, `horizon.json`, `cost_config.json`.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::model::{
    CostConfig, Demand, Horizon, InventoryRecord, PlanningInstance, ShipmentRecord, ShippingMethod,
    Supplier,
};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{file}: row {row}: {message}")]
    Row {
        file: String,
        row: u64,
        message: String,
    },
    #[error("{file}: {message}")]
    Json { file: String, message: String },
    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn open(path: &Path) -> Result<File, LoadError> {
    if !path.exists() {
        return Err(LoadError::MissingFile(path.to_path_buf()));
    }
    File::open(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads one typed CSV table. Row numbers in errors are 1-based file lines
/// (the header is line 1).
pub fn read_csv<T: DeserializeOwned>(dir: &Path, file: &str) -> Result<Vec<T>, LoadError> {
    let path = dir.join(file);
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(&path)?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<T>().enumerate() {
        let row = rec.map_err(|e| LoadError::Row {
            file: file.to_string(),
            row: e
                .position()
                .map(|p| p.line())
                .unwrap_or(i as u64 + 2),
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_json<T: DeserializeOwned>(dir: &Path, file: &str) -> Result<T, LoadError> {
    let path = dir.join(file);
    serde_json::from_reader(open(&path)?).map_err(|e| LoadError::Json {
        file: file.to_string(),
        message: e.to_string(),
    })
}

pub fn load_instance(dir: impl AsRef<Path>) -> Result<PlanningInstance, LoadError> {
    let dir = dir.as_ref();
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".to_string());
    Ok(PlanningInstance {
        name,
        demands: read_csv::<Demand>(dir, "demand.csv")?,
        suppliers: read_csv::<Supplier>(dir, "supplier.csv")?,
        inventory: read_csv::<InventoryRecord>(dir, "inventory.csv")?,
        shipments: read_csv::<ShipmentRecord>(dir, "shipment.csv")?,
        methods: read_csv::<ShippingMethod>(dir, "methods.csv")?,
        horizon: read_json::<Horizon>(dir, "horizon.json")?,
        cost: read_json::<CostConfig>(dir, "cost_config.json")?,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

/// Writes an instance in the layout `load_instance` reads.
pub fn save_instance(inst: &PlanningInstance, dir: impl AsRef<Path>) -> std::io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_csv(
        &dir.join("demand.csv"),
        &inst.demands,
        &["id", "racks", "ideal_dock_week", "dest_geo"],
    )?;
    write_csv(&dir.join("supplier.csv"), &inst.suppliers, &["id", "region", "src_geo"])?;
    write_csv(
        &dir.join("inventory.csv"),
        &inst.inventory,
        &["supplier_id", "week", "quantity", "record_date"],
    )?;
    write_csv(
        &dir.join("shipment.csv"),
        &inst.shipments,
        &["date", "quantity", "src_geo", "dest_geo", "method"],
    )?;
    write_csv(
        &dir.join("methods.csv"),
        &inst.methods,
        &["name", "lead_time_weeks", "cost_per_rack", "cross_geo_multiplier"],
    )?;
    std::fs::write(
        dir.join("horizon.json"),
        serde_json::to_string_pretty(&inst.horizon)?,
    )?;
    std::fs::write(
        dir.join("cost_config.json"),
        serde_json::to_string_pretty(&inst.cost)?,
    )?;
    Ok(())
}
