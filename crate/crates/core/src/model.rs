//! Domain types for the fulfillment world and the cost/calendar arithmetic
//! shared by the optimizer, the query engine and the snippet interpreter.

use std::collections::HashSet;
use std::fmt;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::fixed::Fixed;

/// Index of a planning week, counted from `Horizon::week0_start`.
pub type Week = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub id: String,
    pub racks: u32,
    /// Requested dock week (`idd` in queries).
    pub ideal_dock_week: Week,
    pub dest_geo: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Supplier {
    pub id: String,
    pub region: String,
    pub src_geo: String,
}

/// Racks a supplier holds in a given week. Also the history table behind
/// inventory statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryRecord {
    pub supplier_id: String,
    pub week: Week,
    pub quantity: i64,
    pub record_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShippingMethod {
    pub name: String,
    pub lead_time_weeks: u32,
    pub cost_per_rack: Fixed,
    pub cross_geo_multiplier: Fixed,
}

/// Historical shipment, used only by extraction queries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShipmentRecord {
    pub date: NaiveDate,
    pub quantity: i64,
    pub src_geo: String,
    pub dest_geo: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub num_weeks: u32,
    pub week0_start: NaiveDate,
    /// Clock used by `NOW()` in queries. Defaults to `week0_start`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub now: Option<NaiveDate>,
}

impl Horizon {
    pub fn week_start(&self, week: Week) -> NaiveDate {
        self.week0_start + Duration::days(7 * week as i64)
    }

    pub fn now(&self) -> NaiveDate {
        self.now.unwrap_or(self.week0_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostConfig {
    pub lateness_penalty_per_week: Fixed,
    /// Falls back to the lateness penalty when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub earliness_penalty_per_week: Option<Fixed>,
}

impl CostConfig {
    pub fn symmetric(penalty: Fixed) -> Self {
        CostConfig {
            lateness_penalty_per_week: penalty,
            earliness_penalty_per_week: None,
        }
    }

    pub fn earliness_penalty(&self) -> Fixed {
        self.earliness_penalty_per_week
            .unwrap_or(self.lateness_penalty_per_week)
    }
}

/// A complete planning problem plus the historical tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningInstance {
    pub name: String,
    pub demands: Vec<Demand>,
    pub suppliers: Vec<Supplier>,
    pub inventory: Vec<InventoryRecord>,
    pub shipments: Vec<ShipmentRecord>,
    pub methods: Vec<ShippingMethod>,
    pub horizon: Horizon,
    pub cost: CostConfig,
}

impl PlanningInstance {
    pub fn demand(&self, id: &str) -> Option<&Demand> {
        self.demands.iter().find(|d| d.id == id)
    }

    pub fn supplier(&self, id: &str) -> Option<&Supplier> {
        self.suppliers.iter().find(|s| s.id == id)
    }

    pub fn method(&self, name: &str) -> Option<&ShippingMethod> {
        self.methods.iter().find(|m| m.name == name)
    }

    /// Inventory quantity for a supplier in a week; zero when no record exists.
    pub fn capacity(&self, supplier_id: &str, week: Week) -> i64 {
        self.inventory
            .iter()
            .find(|r| r.supplier_id == supplier_id && r.week == week)
            .map_or(0, |r| r.quantity)
    }
}

pub fn dock_week(ship_week: Week, method: &ShippingMethod) -> Week {
    ship_week + method.lead_time_weeks
}

/// Shipping cost (with the cross-geo multiplier when source and destination
/// geographies differ) plus a per-rack-per-week penalty on the distance
/// between the dock week and the ideal dock week.
pub fn line_cost(
    demand: &Demand,
    supplier: &Supplier,
    method: &ShippingMethod,
    ship_week: Week,
    cfg: &CostConfig,
) -> Fixed {
    let racks = demand.racks as i64;
    let mut shipping = method.cost_per_rack.times(racks);
    if supplier.src_geo != demand.dest_geo {
        shipping = shipping * method.cross_geo_multiplier;
    }
    let dock = dock_week(ship_week, method) as i64;
    let ideal = demand.ideal_dock_week as i64;
    let deviation = if dock >= ideal {
        cfg.lateness_penalty_per_week.times(racks * (dock - ideal))
    } else {
        cfg.earliness_penalty().times(racks * (ideal - dock))
    };
    shipping + deviation
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanLine {
    pub demand_id: String,
    pub supplier_id: String,
    pub method: String,
    pub ship_week: Week,
    pub dock_week: Week,
    pub line_cost: Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub version: u64,
    pub total_cost: Fixed,
    pub lines: Vec<PlanLine>,
}

/// Constraint polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Enforce {
    #[serde(rename = "Exact Match")]
    ExactMatch,
    #[serde(rename = "Prohibit")]
    Prohibit,
}

impl Enforce {
    pub fn parse(s: &str) -> Result<Self, ConstraintError> {
        match s {
            "Exact Match" => Ok(Enforce::ExactMatch),
            "Prohibit" => Ok(Enforce::Prohibit),
            other => Err(ConstraintError::Enforce(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Enforce::ExactMatch => "Exact Match",
            Enforce::Prohibit => "Prohibit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    DockDate,
    SupplyPairing,
    ShippingMethod,
}

/// An id or the `*` wildcard.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum IdPattern {
    Any,
    Id(String),
}

impl IdPattern {
    pub fn matches(&self, id: &str) -> bool {
        match self {
            IdPattern::Any => true,
            IdPattern::Id(x) => x == id,
        }
    }
}

impl From<String> for IdPattern {
    fn from(s: String) -> Self {
        if s == "*" {
            IdPattern::Any
        } else {
            IdPattern::Id(s)
        }
    }
}

impl From<&str> for IdPattern {
    fn from(s: &str) -> Self {
        IdPattern::from(s.to_string())
    }
}

impl From<IdPattern> for String {
    fn from(p: IdPattern) -> String {
        p.to_string()
    }
}

impl fmt::Display for IdPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdPattern::Any => f.write_str("*"),
            IdPattern::Id(id) => f.write_str(id),
        }
    }
}

/// A week index, a calendar month (`YYYY-MM-*`), or `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum WeekPattern {
    Any,
    Week(Week),
    Month { year: i32, month: u32 },
}

impl WeekPattern {
    pub fn parse(s: &str) -> Result<Self, ConstraintError> {
        let t = s.trim();
        if t == "*" {
            return Ok(WeekPattern::Any);
        }
        if let Ok(w) = t.parse::<Week>() {
            return Ok(WeekPattern::Week(w));
        }
        let bad = || ConstraintError::Pattern(s.to_string());
        let rest = t.strip_suffix("-*").ok_or_else(bad)?;
        let (y, m) = rest.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.is_empty() || m.len() > 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(WeekPattern::Month { year, month })
    }

    pub fn matches(&self, week: Week, horizon: &Horizon) -> bool {
        match *self {
            WeekPattern::Any => true,
            WeekPattern::Week(w) => w == week,
            WeekPattern::Month { year, month } => {
                let start = horizon.week_start(week);
                start.year() == year && start.month() == month
            }
        }
    }
}

impl fmt::Display for WeekPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeekPattern::Any => f.write_str("*"),
            WeekPattern::Week(w) => write!(f, "{w}"),
            WeekPattern::Month { year, month } => write!(f, "{year:04}-{month:02}-*"),
        }
    }
}

impl TryFrom<serde_json::Value> for WeekPattern {
    type Error = ConstraintError;
    fn try_from(v: serde_json::Value) -> Result<Self, Self::Error> {
        match v {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|w| WeekPattern::Week(w as Week))
                .ok_or_else(|| ConstraintError::Pattern(n.to_string())),
            serde_json::Value::String(s) => WeekPattern::parse(&s),
            other => Err(ConstraintError::Pattern(other.to_string())),
        }
    }
}

impl From<WeekPattern> for serde_json::Value {
    fn from(p: WeekPattern) -> Self {
        match p {
            WeekPattern::Week(w) => serde_json::Value::from(w),
            other => serde_json::Value::from(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("malformed week pattern {0:?} (expected week index, YYYY-MM-* or *)")]
    Pattern(String),
    #[error("unknown enforce mode {0:?} (expected \"Exact Match\" or \"Prohibit\")")]
    Enforce(String),
    #[error("shipping-method constraint requires a method name")]
    MissingMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub demand_id: IdPattern,
    pub supplier_id: IdPattern,
    pub week: WeekPattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub enforce: Enforce,
}

impl Constraint {
    pub fn dock_date(demand: impl Into<IdPattern>, week: WeekPattern, enforce: Enforce) -> Self {
        Constraint {
            kind: ConstraintKind::DockDate,
            demand_id: demand.into(),
            supplier_id: IdPattern::Any,
            week,
            method: None,
            enforce,
        }
    }

    pub fn supply_pairing(
        supplier: impl Into<IdPattern>,
        demand: impl Into<IdPattern>,
        week: WeekPattern,
        enforce: Enforce,
    ) -> Self {
        Constraint {
            kind: ConstraintKind::SupplyPairing,
            demand_id: demand.into(),
            supplier_id: supplier.into(),
            week,
            method: None,
            enforce,
        }
    }

    pub fn shipping_method(
        demand: impl Into<IdPattern>,
        method: impl Into<String>,
        enforce: Enforce,
    ) -> Self {
        Constraint {
            kind: ConstraintKind::ShippingMethod,
            demand_id: demand.into(),
            supplier_id: IdPattern::Any,
            week: WeekPattern::Any,
            method: Some(method.into()),
            enforce,
        }
    }

    pub fn check(&self) -> Result<(), ConstraintError> {
        if self.kind == ConstraintKind::ShippingMethod && self.method.is_none() {
            return Err(ConstraintError::MissingMethod);
        }
        Ok(())
    }
}

/// Whether a plan line falls inside the constraint's scope.
///
/// DockDate constraints test the dock week; supply-pairing and shipping-method
/// constraints test the ship week.
pub fn constraint_matches(c: &Constraint, line: &PlanLine, horizon: &Horizon) -> bool {
    if !c.demand_id.matches(&line.demand_id) {
        return false;
    }
    match c.kind {
        ConstraintKind::DockDate => c.week.matches(line.dock_week, horizon),
        ConstraintKind::SupplyPairing => {
            c.supplier_id.matches(&line.supplier_id) && c.week.matches(line.ship_week, horizon)
        }
        ConstraintKind::ShippingMethod => {
            c.method.as_deref().is_none_or(|m| m == line.method)
                && c.week.matches(line.ship_week, horizon)
        }
    }
}

/// A line is admissible when it matches no Prohibit constraint and matches
/// every Exact Match constraint whose demand selector covers its demand.
pub fn line_admissible<'a>(
    constraints: impl IntoIterator<Item = &'a Constraint>,
    line: &PlanLine,
    horizon: &Horizon,
) -> bool {
    constraints.into_iter().all(|c| match c.enforce {
        Enforce::Prohibit => !constraint_matches(c, line, horizon),
        Enforce::ExactMatch => {
            !c.demand_id.matches(&line.demand_id) || constraint_matches(c, line, horizon)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub table: String,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]: {}", self.table, self.key, self.message)
    }
}

/// Checks every type invariant. Returns all violations found; empty means valid.
pub fn validate_instance(inst: &PlanningInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |table: &str, key: &str, message: String| {
        out.push(Violation {
            table: table.to_string(),
            key: key.to_string(),
            message,
        })
    };

    if inst.horizon.num_weeks < 1 {
        push("horizon", "num_weeks", "num_weeks must be >= 1".into());
    }

    let mut seen = HashSet::new();
    for d in &inst.demands {
        if d.racks < 1 {
            push("demand", &d.id, "racks must be >= 1".into());
        }
        if !seen.insert(d.id.as_str()) {
            push("demand", &d.id, "duplicate demand id".into());
        }
    }

    let mut seen = HashSet::new();
    for s in &inst.suppliers {
        if !seen.insert(s.id.as_str()) {
            push("supplier", &s.id, "duplicate supplier id".into());
        }
    }
    let supplier_ids = seen;

    let mut seen = HashSet::new();
    for r in &inst.inventory {
        let key = format!("{}/{}", r.supplier_id, r.week);
        if r.quantity < 0 {
            push("inventory", &key, "quantity must be >= 0".into());
        }
        if !seen.insert((r.supplier_id.as_str(), r.week)) {
            push("inventory", &key, "duplicate (supplier_id, week)".into());
        }
        if !supplier_ids.contains(r.supplier_id.as_str()) {
            push("inventory", &key, "unknown supplier".into());
        }
    }

    for (i, s) in inst.shipments.iter().enumerate() {
        if s.quantity < 1 {
            push("shipment", &i.to_string(), "quantity must be >= 1".into());
        }
    }

    let mut seen = HashSet::new();
    for m in &inst.methods {
        if !seen.insert(m.name.as_str()) {
            push("methods", &m.name, "duplicate method name".into());
        }
        if m.cost_per_rack.is_negative() {
            push("methods", &m.name, "cost_per_rack must be >= 0".into());
        }
        if m.cross_geo_multiplier < Fixed::ONE {
            push("methods", &m.name, "cross_geo_multiplier must be >= 1".into());
        }
    }
    if let Some(p) = inst.method("priority") {
        for m in inst.methods.iter().filter(|m| m.name != "priority") {
            if p.lead_time_weeks > m.lead_time_weeks {
                push(
                    "methods",
                    "priority",
                    format!("priority lead time exceeds lead time of {}", m.name),
                );
            }
        }
    }

    if inst.cost.lateness_penalty_per_week.is_negative() || inst.cost.earliness_penalty().is_negative() {
        push("cost_config", "penalty", "penalties must be >= 0".into());
    }
    out
}
