//! Exact plan optimizer: the state behind `model.*` and `plan.*`.
//!
//! The assignment problem gives each demand one (supplier, method, ship week)
//! triple subject to per-(supplier, week) inventory and the active
//! constraints. It is solved by depth-first branch and bound over demands in
//! descending rack order. Among equal-cost optima the one whose choices,
//! listed in demand-id order, are lexicographically smallest by
//! (supplier id, method name, ship week) wins.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fixed::Fixed;
use crate::model::{
    dock_week, line_admissible, line_cost, validate_instance, Constraint, ConstraintError, Plan,
    PlanLine, PlanningInstance, Violation, Week,
};

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("instance is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommitError {
    #[error("cannot commit an infeasible solve outcome")]
    Infeasible,
    #[error("no solve outcome to commit")]
    NoOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub feasible: bool,
    pub objective: Option<Fixed>,
    /// Candidate plan (version 0) when feasible.
    pub assignment: Option<Plan>,
    pub nodes_explored: u64,
}

impl SolveOutcome {
    fn infeasible(nodes_explored: u64) -> Self {
        SolveOutcome {
            feasible: false,
            objective: None,
            assignment: None,
            nodes_explored,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Baseline,
    Scenario,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfOutcome {
    pub feasible: bool,
    pub scenario_objective: Option<Fixed>,
    pub baseline_objective: Option<Fixed>,
    /// Absent when either side is infeasible.
    pub delta: Option<Fixed>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Candidate {
    supplier: usize,
    method: usize,
    ship_week: Week,
    dock_week: Week,
    cost: i64,
    /// Position among this demand's candidates in tie-break key order.
    rank: u32,
}

struct Search<'a> {
    inst: &'a PlanningInstance,
    /// Instance demand index for each search position.
    order: Vec<usize>,
    cands: Vec<Vec<Candidate>>,
    racks: Vec<i64>,
    suffix_min: Vec<i64>,
    /// Search positions listed in demand-id order.
    id_order: Vec<usize>,
    weeks: usize,
    remaining: Vec<i64>,
    current: Vec<usize>,
    best: Option<(i64, Vec<usize>)>,
    nodes: u64,
}

impl Search<'_> {
    fn rank_at(&self, pos: usize, choice: usize) -> u32 {
        self.cands[pos][choice].rank
    }

    /// Could a completion of the first `depth` choices beat the incumbent's
    /// tie-break key? Unassigned positions take their smallest rank.
    fn key_may_improve(&self, depth: usize) -> bool {
        let Some((_, best)) = &self.best else {
            return true;
        };
        for &pos in &self.id_order {
            let mine = if pos < depth {
                self.rank_at(pos, self.current[pos])
            } else {
                0
            };
            let theirs = self.rank_at(pos, best[pos]);
            match mine.cmp(&theirs) {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
        false
    }

    fn dfs(&mut self, depth: usize, partial: i64) {
        self.nodes += 1;
        if let Some((best_cost, _)) = &self.best {
            let bound = partial + self.suffix_min[depth];
            if bound > *best_cost || (bound == *best_cost && !self.key_may_improve(depth)) {
                return;
            }
        }
        if depth == self.order.len() {
            self.best = Some((partial, self.current.clone()));
            return;
        }
        let racks = self.racks[depth];
        for i in 0..self.cands[depth].len() {
            let (cost, slot) = {
                let c = &self.cands[depth][i];
                (c.cost, c.supplier * self.weeks + c.ship_week as usize)
            };
            if let Some((best_cost, _)) = &self.best {
                if partial + cost + self.suffix_min[depth + 1] > *best_cost {
                    break;
                }
            }
            if self.remaining[slot] < racks {
                continue;
            }
            self.remaining[slot] -= racks;
            self.current[depth] = i;
            self.dfs(depth + 1, partial + cost);
            self.remaining[slot] += racks;
        }
    }
}

/// Solves the assignment problem exactly under the given constraints.
pub fn solve<'a>(
    inst: &PlanningInstance,
    constraints: impl IntoIterator<Item = &'a Constraint> + Clone,
) -> Result<SolveOutcome, OptimizeError> {
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(OptimizeError::Invalid(violations));
    }
    let weeks = inst.horizon.num_weeks as usize;

    let mut order: Vec<usize> = (0..inst.demands.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&inst.demands[a], &inst.demands[b]);
        db.racks.cmp(&da.racks).then_with(|| da.id.cmp(&db.id))
    });

    let mut cands = Vec::with_capacity(order.len());
    for &di in &order {
        let demand = &inst.demands[di];
        let mut list: Vec<(Candidate, (&str, &str, Week))> = Vec::new();
        for (si, supplier) in inst.suppliers.iter().enumerate() {
            for (mi, method) in inst.methods.iter().enumerate() {
                for ship_week in 0..inst.horizon.num_weeks {
                    if inst.capacity(&supplier.id, ship_week) < demand.racks as i64 {
                        continue;
                    }
                    let line = PlanLine {
                        demand_id: demand.id.clone(),
                        supplier_id: supplier.id.clone(),
                        method: method.name.clone(),
                        ship_week,
                        dock_week: dock_week(ship_week, method),
                        line_cost: Fixed::ZERO,
                    };
                    if !line_admissible(constraints.clone(), &line, &inst.horizon) {
                        continue;
                    }
                    let cost = line_cost(demand, supplier, method, ship_week, &inst.cost).raw();
                    list.push((
                        Candidate {
                            supplier: si,
                            method: mi,
                            ship_week,
                            dock_week: line.dock_week,
                            cost,
                            rank: 0,
                        },
                        (supplier.id.as_str(), method.name.as_str(), ship_week),
                    ));
                }
            }
        }
        if list.is_empty() {
            return Ok(SolveOutcome::infeasible(0));
        }
        list.sort_by(|a, b| a.1.cmp(&b.1));
        for (r, (c, _)) in list.iter_mut().enumerate() {
            c.rank = r as u32;
        }
        let mut v: Vec<Candidate> = list.into_iter().map(|(c, _)| c).collect();
        v.sort_by(|a, b| a.cost.cmp(&b.cost).then(a.rank.cmp(&b.rank)));
        cands.push(v);
    }

    let mut suffix_min = vec![0i64; order.len() + 1];
    for pos in (0..order.len()).rev() {
        suffix_min[pos] = suffix_min[pos + 1] + cands[pos][0].cost;
    }
    let mut id_order: Vec<usize> = (0..order.len()).collect();
    id_order.sort_by(|&a, &b| inst.demands[order[a]].id.cmp(&inst.demands[order[b]].id));

    let mut remaining = vec![0i64; inst.suppliers.len() * weeks];
    for (si, s) in inst.suppliers.iter().enumerate() {
        for w in 0..weeks {
            remaining[si * weeks + w] = inst.capacity(&s.id, w as Week);
        }
    }

    let mut search = Search {
        inst,
        racks: order.iter().map(|&d| inst.demands[d].racks as i64).collect(),
        order,
        cands,
        suffix_min,
        id_order,
        weeks,
        remaining,
        current: vec![0; inst.demands.len()],
        best: None,
        nodes: 0,
    };
    search.dfs(0, 0);

    let Some((total, choice)) = search.best.take() else {
        return Ok(SolveOutcome::infeasible(search.nodes));
    };
    let mut lines: Vec<(usize, PlanLine)> = search
        .order
        .iter()
        .enumerate()
        .map(|(pos, &di)| {
            let c = &search.cands[pos][choice[pos]];
            let inst = search.inst;
            (
                di,
                PlanLine {
                    demand_id: inst.demands[di].id.clone(),
                    supplier_id: inst.suppliers[c.supplier].id.clone(),
                    method: inst.methods[c.method].name.clone(),
                    ship_week: c.ship_week,
                    dock_week: c.dock_week,
                    line_cost: Fixed::from_raw(c.cost),
                },
            )
        })
        .collect();
    lines.sort_by_key(|(di, _)| *di);
    let objective = Fixed::from_raw(total);
    Ok(SolveOutcome {
        feasible: true,
        objective: Some(objective),
        assignment: Some(Plan {
            version: 0,
            total_cost: objective,
            lines: lines.into_iter().map(|(_, l)| l).collect(),
        }),
        nodes_explored: search.nodes,
    })
}

/// Model host: the instance, two constraint lists and the last solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelState {
    pub instance: Arc<PlanningInstance>,
    pub baseline_constraints: Vec<Constraint>,
    pub scenario_constraints: Vec<Constraint>,
    pub last_outcome: Option<SolveOutcome>,
    /// Constraint list the last outcome was solved under.
    pub solved_with: Vec<Constraint>,
}

impl ModelState {
    pub fn new(instance: Arc<PlanningInstance>) -> Self {
        ModelState {
            instance,
            baseline_constraints: Vec::new(),
            scenario_constraints: Vec::new(),
            last_outcome: None,
            solved_with: Vec::new(),
        }
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> + Clone {
        self.baseline_constraints
            .iter()
            .chain(self.scenario_constraints.iter())
    }

    /// Appends a constraint without solving.
    pub fn add_constraint(&mut self, c: Constraint, scope: Scope) -> Result<(), ConstraintError> {
        c.check()?;
        match scope {
            Scope::Baseline => self.baseline_constraints.push(c),
            Scope::Scenario => self.scenario_constraints.push(c),
        }
        Ok(())
    }

    /// Clears scenario constraints; baseline is untouched.
    pub fn reset(&mut self) {
        self.scenario_constraints.clear();
    }

    /// Moves scenario constraints into the baseline.
    pub fn promote_scenario(&mut self) {
        let moved = std::mem::take(&mut self.scenario_constraints);
        self.baseline_constraints.extend(moved);
    }

    pub fn optimize(&mut self) -> Result<&SolveOutcome, OptimizeError> {
        let outcome = solve(&self.instance, self.constraints())?;
        self.solved_with = self.constraints().cloned().collect();
        Ok(self.last_outcome.insert(outcome))
    }

    /// True when the last outcome was solved under the current constraints.
    pub fn outcome_is_current(&self) -> bool {
        self.last_outcome.is_some() && self.constraints().eq(self.solved_with.iter())
    }

    pub fn feasible(&self) -> bool {
        self.last_outcome.as_ref().is_some_and(|o| o.feasible)
    }

    pub fn objective(&self) -> Option<Fixed> {
        self.last_outcome.as_ref().and_then(|o| o.objective)
    }

    /// Solves with `cs` as extra scenario constraints and reports the cost
    /// change against the current model. Leaves `self` exactly as it was.
    pub fn what_if(&mut self, cs: &[Constraint]) -> Result<WhatIfOutcome, OptimizeError> {
        if cs.iter().any(|c| c.check().is_err()) {
            return Ok(WhatIfOutcome {
                feasible: false,
                scenario_objective: None,
                baseline_objective: None,
                delta: None,
            });
        }
        let snapshot = self.clone();
        let baseline = self.optimize().map(|o| o.objective);
        let scenario = baseline.and_then(|b| {
            self.scenario_constraints.extend(cs.iter().cloned());
            let s = self.optimize().map(|o| (o.feasible, o.objective));
            self.reset();
            s.map(|s| (b, s))
        });
        *self = snapshot;
        let (baseline_objective, (feasible, scenario_objective)) = scenario?;
        Ok(WhatIfOutcome {
            feasible,
            scenario_objective,
            baseline_objective,
            delta: match (scenario_objective, baseline_objective) {
                (Some(s), Some(b)) => Some(s - b),
                _ => None,
            },
        })
    }
}

/// Committed plans, append-only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStore {
    pub current: Option<Plan>,
    pub history: Vec<Plan>,
}

impl PlanStore {
    pub fn version(&self) -> u64 {
        self.current.as_ref().map_or(0, |p| p.version)
    }

    /// Commits a feasible outcome as the next plan version.
    pub fn update_plan(&mut self, outcome: &SolveOutcome) -> Result<&Plan, CommitError> {
        let candidate = match (outcome.feasible, &outcome.assignment) {
            (true, Some(plan)) => plan,
            _ => return Err(CommitError::Infeasible),
        };
        let plan = Plan {
            version: self.version() + 1,
            total_cost: candidate.total_cost,
            lines: candidate.lines.clone(),
        };
        self.history.push(plan.clone());
        Ok(self.current.insert(plan))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use chrono::NaiveDate;

    fn single() -> PlanningInstance {
        PlanningInstance {
            name: "single".into(),
            demands: vec![Demand {
                id: "D".into(),
                racks: 5,
                ideal_dock_week: 3,
                dest_geo: "A".into(),
            }],
            suppliers: vec![Supplier {
                id: "s1".into(),
                region: "west".into(),
                src_geo: "A".into(),
            }],
            inventory: (0..6)
                .map(|w| InventoryRecord {
                    supplier_id: "s1".into(),
                    week: w,
                    quantity: 10,
                    record_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
                        + chrono::Duration::days(7 * w as i64),
                })
                .collect(),
            shipments: vec![],
            methods: vec![ShippingMethod {
                name: "ground".into(),
                lead_time_weeks: 2,
                cost_per_rack: Fixed::ONE,
                cross_geo_multiplier: Fixed::ONE,
            }],
            horizon: Horizon {
                num_weeks: 6,
                week0_start: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
                now: None,
            },
            cost: CostConfig::symmetric(Fixed::from_int(10)),
        }
    }

    #[test]
    fn unique_on_time_option() {
        let mut m = ModelState::new(Arc::new(single()));
        let out = m.optimize().unwrap().clone();
        assert!(out.feasible);
        assert_eq!(out.objective, Some(Fixed::from_int(5)));
        let plan = out.assignment.unwrap();
        assert_eq!(plan.lines[0].ship_week, 1);
        assert_eq!(plan.lines[0].dock_week, 3);
    }

    #[test]
    fn prohibiting_only_supplier_is_infeasible() {
        let mut m = ModelState::new(Arc::new(single()));
        m.add_constraint(
            Constraint::supply_pairing("s1", "*", WeekPattern::Any, Enforce::Prohibit),
            Scope::Scenario,
        )
        .unwrap();
        let out = m.optimize().unwrap();
        assert!(!out.feasible);
        assert!(out.objective.is_none() && out.assignment.is_none());
    }

    #[test]
    fn capacity_limits_assignment() {
        let mut inst = single();
        for r in &mut inst.inventory {
            r.quantity = 4;
        }
        assert!(!solve(&inst, &[]).unwrap().feasible);
    }

    #[test]
    fn reset_restores_baseline() {
        let mut m = ModelState::new(Arc::new(single()));
        let base = m.optimize().unwrap().objective;
        m.add_constraint(
            Constraint::dock_date("D", WeekPattern::Week(5), Enforce::ExactMatch),
            Scope::Scenario,
        )
        .unwrap();
        assert_eq!(m.scenario_constraints.len(), 1);
        assert_eq!(m.optimize().unwrap().objective, Some(Fixed::from_int(5 + 100)));
        m.reset();
        assert!(m.scenario_constraints.is_empty());
        m.reset();
        assert_eq!(m.optimize().unwrap().objective, base);
    }

    #[test]
    fn what_if_leaves_state_untouched() {
        let mut m = ModelState::new(Arc::new(single()));
        m.optimize().unwrap();
        let before = m.clone();
        let w = m.what_if(&[]).unwrap();
        assert_eq!(w.delta, Some(Fixed::ZERO));
        let w = m
            .what_if(&[Constraint::supply_pairing("s1", "*", WeekPattern::Any, Enforce::Prohibit)])
            .unwrap();
        assert!(!w.feasible);
        assert!(w.delta.is_none());
        assert_eq!(m, before);
    }

    #[test]
    fn plan_versions_increase() {
        let mut m = ModelState::new(Arc::new(single()));
        let out = m.optimize().unwrap().clone();
        let mut store = PlanStore::default();
        assert_eq!(store.update_plan(&out).unwrap().version, 1);
        assert_eq!(store.update_plan(&out).unwrap().version, 2);
        assert_eq!(store.history.len(), 2);
        let bad = SolveOutcome::infeasible(0);
        assert_eq!(store.update_plan(&bad), Err(CommitError::Infeasible));
        assert_eq!(store.version(), 2);
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let mut inst = single();
        inst.demands[0].racks = 0;
        assert!(matches!(solve(&inst, &[]), Err(OptimizeError::Invalid(_))));
    }

    #[test]
    fn tie_break_prefers_smaller_supplier_id() {
        let mut inst = single();
        inst.suppliers.push(Supplier {
            id: "s0".into(),
            region: "east".into(),
            src_geo: "A".into(),
        });
        let extra: Vec<_> = inst
            .inventory
            .iter()
            .map(|r| InventoryRecord {
                supplier_id: "s0".into(),
                ..r.clone()
            })
            .collect();
        inst.inventory.extend(extra);
        let out = solve(&inst, &[]).unwrap();
        assert_eq!(out.assignment.unwrap().lines[0].supplier_id, "s0");
    }
}
