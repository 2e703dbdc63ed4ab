//! Shared fixtures and independent oracles for integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use chrono::{Datelike, Duration, NaiveDate};
use fulfil_core::model::*;
use fulfil_core::{Fixed, PlanningInstance};
use rand::Rng;

pub mod query_oracle;

/// (supplier, method, ship_week) for one demand.
pub type Choice = (String, String, u32);
/// Objective in ten-thousandths and the choice per demand.
pub type Solution = (i64, Vec<Choice>);

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn reference_dir() -> PathBuf {
    repo_root().join("data/reference")
}

pub fn reference_instance() -> PlanningInstance {
    fulfil_core::io::load_instance(reference_dir()).expect("reference fixture loads")
}

/// Replaces whole-word slot names (`S`, `T`, ...) with values.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let map: HashMap<&str, &str> = slots.iter().copied().collect();
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        match map.get(word.as_str()) {
            Some(v) => out.push_str(v),
            None => out.push_str(word),
        }
        word.clear();
    };
    for c in template.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

pub fn corpus(name: &str) -> String {
    std::fs::read_to_string(repo_root().join("corpus/snippets").join(name)).unwrap()
}

/// Exhaustive oracle: (objective in ten-thousandths, chosen (supplier, method,
/// ship_week) per demand in instance order) or None if infeasible. Ties go to
/// the lexicographically smallest choice list taken in demand-id order.
pub fn brute_force(
    inst: &PlanningInstance,
    cons: &[Constraint],
) -> Option<Solution> {
    let week_start = |w: u32| inst.horizon.week0_start + Duration::days(7 * w as i64);
    let week_in = |p: &WeekPattern, w: u32| match p {
        WeekPattern::Any => true,
        WeekPattern::Week(x) => *x == w,
        WeekPattern::Month { year, month } => {
            let d = week_start(w);
            d.year() == *year && d.month() == *month
        }
    };
    let id_in = |p: &IdPattern, id: &str| match p {
        IdPattern::Any => true,
        IdPattern::Id(x) => x == id,
    };
    let in_scope = |c: &Constraint, d: &str, s: &str, m: &str, ship: u32, dock: u32| {
        id_in(&c.demand_id, d)
            && match c.kind {
                ConstraintKind::DockDate => week_in(&c.week, dock),
                ConstraintKind::SupplyPairing => id_in(&c.supplier_id, s) && week_in(&c.week, ship),
                ConstraintKind::ShippingMethod => {
                    c.method.as_deref() == Some(m) && week_in(&c.week, ship)
                }
            }
    };
    let allowed = |d: &str, s: &str, m: &str, ship: u32, dock: u32| {
        cons.iter().all(|c| match c.enforce {
            Enforce::Prohibit => !in_scope(c, d, s, m, ship, dock),
            Enforce::ExactMatch => !id_in(&c.demand_id, d) || in_scope(c, d, s, m, ship, dock),
        })
    };
    let cap = |s: &str, w: u32| -> i64 {
        inst.inventory
            .iter()
            .filter(|r| r.supplier_id == s && r.week == w)
            .map(|r| r.quantity)
            .sum()
    };
    let earl = inst.cost.earliness_penalty_per_week.unwrap_or(inst.cost.lateness_penalty_per_week);
    let options: Vec<Vec<(i64, Choice)>> = inst
        .demands
        .iter()
        .map(|d| {
            let mut v = Vec::new();
            for s in &inst.suppliers {
                for m in &inst.methods {
                    for w in 0..inst.horizon.num_weeks {
                        let dock = w + m.lead_time_weeks;
                        if !allowed(&d.id, &s.id, &m.name, w, dock) {
                            continue;
                        }
                        let r = d.racks as i64;
                        let mut shipping = r * m.cost_per_rack.raw();
                        if s.src_geo != d.dest_geo {
                            // ten-thousandths product, rounded half away from zero
                            let p = shipping as i128 * m.cross_geo_multiplier.raw() as i128;
                            let q = (p.abs() + 5_000) / 10_000;
                            shipping = (if p < 0 { -q } else { q }) as i64;
                        }
                        let pen = if dock >= d.ideal_dock_week {
                            inst.cost.lateness_penalty_per_week
                        } else {
                            earl
                        };
                        let gap = (dock as i64 - d.ideal_dock_week as i64).abs();
                        let cost = shipping + r * pen.raw() * gap;
                        v.push((cost, (s.id.clone(), m.name.clone(), w)));
                    }
                }
            }
            v
        })
        .collect();
    let mut id_order: Vec<usize> = (0..inst.demands.len()).collect();
    id_order.sort_by(|&a, &b| inst.demands[a].id.cmp(&inst.demands[b].id));

    let mut best: Option<Solution> = None;
    let mut pick: Vec<usize> = vec![0; inst.demands.len()];
    let mut used: HashMap<(String, u32), i64> = HashMap::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        cost: i64,
        inst: &PlanningInstance,
        options: &[Vec<(i64, Choice)>],
        pick: &mut Vec<usize>,
        used: &mut HashMap<(String, u32), i64>,
        cap: &dyn Fn(&str, u32) -> i64,
        id_order: &[usize],
        best: &mut Option<Solution>,
    ) {
        if i == options.len() {
            let choice: Vec<Choice> =
                (0..options.len()).map(|d| options[d][pick[d]].1.clone()).collect();
            let better = match best {
                None => true,
                Some((bc, bchoice)) => {
                    cost < *bc
                        || (cost == *bc && {
                            let a: Vec<_> = id_order.iter().map(|&d| &choice[d]).collect();
                            let b: Vec<_> = id_order.iter().map(|&d| &bchoice[d]).collect();
                            a < b
                        })
                }
            };
            if better {
                *best = Some((cost, choice));
            }
            return;
        }
        let racks = inst.demands[i].racks as i64;
        for (k, (c, (s, _, w))) in options[i].iter().enumerate() {
            let key = (s.clone(), *w);
            let u = used.get(&key).copied().unwrap_or(0);
            if u + racks > cap(s, *w) {
                continue;
            }
            used.insert(key.clone(), u + racks);
            pick[i] = k;
            rec(i + 1, cost + c, inst, options, pick, used, cap, id_order, best);
            used.insert(key, u);
        }
    }
    rec(0, 0, inst, &options, &mut pick, &mut used, &cap, &id_order, &mut best);
    best
}

/// Random small instance: up to `max_d` demands, 3 suppliers, 2 methods, 6 weeks.
pub fn random_instance(rng: &mut impl Rng, max_d: usize) -> PlanningInstance {
    let geos = ["A", "B"];
    let nd = rng.random_range(1..=max_d);
    let ns = rng.random_range(1..=3);
    let nm = rng.random_range(1..=2);
    let weeks = rng.random_range(2..=6u32);
    let demands = (0..nd)
        .map(|i| Demand {
            id: format!("D{i}"),
            racks: rng.random_range(1..=6),
            ideal_dock_week: rng.random_range(0..weeks + 2),
            dest_geo: geos[rng.random_range(0..2)].into(),
        })
        .collect();
    let suppliers: Vec<Supplier> = (0..ns)
        .map(|i| Supplier {
            id: format!("s{i}"),
            region: ["west", "east"][i % 2].into(),
            src_geo: geos[rng.random_range(0..2)].into(),
        })
        .collect();
    let week0 = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    let mut inventory = Vec::new();
    for s in &suppliers {
        for w in 0..weeks {
            if rng.random_bool(0.8) {
                inventory.push(InventoryRecord {
                    supplier_id: s.id.clone(),
                    week: w,
                    quantity: rng.random_range(0..=12),
                    record_date: week0 + Duration::days(7 * w as i64),
                });
            }
        }
    }
    let mut methods = vec![ShippingMethod {
        name: "ground".into(),
        lead_time_weeks: rng.random_range(1..=2),
        cost_per_rack: Fixed::from_raw(rng.random_range(1..=40) * 2_500),
        cross_geo_multiplier: Fixed::from_raw(rng.random_range(10..=20) * 1_000),
    }];
    if nm == 2 {
        methods.push(ShippingMethod {
            name: "priority".into(),
            lead_time_weeks: rng.random_range(0..=methods[0].lead_time_weeks),
            cost_per_rack: Fixed::from_raw(rng.random_range(1..=60) * 2_500),
            cross_geo_multiplier: Fixed::from_raw(rng.random_range(10..=20) * 1_000),
        });
    }
    let earliness = if rng.random_bool(0.5) {
        Some(Fixed::from_raw(rng.random_range(0..=8) * 5_000))
    } else {
        None
    };
    PlanningInstance {
        name: "random".into(),
        demands,
        suppliers,
        inventory,
        shipments: Vec::new(),
        methods,
        horizon: Horizon {
            num_weeks: weeks,
            week0_start: week0,
            now: None,
        },
        cost: CostConfig {
            lateness_penalty_per_week: Fixed::from_raw(rng.random_range(0..=8) * 5_000),
            earliness_penalty_per_week: earliness,
        },
    }
}

/// Random constraint over the instance's ids.
pub fn random_constraint(rng: &mut impl Rng, inst: &PlanningInstance) -> Constraint {
    let enforce = if rng.random_bool(0.6) {
        Enforce::Prohibit
    } else {
        Enforce::ExactMatch
    };
    let demand: IdPattern = if rng.random_bool(0.3) {
        IdPattern::Any
    } else {
        IdPattern::Id(inst.demands[rng.random_range(0..inst.demands.len())].id.clone())
    };
    let week = match rng.random_range(0..4) {
        0 => WeekPattern::Any,
        1 => WeekPattern::Month { year: 2024, month: rng.random_range(1..=2) },
        _ => WeekPattern::Week(rng.random_range(0..inst.horizon.num_weeks + 2)),
    };
    match rng.random_range(0..3) {
        0 => Constraint::dock_date(demand, week, enforce),
        1 => {
            let s = inst.suppliers[rng.random_range(0..inst.suppliers.len())].id.clone();
            Constraint::supply_pairing(s, demand, week, enforce)
        }
        _ => {
            let m = inst.methods[rng.random_range(0..inst.methods.len())].name.clone();
            let mut c = Constraint::shipping_method(demand, m, enforce);
            c.week = week;
            c
        }
    }
}
