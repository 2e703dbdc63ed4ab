mod common;

use std::sync::Arc;

use chrono::NaiveDate;
use common::*;
use fulfil_core::dsl::{interpolate, parse_script, run_script, ExecEnv, ExecStatus, Value};
use fulfil_core::model::*;
use fulfil_core::optimizer::{solve, ModelState, PlanStore};
use fulfil_core::query::store::{ColType, Table};
use fulfil_core::query::{self, TableStore};
use fulfil_core::{Fixed, PlanningInstance};
use proptest::prelude::*;

struct World {
    store: TableStore,
    model: ModelState,
    plans: PlanStore,
}

impl World {
    fn new(inst: PlanningInstance) -> Self {
        World {
            store: TableStore::from_instance(&inst),
            model: ModelState::new(Arc::new(inst)),
            plans: PlanStore::default(),
        }
    }

    fn reference() -> Self {
        Self::new(reference_instance())
    }

    fn run(&mut self, text: &str) -> fulfil_core::dsl::ExecutionResult {
        let mut env = ExecEnv::new(&self.store, &mut self.model, &mut self.plans);
        run_script(text, &mut env)
    }
}

fn snippet(name: &str, slots: &[(&str, &str)]) -> String {
    fill(&corpus(name), slots)
}

/// One demand (5 racks, ideal week 3), one supplier with 10 racks every week,
/// one method (lead 2, 1.0 per rack), penalty 10.
fn single() -> PlanningInstance {
    let week0 = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
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
                record_date: week0 + chrono::Duration::days(7 * w as i64),
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
            week0_start: week0,
            now: Some(NaiveDate::from_ymd_opt(2024, 2, 5).unwrap()),
        },
        cost: CostConfig::symmetric(Fixed::from_int(10)),
    }
}

fn shipment_store(now: NaiveDate, rows: &[(i64, &str, &str)]) -> TableStore {
    let mut t = Table::new(&[
        ("date", ColType::Date),
        ("quantity", ColType::Int),
        ("src_geo", ColType::Str),
        ("dest_geo", ColType::Str),
        ("method", ColType::Str),
    ]);
    for (q, s, d) in rows {
        t.rows.push(vec![
            query::Value::Date(now),
            query::Value::Int(*q),
            query::Value::Str(s.to_string()),
            query::Value::Str(d.to_string()),
            query::Value::Str("ground".into()),
        ]);
    }
    TableStore::empty(now).with_table("shipment", t).unwrap()
}

#[test]
fn every_corpus_snippet_parses() {
    for name in [
        "inventory_stddev.dsl",
        "cross_geo_fraction.dsl",
        "optimize_plan.dsl",
        "update_plan.dsl",
        "dock_demand_ideal.dsl",
        "whatif_region_month.dsl",
    ] {
        let text = snippet(name, &[("S", "s1"), ("T", "4"), ("D", "D1"), ("R", "west"), ("M", "2")]);
        parse_script(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let script = parse_script(&corpus("optimize_plan.dsl")).unwrap();
    assert_eq!(script.statements.len(), 1);
}

#[test]
fn inventory_stddev_snippet() {
    let mut w = World::new(single());
    let r = w.run(&snippet("inventory_stddev.dsl", &[("S", "s1"), ("T", "4")]));
    assert_eq!(r.status, ExecStatus::Ok, "{r:?}");
    assert_eq!(r.logs, vec!["The std is 0"]);

    // population deviation of the reference history, computed directly
    let inst = reference_instance();
    let now = inst.horizon.now();
    let xs: Vec<f64> = inst
        .inventory
        .iter()
        .filter(|r| r.supplier_id == "s2" && (now - r.record_date).num_days() <= 28)
        .map(|r| r.quantity as f64)
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    let mut w = World::reference();
    let r = w.run(&snippet("inventory_stddev.dsl", &[("S", "s2"), ("T", "4")]));
    let shown: f64 = r.logs[0].strip_prefix("The std is ").unwrap().parse().unwrap();
    assert!((shown - sd).abs() < 5e-5, "{shown} vs {sd}");
}

#[test]
fn cross_geo_snippet_on_empty_and_mixed_shipments() {
    let now = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
    let text = snippet("cross_geo_fraction.dsl", &[("T", "4")]);
    let inst = single();
    let mut model = ModelState::new(Arc::new(inst));
    let mut plans = PlanStore::default();

    let empty = shipment_store(now, &[]);
    let r = run_script(&text, &mut ExecEnv::new(&empty, &mut model, &mut plans));
    assert_eq!(r.status, ExecStatus::Ok, "{r:?}");
    assert_eq!(r.logs, vec!["No shipments at all"]);

    let mixed = shipment_store(now, &[(4, "US", "EU"), (6, "US", "US")]);
    let r = run_script(&text, &mut ExecEnv::new(&mixed, &mut model, &mut plans));
    assert_eq!(r.logs, vec!["40.0"]);
}

#[test]
fn optimize_and_update_snippets() {
    let mut w = World::new(single());
    let r = w.run(&corpus("optimize_plan.dsl"));
    assert!(r.is_ok() && r.logs.is_empty());
    assert_eq!(w.model.objective(), Some(Fixed::from_int(5)));
    let r = w.run(&corpus("update_plan.dsl"));
    assert!(r.is_ok(), "{r:?}");
    assert_eq!(w.plans.version(), 1);
    let line = &w.plans.current.as_ref().unwrap().lines[0];
    assert_eq!(line.ship_week, 1);
}

#[test]
fn dock_demand_snippet_both_branches() {
    // feasible: demand D docks on time in the single-supplier world
    let mut w = World::new(single());
    let r = w.run(&snippet("dock_demand_ideal.dsl", &[("D", "D")]));
    assert_eq!(r.status, ExecStatus::Ok, "{r:?}");
    assert_eq!(r.logs, vec!["Plan updated with cost 5.0"]);
    assert_eq!(w.plans.version(), 1);
    assert_eq!(w.model.baseline_constraints.len(), 1);

    // feasible on the reference fixture
    let mut w = World::reference();
    let r = w.run(&snippet("dock_demand_ideal.dsl", &[("D", "D1")]));
    assert_eq!(r.status, ExecStatus::Ok, "{r:?}");
    assert!(r.logs[0].starts_with("Plan updated with cost "), "{r:?}");
    let plan = w.plans.current.as_ref().unwrap();
    let d1 = plan.lines.iter().find(|l| l.demand_id == "D1").unwrap();
    assert_eq!(d1.dock_week, 4);

    // infeasible: D6 wants week 0 but every method has a lead time
    let mut w = World::reference();
    let r = w.run(&snippet("dock_demand_ideal.dsl", &[("D", "D6")]));
    assert_eq!(r.status, ExecStatus::Ok, "{r:?}");
    assert_eq!(r.logs, vec!["Sorry, impossible to dock demand D6 at its ideal date."]);
    assert_eq!(w.plans.version(), 0);
}

#[test]
fn what_if_snippet_both_branches() {
    let mut w = World::reference();
    let base = w.model.optimize().unwrap().objective.unwrap();
    let before = w.model.clone();
    let r = w.run(&snippet("whatif_region_month.dsl", &[("R", "west"), ("M", "2")]));
    assert_eq!(r.status, ExecStatus::Ok, "{r:?}");
    assert_eq!(w.model.scenario_constraints, before.scenario_constraints);

    let cs: Vec<Constraint> = ["s1", "s2"]
        .iter()
        .map(|s| {
            Constraint::supply_pairing(*s, "*", WeekPattern::Month { year: 2024, month: 2 }, Enforce::Prohibit)
        })
        .collect();
    let cost = solve(&reference_instance(), &cs).unwrap().objective.expect("scenario feasible");
    let expected = fulfil_core::dsl::value::format_decimal(cost.to_f64(), false);
    assert_eq!(r.logs, vec![format!("Cost will be {expected}")]);
    assert!(cost >= base);

    let r = w.run(&snippet("whatif_region_month.dsl", &[("R", "south"), ("M", "2")]));
    assert_eq!(r.logs, vec!["No supplies in south."]);
}

#[test]
fn interpolation_rules() {
    let mut w = World::new(single());
    w.model.optimize().unwrap();
    let mut env = ExecEnv::new(&w.store, &mut w.model, &mut w.plans);
    env.bindings.insert("ans".into(), Value::Int(0));
    assert_eq!(interpolate("The std is {ans}", &mut env).unwrap(), "The std is 0");
    assert_eq!(interpolate("Cost will be {model.objVal}", &mut env).unwrap(), "Cost will be 5");
    assert!(interpolate("{x}", &mut env).is_err());
    env.bindings.insert("n".into(), Value::None);
    assert_eq!(interpolate("{n}", &mut env).unwrap(), "None");
}

#[test]
fn runaway_loops_hit_the_budget() {
    let mut w = World::new(single());
    let text = "xs = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]\nfor a in xs:\n    for b in xs:\n        for c in xs:\n            for d in xs:\n                logger.log(a)\n";
    let r = w.run(text);
    assert_eq!(r.status, ExecStatus::BudgetExceeded);
    assert!(r.error_detail.is_some());
}

#[test]
fn runtime_errors_are_reported() {
    let mut w = World::new(single());
    for text in ["logger.log(1 / 0)", "logger.log(y)", "x = 'a' + 1", "plan.update()\nmodel.reset()\nx = [1][5]"] {
        let r = w.run(text);
        assert_eq!(r.status, ExecStatus::RuntimeError, "{text}");
        assert!(r.error_detail.as_deref().unwrap().starts_with("line "), "{r:?}");
    }
    let r = w.run("demand.add_constraint(demand_id='D', date='2024-13-*', enforce='Exact Match')");
    assert_eq!(r.status, ExecStatus::RuntimeError);
    let r = w.run("shipping.add_constraint(demand_id='D', method='teleport', enforce='Exact Match')");
    assert_eq!(r.status, ExecStatus::RuntimeError);
    let r = w.run("import os");
    assert_eq!(r.status, ExecStatus::ParseError);
}

#[test]
fn infeasible_commit_is_a_runtime_error() {
    let mut w = World::new(single());
    let r = w.run("supply.add_constraint(supply_id='s1', enforce='Prohibit')\nmodel.optimize()\nplan.update()");
    assert_eq!(r.status, ExecStatus::RuntimeError, "{r:?}");
    assert_eq!(w.plans.version(), 0);
}

#[test]
fn priority_shipping_constraint() {
    let mut inst = single();
    inst.methods.push(ShippingMethod {
        name: "priority".into(),
        lead_time_weeks: 1,
        cost_per_rack: Fixed::from_int(3),
        cross_geo_multiplier: Fixed::ONE,
    });
    let mut w = World::new(inst);
    let r = w.run(
        "shipping.add_constraint(demand_id='D', method='priority', enforce='Exact Match')\nmodel.optimize()\nplan.update()\nlogger.log(f\"{model.objVal}\")",
    );
    assert_eq!(r.logs, vec!["15"], "{r:?}");
    assert_eq!(w.plans.current.as_ref().unwrap().lines[0].method, "priority");
}

fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0i64..100).prop_map(|i| i.to_string()),
        (0u32..1000).prop_map(|i| format!("{}.{}", i / 10, i % 10)),
        Just("x".to_string()),
        Just("'s'".to_string()),
        Just("None".to_string()),
        Just("[1, 2]".to_string()),
        Just("model.feasible".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "//", "%", "==", "<", "and", "or"]))
                .prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("(not {a})")),
            inner.prop_map(|a| format!("len([{a}])")),
        ]
    })
}

proptest! {
    /// Arbitrary expression programs only ever log or fail cleanly, and do so
    /// identically on every run.
    #[test]
    fn execution_is_deterministic_and_contained(e in arb_expr(), loops in 0usize..3) {
        let mut text = format!("x = 3\ny = {e}\nlogger.log(y)\nlogger.log(f\"v={{{e}}}\")\n");
        for _ in 0..loops {
            text.push_str(&format!("for i in [1, 2, 3]:\n    logger.log({e}, i)\n"));
        }
        let mut a = World::new(single());
        let mut b = World::new(single());
        let ra = a.run(&text);
        let rb = b.run(&text);
        prop_assert_eq!(&ra, &rb);
        prop_assert!(ra.status != ExecStatus::ParseError, "{:?}", ra);
        prop_assert_eq!(a.model.clone(), ModelState::new(Arc::new(single())));
        prop_assert_eq!(a.plans.version(), 0);
    }
}
