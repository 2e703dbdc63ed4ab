//! Budgeted tree-walking interpreter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::parser::parse_script;
use super::value::Value;
use crate::model::{Constraint, Enforce, WeekPattern};
use crate::optimizer::{ModelState, PlanStore, Scope};
use crate::query::{self, TableStore};

pub const DEFAULT_STEP_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    ParseError,
    RuntimeError,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub logs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

impl ExecutionResult {
    pub fn is_ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }
}

/// Everything a snippet can touch.
pub struct ExecEnv<'a> {
    pub store: &'a TableStore,
    pub model: &'a mut ModelState,
    pub plans: &'a mut PlanStore,
    pub step_budget: u64,
    pub bindings: BTreeMap<String, Value>,
    pub log: Vec<String>,
    /// Host calls made, in order.
    pub trace: Vec<HostFn>,
    /// Where `add_constraint` calls land.
    pub scope: Scope,
    steps: u64,
}

impl<'a> ExecEnv<'a> {
    pub fn new(store: &'a TableStore, model: &'a mut ModelState, plans: &'a mut PlanStore) -> Self {
        ExecEnv {
            store,
            model,
            plans,
            step_budget: DEFAULT_STEP_BUDGET,
            bindings: BTreeMap::new(),
            log: Vec::new(),
            trace: Vec::new(),
            scope: Scope::Scenario,
            steps: 0,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.step_budget = budget;
        self
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

enum Halt {
    Runtime(String),
    Budget,
}

type Flow<T> = Result<T, Halt>;

fn fail<T>(msg: impl Into<String>) -> Flow<T> {
    Err(Halt::Runtime(msg.into()))
}

struct Interp<'e, 'a> {
    env: &'e mut ExecEnv<'a>,
}

impl Interp<'_, '_> {
    fn tick(&mut self) -> Flow<()> {
        if self.env.steps >= self.env.step_budget {
            return Err(Halt::Budget);
        }
        self.env.steps += 1;
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> Flow<()> {
        for s in stmts {
            self.stmt(s).map_err(|h| match h {
                Halt::Runtime(m) if !m.starts_with("line ") => Halt::Runtime(format!("line {}: {m}", s.line)),
                other => other,
            })?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Flow<()> {
        self.tick()?;
        match &s.kind {
            StmtKind::Pass => Ok(()),
            StmtKind::Assign(name, e) => {
                let v = self.expr(e)?;
                self.env.bindings.insert(name.clone(), v);
                Ok(())
            }
            StmtKind::Expr(e) => self.expr(e).map(drop),
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                if self.expr(cond)?.truthy() {
                    self.block(then)
                } else {
                    self.block(otherwise)
                }
            }
            StmtKind::For { var, iter, body } => {
                let items = match self.expr(iter)? {
                    Value::List(xs) => xs,
                    other => return fail(format!("cannot iterate over {}", other.type_name())),
                };
                for item in items {
                    self.tick()?;
                    self.env.bindings.insert(var.clone(), item);
                    self.block(body)?;
                }
                Ok(())
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> Flow<Value> {
        self.tick()?;
        match e {
            Expr::Lit(l) => Ok(match l {
                Literal::None => Value::None,
                Literal::Bool(b) => Value::Bool(*b),
                Literal::Int(i) => Value::Int(*i),
                Literal::Dec(d) => Value::Dec(*d),
                Literal::Str(s) => Value::Str(s.clone()),
            }),
            Expr::FStr(parts) => {
                let mut out = String::new();
                for p in parts {
                    match p {
                        FPart::Text(t) => out.push_str(t),
                        FPart::Hole(h) => out.push_str(&self.expr(h)?.render()),
                    }
                }
                Ok(Value::Str(out))
            }
            Expr::Name(n) => match self.env.bindings.get(n) {
                Some(v) => Ok(v.clone()),
                None => fail(format!("name '{n}' is not defined")),
            },
            Expr::Attr(HostAttr::ModelFeasible) => Ok(Value::Bool(self.env.model.feasible())),
            Expr::Attr(HostAttr::ModelObjVal) => Ok(match self.env.model.objective() {
                Some(c) => Value::Dec(c.to_f64()),
                None => Value::None,
            }),
            Expr::Call { func, args, kwargs } => {
                let mut pos = Vec::with_capacity(args.len());
                for a in args {
                    pos.push(self.expr(a)?);
                }
                let mut kw = Vec::with_capacity(kwargs.len());
                for (k, a) in kwargs {
                    kw.push((k.clone(), self.expr(a)?));
                }
                self.env.trace.push(*func);
                self.call(*func, pos, kw)
            }
            Expr::Index(base, idx) => {
                let base = self.expr(base)?;
                let idx = self.expr(idx)?.scalar();
                index(base, idx)
            }
            Expr::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for i in items {
                    out.push(self.expr(i)?);
                }
                Ok(Value::List(out))
            }
            Expr::Neg(a) => match self.expr(a)?.scalar() {
                Value::Int(i) => i
                    .checked_neg()
                    .map(Value::Int)
                    .ok_or_else(|| Halt::Runtime("integer overflow".into())),
                Value::Dec(d) => Ok(Value::Dec(-d)),
                other => fail(format!("bad operand type for unary -: {}", other.type_name())),
            },
            Expr::Not(a) => Ok(Value::Bool(!self.expr(a)?.truthy())),
            Expr::And(a, b) => {
                let l = self.expr(a)?;
                if !l.truthy() {
                    return Ok(l);
                }
                self.expr(b)
            }
            Expr::Or(a, b) => {
                let l = self.expr(a)?;
                if l.truthy() {
                    return Ok(l);
                }
                self.expr(b)
            }
            Expr::Binary(op, a, b) => {
                let l = self.expr(a)?.scalar();
                let r = self.expr(b)?.scalar();
                binary(*op, l, r)
            }
        }
    }

    fn call(&mut self, func: HostFn, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Flow<Value> {
        let name = func.path();
        match func {
            HostFn::LoggerLog => {
                if !kw.is_empty() {
                    return fail("logger.log takes no keyword arguments");
                }
                let line: Vec<String> = pos.iter().map(Value::render_logged).collect();
                self.env.log.push(line.join(" "));
                Ok(Value::None)
            }
            HostFn::Len => {
                let [v] = exact_args(name, pos, kw)?;
                match v {
                    Value::List(xs) => Ok(Value::Int(xs.len() as i64)),
                    Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                    other => fail(format!("object of type {} has no len()", other.type_name())),
                }
            }
            HostFn::Retrieve => {
                let [q] = exact_args(name, pos, kw)?;
                let Value::Str(text) = q else {
                    return fail(format!("retrieve expects a query string, got {}", q.type_name()));
                };
                query::retrieve(&text, self.env.store)
                    .map(Value::from)
                    .map_err(|e| Halt::Runtime(format!("query failed: {e}")))
            }
            HostFn::ModelOptimize => {
                let [] = exact_args(name, pos, kw)?;
                self.env
                    .model
                    .optimize()
                    .map_err(|e| Halt::Runtime(e.to_string()))?;
                Ok(Value::None)
            }
            HostFn::ModelReset => {
                let [] = exact_args(name, pos, kw)?;
                self.env.model.reset();
                Ok(Value::None)
            }
            HostFn::PlanUpdate => {
                let [] = exact_args(name, pos, kw)?;
                if !self.env.model.outcome_is_current() {
                    self.env
                        .model
                        .optimize()
                        .map_err(|e| Halt::Runtime(e.to_string()))?;
                }
                let outcome = self.env.model.last_outcome.as_ref().unwrap();
                let version = self
                    .env
                    .plans
                    .update_plan(outcome)
                    .map_err(|e| Halt::Runtime(e.to_string()))?
                    .version;
                self.env.model.promote_scenario();
                Ok(Value::Int(version as i64))
            }
            HostFn::DemandAddConstraint => {
                let mut a = bind_args(name, &["demand_id", "date", "enforce"], &["date"], pos, kw)?;
                let demand = id_arg(name, "demand_id", a.remove(0))?;
                let week = week_arg(name, a.remove(0))?;
                let enforce = enforce_arg(name, a.remove(0))?;
                self.add(Constraint::dock_date(demand, week, enforce))
            }
            HostFn::SupplyAddConstraint => {
                let mut a = bind_args(
                    name,
                    &["supply_id", "demand", "date", "enforce"],
                    &["demand", "date"],
                    pos,
                    kw,
                )?;
                let supplier = id_arg(name, "supply_id", a.remove(0))?;
                let demand = id_arg(name, "demand", a.remove(0))?;
                let week = week_arg(name, a.remove(0))?;
                let enforce = enforce_arg(name, a.remove(0))?;
                self.add(Constraint::supply_pairing(supplier, demand, week, enforce))
            }
            HostFn::ShippingAddConstraint => {
                let mut a = bind_args(
                    name,
                    &["demand_id", "method", "enforce", "date"],
                    &["date"],
                    pos,
                    kw,
                )?;
                let demand = id_arg(name, "demand_id", a.remove(0))?;
                let method = match a.remove(0).scalar() {
                    Value::Str(m) if !m.trim().is_empty() => m.trim().to_string(),
                    other => return fail(format!("{name}: method must be a non-empty string, got {}", other.render())),
                };
                if self.env.model.instance.method(&method).is_none() {
                    return fail(format!("{name}: unknown shipping method '{method}'"));
                }
                let enforce = enforce_arg(name, a.remove(0))?;
                let week = week_arg(name, a.remove(0))?;
                let mut c = Constraint::shipping_method(demand, method, enforce);
                c.week = week;
                self.add(c)
            }
        }
    }

    fn add(&mut self, c: Constraint) -> Flow<Value> {
        self.env
            .model
            .add_constraint(c, self.env.scope)
            .map_err(|e| Halt::Runtime(e.to_string()))?;
        Ok(Value::None)
    }
}

fn exact_args<const N: usize>(name: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Flow<[Value; N]> {
    if !kw.is_empty() {
        return fail(format!("{name}() takes no keyword arguments"));
    }
    let got = pos.len();
    pos.try_into()
        .map_err(|_| Halt::Runtime(format!("{name}() takes {N} argument(s), got {got}")))
}

/// Binds positional and keyword arguments to parameter slots. Optional
/// parameters default to `"*"`.
fn bind_args(
    name: &str,
    params: &[&str],
    optional: &[&str],
    pos: Vec<Value>,
    kw: Vec<(String, Value)>,
) -> Flow<Vec<Value>> {
    if pos.len() > params.len() {
        return fail(format!("{name}() takes at most {} arguments", params.len()));
    }
    let mut slots: Vec<Option<Value>> = vec![None; params.len()];
    for (i, v) in pos.into_iter().enumerate() {
        slots[i] = Some(v);
    }
    for (k, v) in kw {
        let Some(i) = params.iter().position(|p| *p == k) else {
            return fail(format!("{name}() got an unexpected keyword argument '{k}'"));
        };
        if slots[i].is_some() {
            return fail(format!("{name}() got multiple values for argument '{k}'"));
        }
        slots[i] = Some(v);
    }
    slots
        .into_iter()
        .zip(params)
        .map(|(s, p)| match s {
            Some(v) => Ok(v),
            None if optional.contains(p) => Ok(Value::Str("*".into())),
            None => fail(format!("{name}() missing required argument '{p}'")),
        })
        .collect()
}

fn id_arg(name: &str, param: &str, v: Value) -> Flow<String> {
    match v.scalar() {
        Value::Str(s) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Value::Int(i) => Ok(i.to_string()),
        other => fail(format!("{name}: {param} must be an id string, got {}", other.render())),
    }
}

fn week_arg(name: &str, v: Value) -> Flow<WeekPattern> {
    match v.scalar() {
        Value::Int(w) if w >= 0 => Ok(WeekPattern::Week(w as u32)),
        Value::Str(s) => WeekPattern::parse(&s).map_err(|e| Halt::Runtime(format!("{name}: {e}"))),
        other => fail(format!("{name}: date must be a week index or pattern, got {}", other.render())),
    }
}

fn enforce_arg(name: &str, v: Value) -> Flow<Enforce> {
    match v.scalar() {
        Value::Str(s) => Enforce::parse(&s).map_err(|e| Halt::Runtime(format!("{name}: {e}"))),
        other => fail(format!("{name}: enforce must be a string, got {}", other.render())),
    }
}

fn index(base: Value, idx: Value) -> Flow<Value> {
    let Value::Int(i) = idx else {
        return fail(format!("indices must be integers, not {}", idx.type_name()));
    };
    let pick = |len: usize| -> Flow<usize> {
        let j = if i < 0 { len as i64 + i } else { i };
        if j < 0 || j >= len as i64 {
            return fail("index out of range");
        }
        Ok(j as usize)
    };
    match base {
        Value::List(mut xs) => {
            let j = pick(xs.len())?;
            Ok(xs.swap_remove(j))
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let j = pick(chars.len())?;
            Ok(Value::Str(chars[j].to_string()))
        }
        other => fail(format!("{} is not subscriptable", other.type_name())),
    }
}

fn type_error<T>(op: BinOp, l: &Value, r: &Value) -> Flow<T> {
    fail(format!(
        "unsupported operand types for {op:?}: {} and {}",
        l.type_name(),
        r.type_name()
    ))
}

fn binary(op: BinOp, l: Value, r: Value) -> Flow<Value> {
    use BinOp::*;
    match op {
        Eq => return Ok(Value::Bool(equal(&l, &r))),
        Ne => return Ok(Value::Bool(!equal(&l, &r))),
        Lt | Le | Gt | Ge => {
            let ord = match (&l, &r) {
                (Value::Str(a), Value::Str(b)) => a.cmp(b),
                (Value::Date(a), Value::Date(b)) => a.cmp(b),
                _ => match (l.as_f64(), r.as_f64()) {
                    (Some(a), Some(b)) => match a.partial_cmp(&b) {
                        Some(o) => o,
                        None => return Ok(Value::Bool(false)),
                    },
                    _ => return type_error(op, &l, &r),
                },
            };
            let holds = match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                _ => ord.is_ge(),
            };
            return Ok(Value::Bool(holds));
        }
        _ => {}
    }
    match (op, &l, &r) {
        (Add, Value::Str(a), Value::Str(b)) => return Ok(Value::Str(format!("{a}{b}"))),
        (Add, Value::List(a), Value::List(b)) => {
            return Ok(Value::List(a.iter().chain(b).cloned().collect()));
        }
        _ => {}
    }
    if let (Value::Int(a), Value::Int(b)) = (&l, &r) {
        let (a, b) = (*a, *b);
        let overflow = || Halt::Runtime("integer overflow".into());
        return match op {
            Add => a.checked_add(b).map(Value::Int).ok_or_else(overflow),
            Sub => a.checked_sub(b).map(Value::Int).ok_or_else(overflow),
            Mul => a.checked_mul(b).map(Value::Int).ok_or_else(overflow),
            Div if b == 0 => fail("division by zero"),
            Div => Ok(Value::Dec(a as f64 / b as f64)),
            FloorDiv | Mod if b == 0 => fail("division by zero"),
            FloorDiv => Ok(Value::Int(a.div_euclid(b) - if b < 0 && a.rem_euclid(b) != 0 { 1 } else { 0 })),
            Mod => {
                let m = a.rem_euclid(b);
                Ok(Value::Int(if b < 0 && m != 0 { m + b } else { m }))
            }
            Pow if b >= 0 => u32::try_from(b)
                .ok()
                .and_then(|e| a.checked_pow(e))
                .map(Value::Int)
                .ok_or_else(overflow),
            Pow => Ok(Value::Dec((a as f64).powf(b as f64))),
            _ => unreachable!(),
        };
    }
    let (Some(a), Some(b)) = (l.as_f64(), r.as_f64()) else {
        return type_error(op, &l, &r);
    };
    match op {
        Add => Ok(Value::Dec(a + b)),
        Sub => Ok(Value::Dec(a - b)),
        Mul => Ok(Value::Dec(a * b)),
        Div | FloorDiv | Mod if b == 0.0 => fail("division by zero"),
        Div => Ok(Value::Dec(a / b)),
        FloorDiv => Ok(Value::Dec((a / b).floor())),
        Mod => Ok(Value::Dec(a - b * (a / b).floor())),
        Pow => Ok(Value::Dec(a.powf(b))),
        _ => unreachable!(),
    }
}

fn equal(l: &Value, r: &Value) -> bool {
    match (l, r) {
        (Value::Int(_) | Value::Dec(_), Value::Int(_) | Value::Dec(_)) => l.as_f64() == r.as_f64(),
        _ => l == r,
    }
}

/// Runs a parsed script. The environment keeps bindings, log and host state
/// afterwards.
pub fn execute(script: &Script, env: &mut ExecEnv) -> ExecutionResult {
    let outcome = Interp { env: &mut *env }.block(&script.statements);
    let (status, error_detail) = match outcome {
        Ok(()) => (ExecStatus::Ok, None),
        Err(Halt::Runtime(m)) => (ExecStatus::RuntimeError, Some(m)),
        Err(Halt::Budget) => (
            ExecStatus::BudgetExceeded,
            Some(format!("step budget of {} exhausted", env.step_budget)),
        ),
    };
    ExecutionResult {
        status,
        logs: env.log.clone(),
        error_detail,
    }
}

/// Parses and executes `text`.
pub fn run_script(text: &str, env: &mut ExecEnv) -> ExecutionResult {
    match parse_script(text) {
        Ok(script) => execute(&script, env),
        Err(e) => ExecutionResult {
            status: ExecStatus::ParseError,
            logs: Vec::new(),
            error_detail: Some(e.to_string()),
        },
    }
}

/// Expands `{expr}` holes in `template` against the environment.
pub fn interpolate(template: &str, env: &mut ExecEnv) -> Result<String, String> {
    let escaped = template.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
    let script = parse_script(&format!("f\"{escaped}\"")).map_err(|e| e.to_string())?;
    let [Stmt {
        kind: StmtKind::Expr(e),
        ..
    }] = script.statements.as_slice()
    else {
        return Err("template is not a single string".into());
    };
    match (Interp { env }).expr(e) {
        Ok(Value::Str(s)) => Ok(s),
        Ok(other) => Ok(other.render()),
        Err(Halt::Runtime(m)) => Err(m),
        Err(Halt::Budget) => Err("step budget exhausted".into()),
    }
}
