use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    None,
    Bool(bool),
    Int(i64),
    Dec(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FPart {
    Text(String),
    Hole(Expr),
}

/// Functions and methods reachable from a snippet. Nothing else is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HostFn {
    Retrieve,
    Len,
    LoggerLog,
    ModelOptimize,
    ModelReset,
    PlanUpdate,
    DemandAddConstraint,
    SupplyAddConstraint,
    ShippingAddConstraint,
}

impl HostFn {
    pub fn path(self) -> &'static str {
        match self {
            HostFn::Retrieve => "retrieve",
            HostFn::Len => "len",
            HostFn::LoggerLog => "logger.log",
            HostFn::ModelOptimize => "model.optimize",
            HostFn::ModelReset => "model.reset",
            HostFn::PlanUpdate => "plan.update",
            HostFn::DemandAddConstraint => "demand.add_constraint",
            HostFn::SupplyAddConstraint => "supply.add_constraint",
            HostFn::ShippingAddConstraint => "shipping.add_constraint",
        }
    }

    /// Whether a call can change model or plan state.
    pub fn mutates(self) -> bool {
        matches!(
            self,
            HostFn::ModelOptimize
                | HostFn::ModelReset
                | HostFn::PlanUpdate
                | HostFn::DemandAddConstraint
                | HostFn::SupplyAddConstraint
                | HostFn::ShippingAddConstraint
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HostAttr {
    ModelFeasible,
    ModelObjVal,
}

/// Objects whose names are reserved for host access.
pub const HOST_OBJECTS: [&str; 6] = ["logger", "model", "plan", "demand", "supply", "shipping"];

pub fn resolve_method(object: &str, attr: &str) -> Option<HostFn> {
    Some(match (object, attr) {
        ("logger", "log") => HostFn::LoggerLog,
        ("model", "optimize") => HostFn::ModelOptimize,
        ("model", "reset") => HostFn::ModelReset,
        ("plan", "update") => HostFn::PlanUpdate,
        ("demand", "add_constraint") => HostFn::DemandAddConstraint,
        ("supply", "add_constraint") => HostFn::SupplyAddConstraint,
        ("shipping", "add_constraint") => HostFn::ShippingAddConstraint,
        _ => return None,
    })
}

pub fn resolve_attr(object: &str, attr: &str) -> Option<HostAttr> {
    match (object, attr) {
        ("model", "feasible") => Some(HostAttr::ModelFeasible),
        ("model", "objVal") => Some(HostAttr::ModelObjVal),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    FStr(Vec<FPart>),
    Name(String),
    Attr(HostAttr),
    Call {
        func: HostFn,
        args: Vec<Expr>,
        kwargs: Vec<(String, Expr)>,
    },
    Index(Box<Expr>, Box<Expr>),
    List(Vec<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign(String, Expr),
    Expr(Expr),
    If {
        cond: Expr,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
    },
    For {
        var: String,
        iter: Expr,
        body: Vec<Stmt>,
    },
    Pass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: usize,
}

/// A parsed snippet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub statements: Vec<Stmt>,
}

impl Script {
    /// All host functions a script can reach, in source order.
    pub fn host_calls(&self) -> Vec<HostFn> {
        fn expr(e: &Expr, out: &mut Vec<HostFn>) {
            match e {
                Expr::Call { func, args, kwargs } => {
                    out.push(*func);
                    args.iter().for_each(|a| expr(a, out));
                    kwargs.iter().for_each(|(_, a)| expr(a, out));
                }
                Expr::FStr(parts) => parts.iter().for_each(|p| {
                    if let FPart::Hole(h) = p {
                        expr(h, out)
                    }
                }),
                Expr::Index(a, b) | Expr::And(a, b) | Expr::Or(a, b) | Expr::Binary(_, a, b) => {
                    expr(a, out);
                    expr(b, out);
                }
                Expr::Neg(a) | Expr::Not(a) => expr(a, out),
                Expr::List(xs) => xs.iter().for_each(|x| expr(x, out)),
                Expr::Lit(_) | Expr::Name(_) | Expr::Attr(_) => {}
            }
        }
        fn stmts(ss: &[Stmt], out: &mut Vec<HostFn>) {
            for s in ss {
                match &s.kind {
                    StmtKind::Assign(_, e) | StmtKind::Expr(e) => expr(e, out),
                    StmtKind::If {
                        cond,
                        then,
                        otherwise,
                    } => {
                        expr(cond, out);
                        stmts(then, out);
                        stmts(otherwise, out);
                    }
                    StmtKind::For { iter, body, .. } => {
                        expr(iter, out);
                        stmts(body, out);
                    }
                    StmtKind::Pass => {}
                }
            }
        }
        let mut out = Vec::new();
        stmts(&self.statements, &mut out);
        out
    }

    pub fn may_mutate(&self) -> bool {
        self.host_calls().iter().any(|f| f.mutates())
    }
}
