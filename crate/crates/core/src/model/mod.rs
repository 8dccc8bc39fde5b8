//! Graphical models: variables with finite domains and non-negative table
//! functions combined by product.

mod dimacs;
mod uai;

pub use dimacs::parse_dimacs_cnf;
pub use uai::{parse_evidence, parse_uai, write_uai};

use crate::error::{Error, Result};

/// Dense variable index in `0..n`.
pub type Var = usize;

/// Default cap on the number of rows [`GraphicalModel::brute_force_table`] will build.
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variable {
    pub id: Var,
    pub domain_size: usize,
}

/// Whether a model is a constraint network (0/1 tables) or a general weighted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Constraint,
    Weighted,
}

/// A table over an ordered scope, indexed in mixed radix with the last scope
/// variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFunction {
    scope: Vec<Var>,
    domains: Vec<usize>,
    values: Vec<f64>,
}

impl TableFunction {
    pub fn new(scope: Vec<Var>, domains: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != domains.len() {
            return Err(Error::Precondition(format!(
                "scope has {} variables but {} domain sizes were given",
                scope.len(),
                domains.len()
            )));
        }
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(Error::Precondition(format!("variable {v} repeated in scope")));
            }
        }
        if domains.contains(&0) {
            return Err(Error::Precondition("domain size 0 in scope".into()));
        }
        let size: usize = domains.iter().product();
        if values.len() != size {
            return Err(Error::Precondition(format!("table has {} entries, scope requires {size}", values.len())));
        }
        if let Some(bad) = values.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Precondition(format!("table value {bad} is not a finite non-negative real")));
        }
        Ok(TableFunction { scope, domains, values })
    }

    /// A constant function with empty scope.
    pub fn constant(value: f64) -> Result<Self> {
        TableFunction::new(Vec::new(), Vec::new(), vec![value])
    }

    /// Tabulates `f` over `scope`, enumerating tuples with the last variable fastest.
    pub fn from_fn(scope: Vec<Var>, domains: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let size: usize = domains.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut tuple = vec![0usize; scope.len()];
        for _ in 0..size {
            values.push(f(&tuple));
            advance(&mut tuple, &domains);
        }
        TableFunction::new(scope, domains, values)
    }

    pub fn scope(&self) -> &[Var] {
        &self.scope
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    /// Row index of a tuple given in scope order.
    pub fn index_of(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(&self.domains).fold(0, |acc, (&x, &k)| acc * k + x)
    }

    pub fn value(&self, tuple: &[usize]) -> f64 {
        self.values[self.index_of(tuple)]
    }

    /// Value at the projection of `x` onto the scope; `None` if a scope
    /// variable is unassigned.
    pub fn eval(&self, x: &Assignment) -> Option<f64> {
        let mut idx = 0;
        for (&v, &k) in self.scope.iter().zip(&self.domains) {
            idx = idx * k + x.get(v)?;
        }
        Some(self.values[idx])
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        TableFunction::new(self.scope.clone(), self.domains.clone(), self.values.iter().map(|w| w * c).collect())
    }

    /// Tuples (in scope order) whose value is exactly zero.
    pub fn zero_tuples(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut tuple = vec![0usize; self.scope.len()];
        for &w in &self.values {
            if w == 0.0 {
                out.push(tuple.clone());
            }
            advance(&mut tuple, &self.domains);
        }
        out
    }
}

/// Mixed-radix increment, last position fastest. Wraps to all zeros.
pub(crate) fn advance(tuple: &mut [usize], domains: &[usize]) {
    for i in (0..tuple.len()).rev() {
        tuple[i] += 1;
        if tuple[i] < domains[i] {
            return;
        }
        tuple[i] = 0;
    }
}

/// A partial or full assignment of values to the model variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(n: usize) -> Self {
        Assignment { values: vec![None; n] }
    }

    pub fn full(values: &[usize]) -> Self {
        Assignment { values: values.iter().map(|&v| Some(v)).collect() }
    }

    pub fn from_options(values: Vec<Option<usize>>) -> Self {
        Assignment { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, v: Var) -> Option<usize> {
        self.values[v]
    }

    #[inline]
    pub fn set(&mut self, v: Var, value: usize) {
        self.values[v] = Some(value);
    }

    #[inline]
    pub fn unset(&mut self, v: Var) {
        self.values[v] = None;
    }

    pub fn is_full(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.values
    }

    /// The values of a full assignment, or `None` if any variable is unassigned.
    pub fn to_full(&self) -> Option<Vec<usize>> {
        self.values.iter().copied().collect()
    }
}

/// Variables, domains and a list of functions whose product is the model's
/// universal function.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicalModel {
    domains: Vec<usize>,
    functions: Vec<TableFunction>,
    kind: ModelKind,
}

impl GraphicalModel {
    pub fn new(domains: Vec<usize>, functions: Vec<TableFunction>, kind: ModelKind) -> Result<Self> {
        if let Some(v) = domains.iter().position(|&k| k == 0) {
            return Err(Error::Precondition(format!("variable {v} has an empty domain")));
        }
        for (i, f) in functions.iter().enumerate() {
            for (&v, &k) in f.scope.iter().zip(&f.domains) {
                match domains.get(v) {
                    None => return Err(Error::Precondition(format!("function {i} mentions unknown variable {v}"))),
                    Some(&d) if d != k => {
                        return Err(Error::Precondition(format!(
                            "function {i} gives variable {v} domain size {k}, model says {d}"
                        )))
                    }
                    _ => {}
                }
            }
            if kind == ModelKind::Constraint && f.values.iter().any(|&w| w != 0.0 && w != 1.0) {
                return Err(Error::Precondition(format!("constraint model function {i} has a value outside {{0,1}}")));
            }
        }
        Ok(GraphicalModel { domains, functions, kind })
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn domain_size(&self, v: Var) -> usize {
        self.domains[v]
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        self.domains.iter().enumerate().map(|(id, &domain_size)| Variable { id, domain_size })
    }

    pub fn functions(&self) -> &[TableFunction] {
        &self.functions
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn max_domain(&self) -> usize {
        self.domains.iter().copied().max().unwrap_or(1)
    }

    /// Same variables and kind, with the given functions.
    pub fn with_functions(&self, functions: Vec<TableFunction>) -> Result<Self> {
        GraphicalModel::new(self.domains.clone(), functions, self.kind)
    }

    /// Reinterprets the model as weighted (a constraint network is a weighted
    /// model with 0/1 tables).
    pub fn as_weighted(&self) -> GraphicalModel {
        GraphicalModel { kind: ModelKind::Weighted, ..self.clone() }
    }

    fn check_full(&self, x: &Assignment) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::Precondition(format!(
                "assignment has {} entries, model has {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        for (v, val) in x.as_slice().iter().enumerate() {
            match val {
                None => return Err(Error::Precondition(format!("variable {v} is unassigned"))),
                Some(val) if *val >= self.domains[v] => {
                    return Err(Error::Precondition(format!(
                        "value {val} out of range for variable {v} (domain {})",
                        self.domains[v]
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Product of all functions at a full assignment.
    pub fn weight_of(&self, x: &Assignment) -> Result<f64> {
        self.check_full(x)?;
        let mut w = 1.0;
        for f in &self.functions {
            // check_full guarantees every scope variable is assigned
            w *= f.eval(x).unwrap_or(0.0);
            if w == 0.0 {
                break;
            }
        }
        Ok(w)
    }

    /// Natural log of [`weight_of`](Self::weight_of); `-inf` for inconsistent assignments.
    pub fn log_weight_of(&self, x: &Assignment) -> Result<f64> {
        self.check_full(x)?;
        let mut lw = 0.0;
        for f in &self.functions {
            let w = f.eval(x).unwrap_or(0.0);
            if w == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            lw += w.ln();
        }
        Ok(lw)
    }

    /// Explicit table of the universal function over all variables in id
    /// order. Refuses when the table would exceed `cap` rows.
    pub fn brute_force_table(&self, cap: usize) -> Result<TableFunction> {
        let mut size: usize = 1;
        for &k in &self.domains {
            size = size
                .checked_mul(k)
                .filter(|&s| s <= cap)
                .ok_or_else(|| Error::Resource(format!("universal table exceeds cap of {cap} rows")))?;
        }
        let scope: Vec<Var> = (0..self.num_vars()).collect();
        let mut values = Vec::with_capacity(size);
        let mut tuple = vec![0usize; self.num_vars()];
        // per-function row index computed directly from the tuple
        for _ in 0..size {
            let mut w = 1.0;
            for f in &self.functions {
                let mut idx = 0;
                for (&v, &k) in f.scope.iter().zip(&f.domains) {
                    idx = idx * k + tuple[v];
                }
                w *= f.values[idx];
                if w == 0.0 {
                    break;
                }
            }
            values.push(w);
            advance(&mut tuple, &self.domains);
        }
        TableFunction::new(scope, self.domains.clone(), values)
    }
}

/// Iterates over every full assignment of `domains`, last variable fastest.
pub fn all_assignments(domains: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = domains.iter().product();
    let mut tuple = vec![0usize; domains.len()];
    (0..total).map(move |_| {
        let out = tuple.clone();
        advance(&mut tuple, domains);
        out
    })
}
