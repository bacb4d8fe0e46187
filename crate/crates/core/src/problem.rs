//! Problem data: fractional orders, domain, time grid and data functions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::special::gamma;
use crate::timegrid::TimeGrid;

/// `f(x, t)`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// `g(x)`.
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    /// Number of space cells; the system dimension is `cells - 1`.
    pub cells: usize,
    pub grid: TimeGrid,
    pub source: SpaceTimeFn,
    pub exact: Option<SpaceTimeFn>,
    pub initial: SpaceFn,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("cells", &self.cells)
            .field("steps", &self.grid.steps())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

pub fn check_orders(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    check_beta(beta)
}

pub fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (1/2,1), got {beta}")));
    }
    Ok(())
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        check_orders(self.alpha, self.beta)?;
        if !(self.a < self.b) {
            return Err(Error::Domain(format!("need a < b, got ({}, {})", self.a, self.b)));
        }
        if self.cells < 2 {
            return Err(Error::Domain(format!("need at least 2 cells, got {}", self.cells)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.cells as f64
    }

    pub fn dim(&self) -> usize {
        self.cells - 1
    }

    /// Interior node `x_i`, `1 <= i <= cells - 1`.
    pub fn node(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h()
    }

    pub fn final_time(&self) -> f64 {
        self.grid.final_time()
    }

    /// Nodal interpolant of the initial data at interior nodes.
    pub fn initial_state(&self) -> Vec<f64> {
        (1..self.cells).map(|i| (self.initial)(self.node(i))).collect()
    }

    /// Built-in manufactured problem on (0,1) with exact solution
    /// `u = t^(2-alpha) x^2 (1-x)^2` and zero initial data.
    pub fn manufactured(alpha: f64, beta: f64, cells: usize, grid: TimeGrid) -> Result<Self> {
        check_orders(alpha, beta)?;
        let spec = Self {
            alpha,
            beta,
            a: 0.0,
            b: 1.0,
            cells,
            grid,
            source: manufactured_source(alpha, beta),
            exact: Some(Arc::new(move |x: f64, t: f64| {
                t.powf(2.0 - alpha) * x * x * (1.0 - x) * (1.0 - x)
            })),
            initial: Arc::new(|_| 0.0),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Zero source and zero initial data.
    pub fn homogeneous(alpha: f64, beta: f64, cells: usize, grid: TimeGrid) -> Result<Self> {
        let spec = Self {
            alpha,
            beta,
            a: 0.0,
            b: 1.0,
            cells,
            grid,
            source: Arc::new(|_, _| 0.0),
            exact: Some(Arc::new(|_, _| 0.0)),
            initial: Arc::new(|_| 0.0),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Data functions given as expression strings in `x` and `t` (see
/// [`crate::expr`]); `initial` is evaluated at `t = 0`.
#[derive(Debug, Clone, Default)]
pub struct ExprData {
    pub source: String,
    pub exact: Option<String>,
    pub initial: Option<String>,
}

impl ProblemSpec {
    /// Problem on `(a, b)` with data parsed from expression strings.
    pub fn from_expressions(
        alpha: f64,
        beta: f64,
        (a, b): (f64, f64),
        cells: usize,
        grid: TimeGrid,
        data: &ExprData,
    ) -> Result<Self> {
        let source = Expr::parse(&data.source)?;
        let exact = data.exact.as_deref().map(Expr::parse).transpose()?;
        let initial = data.initial.as_deref().map(Expr::parse).transpose()?;
        let spec = Self {
            alpha,
            beta,
            a,
            b,
            cells,
            grid,
            source: Arc::new(move |x, t| source.eval(x, t)),
            exact: exact.map(|e| Arc::new(move |x: f64, t: f64| e.eval(x, t)) as SpaceTimeFn),
            initial: match initial {
                Some(e) => Arc::new(move |x| e.eval(x, 0.0)),
                None => Arc::new(|_| 0.0),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn manufactured_source(alpha: f64, beta: f64) -> SpaceTimeFn {
    let c_time = gamma(3.0 - alpha) / gamma(3.0 - 2.0 * alpha);
    let inv_cos = 1.0 / (beta * PI).cos();
    let g3 = gamma(3.0 - 2.0 * beta);
    let g4 = gamma(4.0 - 2.0 * beta);
    let g5 = gamma(5.0 - 2.0 * beta);
    Arc::new(move |x: f64, t: f64| {
        let y = 1.0 - x;
        let p2 = 2.0 - 2.0 * beta;
        let space = (x.powf(p2) + y.powf(p2)) / g3
            - 6.0 * (x.powf(p2 + 1.0) + y.powf(p2 + 1.0)) / g4
            + 12.0 * (x.powf(p2 + 2.0) + y.powf(p2 + 2.0)) / g5;
        c_time * t.powf(2.0 - 2.0 * alpha) * x * x * y * y
            + t.powf(2.0 - alpha) * inv_cos * space
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_orders() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        for (a, b) in [(0.0, 0.7), (1.0, 0.7), (0.5, 0.5), (0.5, 1.0), (0.5, 0.3)] {
            assert!(ProblemSpec::manufactured(a, b, 8, g.clone()).is_err(), "({a},{b})");
        }
        assert!(ProblemSpec::manufactured(0.5, 0.7, 1, g).is_err());
    }

    #[test]
    fn expressions_reproduce_example1_exact() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let data = ExprData {
            source: "0".into(),
            exact: Some("pow(t, 2 - 0.5) * x^2 * (1 - x)^2".into()),
            initial: Some("x".into()),
        };
        let p = ProblemSpec::from_expressions(0.5, 0.7, (0.0, 1.0), 8, g.clone(), &data).unwrap();
        let q = ProblemSpec::manufactured(0.5, 0.7, 8, g).unwrap();
        let (e1, e2) = (p.exact.as_ref().unwrap(), q.exact.as_ref().unwrap());
        for (x, t) in [(0.3, 0.7), (0.9, 0.1)] {
            assert!((e1(x, t) - e2(x, t)).abs() < 1e-15);
        }
        assert_eq!((p.initial)(0.25), 0.25);
        let bad = ExprData { source: "x +".into(), ..Default::default() };
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(matches!(
            ProblemSpec::from_expressions(0.5, 0.7, (0.0, 1.0), 8, g, &bad),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn nodes_and_initial_state() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let mut p = ProblemSpec::manufactured(0.5, 0.7, 4, g).unwrap();
        p.initial = Arc::new(|x| x * x);
        assert_eq!(p.dim(), 3);
        assert_eq!(p.initial_state(), vec![0.0625, 0.25, 0.5625]);
    }
}
