//! Dense oracles shared by the integration tests.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use fracamg::assembly::{coefficient_matrix, mass, stiffness};
use fracamg::dense::DenseMatrix;
use fracamg::solvers::amg::{amg_setup, AmgConfig, AmgHierarchy, Smoother};
use fracamg::special::gamma;
use fracamg::toeplitz::{SymToeplitz, ToeplitzOperator};
use nalgebra::DMatrix;

pub fn system(alpha: f64, beta: f64, cells: usize, tau: f64) -> SymToeplitz {
    let h = 1.0 / cells as f64;
    coefficient_matrix(alpha, tau, &mass(cells, h).unwrap(), &stiffness(beta, cells, h).unwrap()).unwrap()
}

pub fn to_na(d: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(d.rows(), d.cols(), |i, j| d[(i, j)])
}

/// `T x` by the O(n^2) definition.
pub fn dense_product(t: &SymToeplitz, x: &[f64]) -> Vec<f64> {
    let r = t.first_row();
    (0..x.len()).map(|i| (0..x.len()).map(|j| r[i.abs_diff(j)] * x[j]).sum()).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    if n == 0.0 { d } else { d / n }
}

/// Compensated sum, terms added smallest first.
pub fn accurate_sum(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in v {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// Violations of the sign pattern, symmetry and row-sum bounds of the
/// dense stiffness matrix.
pub fn stiffness_violations(beta: f64, m: usize) -> Vec<String> {
    let h = 1.0 / m as f64;
    let a = stiffness(beta, m, h).unwrap().to_dense();
    let n = a.rows();
    let denom = 2.0 * (beta * PI).cos() * gamma(4.0 - 2.0 * beta);
    let end_bound = -h.powf(1.0 - 2.0 * beta) * (4.0 - 2f64.powf(3.0 - 2.0 * beta)) / denom;
    let mid_bound = -(2f64.powf(2.0 * beta)) * h * (2.0 * beta - 1.0) / ((beta * PI).cos() * gamma(2.0 - 2.0 * beta));
    let mut out = Vec::new();
    for i in 0..n {
        if !(a[(i, i)] > 0.0) {
            out.push(format!("diagonal {i}"));
        }
        for j in 0..n {
            if a[(i, j)] != a[(j, i)] {
                out.push(format!("symmetry ({i},{j})"));
            }
            if i != j && !(a[(i, j)] < 0.0) {
                out.push(format!("off-diagonal ({i},{j})"));
            }
        }
        let s = accurate_sum(a.row(i));
        if !(s > 0.0) {
            out.push(format!("row sum {i}: {s}"));
        }
        if h <= 1.0 / 7.0 {
            let bound = if i == 0 || i == n - 1 { end_bound } else { mid_bound };
            if s < bound * (1.0 - 1e-9) {
                out.push(format!("row-sum bound row {i}: {s} < {bound}"));
            }
        }
    }
    out
}

/// `(min, max)` entries of the dense inverse of the stiffness matrix.
pub fn stiffness_inverse_range(beta: f64, m: usize) -> (f64, f64) {
    let h = 1.0 / m as f64;
    let a = to_na(&stiffness(beta, m, h).unwrap().to_dense());
    let inv = a.try_inverse().expect("invertible");
    (inv.min(), inv.amax())
}

/// Positive diagonal, nonpositive off-diagonals and strict diagonal dominance.
pub fn dense_m_matrix_check(alpha: f64, beta: f64, tau: f64, cells: usize) -> bool {
    let c = system(alpha, beta, cells, tau).to_dense();
    let n = c.rows();
    (0..n).all(|i| {
        let row = c.row(i);
        let off: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| row[j]).collect();
        row[i] > 0.0 && off.iter().all(|v| *v <= 0.0) && row[i] > accurate_sum(&off.iter().map(|v| v.abs()).collect::<Vec<_>>())
    })
}

/// One Gauss-Seidel sweep on `C e = 0` visiting `order`.
pub fn gs_sweep(c: &DMatrix<f64>, e: &mut [f64], order: &[usize]) {
    for &i in order {
        let s: f64 = (0..e.len()).filter(|&j| j != i).map(|j| c[(i, j)] * e[j]).sum();
        e[i] = -s / c[(i, i)];
    }
}

pub fn sweep_order(split: &[bool], smoother: Smoother, forward: bool) -> Vec<usize> {
    let n = split.len();
    match smoother {
        Smoother::CfGaussSeidel => {
            let mut o: Vec<usize> = (0..n).filter(|&i| split[i] == forward).collect();
            o.extend((0..n).filter(|&i| split[i] != forward));
            o
        }
        Smoother::GaussSeidel if forward => (0..n).collect(),
        Smoother::GaussSeidel => (0..n).rev().collect(),
        Smoother::DampedJacobi { .. } => unreachable!(),
    }
}

/// Dense two-grid error propagation `S_post^nu2 (I - P Ac^{-1} P^T C) S_pre^nu1`.
pub fn dense_two_grid(h: &AmgHierarchy, c: &DMatrix<f64>, nu1: usize, nu2: usize, e: &[f64]) -> Vec<f64> {
    let level = &h.levels()[0];
    let split = level.splitting().unwrap();
    let p = to_na(&level.interpolation().unwrap().to_dense());
    let smoother = h.config().smoother;
    let mut e = e.to_vec();
    for _ in 0..nu1 {
        gs_sweep(c, &mut e, &sweep_order(split, smoother, true));
    }
    let ac = p.transpose() * c * &p;
    let ev = nalgebra::DVector::from_column_slice(&e);
    let rc = p.transpose() * (c * &ev);
    let ec = ac.lu().solve(&rc).unwrap();
    let corrected = ev - &p * ec;
    let mut e: Vec<f64> = corrected.iter().copied().collect();
    for _ in 0..nu2 {
        gs_sweep(c, &mut e, &sweep_order(split, smoother, false));
    }
    e
}

pub fn two_level(c: &SymToeplitz, smoother: Smoother, nu1: usize, nu2: usize) -> AmgHierarchy {
    let config = AmgConfig { nu1, nu2, smoother, max_levels: 2, ..AmgConfig::default() };
    let h = amg_setup(&ToeplitzOperator::new(c.clone()), &config).unwrap();
    assert_eq!(h.levels().len(), 2);
    h
}

/// Error after one cycle on `C x = 0` from `x = e`.
pub fn cycle_error(h: &AmgHierarchy, e: &[f64]) -> Vec<f64> {
    let mut x = e.to_vec();
    let b = vec![0.0; e.len()];
    h.v_cycle(&b, &mut x).unwrap();
    x
}

pub fn iteration_matrix(h: &AmgHierarchy) -> DMatrix<f64> {
    let n = h.dim();
    let mut e = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut unit = vec![0.0; n];
        unit[k] = 1.0;
        let col = cycle_error(h, &unit);
        for i in 0..n {
            e[(i, k)] = col[i];
        }
    }
    e
}

pub fn spectral_radius(e: DMatrix<f64>) -> f64 {
    e.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Two-grid V(1,1) convergence factors with the default smoother.
pub fn two_grid_factors(alpha: f64, beta: f64, tau: f64, cells: &[usize]) -> Vec<f64> {
    cells
        .iter()
        .map(|&m| spectral_radius(iteration_matrix(&two_level(&system(alpha, beta, m, tau), Smoother::CfGaussSeidel, 1, 1))))
        .collect()
}

pub fn spread(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
}
