use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;

use super::element::{GroupElement, GroupTag};
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Weighted nodes on a compact group, exact on every matrix coefficient of
/// irreps up to degree `l_exact`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    group: GroupTag,
    nodes: Vec<GroupElement>,
    weights: Vec<f64>,
    l_exact: u32,
}

impl QuadratureRule {
    pub fn group(&self) -> GroupTag {
        self.group
    }

    pub fn l_exact(&self) -> u32 {
        self.l_exact
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GroupElement] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }
}

/// Product rule for the normalized Haar measure.
///
/// SO(2) uses `2L + 1` equispaced angles. SO(3) uses ZYZ Euler angles with
/// `2L + 1` equispaced values of α and γ and `L + 1` Gauss–Legendre nodes in
/// `cos β`.
pub fn haar_rule(group: GroupTag, l_exact: u32) -> QuadratureRule {
    let n_uniform = 2 * l_exact as usize + 1;
    let angles: Vec<f64> = (0..n_uniform).map(|k| TAU * k as f64 / n_uniform as f64).collect();
    let (nodes, weights) = match group {
        GroupTag::So2 => {
            let w = 1.0 / n_uniform as f64;
            (
                angles.iter().map(|&a| GroupElement::so2(a)).collect(),
                vec![w; n_uniform],
            )
        }
        GroupTag::So3 => {
            let (xs, ws) = gauss_legendre(l_exact as usize + 1);
            let scale = 0.5 / (n_uniform * n_uniform) as f64;
            let mut nodes = Vec::with_capacity(n_uniform * n_uniform * xs.len());
            let mut weights = Vec::with_capacity(nodes.capacity());
            for &alpha in &angles {
                for (x, w) in xs.iter().zip(&ws) {
                    let beta = x.clamp(-1.0, 1.0).acos();
                    for &gamma in &angles {
                        nodes.push(GroupElement::from_euler(alpha, beta, gamma));
                        weights.push(w * scale);
                    }
                }
            }
            (nodes, weights)
        }
    };
    QuadratureRule { group, nodes, weights, l_exact }
}

/// `Σ_q w_q f(g_q)` in node order.
pub fn integrate_over_group<F>(f: F, rule: &QuadratureRule) -> Result<DMatrix<f64>>
where
    F: Fn(&GroupElement) -> DMatrix<f64>,
{
    let mut acc: Option<DMatrix<f64>> = None;
    for (g, w) in rule.iter() {
        let v = f(g);
        match acc.as_mut() {
            None => acc = Some(v * w),
            Some(a) => {
                if a.shape() != v.shape() {
                    return Err(Error::invalid(format!(
                        "integrand changed shape from {:?} to {:?}",
                        a.shape(),
                        v.shape()
                    )));
                }
                *a += v * w;
            }
        }
    }
    acc.ok_or_else(|| Error::invalid("empty quadrature rule"))
}
