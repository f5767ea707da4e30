//! Real Clebsch–Gordan coefficients obtained by projecting onto the invariant
//! subspace of `V_{l1} ⊗ V_{l2} ⊗ V_l` with the Haar quadrature.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use super::element::GroupTag;
use super::irrep::{irrep_matrix, IrrepLabel};
use super::quadrature::haar_rule;

/// Coupling tensor stored as a `(d1·d2) × d` matrix with row `a·d2 + b`.
///
/// Columns are orthonormal, so `(ρ1 ⊗ ρ2)(g) C = C ρ(g)` and the coupled
/// vector of `x ⊗ y` is `Cᵀ (x ⊗ y)`.
#[derive(Clone, Debug)]
pub struct ClebschGordan {
    pub l1: u32,
    pub l2: u32,
    pub l: u32,
    pub matrix: DMatrix<f64>,
}

impl ClebschGordan {
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            2 * self.l1 as usize + 1,
            2 * self.l2 as usize + 1,
            2 * self.l as usize + 1,
        )
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        let (_, d2, _) = self.dims();
        self.matrix[(a * d2 + b, c)]
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|&v| v == 0.0)
    }

    /// `Σ_{ab} C[a,b,c] x_a y_b`.
    pub fn couple(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (d1, d2, d) = self.dims();
        assert_eq!(x.len(), d1);
        assert_eq!(y.len(), d2);
        let mut out = vec![0.0; d];
        for (a, xa) in x.iter().enumerate() {
            for (b, yb) in y.iter().enumerate() {
                let p = xa * yb;
                if p == 0.0 {
                    continue;
                }
                let row = a * d2 + b;
                for (c, o) in out.iter_mut().enumerate() {
                    *o += self.matrix[(row, c)] * p;
                }
            }
        }
        out
    }
}

pub fn triangle(l1: u32, l2: u32, l: u32) -> bool {
    l1.abs_diff(l2) <= l && l <= l1 + l2
}

fn cache() -> &'static Mutex<HashMap<(u32, u32, u32), Arc<ClebschGordan>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32, u32), Arc<ClebschGordan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached coupling tensor for `l1 ⊗ l2 → l`; zero when the triangle rule fails.
pub fn clebsch_gordan(l1: u32, l2: u32, l: u32) -> Arc<ClebschGordan> {
    let key = (l1, l2, l);
    if let Some(c) = cache().lock().unwrap().get(&key) {
        return c.clone();
    }
    let cg = Arc::new(compute(l1, l2, l));
    cache().lock().unwrap().entry(key).or_insert(cg).clone()
}

fn compute(l1: u32, l2: u32, l: u32) -> ClebschGordan {
    let (d1, d2, d) = (2 * l1 as usize + 1, 2 * l2 as usize + 1, 2 * l as usize + 1);
    let mut matrix = DMatrix::zeros(d1 * d2, d);
    if !triangle(l1, l2, l) {
        return ClebschGordan { l1, l2, l, matrix };
    }
    let rule = haar_rule(GroupTag::So3, l1 + l2 + l);
    let mats: Vec<_> = rule
        .nodes()
        .iter()
        .map(|g| {
            (
                irrep_matrix(&IrrepLabel::so3(l1), g).unwrap(),
                irrep_matrix(&IrrepLabel::so3(l2), g).unwrap(),
                irrep_matrix(&IrrepLabel::so3(l), g).unwrap(),
            )
        })
        .collect();
    let threshold = 0.5 / (d1 * d2 * d) as f64;
    'seeds: for a in 0..d1 {
        for b in 0..d2 {
            for c in 0..d {
                let mut proj = DMatrix::<f64>::zeros(d1 * d2, d);
                for ((r1, r2, r), w) in mats.iter().zip(rule.weights()) {
                    for a2 in 0..d1 {
                        let x = w * r1[(a2, a)];
                        if x == 0.0 {
                            continue;
                        }
                        for b2 in 0..d2 {
                            let xy = x * r2[(b2, b)];
                            if xy == 0.0 {
                                continue;
                            }
                            let row = a2 * d2 + b2;
                            for c2 in 0..d {
                                proj[(row, c2)] += xy * r[(c2, c)];
                            }
                        }
                    }
                }
                if proj.norm_squared() >= threshold {
                    matrix = proj;
                    break 'seeds;
                }
            }
        }
    }
    // Schur: CᵀC is a multiple of the identity, so rescaling the whole tensor
    // to Frobenius norm √d gives orthonormal columns.
    let norm = matrix.norm();
    matrix *= (d as f64).sqrt() / norm;
    let tol = 1e-12 * matrix.amax();
    // Lexicographic (a, b, c) order is row-major over (row, c).
    let first = (0..d1 * d2)
        .flat_map(|row| (0..d).map(move |c| (row, c)))
        .map(|idx| matrix[idx])
        .find(|v| v.abs() > tol)
        .unwrap_or(1.0);
    if first < 0.0 {
        matrix.neg_mut();
    }
    ClebschGordan { l1, l2, l, matrix }
}
