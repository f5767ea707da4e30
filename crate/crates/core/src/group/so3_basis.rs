//! Real-basis generators of the SO(3) irreps.
//!
//! Basis vectors are ordered `m = -l..=l` and match the real spherical
//! harmonics of [`crate::manifold::spherical_harmonic`]: `m > 0` carries
//! `cos(mφ)`, `m < 0` carries `sin(|m|φ)`. With this ordering the irrep
//! matrices satisfy `Y_l(R u) = D^l(R) Y_l(u)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::expm;

pub(crate) struct So3Basis {
    /// `J_x, J_y, J_z`, real antisymmetric.
    pub generators: [DMatrix<f64>; 3],
    /// `D^l(Rx(-π/2))`, which carries z-rotations onto y-rotations.
    pub z_to_y: DMatrix<f64>,
}

fn cache() -> &'static Mutex<HashMap<u32, Arc<So3Basis>>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<So3Basis>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn so3_basis(l: u32) -> Arc<So3Basis> {
    if let Some(b) = cache().lock().unwrap().get(&l) {
        return b.clone();
    }
    let basis = Arc::new(build(l));
    cache().lock().unwrap().entry(l).or_insert(basis).clone()
}

fn build(l: u32) -> So3Basis {
    let generators = real_generators(l);
    let z_to_y = expm(&(&generators[0] * (-std::f64::consts::FRAC_PI_2)));
    So3Basis { generators, z_to_y }
}

/// Ladder-operator construction in the complex `|l, m⟩` basis followed by the
/// unitary change to the real basis.
fn real_generators(l: u32) -> [DMatrix<f64>; 3] {
    let li = l as i64;
    let d = (2 * l + 1) as usize;
    let idx = |m: i64| (m + li) as usize;
    let zero = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);

    let mut lz = DMatrix::from_element(d, d, zero);
    let mut lplus = DMatrix::from_element(d, d, zero);
    for m in -li..=li {
        lz[(idx(m), idx(m))] = Complex64::new(m as f64, 0.0);
        if m < li {
            let c = ((li * (li + 1) - m * (m + 1)) as f64).sqrt();
            lplus[(idx(m + 1), idx(m))] = Complex64::new(c, 0.0);
        }
    }
    let lminus = lplus.adjoint();
    let lx = (&lplus + &lminus) * Complex64::new(0.5, 0.0);
    let ly = (&lplus - &lminus) * (Complex64::new(0.5, 0.0) / i);

    // Real harmonics as combinations of complex ones (Condon–Shortley phase).
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = DMatrix::from_element(d, d, zero);
    for m in -li..=li {
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        match m.cmp(&0) {
            std::cmp::Ordering::Greater => {
                u[(idx(m), idx(-m))] = Complex64::new(s, 0.0);
                u[(idx(m), idx(m))] = Complex64::new(sign * s, 0.0);
            }
            std::cmp::Ordering::Equal => u[(idx(0), idx(0))] = Complex64::new(1.0, 0.0),
            std::cmp::Ordering::Less => {
                u[(idx(m), idx(m))] = i * s;
                u[(idx(m), idx(-m))] = -i * (sign * s);
            }
        }
    }
    let uh = u.adjoint();

    // The derivative of Y(exp(s L_k) u) at s = 0 is (u × ∇)_k Y = i L̂_k Y, so
    // acting on the column of basis functions the generator is (i L̂_k)ᵀ.
    let to_real = |lk: &DMatrix<Complex64>| -> DMatrix<f64> {
        let g = (lk * i).transpose();
        let r = &u * g * &uh;
        debug_assert!(r.iter().all(|z| z.im.abs() < 1e-12));
        r.map(|z| z.re)
    };
    [to_real(&lx), to_real(&ly), to_real(&lz)]
}

/// `exp(θ J_z)` in closed form: a planar rotation by `mθ` on each `(−m, m)`
/// pair.
pub(crate) fn z_rotation(l: u32, theta: f64) -> DMatrix<f64> {
    let d = (2 * l + 1) as usize;
    let li = l as i64;
    let mut out = DMatrix::zeros(d, d);
    out[(l as usize, l as usize)] = 1.0;
    for m in 1..=li {
        let (s, c) = (m as f64 * theta).sin_cos();
        let (neg, pos) = ((li - m) as usize, (li + m) as usize);
        out[(neg, neg)] = c;
        out[(pos, pos)] = c;
        out[(neg, pos)] = s;
        out[(pos, neg)] = -s;
    }
    out
}
