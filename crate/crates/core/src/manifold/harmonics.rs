use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Legendre polynomial `P_l(u)` by the three-term recurrence.
pub fn legendre(l: u32, u: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, u);
    if l == 0 {
        return 1.0;
    }
    for k in 2..=l {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * u * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P_0(u), …, P_l(u)`.
pub fn legendre_all(l: u32, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l as usize + 1);
    out.push(1.0);
    if l >= 1 {
        out.push(u);
    }
    for k in 2..=l as usize {
        let kf = k as f64;
        out.push(((2.0 * kf - 1.0) * u * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf);
    }
    out
}

/// All real orthonormal harmonics of degree `l`, ordered `m = -l..=l`.
///
/// `m > 0` carries `cos(mφ)`, `m < 0` carries `sin(|m|φ)`, no Condon–Shortley
/// phase. For `l = 1` the order is `(y, z, x)` scaled by `√(3/4π)`.
pub fn spherical_harmonics(l: u32, u: &Vector3<f64>) -> Vec<f64> {
    let li = l as usize;
    let z = u.z.clamp(-1.0, 1.0);
    // cos(mφ)·ρ^m and sin(mφ)·ρ^m via complex powers of (x + iy), then the
    // normalized associated Legendre factor without the ρ^m part.
    let (mut cr, mut ci) = (1.0, 0.0);
    let mut cos_m = vec![1.0; li + 1];
    let mut sin_m = vec![0.0; li + 1];
    for m in 1..=li {
        let nr = cr * u.x - ci * u.y;
        let ni = cr * u.y + ci * u.x;
        cr = nr;
        ci = ni;
        cos_m[m] = cr;
        sin_m[m] = ci;
    }
    let mut out = vec![0.0; 2 * li + 1];
    // q_mm = N_mm (2m-1)!!, built iteratively; then upward recurrence in l.
    let mut q_mm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=li {
        if m > 0 {
            q_mm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        let mf = m as f64;
        let mut q_prev = 0.0;
        let mut q = q_mm;
        for k in m + 1..=li {
            let kf = k as f64;
            let a = ((4.0 * kf * kf - 1.0) / (kf * kf - mf * mf)).sqrt();
            let b = if k >= m + 2 {
                (((kf - 1.0) * (kf - 1.0) - mf * mf) / (4.0 * (kf - 1.0) * (kf - 1.0) - 1.0)).sqrt()
            } else {
                0.0
            };
            let next = a * (z * q - b * q_prev);
            q_prev = q;
            q = next;
        }
        if m == 0 {
            out[li] = q;
        } else {
            let s = std::f64::consts::SQRT_2 * q;
            out[li + m] = s * cos_m[m];
            out[li - m] = s * sin_m[m];
        }
    }
    out
}

/// Real orthonormal spherical harmonic `Y_{lm}(u)`.
pub fn spherical_harmonic(l: u32, m: i32, u: &Vector3<f64>) -> Result<f64> {
    if m.unsigned_abs() > l {
        return Err(Error::invalid(format!("|m| = {} exceeds l = {l}", m.abs())));
    }
    if (u.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("direction has norm {}", u.norm())));
    }
    Ok(spherical_harmonics(l, u)[(l as i32 + m) as usize])
}
