use std::collections::{HashMap, HashSet};
use std::f64::consts::{PI, TAU};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::harmonics::legendre_all;
use super::space::{distance_unchecked, Manifold, Point};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupTag};

/// Radial profile of the Euclidean base kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// The exact heat kernel `(4πt)^{-d/2} exp(-r²/4t)`.
    #[default]
    Gaussian,
    /// Heat kernel times `½(1 + cos(πr/radius))`, zero beyond `radius`.
    CosineCutoff { radius: f64 },
}

/// Band-limited bundle heat kernel parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub t: f64,
    #[serde(default)]
    pub l_base: u32,
    #[serde(default)]
    pub l_grp: u32,
    #[serde(default)]
    pub profile: RadialProfile,
    /// Replaces the spectral multipliers `e^{-λ_l t}` of a compact base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn new(t: f64, l_base: u32, l_grp: u32) -> Result<Self> {
        let spec = KernelSpec { t, l_base, l_grp, profile: RadialProfile::Gaussian, coefficients: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!("diffusion time must be positive, got {}", self.t)));
        }
        if let RadialProfile::CosineCutoff { radius } = self.profile {
            if !(radius > 0.0) {
                return Err(Error::invalid("cutoff radius must be positive"));
            }
        }
        if let Some(c) = &self.coefficients {
            if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("kernel coefficients must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Base-manifold factor of the bundle kernel.
    pub fn base(&self, m: &Manifold, x: &Point, y: &Point) -> Result<f64> {
        self.validate()?;
        if let (Some(c), true) = (&self.coefficients, m.volume().is_some()) {
            return Ok(spectral_sum(m, x, y, self.l_base, |l| c.get(l as usize).copied().unwrap_or(0.0)));
        }
        let k = base_heat_kernel(m, self.t, x, y, self.l_base)?;
        Ok(match (m, self.profile) {
            (Manifold::Euclidean { .. }, RadialProfile::CosineCutoff { radius }) => {
                k * cosine_cutoff(distance_unchecked(m, x, y), radius)
            }
            _ => k,
        })
    }

    /// Group factor evaluated at the relative structure-group element.
    pub fn group(&self, tag: GroupTag, g: &GroupElement) -> Result<f64> {
        group_heat_kernel(tag, self.t, g, self.l_grp)
    }
}

pub(crate) fn cosine_cutoff(r: f64, radius: f64) -> f64 {
    if r >= radius {
        0.0
    } else {
        0.5 * (1.0 + (PI * r / radius).cos())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("diffusion time must be positive, got {t}")))
    }
}

/// `Σ_l mult(l)·φ_l(x, y)` over the eigenspaces of a compact base.
fn spectral_sum(m: &Manifold, x: &Point, y: &Point, l_max: u32, mult: impl Fn(u32) -> f64) -> f64 {
    match m {
        Manifold::Sphere2 => {
            let u = x.dot(y).clamp(-1.0, 1.0);
            legendre_all(l_max, u)
                .iter()
                .enumerate()
                .map(|(l, p)| (2 * l + 1) as f64 / (4.0 * PI) * mult(l as u32) * p)
                .sum()
        }
        Manifold::Circle => {
            let d = x.x - y.x;
            let mut s = mult(0);
            for n in 1..=l_max {
                s += 2.0 * mult(n) * (n as f64 * d).cos();
            }
            s / TAU
        }
        Manifold::Euclidean { .. } => unreachable!("no spectral sum on Euclidean space"),
    }
}

/// Heat kernel of the base manifold: Gaussian on Euclidean space, truncated
/// eigenfunction series on the circle and sphere.
pub fn base_heat_kernel(m: &Manifold, t: f64, x: &Point, y: &Point, l_max: u32) -> Result<f64> {
    check_time(t)?;
    m.validate(x)?;
    m.validate(y)?;
    Ok(match m {
        Manifold::Euclidean { dim } => {
            let r2 = (x - y).norm_squared();
            (4.0 * PI * t).powf(-(*dim as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
        }
        Manifold::Sphere2 => {
            warn_below_threshold(Compact::Sphere2, l_max, t);
            spectral_sum(m, x, y, l_max, |l| (-((l * (l + 1)) as f64) * t).exp())
        }
        Manifold::Circle => {
            warn_below_threshold(Compact::Circle, l_max, t);
            spectral_sum(m, x, y, l_max, |n| (-((n * n) as f64) * t).exp())
        }
    })
}

/// Heat kernel of the bi-invariant Laplacian, normalized to unit Haar
/// integral: `Σ_l d_l e^{-l(l+1)t} χ_l` on SO(3), `Σ_{|m|≤L} e^{-m²t} cos mθ`
/// on SO(2).
pub fn group_heat_kernel(tag: GroupTag, t: f64, g: &GroupElement, l_max: u32) -> Result<f64> {
    check_time(t)?;
    if g.tag() != tag {
        return Err(Error::invalid(format!("{tag} kernel evaluated on an {} element", g.tag())));
    }
    Ok(match g {
        GroupElement::So2(theta) => {
            warn_below_threshold(Compact::So2, l_max, t);
            let mut s = 1.0;
            for m in 1..=l_max {
                let mf = m as f64;
                s += 2.0 * (-mf * mf * t).exp() * (mf * theta).cos();
            }
            s
        }
        GroupElement::So3(r) => {
            warn_below_threshold(Compact::So3, l_max, t);
            let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
            so3_class_sum(c, l_max, |l| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * t).exp())
        }
    })
}

/// `Σ_l coef(l) χ_l` with `χ_l = 1 + 2Σ_{k≤l} T_k(c)`, `c` the cosine of the
/// rotation angle.
pub(crate) fn so3_class_sum(c: f64, l_max: u32, coef: impl Fn(u32) -> f64) -> f64 {
    let (mut prev, mut cur) = (1.0, c);
    let mut chi = 1.0;
    let mut s = coef(0);
    for l in 1..=l_max {
        chi += 2.0 * cur;
        s += coef(l) * chi;
        let next = 2.0 * c * cur - prev;
        prev = cur;
        cur = next;
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Compact {
    Circle,
    Sphere2,
    So2,
    So3,
}

fn thresholds() -> &'static Mutex<(HashMap<(Compact, u32), f64>, HashSet<(Compact, u32)>)> {
    static CACHE: OnceLock<Mutex<(HashMap<(Compact, u32), f64>, HashSet<(Compact, u32)>)>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new((HashMap::new(), HashSet::new())))
}

fn threshold(kind: Compact, l_max: u32) -> f64 {
    if let Some(t) = thresholds().lock().unwrap().0.get(&(kind, l_max)) {
        return *t;
    }
    let t = compute_threshold(kind, l_max);
    thresholds().lock().unwrap().0.insert((kind, l_max), t);
    t
}

fn warn_below_threshold(kind: Compact, l_max: u32, t: f64) {
    if l_max == 0 {
        return;
    }
    let th = threshold(kind, l_max);
    if t < th && thresholds().lock().unwrap().1.insert((kind, l_max)) {
        log::warn!(
            "diffusion time {t} is below the positivity threshold {th:.4} of the truncated {kind:?} kernel at band limit {l_max}"
        );
    }
}

/// Minimum of the truncated kernel over a dense grid of class angles.
fn truncated_minimum(kind: Compact, l_max: u32, t: f64) -> f64 {
    const SAMPLES: usize = 2001;
    (0..SAMPLES)
        .map(|k| {
            let theta = PI * k as f64 / (SAMPLES - 1) as f64;
            let c = theta.cos();
            match kind {
                Compact::Sphere2 => legendre_all(l_max, c)
                    .iter()
                    .enumerate()
                    .map(|(l, p)| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * t).exp() * p)
                    .sum::<f64>(),
                Compact::Circle | Compact::So2 => {
                    1.0 + (1..=l_max)
                        .map(|n| 2.0 * (-((n * n) as f64) * t).exp() * (n as f64 * theta).cos())
                        .sum::<f64>()
                }
                Compact::So3 => so3_class_sum(c, l_max, |l| {
                    (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * t).exp()
                }),
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn compute_threshold(kind: Compact, l_max: u32) -> f64 {
    let (mut lo, mut hi) = (0.0, 1e-4);
    while truncated_minimum(kind, l_max, hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 100.0 {
            break;
        }
    }
    if lo == 0.0 {
        return hi;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if truncated_minimum(kind, l_max, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smallest diffusion time at which the truncated base kernel is
/// nonnegative on a dense grid; zero for the Gaussian.
pub fn base_positivity_threshold(m: &Manifold, l_max: u32) -> f64 {
    match m {
        Manifold::Sphere2 => threshold(Compact::Sphere2, l_max),
        Manifold::Circle => threshold(Compact::Circle, l_max),
        Manifold::Euclidean { .. } => 0.0,
    }
}

/// Same as [`base_positivity_threshold`] for the group kernel.
pub fn group_positivity_threshold(tag: GroupTag, l_max: u32) -> f64 {
    match tag {
        GroupTag::So2 => threshold(Compact::So2, l_max),
        GroupTag::So3 => threshold(Compact::So3, l_max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{character, haar_rule, integrate_over_group, IrrepLabel};
    use crate::manifold::{circle_grid, sample_points, sphere_grid};
    use nalgebra::{DMatrix, Vector3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere_conv(s: f64, t: f64, x: &Point, y: &Point, l: u32) -> f64 {
        let m = Manifold::Sphere2;
        sphere_grid(2 * l)
            .iter()
            .map(|(z, w)| {
                w * base_heat_kernel(&m, s, x, z, l).unwrap() * base_heat_kernel(&m, t, z, y, l).unwrap()
            })
            .sum()
    }

    #[test]
    fn gaussian_at_coincidence() {
        let m = Manifold::euclidean(3).unwrap();
        let o = Vector3::zeros();
        let k = base_heat_kernel(&m, 1.0, &o, &o, 0).unwrap();
        assert!((k - (4.0 * PI).powf(-1.5)).abs() < 1e-16);
        assert!((k - 0.022_448_39).abs() < 1e-8);
    }

    #[test]
    fn nonpositive_time_errors() {
        let m = Manifold::Sphere2;
        assert!(base_heat_kernel(&m, 0.0, &Vector3::z(), &Vector3::z(), 4).is_err());
        assert!(group_heat_kernel(GroupTag::So3, -1.0, &GroupElement::identity(GroupTag::So3), 2).is_err());
    }

    #[test]
    fn sphere_kernel_flattens() {
        let m = Manifold::Sphere2;
        for p in sample_points(&m, 6, 1).chunks(2) {
            let k = base_heat_kernel(&m, 50.0, &p[0], &p[1], 16).unwrap();
            assert!((k - 1.0 / (4.0 * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_semigroup() {
        let pts = sample_points(&Manifold::Sphere2, 6, 4);
        for &(s, t) in &[(0.1, 0.1), (0.05, 0.2), (0.3, 0.7)] {
            for p in pts.chunks(2) {
                let lhs = sphere_conv(s, t, &p[0], &p[1], 16);
                let rhs = base_heat_kernel(&Manifold::Sphere2, s + t, &p[0], &p[1], 16).unwrap();
                assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn circle_semigroup() {
        let m = Manifold::Circle;
        let pts = sample_points(&m, 6, 5);
        for &(s, t) in &[(0.1, 0.1), (0.05, 0.2), (0.3, 0.7)] {
            for p in pts.chunks(2) {
                let lhs: f64 = circle_grid(32)
                    .iter()
                    .map(|(z, w)| {
                        w * base_heat_kernel(&m, s, &p[0], z, 16).unwrap()
                            * base_heat_kernel(&m, t, z, &p[1], 16).unwrap()
                    })
                    .sum();
                let rhs = base_heat_kernel(&m, s + t, &p[0], &p[1], 16).unwrap();
                assert!((lhs - rhs).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sphere_normalization() {
        let x = sample_points(&Manifold::Sphere2, 1, 8)[0];
        for t in [0.05, 0.1, 1.0] {
            let total: f64 = sphere_grid(32)
                .iter()
                .map(|(z, w)| w * base_heat_kernel(&Manifold::Sphere2, t, &x, z, 16).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn kernels_are_symmetric() {
        for m in [Manifold::Sphere2, Manifold::Circle, Manifold::euclidean(3).unwrap()] {
            let p = sample_points(&m, 2, 6);
            let a = base_heat_kernel(&m, 0.3, &p[0], &p[1], 12).unwrap();
            let b = base_heat_kernel(&m, 0.3, &p[1], &p[0], 12).unwrap();
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn dominant_mode_decay() {
        let p = sample_points(&Manifold::Sphere2, 2, 10);
        let dev = |t: f64| {
            base_heat_kernel(&Manifold::Sphere2, t, &p[0], &p[1], 16).unwrap() - 1.0 / (4.0 * PI)
        };
        for t in [1.0, 2.0] {
            let ratio = dev(t + 1.0) / dev(t);
            assert!((ratio / (-2.0f64).exp() - 1.0).abs() < 0.15);
        }
    }

    #[test]
    fn group_kernel_unit_integral_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for tag in [GroupTag::So2, GroupTag::So3] {
            let rule = haar_rule(tag, 6);
            let q = integrate_over_group(
                |g| DMatrix::from_element(1, 1, group_heat_kernel(tag, 0.2, g, 6).unwrap()),
                &rule,
            )
            .unwrap();
            assert!((q[(0, 0)] - 1.0).abs() < 1e-10);
            for _ in 0..10 {
                let g = GroupElement::random(tag, &mut rng);
                let a = group_heat_kernel(tag, 0.2, &g, 6).unwrap();
                let b = group_heat_kernel(tag, 0.2, &g.inverse(), 6).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn so3_kernel_flattens_and_matches_characters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let g = GroupElement::random(GroupTag::So3, &mut rng);
            assert!((group_heat_kernel(GroupTag::So3, 50.0, &g, 8).unwrap() - 1.0).abs() < 1e-10);
            let oracle: f64 = (0..=3)
                .map(|l| {
                    (2 * l + 1) as f64
                        * (-((l * (l + 1)) as f64) * 0.3).exp()
                        * character(&IrrepLabel::so3(l), &g).unwrap()
                })
                .sum();
            assert!((group_heat_kernel(GroupTag::So3, 0.3, &g, 3).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn so3_kernel_semigroup_under_convolution() {
        // ∫ k_s(h) k_t(h⁻¹g) dh = k_{s+t}(g); the integrand has degree 2L.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let l = 3;
        let rule = haar_rule(GroupTag::So3, 2 * l);
        for _ in 0..3 {
            let g = GroupElement::random(GroupTag::So3, &mut rng);
            let conv = integrate_over_group(
                |h| {
                    let hg = h.inverse().compose(&g).unwrap();
                    DMatrix::from_element(
                        1,
                        1,
                        group_heat_kernel(GroupTag::So3, 0.2, h, l).unwrap()
                            * group_heat_kernel(GroupTag::So3, 0.3, &hg, l).unwrap(),
                    )
                },
                &rule,
            )
            .unwrap()[(0, 0)];
            let direct = group_heat_kernel(GroupTag::So3, 0.5, &g, l).unwrap();
            assert!((conv - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn positivity_threshold_separates_signs() {
        let th = base_positivity_threshold(&Manifold::Sphere2, 8);
        assert!(th > 0.0);
        assert!(truncated_minimum(Compact::Sphere2, 8, th * 1.01) >= 0.0);
        assert!(truncated_minimum(Compact::Sphere2, 8, th * 0.9) < 0.0);
        assert_eq!(base_positivity_threshold(&Manifold::euclidean(2).unwrap(), 8), 0.0);
        assert!(group_positivity_threshold(GroupTag::So3, 4) > 0.0);
    }

    #[test]
    fn coefficient_overrides_on_compact_bases() {
        let m = Manifold::Sphere2;
        let p = sample_points(&m, 2, 12);
        let t = 0.4;
        let mut spec = KernelSpec::new(t, 6, 0).unwrap();
        let plain = spec.base(&m, &p[0], &p[1]).unwrap();
        spec.coefficients = Some((0..=6).map(|l| (-((l * (l + 1)) as f64) * t).exp()).collect());
        assert!((spec.base(&m, &p[0], &p[1]).unwrap() - plain).abs() < 1e-15);
        spec.coefficients = Some(vec![-1.0]);
        assert!(spec.validate().is_err());
    }
}
