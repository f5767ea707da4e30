use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::element::{GroupElement, GroupTag};
use super::so3_basis::{so3_basis, z_rotation};
use crate::error::{Error, Result};
use crate::linalg::block_diag;

/// A real irreducible representation: SO(2) frequency `m ≥ 0` or SO(3)
/// degree `l ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IrrepLabel {
    pub group: GroupTag,
    pub degree: u32,
}

impl IrrepLabel {
    pub fn so2(m: u32) -> Self {
        IrrepLabel { group: GroupTag::So2, degree: m }
    }

    pub fn so3(l: u32) -> Self {
        IrrepLabel { group: GroupTag::So3, degree: l }
    }

    pub fn trivial(group: GroupTag) -> Self {
        IrrepLabel { group, degree: 0 }
    }

    pub fn is_trivial(&self) -> bool {
        self.degree == 0
    }

    pub fn dim(&self) -> usize {
        match self.group {
            GroupTag::So2 => {
                if self.degree == 0 {
                    1
                } else {
                    2
                }
            }
            GroupTag::So3 => 2 * self.degree as usize + 1,
        }
    }

    /// Eigenvalue of the Casimir operator: `m²` or `l(l+1)`.
    pub fn casimir_value(&self) -> f64 {
        let d = self.degree as f64;
        match self.group {
            GroupTag::So2 => d * d,
            GroupTag::So3 => d * (d + 1.0),
        }
    }
}

impl std::fmt::Display for IrrepLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.group {
            GroupTag::So2 => write!(f, "m={}", self.degree),
            GroupTag::So3 => write!(f, "l={}", self.degree),
        }
    }
}

fn check_tag(label: &IrrepLabel, g: &GroupElement) -> Result<()> {
    if label.group != g.tag() {
        return Err(Error::invalid(format!(
            "irrep {label} of {} evaluated on an {} element",
            label.group,
            g.tag()
        )));
    }
    Ok(())
}

/// Orthogonal matrix of `g` in the real irrep `label`.
pub fn irrep_matrix(label: &IrrepLabel, g: &GroupElement) -> Result<DMatrix<f64>> {
    check_tag(label, g)?;
    Ok(match *g {
        GroupElement::So2(theta) => so2_irrep(label.degree, theta),
        GroupElement::So3(_) => {
            if label.degree == 0 {
                return Ok(DMatrix::identity(1, 1));
            }
            let l = label.degree;
            let (alpha, beta, gamma) = g.euler_angles();
            let basis = so3_basis(l);
            let w = &basis.z_to_y;
            // exp(βJ_y) = W exp(βJ_z) Wᵀ
            let dy = w * z_rotation(l, beta) * w.transpose();
            z_rotation(l, alpha) * dy * z_rotation(l, gamma)
        }
    })
}

fn so2_irrep(m: u32, theta: f64) -> DMatrix<f64> {
    if m == 0 {
        return DMatrix::identity(1, 1);
    }
    let (s, c) = (m as f64 * theta).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Lie-algebra generators `dρ(𝔤_i)` for the orthonormal algebra basis under
/// `⟨X, Y⟩ = −½ tr(XY)` in the defining representation.
pub fn generators(label: &IrrepLabel) -> Vec<DMatrix<f64>> {
    match label.group {
        GroupTag::So2 => {
            if label.degree == 0 {
                vec![DMatrix::zeros(1, 1)]
            } else {
                let m = label.degree as f64;
                vec![DMatrix::from_row_slice(2, 2, &[0.0, -m, m, 0.0])]
            }
        }
        GroupTag::So3 => so3_basis(label.degree).generators.to_vec(),
    }
}

/// `Cas = −Σ_i dρ(𝔤_i)²`; equals `l(l+1)·I` on SO(3) and `m²·I` on SO(2).
pub fn casimir(label: &IrrepLabel) -> DMatrix<f64> {
    let d = label.dim();
    generators(label)
        .iter()
        .fold(DMatrix::zeros(d, d), |acc, j| acc - j * j)
}

/// Character `χ(g) = tr ρ(g)`, evaluated from the class angle.
pub fn character(label: &IrrepLabel, g: &GroupElement) -> Result<f64> {
    check_tag(label, g)?;
    let k = label.degree;
    Ok(match g {
        GroupElement::So2(theta) => {
            if k == 0 {
                1.0
            } else {
                2.0 * (k as f64 * theta).cos()
            }
        }
        GroupElement::So3(m) => {
            // χ_l = 1 + 2 Σ_{k=1}^{l} T_k(cos ω), cos ω = (tr R − 1)/2.
            let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
            let (mut prev, mut cur) = (1.0, c);
            let mut sum = 1.0;
            for _ in 0..k {
                sum += 2.0 * cur;
                let next = 2.0 * c * cur - prev;
                prev = cur;
                cur = next;
            }
            sum
        }
    })
}

/// One block of a [`RepSpace`]: `multiplicity` copies of one irrep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepBlock {
    pub irrep: IrrepLabel,
    pub multiplicity: usize,
}

/// A single irrep copy inside a [`RepSpace`], with its offset in the stacked
/// feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Channel {
    pub irrep: IrrepLabel,
    pub offset: usize,
}

impl Channel {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.irrep.dim()
    }
}

/// Direct sum of irreps with multiplicities, laid out in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepSpace {
    group: GroupTag,
    blocks: Vec<RepBlock>,
    channels: Vec<Channel>,
    dim: usize,
}

impl RepSpace {
    pub fn new(group: GroupTag, blocks: Vec<RepBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("representation space needs at least one block"));
        }
        let mut channels = Vec::new();
        let mut offset = 0;
        for b in &blocks {
            if b.irrep.group != group {
                return Err(Error::invalid(format!(
                    "irrep {} does not belong to {group}",
                    b.irrep
                )));
            }
            if b.multiplicity == 0 {
                return Err(Error::invalid(format!("irrep {} has zero multiplicity", b.irrep)));
            }
            for _ in 0..b.multiplicity {
                channels.push(Channel { irrep: b.irrep, offset });
                offset += b.irrep.dim();
            }
        }
        Ok(RepSpace { group, blocks, channels, dim: offset })
    }

    /// Convenience constructor from `(degree, multiplicity)` pairs.
    pub fn from_degrees(group: GroupTag, degrees: &[(u32, usize)]) -> Result<Self> {
        let blocks = degrees
            .iter()
            .map(|&(degree, multiplicity)| RepBlock {
                irrep: IrrepLabel { group, degree },
                multiplicity,
            })
            .collect();
        RepSpace::new(group, blocks)
    }

    pub fn scalars(group: GroupTag, count: usize) -> Result<Self> {
        RepSpace::from_degrees(group, &[(0, count)])
    }

    pub fn group(&self) -> GroupTag {
        self.group
    }

    pub fn blocks(&self) -> &[RepBlock] {
        &self.blocks
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.blocks.iter().map(|b| b.irrep.degree).max().unwrap_or(0)
    }

    pub fn is_scalar(&self) -> bool {
        self.blocks.iter().all(|b| b.irrep.is_trivial())
    }

    /// Distinct irreps in order of first appearance.
    pub fn irreps(&self) -> Vec<IrrepLabel> {
        let mut out: Vec<IrrepLabel> = Vec::new();
        for b in &self.blocks {
            if !out.contains(&b.irrep) {
                out.push(b.irrep);
            }
        }
        out
    }

    /// Channels carrying `irrep`, in layout order.
    pub fn channels_of(&self, irrep: &IrrepLabel) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.irrep == *irrep)
            .map(|(i, _)| i)
            .collect()
    }

    /// Block-diagonal matrix of `g` acting on the whole space.
    pub fn matrix(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        let blocks = self
            .channels
            .iter()
            .map(|c| irrep_matrix(&c.irrep, g))
            .collect::<Result<Vec<_>>>()?;
        Ok(block_diag(&blocks))
    }

    /// Apply `ρ_V(g)` to a stacked vector, one irrep block at a time.
    pub fn apply(&self, g: &GroupElement, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector of length {} in a space of dimension {}",
                v.len(),
                self.dim
            )));
        }
        let mut out = v.to_vec();
        for irrep in self.irreps() {
            if irrep.is_trivial() {
                continue;
            }
            let m = irrep_matrix(&irrep, g)?;
            for c in self.channels.iter().filter(|c| c.irrep == irrep) {
                let r = c.range();
                let x = nalgebra::DVector::from_column_slice(&v[r.clone()]);
                out[r].copy_from_slice((&m * x).as_slice());
            }
        }
        Ok(out)
    }

    /// Per-channel Casimir eigenvalue, expanded to one entry per coordinate.
    pub fn casimir_diagonal(&self) -> Vec<f64> {
        self.channels
            .iter()
            .flat_map(|c| std::iter::repeat_n(c.irrep.casimir_value(), c.irrep.dim()))
            .collect()
    }

    pub fn max_casimir(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.irrep.casimir_value())
            .fold(0.0, f64::max)
    }
}

/// Block-diagonal Casimir of a whole representation space.
pub fn casimir_on_space(space: &RepSpace) -> DMatrix<f64> {
    let blocks: Vec<_> = space.channels().iter().map(|c| casimir(&c.irrep)).collect();
    block_diag(&blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_generator(label: &IrrepLabel, axis: usize) -> DMatrix<f64> {
        let h = 1e-5;
        let at = |s: f64| match label.group {
            GroupTag::So2 => GroupElement::so2(s),
            GroupTag::So3 => match axis {
                0 => GroupElement::rot_x(s),
                1 => GroupElement::rot_y(s),
                _ => GroupElement::rot_z(s),
            },
        };
        (irrep_matrix(label, &at(h)).unwrap() - irrep_matrix(label, &at(-h)).unwrap())
            / (2.0 * h)
    }

    #[test]
    fn trivial_irrep_is_one() {
        let g = GroupElement::from_euler(1.0, 2.0, 3.0);
        assert_eq!(irrep_matrix(&IrrepLabel::so3(0), &g).unwrap(), DMatrix::identity(1, 1));
        assert_eq!(
            irrep_matrix(&IrrepLabel::so2(0), &GroupElement::so2(1.0)).unwrap(),
            DMatrix::identity(1, 1)
        );
    }

    #[test]
    fn so2_quarter_turn() {
        let r = irrep_matrix(&IrrepLabel::so2(1), &GroupElement::so2(std::f64::consts::FRAC_PI_2))
            .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((r - expected).norm() < 1e-15);
    }

    #[test]
    fn so3_l1_z_rotation_block() {
        // Real basis order (y, z, x): the (x, y) pair rotates, z is fixed.
        let alpha = 0.8;
        let d = irrep_matrix(&IrrepLabel::so3(1), &GroupElement::rot_z(alpha)).unwrap();
        let jz = &generators(&IrrepLabel::so3(1))[2];
        // Oracle: partial sums of the exponential series.
        let mut series = DMatrix::<f64>::identity(3, 3);
        let mut term = DMatrix::<f64>::identity(3, 3);
        for k in 1..40 {
            term = &term * (jz * alpha) / k as f64;
            series += &term;
        }
        assert!((&d - &series).norm() < 1e-14);
        let (s, c) = alpha.sin_cos();
        assert!((d[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((d[(0, 0)] - c).abs() < 1e-15 && (d[(2, 2)] - c).abs() < 1e-15);
        assert!((d[(0, 2)].abs() - s).abs() < 1e-15 && (d[(2, 0)].abs() - s).abs() < 1e-15);
    }

    #[test]
    fn so3_l1_is_the_defining_rep_permuted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let g = GroupElement::random(GroupTag::So3, &mut rng);
            let d = irrep_matrix(&IrrepLabel::so3(1), &g).unwrap();
            let r = g.so3_matrix();
            let perm = [1usize, 2, 0];
            for a in 0..3 {
                for b in 0..3 {
                    assert!((d[(a, b)] - r[(perm[a], perm[b])]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn generators_match_finite_differences() {
        for label in [IrrepLabel::so2(0), IrrepLabel::so2(1), IrrepLabel::so2(3)] {
            let g = &generators(&label)[0];
            assert!((fd_generator(&label, 0) - g).norm() < 1e-8);
        }
        for l in 0..=4 {
            let label = IrrepLabel::so3(l);
            for (axis, g) in generators(&label).iter().enumerate() {
                assert!((fd_generator(&label, axis) - g).norm() < 1e-8, "l={l} axis={axis}");
            }
        }
    }

    #[test]
    fn exponentiated_generators_match_irrep_matrices() {
        for l in 0..=4 {
            let label = IrrepLabel::so3(l);
            let gens = generators(&label);
            for s in [0.0, 0.4, 1.3, 2.5, std::f64::consts::PI] {
                let elems = [GroupElement::rot_x(s), GroupElement::rot_y(s), GroupElement::rot_z(s)];
                for (j, g) in gens.iter().zip(elems.iter()) {
                    let diff = (expm(&(j * s)) - irrep_matrix(&label, g).unwrap()).norm();
                    assert!(diff < 1e-9, "l={l} s={s}: {diff}");
                }
            }
        }
    }

    #[test]
    fn casimir_examples() {
        assert_eq!(casimir(&IrrepLabel::so3(0)), DMatrix::zeros(1, 1));
        assert!((casimir(&IrrepLabel::so3(1)) - DMatrix::identity(3, 3) * 2.0).norm() < 1e-14);
        assert!((casimir(&IrrepLabel::so2(3)) - DMatrix::identity(2, 2) * 9.0).norm() < 1e-14);
    }

    #[test]
    fn casimir_on_space_examples() {
        let v = RepSpace::from_degrees(GroupTag::So3, &[(0, 1), (1, 1)]).unwrap();
        let c = casimir_on_space(&v);
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 2.0, 2.0, 2.0]));
        assert!((c - expected).norm() < 1e-14);
        let w = RepSpace::from_degrees(GroupTag::So2, &[(1, 2)]).unwrap();
        assert!((casimir_on_space(&w) - DMatrix::identity(4, 4)).norm() < 1e-14);
        let s = RepSpace::scalars(GroupTag::So3, 1).unwrap();
        assert_eq!(casimir_on_space(&s), DMatrix::zeros(1, 1));
    }

    #[test]
    fn characters_are_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let g = GroupElement::random(GroupTag::So3, &mut rng);
            for l in 0..=5 {
                let label = IrrepLabel::so3(l);
                let tr = irrep_matrix(&label, &g).unwrap().trace();
                assert!((character(&label, &g).unwrap() - tr).abs() < 1e-12);
            }
            let h = GroupElement::random(GroupTag::So2, &mut rng);
            for m in 0..=4 {
                let label = IrrepLabel::so2(m);
                let tr = irrep_matrix(&label, &h).unwrap().trace();
                assert!((character(&label, &h).unwrap() - tr).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rep_space_layout() {
        let v = RepSpace::from_degrees(GroupTag::So3, &[(1, 2), (0, 1), (2, 1)]).unwrap();
        assert_eq!(v.dim(), 3 + 3 + 1 + 5);
        let offsets: Vec<_> = v.channels().iter().map(|c| c.offset).collect();
        assert_eq!(offsets, vec![0, 3, 6, 7]);
        assert!(RepSpace::from_degrees(GroupTag::So3, &[(1, 0)]).is_err());
        assert!(RepSpace::new(GroupTag::So3, vec![]).is_err());
    }

    #[test]
    fn apply_matches_block_matrix() {
        let v = RepSpace::from_degrees(GroupTag::So3, &[(0, 1), (1, 2), (2, 1)]).unwrap();
        let g = GroupElement::from_euler(0.3, 0.9, 4.0);
        let x: Vec<f64> = (0..v.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = v.apply(&g, &x).unwrap();
        let b = v.matrix(&g).unwrap() * nalgebra::DVector::from_column_slice(&x);
        for (p, q) in a.iter().zip(b.iter()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn mismatched_irrep_tag_errors() {
        assert!(irrep_matrix(&IrrepLabel::so2(1), &GroupElement::rot_x(0.2)).is_err());
    }
}
