//! Landau spectrum, Johnson–Lippman eigenstates and ladder-operator matrix
//! elements. Natural units throughout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::FieldConfig;

/// Quantum numbers (n, k_x, k_z, ε, s) of a Dirac eigenstate in the Landau gauge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauIndex {
    pub n: usize,
    pub k_x: f64,
    pub k_z: f64,
    pub epsilon: i8,
    pub s: i8,
}

impl LandauIndex {
    pub fn new(n: usize, k_x: f64, k_z: f64, epsilon: i8, s: i8) -> Result<Self> {
        if epsilon.abs() != 1 || s.abs() != 1 {
            return Err(Error::InvalidParameter(format!(
                "epsilon and s must be +1 or -1, got epsilon = {epsilon}, s = {s}"
            )));
        }
        Ok(Self { n, k_x, k_z, epsilon, s })
    }
}

/// E_{n,k_z} = √(1 + 2n/L² + k_z²).
#[inline]
pub fn landau_energy(n: usize, k_z: f64, field: &FieldConfig) -> f64 {
    let w = field.omega();
    (1.0 + w * w * n as f64 + k_z * k_z).sqrt()
}

/// (ω_n^c, ω_n^Z) = (E_{n+1} − E_n, E_{n+1} + E_n).
///
/// The difference is formed as ω²/(E_n + E_{n+1}) so it keeps full relative
/// precision when ω ≪ 1.
pub fn mode_frequencies(n: usize, k_z: f64, field: &FieldConfig) -> (f64, f64) {
    let e0 = landau_energy(n, k_z, field);
    let e1 = landau_energy(n + 1, k_z, field);
    let w = field.omega();
    (w * w / (e0 + e1), e0 + e1)
}

/// Four real amplitudes of a Johnson–Lippman spinor.
///
/// Components 1 and 3 sit on oscillator level n−1, components 2 and 4 on
/// level n. The amplitudes are real in the Landau gauge used here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinorWeights {
    pub n: usize,
    pub components: [f64; 4],
    pub norm_constant: f64,
    pub chi: f64,
    pub eta: f64,
    pub energy: f64,
}

impl SpinorWeights {
    /// Oscillator level carrying spinor component `sigma` (0-based), if any.
    pub fn level(&self, sigma: usize) -> Option<usize> {
        match sigma {
            0 | 2 => self.n.checked_sub(1),
            _ => Some(self.n),
        }
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Johnson–Lippman eigenstate for the given index.
pub fn jl_spinor(idx: &LandauIndex, field: &FieldConfig) -> Result<SpinorWeights> {
    let LandauIndex { n, k_z, epsilon, s, .. } = *idx;
    if s == 1 && n == 0 {
        return Err(Error::InvalidParameter(
            "spin index s = +1 needs n >= 1 (its upper components live on level n-1)".into(),
        ));
    }
    let e = landau_energy(n, k_z, field);
    let eps = f64::from(epsilon);
    let denom = 2.0 * e * e + 2.0 * eps * e;
    if epsilon == -1 && n == 0 && k_z == 0.0 {
        return Err(Error::SingularSpinor);
    }
    // 2E(E − 1) for the lower branch loses precision near the edge; use E² − 1.
    let denom = if epsilon == -1 {
        let w = field.omega();
        2.0 * e * (w * w * n as f64 + k_z * k_z) / (e + 1.0)
    } else {
        denom
    };
    if !(denom > 0.0) {
        return Err(Error::SingularSpinor);
    }
    let norm = denom.sqrt().recip();
    let w = field.omega() * (n as f64).sqrt();
    let (s1, s2) = (f64::from(s + 1) / 2.0, f64::from(s - 1) / 2.0);
    // εE + 1, kept accurate for ε = −1 via (1 − E²)/(1 + E).
    let upper = if epsilon == 1 { e + 1.0 } else { -(e * e - 1.0) / (e + 1.0) };
    let components = [
        norm * s1 * upper,
        norm * s2 * upper,
        norm * (s1 * k_z - s2 * w),
        -norm * (s1 * w + s2 * k_z),
    ];
    let chi = upper * norm;
    Ok(SpinorWeights { n, components, norm_constant: norm, chi, eta: chi * norm, energy: e })
}

/// ⟨idx| Â(0) |idx'⟩ for n' = n + 1 from the spinor overlaps, k-selection
/// rules assumed.
fn lowering_element(a: &SpinorWeights, b: &SpinorWeights) -> f64 {
    let mut acc = 0.0;
    for sigma in 0..4 {
        if let (Some(la), Some(lb)) = (a.level(sigma), b.level(sigma)) {
            if lb == la + 1 {
                acc += a.components[sigma] * b.components[sigma] * (lb as f64).sqrt();
            }
        }
    }
    acc
}

/// Outcome of a ladder matrix element: either the two explicit-form parts or
/// a selection-rule zero, kept distinct from a numerical zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LadderElement {
    Allowed { part1: Complex64, part2: Complex64 },
    Forbidden,
}

impl LadderElement {
    pub fn total(&self) -> Complex64 {
        match self {
            Self::Allowed { part1, part2 } => part1 + part2,
            Self::Forbidden => Complex64::new(0.0, 0.0),
        }
    }
}

/// Square-root branch of the M operator.
const NU: f64 = 1.0;

/// Explicit-form matrix element of Â(t) (when `right.n = left.n + 1`) or of
/// Â†(t) (when `right.n + 1 = left.n`) between two eigenstates, split into
/// the parts generated by Â₁, Â₂ (respectively Â†₁, Â†₂).
pub fn ladder_matrix_element(
    t: f64,
    left: &LandauIndex,
    right: &LandauIndex,
    field: &FieldConfig,
) -> Result<LadderElement> {
    if left.k_x != right.k_x || left.k_z != right.k_z {
        return Ok(LadderElement::Forbidden);
    }
    if right.n == left.n + 1 {
        let a = jl_spinor(left, field)?;
        let b = jl_spinor(right, field)?;
        let a0 = lowering_element(&a, &b);
        // M acts on the bra with eigenvalue λ = E_{n+1}; Ω on the ket.
        let lambda = NU * landau_energy(left.n + 1, left.k_z, field);
        let omega_left = f64::from(left.epsilon) * a.energy;
        let omega_right = f64::from(right.epsilon) * b.energy;
        let ratio = omega_right / lambda;
        let part1 = 0.5 * (1.0 + ratio) * a0 * Complex64::cis((omega_left - lambda) * t);
        let part2 = 0.5 * (1.0 - ratio) * a0 * Complex64::cis((omega_left + lambda) * t);
        Ok(LadderElement::Allowed { part1, part2 })
    } else if right.n + 1 == left.n {
        let a = jl_spinor(right, field)?;
        let b = jl_spinor(left, field)?;
        let a0 = lowering_element(&a, &b);
        // ⟨n'|Â†|n⟩ with n = right, n' = left; M acts on the ket |n⟩.
        let lambda = NU * landau_energy(right.n + 1, right.k_z, field);
        let omega_left = f64::from(left.epsilon) * b.energy;
        let omega_right = f64::from(right.epsilon) * a.energy;
        let ratio = omega_left / lambda;
        let part1 = 0.5 * (1.0 + ratio) * a0 * Complex64::cis((lambda - omega_right) * t);
        let part2 = 0.5 * (1.0 - ratio) * a0 * Complex64::cis((-lambda - omega_right) * t);
        Ok(LadderElement::Allowed { part1, part2 })
    } else {
        Ok(LadderElement::Forbidden)
    }
}

/// ⟨left| e^{iΩt} Â(0) e^{−iΩt} |right⟩ (or the Â† analogue), the Heisenberg
/// column of the equivalence table.
pub fn heisenberg_matrix_element(
    t: f64,
    left: &LandauIndex,
    right: &LandauIndex,
    field: &FieldConfig,
) -> Result<Complex64> {
    if left.k_x != right.k_x || left.k_z != right.k_z {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (lo, hi) = if right.n == left.n + 1 {
        (left, right)
    } else if right.n + 1 == left.n {
        (right, left)
    } else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let a = jl_spinor(lo, field)?;
    let b = jl_spinor(hi, field)?;
    let a0 = lowering_element(&a, &b);
    let el = f64::from(left.epsilon) * landau_energy(left.n, left.k_z, field);
    let er = f64::from(right.epsilon) * landau_energy(right.n, right.k_z, field);
    Ok(a0 * Complex64::cis((el - er) * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field_hw(hw: f64) -> FieldConfig {
        FieldConfig::from_magnetic_length(2f64.sqrt() / hw).unwrap()
    }

    #[test]
    fn energies() {
        let f = field_hw(1.0);
        assert_eq!(landau_energy(0, 0.0, &f), 1.0);
        assert_relative_eq!(landau_energy(1, 0.0, &f), 2f64.sqrt(), max_relative = 1e-15);
        let f = field_hw(0.7);
        assert_relative_eq!(
            landau_energy(3, 0.4, &f),
            1.621727474022685477424268,
            max_relative = 1e-15
        );
    }

    #[test]
    fn frequency_limits() {
        let weak = FieldConfig::from_kappa(1e-9).unwrap();
        for n in [0, 5, 40] {
            let (wc, wz) = mode_frequencies(n, 0.0, &weak);
            assert_relative_eq!(wc, weak.omega_cyclotron(), max_relative = 1e-6);
            assert_relative_eq!(wz, 2.0, max_relative = 1e-6);
        }
        let strong = field_hw(1e6);
        let w = strong.omega();
        for n in [1usize, 4, 30] {
            let (wc, wz) = mode_frequencies(n, 0.0, &strong);
            let (a, b) = (((n + 1) as f64).sqrt(), (n as f64).sqrt());
            assert_relative_eq!(wc, w * (a - b), max_relative = 1e-9);
            assert_relative_eq!(wz, w * (a + b), max_relative = 1e-9);
        }
    }

    #[test]
    fn ground_spinor() {
        let f = field_hw(1.0);
        let sp = jl_spinor(&LandauIndex::new(0, 0.0, 0.0, 1, -1).unwrap(), &f).unwrap();
        assert_eq!(sp.components.map(f64::abs), [0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            jl_spinor(&LandauIndex::new(0, 0.0, 0.0, -1, -1).unwrap(), &f),
            Err(Error::SingularSpinor)
        ));
        assert!(jl_spinor(&LandauIndex::new(0, 0.0, 0.1, 1, 1).unwrap(), &f).is_err());
        assert!(LandauIndex::new(0, 0.0, 0.0, 0, 1).is_err());
    }

    #[test]
    fn low_field_intraband_element() {
        let f = FieldConfig::from_kappa(1e-8).unwrap();
        let n = 3;
        let a = LandauIndex::new(n, 0.0, 0.0, 1, -1).unwrap();
        let b = LandauIndex::new(n + 1, 0.0, 0.0, 1, -1).unwrap();
        for t in [0.0, 1e3, 5e6] {
            let got = ladder_matrix_element(t, &a, &b, &f).unwrap().total();
            let want = ((n + 1) as f64).sqrt() * Complex64::cis(-f.omega_cyclotron() * t);
            assert!((got - want).norm() < 1e-6, "t = {t}: {got} vs {want}");
        }
    }

    #[test]
    fn low_field_interband_element() {
        let f = FieldConfig::from_kappa(1e-8).unwrap();
        let a = LandauIndex::new(2, 0.0, 0.0, 1, -1).unwrap();
        let b = LandauIndex::new(3, 0.0, 0.0, -1, -1).unwrap();
        let got = ladder_matrix_element(0.7, &a, &b, &f).unwrap().total();
        let amp = f.kappa().sqrt();
        assert_relative_eq!(got.norm(), amp, max_relative = 1e-6);
        let (_, wz) = mode_frequencies(2, 0.0, &f);
        let phase = Complex64::cis(wz * 0.7);
        assert!((got / got.norm() - phase).norm() < 1e-6 || (got / got.norm() + phase).norm() < 1e-6);
    }

    #[test]
    fn high_field_elements() {
        let f = field_hw(1e8);
        let w = f.omega();
        let n = 4;
        let (a, b) = (((n + 1) as f64).sqrt(), (n as f64).sqrt());
        let t = 0.3 / w;
        let lo = LandauIndex::new(n, 0.0, 0.0, 1, -1).unwrap();
        let hi_c = LandauIndex::new(n + 1, 0.0, 0.0, 1, -1).unwrap();
        let hi_z = LandauIndex::new(n + 1, 0.0, 0.0, -1, -1).unwrap();
        let c = ladder_matrix_element(t, &lo, &hi_c, &f).unwrap().total();
        assert!((c - 0.5 * (a + b) * Complex64::cis(w * (b - a) * t)).norm() < 1e-6);
        let z = ladder_matrix_element(t, &lo, &hi_z, &f).unwrap().total();
        assert!((z.norm() - 0.5 * (a - b)).abs() < 1e-6);
    }

    #[test]
    fn forbidden_is_distinct() {
        let f = field_hw(1.0);
        let a = LandauIndex::new(2, 0.0, 0.0, 1, -1).unwrap();
        let b = LandauIndex::new(4, 0.0, 0.0, 1, -1).unwrap();
        assert_eq!(ladder_matrix_element(0.0, &a, &b, &f).unwrap(), LadderElement::Forbidden);
        let c = LandauIndex::new(3, 0.1, 0.0, 1, -1).unwrap();
        assert_eq!(ladder_matrix_element(0.0, &a, &c, &f).unwrap(), LadderElement::Forbidden);
    }

    #[test]
    fn ladder_parts_follow_upper_band() {
        let f = field_hw(1.3);
        let a = LandauIndex::new(2, 0.0, 0.4, 1, 1).unwrap();
        let up = LandauIndex::new(3, 0.0, 0.4, 1, -1).unwrap();
        let down = LandauIndex::new(3, 0.0, 0.4, -1, 1).unwrap();
        match ladder_matrix_element(1.1, &a, &up, &f).unwrap() {
            LadderElement::Allowed { part2, .. } => assert!(part2.norm() < 1e-15),
            LadderElement::Forbidden => panic!(),
        }
        match ladder_matrix_element(1.1, &a, &down, &f).unwrap() {
            LadderElement::Allowed { part1, .. } => assert!(part1.norm() < 1e-15),
            LadderElement::Forbidden => panic!(),
        }
    }

    fn arb_index(n: usize, kz: f64) -> impl Strategy<Value = LandauIndex> {
        (prop_oneof![Just(1i8), Just(-1i8)], prop_oneof![Just(1i8), Just(-1i8)]).prop_map(
            move |(e, s)| {
                let s = if n == 0 { -1 } else { s };
                let e = if n == 0 && kz == 0.0 { 1 } else { e };
                LandauIndex::new(n, 0.2, kz, e, s).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn explicit_equals_heisenberg(
            (lo, hi, t, l, dagger) in (0usize..60, -2.0f64..2.0, 0.0f64..500.0, 0.2f64..30.0, any::<bool>())
                .prop_flat_map(|(n, kz, t, l, dagger)| {
                    (arb_index(n, kz), arb_index(n + 1, kz), Just(t), Just(l), Just(dagger))
                })
        ) {
            let f = FieldConfig::from_magnetic_length(l).unwrap();
            let (left, right) = if dagger { (hi, lo) } else { (lo, hi) };
            let explicit = ladder_matrix_element(t, &left, &right, &f).unwrap().total();
            let heis = heisenberg_matrix_element(t, &left, &right, &f).unwrap();
            let scale = heis.norm().max(1e-300);
            prop_assert!((explicit - heis).norm() <= 1e-12 * scale.max(1e-3),
                "explicit {explicit} vs heisenberg {heis}");
        }

        #[test]
        fn spinor_normalized(n in 1usize..400, kz in -3.0f64..3.0, l in 0.1f64..100.0,
                             e in prop_oneof![Just(1i8), Just(-1i8)], s in prop_oneof![Just(1i8), Just(-1i8)]) {
            let f = FieldConfig::from_magnetic_length(l).unwrap();
            let sp = jl_spinor(&LandauIndex::new(n, 0.0, kz, e, s).unwrap(), &f).unwrap();
            prop_assert!((sp.norm() - 1.0).abs() < 1e-12);
            let chi2 = 0.5 + f64::from(e) / (2.0 * sp.energy);
            prop_assert!((sp.chi * sp.chi - chi2).abs() < 1e-12);
            prop_assert!((sp.eta - f64::from(e) / (2.0 * sp.energy)).abs() < 1e-12);
        }

        #[test]
        fn energy_gap_identity(n in 0usize..400, kz in -5.0f64..5.0, l in 0.05f64..1e4) {
            let f = FieldConfig::from_magnetic_length(l).unwrap();
            let (e0, e1) = (landau_energy(n, kz, &f), landau_energy(n + 1, kz, &f));
            let w = f.omega();
            prop_assert!(((e1 * e1 - e0 * e0) - w * w).abs() <= 1e-12 * (e1 * e1));
            prop_assert!(e1 > e0);
            let (wc, wz) = mode_frequencies(n, kz, &f);
            prop_assert!(wz > wc && wc > 0.0);
            prop_assert!((wc - (e1 - e0)).abs() <= 1e-12 * e1);
        }
    }
}
