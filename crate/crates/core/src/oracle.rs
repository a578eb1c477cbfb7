//! Brute-force reference: the Dirac Hamiltonian as a dense matrix in the
//! product basis |σ⟩ ⊗ |m⟩ (four spinor components times oscillator levels
//! 0..levels), diagonalized numerically and evolved exactly. It shares no
//! code with the analytic series beyond the packet's F_n samples.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::dynamics::{KzRule, LineSum};
use crate::error::{Error, Result};
use crate::landau::{jl_spinor, LandauIndex};
use crate::numerics::gauss_hermite;
use crate::packet::{CoefficientSet, GaussianPacket};
use crate::units::FieldConfig;

/// Extra oscillator levels kept above the packet truncation by default.
pub const DEFAULT_GUARD: usize = 20;

const LEAKAGE_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    pub guard: usize,
    /// Oscillator levels in the dense basis; defaults to truncation + 1 + guard.
    pub levels: Option<usize>,
    /// Fixed k_z rule for 3+1 packets (Gauss–Hermite order).
    pub kz_order: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { guard: DEFAULT_GUARD, levels: None, kz_order: 64 }
    }
}

impl OracleOptions {
    /// k_z rule to hand to the analytic side for a like-for-like comparison.
    pub fn shared_kz_rule(&self) -> KzRule {
        KzRule::GaussHermite { order: self.kz_order }
    }
}

/// H = α·π + β at fixed k_z, real symmetric of size 4·levels.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    pub levels: usize,
    pub k_z: f64,
    matrix: DMatrix<f64>,
}

impl DenseHamiltonian {
    pub fn new(field: &FieldConfig, k_z: f64, levels: usize) -> Self {
        let dim = 4 * levels;
        let om = field.omega();
        let mut h = DMatrix::zeros(dim, dim);
        let set = |h: &mut DMatrix<f64>, a: usize, b: usize, v: f64| {
            h[(a, b)] = v;
            h[(b, a)] = v;
        };
        for m in 0..levels {
            for sigma in 0..4 {
                let i = Self::index(sigma, m);
                h[(i, i)] = if sigma < 2 { 1.0 } else { -1.0 };
            }
            set(&mut h, Self::index(0, m), Self::index(2, m), k_z);
            set(&mut h, Self::index(1, m), Self::index(3, m), -k_z);
            if m + 1 < levels {
                let r = ((m + 1) as f64).sqrt();
                set(&mut h, Self::index(0, m), Self::index(3, m + 1), -om * r);
                set(&mut h, Self::index(2, m), Self::index(1, m + 1), -om * r);
            }
        }
        Self { levels, k_z, matrix: h }
    }

    /// Basis position of |σ⟩ ⊗ |m⟩.
    #[inline]
    pub fn index(sigma: usize, m: usize) -> usize {
        4 * m + sigma
    }

    pub fn dim(&self) -> usize {
        4 * self.levels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.matrix.clone())
    }

    /// Sorted eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Lowering operator a acting on the level index.
    pub fn lowering(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        for m in 0..self.levels.saturating_sub(1) {
            for sigma in 0..4 {
                a[(Self::index(sigma, m), Self::index(sigma, m + 1))] = ((m + 1) as f64).sqrt();
            }
        }
        a
    }

    /// B = |0⟩⟨3| + |2⟩⟨1| so that α_x = B + B† and α_y = −i(B − B†).
    pub fn alpha_half(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim(), self.dim());
        for m in 0..self.levels {
            b[(Self::index(0, m), Self::index(3, m))] = 1.0;
            b[(Self::index(2, m), Self::index(1, m))] = 1.0;
        }
        b
    }
}

fn resolve_levels(coeffs: &CoefficientSet, opts: &OracleOptions) -> Result<usize> {
    let needed = coeffs.n_max + 1 + opts.guard;
    match opts.levels {
        None => Ok(needed),
        Some(l) if l >= needed => Ok(l),
        Some(l) => Err(Error::GuardBand { truncation: coeffs.n_max, n_max: l.saturating_sub(1), guard: opts.guard }),
    }
}

/// Oracle averages on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSeries {
    pub times: Vec<f64>,
    /// ⟨X̂(t)⟩ in λ_c.
    pub x: Vec<f64>,
    /// ⟨Ŷ(t)⟩ − ⟨Ŷ(0)⟩ in λ_c.
    pub y: Vec<f64>,
    /// ⟨α_x(t)⟩, ⟨α_y(t)⟩ in c.
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    /// ⟨â(t)⟩.
    pub a: Vec<Complex64>,
    /// Contribution of the a1/a2 coherences of the initial state to ⟨â(t)⟩.
    pub a_cross: Vec<Complex64>,
    /// ⟨Ŷ(0)⟩ before the shift.
    pub y0: f64,
    /// Largest population found above the packet truncation at the final time.
    pub leakage: f64,
    pub levels: usize,
}

struct Slice {
    a: LineSum,
    a_cross: LineSum,
    b: LineSum,
    leakage: f64,
}

/// Σ_{jk} ρ̃_{jk} Õ_{kj} e^{i(λ_k − λ_j)t}, keeping products above a relative floor.
fn pair_lines(rho: &DMatrix<Complex64>, op: &DMatrix<f64>, lambda: &[f64], weight: f64, out: &mut LineSum) {
    let d = lambda.len();
    let mut amps = Vec::with_capacity(d * d);
    let mut peak = 0.0_f64;
    for j in 0..d {
        for k in 0..d {
            let v = rho[(j, k)] * op[(k, j)];
            peak = peak.max(v.norm());
            amps.push(v);
        }
    }
    let floor = 1e-15 * peak;
    for j in 0..d {
        for k in 0..d {
            let v = amps[j * d + k];
            if v.norm() > floor {
                out.push_raw(lambda[k] - lambda[j], weight * v);
            }
        }
    }
}

fn evolve_slice(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    k_z: f64,
    weight: f64,
    levels: usize,
    t_final: f64,
) -> Slice {
    let ham = DenseHamiltonian::new(field, k_z, levels);
    let eig = ham.eigen();
    let v = &eig.eigenvectors;
    let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let dim = ham.dim();

    // Columns √wᵢ F(kᵢ) placed on spinor components 0 and 1.
    let kn = coeffs.k_nodes.len();
    let fill = |sigma: usize| {
        let mut g = DMatrix::<f64>::zeros(dim, kn);
        for (i, row) in coeffs.f_nodes.iter().enumerate() {
            let sw = coeffs.k_weights[i].sqrt();
            for (m, f) in row.iter().enumerate().take(levels) {
                g[(DenseHamiltonian::index(sigma, m), i)] = sw * f;
            }
        }
        v.transpose() * g
    };
    let r0 = fill(0);
    let r1 = fill(1);
    let (a1, a2) = (packet.a1, packet.a2);
    let gram = |x: &DMatrix<f64>, y: &DMatrix<f64>| x * y.transpose();
    let g00 = gram(&r0, &r0);
    let g11 = gram(&r1, &r1);
    let g01 = gram(&r0, &r1);
    let c01 = a1 * a2.conj();
    let cross = DMatrix::from_fn(dim, dim, |j, k| c01 * g01[(j, k)] + c01.conj() * g01[(k, j)]);
    let rho = DMatrix::from_fn(dim, dim, |j, k| {
        Complex64::from(a1.norm_sqr() * g00[(j, k)] + a2.norm_sqr() * g11[(j, k)]) + cross[(j, k)]
    });

    let a_t = v.transpose() * ham.lowering() * v;
    let b_t = v.transpose() * ham.alpha_half() * v;
    let mut slice = Slice { a: LineSum::default(), a_cross: LineSum::default(), b: LineSum::default(), leakage: 0.0 };
    pair_lines(&rho, &a_t, &lambda, weight, &mut slice.a);
    pair_lines(&cross, &a_t, &lambda, weight, &mut slice.a_cross);
    pair_lines(&rho, &b_t, &lambda, weight, &mut slice.b);

    // Populations above the truncation at t_final: diag of V e^{−iΛt} ρ̃ e^{iΛt} Vᵀ.
    let phases: Vec<Complex64> = lambda.iter().map(|l| Complex64::cis(-l * t_final)).collect();
    let vt = DMatrix::from_fn(dim, dim, |b, j| v[(b, j)] * phases[j]);
    let first = DenseHamiltonian::index(0, coeffs.n_max + 1);
    let mut leaked = 0.0;
    for b in first..dim {
        let row = vt.row(b);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..dim {
            if row[j] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut inner = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                inner += rho[(j, k)] * row[k].conj();
            }
            acc += row[j] * inner;
        }
        leaked += acc.re;
    }
    slice.leakage = weight * leaked.max(0.0);
    slice
}

/// Evolves the packet under the dense Hamiltonian and returns ⟨X̂⟩, ⟨Ŷ⟩, ⟨α_x⟩, ⟨α_y⟩.
pub fn evolve_expectations(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &OracleOptions,
) -> Result<OracleSeries> {
    packet.validate()?;
    let levels = resolve_levels(coeffs, opts)?;
    let t_final = times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let nodes: Vec<(f64, f64)> = if packet.is_planar() {
        vec![(0.0, 1.0)]
    } else {
        let rule = gauss_hermite(opts.kz_order)?;
        let norm = PI.sqrt().recip();
        rule.nodes.iter().zip(&rule.weights).map(|(&u, &w)| (packet.k0z + u / packet.d_z, w * norm)).collect()
    };
    let slices: Vec<Slice> = nodes
        .par_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|&(kz, w)| evolve_slice(packet, coeffs, field, kz, w, levels, t_final))
        .collect();
    let mut a = LineSum::default();
    let mut a_cross = LineSum::default();
    let mut b = LineSum::default();
    let mut leakage = 0.0;
    for s in slices {
        a.extend(s.a);
        a_cross.extend(s.a_cross);
        b.extend(s.b);
        leakage += s.leakage;
    }
    if leakage > LEAKAGE_LIMIT {
        return Err(Error::Leakage { leaked: leakage, level: coeffs.n_max });
    }
    let scale = SQRT_2 * field.magnetic_length;
    let av: Vec<Complex64> = a.eval(times).into_iter().map(|(v, _)| v).collect();
    let a0 = a.eval(&[0.0])[0].0;
    let cv: Vec<Complex64> = a_cross.eval(times).into_iter().map(|(v, _)| v).collect();
    let bv: Vec<Complex64> = b.eval(times).into_iter().map(|(v, _)| v).collect();
    Ok(OracleSeries {
        times: times.to_vec(),
        x: av.iter().map(|z| scale * z.im).collect(),
        y: av.iter().map(|z| scale * (z.re - a0.re)).collect(),
        vx: bv.iter().map(|z| 2.0 * z.re).collect(),
        vy: bv.iter().map(|z| 2.0 * z.im).collect(),
        a: av,
        a_cross: cv,
        y0: scale * a0.re,
        leakage,
        levels,
    })
}

/// max |a − o| / max |o| over a channel.
pub fn relative_deviation(analytic: &[f64], oracle: &[f64]) -> f64 {
    let scale = oracle.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = analytic.iter().zip(oracle).fold(0.0_f64, |m, (a, o)| m.max((a - o).abs()));
    if scale == 0.0 { diff } else { diff / scale }
}

/// Per-channel agreement between an analytic trajectory and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Cross-term channel, present when both spinor amplitudes are nonzero in 3+1.
    pub mixing: Option<f64>,
}

impl Comparison {
    pub fn worst(&self) -> f64 {
        [self.x, self.y, self.vx, self.vy, self.mixing.unwrap_or(0.0)].into_iter().fold(0.0, f64::max)
    }
}

/// Runs both paths on the same k_z rule and compares every channel.
pub fn compare(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &OracleOptions,
) -> Result<(Comparison, crate::dynamics::Trajectory, OracleSeries)> {
    use crate::dynamics::{mixing_terms, trajectory, DynamicsOptions};
    let dyn_opts = DynamicsOptions { kz_rule: opts.shared_kz_rule() };
    let traj = trajectory(packet, coeffs, field, times, &dyn_opts)?;
    let series = evolve_expectations(packet, coeffs, field, times, opts)?;
    let mixing = if !packet.is_planar() && packet.a1.norm() > 0.0 && packet.a2.norm() > 0.0 {
        let m = mixing_terms(packet, coeffs, field, times, &dyn_opts)?;
        let scale = series.a_cross.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let diff = m.a_21.iter().zip(&series.a_cross).fold(0.0_f64, |acc, (a, o)| acc.max((a - o).norm()));
        Some(if scale == 0.0 { diff } else { diff / scale })
    } else {
        None
    };
    let cmp = Comparison {
        x: relative_deviation(&traj.x, &series.x),
        y: relative_deviation(&traj.y, &series.y),
        vx: relative_deviation(&traj.vx, &series.vx),
        vy: relative_deviation(&traj.vy, &series.vy),
        mixing,
    };
    Ok((cmp, traj, series))
}

/// How well an analytic Johnson–Lippman spinor sits inside the dense spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinorCheck {
    /// ‖H v − εE v‖.
    pub residual: f64,
    /// 1 − ‖P v‖², P the projector on dense eigenvectors with eigenvalue εE.
    pub projection_deficit: f64,
    /// |λ_dense − εE| for the closest dense eigenvalue.
    pub energy_error: f64,
}

pub fn spinor_check(idx: &LandauIndex, field: &FieldConfig, levels: usize) -> Result<SpinorCheck> {
    if idx.n + 1 >= levels {
        return Err(Error::GuardBand { truncation: idx.n, n_max: levels.saturating_sub(1), guard: 1 });
    }
    let w = jl_spinor(idx, field)?;
    let ham = DenseHamiltonian::new(field, idx.k_z, levels);
    let dim = ham.dim();
    let mut v = nalgebra::DVector::<f64>::zeros(dim);
    for sigma in 0..4 {
        if let Some(m) = w.level(sigma) {
            v[DenseHamiltonian::index(sigma, m)] = w.components[sigma];
        }
    }
    let target = f64::from(idx.epsilon) * w.energy;
    let residual = (ham.matrix() * &v - &v * target).norm();
    let eig = ham.eigen();
    let mut energy_error = f64::INFINITY;
    let mut captured = 0.0;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        energy_error = energy_error.min((l - target).abs());
        if (l - target).abs() < 1e-9 {
            captured += eig.eigenvectors.column(j).dot(&v).powi(2);
        }
    }
    Ok(SpinorCheck { residual, projection_deficit: (1.0 - captured).abs(), energy_error })
}
