//! Gaussian initial states and their expansion in Landau levels.
//!
//! A packet f(r)·(a1, a2, 0, 0)ᵀ is projected onto the oscillator states
//! |n, k_x⟩; the overlaps F_n(k_x) and the coefficient matrix
//! U_{m,n} = ∫ F_m F_n dk_x carry all of the transverse packet shape into the
//! dynamics.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, gauss_hermite, log_factorial_ratio, psi_table, CompensatedSum, ScaledPair, N_CAP};
use crate::units::FieldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimensionality {
    #[serde(rename = "2+1")]
    TwoPlusOne,
    #[serde(rename = "3+1")]
    ThreePlusOne,
}

impl std::fmt::Display for Dimensionality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TwoPlusOne => "2+1",
            Self::ThreePlusOne => "3+1",
        })
    }
}

/// Ellipsoidal Gaussian packet times the spinor (a1, a2, 0, 0)ᵀ.
///
/// Widths and momenta are in natural units (λ_c and 1/λ_c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub d_x: f64,
    pub d_y: f64,
    pub d_z: f64,
    pub k0x: f64,
    pub k0z: f64,
    pub a1: Complex64,
    pub a2: Complex64,
    pub dimensionality: Dimensionality,
}

impl GaussianPacket {
    /// Second-component planar packet, the case most of the analysis uses.
    pub fn planar(d_x: f64, d_y: f64, k0x: f64) -> Result<Self> {
        let p = Self {
            d_x,
            d_y,
            d_z: 0.0,
            k0x,
            k0z: 0.0,
            a1: Complex64::new(0.0, 0.0),
            a2: Complex64::new(1.0, 0.0),
            dimensionality: Dimensionality::TwoPlusOne,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.d_x > 0.0 && self.d_x.is_finite() && self.d_y > 0.0 && self.d_y.is_finite()) {
            return bad(format!("packet widths must be positive: d_x = {}, d_y = {}", self.d_x, self.d_y));
        }
        match self.dimensionality {
            Dimensionality::ThreePlusOne => {
                if !(self.d_z > 0.0 && self.d_z.is_finite()) {
                    return bad(format!("3+1 packet needs d_z > 0, got {}", self.d_z));
                }
            }
            Dimensionality::TwoPlusOne => {
                if self.k0z != 0.0 {
                    return bad(format!("2+1 packet cannot carry k0z = {}", self.k0z));
                }
            }
        }
        let norm = self.a1.norm_sqr() + self.a2.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return bad(format!("spinor amplitudes must satisfy |a1|^2 + |a2|^2 = 1, got {norm:.15}"));
        }
        let k = self.k0x.hypot(self.k0z);
        if !(k < 1.0) {
            return bad(format!(
                "packet momentum |k0| = {k} must be below 1/lambda_c (group velocity below c)"
            ));
        }
        Ok(())
    }

    pub fn is_planar(&self) -> bool {
        self.dimensionality == Dimensionality::TwoPlusOne
    }

    /// Partial Fourier transform of the transverse profile.
    pub fn g_xy(&self, k_x: f64, y: f64) -> f64 {
        let dk = k_x - self.k0x;
        (self.d_x / (PI * self.d_y)).sqrt()
            * (-0.5 * self.d_x * self.d_x * dk * dk).exp()
            * (-0.5 * y * y / (self.d_y * self.d_y)).exp()
    }

    /// Longitudinal momentum amplitude; the planar model has none.
    pub fn g_z(&self, k_z: f64) -> Result<f64> {
        if self.is_planar() {
            return Err(Error::PlanarPacket("g_z"));
        }
        let dk = k_z - self.k0z;
        Ok((self.d_z * self.d_z / PI).powf(0.25) * (-0.5 * self.d_z * self.d_z * dk * dk).exp())
    }
}

/// D = L²/√(L² + d_y²).
fn width_d(p: &GaussianPacket, l: f64) -> f64 {
    l * l / (l * l + p.d_y * p.d_y).sqrt()
}

/// Fills `out[n] = F_n(k_x)` for n = 0..out.len().
///
/// Evaluated from the three-term recurrence in n of the Gaussian overlap
/// integral, which stays real and regular for every d_y including d_y = L.
pub fn f_table(packet: &GaussianPacket, field: &FieldConfig, k_x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let l = field.magnetic_length;
    let dy = packet.d_y;
    let s2 = l * l + dy * dy;
    let d = width_d(packet, l);
    let q = (l * l - dy * dy) / s2;
    let w = -k_x * l * l * l / s2;
    let dk = k_x - packet.k0x;
    let log_pref = 0.5 * (l * packet.d_x / (PI * dy)).ln() + 0.5 * (2.0 * PI).ln() + dy.ln()
        - 0.5 * s2.ln()
        - 0.25 * PI.ln();
    let log0 = log_pref - 0.5 * packet.d_x * packet.d_x * dk * dk - 0.5 * k_x * k_x * d * d;
    let mut st = ScaledPair::start(log0, 1.0);
    out[0] = st.value();
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * w * st.cur - q * (nf / (nf + 1.0)).sqrt() * st.prev;
        st.push(next);
        out[n + 1] = st.value();
    }
}

/// F_n(k_x) by quadrature of (1/√L) ∫ g_xy(k_x, y) ψ_n(y/L − k_x L) dy.
///
/// The Gaussian part of the integrand is absorbed into a shifted
/// Gauss–Hermite rule, so the result is exact once the rule order exceeds
/// `out.len() / 2`.
pub fn f_table_quadrature(
    packet: &GaussianPacket,
    field: &FieldConfig,
    k_x: f64,
    out: &mut [f64],
) -> Result<()> {
    if out.is_empty() {
        return Ok(());
    }
    let order = (out.len() / 2 + 16).clamp(32, numerics::GH_MAX_ORDER);
    let rule = gauss_hermite(order)?;
    let l = field.magnetic_length;
    let a = 1.0 / (packet.d_y * packet.d_y) + 1.0 / (l * l);
    let yc = k_x / a;
    let h = (2.0 / a).sqrt();
    let mut acc = vec![CompensatedSum::new(); out.len()];
    let mut psi = vec![0.0; out.len()];
    for (&v, &wh) in rule.nodes.iter().zip(&rule.scaled_weights) {
        let y = yc + h * v;
        let g = packet.g_xy(k_x, y);
        if g == 0.0 {
            continue;
        }
        psi_table(y / l - k_x * l, &mut psi);
        for (s, &p) in acc.iter_mut().zip(&psi) {
            s.add(wh * g * p);
        }
    }
    let scale = h / l.sqrt();
    for (o, s) in out.iter_mut().zip(&acc) {
        *o = scale * s.value();
    }
    Ok(())
}

/// Single F_n(k_x) through the recurrence.
pub fn f_n(packet: &GaussianPacket, field: &FieldConfig, n: usize, k_x: f64) -> Result<f64> {
    if n > N_CAP {
        return Err(Error::Capacity { level: n, cap: N_CAP });
    }
    let mut out = vec![0.0; n + 1];
    f_table(packet, field, k_x, &mut out);
    Ok(out[n])
}

/// F_n(k_x) transcribed from the Hermite-polynomial closed form with the
/// auxiliary parameter c = L³/√(L⁴ − d_y⁴) and A_n ∝ ((L²−d_y²)/(L²+d_y²))^{n/2}.
/// Uses raw Hermite polynomials, so it is only meant for n ≲ 60.
pub fn f_n_closed_form(packet: &GaussianPacket, field: &FieldConfig, n: usize, k_x: f64) -> Result<Complex64> {
    let l = field.magnetic_length;
    let dy = packet.d_y;
    if ((dy - l) / l).abs() < 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "closed form for F_n is singular at d_y = L (d_y = {dy}, L = {l}); use the recurrence or quadrature path"
        )));
    }
    let s2 = l * l + dy * dy;
    let d = width_d(packet, l);
    let c = Complex64::new(l.powi(4) - dy.powi(4), 0.0).sqrt().inv() * l.powi(3);
    let q_half = Complex64::new((l * l - dy * dy) / s2, 0.0).sqrt();
    let a_n = (2.0 * PI).sqrt() * dy / s2.sqrt() * q_half.powu(n as u32);
    let c_n = (-(log_factorial_ratio(n, 0)) - 0.25 * PI.ln()).exp();
    let dk = k_x - packet.k0x;
    let pref = (l * packet.d_x / (PI * dy)).sqrt() * c_n;
    let gauss = (-0.5 * packet.d_x * packet.d_x * dk * dk - 0.5 * k_x * k_x * d * d).exp();
    Ok(a_n * pref * gauss * hermite_complex(n, -c * k_x))
}

fn hermite_complex(n: usize, z: Complex64) -> Complex64 {
    let mut prev = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Tunables for [`coefficient_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientOptions {
    /// Highest level kept before automatic truncation.
    pub n_max: usize,
    /// Largest acceptable missing probability 1 − Σ U_{n,n}.
    pub tail_tolerance: f64,
    /// Drop levels beyond the point where the running tail falls below this.
    pub truncate_below: f64,
    /// Evaluate F_n by quadrature instead of the recurrence.
    pub quadrature_path: bool,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        Self { n_max: 400, tail_tolerance: 1e-10, truncate_below: 1e-12, quadrature_path: false }
    }
}

/// U_{m,n} with the k_x nodes and F_n samples it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub n_max: usize,
    pub n_max_requested: usize,
    /// Row-major (n_max+1)², real and symmetric for this packet family.
    u: Vec<f64>,
    pub k_nodes: Vec<f64>,
    /// Weights such that ∫ h(k) dk ≈ Σ wᵢ h(kᵢ) for h ∝ F_m F_n.
    pub k_weights: Vec<f64>,
    /// F_n(k_i) for n ≤ n_max, one row per node.
    pub f_nodes: Vec<Vec<f64>>,
    pub tail_mass: f64,
    pub quadrature_order: usize,
    pub magnetic_length: f64,
    pub k0x: f64,
}

impl CoefficientSet {
    #[inline]
    pub fn u(&self, m: usize, n: usize) -> f64 {
        self.u[m * (self.n_max + 1) + n]
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Σ U_{n,n}.
    pub fn norm_sum(&self) -> f64 {
        (0..=self.n_max).map(|n| self.u(n, n)).collect::<CompensatedSum>().value()
    }

    /// Σ √(n+1) U_{n+1,n}.
    pub fn ladder_sum(&self) -> f64 {
        (0..self.n_max)
            .map(|n| ((n + 1) as f64).sqrt() * self.u(n + 1, n))
            .collect::<CompensatedSum>()
            .value()
    }

    /// (Σ U_{n,n} − 1, Σ √(n+1) U_{n+1,n} + k0x L/√2).
    pub fn sum_rule_residuals(&self) -> (f64, f64) {
        (self.norm_sum() - 1.0, self.ladder_sum() + self.k0x * self.magnetic_length / SQRT_2)
    }

    /// Largest |U_{m,n} − U_{n,m}|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for m in 0..=self.n_max {
            for n in 0..m {
                worst = worst.max((self.u(m, n) - self.u(n, m)).abs());
            }
        }
        worst
    }

    /// Copy truncated to levels 0..=n.
    fn truncated(mut self, n: usize) -> Self {
        if n >= self.n_max {
            return self;
        }
        let old = self.n_max + 1;
        let new = n + 1;
        let mut u = Vec::with_capacity(new * new);
        for m in 0..new {
            u.extend_from_slice(&self.u[m * old..m * old + new]);
        }
        self.u = u;
        for row in &mut self.f_nodes {
            row.truncate(new);
        }
        self.n_max = n;
        self
    }
}

/// Builds U_{m,n} by Gauss–Hermite quadrature over k_x.
///
/// F_m F_n is a polynomial of degree m+n times a Gaussian centred at
/// μ = d_x² k0x / s² with s² = d_x² + D², so a rule of order n_max+1 mapped
/// onto that Gaussian integrates every entry exactly.
pub fn coefficient_matrix(
    packet: &GaussianPacket,
    field: &FieldConfig,
    opts: &CoefficientOptions,
) -> Result<CoefficientSet> {
    packet.validate()?;
    let n_req = opts.n_max;
    if n_req > N_CAP {
        return Err(Error::Capacity { level: n_req, cap: N_CAP });
    }
    let l = field.magnetic_length;
    let d = width_d(packet, l);
    let s = (packet.d_x * packet.d_x + d * d).sqrt();
    let mu = packet.d_x * packet.d_x * packet.k0x / (s * s);
    let order = (n_req + 8).clamp(64, numerics::GH_MAX_ORDER);
    let rule = gauss_hermite(order)?;
    let k_nodes: Vec<f64> = rule.nodes.iter().map(|u| mu + u / s).collect();
    let k_weights: Vec<f64> = rule.scaled_weights.iter().map(|w| w / s).collect();
    let dim = n_req + 1;
    let f_nodes: Vec<Vec<f64>> = k_nodes
        .par_iter()
        .map(|&k| {
            let mut row = vec![0.0; dim];
            if opts.quadrature_path {
                f_table_quadrature(packet, field, k, &mut row).map(|_| row)
            } else {
                f_table(packet, field, k, &mut row);
                Ok(row)
            }
        })
        .collect::<Result<_>>()?;

    let g = DMatrix::from_fn(k_nodes.len(), dim, |i, n| k_weights[i].sqrt() * f_nodes[i][n]);
    let gram = g.transpose() * &g;
    let mut u = Vec::with_capacity(dim * dim);
    for m in 0..dim {
        for n in 0..dim {
            // Average the two triangles so the stored matrix is exactly symmetric.
            u.push(0.5 * (gram[(m, n)] + gram[(n, m)]));
        }
    }
    let set = CoefficientSet {
        n_max: n_req,
        n_max_requested: n_req,
        u,
        k_nodes,
        k_weights,
        f_nodes,
        tail_mass: 0.0,
        quadrature_order: order,
        magnetic_length: l,
        k0x: packet.k0x,
    };

    let mut running = CompensatedSum::new();
    running.add(1.0);
    let mut cut = n_req;
    let mut found = false;
    for n in 0..=n_req {
        running.add(-set.u(n, n));
        if !found && running.value() < opts.truncate_below {
            cut = n;
            found = true;
        }
    }
    let full_tail = running.value();
    if full_tail > opts.tail_tolerance {
        return Err(Error::Truncation { tail: full_tail, tolerance: opts.tail_tolerance, n_max: n_req });
    }
    // Keep one extra level so the ladder terms U_{n+1,n} at the cut survive.
    let cut = (cut + 1).min(n_req);
    let mut set = set.truncated(cut);
    set.tail_mass = (1.0 - set.norm_sum()).max(0.0);
    Ok(set)
}

/// Closed form of U_{m,n} for d_y = L:
/// 2√π d_x/(C_m C_n L) (L/2P)^{m+n+1} e^{−d_x²k0²L²/2P²} (−1)^{m+n} h_{m+n}(d_x²k0/P),
/// with P = √(d_x² + L²/2) and h_N the Hermite polynomials of imaginary
/// argument (h_{N+1} = 2x h_N + 2N h_{N−1}), evaluated in logarithms.
pub fn u_equal_widths(packet: &GaussianPacket, field: &FieldConfig, m: usize, n: usize) -> f64 {
    let l = field.magnetic_length;
    let dx = packet.d_x;
    let p = (dx * dx + 0.5 * l * l).sqrt();
    let x = dx * dx * packet.k0x / p;
    let big_n = m + n;
    // h_N(x) in scaled form.
    let mut st = ScaledPair::start(0.0, 1.0);
    for k in 0..big_n {
        let next = 2.0 * x * st.cur + 2.0 * k as f64 * st.prev;
        st.push(next);
    }
    if st.cur == 0.0 {
        return 0.0;
    }
    let ln_h = st.cur.abs().ln() + st.log_scale;
    let ln_cm = 0.5 * (m as f64 * std::f64::consts::LN_2 + numerics::ln_factorial(m) + 0.5 * PI.ln());
    let ln_cn = 0.5 * (n as f64 * std::f64::consts::LN_2 + numerics::ln_factorial(n) + 0.5 * PI.ln());
    let ln_mag = std::f64::consts::LN_2 + 0.5 * PI.ln() + dx.ln() - l.ln() - ln_cm - ln_cn
        + (big_n as f64 + 1.0) * (l / (2.0 * p)).ln()
        - dx * dx * packet.k0x * packet.k0x * l * l / (2.0 * p * p)
        + ln_h;
    let sign = st.cur.signum() * if big_n % 2 == 0 { 1.0 } else { -1.0 };
    sign * ln_mag.exp()
}

/// Closed form of U_{m,n} as a finite binomial sum in Hermite polynomials,
/// evaluated in complex arithmetic. The alternating sum cancels badly, so
/// this is a cross-check for small m, n only.
pub fn u_binomial_sum(packet: &GaussianPacket, field: &FieldConfig, m: usize, n: usize) -> Result<Complex64> {
    let l = field.magnetic_length;
    let dy = packet.d_y;
    let dx = packet.d_x;
    if ((dy - l) / l).abs() < 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "binomial closed form is singular at d_y = L (d_y = {dy}, L = {l})"
        )));
    }
    let s2 = l * l + dy * dy;
    let d = width_d(packet, l);
    let c = Complex64::new(l.powi(4) - dy.powi(4), 0.0).sqrt().inv() * l.powi(3);
    let q_half = Complex64::new((l * l - dy * dy) / s2, 0.0).sqrt();
    let a = |k: usize| (2.0 * PI).sqrt() * dy / s2.sqrt() * q_half.powu(k as u32);
    let big_q = 1.0 / (dx * dx + d * d).sqrt();
    let w = dx * d * big_q * packet.k0x;
    let y = dx * dx * packet.k0x * big_q;
    let ln_c = |k: usize| 0.5 * (k as f64 * std::f64::consts::LN_2 + numerics::ln_factorial(k) + 0.5 * PI.ln());
    // F_n is real, so the A-factors enter without conjugation even when
    // d_y > L makes them imaginary.
    let pref = a(m) * a(n) * l * big_q * dx * PI.sqrt() * (-w * w).exp()
        / (PI * dy)
        * (-(ln_c(m) + ln_c(n))).exp();
    let cq = c * big_q;
    let root = (Complex64::new(1.0, 0.0) - cq * cq).sqrt();
    let arg = -cq * y / root;
    let mut acc = Complex64::new(0.0, 0.0);
    for lidx in 0..=m.min(n) {
        let ln_coef = lidx as f64 * std::f64::consts::LN_2 + numerics::ln_factorial(lidx) + ln_binom(m, lidx)
            + ln_binom(n, lidx);
        let k = m + n - 2 * lidx;
        acc += ln_coef.exp() * root.powu(k as u32) * hermite_complex(k, arg);
    }
    Ok(pref * acc)
}

fn ln_binom(n: usize, k: usize) -> f64 {
    numerics::ln_factorial(n) - numerics::ln_factorial(k) - numerics::ln_factorial(n - k)
}
