//! Analytic time evolution of packet averages.
//!
//! ⟨Â(t)⟩ is assembled as a finite sum of exponentials Σ αⱼ e^{iωⱼt}: per
//! Landau level, the ε,ε' band combinations give two intraband lines at
//! ±ω_n^c and two interband lines at ±ω_n^Z. In 3+1 every line is further
//! spread over the k_z nodes of a quadrature against |g_z(k_z)|². Positions
//! follow from ⟨Ŷ⟩ = √2 L Re⟨Â⟩ and ⟨X̂⟩ = √2 L Im⟨Â⟩, velocities from the
//! exact time derivative of the same sum.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau::landau_energy;
use crate::numerics::{gauss_hermite, CompensatedComplex, QuadratureRule};
use crate::packet::{CoefficientSet, Dimensionality, GaussianPacket};
use crate::units::FieldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    Intraband,
    Interband,
}

/// k_z integration rule for the 3+1 model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KzRule {
    /// Fixed Gauss–Hermite rule mapped onto |g_z|².
    GaussHermite { order: usize },
    /// Composite Clenshaw–Curtis panels on |u| ≤ half_width (u = d_z(k_z − k0z)),
    /// sized from the largest phase swing and doubled until the result
    /// changes by less than `rel_tol`.
    Adaptive { rel_tol: f64, half_width: f64, max_panels: usize },
}

impl Default for KzRule {
    fn default() -> Self {
        Self::Adaptive { rel_tol: 1e-9, half_width: 6.0, max_panels: 1 << 17 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsOptions {
    pub kz_rule: KzRule,
}

/// Which band combinations enter a sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    All,
    Interband,
    Mixing,
}

/// Σ αⱼ e^{iωⱼt} with its exact derivative.
///
/// Each frequency is stored as an exact base plus a small offset so that
/// phases stay accurate at times where ω·t is far beyond 2π.
#[derive(Debug, Clone, Default)]
pub(crate) struct LineSum {
    groups: Vec<LineGroup>,
}

#[derive(Debug, Clone)]
struct LineGroup {
    base: f64,
    offset: Vec<f64>,
    amp: Vec<Complex64>,
}

const CHUNK: usize = 256;

impl LineGroup {
    /// (Σ α e^{iδt}, Σ iδ α e^{iδt}) accumulated into `val`/`der`.
    fn accumulate(&self, times: &[f64], val: &mut [CompensatedComplex], der: &mut [CompensatedComplex]) {
        if is_uniform(times) {
            let dt = times[1] - times[0];
            for (&w, &a) in self.offset.iter().zip(&self.amp) {
                let iw = Complex64::new(0.0, w);
                let step = Complex64::cis(w * dt);
                let mut p = a * Complex64::cis(w * times[0]);
                // Re-anchor periodically so the recurrence error stays bounded.
                for (k, &t) in times.iter().enumerate() {
                    if k % CHUNK == 0 && k > 0 {
                        p = a * Complex64::cis(w * t);
                    }
                    val[k].add(p);
                    der[k].add(iw * p);
                    p *= step;
                }
            }
        } else {
            for (k, &t) in times.iter().enumerate() {
                for (&w, &a) in self.offset.iter().zip(&self.amp) {
                    let p = a * Complex64::cis(w * t);
                    val[k].add(p);
                    der[k].add(Complex64::new(0.0, w) * p);
                }
            }
        }
    }
}

impl LineSum {
    fn push(&mut self, omega: f64, amp: Complex64) {
        self.push_split(0.0, omega, amp);
    }

    /// Adds α e^{i(base + offset)t}; `base` should be exactly representable.
    fn push_split(&mut self, base: f64, offset: f64, amp: Complex64) {
        if amp == Complex64::new(0.0, 0.0) {
            return;
        }
        let g = match self.groups.iter().position(|g| g.base == base) {
            Some(i) => &mut self.groups[i],
            None => {
                self.groups.push(LineGroup { base, offset: Vec::new(), amp: Vec::new() });
                self.groups.last_mut().expect("just pushed")
            }
        };
        g.offset.push(offset);
        g.amp.push(amp);
    }

    /// Adds α e^{±i(2 + excess)t}, the E_n + E_{n'} lines.
    fn push_zb(&mut self, sign: f64, excess: f64, amp: Complex64) {
        self.push_split(2.0 * sign, sign * excess, amp);
    }

    /// (ω, α) pairs with ω = base + offset.
    fn lines(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.groups
            .iter()
            .flat_map(|g| g.offset.iter().zip(&g.amp).map(move |(&w, &a)| (g.base + w, a)))
    }

    pub(crate) fn extend(&mut self, other: LineSum) {
        for g in other.groups {
            for (w, a) in g.offset.into_iter().zip(g.amp) {
                self.push_split(g.base, w, a);
            }
        }
    }

    /// Serial evaluation, added onto running sums.
    fn accumulate(&self, times: &[f64], val: &mut [CompensatedComplex], der: &mut [CompensatedComplex]) {
        let n = times.len();
        for g in &self.groups {
            let mut gv = vec![CompensatedComplex::new(); n];
            let mut gd = vec![CompensatedComplex::new(); n];
            g.accumulate(times, &mut gv, &mut gd);
            for k in 0..n {
                let (v, d) = (gv[k].value(), gd[k].value());
                if g.base == 0.0 {
                    val[k].add(v);
                    der[k].add(d);
                } else {
                    let rot = Complex64::cis(g.base * times[k]);
                    val[k].add(rot * v);
                    der[k].add(rot * (d + Complex64::new(0.0, g.base) * v));
                }
            }
        }
    }

    /// (Σ α e^{iωt}, Σ iω α e^{iωt}) at every time.
    pub(crate) fn eval(&self, times: &[f64]) -> Vec<(Complex64, Complex64)> {
        times
            .par_chunks(CHUNK)
            .flat_map_iter(|chunk| {
                let mut val = vec![CompensatedComplex::new(); chunk.len()];
                let mut der = vec![CompensatedComplex::new(); chunk.len()];
                self.accumulate(chunk, &mut val, &mut der);
                val.into_iter().zip(der).map(|(v, d)| (v.value(), d.value())).collect::<Vec<_>>()
            })
            .collect()
    }

    pub(crate) fn push_raw(&mut self, omega: f64, amp: Complex64) {
        self.push(omega, amp);
    }
}

fn is_uniform(times: &[f64]) -> bool {
    if times.len() < 3 {
        return false;
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return false;
    }
    let scale = times[times.len() - 1].abs().max(dt);
    times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * scale)
}

/// Adds the lines of one k_z slice, scaled by `weight`, to `out`.
///
/// The four ε,ε' coefficients of each kernel are written in factored form so
/// that the small interband amplitudes (∝ ω²) never come from a difference of
/// O(1) numbers.
fn push_slice(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    kz: f64,
    weight: f64,
    channel: Channel,
    out: &mut LineSum,
) {
    let w2 = field.omega() * field.omega();
    let n_max = coeffs.n_max;
    let p2 = packet.a2.norm_sqr();
    let p1 = packet.a1.norm_sqr();
    let energies: Vec<f64> = (0..=n_max + 2).map(|n| landau_energy(n, kz, field)).collect();
    let below = |n: usize| (w2 * n as f64 + kz * kz) / (energies[n] + 1.0); // E_n − 1
    let with_intra = channel == Channel::All;
    let with_inter = matches!(channel, Channel::All | Channel::Interband);

    if channel != Channel::Mixing {
        for n in 0..n_max {
            let c = ((n + 1) as f64).sqrt() * coeffs.u(n, n + 1) * weight;
            if c == 0.0 {
                continue;
            }
            if p2 > 0.0 {
                let (e0, e1) = (energies[n], energies[n + 1]);
                let wz = e0 + e1;
                let wc = w2 / wz;
                let q = 0.25 * c * p2 / (e0 * e1);
                if with_intra {
                    out.push(-wc, Complex64::from(q * (e0 + 1.0) * wz));
                    out.push(wc, Complex64::from(q * below(n) * wz));
                }
                if with_inter {
                    let ex = below(n) + below(n + 1);
                    out.push_zb(1.0, ex, Complex64::from(q * wc * (e0 + 1.0)));
                    out.push_zb(-1.0, ex, Complex64::from(q * wc * below(n)));
                }
            }
            if p1 > 0.0 {
                let (e0, e1) = (energies[n + 1], energies[n + 2]);
                let wz = e0 + e1;
                let wc = w2 / wz;
                let q = 0.25 * c * p1 / (e0 * e1);
                if with_intra {
                    out.push(-wc, Complex64::from(q * (e1 + 1.0) * wz));
                    out.push(wc, Complex64::from(q * below(n + 2) * wz));
                }
                if with_inter {
                    let ex = below(n + 1) + below(n + 2);
                    out.push_zb(1.0, ex, Complex64::from(-q * wc * below(n + 2)));
                    out.push_zb(-1.0, ex, Complex64::from(-q * wc * (e1 + 1.0)));
                }
            }
        }
    }

    let mix = packet.a2.conj() * packet.a1;
    if kz != 0.0 && mix != Complex64::new(0.0, 0.0) && matches!(channel, Channel::All | Channel::Mixing | Channel::Interband) {
        let om = field.omega();
        for n in 0..=n_max {
            let (e0, e1) = (energies[n], energies[n + 1]);
            let wz = e0 + e1;
            let wc = w2 / wz;
            let q = mix * (0.25 * kz * om * coeffs.u(n, n) * weight / (e0 * e1));
            if channel != Channel::Interband {
                out.push(-wc, q);
                out.push(wc, q);
            }
            let ex = below(n) + below(n + 1);
            out.push_zb(1.0, ex, -q);
            out.push_zb(-1.0, ex, -q);
        }
    }
}

/// E_n(k_z) − 1 without cancellation.
fn excess(n: usize, kz: f64, field: &FieldConfig) -> f64 {
    let w = field.omega();
    (w * w * n as f64 + kz * kz) / (landau_energy(n, kz, field) + 1.0)
}

/// k_z nodes and weights (∫|g_z|² h dk_z ≈ Σ wᵢ h(k_zᵢ)).
fn kz_nodes_gh(packet: &GaussianPacket, order: usize) -> Result<Vec<(f64, f64)>> {
    let rule = gauss_hermite(order)?;
    let norm = PI.sqrt().recip();
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &w)| (packet.k0z + u / packet.d_z, w * norm))
        .collect())
}

fn kz_nodes_composite(packet: &GaussianPacket, half_width: f64, panels: usize) -> Vec<(f64, f64)> {
    let rule = QuadratureRule::clenshaw_curtis(-half_width, half_width, panels, 16);
    let norm = PI.sqrt().recip();
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &w)| (packet.k0z + u / packet.d_z, w * (-u * u).exp() * norm))
        .collect()
}

/// Total phase swing of the fastest line over the k_z window at time `t_max`.
fn phase_swing(packet: &GaussianPacket, field: &FieldConfig, half_width: f64, t_max: f64) -> f64 {
    let lo = packet.k0z - half_width / packet.d_z;
    let hi = packet.k0z + half_width / packet.d_z;
    let mid = 0.0f64.clamp(lo, hi);
    let wz = |kz: f64| landau_energy(0, kz, field) + landau_energy(1, kz, field);
    t_max.abs() * ((wz(lo) - wz(mid)) + (wz(hi) - wz(mid)))
}

/// Report on the k_z quadrature used for a 3+1 evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KzReport {
    pub nodes: usize,
    /// Relative change against the doubled rule (adaptive rules only).
    pub achieved: Option<f64>,
}

fn build_sum(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    nodes: &[(f64, f64)],
    channel: Channel,
) -> LineSum {
    let mut all = LineSum::default();
    for &(kz, w) in nodes {
        push_slice(packet, coeffs, field, kz, w, channel, &mut all);
    }
    all
}

/// Nodes per streamed block of the k_z sum.
const NODE_BLOCK: usize = 64;
/// Independent partial sums; fixed so that results do not depend on the thread count.
const NODE_GROUPS: usize = 16;

/// Sums the k_z slices block by block without holding every line at once.
/// Partial sums are reduced in a fixed order.
fn sum_nodes(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    nodes: &[(f64, f64)],
    times: &[f64],
    channel: Channel,
) -> Vec<(Complex64, Complex64)> {
    if nodes.len() <= NODE_BLOCK {
        return build_sum(packet, coeffs, field, nodes, channel).eval(times);
    }
    let blocks = nodes.len().div_ceil(NODE_BLOCK);
    let groups = NODE_GROUPS.min(blocks);
    let per_group = blocks.div_ceil(groups) * NODE_BLOCK;
    let partial: Vec<(Vec<CompensatedComplex>, Vec<CompensatedComplex>)> = nodes
        .par_chunks(per_group)
        .map(|group| {
            let mut val = vec![CompensatedComplex::new(); times.len()];
            let mut der = vec![CompensatedComplex::new(); times.len()];
            for block in group.chunks(NODE_BLOCK) {
                build_sum(packet, coeffs, field, block, channel).accumulate(times, &mut val, &mut der);
            }
            (val, der)
        })
        .collect();
    (0..times.len())
        .map(|k| {
            let mut v = CompensatedComplex::new();
            let mut d = CompensatedComplex::new();
            for (pv, pd) in &partial {
                v.add(pv[k].value());
                d.add(pd[k].value());
            }
            (v.value(), d.value())
        })
        .collect()
}

/// ⟨Â(t)⟩ restricted to `channel`, with its time derivative.
fn evaluate(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    channel: Channel,
    opts: &DynamicsOptions,
) -> Result<(Vec<(Complex64, Complex64)>, Option<KzReport>)> {
    packet.validate()?;
    if packet.is_planar() {
        let sum = build_sum(packet, coeffs, field, &[(0.0, 1.0)], channel);
        return Ok((sum.eval(times), None));
    }
    match opts.kz_rule {
        KzRule::GaussHermite { order } => {
            let nodes = kz_nodes_gh(packet, order)?;
            let out = sum_nodes(packet, coeffs, field, &nodes, times, channel);
            Ok((out, Some(KzReport { nodes: nodes.len(), achieved: None })))
        }
        KzRule::Adaptive { rel_tol, half_width, max_panels } => {
            let t_max = times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
            let swing = phase_swing(packet, field, half_width, t_max);
            let mut panels = initial_panels(swing);
            let probe = probe_times(times);
            let probe_is_all = probe.len() == times.len();
            let mut achieved = f64::INFINITY;
            let mut coarse_nodes = kz_nodes_composite(packet, half_width, panels);
            let mut coarse = sum_nodes(packet, coeffs, field, &coarse_nodes, &probe, channel);
            while 2 * panels <= max_panels {
                let fine_nodes = kz_nodes_composite(packet, half_width, 2 * panels);
                let fine = sum_nodes(packet, coeffs, field, &fine_nodes, &probe, channel);
                let scale = fine.iter().fold(0.0_f64, |m, (v, d)| m.max(v.norm()).max(d.norm()));
                let diff = coarse
                    .iter()
                    .zip(&fine)
                    .fold(0.0_f64, |m, ((va, da), (vb, db))| m.max((va - vb).norm()).max((da - db).norm()));
                achieved = if scale > 0.0 { diff / scale } else { 0.0 };
                // The difference bounds the coarse rule's error, so the coarse rule is returned.
                if achieved <= rel_tol {
                    let report = KzReport { nodes: coarse_nodes.len(), achieved: Some(achieved) };
                    let out = if probe_is_all { coarse } else { sum_nodes(packet, coeffs, field, &coarse_nodes, times, channel) };
                    return Ok((out, Some(report)));
                }
                coarse = fine;
                coarse_nodes = fine_nodes;
                panels *= 2;
            }
            Err(Error::Quadrature { achieved, required: rel_tol })
        }
    }
}

/// One panel per π of phase swing, with a floor.
fn initial_panels(swing: f64) -> usize {
    ((swing / PI).ceil() as usize + 4).max(8)
}

/// Up to 64 representative samples, always including the latest time.
fn probe_times(times: &[f64]) -> Vec<f64> {
    const MAX: usize = 64;
    if times.len() <= MAX {
        return times.to_vec();
    }
    let mut out: Vec<f64> = (0..MAX).map(|i| times[i * (times.len() - 1) / (MAX - 1)]).collect();
    out.dedup();
    out
}

/// Sampled packet averages, guiding-centre relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Units of t_c.
    pub times: Vec<f64>,
    /// Units of λ_c.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Units of c.
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub model: Dimensionality,
    /// y₀ = k0x L², the guiding-centre offset not included in `y`.
    pub guiding_center: f64,
    /// ⟨Ŷ(0)⟩ = −k0x L² as the operator average at t = 0.
    pub operator_y0: f64,
    /// Constant removed so that y(0) = 0; vanishes when the sum rules hold.
    pub y_offset_subtracted: f64,
    pub kz_report: Option<KzReport>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.vx.iter().zip(&self.vy).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }
}

fn assemble(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &DynamicsOptions,
) -> Result<Trajectory> {
    let l = field.magnetic_length;
    let scale = SQRT_2 * l;
    let (vals, report) = evaluate(packet, coeffs, field, times, Channel::All, opts)?;
    let (at0, _) = evaluate(packet, coeffs, field, &[0.0], Channel::All, opts)?;
    let y0_series = scale * at0[0].0.re;
    let guiding = packet.k0x * l * l;
    // y = ⟨Ŷ(t)⟩ + k0x L², shifted by the residual so that y(0) = 0 exactly.
    let offset = y0_series + guiding;
    let mut traj = Trajectory {
        times: times.to_vec(),
        x: Vec::with_capacity(times.len()),
        y: Vec::with_capacity(times.len()),
        vx: Vec::with_capacity(times.len()),
        vy: Vec::with_capacity(times.len()),
        model: packet.dimensionality,
        guiding_center: guiding,
        operator_y0: -guiding,
        y_offset_subtracted: offset,
        kz_report: report,
    };
    for (v, d) in vals {
        traj.y.push(scale * v.re + guiding - offset);
        traj.x.push(scale * v.im);
        traj.vy.push(scale * d.re);
        traj.vx.push(scale * d.im);
    }
    Ok(traj)
}

/// Planar-model trajectory.
pub fn trajectory_2p1(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
) -> Result<Trajectory> {
    if !packet.is_planar() {
        return Err(Error::InvalidParameter("trajectory_2p1 needs a 2+1 packet".into()));
    }
    assemble(packet, coeffs, field, times, &DynamicsOptions::default())
}

/// Full 3+1 trajectory with the k_z integrals done by `opts.kz_rule`.
pub fn trajectory_3p1(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &DynamicsOptions,
) -> Result<Trajectory> {
    if packet.is_planar() {
        return Err(Error::InvalidParameter("trajectory_3p1 needs a 3+1 packet".into()));
    }
    assemble(packet, coeffs, field, times, opts)
}

/// Dispatches on the packet dimensionality.
pub fn trajectory(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &DynamicsOptions,
) -> Result<Trajectory> {
    assemble(packet, coeffs, field, times, opts)
}

/// (v_x, v_y) series in units of c.
pub fn velocities(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &DynamicsOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = assemble(packet, coeffs, field, times, opts)?;
    Ok((t.vx, t.vy))
}

/// Interband part of √2 L ⟨Â(t)⟩: Re gives the ZB part of y, Im of x.
pub fn interband_signal(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &DynamicsOptions,
) -> Result<(Vec<Complex64>, Option<KzReport>)> {
    let (vals, report) = evaluate(packet, coeffs, field, times, Channel::Interband, opts)?;
    let s = SQRT_2 * field.magnetic_length;
    Ok((vals.into_iter().map(|(v, _)| s * v).collect(), report))
}

/// Mixing integrals summed over levels: Σ U_{n,n} J^±(t) and the resulting
/// cross term ⟨Â(t)⟩^{2,1} = ½ a2* a1 Σ U_{n,n}(J⁺ + J⁻).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSeries {
    pub times: Vec<f64>,
    pub j_plus: Vec<f64>,
    pub j_minus: Vec<f64>,
    pub a_21: Vec<Complex64>,
}

/// J^± = ±∫ (k_z ω / E_n E_{n+1}) |g_z|² cos[(E_{n+1} ∓ E_n)t] dk_z, weighted by U_{n,n}.
pub fn mixing_terms(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
    opts: &DynamicsOptions,
) -> Result<MixingSeries> {
    packet.validate()?;
    let mix = packet.a2.conj() * packet.a1;
    if packet.is_planar() {
        let zeros = vec![0.0; times.len()];
        return Ok(MixingSeries {
            times: times.to_vec(),
            j_plus: zeros.clone(),
            j_minus: zeros,
            a_21: vec![Complex64::new(0.0, 0.0); times.len()],
        });
    }
    let nodes = match opts.kz_rule {
        KzRule::GaussHermite { order } => kz_nodes_gh(packet, order)?,
        KzRule::Adaptive { half_width, .. } => {
            let t_max = times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
            let panels = initial_panels(phase_swing(packet, field, half_width, t_max)) * 2;
            kz_nodes_composite(packet, half_width, panels)
        }
    };
    // J^+ oscillates at E_{n+1} − E_n, J^- at E_{n+1} + E_n.
    let om = field.omega();
    let w2 = om * om;
    let mut plus = LineSum::default();
    let mut minus = LineSum::default();
    for &(kz, w) in &nodes {
        for n in 0..=coeffs.n_max {
            let (e0, e1) = (landau_energy(n, kz, field), landau_energy(n + 1, kz, field));
            let wz = e0 + e1;
            let wc = w2 / wz;
            let a = 0.5 * kz * om * coeffs.u(n, n) * w / (e0 * e1);
            plus.push(wc, Complex64::from(a));
            plus.push(-wc, Complex64::from(a));
            let ex = excess(n, kz, field) + excess(n + 1, kz, field);
            minus.push_zb(1.0, ex, Complex64::from(-a));
            minus.push_zb(-1.0, ex, Complex64::from(-a));
        }
    }
    let jp: Vec<f64> = plus.eval(times).into_iter().map(|(v, _)| v.re).collect();
    let jm: Vec<f64> = minus.eval(times).into_iter().map(|(v, _)| v.re).collect();
    let a_21 = jp.iter().zip(&jm).map(|(p, m)| 0.5 * mix * (p + m)).collect();
    Ok(MixingSeries { times: times.to_vec(), j_plus: jp, j_minus: jm, a_21 })
}

/// T^{s1 s2}_{s3 s4} = s1 + s2/E_n + s3/E_{n+1} + s4 E_n/E_{n+1}.
pub fn t_factor(s: [i8; 4], e_n: f64, e_n1: f64) -> f64 {
    f64::from(s[0]) + f64::from(s[1]) / e_n + f64::from(s[2]) / e_n1 + f64::from(s[3]) * e_n / e_n1
}

/// The four sub-packet averages of a planar second-component packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPacketSeries {
    pub times: Vec<f64>,
    pub a1: Vec<Complex64>,
    pub a2: Vec<Complex64>,
    pub a1_dag: Vec<Complex64>,
    pub a2_dag: Vec<Complex64>,
    /// Per level: [T^{++}_{++}, T^{+-}_{+-}, T^{+-}_{-+}, T^{++}_{--}].
    pub t_table: Vec<[f64; 4]>,
}

impl SubPacketSeries {
    /// (L/√2)(⟨Â₁⟩ + ⟨Â₂⟩ + ⟨Â†₁⟩ + ⟨Â†₂⟩), i.e. ⟨Ŷ(t)⟩.
    pub fn recombined_y(&self, magnetic_length: f64) -> Vec<f64> {
        let s = magnetic_length / SQRT_2;
        (0..self.times.len())
            .map(|i| s * (self.a1[i] + self.a2[i] + self.a1_dag[i] + self.a2_dag[i]).re)
            .collect()
    }
}

/// ⟨Â₁⟩ = ¼ Σ 𝒰_n [T^{++}_{++} e^{−iω_n^c t} + T^{+−}_{+−} e^{−iω_n^Z t}],
/// ⟨Â₂⟩ = ¼ Σ 𝒰_n [T^{+−}_{−+} e^{iω_n^c t} + T^{++}_{−−} e^{iω_n^Z t}],
/// with 𝒰_n = √(n+1) U_{n,n+1}; the Â† parts are their conjugates with U_{n+1,n}.
pub fn subpackets(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
    times: &[f64],
) -> Result<SubPacketSeries> {
    packet.validate()?;
    if !packet.is_planar() || packet.a1.norm_sqr() != 0.0 {
        return Err(Error::InvalidParameter(
            "sub-packet decomposition needs a 2+1 packet with only the second component".into(),
        ));
    }
    let mut s1 = LineSum::default();
    let mut s2 = LineSum::default();
    let mut s1d = LineSum::default();
    let mut s2d = LineSum::default();
    let mut table = Vec::with_capacity(coeffs.n_max);
    let w2 = field.omega() * field.omega();
    for n in 0..coeffs.n_max {
        let (e0, e1) = (landau_energy(n, 0.0, field), landau_energy(n + 1, 0.0, field));
        let wz = e0 + e1;
        let wc = w2 / wz;
        let t = [
            t_factor([1, 1, 1, 1], e0, e1),
            t_factor([1, -1, 1, -1], e0, e1),
            t_factor([1, -1, -1, 1], e0, e1),
            t_factor([1, 1, -1, -1], e0, e1),
        ];
        table.push(t);
        let cu = 0.25 * ((n + 1) as f64).sqrt() * coeffs.u(n, n + 1);
        let cud = 0.25 * ((n + 1) as f64).sqrt() * coeffs.u(n + 1, n);
        s1.push(-wc, Complex64::from(cu * t[0]));
        let ex = excess(n, 0.0, field) + excess(n + 1, 0.0, field);
        s1.push_zb(-1.0, ex, Complex64::from(cu * t[1]));
        s2.push(wc, Complex64::from(cu * t[2]));
        s2.push_zb(1.0, ex, Complex64::from(cu * t[3]));
        s1d.push(wc, Complex64::from(cud * t[0]));
        s1d.push_zb(1.0, ex, Complex64::from(cud * t[1]));
        s2d.push(-wc, Complex64::from(cud * t[2]));
        s2d.push_zb(-1.0, ex, Complex64::from(cud * t[3]));
    }
    let ev = |s: &LineSum| s.eval(times).into_iter().map(|(v, _)| v).collect::<Vec<_>>();
    Ok(SubPacketSeries {
        times: times.to_vec(),
        a1: ev(&s1),
        a2: ev(&s2),
        a1_dag: ev(&s1d),
        a2_dag: ev(&s2d),
        t_table: table,
    })
}

/// Net number of turns of a complex curve around the origin (positive = counter-clockwise).
pub fn winding_number(curve: &[Complex64]) -> f64 {
    let mut total = 0.0;
    for w in curve.windows(2) {
        total += (w[1] / w[0]).arg();
    }
    total / (2.0 * PI)
}

/// One cos/sin component of a planar trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub n: usize,
    pub kind: LineKind,
    /// Angular frequency in units of mc²/ħ.
    pub frequency: f64,
    /// Coefficient of sin(ωt) in x, units of λ_c.
    pub amplitude_x: f64,
    /// Coefficient of cos(ωt) in y, units of λ_c.
    pub amplitude_y: f64,
}

/// Line list of a planar trajectory: y(t) = Σ A_y (cos ωt − 1), x(t) = Σ A_x sin ωt.
pub fn spectral_decomposition(
    packet: &GaussianPacket,
    coeffs: &CoefficientSet,
    field: &FieldConfig,
) -> Result<Vec<SpectralLine>> {
    packet.validate()?;
    if !packet.is_planar() {
        return Err(Error::InvalidParameter("spectral decomposition is defined for the 2+1 model".into()));
    }
    let l = field.magnetic_length;
    let w2 = field.omega() * field.omega();
    let mut sum = LineSum::default();
    push_slice(packet, coeffs, field, 0.0, 1.0, Channel::All, &mut sum);
    // Identify each line by matching its |ω| to a level and kind.
    let mut freqs: BTreeMap<(usize, LineKind), (f64, Complex64, Complex64)> = BTreeMap::new();
    for n in 0..=coeffs.n_max + 1 {
        let (e0, e1) = (landau_energy(n, 0.0, field), landau_energy(n + 1, 0.0, field));
        let wz = e0 + e1;
        freqs.insert((n, LineKind::Intraband), (w2 / wz, Complex64::default(), Complex64::default()));
        freqs.insert((n, LineKind::Interband), (wz, Complex64::default(), Complex64::default()));
    }
    for (w, a) in sum.lines() {
        let key = freqs
            .iter()
            .filter(|(_, (f, _, _))| ((f - w.abs()) / f).abs() < 1e-12)
            .map(|(k, _)| *k)
            .next()
            .expect("every line frequency belongs to a level");
        let e = freqs.get_mut(&key).expect("key exists");
        if w > 0.0 {
            e.1 += a;
        } else {
            e.2 += a;
        }
    }
    let s = SQRT_2 * l;
    Ok(freqs
        .into_iter()
        .map(|((n, kind), (frequency, plus, minus))| SpectralLine {
            n,
            kind,
            frequency,
            amplitude_y: s * (plus + minus).re,
            amplitude_x: s * (plus - minus).re,
        })
        .filter(|line| line.amplitude_x.abs().max(line.amplitude_y.abs()) >= 1e-12 * l)
        .collect())
}

/// Evaluates a line list at time t as (x, y).
pub fn reconstruct(lines: &[SpectralLine], t: f64) -> (f64, f64) {
    let mut x = CompensatedComplex::new();
    for line in lines {
        let (s, c) = (line.frequency * t).sin_cos();
        x.add(Complex64::new(line.amplitude_x * s, line.amplitude_y * (c - 1.0)));
    }
    let v = x.value();
    (v.re, v.im)
}

/// Non-relativistic estimates for a weak field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowFieldSummary {
    /// k0x L² = m v0x / eB, units of λ_c.
    pub cyclotron_radius: f64,
    /// ω_c in units of mc²/ħ.
    pub omega_c: f64,
    /// ½ λ_c (k0x λ_c), units of λ_c.
    pub zb_amplitude: f64,
    /// d_z of the packet (0 for planar packets, meaning no decay).
    pub d_z: f64,
    pub kappa: f64,
    pub within_validity: bool,
}

impl LowFieldSummary {
    /// Relative ZB envelope [d_z⁴ / (d_z⁴ + t²)]^{1/4}; 1 for planar packets.
    pub fn envelope(&self, t: f64) -> f64 {
        if self.d_z == 0.0 {
            return 1.0;
        }
        let d4 = self.d_z.powi(4);
        (d4 / (d4 + t * t)).powf(0.25)
    }

    /// Time at which the envelope model has dropped to one half.
    pub fn envelope_halflife(&self) -> f64 {
        if self.d_z == 0.0 {
            f64::INFINITY
        } else {
            self.d_z * self.d_z * 15f64.sqrt()
        }
    }

    pub fn warning(&self) -> Option<Error> {
        (!self.within_validity).then_some(Error::OutsideLowField { kappa: self.kappa })
    }
}

pub fn lowfield_summary(packet: &GaussianPacket, field: &FieldConfig) -> LowFieldSummary {
    let l = field.magnetic_length;
    let kappa = field.kappa();
    LowFieldSummary {
        cyclotron_radius: packet.k0x * l * l,
        omega_c: field.omega_cyclotron(),
        zb_amplitude: 0.5 * packet.k0x,
        d_z: if packet.is_planar() { 0.0 } else { packet.d_z },
        kappa,
        within_validity: kappa < 1e-2,
    }
}

/// Largest |v| over samples with t in [t0, t1].
pub fn window_envelope(times: &[f64], values: &[f64], t0: f64, t1: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
}

/// Least-squares fit of y = A t^p on log-log axes; returns (A, p).
pub fn fit_power_law(t: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x / n, sy + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let p = sxy / sxx;
    ((my - p * mx).exp(), p)
}

/// Mean angular frequency of a complex signal from the slope of its unwrapped phase.
pub fn carrier_frequency(times: &[f64], signal: &[Complex64]) -> f64 {
    let mut phase = Vec::with_capacity(signal.len());
    let mut acc = signal[0].arg();
    phase.push(acc);
    for w in signal.windows(2) {
        acc += (w[1] / w[0]).arg();
        phase.push(acc);
    }
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let mp = phase.iter().sum::<f64>() / n;
    let (num, den) = times
        .iter()
        .zip(&phase)
        .fold((0.0, 0.0), |(a, b), (t, p)| (a + (t - mt) * (p - mp), b + (t - mt) * (t - mt)));
    num / den
}

/// Interior local maxima of an envelope whose prominence (height above the
/// higher of the two neighbouring minima) is at least `depth` times the peak.
pub fn revival_peaks(envelope: &[f64], depth: f64) -> Vec<usize> {
    let n = envelope.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let v = envelope[i];
        if !(v > envelope[i - 1] && v >= envelope[i + 1]) {
            continue;
        }
        let mut left = v;
        let mut j = i;
        while j > 0 && envelope[j - 1] <= v {
            j -= 1;
            left = left.min(envelope[j]);
        }
        let left_bounded = j > 0;
        let mut right = v;
        let mut k = i;
        while k + 1 < n && envelope[k + 1] <= v {
            k += 1;
            right = right.min(envelope[k]);
        }
        let right_bounded = k + 1 < n;
        let base = match (left_bounded, right_bounded) {
            (true, true) => left.max(right),
            (true, false) => left,
            (false, true) => right,
            (false, false) => left.min(right),
        };
        if v - base >= depth * v {
            peaks.push(i);
        }
    }
    peaks
}

/// Uniform grid of `samples` points on [t0, t1].
pub fn time_grid(t0: f64, t1: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..samples).map(|i| t0 + (t1 - t0) * i as f64 / (samples - 1) as f64).collect(),
    }
}

/// Number of samples giving `per_period` points per shortest ZB period.
pub fn default_samples(coeffs: &CoefficientSet, field: &FieldConfig, t0: f64, t1: f64, per_period: usize) -> usize {
    let wz = landau_energy(coeffs.n_max, 0.0, field) + landau_energy(coeffs.n_max + 1, 0.0, field);
    let period = 2.0 * PI / wz;
    (((t1 - t0) / period) * per_period as f64).ceil() as usize + 1
}
