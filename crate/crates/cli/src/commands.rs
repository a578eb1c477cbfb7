use std::io::Write;
use std::path::Path;

use serde::Serialize;
use zitter::dynamics::{
    default_samples, lowfield_summary, spectral_decomposition, time_grid, trajectory, LowFieldSummary, Trajectory,
};
use zitter::ionmap::{excitation_schedule, invert_kappa, simulated_units, ExcitationSchedule, TrapParams};
use zitter::oracle::{compare, Comparison};
use zitter::packet::{coefficient_matrix, CoefficientSet, Dimensionality};

use crate::config::{Format, Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{Header, OutputRecord, UnitDeclaration};

/// Samples per period of the fastest line when the config gives no count.
const SAMPLES_PER_PERIOD: usize = 2000;

fn header(cfg: &RunConfig, r: &Resolved, set: &CoefficientSet, command: &str, traj: Option<&Trajectory>) -> Header {
    let (norm, ladder) = set.sum_rule_residuals();
    Header {
        program: "zitter".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        figure: cfg.figure.clone(),
        model: r.packet.dimensionality,
        units: UnitDeclaration::natural(),
        si_scales: r.units,
        kappa: r.field.kappa(),
        magnetic_length: r.field.magnetic_length,
        omega: r.field.omega(),
        packet: r.packet,
        n_max: set.n_max,
        tail_mass: set.tail_mass,
        sum_rule_residuals: [norm.abs(), ladder.abs()],
        guiding_center: r.packet.k0x * r.field.magnetic_length * r.field.magnetic_length,
        kz: traj.and_then(|t| t.kz_report),
    }
}

fn times(cfg: &RunConfig, set: &CoefficientSet, r: &Resolved) -> Result<Vec<f64>, CliError> {
    let t = &cfg.time;
    if !(t.t_end > t.t_start && t.t_start.is_finite() && t.t_end.is_finite()) {
        return Err(CliError::Config(format!(
            "time.t_end must exceed time.t_start, got [{}, {}]",
            t.t_start, t.t_end
        )));
    }
    let n = t
        .samples
        .unwrap_or_else(|| default_samples(set, &r.field, t.t_start, t.t_end, SAMPLES_PER_PERIOD));
    if n < 2 {
        return Err(CliError::Config(format!("time.samples must be at least 2, got {n}")));
    }
    Ok(time_grid(t.t_start, t.t_end, n))
}

fn coefficients(cfg: &RunConfig, r: &Resolved) -> Result<CoefficientSet, CliError> {
    Ok(coefficient_matrix(&r.packet, &r.field, &cfg.coefficient_options())?)
}

pub fn trajectory_record(cfg: &RunConfig) -> Result<OutputRecord, CliError> {
    let r = cfg.resolve()?;
    let set = coefficients(cfg, &r)?;
    let t = times(cfg, &set, &r)?;
    let traj = trajectory(&r.packet, &set, &r.field, &t, &cfg.dynamics_options())?;
    let mut columns = vec!["t", "x", "y"];
    if cfg.output.include_velocities {
        columns.extend(["vx", "vy"]);
    }
    let si = if cfg.output.include_si {
        let units = r.units.ok_or_else(|| {
            CliError::Config("output.include_si needs units = \"physical\" or \"trap\"".into())
        })?;
        columns.extend(["t_s", "x_m", "y_m"]);
        if cfg.output.include_velocities {
            columns.extend(["vx_m_per_s", "vy_m_per_s"]);
        }
        Some(units)
    } else {
        None
    };
    let rows = (0..traj.len())
        .map(|i| {
            let mut row = vec![traj.times[i], traj.x[i], traj.y[i]];
            if cfg.output.include_velocities {
                row.extend([traj.vx[i], traj.vy[i]]);
            }
            if let Some(u) = si {
                row.extend([u.time_to_si(traj.times[i]), u.length_to_si(traj.x[i]), u.length_to_si(traj.y[i])]);
                if cfg.output.include_velocities {
                    row.extend([traj.vx[i] * u.speed(), traj.vy[i] * u.speed()]);
                }
            }
            row
        })
        .collect();
    let spectrum = if cfg.output.include_spectrum {
        Some(spectral_decomposition(&r.packet, &set, &r.field)?)
    } else {
        None
    };
    Ok(OutputRecord {
        header: header(cfg, &r, &set, "trajectory", Some(&traj)),
        columns: columns.into_iter().map(String::from).collect(),
        rows,
        spectrum,
    })
}

pub fn cmd_trajectory(cfg: &RunConfig, output: Option<&Path>, format: Format) -> Result<(), CliError> {
    let record = trajectory_record(cfg)?;
    for p in record.save(output, format)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_spectrum(cfg: &RunConfig, output: Option<&Path>, format: Format) -> Result<(), CliError> {
    let r = cfg.resolve()?;
    let set = coefficients(cfg, &r)?;
    let lines = spectral_decomposition(&r.packet, &set, &r.field)?;
    let record = OutputRecord {
        header: header(cfg, &r, &set, "spectrum", None),
        columns: Vec::new(),
        rows: Vec::new(),
        spectrum: Some(lines),
    };
    match format {
        Format::Json => emit(output, &(record.to_json()? + "\n")),
        Format::Csv => {
            let mut buf = Vec::new();
            record.write_comments(&mut buf)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for line in record.spectrum.as_deref().unwrap_or_default() {
                w.serialize(line).map_err(|e| CliError::Io(e.to_string()))?;
            }
            buf.extend(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?);
            emit(output, &String::from_utf8_lossy(&buf))
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            eprintln!("wrote {}", p.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(output: Option<&Path>, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    emit(output, &(text + "\n"))
}

#[derive(Debug, Serialize)]
pub struct SumRuleReport {
    pub n_max: usize,
    pub n_max_requested: usize,
    pub norm_residual: f64,
    pub ladder_residual: f64,
    pub tail_mass: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn cmd_sumrules(cfg: &RunConfig, output: Option<&Path>, format: Format) -> Result<(), CliError> {
    let r = cfg.resolve()?;
    let tol = cfg.numerics.tolerances.sum_rule;
    let set = match coefficients(cfg, &r) {
        Ok(s) => s,
        Err(CliError::Tolerance(m)) => {
            return Err(CliError::Tolerance(format!("{m}; sum rules not evaluated")));
        }
        Err(e) => return Err(e),
    };
    let (norm, ladder) = set.sum_rule_residuals();
    let report = SumRuleReport {
        n_max: set.n_max,
        n_max_requested: set.n_max_requested,
        norm_residual: norm.abs(),
        ladder_residual: ladder.abs(),
        tail_mass: set.tail_mass,
        tolerance: tol,
        pass: norm.abs() <= tol && ladder.abs() <= tol,
    };
    match format {
        Format::Json => emit_json(output, &report)?,
        Format::Csv => emit(
            output,
            &format!(
                "# sum rules, kappa = {}, L = {}\nquantity,value\nn_max,{}\nn_max_requested,{}\nnorm_residual,{:e}\nladder_residual,{:e}\ntail_mass,{:e}\ntolerance,{:e}\n",
                r.field.kappa(),
                r.field.magnetic_length,
                report.n_max,
                report.n_max_requested,
                report.norm_residual,
                report.ladder_residual,
                report.tail_mass,
                report.tolerance
            ),
        )?,
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!(
            "sum-rule residuals {:e}, {:e} exceed {tol:e} (tail mass {:e})",
            report.norm_residual, report.ladder_residual, report.tail_mass
        )))
    }
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    pub t_end: f64,
    pub deviation: Comparison,
    pub worst: f64,
    pub tolerance: f64,
    pub oracle_levels: usize,
    pub leakage: f64,
    pub pass: bool,
}

pub fn cmd_oracle_check(cfg: &RunConfig, output: Option<&Path>, format: Format) -> Result<(), CliError> {
    let r = cfg.resolve()?;
    let set = coefficients(cfg, &r)?;
    let t = times(cfg, &set, &r)?;
    let (cmp, _, series) = compare(&r.packet, &set, &r.field, &t, &cfg.oracle_options())?;
    let tol = cfg.numerics.tolerances.oracle;
    let worst = cmp.worst();
    let report = OracleReport {
        samples: t.len(),
        t_end: t[t.len() - 1],
        deviation: cmp,
        worst,
        tolerance: tol,
        oracle_levels: series.levels,
        leakage: series.leakage,
        pass: worst <= tol,
    };
    match format {
        Format::Json => emit_json(output, &report)?,
        Format::Csv => {
            let c = &report.deviation;
            let mut text = format!(
                "# oracle check, {} samples to t = {}, {} oscillator levels, leakage {:e}\nchannel,max_relative_deviation\nx,{:e}\ny,{:e}\nvx,{:e}\nvy,{:e}\n",
                report.samples, report.t_end, report.oracle_levels, report.leakage, c.x, c.y, c.vx, c.vy
            );
            if let Some(m) = c.mixing {
                text.push_str(&format!("mixing,{m:e}\n"));
            }
            emit(output, &text)?;
        }
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("analytic and dense paths differ by {worst:e} (limit {tol:e})")))
    }
}

#[derive(Debug, Serialize)]
pub struct IonMapDocument {
    pub trap: TrapParams,
    pub kappa: f64,
    /// L in simulated λ_c and in metres.
    pub magnetic_length: f64,
    pub magnetic_length_m: f64,
    pub delta_m: f64,
    pub c_eff_m_per_s: f64,
    pub compton_length_m: f64,
    pub compton_time_s: f64,
    pub omega_cyclotron_per_s: f64,
    pub warnings: Vec<String>,
    pub laser_pairs: u32,
    pub schedule: ExcitationSchedule,
}

pub fn ion_map_document(trap: &TrapParams, model: Dimensionality) -> Result<IonMapDocument, CliError> {
    let sys = simulated_units(trap)?;
    let schedule = excitation_schedule(model);
    Ok(IonMapDocument {
        trap: *trap,
        kappa: sys.kappa,
        magnetic_length: sys.field.magnetic_length,
        magnetic_length_m: sys.magnetic_length_si(),
        delta_m: sys.delta,
        c_eff_m_per_s: sys.c_eff,
        compton_length_m: sys.units.compton_length,
        compton_time_s: sys.units.compton_time,
        omega_cyclotron_per_s: sys.omega_cyclotron_si(),
        warnings: sys.warnings.iter().map(ToString::to_string).collect(),
        laser_pairs: schedule.laser_pairs(),
        schedule,
    })
}

pub fn cmd_ion_map(
    cfg: Option<&RunConfig>,
    model: Option<Dimensionality>,
    target_kappa: Option<f64>,
    output: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let mut trap = match cfg.and_then(|c| c.trap) {
        Some(t) => t,
        None if target_kappa.is_some() => TrapParams::reference(1.0),
        None => {
            return Err(CliError::Config(
                "ion-map needs a config with a [trap] table or --target-kappa".into(),
            ))
        }
    };
    if let Some(k) = target_kappa {
        trap.omega_carrier = invert_kappa(k, trap.eta, trap.omega_tilde)?;
    }
    let model = model.or(cfg.map(|c| c.model)).unwrap_or(Dimensionality::ThreePlusOne);
    let doc = ion_map_document(&trap, model)?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    match format {
        Format::Json => emit_json(output, &doc),
        Format::Csv => {
            let mut text = format!(
                "# ion map, model {model}: kappa = {}, L = {} lambda_c = {:e} m, c_eff = {:e} m/s, Omega = {:e} rad/s, laser pairs = {}\n",
                doc.kappa, doc.magnetic_length, doc.magnetic_length_m, doc.c_eff_m_per_s, trap.omega_carrier, doc.laser_pairs
            );
            text.push_str("kind,axis,levels,pauli,sign,red,blue,carrier,laser_pairs,simulates\n");
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for i in &doc.schedule.interactions {
                let kind = serde_json::to_value(i.kind).map_err(|e| CliError::Io(e.to_string()))?;
                let axis = serde_json::to_value(i.axis).map_err(|e| CliError::Io(e.to_string()))?;
                w.write_record([
                    kind.as_str().unwrap_or_default().to_string(),
                    axis.as_str().unwrap_or_default().to_string(),
                    format!("{}{}", i.levels.0, i.levels.1),
                    i.pauli.to_string(),
                    i.sign.to_string(),
                    opt(i.phases.red),
                    opt(i.phases.blue),
                    opt(i.phases.carrier),
                    i.laser_pairs.to_string(),
                    i.simulates.to_string(),
                ])
                .map_err(|e| CliError::Io(e.to_string()))?;
            }
            text.push_str(&String::from_utf8_lossy(&w.into_inner().map_err(|e| CliError::Io(e.to_string()))?));
            emit(output, &text)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LowFieldReport {
    pub summary: LowFieldSummary,
    /// None for planar packets, whose envelope does not decay.
    pub envelope_halflife: Option<f64>,
    pub warning: Option<String>,
    pub cyclotron_radius_m: Option<f64>,
    pub zb_amplitude_m: Option<f64>,
    pub omega_c_per_s: Option<f64>,
    pub zb_frequency_per_s: Option<f64>,
}

pub fn cmd_lowfield(cfg: &RunConfig, output: Option<&Path>, format: Format) -> Result<(), CliError> {
    let r = cfg.resolve()?;
    let s = lowfield_summary(&r.packet, &r.field);
    let warning = s.warning().map(|e| e.to_string());
    if let Some(w) = &warning {
        eprintln!("warning: {w}");
    }
    let u = r.units;
    let report = LowFieldReport {
        summary: s,
        envelope_halflife: s.envelope_halflife().is_finite().then(|| s.envelope_halflife()),
        warning,
        cyclotron_radius_m: u.map(|u| u.length_to_si(s.cyclotron_radius)),
        zb_amplitude_m: u.map(|u| u.length_to_si(s.zb_amplitude)),
        omega_c_per_s: u.map(|u| u.frequency_to_si(s.omega_c)),
        zb_frequency_per_s: u.map(|u| u.frequency_to_si(2.0)),
    };
    match format {
        Format::Json => emit_json(output, &report),
        Format::Csv => {
            let mut text = String::from("# low-field estimates, natural units (SI where available)\nquantity,value\n");
            let mut row = |k: &str, v: Option<f64>| {
                if let Some(v) = v {
                    text.push_str(&format!("{k},{v:e}\n"));
                }
            };
            row("kappa", Some(s.kappa));
            row("cyclotron_radius", Some(s.cyclotron_radius));
            row("omega_c", Some(s.omega_c));
            row("zb_amplitude", Some(s.zb_amplitude));
            row("d_z", Some(s.d_z));
            row("envelope_halflife", report.envelope_halflife);
            row("cyclotron_radius_m", report.cyclotron_radius_m);
            row("zb_amplitude_m", report.zb_amplitude_m);
            row("omega_c_per_s", report.omega_c_per_s);
            row("zb_frequency_per_s", report.zb_frequency_per_s);
            emit(output, &text)
        }
    }
}
