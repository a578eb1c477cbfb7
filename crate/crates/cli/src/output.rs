//! Output records: a header of resolved parameters and a numeric table.
//!
//! CSV files carry the header as `#` comment lines (gnuplot skips them); the
//! last comment line holds the full header as JSON so that the file parses
//! back without loss. Spectra go to a sibling `<stem>.spectrum.csv`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zitter::dynamics::{KzReport, SpectralLine};
use zitter::packet::{Dimensionality, GaussianPacket};
use zitter::units::UnitSystem;

use crate::config::Format;
use crate::error::CliError;

const HEADER_TAG: &str = "# header-json: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDeclaration {
    pub time: String,
    pub length: String,
    pub velocity: String,
    pub frequency: String,
}

impl UnitDeclaration {
    pub fn natural() -> Self {
        Self {
            time: "t_c = hbar/mc^2".into(),
            length: "lambda_c = hbar/mc".into(),
            velocity: "c".into(),
            frequency: "mc^2/hbar".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub program: String,
    pub version: String,
    pub command: String,
    pub figure: Option<String>,
    pub model: Dimensionality,
    pub units: UnitDeclaration,
    /// SI sizes of λ_c, t_c and c when the run has physical meaning.
    pub si_scales: Option<UnitSystem>,
    pub kappa: f64,
    /// L in λ_c.
    pub magnetic_length: f64,
    /// ω = √2/L in mc²/ħ.
    pub omega: f64,
    pub packet: GaussianPacket,
    pub n_max: usize,
    pub tail_mass: f64,
    /// |Σ U_nn − 1| and |Σ √(n+1) U_{n+1,n} + k0x L/√2|.
    pub sum_rule_residuals: [f64; 2],
    pub guiding_center: f64,
    pub kz: Option<KzReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub spectrum: Option<Vec<SpectralLine>>,
}

impl OutputRecord {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("not an output record: {e}")))
    }

    /// The `#` comment block, ending with the header-json line.
    pub fn write_comments<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        let h = &self.header;
        writeln!(out, "# {} {} {}", h.program, h.version, h.command)?;
        if let Some(fig) = &h.figure {
            writeln!(out, "# figure: {fig}")?;
        }
        writeln!(
            out,
            "# units: t [{}], x y [{}], vx vy [{}]",
            h.units.time, h.units.length, h.units.velocity
        )?;
        writeln!(out, "# model = {}, kappa = {}, L = {}, omega = {}", h.model, h.kappa, h.magnetic_length, h.omega)?;
        writeln!(
            out,
            "# n_max = {}, tail mass = {:e}, sum-rule residuals = {:e}, {:e}",
            h.n_max, h.tail_mass, h.sum_rule_residuals[0], h.sum_rule_residuals[1]
        )?;
        if let Some(kz) = &h.kz {
            match kz.achieved {
                Some(a) => writeln!(out, "# k_z nodes = {}, achieved relative change = {a:e}", kz.nodes)?,
                None => writeln!(out, "# k_z nodes = {} (fixed rule)", kz.nodes)?,
            }
        }
        let json = serde_json::to_string(h).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out, "{HEADER_TAG}{json}")?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        self.write_comments(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| number(v))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(text: &str, spectrum: Option<&str>) -> Result<Self, CliError> {
        let header = text
            .lines()
            .find_map(|l| l.strip_prefix(HEADER_TAG))
            .ok_or_else(|| CliError::Config("CSV output lacks the header-json line".into()))?;
        let header: Header =
            serde_json::from_str(header).map_err(|e| CliError::Config(format!("bad header: {e}")))?;
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let rows = r.deserialize::<Vec<f64>>().collect::<Result<_, _>>().map_err(csv_err)?;
        let spectrum = spectrum
            .map(|s| {
                csv::Reader::from_reader(s.as_bytes())
                    .deserialize::<SpectralLine>()
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(csv_err)
            })
            .transpose()?;
        Ok(Self { header, columns, rows, spectrum })
    }

    /// Writes to `path` (stdout when `None`) and returns the files written.
    pub fn save(&self, path: Option<&Path>, format: Format) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        match (format, path) {
            (Format::Json, Some(p)) => {
                std::fs::write(p, self.to_json()? + "\n").map_err(|e| io_at(p, e))?;
                written.push(p.to_path_buf());
            }
            (Format::Json, None) => println!("{}", self.to_json()?),
            (Format::Csv, Some(p)) => {
                let f = std::fs::File::create(p).map_err(|e| io_at(p, e))?;
                self.write_csv(std::io::BufWriter::new(f))?;
                written.push(p.to_path_buf());
                if let Some(lines) = &self.spectrum {
                    let sp = spectrum_path(p);
                    let mut w = csv::Writer::from_path(&sp).map_err(csv_err)?;
                    for line in lines {
                        w.serialize(line).map_err(csv_err)?;
                    }
                    w.flush()?;
                    written.push(sp);
                }
            }
            (Format::Csv, None) => {
                let stdout = std::io::stdout();
                self.write_csv(stdout.lock())?;
                if let Some(lines) = &self.spectrum {
                    let mut w = csv::Writer::from_writer(stdout.lock());
                    println!();
                    for line in lines {
                        w.serialize(line).map_err(csv_err)?;
                    }
                    w.flush()?;
                }
            }
        }
        Ok(written)
    }
}

/// Shortest round-trip form, in exponent notation away from order one.
pub fn number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// `run.csv` → `run.spectrum.csv`.
pub fn spectrum_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}.spectrum.csv"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn io_at(p: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", p.display()))
}
