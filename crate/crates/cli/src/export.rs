//! Trajectory CSVs and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use fabric::sim::config::ExperimentConfig;
use fabric::sim::experiments::{ExperimentRun, Overlay};
use fabric::sim::{Event, RolloutRecord};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";

/// Seventeen significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(dim: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=dim {
        write!(h, ",q{i}").unwrap();
    }
    for i in 1..=dim {
        write!(h, ",qd{i}").unwrap();
    }
    h.push_str(",H_e,L_ex,alpha_ex,alpha_Le,eta,beta,event");
    h
}

pub fn trajectory_csv(r: &RolloutRecord) -> String {
    let dim = r.positions.first().map_or(0, Vec::len);
    let mut events: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for e in &r.events {
        events.entry(e.step).or_default().push(e.kind.as_str());
    }
    let mut out = csv_header(dim);
    out.push('\n');
    for k in 0..r.len() {
        let d = &r.diagnostics[k];
        let en = &r.energies[k];
        let mut fields = Vec::with_capacity(2 * dim + 8);
        fields.push(fmt_f64(r.times[k]));
        fields.extend(r.positions[k].iter().map(|x| fmt_f64(*x)));
        fields.extend(r.velocities[k].iter().map(|x| fmt_f64(*x)));
        for x in [en.system, en.execution, d.alpha_ex, d.alpha_le, d.eta, d.beta] {
            fields.push(fmt_f64(x));
        }
        fields.push(events.get(&k).map(|v| v.join(";")).unwrap_or_default());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parsed numeric rows of a trajectory CSV and the event column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub events: Vec<String>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<CsvTable, String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or("empty csv")?.split(',').map(String::from).collect();
    let numeric = header.len() - 1;
    let mut rows = Vec::new();
    let mut events = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(format!("row {}: expected {} fields, found {}", n + 1, header.len(), fields.len()));
        }
        let row = fields[..numeric]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| format!("row {}: {e}", n + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
        events.push(fields[numeric].to_string());
    }
    Ok(CsvTable { header, rows, events })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutEntry {
    pub label: String,
    pub csv: Option<String>,
    pub rows: usize,
    pub dt: f64,
    /// The terminal event; non-finite state entries serialize as `null`.
    pub terminal: serde_json::Value,
    pub warnings: Vec<String>,
    /// Absent when `H_e(0) = 0` leaves the relative drift undefined.
    pub energy_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub kind: String,
    pub variant: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub overrides: Vec<String>,
    pub rollouts: Vec<RolloutEntry>,
    /// Non-finite values are stored as the strings `"inf"`, `"-inf"`, `"nan"`.
    pub summary: BTreeMap<String, serde_json::Value>,
    pub overlay: Overlay,
}

impl Manifest {
    pub fn summary_value(&self, key: &str) -> Option<f64> {
        match self.summary.get(key)? {
            serde_json::Value::Number(n) => n.as_f64(),
            serde_json::Value::String(s) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn terminal_kind(&self, i: usize) -> Option<&str> {
        self.rollouts.get(i)?.terminal.get("kind")?.as_str()
    }
}

fn summary_json(x: f64) -> serde_json::Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => serde_json::Value::Number(n),
        None => serde_json::Value::String(format!("{x}").to_lowercase()),
    }
}

fn event_json(e: &Event) -> serde_json::Value {
    serde_json::to_value(e).unwrap_or(serde_json::Value::Null)
}

fn name_of<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// Writes one CSV per rollout, then the manifest.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, overrides: &[String], run: &ExperimentRun) -> std::io::Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(run.rollouts.len());
    for r in &run.rollouts {
        let csv = if cfg.output.csv {
            let file = format!("{}.csv", r.label);
            std::fs::write(dir.join(&file), trajectory_csv(r))?;
            Some(file)
        } else {
            None
        };
        entries.push(RolloutEntry {
            label: r.label.clone(),
            csv,
            rows: r.len(),
            dt: r.dt,
            terminal: event_json(r.terminal()),
            warnings: r.warnings.clone(),
            energy_drift: Some(r.relative_energy_drift()).filter(|d| d.is_finite()),
        });
    }
    let manifest = Manifest {
        name: run.name.clone(),
        kind: name_of(&run.kind),
        variant: name_of(&run.variant),
        seed: run.seed,
        config: cfg.clone(),
        overrides: overrides.to_vec(),
        rollouts: entries,
        summary: run.summary.iter().map(|(k, v)| (k.clone(), summary_json(*v))).collect(),
        overlay: run.overlay.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(MANIFEST), json + "\n")?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, String> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(csv_header(2), "t,q1,q2,qd1,qd2,H_e,L_ex,alpha_ex,alpha_Le,eta,beta,event");
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0, -0.0, 1e-7] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
    }
}
