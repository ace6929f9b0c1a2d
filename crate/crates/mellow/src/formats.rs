//! MDP interchange documents and CSV output.

use std::fs;
use std::path::Path;

use mellow_core::Mdp;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// On-disk MDP, indexed `[state][action][next_state]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub terminals: Vec<usize>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
}

impl MdpDocument {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            flat.chunks(mdp.n_actions() * mdp.n_states())
                .map(|per_state| per_state.chunks(mdp.n_states()).map(<[f64]>::to_vec).collect())
                .collect()
        };
        Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            gamma: mdp.gamma(),
            terminals: mdp.terminals().to_vec(),
            transition: nest(mdp.transition()),
            reward: nest(mdp.reward()),
        }
    }

    pub fn to_mdp(&self) -> CliResult<Mdp> {
        for (name, table) in [("transition", &self.transition), ("reward", &self.reward)] {
            if table.len() != self.n_states {
                return Err(CliError::Schema(format!(
                    "field \"{name}\" has {} states but \"n_states\" is {}",
                    table.len(),
                    self.n_states
                )));
            }
            if let Some((s, row)) = table.iter().enumerate().find(|(_, row)| row.len() != self.n_actions) {
                return Err(CliError::Schema(format!(
                    "field \"{name}[{s}]\" has {} actions but \"n_actions\" is {}",
                    row.len(),
                    self.n_actions
                )));
            }
        }
        Ok(Mdp::from_nested(&self.transition, &self.reward, self.gamma, &self.terminals)?)
    }
}

pub fn mdp_to_json(mdp: &Mdp) -> String {
    serde_json::to_string_pretty(&MdpDocument::from_mdp(mdp)).expect("MDP documents always serialize")
}

pub fn mdp_from_json(text: &str) -> CliResult<Mdp> {
    let doc: MdpDocument = serde_json::from_str(text).map_err(|e| CliError::Schema(format!("MDP document: {e}")))?;
    doc.to_mdp()
}

pub fn read_mdp(path: &Path) -> CliResult<Mdp> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    mdp_from_json(&text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report types always serialize");
    write_text(path, &(text + "\n"))
}

/// Float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Buffers rows and writes them with a one-line header.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Schema(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_text(path, &self.to_csv()?)
    }
}
