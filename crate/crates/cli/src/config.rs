//! Scenario configuration (TOML). Every key has a default, so an empty file
//! is a valid configuration; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use toric_seaqt_core::engine::{CouplingMode, DynamicsParams};
use toric_seaqt_core::hermitian::PauliAxis;
use toric_seaqt_core::lattice::{build_torus, default_site, PerturbationSpec, ToricLattice};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub lattice: LatticeConfig,
    pub perturbation: PerturbationConfig,
    pub dynamics: DynamicsConfig,
    pub reservoir: ReservoirConfig,
    pub measures: MeasuresConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub rows: usize,
    pub cols: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { rows: 1, cols: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl From<Axis> for PauliAxis {
    fn from(axis: Axis) -> Self {
        match axis {
            Axis::X => PauliAxis::X,
            Axis::Y => PauliAxis::Y,
            Axis::Z => PauliAxis::Z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    /// Flipped qubit; defaults to 0 on the 1×1 torus and 3 otherwise.
    pub site: Option<usize>,
    pub axis: Axis,
    pub px_list: Vec<f64>,
    pub gue_epsilon: f64,
    pub mix_delta: f64,
    /// Weight of the entangled pure-state admixture applied before the flip.
    pub entangle_eta: f64,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            site: None,
            axis: Axis::X,
            px_list: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            gue_epsilon: 0.1,
            mix_delta: 1e-3,
            entangle_eta: 0.0,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub tau: f64,
    pub dt: f64,
    pub t_end: f64,
    pub observer_stride: usize,
    pub degeneracy_epsilon: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self { tau: 1.0, dt: 1e-3, t_end: 20.0, observer_stride: 100, degeneracy_epsilon: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservoirConfig {
    pub beta_r: f64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self { beta_r: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasuresConfig {
    /// Geometric-entropy region; defaults to the perturbed spin.
    pub region_a: Option<Vec<usize>>,
    /// Partially transposed qubits; defaults to {1} on 1×1 and {3} otherwise.
    pub negativity_subsystem: Option<Vec<usize>>,
    pub beta_grid_min: f64,
    pub beta_grid_max: f64,
    pub beta_grid_points: usize,
}

impl Default for MeasuresConfig {
    fn default() -> Self {
        Self {
            region_a: None,
            negativity_subsystem: None,
            beta_grid_min: -5.0,
            beta_grid_max: 5.0,
            beta_grid_points: 401,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: OutputFormat::Csv }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("invalid configuration")?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks ranges and fills lattice-dependent defaults.
    pub fn resolve(&self) -> Result<Resolved> {
        let lattice = build_torus(self.lattice.rows, self.lattice.cols)?;
        let n = lattice.n_qubits();
        let p = &self.perturbation;
        if p.px_list.is_empty() {
            bail!("perturbation.px_list must not be empty");
        }
        for &px in &p.px_list {
            if !(0.0..=1.0).contains(&px) {
                bail!("perturbation.px_list value {px} outside [0, 1]");
            }
        }
        let site = p.site.unwrap_or_else(|| default_site(&lattice));
        let specs: Vec<PerturbationSpec> = p
            .px_list
            .iter()
            .map(|&p_x| PerturbationSpec {
                site,
                axis: p.axis.into(),
                p_x,
                gue_epsilon: p.gue_epsilon,
                mix_delta: p.mix_delta,
                entangle_eta: p.entangle_eta,
                seed: p.seed,
            })
            .collect();
        for spec in &specs {
            spec.validate(&lattice)?;
        }

        let d = &self.dynamics;
        let params = DynamicsParams {
            tau: d.tau,
            hbar: 1.0,
            mode: CouplingMode::Isolated,
            dt: d.dt,
            t_end: d.t_end,
            degeneracy_epsilon: d.degeneracy_epsilon,
        };
        params.validate()?;
        params.with_mode(CouplingMode::Reservoir { beta_r: self.reservoir.beta_r }).validate()?;
        if d.observer_stride == 0 {
            bail!("dynamics.observer_stride must be positive");
        }
        if params.n_steps() < 4 {
            bail!("t_end/dt must cover at least four steps for rate finite differences");
        }

        let m = &self.measures;
        let region_a = m.region_a.clone().unwrap_or_else(|| vec![site]);
        check_subset("measures.region_a", &region_a, n)?;
        let negativity_subsystem = m.negativity_subsystem.clone().unwrap_or_else(|| vec![if n > 3 { 3 } else { 1 }]);
        check_subset("measures.negativity_subsystem", &negativity_subsystem, n)?;
        if m.beta_grid_points == 0 {
            bail!("measures.beta_grid_points must be positive");
        }
        if !(m.beta_grid_min.is_finite() && m.beta_grid_max.is_finite()) || m.beta_grid_max < m.beta_grid_min {
            bail!("measures.beta_grid_min must not exceed beta_grid_max");
        }
        if m.beta_grid_points == 1 && m.beta_grid_min != m.beta_grid_max {
            bail!("a one-point beta grid needs beta_grid_min == beta_grid_max");
        }
        let beta_grid = (0..m.beta_grid_points)
            .map(|k| {
                if m.beta_grid_points == 1 {
                    m.beta_grid_min
                } else {
                    let t = k as f64 / (m.beta_grid_points - 1) as f64;
                    m.beta_grid_min + t * (m.beta_grid_max - m.beta_grid_min)
                }
            })
            .collect();

        Ok(Resolved {
            config: self.clone(),
            lattice,
            specs,
            params,
            beta_r: self.reservoir.beta_r,
            observer_stride: d.observer_stride,
            region_a,
            negativity_subsystem,
            beta_grid,
        })
    }
}

fn check_subset(key: &str, qubits: &[usize], n: usize) -> Result<()> {
    if qubits.is_empty() {
        bail!("{key} must not be empty");
    }
    if qubits.len() >= n {
        bail!("{key} must be a proper subset of the {n} qubits");
    }
    let mut seen = vec![false; n];
    for &q in qubits {
        if q >= n {
            bail!("{key}: qubit {q} out of range for {n} qubits");
        }
        if std::mem::replace(&mut seen[q], true) {
            bail!("{key}: qubit {q} listed twice");
        }
    }
    Ok(())
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub lattice: ToricLattice,
    /// One perturbation per `px_list` entry, in order.
    pub specs: Vec<PerturbationSpec>,
    /// Isolated-mode parameters; the reservoir run swaps the mode.
    pub params: DynamicsParams,
    pub beta_r: f64,
    pub observer_stride: usize,
    pub region_a: Vec<usize>,
    pub negativity_subsystem: Vec<usize>,
    pub beta_grid: Vec<f64>,
}

impl Resolved {
    pub fn lattice_tag(&self) -> String {
        format!("L{}x{}", self.lattice.rows(), self.lattice.cols())
    }

    pub fn reservoir_params(&self) -> DynamicsParams {
        self.params.with_mode(CouplingMode::Reservoir { beta_r: self.beta_r })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_valid() {
        let config = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(config, ScenarioConfig::default());
        let resolved = config.resolve().unwrap();
        assert_eq!(resolved.specs.len(), 9);
        assert_eq!(resolved.region_a, vec![3]);
        assert_eq!(resolved.negativity_subsystem, vec![3]);
        assert_eq!(resolved.beta_grid.len(), 401);
        assert_eq!(resolved.beta_grid[200], 0.0);
    }

    #[test]
    fn single_cell_defaults() {
        let config = ScenarioConfig::from_toml_str("[lattice]\nrows = 1\ncols = 1\n").unwrap();
        let resolved = config.resolve().unwrap();
        assert_eq!(resolved.specs[0].site, 0);
        assert_eq!(resolved.negativity_subsystem, vec![1]);
        assert_eq!(resolved.region_a, vec![0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml_str("[lattice]\nrows = 1\nwidth = 3\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[extras]\nx = 1\n").is_err());
    }

    #[test]
    fn range_errors() {
        let bad = [
            "[perturbation]\npx_list = [1.5]\n",
            "[perturbation]\nmix_delta = 1.0\n",
            "[dynamics]\ndt = 0.5\n",
            "[lattice]\nrows = 3\ncols = 3\n",
            "[measures]\nregion_a = [0, 1, 2, 3]\n",
            "[measures]\nnegativity_subsystem = [9]\n",
            "[measures]\nbeta_grid_points = 0\n",
        ];
        for text in bad {
            let parsed = ScenarioConfig::from_toml_str(text).unwrap();
            assert!(parsed.resolve().is_err(), "{text}");
        }
    }
}
