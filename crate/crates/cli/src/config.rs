//! Run configuration: TOML sections with every default spelled out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use splitstep::models::{ParamValue, Params};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSetting {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub threads: usize,
    pub model: ModelSection,
    pub simulate: SimulateSection,
    pub weak: WeakSection,
    pub strong: StrongSection,
    pub sbm: SbmSection,
    pub contact: ContactSection,
    pub theta_critical: ThetaCriticalSection,
    pub ncx2: Ncx2Section,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: 0,
            model: ModelSection::default(),
            simulate: SimulateSection::default(),
            weak: WeakSection::default(),
            strong: StrongSection::default(),
            sbm: SbmSection::default(),
            contact: ContactSection::default(),
            theta_critical: ThetaCriticalSection::default(),
            ncx2: Ncx2Section::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub params: BTreeMap<String, ParamSetting>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            name: "cir".into(),
            params: BTreeMap::new(),
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> Params {
        self.params
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    ParamSetting::Number(x) => ParamValue::Number(*x),
                    ParamSetting::Text(s) => ParamValue::Text(s.clone()),
                };
                (k.clone(), v)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// `split` or a baseline: `euler-maruyama`, `abs-sqrt-euler`, `split-step-backward-euler`.
    pub scheme: String,
    pub x0: f64,
    pub t: f64,
    pub dt: f64,
    pub paths: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            scheme: "split".into(),
            x0: 1.0,
            t: 1.0,
            dt: 0.01,
            paths: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakSection {
    pub schemes: Vec<String>,
    pub x0: f64,
    pub t: f64,
    pub dts: Vec<f64>,
    pub paths: usize,
}

impl Default for WeakSection {
    fn default() -> Self {
        Self {
            schemes: vec!["split".into()],
            x0: 1.0,
            t: 1.0,
            dts: (3..=8).map(|i| 0.5f64.powi(i)).collect(),
            paths: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongSection {
    pub schemes: Vec<String>,
    pub x0: f64,
    pub t: f64,
    pub dts: Vec<f64>,
    pub fine_dt: f64,
    pub k: u32,
    pub paths: usize,
    /// `exact` (model's pathwise solution) or `fine-split` (split scheme on the fine grid).
    pub reference: String,
}

impl Default for StrongSection {
    fn default() -> Self {
        Self {
            schemes: vec!["split".into(), "euler-maruyama".into()],
            x0: 1.0,
            t: 5.0,
            dts: (5..=9).map(|i| 0.5f64.powi(i)).collect(),
            fine_dt: 0.5f64.powi(13),
            k: 2,
            paths: 2000,
            reference: "exact".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbmSection {
    pub dims: usize,
    pub len: usize,
    pub dx: f64,
    pub dt: f64,
    pub t_max: f64,
    pub sigma: f64,
    /// `uniform` or `block` (a centred block of `block_width` sites per side).
    pub init: String,
    pub u0: f64,
    pub block_width: usize,
    /// Snapshot every this many steps; 0 writes only the initial and final fields.
    pub snapshot_every: usize,
    pub run: u64,
}

impl Default for SbmSection {
    fn default() -> Self {
        Self {
            dims: 1,
            len: 128,
            dx: 1.0,
            dt: 0.1,
            t_max: 1000.0,
            sigma: 1.0,
            init: "uniform".into(),
            u0: 0.1,
            block_width: 8,
            snapshot_every: 100,
            run: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactSection {
    pub dims: usize,
    pub len: usize,
    pub dx: f64,
    pub dt: f64,
    pub t_max: f64,
    pub rho0: f64,
    pub thetas: Vec<f64>,
    pub runs: usize,
}

impl Default for ContactSection {
    fn default() -> Self {
        Self {
            dims: 1,
            len: 1024,
            dx: 1.0,
            dt: 0.1,
            t_max: 200.0,
            rho0: 1.0,
            thetas: vec![0.6, 0.7, 0.8, 0.9, 1.0],
            runs: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaCriticalSection {
    pub len: usize,
    pub dx: f64,
    pub rho0: f64,
    pub t_max: f64,
    pub runs: usize,
    pub bracket: [f64; 2],
    pub tol: f64,
    pub dts: Vec<f64>,
}

impl Default for ThetaCriticalSection {
    fn default() -> Self {
        Self {
            len: 1024,
            dx: 1.0,
            rho0: 1.0,
            t_max: 1000.0,
            runs: 32,
            bracket: [0.6, 1.0],
            tol: 0.004,
            dts: vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ncx2Section {
    pub d: f64,
    pub lambda: f64,
    pub count: usize,
}

impl Default for Ncx2Section {
    fn default() -> Self {
        Self {
            d: 0.0,
            lambda: 2.0,
            count: 1000,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_defaults() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = RunConfig::from_toml(
            "seed = 9\n[model]\nname = \"cev\"\n[model.params]\ngamma = 0.75\nboundary = \"absorbing\"\nmu = 0\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.model.params["mu"], ParamSetting::Number(0.0));
        assert_eq!(c.model.params["boundary"], ParamSetting::Text("absorbing".into()));
        assert_eq!(c.weak, WeakSection::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sede = 3").is_err());
        assert!(RunConfig::from_toml("[weak]\npath = 3").is_err());
    }
}
