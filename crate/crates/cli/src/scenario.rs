//! Scenario documents: parsing, validation and conversion to core types.

use std::path::Path;

use condprep_core::designer::DesignRequest;
use condprep_core::simulator::{Feedback, SimConfig};
use condprep_core::{RMat, RVec, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A matrix given either as nested rows or as one flat row-major list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matrix {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl Matrix {
    pub fn from_mat(m: &RMat) -> Self {
        Matrix::Rows(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|k| m[(i, k)]).collect())
                .collect(),
        )
    }

    pub fn to_mat(&self, rows: usize, cols: usize, what: &str) -> Result<RMat, CliError> {
        let flat: Vec<f64> = match self {
            Matrix::Rows(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    return Err(CliError::Config(format!("{what} must be {rows}x{cols}")));
                }
                r.iter().flatten().copied().collect()
            }
            Matrix::Flat(v) => {
                if v.len() != rows * cols {
                    return Err(CliError::Config(format!(
                        "{what} must hold {rows}x{cols} = {} entries, got {}",
                        rows * cols,
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("{what} has non-finite entries")));
        }
        Ok(RMat::from_row_slice(rows, cols, &flat))
    }

    /// Side length of a square matrix, if the data allows one.
    pub fn square_side(&self) -> Option<usize> {
        match self {
            Matrix::Rows(r) => Some(r.len()),
            Matrix::Flat(v) => {
                let n = (v.len() as f64).sqrt().round() as usize;
                (n * n == v.len()).then_some(n)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub m: usize,
    #[serde(rename = "G")]
    pub g: Matrix,
    #[serde(rename = "Lambda_re")]
    pub lambda_re: Matrix,
    #[serde(rename = "Lambda_im", default, skip_serializing_if = "Option::is_none")]
    pub lambda_im: Option<Matrix>,
    #[serde(rename = "K_re", default, skip_serializing_if = "Option::is_none")]
    pub k_re: Option<Matrix>,
    #[serde(rename = "K_im", default, skip_serializing_if = "Option::is_none")]
    pub k_im: Option<Matrix>,
    #[serde(default = "unit_efficiency")]
    pub eta: f64,
}

fn unit_efficiency() -> f64 {
    1.0
}

impl SystemBlock {
    pub fn to_spec(&self, eta_override: Option<f64>) -> Result<SystemSpec, CliError> {
        let m = self.m;
        if m == 0 {
            return Err(CliError::Config("system.m must be at least 1".into()));
        }
        let n = 2 * m;
        let g = self.g.to_mat(n, n, "G")?;
        let re = self.lambda_re.to_mat(m, n, "Lambda_re")?;
        let im = match &self.lambda_im {
            Some(x) => x.to_mat(m, n, "Lambda_im")?,
            None => RMat::zeros(m, n),
        };
        let k = match (&self.k_re, &self.k_im) {
            (None, None) => None,
            (re_k, im_k) => {
                let kr = match re_k {
                    Some(x) => x.to_mat(n, m, "K_re")?,
                    None => RMat::zeros(n, m),
                };
                let ki = match im_k {
                    Some(x) => x.to_mat(n, m, "K_im")?,
                    None => RMat::zeros(n, m),
                };
                Some((kr, ki))
            }
        };
        let eta = eta_override.unwrap_or(self.eta);
        Ok(SystemSpec::from_parts(m, g, &re, &im, k, eta)?)
    }

    pub fn from_spec(spec: &SystemSpec) -> Self {
        let lam = spec.lambda();
        let k = spec.drive();
        let re = |c: &condprep_core::CMat| c.map(|z| z.re);
        let im = |c: &condprep_core::CMat| c.map(|z| z.im);
        Self {
            m: spec.modes(),
            g: Matrix::from_mat(spec.g()),
            lambda_re: Matrix::from_mat(&re(lam)),
            lambda_im: Some(Matrix::from_mat(&im(lam))),
            k_re: Some(Matrix::from_mat(&re(k))),
            k_im: Some(Matrix::from_mat(&im(k))),
            eta: spec.eta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(rename = "V_s")]
    pub v_s: Matrix,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Matrix>,
    #[serde(rename = "Im", default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Matrix>,
}

impl DesignBlock {
    pub fn to_request(&self) -> Result<DesignRequest, CliError> {
        let n = self
            .v_s
            .square_side()
            .filter(|n| *n > 0 && n % 2 == 0)
            .ok_or_else(|| CliError::Config("V_s must be a square 2m x 2m matrix".into()))?;
        let m = n / 2;
        let mut req = DesignRequest::new(self.v_s.to_mat(n, n, "V_s")?);
        if let Some(r) = &self.r {
            req = req.with_r(r.to_mat(m, n, "R")?);
        }
        if let Some(im) = &self.im {
            req = req.with_im(im.to_mat(m, n, "Im")?);
        }
        Ok(req)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeedbackInput {
    /// `"none"`, `"markovian"` (fixed steady gain) or `"markovian-time-varying"`.
    Named(String),
    Explicit {
        #[serde(rename = "B")]
        b: Matrix,
        #[serde(rename = "F")]
        f: Matrix,
    },
}

impl Default for FeedbackInput {
    fn default() -> Self {
        FeedbackInput::Named("none".into())
    }
}

/// What the feedback entry asks for, before any steady state is known.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackPlan {
    None,
    SteadyGain,
    TimeVarying,
    Explicit { b: RMat, f: RMat },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub feedback: FeedbackInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl SimBlock {
    pub fn feedback_plan(&self, m: usize) -> Result<FeedbackPlan, CliError> {
        match &self.feedback {
            FeedbackInput::Named(s) => match s.as_str() {
                "none" => Ok(FeedbackPlan::None),
                "markovian" | "markovian-fixed" => Ok(FeedbackPlan::SteadyGain),
                "markovian-time-varying" => Ok(FeedbackPlan::TimeVarying),
                other => Err(CliError::Config(format!(
                    "unknown feedback '{other}'; expected none, markovian or markovian-time-varying"
                ))),
            },
            FeedbackInput::Explicit { b, f } => {
                let n = 2 * m;
                let k = match b {
                    Matrix::Rows(r) => r.first().map_or(0, Vec::len),
                    Matrix::Flat(v) => v.len() / n.max(1),
                };
                Ok(FeedbackPlan::Explicit {
                    b: b.to_mat(n, k, "feedback.B")?,
                    f: f.to_mat(k, m, "feedback.F")?,
                })
            }
        }
    }

    /// Builds the simulator configuration; `feedback` is resolved by the caller.
    pub fn to_config(&self, seed_override: Option<u64>, eta: f64, feedback: Feedback) -> Result<SimConfig, CliError> {
        let mut cfg = SimConfig::new(self.dt, self.t_final, self.n_traj, seed_override.unwrap_or(self.seed));
        cfg.eta = Some(eta);
        cfg.feedback = feedback;
        if let Some(x0) = &self.x0 {
            cfg.x0 = Some(RVec::from_vec(x0.clone()));
        }
        if let Some(s) = self.samples {
            cfg.samples = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    /// Optional artifacts: `"trajectories"` keeps per-trajectory means.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
    /// Extra efficiencies to analyze alongside the system's own.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta_sweep: Vec<f64>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.name.trim().is_empty()
            || self.name.contains(['/', '\\'])
            || self.name.starts_with('.')
        {
            return Err(CliError::Config(
                "name must be non-empty, must not start with '.', and must not contain path separators".into(),
            ));
        }
        match (&self.system, &self.design) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "scenario must hold exactly one of 'system' or 'design', not both".into(),
            )),
            (None, None) => Err(CliError::Config(
                "scenario must hold one of 'system' or 'design'".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn wants(&self, output: &str) -> bool {
        self.outputs.iter().any(|o| o == output)
    }
}
