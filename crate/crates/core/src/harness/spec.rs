//! Textual model specifications, e.g. `rrr:M=6,N=6,H=3,sigma=0.1,prior_std=10`
//! or `conjugate:d=2,noise_std=1,prior_std=1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{ChainConfig, ChainInit};
use crate::models::{ConjugateNormalModel, Model, ReducedRankModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Rrr { inputs: usize, outputs: usize, rank: usize, sigma: f64, prior_std: f64 },
    Conjugate { dim: usize, noise_std: f64, prior_std: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn Model>> {
        Ok(match *self {
            ModelSpec::Rrr { inputs, outputs, rank, sigma, prior_std } => {
                Box::new(ReducedRankModel::new(inputs, outputs, rank, sigma, prior_std)?)
            }
            ModelSpec::Conjugate { dim, noise_std, prior_std } => {
                Box::new(ConjugateNormalModel::new(dim, noise_std, prior_std)?)
            }
        })
    }

    /// Sampler settings that work for this family: RRR chains start from a
    /// shrunken prior draw because the prior is far wider than the posterior.
    pub fn default_chain_config(&self) -> ChainConfig {
        match self {
            ModelSpec::Rrr { .. } => ChainConfig {
                init: ChainInit::ScaledPriorDraw { scale: 0.01 },
                ..ChainConfig::default()
            },
            ModelSpec::Conjugate { .. } => ChainConfig {
                burn_in: 5000,
                thin: 5,
                draws: 2000,
                step_std_init: 0.1,
                ..ChainConfig::default()
            },
        }
    }

    /// Scale applied to prior draws used as optimiser starts.
    pub fn fit_start_scale(&self) -> f64 {
        match self {
            ModelSpec::Rrr { .. } => 0.01,
            ModelSpec::Conjugate { .. } => 1.0,
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {part:?}")))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |keys: &[&str]| kv.iter().find(|(k, _)| keys.contains(&k.as_str())).map(|(_, v)| v.clone());
        let int = |keys: &[&str]| -> Result<Option<usize>> {
            get(keys)
                .map(|v| v.parse().map_err(|_| Error::Config(format!("{}: not an integer: {v}", keys[0]))))
                .transpose()
        };
        let real = |keys: &[&str], default: f64| -> Result<f64> {
            get(keys).map_or(Ok(default), |v| {
                v.parse().map_err(|_| Error::Config(format!("{}: not a number: {v}", keys[0])))
            })
        };
        let allowed: &[&str] = match family.trim() {
            "rrr" => &["M", "N", "H", "sigma", "prior_std"],
            "conjugate" => &["d", "noise_std", "prior_std"],
            other => return Err(Error::Config(format!("unknown model family {other:?}"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k:?} for {family}")));
        }
        let need = |v: Option<usize>, k: &str| v.ok_or_else(|| Error::Config(format!("{family} spec needs {k}")));
        let spec = if family.trim() == "rrr" {
            ModelSpec::Rrr {
                inputs: need(int(&["M"])?, "M")?,
                outputs: need(int(&["N"])?, "N")?,
                rank: need(int(&["H"])?, "H")?,
                sigma: real(&["sigma"], 0.1)?,
                prior_std: real(&["prior_std"], 10.0)?,
            }
        } else {
            ModelSpec::Conjugate {
                dim: need(int(&["d"])?, "d")?,
                noise_std: real(&["noise_std"], 1.0)?,
                prior_std: real(&["prior_std"], 1.0)?,
            }
        };
        spec.build()?;
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Rrr { inputs, outputs, rank, sigma, prior_std } => {
                write!(f, "rrr:M={inputs},N={outputs},H={rank},sigma={sigma},prior_std={prior_std}")
            }
            ModelSpec::Conjugate { dim, noise_std, prior_std } => {
                write!(f, "conjugate:d={dim},noise_std={noise_std},prior_std={prior_std}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let s: ModelSpec = "rrr:M=6,N=6,H=3".parse().unwrap();
        assert_eq!(s, ModelSpec::Rrr { inputs: 6, outputs: 6, rank: 3, sigma: 0.1, prior_std: 10.0 });
        assert_eq!(s.to_string().parse::<ModelSpec>().unwrap(), s);
        assert_eq!(s.build().unwrap().dim(), 36);
        let c: ModelSpec = "conjugate:d=2, prior_std=3".parse().unwrap();
        assert_eq!(c, ModelSpec::Conjugate { dim: 2, noise_std: 1.0, prior_std: 3.0 });
        for bad in ["rrr:M=6", "gp:d=1", "conjugate:d=x", "conjugate:d=2,q=1", "conjugate:d=0", "conjugate:d=2,noise_std=-1"] {
            assert!(matches!(bad.parse::<ModelSpec>(), Err(Error::Config(_))), "{bad}");
        }
    }
}
