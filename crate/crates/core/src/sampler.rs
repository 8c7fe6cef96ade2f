//! Instance families: a seeded source of problem instances of one size.

use serde::{Deserialize, Serialize};

use crate::error::{QapError, Result};
use crate::graph::{gen_sbm, gen_uniform, SbmConfig};
use crate::problem::ProblemInstance;

/// Produces an independent instance for every seed.
pub trait InstanceSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn m(&self) -> usize;
    fn n(&self) -> usize;
    fn sample(&self, seed: u64) -> Result<ProblemInstance>;
}

/// Graph family parameters, shared by every size in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphFamily {
    Sbm {
        #[serde(default = "default_clusters")]
        num_clusters: usize,
        /// Relative cluster sizes; equal clusters when absent.
        #[serde(default)]
        proportions: Option<Vec<f64>>,
        #[serde(default = "default_p_within")]
        p_within: f64,
        #[serde(default = "default_p_between")]
        p_between: f64,
    },
    Uniform,
}

fn default_clusters() -> usize {
    5
}
fn default_p_within() -> f64 {
    0.7
}
fn default_p_between() -> f64 {
    0.05
}

impl Default for GraphFamily {
    fn default() -> Self {
        GraphFamily::Sbm {
            num_clusters: default_clusters(),
            proportions: None,
            p_within: default_p_within(),
            p_between: default_p_between(),
        }
    }
}

impl GraphFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GraphFamily::Sbm { .. } => "sbm",
            GraphFamily::Uniform => "uniform",
        }
    }

    pub fn sampler(&self, m: usize, relative_capacities: &[f64]) -> Result<Box<dyn InstanceSampler>> {
        let relative = relative_capacities.to_vec();
        crate::problem::capacities_from_relative(&relative, m)?;
        Ok(match self {
            GraphFamily::Sbm {
                num_clusters,
                proportions,
                p_within,
                p_between,
            } => {
                let props = match proportions {
                    Some(p) if p.len() != *num_clusters => {
                        return Err(QapError::Config(format!(
                            "{} cluster proportions for {num_clusters} clusters",
                            p.len()
                        )))
                    }
                    Some(p) => p.clone(),
                    None => vec![1.0 / *num_clusters as f64; *num_clusters],
                };
                let template = SbmConfig::from_proportions(m, &props, *p_within, *p_between, 0)?;
                template.validate()?;
                Box::new(SbmSampler { template, relative })
            }
            GraphFamily::Uniform => {
                if m < 2 {
                    return Err(QapError::Config("uniform family needs m >= 2".into()));
                }
                Box::new(UniformSampler { m, relative })
            }
        })
    }
}

pub struct SbmSampler {
    template: SbmConfig,
    relative: Vec<f64>,
}

impl InstanceSampler for SbmSampler {
    fn name(&self) -> &'static str {
        "sbm"
    }
    fn m(&self) -> usize {
        self.template.m()
    }
    fn n(&self) -> usize {
        self.relative.len()
    }
    fn sample(&self, seed: u64) -> Result<ProblemInstance> {
        let cfg = SbmConfig {
            seed,
            ..self.template.clone()
        };
        ProblemInstance::with_relative_capacities(gen_sbm(&cfg)?, &self.relative)
    }
}

pub struct UniformSampler {
    m: usize,
    relative: Vec<f64>,
}

impl InstanceSampler for UniformSampler {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn m(&self) -> usize {
        self.m
    }
    fn n(&self) -> usize {
        self.relative.len()
    }
    fn sample(&self, seed: u64) -> Result<ProblemInstance> {
        ProblemInstance::with_relative_capacities(gen_uniform(self.m, seed)?, &self.relative)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_build_samplers() {
        let rel = [0.1, 0.1, 0.2, 0.3, 0.3];
        let s = GraphFamily::default().sampler(100, &rel).unwrap();
        let inst = s.sample(3).unwrap();
        assert_eq!((inst.m(), inst.n()), (100, 5));
        assert_eq!(inst.capacities(), &[10, 10, 20, 30, 30]);
        assert_eq!(s.sample(3).unwrap(), inst);
        let u = GraphFamily::Uniform.sampler(40, &rel).unwrap();
        assert_eq!(u.sample(1).unwrap().m(), 40);
        assert!(GraphFamily::Uniform.sampler(10, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn family_json() {
        let f: GraphFamily = serde_json::from_str(r#"{"kind": "sbm", "p_within": 0.9}"#).unwrap();
        assert_eq!(f.name(), "sbm");
        let u: GraphFamily = serde_json::from_str(r#"{"kind": "uniform"}"#).unwrap();
        assert_eq!(u, GraphFamily::Uniform);
        assert!(serde_json::from_str::<GraphFamily>(r#"{"kind": "sbm", "p_whithin": 0.9}"#).is_err());
    }
}
