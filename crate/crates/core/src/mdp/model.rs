//! Horizon-H non-stationary low-rank MDP over finite index spaces.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::latent::LatentRepresentation;
use super::level::{sample_index, FactoredLevel, FeatureTable};
use crate::error::{Error, Result};

/// Serialized form of a model. `phi` rows are in state-major `(s, a)` order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct ModelDoc {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "N")]
    pub n_states: usize,
    #[serde(rename = "K")]
    pub n_actions: usize,
    pub d: usize,
    #[serde(default)]
    pub start_state: usize,
    pub levels: Vec<LevelDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<Vec<LatentDoc>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelDoc {
    pub phi: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatentDoc {
    #[serde(rename = "Z")]
    pub n_latent: usize,
    pub psi: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
}

fn schema_version() -> u32 {
    crate::io::SCHEMA_VERSION
}

/// A low-rank MDP. Doubles as the environment and as a learned model.
///
/// Transition tables are computed (clip-renormalized) at construction, so a
/// successfully built model always has valid pmf rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct LowRankMDP {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    start_state: usize,
    levels: Vec<FactoredLevel>,
    latent: Option<Vec<LatentRepresentation>>,
    /// Per level, `N*K` rows of length `N`.
    tables: Vec<Vec<f64>>,
}

impl LowRankMDP {
    pub fn new(levels: Vec<FactoredLevel>, start_state: usize) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::InvalidModel("a model needs at least one level".into()))?;
        let (n, k, d) = (first.n_states(), first.n_actions(), first.dim());
        if levels.iter().any(|l| l.n_states() != n || l.n_actions() != k || l.dim() != d) {
            return Err(Error::DimensionMismatch("levels disagree on N, K or d".into()));
        }
        if start_state >= n {
            return Err(Error::InvalidModel(format!("start state {start_state} out of range")));
        }
        let tables = levels
            .iter()
            .enumerate()
            .map(|(h, l)| {
                l.transition_table()
                    .map_err(|e| Error::InvalidModel(format!("level {h}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_states: n, n_actions: k, dim: d, start_state, levels, latent: None, tables })
    }

    /// Attach one latent representation per level.
    pub fn with_latents(mut self, reps: Vec<LatentRepresentation>) -> Result<Self> {
        if reps.len() != self.levels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} latent representations for {} levels",
                reps.len(),
                self.levels.len()
            )));
        }
        for (h, (rep, level)) in reps.iter().zip(&self.levels).enumerate() {
            let err = rep.consistency_error(level)?;
            if err > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "latent representation of level {h} deviates by {err:e}"
                )));
            }
        }
        self.latent = Some(reps);
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn levels(&self) -> &[FactoredLevel] {
        &self.levels
    }

    pub fn level(&self, h: usize) -> &FactoredLevel {
        &self.levels[h]
    }

    pub fn latents(&self) -> Result<&[LatentRepresentation]> {
        self.latent.as_deref().ok_or(Error::MissingLatentRep { level: 0 })
    }

    pub fn has_latents(&self) -> bool {
        self.latent.is_some()
    }

    fn check_index(&self, h: usize, s: usize, a: usize) -> Result<()> {
        if h >= self.horizon() || s >= self.n_states || a >= self.n_actions {
            return Err(Error::InvalidArgument(format!(
                "index (h={h}, s={s}, a={a}) out of range for H={}, N={}, K={}",
                self.horizon(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    /// Cached pmf row, no bounds check beyond slicing.
    pub(crate) fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        let i = s * self.n_actions + a;
        &self.tables[h][i * n..(i + 1) * n]
    }

    /// The clip-renormalized next-state pmf at level `h`.
    pub fn transition_pmf(&self, h: usize, s: usize, a: usize) -> Result<&[f64]> {
        self.check_index(h, s, a)?;
        Ok(self.row(h, s, a))
    }

    pub fn sample_transition<R: Rng + ?Sized>(&self, h: usize, s: usize, a: usize, rng: &mut R) -> Result<usize> {
        Ok(sample_index(self.transition_pmf(h, s, a)?, rng))
    }

    /// The first `h` levels as a model of horizon `h`.
    pub fn prefix(&self, h: usize) -> Result<Self> {
        if h == 0 || h > self.horizon() {
            return Err(Error::InvalidArgument(format!(
                "prefix length {h} outside 1..={}",
                self.horizon()
            )));
        }
        Ok(Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            dim: self.dim,
            start_state: self.start_state,
            levels: self.levels[..h].to_vec(),
            latent: self.latent.as_ref().map(|l| l[..h].to_vec()),
            tables: self.tables[..h].to_vec(),
        })
    }

    /// Largest absolute difference between the transition tables of two
    /// models of the same shape.
    pub fn max_transition_diff(&self, other: &LowRankMDP) -> f64 {
        if self.horizon() != other.horizon() || self.n_states != other.n_states || self.n_actions != other.n_actions {
            return f64::INFINITY;
        }
        self.tables
            .iter()
            .zip(&other.tables)
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<ModelDoc> for LowRankMDP {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.levels.len() != doc.horizon {
            return Err(Error::DimensionMismatch(format!(
                "H = {} but {} levels given",
                doc.horizon,
                doc.levels.len()
            )));
        }
        let levels = doc
            .levels
            .into_iter()
            .map(|l| {
                FactoredLevel::new(
                    doc.n_states,
                    doc.n_actions,
                    FeatureTable::from_rows(l.phi)?,
                    FeatureTable::from_rows(l.mu)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let model = LowRankMDP::new(levels, doc.start_state)?;
        if model.dim != doc.d {
            return Err(Error::DimensionMismatch(format!("d = {} but features have {}", doc.d, model.dim)));
        }
        match doc.latent {
            None => Ok(model),
            Some(latents) => {
                let reps = latents
                    .into_iter()
                    .map(|l| {
                        let rep = LatentRepresentation::new(
                            doc.n_actions,
                            FeatureTable::from_rows(l.psi)?,
                            FeatureTable::from_rows(l.nu)?,
                        )?;
                        if rep.n_latent() != l.n_latent {
                            return Err(Error::DimensionMismatch("latent Z disagrees with nu".into()));
                        }
                        Ok(rep)
                    })
                    .collect::<Result<Vec<_>>>()?;
                model.with_latents(reps)
            }
        }
    }
}

impl From<LowRankMDP> for ModelDoc {
    fn from(m: LowRankMDP) -> Self {
        ModelDoc {
            schema_version: crate::io::SCHEMA_VERSION,
            horizon: m.horizon(),
            n_states: m.n_states,
            n_actions: m.n_actions,
            d: m.dim,
            start_state: m.start_state,
            levels: m
                .levels
                .iter()
                .map(|l| LevelDoc { phi: l.phi_table().to_rows(), mu: l.mu_table().to_rows() })
                .collect(),
            latent: m.latent.map(|reps| {
                reps.iter()
                    .map(|r| LatentDoc {
                        n_latent: r.n_latent(),
                        psi: r.psi_table().to_rows(),
                        nu: r.nu_table().to_rows(),
                    })
                    .collect()
            }),
        }
    }
}
