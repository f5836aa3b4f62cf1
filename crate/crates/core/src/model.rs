//! Versioned on-disk model format. Plain JSON with shortest round-trip
//! number formatting, so a saved model reloads bit-for-bit.

use crate::dmd::{DmdModel, FitDiagnostics, ModeKind};
use crate::koopman::{Dictionary, DictionarySpec, KoopmanError, KoopmanModel, Standardization};
use crate::numerics::{ComplexMatrix, RankPolicy};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0} (this build reads {SCHEMA_VERSION})")]
    UnsupportedSchema(u32),
    #[error("model contains non-finite numbers")]
    NonFinite,
    #[error("model file is internally inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Dictionary(#[from] KoopmanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dmd,
    Koopman,
}

/// Where the model came from: a digest of the training data and the rank
/// policy used to truncate it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub input_digest: String,
    pub rank_policy: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DictionarySection {
    pub spec: DictionarySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
}

/// The serialized form of a fitted model. Complex numbers are stored as
/// `[re, im]` pairs; modes are row-major (n rows of r pairs).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: ModelKind,
    pub n: usize,
    pub r: usize,
    pub delta_k: f64,
    pub start_index: f64,
    pub mode_kind: ModeKind,
    pub eigenvalues: Vec<[f64; 2]>,
    pub modes: Vec<Vec<[f64; 2]>>,
    pub amplitudes: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<DictionarySection>,
    pub diagnostics: FitDiagnostics,
    pub provenance: Provenance,
}

/// A model restored from disk: either a plain fit or a lifted one.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Dmd(DmdModel),
    Koopman(KoopmanModel),
}

impl AnyModel {
    /// The model predictions run through (the lifted one for Koopman).
    pub fn dmd(&self) -> &DmdModel {
        match self {
            AnyModel::Dmd(m) => m,
            AnyModel::Koopman(k) => &k.lifted_model,
        }
    }

    /// Dimension of the states the caller sees.
    pub fn state_dim(&self) -> usize {
        match self {
            AnyModel::Dmd(m) => m.n,
            AnyModel::Koopman(k) => k.dictionary.input_dim(),
        }
    }
}

impl ModelFile {
    pub fn from_dmd(model: &DmdModel, provenance: Provenance) -> Result<Self, ModelError> {
        let file = Self {
            schema_version: SCHEMA_VERSION,
            kind: ModelKind::Dmd,
            n: model.n,
            r: model.rank,
            delta_k: model.delta_k,
            start_index: model.start_index,
            mode_kind: model.mode_kind,
            eigenvalues: model.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            modes: (0..model.n)
                .map(|i| {
                    (0..model.rank)
                        .map(|j| {
                            let z = model.modes[(i, j)];
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
            amplitudes: model.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
            dictionary: None,
            diagnostics: model.diagnostics.clone(),
            provenance,
        };
        file.validate_finite()?;
        Ok(file)
    }

    pub fn from_koopman(model: &KoopmanModel, provenance: Provenance) -> Result<Self, ModelError> {
        let mut file = Self::from_dmd(&model.lifted_model, provenance)?;
        file.kind = ModelKind::Koopman;
        file.dictionary = Some(DictionarySection {
            spec: model.dictionary.spec().clone(),
            standardization: model.dictionary.standardization().cloned(),
        });
        Ok(file)
    }

    pub fn from_any(model: &AnyModel, provenance: Provenance) -> Result<Self, ModelError> {
        match model {
            AnyModel::Dmd(m) => Self::from_dmd(m, provenance),
            AnyModel::Koopman(k) => Self::from_koopman(k, provenance),
        }
    }

    /// Rebuild the in-memory model. SVD factors are not stored, so the
    /// restored model carries only the predictive state.
    pub fn into_model(self) -> Result<AnyModel, ModelError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ModelError::UnsupportedSchema(self.schema_version));
        }
        self.validate_finite()?;
        if self.eigenvalues.len() != self.r
            || self.amplitudes.len() != self.r
            || self.modes.len() != self.n
            || self.modes.iter().any(|row| row.len() != self.r)
        {
            return Err(ModelError::Inconsistent(
                "eigenvalue/mode/amplitude shapes disagree with n and r".into(),
            ));
        }
        let modes = ComplexMatrix::from_fn(self.n, self.r, |i, j| {
            Complex64::new(self.modes[i][j][0], self.modes[i][j][1])
        });
        let dmd = DmdModel {
            n: self.n,
            rank: self.r,
            eigenvalues: self
                .eigenvalues
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
            modes,
            amplitudes: self
                .amplitudes
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
            delta_k: self.delta_k,
            start_index: self.start_index,
            mode_kind: self.mode_kind,
            diagnostics: self.diagnostics.clone(),
            factors: None,
        };
        match (self.kind, self.dictionary) {
            (ModelKind::Dmd, None) => Ok(AnyModel::Dmd(dmd)),
            (ModelKind::Koopman, Some(section)) => {
                let dictionary = Dictionary::restore(section.spec, section.standardization)?;
                if dictionary.output_dim() != dmd.n {
                    return Err(ModelError::Inconsistent(format!(
                        "dictionary lifts to {} dimensions but the model is {}-dimensional",
                        dictionary.output_dim(),
                        dmd.n
                    )));
                }
                Ok(AnyModel::Koopman(KoopmanModel {
                    dictionary,
                    lifted_model: dmd,
                }))
            }
            (ModelKind::Koopman, None) => Err(ModelError::Inconsistent(
                "koopman model without a dictionary".into(),
            )),
            (ModelKind::Dmd, Some(_)) => Err(ModelError::Inconsistent(
                "plain model carries a dictionary".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        self.validate_finite()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate_finite(&self) -> Result<(), ModelError> {
        let pairs = self
            .eigenvalues
            .iter()
            .chain(self.amplitudes.iter())
            .chain(self.modes.iter().flatten());
        for p in pairs {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(ModelError::NonFinite);
            }
        }
        if !(self.delta_k.is_finite() && self.start_index.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }
}

/// Render a rank policy in its CLI syntax (`fixed:R`, `tol:T`, `energy:E`).
pub fn rank_policy_string(policy: RankPolicy) -> String {
    match policy {
        RankPolicy::Fixed(r) => format!("fixed:{r}"),
        RankPolicy::RelativeTolerance(t) => format!("tol:{t}"),
        RankPolicy::EnergyFraction(e) => format!("energy:{e}"),
    }
}

/// Parse the CLI rank-policy syntax.
pub fn parse_rank_policy(text: &str) -> Result<RankPolicy, String> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| format!("expected KIND:VALUE, got `{text}`"))?;
    match kind {
        "fixed" => value
            .parse::<usize>()
            .map(RankPolicy::Fixed)
            .map_err(|_| format!("bad fixed rank `{value}`")),
        "tol" => value
            .parse::<f64>()
            .map(RankPolicy::RelativeTolerance)
            .map_err(|_| format!("bad tolerance `{value}`")),
        "energy" => value
            .parse::<f64>()
            .map(RankPolicy::EnergyFraction)
            .map_err(|_| format!("bad energy fraction `{value}`")),
        other => Err(format!(
            "unknown rank policy `{other}` (use fixed:, tol:, or energy:)"
        )),
    }
}

/// FNV-1a digest of the training input, recorded for provenance.
pub fn input_digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("fnv1a64:{hash:016x}")
}
