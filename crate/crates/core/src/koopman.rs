//! Finite-dimensional Koopman approximation: lift states through a
//! dictionary of scalar observables, fit the reduced operator in the lifted
//! space, and decode predictions back to state coordinates.
//!
//! Dictionaries are described by serializable specs (monomial families with
//! integer exponents) rather than arbitrary closures, so a fitted model can
//! be written to disk and reproduced exactly.

use crate::dmd::{self, DmdError, DmdModel, ModeKind, Prediction};
use crate::numerics::RankPolicy;
use crate::trajectory::{Trajectory, TrajectorySet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the lifted dimension.
pub const DEFAULT_DICTIONARY_CAP: usize = 512;

#[derive(Debug, Error)]
pub enum KoopmanError {
    #[error(transparent)]
    Dmd(#[from] DmdError),
    #[error(transparent)]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
    #[error("dictionary expects states of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("observable {index} produced a non-finite value")]
    NonFiniteObservable { index: usize },
    #[error("dictionary has no coordinate observables, decoding is undefined")]
    NoCoordinateSlots,
    #[error("lifted dimension {p} exceeds the cap {cap}")]
    DimensionTooLarge { p: usize, cap: usize },
    #[error("dictionary requests standardization but has not been fitted to data")]
    StandardizationNotFitted,
    #[error("invalid dictionary spec: {0}")]
    InvalidSpec(String),
}

/// Serializable description of a dictionary. Every observable is a signed
/// monomial `prod_j x_j^(e_j)`, which covers the identity lift, polynomial
/// families, and reciprocal observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DictionarySpec {
    /// The identity lift: p = n, observables are the coordinates.
    Identity { dim: usize },
    /// All monomials of total degree 1..=degree in graded-lexicographic
    /// order, optionally preceded by the constant observable.
    Monomial {
        dim: usize,
        degree: u32,
        include_constant: bool,
        standardize: bool,
    },
    /// An explicit list of monomial exponent vectors (may include negative
    /// exponents).
    MonomialSet {
        dim: usize,
        exponents: Vec<Vec<i32>>,
        standardize: bool,
    },
}

/// Per-observable affine normalization fitted from data:
/// `y_i = (g_i(x) - mean_i) / std_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// A finite ordered set of scalar observables defining the lift
/// `g: R^n -> R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    spec: DictionarySpec,
    input_dim: usize,
    /// One exponent vector per observable.
    terms: Vec<Vec<i32>>,
    /// Positions of the observables that are exactly the coordinates
    /// x_1..x_n, in coordinate order; `None` when any coordinate is missing.
    coordinate_slots: Option<Vec<usize>>,
    standardize_requested: bool,
    standardization: Option<Standardization>,
}

impl Dictionary {
    /// The identity lift.
    pub fn identity(dim: usize) -> Result<Self, KoopmanError> {
        Self::from_spec(DictionarySpec::Identity { dim })
    }

    /// All monomials of total degree 1..=degree, graded-lex order, with
    /// degree-1 slots recorded as the coordinate observables.
    pub fn monomial(dim: usize, degree: u32, include_constant: bool) -> Result<Self, KoopmanError> {
        Self::from_spec(DictionarySpec::Monomial {
            dim,
            degree,
            include_constant,
            standardize: false,
        })
    }

    /// An explicit monomial subset, e.g. `[[1,0],[0,1],[2,0]]` for
    /// `[x1, x2, x1^2]`.
    pub fn from_monomials(dim: usize, exponents: Vec<Vec<i32>>) -> Result<Self, KoopmanError> {
        Self::from_spec(DictionarySpec::MonomialSet {
            dim,
            exponents,
            standardize: false,
        })
    }

    /// Build a dictionary from its serializable spec.
    pub fn from_spec(spec: DictionarySpec) -> Result<Self, KoopmanError> {
        Self::from_spec_capped(spec, DEFAULT_DICTIONARY_CAP)
    }

    pub fn from_spec_capped(spec: DictionarySpec, cap: usize) -> Result<Self, KoopmanError> {
        let (input_dim, terms, standardize_requested) = match &spec {
            DictionarySpec::Identity { dim } => {
                if *dim == 0 {
                    return Err(KoopmanError::InvalidSpec("dimension must be >= 1".into()));
                }
                let terms = (0..*dim).map(|i| unit_exponent(*dim, i)).collect();
                (*dim, terms, false)
            }
            DictionarySpec::Monomial {
                dim,
                degree,
                include_constant,
                standardize,
            } => {
                if *dim == 0 || *degree == 0 {
                    return Err(KoopmanError::InvalidSpec(
                        "dimension and degree must be >= 1".into(),
                    ));
                }
                let mut terms: Vec<Vec<i32>> = Vec::new();
                if *include_constant {
                    terms.push(vec![0; *dim]);
                }
                for d in 1..=*degree {
                    enumerate_graded(*dim, d as i32, &mut terms);
                }
                (*dim, terms, *standardize)
            }
            DictionarySpec::MonomialSet {
                dim,
                exponents,
                standardize,
            } => {
                if *dim == 0 || exponents.is_empty() {
                    return Err(KoopmanError::InvalidSpec(
                        "need a positive dimension and at least one observable".into(),
                    ));
                }
                for e in exponents {
                    if e.len() != *dim {
                        return Err(KoopmanError::InvalidSpec(format!(
                            "exponent vector length {} does not match dimension {dim}",
                            e.len()
                        )));
                    }
                }
                (*dim, exponents.clone(), *standardize)
            }
        };
        let p = terms.len();
        if p > cap {
            return Err(KoopmanError::DimensionTooLarge { p, cap });
        }
        let coordinate_slots = locate_coordinate_slots(input_dim, &terms);
        Ok(Self {
            spec,
            input_dim,
            terms,
            coordinate_slots,
            standardize_requested,
            standardization: None,
        })
    }

    /// Request per-observable standardization; the parameters are fitted by
    /// [`fit_koopman`].
    pub fn with_standardization(mut self) -> Self {
        self.standardize_requested = true;
        self.spec = match self.spec {
            DictionarySpec::Identity { dim } => DictionarySpec::MonomialSet {
                dim,
                exponents: self.terms.clone(),
                standardize: true,
            },
            DictionarySpec::Monomial {
                dim,
                degree,
                include_constant,
                ..
            } => DictionarySpec::Monomial {
                dim,
                degree,
                include_constant,
                standardize: true,
            },
            DictionarySpec::MonomialSet { dim, exponents, .. } => DictionarySpec::MonomialSet {
                dim,
                exponents,
                standardize: true,
            },
        };
        self
    }

    /// Restore a dictionary (including fitted standardization) from its
    /// serialized parts.
    pub fn restore(
        spec: DictionarySpec,
        standardization: Option<Standardization>,
    ) -> Result<Self, KoopmanError> {
        let mut dict = Self::from_spec(spec)?;
        if let Some(s) = standardization {
            if s.means.len() != dict.output_dim() || s.stds.len() != dict.output_dim() {
                return Err(KoopmanError::InvalidSpec(
                    "standardization parameters do not match dictionary size".into(),
                ));
            }
            dict.standardization = Some(s);
        }
        Ok(dict)
    }

    pub fn spec(&self) -> &DictionarySpec {
        &self.spec
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// The lifted dimension p.
    pub fn output_dim(&self) -> usize {
        self.terms.len()
    }

    pub fn coordinate_slots(&self) -> Option<&[usize]> {
        self.coordinate_slots.as_deref()
    }

    /// Evaluate the raw observables (no standardization) at one state.
    fn eval_raw(&self, x: &[f64]) -> Result<Vec<f64>, KoopmanError> {
        if x.len() != self.input_dim {
            return Err(KoopmanError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        self.terms
            .iter()
            .enumerate()
            .map(|(idx, exps)| {
                let mut acc = 1.0;
                for (xj, &e) in x.iter().zip(exps) {
                    if e != 0 {
                        acc *= xj.powi(e);
                    }
                }
                if acc.is_finite() {
                    Ok(acc)
                } else {
                    Err(KoopmanError::NonFiniteObservable { index: idx })
                }
            })
            .collect()
    }

    /// Lift one state through the dictionary.
    pub fn lift_state(&self, x: &[f64]) -> Result<Vec<f64>, KoopmanError> {
        let raw = self.eval_raw(x)?;
        match (&self.standardization, self.standardize_requested) {
            (Some(s), _) => Ok(raw
                .iter()
                .zip(s.means.iter().zip(&s.stds))
                .map(|(v, (m, sd))| (v - m) / sd)
                .collect()),
            (None, true) => Err(KoopmanError::StandardizationNotFitted),
            (None, false) => Ok(raw),
        }
    }

    /// Project a lifted vector back to state coordinates (undoing
    /// standardization when present). Defined only when the dictionary
    /// contains the identity observables.
    pub fn decode(&self, y: &[f64]) -> Result<Vec<f64>, KoopmanError> {
        let slots = self
            .coordinate_slots
            .as_ref()
            .ok_or(KoopmanError::NoCoordinateSlots)?;
        if y.len() != self.output_dim() {
            return Err(KoopmanError::DimensionMismatch {
                expected: self.output_dim(),
                got: y.len(),
            });
        }
        Ok(slots
            .iter()
            .map(|&slot| match &self.standardization {
                Some(s) => y[slot] * s.stds[slot] + s.means[slot],
                None => y[slot],
            })
            .collect())
    }
}

fn unit_exponent(dim: usize, i: usize) -> Vec<i32> {
    let mut e = vec![0; dim];
    e[i] = 1;
    e
}

/// Multi-indexes of total degree `d` in descending lexicographic order, so
/// within one degree x1-heavy terms come first.
fn enumerate_graded(dim: usize, d: i32, out: &mut Vec<Vec<i32>>) {
    fn rec(prefix: &mut Vec<i32>, remaining: i32, slots: usize, out: &mut Vec<Vec<i32>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a);
            rec(prefix, remaining - a, slots - 1, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(dim), d, dim, out);
}

fn locate_coordinate_slots(dim: usize, terms: &[Vec<i32>]) -> Option<Vec<usize>> {
    let mut slots = Vec::with_capacity(dim);
    for i in 0..dim {
        let unit = unit_exponent(dim, i);
        let slot = terms.iter().position(|t| *t == unit)?;
        slots.push(slot);
    }
    Some(slots)
}

/// A dictionary plus the surrogate model fitted in the lifted space.
#[derive(Debug, Clone)]
pub struct KoopmanModel {
    pub dictionary: Dictionary,
    pub lifted_model: DmdModel,
}

/// Decoded prediction together with the lifted diagnostics.
#[derive(Debug, Clone)]
pub struct KoopmanPrediction {
    /// Decoded n-dimensional state.
    pub state: Vec<f64>,
    /// The underlying lifted-space prediction (p-dimensional).
    pub lifted: Prediction,
    /// Distance between the predicted nonlinear observables and the
    /// observables recomputed from the decoded state: how far the
    /// prediction drifted off the dictionary manifold.
    pub manifold_defect: f64,
}

/// All monomials `x1^a1 ... xn^an` with `1 <= sum(a) <= degree` in
/// graded-lexicographic order, plus the constant observable when requested.
pub fn monomial_dictionary(
    dim: usize,
    degree: u32,
    include_constant: bool,
) -> Result<Dictionary, KoopmanError> {
    Dictionary::monomial(dim, degree, include_constant)
}

/// Map every state of every run through the dictionary. The sampling
/// interval and start index carry over unchanged.
pub fn lift(dict: &Dictionary, data: &TrajectorySet) -> Result<TrajectorySet, KoopmanError> {
    let mut lifted_runs = Vec::with_capacity(data.trajectories().len());
    for t in data.trajectories() {
        let states = t
            .states()
            .iter()
            .map(|x| dict.lift_state(x))
            .collect::<Result<Vec<_>, _>>()?;
        lifted_runs.push(Trajectory::new(states)?);
    }
    Ok(TrajectorySet::new(
        lifted_runs,
        data.delta_k(),
        data.start_index(),
    )?)
}

/// Lift the data and fit the reduced operator in the lifted space. When the
/// dictionary requests standardization, the per-observable mean and standard
/// deviation are computed here over the predecessor snapshots.
pub fn fit_koopman(
    data: &TrajectorySet,
    dict: &Dictionary,
    policy: RankPolicy,
    mode_kind: ModeKind,
) -> Result<KoopmanModel, KoopmanError> {
    let mut dictionary = dict.clone();
    if dictionary.standardize_requested && dictionary.standardization.is_none() {
        dictionary.standardization = Some(fit_standardization(&dictionary, data)?);
    }
    let lifted = lift(&dictionary, data)?;
    let lifted_model = dmd::fit(&lifted, policy, mode_kind)?;
    Ok(KoopmanModel {
        dictionary,
        lifted_model,
    })
}

fn fit_standardization(
    dict: &Dictionary,
    data: &TrajectorySet,
) -> Result<Standardization, KoopmanError> {
    let p = dict.output_dim();
    let mut sums = vec![0.0; p];
    let mut sq_sums = vec![0.0; p];
    let mut count = 0usize;
    for t in data.trajectories() {
        // Mirror the snapshot matrix X: every sample except the run's last.
        for x in &t.states()[..t.len() - 1] {
            let raw = dict.eval_raw(x)?;
            for (i, v) in raw.iter().enumerate() {
                sums[i] += v;
                sq_sums[i] += v * v;
            }
            count += 1;
        }
    }
    let n = count as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let stds: Vec<f64> = sq_sums
        .iter()
        .zip(&means)
        .map(|(sq, m)| {
            let var = (sq / n - m * m).max(0.0);
            let sd = var.sqrt();
            // A (near-)constant observable cannot be scaled; leave it alone.
            if sd < 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(Standardization { means, stds })
}

/// Reconstruct the state at a lifted vector via the coordinate slots.
pub fn decode(dict: &Dictionary, y: &[f64]) -> Result<Vec<f64>, KoopmanError> {
    dict.decode(y)
}

/// Predict in the lifted space and decode. `index` is an absolute step count
/// when `continuous` is false and an original-units index otherwise, exactly
/// as in the plain predictions.
pub fn predict_koopman(
    model: &KoopmanModel,
    index: f64,
    continuous: bool,
) -> Result<KoopmanPrediction, KoopmanError> {
    let lifted = if continuous {
        dmd::predict_continuous(&model.lifted_model, index)?
    } else {
        dmd::predict_discrete(&model.lifted_model, index)?
    };
    let state = model.dictionary.decode(&lifted.state)?;
    let relift = model.dictionary.lift_state(&state)?;
    let slots = model.dictionary.coordinate_slots().unwrap_or(&[]);
    let manifold_defect = lifted
        .state
        .iter()
        .zip(&relift)
        .enumerate()
        .filter(|(i, _)| !slots.contains(i))
        .map(|(_, (a, b))| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(KoopmanPrediction {
        state,
        lifted,
        manifold_defect,
    })
}
