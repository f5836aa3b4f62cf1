//! Implementations behind the CLI subcommands: argument parsing glue, error
//! classification into exit codes, and stdout/stderr discipline (results on
//! stdout, warnings on stderr).

use crate::{CliError, DemoArgs, FitArgs, PredictArgs, SpectrumArgs};
use dmd_core::csv::{self, CsvError};
use dmd_core::dmd::{self, spectrum_report, DmdError, ModeKind, StabilityFlag};
use dmd_core::koopman::{fit_koopman, predict_koopman, Dictionary, KoopmanError};
use dmd_core::model::{
    input_digest, parse_rank_policy, rank_policy_string, AnyModel, ModelError, ModelFile,
    Provenance,
};
use dmd_core::numerics::NumericsError;
use dmd_core::svg::spectrum_svg;
use dmd_core::systems::{self, GeneratorFamily, GeneratorSpec, SystemsError};
use dmd_core::trajectory::TrajectorySet;
use dmd_core::RealMatrix;
use std::path::Path;

// ---------------------------------------------------------------------------
// Error classification
// ---------------------------------------------------------------------------

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn numerical_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn from_csv(e: CsvError) -> CliError {
    input_err(e)
}

fn from_dmd(e: DmdError) -> CliError {
    match e {
        DmdError::Trajectory(t) => input_err(t),
        DmdError::DimensionMismatch { .. } => input_err(e),
        other => numerical_err(other),
    }
}

fn from_koopman(e: KoopmanError) -> CliError {
    match e {
        KoopmanError::Dmd(d) => from_dmd(d),
        KoopmanError::Trajectory(t) => input_err(t),
        KoopmanError::InvalidSpec(_)
        | KoopmanError::DimensionMismatch { .. }
        | KoopmanError::DimensionTooLarge { .. } => input_err(e),
        other => numerical_err(other),
    }
}

fn from_model(e: ModelError) -> CliError {
    input_err(e)
}

fn from_systems(e: SystemsError) -> CliError {
    match e {
        SystemsError::InvalidSpec(_) | SystemsError::Trajectory(_) => input_err(e),
        other => numerical_err(other),
    }
}

// ---------------------------------------------------------------------------
// Shared parsing helpers
// ---------------------------------------------------------------------------

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad {what} value `{s}`")))
        })
        .collect()
}

fn parse_modes(text: &str) -> Result<ModeKind, CliError> {
    match text {
        "exact" => Ok(ModeKind::Exact),
        "projected" => Ok(ModeKind::Projected),
        "auto" => Ok(ModeKind::ExactWithFallback),
        other => Err(CliError::Input(format!(
            "unknown mode formulation `{other}` (use exact, projected, or auto)"
        ))),
    }
}

/// `identity`, `monomial:D[,const][,std]`, or `monomials:1,0;0,1;2,0[;std]`.
fn parse_dict(text: &str, dim: usize) -> Result<Option<Dictionary>, CliError> {
    if text == "identity" {
        return Ok(None);
    }
    if let Some(spec) = text.strip_prefix("monomial:") {
        let mut parts = spec.split(',');
        let degree: u32 = parts
            .next()
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| CliError::Input(format!("bad monomial degree in `{text}`")))?;
        let mut include_constant = false;
        let mut standardize = false;
        for flag in parts {
            match flag.trim() {
                "const" => include_constant = true,
                "std" => standardize = true,
                other => {
                    return Err(CliError::Input(format!(
                        "unknown dictionary flag `{other}`"
                    )))
                }
            }
        }
        let mut dict = Dictionary::monomial(dim, degree, include_constant).map_err(from_koopman)?;
        if standardize {
            dict = dict.with_standardization();
        }
        return Ok(Some(dict));
    }
    if let Some(spec) = text.strip_prefix("monomials:") {
        let mut exponents = Vec::new();
        let mut standardize = false;
        for group in spec.split(';') {
            let group = group.trim();
            if group == "std" {
                standardize = true;
                continue;
            }
            let exps = group
                .split(',')
                .map(|e| {
                    e.trim().parse::<i32>().map_err(|_| {
                        CliError::Input(format!("bad exponent `{e}` in dictionary spec"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            exponents.push(exps);
        }
        let mut dict = Dictionary::from_monomials(dim, exponents).map_err(from_koopman)?;
        if standardize {
            dict = dict.with_standardization();
        }
        return Ok(Some(dict));
    }
    Err(CliError::Input(format!(
        "unknown dictionary `{text}` (use identity, monomial:D, or monomials:...)"
    )))
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let policy = parse_rank_policy(&args.rank).map_err(CliError::Input)?;
    let mode_kind = parse_modes(&args.modes)?;

    let mut all_bytes = Vec::new();
    let mut blocks = Vec::new();
    for path in &args.inputs {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))?;
        blocks.extend(csv::parse_blocks(&text).map_err(from_csv)?);
        all_bytes.extend_from_slice(&bytes);
    }
    if let Some(select) = &args.select_indices {
        let wanted = parse_f64_list(select, "select index")?;
        blocks = csv::select_indices(&blocks, &wanted).map_err(from_csv)?;
    }
    let data = csv::assemble(&blocks).map_err(from_csv)?;

    let provenance = Provenance {
        input_digest: input_digest(&all_bytes),
        rank_policy: rank_policy_string(policy),
    };
    let dictionary = parse_dict(&args.dict, data.dim())?;
    let model = match dictionary {
        None => AnyModel::Dmd(dmd::fit(&data, policy, mode_kind).map_err(from_dmd)?),
        Some(dict) => {
            AnyModel::Koopman(fit_koopman(&data, &dict, policy, mode_kind).map_err(from_koopman)?)
        }
    };

    let file = ModelFile::from_any(&model, provenance).map_err(from_model)?;
    file.save(&args.output)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.output.display())))?;

    let core = model.dmd();
    match &model {
        AnyModel::Dmd(_) => println!("kind: dmd"),
        AnyModel::Koopman(k) => println!(
            "kind: koopman (lifted dimension p = {})",
            k.dictionary.output_dim()
        ),
    }
    println!(
        "n: {}  rank: {}  delta_k: {}  start_index: {}",
        model.state_dim(),
        core.rank,
        core.delta_k,
        core.start_index
    );
    println!("eigenvalues:");
    let report = spectrum_report(core);
    for (i, e) in report.entries.iter().enumerate() {
        println!(
            "  lambda_{i} = {:.12}{:+.12}i  |lambda_{i}| = {:.12}",
            e.eigenvalue.re, e.eigenvalue.im, e.magnitude
        );
    }
    println!(
        "dominant |lambda| = {:.12}  stability: {}",
        report.entries[report.dominant_index].magnitude,
        flag_name(report.flag)
    );
    println!("fit residual = {:e}", core.diagnostics.fit_residual);
    println!("model written to {}", args.output.display());

    emit_model_warnings(core);
    Ok(())
}

fn flag_name(flag: StabilityFlag) -> &'static str {
    match flag {
        StabilityFlag::Stable => "stable",
        StabilityFlag::Marginal => "marginal",
        StabilityFlag::Exploding => "exploding",
    }
}

fn emit_model_warnings(core: &dmd_core::DmdModel) {
    if core.diagnostics.defective_warning {
        eprintln!(
            "warning: eigenvector basis is nearly defective (condition {:.3e}); \
             mode decomposition may be unreliable",
            core.diagnostics.eigenvector_condition
        );
    }
    if core.diagnostics.branch_warning {
        eprintln!(
            "warning: an eigenvalue lies on the negative real axis; discrete and \
             continuous predictions may disagree (principal-branch ambiguity)"
        );
    }
    let report = spectrum_report(core);
    if report.past_growth_warning {
        eprintln!(
            "note: eigenvalues inside the unit circle (magnitude spread {:.3e}); \
             predictions into the past are ill-conditioned",
            report.magnitude_spread
        );
    }
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)
        .map_err(from_model)?
        .into_model()
        .map_err(from_model)?;
    let indexes = parse_f64_list(&args.at, "index")?;
    if indexes.is_empty() {
        return Err(CliError::Input("no indexes given".into()));
    }
    let continuous = match args.mode.as_str() {
        "discrete" => false,
        "continuous" => true,
        other => {
            return Err(CliError::Input(format!(
                "unknown prediction mode `{other}` (use discrete or continuous)"
            )))
        }
    };

    let core = model.dmd();
    if core.diagnostics.branch_warning {
        eprintln!(
            "warning: |Im(omega) * delta_k| reaches pi for some eigenvalue; \
             principal-branch predictions at non-integer steps are ambiguous"
        );
    }

    let mut rows = Vec::with_capacity(indexes.len());
    let mut max_defect = 0.0f64;
    for &t in &indexes {
        let arg = if continuous {
            t
        } else {
            let steps_from_anchor = (t - core.start_index) / core.delta_k;
            let rounded = steps_from_anchor.round();
            if (steps_from_anchor - rounded).abs() > 1e-9 * steps_from_anchor.abs().max(1.0) {
                return Err(CliError::Input(format!(
                    "index {t} is not an integer number of steps from {} (delta_k = {}); \
                     use --mode continuous",
                    core.start_index, core.delta_k
                )));
            }
            rounded + core.start_index / core.delta_k
        };
        let (state, imag) = match &model {
            AnyModel::Dmd(m) => {
                let p = if continuous {
                    dmd::predict_continuous(m, arg).map_err(from_dmd)?
                } else {
                    dmd::predict_discrete(m, arg).map_err(from_dmd)?
                };
                (p.state, p.imag_residual)
            }
            AnyModel::Koopman(k) => {
                let p = predict_koopman(k, arg, continuous).map_err(from_koopman)?;
                max_defect = max_defect.max(p.manifold_defect);
                (p.state, p.lifted.imag_residual)
            }
        };
        rows.push((t, state, imag));
    }
    if let AnyModel::Koopman(_) = &model {
        eprintln!("note: max dictionary-manifold defect over predictions: {max_defect:e}");
    }

    let text = csv::write_predictions(&rows, model.state_dim());
    write_or_print(args.output.as_deref(), &text)
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

pub fn spectrum(args: &SpectrumArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)
        .map_err(from_model)?
        .into_model()
        .map_err(from_model)?;
    let core = model.dmd();
    let report = spectrum_report(core);

    println!("idx  re                im                |lambda|          arg               omega_re          omega_im");
    for (i, e) in report.entries.iter().enumerate() {
        let (wr, wi) = e
            .omega
            .map(|w| (format!("{:.12}", w.re), format!("{:.12}", w.im)))
            .unwrap_or_else(|| ("-".into(), "-".into()));
        println!(
            "{i:<4} {:<17.12} {:<17.12} {:<17.12} {:<17.12} {wr:<17} {wi}",
            e.eigenvalue.re, e.eigenvalue.im, e.magnitude, e.phase
        );
    }
    println!(
        "dominant: lambda_{} (|lambda| = {:.12})",
        report.dominant_index, report.entries[report.dominant_index].magnitude
    );
    println!("stability: {}", flag_name(report.flag));
    emit_model_warnings(core);

    if let Some(path) = &args.svg {
        std::fs::write(path, spectrum_svg(&report))
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        println!("spectrum drawn to {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

fn parse_matrix(text: &str) -> Result<RealMatrix, CliError> {
    let rows = text
        .split(';')
        .map(|row| parse_f64_list(row, "matrix entry"))
        .collect::<Result<Vec<_>, _>>()?;
    RealMatrix::from_rows(&rows).map_err(|e: NumericsError| input_err(e))
}

pub fn demo(args: &DemoArgs) -> Result<(), CliError> {
    let family = match args.family.as_str() {
        "linear" => {
            let matrix = match (&args.matrix, &args.eigs) {
                (Some(m), _) => parse_matrix(m)?,
                (None, Some(eigs)) => {
                    let diag = parse_f64_list(eigs, "eigenvalue")?;
                    let n = diag.len();
                    RealMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
                }
                (None, None) => {
                    return Err(CliError::Input(
                        "demo linear needs --eigs or --matrix".into(),
                    ))
                }
            };
            GeneratorFamily::LinearDiscrete { matrix }
        }
        "continuous" => {
            let matrix = args
                .matrix
                .as_deref()
                .ok_or_else(|| CliError::Input("demo continuous needs --matrix".into()))?;
            GeneratorFamily::LinearContinuous {
                matrix: parse_matrix(matrix)?,
            }
        }
        "randomwalk" => GeneratorFamily::NoisyRandomWalk {
            sigma: args.sigma.unwrap_or(0.01),
            seed: args.seed,
        },
        "slowmanifold" => GeneratorFamily::SlowManifold {
            lambda: args.lambda.unwrap_or(0.9),
            mu: args.mu.unwrap_or(0.5),
        },
        other => {
            return Err(CliError::Input(format!(
            "unknown demo family `{other}` (use linear, continuous, randomwalk, or slowmanifold)"
        )))
        }
    };
    let dim = match &family {
        GeneratorFamily::LinearDiscrete { matrix }
        | GeneratorFamily::LinearContinuous { matrix } => matrix.rows(),
        GeneratorFamily::SlowManifold { .. } => 2,
        GeneratorFamily::NoisyRandomWalk { .. } => match &args.x0 {
            Some(x0) => parse_f64_list(x0, "x0")?.len(),
            None => 1,
        },
    };
    let x0 = match &args.x0 {
        Some(text) => parse_f64_list(text, "x0")?,
        None => vec![1.0; dim],
    };
    let spec = GeneratorSpec {
        family,
        x0,
        steps: args.steps,
        delta_k: args.delta_k,
        start_index: args.start_index,
    };
    let set: TrajectorySet = systems::generate(&spec).map_err(from_systems)?;
    write_or_print(args.output.as_deref(), &csv::write_trajectories(&set))
}
