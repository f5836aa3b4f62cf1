//! The demo's pure request/response layer. Everything here takes and
//! returns JSON strings so the wasm boundary stays trivial, and it all runs
//! (and is tested) on the host as ordinary Rust.

use dmd_core::csv;
use dmd_core::dmd::{self, spectrum_report, ModeKind, StabilityFlag};
use dmd_core::koopman::{fit_koopman, predict_koopman, Dictionary};
use dmd_core::model::{
    input_digest, parse_rank_policy, rank_policy_string, AnyModel, ModelFile, Provenance,
};
use dmd_core::svg::spectrum_svg;
use dmd_core::systems::{self, GeneratorFamily, GeneratorSpec};
use dmd_core::trajectory::TrajectorySet;
use dmd_core::{RankPolicy, RealMatrix};
use serde::{Deserialize, Serialize};

pub type DemoResult<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
pub struct ExploreRequest {
    pub family: String,
    #[serde(default)]
    pub eigs: Vec<f64>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub steps: usize,
    #[serde(default = "default_delta_k")]
    pub delta_k: f64,
    #[serde(default)]
    pub start_index: f64,
    #[serde(default = "default_rank")]
    pub rank: String,
    #[serde(default = "default_modes")]
    pub modes: String,
    #[serde(default = "default_dict")]
    pub dict: String,
    /// How far past the data to forecast, as a multiple of the data span.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_sigma() -> f64 {
    0.01
}
fn default_lambda() -> f64 {
    0.9
}
fn default_mu() -> f64 {
    0.5
}
fn default_delta_k() -> f64 {
    1.0
}
fn default_rank() -> String {
    "tol:1e-10".into()
}
fn default_modes() -> String {
    "auto".into()
}
fn default_dict() -> String {
    "identity".into()
}
fn default_horizon() -> f64 {
    0.6
}

#[derive(Deserialize)]
pub struct FitCsvRequest {
    pub csv: String,
    #[serde(default = "default_rank")]
    pub rank: String,
    #[serde(default = "default_modes")]
    pub modes: String,
    #[serde(default = "default_dict")]
    pub dict: String,
    #[serde(default)]
    pub select_indices: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

#[derive(Deserialize)]
pub struct PredictRequest {
    pub model_json: String,
    pub indices: Vec<f64>,
    #[serde(default)]
    pub continuous: bool,
}

#[derive(Serialize)]
pub struct EigenvalueOut {
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
    pub omega_re: Option<f64>,
    pub omega_im: Option<f64>,
}

#[derive(Serialize)]
pub struct FitResponse {
    pub kind: String,
    pub n: usize,
    pub rank: usize,
    pub delta_k: f64,
    pub start_index: f64,
    pub eigenvalues: Vec<EigenvalueOut>,
    pub stability: String,
    pub fit_residual: f64,
    pub warnings: Vec<String>,
    /// Observed samples as [index, x1..xn] rows.
    pub samples: Vec<Vec<f64>>,
    /// Model forecasts as [index, x1..xn] rows over a dense grid.
    pub predictions: Vec<Vec<f64>>,
    /// Closed-form reference where one exists (explore mode only).
    pub truth: Vec<Vec<f64>>,
    pub spectrum_svg: String,
    pub chart_svg: String,
    pub model_json: String,
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

pub fn explore(request_json: &str) -> DemoResult<String> {
    let req: ExploreRequest = serde_json::from_str(request_json).map_err(err)?;
    let family = match req.family.as_str() {
        "linear" => {
            let matrix = match &req.matrix {
                Some(rows) => RealMatrix::from_rows(rows).map_err(err)?,
                None => {
                    if req.eigs.is_empty() {
                        return Err("linear family needs `eigs` or `matrix`".into());
                    }
                    let n = req.eigs.len();
                    RealMatrix::from_fn(n, n, |i, j| if i == j { req.eigs[i] } else { 0.0 })
                }
            };
            GeneratorFamily::LinearDiscrete { matrix }
        }
        "continuous" => {
            let rows = req
                .matrix
                .as_ref()
                .ok_or("continuous family needs `matrix`")?;
            GeneratorFamily::LinearContinuous {
                matrix: RealMatrix::from_rows(rows).map_err(err)?,
            }
        }
        "randomwalk" => GeneratorFamily::NoisyRandomWalk {
            sigma: req.sigma,
            seed: req.seed,
        },
        "slowmanifold" => GeneratorFamily::SlowManifold {
            lambda: req.lambda,
            mu: req.mu,
        },
        other => return Err(format!("unknown family `{other}`")),
    };
    let dim = match &family {
        GeneratorFamily::LinearDiscrete { matrix }
        | GeneratorFamily::LinearContinuous { matrix } => matrix.rows(),
        GeneratorFamily::SlowManifold { .. } => 2,
        GeneratorFamily::NoisyRandomWalk { .. } => req.x0.as_ref().map_or(1, Vec::len),
    };
    let spec = GeneratorSpec {
        family,
        x0: req.x0.clone().unwrap_or_else(|| vec![1.0; dim]),
        steps: req.steps,
        delta_k: req.delta_k,
        start_index: req.start_index,
    };
    let data = systems::generate(&spec).map_err(err)?;
    let digest = input_digest(request_json.as_bytes());
    let mut response =
        fit_and_render(&data, &req.rank, &req.modes, &req.dict, req.horizon, digest)?;

    // Closed-form reference curve over the prediction window, when the
    // family has one.
    let span = req.steps as f64 * req.delta_k;
    let t_end = req.start_index + span * (1.0 + req.horizon);
    let points = (req.steps * 3).clamp(30, 240);
    for i in 0..=points {
        let t = req.start_index + (t_end - req.start_index) * i as f64 / points as f64;
        if let Ok(state) = systems::true_state(&spec, t) {
            let mut row = vec![t];
            row.extend(state);
            response.truth.push(row);
        }
    }
    let chart = render_chart(&response.samples, &response.predictions, &response.truth);
    response.chart_svg = chart;
    serde_json::to_string(&response).map_err(err)
}

pub fn fit_csv(request_json: &str) -> DemoResult<String> {
    let req: FitCsvRequest = serde_json::from_str(request_json).map_err(err)?;
    let mut blocks = csv::parse_blocks(&req.csv).map_err(err)?;
    if let Some(wanted) = &req.select_indices {
        blocks = csv::select_indices(&blocks, wanted).map_err(err)?;
    }
    let data = csv::assemble(&blocks).map_err(err)?;
    let digest = input_digest(req.csv.as_bytes());
    let mut response =
        fit_and_render(&data, &req.rank, &req.modes, &req.dict, req.horizon, digest)?;
    let chart = render_chart(&response.samples, &response.predictions, &response.truth);
    response.chart_svg = chart;
    serde_json::to_string(&response).map_err(err)
}

pub fn predict_csv(request_json: &str) -> DemoResult<String> {
    let req: PredictRequest = serde_json::from_str(request_json).map_err(err)?;
    let model = ModelFile::from_json(&req.model_json)
        .map_err(err)?
        .into_model()
        .map_err(err)?;
    let core = model.dmd();
    let mut rows = Vec::with_capacity(req.indices.len());
    for &t in &req.indices {
        let arg = if req.continuous {
            t
        } else {
            let steps = (t - core.start_index) / core.delta_k;
            let rounded = steps.round();
            if (steps - rounded).abs() > 1e-9 * steps.abs().max(1.0) {
                return Err(format!(
                    "index {t} is not an integer number of steps; use continuous mode"
                ));
            }
            rounded + core.start_index / core.delta_k
        };
        let (state, imag) = predict_any(&model, arg, req.continuous)?;
        rows.push((t, state, imag));
    }
    Ok(csv::write_predictions(&rows, model.state_dim()))
}

// ---------------------------------------------------------------------------
// Shared fitting + rendering
// ---------------------------------------------------------------------------

fn parse_dict_text(text: &str, dim: usize) -> DemoResult<Option<Dictionary>> {
    if text == "identity" {
        return Ok(None);
    }
    if let Some(spec) = text.strip_prefix("monomial:") {
        let mut parts = spec.split(',');
        let degree: u32 = parts
            .next()
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| format!("bad monomial degree in `{text}`"))?;
        let mut include_constant = false;
        let mut standardize = false;
        for flag in parts {
            match flag.trim() {
                "const" => include_constant = true,
                "std" => standardize = true,
                other => return Err(format!("unknown dictionary flag `{other}`")),
            }
        }
        let mut dict = Dictionary::monomial(dim, degree, include_constant).map_err(err)?;
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
                    e.trim()
                        .parse::<i32>()
                        .map_err(|_| format!("bad exponent `{e}`"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            exponents.push(exps);
        }
        let mut dict = Dictionary::from_monomials(dim, exponents).map_err(err)?;
        if standardize {
            dict = dict.with_standardization();
        }
        return Ok(Some(dict));
    }
    Err(format!("unknown dictionary `{text}`"))
}

fn predict_any(model: &AnyModel, arg: f64, continuous: bool) -> DemoResult<(Vec<f64>, f64)> {
    match model {
        AnyModel::Dmd(m) => {
            let p = if continuous {
                dmd::predict_continuous(m, arg).map_err(err)?
            } else {
                dmd::predict_discrete(m, arg).map_err(err)?
            };
            Ok((p.state, p.imag_residual))
        }
        AnyModel::Koopman(k) => {
            let p = predict_koopman(k, arg, continuous).map_err(err)?;
            Ok((p.state, p.lifted.imag_residual))
        }
    }
}

fn fit_and_render(
    data: &TrajectorySet,
    rank: &str,
    modes: &str,
    dict: &str,
    horizon: f64,
    digest: String,
) -> DemoResult<FitResponse> {
    let policy: RankPolicy = parse_rank_policy(rank)?;
    let mode_kind = match modes {
        "exact" => ModeKind::Exact,
        "projected" => ModeKind::Projected,
        "auto" => ModeKind::ExactWithFallback,
        other => return Err(format!("unknown mode formulation `{other}`")),
    };
    let model = match parse_dict_text(dict, data.dim())? {
        None => AnyModel::Dmd(dmd::fit(data, policy, mode_kind).map_err(err)?),
        Some(d) => AnyModel::Koopman(fit_koopman(data, &d, policy, mode_kind).map_err(err)?),
    };
    let core = model.dmd();
    let report = spectrum_report(core);

    let mut warnings = Vec::new();
    if core.diagnostics.defective_warning {
        warnings.push(format!(
            "eigenvector basis nearly defective (condition {:.3e})",
            core.diagnostics.eigenvector_condition
        ));
    }
    if core.diagnostics.branch_warning {
        warnings
            .push("eigenvalue on the negative real axis: continuous predictions ambiguous".into());
    }
    if report.past_growth_warning {
        warnings.push(format!(
            "eigenvalues inside the unit circle (spread {:.3e}): backward prediction ill-conditioned",
            report.magnitude_spread
        ));
    }

    // Observed samples in [index, x1..] rows.
    let mut samples = Vec::new();
    for (t_idx, t) in data.trajectories().iter().enumerate() {
        let start = if t_idx == 0 { data.start_index() } else { 0.0 };
        for (m, s) in t.states().iter().enumerate() {
            let mut row = vec![start + m as f64 * data.delta_k()];
            row.extend_from_slice(s);
            samples.push(row);
        }
    }

    // Forecast over a dense grid covering the data plus the horizon. Fall
    // back to integer steps when the spectrum has a zero eigenvalue (no
    // continuous representation).
    let span = (data.pair_count() + data.trajectories().len()) as f64 * data.delta_k();
    let t0 = data.start_index();
    let t_end = t0 + span * (1.0 + horizon);
    let mut predictions = Vec::new();
    let dense_points = 160usize;
    let zero_free = core.eigenvalues.iter().all(|l| l.norm() > 0.0);
    if zero_free {
        for i in 0..=dense_points {
            let t = t0 + (t_end - t0) * i as f64 / dense_points as f64;
            if let Ok((state, _)) = predict_any(&model, t, true) {
                let mut row = vec![t];
                row.extend(state);
                predictions.push(row);
            }
        }
    } else {
        let steps = ((t_end - t0) / data.delta_k()).ceil() as usize;
        for m in 0..=steps {
            let k = t0 / data.delta_k() + m as f64;
            if let Ok((state, _)) = predict_any(&model, k, false) {
                let mut row = vec![k * data.delta_k()];
                row.extend(state);
                predictions.push(row);
            }
        }
    }

    let provenance = Provenance {
        input_digest: digest,
        rank_policy: rank_policy_string(policy),
    };
    let model_file = ModelFile::from_any(&model, provenance).map_err(err)?;
    let model_json = model_file.to_json().map_err(err)?;

    Ok(FitResponse {
        kind: match &model {
            AnyModel::Dmd(_) => "dmd".into(),
            AnyModel::Koopman(_) => "koopman".into(),
        },
        n: model.state_dim(),
        rank: core.rank,
        delta_k: core.delta_k,
        start_index: core.start_index,
        eigenvalues: report
            .entries
            .iter()
            .map(|e| EigenvalueOut {
                re: e.eigenvalue.re,
                im: e.eigenvalue.im,
                magnitude: e.magnitude,
                omega_re: e.omega.map(|w| w.re),
                omega_im: e.omega.map(|w| w.im),
            })
            .collect(),
        stability: match report.flag {
            StabilityFlag::Stable => "stable".into(),
            StabilityFlag::Marginal => "marginal".into(),
            StabilityFlag::Exploding => "exploding".into(),
        },
        fit_residual: core.diagnostics.fit_residual,
        warnings,
        samples,
        predictions,
        truth: Vec::new(),
        spectrum_svg: spectrum_svg(&report),
        chart_svg: String::new(),
        model_json,
    })
}

// ---------------------------------------------------------------------------
// Trajectory chart
// ---------------------------------------------------------------------------

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Observed samples as dots, forecasts as solid polylines, the closed-form
/// reference as a dashed line; one color per state component.
fn render_chart(samples: &[Vec<f64>], predictions: &[Vec<f64>], truth: &[Vec<f64>]) -> String {
    let width = 680.0;
    let height = 340.0;
    let margin = 34.0;
    let all_rows = samples.iter().chain(predictions).chain(truth);
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    let mut n = 0usize;
    for row in all_rows {
        t_min = t_min.min(row[0]);
        t_max = t_max.max(row[0]);
        n = n.max(row.len() - 1);
        for &v in &row[1..] {
            v_min = v_min.min(v);
            v_max = v_max.max(v);
        }
    }
    if !(t_min.is_finite() && v_min.is_finite()) || t_max <= t_min {
        return String::from(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"340\"/>",
        );
    }
    if v_max <= v_min {
        v_max = v_min + 1.0;
    }
    let pad = (v_max - v_min) * 0.08;
    let (v_min, v_max) = (v_min - pad, v_max + pad);
    let sx = move |t: f64| margin + (t - t_min) / (t_max - t_min) * (width - 2.0 * margin);
    let sy =
        move |v: f64| height - margin - (v - v_min) / (v_max - v_min) * (height - 2.0 * margin);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    ));
    // Zero line when visible.
    if v_min < 0.0 && v_max > 0.0 {
        s.push_str(&format!(
            "<line x1=\"{margin}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            sy(0.0),
            width - margin,
            sy(0.0)
        ));
    }
    for comp in 0..n {
        let color = PALETTE[comp % PALETTE.len()];
        if !predictions.is_empty() {
            let pts: Vec<String> = predictions
                .iter()
                .filter(|r| r.len() > comp + 1)
                .map(|r| format!("{:.2},{:.2}", sx(r[0]), sy(r[comp + 1])))
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                pts.join(" ")
            ));
        }
        if !truth.is_empty() {
            let pts: Vec<String> = truth
                .iter()
                .filter(|r| r.len() > comp + 1)
                .map(|r| format!("{:.2},{:.2}", sx(r[0]), sy(r[comp + 1])))
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" \
                 stroke-dasharray=\"5 4\" opacity=\"0.7\"/>\n",
                pts.join(" ")
            ));
        }
        for r in samples.iter().filter(|r| r.len() > comp + 1) {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.9\"/>\n",
                sx(r[0]),
                sy(r[comp + 1])
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explore_linear_round_trip() {
        let req = r#"{"family":"linear","eigs":[0.9,0.5],"steps":10,"rank":"fixed:2"}"#;
        let out = explore(req).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["kind"], "dmd");
        assert_eq!(v["rank"], 2);
        assert_eq!(v["stability"], "stable");
        let mags: Vec<f64> = v["eigenvalues"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["magnitude"].as_f64().unwrap())
            .collect();
        assert!((mags[0] - 0.9).abs() < 1e-8);
        assert!((mags[1] - 0.5).abs() < 1e-8);
        assert!(v["spectrum_svg"].as_str().unwrap().starts_with("<svg"));
        assert!(v["chart_svg"].as_str().unwrap().starts_with("<svg"));
        assert_eq!(v["samples"].as_array().unwrap().len(), 11);
        assert!(!v["truth"].as_array().unwrap().is_empty());
    }

    #[test]
    fn explore_slow_manifold_with_dictionary() {
        let req = r#"{"family":"slowmanifold","lambda":0.9,"mu":0.5,"x0":[1.0,0.5],
                      "steps":15,"rank":"fixed:3","dict":"monomials:1,0;0,1;2,0"}"#;
        let out = explore(req).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["kind"], "koopman");
        let mags: Vec<f64> = v["eigenvalues"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["magnitude"].as_f64().unwrap())
            .collect();
        for target in [0.9, 0.81, 0.5] {
            assert!(
                mags.iter().any(|m| (m - target).abs() < 1e-6),
                "{target} in {mags:?}"
            );
        }
    }

    #[test]
    fn fit_csv_and_predict_from_returned_model() {
        let csv = "index,x1\n0,1\n1,2\n2,4\n3,8\n";
        let req = serde_json::json!({ "csv": csv, "rank": "fixed:1" }).to_string();
        let out = fit_csv(&req).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["rank"], 1);
        assert_eq!(v["stability"], "exploding");
        let model_json = v["model_json"].as_str().unwrap();
        let pred_req = serde_json::json!({
            "model_json": model_json,
            "indices": [5.0],
            "continuous": false,
        })
        .to_string();
        let csv_out = predict_csv(&pred_req).unwrap();
        let line = csv_out.lines().nth(1).unwrap();
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((value - 32.0).abs() < 1e-9, "{csv_out}");
    }

    #[test]
    fn bad_requests_are_reported_as_strings() {
        assert!(explore("{}").is_err());
        assert!(explore(r#"{"family":"nope","steps":5}"#).is_err());
        let bad_csv = serde_json::json!({ "csv": "index,x1\n0,1\n0.5,2\n1,3\n2,4\n" }).to_string();
        let e = fit_csv(&bad_csv).unwrap_err();
        assert!(
            e.contains("--select-indices") || e.contains("irregular"),
            "{e}"
        );
    }

    #[test]
    fn noisy_walk_explore_reports_near_unit_eigenvalue() {
        let req = r#"{"family":"randomwalk","sigma":0.01,"seed":7,"steps":199,"rank":"fixed:1"}"#;
        let out = explore(req).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let mag = v["eigenvalues"][0]["magnitude"].as_f64().unwrap();
        assert!((mag - 1.0).abs() < 0.05, "eigenvalue {mag}");
    }
}
