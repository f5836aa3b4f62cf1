//! wasm-bindgen exports for the browser demo. Each operation takes a JSON
//! request string and returns a JSON (or CSV) string; see `logic` for the
//! request schemas. The heavy lifting lives in `dmd-core`, which is pure
//! Rust and compiles unchanged to wasm32-unknown-unknown.

pub mod logic;

use wasm_bindgen::prelude::*;

/// Generate a synthetic system, fit a model, and return samples, forecasts,
/// the eigenvalue spectrum, and ready-to-inject SVG charts.
#[wasm_bindgen]
pub fn explore_demo(request_json: &str) -> Result<String, JsValue> {
    logic::explore(request_json).map_err(|e| JsValue::from_str(&e))
}

/// Fit a model to pasted trajectory CSV and return the same response shape
/// as `explore_demo` (without the closed-form reference curve).
#[wasm_bindgen]
pub fn fit_csv(request_json: &str) -> Result<String, JsValue> {
    logic::fit_csv(request_json).map_err(|e| JsValue::from_str(&e))
}

/// Predict states from a saved model file at the given indexes; returns
/// prediction CSV text.
#[wasm_bindgen]
pub fn predict_csv(request_json: &str) -> Result<String, JsValue> {
    logic::predict_csv(request_json).map_err(|e| JsValue::from_str(&e))
}
