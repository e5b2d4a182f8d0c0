//! Browser bindings. Each exported function returns a JSON string; the
//! plain Rust versions are public so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ftcdim::dimension::spectral_radius_at;
use ftcdim::ftc::Limits;
use ftcdim::model_io::{lau_ngai, parse_model, preset, ModelFile};
use ftcdim::render::{chart_push, generate_points, ChartMap};
use ftcdim::report::{analyze, AnalyzeReport};
use ftcdim::QuadScalar;

/// Small enough to keep the page responsive.
const DEMO_LIMITS: Limits = Limits {
    max_types: 128,
    max_level: 24,
    vertex_budget: 200_000,
    verify_depth: 2,
};
const POINT_BUDGET: usize = 200_000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn preset_json(name: &str) -> Result<String, String> {
    Ok(preset(name).map_err(err)?.render())
}

/// Points of a preset pushed through `chart` ("identity", "sphere" or
/// "torus"; empty means the preset's own chart).
pub fn render_points(name: &str, chart: &str, max_diameter: f64) -> Result<String, String> {
    let model = preset(name).map_err(err)?;
    let system = model.build_system().map_err(err)?;
    let chart: ChartMap = if chart.is_empty() {
        model.chart()
    } else {
        chart.parse().map_err(err)?
    };
    let points = generate_points(&system, max_diameter, POINT_BUDGET).map_err(err)?;
    let pushed = chart_push(&points, chart).map_err(err)?;
    let coords: Vec<&[f64]> = pushed.iter().map(|p| p.coords.as_slice()).collect();
    let components: Vec<usize> = pushed.iter().map(|p| p.component).collect();
    Ok(json!({ "chart": chart, "points": coords, "components": components }).to_string())
}

/// α for the four-map overlapping family with `ρ = base^m`, `r = base^n`.
pub fn lau_ngai_dimension(base_den: u32, m: u32, n: u32) -> Result<String, String> {
    if base_den < 2 || m == 0 || n == 0 {
        return Err("need base 1/k with k ≥ 2 and positive exponents".into());
    }
    let base = QuadScalar::ratio(1, i64::from(base_den));
    let (rho, r) = (base.pow(m), base.pow(n));
    let model = lau_ngai(rho.clone(), r.clone()).map_err(err)?;
    let a = analyze(&model, &DEMO_LIMITS, 1e-12).map_err(err)?;
    Ok(json!({
        "rho": rho.to_string(),
        "r": r.to_string(),
        "types": a.automaton.len(),
        "alpha": a.dimension.alpha,
    })
    .to_string())
}

fn lambda_curve(model: &ModelFile, samples: usize) -> Result<Value, String> {
    let a = analyze(model, &DEMO_LIMITS, 1e-12).map_err(err)?;
    let hi = (2.0 * a.dimension.alpha).max(1.0);
    let samples = samples.clamp(2, 1000);
    let curve = (0..samples)
        .map(|k| {
            let x = hi * k as f64 / (samples - 1) as f64;
            spectral_radius_at(&a.matrix, x)
                .map(|l| [x, l])
                .map_err(err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = AnalyzeReport::new(model, &a).map_err(err)?;
    Ok(json!({ "alpha": a.dimension.alpha, "curve": curve, "report": report.to_text() }))
}

/// Full text report of a pasted model plus `λ_α` sampled on `[0, 2α]`.
pub fn analyze_model(text: &str, samples: usize) -> Result<String, String> {
    let model = parse_model(text).map_err(err)?;
    Ok(lambda_curve(&model, samples)?.to_string())
}

#[wasm_bindgen(js_name = presetJson)]
pub fn preset_json_js(name: &str) -> Result<String, JsValue> {
    preset_json(name).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = renderPoints)]
pub fn render_points_js(name: &str, chart: &str, max_diameter: f64) -> Result<String, JsValue> {
    render_points(name, chart, max_diameter).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = lauNgaiDimension)]
pub fn lau_ngai_dimension_js(base_den: u32, m: u32, n: u32) -> Result<String, JsValue> {
    lau_ngai_dimension(base_den, m, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = analyzeModel)]
pub fn analyze_model_js(text: &str, samples: usize) -> Result<String, JsValue> {
    analyze_model(text, samples).map_err(|e| JsValue::from_str(&e))
}
