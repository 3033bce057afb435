//! Browser bindings: a head-to-head run of both search modes, a 2-D slice of
//! a benchmark landscape, and PCA on user-placed points.
//!
//! Every function returns JSON text so the page needs no generated glue
//! beyond `wasm-bindgen`'s own.

use mses::bench::{BaseFunction, Objective, Problem, Structure};
use mses::engine::{self, MsesConfig};
use mses::linalg::{columns_to_matrix, matrix_to_columns, pca_fit, pca_project, pca_reconstruct};
use mses::optimizers::OptimizerParams;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest budget accepted from the page, to keep the tab responsive.
pub const MAX_DEMO_FES: u64 = 200_000;
pub const MAX_DEMO_DIM: usize = 200;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json(value: &impl Serialize) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(fail)
}

#[derive(Serialize)]
struct Catalog {
    structures: Vec<&'static str>,
    bases: Vec<&'static str>,
}

/// Structure and base-function names usable in problem ids.
#[wasm_bindgen]
pub fn catalog() -> Result<String, JsError> {
    to_json(&Catalog {
        structures: Structure::ALL.iter().map(|s| s.name()).collect(),
        bases: BaseFunction::ALL.iter().map(|b| b.name()).collect(),
    })
}

#[derive(Serialize)]
struct Curve {
    best: f64,
    fe_used: u64,
    generations: u64,
    /// `[fe, best]` pairs.
    points: Vec<(u64, f64)>,
}

#[derive(Serialize)]
struct Comparison {
    problem: String,
    dim: usize,
    simplified_dim: usize,
    mses: Curve,
    single: Curve,
}

fn curve(result: &engine::RunResult) -> Curve {
    Curve {
        best: result.best_f,
        fe_used: result.fe_used,
        generations: result.generations,
        points: result.log.records().iter().map(|r| (r.fe, r.best)).collect(),
    }
}

fn load(problem_id: &str) -> Result<Problem, JsError> {
    let problem = Problem::from_id(problem_id).map_err(fail)?;
    if problem.dim() > MAX_DEMO_DIM {
        return Err(fail(format!("the demo is limited to {MAX_DEMO_DIM} dimensions")));
    }
    Ok(problem)
}

/// Runs multi-space and single-space DE with the same seed and budget.
/// `simplified_dim` of 0 uses the default.
#[wasm_bindgen]
pub fn run_comparison(
    problem_id: &str,
    population: usize,
    simplified_dim: usize,
    max_fes: u64,
    seed: u64,
) -> Result<String, JsError> {
    let problem = load(problem_id)?;
    if max_fes > MAX_DEMO_FES {
        return Err(fail(format!("the demo is limited to {MAX_DEMO_FES} evaluations")));
    }
    let mut config = MsesConfig::with_population(problem.dim(), OptimizerParams::de(), population);
    config.max_fes = max_fes;
    if simplified_dim > 0 {
        config.simplified_dim = simplified_dim;
    }
    config.validate(problem.dim()).map_err(fail)?;
    let mses = engine::run(&problem, &config, seed).map_err(fail)?;
    let single = engine::run_single_space(&problem, &config, seed).map_err(fail)?;
    to_json(&Comparison {
        problem: problem.id(),
        dim: problem.dim(),
        simplified_dim: config.simplified_dim,
        mses: curve(&mses),
        single: curve(&single),
    })
}

#[derive(Serialize)]
struct Landscape {
    width: usize,
    height: usize,
    /// Row-major `log10(1 + f)` values, top row first.
    values: Vec<f64>,
    min: f64,
    max: f64,
    /// Half-width of the slice in each axis.
    span: f64,
}

/// Objective on the plane through the optimum spanned by the first two
/// coordinates, `span` wide in each direction (0 = the whole box).
#[wasm_bindgen]
pub fn landscape(problem_id: &str, width: usize, height: usize, span: f64) -> Result<String, JsError> {
    let problem = load(problem_id)?;
    if !(2..=400).contains(&width) || !(2..=400).contains(&height) {
        return Err(fail("width and height must lie in [2, 400]"));
    }
    let center = problem.shift().to_vec();
    let radius = problem.upper()[0];
    let span = if span > 0.0 { span.min(2.0 * radius) } else { radius };
    let mut values = Vec::with_capacity(width * height);
    let mut x = center.clone();
    for row in 0..height {
        let v = span * (1.0 - 2.0 * row as f64 / (height - 1) as f64);
        for col in 0..width {
            let u = span * (2.0 * col as f64 / (width - 1) as f64 - 1.0);
            x[0] = center[0] + u;
            x[1] = center[1] + v;
            values.push(problem.value(&x).ln_1p() / std::f64::consts::LN_10);
        }
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    to_json(&Landscape {
        width,
        height,
        values,
        min,
        max,
        span,
    })
}

#[derive(Serialize)]
struct PcaView {
    mean: Vec<f64>,
    /// Principal directions, one per component.
    axes: Vec<Vec<f64>>,
    variances: Vec<f64>,
    /// Points rebuilt from their first-component coordinate.
    reconstructed: Vec<Vec<f64>>,
}

/// PCA of 2-D points given as `[x0, y0, x1, y1, …]`, with each point rebuilt
/// from its projection on the leading axis.
#[wasm_bindgen]
pub fn pca_points(flat: &[f64]) -> Result<String, JsError> {
    if flat.len() % 2 != 0 || flat.len() < 4 {
        return Err(fail("need at least two points as x, y pairs"));
    }
    let points: Vec<Vec<f64>> = flat.chunks(2).map(<[f64]>::to_vec).collect();
    let data = columns_to_matrix(&points);
    let full = pca_fit(&data, 2).map_err(fail)?;
    let leading = pca_fit(&data, 1).map_err(fail)?;
    let coords = pca_project(&leading, &data).map_err(fail)?;
    let rebuilt = pca_reconstruct(&leading, &coords).map_err(fail)?;
    to_json(&PcaView {
        mean: full.mean().iter().copied().collect(),
        axes: matrix_to_columns(full.basis()),
        variances: full.variances().to_vec(),
        reconstructed: matrix_to_columns(&rebuilt),
    })
}
