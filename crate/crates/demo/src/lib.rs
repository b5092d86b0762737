//! Browser bindings for a few tree computations.

use tree_entropy::estimators::{percolative_entropy, ssm_profile, FieldGrid, PercolativeOptions, SsmStrategy};
use tree_entropy::interaction::{coloring, hardcore, ising, potts};
use tree_entropy::{Boundary, InteractionSpec, Parity, TreeModel};
use wasm_bindgen::prelude::*;

fn spec(model: &str, param: f64, q: usize, d: usize) -> Result<InteractionSpec, JsError> {
    let parity = Parity::Involutive { d };
    Ok(match model {
        "ising" => ising(parity, param)?,
        "potts" => potts(parity, param, q)?,
        "hardcore" => hardcore(parity, param)?,
        "coloring" => coloring(parity, q)?,
        other => return Err(JsError::new(&format!("unknown model `{other}`"))),
    })
}

fn boundary(state: i32) -> Boundary {
    if state < 0 {
        Boundary::Free
    } else {
        Boundary::AllState(state as _)
    }
}

/// Root marginal on `T_d(radius)`; a negative `state` leaves the boundary free.
#[wasm_bindgen]
pub fn root_marginal(model: &str, param: f64, q: usize, d: usize, radius: usize, state: i32) -> Result<Vec<f64>, JsError> {
    let tm = TreeModel::new(&spec(model, param, q, d)?, radius, boundary(state))?;
    Ok(tm.root_marginal()?.probs().to_vec())
}

/// Extremal-boundary SSM profile for `r = 0..=r_max` over the standard grid.
#[wasm_bindgen]
pub fn ssm(model: &str, param: f64, q: usize, d: usize, r_max: usize) -> Result<Vec<f64>, JsError> {
    let s = spec(model, param, q, d)?;
    let grid = FieldGrid::standard(s.alphabet());
    Ok(ssm_profile(&s, r_max, &SsmStrategy::Extremal, &grid)?.values())
}

/// Percolative entropy estimate and its standard error, in nats.
#[wasm_bindgen]
pub fn hperc(
    model: &str,
    param: f64,
    q: usize,
    d: usize,
    radius: usize,
    state: i32,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let s = spec(model, param, q, d)?;
    let e = percolative_entropy(&s, radius, boundary(state), samples, seed, &PercolativeOptions::default())?;
    Ok(vec![e.value, e.stderr])
}
