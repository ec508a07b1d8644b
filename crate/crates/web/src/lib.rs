//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; failures become JS exceptions.

use ain_core::beamforming::phase_condition;
use ain_core::channel::{cross_phase, ChannelModel, ChannelRealization, Field, LinearNetwork, MagnitudeBounds};
use ain_core::metrics::{aligned_sweep, average_sweeps, tdma_sweep, SinrMethod};
use ain_core::multihop::{solve_gains, GainAssignment, SolverOptions};
use ain_core::rng::seeded;
use ain_core::Complex64;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn grid(lo_db: f64, hi_db: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 3 || !(hi_db > lo_db) {
        return Err(fail("need at least 3 points and hi > lo"));
    }
    Ok((0..points).map(|k| lo_db + (hi_db - lo_db) * k as f64 / (points - 1) as f64).collect())
}

/// Mean sum rate of the aligned scheme and the TDMA baseline over `seeds`
/// time-varying channels, closed-form SINR.
pub fn dof_curve_json(m: usize, seeds: u64, lo_db: f64, hi_db: f64, points: usize) -> Result<String, String> {
    if m == 0 || m > 8 || seeds == 0 {
        return Err(fail("m must be in 1..=8 and seeds at least 1"));
    }
    let p = grid(lo_db, hi_db, points)?;
    let mut aligned = Vec::new();
    let mut tdma = Vec::new();
    let mut refused = Vec::new();
    for seed in 0..seeds {
        let own = ChannelRealization::sample(seed, 2, m, ChannelModel::TimeVarying, MagnitudeBounds::default())
            .map_err(fail)?;
        // the baseline needs two slots so both users transmit
        let ch = ChannelRealization::sample(seed, 2, m.max(2), ChannelModel::TimeVarying, MagnitudeBounds::default())
            .map_err(fail)?;
        let net = LinearNetwork::symbol_extension(&own).map_err(fail)?;
        match aligned_sweep(&net, &p, 1.0, SinrMethod::Analytic, &mut seeded(seed)) {
            Ok(s) => aligned.push(s),
            Err(e) if e.is_numeric() => refused.push(seed),
            Err(e) => return Err(fail(e)),
        }
        tdma.push(tdma_sweep(&ch, &p, 1.0, SinrMethod::Analytic, &mut seeded(seed)).map_err(fail)?);
    }
    let (a_rate, a_slope) =
        if aligned.is_empty() { (Vec::new(), None) } else { average_sweeps(&aligned, Field::Complex).map_err(fail)? };
    let (t_rate, t_slope) = average_sweeps(&tdma, Field::Complex).map_err(fail)?;
    Ok(json!({
        "p_db": p,
        "aligned": { "sum_rate": a_rate, "dof_slope": a_slope, "target": (2 * m - 1) as f64 / m as f64 },
        "tdma": { "sum_rate": t_rate, "dof_slope": t_slope, "target": 1.0 },
        "refused_seeds": refused,
    })
    .to_string())
}

/// Phase conditions for unit-magnitude constant channels with the given
/// phases (radians): `[f11, f12, f21, f22, g11, g12, g21, g22]`.
pub fn phase_check_json(phases: &[f64]) -> Result<String, String> {
    if phases.len() != 8 || phases.iter().any(|p| !p.is_finite()) {
        return Err(fail("expected 8 finite phases"));
    }
    let hop = |o: usize| -> [[Complex64; 2]; 2] {
        [
            [Complex64::from_polar(1.0, phases[o]), Complex64::from_polar(1.0, phases[o + 1])],
            [Complex64::from_polar(1.0, phases[o + 2]), Complex64::from_polar(1.0, phases[o + 3])],
        ]
    };
    let (f, g) = (hop(0), hop(4));
    let cond = phase_condition(&f, &g).map_err(fail)?;
    Ok(json!({
        "cross_phase": [cross_phase(&f), cross_phase(&g)],
        "margins": cond.margins,
        "first_hop_ok": cond.first_hop_ok,
        "second_hop_ok": cond.second_hop_ok,
    })
    .to_string())
}

/// Gain solving on the random three-hop cascade `seed`.
pub fn three_hop_json(seed: u64) -> Result<String, String> {
    let ch = ChannelRealization::sample(seed, 3, 1, ChannelModel::ConstantComplex, MagnitudeBounds::default())
        .map_err(fail)?;
    let rep = solve_gains(&ch, &GainAssignment::unit(2), &SolverOptions { jitter_seed: seed, ..Default::default() })
        .map_err(fail)?;
    Ok(json!({
        "converged": rep.converged,
        "residual": rep.residual,
        "diag_min": rep.diag_min,
        "iters": rep.iters,
        "restarts": rep.restarts,
        "gains": rep.gains.to_pairs(),
        "history": rep.history,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn dof_curve(m: usize, seeds: u32, lo_db: f64, hi_db: f64, points: usize) -> Result<String, JsValue> {
    dof_curve_json(m, seeds as u64, lo_db, hi_db, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn phase_check(phases: Vec<f64>) -> Result<String, JsValue> {
    phase_check_json(&phases).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn three_hop(seed: u32) -> Result<String, JsValue> {
    three_hop_json(seed as u64).map_err(|e| JsValue::from_str(&e))
}
