//! Browser bindings. Each exported function returns a JSON string; the plain
//! Rust versions (`*_json`) are what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use optshrink::asymptotics::predict_spike;
use optshrink::dtransform::{empirical_d, mp_d_transform, MpParams, NoiseSpectrum, GUARD_GAP};
use optshrink::harness::{synthesize, GridPoint};
use optshrink::linalg::svd;
use optshrink::oracle::{exact_squared_error, oracle_diagonal, oracle_weights};
use optshrink::random::{derive_seed, sample_gaussian_matrix};
use optshrink::shrinkage::{eym_weights, optshrink, reconstruct};
use optshrink::{DenseMatrix, Error, Result};

/// Largest matrix side the demo accepts; keeps the page responsive.
pub const MAX_DIM: usize = 300;
const MAX_POINTS: usize = 2000;
const THUMB: usize = 64;

fn check_points(points: usize) -> Result<()> {
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(Error::InvalidArgument(format!("points must be in 2..={MAX_POINTS}")));
    }
    Ok(())
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n < 2 || m < 2 || n > MAX_DIM || m > MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimensions must be in 2..={MAX_DIM}")));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(value)?)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Curves {
    critical_theta: f64,
    edge: f64,
    theta: Vec<f64>,
    rho: Vec<f64>,
    w_opt: Vec<f64>,
    w_eym: Vec<f64>,
    nse_opt: Vec<f64>,
    nse_eym: Vec<f64>,
}

/// Limiting spike location, weights and normalized errors on a θ grid.
pub fn predict_curves_json(c: f64, p: f64, theta_max: f64, points: usize) -> Result<String> {
    check_points(points)?;
    if !(theta_max > 0.0 && theta_max.is_finite()) {
        return Err(Error::InvalidArgument("theta_max must be positive".into()));
    }
    let mp = MpParams::new(c, p)?;
    let mut out = Curves {
        critical_theta: optshrink::asymptotics::critical_theta(&mp),
        edge: mp.edge(),
        theta: Vec::with_capacity(points),
        rho: Vec::with_capacity(points),
        w_opt: Vec::with_capacity(points),
        w_eym: Vec::with_capacity(points),
        nse_opt: Vec::with_capacity(points),
        nse_eym: Vec::with_capacity(points),
    };
    for k in 1..=points {
        let theta = theta_max * k as f64 / points as f64;
        let pred = predict_spike(theta, &mp)?;
        let energy = (p * theta).powi(2);
        out.theta.push(theta);
        out.rho.push(pred.rho);
        out.w_opt.push(pred.w_opt_limit / p);
        out.w_eym.push(pred.w_eym_limit / p);
        out.nse_opt.push(pred.mse_opt_limit / energy);
        out.nse_eym.push(pred.mse_eym_limit / energy);
    }
    to_json(&out)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Thumbnail {
    size: usize,
    /// Row-major, scaled to the signal's largest magnitude.
    values: Vec<f64>,
}

fn thumbnail(a: &DenseMatrix, scale: f64) -> Thumbnail {
    let size = THUMB.min(a.rows()).min(a.cols());
    let values = (0..size * size)
        .map(|k| {
            let (i, j) = (k / size, k % size);
            a.get(i * a.rows() / size, j * a.cols() / size) / scale
        })
        .collect();
    Thumbnail { size, values }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Denoised {
    singular_values: Vec<f64>,
    optshrink_weights: Vec<f64>,
    eym_weights: Vec<f64>,
    oracle_weights: Vec<f64>,
    pole_flags: Vec<bool>,
    rel_mse_estimate: f64,
    nse_optshrink: f64,
    nse_eym: f64,
    nse_oracle: f64,
    signal: Thumbnail,
    observed: Thumbnail,
    denoised: Thumbnail,
}

/// Draws a rank-one signal with strength θ, adds noise, drops entries with
/// probability `1 − p` and denoises with OptShrink at rank `rank`.
pub fn denoise_demo_json(n: usize, m: usize, theta: f64, p: f64, rank: usize, seed: u64) -> Result<String> {
    check_dims(n, m)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument("p must be in (0, 1]".into()));
    }
    let point = GridPoint {
        thetas: vec![theta],
        r_hat: rank,
        p,
    };
    let (target, factors) = synthesize(n, m, &point, seed)?;
    let report = optshrink(&factors, rank)?;
    let eym = eym_weights(&factors, rank)?;
    let oracle = oracle_weights(&oracle_diagonal(&target, &factors)?, rank)?;
    let energy = target.energy();
    let nse = |w| -> Result<f64> { Ok(exact_squared_error(&target, &factors, w)? / energy) };

    let signal = target.to_matrix();
    let scale = signal.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    let observed = factors.reconstruct_full();
    let denoised = reconstruct(&factors, &report.weights)?;
    let out = Denoised {
        singular_values: factors.singular_values().iter().take(40).copied().collect(),
        optshrink_weights: report.weights.weights().to_vec(),
        eym_weights: eym.weights().to_vec(),
        oracle_weights: oracle.weights().to_vec(),
        pole_flags: report.metadata.pole_flags.clone(),
        rel_mse_estimate: report.rel_mse_estimate,
        nse_optshrink: nse(&report.weights)?,
        nse_eym: nse(&eym)?,
        nse_oracle: nse(&oracle)?,
        signal: thumbnail(&signal, scale),
        observed: thumbnail(&observed, scale),
        denoised: thumbnail(&denoised, scale),
    };
    to_json(&out)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DCurve {
    edge: f64,
    largest_singular_value: f64,
    z: Vec<f64>,
    /// `None` where z is inside the pole guard of the sample spectrum.
    empirical: Vec<Option<f64>>,
    marchenko_pastur: Vec<Option<f64>>,
}

/// Empirical D-transform of one pure-noise draw against the limiting law.
pub fn dtransform_curve_json(n: usize, m: usize, seed: u64, z_min: f64, z_max: f64, points: usize) -> Result<String> {
    check_dims(n, m)?;
    check_points(points)?;
    if !(z_min > 0.0 && z_max > z_min && z_max.is_finite()) {
        return Err(Error::InvalidArgument("need 0 < z_min < z_max".into()));
    }
    let (rows, cols) = (n.min(m), n.max(m));
    let noise = sample_gaussian_matrix(rows, cols, 1.0 / cols as f64, derive_seed(seed, 2, 0))?;
    let sv = svd(&noise)?.singular_values().to_vec();
    let spectrum = NoiseSpectrum::new(sv, rows, cols)?;
    let mp = MpParams::full(rows as f64 / cols as f64)?;
    let mut out = DCurve {
        edge: mp.edge(),
        largest_singular_value: spectrum.s_max(),
        z: Vec::with_capacity(points),
        empirical: Vec::with_capacity(points),
        marchenko_pastur: Vec::with_capacity(points),
    };
    for k in 0..points {
        let z = z_min + (z_max - z_min) * k as f64 / (points - 1) as f64;
        out.z.push(z);
        out.empirical.push(empirical_d(z, &spectrum).ok());
        let outside = z > mp.edge() * (1.0 + GUARD_GAP);
        out.marchenko_pastur.push(if outside { mp_d_transform(z, &mp).ok() } else { None });
    }
    to_json(&out)
}

fn js(result: Result<String>) -> std::result::Result<String, JsValue> {
    result.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn predict_curves(c: f64, p: f64, theta_max: f64, points: usize) -> std::result::Result<String, JsValue> {
    js(predict_curves_json(c, p, theta_max, points))
}

#[wasm_bindgen]
pub fn denoise_demo(n: usize, m: usize, theta: f64, p: f64, rank: usize, seed: u32) -> std::result::Result<String, JsValue> {
    js(denoise_demo_json(n, m, theta, p, rank, seed.into()))
}

#[wasm_bindgen]
pub fn dtransform_curve(
    n: usize,
    m: usize,
    seed: u32,
    z_min: f64,
    z_max: f64,
    points: usize,
) -> std::result::Result<String, JsValue> {
    js(dtransform_curve_json(n, m, seed.into(), z_min, z_max, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn curves_hit_known_points() {
        let v = parse(predict_curves_json(1.0, 1.0, 4.0, 8));
        assert_eq!(v["theta"].as_array().unwrap().len(), 8);
        assert_eq!(v["criticalTheta"].as_f64(), Some(1.0));
        // θ = 2 is the fourth grid point.
        assert!((v["wOpt"][3].as_f64().unwrap() - 1.5).abs() < 1e-12);
        assert!((v["rho"][3].as_f64().unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(v["wOpt"][0].as_f64(), Some(0.0));
    }

    #[test]
    fn curves_reject_bad_input() {
        assert!(predict_curves_json(1.0, 1.0, 4.0, 1).is_err());
        assert!(predict_curves_json(2.0, 1.0, 4.0, 10).is_err());
        assert!(predict_curves_json(1.0, 1.0, -1.0, 10).is_err());
    }

    #[test]
    fn denoise_demo_shapes() {
        let v = parse(denoise_demo_json(80, 100, 3.0, 1.0, 2, 4));
        assert_eq!(v["optshrinkWeights"].as_array().unwrap().len(), 2);
        assert_eq!(v["signal"]["size"], 64);
        assert_eq!(v["denoised"]["values"].as_array().unwrap().len(), 64 * 64);
        let (o, e) = (v["nseOptshrink"].as_f64().unwrap(), v["nseEym"].as_f64().unwrap());
        assert!(v["nseOracle"].as_f64().unwrap() <= o.min(e) + 1e-12);
        assert!(denoise_demo_json(80, 100, 3.0, 1.0, 80, 4).is_err());
        assert!(denoise_demo_json(MAX_DIM + 1, 10, 3.0, 1.0, 1, 4).is_err());
    }

    #[test]
    fn dtransform_curve_tracks_limit() {
        let v = parse(dtransform_curve_json(200, 200, 1, 2.3, 4.0, 18));
        let z = v["z"].as_array().unwrap();
        assert_eq!(z.len(), 18);
        for k in 0..z.len() {
            let (e, l) = (v["empirical"][k].as_f64().unwrap(), v["marchenkoPastur"][k].as_f64().unwrap());
            assert!((e - l).abs() < 0.02, "z={} {e} vs {l}", z[k]);
        }
        let inside = parse(dtransform_curve_json(50, 50, 1, 0.5, 3.0, 5));
        assert!(inside["empirical"][0].is_null());
        assert!(inside["marchenkoPastur"][0].is_null());
    }
}
