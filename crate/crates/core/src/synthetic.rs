//! A deterministic reference model of Cp(θ; Re, Ti) and a dataset generator.
//!
//! The curves reproduce the qualitative structure of pressure around a
//! smooth circular cylinder: Cp = 1 at stagnation, a single minimum at θ_m,
//! recovery up to θ_s and a flat wake behind it. The fluctuating curve peaks
//! between θ_m and θ_s and grows with turbulence intensity. These are test
//! fixtures with a known ground truth, not aerodynamic data.
//!
//! Frozen forms. With `x = log10(Re)`, `x_eff = x + 0.08·Ti` and
//! `σ(z) = 1 / (1 + exp(-z))`:
//!
//! ```text
//! s      = σ((x_eff - 5.4) / 0.15)      flow-regime progress (0 sub-, 1 supercritical)
//! s_re   = σ((x     - 5.4) / 0.15)      same, ignoring turbulence
//! θ_m    = 70 + 10·s
//! θ_s    = 80 + 40·s
//! cp_min = -1.2 - 1.3·s
//! cp_base= -1.1 + 0.7·s
//! rms_base = 0.10 + 0.004·Ti
//! rms_peak = 0.25 - 0.08·s_re + 0.01·Ti
//! ```
//!
//! Mean curve:
//!
//! ```text
//! θ ≤ θ_m       cp_min + (1 - cp_min)·cos²(π/2 · θ/θ_m)
//! θ_m < θ < θ_s cp_min + (cp_base - cp_min)·(3u² - 2u³),  u = (θ - θ_m)/(θ_s - θ_m)
//! θ ≥ θ_s       cp_base
//! ```
//!
//! Fluctuating curve, a raised-cosine bump of half-width 50° centred at
//! `θ_c = 80 + 40·s_re` (so θ_m ≤ θ_c ≤ θ_s):
//!
//! ```text
//! rms = rms_base + (rms_peak - rms_base)·b(θ)
//! b   = ½(1 + cos(π(θ - θ_c)/50))  for |θ - θ_c| < 50, else 0
//! ```
//!
//! The bump position depends on Re only, which keeps rms monotone in Ti at
//! every angle.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample, TargetKind};
use crate::error::{param, Error, Result};
use crate::seed;

pub const RE_WINDOW: (f64, f64) = (1e4, 1e6);
pub const TI_WINDOW: (f64, f64) = (0.0, 15.0);

const TI_TO_LOG_RE: f64 = 0.08;
const CRITICAL_LOG_RE: f64 = 5.4;
const TRANSITION_WIDTH: f64 = 0.15;
const BUMP_HALF_WIDTH: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    /// Angle of minimum mean pressure, degrees.
    pub theta_m: f64,
    /// Separation angle, degrees.
    pub theta_s: f64,
    pub cp_min: f64,
    /// Wake plateau of the mean curve.
    pub cp_base: f64,
    pub rms_peak: f64,
    pub rms_base: f64,
    /// Centre of the fluctuating-pressure peak.
    pub theta_rms_peak: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn regime(log_re: f64) -> f64 {
    sigmoid((log_re - CRITICAL_LOG_RE) / TRANSITION_WIDTH)
}

fn check_window(re: f64, ti: f64) -> Result<()> {
    if !(RE_WINDOW.0..=RE_WINDOW.1).contains(&re) {
        return Err(Error::Domain { field: "re", value: re, constraint: "reference curves cover [1e4, 1e6]", line: None });
    }
    if !(TI_WINDOW.0..=TI_WINDOW.1).contains(&ti) {
        return Err(Error::Domain { field: "ti", value: ti, constraint: "reference curves cover [0, 15]", line: None });
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=180.0).contains(&theta) {
        return Err(Error::Domain { field: "theta", value: theta, constraint: "must lie in [0, 180]", line: None });
    }
    Ok(())
}

pub fn curve_params(re: f64, ti: f64) -> Result<CurveParams> {
    check_window(re, ti)?;
    let x = re.log10();
    let s = regime(x + TI_TO_LOG_RE * ti);
    let s_re = regime(x);
    Ok(CurveParams {
        theta_m: 70.0 + 10.0 * s,
        theta_s: 80.0 + 40.0 * s,
        cp_min: -1.2 - 1.3 * s,
        cp_base: -1.1 + 0.7 * s,
        rms_peak: 0.25 - 0.08 * s_re + 0.01 * ti,
        rms_base: 0.10 + 0.004 * ti,
        theta_rms_peak: 80.0 + 40.0 * s_re,
    })
}

impl CurveParams {
    pub fn mean_cp(&self, theta: f64) -> f64 {
        if theta <= self.theta_m {
            let c = (FRAC_PI_2 * theta / self.theta_m).cos();
            self.cp_min + (1.0 - self.cp_min) * c * c
        } else if theta < self.theta_s {
            let u = (theta - self.theta_m) / (self.theta_s - self.theta_m);
            self.cp_min + (self.cp_base - self.cp_min) * u * u * (3.0 - 2.0 * u)
        } else {
            self.cp_base
        }
    }

    pub fn rms_cp(&self, theta: f64) -> f64 {
        let d = theta - self.theta_rms_peak;
        let bump = if d.abs() < BUMP_HALF_WIDTH { 0.5 * (1.0 + (PI * d / BUMP_HALF_WIDTH).cos()) } else { 0.0 };
        self.rms_base + (self.rms_peak - self.rms_base) * bump
    }

    pub fn value(&self, kind: TargetKind, theta: f64) -> f64 {
        match kind {
            TargetKind::MeanCp => self.mean_cp(theta),
            TargetKind::RmsCp => self.rms_cp(theta),
        }
    }
}

pub fn reference_mean_cp(re: f64, ti: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(curve_params(re, ti)?.mean_cp(theta))
}

pub fn reference_rms_cp(re: f64, ti: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(curve_params(re, ti)?.rms_cp(theta))
}

pub fn reference_cp(kind: TargetKind, re: f64, ti: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(curve_params(re, ti)?.value(kind, theta))
}

/// Sampling box for [`generate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub re_range: (f64, f64),
    pub ti_range: (f64, f64),
    pub noise_sd: f64,
    pub target_kind: TargetKind,
    pub seed: u64,
}

impl GeneratorConfig {
    /// Whole validity window, mean Cp, no noise.
    pub fn new(n: usize, seed: u64) -> Self {
        GeneratorConfig { n, re_range: RE_WINDOW, ti_range: TI_WINDOW, noise_sd: 0.0, target_kind: TargetKind::MeanCp, seed }
    }
}

/// Draws `n` samples: Re log-uniform, Ti and θ uniform, target = reference
/// curve plus N(0, noise_sd²) noise. Draw order per sample is Re, Ti, θ,
/// noise, all from one seeded stream.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Dataset> {
    let (re_lo, re_hi) = cfg.re_range;
    let (ti_lo, ti_hi) = cfg.ti_range;
    if !(re_lo <= re_hi && ti_lo <= ti_hi) {
        return Err(param("generate_dataset: empty sampling range"));
    }
    check_window(re_lo, ti_lo)?;
    check_window(re_hi, ti_hi)?;
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(param(format!("noise_sd = {}: must be finite and >= 0", cfg.noise_sd)));
    }
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| param(e.to_string()))?;
    let (log_lo, log_hi) = (re_lo.log10(), re_hi.log10());
    let mut rng = seed::rng(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let u: f64 = rng.random();
        let re = 10f64.powf(log_lo + (log_hi - log_lo) * u).clamp(re_lo, re_hi);
        let ti = ti_lo + (ti_hi - ti_lo) * rng.random::<f64>();
        let theta = 180.0 * rng.random::<f64>();
        let eps = noise.sample(&mut rng);
        let clean = curve_params(re, ti)?.value(cfg.target_kind, theta);
        samples.push(Sample::new(re, ti, theta, clean + eps)?);
    }
    Ok(Dataset::new(cfg.target_kind, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    const RES: [f64; 5] = [1e4, 5e4, 2e5, 4e5, 1e6];
    const TIS: [f64; 4] = [0.0, 0.5, 5.0, 15.0];

    #[test]
    fn params_invariants_over_window() {
        for re in RES {
            for ti in TIS {
                let p = curve_params(re, ti).unwrap();
                assert!(0.0 < p.theta_m && p.theta_m < p.theta_s && p.theta_s < 180.0, "{p:?}");
                assert!(p.cp_min < p.cp_base && p.cp_base < 1.0);
                assert!(p.rms_peak > p.rms_base && p.rms_base > 0.0);
                assert!(p.theta_m <= p.theta_rms_peak && p.theta_rms_peak <= p.theta_s);
            }
        }
    }

    #[test]
    fn window_enforced() {
        assert!(curve_params(9e3, 0.0).is_err());
        assert!(curve_params(1e5, 16.0).is_err());
        assert!(reference_mean_cp(1e5, 1.0, 181.0).is_err());
        assert!(reference_rms_cp(2e6, 1.0, 10.0).is_err());
    }

    #[test]
    fn separation_delayed_with_re_and_ti() {
        for ti in TIS {
            let mut prev = 0.0;
            for i in 0..=40 {
                let re = 10f64.powf(4.0 + i as f64 / 20.0);
                let p = curve_params(re, ti).unwrap();
                assert!(p.theta_s >= prev);
                prev = p.theta_s;
            }
        }
        let calm = curve_params(1e5, 0.0).unwrap();
        let turbulent = curve_params(1e5, 10.0).unwrap();
        let faster = curve_params(3e5, 0.0).unwrap();
        assert!(turbulent.theta_s > calm.theta_s && faster.theta_s > calm.theta_s);
        assert!(turbulent.theta_m > calm.theta_m && faster.theta_m > calm.theta_m);
        assert!(turbulent.cp_min < calm.cp_min && faster.cp_min < calm.cp_min);
        assert!(turbulent.cp_base > calm.cp_base && faster.cp_base > calm.cp_base);
    }

    #[test]
    fn mean_curve_landmarks() {
        for re in RES {
            for ti in TIS {
                let p = curve_params(re, ti).unwrap();
                assert!((reference_mean_cp(re, ti, 0.0).unwrap() - 1.0).abs() < 1e-12);
                assert_eq!(p.mean_cp(p.theta_m), p.cp_min);
                assert_eq!(reference_mean_cp(re, ti, 170.0).unwrap(), p.cp_base);
                for k in 1..=100 {
                    let theta = p.theta_s + (180.0 - p.theta_s) * k as f64 / 100.0;
                    assert!((p.mean_cp(theta) - p.cp_base).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn mean_curve_minimum_is_unique() {
        let p = curve_params(1e5, 0.5).unwrap();
        for i in 0..=1800 {
            let theta = i as f64 / 10.0;
            if (theta - p.theta_m).abs() > 1e-9 {
                assert!(p.mean_cp(theta) > p.cp_min, "θ = {theta}");
            }
        }
    }

    #[test]
    fn rms_curve_shape() {
        for re in RES {
            for ti in TIS {
                let p = curve_params(re, ti).unwrap();
                let grid: Vec<f64> = (0..=180).map(|d| d as f64).collect();
                let vals: Vec<f64> = grid.iter().map(|&t| p.rms_cp(t)).collect();
                let (imax, _) = vals.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                assert!(grid[imax] >= p.theta_m && grid[imax] <= p.theta_s + 10.0);
                assert_eq!(reference_rms_cp(re, ti, 180.0).unwrap(), p.rms_base);
                assert!(vals.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn rms_grows_with_turbulence() {
        for re in RES {
            for d in 0..=180 {
                let theta = d as f64;
                assert!(reference_rms_cp(re, 10.0, theta).unwrap() >= reference_rms_cp(re, 0.0, theta).unwrap());
            }
        }
    }

    #[test]
    fn curves_are_continuous() {
        let delta = 1e-6;
        for re in RES {
            for ti in TIS {
                let p = curve_params(re, ti).unwrap();
                let mut theta = 0.0;
                while theta + delta <= 180.0 {
                    assert!((p.mean_cp(theta + delta) - p.mean_cp(theta)).abs() < 1e-4);
                    assert!((p.rms_cp(theta + delta) - p.rms_cp(theta)).abs() < 1e-4);
                    theta += 0.05;
                }
                for edge in [p.theta_m, p.theta_s, p.theta_rms_peak - 50.0, p.theta_rms_peak + 50.0] {
                    assert!((p.mean_cp(edge + delta) - p.mean_cp(edge - delta)).abs() < 1e-4);
                    assert!((p.rms_cp(edge + delta) - p.rms_cp(edge - delta)).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn noise_free_generator_matches_reference() {
        let ds = generate_dataset(&GeneratorConfig { target_kind: TargetKind::RmsCp, ..GeneratorConfig::new(300, 4) }).unwrap();
        for s in ds.samples() {
            assert!((1e4..=1e6).contains(&s.re) && (0.0..=15.0).contains(&s.ti));
            assert_eq!(s.target, reference_rms_cp(s.re, s.ti, s.theta).unwrap());
        }
        assert_eq!(ds, generate_dataset(&GeneratorConfig { target_kind: TargetKind::RmsCp, ..GeneratorConfig::new(300, 4) }).unwrap());
    }

    #[test]
    fn noise_variance() {
        let cfg = GeneratorConfig { noise_sd: 0.05, ..GeneratorConfig::new(5000, 21) };
        let ds = generate_dataset(&cfg).unwrap();
        let resid: Vec<f64> = ds.samples().iter().map(|s| s.target - reference_mean_cp(s.re, s.ti, s.theta).unwrap()).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((var - 0.0025).abs() < 0.00025, "variance {var}");
    }

    #[test]
    fn generator_validation() {
        assert!(generate_dataset(&GeneratorConfig { re_range: (1e3, 1e5), ..GeneratorConfig::new(5, 0) }).is_err());
        assert!(generate_dataset(&GeneratorConfig { noise_sd: -1.0, ..GeneratorConfig::new(5, 0) }).is_err());
        assert!(generate_dataset(&GeneratorConfig::new(0, 0)).unwrap().is_empty());
    }
}
