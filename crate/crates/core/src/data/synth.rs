use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::BasinSeries;
use crate::error::{Error, Result};

/// Runoff generation scheme of the synthetic basin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunoffModel {
    /// Snowpack, soil moisture and two routing stores.
    #[default]
    Bucket,
    /// `q[i+1] = baseflow + a*q[i] + b*p[i]^c*logistic((t[i] - t0)/w) + noise`,
    /// clipped at zero.
    LinearReservoir,
}

/// Conceptual store parameters (mm, mm/day, °C).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketParams {
    pub degree_day: f64,
    pub field_capacity: f64,
    /// Shape of the soil-moisture recharge curve.
    pub beta: f64,
    /// Fraction of field capacity above which evaporation is unrestricted.
    pub evap_limit: f64,
    /// Potential evaporation per °C above zero.
    pub pet_per_degree: f64,
    pub percolation: f64,
    pub upper_threshold: f64,
    /// Outflow rates above the threshold, from the whole upper store and
    /// from the lower store.
    pub k_fast: f64,
    pub k_upper: f64,
    pub k_lower: f64,
    /// Log-scale sd of the multiplicative observation error.
    pub obs_noise: f64,
}

impl Default for BucketParams {
    fn default() -> Self {
        Self {
            degree_day: 3.0,
            field_capacity: 200.0,
            beta: 2.0,
            evap_limit: 0.7,
            pet_per_degree: 0.15,
            percolation: 1.5,
            upper_threshold: 15.0,
            k_fast: 0.3,
            k_upper: 0.1,
            k_lower: 0.03,
            obs_noise: 0.1,
        }
    }
}

/// Parameters of the seeded synthetic basin.
///
/// Weather is shared by both runoff models: wet days occur independently with
/// `rain_probability` and draw exponential amounts, and temperature follows an
/// annual sine plus Gaussian noise. Flow on day `i + 1` responds to the
/// weather of day `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub start_date: NaiveDate,
    pub model: RunoffModel,
    pub rain_probability: f64,
    pub rain_mean: f64,
    pub temp_mean: f64,
    pub temp_amplitude: f64,
    pub temp_noise_sd: f64,
    /// Rain/snow threshold temperature.
    pub snow_threshold: f64,
    pub q0: f64,
    pub bucket: BucketParams,
    // linear reservoir
    pub baseflow: f64,
    pub recession: f64,
    pub runoff: f64,
    pub rain_exponent: f64,
    pub snow_width: f64,
    pub noise_sd: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            start_date: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
            model: RunoffModel::Bucket,
            rain_probability: 0.35,
            rain_mean: 6.0,
            temp_mean: 8.0,
            temp_amplitude: 12.0,
            temp_noise_sd: 3.0,
            snow_threshold: 0.0,
            q0: 1.0,
            bucket: BucketParams::default(),
            baseflow: 0.0,
            recession: 0.85,
            runoff: 0.12,
            rain_exponent: 1.3,
            snow_width: 2.0,
            noise_sd: 0.15,
        }
    }
}

impl SyntheticParams {
    /// Linear reservoir with the given recession and runoff coefficients.
    pub fn linear_reservoir(recession: f64, runoff: f64) -> Self {
        Self {
            model: RunoffModel::LinearReservoir,
            recession,
            runoff,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic params: {m}")));
        if !(0.0..1.0).contains(&self.recession) {
            return bad("recession must lie in [0, 1)");
        }
        if self.noise_sd < 0.0 || self.temp_noise_sd < 0.0 || self.bucket.obs_noise < 0.0 {
            return bad("noise scales must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.rain_probability) {
            return bad("rain probability must lie in [0, 1]");
        }
        if self.rain_mean <= 0.0 || self.snow_width <= 0.0 || self.rain_exponent <= 0.0 {
            return bad("rain mean, rain exponent and snow width must be positive");
        }
        if self.runoff < 0.0 || self.q0 < 0.0 || self.baseflow < 0.0 {
            return bad("runoff coefficient, baseflow and initial flow must be non-negative");
        }
        let b = &self.bucket;
        if b.field_capacity <= 0.0 || b.beta <= 0.0 || !(0.0..=1.0).contains(&b.evap_limit) || b.evap_limit == 0.0 {
            return bad("field capacity and beta must be positive, evap_limit in (0, 1]");
        }
        let rates = [b.k_fast, b.k_upper, b.k_lower];
        if rates.iter().any(|k| !(0.0..=1.0).contains(k)) || b.k_fast + b.k_upper > 1.0 {
            return bad("store outflow rates must lie in [0, 1] and k_fast + k_upper <= 1");
        }
        if b.degree_day < 0.0 || b.pet_per_degree < 0.0 || b.percolation < 0.0 || b.upper_threshold < 0.0 {
            return bad("bucket rates and thresholds must be non-negative");
        }
        let all = [
            self.rain_mean,
            self.temp_mean,
            self.temp_amplitude,
            self.temp_noise_sd,
            self.snow_threshold,
            self.q0,
            self.baseflow,
            self.runoff,
            self.rain_exponent,
            self.snow_width,
            self.noise_sd,
            b.degree_day,
            b.field_capacity,
            b.pet_per_degree,
            b.percolation,
            b.upper_threshold,
            b.obs_noise,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Stores {
    snow: f64,
    soil: f64,
    upper: f64,
    lower: f64,
}

impl Stores {
    /// Advances one day and returns the routed flow.
    fn step(&mut self, b: &BucketParams, snow_threshold: f64, p: f64, t: f64) -> f64 {
        let liquid = if t < snow_threshold {
            self.snow += p;
            0.0
        } else {
            p
        };
        let melt = self.snow.min(b.degree_day * (t - snow_threshold).max(0.0));
        self.snow -= melt;
        let water = liquid + melt;

        let mut recharge = water * (self.soil / b.field_capacity).powf(b.beta);
        self.soil += water - recharge;
        if self.soil > b.field_capacity {
            recharge += self.soil - b.field_capacity;
            self.soil = b.field_capacity;
        }
        let pet = b.pet_per_degree * t.max(0.0);
        let evap = pet * (self.soil / (b.evap_limit * b.field_capacity)).min(1.0);
        self.soil = (self.soil - evap).max(0.0);

        self.upper += recharge;
        let perc = self.upper.min(b.percolation);
        self.upper -= perc;
        self.lower += perc;
        let fast = b.k_fast * (self.upper - b.upper_threshold).max(0.0) + b.k_upper * self.upper;
        self.upper -= fast;
        let slow = b.k_lower * self.lower;
        self.lower -= slow;
        fast + slow
    }
}

/// Generates a deterministic synthetic basin record of `n_days` days.
pub fn generate_synthetic_basin(seed: u64, n_days: usize, params: &SyntheticParams) -> Result<BasinSeries> {
    params.validate()?;
    if n_days == 0 {
        return Err(Error::Config("synthetic record needs at least one day".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rain = Exp::new(1.0 / params.rain_mean).map_err(|e| Error::Config(e.to_string()))?;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let b = &params.bucket;

    let mut p = Vec::with_capacity(n_days);
    let mut t = Vec::with_capacity(n_days);
    let mut q = Vec::with_capacity(n_days);
    let mut flow = params.q0;
    // starting stores whose outflow roughly matches q0
    let mut stores = Stores {
        snow: 0.0,
        soil: 0.5 * b.field_capacity,
        upper: 0.0,
        lower: if b.k_lower > 0.0 { params.q0 / b.k_lower } else { 0.0 },
    };
    for i in 0..n_days {
        let wet = rng.random::<f64>() < params.rain_probability;
        let amount = rain.sample(&mut rng);
        p.push(if wet { amount } else { 0.0 });

        let season = (2.0 * std::f64::consts::PI * i as f64 / 365.25).sin();
        t.push(params.temp_mean + params.temp_amplitude * season + params.temp_noise_sd * std_normal.sample(&mut rng));

        let z = std_normal.sample(&mut rng);
        match params.model {
            RunoffModel::Bucket => {
                let s = b.obs_noise;
                q.push(flow * (s * z - 0.5 * s * s).exp());
                flow = stores.step(b, params.snow_threshold, p[i], t[i]);
            }
            RunoffModel::LinearReservoir => {
                q.push(flow);
                let melt = 1.0 / (1.0 + (-(t[i] - params.snow_threshold) / params.snow_width).exp());
                let effective = p[i].powf(params.rain_exponent) * melt;
                let next = params.baseflow + params.recession * flow + params.runoff * effective;
                flow = (next + params.noise_sd * z).max(0.0);
            }
        }
    }
    BasinSeries::new(format!("synth-{seed}"), params.start_date, q, p, t)
}
