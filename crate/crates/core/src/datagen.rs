//! Synthetic multi-intersection networks with a known generating process.
//!
//! Per approach, day and peak bin, the approach volume is
//! `demand[bin] * approach_factor * day_factor * LN(0, sigma)`, split into
//! movements by the turn fractions. Event features are then derived from
//! the movement counts through a per-intersection detector calibration,
//! each with its own multiplicative lognormal noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::derive_seed;
use crate::schema::{
    encode_interval, peak_bin_time, Counts, Dataset, Feature, FeatureVector, Instance,
    InstanceKey, LeftTurnType, RoadType, INTERVAL_SECONDS, NUM_FEATURES, PEAK_BINS,
};

const APPROACH_IDS: [&str; 4] = ["N", "S", "E", "W"];
const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Number of demand-profile shapes; each carries its own detector behaviour.
pub const ARCHETYPES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneConfig {
    pub shared_left: u32,
    pub exclusive_left: u32,
    pub through: u32,
    pub exclusive_right: u32,
    pub shared_right: u32,
}

/// How detectors respond to traffic. Not observable in the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorCalibration {
    pub detections_per_vehicle: f64,
    /// Seconds of occupancy per vehicle.
    pub occupancy_per_vehicle: f64,
    /// Ratio of headway standard deviation to mean headway.
    pub gap_dispersion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionParams {
    pub id: String,
    pub lanes: LaneConfig,
    pub road_type: u8,
    pub left_turn_type: u8,
    /// Mean approach volume per peak bin.
    pub demand_profile: [f64; PEAK_BINS],
    pub poi_employees: u32,
    pub poi_categories: u32,
    /// Left, through, right.
    pub turn_fractions: [f64; 3],
    /// Lognormal sigma of every multiplicative noise term.
    pub noise_scale: f64,
    pub approach_factors: Vec<f64>,
    pub archetype: usize,
    pub calibration: DetectorCalibration,
    /// Signal cycle length in seconds.
    pub cycle_length: f64,
}

impl IntersectionParams {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.turn_fractions.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE || self.turn_fractions.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::argument(format!(
                "{}: turn fractions {:?} are not a simplex point",
                self.id, self.turn_fractions
            )));
        }
        if self.demand_profile.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::argument(format!("{}: negative demand", self.id)));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::argument(format!("{}: noise scale must be positive", self.id)));
        }
        if !(3..=4).contains(&self.approach_factors.len()) {
            return Err(Error::argument(format!(
                "{}: {} approaches, expected 3 or 4",
                self.id,
                self.approach_factors.len()
            )));
        }
        if !(self.cycle_length > 0.0) {
            return Err(Error::argument(format!("{}: cycle length must be positive", self.id)));
        }
        RoadType::from_code(self.road_type)?;
        LeftTurnType::from_code(self.left_turn_type)?;
        Ok(())
    }

    pub fn mean_demand(&self) -> f64 {
        self.demand_profile.iter().sum::<f64>() / PEAK_BINS as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub demand_scale: f64,
    /// Circular shift of the demand profile, in bins.
    pub profile_rotation: i32,
    pub turn_fraction_jitter: f64,
    pub lane_reconfig_prob: f64,
}

impl ShiftSpec {
    pub const NONE: ShiftSpec = ShiftSpec {
        demand_scale: 1.0,
        profile_rotation: 0,
        turn_fraction_jitter: 0.0,
        lane_reconfig_prob: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.demand_scale > 0.0 && self.demand_scale.is_finite()) {
            return Err(Error::argument("demand scale must be positive"));
        }
        if !(self.turn_fraction_jitter >= 0.0 && self.turn_fraction_jitter.is_finite()) {
            return Err(Error::argument("turn fraction jitter must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.lane_reconfig_prob) {
            return Err(Error::argument("lane reconfiguration probability outside [0, 1]"));
        }
        Ok(())
    }
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec::NONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub n_approaches: usize,
    pub noise_scale: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_approaches: 4,
            noise_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub dataset: Dataset,
    pub params: Vec<IntersectionParams>,
}

fn bump(x: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((x - center) / width).powi(2)).exp()
}

/// Relative demand per bin for each archetype: AM-heavy, PM-heavy, and a
/// midday-shoulder shape that rises through both windows.
fn archetype_shape(archetype: usize) -> [f64; PEAK_BINS] {
    std::array::from_fn(|b| {
        let (am, x) = (b < 8, (b % 8) as f64);
        match (archetype, am) {
            (0, true) => 0.35 + 0.65 * bump(x, 2.5, 1.5),
            (0, false) => 0.35 + 0.15 * bump(x, 4.0, 2.5),
            (1, true) => 0.25 + 0.10 * x / 7.0,
            (1, false) => 0.45 + 0.55 * bump(x, 5.0, 1.8),
            (_, true) => 0.30 + 0.50 * x / 7.0,
            (_, false) => 0.90 - 0.55 * x / 7.0,
        }
    })
}

/// Detector behaviour per archetype. Occupancy scales with the detection
/// rate, so the ratio of the two does not reveal the calibration.
fn archetype_calibration(archetype: usize) -> DetectorCalibration {
    let detections_per_vehicle = [1.0, 1.6, 0.7][archetype % ARCHETYPES];
    DetectorCalibration {
        detections_per_vehicle,
        occupancy_per_vehicle: 1.4 * detections_per_vehicle,
        gap_dispersion: 0.6,
    }
}

/// Peak approach volume range per archetype.
fn archetype_demand(archetype: usize) -> (f64, f64) {
    [(150.0, 240.0), (90.0, 170.0), (40.0, 100.0)][archetype % ARCHETYPES]
}

/// Draws the hidden parameters of one intersection.
pub fn sample_params<R: Rng>(index: usize, config: &GeneratorConfig, rng: &mut R) -> IntersectionParams {
    let archetype = index % ARCHETYPES;
    let (lo, hi) = archetype_demand(archetype);
    let peak = rng.random_range(lo..hi);
    let road = if peak >= 120.0 { RoadType::Major } else { RoadType::Minor };
    let shape = archetype_shape(archetype);
    let demand_profile = shape.map(|s| peak * s);
    let left = rng.random_range(0.08..0.25);
    let right = rng.random_range(0.08..0.20);
    let turn_fractions = [left, 1.0 - left - right, right];
    let left_turn_type = rng.random_range(1..=3u8);
    let lanes = LaneConfig {
        shared_left: u32::from(rng.random_bool(0.2)),
        exclusive_left: rng.random_range(1..=2),
        through: match road {
            RoadType::Major => rng.random_range(2..=3),
            RoadType::Minor => rng.random_range(1..=2),
        },
        exclusive_right: u32::from(rng.random_bool(0.5)),
        shared_right: u32::from(rng.random_bool(0.5)),
    };
    let base = archetype_calibration(archetype);
    let mut jitter = || rng.random_range(0.95..1.05);
    let calibration = DetectorCalibration {
        detections_per_vehicle: base.detections_per_vehicle * jitter(),
        occupancy_per_vehicle: base.occupancy_per_vehicle * jitter(),
        gap_dispersion: base.gap_dispersion * jitter(),
    };
    let approach_factors = (0..config.n_approaches)
        .map(|_| rng.random_range(0.6..1.4))
        .collect();
    IntersectionParams {
        id: format!("I{:03}", index + 1),
        lanes,
        road_type: road.code(),
        left_turn_type,
        demand_profile,
        poi_employees: rng.random_range(0..400),
        poi_categories: rng.random_range(0..25),
        turn_fractions,
        noise_scale: config.noise_scale,
        approach_factors,
        archetype,
        calibration,
        cycle_length: rng.random_range(90.0..150.0),
    }
}

/// Perturbs parameters to create a target domain. The zero shift is an
/// exact identity.
pub fn apply_shift(params: &IntersectionParams, shift: &ShiftSpec, seed: u64) -> Result<IntersectionParams> {
    params.validate()?;
    shift.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = params.clone();
    for d in &mut out.demand_profile {
        *d *= shift.demand_scale;
    }
    out.demand_profile
        .rotate_right(shift.profile_rotation.rem_euclid(PEAK_BINS as i32) as usize);
    if shift.turn_fraction_jitter > 0.0 {
        for p in &mut out.turn_fractions {
            let z: f64 = rng.sample(StandardNormal);
            *p *= (shift.turn_fraction_jitter * z).exp();
        }
        let total: f64 = out.turn_fractions.iter().sum();
        out.turn_fractions.iter_mut().for_each(|p| *p /= total);
    }
    if rng.random::<f64>() < shift.lane_reconfig_prob {
        let lanes = &mut out.lanes;
        lanes.through = if lanes.through > 1 && rng.random_bool(0.5) {
            lanes.through - 1
        } else {
            lanes.through + 1
        };
        lanes.exclusive_left = if lanes.exclusive_left == 1 { 2 } else { 1 };
        lanes.exclusive_right = 1 - lanes.exclusive_right.min(1);
    }
    Ok(out)
}

struct Noise {
    dist: LogNormal<f64>,
}

impl Noise {
    fn new(sigma: f64) -> Result<Noise> {
        LogNormal::new(0.0, sigma)
            .map(|dist| Noise { dist })
            .map_err(|e| Error::argument(e.to_string()))
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }
}

fn capped(seconds: f64) -> f64 {
    seconds.min(INTERVAL_SECONDS)
}

fn event_features<R: Rng>(
    p: &IntersectionParams,
    counts: &Counts,
    noise: &Noise,
    rng: &mut R,
) -> [f64; 13] {
    let cal = &p.calibration;
    let lt = LeftTurnType::from_code(p.left_turn_type).expect("validated");
    let cycles = INTERVAL_SECONDS / p.cycle_length;

    let d_tm = cal.detections_per_vehicle * counts.through * noise.draw(rng);
    let o_tm = capped(cal.occupancy_per_vehicle * counts.through * noise.draw(rng));
    let g_tm = capped(INTERVAL_SECONDS * (0.25 + 0.0015 * counts.through).min(0.75) * noise.draw(rng));
    let c_tm = cycles * noise.draw(rng);
    let m_tm = INTERVAL_SECONDS / (d_tm + 1.0) * noise.draw(rng);
    let s_tm = m_tm * cal.gap_dispersion * noise.draw(rng);

    let d_lm = cal.detections_per_vehicle * counts.left * noise.draw(rng);
    let o_lm = capped(cal.occupancy_per_vehicle * counts.left * noise.draw(rng));
    let protected = lt.has_protected_phase();
    let g_lm = if protected {
        capped(INTERVAL_SECONDS * (0.06 + 0.003 * counts.left).min(0.4) * noise.draw(rng))
    } else {
        0.0
    };
    let c_lm = if protected { cycles * noise.draw(rng) } else { 0.0 };
    let m_lm = INTERVAL_SECONDS / (d_lm + 1.0) * noise.draw(rng);
    let s_lm = m_lm * cal.gap_dispersion * noise.draw(rng);
    let p_lm = if lt.has_permissive_phase() {
        capped(0.8 * g_tm * noise.draw(rng))
    } else {
        0.0
    };
    [d_tm, o_tm, g_tm, c_tm, m_tm, s_tm, o_lm, d_lm, g_lm, c_lm, m_lm, s_lm, p_lm]
        .map(|v| v.max(0.0))
}

fn simulate_intersection(p: &IntersectionParams, n_days: u32, seed: u64) -> Result<Vec<Instance>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Noise::new(p.noise_scale)?;
    let day_noise = Noise::new(0.05)?;
    let day_factors: Vec<f64> = (0..n_days).map(|_| day_noise.draw(&mut rng)).collect();
    let mut out = Vec::with_capacity(n_days as usize * PEAK_BINS * p.approach_factors.len());
    for (a, &factor) in p.approach_factors.iter().enumerate() {
        for (day, &day_factor) in day_factors.iter().enumerate() {
            for bin in 0..PEAK_BINS {
                let volume = p.demand_profile[bin] * factor * day_factor * noise.draw(&mut rng);
                let counts = Counts {
                    left: volume * p.turn_fractions[0],
                    through: volume * p.turn_fractions[1],
                    right: volume * p.turn_fractions[2],
                };
                let ev = event_features(p, &counts, &noise, &mut rng);
                let (hour, quarter) = peak_bin_time(bin as u8)?;
                let (h_moh, h_hod) = encode_interval(hour, quarter)?;
                let mut values = [0.0; NUM_FEATURES];
                let [d_tm, o_tm, g_tm, c_tm, m_tm, s_tm, o_lm, d_lm, g_lm, c_lm, m_lm, s_lm, p_lm] = ev;
                let pairs = [
                    (Feature::OTm, o_tm),
                    (Feature::DTm, d_tm),
                    (Feature::GTm, g_tm),
                    (Feature::CTm, c_tm),
                    (Feature::MTm, m_tm),
                    (Feature::STm, s_tm),
                    (Feature::OLm, o_lm),
                    (Feature::DLm, d_lm),
                    (Feature::GLm, g_lm),
                    (Feature::CLm, c_lm),
                    (Feature::MLm, m_lm),
                    (Feature::SLm, s_lm),
                    (Feature::PLm, p_lm),
                    (Feature::LSl, p.lanes.shared_left as f64),
                    (Feature::LEl, p.lanes.exclusive_left as f64),
                    (Feature::LTl, p.lanes.through as f64),
                    (Feature::LEr, p.lanes.exclusive_right as f64),
                    (Feature::LSr, p.lanes.shared_right as f64),
                    (Feature::EPoie, p.poi_employees as f64),
                    (Feature::EPoic, p.poi_categories as f64),
                    (Feature::R, p.road_type as f64),
                    (Feature::L, p.left_turn_type as f64),
                    (Feature::HMoh, h_moh as f64),
                    (Feature::HHod, h_hod as f64),
                ];
                for (f, v) in pairs {
                    values[f.index()] = v;
                }
                out.push(Instance {
                    key: InstanceKey {
                        intersection_id: p.id.clone(),
                        approach_id: APPROACH_IDS[a].to_string(),
                        day_index: day as u32,
                        interval_index: bin as u8,
                    },
                    features: FeatureVector::new(values)?,
                    labels: Some(counts),
                });
            }
        }
    }
    Ok(out)
}

/// Generates observations for given parameters. Intersection `i` draws from
/// its own stream derived from `(seed, i)`.
pub fn simulate(params: &[IntersectionParams], n_days: u32, seed: u64) -> Result<Dataset> {
    if params.is_empty() || n_days == 0 {
        return Err(Error::argument("need at least one intersection and one day"));
    }
    let blocks = params
        .par_iter()
        .enumerate()
        .map(|(i, p)| simulate_intersection(p, n_days, derive_seed(seed, 2 * i as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(blocks.concat())
}

pub fn generate_network(n_intersections: usize, n_days: u32, seed: u64) -> Result<Network> {
    generate_network_with(&GeneratorConfig::default(), n_intersections, n_days, seed)
}

pub fn generate_network_with(
    config: &GeneratorConfig,
    n_intersections: usize,
    n_days: u32,
    seed: u64,
) -> Result<Network> {
    if n_intersections == 0 || n_days == 0 {
        return Err(Error::argument("need at least one intersection and one day"));
    }
    if !(3..=4).contains(&config.n_approaches) {
        return Err(Error::argument("approaches per intersection must be 3 or 4"));
    }
    let params: Vec<IntersectionParams> = (0..n_intersections)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 * i as u64));
            sample_params(i, config, &mut rng)
        })
        .collect();
    let dataset = simulate(&params, n_days, seed)?;
    Ok(Network { dataset, params })
}

/// Replaces every label with a nonnegative linear function of the given
/// predictors plus Gaussian noise; each movement gets its own scale.
pub fn relabel_linear(dataset: &Dataset, terms: &[(Feature, f64)], noise_sd: f64, seed: u64) -> Result<Dataset> {
    if terms.iter().any(|(_, c)| !(*c >= 0.0)) || !(noise_sd >= 0.0) {
        return Err(Error::argument("coefficients and noise must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = [0.3, 1.0, 0.2];
    let instances = dataset
        .instances()
        .iter()
        .map(|inst| {
            let signal: f64 = terms.iter().map(|(f, c)| c * inst.features.get(*f)).sum();
            let mut draw = |s: f64| {
                let z: f64 = rng.sample(StandardNormal);
                (s * signal + noise_sd * z).max(0.0)
            };
            let labels = Counts {
                left: draw(scales[0]),
                through: draw(scales[1]),
                right: draw(scales[2]),
            };
            Instance {
                labels: Some(labels),
                ..inst.clone()
            }
        })
        .collect();
    Dataset::new(instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::to_csv_string;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn instance_count() {
        let net = generate_network(1, 1, 3).unwrap();
        assert_eq!(net.dataset.len(), 16 * 4);
        let three = GeneratorConfig {
            n_approaches: 3,
            ..Default::default()
        };
        let net = generate_network_with(&three, 2, 3, 3).unwrap();
        assert_eq!(net.dataset.len(), 2 * 3 * 3 * 16);
        assert!(generate_network(0, 1, 0).is_err());
        assert!(generate_network(1, 0, 0).is_err());
    }

    #[test]
    fn deterministic_csv() {
        let a = generate_network(3, 2, 99).unwrap();
        let b = generate_network(3, 2, 99).unwrap();
        assert_eq!(to_csv_string(&a.dataset).unwrap(), to_csv_string(&b.dataset).unwrap());
        let c = generate_network(3, 2, 100).unwrap();
        assert_ne!(to_csv_string(&a.dataset).unwrap(), to_csv_string(&c.dataset).unwrap());
    }

    #[test]
    fn through_volume_tracks_configured_demand() {
        let net = generate_network(30, 2, 42).unwrap();
        let configured: Vec<f64> = net.params.iter().map(|p| p.mean_demand() * p.turn_fractions[1]).collect();
        let observed: Vec<f64> = net
            .params
            .iter()
            .map(|p| {
                let rows = net.dataset.intersection(&p.id);
                rows.iter().map(|i| i.labels.unwrap().through).sum::<f64>() / rows.len() as f64
            })
            .collect();
        let r = corr(&configured, &observed);
        assert!(r > 0.9, "r = {r}");
    }

    #[test]
    fn labels_sum_to_volume_and_features_are_informative() {
        let net = generate_network(12, 2, 5).unwrap();
        let rows = net.dataset.instances();
        let col = |f: Feature| rows.iter().map(|i| i.features.get(f)).collect::<Vec<_>>();
        let lab = |m: fn(&Counts) -> f64| rows.iter().map(|i| m(&i.labels.unwrap())).collect::<Vec<_>>();
        assert!(corr(&col(Feature::OTm), &lab(|c| c.through)) > 0.0);
        assert!(corr(&col(Feature::GLm), &lab(|c| c.left)) > 0.0);
        for inst in rows {
            let p = net.params.iter().find(|p| p.id == inst.key.intersection_id).unwrap();
            let c = inst.labels.unwrap();
            let volume = c.total();
            assert!((c.left - volume * p.turn_fractions[0]).abs() < 1e-6);
            let lt = inst.features.get(Feature::L);
            assert_eq!(inst.features.get(Feature::PLm) > 0.0, lt == 1.0 || lt == 2.0);
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let net = generate_network(2, 1, 8).unwrap();
        for p in &net.params {
            assert_eq!(&apply_shift(p, &ShiftSpec::NONE, 1).unwrap(), p);
        }
    }

    #[test]
    fn shift_components() {
        let p = generate_network(1, 1, 9).unwrap().params.remove(0);
        let doubled = apply_shift(
            &p,
            &ShiftSpec {
                demand_scale: 2.0,
                ..ShiftSpec::NONE
            },
            0,
        )
        .unwrap();
        for (a, b) in doubled.demand_profile.iter().zip(&p.demand_profile) {
            assert_eq!(*a, 2.0 * b);
        }
        let rotated = apply_shift(
            &p,
            &ShiftSpec {
                profile_rotation: 2,
                ..ShiftSpec::NONE
            },
            0,
        )
        .unwrap();
        assert_eq!(rotated.demand_profile[2], p.demand_profile[0]);
        assert_eq!(rotated.demand_profile[0], p.demand_profile[14]);
        let jittered = apply_shift(
            &p,
            &ShiftSpec {
                turn_fraction_jitter: 0.2,
                lane_reconfig_prob: 1.0,
                ..ShiftSpec::NONE
            },
            4,
        )
        .unwrap();
        assert!((jittered.turn_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(jittered.turn_fractions.iter().all(|&f| f > 0.0));
        assert_ne!(jittered.turn_fractions, p.turn_fractions);
        assert_ne!(jittered.lanes, p.lanes);
        assert!(apply_shift(
            &p,
            &ShiftSpec {
                demand_scale: -1.0,
                ..ShiftSpec::NONE
            },
            0
        )
        .is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = generate_network(1, 1, 9).unwrap().params.remove(0);
        p.turn_fractions = [0.5, 0.5, 0.5];
        assert!(simulate(&[p], 1, 0).is_err());
    }

    #[test]
    fn relabel_uses_given_terms() {
        let net = generate_network(3, 1, 2).unwrap();
        let data = relabel_linear(&net.dataset, &[(Feature::DTm, 1.0)], 0.0, 0).unwrap();
        for inst in data.instances() {
            assert!((inst.labels.unwrap().through - inst.features.get(Feature::DTm)).abs() < 1e-12);
        }
    }
}
