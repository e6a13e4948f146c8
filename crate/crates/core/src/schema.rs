//! Observation schema: the 24 predictors observed per approach and
//! 15-minute interval, the three movement-count labels, categorical
//! encodings, and row validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds in one 15-minute interval; bounds occupancy and green durations.
pub const INTERVAL_SECONDS: f64 = 900.0;

/// Number of predictor slots per observation.
pub const NUM_FEATURES: usize = 24;

/// Number of 15-minute bins per day covered by the data (07:00–09:00 and 16:00–18:00).
pub const PEAK_BINS: usize = 16;

const PEAK_START_HOURS: [u8; 2] = [7, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    OTm,
    DTm,
    GTm,
    CTm,
    MTm,
    STm,
    OLm,
    DLm,
    GLm,
    CLm,
    MLm,
    SLm,
    PLm,
    LSl,
    LEl,
    LTl,
    LEr,
    LSr,
    EPoie,
    EPoic,
    R,
    L,
    HMoh,
    HHod,
}

/// How a predictor behaves over time and which values it may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Aggregated controller events; varies per interval.
    Event,
    /// Lane counts; static per approach.
    Lanes,
    /// Points of interest around the intersection; static.
    Poi,
    /// Road-type and left-turn-type codes; static.
    Code,
    /// Minute-of-hour and hour-of-day codes.
    Calendar,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::OTm,
        Feature::DTm,
        Feature::GTm,
        Feature::CTm,
        Feature::MTm,
        Feature::STm,
        Feature::OLm,
        Feature::DLm,
        Feature::GLm,
        Feature::CLm,
        Feature::MLm,
        Feature::SLm,
        Feature::PLm,
        Feature::LSl,
        Feature::LEl,
        Feature::LTl,
        Feature::LEr,
        Feature::LSr,
        Feature::EPoie,
        Feature::EPoic,
        Feature::R,
        Feature::L,
        Feature::HMoh,
        Feature::HHod,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Feature> {
        Feature::ALL.get(index).copied()
    }

    /// Column name in CSV files.
    pub fn name(self) -> &'static str {
        match self {
            Feature::OTm => "o_tm",
            Feature::DTm => "d_tm",
            Feature::GTm => "g_tm",
            Feature::CTm => "c_tm",
            Feature::MTm => "m_tm",
            Feature::STm => "s_tm",
            Feature::OLm => "o_lm",
            Feature::DLm => "d_lm",
            Feature::GLm => "g_lm",
            Feature::CLm => "c_lm",
            Feature::MLm => "m_lm",
            Feature::SLm => "s_lm",
            Feature::PLm => "p_lm",
            Feature::LSl => "l_sl",
            Feature::LEl => "l_el",
            Feature::LTl => "l_tl",
            Feature::LEr => "l_er",
            Feature::LSr => "l_sr",
            Feature::EPoie => "e_poie",
            Feature::EPoic => "e_poic",
            Feature::R => "r",
            Feature::L => "l",
            Feature::HMoh => "h_moh",
            Feature::HHod => "h_hod",
        }
    }

    /// Human-readable description used in coefficient tables.
    pub fn description(self) -> &'static str {
        match self {
            Feature::OTm => "Through movement detector occupancy time",
            Feature::DTm => "Through movement detector trigger counts",
            Feature::GTm => "Through movement green time duration",
            Feature::CTm => "Through movement cycle counts",
            Feature::MTm => "Through movement average of time differences between each pair of consecutive detections",
            Feature::STm => "Through movement standard deviation of time differences between each pair of consecutive detections",
            Feature::OLm => "Left-turn movement detector occupancy time",
            Feature::DLm => "Left-turn movement detector trigger counts",
            Feature::GLm => "Left-turn movement green time duration",
            Feature::CLm => "Left-turn movement cycle counts",
            Feature::MLm => "Left-turn movement average of time differences between each pair of consecutive detections",
            Feature::SLm => "Left-turn movement standard deviation of time differences between each pair of consecutive detections",
            Feature::PLm => "Left-turn movement permissive green time",
            Feature::LSl => "Number of shared left turn lanes",
            Feature::LEl => "Number of exclusive left turn lanes",
            Feature::LTl => "Number of through lanes",
            Feature::LEr => "Number of exclusive right turn lanes",
            Feature::LSr => "Number of shared right turn lanes",
            Feature::EPoie => "Number of employees of all POI",
            Feature::EPoic => "POI categories count",
            Feature::R => "Road type",
            Feature::L => "Left-turn type",
            Feature::HMoh => "Minute-of-hour",
            Feature::HHod => "Hour-of-day",
        }
    }

    pub fn kind(self) -> FeatureKind {
        use Feature::*;
        match self {
            OTm | DTm | GTm | CTm | MTm | STm | OLm | DLm | GLm | CLm | MLm | SLm | PLm => {
                FeatureKind::Event
            }
            LSl | LEl | LTl | LEr | LSr => FeatureKind::Lanes,
            EPoie | EPoic => FeatureKind::Poi,
            R | L => FeatureKind::Code,
            HMoh | HHod => FeatureKind::Calendar,
        }
    }

    /// True for traffic variables that change from interval to interval.
    pub fn is_time_varying(self) -> bool {
        self.kind() == FeatureKind::Event
    }

    fn is_integer(self) -> bool {
        self.kind() != FeatureKind::Event
    }

    /// Durations that cannot exceed one interval.
    fn is_bounded_duration(self) -> bool {
        matches!(
            self,
            Feature::OTm | Feature::GTm | Feature::OLm | Feature::GLm | Feature::PLm
        )
    }

    fn check(self, value: f64) -> std::result::Result<(), String> {
        if !value.is_finite() {
            return Err("value is not finite".into());
        }
        if value < 0.0 {
            return Err(format!("negative value {value}"));
        }
        if self.is_integer() && value.fract() != 0.0 {
            return Err(format!("expected an integer, got {value}"));
        }
        if self.is_bounded_duration() && value > INTERVAL_SECONDS {
            return Err(format!(
                "range: {value} s exceeds interval length of {INTERVAL_SECONDS} s"
            ));
        }
        match self {
            Feature::R => RoadType::from_code(value as u8)
                .map(drop)
                .map_err(|e| e.to_string()),
            Feature::L => LeftTurnType::from_code(value as u8)
                .map(drop)
                .map_err(|e| e.to_string()),
            Feature::HMoh if !(1.0..=4.0).contains(&value) => {
                Err(format!("minute-of-hour code {value} outside 1..=4"))
            }
            Feature::HHod if value > 23.0 => Err(format!("hour-of-day code {value} outside 0..=23")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownCode {
                kind: "feature",
                token: s.to_string(),
            })
    }
}

/// The 24 predictor names in canonical order.
pub fn variable_names() -> [&'static str; NUM_FEATURES] {
    Feature::ALL.map(Feature::name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadType {
    Major,
    Minor,
}

impl RoadType {
    pub fn code(self) -> u8 {
        match self {
            RoadType::Major => 1,
            RoadType::Minor => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(RoadType::Major),
            2 => Ok(RoadType::Minor),
            _ => Err(Error::UnknownCode {
                kind: "road type code",
                token: code.to_string(),
            }),
        }
    }
}

impl FromStr for RoadType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "major" => Ok(RoadType::Major),
            "minor" => Ok(RoadType::Minor),
            _ => Err(Error::UnknownCode {
                kind: "road type",
                token: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftTurnType {
    Permissive,
    ProtectedPermissive,
    Protected,
}

impl LeftTurnType {
    pub fn code(self) -> u8 {
        match self {
            LeftTurnType::Permissive => 1,
            LeftTurnType::ProtectedPermissive => 2,
            LeftTurnType::Protected => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(LeftTurnType::Permissive),
            2 => Ok(LeftTurnType::ProtectedPermissive),
            3 => Ok(LeftTurnType::Protected),
            _ => Err(Error::UnknownCode {
                kind: "left-turn type code",
                token: code.to_string(),
            }),
        }
    }

    /// Whether left-turners get any permissive green.
    pub fn has_permissive_phase(self) -> bool {
        self != LeftTurnType::Protected
    }

    /// Whether left-turners get a protected arrow.
    pub fn has_protected_phase(self) -> bool {
        self != LeftTurnType::Permissive
    }
}

impl FromStr for LeftTurnType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "permissive" => Ok(LeftTurnType::Permissive),
            "protected_permissive" => Ok(LeftTurnType::ProtectedPermissive),
            "protected" => Ok(LeftTurnType::Protected),
            _ => Err(Error::UnknownCode {
                kind: "left-turn type",
                token: s.to_string(),
            }),
        }
    }
}

pub fn encode_road_type(kind: &str) -> Result<u8> {
    kind.parse::<RoadType>().map(RoadType::code)
}

pub fn encode_left_turn_type(kind: &str) -> Result<u8> {
    kind.parse::<LeftTurnType>().map(LeftTurnType::code)
}

/// Maps `(hour, quarter)` to `(h_moh, h_hod)`.
pub fn encode_interval(hour: u8, quarter: u8) -> Result<(u8, u8)> {
    if hour > 23 {
        return Err(Error::argument(format!("hour {hour} outside 0..=23")));
    }
    if quarter > 3 {
        return Err(Error::argument(format!("quarter {quarter} outside 0..=3")));
    }
    Ok((quarter + 1, hour))
}

/// Inverse of [`encode_interval`].
pub fn decode_interval(h_moh: u8, h_hod: u8) -> Result<(u8, u8)> {
    if !(1..=4).contains(&h_moh) || h_hod > 23 {
        return Err(Error::argument(format!(
            "interval codes ({h_moh}, {h_hod}) out of range"
        )));
    }
    Ok((h_hod, h_moh - 1))
}

/// `(hour, quarter)` of a peak bin.
pub fn peak_bin_time(interval_index: u8) -> Result<(u8, u8)> {
    if interval_index as usize >= PEAK_BINS {
        return Err(Error::argument(format!(
            "interval index {interval_index} outside 0..{PEAK_BINS}"
        )));
    }
    let window = (interval_index / 8) as usize;
    let within = interval_index % 8;
    Ok((PEAK_START_HOURS[window] + within / 4, within % 4))
}

/// Peak bin for `(hour, quarter)`, or `None` outside the peak windows.
pub fn peak_bin_index(hour: u8, quarter: u8) -> Option<u8> {
    PEAK_START_HOURS
        .iter()
        .enumerate()
        .find_map(|(w, &start)| {
            (hour >= start && hour < start + 2 && quarter < 4)
                .then(|| w as u8 * 8 + (hour - start) * 4 + quarter)
        })
}

/// The 24 predictors of one observation, stored in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector([f64; NUM_FEATURES]);

impl FeatureVector {
    /// Builds a vector, checking every slot against its domain.
    pub fn new(values: [f64; NUM_FEATURES]) -> Result<Self> {
        for (f, &v) in Feature::ALL.iter().zip(values.iter()) {
            f.check(v).map_err(|reason| Error::Validation {
                row: 0,
                field: f.name().to_string(),
                reason,
            })?;
        }
        Ok(FeatureVector(values))
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.0[feature.index()]
    }

    pub fn values(&self) -> &[f64; NUM_FEATURES] {
        &self.0
    }

    pub fn select(&self, features: &[Feature]) -> Vec<f64> {
        features.iter().map(|&f| self.get(f)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Left,
    Through,
    Right,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Left, Movement::Through, Movement::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label_column(self) -> &'static str {
        match self {
            Movement::Left => "v_lm",
            Movement::Through => "v_tm",
            Movement::Right => "v_rm",
        }
    }

    /// Column heading in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Movement::Left => "Left-turn",
            Movement::Through => "Through",
            Movement::Right => "Right-turn",
        }
    }
}

/// Left, through and right counts for one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub left: f64,
    pub through: f64,
    pub right: f64,
}

impl Counts {
    pub fn get(&self, movement: Movement) -> f64 {
        match movement {
            Movement::Left => self.left,
            Movement::Through => self.through,
            Movement::Right => self.right,
        }
    }

    pub fn total(&self) -> f64 {
        self.left + self.through + self.right
    }
}

/// Identifies one observation within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub intersection_id: String,
    pub approach_id: String,
    pub day_index: u32,
    pub interval_index: u8,
}

/// One approach and interval: predictors plus, when known, the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub key: InstanceKey,
    pub features: FeatureVector,
    pub labels: Option<Counts>,
}

impl Instance {
    pub fn intersection_id(&self) -> &str {
        &self.key.intersection_id
    }

    /// Same instance with its labels removed.
    pub fn unlabeled(&self) -> Instance {
        Instance {
            labels: None,
            ..self.clone()
        }
    }

    pub fn label(&self, movement: Movement) -> Option<f64> {
        self.labels.map(|c| c.get(movement))
    }
}

/// Column names of the observation CSV, in canonical order.
pub fn csv_columns() -> Vec<&'static str> {
    let mut cols = vec!["intersection_id", "approach_id", "day_index", "interval_index"];
    cols.extend(variable_names());
    cols.extend(Movement::ALL.map(Movement::label_column));
    cols
}

/// A single CSV row by column name. Absent or empty cells are `None`.
pub type RawRecord<'a> = BTreeMap<&'a str, Option<&'a str>>;

fn field<'a>(raw: &RawRecord<'a>, row: usize, name: &str) -> Result<&'a str> {
    match raw.get(name).copied().flatten().map(str::trim) {
        Some(token) if !token.is_empty() => Ok(token),
        _ => Err(Error::Validation {
            row,
            field: name.to_string(),
            reason: "missing field".into(),
        }),
    }
}

fn parse_number(token: &str, row: usize, name: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::Validation {
        row,
        field: name.to_string(),
        reason: format!("non-numeric token `{token}`"),
    })
}

fn parse_integer<T: FromStr>(token: &str, row: usize, name: &str) -> Result<T> {
    token.parse::<T>().map_err(|_| Error::Validation {
        row,
        field: name.to_string(),
        reason: format!("expected a nonnegative integer, got `{token}`"),
    })
}

/// Validates one raw record. When `require_labels` is false all three label
/// cells may be empty together, giving an unlabeled instance.
pub fn validate_instance(raw: &RawRecord<'_>, row: usize, require_labels: bool) -> Result<Instance> {
    let intersection_id = field(raw, row, "intersection_id")?.to_string();
    let approach_id = field(raw, row, "approach_id")?.to_string();
    let day_index = parse_integer::<u32>(field(raw, row, "day_index")?, row, "day_index")?;
    let interval_index =
        parse_integer::<u8>(field(raw, row, "interval_index")?, row, "interval_index")?;
    let (hour, quarter) = peak_bin_time(interval_index).map_err(|_| Error::Validation {
        row,
        field: "interval_index".into(),
        reason: format!("{interval_index} is not one of the {PEAK_BINS} peak bins"),
    })?;

    let mut values = [0.0; NUM_FEATURES];
    for f in Feature::ALL {
        let v = parse_number(field(raw, row, f.name())?, row, f.name())?;
        f.check(v).map_err(|reason| Error::Validation {
            row,
            field: f.name().to_string(),
            reason,
        })?;
        values[f.index()] = v;
    }
    let expected = encode_interval(hour, quarter)?;
    let found = (values[Feature::HMoh.index()], values[Feature::HHod.index()]);
    if found != (expected.0 as f64, expected.1 as f64) {
        return Err(Error::Validation {
            row,
            field: "h_moh/h_hod".into(),
            reason: format!(
                "codes ({}, {}) disagree with interval_index {interval_index} (expected {:?})",
                found.0, found.1, expected
            ),
        });
    }

    let cells: Vec<Option<&str>> = Movement::ALL
        .iter()
        .map(|m| {
            raw.get(m.label_column())
                .copied()
                .flatten()
                .map(str::trim)
                .filter(|t| !t.is_empty())
        })
        .collect();
    let labels = if cells.iter().all(Option::is_none) && !require_labels {
        None
    } else {
        let mut counts = [0.0; 3];
        for (m, cell) in Movement::ALL.iter().zip(&cells) {
            let name = m.label_column();
            let token = cell.ok_or_else(|| Error::Validation {
                row,
                field: name.to_string(),
                reason: "missing field".into(),
            })?;
            let v = parse_number(token, row, name)?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation {
                    row,
                    field: name.to_string(),
                    reason: format!("count must be a finite nonnegative number, got {v}"),
                });
            }
            counts[m.index()] = v;
        }
        Some(Counts {
            left: counts[0],
            through: counts[1],
            right: counts[2],
        })
    };

    Ok(Instance {
        key: InstanceKey {
            intersection_id,
            approach_id,
            day_index,
            interval_index,
        },
        features: FeatureVector(values),
        labels,
    })
}

/// An ordered collection of validated instances with unique keys.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, inst) in instances.iter().enumerate() {
            if !seen.insert(&inst.key) {
                return Err(Error::Validation {
                    row: i + 1,
                    field: "key".into(),
                    reason: format!("duplicate observation key {:?}", inst.key),
                });
            }
        }
        Ok(Dataset { instances })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn variable_names(&self) -> [&'static str; NUM_FEATURES] {
        variable_names()
    }

    /// Distinct intersection ids, sorted.
    pub fn intersection_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.instances.iter().map(Instance::intersection_id).collect();
        ids.into_iter().map(str::to_string).collect()
    }

    /// Instances of one intersection, in dataset order.
    pub fn intersection(&self, id: &str) -> Vec<&Instance> {
        self.instances
            .iter()
            .filter(|i| i.intersection_id() == id)
            .collect()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.instances.iter().all(|i| i.labels.is_some())
    }

    /// Splits into (instances of `id`, everything else).
    pub fn split_out(&self, id: &str) -> (Vec<Instance>, Vec<Instance>) {
        self.instances
            .iter()
            .cloned()
            .partition(|i| i.intersection_id() == id)
    }

    /// Copy of the dataset with every label removed.
    pub fn unlabeled(&self) -> Dataset {
        Dataset {
            instances: self.instances.iter().map(Instance::unlabeled).collect(),
        }
    }
}

/// Row-major design matrix over `features` for the given instances.
pub fn design_matrix<'a, I>(instances: I, features: &[Feature]) -> Array2<f64>
where
    I: IntoIterator<Item = &'a Instance>,
{
    let rows: Vec<f64> = instances
        .into_iter()
        .flat_map(|inst| features.iter().map(move |&f| inst.features.get(f)))
        .collect();
    let n = rows.len() / features.len().max(1);
    Array2::from_shape_vec((n, features.len()), rows).expect("row-major layout")
}

/// Label vector for one movement; fails on unlabeled instances.
pub fn label_vector<'a, I>(instances: I, movement: Movement) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a Instance>,
{
    instances
        .into_iter()
        .map(|inst| {
            inst.label(movement).ok_or_else(|| {
                Error::argument(format!("instance {:?} has no labels", inst.key))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_tokens() -> Vec<(&'static str, String)> {
        let mut v: Vec<(&str, String)> = vec![
            ("intersection_id", "I01".into()),
            ("approach_id", "N".into()),
            ("day_index", "0".into()),
            ("interval_index", "5".into()),
        ];
        let values = [
            300.0, 120.0, 400.0, 8.0, 7.5, 6.0, 80.0, 30.0, 90.0, 8.0, 29.0, 25.0, 100.0, 0.0,
            1.0, 2.0, 1.0, 0.0, 350.0, 12.0, 1.0, 2.0, 2.0, 8.0,
        ];
        for (f, x) in Feature::ALL.iter().zip(values) {
            v.push((f.name(), x.to_string()));
        }
        v.push(("v_lm", "20".into()));
        v.push(("v_tm", "110".into()));
        v.push(("v_rm", "15.5".into()));
        v
    }

    fn as_raw<'a>(tokens: &'a [(&'static str, String)]) -> RawRecord<'a> {
        tokens.iter().map(|(k, v)| (*k, Some(v.as_str()))).collect()
    }

    #[test]
    fn road_and_left_turn_codes() {
        assert_eq!(encode_road_type("major").unwrap(), 1);
        assert_eq!(encode_road_type("minor").unwrap(), 2);
        let err = encode_road_type("arterial").unwrap_err();
        assert!(err.to_string().contains("arterial"));
        assert_eq!(encode_left_turn_type("permissive").unwrap(), 1);
        assert_eq!(encode_left_turn_type("protected_permissive").unwrap(), 2);
        assert_eq!(encode_left_turn_type("protected").unwrap(), 3);
        assert!(encode_left_turn_type("flashing_yellow").is_err());
    }

    #[test]
    fn categorical_round_trips() {
        for r in [RoadType::Major, RoadType::Minor] {
            assert_eq!(RoadType::from_code(r.code()).unwrap(), r);
        }
        for l in [
            LeftTurnType::Permissive,
            LeftTurnType::ProtectedPermissive,
            LeftTurnType::Protected,
        ] {
            assert_eq!(LeftTurnType::from_code(l.code()).unwrap(), l);
        }
        for hour in 0..24 {
            for quarter in 0..4 {
                let (moh, hod) = encode_interval(hour, quarter).unwrap();
                assert_eq!(decode_interval(moh, hod).unwrap(), (hour, quarter));
            }
        }
    }

    #[test]
    fn interval_encoding() {
        assert_eq!(encode_interval(0, 0).unwrap(), (1, 0));
        assert_eq!(encode_interval(23, 3).unwrap(), (4, 23));
        assert!(encode_interval(24, 0).is_err());
        assert!(encode_interval(3, 4).is_err());
    }

    #[test]
    fn peak_bins_cover_both_windows() {
        let times: Vec<_> = (0..16).map(|b| peak_bin_time(b).unwrap()).collect();
        assert_eq!(times[0], (7, 0));
        assert_eq!(times[7], (8, 3));
        assert_eq!(times[8], (16, 0));
        assert_eq!(times[15], (17, 3));
        for (b, &(h, q)) in times.iter().enumerate() {
            assert_eq!(peak_bin_index(h, q), Some(b as u8));
        }
        assert_eq!(peak_bin_index(12, 0), None);
        assert!(peak_bin_time(16).is_err());
    }

    #[test]
    fn valid_row_parses() {
        let tokens = row_tokens();
        let inst = validate_instance(&as_raw(&tokens), 2, true).unwrap();
        assert_eq!(inst.key.interval_index, 5);
        assert_eq!(inst.features.get(Feature::GTm), 400.0);
        assert_eq!(inst.labels.unwrap().right, 15.5);
    }

    #[test]
    fn green_time_over_interval_is_rejected() {
        let mut tokens = row_tokens();
        tokens.iter_mut().find(|(k, _)| *k == "g_tm").unwrap().1 = "1200".into();
        match validate_instance(&as_raw(&tokens), 7, true).unwrap_err() {
            Error::Validation { row, field, reason } => {
                assert_eq!(row, 7);
                assert_eq!(field, "g_tm");
                assert!(reason.contains("range"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_poi_categories_is_reported() {
        let tokens: Vec<_> = row_tokens().into_iter().filter(|(k, _)| *k != "e_poic").collect();
        match validate_instance(&as_raw(&tokens), 3, true).unwrap_err() {
            Error::Validation { field, reason, .. } => {
                assert_eq!(field, "e_poic");
                assert_eq!(reason, "missing field");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn off_peak_and_inconsistent_codes_are_rejected() {
        let mut tokens = row_tokens();
        tokens.iter_mut().find(|(k, _)| *k == "interval_index").unwrap().1 = "20".into();
        assert!(validate_instance(&as_raw(&tokens), 1, true).is_err());

        let mut tokens = row_tokens();
        tokens.iter_mut().find(|(k, _)| *k == "h_hod").unwrap().1 = "9".into();
        assert!(validate_instance(&as_raw(&tokens), 1, true).is_err());
    }

    #[test]
    fn empty_labels_allowed_only_for_targets() {
        let mut tokens = row_tokens();
        for (k, v) in tokens.iter_mut() {
            if k.starts_with("v_") {
                v.clear();
            }
        }
        assert!(validate_instance(&as_raw(&tokens), 1, true).is_err());
        let inst = validate_instance(&as_raw(&tokens), 1, false).unwrap();
        assert!(inst.labels.is_none());
    }

    #[test]
    fn duplicate_keys_rejected() {
        let tokens = row_tokens();
        let inst = validate_instance(&as_raw(&tokens), 1, true).unwrap();
        assert!(Dataset::new(vec![inst.clone(), inst]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn validation_never_panics(tokens in proptest::collection::vec(".{0,6}", 31)) {
            let cols = csv_columns();
            let raw: RawRecord<'_> = cols.iter().zip(tokens.iter()).map(|(c, t)| (*c, Some(t.as_str()))).collect();
            let _ = validate_instance(&raw, 1, false);
        }
    }
}
