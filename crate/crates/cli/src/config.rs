//! Run configuration: built-in defaults, then a JSON file, then flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tmc_core::boosting::{AdaBoostConfig, TwoStageConfig};
use tmc_core::datagen::GeneratorConfig;
use tmc_core::eval::{Baseline, ForestConfig, KnnWeighting};
use tmc_core::lasso::LassoConfig;
use tmc_core::transfer::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub gen: GenSection,
    pub lasso: LassoConfig,
    pub boosting: TwoStageConfig,
    pub matching: MatchingSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            gen: GenSection::default(),
            lasso: LassoConfig::default(),
            boosting: TwoStageConfig::default(),
            matching: MatchingSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSection {
    pub intersections: usize,
    pub days: u32,
    pub approaches: usize,
    pub noise_scale: f64,
}

impl Default for GenSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        GenSection {
            intersections: 30,
            days: 2,
            approaches: g.n_approaches,
            noise_scale: g.noise_scale,
        }
    }
}

impl GenSection {
    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            n_approaches: self.approaches,
            noise_scale: self.noise_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingSection {
    pub substitution_fraction: f64,
}

impl Default for MatchingSection {
    fn default() -> Self {
        MatchingSection {
            substitution_fraction: PipelineConfig::default().substitution_fraction,
        }
    }
}

/// One model in an evaluation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Tl,
    Knn {
        k: usize,
        #[serde(default)]
        weighting: KnnWeighting,
    },
    Forest(ForestConfig),
    #[serde(rename = "adaboost_r2")]
    AdaBoost(AdaBoostConfig),
}

impl ModelSpec {
    pub const KINDS: [&'static str; 4] = ["tl", "knn", "forest", "adaboost_r2"];

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Tl => "tl",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::AdaBoost(_) => "adaboost_r2",
        }
    }

    pub fn default_for(kind: &str) -> Option<ModelSpec> {
        Some(match kind {
            "tl" => ModelSpec::Tl,
            "knn" => ModelSpec::Knn {
                k: 5,
                weighting: KnnWeighting::Uniform,
            },
            "forest" => ModelSpec::Forest(ForestConfig::default()),
            "adaboost_r2" => ModelSpec::AdaBoost(AdaBoostConfig::default()),
            _ => return None,
        })
    }

    pub fn baseline(&self) -> Option<Baseline> {
        match *self {
            ModelSpec::Tl => None,
            ModelSpec::Knn { k, weighting } => Some(Baseline::Knn { k, weighting }),
            ModelSpec::Forest(c) => Some(Baseline::Forest(c)),
            ModelSpec::AdaBoost(c) => Some(Baseline::AdaBoost(c)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub models: Vec<ModelSpec>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            models: ModelSpec::KINDS
                .iter()
                .filter_map(|k| ModelSpec::default_for(k))
                .collect(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        RunConfig::from_json(&text)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            lasso: self.lasso,
            boosting: self.boosting,
            substitution_fraction: self.matching.substitution_fraction,
            seed: self.seed,
        }
    }

    /// Range checks that serde cannot express.
    pub fn validate(&self) -> Result<(), String> {
        let g = &self.gen;
        if g.intersections == 0 || g.days == 0 {
            return Err("gen: intersections and days must be positive".into());
        }
        if !(3..=4).contains(&g.approaches) {
            return Err("gen: approaches must be 3 or 4".into());
        }
        if !(g.noise_scale >= 0.0 && g.noise_scale.is_finite()) {
            return Err("gen: noise_scale must be finite and nonnegative".into());
        }
        if self.lasso.grid_size == 0 || self.lasso.folds < 2 {
            return Err("lasso: grid_size must be positive and folds at least 2".into());
        }
        if !(self.lasso.solver.tol > 0.0) || self.lasso.solver.max_iter == 0 {
            return Err("lasso: tol and max_iter must be positive".into());
        }
        self.boosting.validate().map_err(|e| format!("boosting: {e}"))?;
        let f = self.matching.substitution_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err("matching: substitution_fraction must be in (0, 1]".into());
        }
        if self.eval.models.is_empty() {
            return Err("eval: models list is empty".into());
        }
        for m in &self.eval.models {
            match m {
                ModelSpec::Knn { k: 0, .. } => return Err("eval: knn needs k >= 1".into()),
                ModelSpec::Forest(c) if c.n_trees == 0 => return Err("eval: forest needs n_trees >= 1".into()),
                ModelSpec::Forest(c) => c.tree.validate().map_err(|e| format!("eval: forest: {e}"))?,
                ModelSpec::AdaBoost(c) if c.iterations == 0 => {
                    return Err("eval: adaboost_r2 needs iterations >= 1".into())
                }
                ModelSpec::AdaBoost(c) => c.tree.validate().map_err(|e| format!("eval: adaboost_r2: {e}"))?,
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert_eq!(RunConfig::from_json("{}").unwrap(), c);
        assert!(c.validate().is_ok());
        assert_eq!(c.boosting.steps, 10);
        assert_eq!(c.boosting.folds, 5);
        assert_eq!(c.matching.substitution_fraction, 0.10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"sed": 1}"#,
            r#"{"boosting": {"stepz": 3}}"#,
            r#"{"lasso": {"grid": 3}}"#,
            r#"{"gen": {"days": 2, "hours": 1}}"#,
            r#"{"eval": {"models": [{"kind": "svr"}]}}"#,
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn nested_fields_parse() {
        let c = RunConfig::from_json(
            r#"{"lasso": {"grid_size": 7, "tol": 1e-6},
                "boosting": {"steps": 4, "boost": {"iterations": 3, "tree": {"max_depth": 2}}},
                "eval": {"models": [{"kind": "knn", "k": 3}, {"kind": "tl"}]}}"#,
        )
        .unwrap();
        assert_eq!(c.lasso.grid_size, 7);
        assert_eq!(c.lasso.solver.tol, 1e-6);
        assert_eq!(c.boosting.steps, 4);
        assert_eq!(c.boosting.boost.tree.max_depth, 2);
        assert_eq!(c.boosting.boost.tree.min_samples_leaf, 5);
        assert_eq!(c.eval.models[0].kind(), "knn");
    }

    #[test]
    fn out_of_range_values_fail_validation() {
        for text in [
            r#"{"matching": {"substitution_fraction": 0}}"#,
            r#"{"boosting": {"folds": 1}}"#,
            r#"{"gen": {"approaches": 5}}"#,
            r#"{"eval": {"models": []}}"#,
        ] {
            assert!(RunConfig::from_json(text).unwrap().validate().is_err(), "{text}");
        }
    }
}
