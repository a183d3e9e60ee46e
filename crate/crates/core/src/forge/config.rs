use serde::{Deserialize, Serialize};

use super::ForgeError;
use crate::embedding::Metric;
use crate::gate::DEFAULT_MED_THRESHOLD;
use crate::oracle::MAX_PARAPHRASES;

/// How a detected number is moved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BnMode {
    /// Uniform in `[v(1-f), v(1+f)]`.
    Relative { fraction: f64 },
    /// Uniform in `[v-delta, v+delta]`, clamped at zero.
    Absolute { delta: f64 },
}

impl Default for BnMode {
    fn default() -> Self {
        BnMode::Relative { fraction: 0.20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeConfig {
    pub rng_seed: u64,
    pub bn_mode: BnMode,
    pub paraphrases_per_variant: usize,
    pub variants_per_entity: usize,
    pub ti_offset_range: [i64; 2],
    /// Nearest-neighbour cutoff for person swaps; `None` means pure top-k.
    pub tau_near: Option<f64>,
    /// Farthest-neighbour cutoff for place swaps; `None` means pure top-k.
    pub tau_far: Option<f64>,
    pub metric: Metric,
    pub med_threshold: usize,
    /// Latest year accepted from a QA answer; defaults to the current year.
    pub ti_max_year: Option<i64>,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            bn_mode: BnMode::default(),
            paraphrases_per_variant: MAX_PARAPHRASES,
            variants_per_entity: 5,
            ti_offset_range: [50, 150],
            tau_near: None,
            tau_far: None,
            metric: Metric::Euclidean,
            med_threshold: DEFAULT_MED_THRESHOLD,
            ti_max_year: None,
        }
    }
}

impl ForgeConfig {
    pub fn validate(&self) -> Result<(), ForgeError> {
        let bad = |m: String| Err(ForgeError::Config(m));
        match self.bn_mode {
            BnMode::Relative { fraction } if !(fraction > 0.0 && fraction < 1.0) => {
                return bad(format!("relative fraction must be in (0,1), got {fraction}"));
            }
            BnMode::Absolute { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return bad(format!("absolute delta must be positive, got {delta}"));
            }
            _ => {}
        }
        if !(1..=MAX_PARAPHRASES).contains(&self.paraphrases_per_variant) {
            return bad(format!(
                "paraphrases_per_variant must be in 1..={MAX_PARAPHRASES}, got {}",
                self.paraphrases_per_variant
            ));
        }
        if !(1..=5).contains(&self.variants_per_entity) {
            return bad(format!("variants_per_entity must be in 1..=5, got {}", self.variants_per_entity));
        }
        let [lo, hi] = self.ti_offset_range;
        if lo < 1 || lo > hi {
            return bad(format!("ti_offset_range [{lo},{hi}] is empty or non-positive"));
        }
        for (name, tau) in [("tau_near", self.tau_near), ("tau_far", self.tau_far)] {
            if let Some(t) = tau {
                if !(t > 0.0 && t.is_finite()) {
                    return bad(format!("{name} must be positive, got {t}"));
                }
            }
        }
        Ok(())
    }

    pub fn max_year(&self) -> i64 {
        self.ti_max_year.unwrap_or_else(|| {
            use chrono::Datelike;
            i64::from(chrono::Local::now().year())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ForgeConfig::default().validate().unwrap();
        assert_eq!(ForgeConfig::default().bn_mode, BnMode::Relative { fraction: 0.2 });
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ForgeConfig {
            bn_mode: BnMode::Relative { fraction: 1.0 },
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.bn_mode = BnMode::default();
        c.paraphrases_per_variant = 6;
        assert!(c.validate().is_err());
        c.paraphrases_per_variant = 5;
        c.ti_offset_range = [150, 50];
        assert!(c.validate().is_err());
    }

    #[test]
    fn bn_mode_serde_shape() {
        let v = serde_json::to_value(BnMode::Absolute { delta: 2.0 }).unwrap();
        assert_eq!(v, serde_json::json!({"mode": "absolute", "delta": 2.0}));
    }
}
