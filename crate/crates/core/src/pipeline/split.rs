use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

const STREAM_SPLIT: u64 = 0x5350_4c54;
const STREAM_BOOTSTRAP: u64 = 0x424f_4f54;

/// Which rows an evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Dev,
    Test,
}

impl SplitLabel {
    pub const ALL: [SplitLabel; 3] = [SplitLabel::Train, SplitLabel::Dev, SplitLabel::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Dev => "dev",
            SplitLabel::Test => "test",
        }
    }

    pub fn code(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Fraction of samples used for feature learning (`I`).
    pub learn_fraction: f64,
    /// Fraction of `I` held out as development rows.
    pub dev_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            learn_fraction: 0.5,
            dev_fraction: 0.125,
            seed: 0,
        }
    }
}

/// Disjoint learning (`I` = train ∪ dev) and inference (`I^C`) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n: usize,
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub infer: Vec<usize>,
    pub learn_fraction: f64,
    pub dev_fraction: f64,
    pub seed: u64,
}

impl SplitPlan {
    /// `I`, sorted.
    pub fn learn(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.train.iter().chain(&self.dev).copied().collect();
        v.sort_unstable();
        v
    }

    pub fn rows(&self, label: SplitLabel) -> &[usize] {
        match label {
            SplitLabel::Train => &self.train,
            SplitLabel::Dev => &self.dev,
            SplitLabel::Test => &self.infer,
        }
    }

    /// Split label of every sample.
    pub fn labels(&self) -> Vec<SplitLabel> {
        let mut out = vec![SplitLabel::Test; self.n];
        for &i in &self.train {
            out[i] = SplitLabel::Train;
        }
        for &i in &self.dev {
            out[i] = SplitLabel::Dev;
        }
        out
    }
}

/// Uniformly random partition of `0..n` determined by `cfg.seed`. `|I|` is
/// `round(learn_fraction · n)` and the dev rows are `round(dev_fraction · |I|)`
/// of those; every part except dev keeps at least one row.
pub fn split_samples(n: usize, cfg: &SplitConfig) -> Result<SplitPlan> {
    if n < 10 {
        return Err(Error::Data(format!(
            "splitting needs at least 10 samples, got {n}"
        )));
    }
    if !(cfg.learn_fraction > 0.0 && cfg.learn_fraction < 1.0) {
        return Err(Error::Config(format!(
            "learn fraction must lie in (0, 1), got {}",
            cfg.learn_fraction
        )));
    }
    if !(cfg.dev_fraction >= 0.0 && cfg.dev_fraction < 1.0) {
        return Err(Error::Config(format!(
            "dev fraction must lie in [0, 1), got {}",
            cfg.dev_fraction
        )));
    }
    let n_learn = ((cfg.learn_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let n_dev = ((cfg.dev_fraction * n_learn as f64).round() as usize).min(n_learn - 1);

    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::derive(cfg.seed, &[STREAM_SPLIT]);
    perm.shuffle(&mut rng);
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitPlan {
        n,
        dev: sorted(&perm[..n_dev]),
        train: sorted(&perm[n_dev..n_learn]),
        infer: sorted(&perm[n_learn..]),
        learn_fraction: cfg.learn_fraction,
        dev_fraction: cfg.dev_fraction,
        seed: cfg.seed,
    })
}

/// `b` bootstrap multisets, each `|train|` draws with replacement from the
/// train rows. Replicate `r` uses the stream derived from `(seed, r)`.
pub fn bootstrap_indices(plan: &SplitPlan, b: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if b == 0 {
        return Err(Error::Config(
            "need at least one bootstrap replicate".into(),
        ));
    }
    let train = &plan.train;
    let boots: Vec<Vec<usize>> = (0..b)
        .map(|r| {
            let mut rng = RngStream::derive(seed, &[STREAM_BOOTSTRAP, r as u64]);
            (0..train.len())
                .map(|_| train[rng.index(train.len())])
                .collect()
        })
        .collect();
    check_no_leakage(plan, &boots)?;
    Ok(boots)
}

/// Fails if any bootstrap row belongs to the inference or dev set.
pub fn check_no_leakage(plan: &SplitPlan, boots: &[Vec<usize>]) -> Result<()> {
    let held: BTreeSet<usize> = plan.infer.iter().chain(&plan.dev).copied().collect();
    for (b, idx) in boots.iter().enumerate() {
        if let Some(i) = idx.iter().find(|i| held.contains(i)) {
            return Err(Error::Data(format!(
                "bootstrap replicate {b} contains held-out row {i}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_disjointness() {
        let cfg = SplitConfig {
            learn_fraction: 0.5,
            dev_fraction: 0.0,
            seed: 4,
        };
        let p = split_samples(100, &cfg).unwrap();
        assert_eq!((p.learn().len(), p.infer.len()), (50, 50));
        let p = split_samples(
            100,
            &SplitConfig {
                learn_fraction: 0.9,
                ..SplitConfig::default()
            },
        )
        .unwrap();
        assert_eq!(p.infer.len(), 10);
        assert_eq!(p.dev.len(), 11);
        let mut all: Vec<usize> = p
            .learn()
            .into_iter()
            .chain(p.infer.iter().copied())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(
            p,
            split_samples(
                100,
                &SplitConfig {
                    learn_fraction: 0.9,
                    ..SplitConfig::default()
                }
            )
            .unwrap()
        );
    }

    #[test]
    fn invalid_inputs() {
        assert!(split_samples(9, &SplitConfig::default()).is_err());
        assert!(split_samples(
            20,
            &SplitConfig {
                learn_fraction: 1.0,
                ..SplitConfig::default()
            }
        )
        .is_err());
        assert!(split_samples(
            20,
            &SplitConfig {
                dev_fraction: -0.1,
                ..SplitConfig::default()
            }
        )
        .is_err());
    }

    #[test]
    fn bootstrap_stays_in_train() {
        let p = split_samples(60, &SplitConfig::default()).unwrap();
        let boots = bootstrap_indices(&p, 4, 1).unwrap();
        assert_eq!(boots.len(), 4);
        assert!(boots
            .iter()
            .all(|b| b.len() == p.train.len() && b.iter().all(|i| p.train.contains(i))));
        assert_eq!(boots, bootstrap_indices(&p, 4, 1).unwrap());
        let bad = vec![vec![p.infer[0]]];
        assert!(check_no_leakage(&p, &bad).is_err());
    }
}
