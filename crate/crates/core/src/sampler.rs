//! Selection of in-context demonstrations from the evaluated dataset.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{Dataset, EvalRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplerError {
    #[error("cannot sample from an empty dataset")]
    EmptyDataset,
    #[error("sample size must be at least 1")]
    ZeroK,
    #[error("unknown sampler kind `{0}` (expected top_k, uniform or none)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    TopK,
    Uniform,
    None,
}

impl SamplerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::TopK => "top_k",
            SamplerKind::Uniform => "uniform",
            SamplerKind::None => "none",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top_k" => Ok(SamplerKind::TopK),
            "uniform" => Ok(SamplerKind::Uniform),
            "none" => Ok(SamplerKind::None),
            other => Err(SamplerError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub k: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kind: SamplerKind::TopK,
            k: 5,
        }
    }
}

impl SamplerConfig {
    /// Demonstrations for the next prompt. `none` yields an empty list.
    pub fn select<R: Rng + ?Sized>(&self, dataset: &Dataset, rng: &mut R) -> Result<Vec<EvalRecord>, SamplerError> {
        match self.kind {
            SamplerKind::TopK => top_k(dataset, self.k),
            SamplerKind::Uniform => {
                let mut picked = uniform_k(dataset, self.k, rng)?;
                // prompts expect descending fom
                picked.sort_by(|a, b| b.fom.total_cmp(&a.fom));
                Ok(picked)
            }
            SamplerKind::None => Ok(Vec::new()),
        }
    }
}

/// The `k` highest-fom records, descending; earlier records win ties.
pub fn top_k(dataset: &Dataset, k: usize) -> Result<Vec<EvalRecord>, SamplerError> {
    if k == 0 {
        return Err(SamplerError::ZeroK);
    }
    if dataset.is_empty() {
        return Err(SamplerError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let recs = dataset.records();
    order.sort_by(|&a, &b| recs[b].fom.total_cmp(&recs[a].fom));
    Ok(order.into_iter().take(k).map(|i| recs[i].clone()).collect())
}

/// `k` records drawn uniformly without replacement, in draw order.
pub fn uniform_k<R: Rng + ?Sized>(dataset: &Dataset, k: usize, rng: &mut R) -> Result<Vec<EvalRecord>, SamplerError> {
    if k == 0 {
        return Err(SamplerError::ZeroK);
    }
    if dataset.is_empty() {
        return Err(SamplerError::EmptyDataset);
    }
    let n = dataset.len();
    let picks = index::sample(rng, n, k.min(n));
    Ok(picks.into_iter().map(|i| dataset.records()[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignPoint, Source};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(i: usize, fom: f64) -> EvalRecord {
        EvalRecord {
            point: DesignPoint::new(vec![i as f64]),
            metrics: Default::default(),
            regions: Default::default(),
            simulation_ok: true,
            fom,
            source: Source::Random,
            iteration: 0,
        }
    }

    fn dataset(foms: &[f64]) -> Dataset {
        let mut d = Dataset::new();
        for (i, &f) in foms.iter().enumerate() {
            d.push(record(i, f));
        }
        d
    }

    #[test]
    fn top_five_of_ten() {
        let foms = [0.3, -1.0, 2.5, 0.0, 1.7, -0.2, 3.1, 0.9, 1.1, -4.0];
        let got: Vec<f64> = top_k(&dataset(&foms), 5).unwrap().iter().map(|r| r.fom).collect();
        let mut oracle = foms.to_vec();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(got, oracle[..5]);
    }

    #[test]
    fn short_dataset_and_ties() {
        assert_eq!(top_k(&dataset(&[1.0, 2.0, 0.5]), 5).unwrap().len(), 3);
        let got = top_k(&dataset(&[1.0, 3.0, 0.0, 3.0]), 2).unwrap();
        assert_eq!(got[0].point[0], 1.0);
        assert_eq!(got[1].point[0], 3.0);
        assert_eq!(top_k(&Dataset::new(), 3), Err(SamplerError::EmptyDataset));
    }

    #[test]
    fn uniform_is_seeded_and_complete() {
        let d = dataset(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let a = uniform_k(&d, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = uniform_k(&d, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<f64> = uniform_k(&d, 6, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap()
            .iter()
            .map(|r| r.fom)
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn uniform_frequencies_pass_chi_square() {
        let n = 10;
        let k = 3;
        let trials = 10_000;
        let d = dataset(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0usize; n];
        for _ in 0..trials {
            for r in uniform_k(&d, k, &mut rng).unwrap() {
                counts[r.fom as usize] += 1;
            }
        }
        let expected = (trials * k) as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square with 9 dof: mean 9, sd sqrt(18); 3 sigma bound
        assert!(chi2 < 9.0 + 3.0 * 18f64.sqrt(), "{chi2} {counts:?}");
    }

    #[test]
    fn none_selects_nothing() {
        let cfg = SamplerConfig {
            kind: SamplerKind::None,
            k: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(cfg.select(&dataset(&[1.0]), &mut rng).unwrap().is_empty());
        assert_eq!("uniform".parse::<SamplerKind>(), Ok(SamplerKind::Uniform));
    }

    proptest! {
        #[test]
        fn top_k_dominates_excluded(foms in prop::collection::vec(-10.0f64..10.0, 1..40), k in 1usize..8) {
            let d = dataset(&foms);
            let picked = top_k(&d, k).unwrap();
            let chosen: Vec<usize> = picked.iter().map(|r| r.point[0] as usize).collect();
            let min_in = picked.iter().map(|r| r.fom).fold(f64::INFINITY, f64::min);
            for (i, &f) in foms.iter().enumerate() {
                if !chosen.contains(&i) {
                    prop_assert!(min_in >= f);
                }
            }
            for w in picked.windows(2) {
                prop_assert!(w[0].fom >= w[1].fom);
            }
        }

        #[test]
        fn appending_low_record_keeps_selection(foms in prop::collection::vec(-10.0f64..10.0, 1..30), k in 1usize..6, drop in 0.001f64..5.0) {
            let mut d = dataset(&foms);
            let before = top_k(&d, k).unwrap();
            let kth = before.last().unwrap().fom;
            if before.len() == k {
                d.push(record(foms.len(), kth - drop));
                prop_assert_eq!(top_k(&d, k).unwrap(), before);
            }
        }
    }
}
