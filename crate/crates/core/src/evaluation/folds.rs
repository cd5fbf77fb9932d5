use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FoldKind {
    /// Shuffled k-fold.
    Kfold {
        k: usize,
    },
    LeaveOneGroupOut,
    LeaveOneOut,
}

/// A cross-validation scheme. Folds are a pure function of the scheme, the
/// sample count and the groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldScheme {
    #[serde(flatten)]
    pub kind: FoldKind,
    #[serde(default)]
    pub seed: u64,
}

impl FoldScheme {
    pub fn kfold(k: usize, seed: u64) -> Self {
        FoldScheme {
            kind: FoldKind::Kfold { k },
            seed,
        }
    }

    pub fn leave_one_group_out() -> Self {
        FoldScheme {
            kind: FoldKind::LeaveOneGroupOut,
            seed: 0,
        }
    }

    pub fn leave_one_out() -> Self {
        FoldScheme {
            kind: FoldKind::LeaveOneOut,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of folds this scheme yields for `n` samples.
    pub fn n_folds(&self, n: usize, groups: Option<&[i64]>) -> Result<usize> {
        Ok(self.folds(n, groups)?.len())
    }

    /// Test fold id per sample.
    pub fn assignment(&self, n: usize, groups: Option<&[i64]>) -> Result<Vec<usize>> {
        let mut out = vec![0; n];
        for (f, fold) in self.folds(n, groups)?.iter().enumerate() {
            for &i in &fold.test {
                out[i] = f;
            }
        }
        Ok(out)
    }

    pub fn folds(&self, n: usize, groups: Option<&[i64]>) -> Result<Vec<Fold>> {
        let test_sets: Vec<Vec<usize>> = match self.kind {
            FoldKind::Kfold { k } => {
                if k < 2 || k > n {
                    return Err(Error::invalid(format!("k-fold needs 2 <= k <= n, got k={k}, n={n}")));
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut stream_rng(self.seed, "kfold", k as u64));
                let base = n / k;
                let extra = n % k;
                let mut start = 0;
                (0..k)
                    .map(|f| {
                        let len = base + usize::from(f < extra);
                        let mut test = order[start..start + len].to_vec();
                        start += len;
                        test.sort_unstable();
                        test
                    })
                    .collect()
            }
            FoldKind::LeaveOneOut => {
                if n < 2 {
                    return Err(Error::invalid("leave-one-out needs at least two samples"));
                }
                (0..n).map(|i| vec![i]).collect()
            }
            FoldKind::LeaveOneGroupOut => {
                let groups = groups.ok_or_else(|| Error::invalid("leave-one-group-out needs group labels"))?;
                if groups.len() != n {
                    return Err(Error::invalid("group vector length differs from sample count"));
                }
                let mut ids = groups.to_vec();
                ids.sort_unstable();
                ids.dedup();
                if ids.len() < 2 {
                    return Err(Error::invalid("leave-one-group-out needs at least two groups"));
                }
                ids.iter()
                    .map(|&g| (0..n).filter(|&i| groups[i] == g).collect())
                    .collect()
            }
        };
        Ok(test_sets
            .into_iter()
            .map(|test| {
                let mut in_test = vec![false; n];
                for &i in &test {
                    in_test[i] = true;
                }
                let train = (0..n).filter(|&i| !in_test[i]).collect();
                Fold { train, test }
            })
            .collect())
    }
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FoldKind::Kfold { k } => write!(f, "kfold:{k}"),
            FoldKind::LeaveOneGroupOut => write!(f, "logo"),
            FoldKind::LeaveOneOut => write!(f, "loo"),
        }
    }
}

/// Parses `kfold:K`, `logo` and `loo`; the seed is set separately.
impl FromStr for FoldScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(k) = s.strip_prefix("kfold:") {
            let k = k
                .parse()
                .map_err(|_| Error::invalid(format!("bad fold count in `{s}`")))?;
            return Ok(FoldScheme::kfold(k, 0));
        }
        match s {
            "logo" | "leave_one_group_out" => Ok(FoldScheme::leave_one_group_out()),
            "loo" | "leave_one_out" => Ok(FoldScheme::leave_one_out()),
            _ => Err(Error::invalid(format!(
                "unknown fold scheme `{s}` (expected kfold:K, logo or loo)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_partition(folds: &[Fold], n: usize) {
        let mut count = vec![0; n];
        for f in folds {
            for &i in &f.test {
                count[i] += 1;
                assert!(!f.train.contains(&i));
            }
            assert_eq!(f.train.len() + f.test.len(), n);
        }
        assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn kfold_partitions() {
        let folds = FoldScheme::kfold(4, 3).folds(10, None).unwrap();
        assert_eq!(folds.len(), 4);
        assert_partition(&folds, 10);
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
    }

    #[test]
    fn kfold_is_reproducible() {
        let a = FoldScheme::kfold(4, 11).folds(23, None).unwrap();
        let b = FoldScheme::kfold(4, 11).folds(23, None).unwrap();
        assert_eq!(a, b);
        let c = FoldScheme::kfold(4, 12).folds(23, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn logo_one_fold_per_group() {
        let groups = [3, 1, 1, 2, 3, 2, 1];
        let folds = FoldScheme::leave_one_group_out().folds(7, Some(&groups)).unwrap();
        assert_eq!(folds.len(), 3);
        assert_partition(&folds, 7);
        for f in &folds {
            let g = groups[f.test[0]];
            assert!(f.test.iter().all(|&i| groups[i] == g));
            assert!(f.train.iter().all(|&i| groups[i] != g));
        }
    }

    #[test]
    fn logo_requires_groups() {
        assert!(FoldScheme::leave_one_group_out().folds(5, None).is_err());
    }

    #[test]
    fn parse_schemes() {
        assert_eq!("kfold:4".parse::<FoldScheme>().unwrap(), FoldScheme::kfold(4, 0));
        assert_eq!("logo".parse::<FoldScheme>().unwrap().kind, FoldKind::LeaveOneGroupOut);
        assert!("kfold:x".parse::<FoldScheme>().is_err());
    }
}
