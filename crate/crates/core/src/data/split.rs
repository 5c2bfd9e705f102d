use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme", content = "value")]
pub enum SplitScheme {
    /// Random split with the given training fraction.
    Holdout(f64),
    /// First `n` rows train, the rest test, order preserved.
    Fixed(usize),
    /// Random `k`-fold cross-validation.
    KFold(usize),
    /// Every row is used for training.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Row index partitions of `0..n`. Each partition's train and test sets are
/// disjoint and together cover every row.
pub fn split<R: Rng + ?Sized>(n: usize, scheme: SplitScheme, rng: &mut R) -> Result<Vec<Partition>> {
    if n == 0 {
        return Err(DataError::Empty);
    }
    match scheme {
        SplitScheme::Holdout(frac) => {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(DataError::InvalidArgument(format!("holdout fraction {frac} not in (0, 1)")));
            }
            let n_train = (frac * n as f64).round() as usize;
            if n_train == 0 || n_train == n {
                return Err(DataError::InvalidArgument(format!(
                    "holdout({frac}) leaves an empty side for {n} rows"
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let test = idx.split_off(n_train);
            Ok(vec![Partition { train: idx, test }])
        }
        SplitScheme::Fixed(n_train) => {
            if n_train == 0 || n_train >= n {
                return Err(DataError::InvalidArgument(format!("fixed({n_train}) infeasible for {n} rows")));
            }
            Ok(vec![Partition { train: (0..n_train).collect(), test: (n_train..n).collect() }])
        }
        SplitScheme::KFold(k) => {
            if k < 2 || k > n {
                return Err(DataError::InvalidArgument(format!("{k}-fold infeasible for {n} rows")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let (base, extra) = (n / k, n % k);
            let mut folds = Vec::with_capacity(k);
            let mut start = 0;
            for f in 0..k {
                let len = base + usize::from(f < extra);
                folds.push(&idx[start..start + len]);
                start += len;
            }
            Ok((0..k)
                .map(|f| Partition {
                    test: folds[f].to_vec(),
                    train: folds
                        .iter()
                        .enumerate()
                        .filter(|&(g, _)| g != f)
                        .flat_map(|(_, s)| s.iter().copied())
                        .collect(),
                })
                .collect())
        }
        SplitScheme::All => Ok(vec![Partition { train: (0..n).collect(), test: vec![] }]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn assert_cover(p: &Partition, n: usize) {
        let mut all: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_half_of_392() {
        let p = split(392, SplitScheme::Holdout(0.5), &mut rng()).unwrap();
        assert_eq!((p[0].train.len(), p[0].test.len()), (196, 196));
        assert_cover(&p[0], 392);
    }

    #[test]
    fn fixed_keeps_order() {
        let p = split(1000, SplitScheme::Fixed(500), &mut rng()).unwrap();
        assert_eq!(p[0].train, (0..500).collect::<Vec<_>>());
        assert_eq!(p[0].test, (500..1000).collect::<Vec<_>>());
    }

    #[test]
    fn tenfold_of_747() {
        let parts = split(747, SplitScheme::KFold(10), &mut rng()).unwrap();
        assert_eq!(parts.len(), 10);
        let mut seen = vec![0; 747];
        for p in &parts {
            assert!(p.test.len() == 74 || p.test.len() == 75);
            assert_cover(p, 747);
            for &i in &p.test {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn infeasible_schemes() {
        let mut r = rng();
        assert!(split(0, SplitScheme::All, &mut r).is_err());
        assert!(split(10, SplitScheme::Holdout(1.0), &mut r).is_err());
        assert!(split(1, SplitScheme::Holdout(0.5), &mut r).is_err());
        assert!(split(10, SplitScheme::Fixed(10), &mut r).is_err());
        assert!(split(3, SplitScheme::KFold(4), &mut r).is_err());
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_covers(n in 2usize..300, frac in 0.05f64..0.95, k in 2usize..12, seed: u64) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let schemes = [
                SplitScheme::Holdout(frac),
                SplitScheme::Fixed(1 + (n - 1) / 2),
                SplitScheme::KFold(k.min(n)),
                SplitScheme::All,
            ];
            for s in schemes {
                if let Ok(parts) = split(n, s, &mut r) {
                    for p in &parts {
                        assert_cover(p, n);
                    }
                }
            }
        }
    }
}
