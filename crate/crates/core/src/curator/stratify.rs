use super::CuratorError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

pub const MIN_RECORDS: usize = 10;

/// 8:1:1 sizes with floors for validation and test, remainder to train.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let tenth = n / 10;
    (n - 2 * tenth, tenth, tenth)
}

/// Seeded shuffle into train/valid/test.
pub fn stratify<T: Clone>(records: &[T], seed: u64) -> Result<Splits<T>, CuratorError> {
    if records.len() < MIN_RECORDS {
        return Err(CuratorError::TooFewRecords(records.len()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_valid, _) = split_sizes(records.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(Splits {
        train: pick(&order[..n_train]),
        valid: pick(&order[n_train..n_train + n_valid]),
        test: pick(&order[n_train + n_valid..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_ratio() {
        assert_eq!(split_sizes(10), (8, 1, 1));
        assert_eq!(split_sizes(19262), (15410, 1926, 1926));
        let s = stratify(&(0..10).collect::<Vec<_>>(), 1).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn refuses_small_input() {
        assert!(matches!(stratify(&[1, 2, 3], 0), Err(CuratorError::TooFewRecords(3))));
    }

    #[test]
    fn seed_determinism() {
        let items: Vec<u32> = (0..100).collect();
        assert_eq!(stratify(&items, 7).unwrap(), stratify(&items, 7).unwrap());
        assert_ne!(stratify(&items, 7).unwrap(), stratify(&items, 8).unwrap());
    }

    proptest! {
        #[test]
        fn partition_property(n in 10usize..400, seed in any::<u64>()) {
            let items: Vec<usize> = (0..n).collect();
            let s = stratify(&items, seed).unwrap();
            prop_assert_eq!((s.train.len(), s.valid.len(), s.test.len()), split_sizes(n));
            let mut all: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, items);
        }
    }
}
