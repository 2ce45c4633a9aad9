use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Held-out share of the human corpus: 3,000 of 15,434 rows.
pub const TEST_FRACTION: f64 = 3000.0 / 15434.0;

pub fn test_size(n: usize) -> usize {
    (n as f64 * TEST_FRACTION).round() as usize
}

/// Seeded shuffle, then the first `test_size(n)` rows become the test split.
/// Both halves keep input order.
pub fn split_human_data<T: Clone>(rows: &[T], seed: u64) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; rows.len()];
    for &i in &order[..test_size(rows.len())] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (row, t) in rows.iter().zip(is_test) {
        if t {
            test.push(row.clone());
        } else {
            train.push(row.clone());
        }
    }
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_sized_split() {
        assert_eq!(test_size(15434), 3000);
        let rows: Vec<u32> = (0..15434).collect();
        let (train, test) = split_human_data(&rows, 4);
        assert_eq!(train.len(), 12434);
        assert_eq!(test.len(), 3000);
        let mut all: Vec<u32> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, rows);
        assert_eq!(split_human_data(&rows, 4), (train.clone(), test));
        assert_ne!(split_human_data(&rows, 5).0, train);
    }

    #[test]
    fn empty_input() {
        let (a, b) = split_human_data::<u8>(&[], 1);
        assert!(a.is_empty() && b.is_empty());
    }
}
