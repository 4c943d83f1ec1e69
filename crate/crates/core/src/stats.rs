//! Order statistics.

/// Median taking the lower of the two middle elements for even lengths, so
/// the result is always an observed value. `None` for an empty slice.
pub fn median_lower<T: Copy + PartialOrd>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median of unordered values"));
    Some(sorted[(sorted.len() - 1) / 2])
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(median_lower::<u64>(&[]), None);
        assert_eq!(median_lower(&[7u64]), Some(7));
        assert_eq!(median_lower(&[5u64, 1, 4, 2, 3]), Some(3));
        assert_eq!(median_lower(&[4u64, 1, 3, 2]), Some(2));
        assert_eq!(median_lower(&[0.5, -1.0]), Some(-1.0));
    }

    proptest! {
        #[test]
        fn matches_sorting_oracle(mut v in proptest::collection::vec(0u64..1000, 1..40)) {
            let got = median_lower(&v).unwrap();
            v.sort_unstable();
            let expected = v[(v.len() - 1) / 2];
            prop_assert_eq!(got, expected);
            // at least half the values lie on each side
            let le = v.iter().filter(|&&x| x <= got).count();
            let ge = v.iter().filter(|&&x| x >= got).count();
            prop_assert!(2 * le >= v.len() && 2 * ge >= v.len());
        }

        #[test]
        fn five_runs_give_third_order_statistic(v in proptest::array::uniform5(0u64..10_000)) {
            let mut s = v.to_vec();
            s.sort_unstable();
            prop_assert_eq!(median_lower(&v).unwrap(), s[2]);
        }
    }
}
