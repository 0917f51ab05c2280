use proptest::prelude::*;
use synacc_cli::commands::predict::calibration_partition;

proptest! {
    #[test]
    fn partition_covers_every_labeled_model_once(
        n in 2usize..40,
        split in 0.05f64..=1.0,
        seed in any::<u64>(),
    ) {
        let ids: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let n_fit = (split * n as f64).round() as usize;
        match calibration_partition(&refs, split, seed) {
            Ok((fit, eval)) => {
                prop_assert_eq!(fit.len(), n_fit);
                prop_assert_eq!(fit.len() + eval.len(), n);
                let mut all: Vec<&String> = fit.iter().chain(&eval).collect();
                all.sort();
                all.dedup();
                prop_assert_eq!(all.len(), n);
            }
            Err(_) => prop_assert!(n_fit < 2),
        }
    }

    #[test]
    fn partition_is_order_independent(n in 2usize..30, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let mut refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let a = calibration_partition(&refs, 1.0, seed).unwrap();
        refs.reverse();
        let b = calibration_partition(&refs, 1.0, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
