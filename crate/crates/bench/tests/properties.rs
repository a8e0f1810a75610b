use proptest::prelude::*;
use softtopk_bench::{format_sig9, parse_size_list};

proptest! {
    #[test]
    fn sig9_keeps_nine_significant_digits(x in prop::num::f64::NORMAL) {
        let s = format_sig9(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs(), "{} -> {}", x, s);
        let mantissa = s.split('e').next().unwrap();
        let digits = mantissa.chars().filter(char::is_ascii_digit).collect::<String>();
        prop_assert!(digits.trim_start_matches('0').len() <= 9, "{}", s);
    }

    #[test]
    fn sig9_is_idempotent(x in prop::num::f64::NORMAL) {
        let s = format_sig9(x);
        prop_assert_eq!(format_sig9(s.parse().unwrap()), s);
    }

    #[test]
    fn comma_lists_round_trip(xs in prop::collection::vec(0usize..100_000, 1..20)) {
        let text = xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        prop_assert_eq!(parse_size_list(&text).unwrap(), xs);
    }

    #[test]
    fn power_ranges_are_geometric(min in 1usize..100, steps in 0u32..10, step in 2usize..5) {
        let max = min * step.pow(steps);
        let xs = parse_size_list(&format!("{min}:{max}:x{step}")).unwrap();
        prop_assert_eq!(xs.len(), steps as usize + 1);
        prop_assert!(xs.windows(2).all(|w| w[1] == w[0] * step));
    }
}
