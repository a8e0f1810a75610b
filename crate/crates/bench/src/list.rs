//! Size lists on the command line: `16,32,64` or the power range `16:16384:x2`.

use crate::error::{BenchError, Result};

/// Parses a comma list or `min:max:xstep` (geometric, step ≥ 2; the `x` is
/// optional). Duplicates are kept in order.
pub fn parse_size_list(s: &str) -> Result<Vec<usize>> {
    let bad = |why: &str| BenchError::Usage(format!("{s:?}: {why}"));
    let s = s.trim();
    if s.is_empty() {
        return Err(bad("empty list"));
    }
    let int = |t: &str| -> Result<usize> {
        t.trim().parse::<usize>().map_err(|_| bad(&format!("{:?} is not a non-negative integer", t.trim())))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, step] = parts.as_slice() else {
            return Err(bad("range must be min:max:xstep"));
        };
        let (min, max) = (int(min)?, int(max)?);
        let step = int(step.trim().trim_start_matches('x'))?;
        if min == 0 {
            return Err(bad("range start must be at least 1"));
        }
        if step < 2 {
            return Err(bad("range step must be at least 2"));
        }
        if max < min {
            return Err(bad("range end is below its start"));
        }
        let mut out = Vec::new();
        let mut v = min;
        while v <= max {
            out.push(v);
            match v.checked_mul(step) {
                Some(next) => v = next,
                None => break,
            }
        }
        Ok(out)
    } else {
        s.split(',').map(int).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comma_lists() {
        assert_eq!(parse_size_list("16,32,64").unwrap(), vec![16, 32, 64]);
        assert_eq!(parse_size_list(" 8 ").unwrap(), vec![8]);
        assert_eq!(parse_size_list("4, 2").unwrap(), vec![4, 2]);
    }

    #[test]
    fn power_ranges() {
        assert_eq!(parse_size_list("16:16384:x2").unwrap().len(), 11);
        assert_eq!(parse_size_list("2:2048:x2").unwrap().last(), Some(&2048));
        assert_eq!(parse_size_list("1:100:10").unwrap(), vec![1, 10, 100]);
        assert_eq!(parse_size_list("3:20:x2").unwrap(), vec![3, 6, 12]);
    }

    #[test]
    fn rejects_malformed() {
        for s in ["", "a,b", "1,,2", "16:8:x2", "0:8:x2", "2:8:x1", "2:8", "2:8:x2:1", "-1"] {
            assert!(parse_size_list(s).is_err(), "{s:?}");
        }
    }
}
