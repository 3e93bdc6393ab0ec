//! Brute-force path enumeration. Exponential in `T`; exists to check the
//! dynamic programs against the definition.

use std::collections::BTreeMap;

use super::{FramePosteriors, LabelSequence};
use crate::error::{Error, Result};

/// Largest `|A′|^T` the enumerators accept.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

fn check_limit(y: &FramePosteriors) -> Result<()> {
    let paths = (y.classes() as f64).powi(y.steps() as i32);
    if paths > ENUMERATION_LIMIT as f64 {
        return Err(Error::EnumerationLimit {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Calls `visit(collapsed, probability)` for every path over `A′^T`.
fn for_each_path(y: &FramePosteriors, mut visit: impl FnMut(&[usize], f64)) {
    let steps = y.steps();
    let classes = y.classes();
    let blank = classes - 1;
    let mut path = vec![0usize; steps];
    let mut collapsed = Vec::with_capacity(steps);
    loop {
        collapsed.clear();
        let mut prob = 1.0;
        let mut prev = None;
        for (t, &s) in path.iter().enumerate() {
            prob *= y.get(t, s);
            if Some(s) != prev && s != blank {
                collapsed.push(s);
            }
            prev = Some(s);
        }
        visit(&collapsed, prob);

        // odometer increment, last frame fastest
        let mut t = steps;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            path[t] += 1;
            if path[t] < classes {
                break;
            }
            path[t] = 0;
        }
    }
}

/// `p(I|y)` as the sum of `p(π|y)` over every path `π` that collapses to `I`.
pub fn marginal_probability_bruteforce(label: &LabelSequence, y: &FramePosteriors) -> Result<f64> {
    check_limit(y)?;
    if let Some(&symbol) = label.0.iter().find(|&&s| s >= y.classes() - 1) {
        return Err(Error::InvalidSymbol {
            symbol,
            size: y.classes() - 1,
        });
    }
    let mut total = 0.0;
    for_each_path(y, |collapsed, prob| {
        if collapsed == label.symbols() {
            total += prob;
        }
    });
    Ok(total)
}

/// Exact marginal of every label reachable from some path, in one sweep.
pub fn enumerate_label_marginals(y: &FramePosteriors) -> Result<BTreeMap<LabelSequence, f64>> {
    check_limit(y)?;
    let mut out: BTreeMap<LabelSequence, f64> = BTreeMap::new();
    for_each_path(y, |collapsed, prob| {
        match out.get_mut(collapsed) {
            Some(v) => *v += prob,
            None => {
                out.insert(LabelSequence(collapsed.to_vec()), prob);
            }
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_label_over_four_paths() {
        let y = FramePosteriors::uniform(2, 2).unwrap();
        let p = marginal_probability_bruteforce(&LabelSequence(vec![0]), &y).unwrap();
        assert_eq!(p, 0.75);
    }

    #[test]
    fn repeated_label_single_path() {
        let y = FramePosteriors::uniform(3, 2).unwrap();
        let p = marginal_probability_bruteforce(&LabelSequence(vec![0, 0]), &y).unwrap();
        assert_eq!(p, 0.125);
    }

    #[test]
    fn empty_label_is_all_blank_path() {
        let y = FramePosteriors::new(vec![vec![0.2, 0.3, 0.5], vec![0.1, 0.6, 0.3]]).unwrap();
        let p = marginal_probability_bruteforce(&LabelSequence::default(), &y).unwrap();
        assert!((p - 0.5 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let y = FramePosteriors::uniform(8, 11).unwrap();
        let err = marginal_probability_bruteforce(&LabelSequence(vec![1]), &y).unwrap_err();
        assert!(matches!(err, Error::EnumerationLimit { .. }));
    }

    #[test]
    fn marginals_sum_to_one() {
        let y = FramePosteriors::new(vec![
            vec![0.2, 0.3, 0.5],
            vec![0.1, 0.6, 0.3],
            vec![0.4, 0.4, 0.2],
        ])
        .unwrap();
        let all = enumerate_label_marginals(&y).unwrap();
        let total: f64 = all.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
