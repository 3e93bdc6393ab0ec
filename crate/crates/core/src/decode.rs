//! Turning frame posteriors into label strings.
//!
//! Ties are broken the same way everywhere: higher score first, then the
//! shorter label, then the lexicographically smaller one; within a frame the
//! lower symbol index wins.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::ctc::logspace::{log_add, LOG_ZERO};
use crate::ctc::{collapse, enumerate_label_marginals, Alphabet, FramePosteriors, LabelSequence, Path};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Decoding {
    pub label: LabelSequence,
    /// Natural-log score under the decoder's own rule; never positive.
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    pub width: usize,
    /// Symbols whose frame probability is below this are not expanded.
    pub prune_threshold: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            width: 16,
            prune_threshold: 0.0,
        }
    }
}

impl BeamConfig {
    pub fn new(width: usize) -> Result<Self> {
        let cfg = BeamConfig {
            width,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::InvalidInput("beam width must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            return Err(Error::InvalidInput(format!(
                "prune threshold {} outside [0, 1)",
                self.prune_threshold
            )));
        }
        Ok(())
    }
}

/// Which decoder to run; the network-level API and the CLI select with this.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decoder {
    Greedy,
    Beam(BeamConfig),
}

impl Default for Decoder {
    fn default() -> Self {
        Decoder::Greedy
    }
}

impl Decoder {
    pub fn decode(&self, y: &FramePosteriors, alphabet: &Alphabet) -> Result<Decoding> {
        match self {
            Decoder::Greedy => greedy_decode(y, alphabet),
            Decoder::Beam(cfg) => beam_decode(y, alphabet, cfg),
        }
    }
}

fn rank(a_label: &[usize], a_score: f64, b_label: &[usize], b_score: f64) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then(a_label.len().cmp(&b_label.len()))
        .then_with(|| a_label.cmp(b_label))
}

/// Best-path decoding: per-frame argmax, then collapse.
pub fn greedy_decode(y: &FramePosteriors, alphabet: &Alphabet) -> Result<Decoding> {
    y.check_alphabet(alphabet)?;
    let mut path = Vec::with_capacity(y.steps());
    let mut score = 0.0;
    for row in y.rows() {
        let (best, p) = row
            .iter()
            .enumerate()
            .fold((0, row[0]), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        path.push(best);
        score += p.ln();
    }
    let label = collapse(&Path(path), alphabet)?;
    Ok(Decoding { label, score })
}

#[derive(Clone, Copy, Debug)]
struct PrefixMass {
    blank: f64,
    non_blank: f64,
}

impl PrefixMass {
    const ZERO: PrefixMass = PrefixMass {
        blank: LOG_ZERO,
        non_blank: LOG_ZERO,
    };

    fn total(&self) -> f64 {
        log_add(self.blank, self.non_blank)
    }
}

/// Prefix beam search keeping, per prefix, the log-mass of paths ending in
/// blank and in a label separately.
///
/// Width 1 is defined as best-path decoding (see [`greedy_decode`]): a single
/// surviving prefix ranked by marginal mass can drift away from the per-frame
/// argmax path, and width 1 is meant to be the greedy degenerate case.
pub fn beam_decode(y: &FramePosteriors, alphabet: &Alphabet, cfg: &BeamConfig) -> Result<Decoding> {
    cfg.validate()?;
    y.check_alphabet(alphabet)?;
    if cfg.width == 1 {
        return greedy_decode(y, alphabet);
    }
    let blank = alphabet.blank();
    let mut beam: Vec<(Vec<usize>, PrefixMass)> = vec![(
        Vec::new(),
        PrefixMass {
            blank: 0.0,
            non_blank: LOG_ZERO,
        },
    )];

    for row in y.rows() {
        let log_row: Vec<f64> = row.iter().map(|v| v.ln()).collect();
        let mut next: BTreeMap<Vec<usize>, PrefixMass> = BTreeMap::new();
        for (prefix, mass) in &beam {
            let total = mass.total();
            let entry = next.entry(prefix.clone()).or_insert(PrefixMass::ZERO);
            entry.blank = log_add(entry.blank, total + log_row[blank]);
            let last = prefix.last().copied();
            if let Some(last) = last {
                entry.non_blank = log_add(entry.non_blank, mass.non_blank + log_row[last]);
            }
            for c in 0..alphabet.num_labels() {
                if row[c] < cfg.prune_threshold || row[c] == 0.0 {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(c);
                // a repeated label only extends from paths ending in blank
                let source = if Some(c) == last { mass.blank } else { total };
                let entry = next.entry(extended).or_insert(PrefixMass::ZERO);
                entry.non_blank = log_add(entry.non_blank, source + log_row[c]);
            }
        }
        let mut candidates: Vec<(Vec<usize>, PrefixMass, f64)> = next
            .into_iter()
            .filter_map(|(p, m)| {
                let t = m.total();
                (t != LOG_ZERO).then_some((p, m, t))
            })
            .collect();
        candidates.sort_by(|a, b| rank(&a.0, a.2, &b.0, b.2));
        candidates.truncate(cfg.width);
        beam = candidates.into_iter().map(|(p, m, _)| (p, m)).collect();
    }

    let (label, mass) = beam
        .into_iter()
        .map(|(p, m)| {
            let t = m.total();
            (p, t)
        })
        .min_by(|a, b| rank(&a.0, a.1, &b.0, b.1))
        .ok_or_else(|| Error::Numeric("beam search lost every prefix".into()))?;
    Ok(Decoding {
        label: LabelSequence(label),
        score: mass.min(0.0),
    })
}

/// Exact maximum-marginal decoding by enumerating every path. Exponential in
/// `T`; a reference for the other decoders.
pub fn exhaustive_decode(y: &FramePosteriors, alphabet: &Alphabet) -> Result<Decoding> {
    y.check_alphabet(alphabet)?;
    let marginals = enumerate_label_marginals(y)?;
    let (label, p) = marginals
        .into_iter()
        .min_by(|a, b| rank(&a.0 .0, a.1, &b.0 .0, b.1))
        .ok_or_else(|| Error::Numeric("no label has positive probability".into()))?;
    Ok(Decoding {
        label,
        score: p.ln().min(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digits() -> Alphabet {
        Alphabet::digits()
    }

    fn one_hot_rows(alphabet: &Alphabet, path: &str) -> FramePosteriors {
        let p = alphabet.parse_path(path).unwrap();
        let rows = p
            .0
            .iter()
            .map(|&s| {
                let mut r = vec![0.0; alphabet.size()];
                r[s] = 1.0;
                r
            })
            .collect();
        FramePosteriors::new(rows).unwrap()
    }

    #[test]
    fn greedy_collapses_argmax_path() {
        let a = digits();
        let mut rows = vec![vec![0.05; 11]; 3];
        rows[0][1] = 0.5;
        rows[1][10] = 0.5;
        rows[2][1] = 0.5;
        let y = FramePosteriors::new(rows).unwrap();
        let d = greedy_decode(&y, &a).unwrap();
        assert_eq!(a.format_label(&d.label), "11");
        assert!((d.score - 3.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn greedy_certain_path() {
        let a = digits();
        let d = greedy_decode(&one_hot_rows(&a, "77-"), &a).unwrap();
        assert_eq!(a.format_label(&d.label), "7");
        assert_eq!(d.score, 0.0);
    }

    #[test]
    fn greedy_ties_go_to_lowest_index() {
        let a = digits();
        let y = FramePosteriors::uniform(4, 11).unwrap();
        let d = greedy_decode(&y, &a).unwrap();
        assert_eq!(a.format_label(&d.label), "0");
    }

    #[test]
    fn beam_all_blank_gives_empty() {
        let a = digits();
        let y = one_hot_rows(&a, "----");
        let d = beam_decode(&y, &a, &BeamConfig::new(8).unwrap()).unwrap();
        assert!(d.label.is_empty());
        assert_eq!(d.score, 0.0);
    }

    #[test]
    fn beam_width_one_is_greedy() {
        let a = Alphabet::first_digits(2).unwrap();
        let y = FramePosteriors::new(vec![
            vec![0.4, 0.3, 0.3],
            vec![0.3, 0.4, 0.3],
            vec![0.35, 0.25, 0.4],
        ])
        .unwrap();
        let g = greedy_decode(&y, &a).unwrap();
        let b = beam_decode(&y, &a, &BeamConfig::new(1).unwrap()).unwrap();
        assert_eq!(g, b);
    }

    #[test]
    fn exhaustive_classic_case() {
        let a = Alphabet::first_digits(1).unwrap();
        let y = FramePosteriors::new(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        assert_eq!(greedy_decode(&y, &a).unwrap().label.0, vec![0]);
        let d = exhaustive_decode(&y, &a).unwrap();
        assert_eq!(d.label.0, vec![0]);
        assert!((d.score - 0.76f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_disagrees_with_greedy() {
        // Best path is "--" (0.1225), yet "0" collects 0.3399 of the mass.
        let a = Alphabet::first_digits(2).unwrap();
        let y = FramePosteriors::new(vec![vec![0.33, 0.32, 0.35], vec![0.33, 0.32, 0.35]]).unwrap();
        let g = greedy_decode(&y, &a).unwrap();
        assert!(g.label.is_empty());
        let e = exhaustive_decode(&y, &a).unwrap();
        assert_eq!(e.label.0, vec![0]);
        let b = beam_decode(&y, &a, &BeamConfig::new(9).unwrap()).unwrap();
        assert_eq!(b.label, e.label);
        assert!((b.score - e.score).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_tie_prefers_shorter() {
        let a = Alphabet::first_digits(1).unwrap();
        let y = FramePosteriors::uniform(1, 2).unwrap();
        let d = exhaustive_decode(&y, &a).unwrap();
        assert!(d.label.is_empty());
        assert_eq!(d.score, 0.5f64.ln());
    }

    #[test]
    fn exhaustive_certain_matches_greedy() {
        let a = Alphabet::first_digits(3).unwrap();
        let y = one_hot_rows(&a, "0-12");
        assert_eq!(exhaustive_decode(&y, &a).unwrap(), greedy_decode(&y, &a).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(BeamConfig::new(0).is_err());
        let bad = BeamConfig {
            width: 2,
            prune_threshold: 1.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn alphabet_size_mismatch() {
        let y = FramePosteriors::uniform(2, 3).unwrap();
        assert!(greedy_decode(&y, &digits()).is_err());
    }
}
