//! Connectionist temporal classification.
//!
//! The extended alphabet `A′` is the base alphabet plus one blank symbol, and
//! the blank always takes the last index (index 10 for the digit alphabet).
//! A [`Path`] is a frame-level symbol sequence over `A′`; [`collapse`] maps it
//! onto a [`LabelSequence`] over the base alphabet by merging runs of equal
//! symbols and then removing blanks.

mod forward_backward;
pub mod logspace;
mod oracle;

use std::fmt;

use crate::error::{Error, Result};

pub use forward_backward::{
    ctc_batch_loss, ctc_forward_backward, ctc_from_log_probs, ctc_lattice, log_marginal,
    marginal_probability, BatchLoss, CtcLattice, CtcResult, Reduction,
};
pub use oracle::{enumerate_label_marginals, marginal_probability_bruteforce, ENUMERATION_LIMIT};

/// Base labels plus a trailing blank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<char>,
}

impl Alphabet {
    /// The ten digits `'0'..='9'`; blank is index 10.
    pub fn digits() -> Self {
        Alphabet {
            labels: ('0'..='9').collect(),
        }
    }

    pub fn new(labels: impl IntoIterator<Item = char>) -> Result<Self> {
        let labels: Vec<char> = labels.into_iter().collect();
        if labels.is_empty() {
            return Err(Error::InvalidInput("alphabet must not be empty".into()));
        }
        for (i, c) in labels.iter().enumerate() {
            if *c == BLANK_CHAR {
                return Err(Error::InvalidInput(format!(
                    "'{BLANK_CHAR}' is reserved for the blank symbol"
                )));
            }
            if labels[..i].contains(c) {
                return Err(Error::InvalidInput(format!("duplicate label '{c}'")));
            }
        }
        Ok(Alphabet { labels })
    }

    /// First `n` digits, handy for small exhaustive test alphabets.
    pub fn first_digits(n: usize) -> Result<Self> {
        if n == 0 || n > 10 {
            return Err(Error::InvalidInput(format!("digit alphabet size {n}")));
        }
        Self::new(('0'..='9').take(n))
    }

    /// |A|
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// |A′| = |A| + 1
    pub fn size(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn blank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[char] {
        &self.labels
    }

    fn index_of(&self, c: char) -> Option<usize> {
        if c == BLANK_CHAR {
            return Some(self.blank());
        }
        self.labels.iter().position(|&l| l == c)
    }

    fn char_of(&self, symbol: usize) -> char {
        if symbol == self.blank() {
            BLANK_CHAR
        } else {
            self.labels[symbol]
        }
    }

    /// Parses a label string such as `"10345"`. Blanks are not allowed.
    pub fn parse_label(&self, text: &str) -> Result<LabelSequence> {
        text.chars()
            .map(|c| match self.index_of(c) {
                Some(i) if i != self.blank() => Ok(i),
                _ => Err(Error::Label(format!("'{c}' is not in the alphabet"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(LabelSequence)
    }

    /// Parses a path string where `-` denotes blank, e.g. `"1-22--333--"`.
    pub fn parse_path(&self, text: &str) -> Result<Path> {
        text.chars()
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| Error::Label(format!("'{c}' is not in the extended alphabet")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Path)
    }

    pub fn format_label(&self, label: &LabelSequence) -> String {
        label.0.iter().map(|&s| self.char_of(s)).collect()
    }

    pub fn format_path(&self, path: &Path) -> String {
        path.0.iter().map(|&s| self.char_of(s)).collect()
    }

    pub fn check_label(&self, label: &LabelSequence) -> Result<()> {
        match label.0.iter().find(|&&s| s >= self.num_labels()) {
            Some(&symbol) => Err(Error::InvalidSymbol {
                symbol,
                size: self.num_labels(),
            }),
            None => Ok(()),
        }
    }
}

/// Character used for blank in path strings.
pub const BLANK_CHAR: char = '-';

/// Ground-truth or decoded label: indices into the base alphabet.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSequence(pub Vec<usize>);

impl LabelSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    /// Number of adjacent equal pairs; each needs a separating blank frame.
    pub fn repeats(&self) -> usize {
        self.0.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Minimum number of frames any path onto this label needs.
    pub fn min_frames(&self) -> usize {
        self.len() + self.repeats()
    }

    /// Blank-interleaved lattice label `l′` of length `2|I| + 1`.
    pub fn extended(&self, blank: usize) -> Vec<usize> {
        let mut ext = Vec::with_capacity(2 * self.len() + 1);
        ext.push(blank);
        for &s in &self.0 {
            ext.push(s);
            ext.push(blank);
        }
        ext
    }
}

impl std::borrow::Borrow<[usize]> for LabelSequence {
    fn borrow(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for LabelSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Frame-level symbol sequence over the extended alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path(pub Vec<usize>);

/// `T × |A′|` matrix of per-frame distributions over the extended alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePosteriors {
    steps: usize,
    classes: usize,
    values: Vec<f64>,
}

/// Tolerance on row sums accepted by [`FramePosteriors::new`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl FramePosteriors {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let steps = rows.len();
        let classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::shape("posterior rows have differing lengths"));
        }
        Self::from_flat(steps, classes, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(steps: usize, classes: usize, values: Vec<f64>) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidInput("posteriors need at least one frame".into()));
        }
        if classes < 2 {
            return Err(Error::shape(format!(
                "posteriors need at least 2 classes, got {classes}"
            )));
        }
        if values.len() != steps * classes {
            return Err(Error::shape(format!(
                "{} values for a {steps}x{classes} matrix",
                values.len()
            )));
        }
        for (t, row) in values.chunks(classes).enumerate() {
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("frame {t} holds {v}")));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidInput(format!(
                    "frame {t} holds {v}, outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidInput(format!("frame {t} sums to {sum}")));
            }
        }
        Ok(FramePosteriors {
            steps,
            classes,
            values,
        })
    }

    /// Uniform rows, mostly for tests and examples.
    pub fn uniform(steps: usize, classes: usize) -> Result<Self> {
        Self::from_flat(steps, classes, vec![1.0 / classes as f64; steps * classes])
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.classes..(t + 1) * self.classes]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.classes + k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.classes)
    }

    pub(crate) fn check_alphabet(&self, alphabet: &Alphabet) -> Result<()> {
        if self.classes != alphabet.size() {
            return Err(Error::shape(format!(
                "posteriors have {} classes, alphabet needs {}",
                self.classes,
                alphabet.size()
            )));
        }
        Ok(())
    }

    /// Text form: one line per frame, values separated by single spaces,
    /// each printed as the shortest decimal that reads back bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse {
                        file: "<posteriors>".into(),
                        line: i + 1,
                        message: format!("bad number '{tok}': {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }
}

/// Merges runs of identical symbols, then deletes blanks.
pub fn collapse(path: &Path, alphabet: &Alphabet) -> Result<LabelSequence> {
    let blank = alphabet.blank();
    let mut out = Vec::new();
    let mut prev = None;
    for &s in &path.0 {
        if s >= alphabet.size() {
            return Err(Error::InvalidSymbol {
                symbol: s,
                size: alphabet.size(),
            });
        }
        if Some(s) != prev && s != blank {
            out.push(s);
        }
        prev = Some(s);
    }
    Ok(LabelSequence(out))
}

/// Product of the per-frame probabilities of the path's symbols.
pub fn path_probability(path: &Path, y: &FramePosteriors) -> Result<f64> {
    if path.0.len() != y.steps() {
        return Err(Error::shape(format!(
            "path has {} frames, posteriors have {}",
            path.0.len(),
            y.steps()
        )));
    }
    path.0
        .iter()
        .enumerate()
        .map(|(t, &s)| {
            if s >= y.classes() {
                Err(Error::InvalidSymbol {
                    symbol: s,
                    size: y.classes(),
                })
            } else {
                Ok(y.get(t, s))
            }
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digits() -> Alphabet {
        Alphabet::digits()
    }

    fn collapse_str(path: &str) -> String {
        let a = digits();
        let p = a.parse_path(path).unwrap();
        a.format_label(&collapse(&p, &a).unwrap())
    }

    #[test]
    fn collapse_merges_runs_then_drops_blanks() {
        assert_eq!(collapse_str("1-22--333--"), "123");
        assert_eq!(collapse_str("-----"), "");
        assert_eq!(collapse_str("1-1"), "11");
        assert_eq!(collapse_str("11-"), "1");
        assert_eq!(collapse_str(""), "");
    }

    #[test]
    fn collapse_rejects_out_of_range() {
        let a = digits();
        let err = collapse(&Path(vec![0, 11]), &a).unwrap_err();
        assert!(matches!(err, Error::InvalidSymbol { symbol: 11, .. }));
    }

    #[test]
    fn blank_is_last() {
        let a = digits();
        assert_eq!(a.size(), 11);
        assert_eq!(a.blank(), 10);
        assert_eq!(a.parse_path("-").unwrap(), Path(vec![10]));
    }

    #[test]
    fn alphabet_rejects_duplicates_and_reserved() {
        assert!(Alphabet::new(['0', '0']).is_err());
        assert!(Alphabet::new(['0', '-']).is_err());
        assert!(Alphabet::new([]).is_err());
    }

    #[test]
    fn extended_label_layout() {
        let l = LabelSequence(vec![3, 3, 1]);
        assert_eq!(l.extended(10), vec![10, 3, 10, 3, 10, 1, 10]);
        assert_eq!(l.repeats(), 1);
        assert_eq!(l.min_frames(), 4);
        assert_eq!(LabelSequence::default().extended(10), vec![10]);
    }

    #[test]
    fn path_probability_examples() {
        let a = Alphabet::first_digits(1).unwrap();
        let uniform = FramePosteriors::uniform(2, 2).unwrap();
        for p in ["00", "0-", "-0", "--"] {
            let path = a.parse_path(p).unwrap();
            assert_eq!(path_probability(&path, &uniform).unwrap(), 0.25);
        }
        let y = FramePosteriors::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let p = path_probability(&a.parse_path("0-").unwrap(), &y).unwrap();
        assert!((p - 0.72).abs() < 1e-15);

        let y = FramePosteriors::new(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(path_probability(&a.parse_path("00").unwrap(), &y).unwrap(), 0.0);

        assert!(matches!(
            path_probability(&a.parse_path("0").unwrap(), &y),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn posteriors_validation() {
        assert!(FramePosteriors::new(vec![]).is_err());
        assert!(FramePosteriors::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(FramePosteriors::new(vec![vec![1.5, -0.5]]).is_err());
        assert!(FramePosteriors::new(vec![vec![f64::NAN, 1.0]]).is_err());
        assert!(FramePosteriors::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(FramePosteriors::new(vec![vec![0.25, 0.75]]).is_ok());
    }

    #[test]
    fn posterior_text_round_trip_is_exact() {
        let y = FramePosteriors::new(vec![
            vec![0.1, 0.2, 0.7],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0],
            vec![1e-30, 0.5, 0.5 - 1e-30],
        ])
        .unwrap();
        let text = y.to_text();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), "0.1 0.2 0.7");
        let back = FramePosteriors::from_text(&text).unwrap();
        assert_eq!(back, y);
    }

    #[test]
    fn label_parse_and_format() {
        let a = digits();
        let l = a.parse_label("10345").unwrap();
        assert_eq!(l.0, vec![1, 0, 3, 4, 5]);
        assert_eq!(a.format_label(&l), "10345");
        assert!(a.parse_label("12a").is_err());
        assert!(a.parse_label("1-2").is_err());
    }
}
