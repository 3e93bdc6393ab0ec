//! String-level recognition rate: a sample counts as correct only when the
//! whole predicted string equals the ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct LengthStats {
    pub total: usize,
    pub correct: usize,
}

impl LengthStats {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub id: String,
    pub truth: String,
    pub prediction: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub rate: f64,
    /// Keyed by ground-truth length.
    pub per_length: BTreeMap<usize, LengthStats>,
    pub mismatches: Vec<Mismatch>,
}

/// `ids`, `predictions` and `truths` are parallel lists.
pub fn evaluate<S: AsRef<str>>(ids: &[S], predictions: &[String], truths: &[String]) -> Result<EvalReport> {
    if predictions.len() != truths.len() || ids.len() != truths.len() {
        return Err(Error::Usage(format!(
            "{} ids, {} predictions and {} ground truths",
            ids.len(),
            predictions.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::Usage("nothing to evaluate".into()));
    }
    let mut per_length: BTreeMap<usize, LengthStats> = BTreeMap::new();
    let mut mismatches = Vec::new();
    let mut correct = 0;
    for ((id, p), t) in ids.iter().zip(predictions).zip(truths) {
        let entry = per_length.entry(t.chars().count()).or_default();
        entry.total += 1;
        if p == t {
            entry.correct += 1;
            correct += 1;
        } else {
            mismatches.push(Mismatch {
                id: id.as_ref().to_string(),
                truth: t.clone(),
                prediction: p.clone(),
            });
        }
    }
    Ok(EvalReport {
        total: truths.len(),
        correct,
        rate: correct as f64 / truths.len() as f64,
        per_length,
        mismatches,
    })
}

fn field(s: &str) -> Result<&str> {
    if s.contains(['\t', '\n']) {
        Err(Error::Format(format!("report field {s:?} contains a tab or newline")))
    } else {
        Ok(s)
    }
}

impl EvalReport {
    /// Line-oriented `key=value` form. Mismatches are
    /// `mismatch=<id>\t<truth>\t<prediction>` in evaluation order.
    pub fn to_key_values(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "total={}", self.total).unwrap();
        writeln!(out, "correct={}", self.correct).unwrap();
        writeln!(out, "rate={}", self.rate).unwrap();
        for (len, s) in &self.per_length {
            writeln!(out, "length.{len}.total={}", s.total).unwrap();
            writeln!(out, "length.{len}.correct={}", s.correct).unwrap();
            writeln!(out, "length.{len}.rate={}", s.rate()).unwrap();
        }
        for m in &self.mismatches {
            writeln!(out, "mismatch={}\t{}\t{}", field(&m.id)?, field(&m.truth)?, field(&m.prediction)?).unwrap();
        }
        Ok(out)
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| Error::Parse {
            file: "report".into(),
            line,
            message: m.to_string(),
        };
        let (mut total, mut correct, mut rate) = (None, None, None);
        let mut per_length: BTreeMap<usize, LengthStats> = BTreeMap::new();
        let mut mismatches = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| bad(n, "expected key=value"))?;
            let int = || value.parse::<usize>().map_err(|_| bad(n, "expected an integer"));
            match key {
                "total" => total = Some(int()?),
                "correct" => correct = Some(int()?),
                "rate" => rate = Some(value.parse::<f64>().map_err(|_| bad(n, "expected a number"))?),
                "mismatch" => {
                    let parts: Vec<&str> = value.split('\t').collect();
                    let [id, truth, prediction] = parts[..] else {
                        return Err(bad(n, "mismatch needs three tab-separated fields"));
                    };
                    mismatches.push(Mismatch {
                        id: id.into(),
                        truth: truth.into(),
                        prediction: prediction.into(),
                    });
                }
                _ => {
                    let mut it = key.split('.');
                    let (Some("length"), Some(len), Some(what), None) = (it.next(), it.next(), it.next(), it.next()) else {
                        return Err(bad(n, &format!("unknown key '{key}'")));
                    };
                    let len: usize = len.parse().map_err(|_| bad(n, "bad length"))?;
                    let e = per_length.entry(len).or_default();
                    match what {
                        "total" => e.total = int()?,
                        "correct" => e.correct = int()?,
                        "rate" => {}
                        _ => return Err(bad(n, &format!("unknown key '{key}'"))),
                    }
                }
            }
        }
        let missing = |k: &str| Error::Format(format!("report lacks '{k}'"));
        Ok(EvalReport {
            total: total.ok_or_else(|| missing("total"))?,
            correct: correct.ok_or_else(|| missing("correct"))?,
            rate: rate.ok_or_else(|| missing("rate"))?,
            per_length,
            mismatches,
        })
    }

    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:>8} {:>8} {:>8} {:>8}", "length", "total", "correct", "rate").unwrap();
        for (len, s) in &self.per_length {
            writeln!(out, "{:>8} {:>8} {:>8} {:>8.4}", len, s.total, s.correct, s.rate()).unwrap();
        }
        writeln!(out, "{:>8} {:>8} {:>8} {:>8.4}", "all", self.total, self.correct, self.rate).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn three_of_four() {
        let ids = ["a", "b", "c", "d"];
        let r = evaluate(&ids, &strings(&["1", "22", "123", "9"]), &strings(&["1", "22", "1233", "9"])).unwrap();
        assert_eq!((r.total, r.correct, r.rate), (4, 3, 0.75));
        assert_eq!(r.mismatches.len(), 1);
        assert_eq!(r.mismatches[0].id, "c");
        assert_eq!(r.per_length[&4], LengthStats { total: 1, correct: 0 });
        assert_eq!(r.per_length.values().map(|s| s.total).sum::<usize>(), 4);
    }

    #[test]
    fn all_correct_and_errors() {
        let r = evaluate(&["x"], &strings(&["5"]), &strings(&["5"])).unwrap();
        assert_eq!(r.rate, 1.0);
        assert!(r.mismatches.is_empty());
        assert!(matches!(evaluate::<&str>(&[], &[], &[]), Err(Error::Usage(_))));
        assert!(matches!(evaluate(&["x"], &strings(&["5", "6"]), &strings(&["5"])), Err(Error::Usage(_))));
    }

    #[test]
    fn key_values_round_trip() {
        let r = evaluate(&["p/1", "p/2", "p/3"], &strings(&["12", "", "7"]), &strings(&["12", "3", "77"])).unwrap();
        let text = r.to_key_values().unwrap();
        assert_eq!(EvalReport::from_key_values(&text).unwrap(), r);
        assert!(text.starts_with("total=3\ncorrect=1\nrate=0.3333333333333333\n"));
        assert!(text.ends_with("mismatch=p/2\t3\t\nmismatch=p/3\t77\t7\n"));
    }
}
