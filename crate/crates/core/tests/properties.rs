use proptest::prelude::*;

use seqctc::ctc::{
    collapse, ctc_forward_backward, ctc_lattice, enumerate_label_marginals, marginal_probability,
    marginal_probability_bruteforce, path_probability, Alphabet, FramePosteriors, LabelSequence, Path,
};
use seqctc::decode::{beam_decode, exhaustive_decode, greedy_decode, BeamConfig};
use seqctc::layers;
use seqctc::metrics::evaluate;
use seqctc::optim::AdadeltaState;
use seqctc::params::ParamStore;
use seqctc::tensor::Tensor;

/// Random posteriors with `labels` base symbols, rows bounded away from 0.
fn posteriors(labels: std::ops::RangeInclusive<usize>, steps: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = FramePosteriors> {
    (labels, steps).prop_flat_map(|(a, t)| {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, a + 1), t).prop_map(|rows| {
            let rows = rows
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect();
            FramePosteriors::new(rows).unwrap()
        })
    })
}

fn with_label(y: FramePosteriors) -> impl Strategy<Value = (FramePosteriors, LabelSequence)> {
    let labels = y.classes() - 1;
    let steps = y.steps();
    prop::collection::vec(0..labels, 0..=steps)
        .prop_filter_map("label must fit", move |l| {
            let l = LabelSequence(l);
            (l.min_frames() <= steps).then_some(l)
        })
        .prop_map(move |l| (y.clone(), l))
}

/// The shortest path onto `label`: its symbols with a blank between equal
/// neighbours.
fn canonical_path(label: &LabelSequence, blank: usize) -> Path {
    let mut out = Vec::new();
    for (i, &c) in label.0.iter().enumerate() {
        if i > 0 && label.0[i - 1] == c {
            out.push(blank);
        }
        out.push(c);
    }
    Path(out)
}

fn all_labels(labels: usize, max_len: usize) -> Vec<LabelSequence> {
    let mut out = vec![LabelSequence(vec![])];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for c in 0..labels {
                let mut q: Vec<usize> = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned().map(LabelSequence));
        frontier = next;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dp_loss_matches_enumeration((y, label) in posteriors(1..=3, 1..=6).prop_flat_map(with_label)) {
        let loss = ctc_forward_backward(&label, &y).unwrap().loss;
        let oracle = marginal_probability_bruteforce(&label, &y).unwrap();
        prop_assert!((loss + oracle.ln()).abs() <= 1e-9, "dp {loss} oracle {}", -oracle.ln());
    }

    #[test]
    fn marginals_sum_to_one(y in posteriors(1..=2, 1..=5)) {
        let labels = y.classes() - 1;
        let total: f64 = all_labels(labels, y.steps())
            .iter()
            .map(|l| marginal_probability(l, &y).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-9, "total {total}");
    }

    #[test]
    fn lattice_marginalises_at_every_frame((y, label) in posteriors(1..=3, 1..=8).prop_flat_map(with_label)) {
        let lat = ctc_lattice(&label, &y).unwrap();
        for t in 0..y.steps() {
            let terms: Vec<f64> = (0..lat.width()).map(|s| lat.alpha(t, s) + lat.beta(t, s)).collect();
            let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            prop_assert!((lse - lat.log_likelihood).abs() <= 1e-9, "t={t}: {lse} vs {}", lat.log_likelihood);
        }
    }

    #[test]
    fn logit_gradient_rows_sum_to_zero((y, label) in posteriors(1..=3, 1..=8).prop_flat_map(with_label)) {
        let r = ctc_forward_backward(&label, &y).unwrap();
        prop_assert!(r.loss >= 0.0);
        for row in r.grad_logits.chunks(y.classes()) {
            prop_assert!(row.iter().sum::<f64>().abs() <= 1e-9);
        }
    }

    #[test]
    fn collapse_is_idempotent(path in prop::collection::vec(0usize..4, 0..12)) {
        let a = Alphabet::first_digits(3).unwrap();
        let once = collapse(&Path(path), &a).unwrap();
        let twice = collapse(&canonical_path(&once, a.blank()), &a).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn collapse_preimage_mass_is_the_marginal(y in posteriors(1..=2, 1..=4)) {
        let a = Alphabet::first_digits(y.classes() - 1).unwrap();
        let marg = enumerate_label_marginals(&y).unwrap();
        for (label, p) in &marg {
            prop_assert!((p - marginal_probability(label, &y).unwrap()).abs() <= 1e-12);
        }
        let g = greedy_decode(&y, &a).unwrap();
        prop_assert!(marg.get(&g.label).copied().unwrap_or(0.0) > 0.0);
        let argmax: Vec<usize> = y.rows().map(|r| (0..r.len()).fold(0, |b, k| if r[k] > r[b] { k } else { b })).collect();
        prop_assert!((path_probability(&Path(argmax), &y).unwrap().ln() - g.score).abs() <= 1e-12);
    }

    #[test]
    fn wide_beam_is_exact_and_width_one_is_greedy(y in posteriors(1..=2, 1..=5)) {
        let a = Alphabet::first_digits(y.classes() - 1).unwrap();
        let full = y.classes().pow(y.steps() as u32);
        let beam = beam_decode(&y, &a, &BeamConfig::new(full).unwrap()).unwrap();
        let exact = exhaustive_decode(&y, &a).unwrap();
        prop_assert_eq!(&beam.label, &exact.label);
        prop_assert!((beam.score - exact.score).abs() <= 1e-9);
        let one = beam_decode(&y, &a, &BeamConfig::new(1).unwrap()).unwrap();
        prop_assert_eq!(one, greedy_decode(&y, &a).unwrap());
    }

    #[test]
    fn no_beam_beats_the_exact_marginal(y in posteriors(1..=3, 1..=6)) {
        let a = Alphabet::first_digits(y.classes() - 1).unwrap();
        let exact = exhaustive_decode(&y, &a).unwrap().score;
        for w in 1..=8 {
            let d = beam_decode(&y, &a, &BeamConfig::new(w).unwrap()).unwrap();
            prop_assert!(d.score <= exact + 1e-12, "width {w}: {} > {exact}", d.score);
            prop_assert!(d.score <= marginal_probability(&d.label, &y).unwrap().ln() + 1e-12);
        }
    }

    #[test]
    fn sequence_ops_are_linear(
        a in prop::collection::vec(-2.0f64..2.0, 24),
        b in prop::collection::vec(-2.0f64..2.0, 24),
        s in -3.0f64..3.0,
        u in -3.0f64..3.0,
    ) {
        let ta = Tensor::from_vec(&[2, 3, 4], a.clone()).unwrap();
        let tb = Tensor::from_vec(&[2, 3, 4], b.clone()).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + u * y).collect();
        let tm = Tensor::from_vec(&[2, 3, 4], mix).unwrap();
        let combine = |x: &Tensor, y: &Tensor| -> Vec<f64> {
            x.data().iter().zip(y.data()).map(|(p, q)| s * p + u * q).collect()
        };
        let pa = layers::permute_to_sequence(&ta).unwrap();
        let pb = layers::permute_to_sequence(&tb).unwrap();
        let pm = layers::permute_to_sequence(&tm).unwrap();
        for (x, y) in pm.data().iter().zip(combine(&pa, &pb)) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let rm = layers::reverse(&pm).unwrap();
        let (ra, rb) = (layers::reverse(&pa).unwrap(), layers::reverse(&pb).unwrap());
        for (x, y) in rm.data().iter().zip(combine(&ra, &rb)) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert_eq!(layers::reverse(&ra).unwrap(), pa.clone());
        let back = layers::sequence_to_feature_map(&pa, 2, 3).unwrap();
        prop_assert_eq!(back, ta);
    }

    #[test]
    fn adadelta_first_step_descends_and_is_bounded(g in prop::collection::vec(-100.0f64..100.0, 1..20)) {
        let mut ps = ParamStore::new();
        ps.add("p", &[g.len()], vec![0.0; g.len()]);
        let mut st = AdadeltaState::with_defaults(&ps);
        let mut grads = ps.zero_grads();
        grads.blocks_mut()[0].copy_from_slice(&g);
        st.step(&mut ps, &grads).unwrap();
        for (x, gi) in ps.blocks()[0].values.iter().zip(&g) {
            if *gi != 0.0 {
                prop_assert_eq!(x.signum(), -gi.signum());
            }
            if gi.abs() >= 1e-3 {
                prop_assert!(x.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn report_ignores_sample_order(
        pairs in prop::collection::vec(("[0-9]{1,3}", "[0-9]{1,3}"), 1..30),
        seed in any::<u64>(),
    ) {
        let ids: Vec<String> = (0..pairs.len()).map(|i| format!("s{i}")).collect();
        let preds: Vec<String> = pairs.iter().map(|p| p.0.clone()).collect();
        let truths: Vec<String> = pairs.iter().map(|p| p.1.clone()).collect();
        let r = evaluate(&ids, &preds, &truths).unwrap();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let n = order.len();
        for i in (1..n).rev() {
            order.swap(i, (seed as usize).wrapping_mul(i + 7) % (i + 1));
        }
        let pick = |v: &Vec<String>| order.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let r2 = evaluate(&pick(&ids), &pick(&preds), &pick(&truths)).unwrap();
        prop_assert_eq!((r.total, r.correct, r.rate, &r.per_length), (r2.total, r2.correct, r2.rate, &r2.per_length));
        if let Some(m) = r.mismatches.first() {
            let k = ids.iter().position(|i| *i == m.id).unwrap();
            let mut fixed = preds.clone();
            fixed[k] = truths[k].clone();
            prop_assert!(evaluate(&ids, &fixed, &truths).unwrap().rate > r.rate);
        }
    }
}

#[test]
fn tiny_true_path_probabilities_stay_finite() {
    let steps = 50;
    let classes = 11;
    let label = LabelSequence(vec![3, 1, 4, 1, 5]);
    let on_label = |k: usize| k == 10 || label.0.contains(&k);
    // every symbol any alignment can use gets 1e-30; the rest share the mass
    let off = (0..classes).filter(|&k| !on_label(k)).count() as f64;
    let used = (classes as f64 - off) * 1e-30;
    let rows: Vec<Vec<f64>> = (0..steps)
        .map(|_| {
            (0..classes)
                .map(|k| if on_label(k) { 1e-30 } else { (1.0 - used) / off })
                .collect()
        })
        .collect();
    let y = FramePosteriors::new(rows).unwrap();
    let r = ctc_forward_backward(&label, &y).unwrap();
    // every alignment has probability 1e-1500, far below f64's range
    let per_path = 50.0 * 1e30f64.ln();
    assert!(r.loss.is_finite() && r.loss > per_path - 100.0 && r.loss < per_path, "loss {}", r.loss);
    assert!(r.grad_logits.iter().all(|v| v.is_finite()));
    assert!(r.grad_posteriors.iter().all(|v| v.is_finite()));
}

#[test]
fn wider_beam_can_score_lower() {
    // prefix beam search is not monotone in width: keeping a third prefix
    // at t=1 changes which prefixes survive to the end
    let y = FramePosteriors::new(vec![
        vec![0.24926206351092364, 0.4398808271889894, 0.31085710930008686],
        vec![0.2425711251324521, 0.7477813778229976, 0.009647497044550278],
        vec![0.9713200816740917, 0.014339959162954162, 0.014339959162954162],
    ])
    .unwrap();
    let a = Alphabet::first_digits(2).unwrap();
    let w2 = beam_decode(&y, &a, &BeamConfig::new(2).unwrap()).unwrap();
    let w3 = beam_decode(&y, &a, &BeamConfig::new(3).unwrap()).unwrap();
    let exact = exhaustive_decode(&y, &a).unwrap();
    assert!(w3.score < w2.score, "{} vs {}", w3.score, w2.score);
    assert_eq!(w2.label, exact.label);
    println!("width 2: {:?} {}  width 3: {:?} {}", w2.label, w2.score, w3.label, w3.score);
}
