use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uiddec::eval::corpus_bleu;
use uiddec::fixtures::{random_instance, RandomModelOptions};
use uiddec::model::train_ngram;
use uiddec::objectives::Objective;
use uiddec::search::enumerate_complete;
use uiddec::surprisal::stats;
use uiddec::{SequenceModel, TokenId};

fn instance(seed: u64) -> uiddec::fixtures::RandomInstance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), &RandomModelOptions::exactness()).unwrap()
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "the", "cat"]).prop_map(String::from)
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_distributions_normalize(seed in any::<u64>(), path in prop::collection::vec(0u32..5, 0..8)) {
        let inst = instance(seed);
        let v = inst.model.vocab();
        let mut prefix = vec![v.bos()];
        prefix.extend(path.iter().map(|i| TokenId(i % v.num_ordinary() as u32)));
        let lps = inst.model.next_log_probs(&[], &prefix).unwrap();
        prop_assert_eq!(lps.len(), v.output_size());
        let total: f64 = lps.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);

        prefix.push(v.eos());
        let absorbed = inst.model.next_log_probs(&[], &prefix).unwrap();
        prop_assert_eq!(absorbed[v.eos().index()], 0.0);
    }

    #[test]
    fn ngram_distributions_normalize(corpus in prop::collection::vec(prop::collection::vec(word(), 0..6), 1..6),
                                     order in 1usize..4, add_k in 0.01f64..2.0, path in prop::collection::vec(0usize..5, 0..5)) {
        let m = train_ngram(&corpus, order, add_k).unwrap();
        let v = m.vocab();
        let mut prefix = vec![v.bos()];
        if v.num_ordinary() > 0 {
            prefix.extend(path.iter().map(|i| TokenId((i % v.num_ordinary()) as u32)));
        }
        let total: f64 = m.next_log_probs(&[], &prefix).unwrap().iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hypotheses_are_consistent(seed in any::<u64>()) {
        let inst = instance(seed);
        let (space, _) = enumerate_complete(&inst.model, &[], inst.n_max.min(4)).unwrap();
        let map = Objective::map();
        for h in &space {
            prop_assert!(h.complete && h.tokens.last() == Some(&inst.model.vocab().eos()));
            prop_assert!((h.trace.total() + h.log_prob).abs() < 1e-9);
            prop_assert!(h.trace.values().iter().all(|u| *u >= 0.0));
            prop_assert_eq!(h.clone().scored(&map).unwrap().total(), h.log_prob);
            let s = stats(&h.trace).unwrap();
            prop_assert!(s.variance >= 0.0 && (s.std_dev - s.variance.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn extension_never_raises_log_prob(seed in any::<u64>(), path in prop::collection::vec(0u32..5, 1..6)) {
        let inst = instance(seed);
        let v = inst.model.vocab();
        let mut h = uiddec::Hypothesis::root(v);
        for step in path {
            let lps = inst.model.next_log_probs(&[], &h.tokens).unwrap();
            let tok = TokenId(step % v.num_ordinary() as u32);
            if !lps[tok.index()].is_finite() {
                break;
            }
            let child = h.extend(tok, &lps, v.eos());
            prop_assert!(child.log_prob <= h.log_prob);
            h = child;
        }
    }

    #[test]
    fn bleu_of_identity_is_100(corpus in prop::collection::vec(sentence(), 1..6)) {
        prop_assert_eq!(corpus_bleu(&corpus, &corpus).unwrap().corpus_bleu, 100.0);
    }

    #[test]
    fn bleu_is_invariant_to_joint_reordering(pairs in prop::collection::vec((sentence(), sentence()), 1..8), rot in 0usize..8) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let mut rotated = pairs.clone();
        rotated.rotate_left(rot % pairs.len());
        let (h2, r2): (Vec<_>, Vec<_>) = rotated.into_iter().unzip();
        let a = corpus_bleu(&h, &r).unwrap();
        let b = corpus_bleu(&h2, &r2).unwrap();
        prop_assert_eq!(a.corpus_bleu, b.corpus_bleu);
        prop_assert!((0.0..=100.0).contains(&a.corpus_bleu));
        prop_assert!((0.0..=1.0).contains(&a.brevity_penalty));
    }
}

#[test]
fn matched_sentence_does_not_lower_bleu() {
    // equal-length corpus (BP = 1) with imperfect precisions
    let h = vec![vec!["a", "b", "c", "d", "e"], vec!["x", "b", "c", "d", "y"]];
    let r = vec![vec!["a", "b", "c", "d", "q"], vec!["x", "b", "z", "d", "y"]];
    let before = corpus_bleu(&h, &r).unwrap();
    assert_eq!(before.brevity_penalty, 1.0);
    let mut h2 = h.clone();
    let mut r2 = r.clone();
    h2.push(vec!["p", "q", "r", "s", "t"]);
    r2.push(vec!["p", "q", "r", "s", "t"]);
    assert!(corpus_bleu(&h2, &r2).unwrap().corpus_bleu >= before.corpus_bleu);
}
