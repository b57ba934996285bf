use capeval_core::classic::{bleu, clipped_counts, lcs_len, meteor_lite, rouge_l, sentence_bleu};
use capeval_core::embeddings::{mean_metric, mean_vector, EmbeddingTable};
use capeval_core::text::{ngrams, remove_stopwords, tokenize, StopWords, TokenSequence, Vocabulary};
use capeval_core::transport::{solve_transport, wmd_distance, CostMatrix};
use capeval_core::ReferenceSet;
use proptest::prelude::*;

const WORDS: [&str; 10] = ["a", "the", "cat", "dog", "on", "mat", "runs", "sits", "red", "park"];

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(&WORDS[..]).prop_map(String::from), 1..=max)
}

fn sentence(max: usize) -> impl Strategy<Value = TokenSequence> {
    words(max).prop_map(|w| TokenSequence::new(w).unwrap())
}

fn refs(max_refs: usize) -> impl Strategy<Value = Vec<TokenSequence>> {
    prop::collection::vec(sentence(8), 1..=max_refs)
}

fn table() -> EmbeddingTable {
    let vocab = Vocabulary::from_tokens(WORDS);
    let dim = 3;
    let data = (0..vocab.len() * dim).map(|i| ((i * 7919) % 23) as f64 / 7.0 - 1.5).collect();
    EmbeddingTable::from_matrix(vocab, dim, data).unwrap()
}

fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

proptest! {
    #[test]
    fn tokenize_is_idempotent(raw in "[ a-zA-Z.,!?'-]{0,40}") {
        let once = tokenize(&raw);
        prop_assert_eq!(tokenize(&once.join()), once);
    }

    #[test]
    fn stopword_removal_is_idempotent(s in sentence(12)) {
        let sw = StopWords::english();
        let once = remove_stopwords(&s, &sw);
        prop_assert_eq!(remove_stopwords(&once, &sw), once.clone());
        prop_assert!(once.iter().all(|t| !sw.contains(t)));
    }

    #[test]
    fn ngram_total_is_sequence_length_minus_n_plus_one(s in sentence(12), n in 1usize..=4) {
        let p = ngrams(&s, n).unwrap();
        prop_assert_eq!(p.total(), (s.len() + 1).saturating_sub(n));
    }

    #[test]
    fn clipped_counts_never_exceed_either_side(c in sentence(8), r in refs(4), n in 1usize..=3) {
        let cand = ngrams(&c, n).unwrap();
        let profiles: Vec<_> = r.iter().map(|x| ngrams(x, n).unwrap()).collect();
        for (gram, k) in clipped_counts(&cand, &profiles) {
            prop_assert!(k <= cand.count(&gram));
            prop_assert!(k <= profiles.iter().map(|p| p.count(&gram)).max().unwrap());
        }
    }

    #[test]
    fn bleu_is_a_probability(c in sentence(8), r in refs(4)) {
        let refs = ReferenceSet::new(r).unwrap();
        let s = sentence_bleu(&c, &refs, 4).unwrap();
        for n in 1..=4 {
            prop_assert!((0.0..=1.0).contains(&s.score(n)));
        }
    }

    #[test]
    fn lcs_matches_the_table_oracle(a in words(12), b in words(12)) {
        let l = lcs_len(&a, &b);
        prop_assert_eq!(l, oracle_lcs(&a, &b));
        prop_assert_eq!(l, lcs_len(&b, &a));
        prop_assert!(l <= a.len().min(b.len()));
    }

    #[test]
    fn scores_ignore_reference_order(c in sentence(8), r in refs(5), rot in 0usize..5) {
        let refs = ReferenceSet::new(r.clone()).unwrap();
        let mut turned = r.clone();
        turned.rotate_left(rot % r.len());
        turned.reverse();
        let turned = ReferenceSet::new(turned).unwrap();
        let t = table();
        let sw = StopWords::english();
        prop_assert_eq!(rouge_l(&c, &refs).value, rouge_l(&c, &turned).value);
        prop_assert_eq!(meteor_lite(&c, &refs).value, meteor_lite(&c, &turned).value);
        prop_assert_eq!(
            bleu([(&c, &refs)], 4).unwrap().scores,
            bleu([(&c, &turned)], 4).unwrap().scores
        );
        prop_assert_eq!(mean_metric(&c, &refs, &t, &sw).value, mean_metric(&c, &turned, &t, &sw).value);
    }

    #[test]
    fn centroid_ignores_token_order(w in words(10), seed in any::<u64>()) {
        let mut shuffled = w.clone();
        let k = (seed % w.len() as u64) as usize;
        shuffled.rotate_left(k);
        shuffled.swap(0, w.len() - 1);
        let t = table();
        let a = mean_vector(&TokenSequence::new(w).unwrap(), &t);
        let b = mean_vector(&TokenSequence::new(shuffled).unwrap(), &t);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn wmd_is_a_symmetric_non_negative_distance(a in sentence(6), b in sentence(6)) {
        let t = table();
        let ab = wmd_distance(&a, &b, &t).unwrap();
        let ba = wmd_distance(&b, &a, &t).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(wmd_distance(&a, &a, &t).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn transport_plans_meet_their_marginals(
        cost in prop::collection::vec(0.0f64..5.0, 12),
        supply in prop::collection::vec(0.1f64..1.0, 3),
        demand in prop::collection::vec(0.1f64..1.0, 4),
    ) {
        let (ss, ds): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
        let supply: Vec<f64> = supply.iter().map(|x| x / ss).collect();
        let demand: Vec<f64> = demand.iter().map(|x| x / ds).collect();
        let cost = CostMatrix::new(3, 4, cost).unwrap();
        let sol = solve_transport(&cost, &supply, &demand).unwrap();
        for (got, want) in sol.plan.row_sums().iter().zip(&supply) {
            prop_assert!((got - want).abs() <= 1e-9);
        }
        for (got, want) in sol.plan.col_sums().iter().zip(&demand) {
            prop_assert!((got - want).abs() <= 1e-9);
        }
        prop_assert!(sol.plan.flows().iter().all(|&f| f >= -1e-12));
        prop_assert!(sol.is_certified(&cost, 1e-9));
        prop_assert!((sol.plan.cost(&cost) - sol.objective).abs() <= 1e-9);
    }
}
