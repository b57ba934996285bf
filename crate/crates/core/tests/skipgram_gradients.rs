use capeval_core::embeddings::{skipgram_gradients, skipgram_loss, SkipGramBatch, SkipGramParams, SkipGramSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_close(analytic: f64, numeric: f64) {
    let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
    assert!(err <= 1e-4 || (analytic - numeric).abs() < 1e-9, "analytic {analytic} vs numeric {numeric}");
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let h = 1e-5;
    for _ in 0..20 {
        let vocab_size = rng.gen_range(2..=12);
        let dim = rng.gen_range(1..=6);
        let mut params = SkipGramParams::init(vocab_size, dim, &mut rng);
        // initial weights are tiny; spread them so the sigmoids are not all ~0.5
        for w in params.target.iter_mut().chain(params.context.iter_mut()) {
            *w = rng.gen_range(-1.5..1.5);
        }
        let samples = (0..rng.gen_range(1..=4))
            .map(|_| SkipGramSample {
                target: rng.gen_range(0..vocab_size),
                context: rng.gen_range(0..vocab_size),
                negatives: (0..rng.gen_range(0..=5)).map(|_| rng.gen_range(0..vocab_size)).collect(),
            })
            .collect();
        let batch = SkipGramBatch { samples };
        let grads = skipgram_gradients(&params, &batch);

        for i in 0..params.target.len() {
            let mut p = params.clone();
            p.target[i] += h;
            let plus = -skipgram_loss(&p, &batch);
            p.target[i] -= 2.0 * h;
            let minus = -skipgram_loss(&p, &batch);
            assert_close(grads.target[i], (plus - minus) / (2.0 * h));
        }
        for i in 0..params.context.len() {
            let mut p = params.clone();
            p.context[i] += h;
            let plus = -skipgram_loss(&p, &batch);
            p.context[i] -= 2.0 * h;
            let minus = -skipgram_loss(&p, &batch);
            assert_close(grads.context[i], (plus - minus) / (2.0 * h));
        }
    }
}
