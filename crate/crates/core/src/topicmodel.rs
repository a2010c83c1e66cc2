//! Polylingual LDA trained by collapsed Gibbs sampling.
//!
//! A corpus is a list of tuples; each tuple holds one token list per
//! language and all languages of a tuple share a single topic mixture.
//! Plain LDA is the one-language case and runs through the same sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentTuple;
use crate::error::{Error, Result};

pub const DEFAULT_NUM_TOPICS: usize = 30;
pub const DEFAULT_ALPHA_SUM: f64 = 5.0;
pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_FOLD_IN_SWEEPS: usize = 100;

/// Which modalities a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Visual documents only (plain LDA).
    Visual,
    /// Text documents only (plain LDA).
    Text,
    /// Visual and text tuples (polylingual LDA with two languages).
    Multimodal,
}

impl Variant {
    pub fn languages(self) -> &'static [&'static str] {
        match self {
            Variant::Visual => &["visual"],
            Variant::Text => &["text"],
            Variant::Multimodal => &["visual", "text"],
        }
    }
}

/// One tuple of per-language token lists. An empty list is a missing document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyDocument {
    pub product_id: String,
    pub languages: Vec<Vec<u32>>,
}

impl PolyDocument {
    pub fn token_count(&self) -> usize {
        self.languages.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCorpus {
    pub language_names: Vec<String>,
    pub vocab_sizes: Vec<usize>,
    pub docs: Vec<PolyDocument>,
}

impl PolyCorpus {
    /// Projects document tuples onto the languages of `variant`. Visual
    /// documents contribute one token per present word. Tuples left without
    /// tokens are dropped.
    pub fn from_tuples(
        tuples: &[DocumentTuple],
        variant: Variant,
        visual_vocab: usize,
        text_vocab: usize,
    ) -> Self {
        let docs = tuples
            .iter()
            .map(|t| PolyDocument {
                product_id: t.product_id.clone(),
                languages: project(t, variant),
            })
            .filter(|d| d.token_count() > 0)
            .collect();
        let vocab_sizes = variant
            .languages()
            .iter()
            .map(|&l| if l == "visual" { visual_vocab } else { text_vocab })
            .collect();
        Self {
            language_names: variant.languages().iter().map(|s| s.to_string()).collect(),
            vocab_sizes,
            docs,
        }
    }

    pub fn num_languages(&self) -> usize {
        self.vocab_sizes.len()
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(PolyDocument::token_count).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if self.vocab_sizes.is_empty() {
            return Err(Error::param("languages", "at least one language is required"));
        }
        for doc in &self.docs {
            if doc.languages.len() != self.vocab_sizes.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.vocab_sizes.len(),
                    actual: doc.languages.len(),
                });
            }
            if doc.token_count() == 0 {
                return Err(Error::param(
                    "corpus",
                    format!("tuple `{}` has no tokens", doc.product_id),
                ));
            }
            for (tokens, &v) in doc.languages.iter().zip(&self.vocab_sizes) {
                if let Some(&w) = tokens.iter().find(|&&w| w as usize >= v) {
                    return Err(Error::IndexOutOfRange {
                        what: "word",
                        index: w as usize,
                        len: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Token lists of a tuple for the languages of `variant`.
pub fn project(tuple: &DocumentTuple, variant: Variant) -> Vec<Vec<u32>> {
    let visual = || {
        tuple
            .visual
            .as_ref()
            .map(|d| d.words().iter().copied().collect())
            .unwrap_or_default()
    };
    let text = || {
        tuple
            .text
            .as_ref()
            .map(|d| d.tokens().to_vec())
            .unwrap_or_default()
    };
    match variant {
        Variant::Visual => vec![visual()],
        Variant::Text => vec![text()],
        Variant::Multimodal => vec![visual(), text()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub num_topics: usize,
    /// Document-topic prior, one entry per topic.
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TrainParams {
    /// Symmetric prior with `alpha_sum` spread evenly over `num_topics`.
    pub fn symmetric(num_topics: usize, alpha_sum: f64, beta: f64, iterations: usize, seed: u64) -> Self {
        let alpha = vec![alpha_sum / num_topics.max(1) as f64; num_topics];
        Self {
            num_topics,
            alpha,
            beta,
            iterations,
            seed,
        }
    }

    pub fn with_topics(num_topics: usize) -> Self {
        Self::symmetric(num_topics, DEFAULT_ALPHA_SUM, DEFAULT_BETA, DEFAULT_ITERATIONS, 0)
    }

    fn validate(&self) -> Result<()> {
        if self.num_topics < 1 {
            return Err(Error::param("num_topics", "must be at least 1"));
        }
        if self.alpha.len() != self.num_topics {
            return Err(Error::DimensionMismatch {
                expected: self.num_topics,
                actual: self.alpha.len(),
            });
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::param("alpha", "every entry must be positive and finite"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::param("beta", "must be positive and finite"));
        }
        if self.iterations < 1 {
            return Err(Error::param("iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Position of a token inside the sampler's sweep. `sweep` is 0 for the
/// random initialization and counts from 1 afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenSite {
    pub sweep: usize,
    pub doc: usize,
    pub language: usize,
    pub position: usize,
}

/// Supplies the uniform variate used to resample one token.
pub trait UniformSource {
    fn uniform(&mut self, site: TokenSite) -> f64;
}

/// Sequential draws from a seeded generator, ignoring the site.
#[derive(Debug, Clone)]
pub struct StreamSource<R>(pub R);

impl StreamSource<ChaCha8Rng> {
    pub fn seeded(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl<R: Rng> UniformSource for StreamSource<R> {
    fn uniform(&mut self, _site: TokenSite) -> f64 {
        self.0.random::<f64>()
    }
}

/// Index of the bucket of `weights` that `u * total` falls into.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = u * total;
    for (k, &w) in weights.iter().enumerate() {
        if target < w {
            return k;
        }
        target -= w;
    }
    // Rounding can leave `target` a hair above the last weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Token-topic assignments and the count tables derived from them.
#[derive(Debug, Clone)]
pub struct SamplerState<'c> {
    corpus: &'c PolyCorpus,
    num_topics: usize,
    alpha: Vec<f64>,
    alpha_sum: f64,
    beta: f64,
    /// `z[doc][language][position]`
    assignments: Vec<Vec<Vec<u32>>>,
    /// `doc * K + k`
    doc_topic: Vec<u32>,
    /// per language, `word * K + k`
    word_topic: Vec<Vec<u32>>,
    /// per language, `k`
    topic_totals: Vec<Vec<u32>>,
    sweeps: usize,
}

impl<'c> SamplerState<'c> {
    /// Random initial state: every token gets a uniformly drawn topic.
    pub fn initialize(corpus: &'c PolyCorpus, params: &TrainParams, source: &mut impl UniformSource) -> Result<Self> {
        params.validate()?;
        corpus.validate()?;
        let k = params.num_topics;
        let mut assignments = Vec::with_capacity(corpus.docs.len());
        for (d, doc) in corpus.docs.iter().enumerate() {
            let per_lang = doc
                .languages
                .iter()
                .enumerate()
                .map(|(l, tokens)| {
                    (0..tokens.len())
                        .map(|position| {
                            let u = source.uniform(TokenSite {
                                sweep: 0,
                                doc: d,
                                language: l,
                                position,
                            });
                            ((u * k as f64) as usize).min(k - 1) as u32
                        })
                        .collect()
                })
                .collect();
            assignments.push(per_lang);
        }
        Self::from_assignments(corpus, params, assignments)
    }

    /// State built from an explicit assignment trace.
    pub fn from_assignments(
        corpus: &'c PolyCorpus,
        params: &TrainParams,
        assignments: Vec<Vec<Vec<u32>>>,
    ) -> Result<Self> {
        params.validate()?;
        corpus.validate()?;
        let k = params.num_topics;
        let shape_ok = assignments.len() == corpus.docs.len()
            && assignments.iter().zip(&corpus.docs).all(|(z, doc)| {
                z.len() == doc.languages.len()
                    && z.iter().zip(&doc.languages).all(|(zl, tl)| zl.len() == tl.len())
                    && z.iter().flatten().all(|&t| (t as usize) < k)
            });
        if !shape_ok {
            return Err(Error::param("assignments", "trace does not match the corpus"));
        }
        let (doc_topic, word_topic, topic_totals) = tally(corpus, k, &assignments);
        Ok(Self {
            corpus,
            num_topics: k,
            alpha_sum: params.alpha.iter().sum(),
            alpha: params.alpha.clone(),
            beta: params.beta,
            assignments,
            doc_topic,
            word_topic,
            topic_totals,
            sweeps: 0,
        })
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn assignments(&self) -> &[Vec<Vec<u32>>] {
        &self.assignments
    }

    /// One full Gibbs sweep over every token in corpus order.
    pub fn sweep(&mut self, source: &mut impl UniformSource) {
        self.sweeps += 1;
        let k = self.num_topics;
        let mut weights = vec![0.0; k];
        let vbeta: Vec<f64> = self.corpus.vocab_sizes.iter().map(|&v| v as f64 * self.beta).collect();
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            let dt = &mut self.doc_topic[d * k..(d + 1) * k];
            for (l, tokens) in doc.languages.iter().enumerate() {
                let wt = &mut self.word_topic[l];
                let totals = &mut self.topic_totals[l];
                let z = &mut self.assignments[d][l];
                for (position, &w) in tokens.iter().enumerate() {
                    let row = w as usize * k;
                    let old = z[position] as usize;
                    dt[old] -= 1;
                    wt[row + old] -= 1;
                    totals[old] -= 1;
                    for t in 0..k {
                        weights[t] = (dt[t] as f64 + self.alpha[t]) * (wt[row + t] as f64 + self.beta)
                            / (totals[t] as f64 + vbeta[l]);
                    }
                    let u = source.uniform(TokenSite {
                        sweep: self.sweeps,
                        doc: d,
                        language: l,
                        position,
                    });
                    let new = sample_index(&weights, u);
                    z[position] = new as u32;
                    dt[new] += 1;
                    wt[row + new] += 1;
                    totals[new] += 1;
                }
            }
        }
    }

    /// Recounts every table from the assignments and reports the first
    /// disagreement, if any.
    pub fn check_counts(&self) -> std::result::Result<(), String> {
        let (doc_topic, word_topic, topic_totals) = tally(self.corpus, self.num_topics, &self.assignments);
        if doc_topic != self.doc_topic {
            return Err("document-topic counts diverge from assignments".into());
        }
        if word_topic != self.word_topic {
            return Err("topic-word counts diverge from assignments".into());
        }
        if topic_totals != self.topic_totals {
            return Err("topic totals diverge from assignments".into());
        }
        let k = self.num_topics;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            let n: u32 = self.doc_topic[d * k..(d + 1) * k].iter().sum();
            if n as usize != doc.token_count() {
                return Err(format!("tuple {d}: topic counts sum to {n}"));
            }
        }
        for (l, wt) in self.word_topic.iter().enumerate() {
            for t in 0..k {
                let column: u32 = wt.iter().skip(t).step_by(k).sum();
                if column != self.topic_totals[l][t] {
                    return Err(format!("language {l}, topic {t}: word counts sum to {column}"));
                }
            }
        }
        Ok(())
    }

    /// Smoothed document-topic estimate of tuple `doc`.
    pub fn theta_row(&self, doc: usize) -> Vec<f64> {
        let k = self.num_topics;
        let counts = &self.doc_topic[doc * k..(doc + 1) * k];
        let n: u32 = counts.iter().sum();
        let denom = n as f64 + self.alpha_sum;
        counts
            .iter()
            .zip(&self.alpha)
            .map(|(&c, a)| (c as f64 + a) / denom)
            .collect()
    }

    /// Smoothed topic-word estimates, `[language][topic][word]`.
    pub fn phi(&self) -> Vec<Vec<Vec<f64>>> {
        let k = self.num_topics;
        self.corpus
            .vocab_sizes
            .iter()
            .enumerate()
            .map(|(l, &v)| {
                let denom: Vec<f64> = self.topic_totals[l]
                    .iter()
                    .map(|&n| n as f64 + v as f64 * self.beta)
                    .collect();
                (0..k)
                    .map(|t| {
                        (0..v)
                            .map(|w| (self.word_topic[l][w * k + t] as f64 + self.beta) / denom[t])
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Token log-likelihood `Σ log Σ_k θ̂_dk φ̂_klw` under the current counts.
    pub fn log_likelihood(&self) -> f64 {
        let phi = self.phi();
        let mut ll = 0.0;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            let theta = self.theta_row(d);
            for (l, tokens) in doc.languages.iter().enumerate() {
                for &w in tokens {
                    let p: f64 = theta.iter().zip(&phi[l]).map(|(t, row)| t * row[w as usize]).sum();
                    ll += p.ln();
                }
            }
        }
        ll
    }

    /// Point estimates from the current state.
    pub fn to_model(&self, iterations: usize, seed: u64) -> PolyTopicModel {
        PolyTopicModel {
            num_topics: self.num_topics,
            languages: self.corpus.language_names.clone(),
            vocab_sizes: self.corpus.vocab_sizes.clone(),
            alpha: self.alpha.clone(),
            beta: self.beta,
            iterations,
            seed,
            phi: self.phi(),
            product_ids: self.corpus.docs.iter().map(|d| d.product_id.clone()).collect(),
            theta: (0..self.corpus.docs.len()).map(|d| self.theta_row(d)).collect(),
        }
    }
}

type Tables = (Vec<u32>, Vec<Vec<u32>>, Vec<Vec<u32>>);

fn tally(corpus: &PolyCorpus, k: usize, assignments: &[Vec<Vec<u32>>]) -> Tables {
    let mut doc_topic = vec![0u32; corpus.docs.len() * k];
    let mut word_topic: Vec<Vec<u32>> = corpus.vocab_sizes.iter().map(|&v| vec![0; v * k]).collect();
    let mut topic_totals = vec![vec![0u32; k]; corpus.vocab_sizes.len()];
    for (d, (doc, z)) in corpus.docs.iter().zip(assignments).enumerate() {
        for (l, (tokens, zl)) in doc.languages.iter().zip(z).enumerate() {
            for (&w, &t) in tokens.iter().zip(zl) {
                let t = t as usize;
                doc_topic[d * k + t] += 1;
                word_topic[l][w as usize * k + t] += 1;
                topic_totals[l][t] += 1;
            }
        }
    }
    (doc_topic, word_topic, topic_totals)
}

/// Trained polylingual topic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTopicModel {
    pub num_topics: usize,
    pub languages: Vec<String>,
    pub vocab_sizes: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// `[language][topic][word]`
    pub phi: Vec<Vec<Vec<f64>>>,
    pub product_ids: Vec<String>,
    /// One row per training tuple, aligned with `product_ids`.
    pub theta: Vec<Vec<f64>>,
}

impl PolyTopicModel {
    pub fn num_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn language_index(&self, name: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == name)
    }
}

/// Runs `params.iterations` sweeps from a seeded random start.
pub fn train(corpus: &PolyCorpus, params: &TrainParams) -> Result<PolyTopicModel> {
    train_with(corpus, params, |_| {})
}

/// Like [`train`], calling `on_sweep` after each sweep.
pub fn train_with(
    corpus: &PolyCorpus,
    params: &TrainParams,
    mut on_sweep: impl FnMut(&SamplerState<'_>),
) -> Result<PolyTopicModel> {
    let mut source = StreamSource::seeded(params.seed);
    let mut state = SamplerState::initialize(corpus, params, &mut source)?;
    for _ in 0..params.iterations {
        state.sweep(&mut source);
        on_sweep(&state);
    }
    Ok(state.to_model(params.iterations, params.seed))
}

/// Fold-in estimate of θ for a new tuple with φ frozen.
///
/// `languages` is aligned with the model's languages; missing trailing
/// languages are treated as empty and out-of-vocabulary words are dropped.
pub fn infer_theta(model: &PolyTopicModel, languages: &[Vec<u32>], sweeps: usize, seed: u64) -> Vec<f64> {
    let k = model.num_topics;
    let tokens: Vec<(usize, usize)> = languages
        .iter()
        .take(model.num_languages())
        .enumerate()
        .flat_map(|(l, ws)| {
            ws.iter()
                .filter(move |&&w| (w as usize) < model.vocab_sizes[l])
                .map(move |&w| (l, w as usize))
        })
        .collect();
    let alpha_sum: f64 = model.alpha.iter().sum();
    let mut counts = vec![0u32; k];
    if !tokens.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<usize> = tokens
            .iter()
            .map(|_| ((rng.random::<f64>() * k as f64) as usize).min(k - 1))
            .collect();
        for &t in &z {
            counts[t] += 1;
        }
        let mut weights = vec![0.0; k];
        for _ in 0..sweeps {
            for (i, &(l, w)) in tokens.iter().enumerate() {
                counts[z[i]] -= 1;
                for t in 0..k {
                    weights[t] = (counts[t] as f64 + model.alpha[t]) * model.phi[l][t][w];
                }
                let new = sample_index(&weights, rng.random::<f64>());
                z[i] = new;
                counts[new] += 1;
            }
        }
    }
    let denom = tokens.len() as f64 + alpha_sum;
    counts
        .iter()
        .zip(&model.alpha)
        .map(|(&c, a)| (c as f64 + a) / denom)
        .collect()
}

/// The `n` most probable words of a topic, ties broken by ascending id.
pub fn top_words(model: &PolyTopicModel, language: usize, topic: usize, n: usize) -> Result<Vec<(u32, f64)>> {
    if language >= model.num_languages() {
        return Err(Error::IndexOutOfRange {
            what: "language",
            index: language,
            len: model.num_languages(),
        });
    }
    if topic >= model.num_topics {
        return Err(Error::IndexOutOfRange {
            what: "topic",
            index: topic,
            len: model.num_topics,
        });
    }
    Ok(ranked(&model.phi[language][topic], n))
}

pub(crate) fn ranked(row: &[f64], n: usize) -> Vec<(u32, f64)> {
    let mut words: Vec<(u32, f64)> = row.iter().enumerate().map(|(w, &p)| (w as u32, p)).collect();
    words.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    words.truncate(n);
    words
}

/// Token log-likelihood of `corpus` under a trained model's point
/// estimates. Tuples are matched to θ rows by position; 0 for an empty corpus.
pub fn log_likelihood(model: &PolyTopicModel, corpus: &PolyCorpus) -> Result<f64> {
    if corpus.docs.len() > model.theta.len() {
        return Err(Error::DimensionMismatch {
            expected: model.theta.len(),
            actual: corpus.docs.len(),
        });
    }
    let mut ll = 0.0;
    for (doc, theta) in corpus.docs.iter().zip(&model.theta) {
        for (l, tokens) in doc.languages.iter().enumerate().take(model.num_languages()) {
            for &w in tokens {
                let p: f64 = theta
                    .iter()
                    .zip(&model.phi[l])
                    .map(|(t, row)| t * row.get(w as usize).copied().unwrap_or(0.0))
                    .sum();
                ll += p.ln();
            }
        }
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(vocab: Vec<usize>, docs: Vec<Vec<Vec<u32>>>) -> PolyCorpus {
        PolyCorpus {
            language_names: (0..vocab.len()).map(|l| format!("l{l}")).collect(),
            vocab_sizes: vocab,
            docs: docs
                .into_iter()
                .enumerate()
                .map(|(i, languages)| PolyDocument {
                    product_id: format!("d{i}"),
                    languages,
                })
                .collect(),
        }
    }

    #[test]
    fn single_topic_is_forced() {
        let c = corpus(vec![3], vec![vec![vec![0, 0, 1]], vec![vec![1, 2]]]);
        let params = TrainParams::symmetric(1, 1.0, 0.5, 5, 9);
        let model = train(&c, &params).unwrap();
        for row in &model.theta {
            assert_eq!(row, &vec![1.0]);
        }
        // counts: w0=2, w1=2, w2=1; n=5
        let denom = 5.0 + 3.0 * 0.5;
        let expect = [2.5 / denom, 2.5 / denom, 1.5 / denom];
        for (p, e) in model.phi[0][0].iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_validation() {
        let c = corpus(vec![2], vec![vec![vec![0]]]);
        assert!(train(&c, &TrainParams::symmetric(0, 1.0, 0.1, 1, 0)).is_err());
        assert!(train(&c, &TrainParams::symmetric(2, -1.0, 0.1, 1, 0)).is_err());
        assert!(train(&c, &TrainParams::symmetric(2, 1.0, 0.0, 1, 0)).is_err());
        assert!(train(&c, &TrainParams::symmetric(2, 1.0, 0.1, 0, 0)).is_err());
        let empty = corpus(vec![2], vec![]);
        assert!(matches!(
            train(&empty, &TrainParams::with_topics(2)),
            Err(Error::EmptyCorpus)
        ));
        let oov = corpus(vec![2], vec![vec![vec![5]]]);
        assert!(train(&oov, &TrainParams::with_topics(2)).is_err());
    }

    #[test]
    fn fold_in_edge_cases() {
        let c = corpus(vec![2], vec![vec![vec![0, 1]]]);
        let mut params = TrainParams::symmetric(2, 1.0, 0.1, 3, 1);
        params.alpha = vec![0.25, 0.75];
        let model = train(&c, &params).unwrap();
        assert_eq!(infer_theta(&model, &[], 10, 0), vec![0.25, 0.75]);
        // only out-of-vocabulary words
        assert_eq!(infer_theta(&model, &[vec![7, 9]], 10, 0), vec![0.25, 0.75]);

        let one = train(&c, &TrainParams::symmetric(1, 1.0, 0.1, 3, 1)).unwrap();
        assert_eq!(infer_theta(&one, &[vec![0, 1]], 10, 3), vec![1.0]);
    }

    #[test]
    fn top_words_sorting() {
        let model = PolyTopicModel {
            num_topics: 1,
            languages: vec!["text".into()],
            vocab_sizes: vec![4],
            alpha: vec![1.0],
            beta: 0.1,
            iterations: 1,
            seed: 0,
            phi: vec![vec![vec![0.1, 0.7, 0.2, 0.0]]],
            product_ids: vec![],
            theta: vec![],
        };
        assert!(top_words(&model, 0, 0, 0).unwrap().is_empty());
        assert_eq!(top_words(&model, 0, 0, 2).unwrap(), vec![(1, 0.7), (2, 0.2)]);
        assert!(top_words(&model, 1, 0, 2).is_err());
        assert!(top_words(&model, 0, 1, 2).is_err());
        assert_eq!(ranked(&[0.5, 0.5, 0.5], 2), vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn log_likelihood_edge_cases() {
        let c = corpus(vec![1], vec![vec![vec![0]]]);
        let params = TrainParams::symmetric(1, 1.0, 0.01, 1, 0);
        let state = SamplerState::initialize(&c, &params, &mut StreamSource::seeded(0)).unwrap();
        assert!(state.log_likelihood().abs() < 1e-12);
        let model = state.to_model(1, 0);
        assert!(log_likelihood(&model, &c).unwrap().abs() < 1e-12);
        let empty = corpus(vec![1], vec![]);
        assert_eq!(log_likelihood(&model, &empty).unwrap(), 0.0);
    }

    #[test]
    fn missing_language_contributes_nothing() {
        let c = corpus(vec![3, 3], vec![vec![vec![0, 1], vec![]], vec![vec![2], vec![1, 1]]]);
        let params = TrainParams::symmetric(2, 1.0, 0.1, 20, 4);
        let mut source = StreamSource::seeded(4);
        let mut state = SamplerState::initialize(&c, &params, &mut source).unwrap();
        for _ in 0..20 {
            state.sweep(&mut source);
            state.check_counts().unwrap();
        }
        assert!(state.assignments()[0][1].is_empty());
        let text_total: u32 = state.topic_totals[1].iter().sum();
        assert_eq!(text_total, 2);
    }

    #[test]
    fn sample_index_bounds() {
        assert_eq!(sample_index(&[1.0, 0.0, 1.0], 0.0), 0);
        assert_eq!(sample_index(&[1.0, 0.0, 1.0], 0.5), 2);
        assert_eq!(sample_index(&[1.0, 1.0, 0.0], 1.0 - 1e-17), 1);
    }

    #[test]
    fn from_tuples_projection() {
        use crate::corpus::{TextDocument, VisualDocument};
        let tuples = vec![
            DocumentTuple {
                product_id: "a".into(),
                visual: Some(VisualDocument::from_iter([1, 3])),
                text: None,
            },
            DocumentTuple {
                product_id: "b".into(),
                visual: None,
                text: Some(TextDocument::from_iter([0, 0])),
            },
        ];
        let visual = PolyCorpus::from_tuples(&tuples, Variant::Visual, 4, 2);
        assert_eq!(visual.docs.len(), 1);
        assert_eq!(visual.docs[0].languages, vec![vec![1, 3]]);
        let multi = PolyCorpus::from_tuples(&tuples, Variant::Multimodal, 4, 2);
        assert_eq!(multi.docs.len(), 2);
        assert_eq!(multi.docs[1].languages, vec![vec![], vec![0, 0]]);
        assert_eq!(multi.vocab_sizes, vec![4, 2]);
    }
}
