//! Synthetic catalogs and feedback with known ground truth, plus the
//! exhaustive QKP oracle and topic matching used to verify the pipeline.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::assort::{Assortment, Product, QkpInstance, SeedPair, Solver, VerticalConstraint, LIVING_ROOM_VERTICALS};
use crate::compatibility::{CompatibilityMetric, PurchaseRecord};
use crate::corpus::{ActivationSummary, CatalogEntry, DocumentTuple, TextDocument, VisualDocument};
use crate::error::{Error, Result};
use crate::eval::ClickSession;

pub const MAX_ORACLE_CANDIDATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_products: usize,
    pub num_topics: usize,
    pub text_vocab: usize,
    pub visual_vocab: usize,
    pub seed: u64,
    /// Dirichlet concentration of each topic-word row.
    pub phi_concentration: f64,
    /// Dirichlet concentration of each product's topic mixture.
    pub theta_concentration: f64,
    pub text_length_mean: f64,
    /// Word draws per visual document before deduplication.
    pub visual_draws: usize,
    pub max_images: usize,
    pub price_median_cents: f64,
    pub price_sigma: f64,
    pub verticals: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_products: 500,
            num_topics: 10,
            text_vocab: 200,
            visual_vocab: 200,
            seed: 0,
            phi_concentration: 0.1,
            theta_concentration: 0.5,
            text_length_mean: 50.0,
            visual_draws: 40,
            max_images: 3,
            price_median_cents: 30_000.0,
            price_sigma: 0.7,
            verticals: LIVING_ROOM_VERTICALS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("n_products", self.n_products),
            ("num_topics", self.num_topics),
            ("text_vocab", self.text_vocab),
            ("visual_vocab", self.visual_vocab),
            ("visual_draws", self.visual_draws),
            ("max_images", self.max_images),
            ("verticals", self.verticals.len()),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        let reals = [
            ("phi_concentration", self.phi_concentration),
            ("theta_concentration", self.theta_concentration),
            ("text_length_mean", self.text_length_mean),
            ("price_median_cents", self.price_median_cents),
            ("price_sigma", self.price_sigma),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// `ground_truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub num_topics: usize,
    pub languages: Vec<String>,
    /// `[language][topic][word]`, languages ordered visual, text.
    pub phi: Vec<Vec<Vec<f64>>>,
    pub product_ids: Vec<String>,
    pub theta: Vec<Vec<f64>>,
    pub config: SynthConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCatalog {
    pub catalog: Vec<CatalogEntry>,
    /// Documents straight from the generator, word ids in generator space.
    pub tuples: Vec<DocumentTuple>,
    pub activations: Vec<ActivationSummary>,
    pub truth: GroundTruth,
}

fn dirichlet(rng: &mut impl Rng, concentration: f64, dim: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut v: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    } else {
        let i = rng.random_range(0..dim);
        v[i] = 1.0;
    }
    v
}

fn categorical(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Draws a mixture word: topic from `theta`, then word from that topic's row.
fn mixture_word(rng: &mut impl Rng, theta: &[f64], phi: &[Vec<f64>]) -> u32 {
    let k = categorical(rng, theta);
    categorical(rng, &phi[k]) as u32
}

pub fn product_id(i: usize) -> String {
    format!("p{i:04}")
}

pub fn text_token(w: u32) -> String {
    format!("w{w:04}")
}

/// Generates a catalog whose documents follow the polylingual LDA process
/// with two languages (visual, text).
///
/// Each visual word of a product is switched on in one of its images with
/// pooled activation in `[1, 2)`; every other channel pools to zero.
pub fn generate_catalog(config: &SynthConfig) -> Result<SyntheticCatalog> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.num_topics;
    let phi: Vec<Vec<Vec<f64>>> = [config.visual_vocab, config.text_vocab]
        .iter()
        .map(|&v| (0..k).map(|_| dirichlet(&mut rng, config.phi_concentration, v)).collect())
        .collect();
    let length = Poisson::new(config.text_length_mean).map_err(|e| Error::param("text_length_mean", e.to_string()))?;
    let price = LogNormal::new(config.price_median_cents.ln(), config.price_sigma)
        .map_err(|e| Error::param("price_sigma", e.to_string()))?;

    let mut catalog = Vec::with_capacity(config.n_products);
    let mut tuples = Vec::with_capacity(config.n_products);
    let mut activations = Vec::with_capacity(config.n_products);
    let mut thetas = Vec::with_capacity(config.n_products);
    let mut ids = Vec::with_capacity(config.n_products);
    for i in 0..config.n_products {
        let id = product_id(i);
        let theta = dirichlet(&mut rng, config.theta_concentration, k);

        let visual: BTreeSet<u32> = (0..config.visual_draws)
            .map(|_| mixture_word(&mut rng, &theta, &phi[0]))
            .collect();
        let n_text = (length.sample(&mut rng) as usize).max(1);
        let text: Vec<u32> = (0..n_text).map(|_| mixture_word(&mut rng, &theta, &phi[1])).collect();

        let n_images = rng.random_range(1..=config.max_images);
        let mut images = vec![vec![0.0; config.visual_vocab]; n_images];
        for &w in &visual {
            let img = rng.random_range(0..n_images);
            images[img][w as usize] = 1.0 + rng.random::<f64>();
        }

        let words: Vec<String> = text.iter().map(|&w| text_token(w)).collect();
        let split = words.len().min(5);
        catalog.push(CatalogEntry {
            product_id: id.clone(),
            vertical: config.verticals[i % config.verticals.len()].clone(),
            price_cents: price.sample(&mut rng).round().max(1.0) as u64,
            title: words[..split].join(" "),
            attributes: words[split..].to_vec(),
        });
        tuples.push(DocumentTuple {
            product_id: id.clone(),
            visual: Some(visual.into_iter().collect::<VisualDocument>()),
            text: Some(text.into_iter().collect::<TextDocument>()),
        });
        activations.push(ActivationSummary {
            product_id: id.clone(),
            images,
        });
        thetas.push(theta);
        ids.push(id);
    }
    Ok(SyntheticCatalog {
        catalog,
        tuples,
        activations,
        truth: GroundTruth {
            num_topics: k,
            languages: vec!["visual".into(), "text".into()],
            phi,
            product_ids: ids,
            theta: thetas,
            config: config.clone(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    pub n_sessions: usize,
    pub n_users: usize,
    pub seed: u64,
    /// Decay of co-click probability with θ distance; `inf` keeps only the
    /// nearest neighbours.
    pub gamma: f64,
    pub min_session: usize,
    pub max_session: usize,
    pub min_purchases: usize,
    pub max_purchases: usize,
    pub window_days: u32,
    pub start_ts: i64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            n_sessions: 2000,
            n_users: 300,
            seed: 1,
            gamma: 5.0,
            min_session: 2,
            max_session: 8,
            min_purchases: 3,
            max_purchases: 10,
            window_days: 90,
            start_ts: 1_600_000_000,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Anchor plus `size - 1` distinct others drawn with weight `exp(-γ d)`.
fn draw_group(rng: &mut impl Rng, thetas: &[Vec<f64>], size: usize, gamma: f64) -> Vec<usize> {
    let n = thetas.len();
    let anchor = rng.random_range(0..n);
    let size = size.min(n);
    let dist: Vec<f64> = thetas.iter().map(|t| euclidean(t, &thetas[anchor])).collect();
    let mut others: Vec<usize> = (0..n).filter(|&i| i != anchor).collect();
    let mut group = vec![anchor];
    if gamma.is_infinite() {
        others.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        group.extend(others.into_iter().take(size - 1));
        return group;
    }
    let nearest = others.iter().map(|&i| dist[i]).fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = others.iter().map(|&i| (-gamma * (dist[i] - nearest)).exp()).collect();
    while group.len() < size && !others.is_empty() {
        let pick = categorical(rng, &weights);
        group.push(others.swap_remove(pick));
        weights.swap_remove(pick);
    }
    group
}

/// Click sessions and purchases whose co-occurrence follows ground-truth
/// topic proximity.
pub fn generate_feedback(
    catalog: &[CatalogEntry],
    truth: &GroundTruth,
    config: &FeedbackConfig,
) -> Result<(Vec<ClickSession>, Vec<PurchaseRecord>)> {
    if catalog.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if catalog.len() != truth.theta.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.theta.len(),
            actual: catalog.len(),
        });
    }
    if config.min_session < 1 || config.min_session > config.max_session {
        return Err(Error::param("session size", "need 1 <= min <= max"));
    }
    if config.min_purchases < 1 || config.min_purchases > config.max_purchases {
        return Err(Error::param("purchase size", "need 1 <= min <= max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let thetas = &truth.theta;
    let sessions = (0..config.n_sessions)
        .map(|s| {
            let size = rng.random_range(config.min_session..=config.max_session);
            ClickSession {
                session_id: format!("s{s:05}"),
                product_ids: draw_group(&mut rng, thetas, size, config.gamma)
                    .into_iter()
                    .map(|i| catalog[i].product_id.clone())
                    .collect(),
            }
        })
        .collect();
    let window = i64::from(config.window_days.max(1) - 1) * 86_400;
    let mut purchases = Vec::new();
    for u in 0..config.n_users {
        let size = rng.random_range(config.min_purchases..=config.max_purchases);
        let start = config.start_ts + rng.random_range(0..365 * 86_400);
        for i in draw_group(&mut rng, thetas, size, config.gamma) {
            purchases.push(PurchaseRecord {
                user_id: format!("u{u:05}"),
                product_id: catalog[i].product_id.clone(),
                timestamp: start + rng.random_range(0..=window),
            });
        }
    }
    Ok((sessions, purchases))
}

/// Exact QKP optimum by enumerating every subset of the eligible candidates.
/// Ties go to the lexicographically smaller sorted id list.
pub fn brute_force_qkp(
    seed: &SeedPair,
    candidates: &[Product],
    metric: &CompatibilityMetric,
    budget: u64,
    constraints: &[VerticalConstraint],
) -> Result<Assortment> {
    if candidates.len() > MAX_ORACLE_CANDIDATES {
        return Err(Error::TooManyCandidates(candidates.len()));
    }
    let inst = QkpInstance::new(seed, candidates, metric, budget, constraints)?;
    let n = inst.len();
    // items are sorted by id, so index order is id order
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << n) {
        let selected: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        if inst.cost(&selected) > budget || !inst.within_bounds(&inst.counts(&selected)) {
            continue;
        }
        let value = inst.objective(&selected);
        let better = match &best {
            None => true,
            Some((v, ids)) => value > *v || (value == *v && selected < *ids),
        };
        if better {
            best = Some((value, selected));
        }
    }
    let selected = best.map(|(_, s)| s).unwrap_or_default();
    let mut a = inst.to_assortment(&selected, Solver::Qkp);
    if !inst.within_bounds(&inst.counts(&selected)) {
        a.feasible = false;
        a.flags.verticals = false;
    }
    Ok(a)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Greedy one-to-one matching of learned to true topics by descending
/// cosine similarity (averaged over languages); mean cosine of the matches.
/// Both arguments are `[language][topic][word]`.
pub fn matching_score(learned: &[Vec<Vec<f64>>], truth: &[Vec<Vec<f64>>]) -> Result<f64> {
    if learned.len() != truth.len() || learned.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: learned.len(),
        });
    }
    let kl = learned[0].len();
    let kt = truth[0].len();
    for (l, t) in learned.iter().zip(truth) {
        if l.len() != kl || t.len() != kt {
            return Err(Error::param("phi", "topic counts differ across languages"));
        }
        let v = t.first().map_or(0, Vec::len);
        if let Some(bad) = l.iter().chain(t).find(|row| row.len() != v) {
            return Err(Error::DimensionMismatch {
                expected: v,
                actual: bad.len(),
            });
        }
    }
    let langs = learned.len() as f64;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(kl * kt);
    for i in 0..kl {
        for j in 0..kt {
            let sim = learned.iter().zip(truth).map(|(l, t)| cosine(&l[i], &t[j])).sum::<f64>() / langs;
            pairs.push((sim, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_l = vec![false; kl];
    let mut used_t = vec![false; kt];
    let mut total = 0.0;
    let mut matched = 0;
    for (sim, i, j) in pairs {
        if !used_l[i] && !used_t[j] {
            used_l[i] = true;
            used_t[j] = true;
            total += sim;
            matched += 1;
        }
    }
    Ok(if matched == 0 { 0.0 } else { total / matched as f64 })
}

/// Learned topic → matched true topic, using the same greedy matching.
pub fn topic_matching(learned: &[Vec<Vec<f64>>], truth: &[Vec<Vec<f64>>]) -> Vec<Option<usize>> {
    let kl = learned.first().map_or(0, Vec::len);
    let kt = truth.first().map_or(0, Vec::len);
    let langs = learned.len().max(1) as f64;
    let mut pairs = Vec::with_capacity(kl * kt);
    for i in 0..kl {
        for j in 0..kt {
            let sim = learned.iter().zip(truth).map(|(l, t)| cosine(&l[i], &t[j])).sum::<f64>() / langs;
            pairs.push((sim, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; kl];
    let mut used_t = vec![false; kt];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used_t[j] {
            out[i] = Some(j);
            used_t[j] = true;
        }
    }
    out
}
