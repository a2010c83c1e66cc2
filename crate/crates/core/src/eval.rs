//! Offline evaluation: click-session Jaccard and topic diversity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::assort::Assortment;
use crate::error::{Error, Result};
use crate::theta::ThetaTable;

pub const DEFAULT_TAU: f64 = 0.02;

/// A `sessions.jsonl` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickSession {
    pub session_id: String,
    pub product_ids: BTreeSet<String>,
}

/// Product → indices of the sessions that clicked it.
#[derive(Debug, Clone, Default)]
pub struct SessionIndex {
    by_product: HashMap<String, BTreeSet<usize>>,
    num_sessions: usize,
}

impl SessionIndex {
    pub fn new(sessions: &[ClickSession]) -> Self {
        let mut by_product: HashMap<String, BTreeSet<usize>> = HashMap::new();
        for (s, session) in sessions.iter().enumerate() {
            for p in &session.product_ids {
                by_product.entry(p.clone()).or_default().insert(s);
            }
        }
        Self {
            by_product,
            num_sessions: sessions.len(),
        }
    }

    pub fn num_sessions(&self) -> usize {
        self.num_sessions
    }

    pub fn sessions_of(&self, product: &str) -> Option<&BTreeSet<usize>> {
        self.by_product.get(product)
    }

    /// `(|S_a ∩ S_b|, |S_a ∪ S_b|)`.
    pub fn overlap(&self, a: &str, b: &str) -> (u64, u64) {
        let empty = BTreeSet::new();
        let sa = self.by_product.get(a).unwrap_or(&empty);
        let sb = self.by_product.get(b).unwrap_or(&empty);
        let shared = sa.intersection(sb).count() as u64;
        (shared, sa.len() as u64 + sb.len() as u64 - shared)
    }

    /// Jaccard as an exact fraction; 0 when neither product was clicked.
    pub fn jaccard_exact(&self, a: &str, b: &str) -> BigRational {
        match self.overlap(a, b) {
            (_, 0) => BigRational::zero(),
            (shared, union) => BigRational::new(BigInt::from(shared), BigInt::from(union)),
        }
    }

    pub fn jaccard(&self, a: &str, b: &str) -> f64 {
        match self.overlap(a, b) {
            (_, 0) => 0.0,
            (shared, union) => shared as f64 / union as f64,
        }
    }
}

/// `|S_a ∩ S_b| / |S_a ∪ S_b|`, 0 when the union is empty.
pub fn jaccard(sessions: &[ClickSession], a: &str, b: &str) -> f64 {
    SessionIndex::new(sessions).jaccard(a, b)
}

fn scored_pairs(assortment: &Assortment) -> Result<Vec<(&str, &str)>> {
    let members = assortment.member_ids();
    if assortment.non_seed_ids().is_empty() {
        return Err(Error::DegenerateAssortment);
    }
    let is_seed_pair = |a: &str, b: &str| {
        let (s1, s2) = (assortment.seed.couch_set.as_str(), assortment.seed.coffee_table.as_str());
        (a == s1 && b == s2) || (a == s2 && b == s1)
    };
    let mut pairs = Vec::new();
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            if !is_seed_pair(a, b) {
                pairs.push((a, b));
            }
        }
    }
    Ok(pairs)
}

/// Mean pairwise Jaccard over all member pairs except the two seeds, exactly.
pub fn assortment_jaccard_exact(assortment: &Assortment, index: &SessionIndex) -> Result<BigRational> {
    let pairs = scored_pairs(assortment)?;
    let sum = pairs
        .iter()
        .fold(BigRational::zero(), |acc, (a, b)| acc + index.jaccard_exact(a, b));
    Ok(sum / BigRational::from_integer(BigInt::from(pairs.len())))
}

pub fn assortment_jaccard(assortment: &Assortment, index: &SessionIndex) -> Result<f64> {
    Ok(assortment_jaccard_exact(assortment, index)?
        .to_f64()
        .unwrap_or(f64::NAN))
}

/// Number of topics holding at least `tau` of the assortment's normalized
/// topic mass (strictly positive mass when `tau` is 0).
pub fn topic_diversity(assortment: &Assortment, thetas: &ThetaTable, tau: f64) -> Result<usize> {
    let mut sum = vec![0.0; thetas.num_topics()];
    for id in assortment.member_ids() {
        for (s, t) in sum.iter_mut().zip(thetas.require(id)?) {
            *s += t;
        }
    }
    let total: f64 = sum.iter().sum();
    if total <= 0.0 {
        return Ok(0);
    }
    Ok(sum
        .iter()
        .map(|s| s / total)
        .filter(|&m| if tau == 0.0 { m > 0.0 } else { m >= tau })
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssortmentScore {
    pub couch_set: String,
    pub coffee_table: String,
    /// `None` for an assortment with no non-seed members.
    pub jaccard: Option<f64>,
    pub topics: usize,
}

/// `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tau: f64,
    pub assortments: usize,
    pub mean_jaccard: f64,
    pub max_jaccard: f64,
    pub mean_topics: f64,
    /// Topic count → number of assortments.
    pub topic_histogram: BTreeMap<usize, usize>,
    pub per_assortment: Vec<AssortmentScore>,
}

/// Scores every assortment. Degenerate assortments are listed without a
/// Jaccard value and left out of the Jaccard aggregates.
pub fn evaluate(assortments: &[Assortment], sessions: &[ClickSession], thetas: &ThetaTable, tau: f64) -> Result<EvalReport> {
    let index = SessionIndex::new(sessions);
    let mut per_assortment = Vec::with_capacity(assortments.len());
    let mut histogram = BTreeMap::new();
    for a in assortments {
        let jaccard = match assortment_jaccard(a, &index) {
            Ok(j) => Some(j),
            Err(Error::DegenerateAssortment) => None,
            Err(e) => return Err(e),
        };
        let topics = topic_diversity(a, thetas, tau)?;
        *histogram.entry(topics).or_insert(0) += 1;
        per_assortment.push(AssortmentScore {
            couch_set: a.seed.couch_set.clone(),
            coffee_table: a.seed.coffee_table.clone(),
            jaccard,
            topics,
        });
    }
    let scored: Vec<f64> = per_assortment.iter().filter_map(|s| s.jaccard).collect();
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let topics: Vec<f64> = per_assortment.iter().map(|s| s.topics as f64).collect();
    Ok(EvalReport {
        tau,
        assortments: assortments.len(),
        mean_jaccard: mean(&scored),
        max_jaccard: scored.iter().copied().fold(0.0, f64::max),
        mean_topics: mean(&topics),
        topic_histogram: histogram,
        per_assortment,
    })
}
