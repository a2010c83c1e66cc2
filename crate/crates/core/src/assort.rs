//! Seed mining and the two assortment solvers.
//!
//! The budgeted solver treats the assortment as a 0-1 quadratic knapsack:
//! every non-seed member earns `q_i = 1/(d_M(t_i, seed) + ε_d)` and every
//! unordered member pair earns `1/(d_M(t_i, t_j) + ε_d)`, subject to a budget
//! and per-vertical count bounds. The budget-relaxed solver fills each
//! non-seed vertical with the products closest to the rest of the
//! assortment, sweeping until the assortment stops moving.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::compatibility::{aggregate_topic_vector, CompatibilityMetric};
use crate::error::{Error, Result};
use crate::eval::ClickSession;
use crate::theta::ThetaTable;

/// Guards `1/d` against identical topic vectors.
pub const DISTANCE_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_PASSES: usize = 50;
pub const DEFAULT_CONVERGENCE_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 20;

pub const COUCH_SET: &str = "Couch Set";
pub const COFFEE_TABLE: &str = "Coffee Table";

/// The seven living-room verticals, seed verticals first.
pub const LIVING_ROOM_VERTICALS: [&str; 7] = [
    COUCH_SET,
    COFFEE_TABLE,
    "Accent Table",
    "Entertainment Center",
    "Bookshelf",
    "Ottoman",
    "Chair",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerticalConstraint {
    pub label: String,
    #[serde(default)]
    pub min: usize,
    #[serde(default = "unbounded")]
    pub max: usize,
    /// Target count for the budget-relaxed solver.
    #[serde(default = "one")]
    pub i_size: usize,
}

fn unbounded() -> usize {
    usize::MAX
}

fn one() -> usize {
    1
}

impl VerticalConstraint {
    pub fn new(label: impl Into<String>, min: usize, max: usize, i_size: usize) -> Self {
        Self {
            label: label.into(),
            min,
            max,
            i_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min > self.max {
            return Err(Error::param(
                format!("verticals.{}", self.label),
                format!("min {} exceeds max {}", self.min, self.max),
            ));
        }
        if self.i_size > self.max {
            return Err(Error::param(
                format!("verticals.{}", self.label),
                format!("i_size {} exceeds max {}", self.i_size, self.max),
            ));
        }
        Ok(())
    }
}

/// Default constraints for the non-seed living-room verticals: optional,
/// at most two each, one per vertical for the budget-relaxed solver.
pub fn default_constraints() -> Vec<VerticalConstraint> {
    LIVING_ROOM_VERTICALS[2..]
        .iter()
        .map(|v| VerticalConstraint::new(*v, 0, 2, 1))
        .collect()
}

/// A `seeds.jsonl` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub couch_set: String,
    pub coffee_table: String,
    pub coclick_count: u64,
}

/// A catalog product with its topic distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub vertical: String,
    pub price_cents: u64,
    pub theta: Vec<f64>,
}

/// A seed resolved to its two products.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedPair {
    pub seed: Seed,
    pub couch_set: Product,
    pub coffee_table: Product,
}

impl SeedPair {
    pub fn products(&self) -> [&Product; 2] {
        [&self.couch_set, &self.coffee_table]
    }

    /// Unit-norm sum of both seed distributions.
    pub fn seed_vector(&self) -> Result<Vec<f64>> {
        aggregate_topic_vector([self.couch_set.theta.as_slice(), self.coffee_table.theta.as_slice()])
    }

    pub fn cost(&self) -> u64 {
        self.couch_set.price_cents + self.coffee_table.price_cents
    }

    fn is_seed_product(&self, p: &Product) -> bool {
        p.id == self.couch_set.id || p.id == self.coffee_table.id
    }

    fn is_seed_vertical(&self, vertical: &str) -> bool {
        vertical == self.couch_set.vertical || vertical == self.coffee_table.vertical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Qkp,
    VerticalIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Feasibility {
    /// Non-seed spend within budget (always true for the relaxed solver).
    pub budget: bool,
    /// Every vertical within its bounds (QKP) or filled to `i_size`
    /// (relaxed solver).
    pub verticals: bool,
}

impl Feasibility {
    pub fn all(self) -> bool {
        self.budget && self.verticals
    }
}

/// An `assortments.jsonl` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assortment {
    pub seed: Seed,
    /// Vertical → member ids, seed verticals included.
    pub members: BTreeMap<String, Vec<String>>,
    pub objective: f64,
    /// Spend on non-seed members; the seed's cost is outside the budget.
    pub total_cost_cents: u64,
    pub feasible: bool,
    pub flags: Feasibility,
    pub solver: Solver,
}

impl Assortment {
    /// Every member id, seed included, in vertical order.
    pub fn member_ids(&self) -> Vec<&str> {
        self.members.values().flatten().map(String::as_str).collect()
    }

    pub fn non_seed_ids(&self) -> Vec<&str> {
        self.member_ids()
            .into_iter()
            .filter(|id| *id != self.seed.couch_set && *id != self.seed.coffee_table)
            .collect()
    }
}

/// Most frequently co-clicked (a, b) pairs with `a` in `vertical_a` and `b`
/// in `vertical_b`. Ties go to the smaller `(a, b)`.
pub fn generate_seeds(
    sessions: &[ClickSession],
    verticals: &HashMap<String, String>,
    vertical_a: &str,
    vertical_b: &str,
    top_n: usize,
) -> Vec<Seed> {
    let mut counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for session in sessions {
        let in_vertical = |v: &str| -> Vec<&str> {
            session
                .product_ids
                .iter()
                .filter(|p| verticals.get(p.as_str()).is_some_and(|x| x == v))
                .map(String::as_str)
                .collect()
        };
        let bs = in_vertical(vertical_b);
        for a in in_vertical(vertical_a) {
            for &b in &bs {
                if a != b {
                    *counts.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }
    let mut pairs: Vec<((&str, &str), u64)> = counts.into_iter().collect();
    // Stable sort keeps the BTreeMap's ascending (a, b) order within a count.
    pairs.sort_by(|x, y| y.1.cmp(&x.1));
    pairs
        .into_iter()
        .take(top_n)
        .map(|((a, b), n)| Seed {
            couch_set: a.to_string(),
            coffee_table: b.to_string(),
            coclick_count: n,
        })
        .collect()
}

/// `1 / (d_M(candidate, seed) + ε_d)`.
pub fn candidate_score(candidate_theta: &[f64], seed_vector: &[f64], metric: &CompatibilityMetric) -> Result<f64> {
    Ok(1.0 / (metric.distance(candidate_theta, seed_vector)? + DISTANCE_EPSILON))
}

/// Sum of member scores plus one pair profit per unordered member pair.
/// `members` holds the non-seed topic distributions.
pub fn objective(members: &[&[f64]], metric: &CompatibilityMetric, seed_vector: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, a) in members.iter().enumerate() {
        total += candidate_score(a, seed_vector, metric)?;
        for b in &members[i + 1..] {
            total += 1.0 / (metric.distance(a, b)? + DISTANCE_EPSILON);
        }
    }
    Ok(total)
}

/// Recomputes an assortment's objective from a θ table.
pub fn assortment_objective(assortment: &Assortment, thetas: &ThetaTable, metric: &CompatibilityMetric) -> Result<f64> {
    let seed_vector = aggregate_topic_vector([
        thetas.require(&assortment.seed.couch_set)?,
        thetas.require(&assortment.seed.coffee_table)?,
    ])?;
    let members = assortment
        .non_seed_ids()
        .into_iter()
        .map(|id| thetas.require(id))
        .collect::<Result<Vec<_>>>()?;
    objective(&members, metric, &seed_vector)
}

/// Precomputed QKP instance over the eligible candidates.
#[derive(Debug, Clone)]
pub(crate) struct QkpInstance<'a> {
    pub seed: &'a SeedPair,
    pub items: Vec<&'a Product>,
    pub group: Vec<usize>,
    /// `(label, min, max)` per group; a trailing catch-all group holds
    /// verticals without a constraint.
    pub bounds: Vec<(String, usize, usize)>,
    pub score: Vec<f64>,
    pub pair: Vec<f64>,
    pub budget: u64,
}

impl<'a> QkpInstance<'a> {
    /// Drops seed products and anything in a seed vertical, then scores the rest.
    pub fn new(
        seed: &'a SeedPair,
        candidates: &'a [Product],
        metric: &CompatibilityMetric,
        budget: u64,
        constraints: &[VerticalConstraint],
    ) -> Result<Self> {
        let mut bounds: Vec<(String, usize, usize)> = Vec::new();
        for c in constraints {
            c.validate()?;
            if !seed.is_seed_vertical(&c.label) {
                bounds.push((c.label.clone(), c.min, c.max));
            }
        }
        let free = bounds.len();
        bounds.push(("*".into(), 0, usize::MAX));

        let mut items: Vec<&Product> = candidates
            .iter()
            .filter(|p| !seed.is_seed_product(p) && !seed.is_seed_vertical(&p.vertical))
            .collect();
        items.sort_by(|a, b| a.id.cmp(&b.id));
        items.dedup_by(|a, b| a.id == b.id);
        let group: Vec<usize> = items
            .iter()
            .map(|p| bounds[..free].iter().position(|b| b.0 == p.vertical).unwrap_or(free))
            .collect();

        let seed_vector = seed.seed_vector()?;
        let score = items
            .iter()
            .map(|p| candidate_score(&p.theta, &seed_vector, metric))
            .collect::<Result<Vec<_>>>()?;
        let n = items.len();
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = 1.0 / (metric.distance(&items[i].theta, &items[j].theta)? + DISTANCE_EPSILON);
                pair[i * n + j] = v;
                pair[j * n + i] = v;
            }
        }
        Ok(Self {
            seed,
            items,
            group,
            bounds,
            score,
            pair,
            budget,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Objective of a selection given as item indices.
    pub fn objective(&self, selected: &[usize]) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        for (a, &i) in selected.iter().enumerate() {
            total += self.score[i];
            for &j in &selected[a + 1..] {
                total += self.pair[i * n + j];
            }
        }
        total
    }

    pub fn cost(&self, selected: &[usize]) -> u64 {
        selected.iter().map(|&i| self.items[i].price_cents).sum()
    }

    pub fn counts(&self, selected: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.bounds.len()];
        for &i in selected {
            counts[self.group[i]] += 1;
        }
        counts
    }

    pub fn within_bounds(&self, counts: &[usize]) -> bool {
        counts
            .iter()
            .zip(&self.bounds)
            .all(|(&c, (_, lo, hi))| c >= *lo && c <= *hi)
    }

    pub fn feasibility(&self, selected: &[usize]) -> Feasibility {
        Feasibility {
            budget: self.cost(selected) <= self.budget,
            verticals: self.within_bounds(&self.counts(selected)),
        }
    }

    pub fn to_assortment(&self, selected: &[usize], solver: Solver) -> Assortment {
        let mut sorted = selected.to_vec();
        sorted.sort_by(|&a, &b| self.items[a].id.cmp(&self.items[b].id));
        let members = members_with_seed(self.seed, sorted.iter().map(|&i| self.items[i]));
        let flags = self.feasibility(selected);
        Assortment {
            seed: self.seed.seed.clone(),
            members,
            objective: self.objective(&sorted),
            total_cost_cents: self.cost(selected),
            feasible: flags.all(),
            flags,
            solver,
        }
    }
}

fn members_with_seed<'p>(seed: &'p SeedPair, others: impl Iterator<Item = &'p Product>) -> BTreeMap<String, Vec<String>> {
    let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for p in seed.products().into_iter().chain(others) {
        members.entry(p.vertical.clone()).or_default().push(p.id.clone());
    }
    members
}

/// Greedy ratio initialization followed by best-improvement single swaps.
///
/// `budget` excludes the seed's cost. If the minimum counts cannot be met
/// within budget the best-effort initial selection is returned flagged
/// infeasible and no swaps are attempted.
pub fn greedy_qkp(
    seed: &SeedPair,
    candidates: &[Product],
    metric: &CompatibilityMetric,
    budget: u64,
    constraints: &[VerticalConstraint],
    max_passes: usize,
) -> Result<Assortment> {
    greedy_qkp_with(seed, candidates, metric, budget, constraints, max_passes, |_| {})
}

/// [`greedy_qkp`] reporting the initial state and every accepted swap.
pub fn greedy_qkp_with(
    seed: &SeedPair,
    candidates: &[Product],
    metric: &CompatibilityMetric,
    budget: u64,
    constraints: &[VerticalConstraint],
    max_passes: usize,
    mut on_state: impl FnMut(&Assortment),
) -> Result<Assortment> {
    let inst = QkpInstance::new(seed, candidates, metric, budget, constraints)?;
    let n = inst.len();

    let mut order: Vec<usize> = (0..n).collect();
    let ratio: Vec<f64> = (0..n)
        .map(|i| {
            let potential = inst.score[i] + (0..n).filter(|&j| j != i).map(|j| inst.pair[i * n + j]).sum::<f64>();
            match inst.items[i].price_cents {
                0 => f64::INFINITY,
                c => potential / c as f64,
            }
        })
        .collect();
    order.sort_by(|&a, &b| ratio[b].total_cmp(&ratio[a]).then_with(|| inst.items[a].id.cmp(&inst.items[b].id)));

    let mut in_set = vec![false; n];
    let mut selected: Vec<usize> = Vec::new();
    let mut counts = vec![0usize; inst.bounds.len()];
    let mut spent = 0u64;
    let mut feasible = true;

    for (g, (_, lo, _)) in inst.bounds.iter().enumerate() {
        while counts[g] < *lo {
            let pick = order
                .iter()
                .copied()
                .find(|&i| !in_set[i] && inst.group[i] == g && spent + inst.items[i].price_cents <= budget);
            match pick {
                Some(i) => {
                    in_set[i] = true;
                    selected.push(i);
                    counts[g] += 1;
                    spent += inst.items[i].price_cents;
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
    }
    for &i in &order {
        let g = inst.group[i];
        if !in_set[i] && counts[g] < inst.bounds[g].2 && spent + inst.items[i].price_cents <= budget {
            in_set[i] = true;
            selected.push(i);
            counts[g] += 1;
            spent += inst.items[i].price_cents;
        }
    }

    let mut current = inst.to_assortment(&selected, Solver::Qkp);
    on_state(&current);
    if !feasible {
        return Ok(current);
    }

    let mut value = inst.objective(&selected);
    for _ in 0..max_passes {
        let mut best: Option<(f64, usize, usize)> = None;
        for (slot, &out) in selected.iter().enumerate() {
            let (g_out, c_out) = (inst.group[out], inst.items[out].price_cents);
            let loss = inst.score[out] + selected.iter().filter(|&&s| s != out).map(|&s| inst.pair[out * n + s]).sum::<f64>();
            for inc in 0..n {
                if in_set[inc] {
                    continue;
                }
                let g_in = inst.group[inc];
                if spent - c_out + inst.items[inc].price_cents > budget {
                    continue;
                }
                if g_in != g_out && (counts[g_out] == inst.bounds[g_out].1 || counts[g_in] == inst.bounds[g_in].2) {
                    continue;
                }
                let gain = inst.score[inc]
                    + selected.iter().filter(|&&s| s != out).map(|&s| inst.pair[inc * n + s]).sum::<f64>();
                let delta = gain - loss;
                if delta > 0.0 && best.is_none_or(|(d, _, _)| delta > d) {
                    best = Some((delta, slot, inc));
                }
            }
        }
        let Some((_, slot, inc)) = best else { break };
        let mut candidate = selected.clone();
        let out = candidate[slot];
        candidate[slot] = inc;
        let new_value = inst.objective(&candidate);
        if new_value <= value {
            break;
        }
        in_set[out] = false;
        in_set[inc] = true;
        counts[inst.group[out]] -= 1;
        counts[inst.group[inc]] += 1;
        spent = spent - inst.items[out].price_cents + inst.items[inc].price_cents;
        selected = candidate;
        value = new_value;
        current = inst.to_assortment(&selected, Solver::Qkp);
        on_state(&current);
    }
    Ok(current)
}

/// Result of the budget-relaxed solver with its convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalIterOutcome {
    pub assortment: Assortment,
    pub sweeps: usize,
    /// δ of the final sweep.
    pub delta: f64,
    pub converged: bool,
}

/// Budget-relaxed vertical iteration.
///
/// Starting from the seed alone, each sweep visits the non-seed verticals in
/// `constraints` order. A vertical is refilled with the `i_size` candidates
/// nearest (under `metric`) the unit-norm aggregate of the seed and every
/// product currently held by the other verticals; the refilled set replaces
/// the vertical's previous set straight away, so later verticals in the same
/// sweep see it. δ sums the distance between each vertical's new and
/// previous aggregate, an empty vertical counting as the zero vector.
/// Sweeping stops once δ < `epsilon` or after `max_iters` sweeps.
pub fn generate_assortment(
    seed: &SeedPair,
    candidates: &[Product],
    metric: &CompatibilityMetric,
    constraints: &[VerticalConstraint],
    epsilon: f64,
    max_iters: usize,
) -> Result<VerticalIterOutcome> {
    let dim = metric.dim();
    let verticals: Vec<&VerticalConstraint> = constraints.iter().filter(|c| !seed.is_seed_vertical(&c.label)).collect();
    let pools: Vec<Vec<&Product>> = verticals
        .iter()
        .map(|c| {
            let mut pool: Vec<&Product> = candidates
                .iter()
                .filter(|p| p.vertical == c.label && !seed.is_seed_product(p))
                .collect();
            pool.sort_by(|a, b| a.id.cmp(&b.id));
            pool.dedup_by(|a, b| a.id == b.id);
            pool
        })
        .collect();
    for p in pools.iter().flatten() {
        if p.theta.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.theta.len(),
            });
        }
    }

    let seed_products = seed.products();
    let mut prev: Vec<Vec<&Product>> = vec![Vec::new(); verticals.len()];
    let aggregate = |set: &[&Product]| -> Result<Vec<f64>> {
        if set.is_empty() {
            Ok(vec![0.0; dim])
        } else {
            aggregate_topic_vector(set.iter().map(|p| p.theta.as_slice()))
        }
    };

    let mut sweeps = 0;
    let mut delta = epsilon + 1.0;
    while delta >= epsilon && sweeps < max_iters {
        sweeps += 1;
        delta = 0.0;
        for (v, c) in verticals.iter().enumerate() {
            let context = seed_products
                .iter()
                .copied()
                .chain(prev.iter().enumerate().filter(|&(j, _)| j != v).flat_map(|(_, s)| s.iter().copied()));
            let target = aggregate_topic_vector(context.map(|p| p.theta.as_slice()))?;
            let pool = &pools[v];
            let mut ranked: Vec<(f64, &Product)> = pool
                .iter()
                .map(|p| (metric.distance_unchecked(&p.theta, &target), *p))
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
            let chosen: Vec<&Product> = ranked.into_iter().take(c.i_size).map(|(_, p)| p).collect();
            delta += metric.distance_unchecked(&aggregate(&chosen)?, &aggregate(&prev[v])?);
            prev[v] = chosen;
        }
    }
    let converged = delta < epsilon;

    let seed_vector = seed.seed_vector()?;
    let picked: Vec<&Product> = prev.iter().flatten().copied().collect();
    let thetas: Vec<&[f64]> = picked.iter().map(|p| p.theta.as_slice()).collect();
    let filled = verticals.iter().zip(&prev).all(|(c, s)| s.len() == c.i_size);
    let flags = Feasibility {
        budget: true,
        verticals: filled,
    };
    let assortment = Assortment {
        seed: seed.seed.clone(),
        members: members_with_seed(seed, picked.iter().copied()),
        objective: objective(&thetas, metric, &seed_vector)?,
        total_cost_cents: picked.iter().map(|p| p.price_cents).sum(),
        feasible: flags.all(),
        flags,
        solver: Solver::VerticalIter,
    };
    Ok(VerticalIterOutcome {
        assortment,
        sweeps,
        delta,
        converged,
    })
}
