use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topicmodel::PolyTopicModel;

/// A `theta.jsonl` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub product_id: String,
    pub theta: Vec<f64>,
}

/// Topic distributions keyed by product id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThetaTable {
    num_topics: usize,
    rows: BTreeMap<String, Vec<f64>>,
}

impl ThetaTable {
    pub fn new(num_topics: usize) -> Self {
        Self {
            num_topics,
            rows: BTreeMap::new(),
        }
    }

    pub fn from_model(model: &PolyTopicModel) -> Self {
        let mut table = Self::new(model.num_topics);
        for (id, row) in model.product_ids.iter().zip(&model.theta) {
            table.rows.insert(id.clone(), row.clone());
        }
        table
    }

    pub fn from_records(records: impl IntoIterator<Item = ThetaRecord>) -> Result<Self> {
        let mut table = Self::default();
        for r in records {
            table.insert(r.product_id, r.theta)?;
        }
        Ok(table)
    }

    /// Adds a row; the first row fixes the topic count.
    pub fn insert(&mut self, product_id: String, theta: Vec<f64>) -> Result<()> {
        if self.rows.is_empty() && self.num_topics == 0 {
            self.num_topics = theta.len();
        }
        if theta.len() != self.num_topics {
            return Err(Error::DimensionMismatch {
                expected: self.num_topics,
                actual: theta.len(),
            });
        }
        self.rows.insert(product_id, theta);
        Ok(())
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn get(&self, product_id: &str) -> Option<&[f64]> {
        self.rows.get(product_id).map(Vec::as_slice)
    }

    pub fn require(&self, product_id: &str) -> Result<&[f64]> {
        self.get(product_id)
            .ok_or_else(|| Error::UnknownProduct(product_id.to_string()))
    }

    pub fn contains(&self, product_id: &str) -> bool {
        self.rows.contains_key(product_id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in ascending product-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn records(&self) -> impl Iterator<Item = ThetaRecord> + '_ {
        self.rows.iter().map(|(k, v)| ThetaRecord {
            product_id: k.clone(),
            theta: v.clone(),
        })
    }
}
