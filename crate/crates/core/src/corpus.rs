//! Visual and text document construction.
//!
//! A product's visual document is the set of indexed CNN channels whose
//! pooled activation exceeds a per-channel threshold in at least one of its
//! images. Its text document is the bag of title and attribute tokens left
//! after stopword removal. The two are paired into a [`DocumentTuple`], one
//! per product, for the polylingual topic model.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Visual vocabulary size of the four indexed ResNet-50 layers combined.
pub const DEFAULT_VISUAL_VOCAB: usize = 2816;

pub const DEFAULT_QUANTILE: f64 = 0.85;

pub const DEFAULT_MIN_TOKEN_FREQ: usize = 2;

const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Pooled channel activations for every image of one product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSummary {
    pub product_id: String,
    pub images: Vec<Vec<f64>>,
}

/// One indexed convolutional layer inside the concatenated channel vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerOffset {
    pub label: String,
    pub start: usize,
    pub channels: usize,
}

/// How the channels of the indexed layers are laid out in each activation
/// vector. Layers must tile `[0, V_img)` contiguously.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VisualLayout {
    layers: Vec<LayerOffset>,
}

impl VisualLayout {
    pub fn new(layers: Vec<LayerOffset>) -> Result<Self> {
        let mut next = 0;
        for layer in &layers {
            if layer.start != next {
                return Err(Error::param(
                    "layer_offsets",
                    format!(
                        "layer `{}` starts at {} but the previous layer ends at {}",
                        layer.label, layer.start, next
                    ),
                ));
            }
            next += layer.channels;
        }
        if next == 0 {
            return Err(Error::param("layer_offsets", "no channels"));
        }
        Ok(Self { layers })
    }

    /// A single anonymous layer of `channels` channels.
    pub fn single(channels: usize) -> Self {
        Self {
            layers: vec![LayerOffset {
                label: "conv".into(),
                start: 0,
                channels,
            }],
        }
    }

    pub fn layers(&self) -> &[LayerOffset] {
        &self.layers
    }

    pub fn vocab_size(&self) -> usize {
        self.layers.iter().map(|l| l.channels).sum()
    }

    /// Human-readable label of a visual word, `layer:channel`.
    pub fn word_label(&self, word: usize) -> Option<String> {
        self.layers
            .iter()
            .find(|l| word >= l.start && word < l.start + l.channels)
            .map(|l| format!("{}:{}", l.label, word - l.start))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector {
    pub thresholds: Vec<f64>,
    pub quantile: f64,
}

impl ThresholdVector {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Set of visual word ids present in a product's images.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VisualDocument {
    words: BTreeSet<u32>,
}

impl VisualDocument {
    pub fn words(&self) -> &BTreeSet<u32> {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl FromIterator<u32> for VisualDocument {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        Self {
            words: iter.into_iter().collect(),
        }
    }
}

/// Bag of text word ids; duplicates are meaningful.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TextDocument {
    tokens: Vec<u32>,
}

impl TextDocument {
    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token multiplicities keyed by word id.
    pub fn counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for &t in &self.tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        counts
    }
}

impl FromIterator<u32> for TextDocument {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        Self {
            tokens: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentTuple {
    pub product_id: String,
    pub visual: Option<VisualDocument>,
    pub text: Option<TextDocument>,
}

impl DocumentTuple {
    pub fn has_any_modality(&self) -> bool {
        self.visual.is_some() || self.text.is_some()
    }
}

/// A catalog line as ingested from `catalog.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub product_id: String,
    pub vertical: String,
    pub price_cents: u64,
    pub title: String,
    #[serde(default)]
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// Parses one stopword per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self(HashSet::new())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Lower-cases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Frozen text vocabulary. Ids are assigned in lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TextVocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl TextVocabulary {
    /// Counts case-folded, non-stopword tokens over the whole corpus and keeps
    /// those seen at least `min_freq` times.
    pub fn build<'a, I, D>(docs: I, stopwords: &Stopwords, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            for token in doc {
                let token = token.to_lowercase();
                if !stopwords.contains(&token) {
                    *freq.entry(token).or_insert(0) += 1;
                }
            }
        }
        Self::from_tokens(
            freq.into_iter()
                .filter(|&(_, n)| n >= min_freq.max(1))
                .map(|(t, _)| t),
        )
    }

    /// Builds a vocabulary from an explicit token list; ids follow list order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut vocab = Self::default();
        for token in tokens {
            if !vocab.index.contains_key(&token) {
                vocab.index.insert(token.clone(), vocab.tokens.len() as u32);
                vocab.tokens.push(token);
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(&token.to_lowercase()).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Per-channel nearest-rank quantile of the pooled activations over every
/// image in the corpus.
pub fn compute_channel_thresholds(summaries: &[ActivationSummary], q: f64) -> Result<ThresholdVector> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("quantile", format!("{q} is outside [0, 1]")));
    }
    let mut images = summaries.iter().flat_map(|s| s.images.iter());
    let first = images.next().ok_or(Error::NoActivationData)?;
    let dim = first.len();
    let mut columns: Vec<Vec<f64>> = (0..dim).map(|_| Vec::new()).collect();
    for image in std::iter::once(first).chain(images) {
        if image.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: image.len(),
            });
        }
        for (column, &v) in columns.iter_mut().zip(image) {
            column.push(v);
        }
    }
    let thresholds = columns
        .into_iter()
        .map(|mut values| {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
            values[rank - 1]
        })
        .collect();
    Ok(ThresholdVector {
        thresholds,
        quantile: q,
    })
}

/// Channels strictly above their threshold.
pub fn binarize_image(values: &[f64], thresholds: &ThresholdVector) -> Result<BTreeSet<u32>> {
    if values.len() != thresholds.len() {
        return Err(Error::DimensionMismatch {
            expected: thresholds.len(),
            actual: values.len(),
        });
    }
    Ok(values
        .iter()
        .zip(&thresholds.thresholds)
        .enumerate()
        .filter(|(_, (v, t))| v > t)
        .map(|(c, _)| c as u32)
        .collect())
}

/// Union of the per-image word sets; `None` when there are no images.
pub fn build_visual_document<I>(image_word_sets: I) -> Option<VisualDocument>
where
    I: IntoIterator,
    I::Item: IntoIterator<Item = u32>,
{
    let mut any = false;
    let mut words = BTreeSet::new();
    for set in image_word_sets {
        any = true;
        words.extend(set);
    }
    any.then_some(VisualDocument { words })
}

/// Title tokens followed by attribute tokens, stopwords removed, mapped
/// through the frozen vocabulary. `None` when nothing survives.
pub fn build_text_document<S: AsRef<str>>(
    title_tokens: &[S],
    attribute_tokens: &[S],
    stopwords: &Stopwords,
    vocab: &TextVocabulary,
) -> Option<TextDocument> {
    let tokens: Vec<u32> = title_tokens
        .iter()
        .chain(attribute_tokens)
        .map(|t| t.as_ref().to_lowercase())
        .filter(|t| !stopwords.contains(t))
        .filter_map(|t| vocab.id(&t))
        .collect();
    (!tokens.is_empty()).then_some(TextDocument { tokens })
}

/// Tokens of a catalog entry: (title tokens, attribute tokens).
pub fn entry_tokens(entry: &CatalogEntry) -> (Vec<String>, Vec<String>) {
    let title = tokenize(&entry.title);
    let attrs = entry.attributes.iter().flat_map(|a| tokenize(a)).collect();
    (title, attrs)
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub quantile: f64,
    pub min_token_freq: usize,
    pub stopwords: Stopwords,
    pub layout: Option<VisualLayout>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            quantile: DEFAULT_QUANTILE,
            min_token_freq: DEFAULT_MIN_TOKEN_FREQ,
            stopwords: Stopwords::english(),
            layout: None,
        }
    }
}

/// Output of the two-pass corpus build.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub tuples: Vec<DocumentTuple>,
    pub text_vocab: TextVocabulary,
    pub layout: VisualLayout,
    pub thresholds: Option<ThresholdVector>,
}

/// Builds one tuple per catalog product that has at least one modality.
///
/// The first pass fits thresholds and the text vocabulary corpus-wide, the
/// second maps every product through them. Tuples follow catalog order.
pub fn build_corpus(
    catalog: &[CatalogEntry],
    activations: &[ActivationSummary],
    options: &CorpusOptions,
) -> Result<Corpus> {
    let known: HashSet<&str> = catalog.iter().map(|e| e.product_id.as_str()).collect();
    let mut by_product: HashMap<&str, Vec<&Vec<f64>>> = HashMap::new();
    for summary in activations {
        if !known.contains(summary.product_id.as_str()) {
            return Err(Error::UnknownProduct(summary.product_id.clone()));
        }
        by_product
            .entry(summary.product_id.as_str())
            .or_default()
            .extend(summary.images.iter());
    }

    let has_images = activations.iter().any(|s| !s.images.is_empty());
    let thresholds = if has_images {
        Some(compute_channel_thresholds(activations, options.quantile)?)
    } else {
        None
    };
    let dim = thresholds.as_ref().map_or(0, ThresholdVector::len);
    let layout = match &options.layout {
        Some(layout) => {
            if thresholds.is_some() && layout.vocab_size() != dim {
                return Err(Error::DimensionMismatch {
                    expected: layout.vocab_size(),
                    actual: dim,
                });
            }
            layout.clone()
        }
        None => VisualLayout::single(dim),
    };

    let tokens: Vec<(Vec<String>, Vec<String>)> = catalog.iter().map(entry_tokens).collect();
    let text_vocab = TextVocabulary::build(
        tokens.iter().map(|(t, a)| t.iter().chain(a.iter())),
        &options.stopwords,
        options.min_token_freq,
    );

    let mut tuples = Vec::new();
    for (entry, (title, attrs)) in catalog.iter().zip(&tokens) {
        let visual = match (by_product.get(entry.product_id.as_str()), &thresholds) {
            (Some(images), Some(th)) => {
                let sets = images
                    .iter()
                    .map(|img| binarize_image(img, th))
                    .collect::<Result<Vec<_>>>()?;
                build_visual_document(sets).filter(|d| !d.is_empty())
            }
            _ => None,
        };
        let text = build_text_document(title, attrs, &options.stopwords, &text_vocab);
        let tuple = DocumentTuple {
            product_id: entry.product_id.clone(),
            visual,
            text,
        };
        if tuple.has_any_modality() {
            tuples.push(tuple);
        }
    }
    Ok(Corpus {
        tuples,
        text_vocab,
        layout,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(id: &str, images: Vec<Vec<f64>>) -> ActivationSummary {
        ActivationSummary {
            product_id: id.into(),
            images,
        }
    }

    #[test]
    fn singleton_quantile_is_the_value() {
        let th = compute_channel_thresholds(&[summary("a", vec![vec![0.1, 0.5]])], 1.0).unwrap();
        assert_eq!(th.thresholds, vec![0.1, 0.5]);
    }

    #[test]
    fn nearest_rank_median() {
        let s = vec![
            summary("a", vec![vec![3.0]]),
            summary("b", vec![vec![1.0], vec![2.0]]),
        ];
        let th = compute_channel_thresholds(&s, 0.5).unwrap();
        assert_eq!(th.thresholds, vec![2.0]);
    }

    #[test]
    fn constant_zero_channel_never_fires() {
        let s = vec![summary("a", vec![vec![0.0, 1.0], vec![0.0, 2.0]])];
        let th = compute_channel_thresholds(&s, 0.85).unwrap();
        assert_eq!(th.thresholds[0], 0.0);
        for img in &s[0].images {
            assert!(!binarize_image(img, &th).unwrap().contains(&0));
        }
    }

    #[test]
    fn threshold_errors() {
        assert!(matches!(
            compute_channel_thresholds(&[], 0.5),
            Err(Error::NoActivationData)
        ));
        assert!(matches!(
            compute_channel_thresholds(&[summary("a", vec![])], 0.5),
            Err(Error::NoActivationData)
        ));
        let ragged = vec![summary("a", vec![vec![1.0, 2.0], vec![1.0]])];
        assert!(matches!(
            compute_channel_thresholds(&ragged, 0.5),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn binarize_is_strict() {
        let th = ThresholdVector {
            thresholds: vec![0.5; 3],
            quantile: 0.5,
        };
        let words = binarize_image(&[0.9, 0.1, 0.6], &th).unwrap();
        assert_eq!(words.into_iter().collect::<Vec<_>>(), vec![0, 2]);
        assert!(binarize_image(&[0.5, 0.1, 0.2], &th).unwrap().is_empty());
        assert!(binarize_image(&[0.5], &th).is_err());
    }

    #[test]
    fn visual_union() {
        let doc = build_visual_document(vec![vec![1, 2], vec![2, 3]]).unwrap();
        assert_eq!(doc.words().iter().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        let single = build_visual_document(vec![vec![5]]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(build_visual_document(Vec::<Vec<u32>>::new()).is_none());
    }

    #[test]
    fn text_document_bag() {
        let stop: Stopwords = ["the"].into_iter().collect();
        let title = vec!["the", "oak", "table"];
        let attrs = vec!["oak", "rustic"];
        let all: Vec<String> = title.iter().chain(&attrs).map(|s| s.to_string()).collect();
        let vocab = TextVocabulary::build([all.iter()], &stop, 1);
        let doc = build_text_document(&title, &attrs, &stop, &vocab).unwrap();
        let counts = doc.counts();
        assert_eq!(counts[&vocab.id("oak").unwrap()], 2);
        assert_eq!(counts[&vocab.id("table").unwrap()], 1);
        assert_eq!(counts[&vocab.id("rustic").unwrap()], 1);
        assert_eq!(doc.len(), 4);
        assert!(vocab.id("the").is_none());
    }

    #[test]
    fn fully_stopworded_text_is_missing() {
        let stop: Stopwords = ["the", "a"].into_iter().collect();
        let vocab = TextVocabulary::from_tokens(["oak".to_string()]);
        assert!(build_text_document(&["the"], &["a"], &stop, &vocab).is_none());
    }

    #[test]
    fn case_folding() {
        let tokens = tokenize("Oak oak OAK-table");
        assert_eq!(tokens, vec!["oak", "oak", "oak", "table"]);
        let vocab = TextVocabulary::build([tokens.iter()], &Stopwords::empty(), 1);
        assert_eq!(vocab.id("Oak"), vocab.id("oak"));
        assert_eq!(vocab.len(), 2);
    }

    #[test]
    fn min_frequency_cutoff() {
        let tokens: Vec<String> = ["oak", "oak", "pine"].iter().map(|s| s.to_string()).collect();
        let vocab = TextVocabulary::build([tokens.iter()], &Stopwords::empty(), 2);
        assert_eq!(vocab.tokens(), &["oak".to_string()]);
    }

    #[test]
    fn english_stopwords_loaded() {
        let stop = Stopwords::english();
        assert!(stop.contains("the"));
        assert!(stop.contains("and"));
        assert!(!stop.contains("oak"));
    }

    #[test]
    fn layout_validation_and_labels() {
        let layout = VisualLayout::new(vec![
            LayerOffset { label: "layer8".into(), start: 0, channels: 4 },
            LayerOffset { label: "layer18".into(), start: 4, channels: 2 },
        ])
        .unwrap();
        assert_eq!(layout.vocab_size(), 6);
        assert_eq!(layout.word_label(5).as_deref(), Some("layer18:1"));
        assert!(layout.word_label(6).is_none());
        assert!(VisualLayout::new(vec![LayerOffset { label: "x".into(), start: 1, channels: 2 }]).is_err());
    }

    #[test]
    fn corpus_build_pairs_modalities() {
        let catalog = vec![
            CatalogEntry {
                product_id: "p1".into(),
                vertical: "Chair".into(),
                price_cents: 100,
                title: "Oak Chair".into(),
                attributes: vec!["oak".into()],
            },
            CatalogEntry {
                product_id: "p2".into(),
                vertical: "Chair".into(),
                price_cents: 100,
                title: "the".into(),
                attributes: vec![],
            },
            CatalogEntry {
                product_id: "p3".into(),
                vertical: "Chair".into(),
                price_cents: 100,
                title: "chair".into(),
                attributes: vec![],
            },
        ];
        let acts = vec![summary("p2", vec![vec![1.0, 0.0], vec![0.0, 0.0]])];
        let opts = CorpusOptions {
            quantile: 0.5,
            ..CorpusOptions::default()
        };
        let corpus = build_corpus(&catalog, &acts, &opts).unwrap();
        assert_eq!(corpus.text_vocab.tokens(), &["chair".to_string(), "oak".to_string()]);
        let ids: Vec<&str> = corpus.tuples.iter().map(|t| t.product_id.as_str()).collect();
        assert_eq!(ids, vec!["p1", "p2", "p3"]);
        assert!(corpus.tuples[1].text.is_none());
        assert_eq!(corpus.tuples[1].visual.as_ref().unwrap().len(), 1);
        assert!(corpus.tuples[0].visual.is_none());

        let stray = vec![summary("zz", vec![vec![1.0]])];
        assert!(matches!(
            build_corpus(&catalog, &stray, &opts),
            Err(Error::UnknownProduct(_))
        ));
    }
}
