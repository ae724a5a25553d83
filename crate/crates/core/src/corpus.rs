//! Complaint corpus: taxonomy, reports, per-dimension views and a seeded
//! synthetic generator.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// One annotation axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Subject,
    Criminality,
    Damage,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Subject, Dimension::Criminality, Dimension::Damage];

    /// Key used in dataset and taxonomy files.
    pub fn key(self) -> &'static str {
        match self {
            Dimension::Subject => "subject",
            Dimension::Criminality => "criminality",
            Dimension::Damage => "damage",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Dimension::Subject => "Subject",
            Dimension::Criminality => "Degree of Criminality",
            Dimension::Damage => "Damage",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace([' ', '-'], "_").as_str() {
            "subject" => Ok(Dimension::Subject),
            "criminality" | "degree_of_criminality" | "degreeofcriminality" => {
                Ok(Dimension::Criminality)
            }
            "damage" => Ok(Dimension::Damage),
            _ => Err(Error::UnknownDimension(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionClasses {
    pub dimension: Dimension,
    pub classes: Vec<String>,
}

/// Ordered class lists for each annotation dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    dimensions: Vec<DimensionClasses>,
}

impl Taxonomy {
    pub fn new(dimensions: Vec<DimensionClasses>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &dimensions {
            if !seen.insert(d.dimension) {
                return Err(Error::InvalidTaxonomy(format!("dimension {} repeated", d.dimension)));
            }
            if d.classes.is_empty() {
                return Err(Error::InvalidTaxonomy(format!("dimension {} has no classes", d.dimension)));
            }
            let mut names = HashSet::new();
            for c in &d.classes {
                if !names.insert(c.as_str()) {
                    return Err(Error::InvalidTaxonomy(format!(
                        "class {c:?} repeated in dimension {}",
                        d.dimension
                    )));
                }
            }
        }
        let mut dimensions = dimensions;
        dimensions.sort_by_key(|d| d.dimension);
        Ok(Taxonomy { dimensions })
    }

    /// Default class lists. Names the source study mentions are used where
    /// known; the rest are explicit placeholders (8 / 6 / 4 classes).
    pub fn default_classes() -> Self {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Taxonomy {
            dimensions: vec![
                DimensionClasses {
                    dimension: Dimension::Subject,
                    classes: owned(&[
                        "sextortion",
                        "grooming",
                        "sexting",
                        "cyberbullying",
                        "morphing",
                        "subject_other_1",
                        "subject_other_2",
                        "subject_other_3",
                    ]),
                },
                DimensionClasses {
                    dimension: Dimension::Criminality,
                    classes: owned(&[
                        "intent_of_damage",
                        "commercial_purpose",
                        "criminality_other_1",
                        "criminality_other_2",
                        "criminality_other_3",
                        "criminality_other_4",
                    ]),
                },
                DimensionClasses {
                    dimension: Dimension::Damage,
                    classes: owned(&["csea_production", "damage_other_1", "damage_other_2", "damage_other_3"]),
                },
            ],
        }
    }

    pub fn dimensions(&self) -> impl Iterator<Item = Dimension> + '_ {
        self.dimensions.iter().map(|d| d.dimension)
    }

    pub fn classes(&self, dimension: Dimension) -> Result<&[String]> {
        self.dimensions
            .iter()
            .find(|d| d.dimension == dimension)
            .map(|d| d.classes.as_slice())
            .ok_or_else(|| Error::UnknownDimension(dimension.key().to_string()))
    }

    pub fn class_index(&self, dimension: Dimension, class: &str) -> Result<usize> {
        self.classes(dimension)?
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::UnknownClass {
                dimension,
                class: class.to_string(),
            })
    }

    /// Parses `{"subject": [...], "criminality": [...], "damage": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let dims = raw
            .into_iter()
            .map(|(k, classes)| Ok(DimensionClasses { dimension: k.parse()?, classes }))
            .collect::<Result<Vec<_>>>()?;
        Taxonomy::new(dims)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> = self
            .dimensions
            .iter()
            .map(|d| (d.dimension.key().to_string(), serde_json::json!(d.classes)))
            .collect();
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("taxonomy serializes")
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::default_classes()
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One complaint with its per-dimension label sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub labels: BTreeMap<Dimension, Vec<String>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub scrubbed: bool,
}

impl Report {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Report {
            id: id.into(),
            text: text.into(),
            labels: BTreeMap::new(),
            scrubbed: false,
        }
    }

    pub fn with_labels(mut self, dimension: Dimension, labels: &[&str]) -> Self {
        self.labels
            .insert(dimension, labels.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn labels_in(&self, dimension: Dimension) -> &[String] {
        self.labels.get(&dimension).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Deserialize)]
struct ReportLine {
    id: String,
    text: String,
    #[serde(default)]
    labels: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    scrubbed: bool,
}

/// Validated collection of reports under one taxonomy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub taxonomy: Taxonomy,
    pub reports: Vec<Report>,
}

impl Dataset {
    /// Validates ids and labels; label lists are deduplicated and put in
    /// taxonomy order, and empty lists dropped.
    pub fn new(taxonomy: Taxonomy, reports: Vec<Report>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(reports.len());
        let mut out = Vec::with_capacity(reports.len());
        for mut report in reports {
            if !ids.insert(report.id.clone()) {
                return Err(Error::DuplicateId(report.id));
            }
            report.labels = normalize_labels(&taxonomy, std::mem::take(&mut report.labels))?;
            out.push(report);
        }
        Ok(Dataset { taxonomy, reports: out })
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    /// Reads the JSONL dataset format. Blank lines are skipped.
    pub fn load(path: &Path, taxonomy: Taxonomy) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), taxonomy)
    }

    pub fn from_reader(reader: impl BufRead, taxonomy: Taxonomy) -> Result<Self> {
        let mut reports = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: ReportLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let mut labels = BTreeMap::new();
            for (key, classes) in raw.labels {
                labels.insert(key.parse::<Dimension>()?, classes);
            }
            reports.push(Report {
                id: raw.id,
                text: raw.text,
                labels,
                scrubbed: raw.scrubbed,
            });
        }
        Dataset::new(taxonomy, reports)
    }

    pub fn to_jsonl(&self) -> String {
        reports_to_jsonl(&self.reports)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Reports carrying at least one label in `dimension`, with their label
    /// indices.
    pub fn dimension_view(&self, dimension: Dimension) -> Result<DimensionDataset> {
        let classes = self.taxonomy.classes(dimension)?.to_vec();
        let mut items = Vec::new();
        for r in &self.reports {
            let labels = r.labels_in(dimension);
            if labels.is_empty() {
                continue;
            }
            let idx = labels
                .iter()
                .map(|c| self.taxonomy.class_index(dimension, c))
                .collect::<Result<Vec<_>>>()?;
            items.push(ViewItem {
                id: r.id.clone(),
                text: r.text.clone(),
                labels: idx,
            });
        }
        Ok(DimensionDataset {
            dimension,
            classes,
            items,
        })
    }

    /// Label occurrences per class, in taxonomy order.
    pub fn class_distribution(&self, dimension: Dimension) -> Result<Vec<(String, usize)>> {
        let classes = self.taxonomy.classes(dimension)?;
        let mut counts = vec![0usize; classes.len()];
        for r in &self.reports {
            for c in r.labels_in(dimension) {
                counts[self.taxonomy.class_index(dimension, c)?] += 1;
            }
        }
        Ok(classes.iter().cloned().zip(counts).collect())
    }
}

pub fn reports_to_jsonl(reports: &[Report]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("report serializes"));
        out.push('\n');
    }
    out
}

fn normalize_labels(
    taxonomy: &Taxonomy,
    labels: BTreeMap<Dimension, Vec<String>>,
) -> Result<BTreeMap<Dimension, Vec<String>>> {
    let mut out = BTreeMap::new();
    for (dimension, classes) in labels {
        let known = taxonomy.classes(dimension)?;
        let mut idx = classes
            .iter()
            .map(|c| taxonomy.class_index(dimension, c))
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        if !idx.is_empty() {
            out.insert(dimension, idx.into_iter().map(|i| known[i].clone()).collect());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewItem {
    pub id: String,
    pub text: String,
    /// Sorted class indices into the view's class list.
    pub labels: Vec<usize>,
}

/// The reports labeled in one dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionDataset {
    pub dimension: Dimension,
    pub classes: Vec<String>,
    pub items: Vec<ViewItem>,
}

impl DimensionDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn label_matrix(&self) -> LabelMatrix {
        let mut m = LabelMatrix::zeros(self.items.len(), self.classes.len());
        for (i, item) in self.items.iter().enumerate() {
            for &c in &item.labels {
                m.set(i, c, true);
            }
        }
        m
    }

    /// Sub-view with the items at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> DimensionDataset {
        DimensionDataset {
            dimension: self.dimension,
            classes: self.classes.clone(),
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
        }
    }

    /// Items as reports carrying labels in this dimension only.
    pub fn to_reports(&self) -> Vec<Report> {
        self.items
            .iter()
            .map(|item| {
                let mut r = Report::new(item.id.clone(), item.text.clone());
                r.labels.insert(
                    self.dimension,
                    item.labels.iter().map(|&c| self.classes[c].clone()).collect(),
                );
                r
            })
            .collect()
    }
}

/// Binary ground truth, reports x classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl LabelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LabelMatrix {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = LabelMatrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged label rows");
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<bool> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }
}

/// Target instance count for one class of the synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTarget {
    pub name: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub dimension: Dimension,
    /// Reports labeled in this dimension. Defaults to the sum of class
    /// counts (single-label); smaller values make the surplus occurrences
    /// second labels.
    #[serde(default)]
    pub labeled_reports: Option<usize>,
    pub classes: Vec<ClassTarget>,
}

impl DimensionSpec {
    fn occurrences(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    fn view_size(&self) -> usize {
        self.labeled_reports.unwrap_or_else(|| self.occurrences())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextSpec {
    /// Distinct tokens owned by each class.
    pub class_vocab: usize,
    /// Tokens shared by all reports.
    pub shared_vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a word is drawn from one of the report's class
    /// vocabularies rather than the shared one.
    pub signal_rate: f64,
}

impl Default for TextSpec {
    fn default() -> Self {
        TextSpec {
            class_vocab: 30,
            shared_vocab: 400,
            min_len: 25,
            max_len: 60,
            signal_rate: 0.35,
        }
    }
}

/// Parameters of a synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_reports: usize,
    pub dimensions: Vec<DimensionSpec>,
    #[serde(default)]
    pub text: TextSpec,
    #[serde(default)]
    pub pii_injection_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CorpusSpec {
    /// Corpus shaped after the published statistics: 1196 reports, views of
    /// 994 / 943 / 702 reports, sextortion = 299, commercial purpose = 21,
    /// morphing = 11, more than half of Criminality in intent of damage.
    pub fn reference_statistics(seed: u64) -> Self {
        let t = |pairs: &[(&str, usize)]| {
            pairs
                .iter()
                .map(|&(name, count)| ClassTarget {
                    name: name.to_string(),
                    count,
                })
                .collect::<Vec<_>>()
        };
        CorpusSpec {
            n_reports: 1196,
            dimensions: vec![
                DimensionSpec {
                    dimension: Dimension::Subject,
                    labeled_reports: Some(994),
                    classes: t(&[
                        ("sextortion", 299),
                        ("grooming", 230),
                        ("sexting", 160),
                        ("cyberbullying", 120),
                        ("morphing", 11),
                        ("subject_other_1", 90),
                        ("subject_other_2", 70),
                        ("subject_other_3", 50),
                    ]),
                },
                DimensionSpec {
                    dimension: Dimension::Criminality,
                    labeled_reports: Some(943),
                    classes: t(&[
                        ("intent_of_damage", 500),
                        ("commercial_purpose", 21),
                        ("criminality_other_1", 180),
                        ("criminality_other_2", 130),
                        ("criminality_other_3", 80),
                        ("criminality_other_4", 60),
                    ]),
                },
                DimensionSpec {
                    dimension: Dimension::Damage,
                    labeled_reports: Some(702),
                    classes: t(&[
                        ("csea_production", 250),
                        ("damage_other_1", 200),
                        ("damage_other_2", 150),
                        ("damage_other_3", 130),
                    ]),
                },
            ],
            text: TextSpec::default(),
            pii_injection_rate: 0.3,
            seed,
        }
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        Taxonomy::new(
            self.dimensions
                .iter()
                .map(|d| DimensionClasses {
                    dimension: d.dimension,
                    classes: d.classes.iter().map(|c| c.name.clone()).collect(),
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InfeasibleSpec(m));
        if !(0.0..=1.0).contains(&self.pii_injection_rate) {
            return fail(format!("pii_injection_rate {} outside [0,1]", self.pii_injection_rate));
        }
        let t = &self.text;
        if t.min_len == 0 || t.min_len > t.max_len {
            return fail(format!("text length range [{}, {}] invalid", t.min_len, t.max_len));
        }
        if t.shared_vocab == 0 || t.class_vocab == 0 {
            return fail("vocabulary sizes must be positive".into());
        }
        if !(0.0..=1.0).contains(&t.signal_rate) {
            return fail(format!("signal_rate {} outside [0,1]", t.signal_rate));
        }
        for d in &self.dimensions {
            let view = d.view_size();
            if view > self.n_reports {
                return fail(format!(
                    "{}: {view} labeled reports exceed n_reports {}",
                    d.dimension, self.n_reports
                ));
            }
            if d.occurrences() < view {
                return fail(format!(
                    "{}: {} label occurrences cannot cover {view} labeled reports",
                    d.dimension,
                    d.occurrences()
                ));
            }
            for c in &d.classes {
                if c.count > view {
                    return fail(format!(
                        "{}: class {:?} count {} exceeds {view} labeled reports",
                        d.dimension, c.name, c.count
                    ));
                }
            }
        }
        self.taxonomy().map(|_| ())
    }
}

/// Deterministic synthetic corpus whose class distribution matches `spec`
/// exactly.
pub fn generate_synthetic(spec: &CorpusSpec) -> Result<Dataset> {
    spec.validate()?;
    let taxonomy = spec.taxonomy()?;
    let n = spec.n_reports;
    let mut labels: Vec<BTreeMap<Dimension, Vec<usize>>> = vec![BTreeMap::new(); n];

    for d in &spec.dimensions {
        let mut rng = seed::rng(seed::substream(spec.seed, &format!("labels/{}", d.dimension)));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let view = d.view_size();
        if view == 0 {
            continue;
        }
        // Occurrences laid out class by class and dealt round-robin over the
        // chosen reports: each class count <= view, so a class never lands on
        // the same report twice, and occurrences >= view covers every report.
        let mut slot = 0usize;
        for (ci, c) in d.classes.iter().enumerate() {
            for _ in 0..c.count {
                let report = order[slot % view];
                labels[report].entry(d.dimension).or_default().push(ci);
                slot += 1;
            }
        }
    }

    let mut text_rng = seed::rng(seed::substream(spec.seed, "text"));
    let mut pii_rng = seed::rng(seed::substream(spec.seed, "pii"));
    let mut reports = Vec::with_capacity(n);
    for (i, label_map) in labels.into_iter().enumerate() {
        let pool: Vec<(Dimension, usize)> = label_map
            .iter()
            .flat_map(|(&d, cs)| cs.iter().map(move |&c| (d, c)))
            .collect();
        let mut words = synth_words(&spec.text, &pool, &mut text_rng);
        if pii_rng.random::<f64>() < spec.pii_injection_rate {
            let k = pii_rng.random_range(1..=2);
            for _ in 0..k {
                let at = pii_rng.random_range(0..=words.len());
                words.insert(at, synth_pii(&mut pii_rng));
            }
        }
        let mut report = Report::new(format!("r{i:05}"), words.join(" "));
        for (d, cs) in label_map {
            let classes = taxonomy.classes(d)?;
            let mut cs = cs;
            cs.sort_unstable();
            report.labels.insert(d, cs.into_iter().map(|c| classes[c].clone()).collect());
        }
        reports.push(report);
    }
    Dataset::new(taxonomy, reports)
}

fn vocab_prefix(d: Dimension) -> &'static str {
    match d {
        Dimension::Subject => "sb",
        Dimension::Criminality => "cr",
        Dimension::Damage => "dm",
    }
}

fn synth_words(text: &TextSpec, pool: &[(Dimension, usize)], rng: &mut impl Rng) -> Vec<String> {
    let len = rng.random_range(text.min_len..=text.max_len);
    (0..len)
        .map(|_| {
            if !pool.is_empty() && rng.random::<f64>() < text.signal_rate {
                let (d, c) = pool[rng.random_range(0..pool.len())];
                format!("{}{}x{}", vocab_prefix(d), c, rng.random_range(0..text.class_vocab))
            } else {
                format!("w{}", rng.random_range(0..text.shared_vocab))
            }
        })
        .collect()
}

fn synth_pii(rng: &mut impl Rng) -> String {
    match rng.random_range(0..4) {
        0 => format!("user{}@correo{}.com", rng.random_range(0..1000), rng.random_range(0..10)),
        1 => format!(
            "https://sitio{}.co/perfil/{}",
            rng.random_range(0..100),
            rng.random_range(0..100_000)
        ),
        2 => format!(
            "+57 3{:02} {:03} {:04}",
            rng.random_range(0..100),
            rng.random_range(0..1000),
            rng.random_range(0..10_000)
        ),
        _ => format!("{}", rng.random_range(10_000_000u64..10_000_000_000u64)),
    }
}
