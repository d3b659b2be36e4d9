//! Accession data analysis and the node/sample index.
//!
//! Accession files are comma-separated with a header naming
//! `species,depositor,accessions,country` (any order, extra columns ignored).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REQUIRED_COLUMNS: [&str; 4] = ["species", "depositor", "accessions", "country"];
pub const PLACEMENT_HEADER: &str = "# dss-placement v1";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("accession file lacks required column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("cannot read accession file: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("replication factor must be at least 1 (sample {species}/{sample_id})")]
    InvalidCopies { species: String, sample_id: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessionRecord {
    pub species: String,
    pub depositor: String,
    pub accessions: u64,
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub records: Vec<AccessionRecord>,
    pub skipped: Vec<RowError>,
}

pub fn ingest<R: Read>(input: R) -> Result<IngestReport, RegistryError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
    };
    let idx: Vec<Option<usize>> = REQUIRED_COLUMNS.iter().map(|c| find(c)).collect();
    let missing: Vec<String> = REQUIRED_COLUMNS
        .iter()
        .zip(&idx)
        .filter(|(_, i)| i.is_none())
        .map(|(c, _)| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(RegistryError::MissingColumns(missing));
    }
    let [species_i, depositor_i, accessions_i, country_i] = [
        idx[0].unwrap(),
        idx[1].unwrap(),
        idx[2].unwrap(),
        idx[3].unwrap(),
    ];

    let mut report = IngestReport::default();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.skipped.push(RowError {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        if row.iter().all(str::is_empty) {
            continue;
        }
        let reason = if field(species_i).is_empty() {
            Some("empty species".to_string())
        } else if field(depositor_i).is_empty() {
            Some("empty depositor".to_string())
        } else if field(country_i).is_empty() {
            Some("empty country".to_string())
        } else {
            match field(accessions_i).parse::<u64>() {
                Ok(0) => Some("accessions must be at least 1".to_string()),
                Ok(_) => None,
                Err(_) => Some(format!("bad accessions count {:?}", field(accessions_i))),
            }
        };
        if let Some(reason) = reason {
            report.skipped.push(RowError { line, reason });
            continue;
        }
        report.records.push(AccessionRecord {
            species: field(species_i).to_string(),
            depositor: field(depositor_i).to_string(),
            accessions: field(accessions_i).parse().expect("validated above"),
            country: field(country_i).to_string(),
        });
    }
    Ok(report)
}

pub fn ingest_str(text: &str) -> Result<IngestReport, RegistryError> {
    ingest(text.as_bytes())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SpeciesSummary {
    pub depositors: usize,
    pub accessions: u64,
    pub countries: usize,
}

/// Distinct depositors, total accessions and distinct countries per species.
pub fn species_summary(records: &[AccessionRecord]) -> BTreeMap<String, SpeciesSummary> {
    let mut acc: BTreeMap<&str, (BTreeSet<&str>, u64, BTreeSet<&str>)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(&r.species).or_default();
        e.0.insert(&r.depositor);
        e.1 += r.accessions;
        e.2.insert(&r.country);
    }
    acc.into_iter()
        .map(|(s, (d, a, c))| {
            (
                s.to_string(),
                SpeciesSummary {
                    depositors: d.len(),
                    accessions: a,
                    countries: c.len(),
                },
            )
        })
        .collect()
}

fn depositors_per_species(records: &[AccessionRecord]) -> BTreeMap<&str, usize> {
    let mut sets: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        sets.entry(&r.species).or_default().insert(&r.depositor);
    }
    sets.into_iter().map(|(s, d)| (s, d.len())).collect()
}

/// Number of species per distinct-depositor count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RedundancyHistogram {
    pub buckets: BTreeMap<usize, usize>,
}

impl RedundancyHistogram {
    pub fn species_count(&self) -> usize {
        self.buckets.values().sum()
    }

    /// Share of species held by a single depositor.
    pub fn single_depositor_share(&self) -> f64 {
        let total = self.species_count();
        if total == 0 {
            0.0
        } else {
            *self.buckets.get(&1).unwrap_or(&0) as f64 / total as f64
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("depositors,species\n");
        for (d, n) in &self.buckets {
            s.push_str(&format!("{d},{n}\n"));
        }
        s
    }
}

pub fn depositor_histogram(records: &[AccessionRecord]) -> RedundancyHistogram {
    let mut buckets = BTreeMap::new();
    for n in depositors_per_species(records).into_values() {
        *buckets.entry(n).or_default() += 1;
    }
    RedundancyHistogram { buckets }
}

/// Species with fewer than `k` distinct depositors, sorted.
pub fn at_risk(records: &[AccessionRecord], k: usize) -> Vec<String> {
    depositors_per_species(records)
        .into_iter()
        .filter(|&(_, n)| n < k)
        .map(|(s, _)| s.to_string())
        .collect()
}

/// Heavy-tailed synthetic portal extract: depositor counts are geometric
/// with p = 0.6, so most species have one depositor.
pub fn synthetic_records(n_species: usize, seed: u64) -> Vec<AccessionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for s in 0..n_species {
        let mut depositors = 1;
        while depositors < 40 && rng.gen_bool(0.4) {
            depositors += 1;
        }
        for d in 0..depositors {
            out.push(AccessionRecord {
                species: format!("Species {s:04}"),
                depositor: format!("Genebank {:02}", (s * 7 + d) % 97),
                accessions: rng.gen_range(1..500),
                country: format!("Country {:03}", rng.gen_range(0..150)),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: u32,
    pub capacity_slots: usize,
    pub stored: BTreeSet<(String, u32)>,
    pub last_valid_report: Option<f64>,
    pub active: bool,
}

impl NodeRecord {
    pub fn new(node_id: u32, capacity_slots: usize) -> Self {
        Self {
            node_id,
            capacity_slots,
            stored: BTreeSet::new(),
            last_valid_report: None,
            active: true,
        }
    }

    pub fn free_slots(&self) -> usize {
        self.capacity_slots.saturating_sub(self.stored.len())
    }
}

/// Single-writer index of nodes and their liveness.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeRegistry {
    nodes: BTreeMap<u32, NodeRecord>,
}

impl NodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, record: NodeRecord) {
        self.nodes.insert(record.node_id, record);
    }

    pub fn get(&self, node_id: u32) -> Option<&NodeRecord> {
        self.nodes.get(&node_id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    /// Notes a report from `node_id` at `t_sim`. Only valid reports refresh
    /// liveness; the node is active iff its last valid report is within
    /// `window_h`.
    pub fn record_report(
        &mut self,
        node_id: u32,
        valid: bool,
        t_sim: f64,
        window_h: f64,
    ) -> Result<&NodeRecord, RegistryError> {
        let rec = self
            .nodes
            .get_mut(&node_id)
            .ok_or(RegistryError::UnknownNode(node_id))?;
        if valid {
            rec.last_valid_report = Some(t_sim);
        }
        rec.active = is_live(rec.last_valid_report, t_sim, window_h);
        Ok(rec)
    }

    /// Re-evaluates liveness of every node at `t_sim`.
    pub fn refresh(&mut self, t_sim: f64, window_h: f64) {
        for rec in self.nodes.values_mut() {
            rec.active = is_live(rec.last_valid_report, t_sim, window_h);
        }
    }

    pub fn active_count(&self) -> usize {
        self.nodes.values().filter(|n| n.active).count()
    }
}

pub fn is_live(last_valid: Option<f64>, now: f64, window_h: f64) -> bool {
    last_valid.is_some_and(|t| now - t <= window_h)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleRequest {
    pub species: String,
    pub sample_id: u32,
    /// Replication factor k.
    pub copies: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub species: String,
    pub sample_id: u32,
    pub node_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deficit {
    pub species: String,
    pub sample_id: u32,
    pub missing: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub assignments: Vec<Assignment>,
    pub unplaced: Vec<Deficit>,
}

impl PlacementPlan {
    /// `species,sample_id,node_id` rows under a version line.
    pub fn to_rows(&self) -> String {
        let mut s = format!("{PLACEMENT_HEADER}\nspecies,sample_id,node_id\n");
        for a in &self.assignments {
            s.push_str(&format!("{},{},{}\n", a.species, a.sample_id, a.node_id));
        }
        s
    }

    pub fn copies_of(&self, species: &str, sample_id: u32) -> usize {
        self.assignments
            .iter()
            .filter(|a| a.species == species && a.sample_id == sample_id)
            .count()
    }
}

/// Greedy placement onto active nodes.
///
/// Samples are handled in decreasing order of k (stable otherwise). Each
/// takes the k eligible nodes with the most free slots, ties broken by the
/// lower node id. A node is eligible if it is active, has a free slot and
/// does not already hold the sample. Picking the emptiest nodes first keeps
/// small-capacity nodes available for later samples; shortfalls are
/// reported as deficits.
pub fn place(
    samples: &[SampleRequest],
    nodes: &[NodeRecord],
) -> Result<PlacementPlan, RegistryError> {
    if let Some(s) = samples.iter().find(|s| s.copies == 0) {
        return Err(RegistryError::InvalidCopies {
            species: s.species.clone(),
            sample_id: s.sample_id,
        });
    }
    let mut nodes: Vec<NodeRecord> = nodes.iter().filter(|n| n.active).cloned().collect();
    nodes.sort_by_key(|n| n.node_id);

    let mut order: Vec<&SampleRequest> = samples.iter().collect();
    order.sort_by_key(|s| std::cmp::Reverse(s.copies));

    let mut plan = PlacementPlan::default();
    for req in order {
        let key = (req.species.clone(), req.sample_id);
        let mut candidates: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].free_slots() > 0 && !nodes[i].stored.contains(&key))
            .collect();
        candidates.sort_by(|&a, &b| {
            nodes[b]
                .free_slots()
                .cmp(&nodes[a].free_slots())
                .then(nodes[a].node_id.cmp(&nodes[b].node_id))
        });
        candidates.truncate(req.copies);
        for &i in &candidates {
            nodes[i].stored.insert(key.clone());
            plan.assignments.push(Assignment {
                species: req.species.clone(),
                sample_id: req.sample_id,
                node_id: nodes[i].node_id,
            });
        }
        if candidates.len() < req.copies {
            plan.unplaced.push(Deficit {
                species: req.species.clone(),
                sample_id: req.sample_id,
                missing: req.copies - candidates.len(),
            });
        }
    }
    Ok(plan)
}
