//! Constructs, relations and gold cluster labels, plus the pair and split
//! machinery derived from them.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named, defined latent variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Construct {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub definition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publication: Option<String>,
}

/// Constructs in load order with an id index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstructSet {
    items: Vec<Construct>,
    index: HashMap<String, usize>,
}

impl ConstructSet {
    pub fn new(items: Vec<Construct>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (pos, c) in items.iter().enumerate() {
            validate_construct(c, pos + 1)?;
            if index.insert(c.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId {
                    id: c.id.clone(),
                    line: pos + 1,
                });
            }
        }
        Ok(Self { items, index })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, pos: usize) -> Option<&Construct> {
        self.items.get(pos)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Construct> {
        self.items.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.items.iter().map(|c| c.id.as_str())
    }

    /// The constructs at `positions`, in the order given.
    pub fn subset(&self, positions: &[usize]) -> ConstructSet {
        let items: Vec<Construct> = positions.iter().map(|&p| self.items[p].clone()).collect();
        let index = items
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        ConstructSet { items, index }
    }
}

impl<'a> IntoIterator for &'a ConstructSet {
    type Item = &'a Construct;
    type IntoIter = std::slice::Iter<'a, Construct>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

fn validate_construct(c: &Construct, line: usize) -> Result<()> {
    if c.id.is_empty() {
        return Err(Error::Parse {
            line,
            message: "empty construct id".into(),
        });
    }
    if c.name.is_empty() {
        return Err(Error::Parse {
            line,
            message: format!("construct {:?} has an empty name", c.id),
        });
    }
    Ok(())
}

/// Reads a JSON Lines constructs file. Blank lines are skipped.
pub fn load_constructs(path: impl AsRef<Path>) -> Result<ConstructSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    let mut index = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let c: Construct = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        validate_construct(&c, line_no)?;
        if index.insert(c.id.clone(), items.len()).is_some() {
            return Err(Error::DuplicateId {
                id: c.id,
                line: line_no,
            });
        }
        items.push(c);
    }
    Ok(ConstructSet { items, index })
}

pub fn write_constructs(set: &ConstructSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for c in set {
        let line = serde_json::to_string(c).expect("construct serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// A signed path between two constructs.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub source_id: String,
    pub target_id: String,
    pub coefficient: f64,
    pub significant: bool,
}

impl Relation {
    pub fn is_positive(&self) -> bool {
        self.coefficient > 0.0
    }
}

#[derive(Deserialize)]
struct RelationRow {
    source_id: String,
    target_id: String,
    coefficient: String,
    significant: String,
}

/// Reads a relations CSV, resolving ids against `set`.
///
/// Row numbers in errors count the header as row 1.
pub fn load_relations(
    path: impl AsRef<Path>,
    set: &ConstructSet,
    significant_only: bool,
) -> Result<Vec<Relation>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e, 0))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<RelationRow>().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| csv_error(path, e, row_no))?;
        for id in [&row.source_id, &row.target_id] {
            if set.position(id).is_none() {
                return Err(Error::UnknownId {
                    id: id.clone(),
                    row: row_no,
                });
            }
        }
        if row.source_id == row.target_id {
            return Err(Error::Parse {
                line: row_no,
                message: format!("relation from {:?} to itself", row.source_id),
            });
        }
        let coefficient: f64 = row.coefficient.trim().parse().map_err(|_| Error::Parse {
            line: row_no,
            message: format!("coefficient {:?} is not a decimal number", row.coefficient),
        })?;
        if !coefficient.is_finite() {
            return Err(Error::Parse {
                line: row_no,
                message: format!("coefficient {:?} is not finite", row.coefficient),
            });
        }
        if coefficient == 0.0 {
            return Err(Error::Parse {
                line: row_no,
                message: "zero path coefficient has no sign".into(),
            });
        }
        let significant = match row.significant.trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Parse {
                    line: row_no,
                    message: format!("significant must be true or false, got {other:?}"),
                })
            }
        };
        if significant_only && !significant {
            continue;
        }
        let key = (
            row.source_id.clone(),
            row.target_id.clone(),
            coefficient.to_bits(),
            significant,
        );
        if !seen.insert(key) {
            continue;
        }
        out.push(Relation {
            source_id: row.source_id,
            target_id: row.target_id,
            coefficient,
            significant,
        });
    }
    Ok(out)
}

pub fn write_relations(relations: &[Relation], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e, 0))?;
    w.write_record(["source_id", "target_id", "coefficient", "significant"])
        .map_err(|e| csv_error(path, e, 0))?;
    for r in relations {
        w.write_record([
            r.source_id.as_str(),
            r.target_id.as_str(),
            &r.coefficient.to_string(),
            if r.significant { "true" } else { "false" },
        ])
        .map_err(|e| csv_error(path, e, 0))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error, row: usize) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line: row,
            message: format!("{other:?}"),
        },
    }
}

/// A disjoint assignment of every construct of a set to one cluster.
///
/// Labels are positional (aligned with the governing [`ConstructSet`]) and
/// dense: they are numbered by first appearance, so two partitions that
/// differ only by cluster naming have identical label vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Densifies arbitrary labels by order of first appearance.
    pub fn from_labels<L: Eq + std::hash::Hash + Clone>(raw: &[L]) -> Self {
        let mut map: HashMap<L, usize> = HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(l.clone()).or_insert(next)
            })
            .collect();
        Partition {
            labels,
            k: map.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            k: n,
        }
    }

    pub fn single_cluster(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, pos: usize) -> usize {
        self.labels[pos]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Member positions of every cluster, in ascending order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (pos, &l) in self.labels.iter().enumerate() {
            out[l].push(pos);
        }
        out
    }

    /// The partition restricted to `positions`, relabeled densely.
    pub fn restrict(&self, positions: &[usize]) -> Partition {
        let raw: Vec<usize> = positions.iter().map(|&p| self.labels[p]).collect();
        Partition::from_labels(&raw)
    }
}

#[derive(Deserialize)]
struct GoldRow {
    construct_id: String,
    cluster_id: String,
}

/// Reads a `construct_id,cluster_id` CSV covering every construct exactly once.
pub fn load_gold_partition(path: impl AsRef<Path>, set: &ConstructSet) -> Result<Partition> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e, 0))?;
    let mut raw: Vec<Option<String>> = vec![None; set.len()];
    for (i, row) in reader.deserialize::<GoldRow>().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| csv_error(path, e, row_no))?;
        let pos = set.position(&row.construct_id).ok_or_else(|| Error::UnknownId {
            id: row.construct_id.clone(),
            row: row_no,
        })?;
        if raw[pos].is_some() {
            return Err(Error::Coverage {
                id: row.construct_id,
                problem: "is assigned more than once",
            });
        }
        raw[pos] = Some(row.cluster_id);
    }
    let mut labels = Vec::with_capacity(raw.len());
    for (pos, l) in raw.into_iter().enumerate() {
        match l {
            Some(l) => labels.push(l),
            None => {
                return Err(Error::Coverage {
                    id: set.get(pos).expect("in range").id.clone(),
                    problem: "has no cluster assignment",
                })
            }
        }
    }
    // First appearance is taken in construct order, not file order.
    Ok(Partition::from_labels(&labels))
}

/// Writes a partition as `construct_id,cluster_id`.
pub fn write_partition(partition: &Partition, set: &ConstructSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if partition.n() != set.len() {
        return Err(Error::Parameter(format!(
            "partition covers {} constructs but the set has {}",
            partition.n(),
            set.len()
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e, 0))?;
    w.write_record(["construct_id", "cluster_id"])
        .map_err(|e| csv_error(path, e, 0))?;
    for (c, l) in set.iter().zip(partition.labels()) {
        w.write_record([c.id.as_str(), &l.to_string()])
            .map_err(|e| csv_error(path, e, 0))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Similar,
    Dissimilar,
}

impl PairLabel {
    /// +1 for similar, -1 for dissimilar.
    pub fn sign(self) -> f64 {
        match self {
            PairLabel::Similar => 1.0,
            PairLabel::Dissimilar => -1.0,
        }
    }

    pub fn is_similar(self) -> bool {
        self == PairLabel::Similar
    }
}

/// An unordered pair of construct positions, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub a: usize,
    pub b: usize,
    pub label: PairLabel,
}

/// All n(n-1)/2 pairs labeled by cluster co-membership.
pub fn enumerate_pairs(gold: &Partition) -> Vec<LabeledPair> {
    let all: Vec<usize> = (0..gold.n()).collect();
    pairs_within(gold, &all)
}

/// Labeled pairs among `members` only. Positions refer to the gold partition.
pub fn pairs_within(gold: &Partition, members: &[usize]) -> Vec<LabeledPair> {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::with_capacity(sorted.len() * sorted.len().saturating_sub(1) / 2);
    for (i, &a) in sorted.iter().enumerate() {
        for &b in &sorted[i + 1..] {
            let label = if gold.label(a) == gold.label(b) {
                PairLabel::Similar
            } else {
                PairLabel::Dissimilar
            };
            out.push(LabeledPair { a, b, label });
        }
    }
    out
}

/// Construct positions assigned to train, validation and test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split sizes: validation and test shares are floored, train gets the rest.
pub fn split_sizes(n: usize, fractions: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (tr, va, te) = fractions;
    let valid = [tr, va, te].iter().all(|f| f.is_finite() && *f > 0.0);
    if !valid || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "split fractions must be positive and sum to 1, got ({tr}, {va}, {te})"
        )));
    }
    let val = (va * n as f64).floor() as usize;
    let test = (te * n as f64).floor() as usize;
    Ok((n - val - test, val, test))
}

/// Seeded random split by construct. Positions within each part are ascending.
pub fn split_indices(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    let (n_train, n_val, _) = split_sizes(n, fractions)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, val, test })
}

pub fn split_constructs(
    set: &ConstructSet,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(ConstructSet, ConstructSet, ConstructSet)> {
    let s = split_indices(set.len(), fractions, seed)?;
    Ok((set.subset(&s.train), set.subset(&s.val), set.subset(&s.test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn construct(id: &str) -> Construct {
        Construct {
            id: id.into(),
            name: format!("name {id}"),
            definition: String::new(),
            publication: None,
        }
    }

    fn set_of(ids: &[&str]) -> ConstructSet {
        ConstructSet::new(ids.iter().map(|id| construct(id)).collect()).unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_constructs_in_file_order() {
        let f = write_tmp(
            "{\"id\":\"b\",\"name\":\"B\",\"definition\":\"\"}\n\
             {\"id\":\"a\",\"name\":\"A\",\"definition\":\"x\",\"publication\":\"p1\"}\n\
             {\"id\":\"c\",\"name\":\"C\"}\n",
        );
        let set = load_constructs(f.path()).unwrap();
        assert_eq!(set.ids().collect::<Vec<_>>(), ["b", "a", "c"]);
        assert_eq!(set.get(1).unwrap().publication.as_deref(), Some("p1"));
        assert_eq!(set.get(2).unwrap().definition, "");
    }

    #[test]
    fn duplicate_id_reports_id_and_line() {
        let f = write_tmp(
            "{\"id\":\"c0\",\"name\":\"x\"}\n{\"id\":\"c1\",\"name\":\"x\"}\n{\"id\":\"c2\",\"name\":\"x\"}\n\
             {\"id\":\"c3\",\"name\":\"x\"}\n{\"id\":\"c1\",\"name\":\"x\"}\n",
        );
        match load_constructs(f.path()).unwrap_err() {
            Error::DuplicateId { id, line } => {
                assert_eq!(id, "c1");
                assert_eq!(line, 5);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("{\"id\":\"a\",\"name\":\"x\"}\nnot json\n");
        assert!(matches!(
            load_constructs(f.path()).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn empty_constructs_file() {
        let f = write_tmp("");
        assert_eq!(load_constructs(f.path()).unwrap().len(), 0);
    }

    #[test]
    fn relations_filter_and_dedup() {
        let set = set_of(&["a", "b", "c"]);
        let f = write_tmp(
            "source_id,target_id,coefficient,significant\n\
             a,b,0.3,true\n\
             b,c,-0.2,false\n\
             a,c,0.1,true\n\
             c,a,-0.4,true\n",
        );
        assert_eq!(load_relations(f.path(), &set, true).unwrap().len(), 3);
        assert_eq!(load_relations(f.path(), &set, false).unwrap().len(), 4);

        let dup = write_tmp(
            "source_id,target_id,coefficient,significant\na,b,0.3,true\na,b,0.3,true\na,b,0.31,true\n",
        );
        assert_eq!(load_relations(dup.path(), &set, false).unwrap().len(), 2);
    }

    #[test]
    fn relation_errors() {
        let set = set_of(&["a", "b"]);
        let unknown = write_tmp("source_id,target_id,coefficient,significant\na,b,0.1,true\na,zzz,0.3,true\n");
        match load_relations(unknown.path(), &set, false).unwrap_err() {
            Error::UnknownId { id, row } => {
                assert_eq!(id, "zzz");
                assert_eq!(row, 3);
            }
            other => panic!("unexpected {other}"),
        }
        let bad = write_tmp("source_id,target_id,coefficient,significant\na,b,high,true\n");
        assert!(matches!(
            load_relations(bad.path(), &set, false).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        let zero = write_tmp("source_id,target_id,coefficient,significant\na,b,0.0,true\n");
        assert!(load_relations(zero.path(), &set, false).is_err());
    }

    #[test]
    fn gold_partition_densifies() {
        let set = set_of(&["a", "b", "c", "d"]);
        let f = write_tmp("construct_id,cluster_id\na,g7\nb,g7\nc,g2\nd,g9\n");
        let p = load_gold_partition(f.path(), &set).unwrap();
        assert_eq!(p.k(), 3);
        assert_eq!(p.labels(), &[0, 0, 1, 2]);

        let one = write_tmp("construct_id,cluster_id\na,x\nb,x\nc,x\nd,x\n");
        assert_eq!(load_gold_partition(one.path(), &set).unwrap().k(), 1);
    }

    #[test]
    fn gold_partition_coverage_errors() {
        let set = set_of(&["c1", "c2", "c3"]);
        let missing = write_tmp("construct_id,cluster_id\nc1,0\nc3,1\n");
        match load_gold_partition(missing.path(), &set).unwrap_err() {
            Error::Coverage { id, .. } => assert_eq!(id, "c2"),
            other => panic!("unexpected {other}"),
        }
        let repeated = write_tmp("construct_id,cluster_id\nc1,0\nc2,0\nc3,1\nc2,1\n");
        match load_gold_partition(repeated.path(), &set).unwrap_err() {
            Error::Coverage { id, .. } => assert_eq!(id, "c2"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn pair_enumeration_small_cases() {
        let one = Partition::single_cluster(3);
        let pairs = enumerate_pairs(&one);
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.label.is_similar()));

        let two = Partition::from_labels(&[0, 0, 1]);
        let labels: Vec<_> = enumerate_pairs(&two)
            .into_iter()
            .map(|p| (p.a, p.b, p.label))
            .collect();
        assert_eq!(
            labels,
            [
                (0, 1, PairLabel::Similar),
                (0, 2, PairLabel::Dissimilar),
                (1, 2, PairLabel::Dissimilar)
            ]
        );
    }

    #[test]
    fn split_sizes_floor_val_and_test() {
        assert_eq!(split_sizes(10, (0.4, 0.2, 0.4)).unwrap(), (4, 2, 4));
        // floor(200.8) = 200, floor(401.6) = 401, train takes the remaining 403.
        assert_eq!(split_sizes(1004, (0.4, 0.2, 0.4)).unwrap(), (403, 200, 401));
        assert!(split_sizes(10, (0.5, 0.2, 0.2)).is_err());
        assert!(split_sizes(10, (0.0, 0.5, 0.5)).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let set = set_of(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        let first = split_constructs(&set, (0.4, 0.2, 0.4), 7).unwrap();
        let second = split_constructs(&set, (0.4, 0.2, 0.4), 7).unwrap();
        assert_eq!(first, second);
        assert_eq!((first.0.len(), first.1.len(), first.2.len()), (4, 2, 4));
    }

    #[test]
    fn partition_restrict_relabels() {
        let p = Partition::from_labels(&[5, 5, 3, 3, 9]);
        let r = p.restrict(&[2, 4, 3]);
        assert_eq!(r.labels(), &[0, 1, 0]);
        assert_eq!(r.k(), 2);
    }
}
