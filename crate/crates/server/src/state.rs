//! Artifact loading. Everything the handlers need is read and checked once at
//! startup; afterwards the state is immutable.

use std::path::{Path, PathBuf};

use gut_core::corpus::{load_constructs, load_gold_partition, load_relations, ConstructSet, Partition};
use gut_core::objective::{read_json, resolve_relations, SignedEdge, SweepArtifact};
use gut_core::simgraph::{normalize01, read_similarity, NormalizedSimilarity};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Core {
        path: PathBuf,
        #[source]
        source: gut_core::Error,
    },
    #[error("{0}")]
    Inconsistent(String),
}

fn at(path: &Path) -> impl FnOnce(gut_core::Error) -> LoadError + '_ {
    move |source| LoadError::Core {
        path: path.to_path_buf(),
        source,
    }
}

/// A loaded sweep artifact with the inputs it references.
#[derive(Debug)]
pub struct AppState {
    pub artifact: SweepArtifact,
    pub constructs: ConstructSet,
    pub similarity: NormalizedSimilarity,
    pub edges: Vec<SignedEdge>,
    /// Partitions in candidate order.
    pub partitions: Vec<Partition>,
}

impl AppState {
    /// Reads the sweep JSON at `path`; source and partition paths inside it
    /// are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        let artifact: SweepArtifact = read_json(path).map_err(at(path))?;
        artifact.validate().map_err(at(path))?;
        let base = path.parent().unwrap_or(Path::new("."));

        let constructs_path = base.join(&artifact.sources.constructs);
        let constructs = load_constructs(&constructs_path).map_err(at(&constructs_path))?;

        let similarity_path = base.join(&artifact.sources.similarity);
        let raw = read_similarity(&similarity_path).map_err(at(&similarity_path))?;
        if !raw.ids().iter().map(String::as_str).eq(constructs.ids()) {
            return Err(LoadError::Inconsistent(format!(
                "{} does not list the constructs of {} in order",
                similarity_path.display(),
                constructs_path.display()
            )));
        }
        let similarity = normalize01(&raw);

        let edges = match &artifact.sources.relations {
            Some(rel) => {
                let rel_path = base.join(rel);
                let relations = load_relations(&rel_path, &constructs, artifact.sources.significant_only)
                    .map_err(at(&rel_path))?;
                resolve_relations(&relations, &constructs).map_err(at(&rel_path))?
            }
            None => Vec::new(),
        };

        let mut partitions = Vec::with_capacity(artifact.candidates.len());
        for record in &artifact.candidates {
            let p_path = base.join(&record.partition);
            let p = load_gold_partition(&p_path, &constructs).map_err(at(&p_path))?;
            if p.k() != record.k {
                return Err(LoadError::Inconsistent(format!(
                    "{} has {} clusters but the artifact records {}",
                    p_path.display(),
                    p.k(),
                    record.k
                )));
            }
            partitions.push(p);
        }

        Ok(AppState {
            artifact,
            constructs,
            similarity,
            edges,
            partitions,
        })
    }
}
