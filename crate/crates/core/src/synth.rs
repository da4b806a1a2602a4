//! Synthetic corpus with planted clusters.
//!
//! Each cluster owns a random unit direction. A construct's embedding for
//! either field is that direction (scaled so coordinates have unit variance)
//! plus Gaussian noise, followed by pure-noise distractor coordinates. The
//! distractor variance halves from one coordinate to the next, so a handful of
//! nuisance directions dominate raw cosine similarity the way they do in real
//! pretrained embeddings, and a projection can learn to suppress them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::corpus::{Construct, ConstructSet, Partition, Relation};
use crate::embeddings::{EmbeddingMatrix, Field};
use crate::{Error, Result};

/// Root-mean-square standard deviation across distractor coordinates.
pub const DISTRACTOR_SCALE: f64 = 1.5;
const SIGN_FLIP: f64 = 0.1;
const SIGNIFICANT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub clusters: usize,
    pub dim: usize,
    pub noise: f64,
    pub distractor_dim: usize,
    /// Relation count; defaults to `n`.
    pub relations: Option<usize>,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n: 300,
            clusters: 100,
            dim: 16,
            noise: 0.6,
            distractor_dim: 48,
            relations: None,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("n must be at least 1".into()));
        }
        if self.clusters == 0 || self.clusters > self.n {
            return Err(Error::Parameter(format!(
                "clusters must be in 1..={} (got {})",
                self.n, self.clusters
            )));
        }
        if self.dim == 0 {
            return Err(Error::Parameter("dim must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Parameter(format!("noise {} must be finite and >= 0", self.noise)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub constructs: ConstructSet,
    pub gold: Partition,
    pub relations: Vec<Relation>,
    pub name: EmbeddingMatrix,
    pub definition: EmbeddingMatrix,
}

fn unit_direction(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-9 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Per-coordinate distractor standard deviations: variance halves per
/// coordinate, rescaled to an RMS of `DISTRACTOR_SCALE`.
pub fn distractor_scales(count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|j| 0.5f64.powf(j as f64 / 2.0)).collect();
    if count == 0 {
        return raw;
    }
    let rms = (raw.iter().map(|s| s * s).sum::<f64>() / count as f64).sqrt();
    raw.iter().map(|s| s / rms * DISTRACTOR_SCALE).collect()
}

pub fn generate(params: &SynthParams) -> Result<SynthCorpus> {
    params.validate()?;
    let SynthParams { n, clusters, dim, .. } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let scale = (dim as f64).sqrt();
    let directions: Vec<Vec<f64>> = (0..clusters)
        .map(|_| unit_direction(dim, &mut rng).into_iter().map(|x| x * scale).collect())
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % clusters).collect();
    labels.shuffle(&mut rng);

    let noise = Normal::new(0.0, params.noise).map_err(|e| Error::Parameter(e.to_string()))?;
    let distractor_sd = distractor_scales(params.distractor_dim);
    let width = dim + params.distractor_dim;
    let ids: Vec<String> = (0..n).map(|i| format!("c{i:04}")).collect();
    let mut fields = Vec::with_capacity(2);
    for field in [Field::Name, Field::Definition] {
        let mut data = Vec::with_capacity(n * width);
        for &label in &labels {
            let start = data.len();
            data.extend(directions[label].iter().map(|&x| (x + noise.sample(&mut rng)) as f32));
            data.extend(distractor_sd.iter().map(|&sd| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (sd * z) as f32
            }));
            // A row of zeros has no direction; nudge it (vanishingly rare).
            if data[start..].iter().all(|&x| x == 0.0) {
                data[start] = 1.0;
            }
        }
        fields.push(EmbeddingMatrix::new(field, ids.clone(), width, data)?);
    }
    let definition = fields.pop().expect("two fields");
    let name = fields.pop().expect("two fields");

    let constructs = ConstructSet::new(
        ids.iter()
            .zip(&labels)
            .map(|(id, &label)| Construct {
                id: id.clone(),
                name: format!("construct {id}"),
                definition: format!("synthetic construct {id} drawn from latent cluster {label}"),
                publication: None,
            })
            .collect(),
    )?;

    let mut members = vec![Vec::new(); clusters];
    for (pos, &label) in labels.iter().enumerate() {
        members[label].push(pos);
    }
    let mut relations = Vec::new();
    if clusters >= 2 {
        // A consistent sign per ordered cluster pair, flipped now and then.
        let signs: Vec<bool> = (0..clusters * clusters).map(|_| rng.random::<bool>()).collect();
        for _ in 0..params.relations.unwrap_or(n) {
            let a = rng.random_range(0..clusters);
            let mut b = rng.random_range(0..clusters - 1);
            if b >= a {
                b += 1;
            }
            let source = members[a][rng.random_range(0..members[a].len())];
            let target = members[b][rng.random_range(0..members[b].len())];
            let mut positive = signs[a * clusters + b];
            if rng.random::<f64>() < SIGN_FLIP {
                positive = !positive;
            }
            let magnitude = (rng.random_range(0.05..0.6) * 1000.0_f64).round() / 1000.0;
            relations.push(Relation {
                source_id: ids[source].clone(),
                target_id: ids[target].clone(),
                coefficient: if positive { magnitude } else { -magnitude },
                significant: rng.random::<f64>() < SIGNIFICANT,
            });
        }
    }

    Ok(SynthCorpus {
        constructs,
        gold: Partition::from_labels(&labels),
        relations,
        name,
        definition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let p = SynthParams { n: 40, clusters: 10, seed: 5, ..Default::default() };
        let (a, b) = (generate(&p).unwrap(), generate(&p).unwrap());
        assert_eq!(a.name, b.name);
        assert_eq!(a.relations, b.relations);
        assert_eq!(a.gold, b.gold);
    }

    #[test]
    fn noiseless_clusters_align() {
        let p = SynthParams { n: 20, clusters: 4, noise: 0.0, distractor_dim: 0, ..Default::default() };
        let c = generate(&p).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if c.gold.label(i) == c.gold.label(j) {
                    let (x, y) = (c.name.row(i), c.name.row(j));
                    let dot: f32 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                    let nx: f32 = x.iter().map(|a| a * a).sum::<f32>().sqrt();
                    let ny: f32 = y.iter().map(|a| a * a).sum::<f32>().sqrt();
                    assert!((dot / (nx * ny) - 1.0).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn shapes_and_relations() {
        let c = generate(&SynthParams { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(c.gold.k(), 100);
        assert!(c.gold.sizes().iter().all(|&s| s == 3));
        assert_eq!(c.name.dim(), 64);
        assert_eq!(c.relations.len(), 300);
        for r in &c.relations {
            let (a, b) = (c.constructs.position(&r.source_id).unwrap(), c.constructs.position(&r.target_id).unwrap());
            assert_ne!(c.gold.label(a), c.gold.label(b));
            assert!(r.coefficient != 0.0);
        }
        let all = generate(&SynthParams { n: 10, clusters: 10, ..Default::default() }).unwrap();
        assert_eq!(all.gold.k(), 10);
        assert!(generate(&SynthParams { n: 5, clusters: 6, ..Default::default() }).is_err());
    }
}
