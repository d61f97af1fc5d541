use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, nearest_centroid, KMEANS_RESTARTS};
use super::{sq_dist, AnalysisError, LatentRow, LatentTable};
use crate::formats::{Gender, Race};

/// Exemplar for one cluster of one demographic group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterExemplar {
    pub cluster: usize,
    pub centroid: Vec<f64>,
    pub exemplar_id: String,
    pub exemplar_z: Vec<f64>,
    /// Euclidean distance from the exemplar's code to the centroid.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarReport {
    pub gender: Gender,
    pub race: Race,
    pub clusters: Vec<ClusterExemplar>,
    pub inertia: f64,
    /// Every member id with its cluster label.
    pub members: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub gender: Gender,
    pub race: Race,
    pub rows: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub k: usize,
    pub seed: u64,
    pub groups: Vec<ExemplarReport>,
    pub skipped: Vec<SkippedGroup>,
}

impl StratifiedReport {
    pub fn group(&self, gender: Gender, race: Race) -> Option<&ExemplarReport> {
        self.groups.iter().find(|g| g.gender == gender && g.race == race)
    }

    pub fn exemplar_count(&self) -> usize {
        self.groups.iter().map(|g| g.clusters.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Clusters every present gender x race group on its own and picks, per
/// centroid, the member nearest to it (ties to the smallest id). Groups with
/// fewer than `k` rows are listed as skipped. Group `g` (in gender-major,
/// race-minor order) clusters with seed `seed + g`.
pub fn stratified_exemplars(table: &LatentTable, k: usize, seed: u64) -> StratifiedReport {
    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    let combos = Gender::ALL
        .iter()
        .flat_map(|&g| Race::ALL.iter().map(move |&r| (g, r)));
    for (gi, (gender, race)) in combos.enumerate() {
        let members: Vec<&LatentRow> = table
            .rows()
            .iter()
            .filter(|r| r.gender == gender && r.race == race)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k || k == 0 {
            skipped.push(SkippedGroup {
                gender,
                race,
                rows: members.len(),
                reason: format!("{} rows, need {k}", members.len()),
            });
            continue;
        }
        let z: Vec<Vec<f64>> = members.iter().map(|r| r.z.clone()).collect();
        let result = kmeans(&z, k, seed.wrapping_add(gi as u64), KMEANS_RESTARTS)
            .expect("group has at least k rows");
        let clusters = result
            .centroids
            .iter()
            .enumerate()
            .map(|(c, centroid)| {
                let ex = members
                    .iter()
                    .map(|r| (sq_dist(&r.z, centroid), *r))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)))
                    .unwrap();
                ClusterExemplar {
                    cluster: c,
                    centroid: centroid.clone(),
                    exemplar_id: ex.1.id.clone(),
                    exemplar_z: ex.1.z.clone(),
                    distance: ex.0.sqrt(),
                }
            })
            .collect();
        groups.push(ExemplarReport {
            gender,
            race,
            clusters,
            inertia: result.inertia,
            members: members.iter().map(|r| r.id.clone()).zip(result.labels).collect(),
        });
    }
    StratifiedReport { k, seed, groups, skipped }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeAssignment {
    pub cluster: usize,
    /// Euclidean distance to every centroid, by cluster id.
    pub distances: Vec<f64>,
}

/// Cluster whose centroid is nearest to `z`; ties go to the lowest id.
pub fn assign_size(z: &[f64], report: &ExemplarReport) -> Result<SizeAssignment, AnalysisError> {
    if report.clusters.is_empty() {
        return Err(AnalysisError::EmptyReport);
    }
    let centroids: Vec<Vec<f64>> = report.clusters.iter().map(|c| c.centroid.clone()).collect();
    let (idx, _) = nearest_centroid(z, &centroids);
    Ok(SizeAssignment {
        cluster: report.clusters[idx].cluster,
        distances: centroids.iter().map(|c| sq_dist(z, c).sqrt()).collect(),
    })
}
