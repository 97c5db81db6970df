//! Directed village networks: loading, validation, and preprocessing.
//!
//! Input is an edge-list CSV with header `village_id,src,dst` (an optional
//! fourth column `dst_village` marks edges that cross villages, which are
//! dropped). Node labels are arbitrary strings, mapped to dense ids per
//! village in order of first appearance. Graphs are immutable once built.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index within one graph (0..n-1).
pub type NodeId = usize;

/// An immutable directed graph with degree indices.
#[derive(Debug, Clone)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    out_degree: Vec<usize>,
    in_degree: Vec<usize>,
    in_neighbors: Vec<Vec<NodeId>>,
    out_neighbors: Vec<Vec<NodeId>>,
}

impl DirectedGraph {
    /// Build from deduplicated, loop-free edges. Rejects self-loops and
    /// duplicates rather than fixing them; use [`load_edge_list`] for raw data.
    pub fn new(n: usize, edges: Vec<(NodeId, NodeId)>) -> Result<DirectedGraph> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(src, dst) in &edges {
            if src >= n || dst >= n {
                return Err(Error::invalid(format!(
                    "edge ({src},{dst}) out of range for n={n}"
                )));
            }
            if src == dst {
                return Err(Error::invalid(format!("self-loop at node {src}")));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::invalid(format!("duplicate edge ({src},{dst})")));
            }
        }
        let mut out_degree = vec![0usize; n];
        let mut in_degree = vec![0usize; n];
        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        for &(src, dst) in &edges {
            out_degree[src] += 1;
            in_degree[dst] += 1;
            in_neighbors[dst].push(src);
            out_neighbors[src].push(dst);
        }
        Ok(DirectedGraph {
            n,
            edges,
            out_degree,
            in_degree,
            in_neighbors,
            out_neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_degree[v]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_degree[v]
    }

    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.in_neighbors[v]
    }

    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out_neighbors[v]
    }
}

/// One named village network plus its original node labels.
#[derive(Debug, Clone)]
pub struct Village {
    pub id: String,
    pub labels: Vec<String>,
    pub graph: DirectedGraph,
}

impl Village {
    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label)
    }
}

/// An ordered collection of villages with unique ids.
#[derive(Debug, Clone, Default)]
pub struct VillageCollection {
    villages: Vec<Village>,
}

impl VillageCollection {
    pub fn new(villages: Vec<Village>) -> Result<VillageCollection> {
        let mut ids = HashSet::new();
        for v in &villages {
            if !ids.insert(v.id.clone()) {
                return Err(Error::invalid(format!("duplicate village id {}", v.id)));
            }
        }
        Ok(VillageCollection { villages })
    }

    pub fn len(&self) -> usize {
        self.villages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.villages.is_empty()
    }

    pub fn villages(&self) -> &[Village] {
        &self.villages
    }

    pub fn get(&self, id: &str) -> Option<&Village> {
        self.villages.iter().find(|v| v.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Village> {
        self.villages.iter()
    }
}

/// What `load_edge_list` cleaned up along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows: u64,
    pub self_loops_dropped: u64,
    pub duplicates_collapsed: u64,
    pub cross_village_dropped: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Expand every edge to a symmetric directed pair.
    pub symmetrize: bool,
}

struct VillageBuilder {
    id: String,
    labels: Vec<String>,
    label_ids: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId)>,
    edge_set: HashSet<(NodeId, NodeId)>,
}

impl VillageBuilder {
    fn new(id: String) -> Self {
        VillageBuilder {
            id,
            labels: Vec::new(),
            label_ids: HashMap::new(),
            edges: Vec::new(),
            edge_set: HashSet::new(),
        }
    }

    fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.label_ids.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_string());
        self.label_ids.insert(label.to_string(), id);
        id
    }

    fn finish(self) -> Result<Village> {
        let n = self.labels.len();
        Ok(Village {
            id: self.id,
            labels: self.labels,
            graph: DirectedGraph::new(n, self.edges)?,
        })
    }
}

/// Load a collection from edge-list CSV. Duplicate edges collapse, self-loops
/// and cross-village edges are dropped and counted, malformed rows abort with
/// their line number.
pub fn load_edge_list<R: Read>(
    reader: R,
    options: LoadOptions,
) -> Result<(VillageCollection, LoadReport)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    {
        let headers = csv_reader
            .headers()
            .map_err(|e| Error::invalid(format!("cannot read CSV header: {e}")))?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 3 || cols[0] != "village_id" || cols[1] != "src" || cols[2] != "dst" {
            return Err(Error::invalid(format!(
                "expected header village_id,src,dst[,dst_village], got {}",
                cols.join(",")
            )));
        }
    }

    let mut report = LoadReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut builders: HashMap<String, VillageBuilder> = HashMap::new();

    for record in csv_reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            match record.get(i) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(Error::Parse {
                    line,
                    message: format!("missing field {}", i + 1),
                }),
            }
        };
        let village_id = field(0)?;
        let src = field(1)?;
        let dst = field(2)?;
        report.rows += 1;

        if let Some(dst_village) = record.get(3) {
            if !dst_village.is_empty() && dst_village != village_id {
                report.cross_village_dropped += 1;
                continue;
            }
        }

        let builder = builders.entry(village_id.to_string()).or_insert_with(|| {
            order.push(village_id.to_string());
            VillageBuilder::new(village_id.to_string())
        });
        let s = builder.intern(src);
        let d = builder.intern(dst);
        if s == d {
            report.self_loops_dropped += 1;
            continue;
        }
        let mut push = |a: NodeId, b: NodeId, report: &mut LoadReport| {
            if builder.edge_set.insert((a, b)) {
                builder.edges.push((a, b));
            } else {
                report.duplicates_collapsed += 1;
            }
        };
        push(s, d, &mut report);
        if options.symmetrize {
            push(d, s, &mut report);
        }
    }

    if report.rows == 0 {
        return Err(Error::invalid("edge list contains no data rows"));
    }

    let villages = order
        .into_iter()
        .map(|id| builders.remove(&id).expect("builder for ordered id").finish())
        .collect::<Result<Vec<_>>>()?;
    Ok((VillageCollection::new(villages)?, report))
}

/// Result of [`preprocess`]: the surviving collection and the ids dropped.
#[derive(Debug)]
pub struct PreprocessReport {
    pub collection: VillageCollection,
    pub dropped: Vec<String>,
}

/// Drop villages with fewer than `min_edges` edges.
pub fn preprocess(collection: &VillageCollection, min_edges: usize) -> PreprocessReport {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for v in collection.iter() {
        if v.graph.edge_count() < min_edges {
            dropped.push(v.id.clone());
        } else {
            kept.push(v.clone());
        }
    }
    PreprocessReport {
        collection: VillageCollection { villages: kept },
        dropped,
    }
}

/// mean/sd/min/max of one per-village quantity.
#[derive(Debug, Clone, Serialize)]
pub struct StatRow {
    pub quantity: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

fn stat_row(name: &str, values: &[f64]) -> StatRow {
    StatRow {
        quantity: name.to_string(),
        mean: crate::numeric::mean(values),
        sd: crate::numeric::sample_sd(values),
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Collection-level summary of edges, nodes, and in-degree moments.
pub fn summary_stats(collection: &VillageCollection) -> Result<Vec<StatRow>> {
    if collection.is_empty() {
        return Err(Error::invalid("summary_stats requires a nonempty collection"));
    }
    let edges: Vec<f64> = collection
        .iter()
        .map(|v| v.graph.edge_count() as f64)
        .collect();
    let nodes: Vec<f64> = collection
        .iter()
        .map(|v| v.graph.node_count() as f64)
        .collect();
    let mean_in: Vec<f64> = collection
        .iter()
        .map(|v| {
            let g = &v.graph;
            (0..g.node_count()).map(|u| g.in_degree(u) as f64).sum::<f64>() / g.node_count() as f64
        })
        .collect();
    let sd_in: Vec<f64> = collection
        .iter()
        .map(|v| {
            let g = &v.graph;
            let degs: Vec<f64> = (0..g.node_count()).map(|u| g.in_degree(u) as f64).collect();
            crate::numeric::sample_sd(&degs)
        })
        .collect();
    Ok(vec![
        stat_row("edges", &edges),
        stat_row("nodes", &nodes),
        stat_row("mean_in_degree", &mean_in),
        stat_row("sd_in_degree", &sd_in),
    ])
}

#[derive(Serialize, Deserialize)]
struct VillageJson {
    id: String,
    nodes: Vec<String>,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct CollectionJson {
    schema_version: u32,
    villages: Vec<VillageJson>,
}

/// Serialize a collection as JSON (village id, node labels, edge pairs).
pub fn write_collection_json<W: Write>(collection: &VillageCollection, writer: W) -> Result<()> {
    let doc = CollectionJson {
        schema_version: 1,
        villages: collection
            .iter()
            .map(|v| VillageJson {
                id: v.id.clone(),
                nodes: v.labels.clone(),
                edges: v.graph.edges().to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(writer, &doc)?;
    Ok(())
}

/// Inverse of [`write_collection_json`].
pub fn read_collection_json<R: Read>(reader: R) -> Result<VillageCollection> {
    let doc: CollectionJson = serde_json::from_reader(reader)?;
    let villages = doc
        .villages
        .into_iter()
        .map(|v| {
            let n = v.nodes.len();
            Ok(Village {
                id: v.id,
                labels: v.nodes,
                graph: DirectedGraph::new(n, v.edges)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    VillageCollection::new(villages)
}
