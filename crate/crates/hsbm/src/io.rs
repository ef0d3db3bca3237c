//! On-disk graph bundle: a directory holding a JSON header, a TSV edge
//! list, one label per line, and an optional feature CSV. The header
//! carries the generating parameters when the bundle came from the
//! sampler, so audits can compare against ground truth.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::{GraphSample, HsbmParams};

pub const HEADER_FILE: &str = "header.json";
pub const EDGES_FILE: &str = "edges.tsv";
pub const LABELS_FILE: &str = "labels.txt";
pub const FEATURES_FILE: &str = "features.csv";

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleHeader {
    pub version: u32,
    pub n: usize,
    pub c: usize,
    pub d: usize,
    /// Generating parameters, present for sampled bundles.
    pub params: Option<HsbmParams>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::ParseError {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Write a graph bundle. Each edge line is `src<TAB>dst` where the edge
/// points from `src` into `dst`'s neighborhood.
pub fn export_graph(
    graph: &GraphSample,
    params: Option<&HsbmParams>,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let d = graph.features.as_ref().map_or(0, Mat::ncols);
    let header = BundleHeader {
        version: FORMAT_VERSION,
        n: graph.n,
        c: graph.c,
        d,
        params: params.cloned(),
    };
    fs::write(
        dir.join(HEADER_FILE),
        serde_json::to_string_pretty(&header)?,
    )?;

    let mut edges = BufWriter::new(File::create(dir.join(EDGES_FILE))?);
    for (dst, sources) in graph.neighbors.iter().enumerate() {
        for &src in sources {
            writeln!(edges, "{src}\t{dst}")?;
        }
    }
    edges.flush()?;

    let mut labels = BufWriter::new(File::create(dir.join(LABELS_FILE))?);
    for &l in &graph.labels {
        writeln!(labels, "{l}")?;
    }
    labels.flush()?;

    if let Some(features) = &graph.features {
        let mut out = BufWriter::new(File::create(dir.join(FEATURES_FILE))?);
        for row in features.rows_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
    }
    Ok(())
}

/// Load a bundle written by [`export_graph`] (or assembled by hand in
/// the same format). Returns the graph and the generating parameters if
/// the header recorded them.
pub fn load_graph(dir: &Path) -> Result<(GraphSample, Option<HsbmParams>)> {
    let header_path = dir.join(HEADER_FILE);
    let header: BundleHeader = serde_json::from_str(&fs::read_to_string(&header_path)?)?;
    if header.version != FORMAT_VERSION {
        return Err(Error::ShapeError(format!(
            "unsupported bundle version {}",
            header.version
        )));
    }
    let n = header.n;

    let labels_path = dir.join(LABELS_FILE);
    let mut labels = Vec::with_capacity(n);
    for (idx, line) in BufReader::new(File::open(&labels_path)?).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let label: usize = line
            .parse()
            .map_err(|_| parse_err(&labels_path, idx + 1, format!("bad label {line:?}")))?;
        if label >= header.c {
            return Err(parse_err(
                &labels_path,
                idx + 1,
                format!("label {label} out of range for c = {}", header.c),
            ));
        }
        labels.push(label);
    }
    if labels.len() != n {
        return Err(Error::ShapeError(format!(
            "expected {n} labels, found {}",
            labels.len()
        )));
    }

    let edges_path = dir.join(EDGES_FILE);
    let mut neighbors = vec![Vec::new(); n];
    for (idx, line) in BufReader::new(File::open(&edges_path)?).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (src, dst) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(&edges_path, idx + 1, "expected src<TAB>dst"))?;
        let src: usize = src
            .parse()
            .map_err(|_| parse_err(&edges_path, idx + 1, format!("bad source {src:?}")))?;
        let dst: usize = dst
            .parse()
            .map_err(|_| parse_err(&edges_path, idx + 1, format!("bad target {dst:?}")))?;
        if src >= n || dst >= n {
            return Err(Error::ShapeError(format!(
                "edge ({src}, {dst}) references a node >= n = {n}"
            )));
        }
        neighbors[dst].push(src as u32);
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }

    let features_path = dir.join(FEATURES_FILE);
    let features = if features_path.exists() {
        let mut rows = Vec::with_capacity(n);
        for (idx, line) in BufReader::new(File::open(&features_path)?)
            .lines()
            .enumerate()
        {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(str::trim).map(str::parse).collect();
            let row = row
                .map_err(|_| parse_err(&features_path, idx + 1, "bad feature value"))?;
            if row.len() != header.d {
                return Err(parse_err(
                    &features_path,
                    idx + 1,
                    format!("expected {} values, found {}", header.d, row.len()),
                ));
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::ShapeError(format!(
                "expected {n} feature rows, found {}",
                rows.len()
            )));
        }
        Some(Mat::from_rows(&rows))
    } else {
        None
    };

    let degrees: Vec<u32> = neighbors.iter().map(|v| v.len() as u32).collect();
    let zero_degree_count = degrees.iter().filter(|&&d| d == 0).count();
    Ok((
        GraphSample {
            n,
            c: header.c,
            labels,
            neighbors,
            degrees,
            features,
            node_dists: None,
            zero_degree_count,
            cap_hits: 0,
        },
        header.params,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, pattern_family_a};

    #[test]
    fn round_trip_preserves_everything() {
        let params = HsbmParams::synthetic(pattern_family_a(0.25, 5).unwrap());
        let graph = model::sample(&params, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_graph(&graph, Some(&params), dir.path()).unwrap();
        let (loaded, loaded_params) = load_graph(dir.path()).unwrap();
        assert_eq!(loaded.labels, graph.labels);
        assert_eq!(loaded.neighbors, graph.neighbors);
        assert_eq!(loaded.degrees, graph.degrees);
        assert_eq!(loaded.features, graph.features);
        assert_eq!(loaded_params.unwrap().mhat, params.mhat);
    }

    #[test]
    fn export_is_byte_identical_across_runs() {
        let params = HsbmParams::synthetic(pattern_family_a(0.2, 5).unwrap());
        let graph = model::sample(&params, 7).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        export_graph(&graph, Some(&params), dir_a.path()).unwrap();
        export_graph(&graph, Some(&params), dir_b.path()).unwrap();
        for file in [HEADER_FILE, EDGES_FILE, LABELS_FILE, FEATURES_FILE] {
            let a = fs::read(dir_a.path().join(file)).unwrap();
            let b = fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs");
        }
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let params = HsbmParams::synthetic(pattern_family_a(0.2, 5).unwrap());
        let graph = model::sample(&params, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_graph(&graph, None, dir.path()).unwrap();
        fs::write(dir.path().join(EDGES_FILE), "0\t5000\n").unwrap();
        assert!(matches!(load_graph(dir.path()), Err(Error::ShapeError(_))));
    }

    #[test]
    fn malformed_edge_line_reports_position() {
        let params = HsbmParams::synthetic(pattern_family_a(0.2, 5).unwrap());
        let graph = model::sample(&params, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_graph(&graph, None, dir.path()).unwrap();
        fs::write(dir.path().join(EDGES_FILE), "1\t2\nnot an edge\n").unwrap();
        match load_graph(dir.path()) {
            Err(Error::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_edge_file_is_valid() {
        let params = HsbmParams::synthetic(pattern_family_a(0.2, 5).unwrap());
        let graph = model::sample(&params, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_graph(&graph, None, dir.path()).unwrap();
        fs::write(dir.path().join(EDGES_FILE), "").unwrap();
        let (loaded, _) = load_graph(dir.path()).unwrap();
        assert!(loaded.degrees.iter().all(|&d| d == 0));
        assert_eq!(loaded.zero_degree_count, loaded.n);
    }

    #[test]
    fn bundle_without_features_loads() {
        let params = HsbmParams::synthetic(pattern_family_a(0.2, 5).unwrap());
        let graph = model::sample(&params, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_graph(&graph, None, dir.path()).unwrap();
        fs::remove_file(dir.path().join(FEATURES_FILE)).unwrap();
        let (loaded, _) = load_graph(dir.path()).unwrap();
        assert!(loaded.features.is_none());
        assert_eq!(loaded.neighbors, graph.neighbors);
    }
}
