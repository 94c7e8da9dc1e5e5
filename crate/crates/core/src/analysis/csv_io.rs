//! Features CSV (`piece,group,<14 features>`) and embedding CSV (`piece,x,y,group`).

use std::path::Path;

use super::features::{global_feature_names, GlobalFeatures, GLOBAL_FEATURES};
use crate::error::{Error, Result};
use crate::fsio;

/// Group labels used for ground truth and the two training snapshots.
pub const GROUP_GROUND_TRUTH: &str = "ground-truth";
pub const GROUP_EARLY: &str = "early";
pub const GROUP_LATE: &str = "late";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub piece: String,
    pub group: String,
    pub features: GlobalFeatures,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub piece: String,
    pub x: f64,
    pub y: f64,
    pub group: String,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    writer.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))
}

pub fn features_to_csv(rows: &[FeatureRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["piece".to_string(), "group".to_string()];
    header.extend(global_feature_names());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.piece.clone(), r.group.clone()];
        rec.extend(r.features.0.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

pub fn features_from_csv(bytes: &[u8]) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_err)?.clone();
    let mut expected = vec!["piece".to_string(), "group".to_string()];
    expected.extend(global_feature_names());
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!("unexpected features header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut features = [0.0; GLOBAL_FEATURES];
        for (k, slot) in features.iter_mut().enumerate() {
            let field = &rec[k + 2];
            *slot = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {field:?}", line + 1)))?;
        }
        rows.push(FeatureRow {
            piece: rec[0].to_string(),
            group: rec[1].to_string(),
            features: GlobalFeatures(features),
        });
    }
    Ok(rows)
}

pub fn embedding_to_csv(rows: &[EmbeddingRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["piece", "x", "y", "group"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.piece.clone(), r.x.to_string(), r.y.to_string(), r.group.clone()])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    fsio::write_atomic(path, &features_to_csv(rows)?)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    features_from_csv(&fsio::read(path)?)
}

pub fn write_embedding(path: &Path, rows: &[EmbeddingRow]) -> Result<()> {
    fsio::write_atomic(path, &embedding_to_csv(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip() {
        let mut f = [0.0; GLOBAL_FEATURES];
        for (i, x) in f.iter_mut().enumerate() {
            *x = 0.1 * i as f64 + 1.0 / 3.0;
        }
        let rows = vec![
            FeatureRow { piece: "a".into(), group: GROUP_GROUND_TRUTH.into(), features: GlobalFeatures(f) },
            FeatureRow { piece: "b, quoted".into(), group: GROUP_LATE.into(), features: GlobalFeatures([0.0; 14]) },
        ];
        let bytes = features_to_csv(&rows).unwrap();
        assert!(bytes.starts_with(b"piece,group,density_mean,"));
        assert_eq!(features_from_csv(&bytes).unwrap(), rows);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(features_from_csv(b"piece,x\na,1\n").is_err());
    }

    #[test]
    fn embedding_header() {
        let rows = [EmbeddingRow { piece: "p".into(), x: 1.5, y: -2.0, group: GROUP_EARLY.into() }];
        assert_eq!(embedding_to_csv(&rows).unwrap(), b"piece,x,y,group\np,1.5,-2,early\n");
    }
}
