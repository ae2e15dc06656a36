//! Result tables and their CSV encodings.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::recon::Mode;
use crate::synth::AnomalyKind;

pub const SCORE_HEADER: [&str; 12] = [
    "experiment",
    "kind",
    "intensity",
    "sigma",
    "model",
    "mode",
    "k",
    "mean_ap",
    "ap_std",
    "mean_recon_err",
    "n_images",
    "seed",
];

/// One cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub experiment: String,
    pub kind: AnomalyKind,
    pub intensity: Option<f64>,
    pub sigma: Option<f64>,
    pub model: String,
    pub mode: Mode,
    pub k: Option<usize>,
    pub mean_ap: f64,
    pub ap_std: f64,
    pub mean_recon_err: Option<f64>,
    pub n_images: usize,
    pub seed: u64,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: "<csv>".into(),
            source: io,
        },
        other => Error::Malformed {
            path: "<csv>".into(),
            message: format!("{other:?}"),
        },
    }
}

impl ScoreRow {
    fn record(&self) -> [String; 12] {
        [
            self.experiment.clone(),
            self.kind.to_string(),
            opt(self.intensity),
            opt(self.sigma),
            self.model.clone(),
            self.mode.to_string(),
            opt(self.k),
            self.mean_ap.to_string(),
            self.ap_std.to_string(),
            opt(self.mean_recon_err),
            self.n_images.to_string(),
            self.seed.to_string(),
        ]
    }

    /// Label identifying the series this row belongs to in exp3 tables.
    pub fn model_label(&self) -> String {
        match (self.k, self.sigma) {
            (Some(k), _) => format!("{} k={k}", self.model),
            (None, Some(s)) => format!("{} sigma={s}", self.model),
            _ => self.model.clone(),
        }
    }
}

pub fn write_score_csv<W: Write>(rows: &[ScoreRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.record()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_score_csv<R: Read>(input: R) -> Result<Vec<ScoreRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != SCORE_HEADER {
        return Err(Error::Malformed {
            path: "<csv>".into(),
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let bad = |line: usize, field: &str| Error::Malformed {
        path: "<csv>".into(),
        message: format!("row {line}: bad {field}"),
    };
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| rec.get(i).unwrap_or_default();
        let opt_f64 = |i: usize, name: &str| -> Result<Option<f64>> {
            if f(i).is_empty() {
                Ok(None)
            } else {
                f(i).parse().map(Some).map_err(|_| bad(line + 1, name))
            }
        };
        rows.push(ScoreRow {
            experiment: f(0).to_string(),
            kind: f(1).parse().map_err(|_| bad(line + 1, "kind"))?,
            intensity: opt_f64(2, "intensity")?,
            sigma: opt_f64(3, "sigma")?,
            model: f(4).to_string(),
            mode: f(5).parse().map_err(|_| bad(line + 1, "mode"))?,
            k: if f(6).is_empty() {
                None
            } else {
                Some(f(6).parse().map_err(|_| bad(line + 1, "k"))?)
            },
            mean_ap: f(7).parse().map_err(|_| bad(line + 1, "mean_ap"))?,
            ap_std: f(8).parse().map_err(|_| bad(line + 1, "ap_std"))?,
            mean_recon_err: opt_f64(9, "mean_recon_err")?,
            n_images: f(10).parse().map_err(|_| bad(line + 1, "n_images"))?,
            seed: f(11).parse().map_err(|_| bad(line + 1, "seed"))?,
        });
    }
    Ok(rows)
}

pub fn read_score_csv_file(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_score_csv(file).map_err(|e| match e {
        Error::Malformed { message, .. } => Error::Malformed {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Reconstruction error against anomaly-detection performance for one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorApRow {
    pub model: String,
    pub k: Option<usize>,
    pub mean_recon_err: f64,
    /// Mean AP over the intensities inside the blind-spot band.
    pub band_mean_ap: f64,
    /// Mean AP over the whole intensity grid.
    pub mean_ap: f64,
}

impl ErrorApRow {
    pub fn label(&self) -> String {
        match self.k {
            Some(k) => format!("{} k={k}", self.model),
            None => self.model.clone(),
        }
    }
}

pub fn write_error_ap_csv<W: Write>(rows: &[ErrorApRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "k", "mean_recon_err", "band_mean_ap", "mean_ap"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            opt(r.k),
            r.mean_recon_err.to_string(),
            r.band_mean_ap.to_string(),
            r.mean_ap.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaMatchRow {
    pub model: String,
    pub k: Option<usize>,
    pub best_sigma: f64,
    pub distance: f64,
}

pub fn write_sigma_match_csv<W: Write>(rows: &[SigmaMatchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "k", "best_sigma", "l1_distance"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            opt(r.k),
            r.best_sigma.to_string(),
            r.distance.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ScoreRow {
        ScoreRow {
            experiment: "exp1".into(),
            kind: AnomalyKind::Intensity,
            intensity: Some(0.15),
            sigma: Some(2.0),
            model: "blur".into(),
            mode: Mode::Healthy,
            k: None,
            mean_ap: 0.123456789,
            ap_std: 0.01,
            mean_recon_err: Some(0.02),
            n_images: 100,
            seed: 7,
        }
    }

    #[test]
    fn header_and_empty_fields() {
        let mut buf = Vec::new();
        write_score_csv(&[row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "experiment,kind,intensity,sigma,model,mode,k,mean_ap,ap_std,mean_recon_err,n_images,seed\n\
             exp1,intensity,0.15,2,blur,healthy,,0.123456789,0.01,0.02,100,7\n"
        );
    }

    #[test]
    fn csv_round_trip() {
        let mut r2 = row();
        r2.kind = AnomalyKind::Shuffle;
        r2.intensity = None;
        r2.k = Some(16);
        r2.mean_recon_err = None;
        let mut buf = Vec::new();
        write_score_csv(&[row(), r2.clone()], &mut buf).unwrap();
        assert_eq!(read_score_csv(buf.as_slice()).unwrap(), vec![row(), r2]);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_score_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
