use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FlowError, Result};
use crate::potential::norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub y: Vec<f64>,
    pub v: Option<Vec<f64>>,
    /// Value of the potential (or energy functional) at `y`.
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub potential: String,
    pub integrator: String,
    pub rtol: f64,
    pub atol: f64,
    pub error_model: String,
    pub seed: Option<u64>,
    /// Damping coefficient of heavy-ball runs.
    pub m: Option<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Largest `|Err| / bound` over accepted steps when an error model is active.
    pub err_bound_ratio: Option<f64>,
    pub config_hash: Option<String>,
    pub version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>, meta: TrajectoryMeta) -> Result<Self> {
        let traj = Trajectory { samples, meta };
        traj.validate()?;
        Ok(traj)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FlowError::InvalidTrajectory(msg));
        let Some(first) = self.samples.first() else {
            return bad("trajectory has no samples".into());
        };
        let n = first.y.len();
        for (k, s) in self.samples.iter().enumerate() {
            if s.y.len() != n {
                return bad(format!("sample {k} has dimension {} instead of {n}", s.y.len()));
            }
            if !s.t.is_finite() || !s.g.is_finite() || s.y.iter().any(|v| !v.is_finite()) {
                return bad(format!("sample {k} has non-finite entries"));
            }
            if let Some(v) = &s.v {
                if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                    return bad(format!("sample {k} has a malformed velocity"));
                }
            }
            if (s.v.is_some()) != (first.v.is_some()) {
                return bad("velocities must be present in all samples or none".into());
            }
            if k > 0 && s.t <= self.samples[k - 1].t {
                return bad(format!("time is not strictly increasing at sample {k}"));
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].y.len()
    }

    pub fn has_velocity(&self) -> bool {
        self.samples[0].v.is_some()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.samples.iter().map(|s| norm(&s.y)).collect()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("non-empty")
    }

    /// Samples with `t >= t_min`.
    pub fn since(&self, t_min: f64) -> &[Sample] {
        let k = self.samples.partition_point(|s| s.t < t_min);
        &self.samples[k..]
    }

    /// Keeps selected coordinates of `y` (and `v`), with `g` unchanged.
    pub fn project(&self, coords: &[usize]) -> Result<Trajectory> {
        let n = self.dim();
        if let Some(&bad) = coords.iter().find(|&&c| c >= n) {
            return Err(FlowError::DimensionMismatch { expected: n, got: bad + 1 });
        }
        let pick = |v: &[f64]| coords.iter().map(|&c| v[c]).collect::<Vec<f64>>();
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                t: s.t,
                y: pick(&s.y),
                v: s.v.as_deref().map(pick),
                g: s.g,
            })
            .collect();
        Trajectory::new(samples, self.meta.clone())
    }

    /// Builds a trajectory from `(t, y)` pairs with `g` set to `|y|^2 / 2`.
    pub fn from_points(points: impl IntoIterator<Item = (f64, Vec<f64>)>, label: &str) -> Result<Trajectory> {
        let samples = points
            .into_iter()
            .map(|(t, y)| {
                let g = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
                Sample { t, y, v: None, g }
            })
            .collect();
        Trajectory::new(
            samples,
            TrajectoryMeta {
                potential: label.into(),
                integrator: "synthetic".into(),
                error_model: "none".into(),
                ..Default::default()
            },
        )
    }

    pub fn csv_header(&self) -> Vec<String> {
        let n = self.dim();
        let mut h = vec!["t".to_string()];
        h.extend((1..=n).map(|i| format!("y_{i}")));
        if self.has_velocity() {
            h.extend((1..=n).map(|i| format!("v_{i}")));
        }
        h.push("norm_y".into());
        h.push("g_y".into());
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.csv_header())?;
        for s in &self.samples {
            let mut rec: Vec<String> = vec![fmt(s.t)];
            rec.extend(s.y.iter().map(|v| fmt(*v)));
            if let Some(v) = &s.v {
                rec.extend(v.iter().map(|x| fmt(*x)));
            }
            rec.push(fmt(norm(&s.y)));
            rec.push(fmt(s.g));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Trajectory> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let ny = header.iter().filter(|h| h.starts_with("y_")).count();
        let nv = header.iter().filter(|h| h.starts_with("v_")).count();
        let ok = header.first().map(String::as_str) == Some("t")
            && ny > 0
            && (nv == 0 || nv == ny)
            && header.len() == 1 + ny + nv + 2
            && header[header.len() - 2] == "norm_y"
            && header[header.len() - 1] == "g_y";
        if !ok {
            return Err(FlowError::InvalidTrajectory(format!("unexpected CSV header {header:?}")));
        }
        let mut samples = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| FlowError::InvalidTrajectory(format!("bad number: {e}")))?;
            if vals.len() != header.len() {
                return Err(FlowError::InvalidTrajectory("ragged CSV row".into()));
            }
            samples.push(Sample {
                t: vals[0],
                y: vals[1..1 + ny].to_vec(),
                v: (nv > 0).then(|| vals[1 + ny..1 + ny + nv].to_vec()),
                g: vals[header.len() - 1],
            });
        }
        Trajectory::new(samples, TrajectoryMeta::default())
    }

    /// Sidecar path holding the metadata of a CSV trajectory file.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        let mut p = csv_path.as_os_str().to_owned();
        p.push(".meta.json");
        PathBuf::from(p)
    }

    /// Writes the CSV and its JSON metadata sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let f = fs::File::create(csv_path)?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        fs::write(Self::sidecar_path(csv_path), meta)?;
        Ok(())
    }

    /// Reads a CSV trajectory; metadata is loaded from the sidecar when present.
    pub fn load(csv_path: &Path) -> Result<Trajectory> {
        let f = fs::File::open(csv_path)?;
        let mut traj = Self::read_csv(std::io::BufReader::new(f))?;
        let side = Self::sidecar_path(csv_path);
        if side.exists() {
            traj.meta = serde_json::from_str(&fs::read_to_string(side)?)?;
        }
        Ok(traj)
    }
}

/// Shortest representation that round-trips.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:?}")
}
