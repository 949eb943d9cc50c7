use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{kind_name, resolve};
use super::{run, Kind, Result, RunnerError, Scenario, VERSION};

/// One grid point of a sweep. Failed runs keep their row with `status` and `error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: String,
    /// `pass`, `check_failed`, `config_error` or `numerical_failure`.
    pub status: String,
    pub ell_star: Option<f64>,
    pub alpha0: Option<f64>,
    pub direction: Option<String>,
    pub class: Option<String>,
    pub error: Option<String>,
}

const HEADER: [&str; 8] = ["index", "value", "status", "ell_star", "alpha0", "direction", "class", "error"];

fn set_path(root: &mut toml::Value, path: &str, v: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (i, key) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| RunnerError::Config(format!("sweep.parameter: '{path}' does not name a table field")))?;
        if i + 1 == parts.len() {
            table.insert((*key).to_string(), v);
            return Ok(());
        }
        cur = table.entry((*key).to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(RunnerError::Config("sweep.parameter is empty".into()))
}

/// The scenario of grid point `value`.
pub fn instantiate(sc: &Scenario, value: &toml::Value) -> Result<Scenario> {
    let sw = sc.sweep.as_ref().ok_or_else(|| RunnerError::Config("missing [sweep] section".into()))?;
    let mut root = toml::Value::try_from(sc).map_err(|e| RunnerError::Config(e.to_string()))?;
    let table = root.as_table_mut().expect("scenario is a table");
    table.remove("sweep");
    table.insert("kind".into(), toml::Value::String(kind_name(sw.kind).into()));
    set_path(&mut root, &sw.parameter, value.clone())?;
    let mut out: Scenario = root.try_into().map_err(|e: toml::de::Error| RunnerError::Config(format!("sweep.parameter {}: {e}", sw.parameter)))?;
    out.base_dir = sc.base_dir.clone();
    out.out_dir = None;
    out.validate()?;
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Runs every grid point (concurrently, up to `workers` threads) and writes
/// `sweep.csv` in grid order. Individual failures become rows, never errors.
pub fn run_sweep(sc: &Scenario, out_dir: Option<&Path>, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    sc.validate()?;
    if sc.kind != Kind::Sweep {
        return Err(RunnerError::Config("run_sweep needs kind = \"sweep\"".into()));
    }
    let sw = sc.sweep.as_ref().expect("validated");
    let out = match (out_dir, &sc.out_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => resolve(&sc.base_dir, o),
        (None, None) => sc.base_dir.join("out").join(if sc.name.is_empty() { "sweep" } else { &sc.name }),
    };
    fs::create_dir_all(&out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| RunnerError::Config(format!("workers: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        sw.values
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                let mut row = SweepRow {
                    index: i,
                    value: v.to_string(),
                    status: String::new(),
                    ell_star: None,
                    alpha0: None,
                    direction: None,
                    class: None,
                    error: None,
                };
                let res = instantiate(sc, v).and_then(|s| run(&s, Some(&out.join(format!("run_{i:03}")))));
                match res {
                    Ok(o) => {
                        row.status = if o.passed() { "pass" } else { "check_failed" }.into();
                        if let Some(f) = o.rate() {
                            row.ell_star = Some(f.ell_star);
                            row.alpha0 = Some(f.alpha0);
                        }
                        row.class = o.class_name();
                        row.direction = o
                            .results
                            .get("secant")
                            .and_then(|s| s.get("theta_star"))
                            .and_then(|v| serde_json::from_value::<Vec<f64>>(v.clone()).ok())
                            .map(|d| d.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";"))
                            .or_else(|| o.results.get("pde").and_then(|p| p.get("neutral_angle")).and_then(|a| a.as_f64()).map(|a| format!("angle={a:?}")));
                    }
                    Err(e) => {
                        row.status = match e.exit_code() {
                            2 => "config_error",
                            _ => "numerical_failure",
                        }
                        .into();
                        row.error = Some(e.to_string());
                    }
                }
                row
            })
            .collect()
    });
    let mut wr = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| RunnerError::Io(std::io::Error::other(e));
    wr.write_record(HEADER).map_err(io)?;
    for r in &rows {
        wr.write_record([
            r.index.to_string(),
            r.value.clone(),
            r.status.clone(),
            fmt_opt(r.ell_star),
            fmt_opt(r.alpha0),
            r.direction.clone().unwrap_or_default(),
            r.class.clone().unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    let bytes = wr.into_inner().map_err(|e| RunnerError::Io(std::io::Error::other(e.to_string())))?;
    fs::write(out.join("sweep.csv"), bytes)?;
    let meta = serde_json::json!({
        "config_hash": sc.config_hash(),
        "version": VERSION,
        "seed": sc.seed,
        "parameter": sw.parameter,
    });
    fs::write(out.join("sweep.csv.meta.json"), serde_json::to_string_pretty(&meta).expect("json") + "\n")?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let sc = Scenario::from_toml_str("kind = \"sweep\"\n[sweep]\nkind = \"pde\"\nparameter = \"pde.amplitude\"\nvalues = []\n", dir.path()).unwrap();
        let rows = run_sweep(&sc, Some(dir.path()), Some(1)).unwrap();
        assert!(rows.is_empty());
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv, "index,value,status,ell_star,alpha0,direction,class,error\n");
    }

    #[test]
    fn bad_grid_point_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
kind = "sweep"
[reduce]
k_max = 8
[sweep]
kind = "reduce"
parameter = "reduce.radii"
values = [[0.02, 0.04, 0.08, 0.16], [0.5]]
"#;
        let sc = Scenario::from_toml_str(text, dir.path()).unwrap();
        let rows = run_sweep(&sc, Some(dir.path()), Some(2)).unwrap();
        assert_eq!(rows[0].status, "pass");
        assert_eq!(rows[1].status, "numerical_failure");
        assert!(rows[1].error.is_some());
    }
}
