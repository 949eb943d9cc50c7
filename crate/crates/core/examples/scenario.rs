//! Runs a scenario defined inline, the same way `thomlab run` does.
use thomlab::runner::{run, Scenario};

const TEXT: &str = r#"
name = "quartic"
kind = "gradient"
seed = 1

[potential]
builtin = "radial"
dim = 2
degree = 4
coef = 0.25

[initial]
y0 = [0.03, 0.04]
t0 = 1.0
t_end = 1e5

[checks]
ell_star = 4
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::from_toml_str(TEXT, ".")?;
    let dir = std::env::temp_dir().join("thomlab-scenario-example");
    let outcome = run(&sc, Some(&dir))?;
    println!("config hash {}", outcome.config_hash);
    for c in &outcome.checks {
        println!("{c:?}");
    }
    println!("artifacts in {}: {:?}", dir.display(), outcome.artifacts);
    std::process::exit(outcome.exit_code());
}
