//! Plug-in alpha of (X_t, Y_t) against the exact value from the pair chain.

use exomix::experiment::{run_text, RunError};

const CONFIG: &str = r#"
name = "restricted-alpha-example"
seed = 5

[experiment]
kind = "alpha_curve"
max_lag = 8
replicates = 20000

[experiment.family]
kind = "table"
values = [[0.0], [1.0]]
kernels = [[[0.7, 0.3], [0.5, 0.5]], [[0.4, 0.6], [0.3, 0.7]]]

[experiment.environment]
kind = "finite_markov"
states = [[0.0], [1.0]]
transition = [[0.6, 0.4], [0.4, 0.6]]
"#;

fn main() -> Result<(), RunError> {
    let dir = std::env::temp_dir().join("exomix-restricted-alpha");
    let report = run_text(CONFIG, Some(&dir))?;
    let t = report.table("domination").expect("domination table");
    for c in ["lag", "alpha_hat", "se", "alpha_exact", "bound"] {
        print!("{c:>12}");
    }
    println!();
    for row in &t.rows {
        for i in [0, 1, 2, 4, 5] {
            print!("{:>12.5}", row[i]);
        }
        println!();
    }
    for v in &report.verdicts {
        println!("{} {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    Ok(())
}
