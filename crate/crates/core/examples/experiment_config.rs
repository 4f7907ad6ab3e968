//! Driving simulate and diagnose from a TOML config, as the `ttsa` binary does.

use hybrid_ttsa::experiment::{cmd_diagnose, cmd_simulate, CliError, ExperimentConfig};

const CONFIG: &str = r#"
[objective]
N = 4
seed = 7

[schedule.slow]
family = "power_law"
a = 1.0
b = 1.0
rho = 1.0

[schedule.fast]
family = "power_law"
a = 1.0
b = 1.0
rho = 0.6

[run]
K = 10000
seeds = [0, 1]
stochastic = false
"#;

fn main() -> Result<(), CliError> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let out = std::env::temp_dir().join("ttsa_experiment_config_example");
    let sim = cmd_simulate(&cfg, &out)?;
    print!("{}", sim.summary);
    let diag = cmd_diagnose(&cfg, &out)?;
    print!("{}", diag.summary);
    println!("exit status {:?}; artifacts in {}", diag.status, out.display());

    match ExperimentConfig::from_toml_str("[schedule.slow]\nfamily = \"power_law\"\na = 1.0\nrho = 0.0\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}
