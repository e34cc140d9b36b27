use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use contwalk::experiments::{run, ExperimentConfig, ExperimentKind};

/// Run a density-driven diffusion experiment from a config file.
///
/// Exit status: 0 all checks pass, 1 config error, 2 numerical or I/O
/// failure, 3 a reported check failed.
#[derive(Debug, Parser)]
#[command(name = "contwalk", version)]
struct Cli {
    /// fig2, fig3, swissroll, verify-paths or classify
    experiment: ExperimentKind,

    /// Experiment config file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,

    /// Overrides `output.dir`
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    ExitCode::from(execute(Cli::parse()))
}

fn execute(cli: Cli) -> u8 {
    let mut config = match ExperimentConfig::from_file(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if config.kind() != cli.experiment {
        eprintln!(
            "error: config key `experiment`: file declares {} but {} was requested",
            config.kind(),
            cli.experiment
        );
        return 1;
    }
    if let Some(dir) = cli.out_dir {
        config.set_out_dir(dir);
    }
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    match run(&config) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            for c in &outcome.checks {
                println!("{c}");
            }
            outcome.exit_code() as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use std::path::Path;

    fn cli(experiment: &str, config: &Path, out: &Path) -> Cli {
        Cli::parse_from([
            "contwalk",
            experiment,
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ])
    }

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("run.conf");
        fs::write(&p, text).unwrap();
        p
    }

    const LINE: &str = "experiment = classify\ndensity.kind = piecewise\nclassify.queries = -0.1; 0; 0.1\n";

    #[test]
    fn passing_run_exits_zero_and_keeps_the_resolved_config() {
        let dir = tempfile::tempdir().unwrap();
        let conf = write_config(dir.path(), LINE);
        let out = dir.path().join("out");
        assert_eq!(execute(cli("classify", &conf, &out)), 0);
        let resolved = fs::read_to_string(out.join("classify_config.txt")).unwrap();
        // Every default is spelled out.
        assert!(resolved.contains("walk.p0 = 0.2"));
        assert!(resolved.contains("classify.points = A: -0.2; B: 0.2"));
        let again = ExperimentConfig::parse(&resolved, dir.path()).unwrap();
        assert_eq!(again.kind(), ExperimentKind::Classify);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let conf = write_config(dir.path(), LINE);
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        assert_eq!(execute(cli("classify", &conf, &a)), 0);
        assert_eq!(execute(cli("classify", &conf, &b)), 0);
        for f in ["classify_queries.csv", "classify_kernel.csv", "classify_report.txt"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn config_problems_exit_one_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert_eq!(execute(cli("classify", &dir.path().join("missing.conf"), &out)), 1);
        let conf = write_config(dir.path(), "experiment = classify\nwalk.p00 = 0.2\n");
        assert_eq!(execute(cli("classify", &conf, &out)), 1);
        let conf = write_config(dir.path(), LINE);
        assert_eq!(execute(cli("fig2", &conf, &out)), 1);
        let conf = write_config(dir.path(), "experiment = classify\nwalk.p0 = 1.5\n");
        assert_eq!(execute(cli("classify", &conf, &out)), 1);
        assert!(!out.exists());
    }

    #[test]
    fn failed_check_exits_three() {
        let dir = tempfile::tempdir().unwrap();
        // Impulse deep in the dense region: spread is no longer lopsided.
        let conf = write_config(dir.path(), "experiment = fig2\nschedule.impulse = 0.5\n");
        let out = dir.path().join("out");
        assert_eq!(execute(cli("fig2", &conf, &out)), 3);
        let report = fs::read_to_string(out.join("fig2_report.txt")).unwrap();
        assert!(report.contains("FAIL "));
    }

    #[test]
    fn seed_override_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let conf = write_config(dir.path(), LINE);
        let out = dir.path().join("out");
        let mut c = cli("classify", &conf, &out);
        c.seed = Some(17);
        assert_eq!(execute(c), 0);
        let resolved = fs::read_to_string(out.join("classify_config.txt")).unwrap();
        assert!(resolved.contains("seed = 17"));
    }
}
