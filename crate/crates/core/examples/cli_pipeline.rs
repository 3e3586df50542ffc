//! Drives the command-line front end in-process: generate data, cluster it
//! from a config file, then score the written assignments with `eval`.
//!
//! `cargo run --release --example cli_pipeline`

use imsat::cli::run_from_args;
use imsat::data::Dataset;

const CONFIG: &str = "
seed = 1

[data]
path = blobs.imsd

[model]
clusters = 4
hidden = 10, 10

[train]
regularizer = vat
epochs = 2000
";

fn main() -> std::io::Result<()> {
    let dir = std::env::temp_dir().join(format!("imsat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    std::fs::write(dir.join("run.conf"), CONFIG)?;

    let run = |args: Vec<String>| {
        println!("$ imsat {}", args.join(" "));
        let code = run_from_args(std::iter::once("imsat".to_string()).chain(args));
        println!("exit {code}");
        code == 0
    };
    let sv = |a: &[&str]| a.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    if !run(sv(&["gen-data", "--kind", "blobs", "--out", &p("blobs.imsd")])) {
        return Ok(());
    }
    // `eval` reads plain label files, one class id per line.
    let ds = Dataset::load(&dir.join("blobs.imsd")).map_err(std::io::Error::other)?;
    let labels: Vec<String> = ds.labels.unwrap().labels.iter().map(usize::to_string).collect();
    std::fs::write(dir.join("labels.txt"), labels.join("\n") + "\n")?;

    if !run(sv(&["cluster", "--config", &p("run.conf"), "--out", &p("out")])) {
        return Ok(());
    }
    run(sv(&["eval", "--codes", &p("out/assignments.txt"), "--labels", &p("labels.txt")]));
    for entry in std::fs::read_dir(dir.join("out"))? {
        println!("wrote {}", entry?.path().display());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
