mod config;
mod pipeline;
mod report;

use std::process::ExitCode;

use anyhow::anyhow;
use clap::Parser;

use config::{Cli, Command, RunArgs, RunConfig};
use pipeline::{Context, Failure};
use report::{Bundle, Header};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let (name, args) = match command {
        Command::Validate { spec } => {
            let v = pipeline::validate(&spec)?;
            println!("{}", serde_json::to_string_pretty(&v).map_err(anyhow::Error::from)?);
            return Ok(());
        }
        Command::Induce(a) => ("induce", a),
        Command::Badset(a) => ("badset", a),
        Command::Ergodic(a) => ("ergodic", a),
        Command::All(a) => ("all", a),
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| anyhow!("configuring {n} threads: {e}"))?;
    }
    execute(name, &args)
}

fn execute(name: &str, args: &RunArgs) -> Result<(), Failure> {
    let ctx = Context::open(RunConfig::new(name, args))?;
    let bundle = Bundle::create(&ctx.config.out, Header::new(&ctx.config, ctx.watermark()))?;
    if let Some(w) = &bundle.header().watermark {
        eprintln!("warning: {w}");
    }
    match name {
        "induce" => {
            let run = pipeline::induce(&ctx)?;
            pipeline::write_induce(&bundle, &run)?;
            summarize_induce(&run);
        }
        "badset" => {
            let forest = match pipeline::load_forest(&ctx)? {
                Some(f) => f,
                None if ctx.config.induce_first => {
                    let run = pipeline::induce(&ctx)?;
                    pipeline::write_induce(&bundle, &run)?;
                    run.forest
                }
                None => {
                    return Err(Failure::Invalid(anyhow!(
                        "badset needs forest.json from an earlier induce run in {}; run induce first or pass --induce-first",
                        bundle.dir().display()
                    )))
                }
            };
            let report = pipeline::badset(&ctx, &forest)?;
            pipeline::write_badset(&bundle, &report)?;
            pipeline::budget_status(&forest)?;
        }
        "ergodic" => {
            let run = pipeline::induce(&ctx)?;
            let report = pipeline::ergodic(&ctx, &run.forest)?;
            pipeline::write_ergodic(&bundle, &report)?;
            println!("coherence: {}", if report.coherence.pass { "pass" } else { "FAIL" });
        }
        _ => {
            let run = pipeline::induce(&ctx)?;
            let induced = pipeline::write_induce(&bundle, &run);
            summarize_induce(&run);
            let bad = pipeline::badset(&ctx, &run.forest)?;
            pipeline::write_badset(&bundle, &bad)?;
            let erg = pipeline::ergodic(&ctx, &run.forest)?;
            pipeline::write_ergodic(&bundle, &erg)?;
            println!(
                "absorbing: {} of {} samples retained; coherence: {}",
                bad.absorbing.retained,
                bad.absorbing.samples,
                if erg.coherence.pass { "pass" } else { "FAIL" }
            );
            induced?;
        }
    }
    Ok(())
}

fn summarize_induce(run: &pipeline::Induced) {
    let r = &run.report;
    println!(
        "horizon {}: {} good intervals, {} branches, residual {:.6e}, verdict {}",
        r.complete_horizon,
        r.members,
        r.branches,
        r.residual.to_f64(),
        serde_json::to_string(&r.curve.verdict).unwrap_or_default().trim_matches('"')
    );
}
