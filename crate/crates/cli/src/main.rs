mod args;
mod data;
mod simulate;

use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::process::ExitCode;

use alpf_core::datagen::{gen_hierarchical_gaussians, write_dir, SynthParams};
use alpf_core::study::{run_study, StudyConfig};
use alpf_service::ServiceConfig;
use anyhow::Context;
use clap::Parser;

use args::{Cli, Command, GenDataArgs, ServeArgs, TrainPartialArgs};
use data::DataSpec;

/// A problem with how the tool was invoked rather than with the work itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn train_partial(args: &TrainPartialArgs) -> anyhow::Result<()> {
    let (dataset, hierarchy) = DataSpec::from_args(&args.data).load()?;
    let cfg = StudyConfig {
        gammas: args.gammas.clone(),
        levels: args.levels.clone(),
        train: args.train.config(),
        seed: args.seed,
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let table = run_study(&dataset, &hierarchy, &cfg)?;
    print!("{}", table.to_text());
    if let Some(out) = &args.out {
        fs::write(out, table.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn gen_data(args: &GenDataArgs) -> anyhow::Result<()> {
    let mut depth = 0u32;
    let mut leaves = 1usize;
    while leaves < args.k && args.branching >= 2 {
        leaves *= args.branching;
        depth += 1;
    }
    if args.branching < 2 || leaves != args.k {
        return Err(UsageError(format!(
            "--k {} is not a power of --branching {}",
            args.k, args.branching
        ))
        .into());
    }
    let params = SynthParams {
        k: args.k,
        branching: args.branching,
        depth,
        d: args.d,
        n_train: args.n,
        n_holdout: args.holdout.unwrap_or(args.n / 2),
        root_scale: args.root_scale,
        decay: args.decay,
        seed: args.seed,
    };
    let (dataset, hierarchy) =
        gen_hierarchical_gaussians(&params).map_err(|e| UsageError(e.to_string()))?;
    write_dir(&args.out, &dataset, &hierarchy, Some(&params))?;
    println!(
        "wrote {} examples ({} classes) to {}",
        dataset.n(),
        hierarchy.k(),
        args.out.display()
    );
    Ok(())
}

fn serve(args: &ServeArgs) -> anyhow::Result<()> {
    let ip: IpAddr = args
        .host
        .parse()
        .map_err(|_| UsageError(format!("invalid host `{}`", args.host)))?;
    let addr = SocketAddr::new(ip, args.port);
    let cfg = ServiceConfig {
        session_dir: args.session_dir.clone(),
        data_root: args.data_root.clone(),
        cors_origin: args.cors_origin.clone(),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        alpf_service::serve_on(cfg, listener).await?;
        Ok(())
    })
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let runs = simulate::simulate(&args)?;
            simulate::print_summary(&runs);
            Ok(())
        }
        Command::TrainPartial(args) => train_partial(&args),
        Command::GenData(args) => gen_data(&args),
        Command::Serve(args) => {
            tracing_subscriber::fmt()
                .with_writer(std::io::stderr)
                .init();
            serve(&args)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}
