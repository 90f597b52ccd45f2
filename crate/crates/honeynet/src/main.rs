//! Command-line front end: rule checking, scenario runs, trace replay, and
//! offline analysis over store directories.
//!
//! Exit codes: 0 success, 1 data errors (unreadable/invalid inputs),
//! 2 usage errors.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use honeynet::capture::Collector;
use honeynet::honeywall::{Decision, Gateway};
use honeynet::netmodel::Packet;
use honeynet::opsreport::{compute_report, evaluate_alerts, scan_for_tokens, RunConfig};
use honeynet::rulelang::{parse_ruleset, RuleSet};
use honeynet::simnet::{run_scenario, Scenario};
use honeynet::stores::{
    load_dir_tolerant, read_jsonl_strict, write_jsonl, LoadedStores, Stores, ALERTS_FILE,
    CONFIG_FILE,
};

#[derive(Parser)]
#[command(
    name = "honeynet",
    version,
    about = "Deterministic honeynet simulation and forensics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a rule file and print its canonical form.
    CheckRules { file: PathBuf },
    /// Execute a scenario and write all evidence stores to a directory.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feed a recorded packet trace through the gateway, without hosts.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute and print the metrics report for a store directory.
    Report { dir: PathBuf },
    /// Print honeytoken sightings found in a store directory.
    Tokens { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type CliResult = Result<(), Box<dyn Error>>;

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::CheckRules { file } => check_rules(&file),
        Command::Run {
            scenario,
            rules,
            config,
            out,
        } => run_cmd(&scenario, &rules, &config, &out),
        Command::Replay {
            trace,
            rules,
            config,
            out,
        } => replay_cmd(&trace, &rules, &config, &out),
        Command::Report { dir } => report_cmd(&dir),
        Command::Tokens { dir } => tokens_cmd(&dir),
    }
}

fn load_rules(path: &Path) -> Result<RuleSet, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read rules {}: {e}", path.display()))?;
    let rules = parse_ruleset(&text).map_err(|e| format!("{}:{e}", path.display()))?;
    Ok(rules)
}

fn check_rules(file: &Path) -> CliResult {
    let rules = load_rules(file)?;
    print!("{}", rules.render());
    Ok(())
}

fn load_scenario(path: &Path) -> Result<Scenario, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read scenario {}: {e}", path.display()))?;
    let sc: Scenario =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(sc)
}

/// Write stores, the effective configuration, and evaluated alerts into the
/// output directory, so `report`/`tokens` can work from files alone.
fn write_outputs(out: &Path, stores: &Stores, config: &RunConfig) -> CliResult {
    stores.write_dir(out)?;
    fs::write(
        out.join(CONFIG_FILE),
        serde_json::to_string_pretty(config)? + "\n",
    )?;
    let loaded = LoadedStores {
        packets: stores.packets.clone(),
        events: stores.events.clone(),
        capture: stores.capture.clone(),
        capture_raw: stores.capture_raw.clone(),
        corrupt_lines: 0,
    };
    let hits = scan_for_tokens(&loaded, &config.tokens);
    let alerts = evaluate_alerts(&stores.events, &hits, &config.alert_rules);
    write_jsonl(&out.join(ALERTS_FILE), &alerts)?;
    println!(
        "wrote {} packets, {} events, {} capture records, {} alerts to {}",
        stores.packets.len(),
        stores.events.len(),
        stores.capture.len(),
        alerts.len(),
        out.display()
    );
    Ok(())
}

fn run_cmd(scenario: &Path, rules: &Path, config: &Path, out: &Path) -> CliResult {
    let config = RunConfig::load(config)?;
    let rules = load_rules(rules)?;
    config.validate_against(&rules)?;
    let sc = load_scenario(scenario)?;
    let output = run_scenario(&sc, &config.net, &rules, &config.quota, &config.tokens)?;
    write_outputs(out, &output.stores, &config)?;
    for (ip, host) in &output.hosts {
        if host.compromised {
            println!("compromised: {ip} ({:?})", host.role);
        }
    }
    Ok(())
}

fn replay_cmd(trace: &Path, rules: &Path, config: &Path, out: &Path) -> CliResult {
    let config = RunConfig::load(config)?;
    let rules = load_rules(rules)?;
    config.validate_against(&rules)?;
    let packets: Vec<Packet> = read_jsonl_strict(trace)?;
    for (i, p) in packets.iter().enumerate() {
        p.validate()
            .map_err(|e| format!("{}:{}: {e}", trace.display(), i + 1))?;
        if i > 0 && p.timestamp < packets[i - 1].timestamp {
            return Err(format!(
                "{}:{}: timestamps must be non-decreasing for replay",
                trace.display(),
                i + 1
            )
            .into());
        }
    }
    let mut gateway = Gateway::new(config.net.clone(), rules, config.quota.clone());
    let mut collector = Collector::new();
    let mut stores = Stores::default();
    for p in packets {
        if let Decision::DivertToCollector(p) = gateway.process(p, &mut stores).decision {
            collector.ingest(&p, &mut stores);
        }
    }
    write_outputs(out, &stores, &config)
}

/// Configuration stored alongside the evidence, or a neutral one when the
/// directory carries none (direction-dependent metrics then stay empty).
fn load_dir_config(dir: &Path) -> Result<RunConfig, Box<dyn Error>> {
    let path = dir.join(CONFIG_FILE);
    if path.exists() {
        Ok(RunConfig::load(&path)?)
    } else {
        eprintln!(
            "note: {} missing; direction-dependent metrics use an empty configuration",
            path.display()
        );
        Ok(RunConfig {
            net: honeynet::netmodel::NetConfig {
                honeynet_subnet: "255.255.255.255/32".parse().unwrap(),
                collector_ip: "0.0.0.0".parse().unwrap(),
                capture_port: 0,
                honeypot_ips: Default::default(),
            },
            quota: Default::default(),
            tokens: vec![],
            alert_rules: vec![],
        })
    }
}

fn report_cmd(dir: &Path) -> CliResult {
    let stores = load_dir_tolerant(dir)?;
    let config = load_dir_config(dir)?;
    let report = compute_report(&stores, &config.net, &config.tokens);
    print!("{}", report.render_table());
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn tokens_cmd(dir: &Path) -> CliResult {
    let stores = load_dir_tolerant(dir)?;
    let config = load_dir_config(dir)?;
    let hits = scan_for_tokens(&stores, &config.tokens);
    if hits.is_empty() {
        println!("no token sightings");
        return Ok(());
    }
    println!("{:<20} {:<8} time (µs)", "token", "where");
    for h in &hits {
        println!("{:<20} {:<8?} {}", h.token_id, h.source, h.time);
    }
    Ok(())
}
