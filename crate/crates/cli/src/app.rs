//! Flag handling and the top-level run.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mms_core::sim::{check_requests, day_requests};
use mms_core::{Network, PricingMode, Scenario};

use crate::config;
use crate::grid::{self, Emit, RunSpec};
use crate::output;
use crate::requests;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Artifact {
    Tables,
    PriceCdf,
    GapSeries,
    EventLog,
}

fn parse_pricing(s: &str) -> Result<PricingMode, String> {
    PricingMode::parse(s).ok_or_else(|| format!("unknown pricing mode {s:?}; expected none, constrained or unconstrained"))
}

/// Simulate an integrated microtransit operator over a grid of scenarios.
#[derive(Debug, Clone, Parser)]
#[command(name = "mms", version)]
pub struct Cli {
    /// Scenario file; the reference scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Arrival rates to sweep, customers per hour.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Vehicle capacities to sweep.
    #[arg(long, value_delimiter = ',')]
    pub capacity: Vec<usize>,
    /// Willingness-to-pay variances to sweep.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    /// Pricing modes compared in every cell.
    #[arg(long, value_delimiter = ',', value_parser = parse_pricing)]
    pub pricing: Vec<PricingMode>,
    #[arg(long)]
    pub days: Option<u32>,
    /// Seeds to replicate over.
    #[arg(long, value_delimiter = ',', env = "MMS_SEED")]
    pub seed: Vec<u64>,
    #[arg(long, default_value = "mms-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Optional outputs.
    #[arg(long, value_delimiter = ',', default_value = "tables,price-cdf,gap-series")]
    pub emit: Vec<Artifact>,
    /// Parse the config and flags, print the resolved scenario and exit.
    #[arg(long)]
    pub validate_only: bool,
    /// Print the reference scenario file and exit.
    #[arg(long)]
    pub emit_default_config: bool,
    /// Replay the customers in this request file instead of generating them.
    #[arg(long, conflicts_with = "export_requests")]
    pub requests: Option<PathBuf>,
    /// Write the generated customers of a single-cell grid to this file and exit.
    #[arg(long)]
    pub export_requests: Option<PathBuf>,
}

impl Cli {
    /// Base scenario from the config file, before any sweep.
    pub fn base_scenario(&self) -> Result<Scenario, String> {
        let mut base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                config::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => Scenario::default(),
        };
        if let Some(days) = self.days {
            base.days = days;
        }
        Ok(base)
    }

    pub fn spec(&self) -> Result<RunSpec, String> {
        let base = self.base_scenario()?;
        let pick = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let spec = RunSpec {
            lambdas: pick(&self.lambda, base.lambda_per_hour),
            capacities: if self.capacity.is_empty() { vec![base.capacity] } else { self.capacity.clone() },
            sigmas: pick(&self.sigma, base.wtp.sigma),
            seeds: if self.seed.is_empty() { vec![base.seed] } else { self.seed.clone() },
            modes: if self.pricing.is_empty() { PricingMode::ALL.to_vec() } else { self.pricing.clone() },
            emit: Emit {
                tables: self.emit.contains(&Artifact::Tables),
                price_cdf: self.emit.contains(&Artifact::PriceCdf),
                gap_series: self.emit.contains(&Artifact::GapSeries),
                event_log: self.emit.contains(&Artifact::EventLog),
            },
            replay: None,
            base,
        };
        let mut spec = spec;
        if let Some(path) = &self.requests {
            let days = requests::read(path).map_err(|e| format!("{e:#}"))?;
            spec.base.days = days.len() as u32;
            let network = Network::build(&spec.base.network).map_err(|e| e.to_string())?;
            for (d, r) in days.iter().enumerate() {
                check_requests(&spec.base, &network, r).map_err(|e| format!("{}: day {}: {e}", path.display(), d + 1))?;
            }
            spec.replay = Some(days);
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn run(cli: Cli) -> ExitCode {
    if cli.emit_default_config {
        print!("{}", config::emit_reference_config());
        return ExitCode::SUCCESS;
    }
    let spec = match cli.spec() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(path) = &cli.export_requests {
        return match export(&spec, path) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        };
    }
    if cli.validate_only {
        print!("{}", config::emit(&spec.base));
        let modes: Vec<&str> = spec.modes.iter().map(|m| m.name()).collect();
        println!("# grid: {} cells x pricing [{}]", spec.cells().len(), modes.join(", "));
        return ExitCode::SUCCESS;
    }
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = match grid::run(&spec, workers) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = output::write_all(&cli.out, &spec, &results) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let failed: Vec<_> = results.iter().filter_map(|r| r.outcome.as_ref().err().map(|e| (r.cell.id, e))).collect();
    for (id, e) in &failed {
        eprintln!("cell {id} failed: {e}");
    }
    eprintln!("wrote {} cells to {}", results.len(), cli.out.display());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn export(spec: &RunSpec, path: &std::path::Path) -> anyhow::Result<()> {
    let cells = spec.cells();
    if cells.len() != 1 {
        anyhow::bail!("exporting requests needs a single-cell grid, got {} cells", cells.len());
    }
    let scenario = spec.scenario(&cells[0]);
    let network = Network::build(&scenario.network)?;
    let days = (1..=scenario.days).map(|d| day_requests(&scenario, &network, d)).collect::<Result<Vec<_>, _>>()?;
    requests::write(path, &days)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_build_the_grid() {
        let cli = Cli::parse_from(["mms", "--lambda", "100,400", "--sigma", "0,1,4", "--pricing", "constrained,none", "--days", "3", "--seed", "7"]);
        let spec = cli.spec().unwrap();
        assert_eq!(spec.cells().len(), 6);
        assert_eq!(spec.modes, vec![PricingMode::Constrained, PricingMode::None]);
        assert_eq!(spec.base.days, 3);
        assert_eq!(spec.seeds, vec![7]);
        assert!(spec.emit.tables && !spec.emit.event_log);
    }

    #[test]
    fn defaults_come_from_the_scenario() {
        let spec = Cli::parse_from(["mms"]).spec().unwrap();
        assert_eq!(spec.lambdas, vec![400.0]);
        assert_eq!(spec.capacities, vec![10]);
        assert_eq!(spec.modes, PricingMode::ALL.to_vec());
    }

    #[test]
    fn bad_pricing_flag_is_rejected() {
        assert!(Cli::try_parse_from(["mms", "--pricing", "dynamic"]).is_err());
    }
}
