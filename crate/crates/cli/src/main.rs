//! `rvcsim`: generate traces, run trackers against the disturbance oracle,
//! compare aggressor and victim counting, sweep parameter grids, and verify
//! the security contract.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use rvc_core::config::Settings;
use rvc_core::harness::{self, CompareOptions, SweepSpec, TraceFamily};
use rvc_core::workloads::{self, ZipfPreset};
use rvc_core::{report, DramConfig, Energy, EnergyModel, Error, Mode, PhaseModel, RetriggerPolicy, Row, Trace, TrackerOptions};

const TOOL: &str = concat!("rvcsim ", env!("CARGO_PKG_VERSION"));

const EXIT_VALIDATION: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_INSECURE: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "rvcsim", version, about = "RowHammer tracker simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct GlobalArgs {
    /// Flat key = value configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    trh: Option<u64>,
    #[arg(long, global = true)]
    blast_radius: Option<u32>,
    #[arg(long, global = true)]
    window_acts: Option<u64>,
    #[arg(long, global = true)]
    rows_per_bank: Option<u32>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    retrigger: Option<RetriggerArg>,
    /// Replace the derived tracking threshold (non-standard, may be insecure).
    #[arg(long, global = true)]
    threshold_override: Option<u64>,
    #[arg(long, global = true, value_enum)]
    phase_model: Option<PhaseArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    e_act: Option<Energy>,
    #[arg(long, global = true)]
    e_row_refresh: Option<Energy>,
    #[arg(long, global = true)]
    e_mitigation_cmd: Option<Energy>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Aggressor,
    Rvc,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RetriggerArg {
    Reset,
    Multiples,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PhaseArg {
    Epoch,
    Staggered,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Suite {
    Adversarial,
    InsecureWitness,
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq, Eq)]
enum FamilyArg {
    Adversarial,
    CommonVictim,
    Decoy,
    Golden,
    Zipf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated trace.
    Gen {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Run one tracker over trace files.
    Run {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Mitigation log CSV.
        #[arg(long)]
        action_log: Option<PathBuf>,
        /// Oracle flip report CSV.
        #[arg(long)]
        flip_report: Option<PathBuf>,
    },
    /// Run both trackers over trace files and report the improvement.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Compare both trackers over a grid of t_rh and blast radius values.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [100u64, 500, 1000, 5000])]
        trh_list: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 4, 8])]
        n_list: Vec<u32>,
        #[arg(long, value_delimiter = ',', value_enum, default_values_t = [FamilyArg::Adversarial, FamilyArg::Golden])]
        families: Vec<FamilyArg>,
        /// Activations per Zipf trace.
        #[arg(long, default_value_t = 100_000)]
        zipf_len: u64,
    },
    /// Check the security contract; exit 0 iff the suite's expectation holds.
    Verify {
        #[arg(long, value_enum, default_value = "adversarial")]
        suite: Suite,
        /// Flip report CSV.
        #[arg(long)]
        flip_report: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum Generator {
    SingleSided {
        #[arg(long)]
        row: u32,
        #[arg(long)]
        count: u64,
    },
    DoubleSided {
        #[arg(long)]
        victim: u32,
        #[arg(long)]
        count: u64,
    },
    ManySided {
        #[arg(long)]
        first: u32,
        #[arg(long)]
        sides: u32,
        #[arg(long, default_value_t = 2)]
        spacing: u32,
        #[arg(long)]
        count: u64,
    },
    CommonVictim {
        #[arg(long)]
        victim: u32,
        /// Activations per neighbour.
        #[arg(long)]
        count: u64,
    },
    Decoy {
        #[arg(long)]
        row: u32,
        #[arg(long)]
        lead: u64,
        #[arg(long)]
        tail: u64,
    },
    Straddle {
        #[arg(long)]
        victim: u32,
        /// Defaults to the derived threshold of the selected mode.
        #[arg(long)]
        threshold: Option<u64>,
    },
    StraddleCommonVictim {
        #[arg(long)]
        victim: u32,
        #[arg(long)]
        count: u64,
    },
    SharedVictims {
        #[arg(long)]
        first: u32,
        #[arg(long)]
        count: u64,
    },
    RecentlyAccessed {
        #[arg(long)]
        row: u32,
        #[arg(long)]
        count: u64,
    },
    Zipf {
        #[arg(long = "len")]
        length: u64,
        /// H, M or L; ignored when --skew is given.
        #[arg(long, default_value = "M")]
        preset: String,
        #[arg(long)]
        skew: Option<f64>,
        #[arg(long)]
        working_set: Option<u32>,
    },
}

/// Fully merged configuration for one invocation.
struct Resolved {
    settings: Settings,
    dram: DramConfig,
    energy: EnergyModel,
    mode: Mode,
    retrigger: RetriggerPolicy,
    out: Option<PathBuf>,
}

impl Resolved {
    fn from_args(g: &GlobalArgs) -> rvc_core::Result<Self> {
        let file = match &g.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let flags = Settings {
            rows_per_bank: g.rows_per_bank,
            t_rh: g.trh,
            blast_radius: g.blast_radius,
            window_acts: g.window_acts,
            phase_model: g.phase_model.map(|p| match p {
                PhaseArg::Epoch => PhaseModel::EpochBoundary,
                PhaseArg::Staggered => PhaseModel::Staggered,
            }),
            e_act: g.e_act,
            e_row_refresh: g.e_row_refresh,
            e_mitigation_cmd: g.e_mitigation_cmd,
            mode: g.mode.map(|m| match m {
                ModeArg::Aggressor => Mode::Aggressor,
                ModeArg::Rvc => Mode::Rvc,
            }),
            retrigger: g.retrigger.map(|r| match r {
                RetriggerArg::Reset => RetriggerPolicy::Reset,
                RetriggerArg::Multiples => RetriggerPolicy::Multiples,
            }),
            threshold_override: g.threshold_override,
            seed: g.seed,
        };
        let settings = file.overlay(&flags);
        let dram = settings.dram()?;
        if let Some(t) = settings.threshold_override {
            warn!("NON-STANDARD: threshold_override = {t} replaces the derived tracking threshold");
        }
        Ok(Resolved {
            energy: settings.energy(),
            mode: settings.mode.unwrap_or(Mode::Rvc),
            retrigger: settings.retrigger.unwrap_or_default(),
            out: g.out.clone(),
            dram,
            settings,
        })
    }

    fn tracker_options(&self) -> TrackerOptions {
        TrackerOptions {
            retrigger: self.retrigger,
            threshold_override: self.settings.threshold_override,
        }
    }

    /// The override applies to the tracker named by `mode` only.
    fn compare_options(&self) -> CompareOptions {
        let t = self.settings.threshold_override;
        CompareOptions {
            retrigger: self.retrigger,
            aggressor_threshold: t.filter(|_| self.mode == Mode::Aggressor),
            rvc_threshold: t.filter(|_| self.mode == Mode::Rvc),
        }
    }

    fn preamble(&self, command: &str) -> rvc_core::Result<Vec<String>> {
        let mut lines = vec![format!("tool: {TOOL}"), format!("command: {command}")];
        for l in self.settings.render_resolved()?.lines() {
            lines.push(format!("config: {l}"));
        }
        if let Some(t) = self.settings.threshold_override {
            lines.push(format!("NON-STANDARD threshold_override = {t}"));
        }
        Ok(lines)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("writing to standard output")?,
    }
    Ok(())
}

fn trace_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_traces(paths: &[PathBuf], cfg: &DramConfig) -> rvc_core::Result<Vec<(String, Trace)>> {
    paths
        .iter()
        .map(|p| Ok((trace_name(p), workloads::read_trace(p, cfg)?)))
        .collect()
}

fn generate(r: &Resolved, g: &Generator) -> rvc_core::Result<Trace> {
    let cfg = &r.dram;
    match *g {
        Generator::SingleSided { row, count } => workloads::gen_single_sided(Row(row), count, cfg),
        Generator::DoubleSided { victim, count } => workloads::gen_double_sided(Row(victim), count, cfg),
        Generator::ManySided {
            first,
            sides,
            spacing,
            count,
        } => workloads::gen_many_sided(Row(first), sides, spacing, count, cfg),
        Generator::CommonVictim { victim, count } => workloads::gen_common_victim(Row(victim), count, cfg),
        Generator::Decoy { row, lead, tail } => workloads::gen_decoy(Row(row), lead, tail, cfg),
        Generator::Straddle { victim, threshold } => {
            let t = match threshold.or(r.settings.threshold_override) {
                Some(t) => t,
                None => r.mode.derived_threshold(cfg)?,
            };
            workloads::gen_straddle(Row(victim), t, cfg)
        }
        Generator::StraddleCommonVictim { victim, count } => {
            workloads::gen_straddle_common_victim(Row(victim), count, cfg)
        }
        Generator::SharedVictims { first, count } => workloads::gen_shared_victims(Row(first), count, cfg),
        Generator::RecentlyAccessed { row, count } => workloads::gen_recently_accessed(Row(row), count, cfg),
        Generator::Zipf {
            length,
            ref preset,
            skew,
            working_set,
        } => {
            let seed = r.settings.seed.unwrap_or(0);
            let p = ZipfPreset::by_label(preset)
                .ok_or_else(|| Error::Config(format!("unknown zipf preset '{preset}'")))?;
            match (skew, working_set) {
                (None, None) => p.generate(seed, length, cfg),
                (s, ws) => workloads::gen_benign_zipf(
                    seed,
                    length,
                    s.unwrap_or(p.skew),
                    ws.unwrap_or(p.working_set.min(cfg.rows_per_bank())),
                    cfg,
                ),
            }
        }
    }
}

fn print_summary(rows: &[(String, &rvc_core::RunReport)]) {
    println!(
        "{:<28} {:>9} {:>10} {:>12} {:>12} {:>6}",
        "trace", "mode", "acts", "mitigations", "refreshes", "flips"
    );
    for (name, r) in rows {
        println!(
            "{:<28} {:>9} {:>10} {:>12} {:>12} {:>6}",
            name,
            r.mode.as_str(),
            r.acts,
            r.mitigations_issued,
            r.rows_refreshed,
            r.flips.len()
        );
    }
}

fn execute(cli: &Cli) -> Result<u8> {
    let r = Resolved::from_args(&cli.global)?;
    info!("resolved config: {}; {}", r.dram.summary(), r.energy.summary());
    let out = r.out.as_deref();
    match &cli.command {
        Command::Gen { generator } => {
            let mut trace = generate(&r, generator)?;
            trace.meta.config = r.dram.summary();
            write_output(out, &workloads::render_trace(&trace, TOOL))?;
        }
        Command::Run {
            traces,
            action_log,
            flip_report,
        } => {
            let traces = load_traces(traces, &r.dram)?;
            let preamble = r.preamble("run")?;
            let mut runs = Vec::new();
            for (name, trace) in &traces {
                runs.push((name.clone(), harness::run(&r.dram, r.mode, trace, &r.energy, r.tracker_options())?));
            }
            write_output(out, &report::runs_csv(&preamble, &r.dram, &runs))?;
            if let Some(p) = action_log {
                write_output(Some(p), &report::action_log_csv(&preamble, &runs))?;
            }
            if let Some(p) = flip_report {
                let flips: Vec<_> = runs.iter().map(|(n, r)| (n.clone(), &r.flips[..])).collect();
                write_output(Some(p), &report::flips_csv(&preamble, &flips))?;
            }
            if out.is_some() {
                print_summary(&runs.iter().map(|(n, r)| (n.clone(), r)).collect::<Vec<_>>());
            }
        }
        Command::Compare { traces } => {
            let traces = load_traces(traces, &r.dram)?;
            let c = harness::compare(&r.dram, &traces, &r.energy, r.compare_options())?;
            write_output(out, &report::comparison_csv(&r.preamble("compare")?, &c))?;
            if out.is_some() {
                let rows: Vec<_> = c
                    .traces
                    .iter()
                    .flat_map(|t| [(t.trace.clone(), &t.baseline), (t.trace.clone(), &t.rvc)])
                    .collect();
                print_summary(&rows);
                println!("mean refresh reduction: {}%", c.mean.refreshes);
            }
        }
        Command::Sweep {
            trh_list,
            n_list,
            families,
            zipf_len,
        } => {
            let seed = r.settings.seed.unwrap_or(0);
            let spec = SweepSpec {
                t_rh: trh_list.clone(),
                blast_radius: n_list.clone(),
                rows_per_bank: r.dram.rows_per_bank(),
                window_acts: r.dram.window_acts(),
                phase_model: r.dram.phase_model(),
                families: families
                    .iter()
                    .map(|f| match f {
                        FamilyArg::Adversarial => TraceFamily::Adversarial,
                        FamilyArg::CommonVictim => TraceFamily::CommonVictim,
                        FamilyArg::Decoy => TraceFamily::Decoy,
                        FamilyArg::Golden => TraceFamily::Golden,
                        FamilyArg::Zipf => TraceFamily::Zipf {
                            seed,
                            length: *zipf_len,
                        },
                    })
                    .collect(),
                options: r.compare_options(),
            };
            let s = harness::sweep(&spec, &r.energy);
            let mut preamble = r.preamble("sweep")?;
            preamble.push(format!(
                "sweep: trh={:?} n={:?} families={:?} zipf_len={zipf_len}",
                trh_list, n_list, families
            ));
            write_output(out, &report::sweep_csv(&preamble, &s))?;
            if out.is_some() {
                for cell in &s.cells {
                    println!(
                        "trh={:<6} n={:<2} mean refresh reduction {}%",
                        cell.t_rh, cell.blast_radius, cell.report.mean.refreshes
                    );
                }
                for (t, n, reason) in &s.skipped {
                    println!("trh={t:<6} n={n:<2} skipped: {reason}");
                }
            }
        }
        Command::Verify { suite, flip_report } => {
            let preamble = r.preamble("verify")?;
            return match suite {
                Suite::Adversarial => {
                    let mut runs = Vec::new();
                    for (name, trace) in workloads::adversarial_suite(&r.dram)? {
                        let run = harness::run(&r.dram, r.mode, &trace, &r.energy, r.tracker_options())?;
                        runs.push((name, run));
                    }
                    let flips: Vec<_> = runs.iter().map(|(n, r)| (n.clone(), &r.flips[..])).collect();
                    write_output(out, &report::runs_csv(&preamble, &r.dram, &runs))?;
                    if let Some(p) = flip_report {
                        write_output(Some(p), &report::flips_csv(&preamble, &flips))?;
                    }
                    for (name, run) in &runs {
                        if !run.is_secure() {
                            eprintln!("INSECURE: {name} flipped {} row(s)", run.flips.len());
                        }
                    }
                    if runs.iter().all(|(_, run)| run.is_secure()) {
                        eprintln!("SECURE: {} adversarial traces, zero flips", runs.len());
                        Ok(0)
                    } else {
                        Ok(EXIT_INSECURE)
                    }
                }
                Suite::InsecureWitness => {
                    match harness::insecure_threshold_witness(&r.dram, &r.energy, r.retrigger)? {
                        Some(w) => {
                            let mut pre = preamble;
                            pre.push(format!(
                                "witness: aggressor tracker with T = {} on common-victim, {} acts per neighbour",
                                w.threshold, w.per_row_count
                            ));
                            let text = report::flips_csv(&pre, &[("common-victim".to_string(), &w.report.flips[..])]);
                            write_output(flip_report.as_deref().or(out), &text)?;
                            for f in &w.report.flips {
                                eprintln!("flip: row {} at act {}", f.row, f.act_seq);
                            }
                            Ok(0)
                        }
                        None => {
                            eprintln!("no flip found: the witness demonstration failed");
                            Ok(EXIT_INSECURE)
                        }
                    }
                }
            };
        }
    }
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. }) => EXIT_IO,
        Some(_) => EXIT_VALIDATION,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_IO,
        None => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
