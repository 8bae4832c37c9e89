use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pdtn::{
    bellman_ford, load_network, plan, simulate_routed, simulate_scheme, DeliveryCondition,
    DeliveryScheme, Network, NodeId, PlanOptions, RouteOptions, SimulationOptions, WaitPolicy,
};

const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

const EXIT_INVALID: u8 = 2;
const EXIT_UNSATISFIED: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "pdtn", version, about = "Delivery-delay analysis for scheduled DTN contacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the delivery distribution of one pair as CSV (T,t,mass).
    Derive {
        network: PathBuf,
        /// Pair as `a,b`.
        #[arg(long)]
        pair: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute routing tables towards a destination.
    Route {
        network: PathBuf,
        #[arg(long)]
        dest: String,
        /// Also summarise the delivery distribution from this node.
        #[arg(long)]
        source: Option<String>,
        /// Node visiting order, comma separated.
        #[arg(long)]
        order: Option<String>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Write the intervals as CSV (node,start_bin,end_bin,next_hop).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Find a set of disjoint copies meeting a delivery condition.
    Plan {
        network: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long)]
        dest: String,
        /// e.g. `P(2)>=0.9 & E<=3`; deadlines may use units (`P(36h)>=0.9`).
        #[arg(long)]
        condition: String,
        /// Relays whose expected visits stay at or below this are not removed.
        #[arg(long)]
        threshold: Option<f64>,
        /// Send bins to check, e.g. `Mon`, `0-3` or `Mon-Wed`.
        #[arg(long)]
        send_window: Option<String>,
        #[arg(long)]
        max_copies: Option<usize>,
    },
    /// Sample contacts and compare with the analytic distribution.
    Simulate {
        network: PathBuf,
        #[arg(long, conflicts_with_all = ["source", "dest"])]
        scheme_file: Option<PathBuf>,
        #[arg(long, requires = "dest")]
        source: Option<String>,
        #[arg(long, requires = "source")]
        dest: Option<String>,
        #[arg(long, default_value = "0")]
        send_bin: String,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value_t = Wait::Commit)]
        wait: Wait,
        /// Print the full report as JSON instead of the CSV table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Wait {
    Commit,
    Reconsult,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Derive { network, pair, out } => derive(&network, &pair, out.as_deref()),
        Command::Route {
            network,
            dest,
            source,
            order,
            max_iterations,
            csv,
        } => route(&network, &dest, source.as_deref(), order.as_deref(), max_iterations, csv.as_deref()),
        Command::Plan {
            network,
            source,
            dest,
            condition,
            threshold,
            send_window,
            max_copies,
        } => {
            let net = load(&network)?;
            let condition = parse_condition_with_units(&condition, &net)?;
            let send_window = send_window
                .map(|w| parse_window(&w, &net))
                .transpose()?;
            let opts = PlanOptions {
                send_window,
                visit_threshold: threshold.unwrap_or(0.0),
                max_copies,
                hop_limit: None,
            };
            let p = plan(&net, &source, &dest, &condition, &opts)?;
            println!("{}", serde_json::to_string_pretty(&p)?);
            eprintln!("satisfied: {}, copies: {}", p.satisfied, p.copies());
            Ok(if p.satisfied { 0 } else { EXIT_UNSATISFIED })
        }
        Command::Simulate {
            network,
            scheme_file,
            source,
            dest,
            send_bin,
            samples,
            seed,
            threads,
            wait,
            json,
        } => {
            let net = load(&network)?;
            let send = parse_bin(&send_bin, &net)?;
            let opts = SimulationOptions {
                samples,
                seed,
                threads,
                wait: match wait {
                    Wait::Commit => WaitPolicy::Commit,
                    Wait::Reconsult => WaitPolicy::Reconsult,
                },
            };
            let report = match (scheme_file, source, dest) {
                (Some(path), _, _) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let scheme = DeliveryScheme::from_json_str(&text)?;
                    simulate_scheme(&net, &scheme, send, &opts)?
                }
                (None, Some(source), Some(dest)) => {
                    let state = bellman_ford(&net, &dest, &RouteOptions::default())?;
                    simulate_routed(&net, &state, &source, send, net.len(), &opts)?
                }
                _ => bail!("give either --scheme-file or --source and --dest"),
            };
            if json {
                println!("{}", report.to_json()?);
            } else {
                print!("{}", report.to_csv());
            }
            eprintln!(
                "delivered {:.6} of {} samples, max CDF gap {:.6}",
                report.delivery_ratio(),
                report.samples,
                report.cdf_deviation()
            );
            let visits = report.visit_counts();
            if !visits.is_empty() {
                let line: Vec<String> = visits
                    .iter()
                    .map(|(n, c)| format!("{n}={:.6}", *c as f64 / report.samples as f64))
                    .collect();
                eprintln!("visits: {}", line.join(" "));
            }
            Ok(0)
        }
    }
}

fn load(path: &Path) -> Result<Network> {
    load_network(path).with_context(|| format!("loading {}", path.display()))
}

fn derive(network: &Path, pair: &str, out: Option<&Path>) -> Result<u8> {
    let net = load(network)?;
    let (a, b) = pair
        .split_once(',')
        .ok_or_else(|| anyhow!("--pair expects `a,b`, got `{pair}`"))?;
    let d = net.delivery_by_label(a.trim(), b.trim())?;
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["T", "t", "mass"])?;
    for send in 0..net.horizon() {
        for (t, m) in d.row(send).iter().enumerate() {
            w.write_record([send.to_string(), t.to_string(), m.to_string()])?;
        }
    }
    w.flush()?;
    Ok(0)
}

fn route(
    network: &Path,
    dest: &str,
    source: Option<&str>,
    order: Option<&str>,
    max_iterations: Option<usize>,
    csv: Option<&Path>,
) -> Result<u8> {
    let net = load(network)?;
    let order = order
        .map(|o| o.split(',').map(|l| NodeId::new(l.trim())).collect::<pdtn::Result<Vec<_>>>())
        .transpose()?;
    let opts = RouteOptions {
        order,
        max_iterations,
        ..Default::default()
    };
    let state = bellman_ford(&net, dest, &opts)?;
    if let Some(path) = csv {
        fs::write(path, state.to_csv())?;
    }
    let mut out = io::stdout().lock();
    for (x, node) in net.nodes().iter().enumerate() {
        let parts: Vec<String> = state
            .intervals(x)
            .iter()
            .map(|iv| {
                let span = bin_span(&net, iv.start, iv.end);
                match iv.next_hop {
                    Some(h) if h == x => format!("{span} destination"),
                    Some(h) => format!("{span} -> {}", net.node(h)),
                    None => format!("{span} no route"),
                }
            })
            .collect();
        writeln!(out, "{node}: {}", parts.join(", "))?;
    }
    if let Some(source) = source {
        let s = net.index_of(source)?;
        writeln!(out, "from {source}:")?;
        for send in 0..net.horizon() {
            let row = state.best(s).row(send);
            let total: f64 = row.iter().sum();
            let mean = if total > 0.0 {
                row.iter().enumerate().map(|(t, m)| t as f64 * m).sum::<f64>() / total
            } else {
                f64::NAN
            };
            writeln!(
                out,
                "  send {}: delivery {total:.6}, mean delay if delivered {mean:.3}",
                bin_label(&net, send)
            )?;
        }
    }
    writeln!(
        out,
        "{} sweeps, {}",
        state.iterations(),
        if state.converged() { "converged" } else { "not converged" }
    )?;
    Ok(if state.converged() { 0 } else { EXIT_NOT_CONVERGED })
}

fn weekly(net: &Network) -> bool {
    net.default_period() == Some(7)
}

fn bin_label(net: &Network, bin: usize) -> String {
    if weekly(net) {
        DAYS[bin % 7].to_string()
    } else {
        bin.to_string()
    }
}

fn bin_span(net: &Network, start: usize, end: usize) -> String {
    if start == end {
        bin_label(net, start)
    } else {
        format!("{}-{}", bin_label(net, start), bin_label(net, end))
    }
}

/// An integer bin, or a day name when the network has a weekly period.
fn parse_bin(text: &str, net: &Network) -> Result<usize> {
    let text = text.trim();
    let bin = match text.parse::<usize>() {
        Ok(b) => b,
        Err(_) if weekly(net) => DAYS
            .iter()
            .position(|d| d.eq_ignore_ascii_case(text))
            .ok_or_else(|| anyhow!("unknown day `{text}`"))?,
        Err(_) => bail!("expected a bin number, got `{text}`"),
    };
    if bin >= net.horizon() {
        bail!("bin {bin} is outside the horizon of {} bins", net.horizon());
    }
    Ok(bin)
}

/// `X` or an inclusive `X-Y`, returned as a half-open range.
fn parse_window(text: &str, net: &Network) -> Result<std::ops::Range<usize>> {
    let (a, b) = text.split_once('-').unwrap_or((text, text));
    let (a, b) = (parse_bin(a, net)?, parse_bin(b, net)?);
    if b < a {
        bail!("empty send window `{text}`");
    }
    Ok(a..b + 1)
}

/// Rewrites deadlines given with a unit (`s`, `m`, `h`, `d`) into bins: a
/// deadline of `dur` means "delivered before `dur` has elapsed", which is
/// bin `floor(dur / step) - 1`.
fn parse_condition_with_units(text: &str, net: &Network) -> Result<DeliveryCondition> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find("P(") {
        out.push_str(&rest[..i + 2]);
        rest = &rest[i + 2..];
        let close = rest.find(')').ok_or_else(|| anyhow!("unclosed `P(` in `{text}`"))?;
        let inner = rest[..close].trim();
        let unit = inner.chars().last().filter(|c| "smhd".contains(*c));
        match unit {
            Some(u) => {
                let step = net
                    .grid()
                    .step_duration()
                    .ok_or_else(|| anyhow!("the network has no step duration, use bin numbers"))?;
                let value: f64 = inner[..inner.len() - 1]
                    .trim()
                    .parse()
                    .with_context(|| format!("bad duration `{inner}`"))?;
                let seconds = value
                    * match u {
                        's' => 1.0,
                        'm' => 60.0,
                        'h' => 3_600.0,
                        _ => 86_400.0,
                    };
                let bins = (seconds / step).floor() as i64 - 1;
                if bins < 0 {
                    bail!("duration `{inner}` is shorter than one time step");
                }
                out.push_str(&bins.to_string());
            }
            None => out.push_str(inner),
        }
        rest = &rest[close..];
    }
    out.push_str(rest);
    pdtn::parse_condition(&out).map_err(|e| anyhow!("condition `{text}`: {e}"))
}
