//! specflow: nonlinear spectral decompositions from the command line.
//!
//! Subcommands: decompose, verify, extinction, filter, gallery. See
//! `specflow --help`. Exit codes: 0 ok, 1 usage error, 2 numerical
//! abort, 3 verification failure.

mod cmds;
mod logging;

use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

const USAGE: &str = "\
specflow <command> [options]

Commands:
  decompose   run the gradient flow; write trajectory.json and spectrum.json
  verify      check the decomposition theorems on one run; write verify.json
  extinction  extinction time, bounds and profile; write extinction.json
  filter      band-pass the spectral decomposition; write filtered CSV
  gallery     write a named example signal and functional descriptor

Options:
  --functional <file>   JSON functional descriptor
  --input <file|dir>    signal CSV/JSON, or a directory of signals
  --out <dir>           output directory (default .)
  --band <lo,hi>        frequency band for `filter`
  --tol <x>             verification tolerance (default 1e-8)
  --workers <k>         parallel workers for directory input (default 1)
  --seed <s>            seed for randomized gallery fixtures (default 7)

Gallery names: tv-step4, l1-spike, linf-pair, tv-two-scale, minsub-random,
bf-hat. Set SPECFLOW_LOG=info or =debug for progress output.
";

#[derive(Debug, Clone)]
pub struct Options {
    pub command: String,
    pub gallery_name: Option<String>,
    pub functional: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub band: Option<(f64, f64)>,
    pub tol: f64,
    pub workers: usize,
    pub seed: u64,
}

fn parse_args(args: &[String]) -> Result<Options, String> {
    if args.is_empty() {
        return Err("missing command".into());
    }
    let command = args[0].clone();
    let known = ["decompose", "verify", "extinction", "filter", "gallery"];
    if !known.contains(&command.as_str()) {
        return Err(format!("unknown command \"{command}\""));
    }
    let mut opts = Options {
        command,
        gallery_name: None,
        functional: None,
        input: None,
        out: PathBuf::from("."),
        band: None,
        tol: 1e-8,
        workers: 1,
        seed: 7,
    };
    let mut i = 1;
    while i < args.len() {
        let arg = &args[i];
        let mut value = |name: &str| -> Result<String, String> {
            i += 1;
            args.get(i).cloned().ok_or_else(|| format!("{name} needs a value"))
        };
        match arg.as_str() {
            "--functional" => opts.functional = Some(PathBuf::from(value("--functional")?)),
            "--input" => opts.input = Some(PathBuf::from(value("--input")?)),
            "--out" => opts.out = PathBuf::from(value("--out")?),
            "--band" => {
                let v = value("--band")?;
                let parts: Vec<&str> = v.split(',').collect();
                if parts.len() != 2 {
                    return Err("--band expects lo,hi".into());
                }
                let lo: f64 = parts[0].trim().parse().map_err(|_| "bad band lower bound".to_string())?;
                let hi: f64 = parts[1].trim().parse().map_err(|_| "bad band upper bound".to_string())?;
                opts.band = Some((lo, hi));
            }
            "--tol" => opts.tol = value("--tol")?.parse().map_err(|_| "bad --tol".to_string())?,
            "--workers" => {
                opts.workers = value("--workers")?.parse().map_err(|_| "bad --workers".to_string())?;
                if opts.workers == 0 {
                    return Err("--workers must be positive".into());
                }
            }
            "--seed" => opts.seed = value("--seed")?.parse().map_err(|_| "bad --seed".to_string())?,
            other if !other.starts_with('-') && opts.command == "gallery" && opts.gallery_name.is_none() => {
                opts.gallery_name = Some(other.to_string());
            }
            other => return Err(format!("unexpected argument \"{other}\"")),
        }
        i += 1;
    }
    if opts.tol <= 0.0 {
        return Err("--tol must be positive".into());
    }
    Ok(opts)
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        print!("{USAGE}");
        std::process::exit(if args.is_empty() { EXIT_USAGE } else { EXIT_OK });
    }
    let opts = match parse_args(&args) {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            std::process::exit(EXIT_USAGE);
        }
    };
    logging::init();
    let code = match opts.command.as_str() {
        "decompose" => cmds::decompose(&opts),
        "verify" => cmds::verify(&opts),
        "extinction" => cmds::extinction(&opts),
        "filter" => cmds::filter(&opts),
        "gallery" => cmds::gallery(&opts),
        _ => unreachable!(),
    };
    std::process::exit(code);
}
