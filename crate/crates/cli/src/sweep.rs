//! `sweep`: run a subcommand over the cartesian product of flag values.

use ballrecycle::par::{self, Execution};
use clap::Parser;

use crate::cli::{Cli, Command, SweepArgs};
use crate::commands::static_header;
use crate::error::CliError;
use crate::output::{Report, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub flag: String,
    pub values: Vec<String>,
}

fn split_spec(spec: &str) -> Result<(&str, &str), CliError> {
    let (flag, rest) = spec
        .split_once('=')
        .ok_or_else(|| CliError::bad_args(format!("expected flag=values, got {spec:?}")))?;
    let flag = flag.trim_start_matches('-');
    if flag.is_empty() {
        return Err(CliError::bad_args(format!("missing flag name in {spec:?}")));
    }
    Ok((flag, rest))
}

/// `flag=start:end:step`, inclusive of `end`. Integer when all three parse
/// as integers.
pub fn parse_range(spec: &str) -> Result<Axis, CliError> {
    let (flag, rest) = split_spec(spec)?;
    let parts: Vec<&str> = rest.split(':').collect();
    let [a, b, step] = parts[..] else {
        return Err(CliError::bad_args(format!("expected start:end:step in {spec:?}")));
    };
    let values = match (a.parse::<i64>(), b.parse::<i64>(), step.parse::<i64>()) {
        (Ok(a), Ok(b), Ok(step)) => {
            if step <= 0 {
                return Err(CliError::bad_args(format!("step must be positive in {spec:?}")));
            }
            let mut v = Vec::new();
            let mut x = a;
            while x <= b {
                v.push(x.to_string());
                x += step;
            }
            v
        }
        _ => {
            let parse = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::bad_args(format!("bad number {s:?} in {spec:?}")))
            };
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if step <= 0.0 {
                return Err(CliError::bad_args(format!("step must be positive in {spec:?}")));
            }
            if b < a {
                Vec::new()
            } else {
                let count = ((b - a) / step + 1e-9).floor() as usize + 1;
                (0..count)
                    .map(|i| {
                        // Round off accumulated binary error, e.g. 0.30000000000000004.
                        let v = a + i as f64 * step;
                        let v = (v * 1e12).round() / 1e12;
                        format!("{v}")
                    })
                    .collect()
            }
        }
    };
    Ok(Axis {
        flag: flag.to_string(),
        values,
    })
}

/// `flag=v1,v2,...`.
pub fn parse_list(spec: &str) -> Result<Axis, CliError> {
    let (flag, rest) = split_spec(spec)?;
    let values: Vec<String> = rest.split(',').filter(|v| !v.is_empty()).map(str::to_string).collect();
    Ok(Axis {
        flag: flag.to_string(),
        values,
    })
}

/// Every combination of axis values; the first axis varies slowest.
pub fn grid(axes: &[Axis]) -> Vec<Vec<String>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for p in &points {
            for v in &axis.values {
                let mut q: Vec<String> = p.clone();
                q.push(v.clone());
                next.push(q);
            }
        }
        points = next;
    }
    points
}

/// Drops every occurrence of `flag` (and its value) from `args`.
fn strip_flag(args: &[String], flag: &str) -> Vec<String> {
    let long = format!("--{flag}");
    let long_eq = format!("--{flag}=");
    let short = (flag.chars().count() == 1).then(|| format!("-{flag}"));
    let mut out = Vec::with_capacity(args.len());
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if *a == long || short.as_deref() == Some(a.as_str()) {
            i += 2;
            continue;
        }
        if a.starts_with(&long_eq) {
            i += 1;
            continue;
        }
        out.push(a.clone());
        i += 1;
    }
    out
}

fn point_args(base: &[String], axes: &[Axis], values: &[String]) -> Vec<String> {
    let mut args = base.to_vec();
    for axis in axes {
        args = strip_flag(&args, &axis.flag);
    }
    for (axis, v) in axes.iter().zip(values) {
        args.push(format!("--{}", axis.flag));
        args.push(v.clone());
    }
    args
}

fn check_nested(cmd: &Command) -> Result<(), CliError> {
    let side = match cmd {
        Command::Sweep(_) | Command::Plot(_) => {
            return Err(CliError::bad_args(format!("cannot sweep {}", cmd.name())));
        }
        Command::Simulate(a) => a.out.out.is_some() || a.per_bin.is_some(),
        Command::Exact(a) => a.out.out.is_some() || a.pi_out.is_some(),
        Command::Opt(a) => a.out.out.is_some() || a.policy_out.is_some(),
        Command::Bounds(a) => a.out.out.is_some() || a.table,
        Command::Btree(a) => a.out.out.is_some(),
    };
    if side {
        return Err(CliError::bad_args(
            "swept subcommands write only to the sweep's output; drop --out, --per-bin, --pi-out, --policy-out and --table",
        ));
    }
    Ok(())
}

fn run_point(sub: &str, args: Vec<String>) -> Result<Report, CliError> {
    let argv = ["ballrecycle".to_string(), sub.to_string()].into_iter().chain(args);
    let cli = Cli::try_parse_from(argv).map_err(|e| crate::clap_error(&e))?;
    check_nested(&cli.command)?;
    crate::report_for(&cli.command)
}

pub fn run(args: &SweepArgs) -> Result<Report, CliError> {
    let (sub, base) = args
        .command
        .split_first()
        .ok_or_else(|| CliError::bad_args("sweep needs a subcommand after --"))?;
    let header = static_header(sub).ok_or_else(|| CliError::bad_args(format!("cannot sweep {sub:?}")))?;
    let mut axes = Vec::new();
    for spec in &args.range {
        axes.push(parse_range(spec)?);
    }
    for spec in &args.list {
        axes.push(parse_list(spec)?);
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(a) = axes.iter().find(|a| !seen.insert(a.flag.clone())) {
        return Err(CliError::bad_args(format!("flag {} swept twice", a.flag)));
    }
    let points = grid(&axes);

    let results = par::with_jobs(args.jobs, || {
        par::map(Execution::Parallel, &points, |values| run_point(sub, point_args(base, &axes, values)))
    });

    let mut table = Table {
        header: axes.iter().map(|a| a.flag.clone()).chain(header.iter().map(|h| h.to_string())).collect(),
        rows: Vec::new(),
    };
    let mut report = Report::default();
    for (values, result) in points.iter().zip(results) {
        let inner = result?;
        for row in inner.table.rows {
            table.rows.push(values.iter().cloned().chain(row).collect());
        }
        for s in inner.seeds {
            if !report.seeds.contains(&s) {
                report.seeds.push(s);
            }
        }
        let label: Vec<String> = axes.iter().zip(values).map(|(a, v)| format!("{}={v}", a.flag)).collect();
        for w in inner.warnings {
            report.warnings.push(format!("[{}] {w}", label.join(" ")));
        }
    }
    report.table = table;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("m=2:10:4").unwrap().values, s(&["2", "6", "10"]));
        assert_eq!(parse_range("--m=5:4:1").unwrap().values, Vec::<String>::new());
        assert_eq!(parse_range("x=0.1:0.3:0.1").unwrap().values, s(&["0.1", "0.2", "0.3"]));
        assert!(parse_range("m=1:5:0").is_err());
        assert!(parse_range("m=1:5").is_err());
        assert!(parse_range("1:5:1").is_err());
        assert_eq!(parse_list("strategy=a,b").unwrap().values, s(&["a", "b"]));
    }

    #[test]
    fn grid_order_and_stripping() {
        let axes = vec![
            Axis { flag: "m".into(), values: s(&["1", "2"]) },
            Axis { flag: "seed".into(), values: s(&["7", "8"]) },
        ];
        assert_eq!(grid(&axes), vec![s(&["1", "7"]), s(&["1", "8"]), s(&["2", "7"]), s(&["2", "8"])]);
        let base = s(&["-m", "5", "--seed=3", "--n", "4"]);
        assert_eq!(point_args(&base, &axes, &s(&["1", "7"])), s(&["--n", "4", "--m", "1", "--seed", "7"]));
    }
}
