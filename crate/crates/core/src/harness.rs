//! Repeated-run studies: mean and standard deviation of β̂ and of the
//! sensitivity indices over independent seeds.
//!
//! Run `r` uses seed `base_seed + r` for every sampling plan. Each run draws
//! one batch per plan; all step sizes are then evaluated on that batch.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::sampling::{Method, SamplingPlan};
use crate::sensitivity::reliability_sensitivities;

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub model: Model,
    /// Plan templates; their seeds are replaced per run.
    pub plans: Vec<SamplingPlan>,
    pub delta_vars: Vec<f64>,
    pub runs: usize,
    pub base_seed: u64,
}

impl StudyConfig {
    pub fn seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidPlan("runs must be at least 1".into()));
        }
        if self.plans.is_empty() {
            return Err(Error::InvalidPlan("no sampling plans".into()));
        }
        if self.delta_vars.is_empty() {
            return Err(Error::InvalidPlan("no delta_var values".into()));
        }
        Ok(())
    }
}

/// One run at one step size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub n_samples: usize,
    pub delta_var: f64,
    pub run: usize,
    pub seed: u64,
    #[serde(with = "crate::serde_float")]
    pub beta_hat: f64,
    pub pf_hat: f64,
    pub std_error: f64,
    pub n_failures: usize,
    #[serde(with = "crate::serde_float::vec")]
    pub indices: Vec<f64>,
    pub dpf_dvar: Vec<f64>,
    pub negative_derivative: bool,
}

/// Aggregate over the runs of one (method, N, Δσ²) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method: Method,
    pub n_samples: usize,
    pub delta_var: f64,
    pub runs: usize,
    #[serde(with = "crate::serde_float")]
    pub beta_mean: f64,
    /// `None` for a single run.
    #[serde(with = "crate::serde_float::option")]
    pub beta_std: Option<f64>,
    #[serde(with = "crate::serde_float::vec")]
    pub index_mean: Vec<f64>,
    pub index_std: Option<Vec<f64>>,
    pub pf_mean: f64,
    pub negative_derivative_runs: usize,
}

/// A deterministic comparison row, typically FORM or an analytic solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub label: String,
    pub beta: f64,
    pub indices: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub variables: Vec<String>,
    pub reference: Option<ReferenceRow>,
    pub groups: Vec<GroupSummary>,
    pub records: Vec<RunRecord>,
    pub wall_time_s: f64,
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudySummary> {
    cfg.validate()?;
    let start = Instant::now();
    let jobs: Vec<(usize, usize)> =
        (0..cfg.plans.len()).flat_map(|p| (0..cfg.runs).map(move |r| (p, r))).collect();
    let per_job: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(p, r)| run_one(cfg, p, r).map_err(|e| Error::Run { run: r, source: Box::new(e) }))
        .collect::<Result<_>>()?;

    let records: Vec<RunRecord> = per_job.into_iter().flatten().collect();
    let mut groups = Vec::new();
    for (p, plan) in cfg.plans.iter().enumerate() {
        for (d, &delta_var) in cfg.delta_vars.iter().enumerate() {
            // records are laid out plan-major, then run, then delta
            let group: Vec<&RunRecord> = (0..cfg.runs)
                .map(|r| &records[(p * cfg.runs + r) * cfg.delta_vars.len() + d])
                .collect();
            groups.push(summarize(plan, delta_var, &group, cfg.model.dim()));
        }
    }
    Ok(StudySummary {
        variables: cfg.model.names().to_vec(),
        reference: None,
        groups,
        records,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn run_one(cfg: &StudyConfig, plan: usize, run: usize) -> Result<Vec<RunRecord>> {
    let seed = cfg.seed(run);
    let plan = cfg.plans[plan].with_seed(seed);
    let (batch, estimate) = cfg.model.sample(&plan)?;
    cfg.delta_vars
        .iter()
        .map(|&delta_var| {
            let s = reliability_sensitivities(&batch, delta_var)?;
            Ok(RunRecord {
                method: plan.method,
                n_samples: plan.n_samples,
                delta_var,
                run,
                seed,
                beta_hat: estimate.beta_hat,
                pf_hat: estimate.pf_hat,
                std_error: estimate.std_error,
                n_failures: estimate.n_failures,
                indices: s.indices,
                dpf_dvar: s.dpf_dvar,
                negative_derivative: s.negative_derivative,
            })
        })
        .collect()
}

/// Mean and unbiased (n−1) standard deviation; the latter is `None` for n = 1.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, Some((ss / (n - 1.0)).sqrt()))
}

fn summarize(plan: &SamplingPlan, delta_var: f64, group: &[&RunRecord], m: usize) -> GroupSummary {
    let betas: Vec<f64> = group.iter().map(|r| r.beta_hat).collect();
    let (beta_mean, beta_std) = mean_std(&betas);
    let per_index: Vec<(f64, Option<f64>)> = (0..m)
        .map(|k| mean_std(&group.iter().map(|r| r.indices[k]).collect::<Vec<_>>()))
        .collect();
    let pfs: Vec<f64> = group.iter().map(|r| r.pf_hat).collect();
    GroupSummary {
        method: plan.method,
        n_samples: plan.n_samples,
        delta_var,
        runs: group.len(),
        beta_mean,
        beta_std,
        index_mean: per_index.iter().map(|p| p.0).collect(),
        index_std: per_index.iter().map(|p| p.1).collect(),
        pf_mean: mean_std(&pfs).0,
        negative_derivative_runs: group.iter().filter(|r| r.negative_derivative).count(),
    }
}

/// Six significant digits; shared by the text and CSV writers.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into a new leading digit (9.999995 -> 10.00000)
    let digits = s.trim_start_matches('-').replace('.', "");
    let significant = digits.trim_start_matches('0').len();
    if significant > 6 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn group_title(g: &GroupSummary) -> String {
    let method = match g.method {
        Method::MonteCarlo => "MCS",
        Method::ImportanceSampling => "IS",
    };
    format!("{method}, N = {}, delta_var = {} ({} runs)", g.n_samples, format_sig(g.delta_var), g.runs)
}

impl StudySummary {
    /// Aligned plain-text table: a header, an optional reference row, then a
    /// "Mean values" / "Std deviation" block per group.
    pub fn to_text(&self) -> String {
        let label_width = 16;
        let col = 12;
        let mut out = String::new();
        let mut header = format!("{:label_width$}{:>col$}", "", "beta_hat");
        for name in &self.variables {
            header.push_str(&format!("{:>col$}", format!("S_{name}")));
        }
        let rule = "-".repeat(header.len());
        let row = |label: &str, beta: Option<f64>, values: Option<&[f64]>| {
            let mut line = format!("{label:label_width$}");
            let cell = |v: Option<f64>| v.map_or("-".to_string(), format_sig);
            line.push_str(&format!("{:>col$}", cell(beta)));
            for k in 0..self.variables.len() {
                line.push_str(&format!("{:>col$}", cell(values.map(|v| v[k]))));
            }
            line
        };
        writeln!(out, "{header}").unwrap();
        writeln!(out, "{rule}").unwrap();
        if let Some(r) = &self.reference {
            writeln!(out, "{}", row(&r.label, Some(r.beta), Some(&r.indices))).unwrap();
            writeln!(out, "{rule}").unwrap();
        }
        for g in &self.groups {
            writeln!(out, "{}", group_title(g)).unwrap();
            if g.runs == 1 {
                writeln!(out, "{}", row("Estimate", Some(g.beta_mean), Some(&g.index_mean))).unwrap();
                let pf = &format!("  pf_hat = {}", format_sig(g.pf_mean));
                writeln!(out, "{pf}").unwrap();
            } else {
                writeln!(out, "{}", row("Mean values", Some(g.beta_mean), Some(&g.index_mean))).unwrap();
                writeln!(out, "{}", row("Std deviation", g.beta_std, g.index_std.as_deref())).unwrap();
            }
            if g.negative_derivative_runs > 0 {
                writeln!(out, "  warning: {} run(s) with a negative derivative estimate", g.negative_derivative_runs)
                    .unwrap();
            }
            writeln!(out, "{rule}").unwrap();
        }
        out
    }

    /// CSV with one row per run and step size, followed by `mean` and `std`
    /// rows per group. Columns: `method,N,delta_var,run,beta_hat,S_1..S_m`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let m = self.variables.len();
        let mut header = String::from("method,N,delta_var,run,beta_hat");
        for k in 1..=m {
            header.push_str(&format!(",S_{k}"));
        }
        writeln!(out, "{header}")?;
        let mut line = |method: Method, n: usize, dv: f64, run: &str, beta: Option<f64>, s: Option<&[f64]>| {
            let cell = |v: Option<f64>| v.map_or(String::new(), format_sig);
            let mut l = format!("{},{n},{},{run},{}", method.label(), format_sig(dv), cell(beta));
            for k in 0..m {
                l.push(',');
                l.push_str(&cell(s.map(|s| s[k])));
            }
            writeln!(out, "{l}")
        };
        for r in &self.records {
            line(r.method, r.n_samples, r.delta_var, &r.run.to_string(), Some(r.beta_hat), Some(&r.indices))?;
        }
        for g in &self.groups {
            line(g.method, g.n_samples, g.delta_var, "mean", Some(g.beta_mean), Some(&g.index_mean))?;
            line(g.method, g.n_samples, g.delta_var, "std", g.beta_std, g.index_std.as_deref())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// One JSON object per line: a header line, then every run record, then
    /// every group summary.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = Line::Header {
            variables: self.variables.clone(),
            reference: self.reference.clone(),
            wall_time_s: self.wall_time_s,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for r in &self.records {
            writeln!(out, "{}", serde_json::to_string(&Line::Run(r.clone()))?)?;
        }
        for g in &self.groups {
            writeln!(out, "{}", serde_json::to_string(&Line::Group(g.clone()))?)?;
        }
        Ok(())
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_json_lines(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("UTF-8 output")
    }

    pub fn read_json_lines<R: BufRead>(input: R) -> Result<Self> {
        let mut summary: Option<StudySummary> = None;
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::config(format!("line {}", i + 1), e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|e| Error::config(format!("line {}", i + 1), e.to_string()))?;
            match (parsed, summary.as_mut()) {
                (Line::Header { variables, reference, wall_time_s }, None) => {
                    summary = Some(StudySummary { variables, reference, groups: vec![], records: vec![], wall_time_s })
                }
                (Line::Run(r), Some(s)) => s.records.push(r),
                (Line::Group(g), Some(s)) => s.groups.push(g),
                _ => return Err(Error::config(format!("line {}", i + 1), "expected a single leading header line")),
            }
        }
        summary.ok_or_else(|| Error::config("line 1", "missing header line"))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header { variables: Vec<String>, reference: Option<ReferenceRow>, wall_time_s: f64 },
    Run(RunRecord),
    Group(GroupSummary),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MarginalDistribution;
    use crate::limit_state::LimitState;
    use crate::transform::NatafTransform;

    fn linear_model(b: f64) -> Model {
        let t = NatafTransform::independent(vec![MarginalDistribution::normal(0.0, 1.0).unwrap(); 5]).unwrap();
        let ls = LimitState::linear(b, vec![-0.8, -0.5, -0.3, -0.1, -0.1]).unwrap();
        Model::new((1..=5).map(|i| format!("x{i}")).collect(), t, ls).unwrap()
    }

    fn small_study(runs: usize) -> StudyConfig {
        StudyConfig {
            model: linear_model(2.0),
            plans: vec![SamplingPlan::monte_carlo(500, 0), SamplingPlan::monte_carlo(2000, 0)],
            delta_vars: vec![0.05, 0.1],
            runs,
            base_seed: 40,
        }
    }

    #[test]
    fn mean_std_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s.unwrap() - 1.290_994_448_735_805_6).abs() < 1e-15);
        assert_eq!(mean_std(&[3.0]), (3.0, None));
    }

    #[test]
    fn study_layout_and_seeds() {
        let cfg = small_study(3);
        let s = run_study(&cfg).unwrap();
        assert_eq!(s.records.len(), 2 * 3 * 2);
        assert_eq!(s.groups.len(), 4);
        assert_eq!(s.groups[1].n_samples, 500);
        assert_eq!(s.groups[1].delta_var, 0.1);
        assert_eq!(s.groups[2].n_samples, 2000);
        let seeds: Vec<u64> = s.records.iter().filter(|r| r.n_samples == 500 && r.delta_var == 0.1).map(|r| r.seed).collect();
        assert_eq!(seeds, vec![40, 41, 42]);
        // group means agree with the records they summarize
        let g = &s.groups[3];
        let rs: Vec<f64> =
            s.records.iter().filter(|r| r.n_samples == 2000 && r.delta_var == 0.1).map(|r| r.beta_hat).collect();
        assert_eq!(g.beta_mean, mean_std(&rs).0);
        assert_eq!(g.beta_std, mean_std(&rs).1);
    }

    #[test]
    fn study_is_reproducible() {
        let mut a = run_study(&small_study(4)).unwrap();
        let mut b = run_study(&small_study(4)).unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn single_run_has_no_std() {
        let s = run_study(&small_study(1)).unwrap();
        assert!(s.groups.iter().all(|g| g.beta_std.is_none() && g.index_std.is_none()));
        assert!(s.to_text().contains("Estimate"));
        assert!(s.to_csv().lines().any(|l| l.starts_with("mcs,500,0.0500000,std,,")));
    }

    #[test]
    fn failed_run_is_reported() {
        let mut cfg = small_study(2);
        cfg.model = linear_model(10.0);
        match run_study(&cfg) {
            Err(Error::Run { run, source }) => {
                assert_eq!(run, 0);
                assert_eq!(*source, Error::AllSafe);
            }
            other => panic!("{other:?}"),
        }
        cfg.runs = 0;
        assert!(matches!(run_study(&cfg), Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn json_lines_roundtrip() {
        let mut s = run_study(&small_study(3)).unwrap();
        s.reference = Some(ReferenceRow { label: "Reference".into(), beta: 2.0, indices: vec![0.64, 0.25, 0.09, 0.01, 0.01] });
        let text = s.to_json_lines();
        assert_eq!(text.lines().count(), 1 + s.records.len() + s.groups.len());
        let back = StudySummary::read_json_lines(text.as_bytes()).unwrap();
        assert_eq!(back, s);
        let single = run_study(&small_study(1)).unwrap();
        assert_eq!(StudySummary::read_json_lines(single.to_json_lines().as_bytes()).unwrap(), single);
    }

    #[test]
    fn text_and_csv_share_numbers() {
        let s = run_study(&small_study(3)).unwrap();
        let text = s.to_text();
        let csv = s.to_csv();
        for g in &s.groups {
            let mean_row = csv
                .lines()
                .find(|l| l.starts_with(&format!("mcs,{},{},mean,", g.n_samples, format_sig(g.delta_var))))
                .unwrap();
            let csv_numbers: Vec<&str> = mean_row.split(',').skip(4).collect();
            let title = group_title(g);
            let block = text.split(&title).nth(1).unwrap();
            let text_numbers: Vec<&str> = block.lines().nth(1).unwrap().split_whitespace().skip(2).collect();
            assert_eq!(csv_numbers, text_numbers);
        }
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.64), "0.640000");
        assert_eq!(format_sig(2.0), "2.00000");
        assert_eq!(format_sig(-4.31019), "-4.31019");
        assert_eq!(format_sig(123456.7), "123457");
        assert_eq!(format_sig(1234567.0), "1.23457e6");
        assert_eq!(format_sig(0.000_012_345_67), "1.23457e-5");
        assert_eq!(format_sig(9.999_999), "10.0000");
        assert_eq!(format_sig(0.1), "0.100000");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.0), "0");
    }
}
