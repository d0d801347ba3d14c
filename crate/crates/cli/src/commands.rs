use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fieldkde_core::coefficients::{
    check_condition_c_with, check_corollary1, check_hallin, check_machkouri_qsum, TrendRule,
};
use fieldkde_core::field::{
    field_moment_diagnostics, generate_coupled_fields, write_field_binary, write_field_csv, LatticeField,
};
use fieldkde_core::kde::{density_oracle, expected_fn, kde_estimate};
use fieldkde_core::lab::{
    block_decomposition_check, fixed_m_gap, growing_m_gap, lindeberg_estimate, rectangle_moment_check,
    run_clt_experiment, with_threads, wu_inequality_check, zeta_covariance_profile,
};
use fieldkde_core::report::{emit_report, fmt_float, CsvTable, ReportFormat, Tabular};
use fieldkde_core::{Error, Family, SeedSpec, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// What a subcommand produced. Only `gating` verdicts decide the exit
/// code; the rest are reported for comparison.
#[derive(Default)]
pub struct Outcome {
    pub verdicts: BTreeMap<String, Verdict>,
    pub gating: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

impl Outcome {
    fn gate(&mut self, name: &str, v: Verdict) {
        self.verdicts.insert(name.into(), v);
        self.gating.push(name.into());
    }

    fn note(&mut self, name: &str, v: Verdict) {
        self.verdicts.insert(name.into(), v);
    }

    pub fn failed(&self) -> bool {
        self.gating.iter().any(|g| self.verdicts[g] == Verdict::Fail)
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
    pub format: ReportFormat,
}

impl Ctx<'_> {
    fn emit<T: Serialize + Tabular>(&self, report: &T, stem: &str, outcome: &mut Outcome) -> Result<()> {
        let paths = emit_report(report, self.format, self.out, stem)
            .with_context(|| format!("writing {stem} to {}", self.out.display()))?;
        outcome.outputs.extend(paths);
        Ok(())
    }
}

pub fn check_conditions(ctx: &Ctx) -> Result<Outcome> {
    let exp = &ctx.cfg.experiment;
    let sec = &ctx.cfg.check_conditions;
    let model = &exp.coefficients;
    let d = model.dimension();
    let gamma = exp.bandwidth.gamma;
    let mut out = Outcome::default();
    let mut reports = Vec::new();

    let cor = check_corollary1(d, model.beta(), gamma)?;
    out.gate("corollary1", cor.verdict);
    let window_mid = cor.delta_interval.as_ref().map(|w| w.midpoint);
    reports.push(cor);

    if let Family::PowerDecay { q, .. } = model.family() {
        let h = check_hallin(d, *q, gamma)?;
        out.note("hallin", h.verdict);
        reports.push(h);
    }
    let q = sec.qsum_q.unwrap_or(2.5 * d as f64);
    let qs = check_machkouri_qsum(model, q, sec.qsum_radius)?;
    out.note("machkouri_qsum", qs.verdict);
    reports.push(qs);

    match sec.delta.or(window_mid) {
        Some(delta) if exp.n_grid.len() >= 3 => {
            let rule = TrendRule {
                final_fraction: sec.trend_final_fraction,
            };
            let c = check_condition_c_with(model, &exp.bandwidth, delta, &exp.n_grid, rule)?;
            out.gate("condition_c", c.verdict);
            reports.push(c);
        }
        Some(_) => out.note("condition_c", Verdict::Inconclusive),
        // No δ is feasible and none was given: the growth conditions cannot hold.
        None => out.gate("condition_c", Verdict::Fail),
    }
    ctx.emit(&reports, "check-conditions", &mut out)?;
    Ok(out)
}

pub fn gen_field(ctx: &Ctx) -> Result<Outcome> {
    let exp = &ctx.cfg.experiment;
    let sec = &ctx.cfg.gen_field;
    let n = sec.n.unwrap_or(exp.n_grid[0]);
    let m = match sec.m {
        Some(m) => m,
        None => exp.m_for(n)?,
    };
    let plan = exp.plan_for(n, m)?;
    let seed = SeedSpec::new(exp.seed, n as u64, sec.replicate as u64);
    let fields = with_threads(exp.threads, || {
        generate_coupled_fields(
            &exp.coefficients,
            &exp.innovations,
            n,
            m,
            &plan,
            seed,
            exp.conv_method,
            exp.max_bytes(),
        )
    })?;
    let mut out = Outcome::default();
    let scale = fields.full.values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let identity = if fields.coupling_defect() <= 1e-12 * scale { Verdict::Pass } else { Verdict::Fail };
    out.gate("coupling_identity", identity);

    std::fs::create_dir_all(ctx.out)?;
    let parts: [(&str, &LatticeField); 3] =
        [("full", &fields.full), ("truncated", &fields.truncated), ("residual", &fields.residual)];
    for (name, field) in parts {
        if sec.write_binary {
            let path = ctx.out.join(format!("gen-field.{name}.bin"));
            write_field_binary(field, BufWriter::new(File::create(&path)?))?;
            out.outputs.push(path);
        }
        if sec.write_csv {
            let path = ctx.out.join(format!("gen-field.{name}.values.csv"));
            write_field_csv(field, BufWriter::new(File::create(&path)?))?;
            out.outputs.push(path);
        }
    }
    let d = exp.dimension();
    let lags = if sec.lags.is_empty() {
        let mut l = vec![vec![0; d]];
        if n >= 4 {
            for t in 0..d {
                let mut e = vec![0; d];
                e[t] = 1;
                l.push(e);
            }
        }
        l
    } else {
        sec.lags.clone()
    };
    let diag = field_moment_diagnostics(&fields.full, &exp.coefficients, &lags)?;
    ctx.emit(&diag, "gen-field", &mut out)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeRow {
    pub x: f64,
    pub f_n: f64,
    pub expected: Option<f64>,
    pub density: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeReport {
    pub n: usize,
    pub m: usize,
    pub b_n: f64,
    pub truncation_radius: usize,
    pub seed: SeedSpec,
    pub rows: Vec<KdeRow>,
}

impl Tabular for KdeReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut t = CsvTable::new("kde", &["n", "b_n", "x", "f_n", "expected", "density"]);
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        for r in &self.rows {
            t.push(vec![
                self.n.to_string(),
                fmt_float(self.b_n),
                fmt_float(r.x),
                fmt_float(r.f_n),
                opt(r.expected),
                opt(r.density),
            ]);
        }
        vec![t]
    }
}

pub fn kde(ctx: &Ctx) -> Result<Outcome> {
    let exp = &ctx.cfg.experiment;
    let sec = &ctx.cfg.kde;
    let n = sec.n.unwrap_or(exp.n_grid[0]);
    let m = exp.m_for(n)?;
    let plan = exp.plan_for(n, m)?;
    let b = exp.bandwidth_for(n);
    let seed = SeedSpec::new(exp.seed, n as u64, sec.replicate as u64);
    let fields = with_threads(exp.threads, || {
        generate_coupled_fields(
            &exp.coefficients,
            &exp.innovations,
            n,
            m,
            &plan,
            seed,
            exp.conv_method,
            exp.max_bytes(),
        )
    })?;
    let oracle = if exp.innovations.is_gaussian() {
        Some(density_oracle(&exp.coefficients, &exp.innovations, m, &vec![0; exp.dimension()])?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for x in exp.resolved_eval_points() {
        let f_n = kde_estimate(&fields.full, x, b, exp.kernel)?;
        let (expected, density) = match &oracle {
            Some(o) => (Some(expected_fn(o, exp.kernel, b, x)?), Some(o.p(x))),
            None => (None, None),
        };
        rows.push(KdeRow { x, f_n, expected, density });
    }
    let report = KdeReport {
        n,
        m,
        b_n: b,
        truncation_radius: plan.radius,
        seed,
        rows,
    };
    let mut out = Outcome::default();
    ctx.emit(&report, "kde", &mut out)?;
    Ok(out)
}

pub fn clt_run(ctx: &Ctx) -> Result<Outcome> {
    let rep = run_clt_experiment(&ctx.cfg.experiment)?;
    let mut out = Outcome::default();
    out.gate("clt", rep.verdict);
    ctx.emit(&rep, "clt-run", &mut out)?;
    Ok(out)
}

pub fn blocks(ctx: &Ctx) -> Result<Outcome> {
    let exp = &ctx.cfg.experiment;
    let sec = &ctx.cfg.blocks;
    let mut out = Outcome::default();
    let rep = block_decomposition_check(exp, sec.block)?;
    out.gate("blocks", rep.verdict);
    ctx.emit(&rep, "blocks", &mut out)?;
    let lf = lindeberg_estimate(exp, sec.block, &sec.eps)?;
    out.gate("lindeberg", lf.verdict);
    ctx.emit(&lf, "blocks.lindeberg", &mut out)?;
    Ok(out)
}

pub fn moment_check(ctx: &Ctx) -> Result<Outcome> {
    let exp = &ctx.cfg.experiment;
    let sec = &ctx.cfg.moment_check;
    let d = exp.dimension();
    let n_min = *exp.n_grid.iter().min().expect("validated grid");
    let mut out = Outcome::default();

    let rectangles = sec.rectangles.clone().unwrap_or_else(|| {
        (2..usize::BITS)
            .map(|r| 1usize << r)
            .take_while(|&s| s <= n_min)
            .map(|s| vec![s; d])
            .collect()
    });
    let rect = rectangle_moment_check(exp, &rectangles)?;
    out.gate("rectangles", rect.verdict);
    ctx.emit(&rect, "moment-check.rectangles", &mut out)?;

    for &p in &sec.wu_p {
        let name = format!("wu_p{p}");
        match with_threads(exp.threads, || {
            wu_inequality_check(&exp.coefficients, &exp.innovations, p, sec.wu_sample, exp.seed)
        }) {
            Ok(w) => {
                out.gate(&name, w.verdict);
                ctx.emit(&w, &format!("moment-check.{}", name.replace('_', "-")), &mut out)?;
            }
            Err(Error::MomentCondition(msg)) => {
                eprintln!("skipping {name}: {msg}");
                out.note(&name, Verdict::Inconclusive);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let lags = sec.lags.clone().unwrap_or_else(|| {
        (1..=4i64)
            .filter(|&k| (k as usize) < n_min)
            .map(|k| {
                let mut l = vec![0i64; d];
                l[0] = k;
                l
            })
            .collect()
    });
    if !lags.is_empty() {
        let cov = zeta_covariance_profile(exp, &lags)?;
        out.gate("covariance", cov.verdict);
        ctx.emit(&cov, "moment-check.covariance", &mut out)?;
    }
    Ok(out)
}

pub fn fixed_m(ctx: &Ctx) -> Result<Outcome> {
    let exp = &ctx.cfg.experiment;
    let sec = &ctx.cfg.fixed_m_gap;
    let mut out = Outcome::default();
    let fixed = fixed_m_gap(exp, sec.m)?;
    out.gate("fixed_m_gap", fixed.verdict);
    ctx.emit(&fixed, "fixed-m-gap", &mut out)?;
    if sec.growing {
        let growing = growing_m_gap(exp)?;
        out.gate("growing_m_gap", growing.verdict);
        ctx.emit(&growing, "fixed-m-gap.growing", &mut out)?;
    }
    Ok(out)
}
