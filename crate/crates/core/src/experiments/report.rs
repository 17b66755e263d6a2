//! Sweep reports: per-grid-point curve files, fitted rates and a summary table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rates::{
    ac_gradient_case, fit_rate_exponent, nac_gap_case, smooth_curve, Curve, RateCase,
    TrackingRegime,
};
use super::{ExperimentSpec, GridCurves, MeanCurve};
use crate::error::{Error, Result};
use crate::two_timescale::{Algorithm, CSV_HEADER};

/// Fit windows start at `max(FIT_START, T / 100)`.
const FIT_START: f64 = 1_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub slope: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub final_mean: f64,
    pub final_stderr: f64,
    /// `None` when the horizon is too short for a fit window.
    pub rate: Option<RateReport>,
    pub predicted: RateCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub tag: String,
    pub sigma: f64,
    pub nu: f64,
    pub lambda: f64,
    pub n_seeds: usize,
    pub single_seed: bool,
    pub tracking_err: MetricReport,
    pub grad_norm_sq: MetricReport,
    pub opt_gap: MetricReport,
    pub output_grad_norm_sq: (f64, f64),
    pub output_opt_gap: (f64, f64),
    pub weighted_grad_norm_sq: f64,
}

fn tag(c: &GridCurves) -> String {
    format!("sigma{}_nu{}_lambda{}", c.sigma, c.nu, c.lambda)
}

fn metric(curve: &Curve, values: &MeanCurve, half_window: usize, predicted: RateCase) -> MetricReport {
    let t_max = curve.t.last().copied().unwrap_or(0.0);
    let t_min = FIT_START.max(t_max / 100.0);
    let rate = fit_rate_exponent(&smooth_curve(curve, half_window), t_min, t_max)
        .ok()
        .map(|f| RateReport {
            slope: f.slope,
            r_squared: f.r_squared,
            n_points: f.n_points,
            t_min: f.t_min,
            t_max: f.t_max,
        });
    MetricReport {
        final_mean: values.mean.last().copied().unwrap_or(f64::NAN),
        final_stderr: values.stderr.last().copied().unwrap_or(f64::NAN),
        rate,
        predicted,
    }
}

/// Fits and labels one grid point.
pub fn build_report(spec: &ExperimentSpec, c: &GridCurves) -> GridReport {
    let regime = TrackingRegime::classify(c.sigma, c.nu);
    let tracking_case = RateCase {
        label: regime.label().into(),
        exponent: regime.exponent(c.sigma, c.nu),
    };
    // the gradient and gap tables are stated along ν = 2σ/3; elsewhere they are indicative
    let grad_case = ac_gradient_case(c.sigma);
    let gap_case = match spec.algorithm {
        Algorithm::Nac => nac_gap_case(c.sigma),
        Algorithm::Ac => RateCase {
            label: "n/a".into(),
            exponent: f64::NAN,
        },
    };
    let hw = spec.half_window;
    GridReport {
        tag: tag(c),
        sigma: c.sigma,
        nu: c.nu,
        lambda: c.lambda,
        n_seeds: c.n_seeds,
        single_seed: c.single_seed,
        tracking_err: metric(&c.tracking_curve(), &c.tracking_err, hw, tracking_case),
        grad_norm_sq: metric(&c.grad_curve(), &c.grad_norm_sq, hw, grad_case),
        opt_gap: metric(&c.gap_curve(), &c.opt_gap, hw, gap_case),
        output_grad_norm_sq: c.output_grad_norm_sq,
        output_opt_gap: c.output_opt_gap,
        weighted_grad_norm_sq: c.weighted_grad_norm_sq,
    }
}

fn curve_csv(c: &GridCurves, pick: impl Fn(&MeanCurve) -> &[f64]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let (tr, gr, gap) = (pick(&c.tracking_err), pick(&c.grad_norm_sq), pick(&c.opt_gap));
    for k in 0..c.t.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.t[k], c.alpha[k], c.beta[k], tr[k], gr[k], gap[k]
        );
    }
    out
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn summary_csv(reports: &[GridReport]) -> String {
    let mut out = String::from(
        "tag,sigma,nu,lambda,n_seeds,tracking_regime,tracking_predicted,tracking_slope,\
         tracking_final,grad_case,grad_predicted,grad_slope,grad_final,gap_case,gap_predicted,\
         gap_slope,gap_final,output_grad_norm_sq,output_opt_gap,weighted_grad_norm_sq\n",
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.tag,
            r.sigma,
            r.nu,
            r.lambda,
            r.n_seeds,
            r.tracking_err.predicted.label,
            r.tracking_err.predicted.exponent,
            fmt_opt(r.tracking_err.rate.as_ref().map(|f| f.slope)),
            r.tracking_err.final_mean,
            r.grad_norm_sq.predicted.label,
            r.grad_norm_sq.predicted.exponent,
            fmt_opt(r.grad_norm_sq.rate.as_ref().map(|f| f.slope)),
            r.grad_norm_sq.final_mean,
            r.opt_gap.predicted.label,
            r.opt_gap.predicted.exponent,
            fmt_opt(r.opt_gap.rate.as_ref().map(|f| f.slope)),
            r.opt_gap.final_mean,
            r.output_grad_norm_sq.0,
            r.output_opt_gap.0,
            r.weighted_grad_norm_sq,
        );
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes `curves/<tag>.csv`, `curves/<tag>_stderr.csv`, `report.json` and
/// `summary.csv` under `out_dir`. Output depends only on the inputs.
pub fn emit_report(spec: &ExperimentSpec, curves: &[GridCurves], out_dir: &Path) -> Result<Vec<GridReport>> {
    if curves.is_empty() {
        return Err(Error::io(
            format!("nothing to write to {}", out_dir.display()),
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty curve set"),
        ));
    }
    let curve_dir = out_dir.join("curves");
    fs::create_dir_all(&curve_dir)
        .map_err(|e| Error::io(format!("creating {}", curve_dir.display()), e))?;
    let reports: Vec<GridReport> = curves.iter().map(|c| build_report(spec, c)).collect();
    for (c, r) in curves.iter().zip(&reports) {
        write(&curve_dir.join(format!("{}.csv", r.tag)), &curve_csv(c, |m| &m.mean))?;
        write(
            &curve_dir.join(format!("{}_stderr.csv", r.tag)),
            &curve_csv(c, |m| &m.stderr),
        )?;
    }
    let json = serde_json::to_string_pretty(&reports).expect("report serializes");
    write(&out_dir.join("report.json"), &json)?;
    write(&out_dir.join("summary.csv"), &summary_csv(&reports))?;
    Ok(reports)
}
