use std::fmt::Write as _;
use std::path::Path;

use kzmps::analysis::{
    collapse_fit, collapse_points, kappa_theory, pairwise_relative_rms, CollapseDataset, CollapseOptions, CollapseRow, Observable,
    PowerLawProxy, ScalingFit,
};
use kzmps::{Error, ModelKind, ModelSpec};

use crate::results::{atomic_write, read_results};
use crate::svg::{log_log, Series};

/// Why an analysis stopped: unmet collapse preconditions are reported
/// separately from I/O and parse failures.
#[derive(Debug)]
pub enum AnalyzeError {
    Precondition(String),
    Other(String),
}

impl std::fmt::Display for AnalyzeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnalyzeError::Precondition(m) | AnalyzeError::Other(m) => f.write_str(m),
        }
    }
}

impl From<Error> for AnalyzeError {
    fn from(e: Error) -> Self {
        match e {
            Error::Precondition(_) | Error::FitImpossible(_) => AnalyzeError::Precondition(e.to_string()),
            other => AnalyzeError::Other(other.to_string()),
        }
    }
}

pub struct AnalyzeReport {
    pub model: ModelKind,
    pub fit: ScalingFit,
    pub kappa_theory: f64,
    pub pair_rms: Vec<(usize, usize, Option<f64>)>,
}

/// `lo:hi:step`
pub fn parse_scan(s: &str) -> Result<CollapseOptions, String> {
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format!("'{s}': {e}"))?;
    match parts[..] {
        [lo, hi, step] if lo < hi && step > 0.0 => Ok(CollapseOptions { kappa_lo: lo, kappa_hi: hi, kappa_step: step, ..Default::default() }),
        _ => Err(format!("kappa scan must be lo:hi:step with lo < hi and step > 0, got '{s}'")),
    }
}

pub fn dataset(results: &Path, observable: Observable, model: Option<ModelKind>) -> Result<(ModelKind, CollapseDataset), AnalyzeError> {
    let rows = read_results(results).map_err(AnalyzeError::Other)?;
    let kinds: Vec<ModelKind> = {
        let mut k: Vec<ModelKind> = rows.iter().filter_map(|r| r.model.parse().ok()).collect();
        k.sort_by_key(|m| m.name());
        k.dedup();
        k
    };
    let kind = match (model, kinds.as_slice()) {
        (Some(m), _) => m,
        (None, [one]) => *one,
        (None, []) => return Err(AnalyzeError::Precondition(format!("{} has no rows", results.display()))),
        (None, _) => return Err(AnalyzeError::Other("results mix several models; pass --model".into())),
    };
    let spec = match kind {
        ModelKind::Tfim => ModelSpec::tfim(1.0, 1.0),
        ModelKind::Potts3 => ModelSpec::potts3(1.0, 1.0),
    };
    let rows: Vec<CollapseRow> = rows
        .iter()
        .filter(|r| r.model.parse::<ModelKind>().ok() == Some(kind))
        .map(|r| CollapseRow {
            chi: r.chi,
            v: r.v,
            value: match observable {
                Observable::F => r.f,
                Observable::Eps => r.eps_ex,
            },
        })
        .collect();
    Ok((kind, CollapseDataset { observable, rows, nu: spec.nu, z: spec.z, c: spec.c }))
}

pub fn analyze(
    results: &Path,
    observable: Observable,
    opts: CollapseOptions,
    model: Option<ModelKind>,
    out_dir: &Path,
) -> Result<AnalyzeReport, AnalyzeError> {
    let (kind, data) = dataset(results, observable, model)?;
    data.validate()?;
    let proxy = PowerLawProxy::fit(&data)?;
    let f = |v: f64| proxy.value(v);
    let fit = collapse_fit(&data, &f, opts)?;
    let theory = kappa_theory(data.c)?;
    let pair_rms = pairwise_relative_rms(&data, &f, fit.kappa_hat, opts.overlap_points);

    std::fs::create_dir_all(out_dir).map_err(|e| AnalyzeError::Other(e.to_string()))?;
    let io = |e: std::io::Error| AnalyzeError::Other(e.to_string());
    let mut s = String::new();
    let _ = writeln!(s, "# model: {kind}");
    let _ = writeln!(s, "# observable: {}", observable.name());
    let _ = writeln!(s, "# kappa_hat: {}", fit.kappa_hat);
    let _ = writeln!(s, "# kappa_theory: {theory}");
    let _ = writeln!(s, "# degenerate: {}", fit.degenerate);
    let _ = writeln!(s, "# proxy: {} * v^{}", proxy.prefactor, proxy.exponent);
    s.push_str("kappa,cost\n");
    for (k, c) in &fit.cost_curve {
        let _ = writeln!(s, "{k},{c}");
    }
    atomic_write(&out_dir.join("kappa_fit.csv"), s.as_bytes()).map_err(io)?;

    let points = collapse_points(&data, &f, fit.kappa_hat);
    let mut s = String::from("chi,v,x,y\n");
    for p in &points {
        let _ = writeln!(s, "{},{},{},{}", p.chi, p.v, p.x, p.y);
    }
    atomic_write(&out_dir.join("collapse.csv"), s.as_bytes()).map_err(io)?;

    let mut s = String::from("chi,v,value,value_chi_inf\n");
    for (row, est) in data.chis().iter().flat_map(|&c| data.curve(c)).zip(&fit.chi_infinity_estimates) {
        let _ = writeln!(s, "{},{},{},{}", row.chi, row.v, row.value, est.value);
    }
    atomic_write(&out_dir.join("extrapolated.csv"), s.as_bytes()).map_err(io)?;

    let series: Vec<Series> = data
        .chis()
        .iter()
        .map(|&chi| Series { label: format!("chi = {chi}"), points: points.iter().filter(|p| p.chi == chi).map(|p| (p.x, p.y)).collect() })
        .collect();
    let title = format!("{kind} {} collapse, kappa = {:.3}", observable.name(), fit.kappa_hat);
    let svg = log_log(&title, "xi_KZ / chi^kappa", "O(v, chi) / O(v, inf)", &series);
    atomic_write(&out_dir.join("collapse.svg"), svg.as_bytes()).map_err(io)?;
    Ok(AnalyzeReport { model: kind, fit, kappa_theory: theory, pair_rms })
}
