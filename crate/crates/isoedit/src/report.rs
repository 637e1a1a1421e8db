//! CSV renderings of per-iteration reports.

use isoedit_core::editing::EditReport;
use isoedit_core::flows::SmoothingTrace;
use isoedit_core::rigid::EnergyRecord;

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per iteration; constraint drift columns hold the worst relative
/// drift and the summed predicted change.
pub fn edit_csv(report: &EditReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "iteration", "residual", "delta_norm", "target_deviation", "rows", "dropped", "drift_predicted", "drift_relative",
    ])
    .unwrap();
    for r in &report.iterations {
        let predicted = (!r.drift.is_empty()).then(|| r.drift.iter().map(|d| d.predicted).sum::<f64>());
        let relative = r.drift.iter().map(|d| d.relative).reduce(f64::max);
        w.write_record([
            r.iteration.to_string(),
            r.residual.to_string(),
            r.delta_norm.to_string(),
            r.target_deviation.to_string(),
            r.rows.to_string(),
            r.dropped.to_string(),
            opt(predicted),
            opt(relative),
        ])
        .unwrap();
    }
    finish(w)
}

/// Row 0 is the initial volume; row k > 0 is the state after step k − 1.
pub fn smoothing_csv(trace: &SmoothingTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "volume", "mean_abs_curvature", "delta_norm", "residual", "drift_relative"]).unwrap();
    if let Some(v0) = trace.volumes.first().filter(|_| trace.volumes.len() > trace.steps.len()) {
        w.write_record(["0".into(), v0.to_string(), String::new(), String::new(), String::new(), String::new()]).unwrap();
    }
    for s in &trace.steps {
        w.write_record([
            (s.iteration + 1).to_string(),
            opt(s.volume),
            s.mean_abs_curvature.to_string(),
            s.delta_norm.to_string(),
            s.residual.to_string(),
            opt(s.drift.map(|d| d.relative)),
        ])
        .unwrap();
    }
    finish(w)
}

pub fn energy_csv(trace: &[EnergyRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "killing", "constraint", "total"]).unwrap();
    for r in trace {
        let e = r.energies;
        w.write_record([r.step.to_string(), e.killing.to_string(), e.constraint.to_string(), e.total.to_string()])
            .unwrap();
    }
    finish(w)
}

pub fn loss_csv(trace: &[(usize, f64)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "loss"]).unwrap();
    for (k, l) in trace {
        w.write_record([k.to_string(), l.to_string()]).unwrap();
    }
    finish(w)
}
