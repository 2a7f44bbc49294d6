// One localized ensemble analysis on a nonuniform mesh.

use std::sync::Arc;

use lahmesh::letkf::{local_analysis, localization_radii, AnalysisConfig, EnsembleState};
use lahmesh::observations::{synthesize_observations, ObsKind, ObservationSpec};
use lahmesh::rng::{stream, Purpose};
use lahmesh::{Mesh1D, MetricField, StateField};
use rand::Rng;
use rand_distr::StandardNormal;

fn rmse(a: &StateField, b: &StateField) -> f64 {
    let s: f64 = a.component(0).iter().zip(b.component(0)).map(|(x, y)| (x - y).powi(2)).sum();
    (s / a.mesh().len() as f64).sqrt()
}

pub fn main() -> lahmesh::Result<()> {
    let x: Vec<f64> = (0..=80).map(|i| (i as f64 / 80.0).powf(1.3)).collect();
    let mesh = Arc::new(Mesh1D::new(x)?);
    let truth = StateField::from_fn(mesh.clone(), 1, |_, x| (2.0 * std::f64::consts::PI * x).sin());

    let members = (0..20)
        .map(|i| {
            let mut rng = stream(7, Purpose::InitialEnsemble, 0, i);
            let shift: f64 = 0.3 * rng.sample::<f64, _>(StandardNormal);
            StateField::from_fn(mesh.clone(), 1, |_, x| {
                (2.0 * std::f64::consts::PI * (x + 0.05 * shift)).sin() + 0.2 * rng.sample::<f64, _>(StandardNormal)
            })
        })
        .collect();
    let ens = EnsembleState::new(members)?;

    let spec = ObservationSpec {
        kind: ObsKind::Pointwise,
        base: vec![(0..40).map(|k| 0.0125 + 0.025 * k as f64).collect()],
        motion: None,
        r_var: 0.01,
    };
    let obs = synthesize_observations(&truth, &spec, 0.0, &mut stream(7, Purpose::ObservationNoise, 0, 0))?;

    // radii shrink where the mesh metric is large
    let m = MetricField::from_scalars(mesh.clone(), mesh.nodes().iter().map(|x| 1.0 + 3.0 * x).collect())?;
    let radii = localization_radii(&m, 0.08)?;
    let (analysis, report) = local_analysis(&ens, &obs, &radii, &AnalysisConfig::default(), None)?;

    println!("{} observations, radii {:.3}..{:.3}", obs.len(), radii[80], radii[0]);
    println!("RMSE of mean: forecast {:.4}, analysis {:.4}", rmse(&ens.mean(), &truth), rmse(&analysis.mean(), &truth));
    println!("spread: forecast {:.4}, analysis {:.4}", ens.spread()[0], analysis.spread()[0]);
    println!("largest local observation count {}", report.max_local_obs);
    Ok(())
}
