//! Gradient verification: analytic backward pass against central finite
//! differences for all three model kinds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepdelay::model::{Model, ModelKind};
use stepdelay::tensor::{DenseMat, DenseVec, Minibatch};

fn finite_diff(model: &Model, batch: &Minibatch, eps: f64) -> Vec<f64> {
    (0..model.param_len())
        .map(|i| {
            let mut plus = model.clone();
            plus.params[i] += eps;
            let mut minus = model.clone();
            minus.params[i] -= eps;
            (plus.forward_loss(batch).unwrap() - minus.forward_loss(batch).unwrap()) / (2.0 * eps)
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!("model                 params  max_rel_error");
    for kind in [
        ModelKind::LinearRegression,
        ModelKind::LogisticRegression,
        ModelKind::Mlp2,
    ] {
        let (d, b) = (6, 8);
        let mut model = Model::new(kind, d, 5);
        model.init_params(&mut rng);
        let rows: Vec<f64> = (0..b * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let labels: Vec<f64> = (0..b)
            .map(|_| match kind {
                ModelKind::LinearRegression => rng.gen_range(-2.0..2.0),
                _ => f64::from(rng.gen_bool(0.5)),
            })
            .collect();
        let batch = Minibatch::new(
            DenseMat::from_vec(rows, b, d)?,
            DenseVec::from_vec(labels)?,
        )?;
        let grad = model.backward_grad(&batch)?;
        let fd = DenseVec::from_vec(finite_diff(&model, &batch, 1e-6))?;
        println!(
            "{:<21} {:<7} {:.3e}",
            kind.name(),
            model.param_len(),
            grad.max_rel_error(&fd)
        );
    }
    Ok(())
}
