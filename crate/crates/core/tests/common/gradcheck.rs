use hredlsh::hred::{loss_gradient, HredParams};

use super::scalar_ref;

/// Per-tensor `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` with
/// central differences of the reference loss.
pub fn relative_errors(p: &HredParams<f64>, dialogue: &[Vec<u32>], step: f64) -> Vec<(String, f64)> {
    let (grad, loss) = loss_gradient(p, dialogue).unwrap();
    assert!((loss - scalar_ref::mean_nll(p, dialogue)).abs() < 1e-12);
    let names = HredParams::<f64>::tensor_names();
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = p.clone();
    let mut out = Vec::new();
    for (ti, name) in names.iter().enumerate() {
        let mut numeric = Vec::with_capacity(analytic[ti].len());
        for j in 0..analytic[ti].len() {
            let orig = probe.tensors()[ti][j];
            probe.tensors_mut()[ti][j] = orig + step;
            let up = scalar_ref::mean_nll(&probe, dialogue);
            probe.tensors_mut()[ti][j] = orig - step;
            let down = scalar_ref::mean_nll(&probe, dialogue);
            probe.tensors_mut()[ti][j] = orig;
            numeric.push((up - down) / (2.0 * step));
        }
        let diff: f64 = analytic[ti].iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic[ti].iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        out.push((name.clone(), diff / na.max(nn).max(1e-10)));
    }
    out
}
