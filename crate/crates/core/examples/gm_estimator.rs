//! Single filter under contaminated Gaussian noise: LMS versus the
//! Geman-McClure (LMG) update, plus a table of the GM cost and scale.

use nalgebra::DVector;
use resilient_diffusion::adapt::{adapt_step, gm_cost, gm_influence_bound, gm_scale, AdaptParams, NodeEstimate};
use resilient_diffusion::signal::{desired_signal, Channel, NoiseModel, RegressorModel, RegressorState, RegressorStyle, RngStream};

fn main() -> resilient_diffusion::Result<()> {
    let lambda = 1.0;
    println!("{:>6} {:>10} {:>10} {:>10}", "e", "cost", "scale", "f(e)*e");
    for e in [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 20.0] {
        println!("{e:>6} {:>10.5} {:>10.5} {:>10.5}", gm_cost(e, lambda), gm_scale(e, lambda), gm_scale(e, lambda) * e);
    }
    println!("largest |f(e)e| for lambda={lambda}: {:.5}\n", gm_influence_bound(lambda));

    let w_true = DVector::from_vec(vec![0.4, -0.3, 0.2]);
    let noise = NoiseModel::ContaminatedGaussian { sigma_v2: 0.01, sigma_g2: 100.0, p: 0.01 };
    let regressor = RegressorModel::new(3, vec![1.0], RegressorStyle::Iid)?;
    let filters = [("LMS", AdaptParams::lms(0.02)), ("LMG", AdaptParams::lmg(0.02, lambda))];
    for (name, params) in filters {
        let mut msd = 0.0;
        let runs = 50;
        for run in 0..runs {
            let mut u_rng = RngStream::new(1, run, 0, Channel::Regressor);
            let mut n_rng = RngStream::new(1, run, 0, Channel::Noise);
            let mut state = RegressorState::default();
            let mut est = NodeEstimate::new(DVector::zeros(3));
            for _ in 0..3000 {
                let u = regressor.sample(0, &mut state, &mut u_rng)?;
                let d = desired_signal(&u, &w_true, noise.sample(&mut n_rng))?;
                let next = adapt_step(&est, &params, d, &u)?;
                est = NodeEstimate::new(next.psi);
            }
            msd += (&est.w - &w_true).norm_squared() / runs as f64;
        }
        println!("{name}: final MSD {:.2} dB over {runs} runs", 10.0 * msd.log10());
    }
    Ok(())
}
