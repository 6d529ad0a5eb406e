//! Solving a mixing problem directly: three counterfactual prediction
//! columns and binary targets, mixed on the logit scale.

use oim::oim::{MixingObjective, MixingProblem};

fn main() -> oim::Result<()> {
    // Row-major: one row per example, one column per protected level.
    let scores = vec![
        -1.0, 0.5, 2.0, //
        -2.0, -0.5, 1.0, //
        0.0, 1.5, 3.0, //
        -1.5, 0.0, 1.5, //
    ];
    let targets = vec![0.0, 0.0, 1.0, 1.0];
    let problem = MixingProblem::new(3, scores, targets, MixingObjective::LogitNll)?;
    let s = problem.solve();
    println!("weights   {:?}", s.weights);
    println!("objective {:.6} after {} iterations", s.objective, s.iterations);
    println!("uniform   {:.6}", problem.value(&[1.0 / 3.0; 3]));
    Ok(())
}
