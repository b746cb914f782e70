use std::sync::Arc;
use walkrect::boxstep::{Proposal, SideId};

fn main() {
    for file in ["configs/corridor_fine.json"] {
        let domain = walkrect::geometry::Domain::from_file(std::path::Path::new(file)).unwrap();
        let corridor_index = domain.boxes.len() - 1;
        println!("== {file}");
        for seed in [2u64, 6, 7, 8, 9, 10, 11, 12] {
            let mk = || {
                walkrect::walker::ProposalPolicy::Custom(Arc::new(
                    move |fb: &walkrect::geometry::FrozenBox| {
                        let mut p = Proposal::default_for(&fb.bx);
                        if fb.index == corridor_index {
                            let target = SideId::Lateral { axis: 0, eta: 1 };
                            let rest = 0.6 / (p.sides.len() - 1) as f64;
                            for s in p.sides.iter_mut() {
                                s.alpha = if s.side == target { 0.4 } else { rest };
                            }
                        }
                        p
                    },
                ))
            };
            let cfg = walkrect::walker::WalkerConfig::default();
            let rep =
                walkrect::walker::estimate(&domain, 0.0, &[1.7, 1.0], 100_000, &mk(), &cfg, seed)
                    .unwrap();
            println!(
                "walker seed {seed}: est {:.4e} se {:.2e} max_log_w {:.3} mean_w {:.4} steps {:.2} max_steps {}",
                rep.estimate,
                rep.std_error,
                rep.weight_max.ln(),
                rep.weight_mean,
                rep.steps_mean,
                rep.steps_max
            );
            let pcfg = walkrect::population::PopulationConfig::default();
            let prep = walkrect::population::run_population(
                &domain,
                0.0,
                &[1.7, 1.0],
                100_000,
                &mk(),
                &pcfg,
                seed,
            )
            .unwrap();
            println!(
                "popul. seed {seed}: est {:.4e} se {:.2e} max_log_w {:.3} gens {}",
                prep.estimate, prep.std_error, prep.max_log_weight, prep.generations
            );
        }
    }
}
