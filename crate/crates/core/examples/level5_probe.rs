use cmc_core::group::MetricLieGroup;
use cmc_core::mesh::SphereMesh;
use cmc_core::pde;
use cmc_core::potential::HPotential;
use cmc_core::solver::{self, ContinuationOptions};
use std::time::Instant;

fn main() {
    let level: u32 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(4);
    let mesh = SphereMesh::build(level);
    for (name, c, h0) in [("berger221", [2.0, 2.0, 1.0], 20.0), ("berger441", [4.0, 4.0, 1.0], 40.0)] {
        let group = MetricLieGroup::unimodular(c).unwrap();
        let t0 = Instant::now();
        let (field, info) = solver::initial_sphere(&mesh, &group, h0).unwrap();
        println!("{name} L{level}: init {:.2?} it={} res={:.2e} pin={:.2e} floor={:.2e}", t0.elapsed(), info.iterations, info.residual, info.pin_defect, info.floor);
        let t0 = Instant::now();
        let mut maxsolve = 0.0f64;
        let mut last = Instant::now();
        match solver::continue_family(&mesh, &group, &field, &[2.0, 1.0, 0.5, 0.0],
            &ContinuationOptions::default(),
            Some(&mut |_ev: solver::ProgressEvent| {
                maxsolve = maxsolve.max(last.elapsed().as_secs_f64());
                last = Instant::now();
            })) {
            Ok(spheres) => {
                println!("  continuation {:.2?} (max solve {:.2}s)", t0.elapsed(), maxsolve);
                for s in &spheres {
                    let hp = HPotential::new(&group, s.h);
                    let r = pde::pde_residual(&mesh, &hp, &s.field).unwrap();
                    let rmax = r.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
                    println!("  H={:+.2} area={:.6} it={} res={:.2e} pin={:.2e} floor={:.2e} max|r|={:.2e}", s.h, s.area, s.info.iterations, s.info.residual, s.info.pin_defect, s.info.floor, rmax);
                }
            }
            Err(e) => println!("  FAILED: {e}"),
        }
    }
}
