use cmc_core::field::GaussField;
use cmc_core::group::MetricLieGroup;
use cmc_core::mesh::SphereMesh;
use cmc_core::potential::HPotential;
use cmc_core::spectral::*;

fn main() {
    let mesh = SphereMesh::build(3);
    let group = MetricLieGroup::unimodular([2.0, 2.0, 2.0]).unwrap();
    let hp = HPotential::new(&group, 1.0);
    let field = GaussField::identity(&mesh, 1.0);
    let table = build_l_table(&mesh, &hp, &field, 256).unwrap();

    let c = (std::f64::consts::TAU / 5.0).cos();
    let s = (std::f64::consts::TAU / 5.0).sin();
    let rot5 = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    let th: f64 = std::f64::consts::PI / 10.0;
    let (ct, st) = (th.cos(), th.sin());
    let swap = [
        [2.0 * ct * ct - 1.0, 2.0 * ct * st, 0.0],
        [2.0 * ct * st, 2.0 * st * st - 1.0, 0.0],
        [0.0, 0.0, -1.0],
    ];
    for (name, rot) in [("rot5", rot5), ("swap", swap)] {
        let perm = mesh.automorphism_from_rotation(&rot).unwrap();
        let cand = field.permuted(&perm);
        // max |gzb| over vertices
        let mut gzb_max: f64 = 0.0;
        let mut worst = 0u32;
        for v in 0..mesh.num_vertices() as u32 {
            let jet = cand.jet(&mesh, v).unwrap();
            if jet.gzb.norm() > gzb_max { gzb_max = jet.gzb.norm(); worst = v; }
        }
        let qh = qh_certificate(&mesh, &hp, &table, &cand).unwrap();
        println!("{name}: qh {:.3e} gzb_max {:.3e} at v {} (domain {:?} target {:?})",
            qh.sup_norm, gzb_max, worst, mesh.domain_chart(worst), cand.chart[worst as usize]);
    }
}
