//! Recomputes the detection-threshold constants and prints every grid cell.

use isodepth::calibration::{calibrate, shipped, sweep_central_iforest, sweep_clustered_iforest, sweep_clustered_knn};

fn main() -> isodepth::Result<()> {
    let g = &shipped().grid;
    let cells = [
        ("central_iforest", sweep_central_iforest(&g.central_n0, &g.kappas)?),
        ("clustered_iforest", sweep_clustered_iforest(&g.clustered_n1, g.clustered_n0, &g.kappas)?),
        ("clustered_knn", sweep_clustered_knn(&g.knn_k, g.knn_n1, g.clustered_n0, &g.knn_kappas)?),
    ];
    println!("sweep,n0,n1,k,kappa,theta_star,ratio");
    for (name, points) in &cells {
        for p in points {
            println!("{name},{},{},{},{},{:.6},{:.6}", p.n0, p.n1, p.k, p.kappa, p.theta_star, p.ratio);
        }
    }
    println!("{}", serde_json::to_string_pretty(&calibrate(g)?)?);
    Ok(())
}
