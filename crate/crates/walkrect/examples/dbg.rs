
fn main() {
    let domain =
        walkrect::geometry::Domain::from_file(std::path::Path::new("configs/corridor_fine.json"))
            .unwrap();
    let fd = walkrect::baselines::fd_laplace_solve(&domain, 0.01).unwrap();
    println!("fd(1.7,1.0) = {:.4e}", fd.query(&[1.7, 1.0]));
}
