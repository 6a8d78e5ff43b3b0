use std::sync::Arc;
use std::time::Instant;
use torlab_core::body::{Body, SigmaConvention};
use torlab_core::sphere::SphereGrid;
use torlab_core::torsion::{solve_khessian, solve_poisson_polar};

fn main() {
    let grid = Arc::new(SphereGrid::circle(256).unwrap());
    let disk = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
    let t = Instant::now();
    let sol = solve_khessian(&disk, 1, 256).unwrap();
    println!("disk 256^2: {:?}  g[0]={:.6} neg_int={:.6} (pi/8={:.6})", t.elapsed(), sol.g_support[0], sol.neg_u_integral, std::f64::consts::PI/8.0);

    let ell = Body::ellipse(grid.clone(), 2.0, 1.0, SigmaConvention::Elementary).unwrap();
    let t = Instant::now();
    let sol = solve_khessian(&ell, 1, 256).unwrap();
    println!("ellipse 256^2: {:?}  g[0]={:.6} (0.4) neg_int={:.6} (2pi/5={:.6})", t.elapsed(), sol.g_support[0], sol.neg_u_integral, 2.0*std::f64::consts::PI/5.0);

    let t = Instant::now();
    let solp = solve_poisson_polar(&ell, 96, None).unwrap();
    println!("ellipse polar 96x256: {:?} g[0]={:.6} neg_int={:.6}", t.elapsed(), solp.g_support[0], solp.neg_u_integral);

    let g3 = Arc::new(SphereGrid::lat_lon(32, 64).unwrap());
    let ball3 = Body::ball(g3.clone(), 1.0, SigmaConvention::Mean).unwrap();
    let t = Instant::now();
    let sol = solve_khessian(&ball3, 2, 64).unwrap();
    println!("ball 64^3 k=2: {:?}  g[0]={:.6} (1/sqrt3={:.6}) newton={} res={:.2e}", t.elapsed(), sol.g_support[0], 1.0/3.0_f64.sqrt(), sol.newton_iterations, sol.residual);

    let e3 = Body::ellipsoid(g3.clone(), 1.2, 1.0, 0.8, SigmaConvention::Mean).unwrap();
    let t = Instant::now();
    let sol = solve_khessian(&e3, 2, 64).unwrap();
    let x = 1.0/(1.2f64*1.2); let y = 1.0; let z = 1.0/(0.8f64*0.8);
    let c = 0.5/(x*y+x*z+y*z).sqrt();
    println!("ellipsoid 64^3 k=2: {:?}  u_min={:.6} (exact {:.6}) newton={}", t.elapsed(), sol.u_min, -c, sol.newton_iterations);
}
