//! Compare analytic residual Jacobians with central differences.

use birotation::residual::wrap_angle;
use birotation::*;

fn main() -> Result<()> {
    let r1 = exp_so3(&Vec3::new(0.2, -0.4, 0.1));
    let r2 = exp_so3(&Vec3::new(-0.3, 0.1, 0.5));
    let b1 = Vec3::new(0.1, -0.2, 1.0);
    let b2 = Vec3::new(0.3, 0.05, 1.0);
    let set = CorrespondenceSet::from_bearings(&[(b1, b2)])?;
    let h = 1e-6;

    for model in BasisAxis::ALL {
        let analytic = jacobian(model, &r1, &r2, &set)?.rows[0].to_array();
        let mut numeric = [0.0; 6];
        for (c, slot) in numeric.iter_mut().enumerate() {
            let mut d = Vec3::zeros();
            d[c % 3] = h;
            let e = |s: f64| {
                let turn = exp_so3(&(d * s));
                if c < 3 {
                    residual(model, &(turn * r1), &r2, &b1, &b2)
                } else {
                    residual(model, &r1, &(turn * r2), &b1, &b2)
                }
            };
            *slot = wrap_angle(e(1.0)? - e(-1.0)?) / (2.0 * h);
        }
        println!("model {}", model.index());
        println!("  analytic {analytic:+.6?}");
        println!("  numeric  {numeric:+.6?}");
    }
    Ok(())
}
