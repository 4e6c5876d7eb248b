use crate::error::{Error, Result};
use crate::geometry::{self, Mat3, Vec3, IDENTITY};

/// Off-diagonal magnitude, relative to the diagonal, at which Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and eigenvectors as columns.
pub fn symmetric_eigen(a: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = *a;
    let mut v = IDENTITY;
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let diag = a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2);
        if off <= JACOBI_TOL * JACOBI_TOL * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = IDENTITY;
            rot[p][p] = c;
            rot[q][q] = c;
            rot[p][q] = s;
            rot[q][p] = -s;
            a = geometry::mat_mul(&geometry::transpose(&rot), &geometry::mat_mul(&a, &rot));
            v = geometry::mat_mul(&v, &rot);
        }
    }
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.map(|i| a[i][i]);
    let mut vectors = [[0.0; 3]; 3];
    for (col, &i) in order.iter().enumerate() {
        for r in 0..3 {
            vectors[r][col] = v[r][i];
        }
    }
    (values, vectors)
}

fn column(m: &Mat3, c: usize) -> Vec3 {
    [m[0][c], m[1][c], m[2][c]]
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(v: &Vec3) -> Vec3 {
    geometry::scale(v, 1.0 / geometry::norm(v))
}

/// Any unit vector orthogonal to the unit vector `u`.
fn orthogonal(u: &Vec3) -> Vec3 {
    let axis = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    unit(&cross(u, &axis))
}

fn centroid(points: &[Vec3]) -> Vec3 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    c
}

/// `Σ a_j b_jᵀ` over centred points.
fn outer_sum(a: &[Vec3], b: &[Vec3]) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for (x, y) in a.iter().zip(b) {
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += x[r] * y[c];
            }
        }
    }
    m
}

/// Similarity alignment of `pred` onto `gt`: `s·R·(pred − mean(pred)) + mean(gt)`
/// with `R` a proper rotation and `s` the least-squares scale.
pub fn procrustes_align(pred: &[Vec3], gt: &[Vec3]) -> Result<Vec<Vec3>> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("{} predicted joints vs {} ground-truth joints", pred.len(), gt.len())));
    }
    if gt.len() < 3 {
        return Err(Error::Degenerate(format!("alignment needs at least 3 joints, got {}", gt.len())));
    }
    let (mp, mg) = (centroid(pred), centroid(gt));
    let x: Vec<Vec3> = pred.iter().map(|p| geometry::sub(p, &mp)).collect();
    let y: Vec<Vec3> = gt.iter().map(|p| geometry::sub(p, &mg)).collect();

    let (gt_spread, _) = symmetric_eigen(&outer_sum(&y, &y));
    if gt_spread[1] <= 1e-12 * gt_spread[0].max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("ground-truth joints are collinear or coincident".into()));
    }
    let norm_x: f64 = x.iter().map(|p| dot(p, p)).sum();
    if norm_x == 0.0 {
        return Ok(vec![mg; gt.len()]);
    }

    // M = Σ y xᵀ = U S Vᵀ; the best rotation is U·diag(1, 1, d)·Vᵀ.
    let m = outer_sum(&y, &x);
    let (eig, v) = symmetric_eigen(&geometry::mat_mul(&geometry::transpose(&m), &m));
    let sigma = eig.map(|l| l.max(0.0).sqrt());
    let rotation = if sigma[0] <= 0.0 {
        IDENTITY
    } else {
        let u1 = unit(&geometry::mat_vec(&m, &column(&v, 0)));
        let mv2 = geometry::mat_vec(&m, &column(&v, 1));
        let u2 = if sigma[1] > 1e-12 * sigma[0] {
            let w = geometry::sub(&mv2, &geometry::scale(&u1, dot(&mv2, &u1)));
            unit(&w)
        } else {
            orthogonal(&u1)
        };
        // With U = [u1, u2, u1 × u2] (a rotation), the reflection correction
        // reduces to the determinant of V.
        let u3 = geometry::scale(&cross(&u1, &u2), geometry::det(&v).signum());
        let u = [[u1[0], u2[0], u3[0]], [u1[1], u2[1], u3[1]], [u1[2], u2[2], u3[2]]];
        geometry::mat_mul(&u, &geometry::transpose(&v))
    };
    let trace: f64 = (0..3).map(|r| (0..3).map(|c| rotation[r][c] * m[r][c]).sum::<f64>()).sum();
    let s = trace / norm_x;
    Ok(x.iter().map(|p| geometry::add(&geometry::scale(&geometry::mat_vec(&rotation, p), s), &mg)).collect())
}
