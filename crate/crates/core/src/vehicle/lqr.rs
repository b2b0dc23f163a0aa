use nalgebra::{Complex, DMatrix, DVector};

use super::VehicleError;

/// Continuous-time LQR gain with its Riccati certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrGain {
    /// Feedback row: `u = -k · x`.
    pub k: DVector<f64>,
    /// Stabilizing solution of the algebraic Riccati equation.
    pub p: DMatrix<f64>,
    /// Frobenius norm of the Riccati residual at `p`.
    pub residual: f64,
    /// Eigenvalues of `A - B·k`.
    pub closed_loop_eigs: Vec<Complex<f64>>,
}

impl LqrGain {
    pub fn max_real_eig(&self) -> f64 {
        self.closed_loop_eigs
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

const RESIDUAL_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;

/// `Aᵀ P + P A - P B R⁻¹ Bᵀ P + Q`.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pb = p * b;
    a.transpose() * p + p * a - &pb * pb.transpose() / r + q
}

/// Solves `Acᵀ X + X Ac = -M` through its Kronecker-product linear system.
fn lyapunov(ac: &DMatrix<f64>, m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = ac.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let act = ac.transpose();
    let op = eye.kronecker(&act) + act.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, m.iter().map(|v| -v));
    let x = op.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    m.complex_eigenvalues().iter().all(|z| z.re < 0.0)
}

/// Ackermann pole placement for a single-input system, poles at
/// `-1, -2, …, -n` scaled by `scale`.
fn ackermann(a: &DMatrix<f64>, b: &DMatrix<f64>, scale: f64) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut ctrb = DMatrix::<f64>::zeros(n, n);
    let mut col = b.column(0).into_owned();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = a * col;
    }
    let inv = ctrb.try_inverse()?;
    // Characteristic polynomial Π (s + scale·i) evaluated at A.
    let mut phi = DMatrix::<f64>::identity(n, n);
    for i in 1..=n {
        phi = &phi * (a + DMatrix::<f64>::identity(n, n) * (scale * i as f64));
    }
    let last = inv.row(n - 1).into_owned();
    let k = last * phi;
    Some(k.transpose())
}

/// LQR for `ẋ = A x + B u` with cost `∫ xᵀ Q x + r u²`.
///
/// Newton–Kleinman iteration from a stabilizing gain: zero when `A` is
/// already Hurwitz, otherwise an Ackermann pole placement. Each step solves a
/// Lyapunov equation; the result must meet a `1e-8` Riccati residual.
pub fn solve_lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
) -> Result<LqrGain, VehicleError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != 1 || q.shape() != (n, n) {
        return Err(VehicleError::BadParams(
            "LQR expects square A, a single-input B and matching Q".into(),
        ));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(VehicleError::BadParams(format!("R must be positive, got {r}")));
    }
    let mut k = if is_hurwitz(a) {
        DVector::zeros(n)
    } else {
        let scale = a.norm().max(1.0) / n as f64;
        [1.0, scale, 10.0 * scale]
            .into_iter()
            .filter_map(|s| ackermann(a, b, s))
            .find(|k| is_hurwitz(&(a - b * k.transpose())))
            .ok_or(VehicleError::Unstabilizable)?
    };

    let mut p = DMatrix::zeros(n, n);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_NEWTON {
        let ac = a - b * k.transpose();
        let m = q + &k * k.transpose() * r;
        p = lyapunov(&ac, &m).ok_or(VehicleError::Unstabilizable)?;
        let k_next: DVector<f64> = (b.transpose() * &p).row(0).transpose() / r;
        let step = (&k_next - &k).norm();
        k = k_next;
        residual = riccati_residual(a, b, q, r, &p).norm();
        if residual <= RESIDUAL_TOL * 1e-3 || (step <= 1e-14 * k.norm().max(1.0)) {
            break;
        }
    }
    if residual > RESIDUAL_TOL || !residual.is_finite() {
        return Err(VehicleError::NoConvergence { residual });
    }
    let closed = a - b * k.transpose();
    let closed_loop_eigs: Vec<Complex<f64>> = closed.complex_eigenvalues().iter().copied().collect();
    if closed_loop_eigs.iter().any(|z| z.re >= 0.0) {
        return Err(VehicleError::Unstabilizable);
    }
    Ok(LqrGain {
        k,
        p,
        residual,
        closed_loop_eigs,
    })
}
