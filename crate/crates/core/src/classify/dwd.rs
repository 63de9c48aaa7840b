//! Linear Distance Weighted Discrimination.
//!
//! The training problem is
//!
//! ```text
//! minimize    Σ 1/rᵢ + C Σ ξᵢ
//! subject to  rᵢ = yᵢ(w·xᵢ + b) + ξᵢ,  rᵢ > 0,  ξᵢ ≥ 0,  ‖w‖ ≤ 1.
//! ```
//!
//! For fixed `(w, b)` the optimal slack is `ξᵢ = max(0, 1/√C − uᵢ)` with
//! `uᵢ = yᵢ(w·xᵢ + b)`, which leaves the convex, continuously differentiable
//! loss `V(u) = 1/u` for `u ≥ 1/√C` and `2√C − C·u` below. The reduced problem
//! over the unit ball is solved by a Newton method whose subproblem is the
//! quadratic model minimized over the ball (a trust-region subproblem with the
//! bias eliminated), followed by an Armijo search along the feasible segment.
//!
//! Data are centered and divided by the median opposite-class distance before
//! solving; the problem is equivariant under that map, so the KKT residual is
//! measured in those normalized units, relative to the multiplier scale. The
//! iteration also stops when the predicted decrease of the Newton step is
//! below the rounding level of the objective and a full step no longer lowers
//! the residual.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::datamodel::format_number;
use crate::error::{Error, Result};

pub const KKT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 10_000;

/// Penalty `C` on the slacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `C = 100 / t²`, `t` the median distance between opposite-class points.
    Auto,
    Fixed(f64),
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Penalty::Auto => f.write_str("auto"),
            Penalty::Fixed(c) => write!(f, "{c}"),
        }
    }
}

impl std::str::FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Penalty::Auto);
        }
        match s.parse::<f64>() {
            Ok(c) if c > 0.0 && c.is_finite() => Ok(Penalty::Fixed(c)),
            _ => Err(Error::InvalidConfig(format!("bad penalty `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Objective `Σ 1/rᵢ + C Σ ξᵢ` at the solution, in data units.
    pub objective: f64,
    /// Objective after every iteration (normalized units).
    pub trace: Vec<f64>,
}

/// Trained DWD direction and intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: DVector<f64>,
    pub b: f64,
    pub penalty: f64,
    pub report: SolverReport,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w·x + b` for every row.
    pub fn decision(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        Ok((x * &self.w).add_scalar(self.b))
    }

    /// `(rᵢ, ξᵢ)` of the optimal slacks for the given training data.
    pub fn residuals(&self, x: &DMatrix<f64>, labels: &[i8]) -> Result<(Vec<f64>, Vec<f64>)> {
        let dec = self.decision(x)?;
        let u0 = 1.0 / self.penalty.sqrt();
        let mut r = Vec::with_capacity(labels.len());
        let mut xi = Vec::with_capacity(labels.len());
        for (i, &y) in labels.iter().enumerate() {
            let u = f64::from(y) * dec[i];
            let s = (u0 - u).max(0.0);
            r.push(u + s);
            xi.push(s);
        }
        Ok((r, xi))
    }

    /// Plain-text form: `dwd-v1`, then C, b and the entries of w, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("dwd-v1\n");
        out.push_str(&format_number(self.penalty));
        out.push('\n');
        out.push_str(&format_number(self.b));
        out.push('\n');
        for v in self.w.iter() {
            out.push_str(&format_number(*v));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("dwd-v1") {
            return Err(Error::ModelFormat("missing `dwd-v1` header".into()));
        }
        let nums = lines
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Error::ModelFormat(format!("bad number `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if nums.len() < 3 {
            return Err(Error::ModelFormat("expected C, b and at least one w entry".into()));
        }
        Ok(LinearModel {
            w: DVector::from_column_slice(&nums[2..]),
            b: nums[1],
            penalty: nums[0],
            report: SolverReport {
                iterations: 0,
                kkt_residual: f64::NAN,
                objective: f64::NAN,
                trace: Vec::new(),
            },
        })
    }
}

/// Median of pairwise Euclidean distances between opposite-class rows.
pub fn median_opposite_distance(x: &DMatrix<f64>, labels: &[i8]) -> f64 {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] < 0).collect();
    let mut dists = Vec::with_capacity(pos.len() * neg.len());
    for &i in &pos {
        for &j in &neg {
            let mut s = 0.0;
            for k in 0..x.ncols() {
                let d = x[(i, k)] - x[(j, k)];
                s += d * d;
            }
            dists.push(s.sqrt());
        }
    }
    let n = dists.len();
    if n == 0 {
        return f64::NAN;
    }
    let mid = n / 2;
    let (left, &mut upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub fn auto_penalty(x: &DMatrix<f64>, labels: &[i8]) -> f64 {
    let t = median_opposite_distance(x, labels);
    100.0 / (t * t)
}

/// Loss value and first two derivatives.
#[inline]
fn loss(u: f64, sqrt_c: f64) -> (f64, f64, f64) {
    if u * sqrt_c >= 1.0 {
        let inv = 1.0 / u;
        (inv, -inv * inv, 2.0 * inv * inv * inv)
    } else {
        let c = sqrt_c * sqrt_c;
        (2.0 * sqrt_c - c * u, -c, 0.0)
    }
}

/// Rows `yᵢ·[xᵢ, 1]` of the normalized problem.
struct Problem {
    z: DMatrix<f64>,
    sqrt_c: f64,
}

impl Problem {
    fn dim(&self) -> usize {
        self.z.ncols() - 1
    }

    fn objective(&self, theta: &DVector<f64>) -> f64 {
        let u = &self.z * theta;
        u.iter().map(|&ui| loss(ui, self.sqrt_c).0).sum()
    }

    fn derivatives(&self, theta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let u = &self.z * theta;
        let p = self.z.ncols();
        let mut f = 0.0;
        let mut d1 = DVector::zeros(u.len());
        let mut weighted = self.z.clone();
        for i in 0..u.len() {
            let (v, g, h) = loss(u[i], self.sqrt_c);
            f += v;
            d1[i] = g;
            let s = h.sqrt();
            for j in 0..p {
                weighted[(i, j)] *= s;
            }
        }
        let grad = self.z.tr_mul(&d1);
        let hess = weighted.tr_mul(&weighted);
        (f, grad, hess)
    }

    fn kkt_residual(&self, theta: &DVector<f64>, grad: &DVector<f64>) -> f64 {
        let d = self.dim();
        let w = theta.rows(0, d);
        let gw = grad.rows(0, d);
        let wn2 = w.norm_squared();
        let wn = wn2.sqrt();
        let lambda = if wn2 > 0.0 {
            (-gw.dot(&w) / wn2).max(0.0)
        } else {
            0.0
        };
        // Stationarity and complementarity relative to the multiplier scale.
        let stationarity = (gw + w * lambda).amax().max(grad[d].abs()) / (1.0 + lambda);
        stationarity
            .max(lambda * (1.0 - wn).abs() / (1.0 + lambda))
            .max((wn - 1.0).max(0.0))
    }
}

/// Minimizes `½ vᵀAv + cᵀv` over `‖v‖ ≤ 1` for symmetric positive definite `A`.
fn ball_qp(a: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let ct = eig.eigenvectors.tr_mul(c);
    let vals = &eig.eigenvalues;
    let norm2 = |lam: f64| -> (f64, f64) {
        let mut p2 = 0.0;
        let mut q2 = 0.0;
        for k in 0..ct.len() {
            let den = vals[k] + lam;
            p2 += ct[k] * ct[k] / (den * den);
            q2 += ct[k] * ct[k] / (den * den * den);
        }
        (p2, q2)
    };
    let mut lam = 0.0;
    let (p2, _) = norm2(0.0);
    if p2 > 1.0 {
        // Newton on 1/‖p(λ)‖ − 1, monotone from below.
        for _ in 0..200 {
            let (p2, q2) = norm2(lam);
            let pn = p2.sqrt();
            if (pn - 1.0).abs() <= 1e-15 {
                break;
            }
            let step = (p2 / q2) * (pn - 1.0);
            lam += step;
            if step.abs() <= 1e-16 * lam.max(1.0) {
                break;
            }
        }
    }
    let coef = DVector::from_fn(ct.len(), |k, _| -ct[k] / (vals[k] + lam));
    let mut v = &eig.eigenvectors * coef;
    let n = v.norm();
    if n > 1.0 || (lam > 0.0 && n > 0.0) {
        v /= n;
    }
    v
}

fn check_labels(labels: &[i8], rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: labels.len(),
        });
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::InvalidConfig("labels must be ±1".into()));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains a linear DWD classifier on rows of `x` with labels ±1.
pub fn dwd_train(x: &DMatrix<f64>, labels: &[i8], penalty: Penalty) -> Result<LinearModel> {
    let (m, d) = x.shape();
    check_labels(labels, m)?;
    if d == 0 {
        return Err(Error::DegenerateData("no features".into()));
    }
    let scale = median_opposite_distance(x, labels);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::DegenerateData(
            "classes are not distinguishable (zero opposite-class distance)".into(),
        ));
    }
    let c = match penalty {
        Penalty::Auto => 100.0 / (scale * scale),
        Penalty::Fixed(c) if c > 0.0 && c.is_finite() => c,
        Penalty::Fixed(c) => return Err(Error::InvalidConfig(format!("bad penalty {c}"))),
    };
    let center = x.row_mean();
    let mut z = DMatrix::zeros(m, d + 1);
    for i in 0..m {
        let y = f64::from(labels[i]);
        for j in 0..d {
            z[(i, j)] = y * (x[(i, j)] - center[j]) / scale;
        }
        z[(i, d)] = y;
    }
    let problem = Problem {
        z,
        sqrt_c: (c * scale * scale).sqrt(),
    };

    // Start from the normalized mean-difference direction.
    let mut theta = DVector::zeros(d + 1);
    let mut diff = DVector::zeros(d);
    for i in 0..m {
        // z rows carry the label sign, so every row adds toward the positive class.
        diff += problem.z.row(i).columns(0, d).transpose();
    }
    let dn = diff.norm();
    if dn > 0.0 {
        theta.rows_mut(0, d).copy_from(&(diff / dn));
    } else {
        theta[0] = 1.0;
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut at_rounding_floor = false;
    // Objective changes below this are not resolvable in floating point.
    let floor = 16.0 * f64::EPSILON * m as f64;
    while iterations < MAX_ITERATIONS {
        let (f, grad, hess) = problem.derivatives(&theta);
        residual = problem.kkt_residual(&theta, &grad);
        if trace.is_empty() {
            trace.push(f);
        }
        if residual <= KKT_TOLERANCE {
            break;
        }
        iterations += 1;

        let delta = 1e-10 * (1.0 + hess.diagonal().amax());
        let hbb = hess[(d, d)] + delta;
        let hwb = hess.view((0, d), (d, 1)).into_owned();
        let mut a = hess.view((0, 0), (d, d)).into_owned() - (&hwb * hwb.transpose()) / hbb;
        for k in 0..d {
            a[(k, k)] += delta;
        }
        a = (&a + a.transpose()) * 0.5;
        let w = theta.rows(0, d).into_owned();
        let gw = grad.rows(0, d) - &hwb * (grad[d] / hbb);
        let target = ball_qp(&a, &(gw - &a * &w));
        let pw = target - &w;
        let pb = -(grad[d] + hwb.column(0).dot(&pw)) / hbb;
        let mut step = DVector::zeros(d + 1);
        step.rows_mut(0, d).copy_from(&pw);
        step[d] = pb;

        let slope = grad.dot(&step);
        if slope >= 0.0 {
            break;
        }
        if -slope <= floor * (1.0 + f.abs()) {
            // Line search cannot see the decrease; take the full step while
            // the residual still improves.
            let cand = &theta + &step;
            let (fc, gc, _) = problem.derivatives(&cand);
            if problem.kkt_residual(&cand, &gc) < residual {
                theta = cand;
                trace.push(fc);
                continue;
            }
            at_rounding_floor = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = &theta + &step * t;
            let fc = problem.objective(&cand);
            if fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        debug_assert!(
            fc <= *trace.last().unwrap() + 1e-12 * trace.last().unwrap().abs().max(1.0),
            "DWD objective increased"
        );
        theta = cand;
        trace.push(fc);
    }
    if residual > KKT_TOLERANCE && !at_rounding_floor {
        let (_, grad, _) = problem.derivatives(&theta);
        residual = problem.kkt_residual(&theta, &grad);
        if residual > KKT_TOLERANCE {
            return Err(Error::NonConverged {
                iterations,
                residual,
            });
        }
    }

    let mut wn = theta.rows(0, d).into_owned();
    let norm = wn.norm();
    if norm > 1.0 {
        wn /= norm;
    }
    // Undo the normalization: w·(x − center)/scale + b' = (w·x + b)/scale.
    let b = scale * theta[d] - wn.dot(&center.transpose());
    let objective = problem.objective(&theta) / scale;
    Ok(LinearModel {
        w: wn,
        b,
        penalty: c,
        report: SolverReport {
            iterations,
            kkt_residual: residual,
            objective,
            trace,
        },
    })
}

/// `sign(w·x + b)` with ties mapped to +1.
pub fn dwd_predict(model: &LinearModel, x: &DMatrix<f64>) -> Result<Vec<i8>> {
    Ok(model
        .decision(x)?
        .iter()
        .map(|&v| if v >= 0.0 { 1 } else { -1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable_1d(eps: f64) -> (DMatrix<f64>, Vec<i8>) {
        let x = DMatrix::from_column_slice(4, 1, &[-1.0 - eps, -1.0 - 2.0 * eps, 1.0 + eps, 1.0 + 2.0 * eps]);
        (x, vec![-1, -1, 1, 1])
    }

    #[test]
    fn symmetric_separable_boundary_at_midpoint() {
        let (x, y) = separable_1d(0.1);
        let m = dwd_train(&x, &y, Penalty::Auto).unwrap();
        assert_eq!(dwd_predict(&m, &x).unwrap(), y);
        let boundary = -m.b / m.w[0];
        assert!(boundary.abs() < 1e-6, "boundary {boundary}");
        assert!(m.report.kkt_residual <= KKT_TOLERANCE);
    }

    #[test]
    fn single_class_rejected() {
        let x = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(
            dwd_train(&x, &[1, 1, 1], Penalty::Auto),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn tie_maps_to_positive() {
        let m = LinearModel::from_text("dwd-v1\n1\n0\n1\n0\n").unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, -3.0, 1.0]);
        assert_eq!(dwd_predict(&m, &x).unwrap(), vec![1, -1]);
        let bad = DMatrix::zeros(1, 3);
        assert!(matches!(
            dwd_predict(&m, &bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let (x, y) = separable_1d(0.3);
        let m = dwd_train(&x, &y, Penalty::Fixed(2.5)).unwrap();
        let back = LinearModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back.w, m.w);
        assert_eq!(back.b, m.b);
        assert_eq!(back.penalty, 2.5);
        assert!(LinearModel::from_text("svm\n1\n2\n3\n").is_err());
    }

    #[test]
    fn median_distance() {
        let (x, y) = separable_1d(0.0);
        assert_eq!(median_opposite_distance(&x, &y), 2.0);
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 3.0]);
        // distances 1 and 3
        assert_eq!(median_opposite_distance(&x, &[-1, 1, 1]), 2.0);
    }

    #[test]
    fn ball_qp_matches_closed_form() {
        let a = DMatrix::identity(2, 2);
        let c = DVector::from_vec(vec![-3.0, -4.0]);
        let v = ball_qp(&a, &c);
        assert!((v - DVector::from_vec(vec![0.6, 0.8])).amax() < 1e-12);
        let c = DVector::from_vec(vec![-0.3, 0.4]);
        let v = ball_qp(&a, &c);
        assert!((v - DVector::from_vec(vec![0.3, -0.4])).amax() < 1e-12);
    }

    #[test]
    fn overlapping_classes_converge() {
        let x = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 2.0, 0.5, 1.5, 2.5]);
        let y = [-1, 1, -1, 1, -1, 1];
        let m = dwd_train(&x, &y, Penalty::Auto).unwrap();
        assert!(m.report.kkt_residual <= KKT_TOLERANCE);
        assert!(m.w.norm() <= 1.0 + 1e-12);
        let (r, xi) = m.residuals(&x, &y).unwrap();
        assert!(r.iter().all(|&v| v > 0.0));
        assert!(xi.iter().all(|&v| v >= 0.0));
    }
}
