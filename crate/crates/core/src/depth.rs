//! Per-pixel Laplacian depth distributions.
//!
//! A pixel's depth is modelled as Laplace(mu, b): density
//! `1/(2b) * exp(-|d - mu| / b)`. The CDF has the closed form
//!
//! ```text
//! F(x) = 1/2 * exp((x - mu) / b)        for x < mu
//! F(x) = 1 - 1/2 * exp(-(x - mu) / b)   for x >= mu
//! ```
//!
//! which makes the probability that a ray terminates before depth `d`
//! (`occlusion_prob`) and its complement (`visibility_prob`) cheap to
//! evaluate exactly. `visibility_prob(0)` is exactly 1 by construction: the
//! same `F(0)` rounding appears on both sides of the subtraction.

use crate::error::{Error, Result};
use crate::geometry::{bilinear_taps, Taps};
use crate::tensor::Tensor;

/// Smallest admissible diversity. Everything that builds parameters clamps
/// `b` up to this, keeping densities finite (peak 1/(2 * B_MIN) = 500).
pub const B_MIN: f64 = 1e-3;

/// One pixel's depth distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceParams {
    mu: f64,
    b: f64,
}

impl LaplaceParams {
    /// Validates `mu > 0` and clamps `b` up to [`B_MIN`].
    pub fn new(mu: f64, b: f64) -> Result<LaplaceParams> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(
                "mu",
                format!("must be positive and finite, got {}", mu),
            ));
        }
        if !b.is_finite() {
            return Err(Error::invalid("b", format!("must be finite, got {}", b)));
        }
        Ok(LaplaceParams {
            mu,
            b: b.max(B_MIN),
        })
    }

    pub(crate) fn raw(mu: f64, b: f64) -> LaplaceParams {
        debug_assert!(mu > 0.0 && b >= B_MIN);
        LaplaceParams { mu, b }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// Laplace density at depth `d`.
pub fn laplace_pdf(d: f64, prm: &LaplaceParams) -> f64 {
    (-(d - prm.mu).abs() / prm.b).exp() / (2.0 * prm.b)
}

/// Laplace CDF at `x`.
pub fn laplace_cdf(x: f64, prm: &LaplaceParams) -> f64 {
    if x < prm.mu {
        0.5 * ((x - prm.mu) / prm.b).exp()
    } else {
        1.0 - 0.5 * (-(x - prm.mu) / prm.b).exp()
    }
}

/// Probability that the pixel's surface lies in front of depth `d`, i.e.
/// that a point at depth `d >= 0` along this ray is occluded:
/// `B(d) = F(d) - F(0)`. `B(0)` is exactly 0.
pub fn occlusion_prob(d: f64, prm: &LaplaceParams) -> f64 {
    debug_assert!(d >= 0.0, "occlusion_prob needs d >= 0, got {}", d);
    laplace_cdf(d, prm) - laplace_cdf(0.0, prm)
}

/// Complement of [`occlusion_prob`]: `V(d) = 1 + F(0) - F(d)`.
/// `V(0)` is exactly 1.
pub fn visibility_prob(d: f64, prm: &LaplaceParams) -> f64 {
    debug_assert!(d >= 0.0, "visibility_prob needs d >= 0, got {}", d);
    // Grouping the two cdf evaluations first makes them cancel exactly at
    // d = 0, independent of how much mass sits behind the sensor.
    1.0 + (laplace_cdf(0.0, prm) - laplace_cdf(d, prm))
}

/// Dense H x W map of Laplace parameters; channel 0 holds mu, channel 1
/// holds b. Construction validates mu and clamps b, so every read yields
/// valid [`LaplaceParams`].
#[derive(Debug, Clone)]
pub struct DepthParamMap {
    t: Tensor,
}

impl DepthParamMap {
    pub fn new(t: Tensor) -> Result<DepthParamMap> {
        if t.rank() != 3 || t.dim(2) != 2 {
            return Err(Error::shape(
                "depth parameter map",
                "H x W x 2",
                format!("{:?}", t.dims()),
            ));
        }
        let mut t = t;
        let n = t.dim(0) * t.dim(1);
        let data = t.data_mut();
        for i in 0..n {
            let mu = data[2 * i];
            if !mu.is_finite() || mu <= 0.0 {
                return Err(Error::invalid(
                    "depth parameter map",
                    format!("mu must be positive, got {} at pixel {}", mu, i),
                ));
            }
            if (data[2 * i + 1] as f64) < B_MIN {
                data[2 * i + 1] = B_MIN as f32;
            }
        }
        Ok(DepthParamMap { t })
    }

    pub fn rows(&self) -> usize {
        self.t.dim(0)
    }

    pub fn cols(&self) -> usize {
        self.t.dim(1)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.t
    }

    pub fn into_tensor(self) -> Tensor {
        self.t
    }

    /// Parameters stored at an integer pixel.
    pub fn params_at(&self, row: usize, col: usize) -> LaplaceParams {
        let base = (row * self.cols() + col) * 2;
        let d = self.t.data();
        LaplaceParams::raw(d[base] as f64, (d[base + 1] as f64).max(B_MIN))
    }

    /// Bilinearly interpolated parameters at subpixel (u, v), or `None`
    /// outside the pixel rectangle. Both mu > 0 and b >= B_MIN survive
    /// convex combination.
    pub fn sample(&self, u: f64, v: f64) -> Option<LaplaceParams> {
        let taps = bilinear_taps(self.rows(), self.cols(), u, v)?;
        Some(self.sample_taps(&taps))
    }

    /// Interpolation with precomputed taps, for callers that already did
    /// the bounds check and want to reuse the taps for other maps.
    pub(crate) fn sample_taps(&self, taps: &Taps) -> LaplaceParams {
        let d = self.t.data();
        let cols = self.cols();
        let mut mu = 0.0f64;
        let mut b = 0.0f64;
        for &(r, c, w) in taps {
            let base = (r * cols + c) * 2;
            mu += w * d[base] as f64;
            b += w * d[base + 1] as f64;
        }
        LaplaceParams::raw(mu, b.max(B_MIN))
    }
}

/// One sparse ground-truth depth observation at an integer pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub row: usize,
    pub col: usize,
    pub depth: f64,
}

/// Parses an N x 3 tensor of (row, col, depth) rows into depth samples.
/// Pixel coordinates must be exact integers and depths positive.
pub fn sparse_from_tensor(t: &Tensor) -> Result<Vec<DepthSample>> {
    if t.rank() != 2 || t.dim(1) != 3 {
        return Err(Error::shape(
            "sparse depth",
            "N x 3",
            format!("{:?}", t.dims()),
        ));
    }
    let data = t.data();
    let mut out = Vec::with_capacity(t.dim(0));
    for i in 0..t.dim(0) {
        let (r, c, d) = (data[3 * i], data[3 * i + 1], data[3 * i + 2]);
        if r.fract() != 0.0 || c.fract() != 0.0 || r < 0.0 || c < 0.0 {
            return Err(Error::invalid(
                "sparse depth",
                format!("row {} has non-integral pixel ({}, {})", i, r, c),
            ));
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::invalid(
                "sparse depth",
                format!("row {} has non-positive depth {}", i, d),
            ));
        }
        out.push(DepthSample {
            row: r as usize,
            col: c as usize,
            depth: d as f64,
        });
    }
    Ok(out)
}

/// How per-sample loss terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NllReduction {
    /// Plain sum over samples.
    #[default]
    Sum,
    /// Sum divided by the number of samples.
    Mean,
}

fn nll_term(prm: &LaplaceParams, d_gt: f64) -> f64 {
    (2.0 * prm.b).ln() + (d_gt - prm.mu).abs() / prm.b
}

/// Negative log-likelihood of sparse depth observations under the map's
/// per-pixel distributions, read at integer pixels.
pub fn depth_nll(map: &DepthParamMap, gt: &[DepthSample], reduction: NllReduction) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::domain(
            "depth_nll needs at least one ground-truth sample",
        ));
    }
    let mut total = 0.0;
    for s in gt {
        if s.row >= map.rows() || s.col >= map.cols() {
            return Err(Error::invalid(
                "sparse depth",
                format!(
                    "pixel ({}, {}) outside {} x {} map",
                    s.row,
                    s.col,
                    map.rows(),
                    map.cols()
                ),
            ));
        }
        total += nll_term(&map.params_at(s.row, s.col), s.depth);
    }
    Ok(match reduction {
        NllReduction::Sum => total,
        NllReduction::Mean => total / gt.len() as f64,
    })
}

/// Analytic gradient of one sample's loss term with respect to (mu, b).
///
/// `d/dmu = -sign(d_gt - mu) / b` with the subgradient 0 at `d_gt == mu`,
/// and `d/db = 1/b - |d_gt - mu| / b^2`.
pub fn nll_grad_term(prm: &LaplaceParams, d_gt: f64) -> (f64, f64) {
    let r = d_gt - prm.mu;
    let dmu = if r == 0.0 { 0.0 } else { -r.signum() / prm.b };
    let db = 1.0 / prm.b - r.abs() / (prm.b * prm.b);
    (dmu, db)
}

/// Gradient of [`depth_nll`] with respect to the parameter map, as an
/// H x W x 2 tensor (channel 0 = d/dmu, channel 1 = d/db). Pixels without a
/// ground-truth sample get zeros; repeated pixels accumulate.
pub fn depth_nll_grad(
    map: &DepthParamMap,
    gt: &[DepthSample],
    reduction: NllReduction,
) -> Result<Tensor> {
    if gt.is_empty() {
        return Err(Error::domain(
            "depth_nll_grad needs at least one ground-truth sample",
        ));
    }
    let scale = match reduction {
        NllReduction::Sum => 1.0,
        NllReduction::Mean => 1.0 / gt.len() as f64,
    };
    let cols = map.cols();
    let mut grad = vec![0.0f64; map.rows() * cols * 2];
    for s in gt {
        if s.row >= map.rows() || s.col >= cols {
            return Err(Error::invalid(
                "sparse depth",
                format!(
                    "pixel ({}, {}) outside {} x {} map",
                    s.row,
                    s.col,
                    map.rows(),
                    cols
                ),
            ));
        }
        let (dmu, db) = nll_grad_term(&map.params_at(s.row, s.col), s.depth);
        let base = (s.row * cols + s.col) * 2;
        grad[base] += scale * dmu;
        grad[base + 1] += scale * db;
    }
    Tensor::from_vec(
        &[map.rows(), cols, 2],
        grad.into_iter().map(|v| v as f32).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn prm(mu: f64, b: f64) -> LaplaceParams {
        LaplaceParams::new(mu, b).unwrap()
    }

    /// Trapezoid integral of the density over the +-40b support window,
    /// where all but ~1e-18 of the mass lives.
    fn pdf_mass(p: &LaplaceParams, steps: usize) -> f64 {
        let lo = p.mu() - 40.0 * p.b();
        let hi = p.mu() + 40.0 * p.b();
        let h = (hi - lo) / steps as f64;
        let mut acc = 0.5 * (laplace_pdf(lo, p) + laplace_pdf(hi, p));
        for i in 1..steps {
            acc += laplace_pdf(lo + i as f64 * h, p);
        }
        acc * h
    }

    #[test]
    fn pdf_peak_and_decay() {
        let p = prm(10.0, 0.5);
        assert_relative_eq!(laplace_pdf(10.0, &p), 1.0, max_relative = 1e-15);
        assert_relative_eq!(laplace_pdf(10.5, &p), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(laplace_pdf(9.5, &p), (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn pdf_integrates_to_one() {
        for (mu, b) in [(10.0, 0.5), (3.0, 0.05), (55.0, 4.0)] {
            let p = prm(mu, b);
            assert_relative_eq!(pdf_mass(&p, 100_000), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn cdf_median_and_limits() {
        let p = prm(10.0, 1.0);
        assert_eq!(laplace_cdf(10.0, &p), 0.5);
        assert_relative_eq!(
            laplace_cdf(9.0, &p),
            0.5 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            laplace_cdf(11.0, &p),
            1.0 - 0.5 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_eq!(laplace_cdf(-1e9, &p), 0.0);
        assert_eq!(laplace_cdf(1e9, &p), 1.0);
    }

    #[test]
    fn occlusion_reference_values() {
        let p = prm(10.0, 1.0);
        assert_eq!(occlusion_prob(0.0, &p), 0.0);
        assert_relative_eq!(
            occlusion_prob(10.0, &p),
            0.5 - 0.5 * (-10.0f64).exp(),
            max_relative = 1e-14
        );
        // Monotone in d.
        let mut prev = -1.0;
        for i in 0..200 {
            let cur = occlusion_prob(i as f64 * 0.2, &p);
            assert!(cur >= prev);
            prev = cur;
        }
    }

    #[test]
    fn visibility_is_exact_at_zero_and_complements_occlusion() {
        for (mu, b) in [(0.5, 0.05), (10.0, 1.0), (60.0, 5.0), (7.3, 0.001)] {
            let p = prm(mu, b);
            assert_eq!(visibility_prob(0.0, &p), 1.0);
            for d in [0.0, 0.3, mu, mu + 2.0 * b, 1e6] {
                let sum = visibility_prob(d, &p) + occlusion_prob(d, &p);
                assert!((sum - 1.0).abs() <= 1e-12, "V+B = {} at d={}", sum, d);
            }
        }
        // Far limit: everything except the mass behind the sensor occludes.
        let p = prm(10.0, 1.0);
        assert_relative_eq!(
            visibility_prob(1e9, &p),
            0.5 * (-10.0f64).exp(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn params_clamp_and_validate() {
        assert_eq!(prm(5.0, 1e-9).b(), B_MIN);
        assert!(LaplaceParams::new(0.0, 1.0).is_err());
        assert!(LaplaceParams::new(-2.0, 1.0).is_err());
        assert!(LaplaceParams::new(f64::NAN, 1.0).is_err());
        assert!(LaplaceParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn param_map_validates_and_clamps() {
        let t = Tensor::from_vec(&[1, 2, 2], vec![5.0, 1.0, 8.0, 1e-6]).unwrap();
        let map = DepthParamMap::new(t).unwrap();
        assert_eq!(map.params_at(0, 0).mu(), 5.0);
        // The clamp happens in f32 storage.
        assert_eq!(map.params_at(0, 1).b(), B_MIN as f32 as f64);

        let bad = Tensor::from_vec(&[1, 1, 2], vec![0.0, 1.0]).unwrap();
        assert!(DepthParamMap::new(bad).is_err());
        let wrong_shape = Tensor::from_vec(&[1, 1, 3], vec![1.0, 1.0, 1.0]).unwrap();
        assert!(DepthParamMap::new(wrong_shape).is_err());
    }

    #[test]
    fn param_sampling_interpolates_mu_and_b() {
        // Two pixels: (mu 4, b 0.2) and (mu 8, b 0.6); midpoint mixes evenly.
        let t = Tensor::from_vec(&[1, 2, 2], vec![4.0, 0.2, 8.0, 0.6]).unwrap();
        let map = DepthParamMap::new(t).unwrap();
        let mid = map.sample(0.5, 0.0).unwrap();
        assert_relative_eq!(mid.mu(), 6.0, epsilon = 1e-7);
        assert_relative_eq!(mid.b(), 0.4, epsilon = 1e-7);
        assert!(map.sample(1.25, 0.0).is_none());
    }

    #[test]
    fn nll_reference_value() {
        let t = Tensor::from_vec(&[1, 1, 2], vec![5.0, 1.0]).unwrap();
        let map = DepthParamMap::new(t).unwrap();
        let gt = [DepthSample {
            row: 0,
            col: 0,
            depth: 6.0,
        }];
        let loss = depth_nll(&map, &gt, NllReduction::Sum).unwrap();
        assert_relative_eq!(loss, 2.0f64.ln() + 1.0, max_relative = 1e-14);
    }

    #[test]
    fn nll_mean_divides_by_count() {
        let t = Tensor::from_vec(&[1, 2, 2], vec![5.0, 1.0, 5.0, 1.0]).unwrap();
        let map = DepthParamMap::new(t).unwrap();
        let gt = [
            DepthSample {
                row: 0,
                col: 0,
                depth: 6.0,
            },
            DepthSample {
                row: 0,
                col: 1,
                depth: 4.0,
            },
        ];
        let sum = depth_nll(&map, &gt, NllReduction::Sum).unwrap();
        let mean = depth_nll(&map, &gt, NllReduction::Mean).unwrap();
        assert_relative_eq!(mean, sum / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn nll_rejects_empty_and_out_of_bounds() {
        let t = Tensor::from_vec(&[1, 1, 2], vec![5.0, 1.0]).unwrap();
        let map = DepthParamMap::new(t).unwrap();
        assert!(depth_nll(&map, &[], NllReduction::Sum).is_err());
        let outside = [DepthSample {
            row: 0,
            col: 1,
            depth: 3.0,
        }];
        assert!(depth_nll(&map, &outside, NllReduction::Sum).is_err());
    }

    #[test]
    fn grad_reference_values() {
        let p = prm(5.0, 1.0);
        let (dmu, db) = nll_grad_term(&p, 6.0);
        assert_eq!(dmu, -1.0);
        assert_eq!(db, 0.0);

        let (dmu, db) = nll_grad_term(&p, 5.0);
        assert_eq!(dmu, 0.0);
        assert_relative_eq!(db, 1.0, max_relative = 1e-15);

        let p = prm(5.0, 0.5);
        let (dmu, db) = nll_grad_term(&p, 3.0);
        assert_eq!(dmu, 1.0 / 0.5);
        assert_relative_eq!(db, 1.0 / 0.5 - 2.0 / 0.25, max_relative = 1e-15);
    }

    #[test]
    fn grad_matches_finite_differences_spot_check() {
        let h = 1e-4;
        for (mu, b, d) in [(5.0, 1.0, 6.3), (12.0, 0.4, 11.1), (3.0, 2.5, 9.0)] {
            let (dmu, db) = nll_grad_term(&prm(mu, b), d);
            let fd_mu = (nll_term(&prm(mu + h, b), d) - nll_term(&prm(mu - h, b), d)) / (2.0 * h);
            let fd_b = (nll_term(&prm(mu, b + h), d) - nll_term(&prm(mu, b - h), d)) / (2.0 * h);
            assert_relative_eq!(dmu, fd_mu, max_relative = 1e-4);
            assert_relative_eq!(db, fd_b, max_relative = 1e-4);
        }
    }

    #[test]
    fn grad_map_accumulates_and_scales() {
        let t = Tensor::from_vec(&[1, 2, 2], vec![5.0, 1.0, 5.0, 1.0]).unwrap();
        let map = DepthParamMap::new(t).unwrap();
        let gt = [
            DepthSample {
                row: 0,
                col: 0,
                depth: 6.0,
            },
            DepthSample {
                row: 0,
                col: 0,
                depth: 6.0,
            },
        ];
        let g = depth_nll_grad(&map, &gt, NllReduction::Sum).unwrap();
        assert_eq!(g.at(&[0, 0, 0]), -2.0);
        assert_eq!(g.at(&[0, 1, 0]), 0.0);
        let g = depth_nll_grad(&map, &gt, NllReduction::Mean).unwrap();
        assert_eq!(g.at(&[0, 0, 0]), -1.0);
    }

    #[test]
    fn sparse_tensor_parsing() {
        let t = Tensor::from_vec(&[2, 3], vec![0.0, 1.0, 7.5, 3.0, 2.0, 0.25]).unwrap();
        let s = sparse_from_tensor(&t).unwrap();
        assert_eq!(
            s[0],
            DepthSample {
                row: 0,
                col: 1,
                depth: 7.5
            }
        );
        assert_eq!(s[1].row, 3);

        let frac = Tensor::from_vec(&[1, 3], vec![0.5, 1.0, 7.5]).unwrap();
        assert!(sparse_from_tensor(&frac).is_err());
        let nonpos = Tensor::from_vec(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        assert!(sparse_from_tensor(&nonpos).is_err());
        let wrong = Tensor::from_vec(&[3], vec![0.0, 1.0, 7.5]).unwrap();
        assert!(sparse_from_tensor(&wrong).is_err());
    }
}
