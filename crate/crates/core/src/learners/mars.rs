//! Additive multivariate adaptive regression splines.
//!
//! Forward pass: greedily add the hinge basis that most reduces the residual
//! sum of squares. Candidate knots are scanned per predictor in sorted order using
//! prefix/suffix sums, so every observed value can be tried at O(terms) cost
//! per knot. Backward pass: delete terms one at a time and keep the subset with
//! the lowest GCV.
//!
//! The `PolyMars` variant adds single truncated-linear terms `max(0, x - c)`
//! and only after the unrestricted linear term of that predictor is present.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, lstsq_min_norm, mean, spd_solve};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarsVariant {
    Mars,
    PolyMars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarsConfig {
    /// Maximum number of terms including the intercept; `None` means `min(21, n/2)`.
    pub max_terms: Option<usize>,
    pub penalty: f64,
    /// Forward pass stops when the best candidate raises R² by less than this.
    pub threshold: f64,
    /// Observations excluded as knots at each end of a predictor's range;
    /// `None` uses `3 + log2(20 d)` capped at `n / 10`.
    pub end_span: Option<usize>,
}

impl Default for MarsConfig {
    fn default() -> Self {
        Self {
            max_terms: None,
            penalty: 2.0,
            threshold: 1e-3,
            end_span: None,
        }
    }
}

impl MarsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.penalty < 0.0 || !(self.threshold >= 0.0) {
            return Err(Error::Config("mars: penalty and threshold must be non-negative".into()));
        }
        if self.max_terms == Some(0) {
            return Err(Error::Config("mars: max_terms must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BasisTerm {
    Intercept,
    Linear {
        var: usize,
    },
    /// `max(0, x - knot)`
    HingeUp {
        var: usize,
        knot: f64,
    },
    /// `max(0, knot - x)`
    HingeDown {
        var: usize,
        knot: f64,
    },
}

impl BasisTerm {
    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        match *self {
            BasisTerm::Intercept => 1.0,
            BasisTerm::Linear { var } => row[var],
            BasisTerm::HingeUp { var, knot } => (row[var] - knot).max(0.0),
            BasisTerm::HingeDown { var, knot } => (knot - row[var]).max(0.0),
        }
    }

    fn var(&self) -> Option<usize> {
        match *self {
            BasisTerm::Intercept => None,
            BasisTerm::Linear { var } | BasisTerm::HingeUp { var, .. } | BasisTerm::HingeDown { var, .. } => Some(var),
        }
    }

    fn is_hinge(&self) -> bool {
        matches!(self, BasisTerm::HingeUp { .. } | BasisTerm::HingeDown { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsModel {
    pub variant: MarsVariant,
    pub terms: Vec<BasisTerm>,
    pub coef: Vec<f64>,
    /// GCV of the selected (pruned) model.
    pub gcv: f64,
    /// GCV of the model at the end of the forward pass.
    pub forward_gcv: f64,
    pub forward_terms: usize,
}

impl MarsModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|row| self.terms.iter().zip(&self.coef).map(|(t, c)| c * t.eval(row)).sum())
            .collect()
    }

    pub fn knots(&self) -> Vec<(usize, f64)> {
        self.terms
            .iter()
            .filter_map(|t| match *t {
                BasisTerm::HingeUp { var, knot } | BasisTerm::HingeDown { var, knot } => Some((var, knot)),
                _ => None,
            })
            .collect()
    }
}

/// `GCV = (RSS/n) / (1 - C/n)^2` with `C = terms + penalty * (terms - 1)`.
pub fn gcv(rss: f64, n: usize, terms: usize, penalty: f64) -> f64 {
    let c = terms as f64 + penalty * (terms as f64 - 1.0);
    let nf = n as f64;
    if c >= nf {
        return f64::INFINITY;
    }
    (rss / nf) / (1.0 - c / nf).powi(2)
}

/// Orthonormal basis of the current model columns plus the residual.
struct Span {
    q: Vec<Vec<f64>>,
    resid: Vec<f64>,
}

impl Span {
    /// Adds `col` if it has a non-negligible component outside the span.
    fn push(&mut self, col: &[f64]) -> bool {
        let norm0 = dot(col, col);
        if norm0 == 0.0 {
            return false;
        }
        let mut v = col.to_vec();
        for _ in 0..2 {
            for q in &self.q {
                let p = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = dot(&v, &v);
        if norm <= ORTHO_TOL * norm0 {
            return false;
        }
        let s = norm.sqrt();
        v.iter_mut().for_each(|a| *a /= s);
        let p = dot(&v, &self.resid);
        self.resid.iter_mut().zip(&v).for_each(|(r, q)| *r -= p * q);
        self.q.push(v);
        true
    }

    fn rss(&self) -> f64 {
        dot(&self.resid, &self.resid)
    }
}

const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
enum Candidate {
    Pair { var: usize, knot: f64 },
    Up { var: usize, knot: f64 },
    Linear { var: usize },
    LinearUp { var: usize, knot: f64 },
}

/// Projections of a hinge column onto the current basis and residual.
struct Proj {
    qa: Vec<f64>,
    ra: f64,
    aa: f64,
}

impl Proj {
    fn resid_norm(&self) -> f64 {
        self.aa - self.qa.iter().map(|v| v * v).sum::<f64>()
    }
}

/// RSS reduction from adding column `a` (and optionally `b`) to the span.
fn pair_reduction(a: &Proj, b: Option<&Proj>) -> f64 {
    let mut red = 0.0;
    let na = a.resid_norm();
    let a_ok = a.aa > 0.0 && na > ORTHO_TOL * a.aa;
    if a_ok {
        red += a.ra * a.ra / na;
    }
    if let Some(b) = b {
        let nb = b.resid_norm();
        if b.aa > 0.0 && nb > ORTHO_TOL * b.aa {
            if a_ok {
                // a and b have disjoint support so a'b = 0 before orthogonalization
                let ab = -a.qa.iter().zip(&b.qa).map(|(x, y)| x * y).sum::<f64>();
                let nbb = nb - ab * ab / na;
                let rb = b.ra - ab / na * a.ra;
                if nbb > ORTHO_TOL * b.aa {
                    red += rb * rb / nbb;
                }
            } else {
                red += b.ra * b.ra / nb;
            }
        }
    }
    red
}

fn default_end_span(n: usize, d: usize) -> usize {
    let formula = (3.0 + (20.0 * d as f64).log2()).floor() as usize;
    formula.min((n / 10).max(1))
}

pub fn mars_build(x: &Matrix, y: &[f64], cfg: &MarsConfig, variant: MarsVariant) -> Result<MarsModel> {
    cfg.validate()?;
    let (n, d) = (x.rows(), x.cols());
    if n < 10 {
        return Err(Error::InvalidInput(format!("mars needs at least 10 rows, got {n}")));
    }
    let max_terms = cfg.max_terms.unwrap_or_else(|| 21.min(n / 2)).max(1);
    let end_span = cfg.end_span.unwrap_or_else(|| default_end_span(n, d));

    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
    let order: Vec<Vec<usize>> = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let non_constant: Vec<bool> = order.iter().zip(&cols).map(|(o, c)| c[o[0]] < c[o[n - 1]]).collect();

    let y_mean = mean(y);
    let ones = vec![1.0; n];
    let mut span = Span {
        q: Vec::new(),
        resid: y.to_vec(),
    };
    span.push(&ones);
    let tss = span.rss();

    let mut terms = vec![BasisTerm::Intercept];
    let mut columns = vec![ones];

    let scale = (tss / n as f64).sqrt().max(y_mean.abs()).max(1.0);
    let degenerate_y = tss <= 1e-24 * scale * scale * n as f64;

    loop {
        if degenerate_y {
            break;
        }
        let slots = max_terms.saturating_sub(terms.len());
        let need = if variant == MarsVariant::Mars { 2 } else { 1 };
        if slots < need {
            break;
        }
        let rss = span.rss();
        if rss <= 1e-12 * tss {
            break;
        }
        let mut best: Option<(f64, Candidate)> = None;
        let mut consider = |red: f64, cand: Candidate| {
            if red.is_finite() && best.is_none_or(|(b, _)| red > b) {
                best = Some((red, cand));
            }
        };
        for j in (0..d).filter(|&j| non_constant[j]) {
            let has_linear = terms
                .iter()
                .any(|t| matches!(t, BasisTerm::Linear { var } if *var == j));
            if variant == MarsVariant::PolyMars && !has_linear {
                let col = &cols[j];
                let a = Proj {
                    qa: span.q.iter().map(|q| dot(q, col)).collect(),
                    ra: dot(&span.resid, col),
                    aa: dot(col, col),
                };
                consider(pair_reduction(&a, None), Candidate::Linear { var: j });
                // a linear term plus one hinge spans the same space as a
                // mirrored hinge pair, so symmetric effects can still enter
                let mut as_linear_up = |red: f64, cand: Candidate| {
                    if let Candidate::Pair { var, knot } = cand {
                        consider(red, Candidate::LinearUp { var, knot });
                    }
                };
                scan_knots(
                    &cols[j],
                    &order[j],
                    &span,
                    end_span,
                    MarsVariant::Mars,
                    j,
                    &mut as_linear_up,
                );
                continue;
            }
            scan_knots(&cols[j], &order[j], &span, end_span, variant, j, &mut consider);
        }
        let Some((red, cand)) = best else { break };
        if red / tss < cfg.threshold {
            break;
        }
        let before = terms.len();
        let mut add = |term: BasisTerm| {
            let col: Vec<f64> = x.iter_rows().map(|r| term.eval(r)).collect();
            if span.push(&col) {
                terms.push(term);
                columns.push(col);
            }
        };
        match cand {
            Candidate::Pair { var, knot } => {
                add(BasisTerm::HingeUp { var, knot });
                add(BasisTerm::HingeDown { var, knot });
            }
            Candidate::Up { var, knot } => add(BasisTerm::HingeUp { var, knot }),
            Candidate::Linear { var } => add(BasisTerm::Linear { var }),
            Candidate::LinearUp { var, knot } => {
                add(BasisTerm::Linear { var });
                add(BasisTerm::HingeUp { var, knot });
            }
        }
        if terms.len() == before {
            break;
        }
    }

    let forward_terms = terms.len();
    let subset = prune(&columns, &terms, y, cfg.penalty, variant);
    let forward_gcv = gcv(span.rss().max(0.0), n, forward_terms, cfg.penalty);
    let chosen_terms: Vec<BasisTerm> = subset.0.iter().map(|&k| terms[k]).collect();
    let design = DMatrix::from_fn(n, subset.0.len(), |i, c| columns[subset.0[c]][i]);
    let coef = lstsq_min_norm(&design, &DVector::from_column_slice(y));
    Ok(MarsModel {
        variant,
        terms: chosen_terms,
        coef: coef.iter().copied().collect(),
        gcv: subset.1.min(forward_gcv),
        forward_gcv,
        forward_terms,
    })
}

/// Evaluates every admissible knot on one predictor.
fn scan_knots(
    col: &[f64],
    order: &[usize],
    span: &Span,
    end_span: usize,
    variant: MarsVariant,
    var: usize,
    consider: &mut impl FnMut(f64, Candidate),
) {
    let n = col.len();
    let m = span.q.len();
    // prefix sums over the sorted order of v_i and v_i * x_i for every basis
    // vector plus the residual (index m)
    let mut p1 = vec![0.0; (m + 1) * (n + 1)];
    let mut px = vec![0.0; (m + 1) * (n + 1)];
    let mut pxx = vec![0.0; n + 1];
    let mut psx = vec![0.0; n + 1];
    for (s, &i) in order.iter().enumerate() {
        let xi = col[i];
        pxx[s + 1] = pxx[s] + xi * xi;
        psx[s + 1] = psx[s] + xi;
        for k in 0..=m {
            let v = if k < m { span.q[k][i] } else { span.resid[i] };
            p1[k * (n + 1) + s + 1] = p1[k * (n + 1) + s] + v;
            px[k * (n + 1) + s + 1] = px[k * (n + 1) + s] + v * xi;
        }
    }
    let total = |arr: &[f64], k: usize| arr[k * (n + 1) + n];
    let at = |arr: &[f64], k: usize, s: usize| arr[k * (n + 1) + s];

    let mut s = 0;
    while s < n {
        // [s, e) is a run of equal values
        let c = col[order[s]];
        let mut e = s + 1;
        while e < n && col[order[e]] == c {
            e += 1;
        }
        let below = e; // points with x <= c
        let above = n - e; // points with x > c
        let start = s;
        s = e;
        if below < end_span.max(1) || above < end_span.max(1) {
            continue;
        }
        // up hinge: positions >= e; down hinge: positions < start
        let mut up = Proj {
            qa: Vec::with_capacity(m),
            ra: 0.0,
            aa: 0.0,
        };
        for k in 0..=m {
            let sx = total(&px, k) - at(&px, k, e);
            let s1 = total(&p1, k) - at(&p1, k, e);
            let v = sx - c * s1;
            if k < m {
                up.qa.push(v);
            } else {
                up.ra = v;
            }
        }
        let cnt = above as f64;
        let sxx = pxx[n] - pxx[e];
        let sx1 = psx[n] - psx[e];
        up.aa = (sxx - 2.0 * c * sx1 + c * c * cnt).max(0.0);

        match variant {
            MarsVariant::PolyMars => consider(pair_reduction(&up, None), Candidate::Up { var, knot: c }),
            MarsVariant::Mars => {
                let mut down = Proj {
                    qa: Vec::with_capacity(m),
                    ra: 0.0,
                    aa: 0.0,
                };
                for k in 0..=m {
                    let v = c * at(&p1, k, start) - at(&px, k, start);
                    if k < m {
                        down.qa.push(v);
                    } else {
                        down.ra = v;
                    }
                }
                let cnt_down = start as f64;
                down.aa = (c * c * cnt_down - 2.0 * c * psx[start] + pxx[start]).max(0.0);
                consider(pair_reduction(&up, Some(&down)), Candidate::Pair { var, knot: c });
            }
        }
    }
}

/// Backward elimination; returns the selected term indices and their GCV.
fn prune(
    columns: &[Vec<f64>],
    terms: &[BasisTerm],
    y: &[f64],
    penalty: f64,
    variant: MarsVariant,
) -> (Vec<usize>, f64) {
    let n = y.len();
    let m = columns.len();
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let g = dot(&columns[a], &columns[b]);
            gram[a * m + b] = g;
            gram[b * m + a] = g;
        }
    }
    let cy: Vec<f64> = columns.iter().map(|c| dot(c, y)).collect();
    let yy = dot(y, y);

    let rss_of = |subset: &[usize]| -> f64 {
        let p = subset.len();
        let mut g = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        for (r, &i) in subset.iter().enumerate() {
            b[r] = cy[i];
            for (c, &j) in subset.iter().enumerate() {
                g[r * p + c] = gram[i * m + j];
            }
        }
        match spd_solve(&g, &b, p) {
            Some(beta) => (yy - dot(&beta, &b)).max(0.0),
            None => {
                let design = DMatrix::from_fn(n, p, |i, c| columns[subset[c]][i]);
                let yv = DVector::from_column_slice(y);
                let beta = lstsq_min_norm(&design, &yv);
                let r = yv - design * beta;
                r.dot(&r)
            }
        }
    };

    let mut current: Vec<usize> = (0..m).collect();
    let mut best = (current.clone(), gcv(rss_of(&current), n, m, penalty));
    while current.len() > 1 {
        let mut step: Option<(f64, usize)> = None;
        for (pos, &k) in current.iter().enumerate() {
            if terms[k] == BasisTerm::Intercept {
                continue;
            }
            if variant == MarsVariant::PolyMars {
                if let BasisTerm::Linear { var } = terms[k] {
                    let blocks = current
                        .iter()
                        .any(|&o| terms[o].is_hinge() && terms[o].var() == Some(var));
                    if blocks {
                        continue;
                    }
                }
            }
            let trial: Vec<usize> = current.iter().copied().filter(|&o| o != k).collect();
            let rss = rss_of(&trial);
            if step.is_none_or(|(r, _)| rss < r) {
                step = Some((rss, pos));
            }
        }
        let Some((rss, pos)) = step else { break };
        current.remove(pos);
        let g = gcv(rss, n, current.len(), penalty);
        if g <= best.1 {
            best = (current.clone(), g);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r2(pred: &[f64], y: &[f64]) -> f64 {
        let m = mean(y);
        let tss: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
        let rss: f64 = pred.iter().zip(y).map(|(p, o)| (p - o).powi(2)).sum();
        1.0 - rss / tss
    }

    #[test]
    fn finds_single_hinge() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let y: Vec<f64> = xs.iter().map(|v| (v - 0.5f64).max(0.0)).collect();
        let x = Matrix::column_vector(&xs);
        for variant in [MarsVariant::Mars, MarsVariant::PolyMars] {
            let m = mars_build(&x, &y, &MarsConfig::default(), variant).unwrap();
            let knots = m.knots();
            assert!(!knots.is_empty(), "{variant:?}: {:?}", m.terms);
            assert!(knots.iter().any(|&(_, k)| (k - 0.5).abs() <= 0.01 + 1e-12), "{knots:?}");
            assert!(r2(&m.predict(&x), &y) >= 0.99);
            assert!(m.gcv <= m.forward_gcv);
        }
    }

    #[test]
    fn constant_target_is_intercept_only() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let m = mars_build(
            &Matrix::column_vector(&xs),
            &[2.5; 30],
            &MarsConfig::default(),
            MarsVariant::Mars,
        )
        .unwrap();
        assert_eq!(m.terms, vec![BasisTerm::Intercept]);
        assert!((m.predict(&Matrix::column_vector(&[100.0]))[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn constant_predictors_give_intercept_only() {
        let x = Matrix::new(20, 2, vec![1.0; 40]).unwrap();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let m = mars_build(&x, &y, &MarsConfig::default(), MarsVariant::PolyMars).unwrap();
        assert_eq!(m.terms, vec![BasisTerm::Intercept]);
        assert!((m.coef[0] - 9.5).abs() < 1e-10);
    }

    #[test]
    fn too_few_rows() {
        let x = Matrix::column_vector(&[1.0; 5]);
        assert!(mars_build(&x, &[1.0; 5], &MarsConfig::default(), MarsVariant::Mars).is_err());
    }

    #[test]
    fn polymars_linear_precedes_hinges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let raw: Vec<f64> = (0..n * 3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let x = Matrix::new(n, 3, raw).unwrap();
        let y: Vec<f64> = x
            .iter_rows()
            .map(|r| (r[0] - 0.2).max(0.0) * 3.0 + r[1].abs() + 0.05 * rng.random::<f64>())
            .collect();
        let m = mars_build(&x, &y, &MarsConfig::default(), MarsVariant::PolyMars).unwrap();
        for t in &m.terms {
            if let BasisTerm::HingeUp { var, .. } = t {
                assert!(m.terms.contains(&BasisTerm::Linear { var: *var }), "{:?}", m.terms);
            }
            assert!(!matches!(t, BasisTerm::HingeDown { .. }));
        }
        assert!(r2(&m.predict(&x), &y) > 0.9, "{} {:?}", r2(&m.predict(&x), &y), m.terms);
        let mars = mars_build(&x, &y, &MarsConfig::default(), MarsVariant::Mars).unwrap();
        assert!(r2(&mars.predict(&x), &y) > 0.9);
        assert!(mars.terms.iter().all(|t| !matches!(t, BasisTerm::Linear { .. })));
    }

    #[test]
    fn pruning_never_raises_gcv() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 120;
            let raw: Vec<f64> = (0..n * 4).map(|_| rng.random::<f64>()).collect();
            let x = Matrix::new(n, 4, raw).unwrap();
            let y: Vec<f64> = x
                .iter_rows()
                .map(|r| (r[0] * 6.0).sin() + rng.random::<f64>())
                .collect();
            for variant in [MarsVariant::Mars, MarsVariant::PolyMars] {
                let m = mars_build(&x, &y, &MarsConfig::default(), variant).unwrap();
                assert!(m.gcv <= m.forward_gcv, "seed {seed}: {} > {}", m.gcv, m.forward_gcv);
                assert!(m.terms.len() <= m.forward_terms);
            }
        }
    }

    #[test]
    fn fast_scan_matches_direct_least_squares() {
        // the forward pass's first chosen pair must be the brute-force best pair
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = xs.iter().map(|v| (v * 5.0).cos() + 0.1 * rng.random::<f64>()).collect();
        let x = Matrix::column_vector(&xs);
        let cfg = MarsConfig {
            max_terms: Some(3),
            threshold: 0.0,
            end_span: Some(3),
            ..MarsConfig::default()
        };
        let m = mars_build(&x, &y, &cfg, MarsVariant::Mars).unwrap();
        assert_eq!(m.forward_terms, 3);

        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut best = (f64::INFINITY, 0.0);
        for &c in &sorted[2..n - 3] {
            let design = DMatrix::from_fn(n, 3, |i, k| match k {
                0 => 1.0,
                1 => (xs[i] - c).max(0.0),
                _ => (c - xs[i]).max(0.0),
            });
            let yv = DVector::from_column_slice(&y);
            let beta = lstsq_min_norm(&design, &yv);
            let r = &yv - &design * beta;
            let rss = r.dot(&r);
            if rss < best.0 {
                best = (rss, c);
            }
        }
        let chosen = m.knots();
        // pruning may drop one side, the knot stays
        assert!(chosen.iter().all(|&(_, k)| k == best.1), "{chosen:?} vs {}", best.1);
    }
}
