//! Dataset generation and analytic-vs-numeric gradient checks.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{DataConfig, LabelSource, Sampling};
use crate::arm::{interception_event, InterceptionPolicy, Trajectory};
use crate::blackbox::{Dataset, MlpModel, Normalization, Record};
use crate::error::{Error, Result};
use crate::greybox::{landing_with_event, predict_landing, predict_landing_with_gradient, GreyboxParams};
use crate::optimizer::FeasibleSet;
use crate::sim_env::{intercept, launch, EnvConfig};

/// The launcher's nominal ball, without jitter.
pub fn nominal_incoming(env: &EnvConfig) -> Trajectory {
    let quiet = env.noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    launch(&quiet.launcher, &quiet.truth_flight, &quiet.table, &quiet.geom, &mut rng)
}

/// Grid points in lexicographic order, `theta1` outer, both ends included.
pub fn grid_policies(b: &FeasibleSet, n1: usize, n4: usize) -> Vec<InterceptionPolicy> {
    let lin = |lo: f64, hi: f64, n: usize, i: usize| match (n, i) {
        (1, _) => 0.5 * (lo + hi),
        (_, i) if i + 1 == n => hi,
        _ => lo + (hi - lo) * i as f64 / (n - 1) as f64,
    };
    (0..n1)
        .flat_map(|i| {
            (0..n4).map(move |j| {
                InterceptionPolicy::new(
                    lin(b.theta1_bounds[0], b.theta1_bounds[1], n1, i),
                    lin(b.theta4_bounds[0], b.theta4_bounds[1], n4, j),
                )
            })
        })
        .collect()
}

pub fn uniform_policy<R: Rng + ?Sized>(b: &FeasibleSet, rng: &mut R) -> InterceptionPolicy {
    InterceptionPolicy::new(
        rng.random_range(b.theta1_bounds[0]..=b.theta1_bounds[1]),
        rng.random_range(b.theta4_bounds[0]..=b.theta4_bounds[1]),
    )
}

/// Labels policies with the environment or the noiseless grey-box model.
///
/// Misses are dropped. Grid sampling keeps whatever survives; uniform
/// sampling draws until `n` records exist and fails once the miss rate
/// exceeds `cfg.max_miss_rate`.
pub fn gen_dataset<R: Rng + ?Sized>(env: &EnvConfig, greybox: &GreyboxParams, cfg: &DataConfig, rng: &mut R) -> Result<Dataset> {
    let b = cfg.sampling_box()?;
    let nominal = nominal_incoming(env);
    let label = |phi: &InterceptionPolicy, rng: &mut R| -> Result<Vector2<f64>> {
        match cfg.source {
            LabelSource::Env => intercept(phi, env, rng).map(|(r, _)| r),
            LabelSource::Greybox => predict_landing(phi, &nominal, greybox),
        }
    };
    let mut records = Vec::new();
    match cfg.sampling {
        Sampling::Grid => {
            let grid = grid_policies(&b, cfg.grid[0], cfg.grid[1]);
            let total = grid.len();
            for phi in grid {
                match label(&phi, rng) {
                    Ok(r) => records.push(Record { phi, landing: r }),
                    Err(e) if e.is_miss() => {}
                    Err(e) => return Err(e),
                }
            }
            let rate = 1.0 - records.len() as f64 / total as f64;
            if rate > cfg.max_miss_rate {
                return Err(Error::InfeasibleRegion { rate });
            }
        }
        Sampling::Uniform => {
            let mut attempts = 0usize;
            while records.len() < cfg.n {
                let phi = uniform_policy(&b, rng);
                attempts += 1;
                match label(&phi, rng) {
                    Ok(r) => records.push(Record { phi, landing: r }),
                    Err(e) if e.is_miss() => {}
                    Err(e) => return Err(e),
                }
                let rate = 1.0 - records.len() as f64 / attempts as f64;
                if attempts >= 20 && rate > cfg.max_miss_rate {
                    return Err(Error::InfeasibleRegion { rate });
                }
            }
        }
    }
    Ok(Dataset { records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckPoint {
    pub phi: InterceptionPolicy,
    pub analytic: Matrix2<f64>,
    pub numeric: Matrix2<f64>,
    /// `|analytic - numeric|_F / |numeric|_F`.
    pub rel_error: f64,
    /// A probe changed the number of full flight steps; excluded from the statistics.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub points: Vec<GradCheckPoint>,
    pub median_rel_error: f64,
    pub max_rel_error: f64,
    pub n_flagged: usize,
}

impl GradCheckReport {
    fn from_points(points: Vec<GradCheckPoint>) -> Self {
        let mut errs: Vec<f64> = points.iter().filter(|p| !p.flagged).map(|p| p.rel_error).collect();
        errs.sort_by(f64::total_cmp);
        let median = match errs.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => errs[n / 2],
            n => 0.5 * (errs[n / 2 - 1] + errs[n / 2]),
        };
        Self {
            median_rel_error: median,
            max_rel_error: errs.last().copied().unwrap_or(f64::NAN),
            n_flagged: points.iter().filter(|p| p.flagged).count(),
            points,
        }
    }

    /// Worst errors first.
    pub fn failures(&self, tol: f64) -> Vec<&GradCheckPoint> {
        let mut f: Vec<_> = self.points.iter().filter(|p| !p.flagged && !(p.rel_error < tol)).collect();
        f.sort_by(|a, b| b.rel_error.total_cmp(&a.rel_error));
        f
    }
}

pub fn relative_error(analytic: &Matrix2<f64>, numeric: &Matrix2<f64>) -> f64 {
    (analytic - numeric).norm() / numeric.norm().max(f64::MIN_POSITIVE)
}

/// Grey-box Jacobian against central differences of the frozen-event map.
///
/// Policies are drawn uniformly from `b`; draws the nominal ball cannot
/// reach are redrawn.
pub fn grad_check_greybox(env: &EnvConfig, params: &GreyboxParams, b: &FeasibleSet, n_points: usize, fd_step: f64, seed: u64) -> Result<GradCheckReport> {
    let frozen = GreyboxParams {
        couple_geometry: false,
        ..params.clone()
    };
    let incoming = nominal_incoming(env);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    let mut misses = 0usize;
    while points.len() < n_points {
        let phi = uniform_policy(b, &mut rng);
        let pred = match predict_landing_with_gradient(&phi, &incoming, &frozen) {
            Ok(p) => p,
            Err(e) if e.is_miss() => {
                misses += 1;
                if misses > 100 * n_points {
                    return Err(Error::InfeasibleRegion { rate: 1.0 });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let event = interception_event(&incoming, &frozen.geom, phi.theta1)?;
        let mut numeric = Matrix2::zeros();
        let mut flagged = false;
        for c in 0..2 {
            let mut probe = |s: f64| -> Result<Vector2<f64>> {
                let mut v = phi.to_vector();
                v[c] += s * fd_step;
                let rec = landing_with_event(&InterceptionPolicy::from_vector(&v), &event, &frozen)?;
                flagged |= rec.k_max != pred.record.k_max;
                Ok(rec.landing_point)
            };
            let col = (probe(1.0)? - probe(-1.0)?) / (2.0 * fd_step);
            numeric.set_column(c, &col);
        }
        points.push(GradCheckPoint {
            phi,
            analytic: pred.jacobian,
            numeric,
            rel_error: relative_error(&pred.jacobian, &numeric),
            flagged,
        });
    }
    Ok(GradCheckReport::from_points(points))
}

/// Black-box Jacobian against central differences, each point with its own random model.
pub fn grad_check_blackbox(k: &FeasibleSet, n_points: usize, fd_step: f64, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n_points)
        .map(|_| {
            let norm = Normalization {
                input_center: k.center(),
                input_half_width: k.half_widths(),
                output_mean: Vector2::new(rng.random_range(-0.5..0.5), rng.random_range(1.5..3.0)),
                output_std: Vector2::new(rng.random_range(0.2..1.0), rng.random_range(0.2..1.0)),
            };
            let model = MlpModel::random(norm, &mut rng);
            let phi = uniform_policy(k, &mut rng);
            let analytic = model.jacobian(&phi);
            let mut numeric = Matrix2::zeros();
            for c in 0..2 {
                let mut p = phi.to_vector();
                p[c] += fd_step;
                let mut q = phi.to_vector();
                q[c] -= fd_step;
                let col = (model.forward(&InterceptionPolicy::from_vector(&p)) - model.forward(&InterceptionPolicy::from_vector(&q))) / (2.0 * fd_step);
                numeric.set_column(c, &col);
            }
            GradCheckPoint {
                phi,
                analytic,
                numeric,
                rel_error: relative_error(&analytic, &numeric),
                flagged: false,
            }
        })
        .collect();
    GradCheckReport::from_points(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_lexicographic_and_inclusive() {
        let b = FeasibleSet::new([-0.5, 0.5], [-0.3, 0.15]).unwrap();
        let g = grid_policies(&b, 10, 10);
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], InterceptionPolicy::new(-0.5, -0.3));
        assert_eq!(g[1].theta1, -0.5);
        assert!(g[1].theta4 > g[0].theta4);
        assert_eq!(g[99], InterceptionPolicy::new(0.5, 0.15));
    }

    #[test]
    fn median_excludes_flagged_points() {
        let mk = |e: f64, flagged: bool| GradCheckPoint {
            phi: InterceptionPolicy::default(),
            analytic: Matrix2::zeros(),
            numeric: Matrix2::identity(),
            rel_error: e,
            flagged,
        };
        let r = GradCheckReport::from_points(vec![mk(1.0, false), mk(3.0, false), mk(100.0, true), mk(2.0, false)]);
        assert_eq!(r.median_rel_error, 2.0);
        assert_eq!(r.max_rel_error, 3.0);
        assert_eq!(r.n_flagged, 1);
        assert_eq!(r.failures(1.5).len(), 2);
    }
}
