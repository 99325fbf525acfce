//! Acceptance checks. Each test prints one PASS/FAIL line on stderr.

use bernstein_yett::bernstein::{BernsteinCopula, UnitPoints};
use bernstein_yett::centering::{CenteringCopula, CorrelationMatrix, ProjectionOptions, Projector};
use bernstein_yett::diagnostics::{ess, hellinger, PosteriorMean, Quadrature, SimulationModel};
use bernstein_yett::marginals::MarginalSet;
use bernstein_yett::mcmc::{
    fit_gaussian_copula, BaselineConfig, HitAndRunDraw, Observations, RunConfig, Sampler,
};
use bernstein_yett::numeric::gauss_legendre_interval;
use bernstein_yett::proposals::{propose, GreMove, VertexLine};
use bernstein_yett::{Dataset, Degree, DistanceKind, HastingsForm, PriorSpec, ProposalKind, RectangleExchange, YettCopula};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;
use std::time::Instant;

fn verdict(id: u32, what: &str, pass: bool, detail: String) {
    let line = format!("criterion {id:>2} {}: {what} [{detail}]\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{line}");
}

fn g_i() -> YettCopula {
    let m = [1., 1., 4., 2., 2., 4., 1., 1., 3., 1., 1., 3.];
    YettCopula::from_masses(Degree::new(vec![3, 4]).unwrap(), m.iter().map(|v| v / 24.0).collect()).unwrap()
}

fn icar(alpha: f64, centering: CenteringCopula) -> PriorSpec {
    PriorSpec { distance: DistanceKind::Icar, alpha, centering }
}

fn m2_points(n: usize) -> UnitPoints {
    let data = SimulationModel::M2.perfect_sample(n).unwrap();
    UnitPoints::from_rows(&SimulationModel::M2.mixture().pseudo_observations(&data)).unwrap()
}

/// Gaussian copula density computed directly from the normal quantile.
fn gaussian_copula_density(rho: f64, u: &[f64]) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let (x, y) = (n.inverse_cdf(u[0]), n.inverse_cdf(u[1]));
    let s = 1.0 - rho * rho;
    (-(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * s)).exp() / s.sqrt()
}

#[test]
fn criterion_01_gre_worked_example() {
    let t = Instant::now();
    let d = Degree::new(vec![3, 4]).unwrap();
    let mv = GreMove::from_cells(&d, &[vec![0, 2], vec![1, 3], vec![2, 1]], &[vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
    let g = g_i();
    let (lo, hi) = mv.bounds(&g);
    let c = mv.apply(&g, 9.0 / 800.0).unwrap();
    let s = 3.0 / 800.0;
    let printed = [1., 1., 4., 2., 2., 4., 1., 1., 3., 1., 1., 3.].map(|v| v / 24.0);
    let shift = [0., -s, s, 0., 0., 0., -s, s, 0., s, 0., -s];
    let err = c.masses().iter().zip(printed.iter().zip(&shift)).map(|(a, (p, sh))| (a - p - sh).abs()).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        1,
        "GRE worked example",
        lo == -3.0 / 24.0 && hi == 3.0 / 24.0 && err <= 1e-15 && secs < 1.0,
        format!("bounds ({lo}, {hi}), max entry error {err:.1e}, {secs:.3}s"),
    );
}

#[test]
fn criterion_02_vertex_line_worked_example() {
    let t = Instant::now();
    let (a, b) = (1.0 / 12.0, 0.25);
    let e = YettCopula::from_masses(Degree::new(vec![3, 4]).unwrap(), vec![0.0, a, 0.0, b, b, a, 0.0, 0.0, 0.0, a, b, 0.0])
        .unwrap();
    let g = g_i();
    let line = VertexLine::new(&g, e).unwrap();
    let eps_m = line.eps_max();
    let c = line.point(0.936).unwrap();
    let printed = [0.039, 0.044, 0.156, 0.094, 0.094, 0.161, 0.039, 0.039, 0.117, 0.044, 0.055, 0.117];
    let err = c.masses().iter().zip(&printed).map(|(x, p)| (x - p).abs()).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        2,
        "vertex-line worked example",
        (eps_m - 1.2).abs() < 1e-12 && err < 5e-4 && secs < 1.0,
        format!("eps_M {eps_m}, max entry error {err:.1e}, {secs:.3}s"),
    );
}

#[test]
fn criterion_03_structural_invariants() {
    let t = Instant::now();
    let mut failures = Vec::new();
    let mut moved = 0usize;
    for k in [vec![3, 4], vec![5, 5], vec![3, 3, 3]] {
        let d = Degree::new(k.clone()).unwrap();
        for kind in [
            ProposalKind::Ire { u: 3 },
            ProposalKind::Gre { u: 1 },
            ProposalKind::VertexLine { tau: 10.0, hastings: HastingsForm::Exact },
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut g = YettCopula::independence(&d);
            for step in 0..10_000 {
                if let Some(p) = propose(&kind, &g, &mut rng) {
                    if let Err(e) = p.candidate.validate(1e-12) {
                        failures.push(format!("{} on {k:?} step {step}: {e}", kind.name()));
                        break;
                    }
                    moved += usize::from(p.candidate != g);
                    g = p.candidate;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        3,
        "10^4 steps per kernel and degree stay valid",
        failures.is_empty() && moved > 50_000 && secs < 60.0,
        format!("{} moves, failures {failures:?}, {secs:.1}s", moved),
    );
}

#[test]
fn criterion_04_uniform_marginals_and_normalisation() {
    let t = Instant::now();
    let mut worst_marg: f64 = 0.0;
    let mut worst_int: f64 = 0.0;
    let (x, w) = gauss_legendre_interval(64, 0.0, 1.0);
    for k in [vec![4, 6], vec![5, 5], vec![7, 3]] {
        let d = Degree::new(k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = YettCopula::independence(&d);
        let mut applied = 0;
        while applied < 100 {
            let Some(ex) = RectangleExchange::random(&d, &mut rng) else { continue };
            let (lo, hi) = ex.bounds(&g);
            g = ex.apply(&g, lo + (hi - lo) * rng.random::<f64>()).unwrap();
            applied += 1;
        }
        let b = BernsteinCopula::new(&g);
        for i in 0..20 {
            let t = (i as f64 + 0.5) / 20.0;
            for axis in 0..2 {
                worst_marg = worst_marg.max((b.marginal_density(axis, t) - 1.0).abs());
                // the same marginal by integrating out the other axis
                let integral: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(s, ws)| ws * b.density(&if axis == 0 { [t, *s] } else { [*s, t] }))
                    .sum();
                worst_marg = worst_marg.max((integral - 1.0).abs());
            }
        }
        let total: f64 = x
            .iter()
            .zip(&w)
            .flat_map(|(a, wa)| x.iter().zip(&w).map(move |(c, wc)| (*a, *c, wa * wc)))
            .map(|(a, c, wt)| wt * b.density(&[a, c]))
            .sum();
        worst_int = worst_int.max((total - 1.0).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        4,
        "uniform marginals and unit mass after 100 exchanges",
        worst_marg < 1e-10 && worst_int < 1e-6 && secs < 60.0,
        format!("marginal error {worst_marg:.1e}, integral error {worst_int:.1e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_05_bernstein_convergence() {
    let t = Instant::now();
    let rho = 0.5;
    let centering = CenteringCopula::Gaussian(CorrelationMatrix::bivariate(rho).unwrap());
    let grid: Vec<f64> = (1..22).map(|i| i as f64 / 22.0).collect();
    let errors: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&k| {
            let d = Degree::uniform(2, k).unwrap();
            let g = Projector::new(&d, ProjectionOptions::default()).project(&centering).unwrap();
            let b = BernsteinCopula::new(&g);
            let mut sup: f64 = 0.0;
            for &u in &grid {
                for &v in &grid {
                    sup = sup.max((b.density(&[u, v]) - gaussian_copula_density(rho, &[u, v])).abs());
                }
            }
            sup
        })
        .collect();
    let secs = t.elapsed().as_secs_f64();
    verdict(
        5,
        "sup-grid error decreases over k = 5, 10, 20",
        errors[0] > errors[1] && errors[1] > errors[2] && secs < 120.0,
        format!("errors {errors:.4?}, {secs:.1}s"),
    );
}

/// CDF of the 2x2 polytope coordinate `a = W(1,1)` under the ICAR prior
/// centred at independence: density proportional to
/// `exp(-alpha/2 * 16 (a - 1/4)^2)` on `[0, 1/2]`, integrated by Simpson.
fn prior_cdf_2x2(alpha: f64) -> impl Fn(f64) -> f64 {
    let m = 20_000;
    let h = 0.5 / m as f64;
    let f = |a: f64| (-0.5 * alpha * 16.0 * (a - 0.25).powi(2)).exp();
    let mut cum = vec![0.0; m + 1];
    for i in 0..m {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        cum[i + 1] = cum[i] + h / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    }
    let total = cum[m];
    move |a: f64| {
        let x = (a / h).clamp(0.0, m as f64);
        let i = (x.floor() as usize).min(m - 1);
        let frac = x - i as f64;
        (cum[i] + frac * (cum[i + 1] - cum[i])) / total
    }
}

fn ks_distance(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let f = cdf(a);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_06_stationarity() {
    let alpha = 10.0;
    let kinds = [
        ProposalKind::Ire { u: 1 },
        ProposalKind::Gre { u: 1 },
        ProposalKind::VertexLine { tau: 10.0, hastings: HastingsForm::Exact },
    ];
    let results: Vec<(String, f64, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&kind| {
                s.spawn(move || {
                    let t = Instant::now();
                    let mut cfg = RunConfig::new(
                        Degree::uniform(2, 2).unwrap(),
                        kind,
                        icar(alpha, CenteringCopula::Independence),
                    );
                    cfg.iterations = 1_000_000;
                    cfg.seed = 6;
                    let mut sampler = Sampler::new(cfg, Observations::none(2)).unwrap();
                    let mut draws = Vec::with_capacity(1_000_000);
                    sampler
                        .run(|r| {
                            draws.push(r.masses[0]);
                            Ok(())
                        })
                        .unwrap();
                    (kind.name().to_string(), ks_distance(draws, prior_cdf_2x2(alpha)), t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let pass = results.iter().all(|(_, ks, secs)| *ks < 0.02 && *secs < 300.0);
    let detail = results.iter().map(|(n, ks, secs)| format!("{n} KS {ks:.4} {secs:.1}s")).collect::<Vec<_>>().join(", ");
    verdict(6, "10^6-step chains match the 2x2 ICAR prior", pass, detail);
}

/// Posterior (or prior, with no points) mean Bernstein density and its
/// Hellinger distance to the Model 2 copula.
fn m2_posterior_hellinger(points: Option<UnitPoints>, iterations: usize) -> f64 {
    let degree = Degree::uniform(2, 10).unwrap();
    let mut cfg = RunConfig::new(degree.clone(), ProposalKind::Ire { u: 2 }, icar(10.0, CenteringCopula::Independence));
    cfg.iterations = iterations;
    cfg.burnin = iterations / 4;
    cfg.thin = 10;
    cfg.seed = 7;
    let obs = points.map_or_else(|| Observations::none(2), Observations::copula);
    let mut sampler = Sampler::new(cfg, obs).unwrap();
    let mut mean = PosteriorMean::new();
    sampler.run(|r| mean.push(&r.copula(&degree)?)).unwrap();
    let g = mean.mean().unwrap();
    let b = BernsteinCopula::new(&g);
    hellinger(|z| b.density(z), |z| gaussian_copula_density(0.5, z), 2, Quadrature::default_for(2))
}

#[test]
fn criterion_07_posterior_concentration() {
    let t = Instant::now();
    let (prior, small, large) = std::thread::scope(|s| {
        let p = s.spawn(|| m2_posterior_hellinger(None, 200_000));
        let a = s.spawn(|| m2_posterior_hellinger(Some(m2_points(600)), 200_000));
        let b = s.spawn(|| m2_posterior_hellinger(Some(m2_points(2500)), 200_000));
        (p.join().unwrap(), a.join().unwrap(), b.join().unwrap())
    });
    let secs = t.elapsed().as_secs_f64();
    verdict(
        7,
        "Hellinger to Model 2: n=2500 < n=600 < prior",
        large < small && small < prior && secs < 1800.0,
        format!("prior {prior:.4}, n=600 {small:.4}, n=2500 {large:.4}, {secs:.1}s"),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_cell_ess(points: &UnitPoints, kind: ProposalKind, seed: u64) -> f64 {
    let degree = Degree::uniform(2, 5).unwrap();
    let mut cfg = RunConfig::new(degree.clone(), kind, icar(10.0, CenteringCopula::Independence));
    cfg.iterations = 100_000;
    cfg.burnin = 20_000;
    cfg.thin = 10;
    cfg.seed = seed;
    let mut sampler = Sampler::new(cfg, Observations::copula(points.clone())).unwrap();
    let mut cells = vec![Vec::new(); degree.cell_count()];
    sampler
        .run(|r| {
            for (c, m) in r.masses.iter().enumerate() {
                cells[c].push(*m);
            }
            Ok(())
        })
        .unwrap();
    median(cells.iter().map(|x| ess(x).unwrap().value).collect())
}

#[test]
fn criterion_08_ess_ordering() {
    let t = Instant::now();
    let points = m2_points(600);
    let ire = ProposalKind::Ire { u: 2 };
    let vertex = ProposalKind::VertexLine { tau: 100.0, hastings: HastingsForm::Exact };
    let runs: Vec<(f64, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=3u64)
            .map(|seed| {
                let p = &points;
                s.spawn(move || (median_cell_ess(p, ire, seed), median_cell_ess(p, vertex, seed)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let ire_med = median(runs.iter().map(|r| r.0).collect());
    let vl_med = median(runs.iter().map(|r| r.1).collect());
    let secs = t.elapsed().as_secs_f64();
    verdict(
        8,
        "median cell ESS: IRE >= vertex-line over 3 seeds",
        ire_med >= vl_med && secs < 1200.0,
        format!("per seed (IRE, vertex) {runs:.0?}; medians {ire_med:.0} vs {vl_med:.0}, {secs:.1}s"),
    );
}

fn ames() -> Option<Dataset> {
    let path = std::env::var("AMES_CSV")
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|_| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ames_price_area.csv"));
    let text = std::fs::read_to_string(path).ok()?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect();
    Dataset::from_rows(&rows).ok()
}

#[test]
fn criterion_09_waic_ordering() {
    let t = Instant::now();
    let Some(full) = ames() else {
        verdict(9, "BYU WAIC < Gaussian-copula WAIC on Ames", false, "Ames data not found; set AMES_CSV".into());
        return;
    };
    let data = full.subsample(1000, 0);
    let set = MarginalSet::empirical(&data).unwrap();
    let obs = Observations::data(data, set).unwrap();
    let baseline = fit_gaussian_copula(obs.points(), &BaselineConfig::default()).unwrap();
    let mut cfg = RunConfig::new(Degree::uniform(2, 10).unwrap(), ProposalKind::Ire { u: 2 }, icar(10.0, CenteringCopula::Independence));
    cfg.iterations = 150_000;
    cfg.burnin = 50_000;
    cfg.thin = 10;
    let summary = Sampler::new(cfg, obs).unwrap().run(|_| Ok(())).unwrap();
    let byu = summary.waic.unwrap().waic;
    let gauss = baseline.waic.waic;
    let secs = t.elapsed().as_secs_f64();
    verdict(
        9,
        "BYU WAIC < Gaussian-copula WAIC on an Ames subsample",
        byu < gauss && secs < 1800.0,
        format!("BYU {byu:.1}, Gaussian {gauss:.1}, {secs:.1}s"),
    );
}

#[test]
fn criterion_10_hit_and_run() {
    let t = Instant::now();
    let r0 = CorrelationMatrix::from_rows(4, &[1.0, 0.4, 0.6, 0.7, 0.4, 1.0, 0.7, 0.3, 0.6, 0.7, 1.0, 0.2, 0.7, 0.3, 0.2, 1.0])
        .unwrap();
    let mut cfg = RunConfig::new(Degree::uniform(4, 3).unwrap(), ProposalKind::Ire { u: 1 }, icar(10.0, CenteringCopula::Gaussian(r0)));
    cfg.r_hr = 0.3;
    cfg.seed = 10;
    let mut sampler = Sampler::new(cfg, Observations::none(4)).unwrap();
    let mut worst = f64::INFINITY;
    let mut accepted = 0;
    for _ in 0..10_000 {
        sampler.update_g();
        accepted += usize::from(sampler.update_r().unwrap());
        worst = worst.min(sampler.state().r.unwrap().least_eigenvalue());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut zero_ok = 0;
    for _ in 0..1000 {
        let z: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        zero_ok += usize::from(sampler.update_r_with(&HitAndRunDraw { delta: 0.0, z }).unwrap());
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        10,
        "hit-and-run keeps R positive definite; zero steps accepted",
        worst > 0.0 && zero_ok == 1000 && accepted > 0 && secs < 60.0,
        format!("least eigenvalue seen {worst:.4}, {accepted} accepted moves, {zero_ok}/1000 zero steps accepted, {secs:.1}s"),
    );
}
