//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Seeds are fixed up front.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use isoflow::disorder::{
    annealed_closed_g, gibbs_expectation, quenched_average_seeded, quenched_closed_g, ThermalParams,
};
use isoflow::equilibrium::{density, marginal_bin_probabilities, mean_cos_coupling, CanonicalParams};
use isoflow::experiment::{run, Command, ExperimentConfig};
use isoflow::flow::{alignment_norm, integrate, Analytic2x2Solution, FlowParams, FlowVariant};
use isoflow::fokker_planck::{discrete_stationary_profile, evolve_to_stationarity, mean_cos_of_profile, FpGrid};
use isoflow::hermitian::{angle_difference, eigensystem, to_bloch, BlochDecomposition, HermitianMatrix};
use isoflow::quadrature::GaussLegendre;
use isoflow::stats::{ks_two_sample, stream_rng, total_variation, Histogram, MeanEstimate};
use isoflow::stochastic::{run_ensemble, EnsembleResult, EnsembleSpec, NoiseConfig, Scheme, Thermalizer};
use isoflow::su3::{
    build_frame, partition_function, quadrature_z, sample_frame_volume, trace_hg, PartitionMethod, Su3Frame,
    TOTAL_VOLUME,
};
use isoflow::Convention;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn max_over<T>(xs: impl IntoIterator<Item = T>, f: impl Fn(T) -> f64) -> f64 {
    xs.into_iter().map(f).fold(0.0, f64::max)
}

fn sigma_z_reference() -> HermitianMatrix {
    HermitianMatrix::z_reference(0.0, 2.0)
}

fn flow_error(dt: f64) -> f64 {
    let b = BlochDecomposition::new(0.0, 1.0, FRAC_PI_2, 0.0);
    let exact = Analytic2x2Solution::new(&b, 1.0, 2.0).unwrap();
    let traj = integrate(&b.to_matrix(), &sigma_z_reference(), &FlowParams::new(1.0, dt, 5.0)).unwrap();
    max_over(&traj.samples, |s| s.h.sub(&exact.at(s.t)).unwrap().frobenius_norm())
}

fn c1_flow_vs_closed_form() -> Verdict {
    let start = Instant::now();
    let e1 = flow_error(1e-3);
    let elapsed = start.elapsed();
    let e2 = flow_error(5e-4);
    let ratio = e1 / e2;
    verdict(
        e1 < 1e-6 && (12.0..20.0).contains(&ratio) && elapsed < Duration::from_secs(1),
        format!("max error {e1:.2e} at dt=1e-3, halving ratio {ratio:.1}, {elapsed:.2?}"),
    )
}

fn c2_isospectrality() -> Verdict {
    let start = Instant::now();
    let b = BlochDecomposition::new(0.3, 1.0, 1.0, 0.7);
    let det = integrate(&b.to_matrix(), &sigma_z_reference(), &FlowParams::new(1.0, 1e-3, 10.0)).unwrap();
    let h3 = Su3Frame::new([1.1, 2.0, 0.4, 0.3, 1.2, 2.5], [-1.0, 0.2, 1.5]);
    let g3 = HermitianMatrix::diagonal(&[-1.0, 0.0, 1.0]);
    let det3 = integrate(&isoflow::su3::hamiltonian(&h3), &g3, &FlowParams::new(1.0, 1e-3, 10.0)).unwrap();
    let det_drift = det.max_eigen_drift.max(det3.max_eigen_drift);

    let mut spec = EnsembleSpec::new(1, 1e-3, 100.0, Scheme::MatrixConjugation);
    spec.keep_trajectories = true;
    spec.record_stride = 1000;
    let m2 = Thermalizer::two_level(&b, 0.0, 2.0, 1.0, Convention::Section6, 21).unwrap();
    let m3 = Thermalizer::new(isoflow::su3::hamiltonian(&h3), g3, 1.0, NoiseConfig::canonical(22)).unwrap();
    let sto_drift = run_ensemble(&m2, &spec)
        .unwrap()
        .max_eigen_drift()
        .max(run_ensemble(&m3, &spec).unwrap().max_eigen_drift());
    let elapsed = start.elapsed();
    verdict(
        det_drift < 1e-8 && sto_drift < 1e-10 && elapsed < Duration::from_secs(10),
        format!("deterministic drift {det_drift:.2e}, 1e5 stochastic steps (2x2 and 3x3) drift {sto_drift:.2e}, {elapsed:.2?}"),
    )
}

fn c3_alignment() -> Verdict {
    let b = BlochDecomposition::new(0.4, 1.0, 1.0, 0.3);
    let g = sigma_z_reference();
    let (lambda, mu) = (1.0, 2.0);
    let omega = lambda * b.nu * mu;
    let h0 = b.to_matrix();
    let traj = integrate(&h0, &g, &FlowParams::new(lambda, 1e-3, 20.0 / omega)).unwrap();
    let h = &traj.last().h;
    let comm = alignment_norm(h, &g).unwrap();
    let off = h.get(0, 1).norm();
    let dtr = (h.trace() - h0.trace()).abs();
    let ddet = (h.determinant() - h0.determinant()).abs();
    verdict(
        comm < 1e-6 && off < 1e-6 && dtr < 1e-10 && ddet < 1e-10,
        format!("|[H,G]| {comm:.2e}, |H_01| {off:.2e}, trace drift {dtr:.1e}, det drift {ddet:.1e}"),
    )
}

fn c4_unitary_variant() -> Verdict {
    let b = BlochDecomposition::new(0.0, 1.0, PI / 3.0, 0.5);
    let g = sigma_z_reference();
    let mu = 2.0;
    let p = FlowParams::new(1.0, 1e-3, 5.0);
    let pure = integrate(&b.to_matrix(), &g, &p).unwrap();
    let spiral = integrate(&b.to_matrix(), &g, &p.with_variant(FlowVariant::WithUnitary)).unwrap();
    let mut phase: f64 = 0.0;
    let mut polar: f64 = 0.0;
    for (a, s) in pure.samples.iter().zip(&spiral.samples) {
        let (ba, bs) = (to_bloch(&a.h).unwrap(), to_bloch(&s.h).unwrap());
        polar = polar.max((ba.theta - bs.theta).abs());
        phase = phase.max(angle_difference(bs.phi, b.phi + mu * s.t).abs());
    }
    verdict(
        phase < 1e-6 && polar < 1e-8,
        format!("max |phi_t - phi0 - mu t| {phase:.2e}, max |theta_t - theta_t(pure)| {polar:.2e}"),
    )
}

const PATHS: usize = 10_000;
const BINS: usize = 50;

fn section6_model(seed: u64) -> Thermalizer {
    let b = BlochDecomposition::new(0.0, 1.0, FRAC_PI_2, 0.0);
    Thermalizer::two_level(&b, 0.0, 2.0, 1.0, Convention::Section6, seed).unwrap()
}

fn ensemble(scheme: Scheme, seed: u64) -> EnsembleResult {
    let model = section6_model(seed);
    let omega = model.omega().unwrap();
    run_ensemble(&model, &EnsembleSpec::new(PATHS, 1e-3, 10.0 / omega, scheme)).unwrap()
}

fn c5_stationary(angle: &EnsembleResult, elapsed: Duration) -> Verdict {
    let cos = angle.cos_theta_samples();
    let est = MeanEstimate::from_samples(&cos);
    let target = -0.3130353;
    let z = (est.mean - target) / est.standard_error;
    let hist = Histogram::new(-1.0, 1.0, BINS, cos.iter().copied()).probabilities();
    let tv = total_variation(&hist, &marginal_bin_probabilities(1.0, BINS));
    verdict(
        z.abs() < 3.0 && tv < 0.03 && elapsed < Duration::from_secs(60),
        format!(
            "<cos> {:.4} +/- {:.4} ({z:+.2} SE), TV {tv:.4}, {elapsed:.2?}",
            est.mean, est.standard_error
        ),
    )
}

fn c6_scheme_equivalence(angle: &EnsembleResult) -> Verdict {
    let a = angle.cos_theta_samples();
    let z = ensemble(Scheme::ZEm, 2).cos_theta_samples();
    let m = ensemble(Scheme::MatrixConjugation, 3).cos_theta_samples();
    let (az, am, zm) = (ks_two_sample(&a, &z), ks_two_sample(&a, &m), ks_two_sample(&z, &m));
    verdict(
        az.max(am).max(zm) < 0.03,
        format!("KS angle/z {az:.4}, angle/matrix {am:.4}, z/matrix {zm:.4}"),
    )
}

fn c7_fokker_planck() -> Verdict {
    let start = Instant::now();
    let d = 2.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for lambda_mu in [0.5, 2.0, 10.0] {
        let omega = lambda_mu;
        let grid = FpGrid::at_cfl_limit(256, d).unwrap();
        let q0 = grid.bump(FRAC_PI_2, 0.1);
        let out = evolve_to_stationarity(&q0, &grid, omega, d, 1e-6, 10_000_000).unwrap();
        let l1 = grid.l1_distance(&out.profile, &discrete_stationary_profile(&grid, omega, d));
        let dm = (mean_cos_of_profile(&out.profile, &grid) - mean_cos_coupling(lambda_mu)).abs();
        pass &= l1 < 1e-3 && dm < 0.002;
        parts.push(format!("lambda*mu={lambda_mu}: L1 {l1:.1e}, |d<cos>| {dm:.1e}"));
    }
    let elapsed = start.elapsed();
    verdict(
        pass && elapsed < Duration::from_secs(30),
        format!("{}, {elapsed:.2?}", parts.join("; ")),
    )
}

/// Quenched average by quadrature over the equilibrium density, without the
/// closed form.
fn quenched_by_quadrature(p: &CanonicalParams, beta: f64) -> f64 {
    let g = sigma_z_reference();
    GaussLegendre::new(96).integrate(0.0, PI, |t| {
        let h = BlochDecomposition::new(p.u0, p.nu, t, 0.0).to_matrix();
        0.5 * PI * t.sin() * density(t, p) * gibbs_expectation(&g, &h, beta).unwrap()
    })
}

fn c8_disorder() -> Verdict {
    let g = sigma_z_reference();
    let mut worst: f64 = 0.0;
    let mut k = 0u64;
    for beta in [0.5, 1.0, 2.0, 5.0, 20.0] {
        for lambda in [1.0, 2.0, 5.0, 10.0, 20.0] {
            let p = CanonicalParams::new(lambda, 2.0, 1.0);
            let t = ThermalParams::new(beta).unwrap();
            let mc = quenched_average_seeded(&g, &p, &t, 100_000, 800 + k).unwrap();
            k += 1;
            worst = worst.max((mc.mean - quenched_closed_g(&p, &t).unwrap()).abs() / mc.standard_error);
        }
    }
    let p = CanonicalParams::new(10.0, 2.0, 1.0);
    let cold = ThermalParams::new(f64::INFINITY).unwrap();
    let q_inf = quenched_closed_g(&p, &cold).unwrap();
    let a_inf = annealed_closed_g(&p, &cold).unwrap();
    let mut dominance = true;
    for i in 0..20 {
        for j in 0..20 {
            let p = CanonicalParams::new(0.1 * 1.5f64.powi(j), 2.0, 1.0);
            let t = ThermalParams::new(0.05 * 1.5f64.powi(i)).unwrap();
            dominance &= annealed_closed_g(&p, &t).unwrap() >= quenched_closed_g(&p, &t).unwrap();
        }
    }
    let lm: f64 = 20.0;
    let deficit = 1.0 - quenched_by_quadrature(&p, 1e6);
    let expected = 2.0 / lm - (1.0 / (0.5 * lm).tanh() - 1.0);
    let dd = (deficit - expected).abs();
    verdict(
        worst < 3.0 && (q_inf - 0.9).abs() < 5e-5 && (a_inf - 1.0).abs() < 1e-12 && dominance && dd < 1e-6,
        format!(
            "worst MC deviation {worst:.2} SE over 25 points, <G>_Q(inf) {q_inf:.7}, <G>_A(inf) {a_inf:.7}, dominance {dominance}, deficit error {dd:.1e}"
        ),
    )
}

fn c9_su3() -> Verdict {
    let start = Instant::now();
    let e = [-1.0, 0.0, 1.0];
    let mut rng = stream_rng(900, 0);
    let mut unitarity: f64 = 0.0;
    for _ in 0..1000 {
        let f = Su3Frame::new(
            [
                PI * rng.random::<f64>(),
                PI * rng.random::<f64>(),
                PI * rng.random::<f64>(),
                2.0 * PI * rng.random::<f64>(),
                2.0 * PI * rng.random::<f64>(),
                2.0 * PI * rng.random::<f64>(),
            ],
            e,
        );
        unitarity = unitarity.max(build_frame(&f).unitarity_defect());
    }

    let quad = PartitionMethod::Quadrature { nodes: 48 };
    let mc = |seed| PartitionMethod::MonteCarlo {
        samples: 10_000_000,
        seed,
    };
    let haar = |seed| PartitionMethod::Haar {
        samples: 4_000_000,
        seed,
    };
    let mut z0_err: f64 = 0.0;
    for m in [quad, mc(901), haar(902)] {
        let z = partition_function(&e, &e, 0.0, m).unwrap().z;
        z0_err = z0_err.max((z / TOTAL_VOLUME - 1.0).abs());
    }
    let mut spread: f64 = 0.0;
    for (k, lambda) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let zs = [
            partition_function(&e, &e, lambda, quad).unwrap().z,
            partition_function(&e, &e, lambda, mc(910 + k as u64)).unwrap().z,
            partition_function(&e, &e, lambda, haar(920 + k as u64)).unwrap().z,
        ];
        for a in zs {
            for b in zs {
                spread = spread.max((a / b - 1.0).abs());
            }
        }
    }
    let lambdas: Vec<f64> = (0..10).map(|k| 0.25 * k as f64).collect();
    let logz: Vec<f64> = lambdas.iter().map(|&l| quadrature_z(&e, &e, l, 24).ln()).collect();
    let convex = logz.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-9);

    // stochastic matrix flow against the dV-weighted law exp(-lambda' tr(HG))
    let h0 = HermitianMatrix::diagonal(&[1.0, 0.0, -1.0]);
    let g = HermitianMatrix::diagonal(&e);
    let model = Thermalizer::new(h0, g, 1.0, NoiseConfig::canonical(930)).unwrap();
    let lambda_eff = model.effective_coupling();
    let res = run_ensemble(&model, &EnsembleSpec::new(PATHS, 2e-3, 2.5, Scheme::MatrixConjugation)).unwrap();
    let bins = 20;
    let empirical = Histogram::new(-2.0, 2.0, bins, res.energies()).probabilities();
    let mut rng = stream_rng(931, 0);
    let mut reference = vec![0.0; bins];
    for _ in 0..1_000_000 {
        let f = sample_frame_volume(e, &mut rng);
        let t = trace_hg(&f, &e);
        let k = (((t + 2.0) / 4.0 * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        reference[k] += (-lambda_eff * t).exp();
    }
    let total: f64 = reference.iter().sum();
    reference.iter_mut().for_each(|x| *x /= total);
    let tv = total_variation(&empirical, &reference);
    let spectrum_kept = res.paths.iter().filter_map(|p| p.terminal_matrix.as_ref()).all(|h| {
        eigensystem(h)
            .unwrap()
            .values
            .iter()
            .zip(&[-1.0, 0.0, 1.0])
            .all(|(a, b)| (a - b).abs() < 1e-10)
    });
    let elapsed = start.elapsed();
    verdict(
        unitarity < 1e-12
            && z0_err < 1e-3
            && spread < 5e-3
            && convex
            && tv < 0.05
            && spectrum_kept
            && elapsed < Duration::from_secs(300),
        format!(
            "unitarity {unitarity:.1e}, Z(0) rel err {z0_err:.1e}, method spread {spread:.1e}, log Z convex {convex}, SDE TV {tv:.4} (lambda'={lambda_eff}), {elapsed:.2?}"
        ),
    )
}

fn config(command: Command, out: &Path, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut o: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    o.insert("out".into(), out.display().to_string());
    o.insert("seed".into(), "11".into());
    ExperimentConfig::resolve(command, &BTreeMap::new(), &o).unwrap()
}

fn c10_mean_cos_curve() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    run(&config(Command::Figures, dir.path(), &[("which", "3")])).unwrap();
    let text = fs::read_to_string(dir.path().join("fig3_mean_cos.csv")).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    // rows run from small to large tau, i.e. from large to small lambda
    let monotone = rows.windows(2).all(|w| w[1].1 > w[0].1);
    let (first, last) = (rows[0].1, rows[rows.len() - 1].1);
    verdict(
        monotone && first < -0.98 && last.abs() < 0.01,
        format!(
            "{} points, decreasing in lambda {monotone}, <cos>(tau=0.01) {first:.4}, <cos>(tau=100) {last:.4}",
            rows.len()
        ),
    )
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().is_some_and(|x| x == "csv")).then(|| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
        })
        .collect()
}

fn c11_determinism() -> Verdict {
    let cases: Vec<(Command, Vec<(&str, &str)>)> = vec![
        (Command::Flow, vec![]),
        (
            Command::Thermalize,
            vec![("paths", "300"), ("keep_trajectories", "true")],
        ),
        (
            Command::Thermalize,
            vec![
                ("paths", "50"),
                ("scheme", "matrix_conjugation"),
                ("dim", "3"),
                ("t_final", "0.5"),
            ],
        ),
        (Command::Equilibrium, vec![("samples", "5000")]),
        (Command::Fpde, vec![("n_theta", "64"), ("tol", "1e-4")]),
        (Command::Averages, vec![("points", "10"), ("samples", "500")]),
        (Command::Partition, vec![("nodes", "12"), ("samples", "20000")]),
        (Command::Figures, vec![("points", "20"), ("samples", "300")]),
    ];
    let mut identical = true;
    let mut files = 0;
    for (cmd, pairs) in &cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(&config(*cmd, a.path(), pairs)).unwrap();
        run(&config(*cmd, b.path(), pairs)).unwrap();
        let (fa, fb) = (csv_bytes(a.path()), csv_bytes(b.path()));
        identical &= !fa.is_empty() && fa == fb;
        files += fa.len();
    }
    verdict(
        identical,
        format!("{} runs, {files} CSV files byte-identical: {identical}", cases.len()),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: &str, name: &str, v: Verdict| {
        println!("[{}] {id} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    };
    report("1", "deterministic flow vs closed form", c1_flow_vs_closed_form());
    report("2", "isospectrality", c2_isospectrality());
    report("3", "asymptotic alignment", c3_alignment());
    report("4", "unitary variant", c4_unitary_variant());
    let start = Instant::now();
    let angle = ensemble(Scheme::AngleEm, 1);
    let elapsed = start.elapsed();
    report("5", "stationary distribution", c5_stationary(&angle, elapsed));
    report("6", "scheme equivalence", c6_scheme_equivalence(&angle));
    report("7", "Fokker-Planck stationarity", c7_fokker_planck());
    report("8", "disorder averages", c8_disorder());
    report("9", "SU(3) frames and partition function", c9_su3());
    report("10", "mean cos(theta) curve", c10_mean_cos_curve());
    report("11", "determinism", c11_determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
