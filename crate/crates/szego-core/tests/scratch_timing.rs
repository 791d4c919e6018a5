//! Throwaway timing probes for sizing the acceptance suite (deleted
//! before completion).

use std::time::Instant;

use szego_core::continuum::{
    free_spectrum_interval, perturbed_spectrum_interval, PerturbedKernel,
};
use szego_core::lattice::fermi_projection;
use szego_core::model::{
    ContinuumParams, Domain, Engine, LatticeParams, ModelConfig, Potential,
};
use szego_core::schatten::diff_stats;
use szego_core::widom::N0Convention;

#[test]
#[ignore]
fn probe_block_decay() {
    let mk = |pot: Potential| ModelConfig {
        energy: 2.0,
        domain: Domain::interval(-1.0, 1.0).unwrap(),
        potential: pot,
        engine: Engine::Lattice,
        convention: N0Convention::Weyl,
        lattice: LatticeParams {
            spacing: 0.05,
            box_halfwidth: Some(60.0),
            margin_override: None,
            site_cap: 13_000,
        },
        continuum: ContinuumParams::default(),
    };
    let p =
        fermi_projection(&mk(Potential::square_well(1, -5.0, 1.0).unwrap()), 4.0, None).unwrap();
    let p0 = fermi_projection(&mk(Potential::zero(1).unwrap()), 4.0, None).unwrap();
    let blocks_idx: Vec<i64> = vec![1, 2, 3, 5, 8, 13, 21, 34];
    let t0 = Instant::now();
    let blocks =
        szego_core::lattice::difference_block_norms(&p, &p0, &blocks_idx, &blocks_idx).unwrap();
    println!("block norms: {} entries in {:?}", blocks.len(), t0.elapsed());
    let mut sorted = blocks.clone();
    sorted.sort_by(|a, b| a.sum_dist.total_cmp(&b.sum_dist));
    for b in &sorted {
        println!(
            "n={:3} m={:3} s={:5.1} frob={:.6e} frob*s={:.6e}",
            b.row_block,
            b.col_block,
            b.sum_dist,
            b.frobenius,
            b.frobenius * b.sum_dist
        );
    }
    let (c, pexp) = szego_core::lattice::fit_block_decay(&sorted).unwrap();
    println!("global fit: c={c:.4e} p={pexp:.4}");
    let third = sorted.len() / 3;
    let (c3, p3) = szego_core::lattice::fit_block_decay(&sorted[..third]).unwrap();
    println!("first-third fit: c={c3:.4e} p={p3:.4}");
    let mut worst: f64 = 0.0;
    for b in &sorted[third..] {
        let bound = c3 / b.sum_dist.powf(p3);
        worst = worst.max(b.frobenius / bound);
    }
    println!("validation worst frob/bound = {worst:.4}");
}

#[test]
#[ignore]
fn probe_renyi_family_fits() {
    use szego_core::asymptotics::{default_grid, fit_asymptotics, run_sweep, FitBasis};
    use szego_core::testfn::{renyi, LogBase};
    let cfg = ModelConfig {
        energy: 4.0,
        domain: Domain::interval(-1.0, 1.0).unwrap(),
        potential: Potential::zero(1).unwrap(),
        engine: Engine::ContinuumKernel,
        convention: N0Convention::Weyl,
        lattice: LatticeParams::default(),
        continuum: ContinuumParams::default(),
    };
    let grid = default_grid(1, 4.0).unwrap();
    let hs = vec![
        renyi(1.0, LogBase::Nats).unwrap(),
        renyi(2.0, LogBase::Nats).unwrap(),
        renyi(5.0, LogBase::Nats).unwrap(),
    ];
    let t0 = Instant::now();
    let table = run_sweep(&cfg, &grid, &hs, None, None).unwrap();
    println!("sweep: {:?}", t0.elapsed());
    let basis = FitBasis::full(1).unwrap();
    for h in &hs {
        let fit = fit_asymptotics(&table, h, &basis).unwrap();
        let b = fit.b_hat.unwrap();
        let alpha = match h.label() {
            "renyi:1:nats" => 1.0,
            "renyi:2:nats" => 2.0,
            _ => 5.0,
        };
        let expect = (1.0 + 1.0 / alpha) / 6.0;
        println!(
            "{}: b_hat={b:.6} expect={expect:.6} rel={:+.4e}",
            h.label(),
            b / expect - 1.0
        );
    }
}

#[test]
#[ignore]
fn probe_stability_criteria() {
    use szego_core::asymptotics::{default_grid, run_sweep, stability_report};
    use szego_core::testfn::{from_name, renyi, LogBase};
    let base = ModelConfig {
        energy: 4.0,
        domain: Domain::interval(-1.0, 1.0).unwrap(),
        potential: Potential::zero(1).unwrap(),
        engine: Engine::ContinuumKernel,
        convention: N0Convention::Weyl,
        lattice: LatticeParams::default(),
        continuum: ContinuumParams::default(),
    };
    let grid = default_grid(1, 4.0).unwrap();
    let hs = vec![
        renyi(2.0, LogBase::Nats).unwrap(),
        from_name("s:1").unwrap(),
        from_name("s:2").unwrap(),
    ];
    let t0 = Instant::now();
    let free = run_sweep(&base, &grid, &hs, None, None).unwrap();
    println!("free sweep: {:?}", t0.elapsed());
    for amp in [-5.0, 5.0] {
        let mut cfg = base.clone();
        cfg.potential = Potential::square_well(1, amp, 1.0).unwrap();
        let t0 = Instant::now();
        let pert = run_sweep(&cfg, &grid, &hs, None, None).unwrap();
        println!("v0={amp} sweep: {:?}", t0.elapsed());
        for h in &hs {
            let rep = stability_report(&pert, &free, h).unwrap();
            println!(
                "v0={amp} {}: b_V={:.6} b_0={:.6} rel={:+.3e} trend={} verdict={:?}",
                h.label(),
                rep.b_perturbed,
                rep.b_reference,
                rep.b_perturbed / rep.b_reference - 1.0,
                rep.trend_nonincreasing,
                rep.verdict
            );
            let ratios: Vec<f64> = rep.rows.iter().map(|r| r.ratio).collect();
            println!("  ratios: {ratios:.4?}");
        }
    }
}

#[test]
#[ignore]
fn probe_leading_order_fit() {
    use szego_core::asymptotics::{fit_asymptotics, geometric_grid, run_sweep, FitBasis};
    use szego_core::testfn::identity;
    let cfg = ModelConfig {
        energy: 1.0,
        domain: Domain::interval(-1.0, 1.0).unwrap(),
        potential: Potential::zero(1).unwrap(),
        engine: Engine::Lattice,
        convention: N0Convention::Weyl,
        lattice: LatticeParams {
            spacing: 0.1,
            box_halfwidth: None,
            margin_override: None,
            site_cap: 13_000,
        },
        continuum: ContinuumParams::default(),
    };
    let grid = geometric_grid(8.0, 30.0, 8).unwrap();
    let hs = vec![identity()];
    let t0 = Instant::now();
    let table = run_sweep(&cfg, &grid, &hs, None, None).unwrap();
    println!("sweep: {:?}", t0.elapsed());
    for basis in [FitBasis::leading(1).unwrap(), FitBasis::full(1).unwrap()] {
        let fit = fit_asymptotics(&table, &hs[0], &basis).unwrap();
        let a = fit.a_hat.unwrap();
        let expect = 2.0 / std::f64::consts::PI;
        println!(
            "basis={:?}: a_hat={a:.6} expect={expect:.6} rel={:+.4e}",
            fit.basis_labels,
            a / expect - 1.0
        );
    }
}

#[test]
#[ignore]
fn time_free_interval_rows() {
    let params = ContinuumParams::default();
    for &l in &[12.5f64, 50.0, 200.0] {
        let t0 = Instant::now();
        let spec = free_spectrum_interval(4.0, -l, l, &params).unwrap();
        println!(
            "free L={l}: n={} elapsed={:?}",
            spec.eigenvalues.len(),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn time_scattering_rows() {
    let params = ContinuumParams::default();
    let v = Potential::square_well(1, -5.0, 1.0).unwrap();
    let t0 = Instant::now();
    let kernel = PerturbedKernel::build(&v, 4.0, 200.0, &params).unwrap();
    println!("kernel build: {:?}", t0.elapsed());
    for &l in &[12.5f64, 50.0, 200.0] {
        let t0 = Instant::now();
        let spec = perturbed_spectrum_interval(&kernel, -l, l, &params).unwrap();
        println!(
            "scat L={l}: n={} elapsed={:?}",
            spec.eigenvalues.len(),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn time_lemma_suite_geometry() {
    for &(energy, amp, hw) in &[
        (4.0f64, -5.0f64, 1.0f64),
        (1.0, -5.0, 1.0),
        (2.0, -5.0, 1.0),
        (4.0, -2.0, 1.0),
        (4.0, -5.0, 0.5),
    ] {
        let mk = |pot: Potential| ModelConfig {
            energy,
            domain: Domain::interval(-1.0, 1.0).unwrap(),
            potential: pot,
            engine: Engine::Lattice,
            convention: N0Convention::Weyl,
            lattice: LatticeParams {
                spacing: 0.05,
                box_halfwidth: Some(60.0),
                margin_override: None,
                site_cap: 13_000,
            },
            continuum: ContinuumParams::default(),
        };
        let p =
            fermi_projection(&mk(Potential::square_well(1, amp, hw).unwrap()), 4.0, None).unwrap();
        let p0 = fermi_projection(&mk(Potential::zero(1).unwrap()), 4.0, None).unwrap();
        println!("=== E={energy} v0={amp} hw={hw}");
        let grid = szego_core::asymptotics::geometric_grid(4.0, 40.0, 8).unwrap();
        for &l in &grid {
            let domain = Domain::interval(-1.0, 1.0).unwrap().scaled(l).unwrap();
            let report = diff_stats(&p, &p0, &domain, l, &[1.0]).unwrap();
            println!(
                "L={l:7.3}: qdiff={:.5} pdiff2/lnL={:.5} |trdiff|/lnL={:.5} q2={:.6} phi={:.5}",
                report.qdiff_2,
                report.pdiff_2 * report.pdiff_2 / l.ln(),
                report.trdiff.abs() / l.ln(),
                report.q2_sq,
                report.phi,
            );
        }
    }
}
