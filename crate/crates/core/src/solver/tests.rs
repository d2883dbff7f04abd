use super::*;
use crate::domain::{build_grid, DomainSpec, VertexId};
use crate::energy::{hs_norm_sq, quotient_j};

fn square(scale: f64, res: usize) -> Arc<Grid> {
    Arc::new(build_grid(&DomainSpec::square(scale), res).unwrap())
}

fn critical() -> EnergyParams {
    EnergyParams::allowing_critical(0.5, 4.0).unwrap()
}

#[test]
fn small_square_gives_constant() {
    let g = square(1.0, 16);
    let sol: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &SolveConfig::new(critical())).unwrap();
    assert!(sol.converged);
    assert!((sol.lambda - 1.0).abs() < 1e-8);
    assert!(sol.residual < 1e-8);
    let c = sol.field.values()[[0, 0]];
    assert!(sol.field.max_deviation(&Field::constant(g, c)).unwrap() < 1e-6);
}

#[test]
fn constant_is_local_min_under_probes() {
    // J(1 + εφ) ≥ J(1) for random low-frequency probes on the unit square
    let g = square(1.0, 16);
    let sym = symbol(&g, &BoundaryCondition::Neumann).unwrap();
    let p = critical();
    let base = quotient_j(&Field::constant(g.clone(), 1.0), &sym, &p).unwrap();
    for seed in 0..5u64 {
        let probe: Field<f64> = Init::ConstantPlusNoise { seed, amplitude: 1.0 }.build(&g, Topology::Bounded).unwrap();
        let pert = Field::constant(g.clone(), 1.0).axpy(1e-3, &probe).unwrap();
        assert!(quotient_j(&pert, &sym, &p).unwrap() >= base - 1e-14);
    }
}

#[test]
fn large_square_beats_constant() {
    let g = square(6.0, 6);
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.init = Init::CornerBump { vertex: VertexId::C0, width: 1.0 };
    let sol: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &cfg).unwrap();
    let constant = 36f64.powf(1.0 - 2.0 / 3.0);
    assert!(sol.lambda < 0.9 * constant, "{} vs {constant}", sol.lambda);
    assert!(sol.field.values().iter().all(|&v| v > 0.0));
}

#[test]
fn dirichlet_small_square_near_first_mode() {
    // near-linear exponent: the first Dirichlet mode nearly minimizes J
    let g = square(1.0, 16);
    let p = EnergyParams::new(0.5, 2.2).unwrap();
    let bc = BoundaryCondition::Dirichlet;
    let sol: Solution<f64> = minimize(&g, &bc, &SolveConfig::new(p)).unwrap();
    let psi = Field::from_fn(g.clone(), |x| (PI * x[0]).sin() * (PI * x[1]).sin());
    let sym = symbol(&g, &bc).unwrap();
    let oracle = quotient_j(&psi, &sym, &p).unwrap();
    assert!(sol.lambda <= oracle * (1.0 + 1e-12));
    assert!(sol.lambda > 0.95 * oracle);
    // closed form of the oracle: ((2π²)^s + 1)‖ψ‖²₂ / ‖ψ‖²_q
    let l2 = 0.25;
    let lq = psi.norm_lq(2.2);
    assert!((oracle - ((2.0 * PI * PI).sqrt() + 1.0) * l2 / (lq * lq)).abs() < 1e-10);
}

use std::f64::consts::PI;

#[test]
fn history_nonincreasing_and_nehari_consistent() {
    let g = square(3.0, 8);
    let p = EnergyParams::new(0.6, 3.0).unwrap();
    let sol: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &SolveConfig::new(p)).unwrap();
    for w in sol.history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
    let sym = symbol(&g, &BoundaryCondition::Neumann).unwrap();
    assert!((quotient_j(&sol.field, &sym, &p).unwrap() - sol.lambda).abs() < 1e-12 * sol.lambda);
    let lq = sol.field.norm_lq(p.q);
    assert!((lq - sol.lambda.powf(1.0 / (p.q - 2.0))).abs() < 1e-10 * lq);
}

#[test]
fn deterministic_and_constraints_empty_is_plain() {
    let g = square(3.0, 8);
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.max_iters = 50;
    let a: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &cfg).unwrap();
    let b: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &cfg).unwrap();
    let c: Solution<f64> = minimize_constrained(&g, &BoundaryCondition::Neumann, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn symmetrized_solve_is_invariant() {
    let d = DomainSpec::triangle_30_60_90(4.0);
    let g = Arc::new(Grid::new(&d, [24, 24]).unwrap());
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.max_iters = 200;
    let sol: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &cfg).unwrap();
    let grp = symmetry_group(&d, &g, Character::Even).unwrap();
    assert!(grp.invariance_defect(&sol.field).unwrap() < 1e-12 * sol.field.max_modulus());
    assert!(sol.field.values().iter().all(|&v| v >= 0.0));
}

#[test]
fn odd_triangle_solve_changes_sign_across_mirrors() {
    let d = DomainSpec::equilateral(3.0);
    let g = Arc::new(Grid::new(&d, [18, 18]).unwrap());
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.max_iters = 200;
    let sol: Solution<f64> = minimize(&g, &BoundaryCondition::Dirichlet, &cfg).unwrap();
    let grp = symmetry_group(&d, &g, Character::Odd).unwrap();
    assert!(grp.invariance_defect(&sol.field).unwrap() < 1e-12 * sol.field.max_modulus());
    let mask = fundamental_mask(&d, &g).unwrap();
    for (v, &m) in sol.field.values().iter().zip(mask.iter()) {
        if m {
            assert!(*v >= 0.0);
        }
    }
    assert!(sol.field.values().iter().any(|&v| v < 0.0));
}

#[test]
fn radialized_solve_is_shell_constant() {
    let g = square(4.0, 8);
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.radialize = true;
    cfg.max_iters = 100;
    let sol: Solution<f64> = minimize(&g, &BoundaryCondition::Periodic, &cfg).unwrap();
    let bins = radial_bins(&g);
    let u = sol.field.values().as_slice().unwrap();
    for (i, &b) in bins.iter().enumerate() {
        for (j, &c) in bins.iter().enumerate().skip(i + 1) {
            if b == c {
                assert!((u[i] - u[j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn complex_solve_for_generic_phase() {
    let g = Arc::new(Grid::new(&DomainSpec::square(2.0), [16, 16]).unwrap());
    let bc = BoundaryCondition::quasi(1.0, 0.5);
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.enforce_positivity = false;
    cfg.max_iters = 100;
    assert!(matches!(minimize::<f64>(&g, &bc, &cfg), Err(Error::NeedsComplex(_))));
    let sol = minimize_any(&g, &bc, &cfg).unwrap();
    assert!(matches!(sol, AnySolution::Complex(_)));
    assert!(sol.lambda().is_finite());
}

#[test]
fn multi_start_keeps_best() {
    let g = square(6.0, 6);
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.max_iters = 300;
    cfg.extra_starts = vec![Init::CornerBump { vertex: VertexId::C2, width: 1.0 }];
    let best: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &cfg).unwrap();
    let mut only_first = cfg.clone();
    only_first.extra_starts.clear();
    let first: Solution<f64> = minimize(&g, &BoundaryCondition::Neumann, &only_first).unwrap();
    assert!(best.lambda <= first.lambda);
}

#[test]
fn constraint_caps_vertex_mass() {
    let d = DomainSpec::triangle_30_60_90(6.0);
    let g = Arc::new(Grid::new(&d, [36, 36]).unwrap());
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.init = Init::CornerBump { vertex: VertexId::X, width: 0.5 };
    cfg.constraints = vec![MassConstraint::at_vertex(VertexId::X)];
    cfg.max_iters = 5;
    let sol: Solution<f64> = minimize_constrained(&g, &BoundaryCondition::Neumann, &cfg).unwrap();
    assert!(sol.constraint_fraction[0] <= default_theta_q(3.0) * (1.0 + 1e-9));
}

#[test]
fn invalid_configs() {
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.max_iters = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.tol_j = 0.0;
    assert!(cfg.validate().is_err());
    let g = square(1.0, 8);
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.symmetrize = Some(Symmetrize::Full { character: Character::Odd });
    let d = DomainSpec::equilateral(1.0);
    let t = Arc::new(Grid::new(&d, [12, 12]).unwrap());
    assert!(minimize::<f64>(&t, &BoundaryCondition::Neumann, &cfg).is_err());
    cfg.symmetrize = None;
    cfg.init = Init::Bump { center: [0.5, 0.5], width: -1.0 };
    assert!(minimize::<f64>(&g, &BoundaryCondition::Neumann, &cfg).is_err());
}

#[test]
fn config_json_round_trip() {
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.constraints.push(MassConstraint::at_vertex(VertexId::Y));
    cfg.symmetrize = Some(Symmetrize::Mirror { axis: 1, character: Character::Even });
    cfg.extra_starts.push(Init::File { path: "a.fld".into() });
    let text = serde_json::to_string(&cfg).unwrap();
    let back: SolveConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert!(serde_json::from_str::<SolveConfig>(r#"{"params":{"s":0.5,"q":3},"bogus":1}"#).is_err());
}

#[test]
fn reallocation_equal_bumps() {
    let g = Arc::new(Grid::new(&DomainSpec::strip(1.0, 8.0), [16, 128]).unwrap());
    let sym = symbol(&g, &BoundaryCondition::Neumann).unwrap();
    let p = EnergyParams::new(0.75, 4.0).unwrap();
    let bump = |cy: f64| Field::from_fn(g.clone(), |x| (-((x[0] - 1.0).powi(2) + (x[1] - cy).powi(2)) * 8.0).exp());
    let cut = |f: Field<f64>| f.map(|v| if v < 1e-9 { 0.0 } else { v });
    let b = cut(bump(4.0));
    let c = cut(bump(12.0));
    let a = Field::zeros(g.clone());
    let r = bubble_reallocation(&a, &b, &c, &sym, &p).unwrap();
    assert!((r.kappa - 2f64.powf(0.25)).abs() < 1e-12);
    let total = b.axpy(1.0, &c).unwrap();
    assert!((r.field.norm_lq(4.0) - total.norm_lq(4.0)).abs() < 1e-12 * total.norm_lq(4.0));
    assert!(hs_norm_sq(&r.field, &sym, 0.75).unwrap() < hs_norm_sq(&total, &sym, 0.75).unwrap());
    let z = Field::zeros(g.clone());
    assert!(matches!(bubble_reallocation(&a, &z, &c, &sym, &p), Err(Error::ZeroField)));
    assert!(bubble_reallocation(&a, &b, &b, &sym, &p).is_err());
}

#[test]
fn sweep_sorted_and_warm() {
    let d = DomainSpec::square(1.0);
    let mut cfg = SolveConfig::new(EnergyParams::new(0.5, 3.0).unwrap());
    cfg.max_iters = 200;
    let bc = BoundaryCondition::Neumann;
    let scales = [1.0, 2.0, 3.0];
    let cold = sweep_r::<f64>(&d, &scales, GridSpec::Dims([16, 16]), &bc, &cfg, &SweepOptions::default()).unwrap();
    let warm_opts = SweepOptions { warm_start: true, ..SweepOptions::default() };
    let warm = sweep_r::<f64>(&d, &scales, GridSpec::Dims([16, 16]), &bc, &cfg, &warm_opts).unwrap();
    for (c, w) in cold.iter().zip(&warm) {
        assert_eq!(c.scale, w.scale);
        let lc = c.result.as_ref().unwrap().0.lambda;
        let lw = w.result.as_ref().unwrap().0.lambda;
        assert!((lc - lw).abs() < 1e-6 * lc);
    }
    // R = 1 stays in the constant regime: λ = |Ω|^{1−2/q}
    assert!((cold[0].result.as_ref().unwrap().0.lambda - 1.0).abs() < 1e-8);
    assert!(sweep_r::<f64>(&d, &[2.0, 1.0], GridSpec::Resolution(8), &bc, &cfg, &SweepOptions::default()).is_err());
    assert!(sweep_r::<f64>(&d, &[], GridSpec::Resolution(8), &bc, &cfg, &SweepOptions::default()).is_err());
}

#[test]
fn resample_identity_on_same_grid() {
    let g = square(2.0, 8);
    let u = Field::from_fn(g.clone(), |p| p[0] * p[1]);
    let v = sweep::resample(&u, &g, Topology::Bounded);
    assert!(v.max_deviation(&u).unwrap() < 1e-12);
}
