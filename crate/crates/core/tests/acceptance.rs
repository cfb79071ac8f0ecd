//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddsplit::analysis::{convergence_order, semidiscrete_exact, transition_norm};
use ddsplit::decomposition::{build_partition, decompose, DecompositionSpec, OverlapVariant};
use ddsplit::experiment::{build_setup, localization, operator_parts, run_on_setup, ExperimentConfig, Problem};
use ddsplit::grid::{sample_exact, Axis, Grid, GridFunction};
use ddsplit::operators::{laplacian_max_eigenvalue, LinearGridOperator};
use ddsplit::schemes::{run, trajectory, SchemeConfig, SchemeKind, SchemeState, SourceTerm};

type Outcome = Result<String, String>;

const DD_SCHEMES: [SchemeKind; 3] = [
    SchemeKind::RegAdditive,
    SchemeKind::RegMultiplicative,
    SchemeKind::VectorAdditive,
];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn model(scheme: SchemeKind, cells: usize, overlap: OverlapVariant) -> ExperimentConfig<f64> {
    ExperimentConfig {
        scheme,
        cells1: cells,
        cells2: cells,
        overlap,
        ..ExperimentConfig::default()
    }
}

fn final_eps(cfg: &ExperimentConfig<f64>) -> Result<f64, String> {
    let setup = build_setup(cfg).map_err(|e| e.to_string())?;
    Ok(run_on_setup(cfg, &setup).map_err(|e| e.to_string())?.final_error())
}

fn split_for(
    cells: usize,
    problem: Problem,
    strips: usize,
    p: usize,
    variant: OverlapVariant,
) -> (ddsplit::PartitionOfUnity<f64>, ddsplit::Decomposition<f64>) {
    let g = Grid::unit_square(cells).unwrap();
    let spec = DecompositionSpec::equal_strips(cells, Axis::X1, strips, p, variant);
    let pou = build_partition(&g, &spec).unwrap();
    let parts = operator_parts(&g, problem, 1.0, 0.5).unwrap();
    let split = decompose(&parts, &pou).unwrap();
    (pou, split)
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sum = 0.0f64;
    let mut worst_rayleigh = f64::INFINITY;
    let mut cases = 0;
    for cells in [8, 32] {
        for p in [2, 4] {
            for variant in [OverlapVariant::IntegerNode, OverlapVariant::HalfInteger, OverlapVariant::Wide3h] {
                let (_, split) = split_for(cells, Problem::ConvDiff, 4, p, variant);
                let sum = LinearGridOperator::sum(split.full.grid(), &split.parts).unwrap();
                let rel = sum.matrix().sub(split.full.matrix()).unwrap().max_abs() / split.full.max_abs();
                worst_sum = worst_sum.max(rel);
                ensure(rel <= 1e-12, || format!("{cells}x{cells} p={p} {variant:?}: sum defect {rel:e}"))?;
                for (d, c) in split.diffusion_parts.iter().zip(&split.skew_parts) {
                    ensure(d.matrix().transpose_defect(1.0) == 0.0, || "D_a not symmetric".into())?;
                    ensure(c.matrix().transpose_defect(-1.0) == 0.0, || "C_a not exactly skew".into())?;
                    for _ in 0..200 {
                        let x: Vec<f64> = (0..d.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let x = GridFunction::from_values(d.grid(), x.iter().map(|v| v / nx).collect()).unwrap();
                        let q = d.apply(&x).unwrap().values().iter().zip(x.values()).map(|(a, b)| a * b).sum::<f64>();
                        worst_rayleigh = worst_rayleigh.min(q);
                        ensure(q >= -1e-12, || format!("D_a Rayleigh quotient {q:e}"))?;
                    }
                }
                cases += 1;
            }
        }
    }
    Ok(format!(
        "{cases} splittings, max rel sum defect {worst_sum:.1e}, min Rayleigh quotient {worst_rayleigh:.3e}"
    ))
}

fn ac2() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for problem in [Problem::Heat, Problem::ConvDiff] {
        let (_, split) = split_for(16, problem, 4, 2, OverlapVariant::HalfInteger);
        for sigma in [0.5, 1.0] {
            for tau in [1e-3, 1e-1, 10.0] {
                for kind in [SchemeKind::Weighted, SchemeKind::RegAdditive, SchemeKind::RegMultiplicative] {
                    let cfg = SchemeConfig::new(kind, tau, 1).with_sigma(sigma);
                    let s = transition_norm(&cfg, &split.full, &split.parts).map_err(|e| e.to_string())?;
                    worst = worst.max(s);
                    count += 1;
                    ensure(s <= 1.0 + 1e-8, || {
                        format!("{problem} {kind} sigma={sigma} tau={tau}: norm {s:.12}")
                    })?;
                }
            }
        }
    }
    let (_, split) = split_for(16, Problem::Heat, 4, 2, OverlapVariant::HalfInteger);
    let tau = 2.5 / laplacian_max_eigenvalue(split.full.grid());
    let cfg = SchemeConfig::new(SchemeKind::Explicit, tau, 1);
    let s = transition_norm(&cfg, &split.full, &split.parts).map_err(|e| e.to_string())?;
    ensure(s >= 1.4, || format!("explicit norm {s} below 1.4"))?;
    Ok(format!("{count} norms, max {worst:.12}; explicit at 2.5/lambda_max: {s:.6}"))
}

fn ac3_errors() -> Result<[f64; 4], String> {
    let o = OverlapVariant::IntegerNode;
    Ok([
        final_eps(&model(SchemeKind::Weighted, 32, o))?,
        final_eps(&model(SchemeKind::VectorAdditive, 32, o))?,
        final_eps(&model(SchemeKind::RegAdditive, 32, o))?,
        final_eps(&model(SchemeKind::RegMultiplicative, 32, o))?,
    ])
}

fn ac3() -> Outcome {
    let [w, v, ra, rm] = ac3_errors()?;
    let summary = format!("weighted {w:.4e}, vector {v:.4e}, regadd {ra:.4e}, regmult {rm:.4e}");
    let m = ra.min(rm);
    ensure(w < v && v < m, || format!("ordering violated: {summary}"))?;
    ensure(v <= 0.5 * m, || format!("vector not below half: {summary}"))?;
    Ok(summary)
}

fn ac4() -> Outcome {
    let o = OverlapVariant::IntegerNode;
    let mut parts = Vec::new();
    for kind in DD_SCHEMES {
        let e32 = final_eps(&model(kind, 32, o))?;
        let e64 = final_eps(&model(kind, 64, o))?;
        parts.push(format!("{kind} {e32:.3e}->{e64:.3e}"));
        ensure(e64 > e32, || format!("{kind}: eps(64) = {e64:e} <= eps(32) = {e32:e}"))?;
    }
    let w32 = final_eps(&model(SchemeKind::Weighted, 32, o))?;
    let w64 = final_eps(&model(SchemeKind::Weighted, 64, o))?;
    parts.push(format!("weighted {w32:.3e}->{w64:.3e}"));
    ensure(w64 <= 1.1 * w32, || format!("weighted grew: {w32:e} -> {w64:e}"))?;
    Ok(parts.join(", "))
}

fn ac5() -> Outcome {
    let mut parts = Vec::new();
    for kind in DD_SCHEMES {
        let narrow = final_eps(&model(kind, 32, OverlapVariant::IntegerNode))?;
        let wide = final_eps(&model(kind, 32, OverlapVariant::Wide3h))?;
        parts.push(format!("{kind} {narrow:.3e}->{wide:.3e}"));
        ensure(wide < narrow, || format!("{kind}: wide3h {wide:e} >= integer {narrow:e}"))?;
    }
    Ok(parts.join(", "))
}

fn ac6() -> Outcome {
    let mut parts = Vec::new();
    for kind in DD_SCHEMES {
        let cfg = model(kind, 32, OverlapVariant::IntegerNode);
        let setup = build_setup(&cfg).map_err(|e| e.to_string())?;
        let report = run_on_setup(&cfg, &setup).map_err(|e| e.to_string())?;
        let stats = localization(&cfg, &setup, &report).map_err(|e| e.to_string())?;
        let (i1, i2) = setup.grid.node(stats.argmax.unwrap_or(0));
        parts.push(format!(
            "{kind} argmax ({i1},{i2}) in/out {:.2e}/{:.2e}",
            stats.inside_max, stats.outside_max
        ));
        ensure(stats.margin == 2 && stats.argmax_in_band(), || {
            format!("{kind}: argmax ({i1},{i2}) outside the band")
        })?;
    }
    Ok(parts.join(", "))
}

fn ac7() -> Outcome {
    let mut worst = 0.0f64;
    for problem in [Problem::Heat, Problem::ConvDiff] {
        let (_, split) = split_for(16, problem, 1, 1, OverlapVariant::IntegerNode);
        let u0 = sample_exact(split.full.grid(), 0.0, 2, 1).unwrap();
        let tau = 1e-3;
        let traj = |kind: SchemeKind, sigma: f64| -> Result<Vec<GridFunction<f64>>, String> {
            let cfg = SchemeConfig::new(kind, tau, 10).with_sigma(sigma);
            let states = trajectory(&u0, &cfg, &split.full, &split.parts, &SourceTerm::Zero).map_err(|e| e.to_string())?;
            states.iter().map(|s| s.scalar_view(None).map_err(|e| e.to_string())).collect()
        };
        let max_step_diff = |a: &[GridFunction<f64>], b: &[GridFunction<f64>]| {
            a.iter().zip(b).map(|(x, y)| x.sub(y).unwrap().max_abs()).fold(0.0f64, f64::max)
        };
        for sigma in [0.5, 1.0] {
            let w = traj(SchemeKind::Weighted, sigma)?;
            for kind in [SchemeKind::RegAdditive, SchemeKind::RegMultiplicative] {
                let d = max_step_diff(&w, &traj(kind, sigma)?);
                worst = worst.max(d);
                ensure(d <= 1e-10, || format!("{problem} {kind} sigma={sigma}: {d:e}"))?;
            }
        }
        let d = max_step_diff(&traj(SchemeKind::Weighted, 1.0)?, &traj(SchemeKind::VectorAdditive, 1.0)?);
        worst = worst.max(d);
        ensure(d <= 1e-10, || format!("{problem} vector vs weighted(1): {d:e}"))?;
    }
    Ok(format!("max per-step difference {worst:.2e}"))
}

fn ac8() -> Outcome {
    let g = Grid::unit_square(64).unwrap();
    let a = ddsplit::operators::assemble_laplacian(&g);
    let t_final: f64 = 0.02;
    let taus = [4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4];
    let exact = semidiscrete_exact(&g, t_final, 2, 1).unwrap();
    let u0 = sample_exact(&g, 0.0, 2, 1).unwrap();
    let mut orders = Vec::new();
    for sigma in [0.5, 1.0] {
        let mut errors = Vec::new();
        for &tau in &taus {
            let steps = (t_final / tau).round() as usize;
            let cfg = SchemeConfig::new(SchemeKind::Weighted, tau, steps).with_sigma(sigma);
            let last = run(&u0, &cfg, &a, std::slice::from_ref(&a), &SourceTerm::Zero, |_| Ok(())).map_err(|e| e.to_string())?;
            errors.push(last.fields()[0].sub(&exact).unwrap().norm());
        }
        let order = convergence_order(&taus, &errors).map_err(|e| e.to_string())?;
        orders.push(order);
        let ok = if sigma == 0.5 { order >= 1.9 } else { (0.8..=1.2).contains(&order) };
        ensure(ok, || format!("sigma={sigma}: order {order:.4}, errors {errors:?}"))?;
    }
    Ok(format!("order {:.4} (sigma=0.5), {:.4} (sigma=1)", orders[0], orders[1]))
}

fn ac9() -> Outcome {
    let cfg = model(SchemeKind::VectorAdditive, 32, OverlapVariant::IntegerNode);
    let setup = build_setup(&cfg).map_err(|e| e.to_string())?;
    let u0 = sample_exact(&setup.grid, 0.0, 2, 1).unwrap();
    let states = trajectory(&u0, &cfg.scheme_config(), setup.full(), setup.parts(), &SourceTerm::Zero)
        .map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for pair in states.windows(2) {
        let (old, new) = (pair[0].fields(), pair[1].fields());
        let inc: Vec<f64> = old.iter().zip(new).map(|(o, n)| n.sub(o).unwrap().norm()).collect();
        for a in 0..inc.len() - 1 {
            let excess = inc[a + 1] - inc[a];
            worst = worst.max(excess);
            ensure(excess <= 1e-10, || {
                format!("step {}: increment {} = {:e} > {:e}", pair[1].step(), a + 2, inc[a + 1], inc[a])
            })?;
        }
    }
    Ok(format!("{} steps, max increment excess {worst:.2e}", states.len() - 1))
}

fn dense(op: &LinearGridOperator<f64>) -> DMatrix<f64> {
    let rows = op.to_dense();
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn solve_dense(m: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    m.lu().solve(b).expect("nonsingular")
}

fn ac10() -> Outcome {
    let (_, split) = split_for(4, Problem::ConvDiff, 2, 2, OverlapVariant::HalfInteger);
    let g = *split.full.grid();
    let n = g.interior_count();
    let eye = DMatrix::<f64>::identity(n, n);
    let a = dense(&split.full);
    let parts: Vec<DMatrix<f64>> = split.parts.iter().map(dense).collect();
    let p = parts.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let y0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let phi_of = move |t: f64| (0..n).map(|k| (1.0 + k as f64) * (1.0 + t)).collect::<Vec<f64>>();
    let source = SourceTerm::from_fn(move |t| GridFunction::from_values(&g, phi_of(t)).unwrap());
    let (tau, sigma) = (0.05, 0.75);
    let yv = DVector::from_vec(y0.clone());
    let to_gf = |v: &[f64]| GridFunction::from_values(&g, v.to_vec()).unwrap();
    let phi = |t: f64| DVector::from_vec(phi_of(t));

    let mut worst = 0.0f64;
    for kind in SchemeKind::ALL {
        let cfg = SchemeConfig::new(kind, tau, 1).with_sigma(sigma);
        let state = match kind {
            SchemeKind::VectorAdditive => SchemeState::Vector {
                step: 0,
                ys: vec![to_gf(&y0), to_gf(&y1)],
            },
            _ => SchemeState::Scalar { step: 0, y: to_gf(&y0) },
        };
        let got: Vec<f64> = cfg
            .step(&state, &split.full, &split.parts, &source)
            .map_err(|e| e.to_string())?
            .fields()
            .iter()
            .flat_map(|f| f.values().to_vec())
            .collect();
        let want: Vec<f64> = match kind {
            SchemeKind::Explicit => (&yv - tau * &a * &yv + tau * phi(0.0)).as_slice().to_vec(),
            SchemeKind::Weighted => {
                let rhs = &yv - (1.0 - sigma) * tau * &a * &yv + tau * phi(sigma * tau);
                solve_dense(&eye + sigma * tau * &a, &rhs).as_slice().to_vec()
            }
            SchemeKind::RegAdditive => {
                let mut acc = DVector::zeros(n);
                for aa in &parts {
                    let w = solve_dense(&eye + sigma * p * tau * aa, &(aa * &yv));
                    acc += &yv - p * tau * w + tau * phi(sigma * tau);
                }
                (acc / p).as_slice().to_vec()
            }
            SchemeKind::RegMultiplicative => {
                let mut z = yv.clone();
                for aa in &parts {
                    let w = solve_dense(&eye + sigma * tau * aa, &(aa * &z));
                    z -= tau * w;
                }
                (z + tau * phi(sigma * tau)).as_slice().to_vec()
            }
            SchemeKind::VectorAdditive => {
                let old = [DVector::from_vec(y0.clone()), DVector::from_vec(y1.clone())];
                let mut new: Vec<DVector<f64>> = Vec::new();
                for alpha in 0..2 {
                    let mut rhs = &old[alpha] + tau * phi(tau);
                    for beta in 0..2 {
                        if beta < alpha {
                            rhs -= tau * &parts[beta] * &new[beta];
                        } else if beta > alpha {
                            rhs -= tau * &parts[beta] * &old[beta];
                        }
                    }
                    new.push(solve_dense(&eye + tau * &parts[alpha], &rhs));
                }
                new.iter().flat_map(|v| v.as_slice().to_vec()).collect()
            }
        };
        let d = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
        worst = worst.max(d);
        ensure(got.len() == want.len() && d <= 1e-10, || format!("{kind}: max difference {d:e}"))?;
    }
    Ok(format!("5 schemes on 4x4, max difference {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<u64>); 10] = [
        ("AC-1 splitting identities", ac1, Some(5)),
        ("AC-2 stability norms", ac2, Some(60)),
        ("AC-3 error ordering", ac3, Some(10)),
        ("AC-4 growth with grid refinement", ac4, None),
        ("AC-5 wider overlap", ac5, None),
        ("AC-6 error localization", ac6, None),
        ("AC-7 reduction oracles", ac7, None),
        ("AC-8 convergence order", ac8, Some(30)),
        ("AC-9 vector increments", ac9, None),
        ("AC-10 dense oracle", ac10, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(limit)) if elapsed > Duration::from_secs(limit) => {
                Err(format!("took {:.2} s, budget {limit} s", elapsed.as_secs_f64()))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({:.2} s): {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({:.2} s): {detail}", elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 10 criteria failed");
        ExitCode::FAILURE
    }
}
