//! Scratch probe for the estimate harnesses (temporary; not shipped).

use roughpam::environment::{self, Environment, RenormEstimate};
use roughpam::estimates::{
    self, InteriorConfig, build_u_field, calibrate_shrink, heat_gradient_check,
    interior_bound_check, interior_bound_check_potential_free, shrink_iteration,
};
use roughpam::grid::{Field, GridSpec, Region};
use roughpam::lp::LpDecomposition;
use roughpam::mollifier::MollifierKit;
use roughpam::quintic_step;
use roughpam::solver::{SemilinearProblem, solve_imex};

fn sample_env(side: f64, n: usize, alpha: f64, seed: u64) -> (Environment, MollifierKit) {
    let spec = GridSpec::periodic(side, n).unwrap();
    let kit = MollifierKit::build(&spec, 8, 1e-8).unwrap();
    let lp = LpDecomposition::build(&spec);
    let est = RenormEstimate::from_prediction(&kit, &lp, alpha).unwrap();
    let env = Environment::generate(&kit, alpha, seed, &est).unwrap();
    (env, kit)
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    // ---- A: interior, potential-free slope arm -------------------------
    if which == "all" || which == "interior0" {
        println!("== interior potential-free, 128^2 L=20, n=8 ==");
        let spec = GridSpec::periodic(20.0, 128).unwrap();
        for (t, dt) in [(0.5, 1e-3), (1.0, 1e-3)] {
            for m in [100.0, 1e3, 1e4] {
                let mut cfg = InteriorConfig::new(8.0, m, t, dt);
                cfg.l_values = vec![1.0, 2.0, 3.0, 4.0];
                match interior_bound_check_potential_free(&spec, &cfg) {
                    Ok(rep) => {
                        let sups: Vec<String> =
                            rep.rows.iter().map(|r| format!("{:.4e}", r.sup)).collect();
                        println!(
                            "T={t} m={m:>7}: sups {:?} K={:.3} slope={:?}",
                            sups, rep.uniform_constant, rep.decay_slope
                        );
                    }
                    Err(e) => println!("T={t} m={m}: ERR {e}"),
                }
            }
        }
    }

    // ---- B: interior with environment at module scale ------------------
    if which == "all" || which == "interior1" {
        println!("== interior with env, 256^2 L=20 alpha=0.5 seed 31, n=8 ==");
        let (env, kit) = sample_env(20.0, 256, 0.5, 31);
        let potential = env.potential();
        let (lo, hi) = potential.extrema_on(&Region::pbox(8.0));
        println!("potential on P8: [{lo:.3}, {hi:.3}]");
        for t in [0.5, 1.0] {
            for m in [100.0, 1e3, 1e4] {
                let mut cfg = InteriorConfig::new(8.0, m, t, 1e-3);
                cfg.l_values = vec![1.0, 2.0, 3.0, 4.0];
                match interior_bound_check(&env, &kit, &cfg) {
                    Ok(rep) => {
                        let sups: Vec<String> =
                            rep.rows.iter().map(|r| format!("{:.4e}", r.sup)).collect();
                        let nc = rep.noise.as_ref().unwrap();
                        let terms: Vec<String> = nc
                            .terms
                            .iter()
                            .map(|t| format!("{}:{:.3}->{:.3}", t.symbol, t.norm, t.term))
                            .collect();
                        println!(
                            "T={t} m={m:>7}: sups {:?} K={:.3} slope={:?} ceil={:.3} {:?}",
                            sups, rep.uniform_constant, rep.decay_slope, nc.ceiling, terms
                        );
                    }
                    Err(e) => println!("T={t} m={m}: ERR {e}"),
                }
            }
        }
    }

    // ---- B2: long-horizon m-independence at depth 4 ---------------------
    if which == "interior2" {
        for alpha in [0.5] {
            println!("== long-horizon interior, 256^2 L=20 alpha={alpha} seed 31 ==");
            let (env, kit) = sample_env(20.0, 256, alpha, 31);
            let (lo, hi) = env.potential().extrema_on(&Region::pbox(4.0));
            println!("potential on P4: [{lo:.3}, {hi:.3}]");
            for t in [2.0, 4.0] {
                let mut l4 = Vec::new();
                for m in [1e3, 1e4] {
                    let mut cfg = InteriorConfig::new(8.0, m, t, 1e-3);
                    cfg.l_values = vec![1.0, 2.0, 4.0];
                    match interior_bound_check(&env, &kit, &cfg) {
                        Ok(rep) => {
                            let sups: Vec<String> =
                                rep.rows.iter().map(|r| format!("{:.4e}", r.sup)).collect();
                            println!(
                                "T={t} m={m:>7}: sups {:?} K={:.3}",
                                sups, rep.uniform_constant
                            );
                            l4.push(rep.rows.last().unwrap().sup);
                        }
                        Err(e) => println!("T={t} m={m}: ERR {e}"),
                    }
                }
                if l4.len() == 2 {
                    println!("  T={t}: l=4 change {:.2}%", 100.0 * (l4[1] - l4[0]).abs() / l4[0]);
                }
            }
        }
    }

    // ---- B3: acceptance-scale rehearsal ---------------------------------
    if which == "interior3" {
        println!("== acceptance scale: 512^2 L=20 alpha=0.25 seed 31, n=8, T=2 ==");
        let (env, kit) = sample_env(20.0, 512, 0.25, 31);
        let (lo, hi) = env.potential().extrema_on(&Region::pbox(8.0));
        println!("potential on P8: [{lo:.3}, {hi:.3}]");
        let mut l4 = Vec::new();
        for m in [100.0, 1e3, 1e4] {
            let mut cfg = InteriorConfig::new(8.0, m, 2.0, 1e-3);
            cfg.l_values = vec![1.0, 2.0, 4.0];
            match interior_bound_check(&env, &kit, &cfg) {
                Ok(rep) => {
                    let sups: Vec<String> =
                        rep.rows.iter().map(|r| format!("{:.4e}", r.sup)).collect();
                    let nc = rep.noise.as_ref().unwrap();
                    println!(
                        "m={m:>7}: sups {:?} K={:.4} ceil={:.3}",
                        sups, rep.uniform_constant, nc.ceiling
                    );
                    l4.push(rep.rows.last().unwrap().sup);
                }
                Err(e) => println!("m={m}: ERR {e}"),
            }
        }
        if l4.len() == 3 {
            println!("l=4 change 1e3->1e4: {:.2}%", 100.0 * (l4[2] - l4[1]).abs() / l4[1]);
        }
    }

    // ---- C: shrink on the boundary-layer solution -----------------------
    if which == "all" || which == "shrink" {
        println!("== shrink on potential-free boundary layer, m=1e4 ==");
        let spec = GridSpec::periodic(20.0, 128).unwrap();
        let cfg = InteriorConfig::new(8.0, 1e4, 0.5, 1e-3);
        let forcing = roughpam::cutoff::annulus_forcing(&spec, 6.0, 1e4).unwrap();
        let problem =
            SemilinearProblem::potential_free(2.0, Field::zeros(spec), forcing, 0.5).unwrap();
        let run = solve_imex(&problem, cfg.dt).unwrap();
        for big in [0.5, 1.0, 1.5, 2.0] {
            let tr = shrink_iteration(&run, 0.5, big, 8.0, 2.0, 0.0).unwrap();
            let radii: Vec<String> = tr.steps.iter().map(|s| format!("{:.2}", s.radius)).collect();
            let sups: Vec<String> = tr.steps.iter().map(|s| format!("{:.3e}", s.sup)).collect();
            let ratios: Vec<String> = tr
                .halving_ratios()
                .iter()
                .map(|r| format!("{:.3}", r))
                .collect();
            println!(
                "C0={big} from R=2: halted {:?} radii {:?}\n  sups {:?}\n  ratios {:?} maxprod {:.2}",
                tr.halted, radii, sups, ratios, tr.max_product()
            );
        }
        match calibrate_shrink(&run, 0.5, 8.0, 2.0, 0.0, 1e-2) {
            Ok((c, tr)) => println!(
                "calibrated C0 = {c}, steps {}, maxprod {:.2}",
                tr.steps.len(),
                tr.max_product()
            ),
            Err(e) => println!("calibrate ERR {e}"),
        }
        // With a noise floor matching the env ceiling.
        let (env, kit) = sample_env(20.0, 256, 0.5, 31);
        let nn = environment::noise_norms(&env, &kit, &Region::pbox(8.0), 0.1).unwrap();
        let ceil = estimates::noise_ceiling(&nn).ceiling;
        let tr = shrink_iteration(&run, 0.5, 1.5, 8.0, 2.0, ceil).unwrap();
        println!(
            "with floor {:.3}: halted {:?} after {} steps, last sup {:.3e}",
            ceil,
            tr.halted,
            tr.steps.len(),
            tr.steps.last().unwrap().sup
        );
    }

    // ---- D: U-field Holder sweep ----------------------------------------
    if which == "all" || which == "ufield" {
        println!("== U-field d-sweep, 128^2 L=8 alpha=0.5 seed 11 ==");
        let (env, kit) = sample_env(8.0, 128, 0.5, 11);
        let spec = *env.grid();
        let initial = Field::from_fn(spec, |x, y| {
            let d = x.hypot(y);
            quintic_step(1.5 - d)
        });
        let problem =
            SemilinearProblem::from_env(&env, 2.0, initial, Field::zeros(spec), 0.25).unwrap();
        let run = solve_imex(&problem, 2.5e-4).unwrap();
        let u = run.final_slice();
        let (u_sup, _) = u.sup_on(&Region::pbox(2.0));
        let nn = environment::noise_norms(&env, &kit, &Region::pbox(2.0), 0.1).unwrap();
        let noise_total = nn.xi.value + nn.xi_x.value + nn.i_xi_xi.value;
        println!("u sup on P2 = {u_sup:.4}, noise total = {noise_total:.4}");
        let eps = 0.1;
        for d in [0.25, 0.5, 1.0] {
            let uf = build_u_field(u, &env, Region::pbox(1.0), d).unwrap();
            let rep = uf.holder_norm(2.0 - 2.0 * eps).unwrap();
            let q = d.powf(2.0 - 2.0 * eps) * rep.value;
            let k = q / ((1.0 + noise_total) * u_sup);
            println!(
                "d={d}: holder={:.4} scaled={:.4} K={:.4} (argmax scale {:?})",
                rep.value, q, k, rep.argmax_scale
            );
        }
    }

    // ---- E: heat gradient battery ---------------------------------------
    if which == "all" || which == "grad" {
        println!("== heat gradient battery, 256^2 L=16 ==");
        let spec = GridSpec::periodic(16.0, 256).unwrap();
        let initial = Field::from_fn(spec, |x, y| {
            let d = (x - 5.0).hypot(y - 5.0);
            3.0 * quintic_step(2.0 - d)
        });
        let problem =
            SemilinearProblem::potential_free(0.0, initial, Field::zeros(spec), 0.5).unwrap();
        let run = solve_imex(&problem, 1e-3).unwrap();
        let mut windows = Vec::new();
        for center in [[0.0, 0.0], [1.0, 0.0]] {
            for l in [0.5, 1.0, 2.0] {
                windows.push((center, l));
            }
        }
        match heat_gradient_check(&run, &windows) {
            Ok(rep) => {
                for c in &rep.cases {
                    println!(
                        "center ({:.1},{:.1}) L={}: grad {:.4e} osc {:.4e} K={:.3}{}",
                        c.center[0],
                        c.center[1],
                        c.scale,
                        c.gradient_sup,
                        c.oscillation,
                        c.constant,
                        if c.degenerate { " (degenerate)" } else { "" }
                    );
                }
                println!("k in [{:.3}, {:.3}], spread {:.3}", rep.k_min, rep.k_max, rep.spread());
            }
            Err(e) => println!("ERR {e}"),
        }
    }
}
