//! Monte Carlo runs behind the shipped default constants.
//!
//! ```text
//! cargo run --release -p sparse-confset --example calibrate -- c3
//! cargo run --release -p sparse-confset --example calibrate -- d-const
//! cargo run --release -p sparse-confset --example calibrate -- l-prime
//! cargo run --release -p sparse-confset --example calibrate -- u-const
//! ```

use sparse_confset::{
    l0_pls, run_experiment, sample_model, AmplitudeProfile, DesignSpec, ExperimentConfig,
    Procedure, SignalSource, SignalSpec, SolverConfig, TestConfig, TestKind,
};

fn c3() {
    // P(k_hat > 3 k0) at n = 200, p = 100, k0 = 3
    let design = DesignSpec::iid_gaussian(200, 100).unwrap();
    let reps = 1000;
    for c3 in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
        let solver = SolverConfig::greedy(c3, 40);
        let mut over = 0;
        let mut risk = 0.0;
        for r in 0..reps {
            let theta = sparse_confset::generate_sparse_signal(
                100,
                3,
                AmplitudeProfile::Constant(1.0),
                r as u64,
            )
            .unwrap();
            let s = sample_model(&design, &theta, 10_000 + r as u64).unwrap();
            let fit = l0_pls(&s, &solver).unwrap();
            if fit.k_hat > 9 {
                over += 1;
            }
            risk += (&fit.theta_hat - &theta).norm_squared();
        }
        println!(
            "c3 {c3:4.1}: P(k_hat > 9) = {:.4}, mean loss {:.4}",
            over as f64 / reps as f64,
            risk / reps as f64
        );
    }
}

fn d_const() {
    // type I of the estimator-distance test at n = 300, p = 500, k0 = 3
    let design = DesignSpec::iid_gaussian(300, 500).unwrap();
    for d in [0.25, 0.5, 1.0] {
        let mut cfg = ExperimentConfig::new(
            design.clone(),
            SignalSource::Sparse {
                k: 3,
                profile: AmplitudeProfile::Constant(1.0),
            },
            Procedure::TestOnly(TestKind::EstimatorDistance),
        );
        cfg.replications = 1000;
        cfg.base_seed = 20;
        cfg.test = TestConfig::new(0.05, 3, 12);
        cfg.test.d_const = d;
        cfg.solver = SolverConfig::greedy(sparse_confset::estimate::DEFAULT_C3, 40);
        let rep = run_experiment(&cfg).unwrap();
        let rej = rep.reject.unwrap();
        println!("d_const {d:4.2}: type I {:.4} [{:.4}, {:.4}]", rej.rate, rej.lower, rej.upper);
    }
}

fn l_prime() {
    let (n, p, k0, k1) = (300, 400, 2, 12);
    let rho = 10.0 / (n as f64).powf(0.25);
    let design = DesignSpec::iid_gaussian(n, p).unwrap();
    let null_spec = SignalSource::Sparse {
        k: k0,
        profile: AmplitudeProfile::Constant(SignalSpec::new(p, k0, k1, rho).spike_magnitude()),
    };
    let alt_spec = SignalSource::Separated(SignalSpec::new(p, k0, k1, rho));
    // weak null coefficients sit near the penalty level and are missed
    let weak = |a: f64| SignalSource::Sparse {
        k: k0,
        profile: AmplitudeProfile::Constant(a),
    };
    for lp in [1.0, 1.5, 2.0] {
        for (name, signal) in [
            ("null", null_spec.clone()),
            ("w0.2", weak(0.2)),
            ("w0.3", weak(0.3)),
            ("w0.4", weak(0.4)),
            ("alt", alt_spec.clone()),
        ] {
            let mut cfg =
                ExperimentConfig::new(design.clone(), signal, Procedure::TwoRadius(TestKind::ResidualChisq));
            cfg.replications = 300;
            cfg.base_seed = 30;
            cfg.test = TestConfig::new(0.05, k0, k1);
            cfg.cs.l_prime = lp;
            cfg.solver = SolverConfig::greedy(sparse_confset::estimate::DEFAULT_C3, 40);
            let rep = run_experiment(&cfg).unwrap();
            println!(
                "L' {lp:3.1} {name:4}: coverage {:.4}, large branch {:.4}, median diam^2 {:.4}, {:.1} ms/rep",
                rep.coverage_rate().unwrap(),
                rep.branch_rate().unwrap(),
                rep.diameter_sq.unwrap().q50,
                rep.mean_wall_ms
            );
        }
    }
}

fn u_const() {
    // type I of the U-statistic test against the Gaussian-limit constant
    let design = DesignSpec::iid_gaussian(200, 400).unwrap();
    for amp in [0.0, 1.0, 3.0] {
        for mult in [0.5, 1.0] {
            let signal = if amp == 0.0 {
                SignalSource::Fixed(vec![0.0; 400])
            } else {
                SignalSource::Sparse {
                    k: 2,
                    profile: AmplitudeProfile::Constant(amp),
                }
            };
            let mut cfg =
                ExperimentConfig::new(design.clone(), signal, Procedure::TestOnly(TestKind::UStatistic));
            cfg.replications = 1000;
            cfg.base_seed = 40;
            cfg.test = TestConfig::new(0.05, 2, 12);
            cfg.test.u_gamma_const *= mult;
            let rep = run_experiment(&cfg).unwrap();
            println!(
                "amplitude {amp:3.1}, constant x{mult:3.1}: type I {:.4}",
                rep.reject_rate().unwrap()
            );
        }
    }
}

fn main() {
    match std::env::args().nth(1).as_deref() {
        Some("c3") => c3(),
        Some("d-const") => d_const(),
        Some("l-prime") => l_prime(),
        Some("u-const") => u_const(),
        _ => eprintln!("usage: calibrate c3 | d-const | l-prime | u-const"),
    }
}
