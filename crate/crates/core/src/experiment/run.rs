use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use super::config::{EvalMode, ExperimentConfig, ExperimentKind, ThetaChoice};
use crate::bpm::{design_coupler, guided_modes, simulate_fig1, solve_slab_modes, BpmGrid, Parity};
use crate::correlation::{
    chsh_sequence_average, chsh_value, ensemble_reduce_density, inseparability_gap, monte_carlo_density,
    n_field_analytic, n_field_scan, optimize_chsh, three_field_correlation, ChshSettings, DensityMatrix4,
    Evaluation,
};
use crate::ensemble::{derive_seed, McConfig};
use crate::metrology::{
    derived_variance, dominant_frequency, heisenberg_phase_error, numerical_slope, quoted_variance,
    phase_error_scan, sql_phase_error, uniform_theta_grid, VarianceModel,
};
use crate::{Error, Result};

/// In-memory products of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub results_csv: String,
    /// Present for BPM experiments.
    pub field_csv: Option<String>,
    pub summary: Value,
    pub advisories: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub wall_time_seconds: f64,
    pub artifacts: Artifacts,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, cells: &[String]) {
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }
}

impl ExperimentConfig {
    fn mc(&self) -> McConfig {
        McConfig::new(self.trials, self.granularity, self.seed)
    }

    fn evaluation(&self) -> Evaluation {
        match self.mode {
            EvalMode::Analytic => Evaluation::Analytic,
            EvalMode::MonteCarlo => Evaluation::MonteCarlo(self.mc()),
        }
    }

    /// Resolved configuration as a JSON object of sections.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for (section, keys) in self.entries() {
            let obj: Map<String, Value> = keys.into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect();
            if section.is_empty() {
                root.extend(obj);
            } else {
                root.insert(section.to_string(), Value::Object(obj));
            }
        }
        Value::Object(root)
    }
}

/// Compute an experiment's artifacts on the current rayon pool.
pub fn execute(config: &ExperimentConfig) -> Result<Artifacts> {
    match config.experiment {
        ExperimentKind::Chsh => chsh(config),
        ExperimentKind::Ghz => ghz(config),
        ExperimentKind::Nfield => nfield(config),
        ExperimentKind::Metrology => metrology(config),
        ExperimentKind::Density => density(config),
        ExperimentKind::BpmModes => bpm_modes(config),
        ExperimentKind::BpmFig1 => bpm_fig1(config),
    }
}

fn plain(results: Csv, summary: Value) -> Artifacts {
    Artifacts {
        results_csv: results.0,
        field_csv: None,
        summary,
        advisories: Vec::new(),
    }
}

fn chsh(c: &ExperimentConfig) -> Result<Artifacts> {
    let b = &c.chsh;
    let mut csv = Csv::new(&[
        "kind", "variant", "theta1", "theta1p", "theta2", "theta2p", "b_abs", "std_error", "lattice_b_abs",
        "violates",
    ]);
    let angles = |s: &ChshSettings| [s.theta1, s.theta1p, s.theta2, s.theta2p].map(num);
    let name = b.variant.name().to_string();
    let summary = match c.mode {
        EvalMode::Analytic => {
            let opt = optimize_chsh(b.variant, b.grid_step, &Evaluation::Analytic)?;
            let [a, ap, bb, bp] = angles(&opt.settings);
            csv.row(&[
                "optimum".into(),
                name.clone(),
                a,
                ap,
                bb,
                bp,
                num(opt.b_abs),
                num(0.0),
                num(opt.lattice_b_abs),
                opt.violates.to_string(),
            ]);
            json!({ "b_abs": opt.b_abs, "lattice_b_abs": opt.lattice_b_abs, "violates": opt.violates })
        }
        EvalMode::MonteCarlo => {
            let avg = chsh_sequence_average(b.variant, b.grid_step, b.sequences, &c.mc())?;
            for run in &avg.sequences {
                let [a, ap, bb, bp] = angles(&run.settings);
                csv.row(&[
                    "sequence".into(),
                    name.clone(),
                    a,
                    ap,
                    bb,
                    bp,
                    num(run.b_abs),
                    String::new(),
                    num(run.lattice_b_abs),
                    run.violates.to_string(),
                ]);
            }
            let violates = avg.mean_b_abs > 2.0;
            csv.row(&[
                "mean".into(),
                name.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                num(avg.mean_b_abs),
                num(avg.std_error),
                String::new(),
                violates.to_string(),
            ]);
            json!({ "b_abs": avg.mean_b_abs, "std_error": avg.std_error, "sequences": b.sequences, "violates": violates })
        }
    };
    if let Some([t1, t1p, t2, t2p]) = b.settings {
        let s = ChshSettings {
            theta1: t1,
            theta1p: t1p,
            theta2: t2,
            theta2p: t2p,
            variant: b.variant,
        };
        let value = chsh_value(&s, &c.evaluation())?;
        let [a, ap, bb, bp] = angles(&s);
        csv.row(&[
            "settings".into(),
            name,
            a,
            ap,
            bb,
            bp,
            num(value),
            String::new(),
            String::new(),
            (value > 2.0).to_string(),
        ]);
    }
    Ok(plain(csv, summary))
}

fn ghz(c: &ExperimentConfig) -> Result<Artifacts> {
    let g = &c.ghz;
    let eval = c.evaluation();
    let mut csv = Csv::new(&["theta1", "theta2", "theta3", "s", "std_error", "analytic"]);
    let mut worst = 0.0f64;
    for theta3 in uniform_theta_grid(g.points) {
        let est = three_field_correlation(g.theta1, g.theta2, theta3, &eval)?;
        let exact = (g.theta1 + g.theta2 + theta3).cos() / 4.0;
        worst = worst.max((est.mean - exact).abs());
        csv.row(&[
            num(g.theta1),
            num(g.theta2),
            num(theta3),
            num(est.mean),
            num(est.std_error()),
            num(exact),
        ]);
    }
    Ok(plain(csv, json!({ "max_abs_deviation": worst })))
}

fn nfield(c: &ExperimentConfig) -> Result<Artifacts> {
    let f = &c.nfield;
    let thetas = uniform_theta_grid(f.points);
    let mut csv = Csv::new(&["n", "theta", "s", "std_error", "analytic"]);
    let mut spectra = Vec::new();
    for n in f.n_min..=f.n_max {
        let eval = match c.mode {
            EvalMode::Analytic => Evaluation::Analytic,
            EvalMode::MonteCarlo => Evaluation::MonteCarlo(c.mc().with_seed(derive_seed(c.seed, u64::from(n)))),
        };
        let scan = n_field_scan(n, &thetas, &eval, f.normalize)?;
        for (&theta, est) in thetas.iter().zip(&scan) {
            csv.row(&[
                n.to_string(),
                num(theta),
                num(est.mean),
                num(est.std_error()),
                num(n_field_analytic(theta, n, f.normalize)),
            ]);
        }
        let means: Vec<f64> = scan.iter().map(|e| e.mean).collect();
        let spectrum = dominant_frequency(&means)?;
        spectra.push(json!({ "n": n, "frequency": spectrum.frequency, "amplitude": spectrum.amplitude }));
    }
    Ok(plain(csv, json!({ "spectra": spectra })))
}

fn metrology(c: &ExperimentConfig) -> Result<Artifacts> {
    let m = &c.metrology;
    let mut csv = Csv::new(&[
        "n",
        "theta",
        "s_mean",
        "s_std_error",
        "s_variance_mc",
        "s_variance_mc_std_error",
        "s_variance_quoted",
        "quoted_variance_valid",
        "s_variance_derived",
        "slope",
        "delta_theta_sql",
        "delta_theta_heisenberg",
        "delta_theta_quoted",
        "delta_theta_derived",
        "trials",
    ]);
    for n in m.n_min..=m.n_max {
        let thetas = match &m.theta {
            ThetaChoice::Optimal => vec![PI / (6.0 * f64::from(n))],
            ThetaChoice::Grid(v) => v.clone(),
        };
        match c.mode {
            EvalMode::MonteCarlo => {
                for r in phase_error_scan(&[n], &thetas, &c.mc())? {
                    csv.row(&[
                        n.to_string(),
                        num(r.theta),
                        num(r.s_mean),
                        num(r.s_std_error),
                        num(r.s_variance_mc),
                        num(r.s_variance_mc_std_error),
                        num(r.s_variance_quoted),
                        r.quoted_variance_valid.to_string(),
                        num(r.s_variance_derived),
                        num(r.slope),
                        num(r.delta_theta_sql),
                        num(r.delta_theta_heisenberg),
                        num(r.delta_theta_quoted),
                        num(r.delta_theta_derived),
                        r.trials.to_string(),
                    ]);
                }
            }
            EvalMode::Analytic => {
                let sql = sql_phase_error(n)?;
                let heisenberg = heisenberg_phase_error(n)?;
                for theta in thetas {
                    let quoted = quoted_variance(n, theta);
                    let derived = derived_variance(n, theta, VarianceModel::Cyclic);
                    let slope = numerical_slope(n, theta);
                    let dt_quoted = if quoted.valid { quoted.value.sqrt() / slope.abs() } else { f64::NAN };
                    csv.row(&[
                        n.to_string(),
                        num(theta),
                        num(n_field_analytic(theta, n, false)),
                        num(0.0),
                        String::new(),
                        String::new(),
                        num(quoted.value),
                        quoted.valid.to_string(),
                        num(derived),
                        num(slope),
                        num(sql),
                        num(heisenberg),
                        num(dt_quoted),
                        num(derived.sqrt() / slope.abs()),
                        String::new(),
                    ]);
                }
            }
        }
    }
    Ok(plain(csv, json!({ "n_min": m.n_min, "n_max": m.n_max })))
}

fn density(c: &ExperimentConfig) -> Result<Artifacts> {
    let mut csv = Csv::new(&["source", "row", "col", "re", "im"]);
    let mut emit = |source: &str, rho: &DensityMatrix4| {
        for i in 0..4 {
            for j in 0..4 {
                let z = rho.get(i, j);
                csv.row(&[source.into(), i.to_string(), j.to_string(), num(z.re), num(z.im)]);
            }
        }
    };
    let reduced = ensemble_reduce_density(c.granularity)?;
    let reference = DensityMatrix4::phase_averaged_reference();
    emit("reference", &reference);
    emit("analytic", &reduced.matrix);
    let mut summary = json!({
        "fully_reduced": reduced.fully_reduced,
        "inseparability_gap": inseparability_gap(&reduced.matrix),
        "analytic_max_deviation": reduced.matrix.max_entry_difference(&reference),
    });
    if c.mode == EvalMode::MonteCarlo {
        let mc = monte_carlo_density(&c.mc())?;
        emit("mc", &mc);
        summary["mc_max_deviation_from_analytic"] = json!(mc.max_entry_difference(&reduced.matrix));
    }
    Ok(plain(csv, summary))
}

fn bpm_modes(c: &ExperimentConfig) -> Result<Artifacts> {
    let b = &c.bpm;
    let geom = b.geometry()?;
    let grid = BpmGrid::covering(&geom, geom.core_width / 2.0, b.nx, b.dz)?;
    let modes = guided_modes(&geom)?;
    let profiles = solve_slab_modes(&geom, &grid)?;
    let mut csv = Csv::new(&["order", "parity", "n_eff", "beta", "kappa", "gamma", "residual"]);
    for m in &modes {
        let parity = match m.parity {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        csv.row(&[
            m.order.to_string(),
            parity.into(),
            num(m.n_eff),
            num(m.beta),
            num(m.kappa),
            num(m.gamma),
            num(m.residual),
        ]);
    }
    let mut header = vec!["x".to_string()];
    header.extend(profiles.iter().map(|p| format!("te{}", p.order)));
    let mut field = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, x) in grid.xs().into_iter().enumerate() {
        let mut row = vec![num(x)];
        row.extend(profiles.iter().map(|p| num(p.samples[i])));
        field.row(&row);
    }
    Ok(Artifacts {
        results_csv: csv.0,
        field_csv: Some(field.0),
        summary: json!({
            "core_width": geom.core_width,
            "v_number": geom.v_number(),
            "modes": modes.len(),
            "x_min": grid.x_min,
            "x_max": grid.x_max,
            "nx": grid.nx,
        }),
        advisories: geom.weak_guidance_advisory().into_iter().collect(),
    })
}

fn bpm_fig1(c: &ExperimentConfig) -> Result<Artifacts> {
    let b = &c.bpm;
    let geom = b.geometry()?;
    let design = design_coupler(&geom, &b.gaps, b.crosstalk_threshold)?;
    let run = simulate_fig1(&design, &geom, b.nx, b.dz, b.snapshots, b.launch)?;
    let mut csv = Csv::new(&["z", "a0", "a1", "b0", "b1", "total", "arm_a_purity", "arm_b_purity"]);
    for (z, p) in run.z.iter().zip(&run.powers) {
        csv.row(&[
            num(*z),
            num(p.a0),
            num(p.a1),
            num(p.b0),
            num(p.b1),
            num(p.total),
            num(p.arm_a_purity()),
            num(p.arm_b_purity()),
        ]);
    }
    let mut header = vec!["z".to_string()];
    header.extend(run.grid.xs().into_iter().map(num));
    let mut field = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (z, row) in run.z.iter().zip(&run.intensity) {
        let mut cells = vec![num(*z)];
        cells.extend(row.iter().map(|v| num(*v)));
        field.row(&cells);
    }
    let out = run.output;
    Ok(Artifacts {
        results_csv: csv.0,
        field_csv: Some(field.0),
        summary: json!({
            "gap": design.gap,
            "length": design.length,
            "kappa0": design.kappa0,
            "kappa1": design.kappa1,
            "predicted_te1_transfer": design.te1_transfer,
            "predicted_te0_crosstalk": design.te0_crosstalk,
            "te1_transfer": run.te1_transfer,
            "te0_crosstalk": run.te0_crosstalk,
            "arm_a_power": out.arm_a(),
            "arm_b_power": out.arm_b(),
            "arm_a_purity": out.arm_a_purity(),
            "arm_b_purity": out.arm_b_purity(),
            "launch": b.launch.name(),
            "dz": run.grid.dz,
            "nx": run.grid.nx,
        }),
        advisories: geom.weak_guidance_advisory().into_iter().collect(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run `config` on `workers` threads (0 = all cores) and write `results.csv`,
/// `meta.json` and, for BPM experiments, `field.csv` into its output directory.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let start = Instant::now();
    let artifacts = pool.install(|| execute(config))?;
    let wall = start.elapsed().as_secs_f64();

    write(&dir.join("results.csv"), &artifacts.results_csv)?;
    if let Some(field) = &artifacts.field_csv {
        write(&dir.join("field.csv"), field)?;
    }
    let meta = json!({
        "library": "modesim",
        "version": crate::VERSION,
        "experiment": config.experiment.name(),
        "seed": config.seed,
        "trials": config.trials,
        "mode": config.mode.name(),
        "workers": pool.current_num_threads(),
        "wall_time_seconds": wall,
        "config": config.to_json(),
        "summary": artifacts.summary,
        "advisories": artifacts.advisories,
    });
    let text = serde_json::to_string_pretty(&meta).expect("json values serialize") + "\n";
    write(&dir.join("meta.json"), &text)?;
    Ok(RunReport {
        output_dir: dir,
        wall_time_seconds: wall,
        artifacts,
    })
}
