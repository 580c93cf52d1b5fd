use std::path::Path;
use std::time::Instant;

use doskit::pinn::{generate_dataset, train as train_model, CheckpointMeta, MlpModel};
use doskit::synth::{
    certify as certify_levels, design_ellipsoid, dos_grid, norm2, simulate_closed_loop, validate_certificate,
    Controller,
};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::artifacts::{self, CERTIFICATE, CHECKPOINT, DATASET_MANIFEST, DOS_GRID, HISTORY, TRAJECTORIES};
use crate::config::RunConfig;
use crate::CliError;

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>, CliError> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(artifacts::create(path)?))
}

pub fn gen_data(cfg: &RunConfig) -> Result<(), CliError> {
    let sys = cfg.system();
    let settings = cfg.synth_settings(sys.n());
    let design = design_ellipsoid(&sys, &settings)?;
    let alpha = design.alpha(cfg.alpha_scale())?;
    let vp = cfg.value_params()?;
    let t = Instant::now();
    let ds = generate_dataset(&sys, &alpha, &vp, cfg.n_d, cfg.n_pi, cfg.seed)?;
    let manifest = artifacts::write_dataset(&cfg.out_dir, &ds, &cfg.config_hash(), cfg.seed)?;
    info!(
        "dataset for {}: N_d={}, N_pi={} in {:.1?} -> {}",
        sys.name(),
        manifest.n_d,
        manifest.n_pi,
        t.elapsed(),
        cfg.out_dir.join(DATASET_MANIFEST).display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, init: Option<&Path>) -> Result<(), CliError> {
    let hash = cfg.config_hash();
    let sys = cfg.system();
    let ds = artifacts::read_dataset(&cfg.out_dir.join(DATASET_MANIFEST), &hash)?;
    let model = match init {
        Some(path) => {
            let (m, _) = artifacts::read_checkpoint(path, &hash)?;
            info!("resuming from {}", path.display());
            m
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed());
            MlpModel::value_net(2 * sys.n(), &cfg.hidden_widths(), &mut rng)?
        }
    };
    if model.input_dim() != 2 * ds.n {
        return Err(CliError::Config(format!(
            "model input dimension {} does not match the dataset (n = {})",
            model.input_dim(),
            ds.n
        )));
    }
    let tc = cfg.train_config();
    let t = Instant::now();
    let (model, history) = train_model(&model, &ds, &tc)?;
    info!(
        "trained {} epochs in {:.1?}: total loss {:.3e} -> {:.3e}",
        history.epochs.len(),
        t.elapsed(),
        history.initial.total,
        history.final_total()
    );
    let meta = CheckpointMeta { seed: cfg.seed, config_hash: hash };
    artifacts::write_checkpoint(&cfg.out_dir.join(CHECKPOINT), &model, &meta)?;

    let path = cfg.out_dir.join(HISTORY);
    let mut w = csv_writer(&path)?;
    w.write_record(["epoch", "L_d", "L_pi", "total"]).map_err(|e| csv_err(&path, e))?;
    for e in &history.epochs {
        w.write_record([e.epoch.to_string(), e.data.to_string(), e.physics.to_string(), e.total.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| csv_err(&path, e))
}

pub fn certify(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.config_hash();
    let sys = cfg.system();
    let (model, _) = artifacts::read_checkpoint(&cfg.out_dir.join(CHECKPOINT), &hash)?;
    let settings = cfg.synth_settings(sys.n());
    let design = design_ellipsoid(&sys, &settings)?;
    info!(
        "linear design: spectral radius {:.4}, c1 = {:.6}, c2 = {:.6}",
        design.closed_loop_radius, design.c1, design.c2
    );
    let cert = certify_levels(&sys, &model, &design, &settings)?;
    info!("levels: omega1 = {:.6}, omega2 = {:.6}", cert.omega1, cert.omega2);
    let path = cfg.out_dir.join(CERTIFICATE);
    artifacts::write_certificate(&path, &cert, &hash)?;
    info!("certificate -> {}", path.display());
    Ok(())
}

pub fn validate_cert(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.config_hash();
    let sys = cfg.system();
    let (model, _) = artifacts::read_checkpoint(&cfg.out_dir.join(CHECKPOINT), &hash)?;
    let cert = artifacts::read_certificate(&cfg.out_dir.join(CERTIFICATE), &hash)?;
    let report = validate_certificate(&sys, &model, &cert)?;
    info!("{report:?}");
    if !report.passed() {
        return Err(CliError::Certification(format!("certificate does not hold on its grid: {report:?}")));
    }
    info!("certificate holds on all {} grid nodes", report.nodes);
    Ok(())
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.config_hash();
    let sys = cfg.system();
    let (model, _) = artifacts::read_checkpoint(&cfg.out_dir.join(CHECKPOINT), &hash)?;
    let cert = artifacts::read_certificate(&cfg.out_dir.join(CERTIFICATE), &hash)?;
    let dg = dos_grid(&model, &sys, cert.omega2, cert.grid_resolution);

    let path = cfg.out_dir.join(DOS_GRID);
    let mut w = csv_writer(&path)?;
    let mut header: Vec<String> = (1..=sys.n()).map(|i| format!("x{i}")).collect();
    header.extend(["omega_value", "in_dos", "in_ellipsoid"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(&path, e))?;
    let (mut in_ell, mut both) = (0usize, 0usize);
    for (i, x) in dg.grid.nodes().enumerate() {
        let ell = cert.nu(&x) <= cert.c2;
        in_ell += ell as usize;
        both += (ell && dg.mask[i]) as usize;
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(dg.values[i].to_string());
        row.push((dg.mask[i] as u8).to_string());
        row.push((ell as u8).to_string());
        w.write_record(&row).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| csv_err(&path, e))?;
    info!(
        "D_nn covers {} of {} nodes (area {:.4}); {} of {} ellipsoid nodes inside",
        dg.count(),
        dg.grid.len(),
        dg.area(),
        both,
        in_ell
    );
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.config_hash();
    let sys = cfg.system();
    let (model, _) = artifacts::read_checkpoint(&cfg.out_dir.join(CHECKPOINT), &hash)?;
    let cert = artifacts::read_certificate(&cfg.out_dir.join(CERTIFICATE), &hash)?;
    let dg = dos_grid(&model, &sys, cert.omega2, cert.grid_resolution);
    if dg.count() == 0 {
        return Err(CliError::Certification("D_nn contains no grid node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim_seed);
    let starts: Vec<Vec<f64>> = (0..cfg.num_trajectories)
        .map(|_| loop {
            let i = rng.random_range(0..dg.grid.len());
            if dg.mask[i] {
                break dg.grid.node(i);
            }
        })
        .collect();

    let ctrl = Controller::new(&sys, &model, &cert)?;
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| simulate_closed_loop(&ctrl, x0, cfg.max_steps, cfg.stop_tol))
        .collect();

    let path = cfg.out_dir.join(TRAJECTORIES);
    let mut w = csv_writer(&path)?;
    let mut header = vec!["traj_id".to_string(), "step".into(), "norm2".into()];
    header.extend((1..=sys.m()).map(|j| format!("u_{j}")));
    header.extend(["branch".into(), "violation".into()]);
    w.write_record(&header).map_err(|e| csv_err(&path, e))?;

    let mut violations = 0usize;
    let mut finals = Vec::with_capacity(runs.len());
    for (id, res) in runs.iter().enumerate() {
        let (run, failed) = match res {
            Ok(r) => (r, false),
            Err(f) => {
                warn!("trajectory {id}: {f}");
                violations += 1;
                (&f.partial, true)
            }
        };
        let states = &run.trajectory.states;
        for (k, x) in states.iter().enumerate() {
            let mut row = vec![id.to_string(), k.to_string(), norm2(x).to_string()];
            match run.trajectory.inputs.get(k) {
                Some(u) => {
                    row.extend(u.iter().map(|v| v.to_string()));
                    row.push(run.branches[k].index().to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), sys.m() + 1)),
            }
            row.push(((failed && k + 1 == states.len()) as u8).to_string());
            w.write_record(&row).map_err(|e| csv_err(&path, e))?;
        }
        finals.push(run.final_norm());
    }
    w.flush().map_err(|e| csv_err(&path, e))?;
    let worst = finals.iter().copied().fold(0.0f64, f64::max);
    info!(
        "{} trajectories, {} violations, largest final norm {:.3e} -> {}",
        runs.len(),
        violations,
        worst,
        path.display()
    );
    if violations > 0 {
        return Err(CliError::Certification(format!("{violations} trajectories violated the certificate")));
    }
    Ok(())
}
