use std::fs::File;
use std::io::BufWriter;
use std::process::ExitCode;

use clap::Parser;
use wg_lift::config::{config_from_cli, Cli, StudyConfig};
use wg_lift::lifting::CERTIFICATE_WARNING;
use wg_lift::mesh::write_mesh;
use wg_lift::study::{run_study_with, LevelOutcome};
use wg_lift::Result;

fn dump(config: &StudyConfig, out: &LevelOutcome) -> Result<()> {
    let level = out.result.level;
    if let Some(dir) = &config.dump_mesh {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_level{level}.wgmesh", config.family.name()));
        write_mesh(&out.mesh, BufWriter::new(File::create(&path)?))?;
        eprintln!("level {level}: mesh written to {}", path.display());
    }
    if config.dump_lambda_dims {
        let mut seen = vec![false; out.store.num_classes()];
        for c in 0..out.mesh.num_cells() {
            let class = out.store.class_of(c);
            if std::mem::replace(&mut seen[class], true) {
                continue;
            }
            let el = out.store.element(c);
            println!(
                "level {level} class {class} (cell {c}, {} faces): dim Lambda_k = {}, raw = {}, sub-simplices = {}",
                el.cell.faces.len(),
                el.lambda.n_basis(),
                el.lambda.raw_dim(),
                el.lambda.decomposition.sub_simplices.len()
            );
        }
    }
    if config.dump_certificates {
        for op in &out.operators {
            let flag = if op.sigma_min < CERTIFICATE_WARNING {
                " WARNING"
            } else {
                ""
            };
            println!(
                "level {level} cell {} sigma_min {:.6e}{flag}",
                op.cell, op.sigma_min
            );
        }
    }
    let r = &out.result;
    eprintln!(
        "level {level}: {} cells, {} classes, {} dofs, solver {:?} ({} PCG iterations, residual {:.2e}), min sigma {:.3e}",
        r.num_cells, r.element_classes, r.num_dofs, r.solve.method, r.solve.pcg_iterations, r.solve.residual, r.min_sigma
    );
    Ok(())
}

fn run(config: &StudyConfig) -> Result<()> {
    let report = run_study_with(config, |out| dump(config, out))?;
    print!("{}", report.to_table());
    if let Some(path) = &config.csv_out {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let config = match config_from_cli(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
