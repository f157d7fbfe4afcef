//! Output writing and drivers for the hyperwave binary.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hyperwave_core::evolve::mms::{run_mms, MmsLevel, MmsSetup};
use hyperwave_core::evolve::{run_with, RunMeta, RunOptions, RunOutput};
use hyperwave_core::vfcalc::{run_battery, IdentityReport};
use hyperwave_core::{Preset, RunConfig};
use serde::Serialize;

pub mod output;
pub mod verdict;

pub use verdict::{Check, Verdict};

pub const IDENTITY_POINTS: usize = 10_000;
pub const IDENTITY_DEGREE: u32 = 4;
pub const IDENTITY_TOLERANCE: f64 = 1e-11;
pub const MMS_LEVELS: [f64; 3] = [0.2, 0.1, 0.05];
pub const MMS_MIN_ORDER: f64 = 3.5;

/// What one invocation produced.
pub struct Outcome {
    pub verdict: Verdict,
    pub title: String,
    pub out_dir: PathBuf,
    pub run: Option<RunOutput>,
    pub mms: Vec<MmsLevel>,
    pub identities: Option<IdentityReport>,
}

#[derive(Serialize)]
struct Meta<'a> {
    program: &'static str,
    version: &'static str,
    preset: &'a str,
    /// The effective configuration, in the input format.
    config: String,
    wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<&'a RunMeta>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    mms: Vec<MmsRecord>,
    verdict: &'a Verdict,
    pass: bool,
}

#[derive(Serialize)]
struct MmsRecord {
    h: f64,
    dt: f64,
    steps: usize,
    error: f64,
}

/// Runs whatever `config.preset` describes and writes `rows.csv` (evolutions
/// only), `meta.json` and `verdict.txt` into `out_dir`.
pub fn execute(config: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<Outcome> {
    execute_with(config, out_dir, opts, &MMS_LEVELS)
}

/// The `mms` preset at the given spacings.
pub fn execute_mms(config: &RunConfig, out_dir: &Path, hs: &[f64]) -> Result<Outcome> {
    let mut c = config.clone();
    c.preset = Preset::Mms;
    execute_with(&c, out_dir, &RunOptions::default(), hs)
}

fn execute_with(config: &RunConfig, out_dir: &Path, opts: &RunOptions, hs: &[f64]) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let start = std::time::Instant::now();
    let mut outcome = match config.preset {
        Preset::Identities => {
            let r = run_battery(IDENTITY_POINTS, IDENTITY_DEGREE, 1, IDENTITY_TOLERANCE);
            Outcome {
                verdict: verdict::identity_verdict(&r),
                title: "vector-field identities".into(),
                out_dir: out_dir.into(),
                run: None,
                mms: Vec::new(),
                identities: Some(r),
            }
        }
        Preset::Mms => {
            let levels = mms_levels(config, hs)?;
            Outcome {
                verdict: verdict::mms_verdict(&levels, MMS_MIN_ORDER),
                title: "manufactured-solution convergence".into(),
                out_dir: out_dir.into(),
                run: None,
                mms: levels,
                identities: None,
            }
        }
        _ => {
            let mut config = config.clone();
            config.output.dir = out_dir.to_path_buf();
            let run = run_with(&config, opts)?;
            output::write_rows_csv(&out_dir.join("rows.csv"), &run.rows)?;
            Outcome {
                verdict: verdict::evolution_verdict(&config, &run),
                title: format!("preset {}", config.preset),
                out_dir: out_dir.into(),
                run: Some(run),
                mms: Vec::new(),
                identities: None,
            }
        }
    };
    if !outcome.mms.is_empty() {
        let mut w = csv::Writer::from_path(out_dir.join("mms.csv"))?;
        w.write_record(["h", "dt", "steps", "error"])?;
        for l in &outcome.mms {
            w.write_record([format!("{:?}", l.h), format!("{:?}", l.dt), l.steps.to_string(), format!("{:?}", l.error)])?;
        }
        w.flush()?;
    }
    let wall = start.elapsed().as_secs_f64();
    let meta = Meta {
        program: "hyperwave",
        version: env!("CARGO_PKG_VERSION"),
        preset: config.preset.name(),
        config: config.to_toml(),
        wall_seconds: wall,
        run: outcome.run.as_ref().map(|r| &r.meta),
        mms: outcome
            .mms
            .iter()
            .map(|l| MmsRecord {
                h: l.h,
                dt: l.dt,
                steps: l.steps,
                error: l.error,
            })
            .collect(),
        verdict: &outcome.verdict,
        pass: outcome.verdict.pass(),
    };
    output::write_json(&out_dir.join("meta.json"), &meta)?;
    let text = outcome.verdict.render(&outcome.title);
    output::write_text(&out_dir.join("verdict.txt"), &text)?;
    outcome.out_dir = out_dir.to_path_buf();
    Ok(outcome)
}

/// Manufactured-solution errors at each spacing, for the system `config` describes.
pub fn mms_levels(config: &RunConfig, hs: &[f64]) -> Result<Vec<MmsLevel>> {
    let mut setup = MmsSetup::standard(config.model.p, 7);
    setup.cfl = config.grid.cfl;
    let workers = if config.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        config.workers
    };
    hs.iter()
        .map(|&h| run_mms(&setup, h, workers).map_err(Into::into))
        .collect()
}
