//! Subcommands of the `kradar` binary. Each command writes its artifacts
//! under an output directory and returns a JSON summary plus a pass flag;
//! the binary turns that into the exit code.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use kerdock_radar::harness::{
    bernstein_mc, bernstein_parameters, default_thresholds, read_magnitudes_csv, read_records_csv,
    roc, roc_per_trial, run_trials, success_rate, verify_coherence_bound, verify_column_norms,
    verify_operator_norm_bound, write_magnitudes_csv, write_records_csv, write_roc_csv,
    write_roc_trials_csv, BernsteinCase, TheoryReport, TrialConfig,
};
use kerdock_radar::rng::stream_rng;
use kerdock_radar::sensing::{dense_matrix, LinearOperator};
use kerdock_radar::waveforms::{
    alltop_waveforms, kerdock_family, kerdock_waveforms, verify_incoherence,
    verify_kerdock_properties, write_waveforms_csv, FamilyTag,
};
use kerdock_radar::Complex64;

/// Default output root when neither `--out` nor `out_dir` is given.
pub const OUT_ENV: &str = "KERDOCK_RADAR_OUT";

/// Relative tolerance of the dense-oracle cross-check.
const ORACLE_TOL: f64 = 1e-10;

/// A trial configuration plus the CLI-only keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub trial: TrialConfig,
    pub out_dir: Option<PathBuf>,
    pub dense_oracle: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CliKeys {
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    dense_oracle: bool,
}

impl ExperimentConfig {
    /// Parses and validates. Unknown keys and missing required keys are
    /// errors naming the key.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let obj = value
            .as_object_mut()
            .context("config must be a JSON object")?;
        let mut cli = serde_json::Map::new();
        for key in ["out_dir", "dense_oracle"] {
            if let Some(v) = obj.remove(key) {
                cli.insert(key.into(), v);
            }
        }
        let keys: CliKeys = serde_json::from_value(Value::Object(cli)).context("invalid config")?;
        let trial: TrialConfig = serde_json::from_value(value).context("invalid config")?;
        trial.validate().context("invalid config")?;
        Ok(Self {
            trial,
            out_dir: keys.out_dir,
            dense_oracle: keys.dense_oracle,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dense_oracle: bool,
    pub force: bool,
}

impl Common {
    /// `--out`, then the config's `out_dir`, then `$KERDOCK_RADAR_OUT/<cmd>`,
    /// then `results/<cmd>`.
    pub fn out_dir(&self, config: Option<&ExperimentConfig>, command: &str) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        if let Some(dir) = config.and_then(|c| c.out_dir.clone()) {
            return dir;
        }
        let root = std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("results"));
        root.join(command)
    }

    fn config(&self, path: &Path) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.trial.seed = seed;
        }
        cfg.dense_oracle |= self.dense_oracle;
        Ok(cfg)
    }
}

/// Result of one subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub out_dir: PathBuf,
    pub summary: Value,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Debug, Clone)]
pub struct WaveformArgs {
    pub p: usize,
    pub family: FamilyTag,
    pub n_tx: usize,
    pub j_select: usize,
    pub check_gamma: Option<f64>,
}

/// Writes `waveforms.csv` and `report.json`. Kerdock sets are checked
/// against the family properties; `check_gamma` adds the incoherence check.
pub fn cmd_waveforms(args: &WaveformArgs, common: &Common) -> Result<Outcome> {
    let mut report = serde_json::Map::new();
    let mut passed = true;
    let set = match args.family {
        FamilyTag::Kerdock => {
            let fam = kerdock_family(args.p)?;
            let props = verify_kerdock_properties(&fam);
            passed &= props.all_passed();
            report.insert("kerdock_properties".into(), serde_json::to_value(&props)?);
            kerdock_waveforms(&fam, args.n_tx, args.j_select)?
        }
        FamilyTag::Alltop => alltop_waveforms(args.p, args.n_tx)?,
        FamilyTag::External => bail!("family must be kerdock or alltop"),
    };
    if let Some(gamma) = args.check_gamma {
        let inc = verify_incoherence(&set, gamma);
        passed &= inc.passed;
        report.insert("incoherence".into(), serde_json::to_value(&inc)?);
    }
    report.insert("papr".into(), json!(set.papr()));
    report.insert("passed".into(), json!(passed));
    let dir = common.out_dir(None, "waveforms");
    prepare(&dir)?;
    let mut w = create(&dir, "waveforms.csv")?;
    write_waveforms_csv(&set, &mut w)?;
    w.flush()?;
    let summary = Value::Object(report);
    write_json(&dir, "report.json", &summary)?;
    Ok(Outcome {
        passed,
        out_dir: dir,
        summary,
    })
}

fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
    use rand::Rng;
    let mut rng = stream_rng(seed, 0x6f72_6163);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Fast forward and adjoint against the dense matrix on trial 0's geometry.
fn dense_oracle_check(cfg: &TrialConfig) -> Result<Value> {
    let op = cfg.operator(&cfg.build_waveforms()?, 0)?;
    let a = dense_matrix(&op)?;
    let x = random_vec(op.domain_dim(), cfg.seed);
    let y = random_vec(op.range_dim(), cfg.seed ^ 1);
    let dense_ax: Vec<Complex64> = (&a * nalgebra::DVector::from_column_slice(&x))
        .iter()
        .copied()
        .collect();
    let dense_ahy: Vec<Complex64> = (a.adjoint() * nalgebra::DVector::from_column_slice(&y))
        .iter()
        .copied()
        .collect();
    let forward = rel_err(&op.apply(&x)?, &dense_ax);
    let adjoint = rel_err(&op.apply_adjoint(&y)?, &dense_ahy);
    Ok(json!({
        "forward_rel_error": forward,
        "adjoint_rel_error": adjoint,
        "passed": forward <= ORACLE_TOL && adjoint <= ORACLE_TOL,
    }))
}

/// Runs the campaign; writes `config.json`, `records.csv`, `magnitudes.csv`
/// and `summary.json`.
pub fn cmd_simulate(config: &Path, common: &Common) -> Result<Outcome> {
    let cfg = common.config(config)?;
    let dir = common.out_dir(Some(&cfg), "simulate");
    prepare(&dir)?;
    write_json(&dir, "config.json", &cfg)?;
    let oracle = if cfg.dense_oracle {
        Some(dense_oracle_check(&cfg.trial)?)
    } else {
        None
    };
    let start = Instant::now();
    let outcomes = run_trials(&cfg.trial)?;
    let elapsed = start.elapsed().as_secs_f64();
    let records: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
    let mut w = create(&dir, "records.csv")?;
    write_records_csv(&records, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "magnitudes.csv")?;
    write_magnitudes_csv(&outcomes, &mut w)?;
    w.flush()?;

    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let exact: Vec<_> = records.iter().filter(|r| r.support_exact).collect();
    let bound_ok = exact.iter().filter(|r| r.error_bound_ok()).count();
    let oracle_ok = oracle.as_ref().is_none_or(|o| o["passed"] == json!(true));
    let summary = json!({
        "trials": records.len(),
        "failed_trials": errors,
        "exact_support": exact.len(),
        "success_rate": success_rate(&outcomes),
        "error_bound_held": bound_ok,
        "elapsed_seconds": elapsed,
        "dense_oracle": oracle,
    });
    write_json(&dir, "summary.json", &summary)?;
    Ok(Outcome {
        passed: errors == 0 && oracle_ok,
        out_dir: dir,
        summary,
    })
}

/// ROC from a campaign's `records.csv` and its sibling `magnitudes.csv`.
pub fn cmd_roc(records: &Path, magnitudes: Option<&Path>, common: &Common) -> Result<Outcome> {
    let default_mags = records.with_file_name("magnitudes.csv");
    let mags = magnitudes.unwrap_or(&default_mags);
    let recs = read_records_csv(BufReader::new(
        File::open(records).with_context(|| format!("opening {}", records.display()))?,
    ))?;
    let outcomes = read_magnitudes_csv(
        recs,
        BufReader::new(File::open(mags).with_context(|| format!("opening {}", mags.display()))?),
    )?;
    let thresholds = default_thresholds(&outcomes)?;
    let curve = roc(&outcomes, &thresholds)?;
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| records.parent().map(Path::to_path_buf).unwrap_or_default());
    prepare(&dir)?;
    let mut w = create(&dir, "roc.csv")?;
    write_roc_csv(&curve, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "roc_trials.csv")?;
    write_roc_trials_csv(&roc_per_trial(&outcomes, &thresholds)?, &mut w)?;
    w.flush()?;
    let summary = json!({
        "points": curve.len(),
        "pd_at_pfa_1e-2": curve.pd_at_pfa(1e-2),
        "pd_at_pfa_1e-1": curve.pd_at_pfa(1e-1),
    });
    Ok(Outcome {
        passed: true,
        out_dir: dir,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    OperatorNorm,
    Coherence,
    ColumnNorms,
    Bernstein,
}

#[derive(Debug, Clone)]
pub struct BernsteinArgs {
    pub m: usize,
    pub n: usize,
    pub target: f64,
    pub draws: usize,
}

impl Default for BernsteinArgs {
    fn default() -> Self {
        Self {
            m: 16,
            n: 16,
            target: 0.1,
            draws: 10_000,
        }
    }
}

fn bernstein_reports(args: &BernsteinArgs, seed: u64) -> Result<Vec<TheoryReport>> {
    let bp = bernstein_parameters(args.m, args.n, args.target)?;
    let mc = |case, t, s, line: usize| -> Result<TheoryReport> {
        Ok(bernstein_mc(args.m, args.n, case, t, s, args.draws, seed)?.swap_remove(line))
    };
    Ok(vec![
        mc(BernsteinCase::BoundedEntries, bp.t_ab, 0.0, 0)?,
        mc(BernsteinCase::BoundedEntries, bp.t_aa, 0.0, 1)?,
        mc(BernsteinCase::UnitDiagonal, bp.t_ab2, bp.s_ab2, 0)?,
        mc(BernsteinCase::UnitDiagonal, bp.t_aa, 0.0, 1)?,
    ])
}

/// Writes `report.json`: one [`TheoryReport`], or four for `Bernstein`.
pub fn cmd_verify(
    bound: Bound,
    config: Option<&Path>,
    bernstein: &BernsteinArgs,
    common: &Common,
) -> Result<Outcome> {
    let cfg = config.map(|p| common.config(p)).transpose()?;
    let trial = || {
        cfg.as_ref()
            .map(|c| &c.trial)
            .context("--config is required for this bound")
    };
    let reports = match bound {
        Bound::OperatorNorm => vec![verify_operator_norm_bound(trial()?, common.force)?],
        Bound::Coherence => {
            let dense = cfg.as_ref().is_some_and(|c| c.dense_oracle);
            vec![verify_coherence_bound(trial()?, dense, common.force)?]
        }
        Bound::ColumnNorms => vec![verify_column_norms(trial()?, common.force)?],
        Bound::Bernstein => {
            let seed = common
                .seed
                .or(cfg.as_ref().map(|c| c.trial.seed))
                .unwrap_or(0);
            bernstein_reports(bernstein, seed)?
        }
    };
    let dir = common.out_dir(cfg.as_ref(), "verify");
    prepare(&dir)?;
    let passed = reports.iter().all(|r| r.passed);
    let summary = if reports.len() == 1 {
        serde_json::to_value(&reports[0])?
    } else {
        serde_json::to_value(&reports)?
    };
    write_json(&dir, "report.json", &summary)?;
    Ok(Outcome {
        passed,
        out_dir: dir,
        summary,
    })
}

fn min_seconds<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Required speedup of the fast forward apply over the dense matvec.
pub const BENCH_SPEEDUP: f64 = 5.0;

/// Best-of-`reps` timing of one serial fast forward apply against the dense
/// matrix-vector product on trial 0's geometry. Writes `bench.json`.
pub fn cmd_bench(config: &Path, reps: usize, common: &Common) -> Result<Outcome> {
    let cfg = common.config(config)?;
    let trial = &cfg.trial;
    let op = trial
        .operator(&trial.build_waveforms()?, 0)?
        .with_parallel(false);
    let x = random_vec(op.domain_dim(), trial.seed);
    let fast = min_seconds(reps, || {
        std::hint::black_box(op.apply(&x).expect("dimensions match"));
    });
    let build = Instant::now();
    let a = dense_matrix(&op)?;
    let build_seconds = build.elapsed().as_secs_f64();
    let xv = nalgebra::DVector::from_column_slice(&x);
    let dense = min_seconds(reps.min(5), || {
        std::hint::black_box(&a * &xv);
    });
    drop(a);
    let speedup = dense / fast;
    let summary = json!({
        "rows": op.range_dim(),
        "columns": op.domain_dim(),
        "fast_forward_seconds": fast,
        "dense_matvec_seconds": dense,
        "dense_build_seconds": build_seconds,
        "speedup": speedup,
        "required_speedup": BENCH_SPEEDUP,
        "passed": speedup >= BENCH_SPEEDUP,
    });
    let dir = common.out_dir(Some(&cfg), "bench");
    prepare(&dir)?;
    write_json(&dir, "bench.json", &summary)?;
    Ok(Outcome {
        passed: speedup >= BENCH_SPEEDUP,
        out_dir: dir,
        summary,
    })
}
