//! Sweep campaigns: data generation, parameter fitting, SIC detection and
//! rate estimation over every (launch power, phase count, stage count)
//! point, written as TSV.
//!
//! Output files (tab separated, one header line, rows sorted by sweep keys):
//!
//! * `air_sic.tsv`: `ptx_dbm n_rings n_phases stages air_bpcu stderr
//!   per_stage_bpcu clamped seed config_hash`. `per_stage_bpcu` and
//!   `clamped` are comma-separated, amplitude stage first.
//! * `air_memoryless.tsv`: `ptx_dbm n_rings n_phases air_bpcu stderr
//!   sigma_n_sq_fit clamped seed config_hash`.
//! * `channel_params.tsv`: `ptx_dbm n_phases mu_delta sigma_theta_sq
//!   sigma_n_sq mean_phase fitted degenerate seed config_hash`.
//! * `awgn.tsv` (AWGN sweep): `snr_db n_rings n_phases air_bits stderr
//!   gaussian_bits seed config_hash`.
//!
//! Rows whose `config_hash` matches the current config are reused, so an
//! interrupted campaign resumes where it stopped.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;

use super::channels::channel_models;
use super::config::{dbm_to_watts, ExperimentConfig};
use crate::air::{
    awgn_air_gaussian, awgn_air_starqam, memoryless_baseline_air, sic_stage_contributions,
    AirAccumulator,
};
use crate::constellation::{build_star_qam_with, Constellation};
use crate::cpan::{fit_awgn_noise, fit_params, CpanParams};
use crate::dataset::{Dataset, DatasetSequence};
use crate::error::{Error, Result};
use crate::registry::placements;
use crate::sic::{run_sic, SicSchedule};

pub const SIC_FILE: &str = "air_sic.tsv";
pub const MEMORYLESS_FILE: &str = "air_memoryless.tsv";
pub const PARAMS_FILE: &str = "channel_params.tsv";
pub const AWGN_FILE: &str = "awgn.tsv";

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed. Depends on the launch power value rather than
/// its position in the sweep, so extending a sweep leaves old points intact.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(root), |acc, &t| mix(acc ^ mix(t)))
}

fn point_seed(cfg: &ExperimentConfig, ptx_dbm: f64) -> u64 {
    derive_seed(cfg.training.seed, &[ptx_dbm.to_bits()])
}

/// Sort key shared by all tables.
#[derive(Clone, Copy, Debug)]
struct Key(f64, usize, usize);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then(self.1.cmp(&other.1))
            .then(self.2.cmp(&other.2))
    }
}

trait Row: Sized + Clone {
    const HEADER: &'static str;
    fn key(&self) -> Key;
    fn hash(&self) -> &str;
    fn to_line(&self) -> String;
    fn parse(fields: &[&str]) -> Option<Self>;
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(',').map(|v| v.parse().ok()).collect()
}

/// One SIC rate estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct SicRow {
    pub ptx_dbm: f64,
    pub n_rings: usize,
    pub n_phases: usize,
    pub stages: usize,
    pub air_bpcu: f64,
    pub stderr: f64,
    pub per_stage_bpcu: Vec<f64>,
    pub clamped: Vec<bool>,
    pub seed: u64,
    pub config_hash: String,
}

impl Row for SicRow {
    const HEADER: &'static str =
        "ptx_dbm\tn_rings\tn_phases\tstages\tair_bpcu\tstderr\tper_stage_bpcu\tclamped\tseed\tconfig_hash";

    fn key(&self) -> Key {
        Key(self.ptx_dbm, self.n_phases, self.stages)
    }

    fn hash(&self) -> &str {
        &self.config_hash
    }

    fn to_line(&self) -> String {
        let clamped: Vec<u8> = self.clamped.iter().map(|&c| c as u8).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.ptx_dbm,
            self.n_rings,
            self.n_phases,
            self.stages,
            self.air_bpcu,
            self.stderr,
            list(&self.per_stage_bpcu),
            list(&clamped),
            self.seed,
            self.config_hash
        )
    }

    fn parse(f: &[&str]) -> Option<Self> {
        if f.len() != 10 {
            return None;
        }
        Some(SicRow {
            ptx_dbm: f[0].parse().ok()?,
            n_rings: f[1].parse().ok()?,
            n_phases: f[2].parse().ok()?,
            stages: f[3].parse().ok()?,
            air_bpcu: f[4].parse().ok()?,
            stderr: f[5].parse().ok()?,
            per_stage_bpcu: parse_list(f[6])?,
            clamped: parse_list::<u8>(f[7])?.into_iter().map(|c| c != 0).collect(),
            seed: f[8].parse().ok()?,
            config_hash: f[9].to_owned(),
        })
    }
}

/// Rate of the memoryless AWGN receiver on the same test data.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRow {
    pub ptx_dbm: f64,
    pub n_rings: usize,
    pub n_phases: usize,
    pub air_bpcu: f64,
    pub stderr: f64,
    pub sigma_n_sq_fit: f64,
    pub clamped: bool,
    pub seed: u64,
    pub config_hash: String,
}

impl Row for BaselineRow {
    const HEADER: &'static str =
        "ptx_dbm\tn_rings\tn_phases\tair_bpcu\tstderr\tsigma_n_sq_fit\tclamped\tseed\tconfig_hash";

    fn key(&self) -> Key {
        Key(self.ptx_dbm, self.n_phases, 0)
    }

    fn hash(&self) -> &str {
        &self.config_hash
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.ptx_dbm,
            self.n_rings,
            self.n_phases,
            self.air_bpcu,
            self.stderr,
            self.sigma_n_sq_fit,
            self.clamped as u8,
            self.seed,
            self.config_hash
        )
    }

    fn parse(f: &[&str]) -> Option<Self> {
        if f.len() != 9 {
            return None;
        }
        Some(BaselineRow {
            ptx_dbm: f[0].parse().ok()?,
            n_rings: f[1].parse().ok()?,
            n_phases: f[2].parse().ok()?,
            air_bpcu: f[3].parse().ok()?,
            stderr: f[4].parse().ok()?,
            sigma_n_sq_fit: f[5].parse().ok()?,
            clamped: f[6] == "1",
            seed: f[7].parse().ok()?,
            config_hash: f[8].to_owned(),
        })
    }
}

/// Receiver-side channel parameters used at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamsRow {
    pub ptx_dbm: f64,
    pub n_phases: usize,
    pub params: CpanParams,
    pub mean_phase: f64,
    /// Estimated from training data rather than taken from the config.
    pub fitted: bool,
    pub degenerate: bool,
    pub seed: u64,
    pub config_hash: String,
}

impl Row for ParamsRow {
    const HEADER: &'static str =
        "ptx_dbm\tn_phases\tmu_delta\tsigma_theta_sq\tsigma_n_sq\tmean_phase\tfitted\tdegenerate\tseed\tconfig_hash";

    fn key(&self) -> Key {
        Key(self.ptx_dbm, self.n_phases, 0)
    }

    fn hash(&self) -> &str {
        &self.config_hash
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.ptx_dbm,
            self.n_phases,
            self.params.mu_delta(),
            self.params.sigma_theta_sq(),
            self.params.sigma_n_sq(),
            self.mean_phase,
            self.fitted as u8,
            self.degenerate as u8,
            self.seed,
            self.config_hash
        )
    }

    fn parse(f: &[&str]) -> Option<Self> {
        if f.len() != 10 {
            return None;
        }
        Some(ParamsRow {
            ptx_dbm: f[0].parse().ok()?,
            n_phases: f[1].parse().ok()?,
            params: CpanParams::from_steady_state(
                f[2].parse().ok()?,
                f[3].parse().ok()?,
                f[4].parse().ok()?,
            )
            .ok()?,
            mean_phase: f[5].parse().ok()?,
            fitted: f[6] == "1",
            degenerate: f[7] == "1",
            seed: f[8].parse().ok()?,
            config_hash: f[9].to_owned(),
        })
    }
}

/// One AWGN sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct AwgnRow {
    pub snr_db: f64,
    pub n_rings: usize,
    pub n_phases: usize,
    pub air_bits: f64,
    pub stderr: f64,
    pub gaussian_bits: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl Row for AwgnRow {
    const HEADER: &'static str = "snr_db\tn_rings\tn_phases\tair_bits\tstderr\tgaussian_bits\tseed\tconfig_hash";

    fn key(&self) -> Key {
        Key(self.snr_db, self.n_phases, 0)
    }

    fn hash(&self) -> &str {
        &self.config_hash
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.snr_db,
            self.n_rings,
            self.n_phases,
            self.air_bits,
            self.stderr,
            self.gaussian_bits,
            self.seed,
            self.config_hash
        )
    }

    fn parse(f: &[&str]) -> Option<Self> {
        if f.len() != 8 {
            return None;
        }
        Some(AwgnRow {
            snr_db: f[0].parse().ok()?,
            n_rings: f[1].parse().ok()?,
            n_phases: f[2].parse().ok()?,
            air_bits: f[3].parse().ok()?,
            stderr: f[4].parse().ok()?,
            gaussian_bits: f[5].parse().ok()?,
            seed: f[6].parse().ok()?,
            config_hash: f[7].to_owned(),
        })
    }
}

/// Rows of one output file, kept sorted by key.
struct Table<R: Row> {
    path: PathBuf,
    rows: BTreeMap<Key, R>,
}

impl<R: Row> Table<R> {
    /// Loads rows produced by the config with hash `hash`; others are dropped.
    fn load(path: PathBuf, hash: &str) -> Result<Self> {
        let mut rows = BTreeMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            let mut lines = text.lines();
            if lines.next() == Some(R::HEADER) {
                for line in lines {
                    let fields: Vec<&str> = line.split('\t').collect();
                    match R::parse(&fields) {
                        Some(r) if r.hash() == hash => {
                            rows.insert(r.key(), r);
                        }
                        Some(_) => {}
                        None => log::warn!("{}: ignoring malformed row `{line}`", path.display()),
                    }
                }
            } else {
                log::warn!("{}: unexpected header, starting afresh", path.display());
            }
        }
        Ok(Table { path, rows })
    }

    fn insert(&mut self, r: R) {
        self.rows.insert(r.key(), r);
    }

    fn contains(&self, key: Key) -> bool {
        self.rows.contains_key(&key)
    }

    /// Writes via a temporary file so a crash never leaves a torn table.
    fn save(&self) -> Result<()> {
        let tmp = self.path.with_extension("tsv.tmp");
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            writeln!(f, "{}", R::HEADER)?;
            for r in self.rows.values() {
                writeln!(f, "{}", r.to_line())?;
            }
            f.flush()?;
        }
        fs::rename(&tmp, &self.path)?;
        Ok(())
    }

    fn values(&self) -> Vec<R> {
        self.rows.values().cloned().collect()
    }
}

/// Everything a campaign produced, in canonical order.
#[derive(Clone, Debug, Default)]
pub struct CampaignReport {
    pub sic: Vec<SicRow>,
    pub memoryless: Vec<BaselineRow>,
    pub params: Vec<ParamsRow>,
    pub files: Vec<PathBuf>,
    /// Points computed in this run; the rest were resumed.
    pub computed_points: usize,
    pub resumed_points: usize,
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn constellation(cfg: &ExperimentConfig, n_phases: usize, ptx_w: f64) -> Result<Constellation> {
    let k = &cfg.constellation;
    let placement = placements().get(&k.placement)?;
    build_star_qam_with(placement.as_ref(), k.n_rings, n_phases, ptx_w, k.truncation)
}

/// Train and test data of one (power, phase count) point.
pub struct PointData {
    pub constellation: Constellation,
    pub train: Dataset,
    pub test: Dataset,
}

/// Generates the training and test sequences of one point. Sequence seeds do
/// not depend on `n_phases`, so phase-count sweeps share their randomness.
pub fn generate_point(cfg: &ExperimentConfig, ptx_dbm: f64, n_phases: usize) -> Result<PointData> {
    let model = channel_models().get(&cfg.channel.mode)?;
    let c = constellation(cfg, n_phases, dbm_to_watts(ptx_dbm))?;
    let seed = point_seed(cfg, ptx_dbm);
    let t = &cfg.training;
    let make = |role: u64, count: usize| -> Result<Dataset> {
        let sequences = (0..count)
            .into_par_iter()
            .map(|k| model.transmit(cfg, &c, t.seq_len, derive_seed(seed, &[role, k as u64])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { sequences })
    };
    let train = make(0, t.n_train_seqs)?;
    let test = make(1, t.n_test_seqs)?;
    Ok(PointData {
        constellation: c,
        train,
        test,
    })
}

fn derotate(d: &mut Dataset, phase: f64) {
    let rot = Complex64::from_polar(1.0, -phase);
    for s in &mut d.sequences {
        for y in &mut s.y {
            *y *= rot;
        }
    }
}

struct PointResult {
    sic: Vec<SicRow>,
    memoryless: Option<BaselineRow>,
    params: ParamsRow,
}

fn point_tag(ptx_dbm: f64, n_phases: usize) -> String {
    format!("ptx{ptx_dbm}dBm_np{n_phases}")
}

fn run_point(cfg: &ExperimentConfig, hash: &str, ptx_dbm: f64, n_phases: usize) -> Result<PointResult> {
    let model = channel_models().get(&cfg.channel.mode)?;
    let seed = point_seed(cfg, ptx_dbm);
    let ptx_w = dbm_to_watts(ptx_dbm);
    let PointData {
        constellation: c,
        mut train,
        mut test,
    } = generate_point(cfg, ptx_dbm, n_phases)?;
    let out_dir = &cfg.output.directory;
    let tag = point_tag(ptx_dbm, n_phases);
    if cfg.output.write_datasets {
        let dir = out_dir.join("datasets");
        fs::create_dir_all(&dir)?;
        train.write_file(&dir.join(format!("{tag}_train.tsv")))?;
        test.write_file(&dir.join(format!("{tag}_test.tsv")))?;
    }

    let params_row = match model.known_params(cfg, ptx_w)? {
        Some(params) => ParamsRow {
            ptx_dbm,
            n_phases,
            params,
            mean_phase: 0.0,
            fitted: false,
            degenerate: false,
            seed,
            config_hash: hash.to_owned(),
        },
        None => {
            let fit = fit_params(&train.pairs())?;
            if fit.degenerate {
                log::warn!("{tag}: phase-noise fit is degenerate, phase memory is unusable");
            }
            derotate(&mut train, fit.mean_phase);
            derotate(&mut test, fit.mean_phase);
            ParamsRow {
                ptx_dbm,
                n_phases,
                params: fit.params,
                mean_phase: fit.mean_phase,
                fitted: true,
                degenerate: fit.degenerate,
                seed,
                config_hash: hash.to_owned(),
            }
        }
    };
    let params = params_row.params;
    log::info!(
        "{tag}: mu_delta={} sigma_theta_sq={} sigma_n_sq={}",
        params.mu_delta(),
        params.sigma_theta_sq(),
        params.sigma_n_sq()
    );

    let memoryless = if cfg.sic.memoryless_baseline {
        let sn2 = fit_awgn_noise(&train.pairs())?;
        let stages = test
            .sequences
            .par_iter()
            .map(|s| memoryless_baseline_air(&s.y, &s.x, &c, sn2))
            .collect::<Result<Vec<_>>>()?;
        let mut acc = AirAccumulator::new();
        for (st, s) in stages.iter().zip(&test.sequences) {
            acc.push(std::slice::from_ref(st), s.y.len());
        }
        let air = acc.finish()?;
        Some(BaselineRow {
            ptx_dbm,
            n_rings: c.n_rings(),
            n_phases,
            air_bpcu: air.total_bits,
            stderr: air.std_error,
            sigma_n_sq_fit: sn2,
            clamped: air.clamped[0],
            seed,
            config_hash: hash.to_owned(),
        })
    } else {
        None
    };

    let mut sic = Vec::with_capacity(cfg.sic.stages.len());
    for &s in &cfg.sic.stages {
        let schedule = SicSchedule::new(s)?;
        let per_seq = test
            .sequences
            .par_iter()
            .enumerate()
            .map(|(k, seq)| {
                let out = run_sic(&seq.y, &seq.x, schedule, &c, &params, cfg.sic.belief)?;
                if k == 0 && cfg.output.write_posteriors {
                    write_posteriors(&out_dir.join("posteriors"), &format!("{tag}_S{s}"), &out, seq)?;
                }
                sic_stage_contributions(&out, &seq.x, &c)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut acc = AirAccumulator::new();
        for (st, seq) in per_seq.iter().zip(&test.sequences) {
            acc.push(st, seq.y.len());
        }
        let air = acc.finish()?;
        if air.clamped.iter().any(|&c| c) {
            log::warn!("{tag} S={s}: negative stage estimate clamped to 0");
        }
        sic.push(SicRow {
            ptx_dbm,
            n_rings: c.n_rings(),
            n_phases,
            stages: s,
            air_bpcu: air.total_bits,
            stderr: air.std_error,
            per_stage_bpcu: air.per_stage_bits,
            clamped: air.clamped,
            seed,
            config_hash: hash.to_owned(),
        });
    }
    Ok(PointResult {
        sic,
        memoryless,
        params: params_row,
    })
}

fn write_posteriors(dir: &Path, tag: &str, out: &crate::sic::SicOutput, seq: &DatasetSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    let all: Vec<usize> = (0..seq.y.len()).collect();
    out.amplitude
        .write_tsv(fs::File::create(dir.join(format!("{tag}_amplitude.tsv")))?, &all)?;
    for st in &out.phases {
        st.table.write_tsv(
            fs::File::create(dir.join(format!("{tag}_phase{}.tsv", st.stage)))?,
            &st.symbols,
        )?;
    }
    Ok(())
}

struct Store {
    sic: Table<SicRow>,
    memoryless: Table<BaselineRow>,
    params: Table<ParamsRow>,
    with_baseline: bool,
}

impl Store {
    fn save(&self) -> Result<()> {
        self.sic.save()?;
        self.params.save()?;
        if self.with_baseline {
            self.memoryless.save()?;
        }
        Ok(())
    }
}

/// Runs every point of the sweep not already present in the output
/// directory and writes the result tables.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let store = Store {
        sic: Table::load(dir.join(SIC_FILE), &hash)?,
        memoryless: Table::load(dir.join(MEMORYLESS_FILE), &hash)?,
        params: Table::load(dir.join(PARAMS_FILE), &hash)?,
        with_baseline: cfg.sic.memoryless_baseline,
    };

    let mut todo = Vec::new();
    let mut resumed = 0;
    for &ptx in &cfg.constellation.ptx_dbm {
        for &np in &cfg.constellation.n_phases {
            let done = cfg.sic.stages.iter().all(|&s| store.sic.contains(Key(ptx, np, s)))
                && store.params.contains(Key(ptx, np, 0))
                && (!store.with_baseline || store.memoryless.contains(Key(ptx, np, 0)));
            if done {
                resumed += 1;
            } else {
                todo.push((ptx, np));
            }
        }
    }
    if resumed > 0 {
        log::info!("resuming: {resumed} points already complete");
    }

    let store = Mutex::new(store);
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        todo.par_iter().try_for_each(|&(ptx, np)| -> Result<()> {
            log::info!("running {}", point_tag(ptx, np));
            let res = run_point(cfg, &hash, ptx, np)?;
            let mut st = store.lock().expect("result store poisoned");
            for r in res.sic {
                st.sic.insert(r);
            }
            if let Some(m) = res.memoryless {
                st.memoryless.insert(m);
            }
            st.params.insert(res.params);
            st.save()
        })
    })?;

    let store = store.into_inner().expect("result store poisoned");
    store.save()?;
    let mut files = vec![store.sic.path.clone(), store.params.path.clone()];
    if store.with_baseline {
        files.push(store.memoryless.path.clone());
    }
    // Rows of points dropped from the sweep stay in the files but are not
    // part of this report.
    let in_sweep = |p: f64, np: usize| cfg.constellation.ptx_dbm.contains(&p) && cfg.constellation.n_phases.contains(&np);
    Ok(CampaignReport {
        sic: store
            .sic
            .values()
            .into_iter()
            .filter(|r| in_sweep(r.ptx_dbm, r.n_phases) && cfg.sic.stages.contains(&r.stages))
            .collect(),
        memoryless: store
            .memoryless
            .values()
            .into_iter()
            .filter(|r| in_sweep(r.ptx_dbm, r.n_phases))
            .collect(),
        params: store
            .params
            .values()
            .into_iter()
            .filter(|r| in_sweep(r.ptx_dbm, r.n_phases))
            .collect(),
        files,
        computed_points: todo.len(),
        resumed_points: resumed,
    })
}

/// Memoryless AWGN rates of the configured constellations next to the
/// Gaussian-input capacity; written to `awgn.tsv`.
pub fn run_awgn_sweep(cfg: &ExperimentConfig) -> Result<Vec<AwgnRow>> {
    cfg.validate()?;
    let a = cfg
        .awgn
        .as_ref()
        .ok_or_else(|| Error::Config("the AWGN sweep needs an [awgn] block".into()))?;
    let hash = cfg.hash();
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let mut table: Table<AwgnRow> = Table::load(dir.join(AWGN_FILE), &hash)?;
    let todo: Vec<(f64, usize)> = a
        .snr_db
        .iter()
        .flat_map(|&s| cfg.constellation.n_phases.iter().map(move |&np| (s, np)))
        .filter(|&(s, np)| !table.contains(Key(s, np, 0)))
        .collect();
    let pool = thread_pool(cfg.workers)?;
    let rows = pool.install(|| {
        todo.par_iter()
            .map(|&(snr, np)| -> Result<AwgnRow> {
                let c = constellation(cfg, np, 1.0)?;
                let seed = derive_seed(a.seed, &[snr.to_bits()]);
                let est = awgn_air_starqam(&c, snr, a.n_mc, seed)?;
                Ok(AwgnRow {
                    snr_db: snr,
                    n_rings: c.n_rings(),
                    n_phases: np,
                    air_bits: est.bits,
                    stderr: est.std_error,
                    gaussian_bits: awgn_air_gaussian(snr),
                    seed,
                    config_hash: hash.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for r in rows {
        table.insert(r);
    }
    table.save()?;
    Ok(table
        .values()
        .into_iter()
        .filter(|r| a.snr_db.contains(&r.snr_db) && cfg.constellation.n_phases.contains(&r.n_phases))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
    }

    #[test]
    fn rows_round_trip_through_tsv() {
        let r = SicRow {
            ptx_dbm: -1.5,
            n_rings: 32,
            n_phases: 64,
            stages: 2,
            air_bpcu: 7.123456789012345,
            stderr: 1e-3,
            per_stage_bpcu: vec![3.0, 2.1, 2.023456789012345],
            clamped: vec![false, true, false],
            seed: u64::MAX,
            config_hash: "00ff".into(),
        };
        let line = r.to_line();
        let back = SicRow::parse(&line.split('\t').collect::<Vec<_>>()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_line(), line);
    }

    #[test]
    fn keys_sort_numerically() {
        let mut k = vec![Key(2.0, 1, 1), Key(-10.0, 4, 1), Key(-2.0, 1, 2), Key(-2.0, 1, 1)];
        k.sort();
        assert_eq!(k, vec![Key(-10.0, 4, 1), Key(-2.0, 1, 1), Key(-2.0, 1, 2), Key(2.0, 1, 1)]);
    }
}
