use std::fmt;
use std::fs;
use std::path::Path;

use diffreg::continuation::{search_alpha, SearchStatus};
use diffreg::diffops::DiffScheme;
use diffreg::distance::DistanceKind;
use diffreg::io::{
    normalize_intensity, read_volume, synth_case, write_dice_csv, write_json, write_trials_csv, write_volume, IntensityRanges,
    JobConfig, Precision, RunReport, SearchSummary, SynthKind, Volume, VolumeData,
};
use diffreg::kkt::{PrecondVariant, Problem};
use diffreg::metrics::{detgrad_stats, dice, transport_labels, LabelVolume};
use diffreg::optimizer::{register, ForcingMode, SolveReport, SolveStatus};
use diffreg::transport::{solve_deformation_tensor, solve_state, InterpMethod, Trajectory, TransportConfig};
use diffreg::{Error, Real, ScalarField, VectorField};

use crate::args::*;

pub enum Failure {
    Data(Error),
    Solver(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Data(e) => write!(f, "{e}"),
            Failure::Solver(s) => write!(f, "solver failure: {s}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::LineSearchFailed(_) => Failure::Solver(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Register(a) => {
            setup(&a.common)?;
            dispatch!(a.common.precision, run_register(&a, false))
        }
        Command::SearchAlpha(a) => {
            setup(&a.common)?;
            dispatch!(a.common.precision, run_register(&a, true))
        }
        Command::Transport(a) => {
            setup(&a.common)?;
            dispatch!(a.common.precision, run_transport(&a))
        }
        Command::Detgrad(a) => {
            setup(&a.common)?;
            dispatch!(a.common.precision, run_detgrad(&a))
        }
        Command::Metrics(MetricsCommand::Dice(a)) => run_dice(&a),
        Command::Synth(a) => {
            setup(&a.common)?;
            dispatch!(a.common.precision, run_synth(&a))
        }
    }
}

macro_rules! dispatch {
    ($p:expr, $f:ident($($arg:expr),*)) => {
        match $p {
            PrecisionArg::F32 => $f::<f32>($($arg),*),
            PrecisionArg::F64 => $f::<f64>($($arg),*),
        }
    };
}
use dispatch;

fn setup(c: &Common) -> Outcome {
    if let Some(n) = c.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    fs::create_dir_all(&c.out_dir)?;
    Ok(())
}

fn transport_config(c: &Common) -> TransportConfig {
    let interp = match c.interp {
        InterpArg::Nearest => InterpMethod::Nearest,
        InterpArg::Linear => InterpMethod::Linear,
        InterpArg::Cubic => InterpMethod::CubicLagrange,
    };
    TransportConfig { interp, scheme: DiffScheme::Fd8 }
}

fn job_config(a: &SolveArgs, search: bool) -> JobConfig {
    let d = JobConfig::default();
    JobConfig {
        alpha: a.alpha.unwrap_or(if search { 1.0 } else { d.alpha }),
        beta: (a.beta > 0.0).then_some(a.beta),
        eps_opt: a.tol,
        eps_det: a.eps_det,
        nt: a.common.nt,
        max_iter: a.maxit,
        distance: match a.distance {
            DistanceArg::Ssd => DistanceKind::Ssd,
            DistanceArg::Ncc => DistanceKind::Ncc,
        },
        precond: match a.precond {
            PrecondArg::Reg => PrecondVariant::Regularization,
            PrecondArg::H0 => PrecondVariant::H0,
            PrecondArg::TwoLevel => PrecondVariant::H0TwoLevel,
        },
        interp: transport_config(&a.common).interp,
        scheme: DiffScheme::Fd8,
        forcing: match a.forcing {
            ForcingArg::Superlinear => ForcingMode::Superlinear,
            ForcingArg::Quadratic => ForcingMode::Quadratic,
        },
        seed: d.seed,
        threads: a.common.threads,
        precision: match a.common.precision {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        },
        out_dir: a.common.out_dir.clone(),
    }
}

fn read_scalar<T: Real>(path: &Path, nt: usize) -> Result<ScalarField<T>, Failure> {
    Ok(read_volume(path)?.to_scalar(nt)?)
}

fn write(dir: &Path, name: &str, vol: Volume) -> Outcome {
    Ok(write_volume(dir.join(name), &vol)?)
}

fn run_register<T: Real>(a: &SolveArgs, search: bool) -> Outcome {
    let cfg = job_config(a, search);
    cfg.validate()?;
    let nt = cfg.nt;
    let (m0, r0) = normalize_intensity(&read_scalar::<T>(&a.template, nt)?);
    let (m1, r1) = normalize_intensity(&read_scalar::<T>(&a.reference, nt)?);
    if m0.grid().dims() != m1.grid().dims() {
        return Err(Error::GridMismatch.into());
    }
    let problem = Problem::new(m0.clone(), m1.clone(), cfg.reg(), cfg.distance)?.with_transport(cfg.transport());
    let dir = &cfg.out_dir;
    let mut report = RunReport::new(if search { "search-alpha" } else { "register" }, &cfg);
    report.intensity = Some(IntensityRanges { template: r0, reference: r1 });

    let solved: Option<(VectorField<T>, SolveReport)> = if search {
        let outcome = search_alpha(&problem, &cfg.optimizer(), &cfg.search())?;
        write_trials_csv(dir.join("trials.csv"), &outcome.trials)?;
        report.search = Some(SearchSummary {
            status: outcome.status,
            alpha: outcome.alpha,
            trials: outcome.trials.len(),
            anomalies: outcome.anomalies.clone(),
        });
        outcome.velocity.zip(outcome.report)
    } else {
        Some(register(&problem, &cfg.optimizer(), None)?)
    };

    let mut failure = None;
    if let Some((v, solve)) = solved {
        let deformed = solve_state(&Trajectory::new(&v, cfg.transport())?, &m0)?.last().clone();
        write(dir, "velocity.clf", Volume::from_vector(&v))?;
        write(dir, "deformed.clf", Volume::from_scalar(&deformed))?;
        write(dir, "residual-before.clf", Volume::from_scalar(&m1.sub(&m0)?))?;
        write(dir, "residual-after.clf", Volume::from_scalar(&m1.sub(&deformed)?))?;
        report.det = Some(detgrad_stats(&v, cfg.transport())?);
        // search-alpha succeeds on an admissible α; the α* solve status is in the report
        if !search && solve.status != SolveStatus::Converged {
            failure = Some(format!("{:?} after {} iterations", solve.status, solve.iterations));
        }
        report.solve = Some(solve);
    } else {
        failure = Some(format!("no admissible alpha: {:?}", report.search.as_ref().map(|s| s.status)));
    }
    write_json(dir.join("report.json"), &report)?;
    if let Some(SearchSummary { status: SearchStatus::FailedAtStart, .. }) = report.search {
        failure.get_or_insert_with(|| "determinant bounds violated at the starting alpha".into());
    }
    match failure {
        Some(msg) => Err(Failure::Solver(msg)),
        None => Ok(()),
    }
}

fn run_transport<T: Real>(a: &TransportArgs) -> Outcome {
    let c = &a.common;
    let v: VectorField<T> = read_volume(&a.velocity)?.to_vector(c.nt)?;
    let input = read_volume(&a.template)?;
    let out = if let VolumeData::I32(_) = input.data {
        let labels = input.to_labels()?;
        Volume::from_labels(&transport_labels(&labels, &v, transport_config(c))?)
    } else {
        let m0: ScalarField<T> = input.to_scalar(c.nt)?;
        if m0.grid().dims() != v.grid().dims() {
            return Err(Error::GridMismatch.into());
        }
        Volume::from_scalar(solve_state(&Trajectory::new(&v, transport_config(c))?, &m0)?.last())
    };
    write(&c.out_dir, "deformed.clf", out)
}

fn run_detgrad<T: Real>(a: &DetgradArgs) -> Outcome {
    let c = &a.common;
    let v: VectorField<T> = read_volume(&a.velocity)?.to_vector(c.nt)?;
    let det = solve_deformation_tensor(&Trajectory::new(&v, transport_config(c))?)?.determinant();
    write(&c.out_dir, "detgrad.clf", Volume::from_scalar(&det))?;
    let stats = detgrad_stats(&v, transport_config(c))?;
    let ok = stats.min > a.eps_det && stats.max < 1.0 / a.eps_det;
    let json = serde_json::json!({ "min": stats.min, "mean": stats.mean, "max": stats.max, "eps_det": a.eps_det, "within_bounds": ok });
    write_json(c.out_dir.join("detgrad.json"), &json)?;
    println!("{json}");
    Ok(())
}

fn run_dice(a: &DiceArgs) -> Outcome {
    let la = read_volume(&a.template)?.to_labels()?;
    let lb = read_volume(&a.reference)?.to_labels()?;
    let r = dice(&la, &lb, None)?;
    fs::create_dir_all(&a.out_dir)?;
    let path = a.out_dir.join("dice.csv");
    write_dice_csv(&path, &r)?;
    print!("{}", fs::read_to_string(&path)?);
    Ok(())
}

/// Four intensity bands of a `[0, 1]` image as labels `0..=3`.
fn bands<T: Real>(m: &ScalarField<T>) -> Result<LabelVolume, Error> {
    let labels = m.values().iter().map(|x| ((x.to_f64_lossy() * 4.0).floor() as i32).clamp(0, 3)).collect();
    LabelVolume::new(*m.grid(), labels)
}

fn run_synth<T: Real>(a: &SynthArgs) -> Outcome {
    let kind = match a.case {
        CaseArg::Translation => SynthKind::Translation,
        CaseArg::Rotation => SynthKind::Rotation,
        CaseArg::Swirl => SynthKind::Swirl,
        CaseArg::Compress => SynthKind::Compress,
    };
    let c = synth_case::<T>(kind, a.n, a.d as usize, a.common.nt, a.seed)?;
    let dir = &a.common.out_dir;
    write(dir, "template.clf", Volume::from_scalar(&c.m0))?;
    write(dir, "reference.clf", Volume::from_scalar(&c.m1))?;
    write(dir, "velocity-true.clf", Volume::from_vector(&c.v_true))?;
    write(dir, "labels-template.clf", Volume::from_labels(&bands(&c.m0)?))?;
    write(dir, "labels-reference.clf", Volume::from_labels(&bands(&c.m1)?))?;
    Ok(())
}
