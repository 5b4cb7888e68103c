use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use spinsampler::bosonsampling::{sweep_comparison, SweepSchedule};
use spinsampler::darkstates::{monte_carlo_decay, write_decay_csv, DarkStateBudget, DecayOptions};
use spinsampler::dynamics::{
    binomial, evolve_lindblad, evolve_state, mask_of, spin_sampling_run, BasisSet, DensityMatrix, LindbladGenerator,
    SamplingOptions, SectorState, TrajectoryWriter, TruncatedBasis, MAX_BASIS_SIZE,
};
use spinsampler::effective::{
    build_lindbladian, build_spin_hamiltonian, resonator_couplings, CouplingConfig, ResonatorMode, SpinHamiltonian,
};
use spinsampler::interferometer::{
    decompose, decompose_matrix, CircuitResponse, FixedCircuit, InterferometerMesh, MAX_DECOMPOSE_PORTS,
};
use spinsampler::linalg::{haar_orthogonal, haar_unitary, MatrixJson, RngStream, UnitaryMatrix};
use spinsampler::{input_site, output_site};

use crate::args::{Aggregation, Dynamics, IntegratorArg, MatrixKind, ModeSpec, Model, Schedule};
use crate::config::{ExperimentConfig, Params};
use crate::error::{CliError, Violation};

/// Largest register accepted for density-matrix runs.
pub const MAX_DENSITY_SITES: usize = 8;
/// Largest port count of a random or file circuit.
pub const MAX_PORTS: usize = 64;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Circuit {
    Unitary { path: PathBuf },
    Mesh { path: PathBuf },
    Haar { ports: usize },
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Plan {
    Haar {
        dim: usize,
        kind: MatrixKind,
    },
    Decompose {
        input: PathBuf,
    },
    MeshEval {
        mesh: PathBuf,
        nu: f64,
    },
    CompileCouplings {
        input: PathBuf,
    },
    Effective {
        model: Model,
        circuit: Circuit,
        gamma: f64,
        delta: Option<f64>,
        modes: Vec<ModeSpec>,
    },
    Evolve {
        dynamics: Dynamics,
        circuit: Circuit,
        initial: Vec<usize>,
        time: f64,
        dt: f64,
        integrator: IntegratorArg,
        coupling: f64,
        delta_tilde: f64,
        gamma: f64,
        dump_state: bool,
    },
    DarkDecay {
        m_list: Vec<usize>,
        n_list: Vec<usize>,
        samples: usize,
        large: bool,
        channel_agg: Aggregation,
    },
    AdiabaticBs {
        m: usize,
        n: usize,
        time: f64,
        eps: f64,
        schedule: Schedule,
        dt: f64,
        circuit: Option<PathBuf>,
        dump_state: bool,
    },
    SpinSampling {
        m: usize,
        n: usize,
        time: Option<f64>,
        coupling: f64,
        dt: f64,
        circuit: Option<PathBuf>,
    },
}

impl Plan {
    /// Unit system of the numbers the run emits.
    pub fn units(&self) -> &'static str {
        match self {
            Plan::Haar { .. } | Plan::Decompose { .. } | Plan::MeshEval { .. } => "dimensionless",
            Plan::CompileCouplings { .. } | Plan::AdiabaticBs { .. } | Plan::SpinSampling { .. } => "delta",
            Plan::Effective {
                model: Model::Resonator,
                ..
            } => "frequency",
            Plan::Evolve {
                dynamics: Dynamics::Coherent,
                ..
            } => "delta",
            Plan::Effective { .. } | Plan::Evolve { .. } | Plan::DarkDecay { .. } => "gamma",
        }
    }
}

struct Check {
    prefix: &'static str,
    violations: Vec<Violation>,
}

impl Check {
    fn fail(&mut self, field: &str, constraint: impl Into<String>) {
        self.violations
            .push(Violation::new(format!("{}.{field}", self.prefix), constraint));
    }

    fn count(&mut self, field: &str, v: Option<i64>, lo: usize, hi: usize) -> usize {
        let Some(x) = v else {
            self.fail(field, "required");
            return lo;
        };
        match usize::try_from(x) {
            Ok(k) if (lo..=hi).contains(&k) => k,
            _ => {
                self.fail(field, format!("must lie in {lo}..={hi}, got {x}"));
                lo
            }
        }
    }

    fn positive(&mut self, field: &str, v: Option<f64>, default: f64) -> f64 {
        let x = v.unwrap_or(default);
        if !(x > 0.0) || !x.is_finite() {
            self.fail(field, format!("must be positive and finite, got {x}"));
            return default;
        }
        x
    }

    fn finite(&mut self, field: &str, v: Option<f64>, default: f64) -> f64 {
        let x = v.unwrap_or(default);
        if !x.is_finite() {
            self.fail(field, "must be finite");
            return default;
        }
        x
    }

    fn file(&mut self, field: &str, v: &Option<PathBuf>) -> PathBuf {
        match v {
            None => {
                self.fail(field, "required");
                PathBuf::new()
            }
            Some(p) => {
                if !p.is_file() {
                    self.fail(field, format!("file {} does not exist", p.display()));
                }
                p.clone()
            }
        }
    }

    fn optional_file(&mut self, field: &str, v: &Option<PathBuf>) -> Option<PathBuf> {
        v.as_ref().map(|_| self.file(field, v))
    }

    fn circuit(&mut self, circuit: &Option<PathBuf>, mesh: &Option<PathBuf>, ports: Option<i64>) -> Circuit {
        let given = [circuit.is_some(), mesh.is_some(), ports.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if given != 1 {
            self.fail("circuit", "exactly one of circuit, mesh or ports is required");
            return Circuit::Haar { ports: 1 };
        }
        if circuit.is_some() {
            Circuit::Unitary {
                path: self.file("circuit", circuit),
            }
        } else if mesh.is_some() {
            Circuit::Mesh {
                path: self.file("mesh", mesh),
            }
        } else {
            Circuit::Haar {
                ports: self.count("ports", ports, 1, MAX_PORTS),
            }
        }
    }

    fn dump_needs_out(&mut self, dump: bool, out: &Option<PathBuf>) {
        if dump && out.is_none() {
            self.fail("dump-state", "requires an output file");
        }
    }

    fn sector_fits(&mut self, field: &str, sites: usize, excitations: usize) {
        if binomial(sites, excitations).is_none_or(|c| c > MAX_BASIS_SIZE as u128) {
            self.fail(
                field,
                format!("size-limit: {excitations} excitations on {sites} qubits exceed {MAX_BASIS_SIZE} states"),
            );
        }
    }
}

/// Applies defaults and checks every constraint that can be checked
/// without running the experiment.
pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, Vec<Violation>> {
    let mut c = Check {
        prefix: cfg.kind().name(),
        violations: cfg.violations.clone(),
    };
    if cfg.threads == Some(0) {
        c.violations.push(Violation::new("threads", "must be at least 1"));
    }
    let plan = match &cfg.params {
        Params::Haar(a) => Plan::Haar {
            dim: c.count("dim", a.dim, 1, 256),
            kind: a.kind.unwrap_or(MatrixKind::Unitary),
        },
        Params::Decompose(a) => Plan::Decompose {
            input: c.file("in", &a.input),
        },
        Params::MeshEval(a) => {
            let nu = c.finite("nu", a.nu, 1.0);
            if nu == 0.0 {
                c.fail("nu", "must be non-zero");
            }
            Plan::MeshEval {
                mesh: c.file("mesh", &a.mesh),
                nu,
            }
        }
        Params::CompileCouplings(a) => Plan::CompileCouplings {
            input: c.file("in", &a.input),
        },
        Params::Effective(a) => {
            let model = a.model.unwrap_or(Model::Open);
            let circuit = c.circuit(&a.circuit, &a.mesh, a.ports);
            let gamma = c.positive("gamma", a.gamma, 1.0);
            let modes = a.modes.clone().unwrap_or_default();
            if model == Model::Resonator {
                if a.delta.is_none() {
                    c.fail("delta", "required by the resonator model");
                } else {
                    c.positive("delta", a.delta, 1.0);
                }
                if modes.is_empty() {
                    c.fail("modes", "the resonator model needs at least one mode");
                }
            }
            Plan::Effective {
                model,
                circuit,
                gamma,
                delta: a.delta,
                modes,
            }
        }
        Params::Evolve(a) => {
            let dynamics = a.dynamics.unwrap_or(Dynamics::Coherent);
            let circuit = c.circuit(&a.circuit, &a.mesh, a.ports);
            let gamma = c.positive("gamma", a.gamma, 1.0);
            let time = c.positive("time", a.time, 10.0);
            let coupling = c.positive("coupling", a.coupling, 1.0);
            let default_dt = match dynamics {
                Dynamics::Coherent => 0.01 / coupling,
                Dynamics::Open => 0.01 / gamma,
            };
            let dt = c.positive("dt", a.dt, default_dt);
            let initial: Vec<usize> = a
                .initial
                .clone()
                .unwrap_or_else(|| vec![0])
                .into_iter()
                .filter_map(|x| match usize::try_from(x) {
                    Ok(p) => Some(p),
                    Err(_) => {
                        c.fail("initial", format!("port {x} is negative"));
                        None
                    }
                })
                .collect();
            let mut sorted = initial.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != initial.len() || initial.is_empty() {
                c.fail("initial", "needs at least one port and no repeats");
            }
            if let Circuit::Haar { ports } = circuit {
                if let Some(&p) = sorted.last() {
                    if p >= ports {
                        c.fail("initial", format!("port {p} does not exist on {ports} ports"));
                    }
                }
                match dynamics {
                    Dynamics::Coherent => c.sector_fits("initial", 2 * ports, initial.len()),
                    Dynamics::Open if 2 * ports > MAX_DENSITY_SITES => c.fail(
                        "ports",
                        format!("size-limit: density-matrix runs take at most {MAX_DENSITY_SITES} qubits"),
                    ),
                    Dynamics::Open => {}
                }
            }
            if dynamics == Dynamics::Open && dt * gamma > 0.01 * (1.0 + 1e-12) {
                c.fail("dt", "dt·gamma must not exceed 0.01");
            }
            let dump_state = a.dump_state.unwrap_or(false);
            c.dump_needs_out(dump_state, &cfg.out);
            Plan::Evolve {
                dynamics,
                circuit,
                initial,
                time,
                dt,
                integrator: a.integrator.unwrap_or(IntegratorArg::Rk4),
                coupling,
                delta_tilde: c.finite("delta-tilde", a.delta_tilde, 0.0),
                gamma,
                dump_state,
            }
        }
        Params::DarkDecay(a) => {
            let large = a.large.unwrap_or(false);
            let budget = if large {
                DarkStateBudget::LARGE
            } else {
                DarkStateBudget::DEFAULT
            };
            let to_counts = |c: &mut Check, field: &str, v: Option<Vec<i64>>, default: &[usize]| -> Vec<usize> {
                match v {
                    None => default.to_vec(),
                    Some(list) if list.is_empty() => {
                        c.fail(field, "must not be empty");
                        Vec::new()
                    }
                    Some(list) => list
                        .into_iter()
                        .filter_map(|x| match usize::try_from(x) {
                            Ok(k) if k > 0 => Some(k),
                            _ => {
                                c.fail(field, format!("entries must be positive, got {x}"));
                                None
                            }
                        })
                        .collect(),
                }
            };
            let m_list = to_counts(&mut c, "m-list", a.m_list.clone(), &[10, 20, 30]);
            let n_list = to_counts(&mut c, "n-list", a.n_list.clone(), &[2, 3, 4, 5]);
            let samples = match a.samples.unwrap_or(200) {
                s if s > 0 => s as usize,
                s => {
                    c.fail("samples", format!("must be positive, got {s}"));
                    1
                }
            };
            for &m in &m_list {
                if m > budget.max_ports {
                    c.fail(
                        "m-list",
                        format!(
                            "size-limit: M = {m} exceeds the budget of {} ports{}",
                            budget.max_ports,
                            if large { "" } else { " (see --large)" }
                        ),
                    );
                }
            }
            for &n in &n_list {
                if n > budget.max_excitations {
                    c.fail(
                        "n-list",
                        format!(
                            "size-limit: N = {n} exceeds the budget of {} excitations",
                            budget.max_excitations
                        ),
                    );
                }
            }
            for &m in &m_list {
                for &n in &n_list {
                    if n > m {
                        c.fail("n-list", format!("invalid-filling: N = {n} exceeds M = {m}"));
                    }
                }
            }
            Plan::DarkDecay {
                m_list,
                n_list,
                samples,
                large,
                channel_agg: a.channel_agg.unwrap_or(Aggregation::Mean),
            }
        }
        Params::AdiabaticBs(a) => {
            let m = c.count("m", a.m, 1, MAX_PORTS);
            let n = c.count("n", a.n, 1, MAX_PORTS);
            if n > m {
                c.fail("n", format!("invalid-filling: N = {n} exceeds M = {m}"));
            } else {
                c.sector_fits("n", 2 * m, n);
            }
            let dump_state = a.dump_state.unwrap_or(false);
            let defaults = SweepSchedule::default();
            Plan::AdiabaticBs {
                m,
                n,
                time: c.positive("time", a.time, defaults.total_time),
                eps: c.finite("eps", a.eps, defaults.epsilon),
                schedule: a.schedule.unwrap_or(Schedule::Smoothstep),
                dt: c.positive("dt", a.dt, defaults.dt),
                circuit: c.optional_file("circuit", &a.circuit),
                dump_state,
            }
        }
        Params::SpinSampling(a) => {
            let m = c.count("m", a.m, 1, MAX_PORTS);
            let n = c.count("n", a.n, 1, MAX_PORTS);
            if n > m {
                c.fail("n", format!("invalid-filling: N = {n} exceeds M = {m}"));
            } else {
                c.sector_fits("n", 2 * m, n);
            }
            let time = a.time.map(|t| c.positive("time", Some(t), PI));
            Plan::SpinSampling {
                m,
                n,
                time,
                coupling: c.positive("coupling", a.coupling, 1.0),
                dt: c.positive("dt", a.dt, SamplingOptions::default().dt),
                circuit: c.optional_file("circuit", &a.circuit),
            }
        }
    };
    if c.violations.is_empty() {
        Ok(plan)
    } else {
        Err(c.violations)
    }
}

/// Empty iff [`plan`] succeeds.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    plan(cfg).err().unwrap_or_default()
}

/// Files produced by a run. The primary artifact has no suffix.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub suffix: Option<&'static str>,
    pub bytes: Vec<u8>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("invalid JSON: {e}")))
}

fn read_unitary(path: &Path) -> Result<UnitaryMatrix, CliError> {
    let m: MatrixJson = read_json(path)?;
    let c = m
        .to_complex()
        .map_err(|e| CliError::core(format!("reading {}", path.display()), e))?;
    UnitaryMatrix::new(c).map_err(|e| CliError::core(format!("reading {}", path.display()), e))
}

fn read_mesh(path: &Path) -> Result<InterferometerMesh, CliError> {
    let mesh: InterferometerMesh = read_json(path)?;
    mesh.validate()
        .map_err(|e| CliError::core(format!("reading {}", path.display()), e))?;
    Ok(mesh)
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s.into_bytes()
}

fn core<T>(context: &str, r: spinsampler::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::core(context, e))
}

fn circuit_response(circuit: &Circuit, seed: u64) -> Result<Box<dyn CircuitResponse>, CliError> {
    Ok(match circuit {
        Circuit::Unitary { path } => Box::new(FixedCircuit(read_unitary(path)?)),
        Circuit::Mesh { path } => Box::new(read_mesh(path)?),
        Circuit::Haar { ports } => {
            let mut rng = RngStream::new(seed, 0).rng();
            Box::new(FixedCircuit(
                core("drawing circuit", haar_orthogonal(*ports, &mut rng))?.to_unitary(),
            ))
        }
    })
}

/// Carries out a validated plan.
pub fn execute(plan: &Plan, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let primary = |bytes| vec![Artifact { suffix: None, bytes }];
    match plan {
        Plan::Haar { dim, kind } => {
            let mut rng = RngStream::new(seed, 0).rng();
            let m = match kind {
                MatrixKind::Unitary => {
                    MatrixJson::from_complex(core("haar", haar_unitary(*dim, &mut rng))?.as_matrix())
                }
                MatrixKind::Orthogonal => {
                    MatrixJson::from_real(core("haar", haar_orthogonal(*dim, &mut rng))?.as_matrix())
                }
            };
            Ok(primary(pretty(&m)))
        }
        Plan::Decompose { input } => {
            let m: MatrixJson = read_json(input)?;
            let c = core("decompose", m.to_complex())?;
            if c.nrows() > MAX_DECOMPOSE_PORTS {
                return Err(CliError::core(
                    "decompose",
                    spinsampler::Error::SizeLimit(format!("{} ports", c.nrows())),
                ));
            }
            Ok(primary(pretty(&core("decompose", decompose_matrix(&c))?)))
        }
        Plan::MeshEval { mesh, nu } => {
            let mesh = read_mesh(mesh)?;
            let u = core("mesh-eval", mesh.unitary(*nu))?;
            Ok(primary(pretty(&MatrixJson::from_complex(u.as_matrix()))))
        }
        Plan::CompileCouplings { input } => {
            let m: MatrixJson = read_json(input)?;
            let j = core("compile-couplings", m.to_real())?;
            let (u, delta) = core("compile-couplings", spinsampler::effective::unitary_from_couplings(&j))?;
            let mesh = core("compile-couplings", decompose(&u))?;
            Ok(primary(pretty(&json!({
                "units": "delta",
                "delta": delta,
                "unitary": MatrixJson::from_complex(u.as_matrix()),
                "mesh": mesh,
            }))))
        }
        Plan::Effective {
            model,
            circuit,
            gamma,
            delta,
            modes,
        } => {
            let response = circuit_response(circuit, seed)?;
            let value = match model {
                Model::Resonator => {
                    let cfg = CouplingConfig::resonator(
                        delta.unwrap_or(1.0),
                        modes
                            .iter()
                            .map(|m| ResonatorMode {
                                omega: m.omega,
                                g: m.g,
                                nu: m.nu,
                            })
                            .collect(),
                    );
                    let h: SpinHamiltonian = core("effective", resonator_couplings(&cfg, response.as_ref()))?;
                    json!({ "model": "resonator", "units": "frequency", "hamiltonian": h })
                }
                Model::Open => {
                    let u = core("effective", response.unitary_at(1.0))?;
                    let l = core("effective", build_lindbladian(&u, *gamma))?;
                    json!({
                        "model": "open",
                        "units": "gamma",
                        "ports": l.ports,
                        "gamma": l.gamma,
                        "coupling": MatrixJson::from_real(&(u.imag_part() * *gamma)),
                        "rates": MatrixJson::from_real(&l.rates),
                    })
                }
            };
            Ok(primary(pretty(&value)))
        }
        Plan::Evolve { .. } => evolve(plan, seed),
        Plan::DarkDecay {
            m_list,
            n_list,
            samples,
            large,
            channel_agg,
        } => {
            let opts = DecayOptions {
                aggregation: (*channel_agg).into(),
                budget: if *large {
                    DarkStateBudget::LARGE
                } else {
                    DarkStateBudget::DEFAULT
                },
            };
            let mut rows = Vec::new();
            for &m in m_list {
                for &n in n_list {
                    let stream = RngStream::new(seed, ((m as u64) << 16) | n as u64);
                    log::info!("dark-decay M = {m}, N = {n}");
                    rows.push(core(
                        &format!("dark-decay M = {m}, N = {n}"),
                        monte_carlo_decay(m, n, *samples, stream, opts),
                    )?);
                }
            }
            let mut bytes = Vec::new();
            write_decay_csv(&mut bytes, &rows).expect("writing to memory");
            Ok(primary(bytes))
        }
        Plan::AdiabaticBs {
            m,
            n,
            time,
            eps,
            schedule,
            dt,
            circuit,
            dump_state,
        } => {
            let u = match circuit {
                Some(p) => read_unitary(p)?,
                None => {
                    let mut rng = RngStream::new(seed, 0).rng();
                    core("adiabatic-bs", haar_orthogonal(*m, &mut rng))?.to_unitary()
                }
            };
            if u.dim() != *m {
                return Err(CliError::core(
                    "adiabatic-bs",
                    spinsampler::Error::Shape(format!("circuit has {} ports, expected {m}", u.dim())),
                ));
            }
            let sched = SweepSchedule {
                epsilon: *eps,
                total_time: *time,
                profile: (*schedule).into(),
                dt: *dt,
            };
            let r = core("adiabatic-bs", sweep_comparison(&u, *n, &sched, 1.0, *dump_state))?;
            Ok(primary(pretty(&r)))
        }
        Plan::SpinSampling {
            m,
            n,
            time,
            coupling,
            dt,
            circuit,
        } => {
            let u = match circuit {
                Some(p) => read_unitary(p)?,
                None => {
                    let mut rng = RngStream::new(seed, 0).rng();
                    core("spin-sampling", haar_unitary(*m, &mut rng))?
                }
            };
            let opts = SamplingOptions {
                coupling: *coupling,
                time: time.map(|t| t / coupling),
                dt: *dt,
            };
            let r = core("spin-sampling", spin_sampling_run(&u, *n, opts))?;
            let mut v = serde_json::to_value(&r).expect("serializable result");
            v["units"] = Value::from("delta");
            Ok(primary(pretty(&v)))
        }
    }
}

fn site_columns(ports: usize) -> Vec<String> {
    (0..ports)
        .map(|m| format!("n_in_{m}"))
        .chain((0..ports).map(|m| format!("n_out_{m}")))
        .collect()
}

fn evolve(plan: &Plan, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let Plan::Evolve {
        dynamics,
        circuit,
        initial,
        time,
        dt,
        integrator,
        coupling,
        delta_tilde,
        gamma,
        dump_state,
    } = plan
    else {
        unreachable!("evolve called with another plan");
    };
    let u = core("evolve", circuit_response(circuit, seed)?.unitary_at(1.0))?;
    let m = u.dim();
    if let Some(&p) = initial.iter().max() {
        if p >= m {
            return Err(CliError::Validation(vec![Violation::new(
                "evolve.initial",
                format!("port {p} does not exist on {m} ports"),
            )]));
        }
    }
    let sites: Vec<usize> = initial.iter().map(|&p| input_site(p)).collect();
    let mut columns = site_columns(m);
    let mut artifacts = Vec::new();
    let mut csv = Vec::new();
    match dynamics {
        Dynamics::Coherent => {
            columns.push("norm".into());
            let names: Vec<&str> = columns.iter().map(String::as_str).collect();
            let mut writer = TrajectoryWriter::new(&mut csv, &names).expect("writing to memory");
            let h = core("evolve", SpinHamiltonian::new(*delta_tilde, u.real_part() * *coupling))?;
            let op = core("evolve", build_spin_hamiltonian(&h, sites.len()))?;
            let psi0 = core("evolve", SectorState::basis_state(op.basis.clone(), mask_of(&sites)))?;
            let states = op.basis.states().to_vec();
            let (state, _) = core(
                "evolve",
                evolve_state(&op.matrix, &psi0, *time, *dt, (*integrator).into(), |t, psi| {
                    let mut row = vec![0.0; 2 * m + 1];
                    for (&mask, z) in states.iter().zip(psi) {
                        let p = z.norm_sqr();
                        accumulate(&mut row, m, mask, p);
                        row[2 * m] += p;
                    }
                    row[2 * m] = row[2 * m].sqrt();
                    writer.row(t, &row).expect("writing to memory");
                }),
            )?;
            if *dump_state {
                artifacts.push(Artifact {
                    suffix: Some(".state.json"),
                    bytes: pretty(&state.to_dump()),
                });
            }
        }
        Dynamics::Open => {
            columns.push("trace".into());
            let names: Vec<&str> = columns.iter().map(String::as_str).collect();
            let mut writer = TrajectoryWriter::new(&mut csv, &names).expect("writing to memory");
            let l = core("evolve", build_lindbladian(&u, *gamma))?;
            if 2 * m > MAX_DENSITY_SITES {
                return Err(CliError::core(
                    "evolve",
                    spinsampler::Error::SizeLimit(format!("{} qubits exceed {MAX_DENSITY_SITES}", 2 * m)),
                ));
            }
            let basis = Arc::new(core("evolve", TruncatedBasis::new(2 * m, sites.len()))?);
            let generator = core("evolve", LindbladGenerator::new(&l, basis.clone()))?;
            let rho0 = core("evolve", DensityMatrix::basis_projector(basis.clone(), mask_of(&sites)))?;
            let states = basis.states().to_vec();
            let result = core(
                "evolve",
                evolve_lindblad(&generator, &rho0, *time, *dt, |t, rho| {
                    let mut row = vec![0.0; 2 * m + 1];
                    for (&mask, p) in states.iter().zip(rho.populations()) {
                        accumulate(&mut row, m, mask, p);
                        row[2 * m] += p;
                    }
                    writer.row(t, &row).expect("writing to memory");
                }),
            )?;
            if *dump_state {
                let rho = result.state.matrix();
                let states: Vec<Vec<usize>> = states
                    .iter()
                    .map(|&s| spinsampler::dynamics::occupied_sites(s))
                    .collect();
                artifacts.push(Artifact {
                    suffix: Some(".state.json"),
                    bytes: pretty(&json!({
                        "sites": 2 * m,
                        "states": states,
                        "rho": MatrixJson::from_complex(rho),
                    })),
                });
            }
        }
    }
    artifacts.insert(
        0,
        Artifact {
            suffix: None,
            bytes: csv,
        },
    );
    Ok(artifacts)
}

/// Adds `p` to the input/output occupation columns of every set bit.
fn accumulate(row: &mut [f64], ports: usize, mask: u128, p: f64) {
    for site in spinsampler::dynamics::occupied_sites(mask) {
        let col = if site < ports {
            site
        } else {
            ports + (site - output_site(ports, 0))
        };
        row[col] += p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::{AdiabaticArgs, DarkDecayArgs, EvolveArgs};

    fn config(params: Params) -> ExperimentConfig {
        ExperimentConfig::from_flags(params, None, None, None, None)
    }

    #[test]
    fn dark_decay_defaults() {
        let plan = plan(&config(Params::DarkDecay(DarkDecayArgs::default()))).unwrap();
        let Plan::DarkDecay {
            m_list,
            n_list,
            samples,
            large,
            ..
        } = plan
        else {
            panic!("wrong plan");
        };
        assert_eq!(
            (m_list, n_list, samples, large),
            (vec![10, 20, 30], vec![2, 3, 4, 5], 200, false)
        );
    }

    #[test]
    fn budget_violations_point_at_large() {
        let args = DarkDecayArgs {
            m_list: Some(vec![40]),
            n_list: Some(vec![2]),
            ..Default::default()
        };
        let v = validate(&config(Params::DarkDecay(args)));
        assert_eq!(v.len(), 1);
        assert!(v[0].constraint.contains("--large"));
    }

    #[test]
    fn sweeps_need_ports_and_excitations() {
        let v = validate(&config(Params::AdiabaticBs(AdiabaticArgs::default())));
        let fields: Vec<&str> = v.iter().map(|x| x.field.as_str()).collect();
        assert_eq!(fields, ["adiabatic-bs.m", "adiabatic-bs.n"]);
    }

    #[test]
    fn evolve_requires_exactly_one_circuit() {
        let v = validate(&config(Params::Evolve(EvolveArgs::default())));
        assert_eq!(v[0].field, "evolve.circuit");
        let args = EvolveArgs {
            ports: Some(3),
            dump_state: Some(true),
            ..Default::default()
        };
        let v = validate(&config(Params::Evolve(args)));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "evolve.dump-state");
    }

    #[test]
    fn open_evolution_is_limited_to_small_registers() {
        let args = EvolveArgs {
            dynamics: Some(Dynamics::Open),
            ports: Some(5),
            ..Default::default()
        };
        let v = validate(&config(Params::Evolve(args)));
        assert!(v.iter().any(|x| x.constraint.contains("size-limit")));
    }

    #[test]
    fn units_follow_the_dynamics() {
        let coherent = plan(&config(Params::Evolve(EvolveArgs {
            ports: Some(2),
            ..Default::default()
        })))
        .unwrap();
        assert_eq!(coherent.units(), "delta");
        let open = plan(&config(Params::Evolve(EvolveArgs {
            ports: Some(2),
            dynamics: Some(Dynamics::Open),
            ..Default::default()
        })))
        .unwrap();
        assert_eq!(open.units(), "gamma");
    }
}
