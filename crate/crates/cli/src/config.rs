use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::args::{
    AdiabaticArgs, CompileArgs, DarkDecayArgs, DecomposeArgs, EffectiveArgs, EvolveArgs, HaarArgs, Kind, MeshEvalArgs,
    SpinSamplingArgs,
};
use crate::error::{CliError, Violation};

/// Contents of a TOML configuration file. Experiment parameters live in a
/// table named after the experiment, e.g. `[dark-decay]`.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Kind>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub haar: Option<HaarArgs>,
    pub decompose: Option<DecomposeArgs>,
    pub mesh_eval: Option<MeshEvalArgs>,
    pub compile_couplings: Option<CompileArgs>,
    pub effective: Option<EffectiveArgs>,
    pub evolve: Option<EvolveArgs>,
    pub dark_decay: Option<DarkDecayArgs>,
    pub adiabatic_bs: Option<AdiabaticArgs>,
    pub spin_sampling: Option<SpinSamplingArgs>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.chars().rev().take_while(|&c| c != '\n').count() + 1;
    (line, column)
}

/// Parses a configuration file. Relative paths inside it are taken
/// relative to the file's directory.
pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
        line: None,
        column: None,
    })?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<ConfigFile, CliError> {
    let mut file: ConfigFile = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = line_column(text, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        CliError::Config {
            path: path.to_path_buf(),
            message: e.message().to_string(),
            line,
            column,
        }
    })?;
    let dir = path.parent().unwrap_or(Path::new(""));
    file.rebase(dir);
    Ok(file)
}

fn rebase(p: &mut Option<PathBuf>, dir: &Path) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = dir.join(&*path);
        }
    }
}

impl ConfigFile {
    fn rebase(&mut self, dir: &Path) {
        rebase(&mut self.out, dir);
        if let Some(a) = &mut self.decompose {
            rebase(&mut a.input, dir);
        }
        if let Some(a) = &mut self.mesh_eval {
            rebase(&mut a.mesh, dir);
        }
        if let Some(a) = &mut self.compile_couplings {
            rebase(&mut a.input, dir);
        }
        if let Some(a) = &mut self.effective {
            rebase(&mut a.circuit, dir);
            rebase(&mut a.mesh, dir);
        }
        if let Some(a) = &mut self.evolve {
            rebase(&mut a.circuit, dir);
            rebase(&mut a.mesh, dir);
        }
        if let Some(a) = &mut self.adiabatic_bs {
            rebase(&mut a.circuit, dir);
        }
        if let Some(a) = &mut self.spin_sampling {
            rebase(&mut a.circuit, dir);
        }
    }

    fn take_section(&mut self, kind: Kind) -> Params {
        match kind {
            Kind::Haar => Params::Haar(self.haar.take().unwrap_or_default()),
            Kind::Decompose => Params::Decompose(self.decompose.take().unwrap_or_default()),
            Kind::MeshEval => Params::MeshEval(self.mesh_eval.take().unwrap_or_default()),
            Kind::CompileCouplings => Params::CompileCouplings(self.compile_couplings.take().unwrap_or_default()),
            Kind::Effective => Params::Effective(self.effective.take().unwrap_or_default()),
            Kind::Evolve => Params::Evolve(self.evolve.take().unwrap_or_default()),
            Kind::DarkDecay => Params::DarkDecay(self.dark_decay.take().unwrap_or_default()),
            Kind::AdiabaticBs => Params::AdiabaticBs(self.adiabatic_bs.take().unwrap_or_default()),
            Kind::SpinSampling => Params::SpinSampling(self.spin_sampling.take().unwrap_or_default()),
        }
    }

    /// Tables present for experiments other than `kind`.
    fn foreign_sections(&self, kind: Kind) -> Vec<&'static str> {
        let present = [
            (Kind::Haar, self.haar.is_some()),
            (Kind::Decompose, self.decompose.is_some()),
            (Kind::MeshEval, self.mesh_eval.is_some()),
            (Kind::CompileCouplings, self.compile_couplings.is_some()),
            (Kind::Effective, self.effective.is_some()),
            (Kind::Evolve, self.evolve.is_some()),
            (Kind::DarkDecay, self.dark_decay.is_some()),
            (Kind::AdiabaticBs, self.adiabatic_bs.is_some()),
            (Kind::SpinSampling, self.spin_sampling.is_some()),
        ];
        present
            .into_iter()
            .filter(|&(k, p)| p && k != kind)
            .map(|(k, _)| k.name())
            .collect()
    }
}

/// Field-wise `flag.or(file)`.
pub trait Merge {
    fn merge(self, base: Self) -> Self;
}

macro_rules! merge_fields {
    ($t:ty { $($f:ident),* $(,)? }) => {
        impl Merge for $t {
            fn merge(self, base: Self) -> Self {
                Self { $($f: self.$f.or(base.$f)),* }
            }
        }
    };
}

merge_fields!(HaarArgs { dim, kind });
merge_fields!(DecomposeArgs { input });
merge_fields!(MeshEvalArgs { mesh, nu });
merge_fields!(CompileArgs { input });
merge_fields!(EffectiveArgs {
    model,
    circuit,
    mesh,
    ports,
    gamma,
    delta,
    modes
});
merge_fields!(EvolveArgs {
    dynamics,
    circuit,
    mesh,
    ports,
    initial,
    time,
    dt,
    integrator,
    coupling,
    delta_tilde,
    gamma,
    dump_state,
});
merge_fields!(DarkDecayArgs {
    m_list,
    n_list,
    samples,
    large,
    channel_agg
});
merge_fields!(AdiabaticArgs {
    m,
    n,
    time,
    eps,
    schedule,
    dt,
    circuit,
    dump_state
});
merge_fields!(SpinSamplingArgs {
    m,
    n,
    time,
    coupling,
    dt,
    circuit
});

/// Experiment parameters before defaults are applied.
#[derive(Debug, Clone)]
pub enum Params {
    Haar(HaarArgs),
    Decompose(DecomposeArgs),
    MeshEval(MeshEvalArgs),
    CompileCouplings(CompileArgs),
    Effective(EffectiveArgs),
    Evolve(EvolveArgs),
    DarkDecay(DarkDecayArgs),
    AdiabaticBs(AdiabaticArgs),
    SpinSampling(SpinSamplingArgs),
}

impl Params {
    pub fn kind(&self) -> Kind {
        match self {
            Params::Haar(_) => Kind::Haar,
            Params::Decompose(_) => Kind::Decompose,
            Params::MeshEval(_) => Kind::MeshEval,
            Params::CompileCouplings(_) => Kind::CompileCouplings,
            Params::Effective(_) => Kind::Effective,
            Params::Evolve(_) => Kind::Evolve,
            Params::DarkDecay(_) => Kind::DarkDecay,
            Params::AdiabaticBs(_) => Kind::AdiabaticBs,
            Params::SpinSampling(_) => Kind::SpinSampling,
        }
    }

    fn merge(self, base: Params) -> Params {
        match (self, base) {
            (Params::Haar(a), Params::Haar(b)) => Params::Haar(a.merge(b)),
            (Params::Decompose(a), Params::Decompose(b)) => Params::Decompose(a.merge(b)),
            (Params::MeshEval(a), Params::MeshEval(b)) => Params::MeshEval(a.merge(b)),
            (Params::CompileCouplings(a), Params::CompileCouplings(b)) => Params::CompileCouplings(a.merge(b)),
            (Params::Effective(a), Params::Effective(b)) => Params::Effective(a.merge(b)),
            (Params::Evolve(a), Params::Evolve(b)) => Params::Evolve(a.merge(b)),
            (Params::DarkDecay(a), Params::DarkDecay(b)) => Params::DarkDecay(a.merge(b)),
            (Params::AdiabaticBs(a), Params::AdiabaticBs(b)) => Params::AdiabaticBs(a.merge(b)),
            (Params::SpinSampling(a), Params::SpinSampling(b)) => Params::SpinSampling(a.merge(b)),
            (a, _) => a,
        }
    }
}

/// A fully assembled experiment request.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub params: Params,
    /// Problems found while assembling, reported by validation.
    pub violations: Vec<Violation>,
}

impl ExperimentConfig {
    pub fn kind(&self) -> Kind {
        self.params.kind()
    }

    /// Uses the experiment named in the file.
    pub fn from_file(mut file: ConfigFile) -> Self {
        let mut violations = Vec::new();
        let kind = file.experiment.unwrap_or_else(|| {
            violations.push(Violation::new("experiment", "required: name of the experiment to run"));
            Kind::Haar
        });
        for section in file.foreign_sections(kind) {
            violations.push(Violation::new(
                section,
                format!("table does not belong to experiment {}", kind.name()),
            ));
        }
        let params = file.take_section(kind);
        Self {
            seed: file.seed.unwrap_or(0),
            threads: file.threads,
            out: file.out,
            params,
            violations,
        }
    }

    /// Combines command-line values with an optional file; flags win.
    pub fn from_flags(
        flags: Params,
        seed: Option<u64>,
        threads: Option<usize>,
        out: Option<PathBuf>,
        file: Option<ConfigFile>,
    ) -> Self {
        let kind = flags.kind();
        let mut violations = Vec::new();
        let (base, file_seed, file_threads, file_out) = match file {
            Some(mut f) => {
                if let Some(named) = f.experiment {
                    if named != kind {
                        violations.push(Violation::new(
                            "experiment",
                            format!("file names {} but the command is {}", named.name(), kind.name()),
                        ));
                    }
                }
                for section in f.foreign_sections(kind) {
                    violations.push(Violation::new(
                        section,
                        format!("table does not belong to experiment {}", kind.name()),
                    ));
                }
                let base = f.take_section(kind);
                (Some(base), f.seed, f.threads, f.out)
            }
            None => (None, None, None, None),
        };
        let params = match base {
            Some(b) => flags.merge(b),
            None => flags,
        };
        Self {
            seed: seed.or(file_seed).unwrap_or(0),
            threads: threads.or(file_threads),
            out: out.or(file_out),
            params,
            violations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = parse_config(
            "experiment = \"dark-decay\"\nseed = 3\n[dark-decay]\nsamples = 10\nm-list = [10]\n",
            Path::new("cfg/run.toml"),
        )
        .unwrap();
        let flags = Params::DarkDecay(DarkDecayArgs {
            samples: Some(50),
            ..Default::default()
        });
        let cfg = ExperimentConfig::from_flags(flags, None, None, None, Some(file));
        assert_eq!(cfg.seed, 3);
        match cfg.params {
            Params::DarkDecay(a) => {
                assert_eq!(a.samples, Some(50));
                assert_eq!(a.m_list, Some(vec![10]));
            }
            _ => panic!("wrong experiment"),
        }
        assert!(cfg.violations.is_empty());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let file = parse_config("[decompose]\nin = \"u.json\"\n", Path::new("dir/c.toml")).unwrap();
        assert_eq!(file.decompose.unwrap().input.unwrap(), Path::new("dir/u.json"));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_config("seed = 1\n[dark-decay]\nsamples = \"many\"\n", Path::new("x.toml")).unwrap_err();
        match err {
            CliError::Config { line, column, .. } => {
                assert_eq!(line, Some(3));
                assert!(column.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("[haar]\ndimension = 3\n", Path::new("x.toml")).is_err());
    }

    #[test]
    fn mismatched_experiment_is_a_violation() {
        let file = parse_config("experiment = \"haar\"\n", Path::new("x.toml")).unwrap();
        let cfg = ExperimentConfig::from_flags(Params::DarkDecay(Default::default()), None, None, None, Some(file));
        assert_eq!(cfg.violations.len(), 1);
        assert_eq!(cfg.violations[0].field, "experiment");
    }
}
