use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::spec::DeviceSpec;
use super::{
    BasisSelect, Device, EigenVariant, EigenvalueSampler, EntanglementAnalyser, EntropyCertifier,
    EntropyMeter, ExpectationReadout, FunctionReadout, MatrixFunction, OverlapTest, PovmSampler,
    Readout, UncertaintySampler,
};
use crate::error::{QsimError, Result};
use crate::qcore::{HermitianObservable, PovmSet, PureState};

/// The eleven device kinds of the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DeviceKind {
    Readout,
    FunctionReadout,
    ExpectationReadout,
    EigenvalueSampler,
    PovmSampler,
    OverlapTest,
    BasisSelect,
    EntropyMeter,
    EntropyCertifier,
    EntanglementAnalyse,
    UncertaintySampler,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 11] = [
        DeviceKind::Readout,
        DeviceKind::FunctionReadout,
        DeviceKind::ExpectationReadout,
        DeviceKind::EigenvalueSampler,
        DeviceKind::PovmSampler,
        DeviceKind::OverlapTest,
        DeviceKind::BasisSelect,
        DeviceKind::EntropyMeter,
        DeviceKind::EntropyCertifier,
        DeviceKind::EntanglementAnalyse,
        DeviceKind::UncertaintySampler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeviceKind::Readout => "Readout",
            DeviceKind::FunctionReadout => "FunctionReadout",
            DeviceKind::ExpectationReadout => "ExpectationReadout",
            DeviceKind::EigenvalueSampler => "EigenvalueSampler",
            DeviceKind::PovmSampler => "PovmSampler",
            DeviceKind::OverlapTest => "OverlapTest",
            DeviceKind::BasisSelect => "BasisSelect",
            DeviceKind::EntropyMeter => "EntropyMeter",
            DeviceKind::EntropyCertifier => "EntropyCertifier",
            DeviceKind::EntanglementAnalyse => "EntanglementAnalyse",
            DeviceKind::UncertaintySampler => "UncertaintySampler",
        }
    }

    /// Accepts the canonical name, or any casing with `_`/`-` separators.
    pub fn parse(name: &str) -> Result<Self> {
        let squash = |s: &str| {
            s.chars()
                .filter(|c| *c != '_' && *c != '-')
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let wanted = squash(name);
        Self::ALL
            .into_iter()
            .find(|k| squash(k.name()) == wanted)
            .ok_or_else(|| QsimError::Unknown {
                kind: "device kind",
                name: name.to_string(),
            })
    }

    /// Parameter signature as accepted in a device spec; `?` marks optional keys.
    pub fn params(self) -> &'static str {
        match self {
            DeviceKind::Readout => "basis?, dim?, precision?",
            DeviceKind::FunctionReadout => "function (identity|power), power?, basis?, dim?, precision?",
            DeviceKind::ExpectationReadout => "observable, dim?, precision?",
            DeviceKind::EigenvalueSampler => {
                "variant? (value|integer_label|finite|state_projection), observable | target_state, precision?, label_offset?, overflow_bound?, dim?"
            }
            DeviceKind::PovmSampler => "povm, overflow_bound?, dim?",
            DeviceKind::OverlapTest => "target_state, threshold in (0,1), sharpness?",
            DeviceKind::BasisSelect => "basis, dim?, sharpness?",
            DeviceKind::EntropyMeter => "alpha? (default 1), precision?",
            DeviceKind::EntropyCertifier => "entropy_threshold in (0, log2 d), alpha? (default 1), sharpness?",
            DeviceKind::EntanglementAnalyse => "basis?, dim?, precision?",
            DeviceKind::UncertaintySampler => "observable, dim?, precision?",
        }
    }

    /// Catalog acronyms covered by the kind.
    pub fn acronyms(self) -> &'static str {
        match self {
            DeviceKind::Readout => "RD, FPRD",
            DeviceKind::FunctionReadout => "FRD, FFRD",
            DeviceKind::ExpectationReadout => "ERD, FERD",
            DeviceKind::EigenvalueSampler => "SEVRD, FSEVRD, ISEVRD, FISEVRD, SPRD",
            DeviceKind::PovmSampler => "SPOD, FSPOD",
            DeviceKind::OverlapTest => "SOD, SSOD",
            DeviceKind::BasisSelect => "BSD, SBSD",
            DeviceKind::EntropyMeter => "VNEM, REM, UEM, FPVNEM",
            DeviceKind::EntropyCertifier => "UEC, smoothed UEC",
            DeviceKind::EntanglementAnalyse => "EA, FPEA",
            DeviceKind::UncertaintySampler => "SURD, FSURD",
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type DeviceFactory = fn(&DeviceSpec) -> Result<Arc<dyn Device>>;

/// Name-keyed table of device factories.
#[derive(Clone)]
pub struct DeviceRegistry {
    factories: BTreeMap<&'static str, (DeviceKind, DeviceFactory)>,
}

impl fmt::Debug for DeviceRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for DeviceRegistry {
    fn default() -> Self {
        Self::with_catalog()
    }
}

impl DeviceRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding a factory for every catalog kind.
    pub fn with_catalog() -> Self {
        let mut r = Self::empty();
        r.register(DeviceKind::Readout, build_readout);
        r.register(DeviceKind::FunctionReadout, build_function_readout);
        r.register(DeviceKind::ExpectationReadout, build_expectation_readout);
        r.register(DeviceKind::EigenvalueSampler, build_eigenvalue_sampler);
        r.register(DeviceKind::PovmSampler, build_povm_sampler);
        r.register(DeviceKind::OverlapTest, build_overlap_test);
        r.register(DeviceKind::BasisSelect, build_basis_select);
        r.register(DeviceKind::EntropyMeter, build_entropy_meter);
        r.register(DeviceKind::EntropyCertifier, build_entropy_certifier);
        r.register(DeviceKind::EntanglementAnalyse, build_analyser);
        r.register(DeviceKind::UncertaintySampler, build_uncertainty_sampler);
        r
    }

    /// Adds or replaces the factory for `kind`.
    pub fn register(&mut self, kind: DeviceKind, factory: DeviceFactory) {
        self.factories.insert(kind.name(), (kind, factory));
    }

    pub fn kinds(&self) -> Vec<DeviceKind> {
        self.factories.values().map(|(k, _)| *k).collect()
    }

    /// Kinds whose name contains `needle`, case-insensitively.
    pub fn filter(&self, needle: &str) -> Vec<DeviceKind> {
        let needle = needle.to_ascii_lowercase();
        self.kinds()
            .into_iter()
            .filter(|k| k.name().to_ascii_lowercase().contains(&needle))
            .collect()
    }

    pub fn build(&self, spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
        let kind = DeviceKind::parse(&spec.kind)?;
        let (_, factory) = self.factories.get(kind.name()).ok_or(QsimError::Unknown {
            kind: "device kind",
            name: spec.kind.clone(),
        })?;
        factory(spec)
    }

    /// Builds the device and checks it against a target of dimension
    /// `target_dim` by evaluating it once on a maximally entangled probe, so
    /// dimension and range errors surface before any run.
    pub fn build_for(&self, spec: &DeviceSpec, target_dim: usize) -> Result<Arc<dyn Device>> {
        let device = self.build(spec)?;
        device.distribution(&PureState::maximally_entangled(target_dim), &[0])?;
        Ok(device)
    }
}

fn observable(spec: &DeviceSpec) -> Result<HermitianObservable> {
    HermitianObservable::new(spec.require(&spec.observable, "observable")?.resolve(spec.named_dim())?)
}

fn build_readout(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["basis", "dim", "precision"])?;
    let basis = spec.basis.as_ref().map(|b| b.resolve(spec.named_dim())).transpose()?;
    Ok(Arc::new(Readout {
        basis,
        precision: spec.precision,
    }))
}

fn build_function_readout(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["function", "power", "basis", "dim", "precision"])?;
    let function = match spec.require(&spec.function, "function")?.as_str() {
        "identity" => {
            if spec.power.is_some() {
                return Err(QsimError::InvalidParameters(
                    "`power` only applies to function = \"power\"".into(),
                ));
            }
            MatrixFunction::Identity
        }
        "power" => match *spec.require(&spec.power, "power")? {
            0 => return Err(QsimError::OutOfRange("power must be at least 1".into())),
            n => MatrixFunction::Power(n),
        },
        other => {
            return Err(QsimError::Unknown {
                kind: "matrix function",
                name: other.into(),
            })
        }
    };
    let basis = spec.basis.as_ref().map(|b| b.resolve(spec.named_dim())).transpose()?;
    Ok(Arc::new(FunctionReadout {
        function,
        basis,
        precision: spec.precision,
    }))
}

fn build_expectation_readout(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["observable", "dim", "precision"])?;
    Ok(Arc::new(ExpectationReadout {
        observable: observable(spec)?,
        precision: spec.precision,
    }))
}

fn build_eigenvalue_sampler(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    let variant = spec.variant.as_deref().unwrap_or("value");
    let (variant, allowed): (EigenVariant, &[&str]) = match variant {
        "value" => (
            EigenVariant::Value {
                precision: spec.precision,
            },
            &["variant", "observable", "dim", "precision"],
        ),
        "integer_label" => (
            EigenVariant::IntegerLabel {
                offset: spec.label_offset.unwrap_or(0),
            },
            &["variant", "observable", "dim", "label_offset"],
        ),
        "finite" => {
            let bound = *spec.require(&spec.overflow_bound, "overflow_bound")?;
            (
                EigenVariant::Finite {
                    bound,
                    offset: spec.label_offset.unwrap_or(0),
                },
                &["variant", "observable", "dim", "label_offset", "overflow_bound"],
            )
        }
        "state_projection" => {
            spec.only(&["variant", "target_state"])?;
            return Ok(Arc::new(EigenvalueSampler::state_projection(&spec.target_pure_state()?)));
        }
        other => {
            return Err(QsimError::Unknown {
                kind: "eigenvalue sampler variant",
                name: other.into(),
            })
        }
    };
    spec.only(allowed)?;
    Ok(Arc::new(EigenvalueSampler {
        observable: observable(spec)?,
        variant,
    }))
}

fn build_povm_sampler(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["povm", "overflow_bound", "dim"])?;
    let elements = spec
        .require(&spec.povm, "povm")?
        .iter()
        .map(|m| m.resolve(spec.named_dim()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(PovmSampler::new(PovmSet::new(elements)?, spec.overflow_bound)?))
}

fn build_overlap_test(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["target_state", "threshold", "sharpness"])?;
    let threshold = *spec.require(&spec.threshold, "threshold")?;
    Ok(Arc::new(OverlapTest::new(spec.target_pure_state()?, threshold, spec.sharpness)?))
}

fn build_basis_select(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["basis", "dim", "sharpness"])?;
    let basis = spec.require(&spec.basis, "basis")?.resolve(spec.named_dim())?;
    Ok(Arc::new(BasisSelect::new(basis, spec.sharpness)?))
}

fn build_entropy_meter(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["alpha", "precision"])?;
    Ok(Arc::new(EntropyMeter::new(spec.alpha.unwrap_or(1.0), spec.precision)?))
}

fn build_entropy_certifier(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["alpha", "entropy_threshold", "sharpness"])?;
    let e = *spec.require(&spec.entropy_threshold, "entropy_threshold")?;
    Ok(Arc::new(EntropyCertifier::new(spec.alpha.unwrap_or(1.0), e, spec.sharpness)?))
}

fn build_analyser(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["basis", "dim", "precision"])?;
    let basis = spec.basis.as_ref().map(|b| b.resolve(spec.named_dim())).transpose()?;
    Ok(Arc::new(EntanglementAnalyser {
        basis,
        precision: spec.precision,
    }))
}

fn build_uncertainty_sampler(spec: &DeviceSpec) -> Result<Arc<dyn Device>> {
    spec.only(&["observable", "dim", "precision"])?;
    Ok(Arc::new(UncertaintySampler {
        observable: observable(spec)?,
        precision: spec.precision,
    }))
}
