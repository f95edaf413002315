//! Experiment configuration: JSON literals and their conversion into
//! library values, with validation errors that name the offending field.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::Deserialize;

use freecircle::freeconv::DEFAULT_WORD_CAP;
use freecircle::limits::{BernoulliRule, SequenceSpec, TailSum};
use freecircle::measure::{AtomicMeasure, CircleMeasure, MomentVector};

/// A parsed experiment: exactly one command plus its inputs. Field names are
/// kebab-case in the JSON document.
#[derive(Debug, Clone, Deserialize)]
#[serde(
    tag = "command",
    rename_all = "kebab-case",
    rename_all_fields = "kebab-case",
    deny_unknown_fields
)]
pub enum ExperimentConfig {
    /// Moment table of measure-1 ⊠ measure-2 via both routes.
    Convolve {
        measure_1: MeasureLiteral,
        measure_2: MeasureLiteral,
        k_max: usize,
        #[serde(default)]
        output_path: Option<PathBuf>,
        #[serde(default)]
        output_format: Option<OutputFormat>,
    },
    /// Flatness diagnostic of the partial products of a sequence.
    Iterate {
        spec: SpecLiteral,
        n_max: usize,
        k_max: usize,
        #[serde(default)]
        output_path: Option<PathBuf>,
        #[serde(default)]
        output_format: Option<OutputFormat>,
    },
    /// Limit classification of a sequence.
    Classify {
        spec: SpecLiteral,
        horizon: usize,
        #[serde(default)]
        output_path: Option<PathBuf>,
        #[serde(default)]
        output_format: Option<OutputFormat>,
    },
    /// Inequality reports: the measure suite over the default grids and/or
    /// the sequence bounds at a given length.
    VerifyBounds {
        #[serde(default)]
        measure: Option<MeasureLiteral>,
        #[serde(default)]
        spec: Option<SpecLiteral>,
        #[serde(default)]
        n: Option<usize>,
        k_max: usize,
        #[serde(default)]
        output_path: Option<PathBuf>,
        #[serde(default)]
        output_format: Option<OutputFormat>,
    },
    /// Random-matrix product simulation versus the predicted moments.
    Simulate {
        factors: Vec<MeasureLiteral>,
        n_dim: usize,
        trials: usize,
        seed: u64,
        k_max: usize,
        #[serde(default)]
        collect_eigenangles: Option<bool>,
        #[serde(default)]
        flop_budget: Option<f64>,
        #[serde(default)]
        output_path: Option<PathBuf>,
        #[serde(default)]
        output_format: Option<OutputFormat>,
    },
}

impl ExperimentConfig {
    /// The config's own output destination and format, before CLI overrides.
    pub fn output_fields(&self) -> (Option<&PathBuf>, Option<OutputFormat>) {
        match self {
            Self::Convolve { output_path, output_format, .. }
            | Self::Iterate { output_path, output_format, .. }
            | Self::Classify { output_path, output_format, .. }
            | Self::VerifyBounds { output_path, output_format, .. }
            | Self::Simulate { output_path, output_format, .. } => {
                (output_path.as_ref(), *output_format)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// A measure in one of three shapes: `{"atoms": [[angle, weight], …]}`,
/// `{"moments": [[re, im], …]}` (entries c₁..c_K; c₀ = 1 is implied), or
/// `{"named": "uniform"}` / `{"named": "bernoulli", "p": …}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureLiteral {
    #[serde(default)]
    atoms: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    moments: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    named: Option<String>,
    #[serde(default)]
    p: Option<f64>,
}

impl MeasureLiteral {
    fn shape_count(&self) -> usize {
        [
            self.atoms.is_some(),
            self.moments.is_some(),
            self.named.is_some(),
        ]
        .iter()
        .filter(|&&given| given)
        .count()
    }

    /// Converts to a measure; `field` is the config path used in error
    /// messages, and `order_hint` sizes the uniform measure's moment store.
    pub fn circle(&self, field: &str, order_hint: usize) -> Result<CircleMeasure, String> {
        if self.shape_count() != 1 {
            return Err(format!(
                "field {field}: provide exactly one of atoms, moments, named"
            ));
        }
        if let Some(atoms) = &self.atoms {
            if self.p.is_some() {
                return Err(format!("field {field}.p: only valid with named bernoulli"));
            }
            return Ok(CircleMeasure::from_atoms(self.atomic_from(atoms, field)?));
        }
        if let Some(moments) = &self.moments {
            if self.p.is_some() {
                return Err(format!("field {field}.p: only valid with named bernoulli"));
            }
            let mut c = vec![Complex64::new(1.0, 0.0)];
            c.extend(moments.iter().map(|&(re, im)| Complex64::new(re, im)));
            let vector = MomentVector::new(c)
                .map_err(|e| format!("field {field}.moments: {e}"))?;
            return Ok(CircleMeasure::from_moments(vector));
        }
        match self.named.as_deref() {
            Some("uniform") => {
                if self.p.is_some() {
                    return Err(format!("field {field}.p: only valid with named bernoulli"));
                }
                CircleMeasure::uniform(order_hint.max(1))
                    .map_err(|e| format!("field {field}: {e}"))
            }
            Some("bernoulli") => {
                let p = self.p.ok_or_else(|| {
                    format!("field {field}.p: required for named bernoulli")
                })?;
                CircleMeasure::bernoulli(p).map_err(|e| format!("field {field}.p: {e}"))
            }
            Some(other) => Err(format!(
                "field {field}.named: unknown measure \"{other}\" (expected uniform or bernoulli)"
            )),
            None => unreachable!("shape_count checked"),
        }
    }

    /// Converts to an atomic measure; moment-only and uniform shapes are
    /// rejected (the simulator samples atoms).
    pub fn atomic(&self, field: &str) -> Result<AtomicMeasure, String> {
        if self.shape_count() != 1 {
            return Err(format!(
                "field {field}: provide exactly one of atoms, moments, named"
            ));
        }
        if let Some(atoms) = &self.atoms {
            return self.atomic_from(atoms, field);
        }
        if self.named.as_deref() == Some("bernoulli") {
            let p = self
                .p
                .ok_or_else(|| format!("field {field}.p: required for named bernoulli"))?;
            return AtomicMeasure::bernoulli(p).map_err(|e| format!("field {field}.p: {e}"));
        }
        Err(format!(
            "field {field}: simulation factors must be atomic (atoms or named bernoulli)"
        ))
    }

    fn atomic_from(&self, atoms: &[(f64, f64)], field: &str) -> Result<AtomicMeasure, String> {
        AtomicMeasure::new(atoms.to_vec()).map_err(|e| format!("field {field}.atoms: {e}"))
    }
}

/// A factor sequence: `{"kind": "explicit", "measures": […]}`,
/// `{"kind": "repeated", "measure": …}`, or `{"kind": "bernoulli-rule",
/// "prefix": […], "rule": {…}, "tail": "diverges"|"converges"|"unknown"}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecLiteral {
    kind: String,
    #[serde(default)]
    measures: Option<Vec<MeasureLiteral>>,
    #[serde(default)]
    measure: Option<MeasureLiteral>,
    #[serde(default)]
    prefix: Option<Vec<MeasureLiteral>>,
    #[serde(default)]
    rule: Option<RuleLiteral>,
    #[serde(default)]
    tail: Option<String>,
}

impl SpecLiteral {
    pub fn spec(&self, field: &str, order_hint: usize) -> Result<SequenceSpec, String> {
        match self.kind.as_str() {
            "explicit" => {
                self.forbid(field, &[("measure", self.measure.is_some()),
                                     ("prefix", self.prefix.is_some()),
                                     ("rule", self.rule.is_some())])?;
                let literals = self.measures.as_ref().ok_or_else(|| {
                    format!("field {field}.measures: required for kind explicit")
                })?;
                let measures = self.circle_list(literals, field, "measures", order_hint)?;
                Ok(match self.tail(field)? {
                    Some(tail) => SequenceSpec::explicit_with_tail(measures, tail),
                    None => SequenceSpec::explicit(measures),
                })
            }
            "repeated" => {
                self.forbid(field, &[("measures", self.measures.is_some()),
                                     ("prefix", self.prefix.is_some()),
                                     ("rule", self.rule.is_some()),
                                     ("tail", self.tail.is_some())])?;
                let literal = self.measure.as_ref().ok_or_else(|| {
                    format!("field {field}.measure: required for kind repeated")
                })?;
                Ok(SequenceSpec::repeated(
                    literal.circle(&format!("{field}.measure"), order_hint)?,
                ))
            }
            "bernoulli-rule" => {
                self.forbid(field, &[("measures", self.measures.is_some()),
                                     ("measure", self.measure.is_some())])?;
                let rule = self
                    .rule
                    .as_ref()
                    .ok_or_else(|| format!("field {field}.rule: required for kind bernoulli-rule"))?
                    .rule(&format!("{field}.rule"))?;
                let prefix = match &self.prefix {
                    Some(literals) => self.circle_list(literals, field, "prefix", order_hint)?,
                    None => Vec::new(),
                };
                let tail = self.tail(field)?.unwrap_or(TailSum::Unknown);
                SequenceSpec::bernoulli_rule(prefix, rule, tail)
                    .map_err(|e| format!("field {field}.rule: {e}"))
            }
            other => Err(format!(
                "field {field}.kind: unknown kind \"{other}\" (expected explicit, repeated, or bernoulli-rule)"
            )),
        }
    }

    fn forbid(&self, field: &str, entries: &[(&str, bool)]) -> Result<(), String> {
        for &(name, present) in entries {
            if present {
                return Err(format!(
                    "field {field}.{name}: not valid for kind {}",
                    self.kind
                ));
            }
        }
        Ok(())
    }

    fn circle_list(
        &self,
        literals: &[MeasureLiteral],
        field: &str,
        list_name: &str,
        order_hint: usize,
    ) -> Result<Vec<CircleMeasure>, String> {
        literals
            .iter()
            .enumerate()
            .map(|(i, lit)| lit.circle(&format!("{field}.{list_name}[{i}]"), order_hint))
            .collect()
    }

    fn tail(&self, field: &str) -> Result<Option<TailSum>, String> {
        match self.tail.as_deref() {
            None => Ok(None),
            Some("diverges") => Ok(Some(TailSum::Diverges)),
            Some("converges") => Ok(Some(TailSum::Converges)),
            Some("unknown") => Ok(Some(TailSum::Unknown)),
            Some(other) => Err(format!(
                "field {field}.tail: unknown value \"{other}\" (expected diverges, converges, or unknown)"
            )),
        }
    }
}

/// Bernoulli-rule literal: `{"form": "constant", "p": …}`,
/// `{"form": "c-over-k-pow-s", "c": …, "s": …}`,
/// `{"form": "one-minus-c-over-k-pow-s", "c": …, "s": …}`, or
/// `{"form": "explicit", "ps": […]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleLiteral {
    form: String,
    #[serde(default)]
    p: Option<f64>,
    #[serde(default)]
    c: Option<f64>,
    #[serde(default)]
    s: Option<f64>,
    #[serde(default)]
    ps: Option<Vec<f64>>,
}

impl RuleLiteral {
    fn rule(&self, field: &str) -> Result<BernoulliRule, String> {
        let need = |value: Option<f64>, name: &str| {
            value.ok_or_else(|| format!("field {field}.{name}: required for form {}", self.form))
        };
        let forbid = |present: bool, name: &str| {
            if present {
                Err(format!(
                    "field {field}.{name}: not valid for form {}",
                    self.form
                ))
            } else {
                Ok(())
            }
        };
        match self.form.as_str() {
            "constant" => {
                forbid(self.c.is_some(), "c")?;
                forbid(self.s.is_some(), "s")?;
                forbid(self.ps.is_some(), "ps")?;
                Ok(BernoulliRule::Constant { p: need(self.p, "p")? })
            }
            "c-over-k-pow-s" => {
                forbid(self.p.is_some(), "p")?;
                forbid(self.ps.is_some(), "ps")?;
                Ok(BernoulliRule::COverKPowS {
                    c: need(self.c, "c")?,
                    s: need(self.s, "s")?,
                })
            }
            "one-minus-c-over-k-pow-s" => {
                forbid(self.p.is_some(), "p")?;
                forbid(self.ps.is_some(), "ps")?;
                Ok(BernoulliRule::OneMinusCOverKPowS {
                    c: need(self.c, "c")?,
                    s: need(self.s, "s")?,
                })
            }
            "explicit" => {
                forbid(self.p.is_some(), "p")?;
                forbid(self.c.is_some(), "c")?;
                forbid(self.s.is_some(), "s")?;
                let ps = self.ps.clone().ok_or_else(|| {
                    format!("field {field}.ps: required for form explicit")
                })?;
                Ok(BernoulliRule::Explicit { ps })
            }
            other => Err(format!(
                "field {field}.form: unknown form \"{other}\" (expected constant, c-over-k-pow-s, one-minus-c-over-k-pow-s, or explicit)"
            )),
        }
    }
}

/// Resource guards, overridable through the `FREECIRCLE_BUDGET` env var: the
/// value becomes the simulation flop budget, and the oracle word cap grows
/// to `max(default, ⌊log₂ budget⌋)`.
#[derive(Debug, Clone, Copy)]
pub struct Guards {
    /// Simulation flop budget from the environment (None = library default
    /// or the config's own value).
    pub flop_budget: Option<f64>,
    /// Letter cap for expansion-route words.
    pub word_cap: usize,
}

impl Guards {
    pub fn from_env() -> Result<Self, String> {
        match std::env::var("FREECIRCLE_BUDGET") {
            Err(std::env::VarError::NotPresent) => Self::from_budget_var(None),
            Err(e) => Err(format!("FREECIRCLE_BUDGET: {e}")),
            Ok(raw) => Self::from_budget_var(Some(&raw)),
        }
    }

    fn from_budget_var(raw: Option<&str>) -> Result<Self, String> {
        let Some(raw) = raw else {
            return Ok(Self {
                flop_budget: None,
                word_cap: DEFAULT_WORD_CAP,
            });
        };
        let budget: f64 = raw
            .parse()
            .map_err(|_| format!("FREECIRCLE_BUDGET: \"{raw}\" is not a number"))?;
        if !budget.is_finite() || budget <= 0.0 {
            return Err(format!(
                "FREECIRCLE_BUDGET: {budget} must be finite and positive"
            ));
        }
        Ok(Self {
            flop_budget: Some(budget),
            word_cap: DEFAULT_WORD_CAP.max(budget.log2().floor() as usize),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(json: &str) -> MeasureLiteral {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn measure_literal_shapes() {
        let atoms = measure(r#"{"atoms": [[0.0, 0.6], [3.0, 0.4]]}"#);
        assert_eq!(atoms.circle("m", 4).unwrap().moments(1).unwrap().order(), 1);
        assert!(atoms.atomic("m").is_ok());

        let named = measure(r#"{"named": "bernoulli", "p": 0.9}"#);
        let c1 = named.circle("m", 4).unwrap().first_moment().unwrap();
        assert!((c1.re - 0.8).abs() < 1e-15);

        let uniform = measure(r#"{"named": "uniform"}"#);
        assert!(uniform.circle("m", 4).unwrap().is_known_uniform());
        assert!(uniform
            .atomic("m")
            .unwrap_err()
            .contains("must be atomic"));

        let moments = measure(r#"{"moments": [[0.5, 0.1], [0.2, 0.0]]}"#);
        let mv = moments.circle("m", 4).unwrap().moments(2).unwrap();
        assert_eq!(mv.moment(1).unwrap(), Complex64::new(0.5, 0.1));
    }

    #[test]
    fn measure_literal_errors_name_fields() {
        let double = measure(r#"{"atoms": [[0.0, 1.0]], "named": "uniform"}"#);
        assert!(double
            .circle("measure-1", 4)
            .unwrap_err()
            .contains("measure-1: provide exactly one"));
        let missing_p = measure(r#"{"named": "bernoulli"}"#);
        assert!(missing_p
            .circle("measure-2", 4)
            .unwrap_err()
            .contains("measure-2.p"));
        let stray_p = measure(r#"{"named": "uniform", "p": 0.5}"#);
        assert!(stray_p.circle("m", 4).unwrap_err().contains("m.p"));
        let bad_name = measure(r#"{"named": "gaussian"}"#);
        assert!(bad_name.circle("m", 4).unwrap_err().contains("m.named"));
    }

    #[test]
    fn spec_literal_kinds() {
        let rule: SpecLiteral = serde_json::from_str(
            r#"{"kind": "bernoulli-rule",
                "prefix": [{"named": "bernoulli", "p": 0.5}],
                "rule": {"form": "one-minus-c-over-k-pow-s", "c": 0.5, "s": 2.0},
                "tail": "converges"}"#,
        )
        .unwrap();
        let spec = rule.spec("spec", 8).unwrap();
        assert_eq!(spec.declared_tail(), TailSum::Converges);

        let repeated: SpecLiteral = serde_json::from_str(
            r#"{"kind": "repeated", "measure": {"named": "bernoulli", "p": 0.9}}"#,
        )
        .unwrap();
        assert!(repeated.spec("spec", 8).is_ok());

        let explicit: SpecLiteral = serde_json::from_str(
            r#"{"kind": "explicit", "measures": [{"named": "uniform"}]}"#,
        )
        .unwrap();
        assert!(explicit.spec("spec", 8).is_ok());
    }

    #[test]
    fn budget_var_widens_the_word_cap() {
        let default = Guards::from_budget_var(None).unwrap();
        assert_eq!(default.word_cap, DEFAULT_WORD_CAP);
        assert_eq!(default.flop_budget, None);

        // 2^30 flops buys 30-letter words; a tiny budget never shrinks the
        // cap below the default.
        let wide = Guards::from_budget_var(Some("1.073741824e9")).unwrap();
        assert_eq!(wide.word_cap, 30);
        assert_eq!(wide.flop_budget, Some(1.073741824e9));
        let tiny = Guards::from_budget_var(Some("8")).unwrap();
        assert_eq!(tiny.word_cap, DEFAULT_WORD_CAP);

        assert!(Guards::from_budget_var(Some("banana"))
            .unwrap_err()
            .contains("FREECIRCLE_BUDGET"));
        assert!(Guards::from_budget_var(Some("-5")).unwrap_err().contains("positive"));
        assert!(Guards::from_budget_var(Some("inf")).unwrap_err().contains("finite"));
    }

    #[test]
    fn spec_literal_errors_name_fields() {
        let wrong_field: SpecLiteral = serde_json::from_str(
            r#"{"kind": "repeated", "measure": {"named": "uniform"}, "tail": "unknown"}"#,
        )
        .unwrap();
        assert!(wrong_field.spec("spec", 8).unwrap_err().contains("spec.tail"));

        let missing_rule: SpecLiteral =
            serde_json::from_str(r#"{"kind": "bernoulli-rule"}"#).unwrap();
        assert!(missing_rule.spec("spec", 8).unwrap_err().contains("spec.rule"));

        let bad_form: SpecLiteral = serde_json::from_str(
            r#"{"kind": "bernoulli-rule", "rule": {"form": "linear"}}"#,
        )
        .unwrap();
        assert!(bad_form
            .spec("spec", 8)
            .unwrap_err()
            .contains("spec.rule.form"));

        let stray_param: SpecLiteral = serde_json::from_str(
            r#"{"kind": "bernoulli-rule", "rule": {"form": "constant", "p": 0.9, "c": 1.0}}"#,
        )
        .unwrap();
        assert!(stray_param.spec("spec", 8).unwrap_err().contains("spec.rule.c"));
    }
}
