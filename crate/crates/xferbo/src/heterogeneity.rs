//! Alignment of source problems whose design space differs from the target.
//!
//! Source variables are matched to target variables by name. Matched columns
//! are kept (renormalized against the union of source and target bounds so a
//! shared variable lives on one scale), target variables missing from a
//! source are filled with a constant and masked out of the KPLS weights, and
//! source-only variables are dropped. Source constraints are paired with
//! target constraints by name, then by category, then broadly.

use serde::{Deserialize, Serialize};

use crate::doe::{ConstraintMeta, Doe, DoeColumn, VariableMeta};
use crate::error::Error;
use crate::gp::{train_gp_masked, GpModel, KernelKind, TrainConfig};

/// Per-variable outcome of aligning one source to the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VariableAlignment {
    /// The source provides this target variable at the given column.
    Matched { source_column: usize },
    /// The source lacks this target variable; its column is constant-filled
    /// and carries zero KPLS weight.
    Masked,
}

/// Alignment outcome for one source problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceAlignment {
    pub source: String,
    pub aligned: bool,
    /// Failure reason when `aligned` is false.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Target-variable-ordered alignment statuses.
    pub variables: Vec<(String, VariableAlignment)>,
    pub dropped_source_variables: Vec<String>,
    pub mask: Vec<bool>,
}

/// Which rule matched a target constraint to source constraint columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchTier {
    Name,
    Category,
    Broad,
}

/// Source constraint columns selected for one target constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintMatch {
    pub target_constraint: String,
    pub tier: MatchTier,
    /// Pairs of (source index, constraint column index within that source).
    pub matches: Vec<(usize, usize)>,
}

/// Serializable report of a full alignment pass: variable statuses per
/// source and the constraint match tiers chosen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentMap {
    pub target_variables: Vec<VariableMeta>,
    pub sources: Vec<SourceAlignment>,
    pub constraints: Vec<ConstraintMatch>,
}

impl AlignmentMap {
    /// Aligns every source and matches constraints over the sources that
    /// aligned; failed sources are recorded per entry, and constraint match
    /// indices refer to the original source list.
    pub fn build(
        names: &[String],
        sources: &[Doe],
        target_variables: &[VariableMeta],
        target_constraints: &[ConstraintMeta],
    ) -> AlignmentMap {
        assert_eq!(names.len(), sources.len(), "one name per source");
        let mut reports = Vec::with_capacity(sources.len());
        let mut usable: Vec<usize> = Vec::new();
        let mut aligned_does: Vec<Doe> = Vec::new();
        for (j, (name, doe)) in names.iter().zip(sources).enumerate() {
            match align_source_doe(doe, target_variables) {
                Ok((aligned, mask)) => {
                    reports.push(source_report(name, doe, target_variables, &mask));
                    usable.push(j);
                    aligned_does.push(aligned);
                }
                Err(err) => reports.push(SourceAlignment {
                    source: name.clone(),
                    aligned: false,
                    reason: Some(err.to_string()),
                    variables: vec![],
                    dropped_source_variables: doe
                        .variables()
                        .iter()
                        .map(|v| v.name.clone())
                        .collect(),
                    mask: vec![],
                }),
            }
        }
        let mut constraints = match_constraints(target_constraints, &aligned_does);
        for m in &mut constraints {
            for (src, _) in &mut m.matches {
                *src = usable[*src];
            }
        }
        AlignmentMap { target_variables: target_variables.to_vec(), sources: reports, constraints }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("alignment map is serializable")
    }
}

fn source_report(
    name: &str,
    source: &Doe,
    target_variables: &[VariableMeta],
    mask: &[bool],
) -> SourceAlignment {
    let variables = target_variables
        .iter()
        .zip(mask)
        .map(|(tv, masked)| {
            let status = if *masked {
                VariableAlignment::Masked
            } else {
                let col = find_variable(source.variables(), &tv.name).expect("unmasked means matched");
                VariableAlignment::Matched { source_column: col }
            };
            (tv.name.clone(), status)
        })
        .collect();
    let dropped = source
        .variables()
        .iter()
        .filter(|sv| find_variable_meta(target_variables, &sv.name).is_none())
        .map(|sv| sv.name.clone())
        .collect();
    SourceAlignment {
        source: name.to_string(),
        aligned: true,
        reason: None,
        variables,
        dropped_source_variables: dropped,
        mask: mask.to_vec(),
    }
}

fn find_variable(variables: &[VariableMeta], name: &str) -> Option<usize> {
    variables.iter().position(|v| v.name.eq_ignore_ascii_case(name))
}

fn find_variable_meta<'a>(variables: &'a [VariableMeta], name: &str) -> Option<&'a VariableMeta> {
    variables.iter().find(|v| v.name.eq_ignore_ascii_case(name))
}

/// Reorders a source DOE onto the target variable list.
///
/// Matched variables keep their data and take the union of source and
/// target bounds; target variables missing from the source are filled with
/// the midpoint of the target bounds and flagged in the returned mask;
/// source-only variables are dropped. Outputs are copied untouched. Fails
/// when no variable name is shared.
pub fn align_source_doe(
    source: &Doe,
    target_variables: &[VariableMeta],
) -> Result<(Doe, Vec<bool>), Error> {
    let shared = target_variables
        .iter()
        .filter(|tv| find_variable(source.variables(), &tv.name).is_some())
        .count();
    if shared == 0 {
        let names: Vec<&str> = source.variables().iter().map(|v| v.name.as_str()).collect();
        return Err(Error::NoSharedVariables { source: names.join(", ") });
    }
    let n = source.n();
    let d = target_variables.len();
    let mut variables = Vec::with_capacity(d);
    let mut mask = Vec::with_capacity(d);
    let mut inputs = ndarray::Array2::<f64>::zeros((n, d));
    for (jt, tv) in target_variables.iter().enumerate() {
        match find_variable(source.variables(), &tv.name) {
            Some(js) => {
                let sv = &source.variables()[js];
                variables.push(VariableMeta::new(
                    tv.name.clone(),
                    sv.lower.min(tv.lower),
                    sv.upper.max(tv.upper),
                ));
                mask.push(false);
                for i in 0..n {
                    inputs[[i, jt]] = source.inputs()[[i, js]];
                }
            }
            None => {
                variables.push(tv.clone());
                mask.push(true);
                let fill = tv.midpoint();
                for i in 0..n {
                    inputs[[i, jt]] = fill;
                }
            }
        }
    }
    let aligned = Doe::new(
        variables,
        inputs,
        source.objective_values().to_owned(),
        source.constraints().to_vec(),
    )?;
    Ok((aligned, mask))
}

/// Trains a KPLS surrogate on one column of an aligned DOE with the masked
/// variables carrying exactly zero weight in every component, making the
/// prediction function constant along those coordinates.
pub fn build_masked_source_gp(
    aligned: DoeColumn<'_>,
    mask: &[bool],
    config: &TrainConfig,
) -> Result<GpModel, Error> {
    train_gp_masked(aligned, KernelKind::Kpls { max_components: None }, config, mask)
}

/// Selects source constraint columns for each target constraint: columns
/// with the same name win; failing that, columns of the same category;
/// failing that, every source constraint column (with a warning). The
/// result is empty for a target constraint only when the sources have no
/// constraint columns at all.
pub fn match_constraints(
    target_constraints: &[ConstraintMeta],
    source_does: &[Doe],
) -> Vec<ConstraintMatch> {
    let mut all: Vec<(usize, usize, ConstraintMeta)> = Vec::new();
    for (j, doe) in source_does.iter().enumerate() {
        for (k, meta) in doe.constraint_metas().into_iter().enumerate() {
            all.push((j, k, meta));
        }
    }
    target_constraints
        .iter()
        .map(|tc| {
            let by_name: Vec<(usize, usize)> = all
                .iter()
                .filter(|(_, _, m)| m.name.eq_ignore_ascii_case(&tc.name))
                .map(|(j, k, _)| (*j, *k))
                .collect();
            if !by_name.is_empty() {
                return ConstraintMatch {
                    target_constraint: tc.name.clone(),
                    tier: MatchTier::Name,
                    matches: by_name,
                };
            }
            let by_category: Vec<(usize, usize)> = all
                .iter()
                .filter(|(_, _, m)| m.category == tc.category)
                .map(|(j, k, _)| (*j, *k))
                .collect();
            if !by_category.is_empty() {
                return ConstraintMatch {
                    target_constraint: tc.name.clone(),
                    tier: MatchTier::Category,
                    matches: by_category,
                };
            }
            log::warn!(
                "constraint '{}' has no name or category match; using every source constraint column",
                tc.name
            );
            ConstraintMatch {
                target_constraint: tc.name.clone(),
                tier: MatchTier::Broad,
                matches: all.iter().map(|(j, k, _)| (*j, *k)).collect(),
            }
        })
        .collect()
}
