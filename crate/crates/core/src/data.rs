//! Datasets, bounded noise, observation masks, error metrics and the two
//! file formats (CSV signals, JSON reports).
//!
//! All randomness is drawn from `ChaCha12` seeded through `seed_from_u64`;
//! identical seeds reproduce identical sequences bit for bit. Noise is
//! uniform on `[-eta_max, eta_max)` with `eta_max` set to the requested
//! percentage of the mean absolute clean output, so the per-sample bound
//! `|noise| <= eta_max` holds by construction.
//!
//! CSV signal files have the header `t,x,y,mask` and one row per sample;
//! an empty `y` field marks the sample as unobserved. JSON reports carry
//! the solver tag, the resolved configuration, the dictionary description,
//! the identified atoms and metrics; unknown fields are ignored on load so
//! the schema can grow.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::atoms::{AtomCatalog, PoleGrid};
use crate::model::{eval_kernels, simulate, AtomicModel, FirstOrderAtom, Pole, SecondOrderAtom};
use crate::solvers::SolveResult;
use crate::{Error, Result};

/// Input/output records of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input: Vec<f64>,
    pub output_clean: Option<Vec<f64>>,
    pub output_noisy: Vec<f64>,
    /// True where the output sample was observed.
    pub mask: Vec<bool>,
    pub eta_max: f64,
    pub seed: u64,
    pub meta: BTreeMap<String, String>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.input.len()
    }

    pub fn n_observed(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Validates lengths, the noise bound against the clean output when
    /// present, and that at least one sample is observed.
    pub fn validate(&self) -> Result<()> {
        let n = self.input.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if self.output_noisy.len() != n || self.mask.len() != n {
            return Err(Error::DimensionMismatch(
                "input, output and mask lengths differ".into(),
            ));
        }
        if let Some(clean) = &self.output_clean {
            if clean.len() != n {
                return Err(Error::DimensionMismatch(
                    "clean output length differs".into(),
                ));
            }
            for (i, (&c, &y)) in clean.iter().zip(&self.output_noisy).enumerate() {
                if (y - c).abs() > self.eta_max + 1e-12 {
                    return Err(Error::DimensionMismatch(format!(
                        "sample {i} violates the noise bound"
                    )));
                }
            }
        }
        if self.n_observed() == 0 {
            return Err(Error::EmptyObservationSet);
        }
        Ok(())
    }

    /// Simulates a model, adds bounded uniform noise, and wraps it all up.
    /// The input is i.i.d. uniform(-1, 1) from `input_seed`; the noise
    /// stream uses `noise_seed`.
    pub fn from_simulation(
        model: &AtomicModel,
        memory: usize,
        n_samples: usize,
        input_seed: u64,
        noise_level_pct: f64,
        noise_seed: u64,
    ) -> Result<Dataset> {
        if n_samples == 0 {
            return Err(Error::EmptyInput);
        }
        let kernels = eval_kernels(model, memory)?;
        let input = uniform_input(n_samples, input_seed);
        let clean = simulate(&kernels, &input);
        let (noisy, eta_max) = add_uniform_noise(&clean, noise_level_pct, noise_seed)?;
        Ok(Dataset {
            input,
            output_clean: Some(clean),
            output_noisy: noisy,
            mask: vec![true; n_samples],
            eta_max,
            seed: noise_seed,
            meta: BTreeMap::new(),
        })
    }
}

/// Seeded i.i.d. uniform(-1, 1) excitation.
pub fn uniform_input(n_samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n_samples).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Adds uniform noise with half-width `eta_max = level_pct/100 × mean |clean|`.
/// Returns the noisy sequence and the bound.
pub fn add_uniform_noise(clean: &[f64], level_pct: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if level_pct < 0.0 {
        return Err(Error::GridConfig(format!(
            "noise level must be nonnegative, got {level_pct}"
        )));
    }
    if level_pct == 0.0 {
        return Ok((clean.to_vec(), 0.0));
    }
    let mean_abs = clean.iter().map(|v| v.abs()).sum::<f64>() / clean.len().max(1) as f64;
    if mean_abs == 0.0 {
        return Err(Error::ZeroSignalNoise);
    }
    let eta_max = level_pct / 100.0 * mean_abs;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noisy = clean
        .iter()
        .map(|&v| v + rng.random_range(-eta_max..eta_max))
        .collect();
    Ok((noisy, eta_max))
}

/// Copy of the dataset with the given sample indices masked out.
pub fn apply_mask(dataset: &Dataset, drop_indices: &[usize]) -> Result<Dataset> {
    let mut out = dataset.clone();
    for &i in drop_indices {
        if i >= out.mask.len() {
            return Err(Error::DimensionMismatch(format!(
                "drop index {i} out of range for {} samples",
                out.mask.len()
            )));
        }
        out.mask[i] = false;
    }
    if out.n_observed() == 0 {
        return Err(Error::EmptyObservationSet);
    }
    Ok(out)
}

/// Seeded random drop of `floor(n × drop_pct/100)` samples.
pub fn random_drop_indices(n_samples: usize, drop_pct: f64, seed: u64) -> Vec<usize> {
    let n_drop = ((n_samples as f64) * drop_pct / 100.0).floor() as usize;
    let n_drop = n_drop.min(n_samples.saturating_sub(1));
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n_samples).collect();
    for i in 0..n_drop {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut dropped = idx[..n_drop].to_vec();
    dropped.sort_unstable();
    dropped
}

/// Entries of `values` where `mask` is true.
pub fn observed_values(values: &[f64], mask: &[bool]) -> Result<DVector<f64>> {
    if values.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "values length {} vs mask length {}",
            values.len(),
            mask.len()
        )));
    }
    let kept: Vec<f64> = values
        .iter()
        .zip(mask)
        .filter_map(|(&v, &m)| m.then_some(v))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyObservationSet);
    }
    Ok(DVector::from_vec(kept))
}

/// Nearest recovered pole for one true pole, both as canonical
/// representatives.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoleMatch {
    pub true_pole: [f64; 2],
    pub recovered: Option<[f64; 2]>,
    pub distance: Option<f64>,
}

/// Identification quality measures against a known truth.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metrics {
    pub output_rmse: f64,
    pub output_max_err: f64,
    pub kernel_h1_rmse: f64,
    pub kernel_h2_rmse: f64,
    pub cardinality: usize,
    pub pole_match_report: Vec<PoleMatch>,
}

/// Compares an estimated model against the truth: output errors over all
/// samples of the clean output, kernel RMSEs at the given memory, and a
/// nearest-neighbor pole match (conjugate-canonicalized).
pub fn compute_metrics(
    true_model: &AtomicModel,
    estimated: &AtomicModel,
    cardinality: usize,
    dataset: &Dataset,
    memory: usize,
) -> Result<Metrics> {
    let true_kernels = eval_kernels(true_model, memory)?;
    let est_kernels = eval_kernels(estimated, memory)?;
    let clean = match &dataset.output_clean {
        Some(c) => c.clone(),
        None => simulate(&true_kernels, &dataset.input),
    };
    let est_out = simulate(&est_kernels, &dataset.input);
    let n = clean.len();
    let mut sq = 0.0;
    let mut max_err: f64 = 0.0;
    for t in 0..n {
        let e = clean[t] - est_out[t];
        sq += e * e;
        max_err = max_err.max(e.abs());
    }
    let output_rmse = (sq / n as f64).sqrt();

    let l = memory;
    let mut h1_sq = 0.0;
    for k in 0..l {
        let e = true_kernels.h1()[k] - est_kernels.h1()[k];
        h1_sq += e * e;
    }
    let kernel_h1_rmse = (h1_sq / l as f64).sqrt();
    let mut h2_sq = 0.0;
    for k1 in 0..l {
        for k2 in 0..l {
            let e = true_kernels.h2()[(k1, k2)] - est_kernels.h2()[(k1, k2)];
            h2_sq += e * e;
        }
    }
    let kernel_h2_rmse = (h2_sq / (l * l) as f64).sqrt();

    let recovered_poles = estimated.distinct_poles();
    let pole_match_report = true_model
        .distinct_poles()
        .into_iter()
        .map(|tp| {
            let best = recovered_poles
                .iter()
                .map(|rp| {
                    let d = (tp.re() - rp.re()).hypot(tp.im() - rp.im());
                    (rp, d)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((rp, d)) => PoleMatch {
                    true_pole: [tp.re(), tp.im()],
                    recovered: Some([rp.re(), rp.im()]),
                    distance: Some(d),
                },
                None => PoleMatch {
                    true_pole: [tp.re(), tp.im()],
                    recovered: None,
                    distance: None,
                },
            }
        })
        .collect();

    Ok(Metrics {
        output_rmse,
        output_max_err: max_err,
        kernel_h1_rmse,
        kernel_h2_rmse,
        cardinality,
        pole_match_report,
    })
}

// ---------------------------------------------------------------------------
// CSV signal format
// ---------------------------------------------------------------------------

/// Writes `t,x,y,mask` rows; floats print in shortest round-trip form.
pub fn save_signals(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::from("t,x,y,mask\n");
    for t in 0..dataset.n_samples() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t,
            dataset.input[t],
            dataset.output_noisy[t],
            if dataset.mask[t] { 1 } else { 0 }
        ));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a signal CSV. A missing `y` field marks the row unobserved.
/// Malformed rows are reported with their 1-based line number.
pub fn load_signals(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Csv {
        line: 1,
        message: "empty file".into(),
    })?;
    if header.trim() != "t,x,y,mask" {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header 't,x,y,mask', got '{header}'"),
        });
    }
    let mut input = Vec::new();
    let mut output = Vec::new();
    let mut mask = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Csv {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Csv {
                line: line_no,
                message: format!("cannot parse {what} '{s}'"),
            })
        };
        input.push(parse(fields[1], "x")?);
        let y_field = fields[2].trim();
        let mask_field = fields[3].trim();
        let observed_flag = match mask_field {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Csv {
                    line: line_no,
                    message: format!("cannot parse mask '{other}'"),
                })
            }
        };
        if y_field.is_empty() {
            output.push(0.0);
            mask.push(false);
        } else {
            output.push(parse(y_field, "y")?);
            mask.push(observed_flag);
        }
    }
    if input.is_empty() {
        return Err(Error::Csv {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(Dataset {
        input,
        output_clean: None,
        output_noisy: output,
        mask,
        eta_max: 0.0,
        seed: 0,
        meta: BTreeMap::new(),
    })
}

// ---------------------------------------------------------------------------
// JSON report format
// ---------------------------------------------------------------------------

/// One atom of a reported model. Atom scales are folded into the
/// coefficient on write, so readers reconstruct with unit scales.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportAtom {
    pub kind: String,
    pub poles: Vec<[f64; 2]>,
    pub coeff: [f64; 2],
}

/// Serialized dictionary description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridReport {
    pub poles: Vec<[f64; 2]>,
    pub radial_counts: usize,
    pub angular_counts: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    pub scale_alpha: f64,
    pub scale_beta: f64,
    pub pair_policy: String,
    pub n_second_atoms: usize,
    pub seed: u64,
}

impl GridReport {
    pub fn from_parts(grid: &PoleGrid, catalog: &AtomCatalog) -> Self {
        GridReport {
            poles: grid.poles().iter().map(|p| [p.re(), p.im()]).collect(),
            radial_counts: grid.radial_counts(),
            angular_counts: grid.angular_counts(),
            min_radius: grid.min_radius(),
            max_radius: grid.max_radius(),
            scale_alpha: catalog.scale_alpha(),
            scale_beta: catalog.scale_beta(),
            pair_policy: catalog.pair_policy().name(),
            n_second_atoms: catalog.second_atoms().len(),
            seed: catalog.seed(),
        }
    }
}

/// The JSON report: solver tag, fully resolved configuration, dictionary
/// description, identified model, metrics and objective trace.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub solver: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridReport>,
    pub atoms: Vec<ReportAtom>,
    pub h0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    pub trace: Vec<f64>,
    pub seed: u64,
}

impl Report {
    /// Serializes a model into report atoms.
    pub fn model_atoms(model: &AtomicModel) -> Vec<ReportAtom> {
        let mut atoms = Vec::new();
        for (a, c) in model.first_order() {
            let c = c * a.scale();
            atoms.push(ReportAtom {
                kind: "first".into(),
                poles: vec![[a.pole().re(), a.pole().im()]],
                coeff: [c.re, c.im],
            });
        }
        for (a, c) in model.second_order() {
            let c = c * a.scale();
            atoms.push(ReportAtom {
                kind: "second".into(),
                poles: vec![
                    [a.pole1().re(), a.pole1().im()],
                    [a.pole2().re(), a.pole2().im()],
                ],
                coeff: [c.re, c.im],
            });
        }
        atoms
    }

    /// Reconstructs the reported model (unit scales, coefficients as stored).
    pub fn to_model(&self) -> Result<AtomicModel> {
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            let coeff = Complex64::new(atom.coeff[0], atom.coeff[1]);
            match atom.kind.as_str() {
                "first" => {
                    if atom.poles.len() != 1 {
                        return Err(Error::Report(format!(
                            "atom {i}: first-order atom needs exactly 1 pole"
                        )));
                    }
                    let p = Pole::new(atom.poles[0][0], atom.poles[0][1])?;
                    first.push((FirstOrderAtom::new(p, 1.0)?, coeff));
                }
                "second" => {
                    if atom.poles.len() != 2 {
                        return Err(Error::Report(format!(
                            "atom {i}: second-order atom needs exactly 2 poles"
                        )));
                    }
                    let p1 = Pole::new(atom.poles[0][0], atom.poles[0][1])?;
                    let p2 = Pole::new(atom.poles[1][0], atom.poles[1][1])?;
                    second.push((SecondOrderAtom::new(p1, p2, 1.0)?, coeff));
                }
                other => {
                    return Err(Error::Report(format!("atom {i}: unknown kind '{other}'")));
                }
            }
        }
        Ok(AtomicModel::new(self.h0, first, second))
    }

    /// Assembles an identification report from a solve result.
    pub fn from_result(
        solver: &str,
        config: serde_json::Value,
        grid: Option<GridReport>,
        model: &AtomicModel,
        result: &SolveResult,
        metrics: Option<Metrics>,
    ) -> Self {
        Report {
            solver: solver.into(),
            config,
            grid,
            atoms: Self::model_atoms(model),
            h0: model.h0(),
            metrics,
            trace: result.objective_trace.clone(),
            seed: result.seed,
        }
    }
}

pub fn save_report(path: &Path, report: &Report) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
