//! Plug/unplug test sequences that check the superposition model: the sum of
//! isolated single-channel traces is compared with the trace of the
//! combination.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{NetworkDesign, OtdrSettings, RegionOfInterest, Trace};
use crate::separator::pearson;
use crate::superpose::superpose;
use crate::waveform::{default_roi, isolated_channel_trace, simulate_network, Noise, PulseShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceName {
    /// One channel at a time.
    A,
    /// Pairs, then quads, then everything.
    B,
    /// A growing number of channels.
    C,
}

impl FromStr for SequenceName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(SequenceName::A),
            "B" | "b" => Ok(SequenceName::B),
            "C" | "c" => Ok(SequenceName::C),
            other => Err(Error::InvalidInput(format!("unknown sequence {other:?}"))),
        }
    }
}

impl fmt::Display for SequenceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SequenceName::A => "A",
            SequenceName::B => "B",
            SequenceName::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequencePlan {
    pub name: SequenceName,
    /// Connected channels per step.
    pub steps: Vec<Vec<u32>>,
}

impl SequencePlan {
    /// The reference test sequences for a 1x8 splitter.
    pub fn standard(name: SequenceName) -> Self {
        let steps = match name {
            SequenceName::A => (1..=8).map(|c| vec![c]).collect(),
            SequenceName::B => vec![
                vec![1, 2],
                vec![3, 4],
                vec![5, 6],
                vec![7, 8],
                vec![1, 2, 3, 4],
                vec![5, 6, 7, 8],
                (1..=8).collect(),
            ],
            SequenceName::C => vec![
                vec![1],
                vec![1, 2],
                vec![1, 2, 3],
                vec![1, 2, 3, 4],
                vec![1, 2, 3, 4, 5],
                vec![1, 2, 3, 4, 5, 6],
                (1..=8).collect(),
            ],
        };
        SequencePlan { name, steps }
    }

    pub fn validate(&self, design: &NetworkDesign) -> Result<()> {
        for (i, step) in self.steps.iter().enumerate() {
            if step.is_empty() {
                return Err(Error::InvalidInput(format!("step {} connects nothing", i + 1)));
            }
            if let Some(id) = step.iter().find(|id| design.branch(**id).is_none()) {
                return Err(Error::InvalidInput(format!(
                    "step {} uses channel {id}, not in the design",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// 1-based.
    pub step: usize,
    pub channels: Vec<u32>,
    pub pearson: f64,
    pub max_abs_err_db: f64,
}

/// Compares two traces over `roi`.
fn compare(step: usize, channels: &[u32], a: &Trace, b: &Trace, roi: RegionOfInterest) -> Result<StepReport> {
    if !a.same_grid(b) {
        return Err(Error::Grid(format!("step {step}: traces are on different grids")));
    }
    let (x, y) = (roi.slice(a.samples())?, roi.slice(b.samples())?);
    let max_abs_err_db = x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    Ok(StepReport {
        step,
        channels: channels.to_vec(),
        pearson: pearson(x, y)?,
        max_abs_err_db,
    })
}

/// Superposes the isolated traces of `channels`, with every other port of the
/// design filled by a disconnected record.
fn superpose_isolated(
    design: &NetworkDesign,
    channels: &[u32],
    isolated: &BTreeMap<u32, Trace>,
) -> Result<Trace> {
    let template = isolated
        .values()
        .next()
        .ok_or_else(|| Error::InvalidInput("no isolated traces".into()))?;
    let traces = design
        .branches
        .iter()
        .map(|b| {
            if channels.contains(&b.id) {
                isolated
                    .get(&b.id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("no isolated trace for channel {}", b.id)))
            } else {
                Trace::disconnected(template.start_km(), template.resolution_m(), template.len())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    superpose(&traces)
}

/// Runs a sequence against the forward model. `y0_truth` holds one level per
/// design branch, in design order, plugged or not.
pub fn run_sequence(
    plan: &SequencePlan,
    design: &NetworkDesign,
    settings: &OtdrSettings,
    y0_truth: &[f64],
) -> Result<Vec<StepReport>> {
    plan.validate(design)?;
    if y0_truth.len() != design.branches.len() {
        return Err(Error::Dimension {
            expected: design.branches.len(),
            actual: y0_truth.len(),
        });
    }
    let shape = PulseShape::default();
    let level: BTreeMap<u32, f64> = design
        .branches
        .iter()
        .map(|b| b.id)
        .zip(y0_truth.iter().copied())
        .collect();

    let mut isolated = BTreeMap::new();
    for id in plan.steps.iter().flatten() {
        if !isolated.contains_key(id) {
            let alone = design.with_connected(&[*id])?;
            isolated.insert(
                *id,
                isolated_channel_trace(&alone, *id, level[id], settings, &shape)?,
            );
        }
    }

    plan.steps
        .iter()
        .enumerate()
        .map(|(i, channels)| {
            let combo = design.with_connected(channels)?;
            let y0: Vec<f64> = combo.connected().map(|b| level[&b.id]).collect();
            let direct = simulate_network(&combo, &y0, settings, Noise::NONE)?;
            let summed = superpose_isolated(design, channels, &isolated)?;
            let roi = default_roi(&combo, settings, &shape)?;
            compare(i + 1, channels, &summed, &direct, roi)
        })
        .collect()
}

/// Runs a sequence against recorded traces: `isolated` maps each channel to its
/// single-channel capture, `measured[i]` is the capture of step `i + 1`.
pub fn run_sequence_measured(
    plan: &SequencePlan,
    design: &NetworkDesign,
    settings: &OtdrSettings,
    isolated: &BTreeMap<u32, Trace>,
    measured: &[Trace],
) -> Result<Vec<StepReport>> {
    plan.validate(design)?;
    if measured.len() != plan.steps.len() {
        return Err(Error::Dimension {
            expected: plan.steps.len(),
            actual: measured.len(),
        });
    }
    let shape = PulseShape::default();
    plan.steps
        .iter()
        .zip(measured)
        .enumerate()
        .map(|(i, (channels, recorded))| {
            let combo = design.with_connected(channels)?;
            let summed = superpose_isolated(design, channels, isolated)?;
            let roi = default_roi(&combo, settings, &shape)?;
            compare(i + 1, channels, &summed, recorded, roi)
        })
        .collect()
}

fn channel_list(channels: &[u32]) -> String {
    channels.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

/// `step,channels,pearson,max_abs_err` with space-separated channel lists.
pub fn report_csv(reports: &[StepReport]) -> String {
    let mut out = String::from("step,channels,pearson,max_abs_err\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{:.12},{:.3e}",
            r.step,
            channel_list(&r.channels),
            r.pearson,
            r.max_abs_err_db
        )
        .expect("writing to a String");
    }
    out
}

pub fn summary(name: SequenceName, reports: &[StepReport]) -> String {
    let mut out = format!("sequence {name}: {} steps\n", reports.len());
    for r in reports {
        writeln!(
            out,
            "  step {:>2}  channels [{}]  pearson {:.9}  max |err| {:.3e} dB",
            r.step,
            channel_list(&r.channels),
            r.pearson,
            r.max_abs_err_db
        )
        .expect("writing to a String");
    }
    out
}
