// SPDX-License-Identifier: Apache-2.0

//! Subcommand implementations. Each returns an [`Outcome`] listing the
//! items that failed; fatal problems (bad arguments, unwritable outputs)
//! are returned as errors instead.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bzshape::experiments::{
    default_corpus, degree_sweep, degree_sweep_csv, fidelity_study, gradient_study, render_corpus,
    sensitivity_sweep, shape_corpus, CorpusItem, DEFAULT_SCALES,
};
use bzshape::mask::rasterize_polygon_inclusive;
use bzshape::metrics::{evaluate_contour_with, evaluate_masks, metrics_csv};
use bzshape::{encode_mask, BinaryMask, MetricsReport, PiecewiseContour, ShapeKind};
use rayon::prelude::*;

use crate::io::{
    collect_inputs, ensure_dir, is_contour_file, is_mask_file, list_dir, read_contour, read_mask,
    stem, write_atomic,
};

/// Relative gradient error at or above which `gradcheck` fails.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub item: String,
    pub message: String,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub failures: Vec<Failure>,
    /// Inputs left out for a reason that is not an error.
    pub skipped: Vec<String>,
    /// One-line summaries for the user.
    pub messages: Vec<String>,
}

impl Outcome {
    fn fail(&mut self, item: impl Into<String>, message: impl ToString) {
        self.failures.push(Failure {
            item: item.into(),
            message: message.to_string(),
        });
    }

    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

fn error_chain(e: &anyhow::Error) -> String {
    format!("{e:#}")
}

#[derive(Debug, Clone)]
pub struct EncodeArgs {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub degree: usize,
    pub smooth_radius: usize,
    pub threshold: u8,
}

/// Writes `<stem>.json` per input mask and `fit_report.csv` for the
/// masks that encoded.
pub fn encode(args: &EncodeArgs) -> Result<Outcome> {
    let inputs = collect_inputs(&args.inputs, &["pgm"])?;
    ensure_dir(&args.out)?;
    let results: Vec<Result<(String, bzshape::FitReport)>> = inputs
        .par_iter()
        .map(|path| {
            let mask = read_mask(path, args.threshold)?;
            let (contour, report) = encode_mask(&mask, args.degree, args.smooth_radius)?;
            let name = stem(path);
            write_atomic(&args.out.join(format!("{name}.json")), contour.to_json().as_bytes())?;
            Ok((name, report))
        })
        .collect();

    let mut outcome = Outcome::default();
    let mut csv = String::from(
        "file,degree,residual_0,residual_1,residual_2,residual_3,arc_len_0,arc_len_1,arc_len_2,arc_len_3,mean_residual\n",
    );
    let mut encoded = 0;
    for (path, result) in inputs.iter().zip(results) {
        match result {
            Ok((name, r)) => {
                encoded += 1;
                let res = r.residuals;
                let len = r.arc_lengths;
                writeln!(
                    csv,
                    "{name},{},{},{},{},{},{},{},{},{},{}",
                    args.degree,
                    res[0],
                    res[1],
                    res[2],
                    res[3],
                    len[0],
                    len[1],
                    len[2],
                    len[3],
                    r.mean_residual()
                )
                .unwrap();
            }
            Err(e) => outcome.fail(path.display().to_string(), error_chain(&e)),
        }
    }
    write_atomic(&args.out.join("fit_report.csv"), csv.as_bytes())?;
    outcome
        .messages
        .push(format!("encoded {encoded} of {} masks", inputs.len()));
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct DecodeArgs {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    /// Target frame; the contour's own frame when absent.
    pub size: Option<(usize, usize)>,
    pub samples: usize,
}

fn load_scaled(path: &Path, size: Option<(usize, usize)>) -> Result<PiecewiseContour> {
    let contour = read_contour(path)?;
    Ok(match size {
        Some((w, h)) => contour.rescaled(w, h)?,
        None => contour,
    })
}

/// Writes `<stem>.pgm` per contour, rasterized in the target frame.
pub fn decode(args: &DecodeArgs) -> Result<Outcome> {
    let inputs = collect_inputs(&args.inputs, &["json"])?;
    ensure_dir(&args.out)?;
    let results: Vec<Result<()>> = inputs
        .par_iter()
        .map(|path| {
            let mask = load_scaled(path, args.size)?.rasterize(args.samples)?;
            write_atomic(&args.out.join(format!("{}.pgm", stem(path))), &mask.to_pgm())
        })
        .collect();
    let mut outcome = Outcome::default();
    for (path, r) in inputs.iter().zip(results) {
        if let Err(e) = r {
            outcome.fail(path.display().to_string(), error_chain(&e));
        }
    }
    outcome.messages.push(format!(
        "decoded {} of {} contours",
        inputs.len() - outcome.failures.len(),
        inputs.len()
    ));
    Ok(outcome)
}

/// Gray levels of a rendered preview.
const RENDER_FILL: u8 = 128;
const RENDER_OUTLINE: u8 = 255;

/// Filled region in mid gray with the decoded outline drawn on top.
pub fn render_preview(contour: &PiecewiseContour, samples: usize) -> Result<Vec<u8>> {
    let (w, h) = (contour.width(), contour.height());
    let outline = contour.decode(samples)?;
    let fill = rasterize_polygon_inclusive(&outline, w, h)?;
    let mut gray: Vec<u8> = fill
        .bits()
        .iter()
        .map(|&b| if b { RENDER_FILL } else { 0 })
        .collect();
    for (i, &a) in outline.iter().enumerate() {
        let b = outline[(i + 1) % outline.len()];
        let steps = (2.0 * (b.x - a.x).abs().max((b.y - a.y).abs())).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let p = a.lerp(b, s as f64 / steps as f64);
            let (x, y) = (p.x.floor(), p.y.floor());
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                gray[y as usize * w + x as usize] = RENDER_OUTLINE;
            }
        }
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(gray);
    Ok(out)
}

/// Like [`decode`] but writes grayscale previews.
pub fn render(args: &DecodeArgs) -> Result<Outcome> {
    let inputs = collect_inputs(&args.inputs, &["json"])?;
    ensure_dir(&args.out)?;
    let results: Vec<Result<()>> = inputs
        .par_iter()
        .map(|path| {
            let bytes = render_preview(&load_scaled(path, args.size)?, args.samples)?;
            write_atomic(&args.out.join(format!("{}.pgm", stem(path))), &bytes)
        })
        .collect();
    let mut outcome = Outcome::default();
    for (path, r) in inputs.iter().zip(results) {
        if let Err(e) = r {
            outcome.fail(path.display().to_string(), error_chain(&e));
        }
    }
    outcome.messages.push(format!(
        "rendered {} of {} contours",
        inputs.len() - outcome.failures.len(),
        inputs.len()
    ));
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub pred: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    /// Lines of `id,pred,gt`; relative paths resolve against the manifest's
    /// directory.
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub samples: usize,
    pub threshold: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

pub fn read_manifest(path: &Path) -> Result<Vec<EvalPair>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, pred, gt] = fields[..] else {
            bail!("{}:{}: expected `id,pred,gt`", path.display(), n + 1);
        };
        pairs.push(EvalPair {
            id: id.to_string(),
            pred: base.join(pred),
            gt: base.join(gt),
        });
    }
    Ok(pairs)
}

/// Matches prediction and ground-truth files by stem. Returns the pairs
/// and a diagnostic per unmatched or ambiguous file.
pub fn pair_by_stem(pred_dir: &Path, gt_dir: &Path) -> Result<(Vec<EvalPair>, Vec<String>)> {
    let mut preds: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for p in list_dir(pred_dir, &["pgm", "json"])? {
        preds.entry(stem(&p)).or_default().push(p);
    }
    let gts: BTreeMap<String, PathBuf> = list_dir(gt_dir, &["pgm"])?
        .into_iter()
        .map(|p| (stem(&p), p))
        .collect();
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (id, candidates) in &preds {
        match (gts.get(id), candidates.as_slice()) {
            (None, _) => skipped.push(format!("{id}: no ground truth in {}", gt_dir.display())),
            (Some(_), [_, _, ..]) => skipped.push(format!("{id}: both a mask and a contour prediction")),
            (Some(gt), [pred]) => pairs.push(EvalPair {
                id: id.clone(),
                pred: pred.clone(),
                gt: gt.clone(),
            }),
            (Some(_), []) => unreachable!("entries hold at least one path"),
        }
    }
    for id in gts.keys().filter(|id| !preds.contains_key(*id)) {
        skipped.push(format!("{id}: no prediction in {}", pred_dir.display()));
    }
    Ok((pairs, skipped))
}

fn evaluate_pair(pair: &EvalPair, samples: usize, threshold: u8) -> Result<MetricsReport> {
    let gt = read_mask(&pair.gt, threshold)?;
    if is_contour_file(&pair.pred) {
        let contour = read_contour(&pair.pred)?;
        let contour = if (contour.width(), contour.height()) == (gt.width(), gt.height()) {
            contour
        } else {
            contour.rescaled(gt.width(), gt.height())?
        };
        Ok(evaluate_contour_with(&contour, &gt, samples)?)
    } else if is_mask_file(&pair.pred) {
        Ok(evaluate_masks(&read_mask(&pair.pred, threshold)?, &gt)?)
    } else {
        bail!("unrecognized prediction format {}", pair.pred.display())
    }
}

/// Per-pair metrics CSV with summary rows.
pub fn eval(args: &EvalArgs) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let pairs = match (&args.manifest, &args.pred, &args.gt) {
        (Some(m), _, _) => {
            let mut pairs = Vec::new();
            for p in read_manifest(m)? {
                if !p.pred.exists() {
                    outcome.skipped.push(format!("{}: missing {}", p.id, p.pred.display()));
                } else if !p.gt.exists() {
                    outcome.skipped.push(format!("{}: missing {}", p.id, p.gt.display()));
                } else {
                    pairs.push(p);
                }
            }
            pairs
        }
        (None, Some(pred), Some(gt)) => {
            let (pairs, skipped) = pair_by_stem(pred, gt)?;
            outcome.skipped = skipped;
            pairs
        }
        _ => bail!("eval needs --manifest or both --pred and --gt"),
    };
    if pairs.is_empty() {
        bail!("no prediction/ground-truth pairs to evaluate");
    }
    let results: Vec<Result<MetricsReport>> = pairs
        .par_iter()
        .map(|p| evaluate_pair(p, args.samples, args.threshold))
        .collect();
    let mut rows = Vec::new();
    for (pair, r) in pairs.iter().zip(results) {
        match r {
            Ok(m) => rows.push((pair.id.clone(), m)),
            Err(e) => outcome.fail(pair.id.clone(), error_chain(&e)),
        }
    }
    if rows.is_empty() {
        bail!("every pair failed to evaluate");
    }
    write_atomic(&args.out, metrics_csv(&rows)?.as_bytes())?;
    let miou = rows.iter().map(|(_, r)| r.iou).sum::<f64>() / rows.len() as f64;
    outcome
        .messages
        .push(format!("evaluated {} pairs, miou {miou:.6}", rows.len()));
    Ok(outcome)
}

/// Where the masks of a study come from.
#[derive(Debug, Clone)]
pub enum CorpusSource {
    /// PGM files or directories of them.
    Masks { inputs: Vec<PathBuf>, threshold: u8 },
    /// Synthetic shapes; `kind: None` selects the default mixed corpus.
    Synthetic {
        kind: Option<ShapeKind>,
        count: usize,
        size: usize,
        scales: (f64, f64),
        seed: u64,
    },
}

impl CorpusSource {
    pub fn synthetic_default(seed: u64) -> Self {
        CorpusSource::Synthetic {
            kind: None,
            count: 0,
            size: 256,
            scales: DEFAULT_SCALES,
            seed,
        }
    }
}

pub fn corpus_items(kind: Option<ShapeKind>, count: usize, size: usize, scales: (f64, f64), seed: u64) -> Vec<CorpusItem> {
    match kind {
        Some(kind) => shape_corpus(kind, count, size, scales, seed),
        None => default_corpus(seed),
    }
}

/// Loads the corpus; unreadable masks are recorded in `outcome` and left
/// out.
fn load_corpus(source: &CorpusSource, outcome: &mut Outcome) -> Result<(Vec<String>, Vec<BinaryMask>)> {
    let (ids, masks) = match source {
        CorpusSource::Masks { inputs, threshold } => {
            let paths = collect_inputs(inputs, &["pgm"])?;
            let loaded: Vec<Result<BinaryMask>> = paths.par_iter().map(|p| read_mask(p, *threshold)).collect();
            let mut ids = Vec::new();
            let mut masks = Vec::new();
            for (p, m) in paths.iter().zip(loaded) {
                match m {
                    Ok(m) => {
                        ids.push(stem(p));
                        masks.push(m);
                    }
                    Err(e) => outcome.fail(p.display().to_string(), error_chain(&e)),
                }
            }
            (ids, masks)
        }
        CorpusSource::Synthetic {
            kind,
            count,
            size,
            scales,
            seed,
        } => {
            let items = corpus_items(*kind, *count, *size, *scales, *seed);
            let masks = render_corpus(&items)?;
            (items.into_iter().map(|i| i.id).collect(), masks)
        }
    };
    if masks.is_empty() {
        bail!("the corpus is empty");
    }
    Ok((ids, masks))
}

#[derive(Debug, Clone)]
pub struct FidelityArgs {
    pub source: CorpusSource,
    pub out: PathBuf,
    pub degree: usize,
    pub smooth_radius: usize,
}

/// Encode/decode/rasterize every mask and compare with the original.
pub fn fidelity(args: &FidelityArgs) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let (ids, masks) = load_corpus(&args.source, &mut outcome)?;
    let result = fidelity_study(&masks, args.degree, args.smooth_radius)?;
    for (id, item) in ids.iter().zip(&result.items) {
        if let Err(e) = item {
            outcome.fail(id.clone(), e);
        }
    }
    write_atomic(&args.out, result.to_csv(&ids)?.as_bytes())?;
    outcome.messages.push(format!(
        "fidelity over {} masks: miou {:.6} siou {:.6} mean arc residual {:.6}",
        result.summary.count, result.summary.miou, result.summary.siou, result.mean_arc_residual
    ));
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct DegreeSweepArgs {
    pub source: CorpusSource,
    pub out: PathBuf,
    pub degrees: Vec<usize>,
    pub smooth_radius: usize,
}

pub fn degree_sweep_cmd(args: &DegreeSweepArgs) -> Result<Outcome> {
    if args.degrees.is_empty() {
        bail!("no degrees given");
    }
    let mut outcome = Outcome::default();
    let (_, masks) = load_corpus(&args.source, &mut outcome)?;
    let rows = degree_sweep(&masks, &args.degrees, args.smooth_radius)?;
    write_atomic(&args.out, degree_sweep_csv(&rows).as_bytes())?;
    for r in &rows {
        outcome.messages.push(format!(
            "degree {}: miou {:.6} mean arc residual {:.6}",
            r.degree, r.miou, r.mean_arc_residual
        ));
        if r.skipped > 0 {
            outcome.fail(format!("degree {}", r.degree), format!("{} masks could not be encoded", r.skipped));
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct SensitivityArgs {
    pub source: CorpusSource,
    pub out: PathBuf,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

pub fn sensitivity(args: &SensitivityArgs) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let (_, masks) = load_corpus(&args.source, &mut outcome)?;
    let curve = sensitivity_sweep(&masks, &args.deltas, args.trials, args.seed)?;
    write_atomic(&args.out, curve.to_csv().as_bytes())?;
    for (i, d) in curve.deltas.iter().enumerate() {
        outcome.messages.push(format!(
            "delta {d}: bezier {:.6} polygon {:.6}",
            curve.miou_bezier[i], curve.miou_polygon[i]
        ));
    }
    if curve.skipped > 0 {
        outcome.fail("corpus", format!("{} masks could not be encoded", curve.skipped));
    }
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub kind: ShapeKind,
    pub count: usize,
    pub size: usize,
    pub scales: (f64, f64),
    pub seed: u64,
    pub out: PathBuf,
}

/// Writes `<id>.pgm` for each generated shape.
pub fn gen_synthetic(args: &GenArgs) -> Result<Outcome> {
    ensure_dir(&args.out)?;
    let items = shape_corpus(args.kind, args.count, args.size, args.scales, args.seed);
    let results: Vec<Result<()>> = items
        .par_iter()
        .map(|item| {
            let mask = bzshape::experiments::generate_shape(&item.params)?;
            write_atomic(&args.out.join(format!("{}.pgm", item.id)), &mask.to_pgm())
        })
        .collect();
    let mut outcome = Outcome::default();
    for (item, r) in items.iter().zip(results) {
        if let Err(e) = r {
            outcome.fail(item.id.clone(), error_chain(&e));
        }
    }
    outcome.messages.push(format!(
        "generated {} of {} shapes",
        items.len() - outcome.failures.len(),
        items.len()
    ));
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct GradcheckArgs {
    pub pairs: usize,
    pub size: usize,
    pub n_loss_samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Fails every pair whose relative gradient error reaches the tolerance.
pub fn gradcheck(args: &GradcheckArgs) -> Result<Outcome> {
    if args.pairs == 0 {
        bail!("gradcheck needs at least one pair");
    }
    let errors = gradient_study(args.pairs, args.size, args.n_loss_samples, args.seed)?;
    let mut outcome = Outcome::default();
    let mut csv = String::from("pair,relative_error,pass\n");
    for (i, &e) in errors.iter().enumerate() {
        let pass = e < GRADCHECK_TOLERANCE;
        writeln!(csv, "{i},{e},{pass}").unwrap();
        if !pass {
            outcome.fail(format!("pair {i}"), format!("relative gradient error {e:e}"));
        }
    }
    if let Some(out) = &args.out {
        write_atomic(out, csv.as_bytes())?;
    }
    let worst = errors.iter().fold(0.0f64, |m, &e| m.max(e));
    outcome.messages.push(format!(
        "gradcheck over {} pairs: max relative error {worst:e}",
        errors.len()
    ));
    Ok(outcome)
}
