//! Group statistics for one scene group held in memory.
//!
//! The group is an object-resizing series. Three simulated models are
//! compared: a perfect one, one with multiplicative noise and one whose
//! output is only known up to scale and shift.

use pde::depthio::{Category, DepthMap, ModelEntry, OutputKind, PerturbationMeta, PerturbationType};
use pde::geom::{perturb_resize_object, render_depth, Rendered, SceneSpec};
use pde::metrics::{EvalConfig, MetricKind, RecordData};
use pde::robust::{evaluate_loaded, LoadedGroup, LoadedRecord};

/// Maps (pixel index + variant index, true depth) to a predicted value.
type Simulator = Box<dyn Fn(usize, f64) -> f64>;

fn record(
    render: &Rendered,
    spec: &SceneSpec,
    pred: DepthMap,
    meta: Option<PerturbationMeta>,
) -> pde::Result<LoadedRecord> {
    Ok(LoadedRecord {
        data: RecordData::new(
            render.depth.clone(),
            render.object_mask.clone(),
            render.background.clone(),
            Some(spec.effective_camera()),
        )?,
        pred,
        meta,
    })
}

fn main() -> pde::Result<()> {
    let base_spec = SceneSpec::desk(Category::Cabinet, 48, 48, 0)?;
    let scales = [0.8, 1.2, 1.5];
    let mut scenes = vec![(base_spec.clone(), None)];
    for s in scales {
        let mut meta = PerturbationMeta::new(PerturbationType::ObjResizing);
        meta.resize_scale = Some(s);
        scenes.push((perturb_resize_object(&base_spec, s)?, Some(meta)));
    }
    let renders = scenes
        .iter()
        .map(|(spec, _)| render_depth(spec))
        .collect::<pde::Result<Vec<_>>>()?;

    let models: [(ModelEntry, Simulator); 3] = [
        (ModelEntry::new("perfect", OutputKind::MetricDepth), Box::new(|_, d| d)),
        (
            ModelEntry::new("wobbly", OutputKind::MetricDepth),
            Box::new(|i, d| d * (1.0 + 0.04 * ((i * 7919) % 13) as f64 / 13.0)),
        ),
        (
            ModelEntry::new("affine", OutputKind::AffineDepth),
            Box::new(|_, d| 0.5 * d + 1.0),
        ),
    ];

    let config = EvalConfig::default();
    for (model, f) in &models {
        let mut loaded = Vec::new();
        for (v, ((spec, meta), r)) in scenes.iter().zip(&renders).enumerate() {
            let kind = model.output_kind.value_kind();
            let pred = DepthMap::new(
                r.depth.width(),
                r.depth.height(),
                r.depth
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| if d.is_finite() { f(i + v, d) } else { 100.0 })
                    .collect(),
                kind,
            )?;
            loaded.push(record(r, spec, pred, meta.clone())?);
        }
        let mut it = loaded.into_iter();
        let group = LoadedGroup {
            group_id: "cabinet-resize".into(),
            category: Category::Cabinet,
            ptype: PerturbationType::ObjResizing,
            base: it.next().expect("base"),
            variants: it.collect(),
        };
        let ev = evaluate_loaded(&group, model, &config)?;
        for row in ev
            .rows
            .iter()
            .filter(|r| matches!(r.metric, MetricKind::AbsRel | MetricKind::Delta1))
        {
            let kappa = row.kappa.map_or("n/a".to_string(), |k| format!("{k:.3e}"));
            println!(
                "{:8} {:7} mu {:7.3}  sigma {:.3e}  kappa {kappa}",
                model.name,
                row.metric.as_str(),
                row.mu,
                row.sigma
            );
        }
    }
    Ok(())
}
