//! Multi-view silhouette fitting.
//!
//! A fixed template mesh is deformed by a per-vertex displacement field,
//! initialized to zero and optimized with Adam against the combined loss:
//! the mean silhouette IoU loss over all views plus the Laplacian and
//! flattening regularizers evaluated on the deformed shape. All views
//! participate in every iteration, and per-view gradients are reduced in
//! ascending view order, so a fit is a deterministic function of its inputs.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::loss::{
    color_l2_loss, flattening_loss, iou_loss, laplacian_loss, total_loss, LossReport, LossWeights,
};
use crate::mesh::{edge_adjacency, vertex_adjacency, Mesh};
use crate::raster::{
    backward_color, backward_soft, render_color, render_hard, render_soft, BinaryMask, ColorImage,
    Sharpness,
};
use crate::vec3::Vec3;

/// Fitting hyperparameters. The defaults pair the sharpness 3e-5 rasterizer
/// with Adam at alpha 1e-4, beta1 0.9, beta2 0.999 and the regularizer
/// weights lambda 0.01, mu 0.001.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub sigma: Sharpness,
    pub weights: LossWeights,
    pub adam_alpha: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub iterations: usize,
    /// Optional coarse-to-fine schedule: at iteration `i` the sharpness
    /// switches to the paired value. Off by default.
    pub sigma_schedule: Option<Vec<(usize, f64)>>,
    pub color_enabled: bool,
    /// Learning rate for the color parameters. Colors live in [0, 1] and
    /// need macroscopic movement, so they get a faster rate than the
    /// geometry displacements.
    pub color_alpha: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            sigma: Sharpness::default(),
            weights: LossWeights::default(),
            adam_alpha: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            iterations: 2000,
            sigma_schedule: None,
            color_enabled: false,
            color_alpha: 1e-2,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.adam_alpha > 0.0) {
            return Err(Error::InvalidConfig("adam_alpha must be positive".into()));
        }
        for (name, beta) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0 < beta && beta < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "adam_{name} must lie in (0, 1)"
                )));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig("adam_eps must be positive".into()));
        }
        if !(self.color_alpha > 0.0) {
            return Err(Error::InvalidConfig("color_alpha must be positive".into()));
        }
        if let Some(schedule) = &self.sigma_schedule {
            for pair in schedule.windows(2) {
                if pair[1].0 <= pair[0].0 {
                    return Err(Error::InvalidConfig(
                        "sigma_schedule iterations must be strictly increasing".into(),
                    ));
                }
            }
            for &(_, sigma) in schedule {
                Sharpness::new(sigma)?;
            }
        }
        Ok(())
    }
}

/// First/second moment estimates and the step counter of one Adam-optimized
/// parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(parameter_count: usize) -> Self {
        AdamState {
            m: vec![0.0; parameter_count],
            v: vec![0.0; parameter_count],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update: moment updates, bias correction, then
/// `p -= alpha * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &FitConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} parameters", state.m.len()),
            got: format!("{} params / {} grads", params.len(), grads.len()),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("gradient at Adam step {}", state.t + 1),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - config.adam_beta1.powi(t);
    let bias2 = 1.0 - config.adam_beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = config.adam_beta1 * state.m[i] + (1.0 - config.adam_beta1) * g;
        state.v[i] = config.adam_beta2 * state.v[i] + (1.0 - config.adam_beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= config.adam_alpha * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    Ok(())
}

/// The fitting targets: one binary mask per camera, plus optional per-view
/// RGB targets for color recovery.
#[derive(Debug, Clone)]
pub struct ViewSet {
    views: Vec<(Camera, BinaryMask)>,
    color_targets: Option<Vec<ColorImage>>,
}

impl ViewSet {
    pub fn new(views: Vec<(Camera, BinaryMask)>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidConfig("view set must be non-empty".into()));
        }
        for (i, (camera, mask)) in views.iter().enumerate() {
            camera.validate()?;
            if mask.width() != camera.width || mask.height() != camera.height {
                return Err(Error::ShapeMismatch {
                    expected: format!("view {i}: {}x{} mask", camera.width, camera.height),
                    got: format!("{}x{}", mask.width(), mask.height()),
                });
            }
        }
        Ok(ViewSet {
            views,
            color_targets: None,
        })
    }

    pub fn with_color_targets(mut self, targets: Vec<ColorImage>) -> Result<Self> {
        if targets.len() != self.views.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} color targets", self.views.len()),
                got: format!("{}", targets.len()),
            });
        }
        for ((camera, _), image) in self.views.iter().zip(&targets) {
            if image.width() != camera.width || image.height() != camera.height {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}x{} color target", camera.width, camera.height),
                    got: format!("{}x{}", image.width(), image.height()),
                });
            }
        }
        self.color_targets = Some(targets);
        Ok(self)
    }

    pub fn views(&self) -> &[(Camera, BinaryMask)] {
        &self.views
    }

    pub fn color_targets(&self) -> Option<&[ColorImage]> {
        self.color_targets.as_deref()
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }
}

fn displaced(template: &Mesh, displacement: &[f64]) -> Result<Mesh> {
    let vertices: Vec<Vec3> = template
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            [
                v[0] + displacement[3 * i],
                v[1] + displacement[3 * i + 1],
                v[2] + displacement[3 * i + 2],
            ]
        })
        .collect();
    template.with_vertices(vertices)
}

/// Deforms `template` by an optimized per-vertex displacement field until
/// its rendered silhouettes match the view targets. Returns the deformed
/// mesh and one [`LossReport`] per iteration.
pub fn fit(template: &Mesh, views: &ViewSet, config: &FitConfig) -> Result<(Mesh, Vec<LossReport>)> {
    config.validate()?;
    if config.color_enabled && views.color_targets.is_none() {
        return Err(Error::InvalidConfig(
            "color fitting enabled but the view set has no color targets".into(),
        ));
    }

    let n = template.vertex_count();
    let adjacency = vertex_adjacency(template);
    let edges = edge_adjacency(template)?;

    let mut displacement = vec![0.0_f64; 3 * n];
    let mut adam = AdamState::new(3 * n);

    let mut colors: Vec<f64> = match (config.color_enabled, template.colors()) {
        (true, Some(cs)) => cs.iter().flatten().copied().collect(),
        (true, None) => vec![0.5; 3 * n],
        (false, _) => Vec::new(),
    };
    let mut color_adam = AdamState::new(colors.len());
    let color_config = FitConfig {
        adam_alpha: config.color_alpha,
        ..config.clone()
    };

    let mut sigma = config.sigma;
    let mut history = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        if let Some(schedule) = &config.sigma_schedule {
            for &(at, value) in schedule {
                if at == iteration {
                    sigma = Sharpness::new(value)?;
                }
            }
        }

        let mut current = displaced(template, &displacement)?;
        if config.color_enabled {
            let palette: Vec<Vec3> = colors.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            current = current.with_color_attribute(palette)?;
        }

        let view_error = |view: usize| {
            move |source: Error| Error::FitView {
                iteration,
                view,
                source: Box::new(source),
            }
        };

        let inv_views = 1.0 / views.len() as f64;
        let mut iou_sum = 0.0;
        let mut vertex_grad = vec![0.0_f64; 3 * n];
        for (view, (camera, target)) in views.views.iter().enumerate() {
            let soft = render_soft(&current, camera, sigma).map_err(view_error(view))?;
            let (value, upstream) = iou_loss(&soft, target)?;
            let buffer =
                backward_soft(&current, camera, sigma, &upstream).map_err(view_error(view))?;
            iou_sum += value;
            for (i, g) in buffer.d_vertices.iter().enumerate() {
                vertex_grad[3 * i] += g[0] * inv_views;
                vertex_grad[3 * i + 1] += g[1] * inv_views;
                vertex_grad[3 * i + 2] += g[2] * inv_views;
            }
        }
        let iou_mean = iou_sum * inv_views;

        let (laplacian, lap_grad) = laplacian_loss(&current, &adjacency)?;
        let (flattening, fl_grad) = flattening_loss(&current, &edges)?;
        for i in 0..n {
            for axis in 0..3 {
                vertex_grad[3 * i + axis] += config.weights.lambda * lap_grad[i][axis]
                    + config.weights.mu * fl_grad[i][axis];
            }
        }

        let mut color_value = None;
        if config.color_enabled {
            let targets = views.color_targets.as_ref().unwrap();
            let mut color_sum = 0.0;
            let mut color_grad = vec![0.0_f64; colors.len()];
            for (view, ((camera, _), target)) in views.views.iter().zip(targets).enumerate() {
                let rendered = render_color(&current, camera, sigma).map_err(view_error(view))?;
                let (value, upstream) = color_l2_loss(&rendered, target)?;
                let buffer =
                    backward_color(&current, camera, sigma, &upstream).map_err(view_error(view))?;
                color_sum += value;
                let d_colors = buffer.d_colors.expect("backward_color fills d_colors");
                for (i, g) in d_colors.iter().enumerate() {
                    for c in 0..3 {
                        color_grad[3 * i + c] += g[c] * inv_views;
                    }
                }
            }
            color_value = Some(color_sum * inv_views);
            adam_step(&mut colors, &color_grad, &mut color_adam, &color_config)?;
            for c in &mut colors {
                *c = c.clamp(0.0, 1.0);
            }
        }

        let report = total_loss(iou_mean, laplacian, flattening, color_value, &config.weights)?;
        adam_step(&mut displacement, &vertex_grad, &mut adam, config)?;
        history.push(report);
    }

    let mut fitted = displaced(template, &displacement)?;
    if config.color_enabled {
        let palette: Vec<Vec3> = colors.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        fitted = fitted.with_color_attribute(palette)?;
    }
    Ok((fitted, history))
}

/// Hard-rasterized intersection-over-union of a mesh against every view
/// target; returns the per-view values and their mean. A view with two empty
/// masks counts as IoU 1.
pub fn evaluate_2d_iou(mesh: &Mesh, views: &ViewSet) -> Result<(Vec<f64>, f64)> {
    let mut per_view = Vec::with_capacity(views.len());
    for (camera, target) in views.views() {
        let rendered = render_hard(mesh, camera)?;
        let mut intersection = 0usize;
        let mut union = 0usize;
        for (&a, &b) in rendered.values().iter().zip(target.values()) {
            intersection += (a && b) as usize;
            union += (a || b) as usize;
        }
        per_view.push(if union == 0 {
            1.0
        } else {
            intersection as f64 / union as f64
        });
    }
    let mean = per_view.iter().sum::<f64>() / per_view.len() as f64;
    Ok((per_view, mean))
}

/// Loss history serialization: `iter,iou,laplacian,flattening,color,total`,
/// one row per iteration. The color column is empty when color fitting is
/// disabled.
pub fn loss_history_csv(history: &[LossReport]) -> String {
    let mut out = String::from("iter,iou,laplacian,flattening,color,total\n");
    for (i, report) in history.iter().enumerate() {
        let color = report.color.map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i, report.iou, report.laplacian, report.flattening, color, report.total
        ));
    }
    out
}
