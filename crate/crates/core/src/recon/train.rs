use nalgebra::Vector3;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{TrainConfig, VisibilityTest};
use super::dataset::MultiViewAolpDataset;
use super::losses::{tangent_vector, NORMAL_EPS};
use crate::error::{Error, Result};
use crate::scene::Ray;
use crate::sdf::{
    min_sdf_on_rays, sphere_trace_batch, AdamState, SdfNetwork, Tape,
};

/// Per-epoch averages of the loss components.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub tsc: f64,
    pub silhouette: f64,
    pub eikonal: f64,
    pub total: f64,
    /// Surface points visible in zero views, dropped with a warning count.
    pub excluded_points: usize,
}

/// Rows per gradient chunk; chunks are differentiated in parallel and
/// reduced in fixed order, so results do not depend on the schedule.
const CHUNK_ROWS: usize = 256;

struct TscBatch {
    /// Surface points, one row each.
    points: Array2<f32>,
    /// Per view: unit tangents `[n,3]` and weights `[n,1]` already
    /// normalized by each point's visibility count.
    tangents: Vec<Array2<f32>>,
    weights: Vec<Array2<f32>>,
    used_points: usize,
    excluded_points: usize,
}

struct SilhouetteBatch {
    /// Argmin points of the per-ray minimum search.
    points: Array2<f32>,
    /// Mask label per ray: 1 inside the silhouette, 0 outside.
    inside: Vec<f32>,
}

/// Fit the SDF network to multi-view AoLP observations with the combined
/// tangent-consistency + silhouette + Eikonal objective.
///
/// Deterministic for a fixed seed (and `ordered_reduction`): all sampling
/// comes from one sequential ChaCha stream and parallel gradient chunks are
/// reduced in index order.
pub fn train(
    dataset: &MultiViewAolpDataset,
    config: &TrainConfig,
) -> Result<(SdfNetwork<f32>, Vec<EpochStats>)> {
    config.validate()?;
    let mut net = SdfNetwork::<f32>::geometric_init(config.network.clone(), config.seed);
    let mut adam = AdamState::new(net.params(), config.lr as f32);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x7261_7973));
    let batches_per_epoch =
        (dataset.total_mask_pixels() + config.batch_pixels - 1) / config.batch_pixels;
    let batches_per_epoch = batches_per_epoch.max(1);
    let (w, h) = (dataset.width(), dataset.height());
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lambda1 = config.lambda1_at(epoch);
        let alpha = config.alpha_at(epoch);
        let mut sums = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut excluded = 0usize;

        for batch in 0..batches_per_epoch {
            let view_idx = rng.gen_range(0..dataset.views.len());
            let view = &dataset.views[view_idx];

            // Sample pixels, trace their rays against the current surface.
            let mut rays = Vec::with_capacity(config.batch_pixels);
            let mut pixel_info = Vec::with_capacity(config.batch_pixels);
            for _ in 0..config.batch_pixels {
                let col = rng.gen_range(0..w);
                let row = rng.gen_range(0..h);
                let ray = view.camera.pixel_center_ray(col, row)?;
                rays.push(ray);
                pixel_info.push((col, row));
            }
            let hits = sphere_trace_batch(&net, &rays, &dataset.bbox);

            let mut tsc_points: Vec<Vector3<f64>> = Vec::new();
            let mut sil_rays: Vec<(Ray, bool)> = Vec::new();
            for ((ray, &(col, row)), hit) in rays.iter().zip(&pixel_info).zip(&hits) {
                let inside = view.mask.get(col, row);
                match hit {
                    Some(hit) if inside => {
                        if view.aolp.get(col, row, 0).is_finite() {
                            tsc_points.push(hit.point);
                        }
                    }
                    Some(_) => sil_rays.push((*ray, false)),
                    None => sil_rays.push((*ray, inside)),
                }
            }
            if tsc_points.len() > config.max_tsc_points {
                tsc_points.partial_shuffle(&mut rng, config.max_tsc_points);
                tsc_points.truncate(config.max_tsc_points);
            }
            if sil_rays.len() > config.silhouette_rays {
                sil_rays.partial_shuffle(&mut rng, config.silhouette_rays);
                sil_rays.truncate(config.silhouette_rays);
            }

            let tsc = assemble_tsc(&net, dataset, config, &mut rng, &tsc_points)?;
            excluded += tsc.excluded_points;

            let sil = assemble_silhouette(&net, dataset, config, &sil_rays);

            let mut eik_points = Array2::<f32>::zeros((config.eikonal_samples, 3));
            for i in 0..config.eikonal_samples {
                let u = Vector3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
                let p = dataset.bbox.lerp(&u);
                eik_points[(i, 0)] = p.x as f32;
                eik_points[(i, 1)] = p.y as f32;
                eik_points[(i, 2)] = p.z as f32;
            }

            let (losses, grads) = batch_gradients(&net, config, &tsc, &sil, &eik_points, lambda1, alpha)?;
            let total = losses.0 + lambda1 * losses.1 + config.lambda2 * losses.2;
            if !total.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss diverged at epoch {epoch}, batch {batch}: tsc {} silhouette {} eikonal {}",
                    losses.0, losses.1, losses.2
                )));
            }
            adam.step(net.params_mut(), &grads)?;
            sums.0 += losses.0;
            sums.1 += losses.1;
            sums.2 += losses.2;
            sums.3 += total;
        }

        let nb = batches_per_epoch as f64;
        history.push(EpochStats {
            epoch,
            tsc: sums.0 / nb,
            silhouette: sums.1 / nb,
            eikonal: sums.2 / nb,
            total: sums.3 / nb,
            excluded_points: excluded,
        });
    }
    Ok((net, history))
}

/// Project surface points into the chosen views, gather tangents and
/// visibility weights.
fn assemble_tsc(
    net: &SdfNetwork<f32>,
    dataset: &MultiViewAolpDataset,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    points: &[Vector3<f64>],
) -> Result<TscBatch> {
    let n = points.len();
    let mut view_ids: Vec<usize> = (0..dataset.views.len()).collect();
    if config.tsc_views_per_batch > 0 && config.tsc_views_per_batch < view_ids.len() {
        view_ids.partial_shuffle(rng, config.tsc_views_per_batch);
        view_ids.truncate(config.tsc_views_per_batch);
        view_ids.sort_unstable();
    }

    let mut pts32 = Array2::<f32>::zeros((n, 3));
    for (i, p) in points.iter().enumerate() {
        pts32[(i, 0)] = p.x as f32;
        pts32[(i, 1)] = p.y as f32;
        pts32[(i, 2)] = p.z as f32;
    }
    if n == 0 {
        return Ok(TscBatch {
            points: pts32,
            tangents: vec![],
            weights: vec![],
            used_points: 0,
            excluded_points: 0,
        });
    }
    // Current normals, for the facing test and the ambiguity branch choice.
    let (_, grads) = net.eval_with_gradient(&pts32);
    let normals: Vec<Vector3<f64>> = (0..n)
        .map(|i| {
            let g = Vector3::new(
                grads[(i, 0)] as f64,
                grads[(i, 1)] as f64,
                grads[(i, 2)] as f64,
            );
            g / (g.norm() + NORMAL_EPS)
        })
        .collect();

    // Candidate (point, view) pairs that pass projection, mask and AoLP
    // checks; the azimuth observed at the projected pixel.
    let mut phi = vec![vec![f64::NAN; n]; view_ids.len()];
    let mut candidate: Vec<(usize, usize)> = Vec::new(); // (view slot, point)
    for (slot, &vid) in view_ids.iter().enumerate() {
        let view = &dataset.views[vid];
        let center = view.camera.center();
        for (i, p) in points.iter().enumerate() {
            let Some((u, v)) = view.camera.project(p) else {
                continue;
            };
            let Some(a) = view.aolp_at(u, v) else {
                continue;
            };
            if normals[i].dot(&(p - center)) >= 0.0 {
                continue; // back-facing
            }
            phi[slot][i] = a;
            candidate.push((slot, i));
        }
    }

    // Depth test for the surviving candidates, batched across all views.
    let mut visible = vec![vec![false; n]; view_ids.len()];
    match config.visibility {
        VisibilityTest::FrontFacing => {
            for &(slot, i) in &candidate {
                visible[slot][i] = true;
            }
        }
        VisibilityTest::DepthTraced => {
            let mut vis_rays = Vec::with_capacity(candidate.len());
            let mut depths = Vec::with_capacity(candidate.len());
            for &(slot, i) in &candidate {
                let center = dataset.views[view_ids[slot]].camera.center();
                let d = points[i] - center;
                depths.push(d.norm());
                vis_rays.push(Ray::new(center, d)?);
            }
            let hits = sphere_trace_batch(net, &vis_rays, &dataset.bbox);
            for (k, &(slot, i)) in candidate.iter().enumerate() {
                if let Some(hit) = &hits[k] {
                    if (hit.distance - depths[k]).abs() < config.tau_vis {
                        visible[slot][i] = true;
                    }
                }
            }
        }
    }

    // Per-point visibility counts, then weights 1/count.
    let mut counts = vec![0usize; n];
    for slot in 0..view_ids.len() {
        for i in 0..n {
            if visible[slot][i] {
                counts[i] += 1;
            }
        }
    }
    let used_points = counts.iter().filter(|&&c| c > 0).count();
    let excluded_points = n - used_points;

    let mut tangents = Vec::with_capacity(view_ids.len());
    let mut weights = Vec::with_capacity(view_ids.len());
    for (slot, &vid) in view_ids.iter().enumerate() {
        let cam = &dataset.views[vid].camera;
        let mut t = Array2::<f32>::zeros((n, 3));
        let mut wt = Array2::<f32>::zeros((n, 1));
        for i in 0..n {
            if !visible[slot][i] {
                continue;
            }
            let mut tv = tangent_vector(phi[slot][i], cam);
            if config.ambiguous {
                let alt = tangent_vector(phi[slot][i] + std::f64::consts::FRAC_PI_2, cam);
                if normals[i].dot(&alt).abs() < normals[i].dot(&tv).abs() {
                    tv = alt;
                }
            }
            t[(i, 0)] = tv.x as f32;
            t[(i, 1)] = tv.y as f32;
            t[(i, 2)] = tv.z as f32;
            wt[(i, 0)] = 1.0 / counts[i] as f32;
        }
        tangents.push(t);
        weights.push(wt);
    }
    Ok(TscBatch {
        points: pts32,
        tangents,
        weights,
        used_points,
        excluded_points,
    })
}

fn assemble_silhouette(
    net: &SdfNetwork<f32>,
    dataset: &MultiViewAolpDataset,
    config: &TrainConfig,
    rays: &[(Ray, bool)],
) -> SilhouetteBatch {
    let bare: Vec<Ray> = rays.iter().map(|(r, _)| *r).collect();
    let mins = min_sdf_on_rays(net, &bare, &dataset.bbox, config.ray_samples);
    let mut points = Array2::<f32>::zeros((rays.len(), 3));
    let mut inside = Vec::with_capacity(rays.len());
    for (i, ((_, is_inside), (_, pmin))) in rays.iter().zip(mins.iter()).enumerate() {
        points[(i, 0)] = pmin.x as f32;
        points[(i, 1)] = pmin.y as f32;
        points[(i, 2)] = pmin.z as f32;
        inside.push(if *is_inside { 1.0 } else { 0.0 });
    }
    SilhouetteBatch { points, inside }
}

/// Differentiate the batch objective. Each point set is split into
/// fixed-size row chunks whose tapes run in parallel; per-chunk gradients
/// carry the global normalization so their ordered sum is the exact batch
/// gradient. Returns the unweighted component losses and the gradient of
/// `tsc + lambda1 * silhouette + lambda2 * eikonal`.
#[allow(clippy::too_many_arguments)]
fn batch_gradients(
    net: &SdfNetwork<f32>,
    config: &TrainConfig,
    tsc: &TscBatch,
    sil: &SilhouetteBatch,
    eik_points: &Array2<f32>,
    lambda1: f64,
    alpha: f64,
) -> Result<((f64, f64, f64), Vec<Array2<f32>>)> {
    enum Piece {
        Tsc(std::ops::Range<usize>),
        Sil(std::ops::Range<usize>),
        Eik(std::ops::Range<usize>),
    }
    let mut pieces = Vec::new();
    let chunked = |len: usize| -> Vec<std::ops::Range<usize>> {
        (0..len.div_ceil(CHUNK_ROWS))
            .map(|c| c * CHUNK_ROWS..((c + 1) * CHUNK_ROWS).min(len))
            .collect()
    };
    for r in chunked(tsc.points.nrows()) {
        pieces.push(Piece::Tsc(r));
    }
    for r in chunked(sil.points.nrows()) {
        pieces.push(Piece::Sil(r));
    }
    for r in chunked(eik_points.nrows()) {
        pieces.push(Piece::Eik(r));
    }

    let tsc_norm = if tsc.used_points > 0 {
        1.0 / tsc.used_points as f32
    } else {
        0.0
    };
    let sil_norm = if sil.inside.is_empty() {
        0.0
    } else {
        1.0 / sil.inside.len() as f32
    };
    let eik_norm = if eik_points.nrows() == 0 {
        0.0
    } else {
        1.0 / eik_points.nrows() as f32
    };
    let (l1, l2, a) = (lambda1 as f32, config.lambda2 as f32, alpha as f32);

    let run_piece = |piece: &Piece| -> Result<((f64, f64, f64), Vec<Array2<f32>>)> {
        let mut tape = Tape::<f32>::new();
        let tn = net.register(&mut tape);
        let mut component = (0.0f64, 0.0f64, 0.0f64);
        let loss = match piece {
            Piece::Tsc(r) => {
                let pts = tsc.points.slice(ndarray::s![r.clone(), ..]).to_owned();
                let (_, g) = net.taped_forward(&mut tape, &tn, &pts, true);
                let g = g.expect("gradient graph");
                let norms = tape.norm_rows(g, NORMAL_EPS as f32);
                let inv = tape.recip(norms);
                let nhat = tape.mul_col(g, inv);
                let mut acc: Option<crate::sdf::Var> = None;
                for (t, wt) in tsc.tangents.iter().zip(tsc.weights.iter()) {
                    let tc = tape.constant(t.slice(ndarray::s![r.clone(), ..]).to_owned());
                    let wc = tape.constant(wt.slice(ndarray::s![r.clone(), ..]).to_owned());
                    let d = tape.dot_rows(nhat, tc);
                    let sq = tape.square(d);
                    let wsq = tape.mul(sq, wc);
                    acc = Some(match acc {
                        Some(v) => tape.add(v, wsq),
                        None => wsq,
                    });
                }
                let acc = match acc {
                    Some(v) => v,
                    None => return Ok(((0.0, 0.0, 0.0), zero_grads(net))),
                };
                let s = tape.sum(acc);
                component.0 = (tape.value(s)[(0, 0)] * tsc_norm) as f64;
                tape.scale(s, tsc_norm)
            }
            Piece::Sil(r) => {
                let pts = sil.points.slice(ndarray::s![r.clone(), ..]).to_owned();
                let (f, _) = net.taped_forward(&mut tape, &tn, &pts, false);
                let o: Vec<f32> = sil.inside[r.clone()].to_vec();
                let k = o.len();
                let o_in = tape.constant(Array2::from_shape_vec((k, 1), o.clone()).unwrap());
                let o_out = tape.constant(Array2::from_shape_vec(
                    (k, 1),
                    o.iter().map(|v| 1.0 - v).collect(),
                )
                .unwrap());
                let pos = tape.scale(f, a);
                let sp_in = tape.softplus(pos, 1.0);
                let neg = tape.scale(f, -a);
                let sp_out = tape.softplus(neg, 1.0);
                let t_in = tape.mul(sp_in, o_in);
                let t_out = tape.mul(sp_out, o_out);
                let terms = tape.add(t_in, t_out);
                let s = tape.sum(terms);
                component.1 = (tape.value(s)[(0, 0)] * sil_norm) as f64;
                let mean = tape.scale(s, sil_norm);
                tape.scale(mean, l1)
            }
            Piece::Eik(r) => {
                let pts = eik_points.slice(ndarray::s![r.clone(), ..]).to_owned();
                let (_, g) = net.taped_forward(&mut tape, &tn, &pts, true);
                let norms = tape.norm_rows(g.expect("gradient graph"), 0.0);
                let shifted = tape.offset(norms, -1.0);
                let sq = tape.square(shifted);
                let s = tape.sum(sq);
                component.2 = (tape.value(s)[(0, 0)] * eik_norm) as f64;
                let mean = tape.scale(s, eik_norm);
                tape.scale(mean, l2)
            }
        };
        let grads = tape.backward(loss)?;
        let arrays: Vec<Array2<f32>> = tn
            .param_vars
            .iter()
            .zip(net.params().iter())
            .map(|(v, p)| {
                grads
                    .wrt(*v)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(p.dim()))
            })
            .collect();
        Ok((component, arrays))
    };

    let mut totals = (0.0f64, 0.0f64, 0.0f64);
    let mut grad_sum = zero_grads(net);
    if config.ordered_reduction {
        // Parallel map, order-preserving collect, sequential reduce: the
        // result does not depend on the scheduler.
        let results: Vec<_> = pieces.par_iter().map(run_piece).collect();
        for r in results {
            let (c, g) = r?;
            totals.0 += c.0;
            totals.1 += c.1;
            totals.2 += c.2;
            for (acc, add) in grad_sum.iter_mut().zip(g.iter()) {
                *acc += add;
            }
        }
    } else {
        // Unordered tree reduction; faster merge, last-bit results may vary
        // between runs.
        let (c, g) = pieces
            .par_iter()
            .map(|p| run_piece(p).map(|(c, g)| ((c.0, c.1, c.2), g)))
            .try_reduce(
                || ((0.0, 0.0, 0.0), zero_grads(net)),
                |(ca, mut ga), (cb, gb)| {
                    for (acc, add) in ga.iter_mut().zip(gb.iter()) {
                        *acc += add;
                    }
                    Ok(((ca.0 + cb.0, ca.1 + cb.1, ca.2 + cb.2), ga))
                },
            )?;
        totals = c;
        grad_sum = g;
    }
    Ok((totals, grad_sum))
}

fn zero_grads(net: &SdfNetwork<f32>) -> Vec<Array2<f32>> {
    net.params().iter().map(|p| Array2::zeros(p.dim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::NetworkConfig;

    fn tiny_train_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_pixels: 512,
            max_tsc_points: 96,
            silhouette_rays: 96,
            eikonal_samples: 128,
            ray_samples: 32,
            seed: 11,
            network: NetworkConfig {
                width: 24,
                hidden_layers: 4,
                skip_layer: 2,
                frequencies: 3,
                softplus_beta: 50.0,
                init_radius: 0.5,
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_on_small_sphere_problem() {
        let dataset = crate::recon::losses::tests::sphere_dataset(6, 48);
        let (_, history) = train(&dataset, &tiny_train_config(6)).unwrap();
        assert_eq!(history.len(), 6);
        let first = history.first().unwrap().total;
        let last = history.last().unwrap().total;
        assert!(
            last < first,
            "loss should decrease: start {first}, end {last}"
        );
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let dataset = crate::recon::losses::tests::sphere_dataset(4, 32);
        let cfg = tiny_train_config(2);
        let (net_a, hist_a) = train(&dataset, &cfg).unwrap();
        let (net_b, hist_b) = train(&dataset, &cfg).unwrap();
        for (pa, pb) in net_a.params().iter().zip(net_b.params().iter()) {
            assert_eq!(pa, pb);
        }
        for (a, b) in hist_a.iter().zip(hist_b.iter()) {
            assert_eq!(a.total.to_bits(), b.total.to_bits());
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let dataset = crate::recon::losses::tests::sphere_dataset(4, 32);
        let cfg = tiny_train_config(0);
        let (net, history) = train(&dataset, &cfg).unwrap();
        assert!(history.is_empty());
        let fresh = SdfNetwork::<f32>::geometric_init(cfg.network.clone(), cfg.seed);
        for (a, b) in net.params().iter().zip(fresh.params().iter()) {
            assert_eq!(a, b);
        }
    }
}
