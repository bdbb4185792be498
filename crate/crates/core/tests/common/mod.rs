//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

pub mod grad_suite;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timecma::tensor::{Graph, ParamRegistry, Tensor, Var};
use timecma::Result;

pub const FD_STEP: f32 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tensor with entries uniform in `[−1, 1]`.
pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
    )
    .unwrap()
}

/// Overwrites every parameter with uniform `[−1, 1]` draws so that no
/// gradient is trivially zero (biases start at zero, LN at 1/0).
pub fn randomize(params: &mut ParamRegistry, seed: u64, scale: f32) {
    let mut r = rng(seed);
    for (_, t) in params.iter_mut() {
        t.data
            .iter_mut()
            .for_each(|v| *v = r.gen_range(-scale..scale));
    }
}

/// Norm-wise relative error `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn rel_err(a: &[f32], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Per-tensor comparison.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub name: String,
    pub rel_err: f64,
    pub grad_norm: f64,
}

/// Outcome of one finite-difference check.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub tensors: Vec<GradReport>,
    /// Norm-wise relative error over every checked entry of every tensor.
    pub rel_err: f64,
    pub checked: usize,
    /// Entries whose `±h` stencil changed a relu's active set.
    pub skipped: usize,
}

impl GradCheck {
    pub fn worst_tensor(&self) -> &GradReport {
        self.tensors
            .iter()
            .max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
            .expect("at least one tensor")
    }
}

struct Evaluated {
    value: f64,
    pattern: Vec<bool>,
}

/// Central differences for one tensor; kink-crossing entries are dropped
/// from both sides of the comparison.
fn compare<P>(
    name: String,
    analytic: &[f32],
    mut eval_at: P,
    all: &mut (Vec<f32>, Vec<f64>),
    skipped: &mut usize,
) -> GradReport
where
    P: FnMut(usize) -> (Evaluated, Evaluated, f64),
{
    let mut a = Vec::with_capacity(analytic.len());
    let mut n = Vec::with_capacity(analytic.len());
    for (j, &g) in analytic.iter().enumerate() {
        let (plus, minus, denom) = eval_at(j);
        if plus.pattern != minus.pattern {
            *skipped += 1;
            continue;
        }
        a.push(g);
        n.push((plus.value - minus.value) / denom);
    }
    all.0.extend_from_slice(&a);
    all.1.extend_from_slice(&n);
    GradReport {
        rel_err: rel_err(&a, &n),
        grad_norm: n.iter().map(|v| v * v).sum::<f64>().sqrt(),
        name,
    }
}

fn check<E>(
    params: &ParamRegistry,
    inputs: &[Tensor],
    analytic_inputs: Vec<Vec<f32>>,
    p_grads: &ParamRegistry,
    eval: E,
) -> GradCheck
where
    E: Fn(&ParamRegistry, &[Tensor]) -> Evaluated,
{
    let mut all = (Vec::new(), Vec::new());
    let mut skipped = 0;
    let mut tensors = Vec::new();
    for (i, analytic) in analytic_inputs.iter().enumerate() {
        tensors.push(compare(
            format!("input{i}"),
            analytic,
            |j| {
                let mut plus = inputs.to_vec();
                let mut minus = inputs.to_vec();
                plus[i].data[j] += FD_STEP;
                minus[i].data[j] -= FD_STEP;
                let denom = plus[i].data[j] as f64 - minus[i].data[j] as f64;
                (eval(params, &plus), eval(params, &minus), denom)
            },
            &mut all,
            &mut skipped,
        ));
    }
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let n = params.get(&name).unwrap().numel();
        let analytic = p_grads
            .get(&name)
            .unwrap()
            .grad
            .clone()
            .unwrap_or_else(|| vec![0.0; n]);
        tensors.push(compare(
            name.clone(),
            &analytic,
            |j| {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus.get_mut(&name).unwrap().data[j] += FD_STEP;
                minus.get_mut(&name).unwrap().data[j] -= FD_STEP;
                let denom = plus.get(&name).unwrap().data[j] as f64
                    - minus.get(&name).unwrap().data[j] as f64;
                (eval(&plus, inputs), eval(&minus, inputs), denom)
            },
            &mut all,
            &mut skipped,
        ));
    }
    GradCheck {
        rel_err: rel_err(&all.0, &all.1),
        checked: all.0.len(),
        skipped,
        tensors,
    }
}

/// Compares reverse-mode gradients against central differences.
///
/// The scalar being differentiated is `Σ f(·) ⊙ R` for a fixed random `R`,
/// so ops whose outputs have constant sums (softmax, layer norm) still get
/// a non-degenerate check. The projection of the finite-difference forward
/// values onto `R` is accumulated in f64, and the denominator is the exact
/// difference of the perturbed f32 inputs.
pub fn grad_check<F>(params: &ParamRegistry, inputs: &[Tensor], seed: u64, f: F) -> GradCheck
where
    F: Fn(&mut Graph, &ParamRegistry, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let leaves: Vec<Var> = inputs
        .iter()
        .map(|t| g.leaf(t.clone().with_requires_grad(true)))
        .collect();
    let out = f(&mut g, params, &leaves).unwrap();
    let numel = g.value(out).numel();
    let mut r = rng(seed ^ 0xA5A5);
    let proj: Vec<f32> = (0..numel).map(|_| r.gen_range(-1.0f32..1.0)).collect();
    let pc = g
        .constant(g.shape(out).to_vec().as_slice(), proj.clone())
        .unwrap();
    let prod = g.mul(out, pc).unwrap();
    let loss = g.sum(prod);
    let mut p_grads = params.clone();
    p_grads.zero_grad();
    g.backward_into(loss, &mut p_grads).unwrap();
    let analytic_inputs = leaves
        .iter()
        .zip(inputs)
        .map(|(&l, t)| {
            g.grad(l)
                .map(<[f32]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.numel()])
        })
        .collect();

    check(
        params,
        inputs,
        analytic_inputs,
        &p_grads,
        |params, inputs| {
            let mut g = Graph::new();
            let leaves: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
            let out = f(&mut g, params, &leaves).unwrap();
            Evaluated {
                value: g
                    .data(out)
                    .iter()
                    .zip(&proj)
                    .map(|(&o, &p)| o as f64 * p as f64)
                    .sum(),
                pattern: g.activation_pattern(),
            }
        },
    )
}

/// Same comparison for a scalar loss built from the registry alone.
pub fn loss_grad_check<F>(params: &ParamRegistry, f: F) -> GradCheck
where
    F: Fn(&mut Graph, &ParamRegistry) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = f(&mut g, params).unwrap();
    let mut p_grads = params.clone();
    p_grads.zero_grad();
    g.backward_into(loss, &mut p_grads).unwrap();
    check(params, &[], Vec::new(), &p_grads, |params, _| {
        let mut g = Graph::new();
        let loss = f(&mut g, params).unwrap();
        Evaluated {
            value: g.data(loss)[0] as f64,
            pattern: g.activation_pattern(),
        }
    })
}

/// Prints one line per acceptance criterion and returns whether it passed.
pub fn criterion(name: &str, passed: bool, detail: impl std::fmt::Display) -> bool {
    println!(
        "[{}] {name}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    passed
}

/// Random-walk dataset of `rows × n` with weekly timestamps.
pub fn walk_dataset(seed: u64, rows: usize, n: usize) -> timecma::data::SeriesDataset {
    use timecma::data::{Frequency, SeriesDataset, SplitRatio};
    let mut r = rng(seed);
    let mut level: Vec<f32> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
    let mut values = Vec::with_capacity(rows * n);
    for _ in 0..rows {
        for l in level.iter_mut() {
            *l += r.gen_range(-1.0f32..1.0);
            values.push(*l);
        }
    }
    let mut t = chrono::NaiveDate::from_ymd_opt(2002, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let timestamps = (0..rows)
        .map(|_| {
            let cur = t;
            t = Frequency::Weekly.advance(t);
            cur
        })
        .collect();
    let columns = (0..n).map(|j| format!("v{j}")).collect();
    SeriesDataset::new(
        "walk",
        columns,
        values,
        timestamps,
        Frequency::Weekly,
        SplitRatio::SEVEN_ONE_TWO,
    )
    .unwrap()
}
