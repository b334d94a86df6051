use clap::Args;
use openadmm::admm::{admm_tick, AdmmParams, AgentCosts, NetworkState};
use openadmm::costs::CostModel;
use openadmm::graph::random_graph;
use openadmm::oracles::{
    centralized_solve, compact_tick, tsi_fixed_point, CompactOperatorMatrices, EdgeStates, MAX_DENSE_AGENTS,
};
use openadmm::simulation::rep_rng;
use openadmm::{Error, Result};
use rand::Rng;

const EQUIVALENCE_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-9;
const PROX_TOL: f64 = 1e-8;
const MAX_AGENTS: usize = 8;

#[derive(Args)]
pub struct OracleArgs {
    /// Largest network size; each trial draws 2..=n agents.
    #[arg(long, default_value_t = MAX_AGENTS)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub ticks: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fixed relaxation; drawn per trial when absent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fixed penalty; drawn per trial when absent.
    #[arg(long)]
    pub rho: Option<f64>,
}

fn model(kind: usize, u: f64) -> CostModel {
    match kind % 3 {
        0 => CostModel::ConsensusAvg { u },
        1 => CostModel::ConsensusMax { u },
        _ => CostModel::ConsensusMedian { u },
    }
}

/// Scalar prox by bisection on the right derivative of the prox objective.
fn bisection_prox(kind: usize, u: f64, v: f64, w: f64) -> f64 {
    let slope = |y: f64| {
        let f = match kind % 3 {
            0 => y - u,
            1 if y < u => f64::NEG_INFINITY,
            1 => y - u,
            _ if y >= u => 1.0,
            _ => -1.0,
        };
        f + w * (y - v)
    };
    let (mut lo, mut hi) = (u.min(v) - 1.0, u.max(v) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn max_gap(a: &EdgeStates, b: &EdgeStates) -> f64 {
    a.iter()
        .map(|(e, v)| {
            b.get(e).map_or(f64::INFINITY, |w| v.iter().zip(w).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
        })
        .fold(0.0, f64::max)
}

#[derive(Default)]
struct Residuals {
    equivalence: f64,
    fixed_point: f64,
    prox: f64,
}

fn trial(args: &OracleArgs, t: usize, out: &mut Residuals) -> Result<()> {
    let mut rng = rep_rng(args.seed, t as u64, 0);
    let n = rng.gen_range(2..=args.n);
    let g = random_graph(n, rng.gen_range(0.0..1.0), &mut rng);
    let kind = t % 3;
    let costs = AgentCosts::from_models(g.agents().map(|a| (a, model(kind, rng.gen_range(-5.0..5.0)))))?;
    let alpha = args.alpha.unwrap_or_else(|| rng.gen_range(0.05..0.99));
    let rho = args.rho.unwrap_or_else(|| rng.gen_range(0.1..3.0));
    let params = AdmmParams::new(alpha, rho)?;

    let x0: EdgeStates = g.ordered_edges().map(|e| (e, vec![rng.gen_range(-10.0..10.0)])).collect();
    let mut s = NetworkState::from_edge_states(&g, x0, &costs, &params)?;
    let m = CompactOperatorMatrices::new(&g, 1, rho)?;
    let (mut x, mut y) = (m.stack_x(&s.x)?, m.stack_y(&s.y)?);
    for _ in 0..args.ticks {
        s = admm_tick(&s, &g, &g, &costs, &params)?;
        (x, y) = compact_tick(&x, &y, &m, &costs, alpha)?;
        let dy = s.y.values().flatten().zip(y.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        out.equivalence = out.equivalence.max(max_gap(&s.x, &m.unstack_x(&x))).max(dy);
    }

    let y_star = centralized_solve(&costs)?.y_star;
    let xf = tsi_fixed_point(&g, &costs, &y_star, rho)?;
    let sf = NetworkState::from_edge_states(&g, xf.clone(), &costs, &params)?;
    out.fixed_point = out.fixed_point.max(max_gap(&xf, &admm_tick(&sf, &g, &g, &costs, &params)?.x));

    for _ in 0..100 {
        let (u, v) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let w = 10f64.powf(rng.gen_range(-3.0..3.0));
        for k in 0..3 {
            let closed = model(k, u).prox(&[v], w)?[0];
            out.prox = out.prox.max((closed - bisection_prox(k, u, v, w)).abs());
        }
    }
    Ok(())
}

/// Runs every check; `Ok(false)` when a residual exceeds its tolerance.
pub fn run(args: &OracleArgs) -> Result<bool> {
    if args.n < 2 || args.n > MAX_AGENTS.min(MAX_DENSE_AGENTS) {
        return Err(Error::InvalidConfig(format!("--n must lie in 2..={MAX_AGENTS} (got {})", args.n)));
    }
    if let Some(a) = args.alpha {
        AdmmParams::new(a, args.rho.unwrap_or(1.0))?;
    }
    if let Some(r) = args.rho {
        AdmmParams::new(args.alpha.unwrap_or(0.5), r)?;
    }
    let mut res = Residuals::default();
    for t in 0..args.trials {
        trial(args, t, &mut res)?;
    }
    println!("equivalence {:e}", res.equivalence);
    println!("fixed_point {:e}", res.fixed_point);
    println!("prox {:e}", res.prox);
    let checks = [
        ("equivalence", res.equivalence, EQUIVALENCE_TOL),
        ("fixed_point", res.fixed_point, FIXED_POINT_TOL),
        ("prox", res.prox, PROX_TOL),
    ];
    match checks.iter().find(|(_, r, tol)| !(r <= tol)) {
        Some((name, r, tol)) => {
            eprintln!("{name} residual {r:e} exceeds {tol:e}");
            Ok(false)
        }
        None => Ok(true),
    }
}
