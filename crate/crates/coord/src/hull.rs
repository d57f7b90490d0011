//! Inner approximation of a subproblem's feasible set by certified vertices,
//! and the augmented-Lagrangian minimization over their convex hull.

/// A certified integer-feasible point of one subproblem.
#[derive(Clone, Debug)]
pub struct Vertex {
    pub id: u64,
    pub x: Vec<f64>,
    /// Boundary slice `Q x`.
    pub qx: Vec<f64>,
    /// Subproblem objective at `x`.
    pub f: f64,
    /// Last outer iteration with positive hull weight.
    pub last_used: usize,
}

#[derive(Clone, Debug)]
pub struct VertexSet {
    pub vertices: Vec<Vertex>,
    pub cap: usize,
    pub dedup_tol: f64,
    next_id: u64,
}

impl VertexSet {
    pub fn new(cap: usize) -> Self {
        Self {
            vertices: Vec::new(),
            cap: cap.max(1),
            dedup_tol: 1e-9,
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    /// Adds a point unless one within the dedup tolerance is present; returns
    /// the id of the stored point either way. Past the cap, the vertex unused
    /// for longest (oldest first on ties) is evicted, never `keep`.
    pub fn add(&mut self, x: Vec<f64>, qx: Vec<f64>, f: f64, k: usize, keep: Option<u64>) -> (u64, bool) {
        if let Some(v) = self.vertices.iter().find(|v| {
            v.x.len() == x.len() && v.x.iter().zip(&x).all(|(a, b)| (a - b).abs() <= self.dedup_tol)
        }) {
            return (v.id, false);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.vertices.push(Vertex {
            id,
            x,
            qx,
            f,
            last_used: k,
        });
        while self.vertices.len() > self.cap {
            let victim = self
                .vertices
                .iter()
                .enumerate()
                .filter(|(_, v)| Some(v.id) != keep && v.id != id)
                .min_by_key(|(_, v)| (v.last_used, v.id))
                .map(|(i, _)| i);
            match victim {
                Some(i) => {
                    self.vertices.remove(i);
                }
                None => break,
            }
        }
        (id, true)
    }
}

#[derive(Clone, Debug)]
pub struct HullPoint {
    /// Weight per vertex, in vertex-set order.
    pub theta: Vec<f64>,
    pub qx: Vec<f64>,
    /// Convex combination of vertex objectives.
    pub f: f64,
    /// `f + w'(Qx - z) + rho/2 |Qx - z|^2`.
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap stopped the solve.
    pub exact: bool,
}

pub const HULL_TOL: f64 = 1e-8;
pub const HULL_MAX_ITER: usize = 10_000;

/// Euclidean projection onto the unit simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

fn lagrangian(f: f64, qx: &[f64], w: &[f64], z: &[f64], rho: f64) -> f64 {
    let mut lin = 0.0;
    let mut sq = 0.0;
    for i in 0..qx.len() {
        let r = qx[i] - z[i];
        lin += w[i] * r;
        sq += r * r;
    }
    f + lin + 0.5 * rho * sq
}

fn combine(set: &VertexSet, theta: &[f64]) -> (Vec<f64>, f64) {
    let m = set.vertices[0].qx.len();
    let mut qx = vec![0.0; m];
    let mut f = 0.0;
    for (v, &t) in set.vertices.iter().zip(theta) {
        if t == 0.0 {
            continue;
        }
        f += t * v.f;
        for i in 0..m {
            qx[i] += t * v.qx[i];
        }
    }
    (qx, f)
}

fn point(set: &VertexSet, theta: Vec<f64>, w: &[f64], z: &[f64], rho: f64, iterations: usize, exact: bool) -> HullPoint {
    let (qx, f) = combine(set, &theta);
    let value = lagrangian(f, &qx, w, z, rho);
    HullPoint {
        theta,
        qx,
        f,
        value,
        iterations,
        exact,
    }
}

/// Minimizes the augmented Lagrangian over conv(D) in simplex weights with
/// accelerated projected gradient (momentum restarted whenever the objective
/// rises). The result is never worse than the best single vertex.
pub fn minimize_over_hull(set: &VertexSet, w: &[f64], z: &[f64], rho: f64) -> HullPoint {
    let n = set.len();
    assert!(n > 0, "empty vertex set");
    let vertex_value = |j: usize| lagrangian(set.vertices[j].f, &set.vertices[j].qx, w, z, rho);
    let best = (0..n)
        .min_by(|&a, &b| vertex_value(a).partial_cmp(&vertex_value(b)).unwrap().then(a.cmp(&b)))
        .unwrap();
    let one_hot = |j: usize| {
        let mut t = vec![0.0; n];
        t[j] = 1.0;
        t
    };
    if n == 1 {
        return point(set, one_hot(0), w, z, rho, 0, true);
    }
    let m = set.vertices[0].qx.len();
    // c_j = f_j + w'q_j - rho z'q_j ; H = rho G'G.
    let c: Vec<f64> = set
        .vertices
        .iter()
        .map(|v| v.f + (0..m).map(|i| (w[i] - rho * z[i]) * v.qx[i]).sum::<f64>())
        .collect();
    let mut h = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let d: f64 = (0..m).map(|i| set.vertices[a].qx[i] * set.vertices[b].qx[i]).sum::<f64>() * rho;
            h[a][b] = d;
            h[b][a] = d;
        }
    }
    // Largest eigenvalue of H by power iteration, padded.
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lmax = 0.0;
    for _ in 0..100 {
        let hv: Vec<f64> = (0..n).map(|a| (0..n).map(|b| h[a][b] * v[b]).sum()).collect();
        let norm = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lmax = norm;
        v = hv.into_iter().map(|x| x / norm).collect();
    }
    if lmax <= 1e-14 {
        return point(set, one_hot(best), w, z, rho, 0, true);
    }
    let lip = lmax * 1.05 + 1e-12;
    let obj = |t: &[f64]| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            if t[a] == 0.0 {
                continue;
            }
            let ht: f64 = (0..n).map(|b| h[a][b] * t[b]).sum();
            s += t[a] * (c[a] + 0.5 * ht);
        }
        s
    };
    let grad = |t: &[f64]| -> Vec<f64> { (0..n).map(|a| c[a] + (0..n).map(|b| h[a][b] * t[b]).sum::<f64>()).collect() };

    let mut x = one_hot(best);
    let mut y = x.clone();
    let mut mom: f64 = 1.0;
    let mut fx = obj(&x);
    let mut exact = false;
    let mut it = 0;
    while it < HULL_MAX_ITER {
        it += 1;
        let gy = grad(&y);
        let step: Vec<f64> = (0..n).map(|a| y[a] - gy[a] / lip).collect();
        let xn = project_simplex(&step);
        let fxn = obj(&xn);
        if fxn > fx {
            // Restart momentum from the last accepted point.
            y = x.clone();
            mom = 1.0;
            let gx = grad(&x);
            let xs = project_simplex(&(0..n).map(|a| x[a] - gx[a] / lip).collect::<Vec<_>>());
            let fxs = obj(&xs);
            if fxs <= fx {
                x = xs;
                fx = fxs;
            }
        } else {
            let mn = 0.5 * (1.0 + (1.0 + 4.0 * mom * mom).sqrt());
            y = (0..n).map(|a| xn[a] + (mom - 1.0) / mn * (xn[a] - x[a])).collect();
            mom = mn;
            x = xn;
            fx = fxn;
        }
        let gx = grad(&x);
        let px = project_simplex(&(0..n).map(|a| x[a] - gx[a] / lip).collect::<Vec<_>>());
        let gm = (0..n).map(|a| (x[a] - px[a]) * lip).map(|d| d * d).sum::<f64>().sqrt();
        if gm <= HULL_TOL {
            exact = true;
            break;
        }
    }
    let p = point(set, x, w, z, rho, it, exact);
    let vb = vertex_value(best);
    if p.value > vb {
        return point(set, one_hot(best), w, z, rho, it, exact);
    }
    p
}
