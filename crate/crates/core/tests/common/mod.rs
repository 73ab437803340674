//! Shared helpers for integration tests: independent oracles and fixtures.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random simple digraph on ids `1..=n`, each ordered pair present with
/// probability `p`.
pub fn random_pairs(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(u64, u64)> {
    let mut pairs = Vec::new();
    for a in 1..=n as u64 {
        for b in 1..=n as u64 {
            if a != b && rng.gen_bool(p) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Brute-force centrality on an adjacency matrix, using Floyd–Warshall hop
/// distances. Returns `(lc, sc, gc, ni)` per node index.
pub struct Oracle {
    pub n: usize,
    adj: Vec<Vec<bool>>,
    dist: Vec<Vec<Option<usize>>>,
}

impl Oracle {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            adj[a][b] = true;
        }
        let mut dist = vec![vec![None; n]; n];
        for i in 0..n {
            dist[i][i] = Some(0);
            for j in 0..n {
                if adj[i][j] {
                    dist[i][j] = Some(1);
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if let (Some(a), Some(b)) = (dist[i][k], dist[k][j]) {
                        if dist[i][j].is_none_or(|d| a + b < d) {
                            dist[i][j] = Some(a + b);
                        }
                    }
                }
            }
        }
        Oracle { n, adj, dist }
    }

    fn out(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.adj[i][j]).collect()
    }

    pub fn clustering(&self, i: usize) -> f64 {
        let o = self.out(i);
        let k = o.len();
        if k < 2 {
            return 0.0;
        }
        let mut links = 0;
        for &u in &o {
            for &v in &o {
                if u != v && self.adj[u][v] {
                    links += 1;
                }
            }
        }
        links as f64 / (k * (k - 1)) as f64
    }

    pub fn lc(&self, i: usize) -> f64 {
        let spread: usize = self.out(i).iter().map(|&j| self.out(j).len() + 1).sum();
        if spread == 0 {
            return 0.0;
        }
        10f64.powf(-self.clustering(i)) * spread as f64
    }

    fn two_hop(&self, w: usize) -> usize {
        (0..self.n)
            .filter(|&x| x != w && matches!(self.dist[w][x], Some(1) | Some(2)))
            .count()
    }

    pub fn sc(&self, i: usize) -> f64 {
        let mut total = 0;
        for u in self.out(i) {
            for w in self.out(u) {
                total += self.two_hop(w);
            }
        }
        total as f64
    }

    pub fn gc(&self, i: usize) -> f64 {
        let mut reached = 0usize;
        let mut sum = 0usize;
        for j in 0..self.n {
            if j != i {
                if let Some(d) = self.dist[i][j] {
                    reached += 1;
                    sum += d;
                }
            }
        }
        if reached == 0 {
            return 0.0;
        }
        let share = reached as f64 / (self.n - 1) as f64;
        share * share / sum as f64
    }

    pub fn ni(&self, i: usize) -> f64 {
        (self.gc(i).exp() - 1.0) * self.lc(i) * self.sc(i)
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Ordinary least squares with intercept via the normal equations and
/// Gauss-Jordan elimination with partial pivoting. Returns `(intercept, beta)`.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
    let d = x[0].len() + 1;
    let mut a = vec![vec![0.0; d + 1]; d];
    for (row, &yi) in x.iter().zip(y) {
        let mut z = vec![1.0];
        z.extend(row);
        for r in 0..d {
            for c in 0..d {
                a[r][c] += z[r] * z[c];
            }
            a[r][d] += z[r] * yi;
        }
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        let lead = a[col][col];
        for v in a[col].iter_mut() {
            *v /= lead;
        }
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..=d {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let sol: Vec<f64> = a.iter().map(|r| r[d]).collect();
    (sol[0], sol[1..].to_vec())
}

pub const GENRES: [&str; 5] = ["Blues", "Country", "Electronic", "Jazz", "Pop/Rock"];

/// Writes a seeded influence table and song table to `dir`, returning their
/// paths. Artists are spread over five genres with distinct feature centers;
/// most influence edges point forward in time.
pub fn write_fixture(dir: &Path, seed: u64, artists: usize) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let info: Vec<(u64, &str, i32)> = (0..artists)
        .map(|i| {
            let id = 1000 + i as u64 * 7;
            let genre = GENRES[i % GENRES.len()];
            let start = 1930 + 10 * rng.gen_range(0..9);
            (id, genre, start)
        })
        .collect();
    let mut influence = String::from(
        "influencer_id,influencer_name,influencer_main_genre,influencer_active_start,\
         follower_id,follower_name,follower_main_genre,follower_active_start\n",
    );
    for (fi, &(fid, fg, fs)) in info.iter().enumerate() {
        let k = rng.gen_range(1..=4);
        for _ in 0..k {
            let ii = rng.gen_range(0..artists);
            if ii == fi {
                continue;
            }
            let (iid, ig, is) = info[ii];
            influence.push_str(&format!(
                "{iid},\"Artist {iid}\",{ig},{is},{fid},\"Artist {fid}\",{fg},{fs}\n"
            ));
        }
    }
    let mut songs = String::from(
        "artist_ids,danceability,energy,valence,tempo,loudness,mode,key,acousticness,\
         instrumentalness,liveness,speechiness,explicit,duration_ms,popularity,year\n",
    );
    for (i, &(id, _, start)) in info.iter().enumerate() {
        let g = (i % GENRES.len()) as f64;
        for s in 0..3 {
            let unit = |rng: &mut ChaCha8Rng, c: f64| (c + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0);
            let c = 0.1 + 0.18 * g;
            let row = format!(
                "\"[{id}]\",{:.4},{:.4},{:.4},{:.2},{:.2},{},{},{:.4},{:.4},{:.4},{:.4},{},{:.0},{:.0},{}\n",
                unit(&mut rng, c),
                unit(&mut rng, 0.9 - c),
                unit(&mut rng, c),
                80.0 + 20.0 * g + rng.gen_range(-5.0..5.0),
                -20.0 + 3.0 * g + rng.gen_range(-1.0..1.0),
                rng.gen_range(0..2),
                rng.gen_range(0..12),
                unit(&mut rng, 0.9 - c),
                unit(&mut rng, c * 0.5),
                unit(&mut rng, 0.2),
                unit(&mut rng, 0.05 + 0.02 * g),
                0,
                180000.0 + 20000.0 * g + rng.gen_range(-5000.0..5000.0),
                20.0 + 10.0 * g + rng.gen_range(-3.0..3.0),
                start + s * 3,
            );
            songs.push_str(&row);
        }
    }
    let ip = dir.join("influence_data.csv");
    let sp = dir.join("full_music_data.csv");
    std::fs::write(&ip, influence).unwrap();
    std::fs::write(&sp, songs).unwrap();
    (ip, sp)
}

/// Every file under `dir` (recursively) mapped to its bytes, keyed by the
/// path relative to `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, at: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(at).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Drops the `timestamp` line from manifest files so runs can be compared.
pub fn without_timestamps(mut snap: BTreeMap<String, Vec<u8>>) -> BTreeMap<String, Vec<u8>> {
    for (path, bytes) in snap.iter_mut() {
        if path.ends_with("manifest.json") {
            let text = String::from_utf8(bytes.clone()).unwrap();
            let kept: Vec<&str> = text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect();
            *bytes = kept.join("\n").into_bytes();
        }
    }
    snap
}
