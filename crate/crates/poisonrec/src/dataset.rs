//! Rating-matrix ingestion, experimental splits, rating-scale transforms, and
//! synthetic dataset generation.
//!
//! Ratings are integers in `[1,5]`; an absent entry means "unrated" (rating 0
//! is never stored). Index maps are built from the ratings file, so user/item
//! counts always reflect the users and items that actually rated or were
//! rated.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;

/// One observed `(user, item, rating)` tuple, indices zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: u8,
}

impl Rating {
    pub fn new(user: u32, item: u32, value: u8) -> Self {
        Rating { user, item, value }
    }
}

/// Sparse matrix of real-user ratings with external-id maps.
#[derive(Debug, Clone)]
pub struct RatingMatrix {
    n_users: usize,
    n_items: usize,
    entries: Vec<Rating>,
    user_offsets: Vec<usize>,
    item_raters: Vec<Vec<(u32, u8)>>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl RatingMatrix {
    /// Validates and indexes the entries: ratings in `[1,5]`, indices in
    /// range, no duplicate `(user, item)` pairs.
    pub fn new(
        n_users: usize,
        n_items: usize,
        mut entries: Vec<Rating>,
        user_ids: Vec<String>,
        item_ids: Vec<String>,
    ) -> Result<Self> {
        if user_ids.len() != n_users || item_ids.len() != n_items {
            return Err(Error::InvalidDimension(format!(
                "id maps ({}, {}) do not match counts ({}, {})",
                user_ids.len(),
                item_ids.len(),
                n_users,
                n_items
            )));
        }
        for r in &entries {
            if r.value < MIN_RATING || r.value > MAX_RATING {
                return Err(Error::RatingOutOfRange(r.value as f64));
            }
            if r.user as usize >= n_users || r.item as usize >= n_items {
                return Err(Error::IndexOutOfRange(format!(
                    "entry ({}, {}) in {}x{} matrix",
                    r.user, r.item, n_users, n_items
                )));
            }
        }
        entries.sort_unstable_by_key(|r| (r.user, r.item));
        for w in entries.windows(2) {
            if w[0].user == w[1].user && w[0].item == w[1].item {
                return Err(Error::DuplicateEntry {
                    user: w[0].user,
                    item: w[0].item,
                });
            }
        }

        let mut user_offsets = vec![0usize; n_users + 1];
        for r in &entries {
            user_offsets[r.user as usize + 1] += 1;
        }
        for u in 0..n_users {
            user_offsets[u + 1] += user_offsets[u];
        }
        let mut item_raters = vec![Vec::new(); n_items];
        for r in &entries {
            item_raters[r.item as usize].push((r.user, r.value));
        }

        Ok(RatingMatrix {
            n_users,
            n_items,
            entries,
            user_offsets,
            item_raters,
            user_ids,
            item_ids,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Ratings of one user, sorted by item index.
    pub fn user_ratings(&self, user: u32) -> &[Rating] {
        let u = user as usize;
        &self.entries[self.user_offsets[u]..self.user_offsets[u + 1]]
    }

    /// `(user, rating)` pairs for one item, sorted by user index.
    pub fn item_ratings(&self, item: u32) -> &[(u32, u8)] {
        &self.item_raters[item as usize]
    }

    pub fn is_rated(&self, user: u32, item: u32) -> bool {
        self.user_ratings(user)
            .binary_search_by_key(&item, |r| r.item)
            .is_ok()
    }

    /// Users that have not rated `item`, ascending.
    pub fn non_raters(&self, item: u32) -> Vec<u32> {
        let raters = self.item_ratings(item);
        let mut out = Vec::with_capacity(self.n_users - raters.len());
        let mut it = raters.iter().peekable();
        for u in 0..self.n_users as u32 {
            if it.peek().map(|(r, _)| *r == u).unwrap_or(false) {
                it.next();
            } else {
                out.push(u);
            }
        }
        out
    }

    /// Per-item histogram over rating values 1..=5.
    pub fn item_histogram(&self, item: u32) -> [usize; 5] {
        let mut h = [0usize; 5];
        for &(_, v) in self.item_ratings(item) {
            h[v as usize - 1] += 1;
        }
        h
    }

    /// Dense `n_users x n_items` copy with 0 for unrated cells.
    pub fn to_dense<S: Scalar>(&self) -> Array2<S> {
        let mut m = Array2::zeros((self.n_users, self.n_items));
        for r in &self.entries {
            m[[r.user as usize, r.item as usize]] = S::cast(r.value as f64);
        }
        m
    }

    pub fn density(&self) -> f64 {
        self.entries.len() as f64 / (self.n_users * self.n_items) as f64
    }

    /// Serializes to the internal CSV form: `user_id,item_id,rating` with a
    /// one-line header, entries sorted by (user, item).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.entries.len() * 12 + 32);
        out.push_str("user_id,item_id,rating\n");
        for r in &self.entries {
            out.push_str(&format!(
                "{},{},{}\n",
                self.user_ids[r.user as usize], self.item_ids[r.item as usize], r.value
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads the internal CSV form written by [`RatingMatrix::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fname = path.display().to_string();
        let mut raw = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (u, it, v) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a.to_string(), b.to_string(), c),
                _ => return Err(Error::parse(&fname, i + 1, "expected user_id,item_id,rating")),
            };
            let v: u8 = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(&fname, i + 1, format!("bad rating {v:?}")))?;
            raw.push((u, it, v));
        }
        if raw.is_empty() {
            return Err(Error::EmptyRatings(fname));
        }
        from_external_ids(raw)
    }
}

/// Builds a [`RatingMatrix`] from external-id tuples; indices are assigned by
/// sorted order of the distinct external ids (numeric ids sort numerically).
fn from_external_ids(raw: Vec<(String, String, u8)>) -> Result<RatingMatrix> {
    fn sorted_ids<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
        let mut ids: Vec<&str> = it.collect();
        ids.sort_unstable_by(|a, b| match (a.parse::<i64>(), b.parse::<i64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.cmp(b),
        });
        ids.dedup();
        ids.into_iter().map(String::from).collect()
    }
    let user_ids = sorted_ids(raw.iter().map(|(u, _, _)| u.as_str()));
    let item_ids = sorted_ids(raw.iter().map(|(_, i, _)| i.as_str()));
    let umap: HashMap<&str, u32> = user_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let imap: HashMap<&str, u32> = item_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let entries = raw
        .iter()
        .map(|(u, i, v)| Rating::new(umap[u.as_str()], imap[i.as_str()], *v))
        .collect();
    RatingMatrix::new(user_ids.len(), item_ids.len(), entries, user_ids, item_ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

/// Optional per-item and per-user side information.
#[derive(Debug, Clone, Default)]
pub struct SideInfo {
    /// Per-item bitset over the genre flags, aligned with `genre_names`.
    pub item_genres: Option<Vec<u32>>,
    pub genre_names: Vec<String>,
    pub user_age: Option<Vec<u16>>,
    pub user_gender: Option<Vec<Gender>>,
}

impl SideInfo {
    /// Items carrying genre flag `g`.
    pub fn items_with_genre(&self, g: usize) -> Option<Vec<u32>> {
        self.item_genres.as_ref().map(|flags| {
            flags
                .iter()
                .enumerate()
                .filter(|(_, f)| *f & (1 << g) != 0)
                .map(|(i, _)| i as u32)
                .collect()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    E1,
    E2a,
    E2b,
}

/// Disjoint train/target/test tuple lists.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub mode: SplitMode,
    pub train: Vec<Rating>,
    pub target: Vec<Rating>,
    pub test: Vec<Rating>,
}

impl DatasetSplit {
    /// Items rated by `user` in the train part, ascending.
    pub fn train_items_of(&self, user: u32) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .train
            .iter()
            .filter(|r| r.user == user)
            .map(|r| r.item)
            .collect();
        v.sort_unstable();
        v
    }
}

/// Splits the dataset. E1 keeps everything in train (targets are unrated
/// cells). E2a holds out one target and one test tuple per user with at least
/// three ratings. E2b holds out per user `floor(0.1 c)` target tuples and the
/// tail beyond `floor(0.8 c)` train tuples as test.
pub fn split(data: &RatingMatrix, mode: SplitMode, seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut target = Vec::new();
    let mut test = Vec::new();

    match mode {
        SplitMode::E1 => {
            train.extend_from_slice(data.entries());
        }
        SplitMode::E2a => {
            for u in 0..data.n_users() as u32 {
                let rows = data.user_ratings(u);
                if rows.len() < 3 {
                    train.extend_from_slice(rows);
                    continue;
                }
                let mut idx: Vec<usize> = (0..rows.len()).collect();
                idx.shuffle(&mut rng);
                let (ti, si) = (idx[0], idx[1]);
                for (i, r) in rows.iter().enumerate() {
                    if i == ti {
                        target.push(*r);
                    } else if i == si {
                        test.push(*r);
                    } else {
                        train.push(*r);
                    }
                }
            }
        }
        SplitMode::E2b => {
            for u in 0..data.n_users() as u32 {
                let rows = data.user_ratings(u);
                let c = rows.len();
                let n_train = (0.8 * c as f64).floor() as usize;
                let n_target = (0.1 * c as f64).floor() as usize;
                let mut idx: Vec<usize> = (0..c).collect();
                idx.shuffle(&mut rng);
                for (pos, &i) in idx.iter().enumerate() {
                    if pos < n_train {
                        train.push(rows[i]);
                    } else if pos < n_train + n_target {
                        target.push(rows[i]);
                    } else {
                        test.push(rows[i]);
                    }
                }
            }
        }
    }
    train.sort_unstable_by_key(|r| (r.user, r.item));
    target.sort_unstable_by_key(|r| (r.user, r.item));
    test.sort_unstable_by_key(|r| (r.user, r.item));
    DatasetSplit {
        mode,
        train,
        target,
        test,
    }
}

/// Affine map from the `[0,5]` rating scale to `[-1,1]`.
pub fn to_symmetric_scale<S: Scalar>(r: S) -> Result<S> {
    if r < S::zero() || r > S::cast(5.0) {
        return Err(Error::ValueOutOfRange {
            value: r.as_f64(),
            lo: 0.0,
            hi: 5.0,
        });
    }
    Ok((r - S::cast(2.5)) / S::cast(2.5))
}

/// Inverse of [`to_symmetric_scale`]: `[-1,1]` back to `[0,5]`.
pub fn from_symmetric_scale<S: Scalar>(v: S) -> Result<S> {
    if v < S::cast(-1.0) || v > S::one() {
        return Err(Error::ValueOutOfRange {
            value: v.as_f64(),
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(v * S::cast(2.5) + S::cast(2.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MovieLensFormat {
    Ml100k,
    Ml1m,
}

/// Reads a MovieLens-format directory. `u.data`/`ratings.dat` is required;
/// side-info files are picked up when present.
pub fn ingest(format: MovieLensFormat, dir: &Path) -> Result<(RatingMatrix, SideInfo)> {
    match format {
        MovieLensFormat::Ml100k => ingest_ml100k(dir),
        MovieLensFormat::Ml1m => ingest_ml1m(dir),
    }
}

fn read_lossy(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn parse_rating_value(s: &str, file: &str, line: usize) -> Result<u8> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(file, line, format!("bad rating {s:?}")))?;
    if v.fract() != 0.0 || !(MIN_RATING as f64..=MAX_RATING as f64).contains(&v) {
        return Err(Error::parse(
            file,
            line,
            format!("rating {v} outside [1,5]"),
        ));
    }
    Ok(v as u8)
}

fn parse_ratings_file(path: &Path, sep: &str) -> Result<Vec<(String, String, u8)>> {
    let text = read_lossy(path)?;
    let fname = path.display().to_string();
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(sep);
        let (u, it, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) if !a.is_empty() && !b.is_empty() => (a, b, c),
            _ => {
                return Err(Error::parse(
                    &fname,
                    i + 1,
                    format!("expected user{sep}item{sep}rating"),
                ))
            }
        };
        let v = parse_rating_value(v, &fname, i + 1)?;
        raw.push((u.trim().to_string(), it.trim().to_string(), v));
    }
    if raw.is_empty() {
        return Err(Error::EmptyRatings(fname));
    }
    Ok(raw)
}

fn id_index(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

const ML100K_GENRES: [&str; 19] = [
    "unknown",
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

fn ingest_ml100k(dir: &Path) -> Result<(RatingMatrix, SideInfo)> {
    let data = from_external_ids(parse_ratings_file(&dir.join("u.data"), "\t")?)?;
    let mut side = SideInfo {
        genre_names: ML100K_GENRES.iter().map(|s| s.to_string()).collect(),
        ..SideInfo::default()
    };

    let item_path = dir.join("u.item");
    if item_path.exists() {
        let text = read_lossy(&item_path)?;
        let fname = item_path.display().to_string();
        let imap = id_index(data.item_ids());
        let mut genres = vec![0u32; data.n_items()];
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() < 20 {
                return Err(Error::parse(&fname, i + 1, "expected >= 20 pipe-separated fields"));
            }
            let Some(&idx) = imap.get(fields[0].trim()) else {
                continue; // item never rated
            };
            let flags = &fields[fields.len() - 19..];
            let mut bits = 0u32;
            for (g, f) in flags.iter().enumerate() {
                match f.trim() {
                    "1" => bits |= 1 << g,
                    "0" | "" => {}
                    other => {
                        return Err(Error::parse(&fname, i + 1, format!("bad genre flag {other:?}")))
                    }
                }
            }
            genres[idx] = bits;
        }
        side.item_genres = Some(genres);
    }

    let user_path = dir.join("u.user");
    if user_path.exists() {
        let text = read_lossy(&user_path)?;
        let fname = user_path.display().to_string();
        let umap = id_index(data.user_ids());
        let mut ages = vec![0u16; data.n_users()];
        let mut genders = vec![Gender::M; data.n_users()];
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() < 3 {
                return Err(Error::parse(&fname, i + 1, "expected id|age|gender|..."));
            }
            let Some(&idx) = umap.get(fields[0].trim()) else {
                continue;
            };
            ages[idx] = fields[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(&fname, i + 1, format!("bad age {:?}", fields[1])))?;
            genders[idx] = match fields[2].trim() {
                "M" | "m" => Gender::M,
                "F" | "f" => Gender::F,
                other => return Err(Error::parse(&fname, i + 1, format!("bad gender {other:?}"))),
            };
        }
        side.user_age = Some(ages);
        side.user_gender = Some(genders);
    }

    Ok((data, side))
}

const ML1M_GENRES: [&str; 18] = [
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

fn ingest_ml1m(dir: &Path) -> Result<(RatingMatrix, SideInfo)> {
    let data = from_external_ids(parse_ratings_file(&dir.join("ratings.dat"), "::")?)?;
    let mut side = SideInfo {
        genre_names: ML1M_GENRES.iter().map(|s| s.to_string()).collect(),
        ..SideInfo::default()
    };

    let movies = dir.join("movies.dat");
    if movies.exists() {
        let text = read_lossy(&movies)?;
        let fname = movies.display().to_string();
        let imap = id_index(data.item_ids());
        let mut genres = vec![0u32; data.n_items()];
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split("::").collect();
            if fields.len() < 3 {
                return Err(Error::parse(&fname, i + 1, "expected id::title::genres"));
            }
            let Some(&idx) = imap.get(fields[0].trim()) else {
                continue;
            };
            let mut bits = 0u32;
            for g in fields[2].trim().split('|') {
                if let Some(pos) = ML1M_GENRES.iter().position(|n| *n == g) {
                    bits |= 1 << pos;
                }
            }
            genres[idx] = bits;
        }
        side.item_genres = Some(genres);
    }

    let users = dir.join("users.dat");
    if users.exists() {
        let text = read_lossy(&users)?;
        let fname = users.display().to_string();
        let umap = id_index(data.user_ids());
        let mut ages = vec![0u16; data.n_users()];
        let mut genders = vec![Gender::M; data.n_users()];
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split("::").collect();
            if fields.len() < 3 {
                return Err(Error::parse(&fname, i + 1, "expected id::gender::age::..."));
            }
            let Some(&idx) = umap.get(fields[0].trim()) else {
                continue;
            };
            genders[idx] = match fields[1].trim() {
                "M" | "m" => Gender::M,
                "F" | "f" => Gender::F,
                other => return Err(Error::parse(&fname, i + 1, format!("bad gender {other:?}"))),
            };
            ages[idx] = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(&fname, i + 1, format!("bad age {:?}", fields[2])))?;
        }
        side.user_age = Some(ages);
        side.user_gender = Some(genders);
    }

    Ok((data, side))
}

/// Writes `data`/`side` as a MovieLens-100K-format directory (`u.data`,
/// `u.item`, `u.user`, `u.genre`). Used by round-trip tests and to
/// materialize synthetic benchmark datasets.
pub fn write_ml100k(dir: &Path, data: &RatingMatrix, side: &SideInfo) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut f = fs::File::create(dir.join("u.data")).map_err(|e| Error::io(dir.join("u.data"), e))?;
    for r in data.entries() {
        writeln!(
            f,
            "{}\t{}\t{}\t0",
            data.user_ids()[r.user as usize],
            data.item_ids()[r.item as usize],
            r.value
        )
        .map_err(|e| Error::io(dir.join("u.data"), e))?;
    }

    if let Some(genres) = &side.item_genres {
        let n_flags = side.genre_names.len().max(19);
        let mut f =
            fs::File::create(dir.join("u.item")).map_err(|e| Error::io(dir.join("u.item"), e))?;
        for (i, id) in data.item_ids().iter().enumerate() {
            let flags: Vec<String> = (0..n_flags)
                .map(|g| if genres[i] & (1 << g) != 0 { "1" } else { "0" }.to_string())
                .collect();
            writeln!(f, "{}|Item {} (1990)|01-Jan-1990||http://example.org|{}", id, id, flags.join("|"))
                .map_err(|e| Error::io(dir.join("u.item"), e))?;
        }
        let mut g =
            fs::File::create(dir.join("u.genre")).map_err(|e| Error::io(dir.join("u.genre"), e))?;
        for (i, name) in side.genre_names.iter().enumerate() {
            writeln!(g, "{name}|{i}").map_err(|e| Error::io(dir.join("u.genre"), e))?;
        }
    }

    if let (Some(ages), Some(genders)) = (&side.user_age, &side.user_gender) {
        let mut f =
            fs::File::create(dir.join("u.user")).map_err(|e| Error::io(dir.join("u.user"), e))?;
        for (u, id) in data.user_ids().iter().enumerate() {
            let g = match genders[u] {
                Gender::M => "M",
                Gender::F => "F",
            };
            writeln!(f, "{}|{}|{}|other|00000", id, ages[u], g)
                .map_err(|e| Error::io(dir.join("u.user"), e))?;
        }
    }
    Ok(())
}

/// Low-rank-plus-noise synthetic ratings: factors are standard normal, the
/// continuous value is `3 + a_i.b_j / sqrt(d) + noise`, rounded and clipped
/// to `[1,5]`; each cell is observed independently with probability
/// `density`.
pub fn synth(
    n: usize,
    m: usize,
    d: usize,
    density: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<RatingMatrix> {
    if n == 0 || m == 0 || d == 0 || d > n.min(m) {
        return Err(Error::InvalidDimension(format!(
            "synth({n}, {m}, {d}): need 0 < d <= min(n, m)"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidDimension(format!(
            "density {density} outside (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = 1.0 / (d as f64).sqrt();
    // Extra constant column shifts the product to mean 3 while the d taste
    // columns contribute unit variance.
    let mut a = Array2::zeros((n, d + 1));
    let mut b = Array2::zeros((m, d + 1));
    for i in 0..n {
        for k in 0..d {
            a[[i, k]] = normal.sample(&mut rng) * scale;
        }
        a[[i, d]] = 3.0;
    }
    for j in 0..m {
        for k in 0..d {
            b[[j, k]] = normal.sample(&mut rng);
        }
        b[[j, d]] = 1.0;
    }
    synth_from_factors(&a, &b, density, noise_sd, seed.wrapping_add(1))
}

/// Deterministic fixture builder behind [`synth`]: ratings are
/// `clip(round(a_i . b_j + noise), 1, 5)` on a Bernoulli(`density`) mask.
pub fn synth_from_factors(
    a: &Array2<f64>,
    b: &Array2<f64>,
    density: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<RatingMatrix> {
    let (n, d) = a.dim();
    let (m, d2) = b.dim();
    if d != d2 || n == 0 || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "factor shapes {n}x{d} and {m}x{d2}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if density < 1.0 && rng.gen::<f64>() >= density {
                continue;
            }
            let mut x = a.row(i).dot(&b.row(j));
            if noise_sd > 0.0 {
                x += noise_sd * normal.sample(&mut rng);
            }
            let r = x.round().clamp(MIN_RATING as f64, MAX_RATING as f64) as u8;
            entries.push(Rating::new(i as u32, j as u32, r));
        }
    }
    let user_ids = (1..=n).map(|i| i.to_string()).collect();
    let item_ids = (1..=m).map(|i| i.to_string()).collect();
    RatingMatrix::new(n, m, entries, user_ids, item_ids)
}

/// Synthetic dataset with MovieLens-100K-like statistics: 943 users, 1682
/// items, about 100k ratings with long-tailed item popularity, a low-rank
/// taste structure plus user/item biases, and correlated genre/age/gender
/// side information. Serves as the benchmark substrate when the real dataset
/// is not on disk.
pub fn synth_ml100k_like(seed: u64) -> (RatingMatrix, SideInfo) {
    let n = 943usize;
    let m = 1682usize;
    let q = 12usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let user_f = Array2::from_shape_fn((n, q), |_| normal.sample(&mut rng));
    let item_f = Array2::from_shape_fn((m, q), |_| normal.sample(&mut rng));
    let user_bias: Vec<f64> = (0..n).map(|_| 0.45 * normal.sample(&mut rng)).collect();
    let item_bias: Vec<f64> = (0..m).map(|_| 0.35 * normal.sample(&mut rng)).collect();

    // Long-tailed item popularity (log-normal weights).
    let weights: Vec<f64> = (0..m).map(|_| (1.15 * normal.sample(&mut rng)).exp()).collect();

    // Per-user rating counts: log-normal, floored at 20 like the real data,
    // scaled towards ~100k total.
    let mut counts: Vec<usize> = (0..n)
        .map(|_| {
            let c = (4.32 + 0.78 * normal.sample(&mut rng)).exp();
            (c.round() as usize).clamp(20, 737)
        })
        .collect();
    let total: usize = counts.iter().sum();
    let factor = 100_000.0 / total as f64;
    for c in counts.iter_mut() {
        *c = ((*c as f64 * factor).round() as usize).clamp(20, 737).min(m);
    }

    let taste_scale = 0.8 / (q as f64).sqrt();
    let mut entries = Vec::new();
    for u in 0..n {
        // Weighted sampling without replacement (Efraimidis-Spirakis keys).
        let mut keys: Vec<(f64, u32)> = (0..m)
            .map(|j| {
                let r: f64 = rng.gen::<f64>().max(1e-300);
                (r.ln() / weights[j], j as u32)
            })
            .collect();
        keys.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for &(_, j) in keys.iter().take(counts[u]) {
            let taste = user_f.row(u).dot(&item_f.row(j as usize)) * taste_scale;
            let x = 3.53 + user_bias[u] + item_bias[j as usize] + taste
                + 0.4 * normal.sample(&mut rng);
            let r = x.round().clamp(1.0, 5.0) as u8;
            entries.push(Rating::new(u as u32, j, r));
        }
    }

    let user_ids = (1..=n).map(|i| i.to_string()).collect();
    let item_ids = (1..=m).map(|i| i.to_string()).collect();
    let data = RatingMatrix::new(n, m, entries, user_ids, item_ids).expect("valid fixture");

    // Genres follow latent directions so that groups correlate with taste.
    let n_genres = 19usize;
    let genre_dirs = Array2::from_shape_fn((n_genres, q), |_| normal.sample(&mut rng));
    let mut item_genres = vec![0u32; m];
    for j in 0..m {
        let mut bits = 0u32;
        for g in 1..n_genres {
            let score = genre_dirs.row(g).dot(&item_f.row(j)) / (q as f64).sqrt();
            if score > 0.95 {
                bits |= 1 << g;
            }
        }
        if bits == 0 {
            bits = 1; // "unknown"
        }
        item_genres[j] = bits;
    }

    let mut ages = vec![0u16; n];
    let mut genders = vec![Gender::M; n];
    for u in 0..n {
        let a = 34.0 + 6.0 * user_f[[u, 1]] + 8.0 * normal.sample(&mut rng);
        ages[u] = a.round().clamp(7.0, 73.0) as u16;
        let p_male = 1.0 / (1.0 + (-(0.7 * user_f[[u, 0]] + 0.9)).exp());
        genders[u] = if rng.gen::<f64>() < p_male {
            Gender::M
        } else {
            Gender::F
        };
    }

    let side = SideInfo {
        item_genres: Some(item_genres),
        genre_names: ML100K_GENRES.iter().map(|s| s.to_string()).collect(),
        user_age: Some(ages),
        user_gender: Some(genders),
    };
    (data, side)
}

/// Dataset source used by configs and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Ml100k { path: PathBuf },
    Ml1m { path: PathBuf },
    Csv { path: PathBuf },
    Synth {
        users: usize,
        items: usize,
        rank: usize,
        density: f64,
        noise_sd: f64,
        seed: u64,
    },
    Ml100kLike { seed: u64 },
}

impl DatasetSource {
    pub fn load(&self) -> Result<(RatingMatrix, SideInfo)> {
        match self {
            DatasetSource::Ml100k { path } => ingest(MovieLensFormat::Ml100k, path),
            DatasetSource::Ml1m { path } => ingest(MovieLensFormat::Ml1m, path),
            DatasetSource::Csv { path } => Ok((RatingMatrix::read_csv(path)?, SideInfo::default())),
            DatasetSource::Synth {
                users,
                items,
                rank,
                density,
                noise_sd,
                seed,
            } => Ok((
                synth(*users, *items, *rank, *density, *noise_sd, *seed)?,
                SideInfo::default(),
            )),
            DatasetSource::Ml100kLike { seed } => Ok(synth_ml100k_like(*seed)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_matrix() -> RatingMatrix {
        RatingMatrix::new(
            3,
            4,
            vec![
                Rating::new(0, 0, 5),
                Rating::new(0, 1, 3),
                Rating::new(1, 0, 1),
                Rating::new(2, 3, 4),
            ],
            vec!["1".into(), "2".into(), "3".into()],
            vec!["1".into(), "2".into(), "3".into(), "4".into()],
        )
        .unwrap()
    }

    #[test]
    fn rejects_duplicates_and_bad_ratings() {
        let dup = RatingMatrix::new(
            2,
            2,
            vec![Rating::new(0, 0, 3), Rating::new(0, 0, 4)],
            vec!["1".into(), "2".into()],
            vec!["1".into(), "2".into()],
        );
        assert!(matches!(dup, Err(Error::DuplicateEntry { .. })));
        let bad = RatingMatrix::new(
            1,
            1,
            vec![Rating::new(0, 0, 6)],
            vec!["1".into()],
            vec!["1".into()],
        );
        assert!(matches!(bad, Err(Error::RatingOutOfRange(_))));
        let oob = RatingMatrix::new(
            1,
            1,
            vec![Rating::new(1, 0, 3)],
            vec!["1".into()],
            vec!["1".into()],
        );
        assert!(matches!(oob, Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn lookup_helpers() {
        let m = tiny_matrix();
        assert!(m.is_rated(0, 1));
        assert!(!m.is_rated(1, 1));
        assert_eq!(m.non_raters(0), vec![2]);
        assert_eq!(m.item_histogram(0), [1, 0, 0, 0, 1]);
        assert_eq!(m.user_ratings(2).len(), 1);
    }

    #[test]
    fn scale_transform_examples() {
        assert_abs_diff_eq!(to_symmetric_scale(0.0f64).unwrap(), -1.0);
        assert_abs_diff_eq!(to_symmetric_scale(5.0f64).unwrap(), 1.0);
        assert_abs_diff_eq!(to_symmetric_scale(2.5f64).unwrap(), 0.0);
        assert_abs_diff_eq!(
            from_symmetric_scale(to_symmetric_scale(3.0f64).unwrap()).unwrap(),
            3.0
        );
        assert!(to_symmetric_scale(-0.1f64).is_err());
        assert!(to_symmetric_scale(5.1f64).is_err());
        assert!(from_symmetric_scale(1.5f64).is_err());
    }

    #[test]
    fn e2b_split_proportions() {
        // One user with 10 ratings: 8 train, 1 target, 1 test.
        let entries: Vec<Rating> = (0..10).map(|j| Rating::new(0, j, 3)).collect();
        let ids: Vec<String> = (1..=10).map(|i| i.to_string()).collect();
        let m = RatingMatrix::new(1, 10, entries, vec!["1".into()], ids).unwrap();
        let s = split(&m, SplitMode::E2b, 1);
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.target.len(), 1);
        assert_eq!(s.test.len(), 1);
    }

    #[test]
    fn e2a_small_users_stay_in_train() {
        let entries = vec![Rating::new(0, 0, 3), Rating::new(0, 1, 4)];
        let m = RatingMatrix::new(
            1,
            2,
            entries,
            vec!["1".into()],
            vec!["1".into(), "2".into()],
        )
        .unwrap();
        let s = split(&m, SplitMode::E2a, 9);
        assert_eq!(s.train.len(), 2);
        assert!(s.target.is_empty() && s.test.is_empty());
    }

    #[test]
    fn split_determinism_and_partition() {
        let m = synth(30, 20, 3, 0.5, 0.2, 5).unwrap();
        for mode in [SplitMode::E1, SplitMode::E2a, SplitMode::E2b] {
            let a = split(&m, mode, 42);
            let b = split(&m, mode, 42);
            assert_eq!(a.train, b.train);
            assert_eq!(a.target, b.target);
            assert_eq!(a.test, b.test);

            let mut all: Vec<Rating> = a
                .train
                .iter()
                .chain(a.target.iter())
                .chain(a.test.iter())
                .copied()
                .collect();
            all.sort_unstable_by_key(|r| (r.user, r.item));
            assert_eq!(all, m.entries());
        }
        let a = split(&m, SplitMode::E2b, 1);
        let b = split(&m, SplitMode::E2b, 2);
        assert_ne!(a.train, b.train);
    }

    #[test]
    fn e2b_mean_train_fraction() {
        // 1000 synthetic users with >= 10 ratings each.
        let mut entries = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for u in 0..1000u32 {
            let c = rng.gen_range(10..60);
            let mut items: Vec<u32> = (0..100).collect();
            items.shuffle(&mut rng);
            for &j in items.iter().take(c) {
                entries.push(Rating::new(u, j, 3));
            }
        }
        let uids = (1..=1000).map(|i| i.to_string()).collect();
        let iids = (1..=100).map(|i| i.to_string()).collect();
        let m = RatingMatrix::new(1000, 100, entries, uids, iids).unwrap();
        let s = split(&m, SplitMode::E2b, 7);
        let mut per_user_train = vec![0usize; 1000];
        let mut per_user_total = vec![0usize; 1000];
        for r in s.train.iter() {
            per_user_train[r.user as usize] += 1;
        }
        for r in m.entries() {
            per_user_total[r.user as usize] += 1;
        }
        let mean: f64 = (0..1000)
            .map(|u| per_user_train[u] as f64 / per_user_total[u] as f64)
            .sum::<f64>()
            / 1000.0;
        assert!((0.75..=0.85).contains(&mean), "mean train fraction {mean}");
    }

    #[test]
    fn synth_entry_counts() {
        let m = synth(40, 60, 3, 0.3, 0.1, 7).unwrap();
        let expected = 40.0 * 60.0 * 0.3;
        let sd = (40.0 * 60.0 * 0.3 * 0.7f64).sqrt();
        assert!(
            (m.len() as f64 - expected).abs() < 4.0 * sd,
            "observed {} vs expected {expected}",
            m.len()
        );
        let full = synth(10, 8, 2, 1.0, 0.0, 7).unwrap();
        assert_eq!(full.len(), 80);

        let a = synth(25, 25, 4, 0.4, 0.3, 11).unwrap();
        let b = synth(25, 25, 4, 0.4, 0.3, 11).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn synth_constant_matrix() {
        // All-ones factors scaled to 3 with no noise: every rating is 3.
        let a = Array2::from_elem((6, 1), 3.0);
        let b = Array2::from_elem((5, 1), 1.0);
        let m = synth_from_factors(&a, &b, 1.0, 0.0, 0).unwrap();
        assert_eq!(m.len(), 30);
        assert!(m.entries().iter().all(|r| r.value == 3));
    }

    #[test]
    fn synth_rejects_bad_dims() {
        assert!(synth(0, 5, 1, 0.5, 0.0, 0).is_err());
        assert!(synth(5, 5, 6, 0.5, 0.0, 0).is_err());
        assert!(synth(5, 5, 2, 0.0, 0.0, 0).is_err());
        assert!(synth(5, 5, 2, 1.5, 0.0, 0).is_err());
    }

    #[test]
    fn csv_round_trip_identity() {
        let m = synth(12, 9, 2, 0.6, 0.2, 13).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.csv");
        m.write_csv(&path).unwrap();
        let m2 = RatingMatrix::read_csv(&path).unwrap();
        assert_eq!(m.n_users(), m2.n_users());
        assert_eq!(m.n_items(), m2.n_items());
        assert_eq!(m.entries(), m2.entries());
        assert_eq!(m.user_ids(), m2.user_ids());
        // Second round trip is bit-identical.
        let path2 = dir.path().join("ratings2.csv");
        m2.write_csv(&path2).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            fs::read_to_string(&path2).unwrap()
        );
    }

    #[test]
    fn ml100k_round_trip() {
        let (data, side) = synth_ml100k_like_small();
        let dir = tempfile::tempdir().unwrap();
        write_ml100k(dir.path(), &data, &side).unwrap();
        let (data2, side2) = ingest(MovieLensFormat::Ml100k, dir.path()).unwrap();
        assert_eq!(data.n_users(), data2.n_users());
        assert_eq!(data.n_items(), data2.n_items());
        assert_eq!(data.entries(), data2.entries());
        assert_eq!(side.item_genres, side2.item_genres);
        assert_eq!(side.user_age, side2.user_age);
        assert_eq!(side.user_gender, side2.user_gender);
    }

    // A reduced analogue of the full fixture for fast format tests.
    fn synth_ml100k_like_small() -> (RatingMatrix, SideInfo) {
        let data = synth(20, 15, 2, 0.5, 0.3, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let side = SideInfo {
            item_genres: Some((0..15).map(|_| 1 << rng.gen_range(0..19)).collect()),
            genre_names: ML100K_GENRES.iter().map(|s| s.to_string()).collect(),
            user_age: Some((0..20).map(|_| rng.gen_range(10..70)).collect()),
            user_gender: Some(
                (0..20)
                    .map(|_| if rng.gen::<bool>() { Gender::M } else { Gender::F })
                    .collect(),
            ),
        };
        (data, side)
    }

    #[test]
    fn ingest_error_paths() {
        let dir = tempfile::tempdir().unwrap();
        // Missing file.
        assert!(matches!(
            ingest(MovieLensFormat::Ml100k, dir.path()),
            Err(Error::Io { .. })
        ));
        // Empty ratings file.
        fs::write(dir.path().join("u.data"), "").unwrap();
        assert!(matches!(
            ingest(MovieLensFormat::Ml100k, dir.path()),
            Err(Error::EmptyRatings(_))
        ));
        // Malformed line reports the line number.
        fs::write(dir.path().join("u.data"), "1\t1\t5\t0\nnot-a-line\n").unwrap();
        match ingest(MovieLensFormat::Ml100k, dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        // Rating outside [1,5].
        fs::write(dir.path().join("u.data"), "1\t1\t0\t0\n").unwrap();
        assert!(ingest(MovieLensFormat::Ml100k, dir.path()).is_err());
    }

    #[test]
    fn ml1m_format_parses() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("ratings.dat"),
            "1::10::5::978300760\n1::11::3::978300761\n2::10::4::978300762\n",
        )
        .unwrap();
        fs::write(
            dir.path().join("movies.dat"),
            "10::Movie A (1995)::Comedy|Romance\n11::Movie B (1995)::Action\n",
        )
        .unwrap();
        fs::write(dir.path().join("users.dat"), "1::F::25::1::00000\n2::M::35::2::00000\n").unwrap();
        let (data, side) = ingest(MovieLensFormat::Ml1m, dir.path()).unwrap();
        assert_eq!(data.n_users(), 2);
        assert_eq!(data.n_items(), 2);
        assert_eq!(data.len(), 3);
        assert_eq!(side.user_gender.as_deref(), Some(&[Gender::F, Gender::M][..]));
        let genres = side.item_genres.unwrap();
        assert_ne!(genres[0] & (1 << 4), 0, "Comedy flag set");
    }

    #[test]
    fn ml100k_like_fixture_statistics() {
        let (data, side) = synth_ml100k_like(1);
        assert_eq!(data.n_users(), 943);
        assert_eq!(data.n_items(), 1682);
        assert!(
            (90_000..=110_000).contains(&data.len()),
            "total ratings {}",
            data.len()
        );
        let min_count = (0..943u32)
            .map(|u| data.user_ratings(u).len())
            .min()
            .unwrap();
        assert!(min_count >= 20, "min user count {min_count}");
        assert!(side.item_genres.is_some() && side.user_age.is_some());
        // Deterministic.
        let (data2, _) = synth_ml100k_like(1);
        assert_eq!(data.entries(), data2.entries());
    }
}
